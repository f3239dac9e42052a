import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decoup.caps import (AxisInterval, axis_intervals, box_cap, cap_family, check_family_tiling,
                         check_tiles_box, dumps_family, family_from_json, family_to_csv,
                         flatness, locate, locate_many, omega_regions, refinement_map,
                         tau_decompose, uniform_intervals, unit_cube)
from decoup.dyadic import DyadicRational
from decoup.errors import NonDyadicScale, NotNested, OutOfDomain, UnsupportedRegion
from oracles import dense_flatness, enumerate_axis

D = DyadicRational.from_fraction
F = Fraction


def bounds(ivs):
    return [(iv.lo.to_fraction(), iv.hi.to_fraction()) for iv in ivs]


# -- axis intervals ----------------------------------------------------------

def test_axis_r16():
    ivs = axis_intervals(16, 2)
    assert bounds(ivs) == [(0, F(1, 2)), (F(1, 2), 1)]
    assert ivs[0].tag == "flat" and (ivs[1].tag, ivs[1].k, ivs[1].mu) == ("dyadic", 1, 1)


def test_axis_r256():
    assert bounds(axis_intervals(256, 2)) == [
        (0, F(1, 4)), (F(1, 4), F(1, 2)), (F(1, 2), F(5, 8)), (F(5, 8), F(3, 4)),
        (F(3, 4), F(7, 8)), (F(7, 8), 1)]


@pytest.mark.parametrize("J", range(1, 6))
def test_axis_matches_enumeration(J):
    R = 2 ** (4 * J)
    assert bounds(axis_intervals(R, 2)) == enumerate_axis(R)
    assert len(axis_intervals(R, 2)) == 1 + (math.isqrt(R) - 1) // 3


def test_count_r4096():
    assert len(axis_intervals(4096, 2)) == 22


@pytest.mark.parametrize("R", [15, 32, 2 ** 6, 0, -16, 3.5])
def test_non_dyadic_scales(R):
    with pytest.raises(NonDyadicScale):
        axis_intervals(R, 2)


@pytest.mark.parametrize("m,R", [(1, 4), (1, 64), (3, 64), (3, 4096), (4, 256), (4, 2 ** 16)])
def test_general_m_tiles_and_is_flat(m, R):
    # a piece of [lam, 2 lam] has length lam^(1-m) R^(-1/2), and phi'' varies by
    # 2^(2m-2) over the block, so flatness * R sits in [c, c 2^(2m-2)], c = m(2m-1)/4
    ivs = axis_intervals(R, m)
    check_family_tiling(cap_family(R, m, 1))
    c = m * (2 * m - 1) / 4
    for iv in ivs[1:]:
        assert c * (1 - 1e-12) <= flatness(iv, m) * R <= c * 4 ** (m - 1) * (1 + 1e-12)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_general_m_flatness_independent_of_R(m):
    # t -> t/s maps the family at scale R onto itself up to the factor 1/R in t^(2m),
    # so the bracket below does not move as R grows
    n = 2 * m
    floor = (n - 1) / n * n ** (-1 / (n - 1))  # flat block: secant gap of t^n on [0, 1]
    ceiling = m * (2 * m - 1) / 4 * 4 ** (m - 1)
    for J in (1, 2, 3):
        R = 2 ** (2 * m * J)
        vals = [flatness(iv, m) * R for iv in axis_intervals(R, m)]
        assert min(vals) == pytest.approx(floor, rel=1e-12)
        assert max(vals) <= ceiling * (1 + 1e-12)


def test_general_m_rejects():
    with pytest.raises(NonDyadicScale):
        axis_intervals(256, 3)


def test_min_length_and_uniform():
    for J in range(1, 5):
        R = 2 ** (4 * J)
        assert min(iv.length for iv in axis_intervals(R)) == D(F(2, math.isqrt(R)))
        assert {iv.length for iv in uniform_intervals(R)} == {D(F(1, math.isqrt(R)))}


# -- families ----------------------------------------------------------------

def test_family_counts():
    assert len(cap_family(256, 2, 3, "f4")) == 216
    assert len(cap_family(256, 2, 3, "f4mixed", (0,))) == 576
    assert len(cap_family(16, 2, 1, "f4")) == 2
    assert cap_family(256, 2, 3, "f4tilde").shape == (16, 16, 6)
    assert len(cap_family(256, 2, 3, "uniform")) == 16 ** 3


@pytest.mark.parametrize("kind", ["f4", "f4mixed", "f4tilde", "uniform"])
@pytest.mark.parametrize("R", [16, 256])
def test_family_tiles_exactly(kind, R):
    fam = cap_family(R, 2, 3, kind)
    check_family_tiling(fam)
    if len(fam) <= 5000:
        check_tiles_box(fam.caps, unit_cube(3))


def test_tiling_checks_detect_defects():
    a = box_cap([(0, F(1, 2))])
    b = box_cap([(F(1, 4), 1)])
    with pytest.raises(ValueError):
        check_tiles_box([a, b], unit_cube(1))
    with pytest.raises(ValueError):
        check_tiles_box([a], unit_cube(1))
    with pytest.raises(ValueError):
        check_tiles_box([box_cap([(0, F(1, 2)), (0, 1)]), box_cap([(F(1, 2), 1), (0, F(1, 2))]),
                         box_cap([(0, F(1, 2)), (F(1, 2), 1)])], unit_cube(2))


def test_bad_kind_and_axes():
    with pytest.raises(ValueError):
        cap_family(16, 2, 3, "nope")
    with pytest.raises(ValueError):
        cap_family(16, 2, 3, "f4mixed", (3,))


# -- locate ------------------------------------------------------------------

def test_locate_examples():
    fam = cap_family(256, 2, 3)
    cap = fam.caps[locate((0.3, 0.6, 0.9), fam)]
    assert [a.label() for a in cap.axes] == ["theta_{1,1}", "theta_{2,1}", "theta_{2,4}"]
    assert all(a.tag == "flat" for a in fam.caps[locate((0, 0, 0), fam)].axes)
    fam16 = cap_family(16, 2, 3)
    assert bounds(fam16.caps[locate((1, 1, 1), fam16)].axes) == [(F(1, 2), 1)] * 3


def test_locate_half_open():
    fam = cap_family(16, 2, 1)
    assert locate((0.5,), fam) == 1
    assert locate((np.nextafter(0.5, 0),), fam) == 0


@pytest.mark.parametrize("bad", [(-0.1, 0, 0), (0, 1.0001, 0), (np.nan, 0, 0)])
def test_locate_out_of_domain(bad):
    with pytest.raises(OutOfDomain):
        locate(bad, cap_family(16, 2, 3))


@pytest.mark.parametrize("kind", ["f4", "f4mixed", "f4tilde", "uniform"])
def test_locate_centres(kind):
    fam = cap_family(256, 2, 3, kind)
    centres = np.array([c.center for c in fam.caps])
    assert np.array_equal(locate_many(centres, fam), np.arange(len(fam)))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_locate_member(xi):
    fam = cap_family(4096, 2, 3)
    cap = fam.caps[locate(xi, fam)]
    for t, ax in zip(xi, cap.axes):
        lo, hi = ax.bounds
        assert lo <= t and (t < hi or hi == 1.0)


# -- regions -----------------------------------------------------------------

def test_omega_regions_k16():
    regs = omega_regions(16)
    assert [tuple(map(DyadicRational.to_fraction, b)) for b in regs[0].box] == [(0, F(1, 2))] * 3
    assert [tuple(map(DyadicRational.to_fraction, b)) for b in regs[7].box] == [(F(1, 2), 1)] * 3
    assert sum((r.volume for r in regs), D(0)) == D(1)
    check_tiles_box([r.as_cap() for r in regs], unit_cube(3))
    assert [r.large_axes for r in regs[1:4]] == [(0,), (1,), (2,)]


def test_tau_examples():
    regs = omega_regions(16)
    taus = tau_decompose(regs[7])
    assert len(taus) == 1 and bounds(taus[0].axes) == [(F(1, 2), 1)] * 3
    regs = omega_regions(256)
    taus = tau_decompose(regs[1])
    half = [t for t in taus if t.axes[0].lo == D(F(1, 2))]
    lengths = {t.axes[0].length for t in taus if t.axes[0].lo >= D(F(1, 2))}
    assert lengths == {D(F(1, 8))}
    assert len({t.axes[0] for t in taus if t.axes[0].lo >= D(F(1, 2))}) == 4
    assert half and all(bounds(t.axes[1:]) == [(0, F(1, 4))] * 2 for t in half)


@pytest.mark.parametrize("K", [16, 256, 4096])
def test_tau_tiles_region(K):
    for reg in omega_regions(K)[1:]:
        taus = tau_decompose(reg)
        check_tiles_box(taus, reg.as_cap())
        assert sum((t.volume for t in taus), D(0)) == reg.volume


def test_tau_region_zero():
    with pytest.raises(UnsupportedRegion):
        tau_decompose(omega_regions(16)[0])


def test_omega_rejects():
    with pytest.raises(NonDyadicScale):
        omega_regions(100)
    with pytest.raises(NonDyadicScale):
        omega_regions(1)


# -- flatness ----------------------------------------------------------------

def test_flatness_dyadic_example():
    iv = axis_intervals(256)[-1]
    assert bounds([iv]) == [(F(7, 8), 1)]
    assert 1.5 / 256 <= flatness(iv) <= 6 / 256


def test_flatness_flat_block_closed_form():
    # secant of t^4 through (0,0),(s,s^4): gap peaks at t = s 4^(-1/3)
    for R in (16, 256, 4096):
        s = R ** -0.25
        assert flatness(axis_intervals(R)[0]) == pytest.approx(0.75 * 4 ** (-1 / 3) * s ** 4, rel=1e-14)


def test_flatness_parabola():
    for lo, hi in [(0, F(1, 2)), (F(3, 8), F(1, 2)), (F(1, 2), 1)]:
        iv = AxisInterval(D(lo), D(hi))
        assert flatness(iv, 1) == pytest.approx(float(hi - lo) ** 2 / 4, rel=1e-14)


@pytest.mark.parametrize("R", [16, 256, 4096])
def test_flatness_matches_dense_sampling(R):
    for iv in axis_intervals(R):
        a, b = iv.bounds
        assert flatness(iv) == pytest.approx(dense_flatness(a, b, 4), rel=1e-6)


def test_flatness_envelope():
    for R in (256, 4096, 2 ** 16):
        for iv in axis_intervals(R)[1:]:
            a, b = iv.bounds
            ell = b - a
            assert 12 * a * a * ell ** 2 / 8 <= flatness(iv) * (1 + 1e-12)
            assert flatness(iv) <= 12 * b * b * ell ** 2 / 8 * (1 + 1e-12)


# -- refinement --------------------------------------------------------------

def test_refinement_examples():
    fine, coarse = cap_family(256), cap_family(16)
    mp = refinement_map(coarse, fine)
    assert len(mp) == 216 and set(mp) <= set(range(8))
    for i, c in enumerate(fine.caps):
        assert coarse.caps[mp[i]].contains(c)
    assert axis_intervals(16)[0].contains(axis_intervals(256)[0])
    assert axis_intervals(16)[1].contains(axis_intervals(256)[2])


@pytest.mark.parametrize("R", [256, 4096, 2 ** 16])
def test_refinement_never_raises(R):
    refinement_map(cap_family(R // 16, 2, 2), cap_family(R, 2, 2))


def test_refinement_not_nested():
    with pytest.raises(NotNested):
        refinement_map(cap_family(256, 2, 1), cap_family(16, 2, 1))


# -- serialisation -----------------------------------------------------------

@pytest.mark.parametrize("kind", ["f4", "f4mixed", "f4tilde", "uniform"])
def test_json_round_trip(kind):
    fam = cap_family(256, 2, 2, kind)
    text = dumps_family(fam)
    obj = json.loads(text)
    assert set(obj) == {"R", "m", "d", "kind", "uniform_axes", "caps"}
    assert set(obj["caps"][0]["axes"][0]) == {"lo_num", "lo_exp", "hi_num", "hi_exp", "tag"}
    again = family_from_json(obj)
    assert again == fam
    assert [c.axes for c in again.caps] == [c.axes for c in fam.caps]


def test_csv():
    text = family_to_csv(cap_family(16, 2, 2))
    lines = text.strip().splitlines()
    assert lines[0] == "index,lo1,hi1,tag1,lo2,hi2,tag2"
    assert len(lines) == 5
    assert lines[-1] == "3,0.5,1.0,dyadic:1:1,0.5,1.0,dyadic:1:1"
