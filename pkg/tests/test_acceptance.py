"""Acceptance criteria, one PASS/FAIL line each (shown in the terminal summary).

Every criterion runs at its stated tolerance and runtime budget.  Where an
oracle is needed it is computed here, independently of the library code
under test.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from decoup.caps import cap_family, omega_regions, tau_decompose
from decoup.harness import (ENSEMBLE_KINDS, Ensemble, SweepConfig, curvature, decoupling_ratio,
                            recursion_iterate, recursion_profile, sweep)
from decoup.oscillo import FrequencyFunction, SpacePointSet
from decoup.rescale import check_phase_conditions, conjugate, verify_conjugation
from grid_compare import family_agreement


def report(n: int, title: str, ok: bool, detail: str, elapsed: float, budget: float | None):
    within = budget is None or elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    limit = f" (limit {budget:g} s)" if budget is not None else ""
    line = f"[{status}] criterion {n}: {title}: {detail}; {elapsed:.1f} s{limit}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert within, line


def frac(v) -> Fraction:
    return v.to_fraction()


def brute_flatness(a: float, b: float, n: int = 4097) -> float:
    """Largest gap between t^4 and its secant, by dense sampling."""
    t = np.linspace(a, b, n)
    secant = a ** 4 + (b ** 4 - a ** 4) / (b - a) * (t - a)
    return float(np.max(secant - t ** 4))


# -- 1. partition ------------------------------------------------------------

def test_partition_suite():
    t0 = time.perf_counter()
    bad = []
    worst = (math.inf, 0.0)
    for R in (2 ** 4, 2 ** 8, 2 ** 12, 2 ** 16):
        fam = cap_family(R, 2, 3)
        axes = fam.axis_lists[0]
        ends = [(frac(iv.lo), frac(iv.hi)) for iv in axes]
        # exact tiling of [0, 1]: consecutive, no gaps, no overlaps
        if ends[0][0] != 0 or ends[-1][1] != 1 or any(
                ends[i][1] != ends[i + 1][0] or ends[i][0] >= ends[i][1] for i in range(len(ends) - 1)):
            bad.append(f"R={R} axis tiling")
        if any(lst != axes for lst in fam.axis_lists):
            bad.append(f"R={R} axes differ")
        count = 1 + (math.isqrt(R) - 1) / 3
        if len(axes) != count or len(fam) != len(axes) ** 3:
            bad.append(f"R={R} count {len(axes)} != {count}")
        shortest = min(hi - lo for lo, hi in ends)
        if shortest != Fraction(2, math.isqrt(R)):
            bad.append(f"R={R} min length {shortest}")
        # every sampled point lies in exactly one box; beyond 2^12 the family is
        # checked as a product of the (already verified) axis tilings
        rng = np.random.default_rng(R)
        if R <= 2 ** 12:
            caps = fam.caps
            if sum(frac(c.volume) for c in caps) != 1:
                bad.append(f"R={R} volume")
            lo = np.array([c.lo for c in caps])
            hi = np.array([c.hi for c in caps])
            pts = np.vstack([rng.random((150, 3)), lo[rng.choice(len(lo), 50)], np.ones((1, 3))])
            for x in pts:
                inside = np.all((lo <= x) & ((x < hi) | (hi == 1.0)), axis=1)
                if inside.sum() != 1:
                    bad.append(f"R={R} point {x} in {inside.sum()} boxes")
                    break
        else:
            lo1 = np.array([float(a) for a, _ in ends])
            hi1 = np.array([float(b) for _, b in ends])
            t = np.concatenate([rng.random(2000), lo1, [1.0]])
            hits = ((lo1[None, :] <= t[:, None]) & ((t[:, None] < hi1[None, :]) | (hi1 == 1.0))).sum(1)
            if np.any(hits != 1):
                bad.append(f"R={R} axis coverage")
        for iv, (a, b) in zip(axes, ends):
            fl = brute_flatness(float(a), float(b)) * R
            worst = (min(worst[0], fl), max(worst[1], fl))
            if not 0.5 <= fl <= 8:
                bad.append(f"R={R} {iv.label()} flatness*R={fl:.4f}")
    detail = (f"flatness*R in [{worst[0]:.4f}, {worst[1]:.4f}] vs [1/2, 8]; "
              + ("all exact checks hold" if not bad else f"{len(bad)} violations, first {bad[0]}"))
    report(1, "partition suite", not bad, detail, time.perf_counter() - t0, 5)


# -- 2. conjugation ------------------------------------------------------------

def direct_sum(xi, amps, phase_axes, x):
    """``sum_k c_k e(x' xi_k + t phi(xi_k))`` with phi a sum of per-axis polynomials."""
    phi = sum(np.polynomial.polynomial.polyval(xi[:, j], c) for j, c in enumerate(phase_axes))
    arg = x[:, :3] @ xi.T + x[:, 3:4] * phi[None, :]
    return np.exp(2j * np.pi * arg) @ amps


def test_conjugation_identities():
    t0 = time.perf_counter()
    R, K, tol = 256, 16, 1e-9
    rng = np.random.default_rng(0)
    pts = SpacePointSet.monte_carlo(4, R, 100, seed=0)
    worst, worst_oracle, n = 0.0, 0.0, 0
    quartic = [(0, 0, 0, 0, 1)] * 3
    for kind in ("f4", "f4mixed", "f4tilde"):
        fam = cap_family(R, 2, 3, kind)
        for idx in rng.choice(len(fam), 20, replace=False):
            cap = fam.caps[int(idx)]
            xi = cap.lo + rng.random((8, 3)) * (cap.hi - cap.lo)
            amps = np.exp(2j * np.pi * rng.random(8))
            f = FrequencyFunction.atomic(xi, amps)
            worst = max(worst, verify_conjugation(f, cap, 2, pts, K=K).max_rel_error)
            # hand-built map: xi = a + w eta, x~_j = w_j (x_j + 4 a_j^3 t), t~ = t / K,
            # psi_j(eta) = K (6 a^2 w^2 eta^2 + 4 a w^3 eta^3 + w^4 eta^4)
            a, w = cap.lo, cap.hi - cap.lo
            eta = (xi - a) / w
            x = pts.points
            xt = np.column_stack([w * (x[:, :3] + 4 * a ** 3 * x[:, 3:4]), x[:, 3] / K])
            psi = [(0, 0, K * 6 * aj ** 2 * wj ** 2, K * 4 * aj * wj ** 3, K * wj ** 4)
                   for aj, wj in zip(a, w)]
            left = np.abs(direct_sum(xi, amps, quartic, x))
            right = np.abs(direct_sum(eta, amps, psi, xt))
            worst_oracle = max(worst_oracle, float(np.max(np.abs(left - right)) / np.max(left)))
            n += 1
    ok = worst <= tol and worst_oracle <= tol
    report(2, "conjugation identities", ok,
           f"{n} caps, max rel error {worst:.2e} (hand-built map {worst_oracle:.2e}) vs {tol:g}",
           time.perf_counter() - t0, 30)


# -- 3. certificates ---------------------------------------------------------

def test_phase_certificates():
    t0 = time.perf_counter()
    problems = []
    stats = {"min_d2": math.inf, "max_d2": 0.0, "d3": 0.0, "d4": 0.0}
    flat = 0
    for K in (16, 256):
        regions = omega_regions(K)
        for cap in tau_decompose(regions[7]):
            reps = check_phase_conditions(conjugate(cap, 2, K=K).phase_out)
            for rep, ax in zip(reps, cap.axes):
                a, b = frac(ax.lo), frac(ax.hi)
                w = b - a
                # psi'' = 12 K w^2 (a + w eta)^2 is monotone on [0, 1]; psi''' and psi'''' peak at eta = 1
                exact = (12 * K * w * w * a * a, 12 * K * w * w * b * b, 24 * K * w ** 3 * b,
                         24 * K * w ** 4)
                got = (rep.min_d2, rep.max_d2, rep.max_abs_d3, rep.max_abs_d4)
                if any(abs(g - float(e)) > 1e-12 * max(1.0, float(e)) for g, e in zip(got, exact)):
                    problems.append(f"K={K} {cap.label()} reports {got}, exact {exact}")
                stats["min_d2"] = min(stats["min_d2"], float(exact[0]))
                stats["max_d2"] = max(stats["max_d2"], float(exact[1]))
                stats["d3"] = max(stats["d3"], float(exact[2]))
                stats["d4"] = max(stats["d4"], float(exact[3]))
                if not rep.higher_zero:
                    problems.append(f"K={K} {cap.label()} has higher derivatives")
        for reg in regions[1:7]:
            for cap in tau_decompose(reg):
                reps = check_phase_conditions(conjugate(cap, 2, K=K).phase_out)
                for j, rep in enumerate(reps):
                    if j not in reg.large_axes:
                        flat += 1
                        if rep.min_d2 != 0:
                            problems.append(f"K={K} omega{reg.index} axis {j} min d2 {rep.min_d2}")
    if stats["min_d2"] < 6 or stats["max_d2"] > 48 or stats["d3"] > 48 or stats["d4"] > 24:
        problems.append(f"bounds {stats}")
    detail = (f"phi'' in [{stats['min_d2']:g}, {stats['max_d2']:g}], |phi'''| <= {stats['d3']:g}, "
              f"phi'''' <= {stats['d4']:g}; {flat} flat axes with min phi'' = 0"
              + ("" if not problems else f"; {len(problems)} problems, first {problems[0]}"))
    report(3, "phase certificates", not problems, detail, time.perf_counter() - t0, 5)


# -- 4. oracle agreement -------------------------------------------------------

def test_oracle_agreement():
    t0 = time.perf_counter()
    rows = family_agreement(16, 1 / 16, [2.0, 10 / 3]) + family_agreement(256, 1 / 4, [2.0, 10 / 3])
    failed = [r for r in rows if not r.ok]
    for r in failed:
        print(r)
    worst = max(abs(r.mc - r.grid) / r.bound for r in rows)
    report(4, "Monte Carlo vs dense grid (d = 1)", not failed,
           f"{len(rows)} lhs/rhs/ratio comparisons over {len(ENSEMBLE_KINDS)} ensembles, "
           f"worst |diff| / bound = {worst:.2f}", time.perf_counter() - t0, 120)


# -- 5. p = 2 -------------------------------------------------------------------

def test_p2_sanity():
    t0 = time.perf_counter()
    ratios = {}
    for d in (1, 3):
        for R in (2 ** 4, 2 ** 8, 2 ** 12):
            fam = cap_family(R, 2, d)
            for kind in ENSEMBLE_KINDS:
                rec = decoupling_ratio(Ensemble(kind, seed=0), 2.0, R, fam,
                                       rhs_weight="indicator", budget=20_000, seed=0)
                ratios[(d, R, kind)] = rec.ratio
    top = max(ratios, key=ratios.get)
    ok = all(v <= 4 for v in ratios.values())
    report(5, "p = 2 ratio <= 4", ok,
           f"{len(ratios)} runs, ratio in [{min(ratios.values()):.3f}, {ratios[top]:.3f}] "
           f"(max at d={top[0]} R={top[1]} {top[2]})", time.perf_counter() - t0, 600)


# -- 6 and 9. growth exponent and determinism ----------------------------------

GROWTH = dict(R_list=[2 ** 4, 2 ** 8, 2 ** 12], p_list=[10 / 3], d=3,
              ensembles=[Ensemble("random_phase")], seeds=[0, 1, 2], rhs_weight="paper")


@pytest.fixture(scope="module")
def growth_run():
    t0 = time.perf_counter()
    res = sweep(SweepConfig(**GROWTH, workers=4))
    return res, time.perf_counter() - t0


def test_growth_exponent(growth_run):
    res, elapsed = growth_run
    fit = res.fits[0]
    ok = not res.failures and fit.epsilon <= 0.3
    medians = ", ".join(f"{R}: {m:.3f}" for R, m in zip(fit.Rs, fit.medians))
    report(6, "growth exponent d = 3, p = 10/3", ok,
           f"eps_hat = {fit.epsilon:.3f} vs 0.3 (median ratios {medians})", elapsed, 1800)


def test_determinism(growth_run):
    first, _ = growth_run
    t0 = time.perf_counter()
    again = sweep(SweepConfig(**GROWTH, workers=1))
    same = [a.identity() == b.identity() for a, b in zip(first.records, again.records)]
    ok = len(first.records) == len(again.records) and all(same)
    report(9, "determinism across thread counts", ok,
           f"{sum(same)}/{len(first.records)} records identical (4 threads vs 1)",
           time.perf_counter() - t0, None)


# -- 7. curvature ---------------------------------------------------------------

def test_curvature():
    t0 = time.perf_counter()
    exact = curvature((1, 1, 1))[0]
    ok = exact == 1728 and curvature((1.0, 1.0, 1.0))[0] == 1728.0
    rng = np.random.default_rng(7)
    nonzero = 0
    for j in range(3):
        pts = rng.random((1000, 3))
        pts[:, j] = 0.0
        for xi in pts:
            nonzero += curvature(xi)[0] != 0.0
        q = [tuple(Fraction(int(v), 997) for v in row)
             for row in rng.integers(0, 998, (1000, 3))]
        for xi in q:
            xi = xi[:j] + (Fraction(0),) + xi[j + 1:]
            nonzero += curvature(xi)[0] != 0
    ok = ok and nonzero == 0
    report(7, "curvature", ok, f"kappa(1,1,1) = {exact}; {nonzero} nonzero values on the planes",
           time.perf_counter() - t0, 1)


# -- 8. recursion -----------------------------------------------------------------

def closed_form(C, K, eps, n, a=4.0):
    g = 2 * C * K ** eps
    terms = [g ** i * K ** ((n - i) * eps) for i in range(n - 1)] + [g ** (n - 1)]
    return C * K ** a * math.fsum(terms)


def test_recursion():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(10):
        C = float(rng.uniform(0.05, 3))
        K = 2 ** int(rng.integers(1, 13))
        eps = float(rng.uniform(0, 0.5))
        n = int(rng.integers(1, 9))
        ref = closed_form(C, K, eps, n)
        worst = max(worst, abs(recursion_iterate(C, K, eps, K ** n) - ref) / ref)
    rises = 0
    for _ in range(10):
        k = int(rng.integers(2, 17))
        K = 2 ** k
        eps = float(rng.uniform(2 / k, 1.0))  # K^-eps <= 1/4
        C = float(rng.uniform(0.05, 1.0))
        prof = recursion_profile(C, K, eps, 8)
        rises += int(np.any(np.diff(prof[1:]) > 1e-12 * prof[1:-1]))
    ok = worst <= 1e-12 and rises == 0
    report(8, "recursion", ok,
           f"max rel error vs closed form {worst:.1e}; {rises}/10 profiles increase after step one",
           time.perf_counter() - t0, 1)
