"""Interval and cap families on [0,1]^d with exact dyadic endpoints.

The anisotropic family for the phase t**(2m) at scale R keeps a flat
block ``[0, R**(-1/(2m))]`` next to the degenerate point and splits each
dyadic block ``[2**(k-1) s, 2**k s]`` (``s = R**(-1/(2m))``) into
``2**(m(k-1))`` equal pieces, so every piece deviates from its secant by
about ``1/R``.  For m = 2 that is the familiar ``2**(2(k-1))`` split and
the per-axis count is ``1 + (sqrt(R) - 1)/3``.

All geometry is exact: endpoints are :class:`DyadicRational` and tiling
checks never touch floating point.  Boxes are half-open ``[lo, hi)``
except at the coordinate 1, which belongs to the last box.
"""

from __future__ import annotations

import bisect
import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .dyadic import ONE, ZERO, DyadicRational, log2_exact
from .errors import DegenerateBox, NonDyadicScale, NotNested, OutOfDomain, UnsupportedRegion

KINDS = ("f4", "f4mixed", "f4tilde", "uniform")


@dataclass(frozen=True)
class AxisInterval:
    lo: DyadicRational
    hi: DyadicRational
    tag: str = "uniform"  # "flat" | "dyadic" | "uniform"
    k: int = 0
    mu: int = 0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DegenerateBox(f"empty interval [{self.lo}, {self.hi}]")
        if self.tag not in ("flat", "dyadic", "uniform"):
            raise ValueError(f"unknown tag {self.tag!r}")

    @property
    def length(self) -> DyadicRational:
        return self.hi - self.lo

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.lo), float(self.hi)

    @property
    def tag_string(self) -> str:
        if self.tag == "dyadic":
            return f"dyadic:{self.k}:{self.mu}"
        return self.tag

    @classmethod
    def from_tag_string(cls, lo, hi, tag: str) -> AxisInterval:
        if tag.startswith("dyadic:"):
            _, k, mu = tag.split(":")
            return cls(lo, hi, "dyadic", int(k), int(mu))
        return cls(lo, hi, tag)

    def label(self) -> str:
        if self.tag == "flat":
            return "theta_0"
        if self.tag == "dyadic":
            return f"theta_{{{self.k},{self.mu}}}"
        return f"[{self.lo},{self.hi}]"

    def contains(self, other: AxisInterval) -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


@dataclass(frozen=True)
class Cap:
    axes: tuple[AxisInterval, ...]
    family_id: str = ""

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def volume(self) -> DyadicRational:
        vol = ONE
        for ax in self.axes:
            vol = vol * ax.length
        return vol

    @property
    def lo(self) -> np.ndarray:
        return np.array([float(a.lo) for a in self.axes])

    @property
    def hi(self) -> np.ndarray:
        return np.array([float(a.hi) for a in self.axes])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, other: Cap) -> bool:
        return all(a.contains(b) for a, b in zip(self.axes, other.axes))

    def label(self) -> str:
        return " x ".join(a.label() for a in self.axes)


def box_cap(bounds: Sequence[tuple], family_id: str = "box") -> Cap:
    """Cap from explicit ``(lo, hi)`` pairs (ints, Fractions or DyadicRationals)."""
    axes = tuple(AxisInterval(_dy(lo), _dy(hi), "uniform") for lo, hi in bounds)
    return Cap(axes, family_id)


def unit_cube(d: int) -> Cap:
    return box_cap([(0, 1)] * d, family_id="unit")


def _dy(value) -> DyadicRational:
    if isinstance(value, DyadicRational):
        return value
    return DyadicRational.from_fraction(Fraction(value))


def scale_exponent(R: int, m: int = 2, what: str = "R") -> int:
    """Return J with ``R**(1/(2m)) == 2**J``; raise NonDyadicScale otherwise."""
    if m < 1:
        raise ValueError("half-degree m must be >= 1")
    try:
        e = log2_exact(R, what)
    except NonDyadicScale:
        raise NonDyadicScale(f"{what}={R}: {what}^(1/{2 * m}) is not a power of 2") from None
    if e < 0 or e % (2 * m):
        raise NonDyadicScale(f"{what}={R}: {what}^(1/{2 * m}) is not a power of 2")
    return e // (2 * m)


def axis_intervals(R: int, m: int = 2) -> list[AxisInterval]:
    """The flat block plus the dyadic pieces of [0, 1], in increasing order."""
    J = scale_exponent(R, m)
    s = DyadicRational.pow2(-J)
    out = [AxisInterval(ZERO, s, "flat")]
    for k in range(1, J + 1):
        start = s.scale_pow2(k - 1)
        count = 1 << (m * (k - 1))
        step = s.scale_pow2((k - 1) * (1 - m))
        for mu in range(1, count + 1):
            lo = start + step * (mu - 1)
            out.append(AxisInterval(lo, lo + step, "dyadic", k, mu))
    return out


def uniform_intervals(R: int, m: int = 2) -> list[AxisInterval]:
    """``R**(1/2)`` blocks of length ``R**(-1/2)``."""
    J = scale_exponent(R, m)
    n = m * J
    step = DyadicRational.pow2(-n)
    return [AxisInterval(step * a, step * (a + 1), "uniform") for a in range(1 << n)]


@dataclass(frozen=True)
class CapFamily:
    """A product partition of [0,1]^d, one interval list per axis."""

    R: int
    m: int
    d: int
    kind: str
    uniform_axes: tuple[int, ...]
    axis_lists: tuple[tuple[AxisInterval, ...], ...] = field(repr=False)

    @property
    def family_id(self) -> str:
        extra = "" if self.kind != "f4mixed" else "-u" + "".join(str(a) for a in self.uniform_axes)
        return f"{self.kind}{extra}-R{self.R}-m{self.m}-d{self.d}"

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axis_lists)

    def __len__(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def caps(self) -> list[Cap]:
        fid = self.family_id
        return [Cap(tuple(axes), fid) for axes in itertools.product(*self.axis_lists)]

    @cached_property
    def _los(self) -> list[list[float]]:
        return [[float(iv.lo) for iv in axis] for axis in self.axis_lists]

    def axis_index(self) -> np.ndarray:
        """``(ncaps, d)`` integer array: per-axis interval index of each cap."""
        grids = np.meshgrid(*[np.arange(n) for n in self.shape], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def flat_index(self, idx: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def __eq__(self, other):
        if not isinstance(other, CapFamily):
            return NotImplemented
        return (self.R, self.m, self.d, self.kind, self.uniform_axes, self.axis_lists) == (
            other.R, other.m, other.d, other.kind, other.uniform_axes, other.axis_lists)

    def __hash__(self):
        return hash((self.R, self.m, self.d, self.kind, self.uniform_axes))


def cap_family(R: int, m: int = 2, d: int = 3, kind: str = "f4",
               uniform_axes: Iterable[int] | None = None) -> CapFamily:
    """Build one of the cap families.

    ``kind`` is ``"f4"`` (every axis anisotropic), ``"f4mixed"`` (the axes in
    ``uniform_axes``, 0-based, default ``(0,)``, use ``R**(-1/2)`` blocks),
    ``"f4tilde"`` (all axes uniform except the last) or ``"uniform"``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown family kind {kind!r}; expected one of {KINDS}")
    if d < 1:
        raise ValueError("d must be >= 1")
    if kind == "f4":
        uni: tuple[int, ...] = ()
    elif kind == "f4mixed":
        uni = tuple(sorted(set(uniform_axes if uniform_axes is not None else (0,))))
        if any(a < 0 or a >= d for a in uni):
            raise ValueError(f"uniform axes {uni} out of range for d={d}")
    elif kind == "f4tilde":
        if d < 2:
            raise ValueError("f4tilde needs d >= 2")
        uni = tuple(range(d - 1))
    else:
        uni = tuple(range(d))
    dy = tuple(axis_intervals(R, m))
    un = tuple(uniform_intervals(R, m)) if uni else ()
    lists = tuple(un if j in uni else dy for j in range(d))
    return CapFamily(R, m, d, kind, uni, lists)


def locate(xi, family: CapFamily) -> int:
    """Flat index of the cap containing ``xi``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (family.d,):
        raise ValueError(f"point must have {family.d} coordinates")
    if np.any(xi < 0) or np.any(xi > 1) or not np.all(np.isfinite(xi)):
        raise OutOfDomain(f"{xi} is outside [0,1]^{family.d}")
    idx = []
    for t, los in zip(xi, family._los):
        idx.append(min(bisect.bisect_right(los, t) - 1, len(los) - 1))
    return family.flat_index(idx)


def locate_many(points: np.ndarray, family: CapFamily) -> np.ndarray:
    """Vectorised :func:`locate` for an ``(N, d)`` array."""
    points = np.asarray(points, dtype=float).reshape(-1, family.d)
    if np.any(points < 0) or np.any(points > 1):
        raise OutOfDomain("points outside the unit cube")
    idx = []
    for j, los in enumerate(family._los):
        i = np.searchsorted(np.asarray(los), points[:, j], side="right") - 1
        idx.append(np.minimum(i, len(los) - 1))
    return np.ravel_multi_index(tuple(idx), family.shape)


# -- Omega regions and their tau pieces -------------------------------------

REGION_LARGE_AXES = {
    0: (), 1: (0,), 2: (1,), 3: (2,),
    4: (1, 2), 5: (0, 2), 6: (0, 1), 7: (0, 1, 2),
}


@dataclass(frozen=True)
class OmegaRegion:
    index: int
    box: tuple[tuple[DyadicRational, DyadicRational], ...]
    K: int
    m: int = 2

    @property
    def large_axes(self) -> tuple[int, ...]:
        return REGION_LARGE_AXES[self.index]

    @property
    def volume(self) -> DyadicRational:
        vol = ONE
        for lo, hi in self.box:
            vol = vol * (hi - lo)
        return vol

    def as_cap(self) -> Cap:
        return box_cap(self.box, family_id=f"omega{self.index}-K{self.K}")


def omega_regions(K: int, m: int = 2) -> list[OmegaRegion]:
    """The eight boxes splitting [0,1]^3 at ``K**(-1/(2m))`` on every axis."""
    J = scale_exponent(K, m, what="K")
    if J < 1:
        raise NonDyadicScale(f"K={K} must exceed 1")
    s = DyadicRational.pow2(-J)
    regions = []
    for i in range(8):
        large = REGION_LARGE_AXES[i]
        box = tuple((s, ONE) if j in large else (ZERO, s) for j in range(3))
        regions.append(OmegaRegion(i, box, K, m))
    return regions


def tau_decompose(region: OmegaRegion, K: int | None = None) -> list[Cap]:
    """Split a region into the tau boxes used before rescaling.

    On each large axis the dyadic block ``[lam, 2 lam]`` is cut into
    ``lam**m * K**(1/2)`` pieces of length ``lam**(1-m) * K**(-1/2)``
    (for m = 2: ``lam**2 K**(1/2)`` pieces of length ``(lam K**(1/2))**-1``).
    Small axes stay whole.  Pieces carry ``dyadic(k, mu)`` tags with
    ``lam = 2**(k-1) K**(-1/(2m))``.
    """
    K = region.K if K is None else K
    if region.index == 0:
        raise UnsupportedRegion("region 0 is handled by rescaling, not subdivision")
    if region.index not in REGION_LARGE_AXES:
        raise UnsupportedRegion(f"no region {region.index}")
    m = region.m
    J = scale_exponent(K, m, what="K")
    s = DyadicRational.pow2(-J)
    large_pieces = []
    for i in range(J):
        lam = s.scale_pow2(i)
        # count = lam**m K**(1/2), length = lam**(1-m) K**(-1/2); both powers of 2
        count_exp = m * (i - J) + m * J
        count = 1 << count_exp
        step = DyadicRational.pow2((1 - m) * (i - J) - m * J)
        assert step * count == lam
        for mu in range(1, count + 1):
            lo = lam + step * (mu - 1)
            large_pieces.append(AxisInterval(lo, lo + step, "dyadic", i + 1, mu))
    small = (AxisInterval(ZERO, s, "flat"),)
    lists = [tuple(large_pieces) if j in region.large_axes else small for j in range(3)]
    fid = f"tau-omega{region.index}-K{K}"
    return [Cap(tuple(axes), fid) for axes in itertools.product(*lists)]


# -- flatness ----------------------------------------------------------------

def flatness(interval: AxisInterval, m: int = 2) -> float:
    """Largest gap between ``t**(2m)`` and its secant over the interval.

    The function is convex, so the gap peaks where the derivative equals the
    secant slope; that point has a closed form.
    """
    a, b = float(interval.lo), float(interval.hi)
    n = 2 * m
    slope = (b ** n - a ** n) / (b - a)
    t = (slope / n) ** (1.0 / (n - 1))
    t = min(max(t, a), b)
    return a ** n + slope * (t - a) - t ** n


# -- exact checks ------------------------------------------------------------

def check_axis_tiling(intervals: Sequence[AxisInterval], lo=ZERO, hi=ONE) -> None:
    """Raise ValueError unless the sorted intervals tile [lo, hi] exactly."""
    ivs = sorted(intervals, key=lambda iv: iv.lo)
    if not ivs or ivs[0].lo != lo or ivs[-1].hi != hi:
        raise ValueError("intervals do not span the target")
    for prev, nxt in zip(ivs, ivs[1:]):
        if prev.hi != nxt.lo:
            raise ValueError(f"gap or overlap between {prev} and {nxt}")


def check_family_tiling(family: CapFamily) -> None:
    """A product family tiles [0,1]^d iff every axis list tiles [0,1]."""
    for axis in family.axis_lists:
        check_axis_tiling(axis)
    vol = ONE
    for axis in family.axis_lists:
        total = ZERO
        for iv in axis:
            total = total + iv.length
        vol = vol * total
    if vol != ONE:
        raise ValueError("total volume is not 1")


def _integer_boxes(caps: Sequence[Cap], extra: Sequence[Cap] = ()) -> tuple[np.ndarray, np.ndarray, int]:
    E = 0
    for c in itertools.chain(caps, extra):
        for ax in c.axes:
            E = max(E, ax.lo.exponent, ax.hi.exponent)
    if E > 60:
        raise ValueError("endpoints too fine for the integer tiling check")

    def conv(c):
        return ([ax.lo.numerator << (E - ax.lo.exponent) for ax in c.axes],
                [ax.hi.numerator << (E - ax.hi.exponent) for ax in c.axes])

    lo = np.array([conv(c)[0] for c in caps], dtype=np.int64)
    hi = np.array([conv(c)[1] for c in caps], dtype=np.int64)
    return lo, hi, E


def check_tiles_box(caps: Sequence[Cap], box: Cap) -> None:
    """Exact check that ``caps`` tile ``box``: containment, volume, disjointness.

    Volumes summing to the box volume plus pairwise interior-disjointness
    (and containment) is equivalent to tiling.
    """
    if not caps:
        raise ValueError("no caps")
    for c in caps:
        if not box.contains(c):
            raise ValueError(f"{c.label()} is not inside the box")
    total = ZERO
    for c in caps:
        total = total + c.volume
    if total != box.volume:
        raise ValueError(f"volumes sum to {total}, box has {box.volume}")
    lo, hi, _ = _integer_boxes(caps)
    n = len(caps)
    chunk = max(1, 2_000_000 // max(n, 1))
    for start in range(0, n, chunk):
        l1, h1 = lo[start:start + chunk, None, :], hi[start:start + chunk, None, :]
        overlap = np.all((np.minimum(h1, hi[None]) - np.maximum(l1, lo[None])) > 0, axis=2)
        rows = np.arange(start, min(start + chunk, n))
        overlap[np.arange(len(rows)), rows] = False
        if overlap.any():
            i, j = np.argwhere(overlap)[0]
            raise ValueError(f"caps {rows[i]} and {j} overlap")


def refinement_map(coarse: CapFamily, fine: CapFamily) -> np.ndarray:
    """For each fine cap, the flat index of the coarse cap containing it."""
    if coarse.d != fine.d or coarse.m != fine.m:
        raise NotNested("families differ in dimension or degree")
    per_axis = []
    for j in range(fine.d):
        c_axis, f_axis = coarse.axis_lists[j], fine.axis_lists[j]
        c_los = [float(iv.lo) for iv in c_axis]
        idx = []
        for iv in f_axis:
            i = max(bisect.bisect_right(c_los, float(iv.lo)) - 1, 0)
            if not c_axis[i].contains(iv):
                raise NotNested(f"axis {j}: {iv.label()} straddles a coarse boundary")
            idx.append(i)
        per_axis.append(np.array(idx))
    grids = np.meshgrid(*per_axis, indexing="ij")
    return np.ravel_multi_index(tuple(g.ravel() for g in grids), coarse.shape)


# -- serialisation -----------------------------------------------------------

def _interval_json(iv: AxisInterval) -> dict:
    return {"lo_num": iv.lo.numerator, "lo_exp": iv.lo.exponent,
            "hi_num": iv.hi.numerator, "hi_exp": iv.hi.exponent, "tag": iv.tag_string}


def _interval_from_json(obj: dict) -> AxisInterval:
    return AxisInterval.from_tag_string(DyadicRational(obj["lo_num"], obj["lo_exp"]),
                                        DyadicRational(obj["hi_num"], obj["hi_exp"]),
                                        obj["tag"])


def cap_to_json(cap: Cap) -> dict:
    return {"axes": [_interval_json(a) for a in cap.axes], "family_id": cap.family_id}


def cap_from_json(obj: dict) -> Cap:
    return Cap(tuple(_interval_from_json(a) for a in obj["axes"]), obj.get("family_id", ""))


def family_to_json(family: CapFamily) -> dict:
    return {
        "R": family.R, "m": family.m, "d": family.d, "kind": family.kind,
        "uniform_axes": list(family.uniform_axes),
        "caps": [{"axes": [_interval_json(a) for a in c.axes]} for c in family.caps],
    }


def family_from_json(obj: dict) -> CapFamily:
    d = obj["d"]
    caps = [tuple(_interval_from_json(a) for a in c["axes"]) for c in obj["caps"]]
    lists = []
    for j in range(d):
        seen: dict = {}
        for axes in caps:
            seen.setdefault(axes[j], None)
        lists.append(tuple(seen))
    fam = CapFamily(obj["R"], obj["m"], d, obj["kind"], tuple(obj.get("uniform_axes", ())),
                    tuple(lists))
    if len(fam) != len(caps) or any(c.axes != axes for c, axes in zip(fam.caps, caps)):
        raise ValueError("cap list is not a product family in canonical order")
    return fam


def dumps_family(family: CapFamily) -> str:
    return json.dumps(family_to_json(family), separators=(",", ":"))


def family_to_csv(family: CapFamily) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["index"]
    for j in range(family.d):
        header += [f"lo{j + 1}", f"hi{j + 1}", f"tag{j + 1}"]
    writer.writerow(header)
    for i, cap in enumerate(family.caps):
        row: list = [i]
        for ax in cap.axes:
            row += [repr(float(ax.lo)), repr(float(ax.hi)), ax.tag_string]
        writer.writerow(row)
    return buf.getvalue()
