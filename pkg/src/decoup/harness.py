"""Decoupling-ratio experiments, curvature and the induction-on-scales recursion.

The ratio for an input f and a cap family is

    ||E f||_{L^p(B_R)} / (sum_theta ||E_theta f||^2_{L^p(w)})^{1/2}.

Both norms are Monte Carlo estimates.  Points are processed in fixed-size
batches whose per-batch sums are stored and reduced in batch order, so the
numbers do not depend on how many threads ran the batches.  The batch sums
also give the error bars (batch means plus the delta method for the
nonlinear combination on the right).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .caps import AxisInterval, Cap, CapFamily, cap_family, locate_many
from .dyadic import DyadicRational, log2_exact
from .errors import (BudgetTooSmall, EmptyEnsemble, NonCompatibleScales, NonDyadicScale,
                     TooFewScales)
from .oscillo import (AxisTables, FrequencyFunction, SpacePointSet, WeightSpec, weight_value)
from .phase import PhaseSpec
from .quadrature import TWO_PI

ENSEMBLE_KINDS = ("single_cap", "constant_one", "random_phase", "atomic_lattice")
MIN_BUDGET = 1000
DEFAULT_BUDGET = 20_000


# -- ensembles ---------------------------------------------------------------

@dataclass(frozen=True)
class Ensemble:
    """A reproducible test input.

    ``single_cap`` puts f = 1 on one cap (``cap`` index, or drawn from
    ``seed``); ``constant_one`` is f = 1 everywhere; ``random_phase`` gives
    each cap an independent unit-modulus constant; ``atomic_lattice`` places
    unit atoms with random phases at the points ``a / N`` of each axis.
    """

    kind: str
    seed: int = 0
    cap: int | None = None
    N: int = 4

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "single_cap":
            return "single_cap" if self.cap is None else f"single_cap:{self.cap}"
        if self.kind == "atomic_lattice":
            return f"atomic_lattice:{self.N}"
        return self.kind

    def with_seed(self, seed: int) -> Ensemble:
        return Ensemble(self.kind, seed, self.cap, self.N)

    def build(self, caps: Sequence[Cap]) -> FrequencyFunction:
        """The input f for the given cap list (which defines the RHS pieces)."""
        caps = list(caps)
        if not caps:
            raise EmptyEnsemble("no caps")
        d = caps[0].d
        rng = np.random.default_rng(self.seed)
        prov = {"ensemble": self.label, "seed": self.seed}
        if self.kind == "constant_one":
            return FrequencyFunction.per_cap(caps, np.ones(len(caps)), provenance=prov)
        if self.kind == "random_phase":
            return FrequencyFunction.per_cap(caps, np.exp(1j * TWO_PI * rng.random(len(caps))),
                                             provenance=prov)
        if self.kind == "single_cap":
            idx = self.cap if self.cap is not None else int(rng.integers(len(caps)))
            coeffs = np.zeros(len(caps), dtype=complex)
            coeffs[idx % len(caps)] = 1.0
            return FrequencyFunction.per_cap(caps, coeffs, provenance={**prov, "cap": idx})
        # atomic lattice, restricted to the union of the caps
        axis = np.arange(self.N + 1) / self.N
        grid = np.stack([g.ravel() for g in np.meshgrid(*[axis] * d, indexing="ij")], axis=1)
        inside = np.zeros(len(grid), dtype=bool)
        for c in caps:
            inside |= np.all((grid >= c.lo) & (grid <= c.hi), axis=1)
        pts = grid[inside]
        if len(pts) == 0:
            raise EmptyEnsemble(f"no lattice points 1/{self.N} inside the caps")
        amps = np.exp(1j * TWO_PI * rng.random(len(grid)))[inside]
        return FrequencyFunction.atomic(pts, amps, provenance=prov)

    def to_json(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "cap": self.cap, "N": self.N}


# -- records -----------------------------------------------------------------

@dataclass
class RatioRecord:
    R: int
    p: float
    d: int
    m: int
    family: str
    ensemble: str
    seed: int
    lhs: float
    rhs: float
    ratio: float
    lhs_stderr: float
    rhs_stderr: float
    ratio_stderr: float
    mc_samples: int
    rhs_weight: str = "paper"
    n_pieces: int = 0
    status: str = "ok"
    error: str = ""
    wall_time: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> RatioRecord:
        return cls(**obj)

    def identity(self) -> dict:
        """Everything except the wall-clock time."""
        out = asdict(self)
        out.pop("wall_time")
        return out


@dataclass
class GrowthFit:
    p: float
    ensemble: str
    Rs: list[int]
    medians: list[float]
    epsilon: float
    intercept: float
    residual: float
    n_records: int

    def to_json(self) -> dict:
        return asdict(self)


def fit_growth(records: Sequence[RatioRecord]) -> GrowthFit:
    """Least squares of log(median ratio) on log R."""
    ok = [r for r in records if r.status == "ok" and np.isfinite(r.ratio) and r.ratio > 0]
    Rs = sorted({r.R for r in ok})
    if len(Rs) < 3:
        raise TooFewScales(f"need at least 3 scales with results, got {len(Rs)}")
    med = [float(np.median([r.ratio for r in ok if r.R == R])) for R in Rs]
    X = np.log(np.asarray(Rs, float))
    Y = np.log(np.asarray(med))
    A = np.stack([X, np.ones_like(X)], axis=1)
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = float(np.linalg.norm(A @ coef - Y))
    return GrowthFit(ok[0].p, ok[0].ensemble, Rs, med, float(coef[0]), float(coef[1]), resid, len(ok))


# -- the ratio ---------------------------------------------------------------

def _batch_size(n: int) -> int:
    return int(min(512, max(16, math.ceil(n / 40))))


class _Evaluator:
    """Per-batch values of ``E f`` and of every ``E_theta f`` (pieces)."""

    def __init__(self, f: FrequencyFunction, pieces: Sequence[Cap] | None, phase: PhaseSpec,
                 beta_max: float):
        self.f = f
        self.phase = phase
        if f.mode == "atomic":
            if pieces is None:
                raise ValueError("atomic input needs the piece list")
            self.height = phase(f.points)
            owner = _owner(f.points, pieces)
            used = np.unique(owner)
            self.n_pieces = len(used)
            self.group = (owner[:, None] == used[None, :]).astype(complex) * f.amplitudes[:, None]
        else:
            if not f.piecewise_constant:
                raise ValueError("per-cap input must be constant on each cap")
            keep = np.flatnonzero(f.coeffs != 0)
            if len(keep) == 0:
                raise EmptyEnsemble("f vanishes identically")
            self.caps = [f.caps[i] for i in keep]
            self.coeffs = f.coeffs[keep]
            self.n_pieces = len(keep)
            self.tables = AxisTables.build(self.caps, phase, beta_max)

    def pieces(self, x: np.ndarray) -> np.ndarray:
        """``(len(x), n_pieces)`` values ``E_theta f(x)``."""
        d = self.f.d
        if self.f.mode == "atomic":
            arg = x[:, d, None] * self.height[None, :]
            for j in range(d):
                arg = arg + x[:, j, None] * self.f.points[None, :, j]
            return np.einsum("xa,ac->xc", np.exp(1j * TWO_PI * arg), self.group)
        vals = self.tables.cap_values(self.tables.tables(x, self.phase))
        return vals * self.coeffs[None, :]


def _owner(points: np.ndarray, pieces: Sequence[Cap]) -> np.ndarray:
    """Index of the piece containing each atom (half-open, closed at the top of the cover)."""
    if isinstance(pieces, CapFamily):
        return locate_many(points, pieces)
    lo = np.array([c.lo for c in pieces])
    hi = np.array([c.hi for c in pieces])
    top = hi.max(axis=0)
    inside = (points[:, None, :] >= lo[None]) & ((points[:, None, :] < hi[None])
                                                 | ((points[:, None, :] == hi[None]) & (hi[None] == top)))
    hit = np.all(inside, axis=2)
    if not np.all(hit.any(axis=1)):
        raise EmptyEnsemble("an atom lies outside every piece")
    return np.argmax(hit, axis=1)


def _run_batches(fn: Callable[[int], tuple], nb: int, workers: int) -> list:
    if workers <= 1:
        return [fn(b) for b in range(nb)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(nb)))


def ratio_estimate(f: FrequencyFunction, pieces: Sequence[Cap], p: float, R: float,
                   phase: PhaseSpec, rhs_weight: str = "paper", budget: int = DEFAULT_BUDGET,
                   seed: int = 0, workers: int = 1, lhs_points: SpacePointSet | None = None,
                   rhs_points: SpacePointSet | None = None) -> dict:
    """Core estimator shared by :func:`decoupling_ratio` and :func:`curve_ratio`.

    Returns lhs, rhs, ratio and their standard errors.  With an indicator
    right-hand weight both sides use the same points, so common fluctuations
    cancel in the ratio.  ``lhs_points`` / ``rhs_points`` override the
    sampled sets (e.g. a deterministic grid).
    """
    if not (2 <= p <= 6):
        raise ValueError("p must lie in [2, 6]")
    if budget < MIN_BUDGET and lhs_points is None:
        raise BudgetTooSmall(f"budget {budget} < {MIN_BUDGET}")
    n = f.d + 1
    w_lhs = WeightSpec.indicator(n, R)
    w_rhs = WeightSpec.indicator(n, R) if rhs_weight == "indicator" else WeightSpec.paper(n, R)
    if lhs_points is None:
        lhs_points = SpacePointSet.monte_carlo(n, R, budget, seed)
    shared = rhs_points is None and rhs_weight == "indicator"
    if rhs_points is None:
        rhs_points = lhs_points if shared else SpacePointSet.from_weight(w_rhs, budget, seed + 1)
    shared = rhs_points is lhs_points

    beta_max = max(float(np.max(np.abs(lhs_points.points[:, -1]))),
                   float(np.max(np.abs(rhs_points.points[:, -1]))))
    ev = _Evaluator(f, pieces, phase, beta_max)

    def side_factor(ps: SpacePointSet, w: WeightSpec) -> np.ndarray:
        if ps.sampled_from is not None and ps.sampled_from == w:
            return ps.measure
        return weight_value(ps.points, w) * ps.measure

    fl = side_factor(lhs_points, w_lhs)
    fr = fl if shared else side_factor(rhs_points, w_rhs)
    size = _batch_size(len(lhs_points))
    nb = math.ceil(len(lhs_points) / size)

    def batch(b: int):
        sl = slice(b * size, (b + 1) * size)
        vals = ev.pieces(lhs_points.points[sl])
        total = np.sum(vals, axis=1)
        L = float(np.sum(np.abs(total) ** p * fl[sl]))
        if not shared:
            vals = ev.pieces(rhs_points.points[sl])
        Pr = np.einsum("xc,x->c", np.abs(vals) ** p, fr[sl])
        return L, Pr

    out = _run_batches(batch, nb, workers)
    Lb = np.array([o[0] for o in out])
    Pb = np.stack([o[1] for o in out])
    PL = float(np.sum(Lb))
    P = np.sum(Pb, axis=0)
    lhs = PL ** (1.0 / p)
    rhs2 = float(np.sum(P ** (2.0 / p)))
    rhs = math.sqrt(rhs2)

    statistical = lhs_points.statistical and nb > 1
    if statistical and rhs > 0 and PL > 0:
        # delta method on batch sums
        g = (1.0 / p) * np.where(P > 0, P, 1.0) ** (2.0 / p - 1.0) / rhs
        g = np.where(P > 0, g, 0.0)
        Zb = np.einsum("bc,c->b", Pb, g)
        lhs_se = math.sqrt(nb) * float(np.std(Lb, ddof=1)) * PL ** (1.0 / p - 1.0) / p
        rhs_se = math.sqrt(nb) * float(np.std(Zb, ddof=1))
        if shared:
            u = Lb / (p * PL) - Zb / rhs
            rel = math.sqrt(nb) * float(np.std(u, ddof=1))
        else:
            rel = math.hypot(lhs_se / lhs, rhs_se / rhs)
    else:
        lhs_se = rhs_se = rel = 0.0
    ratio = lhs / rhs if rhs > 0 else float("inf")
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio, "lhs_stderr": lhs_se, "rhs_stderr": rhs_se,
            "ratio_stderr": ratio * rel, "n_pieces": ev.n_pieces,
            "mc_samples": len(lhs_points)}


def decoupling_ratio(ens: Ensemble, p: float, R: int, family: CapFamily,
                     rhs_weight: str = "paper", budget: int = DEFAULT_BUDGET, seed: int = 0,
                     phase: PhaseSpec | None = None, workers: int = 1) -> RatioRecord:
    """One measurement of the decoupling ratio for ``family`` at scale R."""
    if family.R != R:
        raise ValueError(f"family scale {family.R} differs from R={R}")
    if budget < MIN_BUDGET:
        raise BudgetTooSmall(f"budget {budget} < {MIN_BUDGET}")
    phase = phase or PhaseSpec.pure_power(family.d, 2 * family.m)
    t0 = time.perf_counter()
    f = ens.build(family.caps)
    pieces = family if f.mode == "atomic" else family.caps
    est = ratio_estimate(f, pieces, p, R, phase, rhs_weight, budget, seed, workers)
    return RatioRecord(R=R, p=float(p), d=family.d, m=family.m, family=family.family_id,
                       ensemble=ens.label, seed=seed, rhs_weight=rhs_weight,
                       wall_time=time.perf_counter() - t0, **est)


# -- sweeps ------------------------------------------------------------------

@dataclass
class SweepConfig:
    R_list: list[int]
    p_list: list[float]
    d: int = 3
    m: int = 2
    kind: str = "f4"
    ensembles: list[Ensemble] = field(default_factory=lambda: [Ensemble("random_phase")])
    budget: int = DEFAULT_BUDGET
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    rhs_weight: str = "paper"
    uniform_axes: tuple[int, ...] | None = None
    workers: int = 1

    def cells(self) -> list[tuple[float, Ensemble, int, int]]:
        return [(p, ens.with_seed(s), R, s) for p in self.p_list for ens in self.ensembles
                for R in self.R_list for s in self.seeds]

    def to_json(self) -> dict:
        out = asdict(self)
        out["ensembles"] = [e.to_json() for e in self.ensembles]
        out.pop("workers")  # does not change results
        return out


@dataclass
class SweepResult:
    records: list[RatioRecord]
    fits: list[GrowthFit]
    skipped: int = 0
    failures: list[str] = field(default_factory=list)


def cell_key(p: float, ensemble: str, R: int, seed: int) -> tuple:
    return (float(p), ensemble, int(R), int(seed))


def sweep(config: SweepConfig, sink: Callable[[RatioRecord], None] | None = None,
          done: dict | None = None) -> SweepResult:
    """Run every (p, ensemble, R, seed) cell and fit the growth per (p, ensemble).

    ``done`` maps :func:`cell_key` to previously stored records, which are
    reused instead of recomputed.  ``sink`` receives each new record as soon
    as it exists, so partial results survive a later failure.
    """
    if len(set(config.R_list)) < 3:
        raise TooFewScales(f"need at least 3 distinct R values, got {sorted(set(config.R_list))}")
    families = {R: cap_family(R, config.m, config.d, config.kind, config.uniform_axes)
                for R in sorted(set(config.R_list))}
    done = done or {}
    records, failures, skipped = [], [], 0
    for p, ens, R, s in config.cells():
        key = cell_key(p, ens.label, R, s)
        if key in done and done[key].status == "ok":
            records.append(done[key])
            skipped += 1
            continue
        try:
            rec = decoupling_ratio(ens, p, R, families[R], config.rhs_weight, config.budget, s,
                                   workers=config.workers)
        except Exception as exc:  # recorded, never fatal for the sweep
            rec = RatioRecord(R=R, p=float(p), d=config.d, m=config.m,
                              family=families[R].family_id, ensemble=ens.label, seed=s,
                              lhs=math.nan, rhs=math.nan, ratio=math.nan, lhs_stderr=math.nan,
                              rhs_stderr=math.nan, ratio_stderr=math.nan, mc_samples=0,
                              rhs_weight=config.rhs_weight, status="failed",
                              error=f"{type(exc).__name__}: {exc}")
            failures.append(f"p={p} {ens.label} R={R} seed={s}: {rec.error}")
        records.append(rec)
        if sink is not None:
            sink(rec)
    fits = []
    for p in config.p_list:
        for ens in config.ensembles:
            group = [r for r in records if r.p == float(p) and r.ensemble == ens.label]
            try:
                fits.append(fit_growth(group))
            except TooFewScales as exc:
                failures.append(f"fit p={p} {ens.label}: {exc}")
    return SweepResult(records, fits, skipped, failures)


# -- planar curve ------------------------------------------------------------

def curve_pieces(lam, K: int) -> list[Cap]:
    """``lam**2 K**(1/2)`` intervals of length ``(lam K**(1/2))**-1`` covering ``[lam, 2 lam]``."""
    lam = Fraction(lam)
    J = log2_exact(K, "K")
    if J % 4 or J <= 0:
        raise NonDyadicScale(f"K={K}: K^(1/4) is not a power of 2 larger than 1")
    half = 1 << (J // 2)
    log2_exact(lam, "lambda")
    if lam > Fraction(1, 2) or lam < Fraction(1, 1 << (J // 4)):
        raise ValueError(f"lambda={lam} outside [K^(-1/4), 1/2]")
    count = lam * lam * half
    length = 1 / (lam * half)
    if count.denominator != 1:
        raise NonDyadicScale(f"lambda^2 K^(1/2) = {count} is not an integer")
    lo = DyadicRational.from_fraction(lam)
    step = DyadicRational.from_fraction(length)
    return [Cap((AxisInterval(lo + step * i, lo + step * (i + 1), "dyadic", 0, i + 1),),
                f"curve-lam{lam}-K{K}") for i in range(int(count))]


def curve_ratio(ens: Ensemble, p: float, R: int, lam, K: int | None = None,
                mode: str = "montecarlo", budget: int = DEFAULT_BUDGET, seed: int = 0,
                grid_step: float = 0.5, rhs_weight: str = "indicator",
                workers: int = 1) -> RatioRecord:
    """Decoupling ratio for the planar curve ``(t, t**4)``, ``t in [lam, 2 lam]``."""
    K = R if K is None else K
    pieces = curve_pieces(lam, K)
    phase = PhaseSpec.pure_power(1, 4)
    t0 = time.perf_counter()
    f = ens.build(pieces)
    if mode == "grid":
        steps = int(round(2 * R / grid_step))
        grid = SpacePointSet.grid([-R, -R], [R, R], steps)
        keep = np.sum(grid.points ** 2, axis=1) <= R * R
        pts = SpacePointSet(grid.points[keep], grid.measure[keep], "grid")
        est = ratio_estimate(f, pieces, p, R, phase, "indicator", budget, seed, workers,
                             lhs_points=pts, rhs_points=pts)
        rhs_weight = "indicator"
    elif mode == "montecarlo":
        est = ratio_estimate(f, pieces, p, R, phase, rhs_weight, budget, seed, workers)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return RatioRecord(R=R, p=float(p), d=1, m=2, family=f"curve-lam{Fraction(lam)}-K{K}",
                       ensemble=ens.label, seed=seed, rhs_weight=rhs_weight,
                       wall_time=time.perf_counter() - t0, **est)


# -- curvature and recursion -------------------------------------------------

def curvature(xi, m: int = 2) -> tuple[float, np.ndarray]:
    """Gaussian-curvature numerator ``prod_j phi_j''(xi_j)`` and the Hessian diagonal.

    For m = 2 that is ``12**3 (xi_1 xi_2 xi_3)**2``.  Exact for rational
    inputs given as Fractions.
    """
    n = 2 * m
    coef = n * (n - 1)
    if all(isinstance(v, (int, np.integer, Fraction)) for v in np.ravel(xi)):
        diag = [Fraction(coef) * Fraction(int(v) if isinstance(v, np.integer) else v) ** (n - 2)
                for v in np.ravel(xi)]
        kappa = Fraction(1)
        for h in diag:
            kappa *= h
        return kappa, np.array(diag, dtype=object)
    x = np.asarray(xi, dtype=float)
    diag = coef * x ** (n - 2)
    return float(np.prod(diag, axis=-1)), diag


def _power_index(K, R) -> int:
    if K < 2:
        raise NonCompatibleScales(f"K={K} must be at least 2")
    n, v = 0, Fraction(R)
    K = Fraction(K)
    while v > 1:
        v /= K
        n += 1
    if v != 1 or n < 1:
        raise NonCompatibleScales(f"R={R} is not a positive power of K={K}")
    return n


def recursion_iterate(C: float, K, eps: float, R, a: float = 4.0) -> float:
    """Iterate ``D(K^j) = C K^a (K^j)^eps + 2 C K^eps D(K^(j-1))`` from ``D(K) = C K^a``."""
    n = _power_index(K, R)
    K = float(K)
    D = C * K ** a
    for j in range(2, n + 1):
        D = C * K ** a * K ** (j * eps) + 2 * C * K ** eps * D
    return D


def recursion_closed_form(C: float, K, eps: float, R, a: float = 4.0) -> float:
    """``C K^a [sum_{i=0}^{n-2} (2 C K^eps)^i K^((n-i) eps) + (2 C K^eps)^(n-1)]`` for R = K^n."""
    n = _power_index(K, R)
    K = float(K)
    g = 2 * C * K ** eps
    total = sum(g ** i * K ** ((n - i) * eps) for i in range(n - 1)) + g ** (n - 1)
    return C * K ** a * total


def recursion_profile(C: float, K, eps: float, n_max: int, a: float = 4.0) -> np.ndarray:
    """``D(K^n) / (K^n)^(2 eps)`` for n = 1..n_max."""
    return np.array([recursion_iterate(C, K, eps, int(K) ** n, a) / float(K) ** (2 * n * eps)
                     for n in range(1, n_max + 1)])



__all__ = [
    "Ensemble", "RatioRecord", "GrowthFit", "SweepConfig", "SweepResult", "decoupling_ratio",
    "ratio_estimate", "sweep", "fit_growth", "curve_pieces", "curve_ratio", "curvature",
    "recursion_iterate", "recursion_closed_form", "recursion_profile", "cell_key",
]
