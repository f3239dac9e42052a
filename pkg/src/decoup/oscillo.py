"""Extension-operator evaluation and weighted L^p norms.

``E_Q f(x) = int_Q f(xi) e(x_1 xi_1 + ... + x_d xi_d + x_{d+1} phi(xi)) dxi``
with ``e(u) = exp(2 pi i u)``.

Two kinds of input ``f``:

* atomic: a finite sum of point masses, evaluated exactly;
* per-cap: a density given cap by cap.  A per-cap coefficient of shape
  ``(ncaps,)`` means ``f`` is constant on each cap; the integral then
  factors into 1-D oscillatory integrals which are done with the Filon rule
  from :mod:`decoup.quadrature` (accurate for every ``x`` in the ball, not
  just small ones).  Coefficients of shape ``(ncaps, q**d)`` are nodal
  values on the tensor Gauss-Legendre grid of each cap and use the plain
  tensor rule.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .caps import Cap, CapFamily, cap_from_json, cap_to_json
from .errors import MismatchedLengths, QuadratureOrderTooLow, SupportOutsideQ
from .phase import PhaseSpec
from .quadrature import (TWO_PI, filon_integral, gauss_integral, gauss_legendre_interval,
                         panels_needed)

DEFAULT_Q = 12
FILON_Q = 20
CHUNK = 512


# -- frequency-side input ----------------------------------------------------

@dataclass
class FrequencyFunction:
    mode: str  # "atomic" | "per_cap"
    d: int
    points: np.ndarray | None = None
    amplitudes: np.ndarray | None = None
    caps: list[Cap] | None = None
    coeffs: np.ndarray | None = None
    q: int = DEFAULT_Q
    provenance: dict = field(default_factory=dict)

    @classmethod
    def atomic(cls, points, amplitudes, provenance: dict | None = None) -> FrequencyFunction:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        if pts.shape[0] != amps.shape[0]:
            raise MismatchedLengths("one amplitude per atom is required")
        if np.any(pts < 0) or np.any(pts > 1):
            raise SupportOutsideQ("atoms must lie in the unit cube")
        return cls("atomic", pts.shape[1], points=pts, amplitudes=amps,
                   provenance=dict(provenance or {}))

    @classmethod
    def per_cap(cls, caps: CapFamily | Sequence[Cap], coeffs, q: int = DEFAULT_Q,
                provenance: dict | None = None) -> FrequencyFunction:
        cap_list = list(caps.caps) if isinstance(caps, CapFamily) else list(caps)
        if not cap_list:
            raise ValueError("no caps given")
        d = cap_list[0].d
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 0:
            c = np.full(len(cap_list), complex(c))
        if c.shape[0] != len(cap_list):
            raise MismatchedLengths("need one coefficient row per cap")
        if c.ndim == 2 and c.shape[1] != q ** d:
            raise MismatchedLengths(f"nodal coefficients need q**d = {q ** d} columns")
        if q < 2:
            raise QuadratureOrderTooLow(f"q={q} < 2")
        return cls("per_cap", d, caps=cap_list, coeffs=c, q=q, provenance=dict(provenance or {}))

    @property
    def piecewise_constant(self) -> bool:
        return self.mode == "per_cap" and self.coeffs.ndim == 1

    def select(self, index) -> FrequencyFunction:
        """Restriction to a subset of caps (per-cap) or atoms (atomic)."""
        index = np.atleast_1d(index)
        if self.mode == "atomic":
            return FrequencyFunction("atomic", self.d, points=self.points[index],
                                     amplitudes=self.amplitudes[index], provenance=self.provenance)
        caps = [self.caps[i] for i in index]
        return FrequencyFunction("per_cap", self.d, caps=caps, coeffs=self.coeffs[index],
                                 q=self.q, provenance=self.provenance)

    def to_json(self) -> dict:
        out = {"mode": self.mode, "d": self.d, "provenance": self.provenance}
        if self.mode == "atomic":
            out["points"] = self.points.tolist()
            out["amplitudes"] = [[z.real, z.imag] for z in self.amplitudes]
        else:
            out["q"] = self.q
            out["caps"] = [cap_to_json(c) for c in self.caps]
            out["coeffs_re"] = self.coeffs.real.tolist()
            out["coeffs_im"] = self.coeffs.imag.tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> FrequencyFunction:
        if obj["mode"] == "atomic":
            amps = np.array([complex(re, im) for re, im in obj["amplitudes"]])
            return cls.atomic(np.array(obj["points"]).reshape(-1, obj["d"]), amps, obj.get("provenance"))
        coeffs = np.array(obj["coeffs_re"]) + 1j * np.array(obj["coeffs_im"])
        return cls.per_cap([cap_from_json(c) for c in obj["caps"]], coeffs, obj["q"],
                           obj.get("provenance"))


# -- weights and point sets --------------------------------------------------

@dataclass(frozen=True)
class WeightSpec:
    """Indicator of a ball, or ``(1 + |x - x0|/R)**(-100 n)`` cut off at ``truncation * R``."""

    kind: str  # "indicator" | "paper"
    center: tuple[float, ...]
    radius: float
    truncation: float = 4.0
    decay: float | None = None  # defaults to 100 n

    @classmethod
    def indicator(cls, n: int, radius: float, center=None) -> WeightSpec:
        c = tuple(float(v) for v in (center if center is not None else np.zeros(n)))
        return cls("indicator", c, float(radius))

    @classmethod
    def paper(cls, n: int, radius: float, center=None, truncation: float = 4.0) -> WeightSpec:
        c = tuple(float(v) for v in (center if center is not None else np.zeros(n)))
        return cls("paper", c, float(radius), float(truncation))

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def exponent(self) -> float:
        return float(self.decay) if self.decay is not None else 100.0 * self.n

    @property
    def support_radius(self) -> float:
        return self.radius if self.kind == "indicator" else self.truncation * self.radius

    def to_json(self) -> dict:
        return {"kind": self.kind, "center": list(self.center), "radius": self.radius,
                "truncation": self.truncation, "decay": self.decay}


def weight_value(x, w: WeightSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1, w.n)
    r = np.sqrt(np.sum((x - np.asarray(w.center)) ** 2, axis=1))
    if w.kind == "indicator":
        return (r <= w.radius).astype(float)
    val = np.exp(-w.exponent * np.log1p(r / w.radius))
    return np.where(r <= w.truncation * w.radius, val, 0.0)


def ball_volume(n: int, radius: float) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * radius ** n


def weight_mass(w: WeightSpec) -> float:
    """``int w(x) dx`` over R^n, in closed form."""
    n = w.n
    if w.kind == "indicator":
        return ball_volume(n, w.radius)
    # u = r/R, v = u/(1+u): r^{n-1}(1+r/R)^{-N} dr = R^n v^{n-1}(1-v)^{N-n-1} dv
    N = w.exponent
    sphere = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    vmax = w.truncation / (1 + w.truncation)
    return sphere * w.radius ** n * special.beta(n, N - n) * special.betainc(n, N - n, vmax)


@dataclass
class SpacePointSet:
    points: np.ndarray  # (N, n)
    measure: np.ndarray  # (N,)
    kind: str  # "grid" | "montecarlo" | "weighted"
    seed: int | None = None
    sampled_from: WeightSpec | None = None

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def statistical(self) -> bool:
        return self.kind != "grid"

    @classmethod
    def grid(cls, lo, hi, steps) -> SpacePointSet:
        """Cell centres of a uniform grid on the box ``[lo, hi]``."""
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        steps = np.broadcast_to(np.asarray(steps, int), lo.shape)
        axes = [a + (np.arange(k) + 0.5) * (b - a) / k for a, b, k in zip(lo, hi, steps)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        cell = float(np.prod((hi - lo) / steps))
        return cls(pts, np.full(len(pts), cell), "grid")

    @classmethod
    def monte_carlo(cls, n: int, radius: float, count: int, seed: int, center=None) -> SpacePointSet:
        """Uniform points in the ball ``B(center, radius)`` of R^n."""
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((count, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = radius * rng.random(count) ** (1.0 / n)
        pts = g * r[:, None]
        if center is not None:
            pts = pts + np.asarray(center, float)
        vol = ball_volume(n, radius)
        return cls(pts, np.full(count, vol / count), "montecarlo", seed=seed)

    @classmethod
    def from_weight(cls, w: WeightSpec, count: int, seed: int) -> SpacePointSet:
        """Points with density proportional to ``w`` (importance sampling).

        For the polynomial weight the radial law is ``r = R v/(1-v)`` with
        ``v ~ Beta(n, N - n)`` truncated to ``r <= truncation * R``.
        """
        if w.kind == "indicator":
            ps = cls.monte_carlo(w.n, w.radius, count, seed, w.center)
            ps.kind, ps.sampled_from = "weighted", w
            return ps
        n, N = w.n, w.exponent
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((count, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        vmax = w.truncation / (1 + w.truncation)
        # inverse-cdf draw keeps exactly one uniform per point (no rejection loop)
        umax = special.betainc(n, N - n, vmax)
        v = special.betaincinv(n, N - n, rng.random(count) * umax)
        r = w.radius * v / (1 - v)
        pts = g * r[:, None] + np.asarray(w.center)
        mass = weight_mass(w)
        return cls(pts, np.full(count, mass / count), "weighted", seed=seed, sampled_from=w)


# -- quadrature on caps ------------------------------------------------------

def quadrature_nodes(cap: Cap, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre nodes ``(q**d, d)`` and weights ``(q**d,)`` on the cap."""
    if q < 2:
        raise QuadratureOrderTooLow(f"q={q} < 2")
    per_axis = [gauss_legendre_interval(q, float(a.lo), float(a.hi)) for a in cap.axes]
    nodes = np.meshgrid(*[t for t, _ in per_axis], indexing="ij")
    weights = np.meshgrid(*[w for _, w in per_axis], indexing="ij")
    X = np.stack([g.ravel() for g in nodes], axis=1)
    W = np.prod(np.stack([g.ravel() for g in weights], axis=1), axis=1)
    return X, W


# -- evaluation --------------------------------------------------------------

def _as_points(pts) -> np.ndarray:
    if isinstance(pts, SpacePointSet):
        return pts.points
    return np.atleast_2d(np.asarray(pts, dtype=float))


def _check_support(f: FrequencyFunction, Q: Cap | None):
    if Q is None:
        return
    lo, hi = Q.lo, Q.hi
    if f.mode == "atomic":
        if np.any(f.points < lo) or np.any(f.points > hi):
            raise SupportOutsideQ("atoms outside Q")
    elif any(not Q.contains(c) for c in f.caps):
        raise SupportOutsideQ("caps outside Q")


@dataclass
class AxisTables:
    """Per-axis 1-D integrals shared by many caps.

    ``index[c, j]`` points cap ``c``'s axis-j interval into ``intervals[j]``;
    ``panels[j][u]`` fixes the Filon panel count per interval so that results
    do not depend on how points are batched.
    """

    intervals: list[list[tuple[float, float]]]
    index: np.ndarray
    panels: list[list[int]]
    method: str = "filon"
    q: int = FILON_Q

    @classmethod
    def build(cls, caps: Sequence[Cap], phase: PhaseSpec, beta_max: float,
              method: str = "filon", q: int | None = None) -> AxisTables:
        d = caps[0].d
        intervals, index, panels = [], np.zeros((len(caps), d), dtype=np.int64), []
        for j in range(d):
            lookup: dict = {}
            for c, cap in enumerate(caps):
                key = cap.axes[j].bounds
                index[c, j] = lookup.setdefault(key, len(lookup))
            ivs = list(lookup)
            intervals.append(ivs)
            if method == "filon":
                panels.append([panels_needed(phase.axis(j), a, b, beta_max) for a, b in ivs])
            else:
                panels.append([1] * len(ivs))
        if q is None:
            q = FILON_Q if method == "filon" else DEFAULT_Q
        return cls(intervals, index, panels, method, q)

    def tables(self, x: np.ndarray, phase: PhaseSpec) -> list[np.ndarray]:
        """``T[j][i, u] = int_{interval u} e(x_j t + x_{d+1} phi_j(t)) dt``."""
        d = len(self.intervals)
        beta = x[:, d]
        out = []
        for j in range(d):
            coeffs = phase.axis(j)
            T = np.empty((x.shape[0], len(self.intervals[j])), dtype=complex)
            for u, (a, b) in enumerate(self.intervals[j]):
                if self.method == "filon":
                    T[:, u] = filon_integral(a, b, x[:, j], beta, coeffs, q=self.q,
                                             panels=self.panels[j][u])
                else:
                    T[:, u] = gauss_integral(a, b, x[:, j], beta, coeffs, q=self.q)
            out.append(T)
        return out

    def cap_values(self, tables: list[np.ndarray]) -> np.ndarray:
        """``(npoints, ncaps)`` array of ``E_cap 1``."""
        vals = tables[0][:, self.index[:, 0]]
        for j in range(1, len(tables)):
            vals = vals * tables[j][:, self.index[:, j]]
        return vals


def _eval_atomic(f: FrequencyFunction, phase: PhaseSpec, x: np.ndarray) -> np.ndarray:
    d = f.d
    height = phase(f.points)
    out = np.empty(x.shape[0], dtype=complex)
    for s in range(0, x.shape[0], CHUNK):
        xc = x[s:s + CHUNK]
        arg = xc[:, d, None] * height[None, :]
        for j in range(d):
            arg = arg + xc[:, j, None] * f.points[None, :, j]
        out[s:s + CHUNK] = np.einsum("xn,n->x", np.exp(1j * TWO_PI * arg), f.amplitudes)
    return out


def _eval_nodal(f: FrequencyFunction, phase: PhaseSpec, x: np.ndarray) -> np.ndarray:
    d, q = f.d, f.q
    out = np.zeros(x.shape[0], dtype=complex)
    letters = "abcdefgh"[:d]
    spec = ",".join(f"x{a}" for a in letters) + "," + "".join(letters) + "->x"
    for cap, coef in zip(f.caps, f.coeffs):
        factors = []
        for j, ax in enumerate(cap.axes):
            t, w = gauss_legendre_interval(q, float(ax.lo), float(ax.hi))
            arg = x[:, j, None] * t[None, :] + x[:, d, None] * phase.axis_value(j, t)[None, :]
            factors.append(np.exp(1j * TWO_PI * arg) * w[None, :])
        out += np.einsum(spec, *factors, coef.reshape((q,) * d))
    return out


def eval_extension(f: FrequencyFunction, Q: Cap | None, phase: PhaseSpec, pts,
                   method: str = "filon") -> np.ndarray:
    """``E_Q f`` at each point; points are ``(N, d+1)`` arrays or a SpacePointSet.

    ``method`` selects the rule for piecewise-constant per-cap input:
    ``"filon"`` (default) or ``"gauss"`` (plain q-point rule per cap axis).
    """
    x = _as_points(pts)
    if x.shape[1] != f.d + 1:
        raise MismatchedLengths(f"points need {f.d + 1} coordinates")
    if phase.d != f.d:
        raise MismatchedLengths("phase and function dimensions differ")
    if f.mode == "per_cap" and f.q < 2:
        raise QuadratureOrderTooLow(f"q={f.q} < 2")
    _check_support(f, Q)
    if f.mode == "atomic":
        return _eval_atomic(f, phase, x)
    if not f.piecewise_constant:
        return _eval_nodal(f, phase, x)
    beta_max = float(np.max(np.abs(x[:, f.d]))) if len(x) else 0.0
    tabs = AxisTables.build(f.caps, phase, beta_max, method,
                            q=None if method == "filon" else f.q)
    out = np.empty(x.shape[0], dtype=complex)
    for s in range(0, x.shape[0], CHUNK):
        xc = x[s:s + CHUNK]
        vals = tabs.cap_values(tabs.tables(xc, phase))
        out[s:s + CHUNK] = np.einsum("xc,c->x", vals, f.coeffs)
    return out


# -- norms -------------------------------------------------------------------

@dataclass(frozen=True)
class NormEstimate:
    norm: float
    power: float  # estimate of int w |v|^p
    power_stderr: float
    p: float

    @property
    def stderr(self) -> float:
        if self.power <= 0:
            return 0.0
        return self.power_stderr * self.power ** (1.0 / self.p - 1.0) / self.p


def point_contributions(values, p: float, w: WeightSpec, pts: SpacePointSet) -> np.ndarray:
    """Per-point terms ``factor_i |v_i|^p measure_i`` whose sum is the p-th power."""
    values = np.asarray(values)
    if values.shape[0] != len(pts):
        raise MismatchedLengths(f"{values.shape[0]} values for {len(pts)} points")
    if pts.sampled_from is not None and pts.sampled_from == w:
        factor = 1.0
    else:
        factor = weight_value(pts.points, w)
    return factor * np.abs(values) ** p * pts.measure


def lp_norm(values, p: float, w: WeightSpec, pts: SpacePointSet) -> NormEstimate:
    """``(sum_i w(x_i) |v_i|^p mu_i)^(1/p)`` with a Monte Carlo error bar."""
    if p < 1 or not np.isfinite(p):
        raise ValueError("p must be finite and >= 1")
    y = point_contributions(values, p, w, pts)
    power = float(np.sum(y))
    if pts.statistical and len(y) > 1:
        se = float(np.sqrt(len(y)) * np.std(y, ddof=1))
    else:
        se = 0.0
    return NormEstimate(power ** (1.0 / p), power, se, p)


def fields_to_csv(pts, values, w: WeightSpec | None = None) -> str:
    """CSV with columns x1..x{d+1}, re, im, weight (weight is 1 without ``w``)."""
    x = _as_points(pts)
    values = np.asarray(values)
    if values.shape[0] != x.shape[0]:
        raise MismatchedLengths("one value per point is required")
    weight = weight_value(x, w) if w is not None else np.ones(x.shape[0])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{j + 1}" for j in range(x.shape[1])] + ["re", "im", "weight"])
    for row, v, wt in zip(x, values, weight):
        writer.writerow([repr(float(t)) for t in row] + [repr(float(v.real)), repr(float(v.imag)),
                                                         repr(float(wt))])
    return buf.getvalue()
