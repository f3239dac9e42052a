"""Affine changes of variables for the extension operator.

Substituting ``xi_j = lam_j + w_j eta_j`` in
``x . xi + x_{d+1} phi(xi)`` and expanding each ``phi_j(lam_j + w_j eta)``
binomially gives

    const(x) + sum_j (w_j x_j + b_{j,1} x_{d+1}) eta_j + s x_{d+1} psi(eta),

with ``psi_j = sum_{i>=2} b_{j,i} eta**i / s``.  The constant only changes
the phase of ``E f``, so

    |E_tau f(x)| = |E^psi_{[0,1]^d} f~(T x)|,
    T x = (w_1 x_1 + b_{1,1} x_{d+1}, ..., s x_{d+1}),

where ``f~(eta) = (prod w_j) f(lam + w eta)`` for densities and the atoms
are simply moved (with unchanged amplitudes) for atomic input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as nppoly

from .caps import Cap, box_cap, unit_cube
from .dyadic import DyadicRational
from .errors import DegenerateBox
from .oscillo import FrequencyFunction, SpacePointSet, eval_extension
from .phase import PhaseSpec


def _frac(v) -> Fraction:
    if isinstance(v, DyadicRational):
        return v.to_fraction()
    return Fraction(v)


def _expand(coeffs: Sequence[float], lam: Fraction, w: Fraction) -> list[Fraction]:
    """Exact coefficients of ``eta -> phi(lam + w eta)``."""
    out = [Fraction(0)] * len(coeffs)
    for k, c in enumerate(coeffs):
        c = Fraction(c)
        if c == 0:
            continue
        for i in range(k + 1):
            out[i] += c * math.comb(k, i) * lam ** (k - i) * w ** i
    return out


@dataclass(frozen=True)
class AffineConjugation:
    source: Cap
    d: int
    offsets: tuple[Fraction, ...]
    widths: tuple[Fraction, ...]
    matrix: np.ndarray  # (d+1, d+1), acts on column vectors x
    amplitude: float
    phase_in: PhaseSpec
    phase_out: PhaseSpec
    linear_discard: tuple[float, ...]
    scale: Fraction  # x~_{d+1} = scale * x_{d+1}
    printed_map: bool = False

    @property
    def determinant(self) -> float:
        return float(np.prod([float(w) for w in self.widths]) * self.scale)

    def apply(self, x) -> np.ndarray:
        """``T x`` for an ``(N, d+1)`` array of space points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = self.d
        out = np.empty_like(x)
        for j in range(d):
            out[:, j] = self.matrix[j, j] * x[:, j] + self.matrix[j, d] * x[:, d]
        out[:, d] = self.matrix[d, d] * x[:, d]
        return out

    def pull_back(self, xi) -> np.ndarray:
        """``eta = (xi - lam) / w`` for ``(N, d)`` frequency points."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        lam = np.array([float(v) for v in self.offsets])
        w = np.array([float(v) for v in self.widths])
        return (xi - lam) / w

    def transform(self, f: FrequencyFunction) -> FrequencyFunction:
        """The normalised input ``f~`` on the unit cube."""
        if f.mode == "atomic":
            eta = np.clip(self.pull_back(f.points), 0.0, 1.0)
            return FrequencyFunction.atomic(eta, f.amplitudes, {**f.provenance, "conjugated": True})
        caps = [self._pull_back_cap(c) for c in f.caps]
        return FrequencyFunction.per_cap(caps, self.amplitude * f.coeffs, f.q,
                                         {**f.provenance, "conjugated": True})

    def _pull_back_cap(self, cap: Cap) -> Cap:
        bounds = []
        for ax, lam, w in zip(cap.axes, self.offsets, self.widths):
            bounds.append(((_frac(ax.lo) - lam) / w, (_frac(ax.hi) - lam) / w))
        return box_cap(bounds, family_id="conjugated")

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "offsets": [str(v) for v in self.offsets],
            "widths": [str(v) for v in self.widths],
            "scale": str(self.scale),
            "matrix": self.matrix.tolist(),
            "amplitude": self.amplitude,
            "phase_in": self.phase_in.to_json(),
            "psi": self.phase_out.to_json(),
            "linear_discard": list(self.linear_discard),
            "printed_map": self.printed_map,
        }

    @classmethod
    def from_json(cls, obj: dict) -> AffineConjugation:
        offsets = tuple(Fraction(v) for v in obj["offsets"])
        widths = tuple(Fraction(v) for v in obj["widths"])
        source = box_cap([(lo, lo + w) for lo, w in zip(offsets, widths)], family_id="source")
        return cls(source, obj["d"], offsets, widths, np.array(obj["matrix"], dtype=float),
                   float(obj["amplitude"]), PhaseSpec.from_json(obj["phase_in"]),
                   PhaseSpec.from_json(obj["psi"]), tuple(obj["linear_discard"]),
                   Fraction(obj["scale"]), bool(obj.get("printed_map", False)))


def _default_scale(expanded: list[list[Fraction]], degree: int) -> Fraction:
    # match the normalisation of the quadratic part, e.g. 6 eta**2 when m = 2
    quad = [c[2] for c in expanded if len(c) > 2]
    top = max((abs(q) for q in quad), default=Fraction(0))
    if top > 0:
        return top / math.comb(degree, 2)
    lead = max((abs(c[-1]) for c in expanded), default=Fraction(0))
    return lead if lead > 0 else Fraction(1)


def conjugate(tau: Cap, phase: PhaseSpec | int = 2, K: int | None = None,
              printed_map: bool = False) -> AffineConjugation:
    """Conjugation data for the cap ``tau``.

    ``phase`` is a PhaseSpec or the half-degree m (pure power ``2m``).  With
    ``K`` given the last space variable is scaled by ``1/K``; otherwise the
    scale is chosen so the largest quadratic coefficient of psi equals
    ``binom(2m, 2)``.  ``printed_map=True`` swaps in the diagonal
    ``lam_j K**(-1/2)`` (the inverted variant of the exact diagonal); it exists
    only to show that variant failing the identity check.
    """
    if isinstance(phase, int):
        phase = PhaseSpec.pure_power(tau.d, 2 * phase)
    d = tau.d
    if phase.d != d:
        raise ValueError("phase and cap dimensions differ")
    lams = tuple(_frac(a.lo) for a in tau.axes)
    widths = tuple(_frac(a.hi) - _frac(a.lo) for a in tau.axes)
    if any(w <= 0 for w in widths):
        raise DegenerateBox("cap has a zero-width axis")
    expanded = [_expand(phase.coeffs[j], lams[j], widths[j]) for j in range(d)]
    degree = phase.degree
    if K is not None:
        scale = Fraction(1, K) if isinstance(K, int) else 1 / Fraction(K)
    else:
        scale = _default_scale(expanded, degree)

    T = np.zeros((d + 1, d + 1))
    linear = []
    psi_axes = []
    for j in range(d):
        b = expanded[j] + [Fraction(0)] * (2 - len(expanded[j]) + 1)
        diag = widths[j]
        if printed_map:
            if K is None:
                raise ValueError("the printed-map variant needs K")
            diag = lams[j] * Fraction(K) ** Fraction(-1, 2) if float(lams[j]) > 0 else widths[j]
        T[j, j] = float(diag)
        T[j, d] = float(b[1])
        linear.append(float(b[1]))
        psi_axes.append(tuple([0.0, 0.0] + [float(c / scale) for c in b[2:]]))
    T[d, d] = float(scale)
    amplitude = float(np.prod([float(w) for w in widths]))
    return AffineConjugation(tau, d, lams, widths, T, amplitude, phase,
                             PhaseSpec(tuple(psi_axes)), tuple(linear), scale, printed_map)


@dataclass(frozen=True)
class VerifyResult:
    max_rel_error: float
    tol: float
    n_points: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol

    @property
    def tolerance_exceeded(self) -> bool:
        return not self.passed


def verify_conjugation(f: FrequencyFunction, tau: Cap, phase: PhaseSpec | int, pts,
                       tol: float = 1e-9, K: int | None = None, printed_map: bool = False,
                       floor: float = 1e-300) -> VerifyResult:
    """Compare ``|E_tau f(x)|`` with ``|E^psi f~(T x)|`` at the given points.

    Returns ``max_i ||L_i| - |R_i|| / max(max_i |L_i|, floor)``.
    """
    if isinstance(phase, int):
        phase = PhaseSpec.pure_power(tau.d, 2 * phase)
    x = pts.points if isinstance(pts, SpacePointSet) else np.atleast_2d(np.asarray(pts, float))
    conj = conjugate(tau, phase, K=K, printed_map=printed_map)
    left = eval_extension(f, tau, phase, x)
    right = eval_extension(conj.transform(f), unit_cube(tau.d), conj.phase_out, conj.apply(x))
    scale = max(float(np.max(np.abs(left))), floor)
    err = float(np.max(np.abs(np.abs(left) - np.abs(right)))) / scale
    return VerifyResult(err, tol, x.shape[0])


@dataclass(frozen=True)
class PhaseReport:
    min_d2: float
    max_d2: float
    max_abs_d3: float
    max_abs_d4: float
    higher_zero: bool

    @property
    def nondegenerate(self) -> bool:
        return self.min_d2 > 0

    def to_json(self) -> dict:
        return {"min_d2": self.min_d2, "max_d2": self.max_d2, "max_abs_d3": self.max_abs_d3,
                "max_abs_d4": self.max_abs_d4, "higher_zero": self.higher_zero}


def _extrema(coeffs: np.ndarray, lo: float, hi: float) -> tuple[float, float]:
    """Exact min and max of a polynomial on [lo, hi] (endpoints and critical points)."""
    coeffs = np.trim_zeros(np.asarray(coeffs, float), "b")
    if coeffs.size == 0:
        return 0.0, 0.0
    cand = [lo, hi]
    if coeffs.size > 2:
        for r in nppoly.polyroots(nppoly.polyder(coeffs)):
            if abs(r.imag) < 1e-12 and lo <= r.real <= hi:
                cand.append(float(r.real))
    vals = nppoly.polyval(np.array(cand), coeffs)
    return float(vals.min()), float(vals.max())


def check_phase_conditions(psi: PhaseSpec, lo: float = 0.0, hi: float = 1.0) -> list[PhaseReport]:
    """Per-axis derivative ranges of psi over ``[lo, hi]``."""
    reports = []
    for j in range(psi.d):
        c = psi.axis(j)

        def der(k):
            return nppoly.polyder(c, k) if k < len(c) else np.zeros(1)

        d2lo, d2hi = _extrema(der(2), lo, hi)
        d3lo, d3hi = _extrema(der(3), lo, hi)
        d4lo, d4hi = _extrema(der(4), lo, hi)
        higher = len(c) <= 5 or not np.any(c[5:])
        reports.append(PhaseReport(d2lo, d2hi, max(abs(d3lo), abs(d3hi)),
                                   max(abs(d4lo), abs(d4hi)), bool(higher)))
    return reports


def image_bounding_box(conj: AffineConjugation, R: float) -> np.ndarray:
    """Side lengths of the axis-aligned box around ``T(B_R)``."""
    # for a ball, the half-width along row r is R * |row r|
    return 2.0 * R * np.linalg.norm(conj.matrix, axis=1)

