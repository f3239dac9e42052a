"""Gauss-Legendre rules and a Filon-type rule for 1-D oscillatory integrals.

The extension operator of a piecewise-constant density factors, cap by
cap and axis by axis, into integrals

    I(alpha, beta) = int_a^b e(alpha t + beta phi(t)) dt,   e(u) = exp(2 pi i u),

with ``|alpha|, |beta|`` up to a few times R.  Over a cap the linear part
of the phase winds ~R * width times, far too often for a fixed Gauss rule,
but after removing the tangent line at the panel centre the remainder
``beta * rho(t)`` is O(1) (that is what the cap widths are built for).
So on each panel we expand ``e(beta rho)`` in Legendre polynomials and
integrate each term against the linear oscillation exactly:

    int_{-1}^{1} P_n(s) exp(i kappa s) ds = 2 i^n j_n(kappa).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly

TWO_PI = 2.0 * math.pi


@lru_cache(maxsize=64)
def gauss_legendre(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the q-point rule on [-1, 1] (read-only arrays)."""
    x, w = npleg.leggauss(q)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_interval(q: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(q)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@lru_cache(maxsize=64)
def _legendre_projector(q: int) -> np.ndarray:
    """``B[n, k] = (2n+1)/2 w_k P_n(s_k)``: nodal values -> Legendre coefficients."""
    x, w = gauss_legendre(q)
    P = npleg.legvander(x, q - 1).T  # (n, k)
    B = (2 * np.arange(q)[:, None] + 1) / 2.0 * P * w[None, :]
    B.setflags(write=False)
    return B


def spherical_jn_all(N: int, x) -> np.ndarray:
    """``j_0(x) .. j_{N-1}(x)`` for real ``x``; result shape ``x.shape + (N,)``.

    Forward recurrence where ``|x| >= N`` (stable there), Miller's backward
    recurrence normalised by ``sum (2n+1) j_n**2 = 1`` elsewhere, and a
    two-term series for tiny arguments.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    xf = x.ravel()
    ax = np.abs(xf)
    out = np.zeros((xf.size, N))

    tiny = ax < 1e-4
    fwd = ax >= max(N, 1)
    mid = ~(tiny | fwd)

    if tiny.any():
        t = ax[tiny]
        dfact = 1.0
        for n in range(N):
            dfact *= (2 * n + 1)
            out[tiny, n] = t ** n / dfact * (1.0 - t * t / (2.0 * (2 * n + 3)))

    if fwd.any():
        t = ax[fwd]
        s, c = np.sin(t), np.cos(t)
        j0 = s / t
        out[fwd, 0] = j0
        if N > 1:
            j1 = s / (t * t) - c / t
            out[fwd, 1] = j1
            jm, jc = j0, j1
            for n in range(1, N - 1):
                jn = (2 * n + 1) / t * jc - jm
                out[fwd, n + 1] = jn
                jm, jc = jc, jn

    if mid.any():
        t = ax[mid]
        L = int(1.5 * N + 30)
        jp = np.zeros_like(t)           # j_{n+1}
        jc = np.full_like(t, 1e-30)     # j_n, arbitrary start
        acc = (2 * L + 1) * jc * jc
        block = np.zeros((t.size, N))
        for n in range(L, 0, -1):
            jm = (2 * n + 1) / t * jc - jp
            jp, jc = jc, jm
            if n - 1 < N:
                block[:, n - 1] = jc
            acc += (2 * n - 1) * jc * jc
            big = np.abs(jc) > 1e100
            if big.any():
                jp[big] *= 1e-100
                jc[big] *= 1e-100
                acc[big] *= 1e-200
                block[big] *= 1e-100
        out[mid] = block / np.sqrt(acc)[:, None]

    neg = xf < 0
    if neg.any():
        out[neg, 1::2] *= -1.0
    return out.reshape(shape + (N,))


def poly_eval(coeffs: np.ndarray, t):
    return nppoly.polyval(t, coeffs)


def taylor_shift(coeffs: np.ndarray, c: float, h: float) -> np.ndarray:
    """Coefficients of ``u -> phi(c + h u)`` in powers of u."""
    coeffs = np.asarray(coeffs, dtype=float)
    deg = len(coeffs) - 1
    out = np.zeros(deg + 1)
    for i in range(deg + 1):
        for k in range(i + 1):
            out[k] += coeffs[i] * math.comb(i, k) * c ** (i - k) * h ** k
    return out


def _panel_remainder_bound(coeffs: np.ndarray, a: float, b: float, panels: int) -> float:
    edges = np.linspace(a, b, panels + 1)
    worst = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        shifted = taylor_shift(coeffs, 0.5 * (lo + hi), 0.5 * (hi - lo))
        worst = max(worst, float(np.sum(np.abs(shifted[2:]))))
    return worst


def panels_needed(coeffs, a: float, b: float, beta_max: float, max_cycles: float = 0.25) -> int:
    """Smallest panel count keeping ``beta_max * |rho|`` under ``max_cycles`` on every panel."""
    coeffs = np.asarray(coeffs, dtype=float)
    if beta_max == 0 or len(coeffs) <= 2:
        return 1
    one = _panel_remainder_bound(coeffs, a, b, 1) * beta_max
    P = max(1, int(math.ceil(math.sqrt(one / max_cycles))))
    while _panel_remainder_bound(coeffs, a, b, P) * beta_max > max_cycles:
        P += 1
    return P


def filon_integral(a: float, b: float, alpha, beta, coeffs, q: int = 20,
                   panels: int | None = None, max_cycles: float = 0.25) -> np.ndarray:
    """``int_a^b e(alpha t + beta phi(t)) dt`` for arrays ``alpha``, ``beta``.

    ``coeffs`` are the ascending polynomial coefficients of phi.  The panel
    count is derived from ``max |beta|`` unless given; pass it explicitly
    when results must not depend on how points are batched.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    alpha, beta = np.broadcast_arrays(alpha, beta)
    coeffs = np.asarray(coeffs, dtype=float)
    if panels is None:
        bmax = float(np.max(np.abs(beta))) if beta.size else 0.0
        panels = panels_needed(coeffs, a, b, bmax, max_cycles)
    s, _ = gauss_legendre(q)
    B = _legendre_projector(q)
    moment_phase = (2.0 * np.power(1j, np.arange(q)))
    total = np.zeros(alpha.shape, dtype=complex)
    edges = np.linspace(a, b, panels + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
        shifted = taylor_shift(coeffs, c, h)
        rho = nppoly.polyval(s, np.concatenate([[0.0, 0.0], shifted[2:]]))
        phi_c, dphi_c = shifted[0], shifted[1] / h
        H = np.exp(1j * TWO_PI * beta[..., None] * rho)
        A = np.einsum("...k,nk->...n", H, B)
        kappa = TWO_PI * (alpha + beta * dphi_c) * h
        J = spherical_jn_all(q, kappa)
        panel = np.einsum("...n,...n->...", A, J * moment_phase)
        total += h * np.exp(1j * TWO_PI * (alpha * c + beta * phi_c)) * panel
    return total


def gauss_integral(a: float, b: float, alpha, beta, coeffs, q: int = 12) -> np.ndarray:
    """Plain q-point Gauss-Legendre approximation of the same integral."""
    t, w = gauss_legendre_interval(q, a, b)
    alpha = np.asarray(alpha, dtype=float)[..., None]
    beta = np.asarray(beta, dtype=float)[..., None]
    phase = alpha * t + beta * nppoly.polyval(t, np.asarray(coeffs, dtype=float))
    return np.einsum("...k,k->...", np.exp(1j * TWO_PI * phase), w)
