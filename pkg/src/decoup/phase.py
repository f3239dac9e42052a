"""Separable polynomial phases ``phi(xi) = sum_j phi_j(xi_j)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as nppoly


@dataclass(frozen=True)
class PhaseSpec:
    """Per-axis ascending coefficient lists; axis j contributes ``sum_i c[j][i] t**i``."""

    coeffs: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(tuple(float(c) for c in axis) for axis in self.coeffs))
        if not self.coeffs:
            raise ValueError("phase needs at least one axis")

    @classmethod
    def pure_power(cls, d: int, power: int = 4) -> PhaseSpec:
        axis = [0.0] * power + [1.0]
        return cls(tuple(tuple(axis) for _ in range(d)))

    @classmethod
    def from_axes(cls, *axes) -> PhaseSpec:
        return cls(tuple(tuple(a) for a in axes))

    @property
    def d(self) -> int:
        return len(self.coeffs)

    @property
    def degree(self) -> int:
        return max(len(c) - 1 for c in self.coeffs)

    def axis(self, j: int) -> np.ndarray:
        return np.asarray(self.coeffs[j], dtype=float)

    def axis_value(self, j: int, t):
        return nppoly.polyval(np.asarray(t, dtype=float), self.axis(j))

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        xi = xi.reshape(-1, self.d)
        total = np.zeros(xi.shape[0])
        for j in range(self.d):
            total = total + nppoly.polyval(xi[:, j], self.axis(j))
        return total

    def derivative(self, j: int, order: int = 1) -> np.ndarray:
        return nppoly.polyder(self.axis(j), order) if order < len(self.coeffs[j]) else np.zeros(1)

    def to_json(self) -> dict:
        return {"coeffs": [list(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj: dict) -> PhaseSpec:
        return cls(tuple(tuple(c) for c in obj["coeffs"]))
