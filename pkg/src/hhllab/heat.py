"""Implicit finite-difference systems for 2-D heat diffusion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg


@dataclass(frozen=True)
class HeatSpec:
    """Square lattice of ``l x l`` points; ``r`` plays the role of D*dt/dx^2."""

    l: int
    r: float
    forcing: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.l < 2:
            raise ValueError("lattice needs at least 2 points per side")
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.forcing is not None and len(self.forcing) != self.l ** 2:
            raise ValueError(f"forcing must have {self.l ** 2} entries")

    @property
    def dim(self) -> int:
        return self.l ** 2

    def rhs(self) -> np.ndarray:
        if self.forcing is None:
            return np.ones(self.dim)
        return np.asarray(self.forcing, dtype=float)


def heat_coefficients(l: int, r: float) -> np.ndarray:
    """``1 + 4r`` on the diagonal and ``-r`` at offsets +-1 and +-l.

    The +-1 couplings are kept across lattice-row ends, exactly as the
    banded pattern is written; no boundary exception is made.
    """
    n = l * l
    a = np.diag(np.full(n, 1 + 4 * r))
    for off in (1, l):
        idx = np.arange(n - off)
        a[idx, idx + off] = -r
        a[idx + off, idx] = -r
    return a


def heat_matrix(spec: HeatSpec) -> linalg.LinearSystem:
    """Padded, normalised system ``A T = F`` ready for HHL."""
    return linalg.prepare(heat_coefficients(spec.l, spec.r), spec.rhs())
