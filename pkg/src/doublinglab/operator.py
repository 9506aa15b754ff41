"""Finite boxes of the half-line and whole-line operators.

All operators have unit hopping and are stored as their diagonal only.  The
half-line box over sites 1..N carries the boundary condition
cos(alpha) phi(0) + sin(alpha) phi(1) = 0 as the correction -tan(alpha) on
site 1; the far edge is cut with phi(N + 1) = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .potential import PotentialSpec, halfline_potentials, wholeline_potentials
from .symbolic import DigitSequence, TwoSidedDigitSequence


@dataclass(frozen=True)
class BoundaryCondition:
    alpha: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha < math.pi:
            raise ValueError(f"alpha must lie in [0, pi), got {self.alpha!r}")
        if math.isclose(self.alpha, math.pi / 2, rel_tol=0.0, abs_tol=1e-12):
            # phi(1) = 0: a Dirichlet problem on sites 2.., not a diagonal shift
            raise ValueError("alpha = pi/2 forces phi(1) = 0; pose it as a Dirichlet box on sites 2..N")

    @property
    def correction(self) -> float:
        return -math.tan(self.alpha) if self.alpha else 0.0


DIRICHLET = BoundaryCondition(0.0)


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Symmetric tridiagonal operator with off-diagonal entries 1 on sites n_lo..n_hi."""

    diagonal: np.ndarray
    n_lo: int
    alpha: float | None = None

    def __post_init__(self):
        d = np.array(self.diagonal, dtype=np.float64)
        if d.ndim != 1 or d.size < 1:
            raise ValueError("operator needs at least one site")
        d.setflags(write=False)
        object.__setattr__(self, "diagonal", d)

    @property
    def size(self) -> int:
        return self.diagonal.size

    @property
    def n_hi(self) -> int:
        return self.n_lo + self.size - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.n_lo, self.n_hi + 1)

    @property
    def offdiagonal(self) -> np.ndarray:
        return np.ones(self.size - 1)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diagonal) + np.diag(self.offdiagonal, 1) + np.diag(self.offdiagonal, -1)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diagonal[:, None] * x if x.ndim == 2 else self.diagonal * x
        y[:-1] += x[1:]
        y[1:] += x[:-1]
        return y

    def norm_bound(self) -> float:
        return 2.0 + float(np.max(np.abs(self.diagonal)))

    def export_text(self, path: str | Path) -> None:
        header = f"site diagonal  (n_lo={self.n_lo}, alpha={self.alpha})"
        np.savetxt(path, np.column_stack([self.sites, self.diagonal]), fmt=["%d", "%.17g"],
                   header=header)

    @classmethod
    def load_text(cls, path: str | Path) -> "TridiagonalOperator":
        data = np.loadtxt(path, ndmin=2)
        return cls(data[:, 1], int(data[0, 0]))


def build_halfline_box(spec: PotentialSpec, omega: DigitSequence, N: int,
                       bc: BoundaryCondition = DIRICHLET) -> TridiagonalOperator:
    if N < 1:
        raise ValueError("box size N must be >= 1")
    d = halfline_potentials(spec, omega, 1, N)
    d[0] += bc.correction
    return TridiagonalOperator(d, 1, bc.alpha)


def build_wholeline_box(spec: PotentialSpec, omega: TwoSidedDigitSequence, N: int) -> TridiagonalOperator:
    """Sites -N..N, Dirichlet cut at both ends."""
    if N < 1:
        raise ValueError("box size N must be >= 1")
    return TridiagonalOperator(wholeline_potentials(spec, omega, -N, 2 * N + 1), -N)


def restrict(op: TridiagonalOperator) -> TridiagonalOperator:
    """Compression to sites 1..n_hi; dropping the 0-1 bond leaves phi(0) = 0."""
    if not op.n_lo <= 1 <= op.n_hi:
        raise ValueError(f"site range [{op.n_lo}, {op.n_hi}] does not contain site 1")
    return TridiagonalOperator(op.diagonal[1 - op.n_lo:], 1, 0.0)


def cut_at_origin(op: TridiagonalOperator) -> tuple[TridiagonalOperator, TridiagonalOperator]:
    """The two half-boxes left after removing the bond between sites 0 and 1."""
    if not op.n_lo <= 0 < op.n_hi:
        raise ValueError("operator must contain sites 0 and 1")
    k = 1 - op.n_lo
    return TridiagonalOperator(op.diagonal[:k], op.n_lo), TridiagonalOperator(op.diagonal[k:], 1)
