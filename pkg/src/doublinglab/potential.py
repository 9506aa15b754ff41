"""Sampling functions on the circle and the potentials they generate.

Half-line:  V(n) = coupling * f(m**n theta), n >= 1, theta = D(omega).
Whole-line: V(n) = coupling * f(D(omega_{n+1}, omega_{n+2}, ...)), n in Z.

The whole-line site n reads the tail starting at digit n + 1.  With that
alignment the half-line restriction of the whole-line potential is the
half-line potential of theta = D(omega_1, omega_2, ...), entry for entry.
Both families are evaluated through :func:`symbolic.orbit_points`, so the
identity holds bit for bit and not just up to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .symbolic import DigitSequence, TwoSidedDigitSequence, orbit_points

KINDS = ("cosine", "step", "table")


@dataclass(frozen=True)
class SamplingFunction:
    """Bounded function f on [0, 1).

    ``cosine``: cos(2 pi theta).  ``step``: 1 on [0, threshold), else 0.
    ``table``: values[floor(theta * K)] on K equal half-open cells.

    Constant functions are rejected unless ``allow_constant`` is set; they
    are only useful as free-case references.
    """

    kind: str
    threshold: float | None = None
    values: tuple[float, ...] | None = None
    allow_constant: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sampling function kind {self.kind!r}")
        if self.kind == "step":
            if self.threshold is None or not 0.0 < self.threshold < 1.0:
                raise ValueError("step threshold must lie in (0, 1)")
        if self.kind == "table":
            if not self.values:
                raise ValueError("table needs at least one value")
            if not all(math.isfinite(v) for v in self.values):
                raise ValueError("table values must be finite")
            if len(set(self.values)) < 2 and not self.allow_constant:
                raise ValueError("sampling function must be non-constant")

    @classmethod
    def cosine(cls) -> "SamplingFunction":
        return cls("cosine")

    @classmethod
    def step(cls, threshold: float) -> "SamplingFunction":
        return cls("step", threshold=float(threshold))

    @classmethod
    def table(cls, values: Sequence[float], allow_constant: bool = False) -> "SamplingFunction":
        return cls("table", values=tuple(float(v) for v in values), allow_constant=allow_constant)

    @classmethod
    def constant(cls, value: float = 0.0) -> "SamplingFunction":
        return cls.table([value], allow_constant=True)

    @classmethod
    def from_file(cls, path: str | Path, allow_constant: bool = False) -> "SamplingFunction":
        values = np.loadtxt(path, ndmin=1)
        if values.ndim != 1:
            raise ValueError(f"{path}: expected a single numeric column")
        return cls.table(values.tolist(), allow_constant=allow_constant)

    @property
    def sup(self) -> float:
        if self.kind == "table":
            return max(abs(v) for v in self.values)
        return 1.0

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if self.kind == "cosine":
            return np.cos(2.0 * np.pi * theta)
        if self.kind == "step":
            return np.where(theta < self.threshold, 1.0, 0.0)
        K = len(self.values)
        cell = np.minimum(np.floor(theta * K).astype(np.int64), K - 1)
        return np.asarray(self.values)[cell]

    def to_record(self) -> dict:
        params: dict = {}
        if self.kind == "step":
            params["c"] = self.threshold
        elif self.kind == "table":
            params["values"] = list(self.values)
            if self.allow_constant:
                params["allow_constant"] = True
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_record(cls, rec: dict) -> "SamplingFunction":
        kind = rec["kind"]
        params = dict(rec.get("params", {}))
        if kind == "cosine" and not params:
            return cls.cosine()
        if kind == "step" and set(params) == {"c"}:
            return cls.step(params["c"])
        if kind == "table" and set(params) <= {"values", "path", "allow_constant"}:
            allow = bool(params.get("allow_constant", False))
            if "values" in params and "path" not in params:
                return cls.table(params["values"], allow_constant=allow)
            if "path" in params and "values" not in params:
                return cls.from_file(params["path"], allow_constant=allow)
        raise ValueError(f"invalid sampling function record {rec!r}")


def eval_f(f: SamplingFunction, theta) -> float:
    value = getattr(theta, "value", theta)
    if not 0.0 <= value < 1.0:
        raise ValueError(f"theta={value!r} outside [0, 1)")
    return float(f(np.array([value]))[0])


@dataclass(frozen=True)
class PotentialSpec:
    coupling: float
    f: SamplingFunction
    base: int = 2

    def __post_init__(self):
        if not (self.coupling > 0 and math.isfinite(self.coupling)):
            raise ValueError(f"coupling must be a positive finite number, got {self.coupling!r}")
        if not isinstance(self.base, int) or self.base < 2:
            raise ValueError(f"base must be an integer >= 2, got {self.base!r}")

    @property
    def bound(self) -> float:
        """coupling * sup|f|, the uniform bound on |V(n)|."""
        return self.coupling * self.f.sup

    def enclosure(self) -> tuple[float, float]:
        return (-2.0 - self.bound, 2.0 + self.bound)

    def to_record(self) -> dict:
        return {"lambda": self.coupling, "f": self.f.to_record(), "base": self.base}


def _check_base(spec: PotentialSpec, omega) -> None:
    if omega.base != spec.base:
        raise ValueError(f"digit sequence base {omega.base} != potential base {spec.base}")


def halfline_potentials(spec: PotentialSpec, omega: DigitSequence, first: int, count: int) -> np.ndarray:
    """V(n) for n = first, ..., first + count - 1 (first >= 1)."""
    _check_base(spec, omega)
    if first < 1:
        raise ValueError("half-line sites start at 1")
    return spec.coupling * spec.f(orbit_points(omega, first, count))


def halfline_potential(spec: PotentialSpec, omega: DigitSequence, n: int) -> float:
    return float(halfline_potentials(spec, omega, n, 1)[0])


def wholeline_potentials(spec: PotentialSpec, omega: TwoSidedDigitSequence, first: int, count: int) -> np.ndarray:
    """V_omega(n) for n = first, ..., first + count - 1; any integer first."""
    _check_base(spec, omega)
    return spec.coupling * spec.f(orbit_points(omega, first, count))


def wholeline_potential(spec: PotentialSpec, omega: TwoSidedDigitSequence, n: int) -> float:
    return float(wholeline_potentials(spec, omega, n, 1)[0])


def nondeterminism_witness(spec: PotentialSpec, omega: TwoSidedDigitSequence, site: int = 0):
    """Pair (omega, omega') whose potentials agree on every site > ``site``.

    omega' flips the first digit read by ``site`` (digit site + 1).  Every
    site > ``site`` reads only later digits, so those potential values are
    unchanged; V(site) itself generally is not.  Returns
    ``(omega_prime, V(site), V'(site))``.
    """
    d = omega.digit(site + 1)
    other = omega.with_digits({site + 1: (d + 1) % omega.base})
    return other, wholeline_potential(spec, omega, site), wholeline_potential(spec, other, site)
