"""Transfer-matrix cocycles and Lyapunov exponent estimates.

M(n, E, theta) = A(n) ... A(1) with A(k) = [[E - V(k), -1], [1, 0]].  Products
are accumulated by left multiplication; whenever the sup-norm of the running
product leaves [2**-512, 2**512] it is divided by that norm and the log of
the norm is added to ``log_scale``.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numba
import numpy as np

from .potential import PotentialSpec, halfline_potentials
from .symbolic import DigitSequence, restrict_to_halfline, sample_bernoulli

RESCALE_HI = 2.0**512
RESCALE_LO = 2.0**-512
CURVE_HEADER = ["E", "gamma_mean", "gamma_stderr", "n_steps", "n_samples", "lambda", "f_kind", "base", "seed"]


class NumericalFailure(ArithmeticError):
    def __init__(self, message: str, energy: float | None = None, seed=None):
        super().__init__(message)
        self.energy = energy
        self.seed = seed


@dataclass(frozen=True)
class TransferMatrix:
    a: float
    b: float
    c: float
    d: float

    @classmethod
    def identity(cls) -> "TransferMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, m) -> "TransferMatrix":
        m = np.asarray(m, dtype=np.float64)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def sup_norm(self) -> float:
        return max(abs(self.a), abs(self.b), abs(self.c), abs(self.d))

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        return TransferMatrix.from_array(self.as_array() @ other.as_array())


@dataclass(frozen=True)
class TransferCocycle:
    current: TransferMatrix
    log_scale: float
    steps: int

    @property
    def log_norm(self) -> float:
        """log of the sup-norm of the full, unrescaled product."""
        return self.log_scale + math.log(self.current.sup_norm())

    @property
    def exponent(self) -> float:
        return self.log_norm / self.steps

    def reconstructed_det(self) -> float:
        """det of the unrescaled product; 1 up to roughly eps * ||M||**2 of rounding."""
        det = self.current.det()
        if det == 0.0:
            return 0.0
        return math.copysign(math.exp(math.log(abs(det)) + 2.0 * self.log_scale), det)


def one_step(E: float, v: float) -> TransferMatrix:
    return TransferMatrix(E - v, -1.0, 1.0, 0.0)


@numba.njit(nogil=True, cache=True)
def _propagate_kernel(v, energies, init, out):
    """out[j] = (a, b, c, d, log_scale) for energies[j]; returns index of a failure or -1."""
    for j in range(energies.shape[0]):
        E = energies[j]
        a, b, c, d = init[0], init[1], init[2], init[3]
        log_scale = 0.0
        for k in range(v.shape[0]):
            x = E - v[k]
            a, b, c, d = x * a - c, x * b - d, a, b
            s = max(max(abs(a), abs(b)), max(abs(c), abs(d)))
            if s > RESCALE_HI or s < RESCALE_LO:
                if not (s > 0.0 and s < np.inf):
                    return j
                a /= s
                b /= s
                c /= s
                d /= s
                log_scale += math.log(s)
        if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(c) and math.isfinite(d)):
            return j
        out[j, 0] = a
        out[j, 1] = b
        out[j, 2] = c
        out[j, 3] = d
        out[j, 4] = log_scale
    return -1


def propagate_potential(v: np.ndarray, energies, initial: TransferMatrix | None = None,
                        seed=None) -> np.ndarray:
    """Run the cocycle over the potential values ``v`` for every energy.

    Returns an array of shape (len(energies), 5): rescaled entries a, b, c, d
    and log_scale.
    """
    v = np.ascontiguousarray(v, dtype=np.float64)
    energies = np.atleast_1d(np.asarray(energies, dtype=np.float64))
    init = initial or TransferMatrix.identity()
    init_arr = np.array([init.a, init.b, init.c, init.d])
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(init_arr))):
        raise NumericalFailure("non-finite potential or initial matrix", seed=seed)
    out = np.empty((energies.size, 5))
    bad = _propagate_kernel(v, energies, init_arr, out)
    if bad >= 0:
        raise NumericalFailure(f"non-finite transfer matrix at E={energies[bad]!r}",
                               energy=float(energies[bad]), seed=seed)
    return out


def _as_cocycle(row: np.ndarray, steps: int) -> TransferCocycle:
    return TransferCocycle(TransferMatrix(*map(float, row[:4])), float(row[4]), steps)


def _log_norms(rows: np.ndarray) -> np.ndarray:
    return rows[:, 4] + np.log(np.max(np.abs(rows[:, :4]), axis=1))


def propagate(spec: PotentialSpec, omega: DigitSequence, E: float, n: int,
              initial: TransferMatrix | None = None) -> TransferCocycle:
    """M(n, E, theta) with theta = D(omega); site 1's matrix is applied first."""
    if n < 1:
        raise ValueError("n must be >= 1")
    v = halfline_potentials(spec, omega, 1, n)
    return _as_cocycle(propagate_potential(v, [E], initial)[0], n)


def _normalized(coc: TransferCocycle) -> np.ndarray:
    m = coc.current.as_array()
    return m / np.max(np.abs(m))


def cocycle_property_check(spec: PotentialSpec, omega: DigitSequence, E: float, n: int, m: int,
                           rtol: float = 1e-9, later: DigitSequence | None = None) -> bool:
    """M(n + m, theta) == M(n, T^m theta) M(m, theta), compared normwise.

    ``later`` replaces the shifted sequence S^m omega (to exhibit failures of a
    wrong alignment).  Both sides are compared as (unit sup-norm matrix,
    log-norm) pairs so rescaled products compare without overflow.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    whole = propagate(spec, omega, E, n + m)
    first = propagate(spec, omega, E, m)
    second = propagate(spec, omega.shift(m) if later is None else later, E, n)
    prod = second.current.as_array() @ first.current.as_array()
    scale = np.max(np.abs(prod))
    lhs = _normalized(whole)
    rhs = prod / scale
    log_lhs = whole.log_norm
    log_rhs = second.log_scale + first.log_scale + math.log(scale)
    return bool(np.max(np.abs(lhs - rhs)) <= rtol and abs(log_lhs - log_rhs) <= rtol * max(1.0, abs(log_lhs)))


# -- estimation ---------------------------------------------------------------

@dataclass(frozen=True)
class LyapunovEstimate:
    energy: float
    mean: float
    stderr: float
    n_steps: int
    n_samples: int


@dataclass(frozen=True)
class EnergyGrid:
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("grid count must be >= 1")
        if self.count > 1 and not self.hi > self.lo:
            raise ValueError("grid needs hi > lo")

    @classmethod
    def parse(cls, text: str) -> "EnergyGrid":
        lo, hi, count = text.split(":")
        return cls(float(lo), float(hi), int(count))

    def energies(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, self.count)

    def __str__(self) -> str:
        return f"{self.lo!r}:{self.hi!r}:{self.count}"


@dataclass(frozen=True)
class LyapunovCurve:
    estimates: tuple[LyapunovEstimate, ...]
    grid: EnergyGrid
    spec: PotentialSpec
    seed: int
    n_steps: int
    samples: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        E = [e.energy for e in self.estimates]
        if any(b <= a for a, b in zip(E, E[1:])):
            raise ValueError("energies must be strictly increasing")

    @property
    def energies(self) -> np.ndarray:
        return np.array([e.energy for e in self.estimates])

    @property
    def means(self) -> np.ndarray:
        return np.array([e.mean for e in self.estimates])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([e.stderr for e in self.estimates])

    def rows(self) -> list[list[str]]:
        f_kind = self.spec.f.kind
        return [[repr(e.energy), repr(e.mean), repr(e.stderr), str(e.n_steps), str(e.n_samples),
                 repr(self.spec.coupling), f_kind, str(self.spec.base), str(self.seed)]
                for e in self.estimates]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        writer.writerows(self.rows())
        return buf.getvalue()


def sample_sequence(seed: int, i: int, base: int = 2) -> DigitSequence:
    """Half-line tail of the i-th Bernoulli sample of the ensemble keyed by seed."""
    return restrict_to_halfline(sample_bernoulli(seed, base, spawn=(i,)))


def _summarize(gammas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # gammas: (samples, energies); reduction order fixed by the array layout
    k = gammas.shape[0]
    mean = gammas.mean(axis=0)
    stderr = gammas.std(axis=0, ddof=1) / math.sqrt(k) if k > 1 else np.zeros_like(mean)
    return mean, stderr


def sample_exponents(spec: PotentialSpec, omegas: Sequence[DigitSequence], energies, n: int,
                     workers: int | None = 1, seeds: Sequence | None = None) -> np.ndarray:
    """Per-sample exponents (1/n) log ||M(n, E, D(omega_i))||, shape (samples, energies)."""
    energies = np.atleast_1d(np.asarray(energies, dtype=np.float64))
    seeds = seeds if seeds is not None else [None] * len(omegas)

    def one(i: int) -> np.ndarray:
        v = halfline_potentials(spec, omegas[i], 1, n)
        return _log_norms(propagate_potential(v, energies, seed=seeds[i])) / n

    if workers is None or workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(len(omegas))))
    else:
        rows = [one(i) for i in range(len(omegas))]
    return np.vstack(rows)


def estimate_gamma_from(spec: PotentialSpec, omegas: Sequence[DigitSequence], E: float, n: int,
                        workers: int | None = 1) -> LyapunovEstimate:
    if n < 1 or len(omegas) < 2:
        raise ValueError("need n >= 1 and at least 2 samples")
    mean, stderr = _summarize(sample_exponents(spec, omegas, [E], n, workers))
    return LyapunovEstimate(float(E), float(mean[0]), float(stderr[0]), n, len(omegas))


def estimate_gamma(spec: PotentialSpec, E: float, n: int = 100_000, samples: int = 16, seed: int = 0,
                   workers: int | None = 1) -> LyapunovEstimate:
    """Bernoulli-ensemble average of per-sample exponents at one energy."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    omegas = [sample_sequence(seed, i, spec.base) for i in range(samples)]
    return estimate_gamma_from(spec, omegas, E, n, workers)


def lyapunov_curve(spec: PotentialSpec, grid: EnergyGrid, n: int = 100_000, samples: int = 16,
                   seed: int = 0, workers: int | None = 1) -> LyapunovCurve:
    if n < 1 or samples < 2:
        raise ValueError("need n >= 1 and samples >= 2")
    energies = grid.energies()
    omegas = [sample_sequence(seed, i, spec.base) for i in range(samples)]
    gammas = sample_exponents(spec, omegas, energies, n, workers,
                              seeds=[(seed, i) for i in range(samples)])
    mean, stderr = _summarize(gammas)
    estimates = tuple(LyapunovEstimate(float(E), float(m), float(s), n, samples)
                      for E, m, s in zip(energies, mean, stderr))
    return LyapunovCurve(estimates, grid, spec, seed, n, samples=gammas)


def free_gamma(E):
    """Exact exponent of the free operator: arccosh(|E|/2) outside [-2, 2], else 0."""
    E = np.abs(np.asarray(E, dtype=np.float64))
    return np.where(E > 2.0, np.log((E + np.sqrt(np.maximum(E * E - 4.0, 0.0))) / 2.0), 0.0)
