"""Finite-volume spectral diagnostics.

Eigenpairs of tridiagonal boxes, eigenvector decay/participation reports,
and the band spectrum of periodic potentials from the Floquet discriminant
Delta(E) = tr(M_p(E)), bands = {E : |Delta(E)| <= 2}.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq, minimize_scalar

from .cocycle import propagate_potential, _log_norms
from .operator import TridiagonalOperator
from .potential import PotentialSpec, halfline_potentials
from .symbolic import DigitSequence

MAX_EIGEN_SIZE = 100_000
NOISE_FLOOR = 1e-14
SCAN_POINTS = 10_000
EDGE_XTOL = 1e-13
TANGENCY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EigenPair:
    eigenvalue: float
    eigenvector: np.ndarray


def eigensolve_arrays(op: TridiagonalOperator) -> tuple[np.ndarray, np.ndarray]:
    """All eigenvalues (ascending) and unit eigenvectors as columns."""
    if op.size > MAX_EIGEN_SIZE:
        raise ValueError(f"box of {op.size} sites exceeds the {MAX_EIGEN_SIZE}-site limit")
    if op.size == 1:
        return op.diagonal.copy(), np.ones((1, 1))
    return eigh_tridiagonal(op.diagonal, op.offdiagonal)


def eigensolve(op: TridiagonalOperator) -> list[EigenPair]:
    w, vecs = eigensolve_arrays(op)
    return [EigenPair(float(w[k]), vecs[:, k]) for k in range(w.size)]


def participation_ratio(psi) -> float:
    psi = np.asarray(psi, dtype=np.float64)
    p = psi * psi
    p /= p.sum()
    return float(1.0 / np.sum(p * p))


@dataclass(frozen=True)
class DecayReport:
    eigenvalue: float
    rate: float | None
    residual: float | None
    participation_ratio: float
    n_fit: int

    @property
    def reliable(self) -> bool:
        return self.rate is not None


def decay_report(pair: EigenPair, min_points: int = 8) -> DecayReport:
    """Fit log|psi(n)| ~ c - rate * n right of the amplitude peak.

    The fit starts ceil(N/10) sites past the peak and skips entries below the
    1e-14 noise floor.  With fewer than ``min_points`` usable sites the rate
    and residual are None.
    """
    psi = np.asarray(pair.eigenvector, dtype=np.float64)
    N = psi.size
    if N < 16:
        raise ValueError("decay fit needs an eigenvector of length >= 16")
    amp = np.abs(psi)
    start = int(np.argmax(amp)) + math.ceil(N / 10)
    n = np.arange(start, N)
    keep = amp[start:] >= NOISE_FLOOR
    n, y = n[keep], np.log(amp[start:][keep])
    pr = participation_ratio(psi)
    if n.size < min_points:
        return DecayReport(pair.eigenvalue, None, None, pr, int(n.size))
    slope, intercept = np.polyfit(n, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * n + intercept)) ** 2)))
    return DecayReport(pair.eigenvalue, float(-slope), residual, pr, int(n.size))


def mid_spectrum_pr(op: TridiagonalOperator) -> float:
    """Median participation ratio over the middle half of the spectrum (by index)."""
    w, vecs = eigensolve_arrays(op)
    N = w.size
    mid = vecs[:, N // 4: N - N // 4]
    p = mid * mid
    return float(np.median(1.0 / np.sum(p * p, axis=0)))


# -- periodic bands -------------------------------------------------------------

def period_potential(spec: PotentialSpec, omega: DigitSequence) -> np.ndarray:
    """One period of the potential along the periodic tail of omega.

    Sites n >= len(prefix) read a purely periodic shift of omega; the prefix
    only changes finitely many sites and is dropped.
    """
    if not omega.is_periodic:
        raise ValueError("band computation needs a periodic digit sequence")
    first = max(len(omega.prefix), 1)
    return halfline_potentials(spec, omega, first, len(omega.period))


def discriminant(v: np.ndarray, E) -> np.ndarray:
    """tr(A(p) ... A(1)) for the period values v, vectorized over E."""
    E = np.asarray(E, dtype=np.float64)
    a, b, c, d = np.ones_like(E), np.zeros_like(E), np.zeros_like(E), np.ones_like(E)
    for vk in v:
        x = E - vk
        a, b, c, d = x * a - c, x * b - d, a, b
    return a + d


@dataclass(frozen=True)
class BandSet:
    bands: tuple[tuple[float, float], ...]
    period: int
    potential: np.ndarray = field(repr=False, compare=False)
    closed_gaps: tuple[float, ...] = ()

    def __post_init__(self):
        for (lo, hi), (lo2, _) in zip(self.bands, self.bands[1:]):
            if not hi < lo2:
                raise ValueError("bands must be disjoint and sorted")

    def discriminant(self, E) -> np.ndarray:
        return discriminant(self.potential, E)

    def contains(self, E, pad: float = 0.0) -> np.ndarray:
        E = np.asarray(E, dtype=np.float64)
        inside = np.zeros(E.shape, dtype=bool)
        for lo, hi in self.bands:
            inside |= (E >= lo - pad) & (E <= hi + pad)
        return inside

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["band_index", "E_lower", "E_upper", "period"])
        for i, (lo, hi) in enumerate(self.bands):
            w.writerow([i, repr(lo), repr(hi), self.period])
        return buf.getvalue()


def periodic_bands(spec: PotentialSpec, omega: DigitSequence, scan_points: int = SCAN_POINTS) -> BandSet:
    """Bands of the periodic potential along omega's periodic tail.

    |Delta| - 2 is scanned on a uniform grid over the spectral enclosure;
    sign changes are refined by a bracketing root finder.  Local maxima of
    |Delta| - 2 inside a band are refined too: a positive maximum is a gap
    the grid stepped over, one within 1e-8 of zero is a closed gap.
    """
    v = period_potential(spec, omega)
    p = v.size
    vmax = float(np.max(np.abs(v)))
    lo, hi = -2.0 - vmax, 2.0 + vmax
    pad = 1e-3 * (hi - lo) + 1e-3
    E = np.linspace(lo - pad, hi + pad, scan_points)

    def g(x):
        return abs(float(discriminant(v, x))) - 2.0

    gs = np.abs(discriminant(v, E)) - 2.0

    def root(a, b):
        return brentq(g, a, b, xtol=EDGE_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)

    edges = []
    inside = gs <= 0
    for i in np.nonzero(inside[1:] != inside[:-1])[0]:
        edges.append(root(E[i], E[i + 1]))
    if inside[0] or inside[-1]:
        raise RuntimeError("band touches the scan boundary; enclosure is wrong")
    bands = [[edges[k], edges[k + 1]] for k in range(0, len(edges), 2)]

    # gaps hidden between two grid points, and tangencies
    closed = []
    split = []
    for i in range(1, scan_points - 1):
        if inside[i] and gs[i] >= gs[i - 1] and gs[i] >= gs[i + 1] and inside[i - 1] and inside[i + 1]:
            res = minimize_scalar(lambda x: -g(x), bounds=(E[i - 1], E[i + 1]), method="bounded",
                                  options={"xatol": 1e-13})
            top = -res.fun
            if top > TANGENCY_TOL:
                split.append((root(E[i - 1], res.x), root(res.x, E[i + 1])))
            elif top > -TANGENCY_TOL:
                closed.append(float(res.x))
    for a, b in split:
        for band in bands:
            if band[0] < a < band[1]:
                bands.append([b, band[1]])
                band[1] = a
                break
    bands.sort()
    return BandSet(tuple((float(a), float(b)) for a, b in bands), p, v, tuple(closed))


def band_edges_oracle(v: np.ndarray) -> np.ndarray:
    """Band edges as eigenvalues of the periodic and antiperiodic p x p matrices.

    Delta(E) = 2 exactly at the periodic, -2 at the antiperiodic eigenvalues;
    sorted together they are the band edges (with multiplicity at closed gaps).
    """
    v = np.asarray(v, dtype=np.float64)
    p = v.size
    out = []
    for phase in (1.0, -1.0):
        if p == 1:
            out.append(np.array([v[0] + 2.0 * phase]))
            continue
        h = np.diag(v).astype(complex) + np.diag(np.ones(p - 1), 1) + np.diag(np.ones(p - 1), -1)
        h[0, p - 1] += phase
        h[p - 1, 0] += phase
        out.append(np.linalg.eigvalsh(h))
    return np.sort(np.concatenate(out))


@dataclass(frozen=True)
class BandCheckPoint:
    energy: float
    where: str
    mean: float
    stderr: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class BandCheckReport:
    points: tuple[BandCheckPoint, ...]
    n_steps: int

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.points)


def phase_exponents(spec: PotentialSpec, omega: DigitSequence, energies, n: int) -> np.ndarray:
    """Exponents along each of the p cyclic phases of the periodic tail, shape (p, energies)."""
    v = period_potential(spec, omega)
    p = v.size
    reps = -(-(n + p) // p)
    tiled = np.tile(v, reps)
    rows = [_log_norms(propagate_potential(tiled[j:j + n], energies)) / n for j in range(p)]
    return np.vstack(rows)


def band_gamma_check(spec: PotentialSpec, omega: DigitSequence, bands: BandSet, n: int = 100_000,
                     C: float = 20.0, outside_offset: float = 0.5) -> BandCheckReport:
    """Exponent at band midpoints (must be <= C/n) and off the bands (must exceed 3 stderr).

    Off-band points sit ``outside_offset`` below/above each band edge, plus
    every gap midpoint, whenever they fall outside all bands.  Samples are
    the p cyclic phases of the periodic orbit.
    """
    probes = [((lo + hi) / 2, "band") for lo, hi in bands.bands]
    out = []
    for lo, hi in bands.bands:
        out += [lo - outside_offset, hi + outside_offset]
    for (_, hi), (lo2, _) in zip(bands.bands, bands.bands[1:]):
        out.append((hi + lo2) / 2)
    resolution = 4.0 * (4.0 + np.max(np.abs(bands.potential))) / SCAN_POINTS
    probes += [(E, "gap") for E in sorted(set(out))
               if not bands.contains(E, pad=resolution)]
    energies = np.array([E for E, _ in probes])
    gam = phase_exponents(spec, omega, energies, n)
    k = gam.shape[0]
    mean = gam.mean(axis=0)
    stderr = gam.std(axis=0, ddof=1) / math.sqrt(k) if k > 1 else np.zeros_like(mean)
    points = []
    for (E, where), m, s in zip(probes, mean, stderr):
        if where == "band":
            bound = C / n
            ok = m <= bound
        else:
            bound = 3.0 * s
            ok = m > bound
        points.append(BandCheckPoint(float(E), where, float(m), float(s), float(bound), bool(ok)))
    return BandCheckReport(tuple(points), n)


DECAY_HEADER = ["eigenvalue", "rate", "residual", "participation_ratio", "N", "alpha", "seed"]


def decay_csv(rows) -> str:
    """rows: iterable of (DecayReport, N, alpha, seed)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DECAY_HEADER)
    for rep, N, alpha, seed in rows:
        w.writerow([repr(rep.eigenvalue), "" if rep.rate is None else repr(rep.rate),
                    "" if rep.residual is None else repr(rep.residual),
                    repr(rep.participation_ratio), N, repr(alpha), seed])
    return buf.getvalue()
