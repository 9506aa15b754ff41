"""Structural identity suite: conjugacy, round trip, restriction, cocycle, determinant.

Each check draws its cases from a seeded numpy Generator and returns a
:class:`CheckResult`; the ``verify`` command prints one line per check.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cocycle import cocycle_property_check, propagate
from .operator import build_halfline_box, build_wholeline_box, restrict
from .potential import PotentialSpec, SamplingFunction
from .symbolic import (
    DigitSequence,
    conjugacy_holds,
    encode,
    evaluate_D,
    restrict_to_halfline,
    sample_bernoulli,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    cases: int
    failures: int
    seconds: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{status}  {self.name}: {self.cases - self.failures}/{self.cases} ({self.seconds:.2f}s){extra}"


def _timed(name, cases_fn):
    t0 = time.perf_counter()
    cases, failures, detail = cases_fn()
    return CheckResult(name, failures == 0, cases, failures, time.perf_counter() - t0, detail)


def check_conjugacy(count: int = 1000, seed: int = 0, bases=(2, 3, 10)) -> CheckResult:
    """D o S = T o D on random finite prefixes, in exact integer arithmetic."""
    rng = np.random.default_rng(seed)

    def run():
        bad = 0
        for i in range(count):
            m = bases[i % len(bases)]
            k = int(rng.integers(2, 200))
            if not conjugacy_holds(rng.integers(0, m, size=k).tolist(), m):
                bad += 1
        return count, bad, ""
    return _timed("conjugacy D.S = T.D", run)


def check_roundtrip(count: int = 1000, seed: int = 0, max_denominator: int = 2**16) -> CheckResult:
    """evaluate_D(encode(p/q)) == p/q exactly, and the float value within 2**-52."""
    rng = np.random.default_rng(seed)

    def run():
        bad = 0
        for i in range(count):
            m = (2, 3, 7)[i % 3]
            q = int(rng.integers(1, max_denominator + 1))
            x = Fraction(int(rng.integers(0, q)), q)
            omega = encode(x, m)
            if evaluate_D(omega, exact=True).exact != x:
                bad += 1
        return count, bad, ""
    return _timed("encode/evaluate round trip", run)


def check_restriction(seeds: int = 100, N: int = 10_000, spec: PotentialSpec | None = None) -> CheckResult:
    """diag(restrict(H_omega box)) == diag(H_theta box) bit for bit."""
    spec = spec or PotentialSpec(2.0, SamplingFunction.cosine())

    def run():
        bad = 0
        for s in range(seeds):
            omega = sample_bernoulli(s, spec.base)
            whole = restrict(build_wholeline_box(spec, omega, N))
            half = build_halfline_box(spec, restrict_to_halfline(omega), N)
            if not np.array_equal(whole.diagonal, half.diagonal):
                bad += 1
        return seeds, bad, f"N={N}"
    return _timed("restriction H_omega^+ = H_theta", run)


def check_cocycle(count: int = 100, seed: int = 0, rtol: float = 1e-9) -> CheckResult:
    """M(n+m, theta) = M(n, T^m theta) M(m, theta) on random (n, m, E, omega, f)."""
    rng = np.random.default_rng(seed)
    specs = [PotentialSpec(2.0, SamplingFunction.cosine()),
             PotentialSpec(3.0, SamplingFunction.step(0.3)),
             PotentialSpec(1.0, SamplingFunction.table([0.3, -1.0, 2.0]))]

    def run():
        bad = 0
        for i in range(count):
            spec = specs[i % len(specs)]
            n = int(rng.integers(1, 1000))
            m = int(rng.integers(1, 1001 - n))
            lo, hi = spec.enclosure()
            E = float(rng.uniform(lo, hi))
            omega = DigitSequence.seeded(int(rng.integers(2**31)), spec.base)
            if not cocycle_property_check(spec, omega, E, n, m, rtol=rtol):
                bad += 1
        return count, bad, f"rtol={rtol:g}"
    return _timed("cocycle identity", run)


def check_determinant(n: int = 10_000, rtol: float = 1e-6) -> CheckResult:
    """det(current) exp(2 log_scale) == 1 where the product stays bounded.

    For products of norm ~ e**(gamma n) the rescaled determinant is lost to
    cancellation in ad - bc, so cases are free energies inside [-2, 2] and
    band centres of a period-2 potential.
    """
    free = PotentialSpec(1.0, SamplingFunction.constant(0.0))
    alt = PotentialSpec(1.0, SamplingFunction.table([1.0, -1.0]))
    third = encode(Fraction(1, 3))
    cases = [(free, DigitSequence.seeded(0), E) for E in (-1.9, -1.0, 0.0, 0.5, 1.3, 1.99)]
    cases += [(alt, third, E) for E in (-1.618, 1.618, 1.2, -2.1)]

    def run():
        bad = 0
        worst = 0.0
        for spec, omega, E in cases:
            err = abs(propagate(spec, omega, E, n).reconstructed_det() - 1.0)
            worst = max(worst, err)
            bad += err > rtol
        return len(cases), bad, f"max|det-1|={worst:.2e}"
    return _timed("determinant reconstruction", run)


def check_shift_composition(count: int = 200, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)

    def run():
        bad = 0
        for i in range(count):
            if i % 2:
                omega = DigitSequence.seeded(int(rng.integers(2**31)), 3)
            else:
                omega = encode(Fraction(int(rng.integers(0, 997)), 997))
            a, b = (int(x) for x in rng.integers(0, 500, size=2))
            lhs = omega.shift(a).shift(b).digits(1, 100)
            rhs = omega.digits(1 + a + b, 100 + a + b)
            bad += not np.array_equal(lhs, rhs)
        return count, bad, ""
    return _timed("shift composition", run)


def run_all(quick: bool = False) -> list[CheckResult]:
    scale = 10 if quick else 1
    return [
        check_conjugacy(1000 // scale),
        check_roundtrip(1000 // scale),
        check_shift_composition(200 // scale),
        check_restriction(100 // scale, 10_000 // scale),
        check_cocycle(100 // scale),
        check_determinant(10_000 // scale),
    ]
