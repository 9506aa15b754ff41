"""Base-m digit streams for points of the circle and the m-fold map.

Points theta in [0, 1) are carried as digit sequences omega with
theta = sum_n omega_n m**-n.  Applying the map theta -> m*theta mod 1 is then
a digit shift, which is exact; iterating it in floating point is not (one
mantissa bit is lost per step for m = 2), so the float map lives in
:func:`doubling_map_float` only for demonstration.

Two realizations are supported:

* ``periodic`` -- an explicit finite prefix followed by a repeating period.
  Rationals encode to this form.
* ``seeded`` -- a Philox counter-based stream keyed by ``(seed, spawn)``.
  Digit ``n`` is a pure function of the key and ``n``, so any window can be
  read in any order from any thread.
"""
from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

MAX_ENCODE_LENGTH = 2**16
_BELOW_ONE = float(np.nextafter(1.0, 0.0))


class EncodingError(ValueError):
    pass


def float_depth(base: int) -> int:
    """Smallest k with base**k >= 2**64: digits used for float evaluation."""
    k, power = 0, 1
    while power < 2**64:
        power *= base
        k += 1
    return k


def _check_base(base: int) -> None:
    if not isinstance(base, (int, np.integer)) or base < 2:
        raise ValueError(f"base must be an integer >= 2, got {base!r}")


def _check_digits(digits: Iterable[int], base: int) -> tuple[int, ...]:
    out = tuple(int(d) for d in digits)
    if out and (min(out) < 0 or max(out) >= base):
        bad = [d for d in out if not 0 <= d < base]
        raise ValueError(f"digits {bad[:5]} out of range for base {base}")
    return out


# -- counter-based digit source -------------------------------------------

def zigzag(n):
    """Bijection Z -> N: 0, 1, -1, 2, -2, ... -> 0, 1, 2, 3, 4, ..."""
    n = np.asarray(n, dtype=np.int64)
    return np.where(n > 0, 2 * n - 1, -2 * n).astype(np.uint64)


@functools.lru_cache(maxsize=4096)
def _philox_key(seed: int, spawn: tuple[int, ...]) -> np.ndarray:
    key = np.random.SeedSequence(entropy=seed, spawn_key=spawn).generate_state(2, np.uint64)
    key.setflags(write=False)
    return key


def _stream_words(seed: int, spawn: tuple[int, ...], index: np.ndarray) -> np.ndarray:
    """One 64-bit word per signed stream index (lane 0 of the Philox block)."""
    if index.size == 0:
        return np.zeros(0, dtype=np.uint64)
    counters = zigzag(index)
    lo = int(counters.min())
    hi = int(counters.max())
    gen = np.random.Philox(key=_philox_key(seed, spawn), counter=[lo, 0, 0, 0])
    raw = gen.random_raw(4 * (hi - lo + 1))
    return raw[4 * (counters - np.uint64(lo)).astype(np.int64)]


def _words_to_digits(words: np.ndarray, base: int) -> np.ndarray:
    # floor(word * base / 2**64), exact via a 32-bit split; unbiased for 2**k
    hi = words >> np.uint64(32)
    lo = words & np.uint64(0xFFFFFFFF)
    m = np.uint64(base)
    carry = (lo * m) >> np.uint64(32)
    return ((hi * m + carry) >> np.uint64(32)).astype(np.int64)


# -- sequences ---------------------------------------------------------------

@dataclass(frozen=True)
class DigitSequence:
    """One-sided digit stream omega_1, omega_2, ...

    Use :meth:`periodic` or :meth:`seeded` rather than the raw constructor.
    For the seeded kind ``digit(n)`` reads stream index ``n + offset``;
    ``overrides`` patches individual stream indices.
    """

    base: int
    kind: str
    prefix: tuple[int, ...] = ()
    period: tuple[int, ...] = ()
    seed: int | None = None
    spawn: tuple[int, ...] = ()
    offset: int = 0
    overrides: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        _check_base(self.base)
        if self.kind == "periodic":
            if len(self.period) < 1:
                raise ValueError("periodic sequence needs a period of length >= 1")
            _check_digits(self.prefix + self.period, self.base)
            if self.seed is not None or self.overrides:
                raise ValueError("periodic sequence takes no seed or overrides")
        elif self.kind == "seeded":
            if self.seed is None or self.seed < 0:
                raise ValueError("seeded sequence needs a non-negative integer seed")
            _check_digits((d for _, d in self.overrides), self.base)
        else:
            raise ValueError(f"unknown digit sequence kind {self.kind!r}")

    @classmethod
    def periodic(cls, prefix: Sequence[int], period: Sequence[int], base: int = 2) -> "DigitSequence":
        return cls(base=base, kind="periodic", prefix=tuple(int(d) for d in prefix),
                   period=tuple(int(d) for d in period))

    @classmethod
    def seeded(cls, seed: int, base: int = 2, spawn: Sequence[int] = ()) -> "DigitSequence":
        return cls(base=base, kind="seeded", seed=int(seed), spawn=tuple(int(s) for s in spawn))

    @property
    def is_periodic(self) -> bool:
        return self.kind == "periodic"

    def digit(self, n: int) -> int:
        if n < 1:
            raise IndexError(f"one-sided sequence has no digit {n}")
        return int(self.digits(n, n + 1)[0])

    def digits(self, start: int, stop: int) -> np.ndarray:
        """Digits at indices start, ..., stop - 1 (all >= 1) as an int64 array."""
        if start < 1:
            raise IndexError(f"one-sided sequence has no digit {start}")
        idx = np.arange(start, max(start, stop), dtype=np.int64)
        if self.kind == "periodic":
            L, p = len(self.prefix), len(self.period)
            table = np.asarray(self.prefix + self.period, dtype=np.int64)
            pos = np.where(idx <= L, idx - 1, L + (idx - L - 1) % p)
            return table[pos]
        return _seeded_digits(self, idx)

    def shift(self, steps: int = 1) -> "DigitSequence":
        if steps < 0:
            raise ValueError("shift steps must be >= 0")
        if steps == 0:
            return self
        if self.kind == "seeded":
            return _replace(self, offset=self.offset + steps)
        L, p = len(self.prefix), len(self.period)
        if steps <= L:
            return DigitSequence.periodic(self.prefix[steps:], self.period, self.base)
        return _rotated(self.period, self.base, (steps - L) % p)

    def exact_ratio(self) -> tuple[int, int]:
        """(num, den) with D(omega) = num / den, den = m**L (m**p - 1); not reduced."""
        if self.kind != "periodic":
            raise ValueError("exact value is only defined for periodic sequences")
        return _exact_ratio(self.prefix, self.period, self.base)

    def exact_value(self) -> Fraction:
        """D(omega) as an exact rational; periodic kind only."""
        return Fraction(*self.exact_ratio())

    def to_record(self) -> dict:
        if self.kind == "periodic":
            payload = {"prefix": list(self.prefix), "period": list(self.period)}
        else:
            payload = {"seed": self.seed, "spawn": list(self.spawn), "offset": self.offset,
                       "overrides": [list(o) for o in self.overrides]}
        return {"base": self.base, "kind": self.kind, "payload": payload}

    @classmethod
    def from_record(cls, rec: dict) -> "DigitSequence":
        return cls(**_fields_from_record(rec))


@functools.lru_cache(maxsize=1024)
def _rotated(period: tuple[int, ...], base: int, k: int) -> DigitSequence:
    return DigitSequence.periodic((), period[k:] + period[:k], base)


@functools.lru_cache(maxsize=1024)
def _exact_ratio(prefix: tuple[int, ...], period: tuple[int, ...], base: int) -> tuple[int, int]:
    m, L, p = base, len(prefix), len(period)
    head = _digits_to_int(prefix, m)
    tail = _digits_to_int(period, m)
    return head * (m**p - 1) + tail, m**L * (m**p - 1)


@dataclass(frozen=True)
class TwoSidedDigitSequence:
    """Two-sided digit stream omega_n, n in Z.

    Periodic kind: ``digit(n) = period[(n - 1 + offset) mod p]`` so that the
    half-line restriction starts at ``period[0]``.
    """

    base: int
    kind: str
    period: tuple[int, ...] = ()
    seed: int | None = None
    spawn: tuple[int, ...] = ()
    offset: int = 0
    overrides: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        _check_base(self.base)
        if self.kind == "periodic":
            if len(self.period) < 1:
                raise ValueError("periodic sequence needs a period of length >= 1")
            _check_digits(self.period, self.base)
        elif self.kind == "seeded":
            if self.seed is None or self.seed < 0:
                raise ValueError("seeded sequence needs a non-negative integer seed")
        else:
            raise ValueError(f"unknown digit sequence kind {self.kind!r}")
        _check_digits((d for _, d in self.overrides), self.base)

    @classmethod
    def periodic(cls, period: Sequence[int], base: int = 2) -> "TwoSidedDigitSequence":
        return cls(base=base, kind="periodic", period=tuple(int(d) for d in period))

    def digit(self, n: int) -> int:
        return int(self.digits(n, n + 1)[0])

    def digits(self, start: int, stop: int) -> np.ndarray:
        idx = np.arange(start, max(start, stop), dtype=np.int64)
        if self.kind == "periodic":
            out = np.asarray(self.period, dtype=np.int64)[(idx - 1 + self.offset) % len(self.period)]
            return _apply_overrides(out, idx + self.offset, self.overrides)
        return _seeded_digits(self, idx)

    def shift(self, steps: int = 1) -> "TwoSidedDigitSequence":
        # invertible on Z, so negative steps are allowed
        return _replace(self, offset=self.offset + steps)

    def with_digits(self, patch: dict[int, int]) -> "TwoSidedDigitSequence":
        """Copy with digit(n) replaced by patch[n] for the given n."""
        merged = dict(self.overrides)
        merged.update({int(n) + self.offset: int(d) for n, d in patch.items()})
        return _replace(self, overrides=tuple(sorted(merged.items())))

    def to_record(self) -> dict:
        payload = {"offset": self.offset, "overrides": [list(o) for o in self.overrides]}
        if self.kind == "periodic":
            payload["period"] = list(self.period)
        else:
            payload.update(seed=self.seed, spawn=list(self.spawn))
        return {"base": self.base, "kind": self.kind, "two_sided": True, "payload": payload}

    @classmethod
    def from_record(cls, rec: dict) -> "TwoSidedDigitSequence":
        return cls(**_fields_from_record(rec))


def _replace(seq, **changes):
    return dataclasses.replace(seq, **changes)


def _fields_from_record(rec: dict) -> dict:
    payload = dict(rec["payload"])
    out = {"base": int(rec["base"]), "kind": rec["kind"]}
    for key in ("prefix", "period", "spawn"):
        if key in payload:
            out[key] = tuple(int(d) for d in payload[key])
    for key in ("seed", "offset"):
        if key in payload:
            out[key] = int(payload[key])
    if "overrides" in payload:
        out["overrides"] = tuple((int(i), int(d)) for i, d in payload["overrides"])
    return out


def _apply_overrides(out: np.ndarray, stream_idx: np.ndarray, overrides) -> np.ndarray:
    if overrides:
        out = out.copy()
        for i, d in overrides:
            out[stream_idx == i] = d
    return out


def _seeded_digits(seq, idx: np.ndarray) -> np.ndarray:
    stream_idx = idx + seq.offset
    words = _stream_words(seq.seed, seq.spawn, stream_idx)
    return _apply_overrides(_words_to_digits(words, seq.base), stream_idx, seq.overrides)


def _digits_to_int(digits: Sequence[int], base: int) -> int:
    # split recursively so long expansions stay subquadratic
    if len(digits) <= 64:
        value = 0
        for d in digits:
            value = value * base + int(d)
        return value
    half = len(digits) // 2
    return _digits_to_int(digits[:half], base) * base ** (len(digits) - half) + _digits_to_int(digits[half:], base)


# -- circle points -------------------------------------------------------------

@dataclass(frozen=True)
class CirclePoint:
    """A point of R/Z.

    ``exact`` is set for rational points; m-adic truncations also carry
    ``numerator`` and ``depth`` with value = numerator * base**-depth.
    """

    value: float
    exact: Fraction | None = None
    base: int | None = None
    numerator: int | None = None
    depth: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.value < 1.0:
            raise ValueError(f"circle point {self.value!r} outside [0, 1)")
        if self.exact is not None and not 0 <= self.exact < 1:
            raise ValueError(f"circle point {self.exact} outside [0, 1)")
        if self.numerator is not None and not 0 <= self.numerator < self.base**self.depth:
            raise ValueError("m-adic numerator out of range")

    @classmethod
    def from_fraction(cls, x: Fraction) -> "CirclePoint":
        x = Fraction(x)
        return cls(value=min(float(x), _BELOW_ONE), exact=x)


def _as_fraction(value) -> Fraction:
    if isinstance(value, tuple):
        return Fraction(int(value[0]), int(value[1]))
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(value)


def encode(value, base: int = 2, depth: int = MAX_ENCODE_LENGTH) -> DigitSequence:
    """Eventually periodic digit sequence of a rational in [0, 1).

    Long division with remainder-cycle detection; terminating expansions
    come out as ``prefix + (0,)``, never with a tail of (base - 1)'s.
    ``depth`` caps prefix + period length.
    """
    _check_base(base)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x = _as_fraction(value)
    if not 0 <= x < 1:
        raise EncodingError(f"{x} is outside [0, 1)")
    p, q = x.numerator, x.denominator
    seen: dict[int, int] = {}
    digits: list[int] = []
    r = p
    while r not in seen:
        if len(digits) >= depth:
            raise EncodingError(f"expansion of {x} in base {base} exceeds {depth} digits")
        seen[r] = len(digits)
        if r == 0:
            break
        d, r = divmod(r * base, q)
        digits.append(d)
    if r == 0:
        return DigitSequence.periodic(digits, (0,), base)
    start = seen[r]
    return DigitSequence.periodic(digits[:start], digits[start:], base)


def evaluate_D(omega: DigitSequence, depth: int | None = None, exact: bool = False) -> CirclePoint:
    """Truncated symbolic coding sum_{n<=depth} omega_n m**-n.

    Float evaluation (default depth :func:`float_depth`) uses the same
    Horner recursion as :func:`orbit_points`, so both agree bit for bit.
    With ``exact=True`` the m-adic truncation is returned as an integer
    numerator; with ``exact=True, depth=None`` a periodic sequence returns
    its full rational value.
    """
    m = omega.base
    if exact and depth is None:
        x = omega.exact_value()
        return CirclePoint(value=min(float(x), _BELOW_ONE), exact=x, base=m)
    depth = float_depth(m) if depth is None else depth
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if exact:
        num = _digits_to_int(omega.digits(1, depth + 1).tolist(), m)
        x = Fraction(num, m**depth)
        return CirclePoint(value=min(float(x), _BELOW_ONE), exact=x, base=m,
                           numerator=num, depth=depth)
    return CirclePoint(value=float(orbit_points(omega, 0, 1, depth)[0]), base=m)


def orbit_points(omega, start: int, count: int, depth: int | None = None) -> np.ndarray:
    """Float values D(S^k omega) for k = start, ..., start + count - 1.

    Reads digits start + 1 through start + count - 1 + depth.  Works for one-
    and two-sided sequences (the latter with negative ``start``).
    """
    m = omega.base
    depth = float_depth(m) if depth is None else depth
    digs = omega.digits(start + 1, start + count + depth).astype(np.float64)
    x = np.zeros(count)
    for j in range(depth, 0, -1):
        x = (x + digs[j - 1:j - 1 + count]) / m
    return np.minimum(x, _BELOW_ONE)


def shift(omega, steps: int = 1):
    return omega.shift(steps)


def doubling_map_float(theta, base: int = 2):
    """m*theta mod 1 in floating point; exact for CirclePoints with ``exact`` set.

    Demonstration only -- estimators read orbits from digit shifts.
    """
    if isinstance(theta, CirclePoint):
        if theta.exact is not None:
            return CirclePoint.from_fraction((base * theta.exact) % 1)
        return CirclePoint(value=(base * theta.value) % 1.0)
    if isinstance(theta, Fraction):
        return (base * theta) % 1
    return (base * float(theta)) % 1.0


def float_orbit(theta0: float, steps: int, base: int = 2) -> np.ndarray:
    out = np.empty(steps + 1)
    out[0] = x = float(theta0)
    for k in range(1, steps + 1):
        x = doubling_map_float(x, base)
        out[k] = x
    return out


def exact_orbit_point(x: Fraction, steps: int, base: int = 2) -> Fraction:
    """T^steps(x) for rational x by modular exponentiation."""
    x = Fraction(x)
    return Fraction(pow(base, steps, x.denominator) * x.numerator % x.denominator, x.denominator)


def sample_bernoulli(seed: int, base: int = 2, spawn: Sequence[int] = ()) -> TwoSidedDigitSequence:
    """Two-sided i.i.d. uniform digits keyed by (seed, spawn)."""
    return TwoSidedDigitSequence(base=base, kind="seeded", seed=int(seed),
                                 spawn=tuple(int(s) for s in spawn))


def restrict_to_halfline(omega: TwoSidedDigitSequence) -> DigitSequence:
    if omega.kind == "seeded":
        return DigitSequence(base=omega.base, kind="seeded", seed=omega.seed, spawn=omega.spawn,
                             offset=omega.offset,
                             overrides=tuple(o for o in omega.overrides if o[0] - omega.offset >= 1))
    p = len(omega.period)
    k = omega.offset % p
    period = omega.period[k:] + omega.period[:k]
    patched = [i - omega.offset for i, _ in omega.overrides if i - omega.offset >= 1]
    if not patched:
        return DigitSequence.periodic((), period, omega.base)
    L = -(-max(patched) // p) * p
    return DigitSequence.periodic(omega.digits(1, L + 1).tolist(), period, omega.base)


def conjugacy_holds(prefix: Sequence[int], base: int = 2) -> bool:
    """Integer form of D o S = T o D on a depth-k truncation, k = len(prefix) >= 2.

    T(D_k(omega)) = (m N_k mod m^k) / m^k must equal D_{k-1}(S omega) =
    N'_{k-1} / m^(k-1), i.e. m N_k mod m^k == m N'_{k-1}.
    """
    digits = _check_digits(prefix, base)
    k = len(digits)
    if k < 2:
        raise ValueError("conjugacy check needs a prefix of length >= 2")
    n_k = _digits_to_int(digits, base)
    n_shift = _digits_to_int(digits[1:], base)
    return (base * n_k) % base**k == base * n_shift
