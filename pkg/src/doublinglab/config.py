"""Experiment configuration: flag/JSON parsing, validation, provenance headers."""
from __future__ import annotations

import dataclasses
import json
import math
import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .cocycle import EnergyGrid
from .potential import PotentialSpec, SamplingFunction
from .symbolic import DigitSequence, encode

COMMANDS = ("lyapunov", "bands", "spectrum", "localize", "verify", "float-demo")
FORMATS = ("csv", "json")
PROVENANCE_PREFIX = "# config: "


class ConfigError(ValueError):
    """A config field is missing, malformed, or out of range."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    coupling: float = 1.0
    f: dict = field(default_factory=lambda: {"kind": "cosine", "params": {}})
    base: int = 2
    theta: str | dict = "seed"
    seed: int = 0
    n: int = 100_000
    samples: int = 16
    grid: str | None = None
    N: int = 1000
    alpha: tuple[float, ...] = (0.0,)
    demo_steps: int = 70
    workers: int | None = None
    out: str | None = None
    format: str = "csv"

    # JSON key -> field name where they differ
    ALIASES = {"lambda": "coupling"}

    def validate(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")
        if self.format not in FORMATS:
            raise ConfigError("format", "must be csv or json")
        for name in ("n", "samples", "N", "demo_steps", "base", "seed"):
            if not isinstance(getattr(self, name), int) or isinstance(getattr(self, name), bool):
                raise ConfigError(name, "must be an integer")
        if self.n < 1:
            raise ConfigError("n", "must be >= 1")
        if self.samples < 2 and self.command == "lyapunov":
            raise ConfigError("samples", "must be >= 2")
        if self.samples < 1:
            raise ConfigError("samples", "must be >= 1")
        if self.N < 1:
            raise ConfigError("N", "must be >= 1")
        if self.command == "localize" and self.N < 16:
            raise ConfigError("N", "decay fits need N >= 16")
        if self.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        for a in self.alpha:
            if not 0.0 <= a < math.pi or math.isclose(a, math.pi / 2, abs_tol=1e-12):
                raise ConfigError("alpha", "each value must lie in [0, pi) and differ from pi/2")
        try:
            self.potential()
        except (ValueError, OSError) as exc:
            raise ConfigError("lambda/f/base", str(exc)) from exc
        try:
            seq = self.sequence()
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError("theta", str(exc)) from exc
        if self.command == "lyapunov" and seq is not None:
            raise ConfigError("theta", "lyapunov averages over the Bernoulli ensemble; use --theta seed")
        if self.command == "bands" and (seq is None or not seq.is_periodic):
            raise ConfigError("theta", "bands need a periodic theta (rational p/q or digits)")
        if self.grid is not None:
            try:
                EnergyGrid.parse(self.grid)
            except ValueError as exc:
                raise ConfigError("grid", f"expected lo:hi:count ({exc})") from exc
        return self

    # -- derived objects --------------------------------------------------

    def potential(self) -> PotentialSpec:
        return PotentialSpec(float(self.coupling), SamplingFunction.from_record(self.f), self.base)

    def sequence(self) -> DigitSequence | None:
        """The fixed half-line sequence, or None for the seeded Bernoulli ensemble."""
        return parse_theta(self.theta, self.base)

    def energy_grid(self) -> EnergyGrid:
        if self.grid is not None:
            return EnergyGrid.parse(self.grid)
        lo, hi = self.potential().enclosure()
        return EnergyGrid(lo, hi, 101)

    def worker_count(self) -> int:
        return self.workers or os.cpu_count() or 1

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("coupling")
        d["alpha"] = list(self.alpha)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = cls.ALIASES.get(key, key)
            if name not in names:
                raise ConfigError(key, "unknown config key")
            kwargs[name] = value
        if "command" not in kwargs:
            raise ConfigError("command", "missing")
        if "alpha" in kwargs:
            kwargs["alpha"] = _as_alpha(kwargs["alpha"])
        if "f" in kwargs and isinstance(kwargs["f"], str):
            kwargs["f"] = parse_f(kwargs["f"])
        if "coupling" in kwargs:
            kwargs["coupling"] = float(kwargs["coupling"])
        return cls(**kwargs).validate()

    def provenance(self) -> str:
        return PROVENANCE_PREFIX + json.dumps(self.to_dict(), sort_keys=True)


def _as_alpha(value) -> tuple[float, ...]:
    if isinstance(value, str):
        return tuple(float(a) for a in value.split(","))
    if isinstance(value, (int, float)):
        return (float(value),)
    return tuple(float(a) for a in value)


def parse_f(text: str) -> dict:
    """cosine | step:c | table:path | const:v  ->  {kind, params} record."""
    kind, _, arg = text.partition(":")
    if kind == "cosine" and not arg:
        return {"kind": "cosine", "params": {}}
    if kind == "step" and arg:
        return {"kind": "step", "params": {"c": float(arg)}}
    if kind == "table" and arg:
        return {"kind": "table", "params": {"path": arg}}
    if kind == "const" and arg:
        return {"kind": "table", "params": {"values": [float(arg)], "allow_constant": True}}
    raise ConfigError("f", f"cannot parse {text!r}; expected cosine, step:c, table:path or const:v")


_DIGITS_RE = re.compile(r"^digits:([0-9a-z,]*)\(([0-9a-z,]+)\)$")


def _digit_list(text: str, base: int) -> list[int]:
    items = text.split(",") if "," in text else list(text)
    return [int(c, 36) for c in items if c != ""]


def parse_theta(theta, base: int) -> DigitSequence | None:
    """``seed`` -> None; ``p/q`` -> encode(p/q); ``digits:PREFIX(PERIOD)``; or a record dict."""
    if isinstance(theta, dict):
        return DigitSequence.from_record(theta)
    if theta == "seed":
        return None
    m = _DIGITS_RE.match(theta)
    if m:
        return DigitSequence.periodic(_digit_list(m.group(1), base), _digit_list(m.group(2), base), base)
    if re.fullmatch(r"\d+/\d+|0", theta):
        return encode(Fraction(theta), base)
    raise ValueError(f"cannot parse theta {theta!r}; expected seed, p/q or digits:PREFIX(PERIOD)")


def read_provenance(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        for line in fh:
            if line.startswith(PROVENANCE_PREFIX):
                return ExperimentConfig.from_dict(json.loads(line[len(PROVENANCE_PREFIX):]))
            if not line.startswith("#"):
                break
    raise ValueError(f"{path}: no provenance header")
