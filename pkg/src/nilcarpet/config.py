"""Run configuration: one JSON file, validated on load."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

from .algebra import Algebra
from .carnot import chart_dim
from .carpet import CarpetSpec

DEFAULT_TOLERANCES = {
    "carnot": 1e-12,
    "involution": 1e-10,
    "sphere": 1e-10,
    "delta1": 1e-12,
    "t1": 1e-14,
    "psi_inverse": 1e-14,
    "equivariance": 1e-9,
    "sigma": 3.0,
    "box_dim": 0.05,
}

DEFAULT_SAMPLES = {
    "isometry": 10_000,
    "measure": 100_000,
    "coverage": 100_000,
    "per_cell": 1000,
    "equivariance": 1000,
    "klein": 1000,
    "words": 50,
    "orbit_pairs": 200,
}

KNOWN_KEYS = {"algebra", "n", "k_seq", "depth", "pack_depth", "t_values", "seed", "excluded", "tolerances", "samples"}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Config:
    algebra: str = "R"
    n: int = 3
    k_seq: tuple = (3, 9, 27)
    depth: int = 3
    pack_depth: int = 1
    t_values: tuple = (0.5, 1.0, 2.0)
    seed: int = 0
    excluded: tuple = ()
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    samples: dict = field(default_factory=lambda: dict(DEFAULT_SAMPLES))

    @property
    def algebra_enum(self) -> Algebra:
        return Algebra.parse(self.algebra)

    @property
    def dim(self) -> int:
        return chart_dim(self.algebra, self.n)

    def carpet(self) -> CarpetSpec:
        return CarpetSpec(self.dim, self.k_seq, self.depth)

    def tol(self, name: str) -> float:
        return float(self.tolerances[name])

    def sample_count(self, name: str) -> int:
        return int(self.samples[name])

    def canonical(self) -> dict:
        d = asdict(self)
        d["k_seq"] = list(self.k_seq)
        d["t_values"] = list(self.t_values)
        d["excluded"] = list(self.excluded)
        return d

    def to_json(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def with_(self, **changes) -> "Config":
        d = self.canonical()
        d.update(changes)
        return from_dict(d)


def _int(d: dict, key: str, lo: int) -> int:
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(key, f"expected an integer, got {v!r}")
    if v < lo:
        raise ConfigError(key, f"must be >= {lo}, got {v}")
    return v


def from_dict(raw: dict) -> Config:
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be an object")
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    base = Config()
    d = {**base.canonical(), **raw}
    try:
        algebra = Algebra.parse(d["algebra"]).name
    except ValueError:
        raise ConfigError("algebra", f"expected one of R, C, H, got {d['algebra']!r}") from None
    n = _int(d, "n", 2)
    depth = _int(d, "depth", 1)
    pack_depth = _int(d, "pack_depth", 0)
    seed = _int(d, "seed", 0)

    ks = raw.get("k_seq", {"base": 3})
    if isinstance(ks, dict):
        if set(ks) != {"base"}:
            raise ConfigError("k_seq", "rule form must be {\"base\": b}")
        b = ks["base"]
        if isinstance(b, bool) or not isinstance(b, int) or b < 3 or b % 2 == 0:
            raise ConfigError("k_seq", f"base must be an odd integer >= 3, got {b!r}")
        ks = [b ** j for j in range(1, depth + 1)]
    if not isinstance(ks, list) or not ks:
        raise ConfigError("k_seq", "expected a nonempty list of odd integers or {\"base\": b}")
    for k in ks:
        if isinstance(k, bool) or not isinstance(k, int):
            raise ConfigError("k_seq", f"entries must be integers, got {k!r}")
        if k < 3 or k % 2 == 0:
            raise ConfigError("k_seq", f"entries must be odd integers >= 3, got {k}")
    if len(ks) < depth:
        raise ConfigError("k_seq", f"has {len(ks)} entries but depth is {depth}")
    try:
        CarpetSpec(chart_dim(algebra, n), tuple(ks), depth)
    except ValueError as e:
        raise ConfigError("k_seq", str(e)) from None

    tv = d["t_values"]
    if not isinstance(tv, list) or not tv:
        raise ConfigError("t_values", "expected a nonempty list of positive numbers")
    for t in tv:
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not (t > 0 and math.isfinite(t)):
            raise ConfigError("t_values", f"entries must be positive numbers, got {t!r}")

    ex = d["excluded"]
    if not isinstance(ex, list) or any(isinstance(i, bool) or not isinstance(i, int) or i < 0 for i in ex):
        raise ConfigError("excluded", "expected a list of nonnegative ball indices")

    tols = dict(DEFAULT_TOLERANCES)
    for key, val in (raw.get("tolerances") or {}).items():
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerances.{key}", "unknown tolerance")
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not val > 0:
            raise ConfigError(f"tolerances.{key}", f"must be a positive number, got {val!r}")
        tols[key] = float(val)
    samples = dict(DEFAULT_SAMPLES)
    for key, val in (raw.get("samples") or {}).items():
        if key not in DEFAULT_SAMPLES:
            raise ConfigError(f"samples.{key}", "unknown sample count")
        if isinstance(val, bool) or not isinstance(val, int) or val < 1:
            raise ConfigError(f"samples.{key}", f"must be a positive integer, got {val!r}")
        samples[key] = val
    if samples["measure"] < 1000 or samples["coverage"] < 1000:
        raise ConfigError("samples", "Monte Carlo sample counts must be >= 1000")

    return Config(algebra, n, tuple(ks[:depth]), depth, pack_depth, tuple(float(t) for t in tv), seed,
                  tuple(sorted(set(ex))), tols, samples)


def load(path) -> Config:
    """Read and validate; ``OSError`` propagates, malformed JSON becomes ``ConfigError``."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"not valid JSON ({e.msg} at line {e.lineno})") from None
    return from_dict(raw)
