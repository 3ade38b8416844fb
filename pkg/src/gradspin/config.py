"""Experiment configuration: one flat JSON document plus ``key=value`` overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

from .measures import parse_profile
from .models import ModelKind, ModelSpec
from .testfunctions import get_test_function


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class ExperimentConfig:
    seed: int | None = None
    model: str = "dKMP"
    spin: float = 0.5
    N: int = 64
    N_list: list[int] = field(default_factory=list)
    rho: float | None = None
    profile: str | None = "sine:2,1"
    rho_hat: float | None = None
    times: list[float] = field(default_factory=lambda: [0.01])
    replicas: int = 1
    bins: int = 32
    test_functions: list[str] = field(default_factory=lambda: ["one", "cos1", "sin1"])
    martingale: list[str] = field(default_factory=list)
    snapshots: bool = False
    threads: int | None = None
    out_dir: str = "out"
    # attract
    n_max: int = 40
    l_max: int = 80
    micro_T: float = 1000.0  # gKMP coupling horizon
    # verify
    verify_n_max: int = 200
    corrupt_diffusion: bool = False
    # moments
    draws: int = 100_000

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(ModelKind.parse(self.model), self.spin)

    @property
    def sizes(self) -> list[int]:
        return list(self.N_list) if self.N_list else [self.N]

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def content_hash(self) -> str:
        """Git-style blob hash (sha1 of ``blob <len>\\0`` + body) of the canonical JSON."""
        body = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        profile = self.profile or ""
        if profile.startswith("table:"):
            with open(profile[len("table:"):].strip(), "rb") as fh:
                body += b"\n" + fh.read()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, raw: Any) -> Any:
    """Coerce a JSON value or an override string to the field's type."""
    typ = str(_FIELDS[name].type)
    if isinstance(raw, str):
        text = raw.strip()
        if typ.startswith("list"):
            raw = [p for p in text.strip("[]").split(",") if p.strip()]
        elif "None" in typ and text.lower() in ("none", "null"):
            return None
        else:
            raw = text
    try:
        if typ.startswith("list[int]"):
            return [int(v) for v in raw]
        if typ.startswith("list[float]"):
            return [float(v) for v in raw]
        if typ.startswith("list[str]"):
            return [str(v).strip() for v in raw]
        if raw is None:
            return None
        if typ.startswith("bool"):
            if isinstance(raw, bool):
                return raw
            if str(raw).lower() in ("1", "true", "yes", "on"):
                return True
            if str(raw).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ.startswith("int"):
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"cannot interpret {raw!r} as {typ}") from exc


def build_config(document: dict[str, Any] | None = None, overrides: list[str] | None = None) -> ExperimentConfig:
    values: dict[str, Any] = {}
    for key, raw in (document or {}).items():
        if key not in _FIELDS:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _coerce(key, raw)
    for item in overrides or []:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(key or item, "override must look like key=value")
        if key not in _FIELDS:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _coerce(key, raw)
    return ExperimentConfig(**values)


def validate(config: ExperimentConfig, command: str = "simulate") -> ExperimentConfig:
    """Check ranges before any run; raises ConfigError naming the field."""
    if config.seed is None:
        raise ConfigError("seed", "a seed is mandatory")
    if config.seed < 0:
        raise ConfigError("seed", "must be >= 0")
    try:
        kind = ModelKind.parse(config.model)
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from exc
    if not (config.spin > 0 and math.isfinite(config.spin)):
        raise ConfigError("spin", f"must be positive, got {config.spin}")
    if kind is ModelKind.DKMP and config.spin != 0.5:
        raise ConfigError("spin", "dKMP only supports spin 0.5")
    if command == "attract":
        if config.n_max < 1:
            raise ConfigError("n_max", "must be >= 1")
        if config.l_max < 1:
            raise ConfigError("l_max", "must be >= 1")
        if not (config.micro_T >= 0 and math.isfinite(config.micro_T)):
            raise ConfigError("micro_T", "must be finite and >= 0")
        if config.N < 2:
            raise ConfigError("N", f"need at least 2 sites, got {config.N}")
        if config.replicas < 1:
            raise ConfigError("replicas", "must be >= 1")
        return config
    if command == "verify":
        if config.verify_n_max < 1:
            raise ConfigError("verify_n_max", "must be >= 1")
        return config
    if command == "moments":
        if config.draws < 2:
            raise ConfigError("draws", "must be >= 2")
        if config.rho is not None and not config.rho > 0:
            raise ConfigError("rho", "must be positive")
        return config
    for n in config.sizes:
        if n < 2:
            raise ConfigError("N_list" if config.N_list else "N", f"need at least 2 sites, got {n}")
    if config.replicas < 1:
        raise ConfigError("replicas", "must be >= 1")
    if not config.times or any(not (t >= 0 and math.isfinite(t)) for t in config.times):
        raise ConfigError("times", "need a non-empty list of finite times >= 0")
    if list(config.times) != sorted(config.times):
        raise ConfigError("times", "must be non-decreasing")
    if config.rho is None and not config.profile:
        raise ConfigError("profile", "need either a profile preset or rho")
    if config.rho is not None and not config.rho > 0:
        raise ConfigError("rho", "must be positive")
    if config.profile and config.rho is None:
        try:
            parse_profile(config.profile)
        except ValueError as exc:
            raise ConfigError("profile", str(exc)) from exc
    if config.rho_hat is not None and not config.rho_hat > 0:
        raise ConfigError("rho_hat", "must be positive")
    for gid in list(config.test_functions) + list(config.martingale):
        try:
            get_test_function(gid)
        except ValueError as exc:
            raise ConfigError("test_functions", str(exc)) from exc
    if config.bins < 1:
        raise ConfigError("bins", "must be >= 1")
    if command == "hydro":
        for n in config.sizes:
            if n % config.bins:
                raise ConfigError("bins", f"bin count {config.bins} does not divide N={n}")
    if config.threads is not None and config.threads < 1:
        raise ConfigError("threads", "must be >= 1")
    return config
