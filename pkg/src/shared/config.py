from __future__ import annotations

import logging
import os
import re
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.fusion.scenarios import FusionScenario, preset
from src.shared.errors import ConfigurationError
from src.shared.models import ErrorModel, FusionContext, ProtocolConfig, SweepSpec, TimeBin

ENV_MAPPINGS: dict[tuple[str, ...], str] = {
    ("boost", "seed"): "RSS_SEED",
    ("boost", "trials"): "RSS_TRIALS",
}

# Bracketed error keys: name -> (override field, number of indices, last index is a time bin)
OVERRIDE_KEYS: dict[str, tuple[str, int, bool]] = {
    "step3": ("step3_overrides", 2, False),
    "step5a": ("step5a_overrides", 2, False),
    "step5b": ("step5b_overrides", 1, False),
    "excitation_prob": ("excitation_overrides", 3, True),
    "off_resonant_prob": ("off_resonant_overrides", 3, True),
    "cyclicity_return_prob": ("cyclicity_overrides", 3, True),
    "loss_prob_early": ("loss_early_overrides", 2, False),
    "loss_prob_late": ("loss_late_overrides", 2, False),
}

_OVERRIDE_RE = re.compile(r"^(\w+)\[([^\]]*)\]$")


class SimSettings(BaseSettings):
    """Process-level settings read from ``RSS_*`` environment variables."""

    model_config = SettingsConfigDict(env_prefix="RSS_")

    log: str = "WARNING"

    @property
    def log_level(self) -> int:
        level = logging.getLevelName(self.log.strip().upper())
        return level if isinstance(level, int) else logging.WARNING


class BoostSection(BaseModel):
    m: int = Field(3, ge=1)
    eta: float = Field(0.95, ge=0.0, le=1.0)
    etas: list[float] = Field(default_factory=lambda: [0.8, 0.9, 0.95, 1.0])
    m_max: int = Field(10, ge=1)
    trials: int = Field(100_000, ge=1)
    seed: int = Field(0, ge=0)


class SimConfig(BaseModel):
    protocol: ProtocolConfig = Field(default_factory=lambda: ProtocolConfig(blocks=[[1]]))
    errors: ErrorModel = Field(default_factory=ErrorModel)
    sweep: SweepSpec | None = None
    fusion: FusionScenario | None = None
    boost: BoostSection | None = None


def _set_nested(d: dict, keys: tuple[str, ...], value: Any) -> None:
    for key in keys[:-1]:
        if d.get(key) is None:
            d[key] = {}
        d = d[key]
    if keys[-1] in ("seed", "trials"):
        try:
            d[keys[-1]] = int(value)
        except ValueError:
            raise ConfigurationError(f"{keys[-1]} must be an integer, got {value!r}") from None
    else:
        d[keys[-1]] = value


def _parse_index(raw: str, count: int, has_bin: bool, key: str) -> tuple:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != count:
        raise ConfigurationError(f"{key}: expected {count} indices, got {len(parts)}")
    try:
        if has_bin:
            return (int(parts[0]), int(parts[1]), TimeBin(parts[2].lower()))
        return tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigurationError(f"{key}: malformed index {raw!r}") from None


def parse_errors(raw: dict[str, Any] | None) -> ErrorModel:
    """Build an ErrorModel from a document section.

    Plain keys set the value for every index; ``name[i,j,...]`` keys override
    single indices, e.g. ``step3[2,1]`` or ``excitation_prob[1,2,late]``.
    """
    if raw is None:
        return ErrorModel()
    if not isinstance(raw, dict):
        raise ConfigurationError("errors section must be a mapping")
    data: dict[str, Any] = {}
    for key, value in raw.items():
        match = _OVERRIDE_RE.match(str(key))
        if match is None:
            if key not in ErrorModel.model_fields or key.endswith("_overrides"):
                raise ConfigurationError(f"Unknown error parameter {key!r}")
            data[key] = value
            continue
        name, inside = match.groups()
        if name not in OVERRIDE_KEYS:
            raise ConfigurationError(f"Unknown indexed error parameter {key!r}")
        field, count, has_bin = OVERRIDE_KEYS[name]
        index = _parse_index(inside, count, has_bin, key)
        data.setdefault(field, {})[index[0] if count == 1 else index] = value
    return ErrorModel(**data)


def _parse_side(raw: dict[str, Any]) -> dict[str, Any]:
    side = dict(raw)
    side["errors"] = parse_errors(side.get("errors"))
    if "qubit" in side and side["qubit"] is not None:
        side["qubit"] = tuple(side["qubit"])
    return side


def parse_fusion(raw: dict[str, Any]) -> FusionScenario:
    """Fusion section: a ``preset`` name or explicit ``left``/``right`` sides."""
    if not isinstance(raw, dict):
        raise ConfigurationError("fusion section must be a mapping")
    raw = dict(raw)
    name = raw.pop("preset", None)
    if name is not None:
        base = preset(name)
        if "left" in raw or "right" in raw:
            raise ConfigurationError("fusion: use either a preset or explicit left/right sides")
        return base.model_copy(update={k: _scenario_field(base, k, v) for k, v in raw.items()})
    if "left" not in raw or "right" not in raw:
        raise ConfigurationError("fusion: a preset or both left and right sides are required")
    raw["left"] = _parse_side(raw["left"])
    raw["right"] = _parse_side(raw["right"])
    return FusionScenario(**raw)


def _scenario_field(base: FusionScenario, key: str, value: Any) -> Any:
    if key not in type(base).model_fields:
        raise ConfigurationError(f"Unknown fusion setting {key!r}")
    if key == "context":
        return FusionContext(**value)
    return value


def build_config(data: dict[str, Any]) -> SimConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("Config document must be a mapping")
    unknown = set(data) - set(SimConfig.model_fields)
    if unknown:
        raise ConfigurationError(f"Unknown config sections: {sorted(unknown)}")
    protocol = ProtocolConfig(**(data.get("protocol") or {"blocks": [[1]]}))
    errors = parse_errors(data.get("errors"))
    errors.validate_against(protocol)

    sweep = None
    if data.get("sweep") is not None:
        sweep_data = dict(data["sweep"])
        sweep_data.setdefault("protocol", protocol)
        sweep = SweepSpec(**sweep_data)

    fusion = parse_fusion(data["fusion"]) if data.get("fusion") is not None else None
    boost = BoostSection(**data["boost"]) if data.get("boost") is not None else None
    return SimConfig(protocol=protocol, errors=errors, sweep=sweep, fusion=fusion, boost=boost)


def load_config(path: str | Path) -> SimConfig:
    config_path = Path(path).expanduser()
    if not config_path.exists():
        raise ConfigurationError(f"Config file not found: {config_path}")
    with open(config_path) as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{config_path} does not hold a mapping")

    for keys, env_var in ENV_MAPPINGS.items():
        env_value = os.environ.get(env_var)
        if env_value:
            _set_nested(data, keys, env_value)

    return build_config(data)
