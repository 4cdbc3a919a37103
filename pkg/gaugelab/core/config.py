"""Run configuration for the batch front end."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import dotenv_values

from gaugelab.config import settings


class ConfigError(RuntimeError):
    """Raised when the run configuration is invalid."""


@dataclass(slots=True)
class RunConfig:
    solution: str = "ps-lift"
    r_min: float = 0.5
    r_max: float = 50.0
    samples: int = 100
    angular_level: int = 24
    radial_level: int = 64
    residual_tol: float = 1e-8
    report_constant: float = 10.0
    epsilon: float = 0.01
    rho: float = 100.0
    output: str = ""
    deterministic: bool = True
    seed: int = 20240611
    workers: int = 1
    points: int = 100
    relax_nodes: int = 16
    relax_half_width: float = 1.8
    relax_perturbation: float = 0.1
    relax_tol: float = 1e-6
    relax_max_iters: int = 5000
    checkpoint: str = ""
    checkpoint_every: int = 100

    def header_items(self) -> list[tuple[str, str]]:
        return [(key, _format_value(value)) for key, value in sorted(asdict(self).items())]


_FIELD_TYPES: Dict[str, type] = {
    "solution": str,
    "r_min": float,
    "r_max": float,
    "samples": int,
    "angular_level": int,
    "radial_level": int,
    "residual_tol": float,
    "report_constant": float,
    "epsilon": float,
    "rho": float,
    "output": str,
    "deterministic": bool,
    "seed": int,
    "workers": int,
    "points": int,
    "relax_nodes": int,
    "relax_half_width": float,
    "relax_perturbation": float,
    "relax_tol": float,
    "relax_max_iters": int,
    "checkpoint": str,
    "checkpoint_every": int,
}

KNOWN_SOLUTIONS = ("ps-lift", "const-mode", "linear-mode", "abelian", "tau-quarter")


def _norm(value: str | None) -> str:
    """Normalize raw configuration values by trimming whitespace."""

    return (value or "").strip()


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(key: str, raw: Any) -> Any:
    kind = _FIELD_TYPES[key]
    if not isinstance(raw, str):
        return kind(raw)
    text = _norm(raw)
    if kind is bool:
        lowered = text.lower()
        if lowered in {"1", "true", "yes", "on"}:
            return True
        if lowered in {"0", "false", "no", "off"}:
            return False
        raise ConfigError(f"Invalid boolean for {key}: {raw!r}")
    try:
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f"Invalid value for {key}: {raw!r}") from exc


def _defaults() -> Dict[str, Any]:
    values = asdict(RunConfig())
    values["angular_level"] = settings.angular_level
    values["radial_level"] = settings.radial_level
    values["seed"] = settings.seed
    values["deterministic"] = settings.deterministic
    values["workers"] = settings.workers
    values["residual_tol"] = settings.residual_tol
    for key in _FIELD_TYPES:
        env_value = _norm(os.getenv(f"GAUGELAB_{key.upper()}"))
        if env_value:
            values[key] = _coerce(key, env_value)
    return values


def _read_file(path: str) -> Dict[str, Any]:
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    raw = dotenv_values(file_path)
    values: Dict[str, Any] = {}
    for key, value in raw.items():
        name = _norm(key).lower().replace("-", "_")
        if name not in _FIELD_TYPES:
            raise ConfigError(f"Unknown config key: {key}")
        if value is None:
            raise ConfigError(f"Config key without value: {key}")
        values[name] = _coerce(name, value)
    return values


def _load_settings(path: Optional[str] = None) -> Dict[str, Any]:
    """Merge built-in defaults, environment overrides and the config file."""

    values = _defaults()
    source = _norm(path) or _norm(os.getenv("GAUGELAB_CONFIG"))
    if source:
        values.update(_read_file(source))
    return values


def _validate(values: Mapping[str, Any]) -> None:
    """Validate a merged run configuration."""

    if values.get("solution") not in KNOWN_SOLUTIONS:
        raise ConfigError(f"Unknown solution label: {values.get('solution') or '<empty>'}")
    if not 0 < values["r_min"] < values["r_max"]:
        raise ConfigError(f"Invalid radius window: r_min={values['r_min']} r_max={values['r_max']}")
    if values["samples"] < 2:
        raise ConfigError(f"samples must be at least 2, got {values['samples']}")
    if values["angular_level"] < 4 or values["radial_level"] < 4:
        raise ConfigError("Quadrature levels must be at least 4")
    if not 0 < values["epsilon"] < 1:
        raise ConfigError(f"epsilon must lie in (0, 1), got {values['epsilon']}")
    if values["rho"] <= 1:
        raise ConfigError(f"rho must exceed 1, got {values['rho']}")
    for key in ("residual_tol", "report_constant", "relax_tol", "relax_half_width"):
        if values[key] <= 0:
            raise ConfigError(f"{key} must be positive")
    if values["workers"] < 1 or values["points"] < 1:
        raise ConfigError("workers and points must be positive")
    if values["relax_nodes"] < 5:
        raise ConfigError("relax_nodes must be at least 5")
    if values["relax_max_iters"] < 1 or values["checkpoint_every"] < 1:
        raise ConfigError("relax_max_iters and checkpoint_every must be positive")


@lru_cache(maxsize=8)
def _get_settings_cached(path: str) -> Dict[str, Any]:
    values = _load_settings(path)
    _validate(values)
    return values


def get_settings(path: Optional[str] = None, *, validate: bool = True) -> Dict[str, Any]:
    """Return the merged run configuration.

    Parameters
    ----------
    path:
        Optional config file; ``GAUGELAB_CONFIG`` is used when omitted.
    validate:
        When ``True`` (default) the values are validated and cached. When
        ``False`` the raw merged values are returned without validation or
        caching.
    """

    if validate:
        return dict(_get_settings_cached(_norm(path)))
    return _load_settings(path)


def get_settings_snapshot(path: Optional[str] = None) -> Tuple[Dict[str, Any], ConfigError | None]:
    """Return current values alongside a validation error, if any."""

    values = _load_settings(path)
    try:
        _validate(values)
    except ConfigError as exc:
        return values, exc
    return values, None


def build_run_config(overrides: Mapping[str, Any] | None = None, path: Optional[str] = None) -> RunConfig:
    """Apply command-line overrides on top of the file and defaults."""

    values = get_settings(path, validate=False)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"Unknown config key: {key}")
        values[key] = _coerce(key, value)
    _validate(values)
    names = {item.name for item in fields(RunConfig)}
    return RunConfig(**{key: values[key] for key in names})


def clear_settings_cache() -> None:
    """Clear the cached run configuration."""

    _get_settings_cached.cache_clear()


# Expose ``cache_clear`` to ease testing (pytest expects attribute on function).
get_settings.cache_clear = clear_settings_cache  # type: ignore[attr-defined]


__all__ = [
    "ConfigError",
    "KNOWN_SOLUTIONS",
    "RunConfig",
    "build_run_config",
    "clear_settings_cache",
    "get_settings",
    "get_settings_snapshot",
]
