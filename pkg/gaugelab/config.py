import os
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()


def _env_bool(name: str, default: str = "false") -> bool:
    value = os.getenv(name, default)
    if value is None:
        return False
    return str(value).strip().lower() in {"1", "true", "yes", "on"}


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name, "").strip()
    return int(value) if value else default


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name, "").strip()
    return float(value) if value else default


@dataclass
class Settings:
    log_level: str = os.getenv("LOG_LEVEL", "INFO")

    angular_level: int = _env_int("GAUGELAB_ANGULAR_LEVEL", 24)
    radial_level: int = _env_int("GAUGELAB_RADIAL_LEVEL", 64)
    seed: int = _env_int("GAUGELAB_SEED", 20240611)
    deterministic: bool = _env_bool("GAUGELAB_DETERMINISTIC", "true")
    workers: int = _env_int("GAUGELAB_WORKERS", 1)

    fd_step: float = _env_float("GAUGELAB_FD_STEP", 1e-3)
    residual_tol: float = _env_float("GAUGELAB_RESIDUAL_TOL", 1e-8)

    relax_nodes: int = _env_int("GAUGELAB_RELAX_NODES", 16)
    relax_half_width: float = _env_float("GAUGELAB_RELAX_HALF_WIDTH", 1.8)
    relax_tol: float = _env_float("GAUGELAB_RELAX_TOL", 1e-6)
    relax_max_iters: int = _env_int("GAUGELAB_RELAX_MAX_ITERS", 5000)
    checkpoint_every: int = _env_int("GAUGELAB_CHECKPOINT_EVERY", 100)


settings = Settings()
