from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv


def _as_bool(value: Optional[str], default: bool) -> bool:
    if value is None or value == "":
        return default
    return value.strip().lower() in {"1", "true", "yes", "y", "on"}


def _as_int(value: Optional[str], default: int) -> int:
    if value is None or value == "":
        return default
    return int(value)


def _as_float(value: Optional[str], default: float) -> float:
    if value is None or value == "":
        return default
    return float(value)


@dataclass(frozen=True)
class Settings:
    log_path: Path
    log_level: str
    output_dir: Path

    dense_limit: int
    tol: float
    zero_tol: float
    threads: int
    warn_ill_conditioned: bool


def load_settings(project_root: Path) -> Settings:
    load_dotenv(project_root / ".env", override=False)

    def getenv(name: str, default: str = "") -> str:
        return os.getenv(name, default)

    log_path = Path(getenv("LINDBLAD_LOG_PATH", str(project_root / "logs" / "run.log")))
    output_dir = Path(getenv("LINDBLAD_OUTPUT_DIR", str(project_root / "data")))

    threads = _as_int(getenv("LINDBLAD_THREADS"), 1)
    if threads < 1:
        raise ValueError(f"LINDBLAD_THREADS must be >= 1, got {threads}")

    return Settings(
        log_path=log_path,
        log_level=getenv("LINDBLAD_LOG_LEVEL", "INFO").upper(),
        output_dir=output_dir,
        dense_limit=_as_int(getenv("LINDBLAD_DENSE_LIMIT"), 4**6),
        tol=_as_float(getenv("LINDBLAD_TOL"), 1e-10),
        zero_tol=_as_float(getenv("LINDBLAD_ZERO_TOL"), 1e-9),
        threads=threads,
        warn_ill_conditioned=_as_bool(getenv("LINDBLAD_WARN_ILL_CONDITIONED"), True),
    )
