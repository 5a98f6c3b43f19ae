from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

FORMAT_VERSION = 1


def to_jsonable(value: Any) -> Any:
    """Plain JSON tree: complex -> [re, im], numpy -> Python, non-finite floats -> None."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return None
        # -0.0 and 0.0 print differently; results should not depend on the sign of zero
        return 0.0 if value == 0.0 else value
    return value


def _digest(payload: Any) -> str:
    blob = json.dumps(payload, ensure_ascii=False, sort_keys=True).encode("utf-8")
    return hashlib.sha1(blob).hexdigest()


@dataclass(frozen=True)
class RunRecord:
    command: str
    config: dict[str, Any]
    payload: dict[str, Any]
    exit_code: int = 0

    def config_fp(self) -> str:
        """Stable key of the run configuration."""
        return _digest(to_jsonable(self.config))

    def result_fp(self) -> str:
        """Hash of the result payload; identical configs must reproduce it."""
        return _digest(to_jsonable(self.payload))

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "command": self.command,
            "exit_code": self.exit_code,
            "config": to_jsonable(self.config),
            "config_fp": self.config_fp(),
            "result": to_jsonable(self.payload),
            "result_fp": self.result_fp(),
        }
