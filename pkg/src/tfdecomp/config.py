"""Runtime knobs, overridable through the environment.

TFD_PADIC_PRECISION   digits kept when a stream-sourced p-adic is truncated
TFD_SEARCH_BOUND      combination budget for idempotent search
TFD_TRIALS            default trial count for the verification suites
"""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Config:
    padic_precision: int = 64
    search_bound: int = 200
    trials: int = 100


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        v = int(raw)
    except ValueError:
        return default
    return v if v > 0 else default


def from_env() -> Config:
    return Config(
        padic_precision=_env_int("TFD_PADIC_PRECISION", 64),
        search_bound=_env_int("TFD_SEARCH_BOUND", 200),
        trials=_env_int("TFD_TRIALS", 100),
    )


CONFIG = from_env()
