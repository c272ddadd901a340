import json
import logging
import math
import os
from pathlib import Path
from typing import Any, NamedTuple, Optional, Tuple, Union

from pydantic import BaseSettings, Field, validator

from .enums import Mode


def _fmt_repr(name: str, values: dict) -> str:
    values = {k: v for k, v in values.items() if v is not None}
    if len(values):
        val_str = " ".join(sorted([f"{k}={v}" for k, v in values.items()]))
    else:
        val_str = "empty"
    return f"<{name} {val_str}>"


class Tolerances(NamedTuple):
    rank: float = 1e-8
    unitary: float = 1e-8
    cluster: float = 1e-8
    channel: float = 1e-8
    gauge: float = 1e-8
    reconstruction: float = 1e-9

    def __repr__(self) -> str:
        return _fmt_repr("Tolerances", self._asdict())

    def scaled(self, tol: Optional[float]) -> "Tolerances":
        """Replace every threshold that is a plain cutoff with ``tol``"""
        if tol is None:
            return self
        return self._replace(rank=tol, unitary=tol, cluster=tol, channel=tol, gauge=tol)


DEFAULT_TOL = Tolerances()


class SimConfig(NamedTuple):
    mode: Mode = Mode.ENUMERATE
    seed: int = 0
    check_ledger: bool = True

    def __repr__(self) -> str:
        return _fmt_repr("SimConfig", self._asdict())


class EntPowerConfig(NamedTuple):
    restarts: int = 64
    # a restart has converged once the gradient on both spheres is this small
    tol: float = 1e-6
    max_iter: int = 2000
    seed: int = 0
    ancilla_dims: Optional[Tuple[int, int]] = None

    def __repr__(self) -> str:
        return _fmt_repr("EntPowerConfig", self._asdict())


class Settings(BaseSettings):
    threads: int = Field(default_factory=lambda: os.cpu_count() or 1)
    covering_cap: int = 20

    class Config:
        env_prefix = "BFORGE_"

    @validator("threads", "covering_cap")
    def positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be positive")
        return v


def get_settings() -> Settings:
    return Settings()


def _encode(obj: Any) -> str:
    if obj is None or isinstance(obj, bool) or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return json.dumps(str(obj))
        text = format(obj, ".17g")
        if "." not in text and "e" not in text:
            text += ".0"
        return text
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    # numpy scalars and anything else with a float/int conversion
    if hasattr(obj, "item"):
        return _encode(obj.item())
    raise TypeError(f"cannot encode {type(obj)}")


def dumps(obj: Any) -> str:
    """JSON text with every float written using 17 significant digits"""
    return _encode(obj)


def write_json(obj: Any, path: Optional[Union[str, Path]] = None) -> str:
    text = dumps(obj)
    if path is not None:
        path = Path(path)
        if not path.parent.exists():
            path.parent.mkdir(parents=True)
        path.write_text(text + "\n")
        logging.debug(f"wrote {len(text)} bytes to {path}")
    return text
