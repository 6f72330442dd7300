"""Offspring environments: the sequence of geometric success probabilities p_k.

Generation k reproduces with the geometric law on {0, 1, 2, ...} whose
generating function is p_k / (1 - q_k s), q_k = 1 - p_k.  All environments
keep 0 < p_k <= 1/2, so the offspring mean m_k = q_k / p_k is at least 1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np


class EnvSpecError(ValueError):
    """Invalid environment description.  ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _check_prob(name: str, p) -> float:
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise EnvSpecError(name, f"expected a number, got {p!r}") from None
    if not (0.0 < p <= 0.5):
        raise EnvSpecError(name, f"probability must lie in (0, 1/2], got {p!r}")
    return p


@dataclass(frozen=True)
class Homogeneous:
    p: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "p", _check_prob("p", self.p))

    def p_at(self, k: int) -> float:
        return self.p

    def p_array(self, n: int) -> np.ndarray:
        return np.full(n, self.p)

    def to_dict(self) -> dict:
        return {"kind": "homogeneous", "p": self.p}


@dataclass(frozen=True)
class PolyCritical:
    """p_i = 1/2 for i <= i0 and 1/2 - B/(4i) beyond."""

    B: float
    i0: int | None = None

    def __post_init__(self):
        try:
            B = float(self.B)
        except (TypeError, ValueError):
            raise EnvSpecError("B", f"expected a number, got {self.B!r}") from None
        if not (B >= 0.0 and math.isfinite(B)):
            raise EnvSpecError("B", f"must be a finite nonnegative real, got {self.B!r}")
        i0 = self.i0
        if i0 is None:
            i0 = math.ceil(B) + 1
        if isinstance(i0, bool) or not isinstance(i0, (int, np.integer)) or i0 < 1:
            raise EnvSpecError("i0", f"must be a positive integer, got {self.i0!r}")
        if B / (4 * i0) >= 0.5:
            raise EnvSpecError("i0", f"need B/(4*i0) < 1/2, got B={B}, i0={i0}")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "i0", int(i0))

    def p_at(self, k: int) -> float:
        if k <= self.i0:
            return 0.5
        return 0.5 - self.B / (4 * k)

    def p_array(self, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=float)
        return np.where(k <= self.i0, 0.5, 0.5 - self.B / (4 * k))

    def to_dict(self) -> dict:
        return {"kind": "poly_critical", "B": self.B, "i0": self.i0}


@dataclass(frozen=True)
class Explicit:
    """Listed p_1..p_L followed by a constant ``tail`` for every k > L."""

    ps: tuple = field(default=())
    tail: float = 0.5

    def __post_init__(self):
        if isinstance(self.ps, (str, bytes)) or not hasattr(self.ps, "__iter__"):
            raise EnvSpecError("ps", f"expected a list of probabilities, got {self.ps!r}")
        ps = tuple(_check_prob(f"ps[{i}]", p) for i, p in enumerate(self.ps))
        object.__setattr__(self, "ps", ps)
        object.__setattr__(self, "tail", _check_prob("tail", self.tail))

    def p_at(self, k: int) -> float:
        return self.ps[k - 1] if k <= len(self.ps) else self.tail

    def p_array(self, n: int) -> np.ndarray:
        out = np.full(n, self.tail)
        m = min(n, len(self.ps))
        out[:m] = self.ps[:m]
        return out

    def to_dict(self) -> dict:
        return {"kind": "explicit", "ps": list(self.ps), "tail": self.tail}


EnvironmentSpec = Union[Homogeneous, PolyCritical, Explicit]

_KINDS = {
    "homogeneous": (Homogeneous, {"p"}),
    "poly_critical": (PolyCritical, {"B", "i0"}),
    "explicit": (Explicit, {"ps", "tail"}),
}


def p_at(env: EnvironmentSpec, k: int) -> float:
    if k < 1:
        raise ValueError(f"generation index must be >= 1, got {k}")
    return env.p_at(k)


def mean_at(env: EnvironmentSpec, k: int) -> float:
    """Offspring mean m_k = (1 - p_k) / p_k."""
    p = p_at(env, k)
    return (1.0 - p) / p


def is_critical(env: EnvironmentSpec) -> bool:
    """True when p_k = 1/2 for every k."""
    if isinstance(env, Homogeneous):
        return env.p == 0.5
    if isinstance(env, PolyCritical):
        return env.B == 0.0
    return env.tail == 0.5 and all(p == 0.5 for p in env.ps)


def env_from_dict(data: dict) -> EnvironmentSpec:
    if not isinstance(data, dict):
        raise EnvSpecError("env", f"expected a JSON object, got {type(data).__name__}")
    kind = data.get("kind")
    if kind not in _KINDS:
        raise EnvSpecError("kind", f"expected one of {sorted(_KINDS)}, got {kind!r}")
    cls, allowed = _KINDS[kind]
    extra = sorted(set(data) - allowed - {"kind"})
    if extra:
        raise EnvSpecError(extra[0], f"unknown field for kind {kind!r}")
    kwargs = {k: v for k, v in data.items() if k != "kind"}
    if kind == "poly_critical" and "B" not in kwargs:
        raise EnvSpecError("B", "required for kind 'poly_critical'")
    if kind == "poly_critical" and kwargs.get("i0") is not None:
        i0 = kwargs["i0"]
        if isinstance(i0, float) and i0.is_integer():
            kwargs["i0"] = int(i0)
    return cls(**kwargs)


def env_from_json(text: str) -> EnvironmentSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EnvSpecError("env", f"malformed JSON ({exc.msg})") from None
    return env_from_dict(data)


def env_from_file(path: str | Path) -> EnvironmentSpec:
    return env_from_json(Path(path).read_text())


def env_to_json(env: EnvironmentSpec) -> str:
    return json.dumps(env.to_dict(), sort_keys=True)
