"""Per-inequality verification records."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class VerificationReport:
    """LHS/RHS of one inequality sampled at a set of times.

    ``margin = rhs - lhs``; the report passes iff the minimum margin is
    nonnegative at every checked time. ``constants`` holds fitted or supplied
    constants, ``provenance`` the config hash and seed of the producing run.
    """

    inequality: str
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    constants: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        self.lhs = np.atleast_1d(np.asarray(self.lhs, dtype=float))
        self.rhs = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        if not (self.times.shape == self.lhs.shape == self.rhs.shape):
            raise ValueError("times, lhs and rhs must have the same shape")

    @property
    def margins(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def min_margin(self) -> float:
        if self.margins.size == 0:
            return float("inf")
        m = self.margins
        if np.any(np.isnan(m)):
            return float("nan")
        return float(np.min(m))

    @property
    def passed(self) -> bool:
        mm = self.min_margin
        return bool(mm >= 0)

    @property
    def relative_margins(self) -> np.ndarray:
        scale = np.maximum(np.abs(self.rhs), np.finfo(float).tiny)
        return self.margins / scale

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "inequality": self.inequality,
                "passed": self.passed,
                "min_margin": self.min_margin,
                "constants": self.constants,
                "provenance": self.provenance,
                "times": self.times,
                "lhs": self.lhs,
                "rhs": self.rhs,
                "margin": self.margins,
                "extra": self.extra,
            }
        )

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def summary(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        consts = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.constants.items())
        return f"[{flag}] {self.inequality}: min margin {self.min_margin:.4e} over {self.times.size} times ({consts})"


def merge_passed(reports) -> bool:
    return all(r.passed for r in reports)
