"""Field evaluator contract and a few closed-form providers.

A provider maps a scalar time and an ``(N, 3)`` array of positions to the
electric and magnetic fields at those positions. Providers are immutable and
reentrant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np


class OutOfDomainError(ValueError):
    """A field was requested outside the provider's declared domain."""

    def __init__(self, t: float, x: np.ndarray, message: str = ""):
        self.t = float(t)
        self.x = np.asarray(x, dtype=float).copy()
        text = message or "field query outside provider domain"
        super().__init__(f"{text}: t={self.t!r}, x={self.x.tolist()!r}")


class FieldProvider(Protocol):
    t_range: tuple[float, float]

    def evaluate(self, t: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ...


@dataclass(frozen=True)
class Domain:
    """Time interval plus an optional axis-aligned box (None means unbounded)."""

    t_range: tuple[float, float] = (-np.inf, np.inf)
    lower: tuple[float, float, float] | None = None
    upper: tuple[float, float, float] | None = None
    t_slack: float = 1e-12

    def check(self, t: float, x: np.ndarray) -> None:
        lo, hi = self.t_range
        if not (lo - self.t_slack <= t <= hi + self.t_slack):
            bad = np.atleast_2d(x)[0] if np.size(x) else np.zeros(3)
            raise OutOfDomainError(t, bad, "time outside provider range")
        if self.lower is None:
            return
        x2 = np.atleast_2d(x)
        outside = np.any((x2 < np.asarray(self.lower)) | (x2 > np.asarray(self.upper)), axis=1)
        if np.any(outside):
            raise OutOfDomainError(t, x2[np.argmax(outside)])


def _as_points(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class UniformFields:
    """Spatially and temporally constant fields."""

    E: tuple[float, float, float] = (0.0, 0.0, 0.0)
    B: tuple[float, float, float] = (0.0, 0.0, 0.0)
    domain: Domain = field(default_factory=Domain)

    @property
    def t_range(self):
        return self.domain.t_range

    def evaluate(self, t, x):
        pts = _as_points(x)
        self.domain.check(t, pts)
        n = pts.shape[0]
        return (np.broadcast_to(np.asarray(self.E, float), (n, 3)).copy(),
                np.broadcast_to(np.asarray(self.B, float), (n, 3)).copy())


def zero_fields() -> UniformFields:
    return UniformFields()


@dataclass(frozen=True)
class AnalyticFields:
    """Fields given by vectorized callables ``E(t, x)`` and ``B(t, x)``."""

    E: Callable[[float, np.ndarray], np.ndarray] | None = None
    B: Callable[[float, np.ndarray], np.ndarray] | None = None
    domain: Domain = field(default_factory=Domain)

    @property
    def t_range(self):
        return self.domain.t_range

    def evaluate(self, t, x):
        pts = _as_points(x)
        self.domain.check(t, pts)
        zero = np.zeros_like(pts)
        e = zero if self.E is None else np.asarray(self.E(t, pts), float).reshape(pts.shape)
        b = zero if self.B is None else np.asarray(self.B(t, pts), float).reshape(pts.shape)
        return e, b


@dataclass(frozen=True)
class SummedFields:
    """Pointwise sum of several providers (e.g. self-consistent plus external)."""

    parts: tuple

    @property
    def t_range(self):
        lo = max(p.t_range[0] for p in self.parts)
        hi = min(p.t_range[1] for p in self.parts)
        return (lo, hi)

    def evaluate(self, t, x):
        pts = _as_points(x)
        e = np.zeros_like(pts)
        b = np.zeros_like(pts)
        for p in self.parts:
            de, db = p.evaluate(t, pts)
            e += de
            b += db
        return e, b
