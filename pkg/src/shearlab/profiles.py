"""Piecewise-steady shear drifts U(t, y)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spectral import YSpectrum


@dataclass(frozen=True)
class ShearSegment:
    u: YSpectrum
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("segment duration must be positive")
        if not self.u.is_real(tol=1e-14 * max(1.0, float(np.max(np.abs(self.u.c), initial=0.0)))):
            raise ValueError("shear profile must be a real function of y")

    def sup_norm_bound(self) -> float:
        """Upper bound ``sum |U_l|`` on ``max_y |U(y)|``."""
        return float(np.sum(np.abs(self.u.c)))


@dataclass(frozen=True)
class ShearProfile:
    segments: tuple[ShearSegment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("profile needs at least one segment")

    @classmethod
    def steady(cls, u: YSpectrum, duration: float) -> "ShearProfile":
        return cls((ShearSegment(u, duration),))

    @classmethod
    def alternating(cls, u: YSpectrum, half_period: float, duration: float) -> "ShearProfile":
        """``U(t, y) = (-1)^floor(t / half_period) u(y)`` on ``[0, duration]``."""
        segs = []
        sign = 1.0
        n = int(math.ceil(duration / half_period - 1e-12))
        for j in range(n):
            d = min(half_period, duration - j * half_period)
            segs.append(ShearSegment(u.scale(sign), d))
            sign = -sign
        return cls(tuple(segs))

    @property
    def duration(self) -> float:
        return math.fsum(s.duration for s in self.segments)

    def boundaries(self) -> list[float]:
        out, acc = [0.0], 0.0
        for s in self.segments:
            acc += s.duration
            out.append(acc)
        return out

    def sup_norm_bound(self) -> float:
        return max(s.sup_norm_bound() for s in self.segments)

    def truncated(self, duration: float) -> "ShearProfile":
        segs, acc = [], 0.0
        for s in self.segments:
            if acc >= duration * (1 - 1e-14):
                break
            d = min(s.duration, duration - acc)
            segs.append(ShearSegment(s.u, d))
            acc += d
        return ShearProfile(tuple(segs))

    def after(self, t0: float) -> "ShearProfile":
        """The part of the profile on ``[t0, duration]``, re-based to start at zero."""
        if not 0 <= t0 < self.duration:
            raise ValueError("t0 must lie in [0, duration)")
        segs, acc = [], 0.0
        for s in self.segments:
            end = acc + s.duration
            if end > t0 * (1 + 1e-14) + 1e-14:
                segs.append(ShearSegment(s.u, end - max(acc, t0)))
            acc = end
        return ShearProfile(tuple(segs))

    def cycled(self, duration: float) -> "ShearProfile":
        """Repeat the profile periodically and cut it at ``duration``."""
        reps = int(math.ceil(duration / self.duration)) + 1
        return ShearProfile(self.segments * reps).truncated(duration)


def concat(profiles: Sequence[ShearProfile]) -> ShearProfile:
    return ShearProfile(tuple(s for p in profiles for s in p.segments))
