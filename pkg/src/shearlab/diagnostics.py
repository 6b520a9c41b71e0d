"""Norm ledgers and the checks that turn them into verdicts.

A :class:`NormSeries` stores ``log ||rho||_{L^2}`` in its ``log_l2`` column.
Producers that need more than double precision in the absolute value (the
pulsed cascade reaches ``exp(-45000)``) store the log-norm relative to a
reference and put the reference in ``log_l2_offset``; every check below only
uses differences of ``log_l2`` so the two conventions are interchangeable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

CURV_TOL = 0.02
STAG_FLOOR = 1e-4
PLATEAU_TOL = 0.1
MIN_SAMPLES = 8

COLUMNS = ("t", "log_l2", "log_h1", "log_hneg1", "mix_scale", "grad_ratio", "err_budget")


class InsufficientData(ValueError):
    pass


class NormRow(NamedTuple):
    t: float
    log_l2: float
    log_h1: Optional[float] = None
    log_hneg1: Optional[float] = None
    mix_scale: Optional[float] = None
    grad_ratio: Optional[float] = None
    err_budget: Optional[float] = None


@dataclass
class NormSeries:
    meta: dict = field(default_factory=dict)
    rows: list[NormRow] = field(default_factory=list)
    log_l2_offset: float = 0.0

    def append(self, row: NormRow) -> None:
        if not math.isfinite(row.log_l2):
            raise ValueError(f"non-finite log_l2 at t={row.t}")
        if self.rows and not row.t > self.rows[-1].t:
            raise ValueError(f"times must increase strictly ({row.t} after {self.rows[-1].t})")
        self.rows.append(row)

    def extend(self, rows: Iterable[NormRow]) -> None:
        for r in rows:
            self.append(r)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def t(self) -> np.ndarray:
        return np.array([r.t for r in self.rows], dtype=float)

    def column(self, name: str) -> np.ndarray:
        vals = [getattr(r, name) for r in self.rows]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    def has(self, name: str) -> bool:
        return bool(self.rows) and all(getattr(r, name) is not None for r in self.rows)

    def log_ratio(self) -> np.ndarray:
        """``log(||rho(t)|| / ||rho(t_0)||)`` for every row."""
        v = self.column("log_l2")
        return v - v[0]

    def absolute_log_l2(self) -> np.ndarray:
        return self.column("log_l2") + self.log_l2_offset

    def window_mask(self, window: Optional[tuple[float, float]] = None) -> np.ndarray:
        t = self.t
        lo, hi = default_window(t) if window is None else window
        return (t >= lo) & (t <= hi)


def default_window(t: np.ndarray) -> tuple[float, float]:
    """Last half of the time span."""
    if t.size == 0:
        raise InsufficientData("empty series")
    return float(t[0] + 0.5 * (t[-1] - t[0])), float(t[-1])


@dataclass(frozen=True)
class DecayFit:
    slope: float
    curvature: float
    classification: str
    window: tuple[float, float]
    residual: float


def fit_log_norm(series: NormSeries, window: Optional[tuple[float, float]] = None,
                 curv_tol: float = CURV_TOL) -> DecayFit:
    """Least-squares quadratic in t for ``log_l2``; slope is taken at the window centre."""
    mask = series.window_mask(window)
    if int(mask.sum()) < MIN_SAMPLES:
        raise InsufficientData(f"need {MIN_SAMPLES} samples in window, have {int(mask.sum())}")
    t = series.t[mask]
    y = series.column("log_l2")[mask]
    lo, hi = float(t[0]), float(t[-1])
    centre = 0.5 * (lo + hi)
    s = t - centre
    design = np.stack([np.ones_like(s), s, s * s], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    slope, curv = float(coef[1]), float(coef[2])
    threshold = curv_tol * abs(slope) / (hi - lo)
    if abs(curv) <= threshold:
        kind = "exponential"
    elif curv < 0:
        kind = "super_exponential"
    else:
        kind = "sub_exponential"
    return DecayFit(slope, curv, kind, (lo, hi), float(np.sqrt(np.mean(resid**2))))


def ratio_growth_coefficients(mu: float, u_inf: float) -> tuple[float, float]:
    """Admissible growth rates of ``log(||rho||_{H^1}/||rho||_{L^2})``.

    The differential inequality bounds ``d/dt ratio^2`` by ``coef * ratio^2``;
    the coefficient appears both as ``u_inf/(2 mu)`` and ``u_inf^2/(2 mu)``.
    Halving converts from the squared ratio to the ratio itself.
    """
    return u_inf / (4.0 * mu), u_inf**2 / (4.0 * mu)


def ratio_growth_check(series: NormSeries, mu: float, u_inf: float,
                       window: Optional[tuple[float, float]] = None) -> tuple[bool, float]:
    if not series.has("grad_ratio"):
        raise InsufficientData("series carries no grad_ratio column")
    mask = series.window_mask(window)
    if int(mask.sum()) < MIN_SAMPLES:
        raise InsufficientData(f"need {MIN_SAMPLES} samples in window, have {int(mask.sum())}")
    t = series.t[mask]
    y = np.log(series.column("grad_ratio")[mask])
    growth = float(np.polyfit(t - t.mean(), y, 1)[0])
    _, squared = ratio_growth_coefficients(mu, u_inf)
    return growth <= squared, growth


def extract_rate(series: NormSeries) -> float:
    """``max_t -log(||rho(t)||/||rho(0)||) / t`` over samples with ``t > t_0``."""
    t = series.t
    r = series.log_ratio()
    sel = t > t[0]
    if not np.any(sel):
        raise InsufficientData("need at least one sample after t_0")
    return float(np.max(-r[sel] / (t[sel] - t[0])))


def envelope_check(series: NormSeries, c: Sequence[float], kind: str = "single_exp",
                   slack: float = 1e-12) -> bool:
    """Check every sample of ``r(t) = ||rho(t)||/||rho(0)||`` against an envelope.

    ``single_exp``: ``c = (C, lower_rate, upper_rate)`` and
    ``exp(-lower_rate t)/C <= r(t) <= C exp(-upper_rate t)``.

    ``double_exp``: ``c = (C1, C2, C3)`` and ``r(t) >= C1 exp(-C2 exp(C3 t))``.
    """
    if len(c) != 3 or any(v <= 0 for v in c):
        raise ValueError("envelope constants must be a triple of positive reals")
    t = series.t - series.t[0]
    logr = series.log_ratio()
    if kind == "single_exp":
        big_c, lower, upper = c
        ok_lo = logr >= -lower * t - math.log(big_c) - slack
        ok_hi = logr <= math.log(big_c) - upper * t + slack
        return bool(np.all(ok_lo & ok_hi))
    if kind == "double_exp":
        c1, c2, c3 = c
        return bool(np.all(logr >= math.log(c1) - c2 * np.exp(c3 * t) - slack))
    raise ValueError(f"unknown envelope kind {kind!r}")


def stagnation_check(series: NormSeries, window: Optional[tuple[float, float]] = None,
                     stag_floor: float = STAG_FLOOR,
                     plateau_tol: float = PLATEAU_TOL) -> tuple[float, bool]:
    """Infimum of the mixing scale over ``window`` and whether it has plateaued.

    A plateau needs the infimum above ``stag_floor`` and the infimum over the
    second half of the window within ``plateau_tol`` (relative) of the infimum
    over the first half; a mixing scale still heading to zero fails the latter
    long before it crosses any fixed floor.
    """
    if not series.has("mix_scale"):
        raise InsufficientData("series carries no mix_scale column")
    mask = series.window_mask(window)
    if int(mask.sum()) < 2:
        raise InsufficientData("need at least two samples in window")
    t = series.t[mask]
    mix = series.column("mix_scale")[mask]
    inf = float(np.min(mix))
    mid = 0.5 * (t[0] + t[-1])
    early, late = mix[t <= mid], mix[t >= mid]
    settled = float(np.min(late)) >= (1.0 - plateau_tol) * float(np.min(early))
    return inf, bool(inf > stag_floor and settled)


# ---------------------------------------------------------------------------
# Verdict report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    detail: str = ""
    expect_fail: bool = False

    @property
    def ok(self) -> bool:
        """Whether the preset as a whole treats this line as satisfied."""
        return self.passed != self.expect_fail

    def line(self) -> str:
        if self.passed:
            status = "PASS" if not self.expect_fail else "PASS(unexpected)"
        else:
            status = "FAIL(expected)" if self.expect_fail else "FAIL"
        return f"{self.name}: {status}" + (f" {self.detail}" if self.detail else "")


def format_report(verdicts: Sequence[Verdict]) -> str:
    return "".join(v.line() + "\n" for v in verdicts)
