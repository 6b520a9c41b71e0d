"""Exponential inviscid mixing of ``f(y) sin x + g(y) cos x`` by switched shears.

On each unit interval the drift is ``sin(k y)`` for a time ``t_n`` and zero
afterwards.  Transport by a steady shear is computed exactly in Fourier space:
``cos(t sin(k y))`` and ``sin(t sin(k y))`` have Jacobi-Anger expansions with
Bessel coefficients supported on multiples of ``k``, so the new ``(f, g)`` are
finite convolutions of the old ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import jv

from .diagnostics import NormRow, NormSeries
from .profiles import ShearProfile, ShearSegment
from .spectral import (
    TWO_PI,
    YSpectrum,
    inner_y,
    mixing_scale,
    norm_l2,
    norm_sobolev,
    single_xmode_assemble,
)

JA_TOL = 1e-16
BISECT_TOL = 1e-10
BISECT_MAX_ITER = 60
MAX_DOUBLINGS = 6
MAX_Y_MODES = 2**18
DEFAULT_MAX_STEPS = 8


class BracketFailure(RuntimeError):
    """The contraction at t = 1 is not strong enough to bracket the target ratio."""


class BandOverflow(RuntimeError):
    def __init__(self, message: str, steps_completed: int = 0, schedule=None, series=None):
        super().__init__(message)
        self.steps_completed = steps_completed
        self.schedule = schedule
        self.series = series


class IntermediateBoundViolation(RuntimeError):
    """An evaluated H^-1 ratio exceeded the intermediate-time bound of 2."""


# ---------------------------------------------------------------------------
# Stationary-phase averages
# ---------------------------------------------------------------------------


def _periodic_mean(func, rel_tol: float = 1e-13, n0: int = 8, max_nodes: int = 1 << 20) -> float:
    """Mean over one period by trapezoid rule, doubling nodes until two passes agree."""
    n = n0
    prev = float(np.mean(func(TWO_PI * np.arange(n) / n)))
    while True:
        n *= 2
        cur = float(np.mean(func(TWO_PI * np.arange(n) / n)))
        if abs(cur - prev) <= rel_tol or n >= max_nodes:
            return cur
        prev = cur


def a_of_t(t: float) -> float:
    """``(1/2pi) int_{-pi}^{pi} cos(t sin x) dx``, i.e. ``J_0(t)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return _periodic_mean(lambda x: np.cos(t * np.sin(x)))


def _average_k0(t: float, k0: int, trig=np.cos) -> float:
    # nodes scale with k0 so each period of sin(k0 x) sees the same resolution
    return _periodic_mean(lambda x: trig(t * np.sin(k0 * x)), n0=8 * k0)


def k0_independence_check(t: float, k0_list: Sequence[int], tol: float = 1e-12) -> bool:
    """True iff the average of ``cos(t sin(k0 x))`` is the same for every ``k0``."""
    vals = [_average_k0(t, int(k)) for k in k0_list]
    return max(vals) - min(vals) <= tol


def sin_average(t: float, k0: int) -> float:
    return _average_k0(t, k0, np.sin)


# ---------------------------------------------------------------------------
# Jacobi-Anger spectra
# ---------------------------------------------------------------------------


def jacobi_anger_order(t: float, tol: float = JA_TOL) -> tuple[int, float]:
    """Smallest ``M`` with ``|J_m(t)| < tol`` for all ``|m| >= M``, plus a tail bound.

    Uses ``|J_m(t)| <= (|t|/2)^m / m!``; the returned bound majorises
    ``sum_{|m| >= M} |J_m(t)|``.
    """
    x = abs(t) / 2.0
    m, term = 0, 1.0
    while not (term < tol and m > x):
        m += 1
        term *= x / m
    ratio = x / (m + 1)
    return m, 2.0 * term / (1.0 - ratio)


def jacobi_anger_exp(c: float, k0: int, phase: float = 0.0, tol: float = JA_TOL) -> YSpectrum:
    """Spectrum of ``exp(i c sin(k0 y + phase))``."""
    order, _ = jacobi_anger_order(c, tol)
    m = np.arange(-order + 1, order)
    coeff = jv(m, c) * np.exp(1j * m * phase)
    return YSpectrum(m * k0, coeff)


def jacobi_anger(t: float, k0: int, tol: float = JA_TOL) -> tuple[YSpectrum, YSpectrum]:
    """Spectra of ``cos(t sin(k0 y))`` (even multiples of k0) and ``sin(t sin(k0 y))`` (odd)."""
    order, _ = jacobi_anger_order(t, tol)
    m = np.arange(-order + 1, order)
    j = jv(m, t)
    even = m % 2 == 0
    cos_spec = YSpectrum(m[even] * k0, j[even].astype(np.complex128))
    sin_spec = YSpectrum(m[~even] * k0, -1j * j[~even])
    return cos_spec, sin_spec


# ---------------------------------------------------------------------------
# State and transport
# ---------------------------------------------------------------------------


def _real_part(s: YSpectrum) -> YSpectrum:
    """Project onto Hermitian-symmetric spectra (removes convolution round-off)."""
    mirror = YSpectrum(-s.l[::-1], np.conj(s.c[::-1]))
    return (s + mirror).scale(0.5)


@dataclass(frozen=True)
class MixerState:
    f: YSpectrum
    g: YSpectrum
    h1: float
    hneg1: float
    step_index: int = 0

    @classmethod
    def from_fg(cls, f: YSpectrum, g: YSpectrum, step_index: int = 0) -> "MixerState":
        rho = single_xmode_assemble(f, g)
        return cls(f, g, norm_sobolev(rho, 1), norm_sobolev(rho, -1), step_index)

    def field(self):
        return single_xmode_assemble(self.f, self.g)

    @property
    def l2(self) -> float:
        return norm_l2(self.field())

    @property
    def n_modes(self) -> int:
        return max(len(self.f), len(self.g))


def _transport_fg(f0: YSpectrum, g0: YSpectrum, k0: int, t: float) -> tuple[YSpectrum, YSpectrum]:
    cos_s, sin_s = jacobi_anger(t, k0)
    # rho(t, x, y) = rho_0(x - t U(y), y)
    f = f0.convolve(cos_s) + g0.convolve(sin_s)
    g = g0.convolve(cos_s) - f0.convolve(sin_s)
    return _real_part(f), _real_part(g)


def transport_steady(state: MixerState, k0: int, t: float) -> MixerState:
    """Exact inviscid transport for time ``t`` by ``U(y) = sin(k0 y)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return state
    f, g = _transport_fg(state.f, state.g, k0, t)
    return MixerState.from_fg(f, g, state.step_index)


def h1_closed_form(state: MixerState, k0: int, t: float) -> float:
    """H^1 norm after transport by ``sin(k0 y)``, from the initial-data integrals.

    ``||rho(t)||^2 = ||rho(0)||^2 - 2 pi t int U'(f g' - f' g) + pi t^2 int (U' f)^2 + (U' g)^2``

    The cross term is negative because the drift enters as ``+U d/dx``.
    """
    du = YSpectrum.cos(k0, float(k0))
    f, g = state.f, state.g
    wronskian = f.convolve(g.derivative()) - f.derivative().convolve(g)
    cross = -TWO_PI * t * inner_y(du, wronskian).real
    quad = math.pi * t * t * (du.convolve(f).l2_sq() + du.convolve(g).l2_sq())
    return math.sqrt(max(state.h1**2 + cross + quad, 0.0))


def choose_k(state: MixerState, A: float) -> int:
    """``ceil(36 / (1 - |A|) * ||rho||_{H^1} / ||rho||_{H^-1})``."""
    if not abs(A) < 1:
        raise ValueError("|A| must be below 1")
    return int(math.ceil(36.0 / (1.0 - abs(A)) * state.h1 / state.hneg1))


@dataclass
class BisectionTrace:
    t: float
    ratio: float
    after: MixerState
    max_ratio: float
    evaluations: int
    ratios: list = field(default_factory=list)


def _bisect(state: MixerState, k0: int, A: float, tol: float) -> BisectionTrace:
    target = (abs(A) + 2.0) / 3.0
    bracket = (2.0 * abs(A) + 1.0) / 3.0
    seen: list[tuple[float, float]] = []

    def ratio_at(t: float) -> tuple[float, MixerState]:
        after = transport_steady(state, k0, t)
        r = after.hneg1 / state.hneg1
        seen.append((t, r))
        if r > 2.0:
            raise IntermediateBoundViolation(f"H^-1 ratio {r} > 2 at t={t}, k0={k0}")
        return r, after

    r1, _ = ratio_at(1.0)
    if r1 > bracket + tol:
        raise BracketFailure(f"ratio {r1:.6f} at t=1 exceeds {bracket:.6f} for k0={k0}")
    lo, hi = 0.0, 1.0
    best = None
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        r, after = ratio_at(mid)
        if best is None or abs(r - target) < abs(best[1] - target):
            best = (mid, r, after)
        if abs(r - target) <= tol:
            break
        if r > target:
            lo = mid
        else:
            hi = mid
    t, r, after = best
    if abs(r - target) > tol:
        raise BracketFailure(f"bisection stalled at ratio {r} (target {target})")
    return BisectionTrace(t, r, after, max(v for _, v in seen), len(seen), seen)


def find_t(state: MixerState, k0: int, A: float, tol: float = BISECT_TOL) -> float:
    """Time in (0, 1) at which the H^-1 norm has contracted by ``(|A| + 2) / 3``."""
    return _bisect(state, k0, A, tol).t


# ---------------------------------------------------------------------------
# Schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixerStep:
    k: int
    t: float
    hneg1_after: float
    h1_after: float
    hneg1_before: float
    max_ratio: float
    doublings: int
    n_modes: int

    @property
    def ratio(self) -> float:
        return self.hneg1_after / self.hneg1_before


@dataclass
class MixerSchedule:
    A_const: float
    steps: list[MixerStep] = field(default_factory=list)
    final_state: Optional[MixerState] = None

    @property
    def target_ratio(self) -> float:
        return (abs(self.A_const) + 2.0) / 3.0

    def profile(self) -> ShearProfile:
        """Drift ``sin(k_n y)`` on ``[n, n + t_n]`` and zero on ``[n + t_n, n + 1]``."""
        segs = []
        for s in self.steps:
            segs.append(ShearSegment(YSpectrum.sin(s.k), s.t))
            segs.append(ShearSegment(YSpectrum.zero(), 1.0 - s.t))
        return ShearProfile(tuple(segs))

    def h1_envelope(self, h1_0: float) -> tuple[float, float]:
        """``(C, beta)`` with ``log h1_n <= C + beta n^2`` tight at the worst step."""
        c = math.log(h1_0)
        beta = max(((math.log(s.h1_after) - c) / (n + 1) ** 2 for n, s in enumerate(self.steps)),
                   default=0.0)
        return c, max(beta, 0.0)


def _row(t: float, st: MixerState) -> NormRow:
    rho = st.field()
    l2 = norm_l2(rho)
    return NormRow(t, math.log(l2), math.log(st.h1), math.log(st.hneg1),
                   mixing_scale(rho), st.h1 / l2, 0.0)


def build_schedule(f0: YSpectrum, g0: YSpectrum, n_steps: int, tol: float = BISECT_TOL,
                   max_modes: int = MAX_Y_MODES,
                   A: Optional[float] = None) -> tuple[MixerSchedule, NormSeries]:
    """Run the switched-shear construction for ``n_steps`` unit intervals."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    A = a_of_t(1.0) if A is None else A
    state = MixerState.from_fg(f0, g0, 0)
    if not state.hneg1 > 0:
        raise ValueError("initial data must be nonzero")
    sched = MixerSchedule(A, final_state=state)
    series = NormSeries(meta={"experiment": "mixer", "A": A})
    series.append(_row(0.0, state))
    return extend_schedule(sched, series, n_steps, tol, max_modes)


def extend_schedule(sched: MixerSchedule, series: NormSeries, n_more: int,
                    tol: float = BISECT_TOL,
                    max_modes: int = MAX_Y_MODES) -> tuple[MixerSchedule, NormSeries]:
    """Append ``n_more`` steps starting from ``sched.final_state``."""
    A = sched.A_const
    state = sched.final_state
    start = state.step_index
    for n in range(start, start + n_more):
        k = choose_k(state, A)
        for doubling in range(MAX_DOUBLINGS + 1):
            try:
                trace = _bisect(state, k, A, tol)
                break
            except BracketFailure:
                if doubling == MAX_DOUBLINGS:
                    raise
                k *= 2
        after = trace.after
        if after.n_modes > max_modes:
            raise BandOverflow(
                f"step {n}: {after.n_modes} y-modes exceed the cap {max_modes}",
                steps_completed=n, schedule=sched, series=series)
        sched.steps.append(MixerStep(k, trace.t, after.hneg1, after.h1, state.hneg1,
                                     trace.max_ratio, doubling, after.n_modes))
        series.append(_row(n + trace.t, after))
        state = MixerState(after.f, after.g, after.h1, after.hneg1, n + 1)
        sched.final_state = state
        series.append(_row(float(n + 1), state))
    return sched, series
