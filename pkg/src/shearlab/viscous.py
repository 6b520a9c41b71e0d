"""Strang-split spectral solver for ``d_t rho + U(t, y) d_x rho = mu Lap rho`` on T^2.

Both sub-flows are solved exactly: diffusion is diagonal in Fourier space and
advection by a steady shear is a pointwise phase ``exp(-i k dt U(y))`` on each
x-mode ``k``.  The phase is not band-limited, so the advected profile is the
Galerkin projection onto ``|ky| <= B`` of the exact product; the discarded
L^2 mass is added to the field's ``err_budget``.

The state is held as a half-plane array (rows ``kx = 0..B``); negative ``kx``
follow from Hermitian symmetry.  Rows are independent, so the advection
sub-step is split into fixed chunks of rows that may run on a thread pool
(``SHEARLAB_THREADS``).  The chunking never depends on the worker count,
which keeps results bit-identical for any number of threads.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import fft as sfft

from .diagnostics import NormRow, NormSeries
from .mixer import jacobi_anger_exp
from .profiles import ShearProfile
from .spectral import TWO_PI, SpectralField2D, YSpectrum, sobolev_sq

ROW_CHUNK = 8
TAIL_FRACTION = 0.1


class TailOverflow(RuntimeError):
    def __init__(self, message: str, field: Optional[SpectralField2D] = None,
                 series: Optional[NormSeries] = None, t: float = 0.0):
        super().__init__(message)
        self.field = field
        self.series = series
        self.t = t


@dataclass(frozen=True)
class SolverConfig:
    mu: float = 1.0
    dt: float = 1e-3
    band: int = 64
    oversample: int = 2
    tail_tol: float = 1e-6
    threads: Optional[int] = None

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError("mu must be nonnegative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.band < 1:
            raise ValueError("band must be at least 1")
        if self.oversample < 2:
            raise ValueError("oversample must be at least 2")
        if not 0 < self.tail_tol < 1:
            raise ValueError("tail_tol must lie in (0, 1)")

    @property
    def grid_size(self) -> int:
        return sfft.next_fast_len(max(self.oversample * (2 * self.band + 1), 4 * self.band + 1))

    def workers(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        return max(1, int(os.environ.get("SHEARLAB_THREADS", "1") or 1))


# ---------------------------------------------------------------------------
# Half-plane helpers
# ---------------------------------------------------------------------------


def _half_grids(band: int):
    kx, ky = np.meshgrid(np.arange(band + 1), np.arange(-band, band + 1), indexing="ij")
    k2 = kx * kx + ky * ky
    mult = np.where(kx > 0, 2.0, 1.0)
    outer = (np.abs(kx) > (1 - TAIL_FRACTION) * band) | (np.abs(ky) > (1 - TAIL_FRACTION) * band)
    return k2, mult, outer


def _half_mass(half: np.ndarray, mult: np.ndarray) -> np.ndarray:
    return mult * (half.real**2 + half.imag**2)


def tail_fraction(half: np.ndarray, band: int) -> float:
    """Fraction of L^2 mass in the outer 10% of the band."""
    _, mult, outer = _half_grids(band)
    mass = _half_mass(half, mult)
    total = float(np.sum(mass))
    return float(np.sum(mass[outer])) / total if total > 0 else 0.0


# ---------------------------------------------------------------------------
# Exact steady-shear advection
# ---------------------------------------------------------------------------


def _single_harmonic(u: YSpectrum) -> Optional[tuple[float, int, float, float]]:
    """Write ``u = c0 + R sin(K y + phi)`` when it has at most one frequency."""
    freqs = sorted({abs(int(v)) for v in u.l if v != 0})
    if len(freqs) > 1:
        return None
    c0 = u.coeff(0).real
    if not freqs:
        return c0, 0, 0.0, 0.0
    big_k = freqs[0]
    c = u.coeff(big_k)
    # c e^{iKy} + conj(c) e^{-iKy} = 2|c| sin(Ky + arg c + pi/2)
    return c0, big_k, 2.0 * abs(c), math.atan2(c.imag, c.real) + 0.5 * math.pi


def phase_spectra(u: YSpectrum, dt: float, band: int, oversample: int = 2) -> np.ndarray:
    """Coefficients of ``exp(-i k dt U(y))`` for ``k = 1..B`` and ``|l| <= 2B``.

    Returns an array of shape ``(B, 4B + 1)``; column ``j`` holds frequency
    ``l = j - 2B``.  Single-frequency drifts use the Jacobi-Anger series;
    anything else is sampled on a grid wide enough for the phase bandwidth.
    """
    width = 2 * band
    out = np.zeros((band, 2 * width + 1), dtype=np.complex128)
    ks = np.arange(1, band + 1)
    harm = _single_harmonic(u)
    if harm is not None:
        c0, big_k, amp, phi = harm
        for i, k in enumerate(ks):
            shift = np.exp(-1j * k * dt * c0)
            if big_k == 0 or amp == 0:
                out[i, width] = shift
                continue
            spec = jacobi_anger_exp(-k * dt * amp, big_k, phi)
            sel = np.abs(spec.l) <= width
            out[i, spec.l[sel] + width] = shift * spec.c[sel]
        return out
    cmax = band * dt * float(np.sum(np.abs(u.c)))
    # Jacobi-Anger tails beyond order cmax + 24 are below 1e-17
    spread = u.max_freq * (int(math.ceil(cmax)) + 24)
    m = sfft.next_fast_len(oversample * (2 * (width + spread) + 1))
    y = TWO_PI * np.arange(m) / m
    uy = u.evaluate(y).real
    phase = np.exp(-1j * dt * np.multiply.outer(ks, uy))
    coeffs = sfft.fft(phase, axis=1) / m
    lidx = np.arange(-width, width + 1)
    out[:, :] = coeffs[:, lidx % m]
    return out


class ShearPropagator:
    """Precomputed advection sub-step for a fixed ``(U, dt)`` at a given band."""

    def __init__(self, u: YSpectrum, dt: float, band: int, oversample: int = 2):
        self.band = band
        self.grid = sfft.next_fast_len(max(oversample * (2 * band + 1), 4 * band + 1))
        phi = phase_spectra(u, dt, band, oversample)
        padded = np.zeros((band, self.grid), dtype=np.complex128)
        lidx = np.arange(-2 * band, 2 * band + 1)
        padded[:, lidx % self.grid] = phi
        # values of the band-limited phase on the product grid
        self.phase_grid = sfft.ifft(padded, axis=1) * self.grid
        self.cols = np.arange(-band, band + 1) % self.grid
        self.trivial = bool(np.all(phi[:, 2 * band] == 1) and
                            np.count_nonzero(phi) == band)

    def _rows(self, half: np.ndarray, lo: int, hi: int) -> np.ndarray:
        padded = np.zeros((hi - lo, self.grid), dtype=np.complex128)
        padded[:, self.cols] = half[lo + 1:hi + 1]
        prod = sfft.ifft(padded, axis=1) * self.phase_grid[lo:hi]
        return sfft.fft(prod, axis=1)[:, self.cols]

    def apply(self, half: np.ndarray, pool: Optional[ThreadPoolExecutor] = None) -> np.ndarray:
        """Return the advected copy of a half-plane array; row ``kx = 0`` is untouched."""
        if self.trivial:
            return half.copy()
        out = half.copy()
        chunks = [(lo, min(lo + ROW_CHUNK, self.band)) for lo in range(0, self.band, ROW_CHUNK)]
        if pool is None:
            results = [self._rows(half, lo, hi) for lo, hi in chunks]
        else:
            results = list(pool.map(lambda c: self._rows(half, *c), chunks))
        for (lo, hi), res in zip(chunks, results):
            out[lo + 1:hi + 1] = res
        return out


# ---------------------------------------------------------------------------
# Public sub-steps
# ---------------------------------------------------------------------------


def diffusion_step(field: SpectralField2D, mu: float, dt: float) -> SpectralField2D:
    """Exact heat semigroup: every amplitude times ``exp(-mu |k|^2 dt)``."""
    if dt < 0 or mu < 0:
        raise ValueError("mu and dt must be nonnegative")
    factor = np.exp(-mu * field.k2.astype(float) * dt)
    return SpectralField2D(field.kx, field.ky, field.amp * factor, field.band,
                           field.err_budget, _checked=False)


def _guarded(half: np.ndarray, cfg: SolverConfig, what: str) -> None:
    frac = tail_fraction(half, cfg.band)
    if frac > cfg.tail_tol:
        raise TailOverflow(f"{what}: tail mass fraction {frac:.3e} exceeds {cfg.tail_tol:.1e}")


def _advect_half(half: np.ndarray, prop: ShearPropagator, mult: np.ndarray,
                 pool=None) -> tuple[np.ndarray, float]:
    before = float(np.sum(_half_mass(half, mult)))
    out = prop.apply(half, pool)
    lost = before - float(np.sum(_half_mass(out, mult)))
    return out, TWO_PI**2 * max(lost, 0.0)


def advection_step_steady(field: SpectralField2D, u: YSpectrum, dt: float,
                          cfg: SolverConfig) -> SpectralField2D:
    """Exact transport by the steady shear ``u`` for ``dt``, projected onto the band."""
    half = field.to_half_dense(cfg.band)
    _, mult, _ = _half_grids(cfg.band)
    prop = ShearPropagator(u, dt, cfg.band, cfg.oversample)
    out, lost = _advect_half(half, prop, mult)
    _guarded(out, cfg, "advection_step_steady")
    return SpectralField2D.from_half_dense(out, cfg.band, field.err_budget + lost)


def strang_step(field: SpectralField2D, u: YSpectrum, mu: float, dt: float,
                cfg: SolverConfig) -> SpectralField2D:
    half_step = diffusion_step(field.with_band(cfg.band), mu, dt / 2)
    moved = advection_step_steady(half_step, u, dt, cfg)
    return diffusion_step(moved, mu, dt / 2)


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------


def _norm_row(t: float, half: np.ndarray, k2: np.ndarray, mult: np.ndarray,
              err: float) -> NormRow:
    mass = _half_mass(half, mult).ravel()
    k2f = k2.ravel()
    nz = k2f > 0
    l2 = math.sqrt(sobolev_sq(k2f, mass, 0.0))
    h1 = math.sqrt(sobolev_sq(k2f, mass, 1.0))
    hm1 = math.sqrt(sobolev_sq(k2f[nz], mass[nz], -1.0))
    return NormRow(t, math.log(l2), math.log(h1), math.log(hm1), hm1 / l2, h1 / l2, err)


def segment_steps(duration: float, dt: float) -> int:
    """Number of equal steps covering a segment without exceeding ``dt``."""
    return max(1, int(math.ceil(duration / dt * (1 - 1e-12))))


def evolve(field: SpectralField2D, profile: ShearProfile, cfg: SolverConfig,
           sample_every: int = 10, t0: float = 0.0,
           series: Optional[NormSeries] = None) -> tuple[SpectralField2D, NormSeries]:
    """Step through every segment of ``profile`` and record a norm ledger.

    Each segment of length ``d`` is cut into ``ceil(d / dt)`` equal steps so
    that no step straddles a switching time.
    """
    if cfg.dt > min(s.duration for s in profile.segments) * (1 + 1e-12):
        raise ValueError("dt exceeds the shortest profile segment")
    if field.mean != 0:
        raise ValueError("initial field must be mean-zero")
    band = cfg.band
    half = field.to_half_dense(band)
    if tail_fraction(half, band) > cfg.tail_tol:
        raise TailOverflow("initial field violates tail_tol at this band", field, series, t0)
    k2, mult, _ = _half_grids(band)
    err = field.err_budget
    if series is None:
        series = NormSeries(meta={"experiment": "viscous", "mu": cfg.mu, "band": band})
        series.append(_norm_row(t0, half, k2, mult, err))
    workers = cfg.workers()
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    props: dict = {}
    step_count = 0
    t = t0
    bounds = profile.boundaries()
    try:
        for seg, start in zip(profile.segments, bounds[:-1]):
            n = segment_steps(seg.duration, cfg.dt)
            h = seg.duration / n
            key = (seg.u.l.tobytes(), seg.u.c.tobytes(), h)
            if key not in props:
                props[key] = ShearPropagator(seg.u, h, band, cfg.oversample)
            prop = props[key]
            decay = np.exp(-cfg.mu * k2 * (h / 2))
            for i in range(n):
                half = half * decay
                half, lost = _advect_half(half, prop, mult, pool)
                half = half * decay
                err += lost
                step_count += 1
                t = t0 + start + (i + 1) * h
                if tail_fraction(half, band) > cfg.tail_tol:
                    raise TailOverflow(
                        f"tail mass fraction exceeds {cfg.tail_tol:.1e} at t={t:.6g}",
                        SpectralField2D.from_half_dense(half, band, err), series, t)
                last = seg is profile.segments[-1] and i == n - 1
                if step_count % sample_every == 0 or last:
                    series.append(_norm_row(t, half, k2, mult, err))
    finally:
        if pool is not None:
            pool.shutdown()
    return SpectralField2D.from_half_dense(half, band, err), series


# ---------------------------------------------------------------------------
# Couette contrast
# ---------------------------------------------------------------------------


def couette_mode_decay(k: int, eta: float, mu: float, t: float) -> float:
    """Amplitude factor of a Kelvin mode of Couette flow ``U = y`` on T x R.

    The wavevector tilts as ``(k, eta - k t)``, so the factor is
    ``exp(-mu (k^2 t + eta^2 t - eta k t^2 + k^2 t^3 / 3))``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.exp(-mu * (k * k * t + eta * eta * t - eta * k * t * t + k * k * t**3 / 3.0))


def couette_series(modes, mu: float, t_end: float, n_samples: int = 400) -> NormSeries:
    """Norm ledger for a sum of Kelvin modes ``[(k, eta) or (k, eta, weight), ...]``.

    ``grad_ratio`` and ``mix_scale`` use the tilted wavevectors; the modes
    are orthogonal, so squared norms add.  Norms are relative to ``t = 0``.
    """
    full = [(int(m[0]), float(m[1]), float(m[2]) if len(m) > 2 else 1.0) for m in modes]
    modes = [(k, eta) for k, eta, _ in full]
    w2 = np.array([w * w for _, _, w in full])
    series = NormSeries(meta={"experiment": "couette", "mu": mu})
    l2_0 = math.sqrt(float(w2.sum()))
    for t in np.linspace(0.0, t_end, n_samples + 1):
        t = float(t)
        amp2 = w2 * np.array([couette_mode_decay(k, eta, mu, t) ** 2 for k, eta in modes])
        kk = np.array([k * k + (eta - k * t) ** 2 for k, eta in modes])
        l2 = math.sqrt(float(amp2.sum()))
        h1 = math.sqrt(float(np.dot(amp2, 1.0 + kk)))
        pos = kk > 0
        hm1 = math.sqrt(float(np.dot(amp2[pos], 1.0 / kk[pos]))) if np.any(pos) else None
        series.append(NormRow(t, math.log(l2 / l2_0), math.log(h1 / l2_0),
                              None if hm1 is None else math.log(hm1 / l2_0),
                              None if hm1 is None else hm1 / l2, h1 / l2))
    return series
