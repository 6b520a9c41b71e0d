"""Sparse Fourier representation of mean-zero scalars on the torus [-pi, pi]^2.

All norms are physical integral norms, e.g. ``norm_l2(rho)**2 = int |rho|^2``
over the torus, which equals ``(2 pi)^2 sum |a_k|^2`` by Parseval.  Positive
Sobolev indices use the inhomogeneous weight ``(1 + |k|^2)^s``; negative
indices use the homogeneous weight ``|k|^(2 s)`` (meaningful for mean-zero
data only).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi
PRUNE_THRESHOLD = 1e-300


class MeanNotZero(ValueError):
    """A negative Sobolev norm was requested for a field with a (0, 0) mode."""


class Wavevector(NamedTuple):
    kx: int
    ky: int

    @property
    def norm2(self) -> int:
        return self.kx * self.kx + self.ky * self.ky


# ---------------------------------------------------------------------------
# Functions of y alone
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class YSpectrum:
    """Fourier series ``sum_l c_l exp(i l y)`` stored as sorted index/coeff arrays."""

    l: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        l = np.asarray(self.l, dtype=np.int64).ravel()
        c = np.asarray(self.c, dtype=np.complex128).ravel()
        if l.shape != c.shape:
            raise ValueError("index and coefficient arrays differ in length")
        if l.size and np.any(np.diff(l) <= 0):
            order = np.argsort(l, kind="stable")
            l, c = l[order], c[order]
            if np.any(np.diff(l) == 0):
                raise ValueError("duplicate y-frequencies")
        keep = c != 0
        l, c = l[keep], c[keep]
        l.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "c", c)

    # constructors ---------------------------------------------------------
    @classmethod
    def from_dict(cls, coeffs: Mapping[int, complex]) -> "YSpectrum":
        items = sorted((int(k), complex(v)) for k, v in coeffs.items())
        if not items:
            return cls.zero()
        l, c = zip(*items)
        return cls(np.array(l), np.array(c))

    @classmethod
    def zero(cls) -> "YSpectrum":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.complex128))

    @classmethod
    def constant(cls, value: float) -> "YSpectrum":
        return cls.from_dict({0: value})

    @classmethod
    def sin(cls, k: int, amp: float = 1.0) -> "YSpectrum":
        """``amp * sin(k y)``."""
        if k == 0:
            return cls.zero()
        return cls.from_dict({k: -0.5j * amp, -k: 0.5j * amp})

    @classmethod
    def cos(cls, k: int, amp: float = 1.0) -> "YSpectrum":
        """``amp * cos(k y)``."""
        if k == 0:
            return cls.constant(amp)
        return cls.from_dict({k: 0.5 * amp, -k: 0.5 * amp})

    # views ------------------------------------------------------------------
    def to_dict(self) -> dict[int, complex]:
        return {int(k): complex(v) for k, v in zip(self.l, self.c)}

    def __len__(self) -> int:
        return int(self.l.size)

    @property
    def max_freq(self) -> int:
        return int(np.max(np.abs(self.l))) if self.l.size else 0

    def coeff(self, k: int) -> complex:
        i = np.searchsorted(self.l, k)
        if i < self.l.size and self.l[i] == k:
            return complex(self.c[i])
        return 0j

    def is_real(self, tol: float = 0.0) -> bool:
        """Hermitian symmetry ``c_{-l} = conj(c_l)``."""
        mirror = YSpectrum(-self.l[::-1], np.conj(self.c[::-1]))
        if not np.array_equal(mirror.l, self.l):
            return False
        return bool(np.all(np.abs(mirror.c - self.c) <= tol))

    # algebra ----------------------------------------------------------------
    def __add__(self, other: "YSpectrum") -> "YSpectrum":
        return _combine(self, other, 1.0)

    def __sub__(self, other: "YSpectrum") -> "YSpectrum":
        return _combine(self, other, -1.0)

    def __neg__(self) -> "YSpectrum":
        return YSpectrum(self.l, -self.c)

    def scale(self, factor: complex) -> "YSpectrum":
        return YSpectrum(self.l, self.c * factor)

    def derivative(self) -> "YSpectrum":
        return YSpectrum(self.l, 1j * self.l * self.c)

    def convolve(self, other: "YSpectrum") -> "YSpectrum":
        """Spectrum of the pointwise product of the two functions."""
        if not len(self) or not len(other):
            return YSpectrum.zero()
        idx = np.add.outer(self.l, other.l).ravel()
        vals = np.multiply.outer(self.c, other.c).ravel()
        uniq, inv = np.unique(idx, return_inverse=True)
        re = np.bincount(inv, weights=vals.real, minlength=uniq.size)
        im = np.bincount(inv, weights=vals.imag, minlength=uniq.size)
        return YSpectrum(uniq, re + 1j * im)

    def l2_sq(self) -> float:
        """``int_{-pi}^{pi} |f|^2 dy``."""
        return TWO_PI * float(np.sum(np.abs(self.c) ** 2))

    def evaluate(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.exp(1j * np.multiply.outer(y, self.l)) @ self.c

    def __repr__(self) -> str:
        return f"YSpectrum({self.to_dict()!r})"


def _combine(a: YSpectrum, b: YSpectrum, sign: float) -> YSpectrum:
    idx = np.concatenate([a.l, b.l])
    vals = np.concatenate([a.c, sign * b.c])
    if not idx.size:
        return YSpectrum.zero()
    uniq, inv = np.unique(idx, return_inverse=True)
    re = np.bincount(inv, weights=vals.real, minlength=uniq.size)
    im = np.bincount(inv, weights=vals.imag, minlength=uniq.size)
    return YSpectrum(uniq, re + 1j * im)


def inner_y(p: YSpectrum, q: YSpectrum) -> complex:
    """``int_{-pi}^{pi} p(y) conj(q(y)) dy`` by Parseval."""
    common, ip, iq = np.intersect1d(p.l, q.l, assume_unique=True, return_indices=True)
    return TWO_PI * complex(np.sum(p.c[ip] * np.conj(q.c[iq])))


# ---------------------------------------------------------------------------
# Fields on the 2-torus
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralField2D:
    """Real scalar on T^2 as a Hermitian-symmetric sparse map of Fourier amplitudes.

    Modes are kept sorted by ``(kx, ky)`` so that every reduction runs in a
    fixed order.  Amplitudes below ``PRUNE_THRESHOLD`` are dropped and their
    L^2 mass (squared physical norm) is added to ``err_budget``.
    """

    kx: np.ndarray
    ky: np.ndarray
    amp: np.ndarray
    band: int
    err_budget: float = 0.0
    _checked: bool = field(default=True, repr=False)

    def __post_init__(self):
        kx = np.asarray(self.kx, dtype=np.int64).ravel()
        ky = np.asarray(self.ky, dtype=np.int64).ravel()
        amp = np.asarray(self.amp, dtype=np.complex128).ravel()
        if not (kx.shape == ky.shape == amp.shape):
            raise ValueError("mode arrays differ in length")
        order = np.lexsort((ky, kx))
        kx, ky, amp = kx[order], ky[order], amp[order]
        small = np.abs(amp) < PRUNE_THRESHOLD
        dropped = float(np.sum(np.abs(amp[small]) ** 2)) * TWO_PI**2
        kx, ky, amp = kx[~small], ky[~small], amp[~small]
        if kx.size:
            if np.any((np.diff(kx) == 0) & (np.diff(ky) == 0)):
                raise ValueError("duplicate wavevectors")
            if int(np.max(np.abs(kx))) > self.band or int(np.max(np.abs(ky))) > self.band:
                raise ValueError(f"mode outside truncation band {self.band}")
        for a in (kx, ky, amp):
            a.setflags(write=False)
        object.__setattr__(self, "kx", kx)
        object.__setattr__(self, "ky", ky)
        object.__setattr__(self, "amp", amp)
        object.__setattr__(self, "err_budget", float(self.err_budget) + dropped)
        if self._checked and not self.is_hermitian():
            raise ValueError("amplitudes are not Hermitian-symmetric (field is not real)")

    # constructors -------------------------------------------------------------
    @classmethod
    def from_modes(cls, modes: Mapping[tuple[int, int], complex], band: int | None = None,
                   err_budget: float = 0.0) -> "SpectralField2D":
        items = [(int(k[0]), int(k[1]), complex(v)) for k, v in modes.items()]
        if band is None:
            band = max([max(abs(a), abs(b)) for a, b, _ in items], default=0)
        if not items:
            return cls.zero(band)
        kx, ky, amp = zip(*items)
        return cls(np.array(kx), np.array(ky), np.array(amp), band, err_budget)

    @classmethod
    def zero(cls, band: int = 0) -> "SpectralField2D":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.complex128), band)

    @classmethod
    def from_half_dense(cls, half: np.ndarray, band: int, err_budget: float = 0.0) -> "SpectralField2D":
        """Build from rows ``kx = 0..B`` by columns ``ky = -B..B``; mirrors kx < 0."""
        b = band
        kx_g, ky_g = np.meshgrid(np.arange(b + 1), np.arange(-b, b + 1), indexing="ij")
        pos = kx_g > 0
        zero_row = (kx_g == 0) & (ky_g != 0)
        sel = pos | zero_row
        kx = kx_g[sel]
        ky = ky_g[sel]
        amp = half[sel]
        mpos = pos[sel]
        kx = np.concatenate([kx, -kx[mpos]])
        ky = np.concatenate([ky, -ky[mpos]])
        amp = np.concatenate([amp, np.conj(amp[mpos])])
        return cls(kx, ky, amp, b, err_budget, _checked=False)

    # views ---------------------------------------------------------------------
    @property
    def modes(self) -> dict[Wavevector, complex]:
        return {Wavevector(int(a), int(b)): complex(c) for a, b, c in zip(self.kx, self.ky, self.amp)}

    def __len__(self) -> int:
        return int(self.amp.size)

    def amplitude(self, kx: int, ky: int) -> complex:
        hit = np.nonzero((self.kx == kx) & (self.ky == ky))[0]
        return complex(self.amp[hit[0]]) if hit.size else 0j

    @property
    def k2(self) -> np.ndarray:
        return self.kx * self.kx + self.ky * self.ky

    def is_hermitian(self) -> bool:
        if not self.amp.size:
            return True
        order = np.lexsort((-self.ky, -self.kx))
        return bool(
            np.array_equal(-self.kx[order], self.kx)
            and np.array_equal(-self.ky[order], self.ky)
            and np.array_equal(np.conj(self.amp[order]), self.amp)
        )

    @property
    def mean(self) -> complex:
        return self.amplitude(0, 0)

    def is_mean_zero(self) -> bool:
        return self.mean == 0

    def to_half_dense(self, band: int | None = None) -> np.ndarray:
        b = self.band if band is None else band
        half = np.zeros((b + 1, 2 * b + 1), dtype=np.complex128)
        sel = self.kx >= 0
        if np.any(np.abs(self.kx[sel]) > b) or np.any(np.abs(self.ky[sel]) > b):
            raise ValueError("field does not fit in the requested band")
        half[self.kx[sel], self.ky[sel] + b] = self.amp[sel]
        return half

    def with_band(self, band: int) -> "SpectralField2D":
        return SpectralField2D(self.kx, self.ky, self.amp, band, self.err_budget, _checked=False)

    def scale(self, factor: float) -> "SpectralField2D":
        return SpectralField2D(self.kx, self.ky, self.amp * factor, self.band,
                               self.err_budget * factor**2, _checked=False)

    def evaluate(self, x, y) -> np.ndarray:
        """Physical values on broadcastable coordinate arrays (for quadrature checks)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape, dtype=np.complex128)
        for a, b, c in zip(self.kx, self.ky, self.amp):
            out += c * np.exp(1j * (a * x + b * y))
        return out.real

    def __repr__(self) -> str:
        return f"SpectralField2D(band={self.band}, modes={len(self)}, err_budget={self.err_budget:g})"


# ---------------------------------------------------------------------------
# Norm functionals
# ---------------------------------------------------------------------------


def sobolev_sq(k2: np.ndarray, mass: np.ndarray, s: float) -> float:
    """``(2 pi)^2 sum w_s(k) mass_k`` with ``mass_k = |a_k|^2`` in a fixed order."""
    if s == 0:
        w = 1.0
    elif s > 0:
        w = (1.0 + k2.astype(float)) ** s
    else:
        w = k2.astype(float) ** s
    return TWO_PI**2 * float(np.sum(w * mass))


def norm_l2(field: SpectralField2D) -> float:
    return math.sqrt(sobolev_sq(field.k2, np.abs(field.amp) ** 2, 0.0))


def norm_sobolev(field: SpectralField2D, s: float) -> float:
    if s < 0 and field.mean != 0:
        raise MeanNotZero("negative Sobolev norm of a field with nonzero mean")
    k2 = field.k2
    mass = np.abs(field.amp) ** 2
    if s < 0:
        keep = k2 > 0
        k2, mass = k2[keep], mass[keep]
    return math.sqrt(sobolev_sq(k2, mass, s))


def mixing_scale(field: SpectralField2D) -> float:
    """``||rho||_{H^-1} / ||rho||_{L^2}``."""
    l2 = norm_l2(field)
    if l2 == 0:
        raise ValueError("mixing scale of the zero field is undefined")
    return norm_sobolev(field, -1) / l2


# ---------------------------------------------------------------------------
# Single x-mode data  f(y) sin x + g(y) cos x
# ---------------------------------------------------------------------------


def single_xmode_assemble(f: YSpectrum, g: YSpectrum, band: int | None = None) -> SpectralField2D:
    """Field ``f(y) sin x + g(y) cos x`` for real ``f`` and ``g``."""
    h = g - f.scale(1j)
    a_plus = h.scale(0.5)  # a_{(1,l)} = (g_l - i f_l) / 2
    if not len(a_plus):
        return SpectralField2D.zero(band or 1)
    kx = np.concatenate([np.ones(a_plus.l.size, np.int64), -np.ones(a_plus.l.size, np.int64)])
    ky = np.concatenate([a_plus.l, -a_plus.l])
    amp = np.concatenate([a_plus.c, np.conj(a_plus.c)])
    if band is None:
        band = max(1, a_plus.max_freq)
    return SpectralField2D(kx, ky, amp, band, _checked=False)


def h1_single_xmode(f: YSpectrum, g: YSpectrum) -> float:
    """H^1 norm of ``f sin x + g cos x`` via ``2pi|f|^2 + 2pi|g|^2 + pi|f'|^2 + pi|g'|^2``."""
    total = (TWO_PI * (f.l2_sq() + g.l2_sq())
             + math.pi * (f.derivative().l2_sq() + g.derivative().l2_sq()))
    return math.sqrt(total)


def random_field(rng: np.random.Generator, band: int, n_modes: int, decay: float = 1.0) -> SpectralField2D:
    """Random real mean-zero field with ``n_modes`` conjugate pairs inside ``band``."""
    modes: dict[tuple[int, int], complex] = {}
    while len(modes) < 2 * n_modes:
        kx, ky = (int(v) for v in rng.integers(-band, band + 1, size=2))
        if (kx, ky) == (0, 0) or (kx, ky) in modes:
            continue
        a = complex(rng.normal(), rng.normal()) / (1.0 + kx * kx + ky * ky) ** (decay / 2)
        modes[(kx, ky)] = a
        modes[(-kx, -ky)] = a.conjugate()
    return SpectralField2D.from_modes(modes, band=band)


def iter_modes(field: SpectralField2D) -> Iterable[tuple[int, int, complex]]:
    return zip(field.kx.tolist(), field.ky.tolist(), field.amp.tolist())
