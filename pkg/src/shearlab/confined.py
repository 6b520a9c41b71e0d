"""One-dimensional confined model ``d_t m = d_zz m - (1/4 + e^{|z|}) m``.

The weight ``l = m e^{-z/2}`` turns the drift-diffusion problem for ``l`` into
the symmetric operator ``L = -d_zz + 1/4 + e^{|z|}``.  The real line is cut to
``[-L, L]`` with Dirichlet ends and discretised with second-order finite
differences on an odd grid so that ``z = 0`` is a node and parity is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal, solve_banded

from .diagnostics import NormRow, NormSeries

POTENTIALS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "exp_abs": lambda z: 0.25 + np.exp(np.abs(z)),
    "harmonic": lambda z: z * z,
}
LINEAR_TOL = 0.01


class WeightOverflow(ArithmeticError):
    pass


class ConvergenceFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid1D:
    half_width: float = 12.0
    n_points: int = 2401

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.n_points < 5 or self.n_points % 2 == 0:
            raise ValueError("n_points must be odd and at least 5")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def z(self) -> np.ndarray:
        c = (self.n_points - 1) // 2
        return (np.arange(self.n_points) - c) * self.spacing

    @property
    def centre(self) -> int:
        return (self.n_points - 1) // 2

    def refined(self) -> "Grid1D":
        """Second grid for truncation checks: wider box, spacing roughly halved."""
        return Grid1D(self.half_width + 2.0, 2 * self.n_points - 1)


@dataclass(frozen=True)
class Profile1D:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError("profile length does not match the grid")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid1D, func) -> "Profile1D":
        return cls(grid, func(grid.z))

    def norm(self, mask: np.ndarray | None = None) -> float:
        v = self.values if mask is None else self.values[mask]
        return math.sqrt(self.grid.spacing * float(np.dot(v, v)))


@dataclass(frozen=True)
class Operator1D:
    """``-d_zz + V`` on the interior nodes with Dirichlet ends."""

    grid: Grid1D
    potential_id: str = "exp_abs"

    def __post_init__(self):
        if self.potential_id not in POTENTIALS:
            raise ValueError(f"unknown potential {self.potential_id!r}")

    @property
    def potential(self) -> np.ndarray:
        return POTENTIALS[self.potential_id](self.grid.z)

    @property
    def diag(self) -> np.ndarray:
        h = self.grid.spacing
        return 2.0 / h**2 + self.potential

    @property
    def offdiag(self) -> float:
        return -1.0 / self.grid.spacing**2

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        d = self.diag
        out[1:-1] = d[1:-1] * v[1:-1] + self.offdiag * (v[:-2] + v[2:])
        return out


def substitute(l0: Profile1D) -> Profile1D:
    """``m_0 = l_0 e^{z/2}``."""
    with np.errstate(over="ignore", invalid="ignore"):
        m = l0.values * np.exp(0.5 * l0.grid.z)
    if not np.all(np.isfinite(m)):
        bad = int(np.argmax(~np.isfinite(m)))
        raise WeightOverflow(f"l0 * exp(z/2) is not finite at z = {l0.grid.z[bad]:.6g}")
    return Profile1D(l0.grid, m)


def unsubstitute(m: Profile1D) -> Profile1D:
    return Profile1D(m.grid, m.values * np.exp(-0.5 * m.grid.z))


def parity_split(m: Profile1D) -> tuple[Profile1D, Profile1D]:
    v = m.values
    r = v[::-1]
    even = 0.5 * (v + r)
    odd = v - even
    return Profile1D(m.grid, even), Profile1D(m.grid, odd)


def _folded(op: Operator1D, parity: str) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric tridiagonal problem on the half line ``z >= 0``.

    Even sector: unknowns at ``z = 0, h, ..., L - h`` with the mirror node
    ``u_{-1} = u_1`` folded in; the first off-diagonal entry becomes
    ``-sqrt(2)/h^2`` with the unknown ``w_0 = u_0 / sqrt(2)``.  Odd sector:
    unknowns at ``z = h, ..., L - h`` with ``u_0 = 0``.
    """
    c = op.grid.centre
    n = op.grid.n_points
    d_full = op.diag
    off = op.offdiag
    if parity == "even":
        d = d_full[c:n - 1].copy()
        e = np.full(d.size - 1, off)
        e[0] = math.sqrt(2.0) * off
    elif parity == "odd":
        d = d_full[c + 1:n - 1].copy()
        e = np.full(d.size - 1, off)
    else:
        raise ValueError("parity must be 'even' or 'odd'")
    return d, e


def _unfold(op: Operator1D, parity: str, w: np.ndarray) -> np.ndarray:
    c = op.grid.centre
    n = op.grid.n_points
    full = np.zeros(n)
    if parity == "even":
        half = w.copy()
        half[0] *= math.sqrt(2.0)
        full[c:n - 1] = half
        full[1:c] = half[1:][::-1]
    else:
        full[c + 1:n - 1] = w
        full[1:c] = -w[::-1]
    return full


def lowest_eigenpairs(op: Operator1D, parity: str = "even",
                      count: int = 1) -> list[tuple[float, Profile1D]]:
    """Lowest ``count`` eigenpairs in one parity sector, ascending.

    Eigenvectors are normalised to unit discrete L^2 norm on the full grid,
    with a positive value at ``z = 0`` (even) or at ``z = h`` (odd).
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    d, e = _folded(op, parity)
    if count > d.size:
        raise ValueError("count exceeds the sector dimension")
    try:
        lam, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1),
                                     lapack_driver="stebz")
    except LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if not np.all(np.isfinite(lam)) or not np.all(np.isfinite(vecs)):
        raise ConvergenceFailure("tridiagonal eigensolver returned non-finite values")
    out = []
    c = op.grid.centre
    for j in range(count):
        full = _unfold(op, parity, vecs[:, j])
        prof = Profile1D(op.grid, full)
        full = full / prof.norm()
        ref = full[c] if parity == "even" else full[c + 1]
        if ref < 0:
            full = -full
        out.append((float(lam[j]), Profile1D(op.grid, full)))
    return out


def sturm_count(op: Operator1D, parity: str, x: float) -> int:
    """Number of eigenvalues of the folded sector matrix below ``x``."""
    d, e = _folded(op, parity)
    count = 0
    q = d[0] - x
    count += q < 0
    for i in range(1, d.size):
        if q == 0:
            q = 1e-300
        q = d[i] - x - e[i - 1] ** 2 / q
        count += q < 0
    return int(count)


def _banded(op: Operator1D, scale: float, sign: float) -> np.ndarray:
    """Banded ``I + sign * scale * A`` on interior nodes for ``solve_banded``."""
    d = op.diag[1:-1]
    ab = np.zeros((3, d.size))
    ab[0, 1:] = sign * scale * op.offdiag
    ab[1, :] = 1.0 + sign * scale * d
    ab[2, :-1] = sign * scale * op.offdiag
    return ab


def cn_steps(T: float, dt: float) -> tuple[int, float]:
    n = max(1, int(math.ceil(T / dt * (1 - 1e-12))))
    return n, T / n


def evolve_m(m0: Profile1D, op: Operator1D, T: float, dt: float,
             readout: Callable[[np.ndarray], float] | None = None,
             t0: float = 0.0, series: NormSeries | None = None) -> tuple[Profile1D, NormSeries]:
    """Crank-Nicolson for ``d_t m = -L m``; ``dt`` is shrunk so that it divides ``T``.

    ``readout`` maps the node values to the recorded norm (default: discrete
    L^2 norm of ``m``).  With ``series`` given, rows are appended to it at
    times ``t0 + ...``.
    """
    if not dt > 0 or T < dt * (1 - 1e-12):
        raise ValueError("need dt > 0 and T >= dt")
    if m0.grid != op.grid:
        raise ValueError("profile and operator live on different grids")
    n, h = cn_steps(T, dt)
    grid = op.grid
    read = readout or (lambda v: Profile1D(grid, v).norm())
    lhs = _banded(op, 0.5 * h, 1.0)
    d = op.diag[1:-1]
    off = op.offdiag
    v = m0.values.copy()
    v[0] = v[-1] = 0.0
    fresh = series is None
    if fresh:
        series = NormSeries(meta={"experiment": "model-1d"})

    def record(t, vals):
        r = read(vals)
        if r > 0:
            series.append(NormRow(t, math.log(r)))

    if fresh:
        record(t0, v)
    for i in range(n):
        inner = v[1:-1]
        rhs = inner - 0.5 * h * (d * inner + off * (v[:-2] + v[2:]))
        v = np.concatenate(([0.0], solve_banded((1, 1), lhs, rhs), [0.0]))
        record(t0 + (i + 1) * h, v)
    return Profile1D(grid, v), series


def half_line_readout(grid: Grid1D) -> Callable[[np.ndarray], float]:
    """``|| m e^{-z/2} ||`` restricted to ``z <= 0``, a lower bound for ``||l||``."""
    z = grid.z
    mask = z <= 0
    w = np.exp(-0.5 * z[mask])
    h = grid.spacing

    def read(v: np.ndarray) -> float:
        u = v[mask] * w
        return math.sqrt(h * float(np.dot(u, u)))

    return read


@dataclass(frozen=True)
class WitnessFit:
    rate: float
    slope: float
    curvature: float
    linear: bool


def linear_fit(series: NormSeries, linear_tol: float = LINEAR_TOL) -> WitnessFit:
    t = series.t
    y = series.column("log_l2")
    mask = t >= t[0] + 0.5 * (t[-1] - t[0])
    s = t[mask] - 0.5 * (t[mask][0] + t[mask][-1])
    curv, slope, _ = np.polyfit(s, y[mask], 2)
    return WitnessFit(-float(slope), float(slope), float(curv),
                      bool(abs(curv) < linear_tol * abs(slope)))


def lower_bound_witness(l0: Profile1D, op: Operator1D, T: float,
                        dt: float) -> tuple[float, NormSeries]:
    """Evolve ``m_0 = l_0 e^{z/2}`` and fit the decay of ``||l||`` on ``z <= 0``.

    Returns the fitted exponential rate over the last half of the run.  The
    series ``meta`` carries the slope, curvature and the verdict
    ``linear`` (``|curvature| < 0.01 |slope|``).
    """
    m0 = substitute(l0)
    _, series = evolve_m(m0, op, T, dt, readout=half_line_readout(op.grid))
    fit = linear_fit(series)
    series.meta.update({"experiment": "model-1d-witness", "rate": fit.rate,
                        "slope": fit.slope, "curvature": fit.curvature, "linear": fit.linear})
    return fit.rate, series
