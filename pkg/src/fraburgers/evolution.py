r"""Time integration of the forced fractal Burgers equation.

Two problems share one stepper:

* the viscosity-regularized nonlinear equation
  :math:`u_t + u u_x + \Lambda^\alpha u = f + \nu u_{xx}`;
* the frozen-coefficient linear equation
  :math:`u_t + \tfrac12 (V u)_x + \Lambda^\alpha u = 0`.

The stiff linear part :math:`\mathcal{L} = |k|^\alpha + \nu k^2` is treated
exactly through exponential time differencing (ETDRK2, Cox & Matthews 2002)::

    a       = e^{-hL} u_n + h phi1(-hL) N(u_n, t_n)
    u_{n+1} = a + h phi2(-hL) (N(a, t_n + h) - N(u_n, t_n))

Any u with L u = N(u) is reproduced exactly by this map, so discrete steady
states are fixed points of the discrete flow.  The flux is dealiased with the
two-thirds rule, which makes the scheme an exact Fourier-Galerkin projection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Union

import numpy as np

from .errors import BlowUpError, CFLViolation, ContractViolation, MeanNotZero
from .spectral import (
    Grid,
    Params,
    RealField,
    Spectrum,
    hermitian_defect,
    is_mean_zero,
    sobolev_norm,
    x_norm,
    inverse,
)

Forcing = Union[Spectrum, Callable[[float], Spectrum], None]

CFL_NUMBER = 0.5
LEDGER_RTOL = 1e-6


def phi_functions(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """phi1(z) = (e^z - 1)/z and phi2(z) = (e^z - 1 - z)/z^2, stable near 0."""
    z = np.asarray(z, dtype=float)
    phi1 = np.empty_like(z)
    phi2 = np.empty_like(z)
    small = np.abs(z) < 1e-2
    zs = z[small]
    # Taylor tails to 1e-2**6 / 720 ~ 1e-15.
    phi1[small] = 1 + zs / 2 + zs**2 / 6 + zs**3 / 24 + zs**4 / 120 + zs**5 / 720
    phi2[small] = 0.5 + zs / 6 + zs**2 / 24 + zs**3 / 120 + zs**4 / 720 + zs**5 / 5040
    zl = z[~small]
    em1 = np.expm1(zl)
    phi1[~small] = em1 / zl
    phi2[~small] = (em1 - zl) / zl**2
    return phi1, phi2


def linear_symbol(grid: Grid, alpha: float, nu: float) -> np.ndarray:
    return grid.abs_k**alpha + nu * grid.k**2


class _ETD2:
    """Precomputed ETDRK2 multipliers for one (grid, alpha, nu, dt)."""

    def __init__(self, grid: Grid, alpha: float, nu: float, dt: float):
        self.grid = grid
        self.dt = dt
        self.symbol = linear_symbol(grid, alpha, nu)
        z = -dt * self.symbol
        self.E = np.exp(z)
        phi1, phi2 = phi_functions(z)
        self.h_phi1 = dt * phi1
        self.h_phi2 = dt * phi2

    def admissible_dt(self, speed: float) -> float:
        return CFL_NUMBER * self.grid.dx / max(1.0, speed)

    def advance(self, c, t, nonlinear):
        """One step; ``nonlinear(c, t)`` returns (N coefficients, advecting speed)."""
        n0, speed = nonlinear(c, t)
        limit = self.admissible_dt(speed)
        if self.dt > limit * (1 + 1e-12):
            raise CFLViolation(self.dt, limit)
        a = self.E * c + self.h_phi1 * n0
        n1, _ = nonlinear(a, t + self.dt)
        return a + self.h_phi2 * (n1 - n0)


def _burgers_flux(grid: Grid, c: np.ndarray) -> tuple[np.ndarray, float]:
    u = grid.to_physical(c)
    w = grid.to_spectral(u * u)
    return np.where(grid.dealias_mask, -0.5j * grid.k_deriv * w, 0.0), float(np.abs(u).max())


def _frozen_flux(grid: Grid, v: np.ndarray, c: np.ndarray) -> np.ndarray:
    w = grid.to_spectral(v * grid.to_physical(c))
    return np.where(grid.dealias_mask, -0.5j * grid.k_deriv * w, 0.0)


def nonlinear_flux(u: Spectrum) -> Spectrum:
    """Dealiased spectral image of -(u^2)_x / 2."""
    return Spectrum(u.grid, _burgers_flux(u.grid, u.coeffs)[0])


def frozen_flux(V: RealField, u: Spectrum) -> Spectrum:
    """Dealiased spectral image of -(V u)_x / 2."""
    return Spectrum(u.grid, _frozen_flux(u.grid, V.values, u.coeffs))


def _forcing_fn(grid: Grid, f: Forcing) -> Callable[[float], np.ndarray | float]:
    if f is None:
        return lambda t: 0.0
    if isinstance(f, Spectrum):
        if f.grid != grid:
            raise ContractViolation("forcing lives on a different grid")
        coeffs = f.coeffs
        return lambda t: coeffs
    return lambda t: f(t).coeffs


@dataclass(frozen=True)
class EvolutionState:
    t: float
    u: Spectrum
    params: Params


def step(state: EvolutionState, f: Forcing = None) -> EvolutionState:
    """Advance the nonlinear equation by ``state.params.dt``.

    ``f`` is a Spectrum, a callable ``t -> Spectrum`` or None.
    """
    p, grid = state.params, state.u.grid
    scheme = _ETD2(grid, p.alpha, p.nu, p.dt)
    force = _forcing_fn(grid, f)

    def rhs(c, t):
        n, speed = _burgers_flux(grid, c)
        return n + force(t), speed

    c = scheme.advance(state.u.coeffs, state.t, rhs)
    if not np.all(np.isfinite(c)):
        raise BlowUpError(state.t)
    return EvolutionState(state.t + p.dt, Spectrum(grid, c), p)


@dataclass(frozen=True)
class Trajectory:
    """Physical snapshots ``values[i]`` at ``times[i]``."""

    grid: Grid
    params: Params
    times: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.times)

    def __iter__(self) -> Iterator[tuple[float, RealField]]:
        for t, v in zip(self.times, self.values):
            yield float(t), RealField(self.grid, v)

    def spectra(self) -> np.ndarray:
        return np.fft.fft(self.values, axis=1) * (self.grid._phase / self.grid.n_modes)

    def at(self, t: float) -> RealField:
        i = int(np.argmin(np.abs(self.times - t)))
        return RealField(self.grid, self.values[i])

@dataclass(frozen=True)
class LedgerRow:
    t: float
    l2_sq: float
    diss_acc: float
    visc_acc: float
    bound_rhs: float
    mean: float
    lhs: float
    ok: bool


@dataclass
class EnergyLedger:
    """Per-row energy bookkeeping.

    ``kind='nonlinear'``: lhs = l2_sq + diss_acc + 2 visc_acc, checked against
    |u0|^2 + 4 t |Lambda^{-alpha/2} f|^2.
    ``kind='linear'``: lhs = sup_s l2_sq + (4/3) diss_acc, checked against
    |u0|_X^2.
    """

    kind: str
    rows: list[LedgerRow]

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def worst_margin(self) -> float:
        """max over rows of lhs / bound_rhs (<= 1 means the inequality holds)."""
        return max((r.lhs / r.bound_rhs if r.bound_rhs > 0 else 0.0) for r in self.rows)


def _sq_norm(grid: Grid, c: np.ndarray, w=None) -> float:
    a = c.real**2 + c.imag**2
    return grid.length * float(np.sum(a if w is None else w * a))


def _check_real(s: Spectrum, what: str):
    scale = max(1.0, float(np.max(np.abs(s.coeffs))))
    if hermitian_defect(s.coeffs) > 1e-10 * scale:
        raise ContractViolation(f"{what} is not Hermitian (not a real field)")


def _n_steps(p: Params) -> tuple[int, float]:
    n = max(1, math.ceil(p.t_end / p.dt - 1e-9))
    return n, p.t_end / n


def _march(grid, p, c0, rhs, stride, ledger_fn, t0=0.0):
    """Shared time loop: returns (times, snapshots, ledger rows)."""
    n, dt = _n_steps(p)
    scheme = _ETD2(grid, p.alpha, p.nu, dt)
    stride = max(1, int(stride))
    c, t = np.array(c0, dtype=complex), t0
    times, snaps, rows = [t], [grid.to_physical(c)], [ledger_fn(t, c, first=True)]
    for j in range(1, n + 1):
        c_new = scheme.advance(c, t, rhs)
        if not np.all(np.isfinite(c_new)):
            raise BlowUpError(t)
        c, t = c_new, t0 + j * dt
        row = ledger_fn(t, c)
        if j % stride == 0 or j == n:
            times.append(t)
            snaps.append(grid.to_physical(c))
            rows.append(row)
    traj = Trajectory(grid, p, np.array(times), np.array(snaps))
    return traj, rows


def integrate(
    u0: Spectrum, f: Spectrum, p: Params, stride: int = 1
) -> tuple[Trajectory, EnergyLedger]:
    """Run the nonlinear equation from ``u0`` to ``p.t_end`` with forcing ``f``.

    Ledger integrals are accumulated by the trapezoid rule at every step;
    rows (and trajectory snapshots) are kept every ``stride`` steps.
    """
    grid = u0.grid
    _check_real(u0, "u0")
    _check_real(f, "forcing")
    if f.grid != grid:
        raise ContractViolation("u0 and f live on different grids")
    if not is_mean_zero(f.coeffs):
        raise MeanNotZero("integrate requires mean-zero forcing")
    a_sym = grid.abs_k**p.alpha
    k2 = grid.k**2
    fc = f.coeffs
    f_neg = sobolev_norm(f, -p.alpha / 2, homogeneous=True) ** 2
    e0 = _sq_norm(grid, u0.coeffs)

    def rhs(c, t):
        n, speed = _burgers_flux(grid, c)
        return n + fc, speed

    acc = {"d": 0.0, "v": 0.0, "prev": None, "t": 0.0}

    def ledger(t, c, first=False):
        d, v = _sq_norm(grid, c, a_sym), p.nu * _sq_norm(grid, c, k2)
        if not first:
            h = t - acc["t"]
            acc["d"] += 0.5 * h * (d + acc["prev"][0])
            acc["v"] += 0.5 * h * (v + acc["prev"][1])
        acc["prev"], acc["t"] = (d, v), t
        l2 = _sq_norm(grid, c)
        bound = e0 + 4.0 * t * f_neg
        lhs = l2 + acc["d"] + 2.0 * acc["v"]
        return LedgerRow(
            t, l2, acc["d"], acc["v"], bound, grid.length * float(c[0].real), lhs,
            lhs <= bound * (1 + LEDGER_RTOL),
        )

    traj, rows = _march(grid, p, u0.coeffs, rhs, stride, ledger)
    return traj, EnergyLedger("nonlinear", rows)


def integrate_linear(
    V: Spectrum, u0: Spectrum, p: Params, stride: int = 1
) -> tuple[Trajectory, EnergyLedger]:
    """Run the frozen-coefficient equation with initial data ``u0`` (= f).

    The ledger bound is sup |u|^2 + (4/3) int |Lambda^{alpha/2} u|^2 <= |u0|_X^2,
    meaningful when the smallness gate holds for V.
    """
    grid = u0.grid
    _check_real(V, "V")
    _check_real(u0, "u0")
    v_phys = grid.to_physical(V.coeffs)
    speed = float(np.abs(v_phys).max())
    a_sym = grid.abs_k**p.alpha
    k2 = grid.k**2
    bound = x_norm(inverse(u0), p) ** 2

    def rhs(c, t):
        return _frozen_flux(grid, v_phys, c), speed

    acc = {"d": 0.0, "v": 0.0, "prev": None, "t": 0.0, "sup": 0.0}

    def ledger(t, c, first=False):
        d, v = _sq_norm(grid, c, a_sym), p.nu * _sq_norm(grid, c, k2)
        if not first:
            h = t - acc["t"]
            acc["d"] += 0.5 * h * (d + acc["prev"][0])
            acc["v"] += 0.5 * h * (v + acc["prev"][1])
        acc["prev"], acc["t"] = (d, v), t
        l2 = _sq_norm(grid, c)
        acc["sup"] = max(acc["sup"], l2)
        lhs = acc["sup"] + 4.0 / 3.0 * acc["d"]
        return LedgerRow(
            t, l2, acc["d"], acc["v"], bound, grid.length * float(c[0].real), lhs,
            lhs <= bound * (1 + LEDGER_RTOL),
        )

    traj, rows = _march(grid, p, u0.coeffs, rhs, stride, ledger)
    return traj, EnergyLedger("linear", rows)


class FrozenStepper:
    """Step-by-step access to the frozen-coefficient flow (used by the
    time-integral steady route, which needs every step)."""

    def __init__(self, V: Spectrum, p: Params, dt: float):
        self.grid = V.grid
        self.p = p
        self.v_phys = self.grid.to_physical(V.coeffs)
        self.speed = float(np.abs(self.v_phys).max())
        self.scheme = _ETD2(self.grid, p.alpha, p.nu, dt)

    def rhs(self, c, t=0.0):
        return _frozen_flux(self.grid, self.v_phys, c), self.speed

    def time_derivative(self, c: np.ndarray) -> np.ndarray:
        return self.rhs(c)[0] - self.scheme.symbol * c

    def advance(self, c: np.ndarray, t: float = 0.0) -> np.ndarray:
        c_new = self.scheme.advance(c, t, self.rhs)
        if not np.all(np.isfinite(c_new)):
            raise BlowUpError(t)
        return c_new
