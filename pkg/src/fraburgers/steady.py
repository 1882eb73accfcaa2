r"""Steady states of :math:`\tfrac12 (U^2)_x + \Lambda^\alpha U = f`.

The outer loop freezes the advecting field and solves the linear problem

.. math::

    \tfrac12 (U^i U^{i+1})_x + \Lambda^\alpha U^{i+1} = f

for :math:`U^{i+1}`, starting from :math:`U^0 = 0`.  Under the smallness
gate the map is a contraction in :math:`\dot H^{\alpha/2}`.  The inner linear
problem is solved by Richardson iteration preconditioned with
:math:`\Lambda^{-\alpha}`, or alternatively as the time integral of the
frozen-coefficient evolution started from ``f``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContractViolation,
    DivergenceError,
    FraburgersError,
    MeanNotZero,
    NonContractionError,
    SmallnessGateError,
    TailNotConverged,
)
from .evolution import FrozenStepper, _burgers_flux, _frozen_flux
from .spectral import (
    Params,
    RealField,
    Spectrum,
    _inv_symbol,
    _weighted_norm,
    forward,
    inverse,
    is_mean_zero,
    random_band_field,
    sobolev_norm,
    sobolev_weight,
    x_norm,
)

GATE_LIMIT = 1.0 / 3.0
BOUND_RTOL = 1e-6
# Outer ratio above which an exhausted budget counts as non-contraction.
STALL_RATIO = 0.9


def smallness_constant(alpha: float, eps: float) -> float:
    """C(alpha, eps) = max{3 eps, 4 sqrt(alpha eps (12 - 2 alpha eps)) / (3 - 2 alpha - alpha eps)}."""
    den = 3.0 - 2.0 * alpha - alpha * eps
    if not den > 0:
        raise ContractViolation(
            f"alpha < 3/(2+eps) violated: 3 - 2 alpha - alpha eps = {den:.6g}"
        )
    ae = alpha * eps
    return max(3.0 * eps, 4.0 * math.sqrt(ae * (12.0 - 2.0 * ae)) / den)


@dataclass(frozen=True)
class SmallnessReport:
    C_alpha_eps: float
    f_x_norm: float
    gate_value: float
    passed: bool


def smallness_gate(f: RealField, p: Params) -> SmallnessReport:
    p.require_scheme_range()
    c = smallness_constant(p.alpha, p.eps)
    fx = x_norm(f, p)
    g = c * fx / p.eps
    return SmallnessReport(c, fx, g, g <= GATE_LIMIT)


def h_half_bound(report: SmallnessReport, p: Params) -> float:
    """The a priori H^{alpha/2} bound C eps^{-1} |f|_X on every iterate."""
    return report.C_alpha_eps * report.f_x_norm / p.eps


def _dual_norm(grid, c, alpha):
    return _weighted_norm(grid, c, sobolev_weight(grid, -alpha / 2, True))


def _energy_norm(grid, c, alpha):
    return _weighted_norm(grid, c, sobolev_weight(grid, alpha / 2, True))


def _linear_solve(grid, v_phys, fc, alpha, tol, max_iter, c0=None):
    """Richardson sweep; returns (coeffs, residual history)."""
    inv = _inv_symbol(grid, alpha)
    sym = grid.abs_k**alpha
    c = inv * fc if c0 is None else np.array(c0, dtype=complex)
    c[0] = 0.0
    history = []
    growth = 0
    for _ in range(max_iter + 1):
        flux = _frozen_flux(grid, v_phys, c)
        r = sym * c - flux - fc
        r[0] = 0.0
        res = _dual_norm(grid, r, alpha)
        if not math.isfinite(res):
            raise DivergenceError("non-finite residual in the linear solve", history)
        history.append(res)
        if res <= tol:
            return c, history
        # The Richardson increment is inv * r, whose energy norm equals res.
        growth = growth + 1 if len(history) > 1 and res > history[-2] else 0
        if growth >= 3:
            raise DivergenceError(
                "linear solve increments grew for 3 consecutive steps", history
            )
        c = c - inv * r
    raise DivergenceError(
        f"linear solve did not reach tol={tol:.3e} in {max_iter} sweeps "
        f"(residual {history[-1]:.3e})",
        history,
    )


def _check_forcing(f: Spectrum):
    if not is_mean_zero(f.coeffs):
        raise MeanNotZero("the steady problem requires mean-zero forcing")


def linear_steady_solve(
    V: Spectrum, f: Spectrum, p: Params, tol: float = 1e-12, max_iter: int = 500
) -> Spectrum:
    """Solve ``(V U)_x / 2 + Lambda^alpha U = f`` to ``tol`` in the dual norm."""
    _check_forcing(f)
    if V.grid != f.grid:
        raise ContractViolation("V and f live on different grids")
    grid = f.grid
    c, _ = _linear_solve(
        grid, grid.to_physical(V.coeffs), f.coeffs, p.alpha, tol, max_iter
    )
    return Spectrum(grid, c)


def steady_residual(U: Spectrum, f: Spectrum, p: Params) -> float:
    """Dual norm of ``(U^2)_x / 2 + Lambda^alpha U - f`` over the Fourier test basis."""
    grid = U.grid
    flux, _ = _burgers_flux(grid, U.coeffs)
    r = grid.abs_k**p.alpha * U.coeffs - flux - f.coeffs
    r[0] = 0.0
    return _dual_norm(grid, r, p.alpha)


@dataclass(frozen=True)
class IterationRow:
    i: int
    increment_norm: float
    ratio: float
    residual: float
    h_half_norm: float
    h_half_bound: float


@dataclass
class IterationTrace:
    rows: list[IterationRow] = field(default_factory=list)
    converged: bool = False
    gate: SmallnessReport | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def bound_ok(self) -> bool:
        return all(r.h_half_norm <= r.h_half_bound * (1 + BOUND_RTOL) for r in self.rows)

    def max_ratio(self, start: int = 2) -> float:
        vals = [r.ratio for r in self.rows if r.i >= start]
        return max(vals) if vals else 0.0


def picard_solve(
    f: RealField,
    p: Params,
    tol: float = 1e-10,
    max_iter: int = 40,
    U0: RealField | None = None,
    inner_tol: float | None = None,
    enforce_gate: bool = True,
) -> tuple[RealField, IterationTrace]:
    """Outer fixed-point loop, stopping when the Hdot^{alpha/2} increment is <= tol.

    Raises SmallnessGateError before any work if the gate fails (unless
    ``enforce_gate`` is False) and NonContractionError if the budget runs
    out while the last ratio exceeds 0.9.
    """
    gate = smallness_gate(f, p)
    if enforce_gate and not gate.passed:
        raise SmallnessGateError(gate)
    grid = f.grid
    fs = forward(f)
    _check_forcing(fs)
    fc = fs.coeffs.copy()
    fc[0] = 0.0
    bound = h_half_bound(gate, p)
    if inner_tol is None:
        floor = 64 * np.finfo(float).eps * max(_dual_norm(grid, fc, p.alpha), 1e-300)
        inner_tol = max(1e-3 * tol, floor)
    c = np.zeros(grid.n_modes, dtype=complex) if U0 is None else forward(U0).coeffs.copy()
    c[0] = 0.0
    trace = IterationTrace(gate=gate)
    prev_inc = None
    for i in range(max_iter):
        c_new, _ = _linear_solve(
            grid, grid.to_physical(c), fc, p.alpha, inner_tol, 10_000, c0=c
        )
        c_new[0] = 0.0
        inc = _energy_norm(grid, c_new - c, p.alpha)
        ratio = inc / prev_inc if prev_inc else math.nan
        s_new = Spectrum(grid, c_new)
        trace.rows.append(
            IterationRow(
                i, inc, ratio, steady_residual(s_new, fs, p),
                sobolev_norm(s_new, p.alpha / 2), bound,
            )
        )
        c, prev_inc = c_new, inc
        if inc <= tol:
            trace.converged = True
            break
    if not trace.converged:
        last = trace.rows[-1].ratio
        if math.isnan(last) or last > STALL_RATIO:
            raise NonContractionError(
                f"no contraction after {max_iter} iterations (last ratio {last:.3g}); "
                "the smallness gate is likely violated numerically",
                trace,
            )
    return inverse(Spectrum(grid, c)), trace


def steady_via_time_integral(
    V: Spectrum,
    f: Spectrum,
    p: Params,
    tail_tol: float = 1e-10,
    max_time: float = 1000.0,
    end_correction: bool = True,
) -> Spectrum:
    """Approximate ``int_0^inf u dt`` for the frozen flow started from ``f``.

    The step is ``1/ceil(1/p.dt)`` so unit intervals are hit exactly.  The
    trapezoid sum gets the Euler-Maclaurin end correction
    ``-dt^2/12 (u'(T) - u'(0))`` when ``end_correction`` is set.
    """
    _check_forcing(f)
    grid = f.grid
    per_unit = max(1, math.ceil(1.0 / p.dt - 1e-9))
    dt = 1.0 / per_unit
    stepper = FrozenStepper(V, p, dt)
    c = f.coeffs.copy()
    acc = np.zeros_like(c)
    last_unit = acc.copy()
    d0 = stepper.time_derivative(c)
    t, unit = 0.0, 0
    inc_norm = math.inf
    while unit < max_time:
        for _ in range(per_unit):
            c_new = stepper.advance(c, t)
            acc += 0.5 * dt * (c + c_new)
            c, t = c_new, t + dt
        unit += 1
        inc_norm = _weighted_norm(grid, acc - last_unit, np.ones(grid.n_modes))
        last_unit = acc.copy()
        if inc_norm <= tail_tol:
            break
    else:
        raise TailNotConverged(inc_norm, float(unit))
    if end_correction:
        acc -= dt**2 / 12.0 * (stepper.time_derivative(c) - d0)
    return Spectrum(grid, acc)


@dataclass(frozen=True)
class RestartResult:
    index: int
    converged: bool
    iterations: int
    start_norm: float
    error: str = ""


@dataclass
class UniquenessReport:
    restarts: list[RestartResult]
    endpoints: list[RealField]
    spread: float

    @property
    def failures(self) -> list[RestartResult]:
        return [r for r in self.restarts if not r.converged]


def _random_start(grid, rng, p, radius):
    hi = grid.k_max * 2.0 / 3.0
    g = random_band_field(grid, rng, max(p.rho, grid.k_min), hi)
    n = sobolev_norm(forward(g), p.alpha / 2)
    return g * (radius / n if n > 0 else 0.0)


def uniqueness_probe(
    U: RealField,
    f: RealField,
    p: Params,
    n_perturb: int,
    tol: float = 1e-10,
    seed: int = 0,
    scale: float = 0.9,
    workers: int = 1,
) -> UniquenessReport:
    """Restart the Picard loop from random guesses of H^{alpha/2} norm
    ``scale * C eps^{-1} |f|_X`` and measure how far the endpoints spread.

    Failed restarts are reported, not raised.  The spread is the largest
    pairwise Hdot^{alpha/2} distance among converged endpoints and ``U``.
    """
    if n_perturb < 0:
        raise ContractViolation("n_perturb must be nonnegative")
    if n_perturb == 0:
        return UniquenessReport([], [], 0.0)
    gate = smallness_gate(f, p)
    radius = scale * h_half_bound(gate, p)
    rng = np.random.default_rng(seed)
    starts = [_random_start(f.grid, rng, p, radius) for _ in range(n_perturb)]

    def one(j):
        try:
            V, tr = picard_solve(f, p, tol=tol, U0=starts[j])
            ok = tr.converged
            return RestartResult(j, ok, len(tr.rows), radius), (V if ok else None)
        except FraburgersError as exc:
            return RestartResult(j, False, 0, radius, f"{type(exc).__name__}: {exc}"), None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(n_perturb)))
    else:
        results = [one(j) for j in range(n_perturb)]
    restarts = [r for r, _ in results]
    endpoints = [e for _, e in results if e is not None]
    pts = [forward(U).coeffs] + [forward(e).coeffs for e in endpoints]
    grid = U.grid
    spread = 0.0
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            spread = max(spread, _energy_norm(grid, pts[a] - pts[b], p.alpha))
    return UniquenessReport(restarts, endpoints, spread)
