r"""Experiments built on the evolution and steady solvers.

* algebraic L2 decay of the frozen-coefficient flow and the moving
  low/high frequency split behind it;
* nonlinear stability of a steady state under a small perturbation;
* level-set (De Giorgi) energies, the truncation inequality for
  :math:`\Lambda^\alpha`, and the empirical L-infinity constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, SmallnessGateError
from .evolution import (
    LEDGER_RTOL,
    Trajectory,
    _burgers_flux,
    _check_real,
    _march,
    _sq_norm,
    integrate_linear,
)
from .spectral import (
    Grid,
    Params,
    RealField,
    forward,
    lp_norm,
    random_band_field,
    sobolev_norm,
    x_norm,
)
from .steady import h_half_bound, smallness_gate

MIN_FIT_POINTS = 10
MIN_LEVEL_SAMPLES = 8
MONOTONE_RTOL = 1e-9


# ---------------------------------------------------------------- decay


def decay_constant(p: Params) -> float:
    ae = p.alpha * p.eps
    return math.sqrt((12.0 - 2.0 * ae) / ae)


def decay_exponent(alpha: float, eps: float) -> float:
    return 3.0 / (2.0 * alpha) - eps / 2.0


def exponent_condition(alpha: float, eps: float) -> tuple[float, bool]:
    """Decay exponent and whether it exceeds 1 (integrable tail)."""
    e = decay_exponent(alpha, eps)
    return e, e > 1.0


def window_cap(grid: Grid, p: Params) -> float:
    """Latest time before the torus spectral gap dominates the decay."""
    return 0.5 * grid.k_min ** (-p.alpha)


@dataclass(frozen=True)
class DecayRow:
    t: float
    l2: float
    bound: float
    ok: bool


@dataclass
class DecayReport:
    rows: list[DecayRow]
    fit_exponent: float
    window: tuple[float, float]
    bound_exponent: float
    exponent_ok: bool
    trajectory: Trajectory = field(repr=False, default=None)

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.rows)


def fit_decay(times: np.ndarray, l2: np.ndarray, window: tuple[float, float]) -> float:
    """Negated least-squares slope of log l2 against log(1+t) inside ``window``."""
    sel = (times >= window[0]) & (times <= window[1]) & (l2 > 0)
    if sel.sum() < MIN_FIT_POINTS:
        raise ContractViolation(
            f"decay window {window} holds {int(sel.sum())} samples, "
            f"need at least {MIN_FIT_POINTS}"
        )
    slope = np.polyfit(np.log1p(times[sel]), np.log(l2[sel]), 1)[0]
    return float(-slope)


def decay_experiment(
    V: RealField,
    f: RealField,
    p: Params,
    window: tuple[float, float] | None = None,
    slack: float = 1e-6,
    stride: int = 1,
    enforce_gate: bool = True,
) -> DecayReport:
    """Run the frozen flow from ``f`` up to the window end and compare
    |u(t)| with the explicit algebraic bound.

    The default window is ``[0, min(t_end, window_cap)]``; a later end is
    rejected since the torus gap makes the fit meaningless there.
    """
    grid = f.grid
    gate = smallness_gate(f, p)
    if enforce_gate:
        vb = sobolev_norm(forward(V), p.alpha / 2)
        if not gate.passed or vb > h_half_bound(gate, p) * (1 + 1e-6):
            raise SmallnessGateError(gate)
    cap = window_cap(grid, p)
    if window is None:
        window = (0.0, min(p.t_end, cap))
    t_a, t_b = window
    if not 0 <= t_a < t_b <= cap * (1 + 1e-12):
        raise ContractViolation(
            f"decay window {window} must satisfy 0 <= t_a < t_b <= {cap:.6g}"
        )
    run = Params(p.alpha, p.eps, p.rho, p.nu, p.dt, t_b)
    traj, _ = integrate_linear(forward(V), forward(f), run, stride=stride)
    spectra = traj.spectra()
    l2 = np.sqrt([_sq_norm(grid, c) for c in spectra])
    k0 = decay_constant(p) * x_norm(f, p)
    e = decay_exponent(p.alpha, p.eps)
    rows = []
    for t, v in zip(traj.times, l2):
        b = k0 * (1 + t) ** (-e)
        rows.append(DecayRow(float(t), float(v), b, bool(v <= b * (1 + slack))))
    if np.any(l2 > 0):
        fit = fit_decay(traj.times, l2, window)
    else:
        fit = math.nan
    return DecayReport(rows, fit, (t_a, t_b), e, e > 1.0, traj)


@dataclass(frozen=True)
class SplitRow:
    t: float
    g: float
    low_energy: float
    high_energy: float


@dataclass
class SplitDiagnostic:
    rows: list[SplitRow]


def split_cutoff(t: float, p: Params) -> float:
    m = 3.0 / p.alpha - p.eps
    return (3.0 * m / (4.0 * (1.0 + t))) ** (1.0 / p.alpha)


def split_diagnostic(trajectory: Trajectory, p: Params) -> SplitDiagnostic:
    grid = trajectory.grid
    rows = []
    for t, c in zip(trajectory.times, trajectory.spectra()):
        g = split_cutoff(float(t), p)
        e = grid.length * (c.real**2 + c.imag**2)
        low = grid.abs_k <= g
        rows.append(SplitRow(float(t), g, float(e[low].sum()), float(e[~low].sum())))
    return SplitDiagnostic(rows)


# ---------------------------------------------------------------- stability


def random_perturbation(
    grid: Grid, p: Params, l2_norm: float, seed: int = 0, k_max_frac: float = 1 / 3
) -> RealField:
    """Seeded mean-zero perturbation with modes in [rho, k_max_frac * k_max]."""
    rng = np.random.default_rng(seed)
    th = random_band_field(grid, rng, max(p.rho, grid.k_min), k_max_frac * grid.k_max)
    n = sobolev_norm(forward(th), 0.0)
    return th * (l2_norm / n if n > 0 else 0.0)


@dataclass(frozen=True)
class StabilityRow:
    t: float
    w_l2_sq: float
    diss_acc: float
    lhs: float
    bound: float
    ok: bool


@dataclass
class StabilityReport:
    rows: list[StabilityRow]
    monotone: bool
    max_step_growth: float
    final_ratio: float
    trajectory: Trajectory = field(repr=False, default=None)

    @property
    def ledger_ok(self) -> bool:
        return all(r.ok for r in self.rows)


def stability_experiment(
    U: RealField, theta: RealField, f: RealField, p: Params, stride: int = 1
) -> StabilityReport:
    """Evolve ``u0 = U + theta`` with forcing ``f`` and follow ``w = u - U``.

    Every step checks |w|^2 + (2/3) int |Lambda^{alpha/2} w|^2 <= |theta|^2
    (rows kept at ``stride``) and whether |w| is nonincreasing up to a
    relative 1e-9 plus the roundoff floor of the difference ``u - U``.
    """
    grid = U.grid
    Us, ths, fs = forward(U), forward(theta), forward(f)
    for s, what in ((Us, "U"), (ths, "theta"), (fs, "f")):
        _check_real(s, what)
    h = sobolev_norm(Us, p.alpha / 2)
    if h > 1.0 / 3.0:
        raise ContractViolation(f"stability needs |U|_H^(alpha/2) <= 1/3, got {h:.6g}")
    uc, fc = Us.coeffs, fs.coeffs
    a_sym = grid.abs_k**p.alpha
    th2 = _sq_norm(grid, ths.coeffs)
    floor = 64 * np.finfo(float).eps * math.sqrt(_sq_norm(grid, uc + ths.coeffs))

    def rhs(c, t):
        n, speed = _burgers_flux(grid, c)
        return n + fc, speed

    st = {"d": 0.0, "prev_d": 0.0, "t": 0.0, "w": 0.0, "mono": True, "growth": 0.0}

    def ledger(t, c, first=False):
        w = c - uc
        w2, d = _sq_norm(grid, w), _sq_norm(grid, w, a_sym)
        wn = math.sqrt(w2)
        if not first:
            st["d"] += 0.5 * (t - st["t"]) * (d + st["prev_d"])
            step = wn - st["w"]
            st["growth"] = max(st["growth"], step)
            if step > MONOTONE_RTOL * st["w"] + floor:
                st["mono"] = False
        st["prev_d"], st["t"], st["w"] = d, t, wn
        lhs = w2 + 2.0 / 3.0 * st["d"]
        return StabilityRow(t, w2, st["d"], lhs, th2, lhs <= th2 * (1 + LEDGER_RTOL))

    traj, rows = _march(grid, p, uc + ths.coeffs, rhs, stride, ledger)
    final = math.sqrt(rows[-1].w_l2_sq / th2) if th2 > 0 else 0.0
    return StabilityReport(rows, st["mono"], st["growth"], final, traj)


# ---------------------------------------------------------------- level sets


def truncate(u: RealField, lam: float, side: str = "plus") -> RealField:
    """(u - lam)_+ for ``side='plus'``, (u + lam)_- = max(-(u + lam), 0) for 'minus'."""
    if side == "plus":
        return RealField(u.grid, np.maximum(u.values - lam, 0.0))
    if side == "minus":
        return RealField(u.grid, np.maximum(-(u.values + lam), 0.0))
    raise ContractViolation(f"side must be 'plus' or 'minus', got {side!r}")


def cordoba_check(u: RealField, lam: float, alpha: float) -> tuple[float, float]:
    """(int Lambda^alpha u * h dx, |Lambda^{alpha/2} h|^2) with h = (u - lam)_+."""
    grid = u.grid
    c = forward(u).coeffs
    hc = grid.to_spectral(np.maximum(u.values - lam, 0.0))
    a = grid.abs_k**alpha
    lhs = grid.length * float(np.sum(a * c * np.conj(hc)).real)
    rhs = _sq_norm(grid, hc, a)
    return lhs, rhs


def cordoba_family(
    grid: Grid, alpha: float, size: int = 100, seed: int = 0
) -> list[tuple[float, float, float]]:
    """(lhs, rhs, |u|^2_{H^{alpha/2}}) over seeded band-limited fields and levels."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(size):
        u = random_band_field(grid, rng, grid.k_min, grid.k_max / 3)
        lam = rng.uniform(u.values.min(), u.values.max())
        lhs, rhs = cordoba_check(u, lam, alpha)
        out.append((lhs, rhs, sobolev_norm(forward(u), alpha / 2) ** 2))
    return out


def _level_series(traj: Trajectory, lam: float, side: str, alpha: float):
    """Per-sample |h|^2, |Lambda^{alpha/2} h|^2 and h itself (physical)."""
    grid = traj.grid
    v = traj.values
    h = np.maximum(v - lam, 0.0) if side == "plus" else np.maximum(-(v + lam), 0.0)
    hc = np.fft.fft(h, axis=1) * (grid._phase / grid.n_modes)
    e = hc.real**2 + hc.imag**2
    return grid.length * e.sum(axis=1), grid.length * (e * grid.abs_k**alpha).sum(axis=1), h


def _trapz_from(times, vals, t_start):
    """Trapezoid integral of piecewise-linear data over [t_start, times[-1]],
    plus the interpolated value at t_start."""
    v0 = float(np.interp(t_start, times, vals))
    sel = times > t_start
    ts = np.concatenate([[t_start], times[sel]])
    vs = np.concatenate([[v0], vals[sel]])
    return float(np.sum(0.5 * np.diff(ts) * (vs[1:] + vs[:-1]))), v0


@dataclass(frozen=True)
class LevelSetRow:
    n: int
    lambda_n: float
    T_n: float
    E_plus: float
    E_minus: float
    E_n: float


@dataclass(frozen=True)
class LevelCheck:
    n: int
    side: str
    t1: float
    lhs: float
    rhs: float
    ok: bool


@dataclass
class LevelSetReport:
    M: float
    t0: float
    rows: list[LevelSetRow]
    checks: list[LevelCheck]
    energy_functional: float

    @property
    def E0(self) -> float:
        return self.rows[0].E_n

    @property
    def violations(self) -> list[LevelCheck]:
        return [c for c in self.checks if not c.ok]

    def decreasing(self) -> bool:
        e = [r.E_n for r in self.rows]
        return all(b <= a for a, b in zip(e, e[1:]))


def _clip(traj: Trajectory, t0: float) -> Trajectory:
    keep = traj.times <= t0 * (1 + 1e-12)
    return Trajectory(traj.grid, traj.params, traj.times[keep], traj.values[keep])


def level_set_energy(
    trajectory: Trajectory,
    t0: float,
    M: float,
    n_max: int,
    f: RealField,
    tol: float = 1e-8,
    with_checks: bool = True,
) -> LevelSetReport:
    """Truncated energies E_n for n = 0..n_max on both sides and the
    truncated energy inequality for every recorded t1 <= t0 (t2 = t0).

    ``E_n`` is the sum of the plus and minus energies; the inequality is
    checked up to ``tol * E_0`` (skipped when ``with_checks`` is False).
    The minus side is the plus side of ``-u``,
    which solves the same equation with forcing ``-f``.
    """
    if not t0 > 0 or t0 > trajectory.times[-1] * (1 + 1e-12):
        raise ContractViolation(f"t0={t0} outside the trajectory span")
    if n_max < 0:
        raise ContractViolation("n_max must be nonnegative")
    traj = _clip(trajectory, t0)
    times = traj.times
    alpha = traj.params.alpha
    t_last = t0 * (1 - 2.0**-n_max)
    if np.sum(times >= t_last) < MIN_LEVEL_SAMPLES:
        raise ContractViolation(
            f"fewer than {MIN_LEVEL_SAMPLES} samples in [{t_last:.6g}, {t0:.6g}]; "
            "record the trajectory with a finer stride"
        )
    grid = traj.grid
    fv = f.values

    # Plain energy functional sup |u|^2 + 2 int |Lambda^{alpha/2} u|^2 over [0, t0].
    spec = traj.spectra()
    e = spec.real**2 + spec.imag**2
    l2 = grid.length * e.sum(axis=1)
    dis = grid.length * (e * grid.abs_k**alpha).sum(axis=1)
    functional = float(l2.max() + 2 * _trapz_from(times, dis, 0.0)[0])

    series = {}
    rows = []
    for n in range(n_max + 1):
        lam = M * (1 - 2.0**-n)
        T_n = t0 * (1 - 2.0**-n)
        es = {}
        for side in ("plus", "minus"):
            h2, d2, h = _level_series(traj, lam, side, alpha)
            series[n, side] = (h2, d2, h)
            integral, h2_T = _trapz_from(times, d2, T_n)
            sup = max(h2_T, float(h2[times >= T_n].max(initial=0.0)))
            es[side] = sup + 2 * integral
        rows.append(LevelSetRow(n, lam, T_n, es["plus"], es["minus"], es["plus"] + es["minus"]))

    scale = tol * rows[0].E_n
    checks = []
    if not with_checks:
        return LevelSetReport(M, t0, rows, checks, functional)
    dts = np.diff(times)
    for n in range(n_max + 1):
        for side, sign in (("plus", 1.0), ("minus", -1.0)):
            h2, d2, h = series[n, side]
            fh = sign * grid.dx * (h @ fv)
            # Trapezoid integrals from each t1 to t0 as tail sums.
            diss = np.concatenate([np.cumsum((0.5 * dts * (d2[1:] + d2[:-1]))[::-1])[::-1], [0.0]])
            src = np.concatenate([np.cumsum((0.5 * dts * (fh[1:] + fh[:-1]))[::-1])[::-1], [0.0]])
            lhs = h2[-1] + 2 * diss
            rhs = h2 + 2 * src
            for i in range(len(times) - 1):
                checks.append(
                    LevelCheck(n, side, float(times[i]), float(lhs[i]), float(rhs[i]),
                               bool(lhs[i] <= rhs[i] + scale))
                )
    return LevelSetReport(M, t0, rows, checks, functional)


def level_scale(E0: float, t0: float, f: RealField) -> float:
    """E0^{1/2} t0^{-1/2} + |f|_{L2}^{1/4} E0^{1/8}, the threshold scaling."""
    return math.sqrt(E0 / t0) + lp_norm(f, 2.0) ** 0.25 * E0**0.125


def fit_level_constant(
    trajectories: list[Trajectory],
    t0: float,
    n_max: int,
    f: RealField,
    target: float = 1e-8,
    rtol: float = 1e-6,
) -> float:
    """Smallest c with E_{n_max} <= target * E_0 on every trajectory when
    M = c * level_scale(E_0, t0, f), bisected to relative precision ``rtol``."""
    c_best = 0.0
    for traj in trajectories:
        base = level_set_energy(traj, t0, 0.0, 0, f, with_checks=False)
        E0 = base.rows[0].E_n
        if E0 == 0:
            continue
        s = level_scale(E0, t0, f)

        def good(c):
            r = level_set_energy(traj, t0, c * s, n_max, f, with_checks=False)
            return r.rows[-1].E_n <= target * E0

        hi = 1.0
        while not good(hi):
            hi *= 2.0
            if hi > 1e12:
                raise ContractViolation("no threshold constant found")
        lo = 0.0
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if good(mid) else (mid, hi)
        c_best = max(c_best, hi)
    return c_best


@dataclass(frozen=True)
class LinfRow:
    t: float
    linf: float
    denom: float
    ratio: float


@dataclass
class LinfReport:
    rows: list[LinfRow]

    @property
    def max_ratio(self) -> float:
        return max((r.ratio for r in self.rows), default=0.0)


def linf_bound_check(trajectory: Trajectory, u0: RealField, f: RealField) -> LinfReport:
    """|u(t)|_inf / (|u0| t^{-1/2} + |f|_{Hdot^{-alpha/2}} + |f|_{L2}^{1/3}) for t > 0."""
    alpha = trajectory.params.alpha
    a = lp_norm(u0, 2.0)
    fs = forward(f)
    b = sobolev_norm(fs, -alpha / 2, homogeneous=True) + lp_norm(f, 2.0) ** (1 / 3)
    rows = []
    for t, v in zip(trajectory.times, trajectory.values):
        if t <= 0:
            continue
        linf = float(np.abs(v).max())
        den = a / math.sqrt(t) + b
        ratio = 0.0 if linf == 0 else (linf / den if den > 0 else math.inf)
        rows.append(LinfRow(float(t), linf, den, ratio))
    return LinfReport(rows)
