import math

import numpy as np
import pytest

from fraburgers.analysis import (
    cordoba_check,
    cordoba_family,
    decay_constant,
    decay_exponent,
    decay_experiment,
    fit_level_constant,
    level_scale,
    level_set_energy,
    linf_bound_check,
    random_perturbation,
    exponent_condition,
    split_cutoff,
    split_diagnostic,
    stability_experiment,
    truncate,
    window_cap,
)
from fraburgers.errors import ContractViolation, SmallnessGateError
from fraburgers.evolution import Trajectory, integrate
from fraburgers.forcing import ForcingSpec, generate_forcing
from fraburgers.spectral import Grid, Params, RealField, forward, lp_norm, sobolev_norm, x_norm
from fraburgers.steady import picard_solve

from conftest import band_field

# mpmath, 30 digits
DECAY = {1.1: (10.348473756593727, 1.3136363636363636), 1.2: (9.8994949366116653, 1.2),
         1.3: (9.5030359521414159, 1.1038461538461538)}


@pytest.mark.parametrize("alpha", sorted(DECAY))
def test_decay_constants(alpha):
    p = Params(alpha=alpha, eps=0.1)
    k, e = DECAY[alpha]
    assert decay_constant(p) == pytest.approx(k, rel=1e-14)
    assert decay_exponent(alpha, 0.1) == pytest.approx(e, rel=1e-14)
    assert exponent_condition(alpha, 0.1) == (pytest.approx(e), True)


def test_exponent_condition_can_fail():
    e, ok = exponent_condition(1.49, 0.1)
    assert e < 1 and not ok


def gate_setup(grid, alpha=1.2, seed=3, **kw):
    p = Params(alpha=alpha, **kw)
    f = generate_forcing(ForcingSpec(seed=seed, margin=0.9), grid, p)
    U, _ = picard_solve(f, p, tol=1e-12)
    return p, f, U


def test_decay_zero_forcing():
    g = Grid(128, 4 * math.pi)
    p = Params(alpha=1.2, dt=0.05, t_end=5)
    rep = decay_experiment(g.zeros(), g.zeros(), p)
    assert rep.all_ok and math.isnan(rep.fit_exponent)
    assert all(r.l2 == 0 for r in rep.rows)


def test_decay_single_mode_closed_form():
    g = Grid(128, 4 * math.pi)
    p = Params(alpha=1.3, dt=0.05, t_end=10)
    f = RealField(g, 1e-4 * np.cos(2 * g.x))
    rep = decay_experiment(g.zeros(), f, p)
    l0 = sobolev_norm(forward(f), 0.0)
    for r in rep.rows:
        assert r.l2 == pytest.approx(math.exp(-(2**1.3) * r.t) * l0, rel=1e-10, abs=1e-300)
        assert r.ok
    assert rep.rows[0].bound == pytest.approx(decay_constant(p) * x_norm(f, p))
    assert rep.rows[0].l2 < rep.rows[0].bound


@pytest.mark.parametrize("alpha", [1.1, 1.3])
def test_decay_bound_holds_for_gate_passing_runs(alpha):
    g = Grid(256, 16 * math.pi)
    p, f, U = gate_setup(g, alpha, dt=0.02, t_end=10)
    rep = decay_experiment(U, f, p, stride=5)
    assert rep.all_ok
    assert rep.window == (0.0, 10)
    assert rep.fit_exponent > 0


def test_decay_window_checks():
    g = Grid(128, 16 * math.pi)
    p, f, U = gate_setup(g, dt=0.05, t_end=5)
    with pytest.raises(ContractViolation, match="need at least"):
        decay_experiment(U, f, p, window=(0.0, 0.3), stride=1)
    with pytest.raises(ContractViolation, match="must satisfy"):
        decay_experiment(U, f, p, window=(0.0, 2 * window_cap(g, p)))


def test_decay_refuses_large_coefficient():
    g = Grid(128, 4 * math.pi)
    p, f, U = gate_setup(g, dt=0.05, t_end=5)
    with pytest.raises(SmallnessGateError):
        decay_experiment(U * 1000.0, f, p)
    with pytest.raises(SmallnessGateError):
        decay_experiment(U, f * 10.0, p)


def test_split_cutoff_at_zero():
    p = Params(alpha=1.2, eps=0.1)
    assert split_cutoff(0.0, p) == pytest.approx(1.6320260537984397, rel=1e-14)


def test_split_partition_and_empty_low_band():
    g = Grid(64, math.pi)
    p = Params(alpha=1.2)
    high = np.cos(10 * g.x)
    mixed = band_field(g, 1).values
    traj = Trajectory(g, p, np.array([0.0, 2.0]), np.stack([high, mixed]))
    rows = split_diagnostic(traj, p).rows
    assert rows[0].low_energy <= 1e-28
    for r, v in zip(rows, traj.values):
        total = float(np.sum(v**2) * g.dx)
        assert r.low_energy + r.high_energy == pytest.approx(total, rel=1e-12)
    assert rows[1].g < rows[0].g


# ---- stability


def stability_setup(alpha=1.2, t_end=10.0):
    g = Grid(128, math.pi)
    return gate_setup(g, alpha, dt=0.01, t_end=t_end) + (g,)


def test_stability_zero_perturbation_is_fixed_point():
    p, f, U, g = stability_setup(t_end=2.0)
    rep = stability_experiment(U, g.zeros(), f, p)
    assert max(math.sqrt(r.w_l2_sq) for r in rep.rows) <= 1e-9
    assert rep.final_ratio == 0.0


def test_stability_ledger_monotone_and_decay():
    p, f, U, g = stability_setup()
    theta = random_perturbation(g, p, 0.1 * sobolev_norm(forward(U), 0.0), seed=2)
    rep = stability_experiment(U, theta, f, p, stride=20)
    assert rep.ledger_ok and rep.monotone
    assert rep.final_ratio <= 1e-3
    assert rep.rows[0].bound == pytest.approx(sobolev_norm(forward(theta), 0.0) ** 2)
    assert len(rep.rows) == 51


def test_stability_requires_small_steady_state():
    g = Grid(64, math.pi)
    p = Params(alpha=1.2)
    with pytest.raises(ContractViolation, match="1/3"):
        stability_experiment(RealField(g, np.sin(g.x)), g.zeros(), g.zeros(), p)


def test_random_perturbation_norm_and_band():
    g = Grid(128, math.pi)
    p = Params(alpha=1.2, rho=3.0)
    th = random_perturbation(g, p, 0.25, seed=1)
    s = forward(th)
    assert sobolev_norm(s, 0.0) == pytest.approx(0.25)
    assert np.all(np.abs(s.coeffs[np.abs(g.modes) < 3]) < 1e-15)


# ---- truncation


def test_truncate_examples(torus):
    u = RealField(torus, np.sin(torus.x))
    assert np.all(truncate(u, 2.0).values == 0)
    pos = RealField(torus, 1 + np.sin(torus.x))
    assert np.array_equal(truncate(pos, 0.0).values, pos.values)
    assert np.array_equal(truncate(u, 0.5).values, np.maximum(np.sin(torus.x) - 0.5, 0))
    assert np.array_equal(truncate(u, 0.5, "minus").values, np.maximum(-np.sin(torus.x) - 0.5, 0))
    tu = truncate(u, 0.3)
    assert np.array_equal(truncate(tu, 0.0).values, tu.values)
    with pytest.raises(ContractViolation):
        truncate(u, 0.0, "both")


def test_truncate_contracts_lp_norms(torus):
    u = band_field(torus, 5)
    for lam in (0.0, 0.2, 0.7):
        for side in ("plus", "minus"):
            t = truncate(u, lam, side)
            for q in (1, 2, 3, math.inf):
                assert lp_norm(t, q) <= lp_norm(u, q)


# ---- Cordoba-type inequality


def test_cordoba_empty_level_set(torus):
    u = RealField(torus, np.sin(torus.x))
    assert cordoba_check(u, 1.5, 1.2) == (0.0, 0.0)


def test_cordoba_level_below_minimum(torus):
    u = RealField(torus, np.sin(3 * torus.x))
    lhs, rhs = cordoba_check(u, -2.0, 1.2)
    assert lhs - rhs == pytest.approx(0.0, abs=1e-10)


def test_cordoba_sine_at_zero():
    g = Grid(1024, math.pi)
    u = RealField(g, np.sin(g.x))
    lhs, rhs = cordoba_check(u, 0.0, 1.2)
    # (Lambda^alpha sin, sin_+) = int sin_+^2 = pi/2; the right side converges
    # to 1.159147968341437... (mpmath series) as the grid is refined.
    assert lhs == pytest.approx(math.pi / 2, rel=1e-12)
    assert rhs == pytest.approx(1.1591479683414376, rel=1e-3)
    assert lhs >= rhs - 1e-8 * sobolev_norm(forward(u), 0.6) ** 2


def test_cordoba_family():
    g = Grid(256, 4 * math.pi)
    fam = cordoba_family(g, 1.2, size=100, seed=0)
    assert len(fam) == 100
    assert all(lhs >= rhs - 1e-8 * n for lhs, rhs, n in fam)


# ---- level sets


def reference_run(seed=0, n=128, dt=0.002, t_end=1.0):
    g = Grid(n, math.pi)
    p = Params(alpha=1.2, dt=dt, t_end=t_end)
    u0 = band_field(g, seed, 1, 4)
    f = generate_forcing(ForcingSpec(seed=seed, target_x_norm=0.5), g, p)
    traj, _ = integrate(forward(u0), forward(f), p)
    return traj, u0, f


def test_level_set_large_threshold_empties_sets():
    traj, _, f = reference_run()
    sup = float(np.abs(traj.values).max())
    rep = level_set_energy(traj, 1.0, 2.5 * sup, 3, f)
    assert rep.rows[0].E_n > 0
    assert all(r.E_n == 0 for r in rep.rows[1:])
    assert [r.lambda_n for r in rep.rows] == pytest.approx([2.5 * sup * (1 - 2.0**-n) for n in range(4)])
    assert [r.T_n for r in rep.rows] == [0.0, 0.5, 0.75, 0.875]


def test_level_zero_is_plain_energy_for_positive_solution():
    g = Grid(64, math.pi)
    p = Params(alpha=1.2, dt=0.005, t_end=0.5)
    u0 = forward(RealField(g, 2 + np.sin(g.x)))
    traj, _ = integrate(u0, g.mode(0, 0.0), p)
    rep = level_set_energy(traj, 0.5, 1.0, 0, g.zeros())
    assert rep.rows[0].E_minus == 0
    assert rep.rows[0].E_plus == pytest.approx(rep.energy_functional, rel=1e-12)


def test_level_set_inequality_and_monotonicity():
    traj, _, f = reference_run(seed=1)
    for M in (0.2, 0.6, 1.2):
        rep = level_set_energy(traj, 1.0, M, 5, f)
        assert not rep.violations
        assert rep.decreasing()
        assert len(rep.checks) == 6 * 2 * (len(traj) - 1)


def test_level_set_needs_enough_samples():
    traj, _, f = reference_run(dt=0.01)
    with pytest.raises(ContractViolation, match="finer stride"):
        level_set_energy(traj, 1.0, 1.0, 6, f)


def test_fitted_threshold_drives_energy_down():
    runs = [reference_run(seed=s) for s in (2, 3)]
    trajs = [r[0] for r in runs]
    f = runs[0][2]
    c = fit_level_constant(trajs, 1.0, 5, f)
    assert c > 0
    for traj in trajs:
        base = level_set_energy(traj, 1.0, 0.0, 0, f)
        rep = level_set_energy(traj, 1.0, c * level_scale(base.E0, 1.0, f), 5, f)
        assert rep.decreasing()
        assert rep.rows[-1].E_n <= 1e-8 * rep.E0


# ---- L-infinity constant


def test_linf_zero_trajectory(torus):
    traj = Trajectory(torus, Params(alpha=1.2), np.array([0.0, 0.5]), np.zeros((2, 64)))
    rep = linf_bound_check(traj, torus.zeros(), torus.zeros())
    assert [r.ratio for r in rep.rows] == [0.0]


def test_linf_closed_form_single_mode(torus):
    p = Params(alpha=1.2)
    times = np.array([0.0, 0.25, 1.0, 4.0])
    vals = np.stack([math.exp(-(3**1.2) * t) * np.cos(3 * torus.x) for t in times])
    traj = Trajectory(torus, p, times, vals)
    rep = linf_bound_check(traj, RealField(torus, vals[0]), torus.zeros())
    for r in rep.rows:
        expect = math.exp(-(3**1.2) * r.t) * math.sqrt(r.t) / math.sqrt(math.pi)
        assert r.ratio == pytest.approx(expect, rel=1e-12)


def test_linf_ratio_uniform_across_family():
    g = Grid(128, math.pi)
    p = Params(alpha=1.2, dt=0.005, t_end=2.0)
    ratios = []
    for seed in range(10):
        u0 = band_field(g, seed, 1, 4)
        f = generate_forcing(ForcingSpec(seed=seed, target_x_norm=0.5), g, p)
        traj, _ = integrate(forward(u0), forward(f), p, stride=10)
        ratios.append(linf_bound_check(traj, u0, f).max_ratio)
    assert all(math.isfinite(r) and r > 0 for r in ratios)
    assert max(ratios) <= 2 * min(ratios)
