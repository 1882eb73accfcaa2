import math

import numpy as np
import pytest

import fraburgers.steady as steady_mod
from fraburgers.errors import (
    DivergenceError,
    MeanNotZero,
    NonContractionError,
    ParameterRangeError,
    SmallnessGateError,
    TailNotConverged,
)
from fraburgers.forcing import ForcingSpec, generate_forcing
from fraburgers.spectral import (
    Grid,
    Params,
    RealField,
    forward,
    inverse,
    sobolev_norm,
)
from fraburgers.steady import (
    h_half_bound,
    linear_steady_solve,
    picard_solve,
    smallness_constant,
    smallness_gate,
    steady_residual,
    steady_via_time_integral,
    uniqueness_probe,
)

from conftest import band_field

# Closed-form constant evaluated with mpmath at 30 digits.
C_VALUES = [
    (1.2, 0.1, 9.8994949366116653),
    (1.1, 0.1, 6.5990267433351305),
    (1.3, 0.1, 18.30214331523532),
    (1.25, 0.2, 27.129319932501073),
]


@pytest.mark.parametrize("alpha,eps,expect", C_VALUES)
def test_smallness_constant(alpha, eps, expect):
    assert smallness_constant(alpha, eps) == pytest.approx(expect, rel=1e-14)


def test_smallness_constant_small_eps_uses_second_branch():
    # 3 eps only wins when the square-root branch is smaller
    assert smallness_constant(1.01, 0.9) == pytest.approx(
        max(2.7, 4 * math.sqrt(1.01 * 0.9 * (12 - 2 * 1.01 * 0.9)) / (3 - 2.02 - 0.909))
    )


def test_gate_of_zero_forcing(torus, params):
    rep = smallness_gate(torus.zeros(), params)
    assert rep.gate_value == 0 and rep.passed
    assert rep.C_alpha_eps == pytest.approx(9.8994949366116653)


def test_gate_fails_near_alpha_limit(torus):
    p = Params(alpha=3 / 2.1 - 1e-9, eps=0.1)
    rep = smallness_gate(RealField(torus, 1e-6 * np.sin(torus.x)), p)
    assert rep.C_alpha_eps > 1e8
    assert not rep.passed


def test_gate_rejects_alpha_out_of_range(torus):
    with pytest.raises(ParameterRangeError, match=r"alpha < 3/\(2\+eps\)"):
        smallness_gate(torus.zeros(), Params(alpha=1.45, eps=0.1))


def test_gate_value_formula(torus, params):
    f = RealField(torus, 1e-4 * np.sin(2 * torus.x))
    rep = smallness_gate(f, params)
    assert rep.gate_value == pytest.approx(rep.C_alpha_eps * rep.f_x_norm / 0.1, rel=1e-15)


# ---- linear solve


def test_linear_solve_diagonal_case(torus, params):
    f = forward(band_field(torus, 1))
    U = linear_steady_solve(torus.mode(0, 0.0), f, params, tol=1e-14)
    expect = np.zeros(64, dtype=complex)
    expect[1:] = f.coeffs[1:] / torus.abs_k[1:] ** 1.2
    assert np.allclose(U.coeffs, expect, atol=1e-15)


def test_linear_solve_zero_forcing(torus, params):
    V = forward(band_field(torus, 2)) * 0.1
    U = linear_steady_solve(V, torus.mode(0, 0.0), params)
    assert np.all(U.coeffs == 0)


def test_linear_solve_rejects_mean(torus, params):
    with pytest.raises(MeanNotZero):
        linear_steady_solve(torus.mode(0, 0.0), torus.mode(0, 1.0) + torus.mode(1, 1.0), params)


def dense_solve(grid, V, f, alpha):
    """Galerkin system on the dealiased modes 1 <= |m| <= n/3, assembled
    from the exact convolution of Fourier series."""
    n = grid.n_modes
    top = n // 3
    ms = [m for m in range(-top, top + 1) if m != 0]
    vhat = {m: V[m] for m in range(-top, top + 1)}
    A = np.zeros((len(ms), len(ms)), dtype=complex)
    for a, k in enumerate(ms):
        kk = k * grid.k_min
        A[a, a] += abs(kk) ** alpha
        for b, j in enumerate(ms):
            A[a, b] += 0.5j * kk * vhat.get(k - j, 0.0)
    sol = np.linalg.solve(A, np.array([f[m] for m in ms]))
    out = np.zeros(n, dtype=complex)
    for m, c in zip(ms, sol):
        out[grid.index(m)] = c
    return out


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_linear_solve_matches_dense_oracle(seed):
    g = Grid(64, math.pi)
    p = Params(alpha=1.2)
    V = forward(band_field(g, 100 + seed)) * 0.2
    f = forward(band_field(g, 200 + seed, 1, 8))
    tol = 1e-12
    U = linear_steady_solve(V, f, p, tol=tol)
    ref = dense_solve(g, V, f, 1.2)
    assert sobolev_norm(U - type(U)(g, ref), 0.0) <= 10 * tol


def test_linear_solve_divergence_detected(torus, params):
    V = RealField(torus, 50 * np.sin(torus.x))
    with pytest.raises(DivergenceError) as exc:
        linear_steady_solve(forward(V), forward(band_field(torus, 3)), params)
    assert len(exc.value.history) >= 4


# ---- Picard


def gate_forcing(grid, p, seed, margin=0.9, k_max_frac=0.25):
    return generate_forcing(ForcingSpec(seed=seed, k_max_frac=k_max_frac, margin=margin), grid, p)


def test_picard_zero_forcing(torus, params):
    U, trace = picard_solve(torus.zeros(), params)
    assert np.all(U.values == 0)
    assert len(trace.rows) == 1 and trace.converged
    assert trace.rows[0].increment_norm == 0


@pytest.mark.parametrize("alpha", [1.1, 1.2, 1.3])
def test_picard_contracts_and_respects_bound(alpha):
    g = Grid(128, 4 * math.pi)
    p = Params(alpha=alpha)
    f = gate_forcing(g, p, seed=3)
    tol = 1e-11
    U, trace = picard_solve(f, p, tol=tol)
    assert trace.converged
    assert math.isnan(trace.rows[0].ratio)
    assert all(r.ratio <= 0.6 for r in trace.rows if r.i >= 2)
    assert trace.bound_ok()
    assert trace.rows[-1].residual <= 10 * tol
    assert trace.column("i").tolist() == list(range(len(trace.rows)))
    assert steady_residual(forward(U), forward(f), p) <= 10 * tol


def test_picard_output_is_a_fixed_point():
    g = Grid(128, 2 * math.pi)
    p = Params(alpha=1.2)
    f = gate_forcing(g, p, seed=4)
    tol = 1e-12
    U, _ = picard_solve(f, p, tol=tol)
    again = linear_steady_solve(forward(U), forward(f), p, tol=1e-15)
    assert sobolev_norm(again - forward(U), 0.6, homogeneous=True) <= tol


def test_picard_iterates_have_zero_mean():
    g = Grid(128, 2 * math.pi)
    p = Params(alpha=1.2)
    U, _ = picard_solve(gate_forcing(g, p, seed=5), p)
    assert abs(forward(U)[0]) < 1e-18


def test_picard_refuses_gate_failure(torus, params):
    f = RealField(torus, np.sin(torus.x))
    with pytest.raises(SmallnessGateError) as exc:
        picard_solve(f, params)
    assert exc.value.report.gate_value > 1 / 3


def test_picard_without_gate_still_converges_for_moderate_forcing(torus, params):
    U, trace = picard_solve(RealField(torus, np.sin(torus.x)), params, enforce_gate=False)
    assert trace.converged
    assert trace.rows[-1].ratio > 0.3


def test_picard_budget_exhausted_with_slow_ratio_raises(torus, params, monkeypatch):
    target = forward(RealField(torus, 1e-4 * np.sin(torus.x))).coeffs

    def slow(grid, v, fc, alpha, tol, max_iter, c0=None):
        # A contraction with factor 0.95 toward ``target``.
        return target + 0.95 * (c0 - target), [0.0]

    monkeypatch.setattr(steady_mod, "_linear_solve", slow)
    with pytest.raises(NonContractionError) as exc:
        picard_solve(RealField(torus, 1e-4 * np.sin(torus.x)), params, max_iter=10)
    assert exc.value.trace.rows[-1].ratio == pytest.approx(0.95)


def test_picard_budget_exhausted_with_fast_ratio_returns(torus, params):
    U, trace = picard_solve(
        RealField(torus, np.sin(torus.x)), params, max_iter=3, enforce_gate=False
    )
    assert not trace.converged and len(trace.rows) == 3


# ---- time-integral route


def test_time_integral_without_coefficient(torus):
    p = Params(alpha=1.2, dt=0.01)
    f = forward(band_field(torus, 6, 1, 8))
    out = steady_via_time_integral(torus.mode(0, 0.0), f, p, tail_tol=1e-12)
    raw = steady_via_time_integral(torus.mode(0, 0.0), f, p, tail_tol=1e-12, end_correction=False)
    expect = f.coeffs * np.where(torus.abs_k > 0, torus.abs_k, 1.0) ** -1.2
    expect[0] = 0
    err = sobolev_norm(out - type(out)(torus, expect), 0.0)
    err_raw = sobolev_norm(raw - type(out)(torus, expect), 0.0)
    # The semigroup step is exact here; what remains is quadrature error,
    # O(dt^2) for the plain trapezoid sum and O(dt^4) once corrected.
    assert err_raw <= 1e-12 + p.dt**2
    assert err <= 1e-12 + p.dt**4 * 1e2
    assert err < 1e-3 * err_raw


def test_time_integral_of_zero(torus, params):
    out = steady_via_time_integral(torus.mode(0, 0.0), torus.mode(0, 0.0), params)
    assert np.all(out.coeffs == 0)


@pytest.mark.parametrize("seed", [7, 8])
def test_dual_route_agreement(seed):
    g = Grid(128, 2 * math.pi)
    p = Params(alpha=1.2, dt=0.01)
    f = gate_forcing(g, p, seed=seed)
    U, _ = picard_solve(f, p, tol=1e-12)
    a = linear_steady_solve(forward(U), forward(f), p, tol=1e-14)
    b = steady_via_time_integral(forward(U), forward(f), p, tail_tol=1e-12)
    assert sobolev_norm(a - b, 0.0) <= 1e-4 * sobolev_norm(a, 0.0)


def test_tail_not_converged(torus, params):
    f = forward(band_field(torus, 9))
    with pytest.raises(TailNotConverged) as exc:
        steady_via_time_integral(torus.mode(0, 0.0), f, params, tail_tol=1e-14, max_time=2)
    assert exc.value.horizon == 2 and exc.value.last_increment > 1e-14


# ---- uniqueness


def test_uniqueness_no_restarts(torus, params):
    rep = uniqueness_probe(torus.zeros(), torus.zeros(), params, 0)
    assert rep.restarts == [] and rep.spread == 0


def test_uniqueness_zero_forcing(torus, params):
    rep = uniqueness_probe(torus.zeros(), torus.zeros(), params, 3)
    assert rep.spread == 0 and not rep.failures


def test_uniqueness_multistart_agrees():
    g = Grid(128, 4 * math.pi)
    p = Params(alpha=1.2)
    f = gate_forcing(g, p, seed=10)
    tol = 1e-11
    U, _ = picard_solve(f, p, tol=tol)
    rep = uniqueness_probe(U, f, p, 5, tol=tol, seed=3, workers=2)
    assert len(rep.restarts) == 5 and not rep.failures
    assert all(r.start_norm == pytest.approx(0.9 * h_half_bound(smallness_gate(f, p), p)) for r in rep.restarts)
    assert rep.spread <= 10 * tol


def test_uniqueness_reports_failures_instead_of_raising(torus, params, monkeypatch):
    def boom(*a, **k):
        raise DivergenceError("forced failure")

    monkeypatch.setattr(steady_mod, "picard_solve", boom)
    rep = uniqueness_probe(torus.zeros(), RealField(torus, 1e-5 * np.sin(torus.x)), params, 2)
    assert len(rep.failures) == 2
    assert "forced failure" in rep.failures[0].error
    assert inverse(forward(torus.zeros())).values.sum() == 0
