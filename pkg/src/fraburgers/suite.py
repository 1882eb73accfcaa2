"""Invariant suite behind the ``verify`` command.

Each check evaluates one identity on seeded fields and records the
measured defect next to its tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import split_diagnostic, truncate
from .evolution import EvolutionState, Trajectory, integrate, step
from .inequalities import inequality_ratios
from .spectral import (
    Grid,
    Params,
    RealField,
    Spectrum,
    derivative,
    forward,
    frac_laplacian,
    inner,
    inverse,
    lp_norm,
    random_band_field,
    semigroup,
    sobolev_norm,
)


_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class PropertyResult:
    name: str
    defect: float
    tol: float
    ok: bool


def _result(name, defect, tol):
    return PropertyResult(name, float(defect), tol, bool(defect <= tol))


def _rel(a, b):
    scale = max(np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / scale)


def single_mode_defects(grid: Grid, alpha: float, t: float = 0.7) -> dict[str, float]:
    """Worst relative error of Lambda^alpha, d/dx and the semigroup on cos(kx)
    against |k|^alpha, ik and e^{-t|k|^alpha}, over every non-Nyquist mode.
    Errors are relative to max(|expected|, smallest normal double)."""
    worst = {"frac_laplacian": 0.0, "derivative": 0.0, "semigroup": 0.0}
    for m in range(grid.n_modes // 2):
        k = m * grid.k_min
        # Built from physical samples so the check covers the transform too.
        s = forward(RealField(grid, np.cos(k * grid.x)))
        amp = 1.0 if m == 0 else 0.5
        expect = {
            "frac_laplacian": amp * abs(k) ** alpha,
            "derivative": amp * 1j * k,
            "semigroup": amp * math.exp(-t * abs(k) ** alpha),
        }
        got = {
            "frac_laplacian": frac_laplacian(s, alpha)[m],
            "derivative": derivative(s)[m],
            "semigroup": semigroup(s, alpha, t)[m],
        }
        for key in worst:
            e = expect[key]
            # Subnormal results carry no relative precision; floor the scale.
            err = abs(got[key] - e) / max(abs(e), _TINY)
            worst[key] = max(worst[key], err)
    return worst


def _dilated_packet(grid: Grid, width: float) -> RealField:
    x = grid.x
    return RealField(grid, x / width * np.exp(-0.5 * (x / width) ** 2))


def property_suite(grid: Grid, p: Params, seed: int = 0) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    kmax = grid.k_max / 3
    u = random_band_field(grid, rng, grid.k_min, kmax)
    v = random_band_field(grid, rng, grid.k_min, kmax)
    su, sv = forward(u), forward(v)
    out = []

    for key, d in single_mode_defects(grid, p.alpha).items():
        out.append(_result(f"single_mode_{key}", d, 1e-12))

    l2_phys = math.sqrt(float(np.sum(u.values**2)) * grid.dx)
    out.append(_result("parseval", abs(l2_phys - sobolev_norm(su, 0.0)) / l2_phys, 1e-12))

    a = inner(inverse(frac_laplacian(su, p.alpha)), v)
    b = inner(u, inverse(frac_laplacian(sv, p.alpha)))
    out.append(_result("self_adjointness", abs(a - b) / max(abs(a), 1e-300), 1e-12))

    c = 3.7
    out.append(
        _result(
            "homogeneity",
            _rel(frac_laplacian(su * c, p.alpha).coeffs, c * frac_laplacian(su, p.alpha).coeffs),
            1e-12,
        )
    )

    sp = Params(p.alpha, p.eps, p.rho, p.nu, min(p.dt, 0.5 * grid.dx), p.t_end)
    st = EvolutionState(0.0, forward(u * 0.5), sp)
    defect = 0.0
    for _ in range(20):
        st = step(st, sv * 0.1)
        defect = max(defect, st.u.hermitian_defect())
    out.append(_result("hermitian_preservation", defect, 1e-12))

    shifted = Spectrum(grid, su.coeffs + np.eye(1, grid.n_modes, 0)[0] * 0.3)
    mp = Params(p.alpha, p.eps, p.rho, p.nu, sp.dt, 50 * sp.dt)
    _, ledger = integrate(shifted * 0.5, sv * 0.1, mp)
    means = ledger.column("mean")
    out.append(_result("mean_conservation", float(np.max(np.abs(means - means[0]))), 1e-10))

    lam = 0.3
    tu, tv = truncate(u, lam), truncate(v, lam)
    lip = float(np.max(np.abs(tu.values - tv.values) - np.abs(u.values - v.values)))
    out.append(_result("truncation_lipschitz", max(lip, 0.0), 1e-15))
    lp_excess = max(
        max(lp_norm(truncate(u, lam, side), q) - lp_norm(u, q), 0.0)
        for side in ("plus", "minus")
        for q in (1.0, 2.0, 4.0, math.inf)
    )
    out.append(_result("truncation_lp_contraction", lp_excess, 1e-15))
    idem = float(np.max(np.abs(truncate(tu, 0.0).values - tu.values)))
    out.append(_result("truncation_idempotent", idem, 0.0))

    traj = Trajectory(grid, p, np.array([0.0, 1.0, 5.0]), np.stack([u.values, v.values, (u + v).values]))
    worst = 0.0
    for row, vals in zip(split_diagnostic(traj, p).rows, traj.values):
        total = sobolev_norm(forward(RealField(grid, vals)), 0.0) ** 2
        worst = max(worst, abs(row.low_energy + row.high_energy - total) / total)
    out.append(_result("mode_partition", worst, 1e-12))
    return out


def embedding_scale_defect(grid: Grid, p: Params, lp: float = 4.0, width: float = 1.0) -> float:
    """Relative change of the embedding ratio under x -> 2x and x -> x/2 on a
    localized packet, where the ratio is dilation invariant."""
    base = inequality_ratios(_dilated_packet(grid, width), p, lp=lp).embedding
    worst = 0.0
    for w in (width / 2, width * 2):
        r = inequality_ratios(_dilated_packet(grid, w), p, lp=lp).embedding
        worst = max(worst, abs(r - base) / base)
    return worst
