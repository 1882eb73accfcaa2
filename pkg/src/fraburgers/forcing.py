"""Deterministic band-limited forcing.

Each mode draws its phase from a Philox stream keyed by the seed with the
mode number as counter, so the field does not depend on generation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ContractViolation
from .spectral import Grid, Params, RealField, Spectrum, inverse, x_norm
from .steady import GATE_LIMIT, smallness_constant

AUTO_GATE = "auto-gate"
PROFILES = ("random-phase", "cosine", "sine")
_KEY_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class ForcingSpec:
    """``target_x_norm`` is a positive |f|_X or ``"auto-gate"``, which scales f
    so that the gate value equals ``margin / 3``."""

    seed: int = 0
    rho: float = 1.0
    k_max_frac: float = 0.25
    target_x_norm: Union[float, str] = AUTO_GATE
    margin: float = 0.5
    profile: str = "random-phase"

    def __post_init__(self):
        if not self.rho > 0:
            raise ContractViolation(f"rho must be positive, got {self.rho}")
        if not 0 < self.k_max_frac <= 2.0 / 3.0:
            raise ContractViolation(f"k_max_frac must lie in (0, 2/3], got {self.k_max_frac}")
        if self.profile not in PROFILES:
            raise ContractViolation(f"unknown profile {self.profile!r}; choose from {PROFILES}")
        if self.target_x_norm != AUTO_GATE:
            t = float(self.target_x_norm)
            if not (t > 0 and math.isfinite(t)):
                raise ContractViolation(f"target_x_norm must be positive, got {t}")
            object.__setattr__(self, "target_x_norm", t)
        if not 0 < self.margin <= 1:
            raise ContractViolation(f"margin must lie in (0, 1], got {self.margin}")


def _phase(seed: int, m: int) -> float:
    bitgen = np.random.Philox(key=seed & _KEY_MASK, counter=[m, 0, 0, 0])
    return float(np.random.Generator(bitgen).uniform(0.0, 2.0 * math.pi))


def band_modes(spec: ForcingSpec, grid: Grid) -> np.ndarray:
    """Positive mode numbers in the band rho <= |k| <= k_max_frac * k_max."""
    m = np.arange(1, grid.n_modes // 2)
    k = m * grid.k_min
    return m[(k >= spec.rho * (1 - 1e-12)) & (k <= spec.k_max_frac * grid.k_max * (1 + 1e-12))]


def generate_forcing(spec: ForcingSpec, grid: Grid, p: Params) -> RealField:
    if spec.rho < grid.k_min * (1 - 1e-12):
        raise ContractViolation(
            f"rho={spec.rho:.6g} is below the smallest resolved wavenumber pi/L={grid.k_min:.6g}"
        )
    modes = band_modes(spec, grid)
    if modes.size == 0:
        raise ContractViolation("forcing band contains no grid modes")
    c = np.zeros(grid.n_modes, dtype=complex)
    for m in modes:
        if spec.profile == "random-phase":
            ph = _phase(spec.seed, int(m))
        elif spec.profile == "cosine":
            ph = 0.0
        else:
            ph = -math.pi / 2
        c[m] = np.exp(1j * ph)
        c[-m] = np.conj(c[m])
    f = inverse(Spectrum(grid, c))
    norm = x_norm(f, p)
    if spec.target_x_norm == AUTO_GATE:
        p.require_scheme_range()
        target = spec.margin * GATE_LIMIT * p.eps / smallness_constant(p.alpha, p.eps)
    else:
        target = spec.target_x_norm
    return f * (target / norm)
