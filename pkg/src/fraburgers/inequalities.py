"""Empirical ratios for the embedding, interpolation and product estimates.

The constants in these inequalities are never computed in closed form.  We
evaluate LHS/RHS on concrete fields and record the maxima over a seeded
family; finiteness and scale invariance are what gets checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .spectral import (
    Grid,
    Params,
    RealField,
    frac_laplacian,
    forward,
    inverse,
    is_mean_zero,
    random_band_field,
    lp_norm,
    sobolev_norm,
)

# Denominators below this are reported as not applicable.
_DEGENERATE = 1e-300


@dataclass(frozen=True)
class RatioReport:
    embedding: float | None
    interpolation: float | None
    product: float | None
    p: float
    sigma: float
    interp_exponent: float

    def as_row(self) -> dict:
        return {
            "embedding": _fmt_na(self.embedding),
            "interpolation": _fmt_na(self.interpolation),
            "product": _fmt_na(self.product),
        }


def _fmt_na(v):
    return "n/a" if v is None else v


def _ratio(num: float, den: float) -> float | None:
    if not (den > _DEGENERATE and math.isfinite(den) and math.isfinite(num)):
        return None
    return num / den


def _lambda_lp(f: RealField, s: float, p: float) -> float:
    return lp_norm(inverse(frac_laplacian(forward(f), s)), p)


def inequality_ratios(
    sample: RealField,
    p: Params,
    g: RealField | None = None,
    lp: float = 4.0,
    sigma: float | None = None,
) -> RatioReport:
    """LHS/RHS of the three estimates evaluated on ``sample``.

    * embedding: ``|f|_{L^lp} / |Lambda^delta f|_{L^2}`` with ``delta = 1/2 - 1/lp``;
    * interpolation: ``|f|_{L^lp} / (|f|_{L^2}^a |Lambda^sigma f|_{L^2}^{1-a})``,
      ``sigma`` defaulting to ``alpha/2`` and ``a`` fixed by scaling;
    * product: ``|Lambda^s (f g)|_{L^2}`` against the split used for the
      steady scheme, ``s = 1 - alpha/2``, exponents ``(2, inf)`` and
      ``(1/(alpha-1), 2/(3-2alpha))``.

    ``g`` defaults to ``sample``.  A vanishing denominator yields ``None``.
    """
    if not lp >= 2 or math.isinf(lp):
        raise ContractViolation(f"embedding exponent must satisfy 2 <= p < inf, got {lp}")
    if not is_mean_zero(forward(sample).coeffs):
        raise ContractViolation("ratios are evaluated on mean-zero samples only")
    if not np.any(sample.values):
        raise ContractViolation("inequality_ratios needs a nonzero sample")
    g = sample if g is None else g
    sigma = p.alpha / 2 if sigma is None else sigma
    delta = 0.5 - 1.0 / lp
    if sigma < delta:
        raise ContractViolation(f"sigma={sigma} below delta={delta}: no admissible a")

    s = forward(sample)
    f_lp = lp_norm(sample, lp)
    embedding = _ratio(f_lp, sobolev_norm(s, delta, homogeneous=True))

    a = (1.0 / lp - 0.5 + sigma) / sigma
    den = sobolev_norm(s, 0.0) ** a * sobolev_norm(s, sigma, homogeneous=True) ** (1 - a)
    interpolation = _ratio(f_lp, den)

    order = 1.0 - p.alpha / 2
    p2 = 1.0 / (p.alpha - 1.0)
    q2 = 2.0 / (3.0 - 2.0 * p.alpha)
    prod = RealField(sample.grid, sample.values * g.values)
    lhs = _lambda_lp(prod, order, 2.0)
    rhs = _lambda_lp(sample, order, 2.0) * lp_norm(g, math.inf) + lp_norm(
        sample, p2
    ) * _lambda_lp(g, order, q2)
    product = _ratio(lhs, rhs)
    return RatioReport(embedding, interpolation, product, lp, sigma, a)


@dataclass(frozen=True)
class RatioFamily:
    reports: list[RatioReport]

    def maxima(self) -> dict[str, float]:
        out = {}
        for name in ("embedding", "interpolation", "product"):
            vals = [getattr(r, name) for r in self.reports if getattr(r, name) is not None]
            out[name] = max(vals) if vals else math.nan
        return out

    def all_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.maxima().values())


def ratio_family(
    grid: Grid,
    p: Params,
    size: int = 100,
    seed: int = 0,
    k_band: tuple[float, float] | None = None,
    lp: float = 4.0,
) -> RatioFamily:
    """Ratios over ``size`` seeded band-limited samples (f = g)."""
    rng = np.random.default_rng(seed)
    lo, hi = k_band if k_band is not None else (grid.k_min, grid.k_max * 2 / 3)
    reports = [
        inequality_ratios(random_band_field(grid, rng, lo, hi), p, lp=lp)
        for _ in range(size)
    ]
    return RatioFamily(reports)
