r"""Periodic grid, Fourier transforms and Fourier-multiplier operators.

Fields live on the torus :math:`[-L, L)` sampled at ``n_modes`` points
:math:`x_j = -L + j\,dx`.  A :class:`Spectrum` holds the amplitudes
:math:`\hat u_k` of :math:`e^{ikx}`, so that

.. math::

    u(x) = \sum_k \hat u_k e^{ikx}, \qquad k = \pi m / L,

stored in numpy FFT order (``m = 0, 1, ..., n/2-1, -n/2, ..., -1``).  Norms
carry the measure factor :math:`2L`, which makes Parseval read
:math:`\int |u|^2 dx = 2L \sum_k |\hat u_k|^2`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ContractViolation, MeanNotZero, ParameterRangeError

MEAN_RTOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-half_period, half_period)``."""

    n_modes: int
    half_period: float = 16 * math.pi

    def __post_init__(self):
        n = self.n_modes
        if not isinstance(n, (int, np.integer)) or n < 8 or n % 2:
            raise ContractViolation(f"n_modes must be an even integer >= 8, got {n!r}")
        if not (self.half_period > 0 and math.isfinite(self.half_period)):
            raise ContractViolation(f"half_period must be positive, got {self.half_period!r}")
        object.__setattr__(self, "n_modes", int(n))
        object.__setattr__(self, "half_period", float(self.half_period))

    @property
    def length(self) -> float:
        return 2.0 * self.half_period

    @property
    def dx(self) -> float:
        return self.length / self.n_modes

    @property
    def k_min(self) -> float:
        """Smallest nonzero wavenumber, pi / L."""
        return math.pi / self.half_period

    @property
    def k_max(self) -> float:
        """Nyquist wavenumber, pi / dx."""
        return math.pi / self.dx

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.half_period + self.dx * np.arange(self.n_modes)
        x.setflags(write=False)
        return x

    @cached_property
    def modes(self) -> np.ndarray:
        """Signed integer mode numbers in FFT order."""
        m = np.fft.fftfreq(self.n_modes, 1.0 / self.n_modes).astype(np.int64)
        m.setflags(write=False)
        return m

    @cached_property
    def k(self) -> np.ndarray:
        k = self.modes * (math.pi / self.half_period)
        k.setflags(write=False)
        return k

    @cached_property
    def abs_k(self) -> np.ndarray:
        a = np.abs(self.k)
        a.setflags(write=False)
        return a

    @cached_property
    def k_deriv(self) -> np.ndarray:
        # Nyquist zeroed so odd-order derivatives of real fields stay real.
        k = self.k.copy()
        k[self.n_modes // 2] = 0.0
        k.setflags(write=False)
        return k

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        mask = np.abs(self.modes) * 3 <= self.n_modes
        mask.setflags(write=False)
        return mask

    @cached_property
    def _phase(self) -> np.ndarray:
        # e^{-i k L} = (-1)^m accounts for the grid starting at x = -L.
        p = np.where(self.modes % 2 == 0, 1.0, -1.0)
        p.setflags(write=False)
        return p

    def index(self, m: int) -> int:
        """Array position of signed mode number ``m``."""
        if not -self.n_modes // 2 <= m < self.n_modes // 2:
            raise ContractViolation(f"mode {m} outside the grid")
        return m % self.n_modes

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fft(values) * (self._phase / self.n_modes)

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.ifft(coeffs * (self._phase * self.n_modes)).real

    def field(self, values) -> "RealField":
        return RealField(self, values)

    def zeros(self) -> "RealField":
        return RealField(self, np.zeros(self.n_modes))

    def mode(self, m: int, amplitude: complex = 1.0) -> "Spectrum":
        """Spectrum of ``amplitude * e^{i k_m x}``."""
        c = np.zeros(self.n_modes, dtype=complex)
        c[self.index(m)] = amplitude
        return Spectrum(self, c)


@dataclass(frozen=True, eq=False)
class RealField:
    """Physical-space samples of a real function on ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_modes,):
            raise ContractViolation(
                f"field has shape {v.shape}, grid expects ({self.grid.n_modes},)"
            )
        if not np.all(np.isfinite(v)):
            raise ContractViolation("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other: "RealField") -> "RealField":
        _same_grid(self.grid, other.grid)
        return RealField(self.grid, self.values + other.values)

    def __sub__(self, other: "RealField") -> "RealField":
        _same_grid(self.grid, other.grid)
        return RealField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "RealField":
        return RealField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "RealField":
        return RealField(self.grid, -self.values)

    @property
    def mean(self) -> float:
        """Integral of the field over the period."""
        return float(self.values.sum() * self.grid.dx)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier amplitudes on ``grid`` in FFT order."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n_modes,):
            raise ContractViolation(
                f"spectrum has shape {c.shape}, grid expects ({self.grid.n_modes},)"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __add__(self, other: "Spectrum") -> "Spectrum":
        _same_grid(self.grid, other.grid)
        return Spectrum(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "Spectrum") -> "Spectrum":
        _same_grid(self.grid, other.grid)
        return Spectrum(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c: complex) -> "Spectrum":
        return Spectrum(self.grid, self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self) -> "Spectrum":
        return Spectrum(self.grid, -self.coeffs)

    def __getitem__(self, m: int) -> complex:
        """Amplitude of signed mode number ``m``."""
        return complex(self.coeffs[self.grid.index(m)])

    def hermitian_defect(self) -> float:
        """max |c(k) - conj(c(-k))| over all k."""
        return hermitian_defect(self.coeffs)


@dataclass(frozen=True)
class Params:
    """PDE and scheme parameters.

    ``eps`` is the small parameter of the steady scheme (alpha < 3/(2+eps));
    ``nu`` is the artificial viscosity of the regularized equation.
    """

    alpha: float
    eps: float = 0.1
    rho: float = 1.0
    nu: float = 0.0
    dt: float = 0.01
    t_end: float = 1.0

    def __post_init__(self):
        if not 1.0 < self.alpha < 1.5:
            raise ParameterRangeError(f"alpha must satisfy 1 < alpha < 3/2, got {self.alpha}")
        if not 0.0 < self.eps < 1.0:
            raise ParameterRangeError(f"eps must satisfy 0 < eps < 1, got {self.eps}")
        if not self.rho > 0:
            raise ParameterRangeError(f"rho must be positive, got {self.rho}")
        if not self.nu >= 0:
            raise ParameterRangeError(f"nu must be nonnegative, got {self.nu}")
        if not (self.dt > 0 and self.t_end > 0):
            raise ParameterRangeError("dt and t_end must be positive")

    @property
    def alpha_limit(self) -> float:
        return 3.0 / (2.0 + self.eps)

    def require_scheme_range(self):
        """Raise unless alpha < 3/(2+eps), the range of the steady scheme."""
        if not self.alpha < self.alpha_limit:
            raise ParameterRangeError(
                f"alpha < 3/(2+eps) violated: alpha={self.alpha} >= {self.alpha_limit:.6g}"
            )


def _same_grid(a: Grid, b: Grid):
    if a != b:
        raise ContractViolation(f"grid mismatch: {a} vs {b}")


def hermitian_defect(c: np.ndarray) -> float:
    # Reflect k -> -k in FFT order: index j -> (-j) mod n.
    mirror = np.conj(np.roll(c[::-1], 1))
    return float(np.max(np.abs(c - mirror)))


def is_mean_zero(c: np.ndarray, rtol: float = MEAN_RTOL) -> bool:
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    return abs(c[0]) <= rtol * scale


def _require_mean_zero(c: np.ndarray, what: str):
    if not is_mean_zero(c):
        raise MeanNotZero(f"{what} requires a mean-zero field (zero mode {c[0]:.3e})")


def forward(f: RealField) -> Spectrum:
    return Spectrum(f.grid, f.grid.to_spectral(f.values))


def inverse(s: Spectrum) -> RealField:
    return RealField(s.grid, s.grid.to_physical(s.coeffs))


def frac_laplacian(s: Spectrum, order: float) -> Spectrum:
    """Multiply each amplitude by ``|k|**order``."""
    if not (order >= 0 and math.isfinite(order)):
        raise ContractViolation(
            f"frac_laplacian needs a finite order >= 0 (got {order}); "
            "use inv_frac_laplacian for negative powers"
        )
    return Spectrum(s.grid, s.coeffs * s.grid.abs_k**order)


def inv_frac_laplacian(s: Spectrum, order: float) -> Spectrum:
    """Divide nonzero modes by ``|k|**order``; the zero mode stays 0."""
    if not order > 0:
        raise ContractViolation(f"inv_frac_laplacian needs order > 0, got {order}")
    _require_mean_zero(s.coeffs, "inv_frac_laplacian")
    return Spectrum(s.grid, s.coeffs * _inv_symbol(s.grid, order))


def _inv_symbol(grid: Grid, order: float) -> np.ndarray:
    w = np.zeros(grid.n_modes)
    w[1:] = grid.abs_k[1:] ** (-order)
    return w


def derivative(s: Spectrum) -> Spectrum:
    return Spectrum(s.grid, s.coeffs * (1j * s.grid.k_deriv))


def semigroup(s: Spectrum, alpha: float, t: float, nu: float = 0.0) -> Spectrum:
    """Apply exp(-(|k|^alpha + nu k^2) t)."""
    if t < 0:
        raise ContractViolation(f"semigroup needs t >= 0, got {t}")
    g = s.grid
    return Spectrum(g, s.coeffs * np.exp(-(g.abs_k**alpha + nu * g.k**2) * t))


def sobolev_weight(grid: Grid, order: float, homogeneous: bool) -> np.ndarray:
    if homogeneous:
        if order < 0:
            w = np.zeros(grid.n_modes)
            w[1:] = grid.abs_k[1:] ** (2 * order)
            return w
        return grid.abs_k ** (2 * order)
    return (1.0 + grid.k**2) ** order


def sobolev_norm(s: Spectrum, order: float, homogeneous: bool = False) -> float:
    r"""Discrete :math:`H^s` (or :math:`\dot H^s`) norm,
    :math:`\sqrt{2L\sum_k w(k)|\hat u_k|^2}`."""
    if homogeneous and order < 0:
        _require_mean_zero(s.coeffs, "negative-order homogeneous norm")
    return _weighted_norm(s.grid, s.coeffs, sobolev_weight(s.grid, order, homogeneous))


def _weighted_norm(grid: Grid, c: np.ndarray, w: np.ndarray) -> float:
    return math.sqrt(grid.length * float(np.sum(w * (c.real**2 + c.imag**2))))


def x_norm(f: RealField, p: Params) -> float:
    """Norm of the forcing space: homogeneous order -alpha/2 plus H^{alpha/2}."""
    s = forward(f)
    return sobolev_norm(s, -p.alpha / 2, homogeneous=True) + sobolev_norm(s, p.alpha / 2)


def lp_norm(f: RealField, p: float) -> float:
    if not p >= 1:
        raise ContractViolation(f"lp_norm needs p >= 1, got {p}")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    return float(np.sum(a**p) * f.grid.dx) ** (1.0 / p)


def dealias(s: Spectrum) -> Spectrum:
    """Two-thirds rule: zero every mode with |k| > (2/3) k_max."""
    return Spectrum(s.grid, np.where(s.grid.dealias_mask, s.coeffs, 0.0))


def inner(u: RealField, v: RealField) -> float:
    """L2 inner product, computed spectrally."""
    _same_grid(u.grid, v.grid)
    cu, cv = u.grid.to_spectral(u.values), v.grid.to_spectral(v.values)
    return float(u.grid.length * np.sum(cu * np.conj(cv)).real)


def random_band_field(
    grid: Grid, rng: np.random.Generator, k_lo: float, k_hi: float
) -> RealField:
    """Random mean-zero real field with modes in ``k_lo <= |k| <= k_hi``,
    normalized to unit maximum."""
    c = np.zeros(grid.n_modes, dtype=complex)
    band = (grid.abs_k >= k_lo) & (grid.abs_k <= k_hi)
    band &= (grid.modes > 0) & (grid.modes < grid.n_modes // 2)
    idx = np.flatnonzero(band)
    c[idx] = rng.normal(size=idx.size) + 1j * rng.normal(size=idx.size)
    c[(-grid.modes[idx]) % grid.n_modes] = np.conj(c[idx])
    v = grid.to_physical(c)
    peak = np.abs(v).max()
    return RealField(grid, v / peak if peak > 0 else v)
