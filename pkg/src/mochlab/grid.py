"""Periodic grids, sampled fields and constant-coefficient Fourier multipliers.

Fields live on the torus [-L/2, L/2) sampled at ``n`` equispaced nodes.
Internally every operator works on the half spectrum returned by
:func:`numpy.fft.rfft` (unnormalized, numpy sign convention); the public
:class:`SpectralField` uses the full, ``1/n``-normalized coefficient set so
that ``cos(k x)`` carries ``1/2`` at ``+k`` and ``-k``.

Two evaluation primitives go beyond plain FFTs:

* :func:`sup_norm` returns the supremum of the trigonometric interpolant,
  not just the largest sample.  Sampled maxima can undershoot by a factor
  ``cos(F h / 2)`` for content at angular frequency ``F``; the candidates
  that can still hold the true maximum are refined by Newton iteration on
  a local Taylor expansion built from spectral derivatives.
* :func:`evaluate_at` evaluates a band-limited field at arbitrary points by
  Taylor expansion about the nearest node, which reproduces direct
  Fourier summation (:func:`evaluate_direct`) to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import finufft
import numpy as np

from . import fft as _fft
from .errors import GridError, NonFiniteFieldError

# Taylor remainders below this fraction of the field's scale are ignored.
_TAYLOR_TOL = 1e-17


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Equispaced periodic grid on ``[-L/2, L/2)``.

    Parameters
    ----------
    num_points : int
        Number of nodes; a power of two, at least 8.
    period : float
        Length ``L`` of the periodic cell.
    """

    num_points: int
    period: float = 2 * math.pi

    def __post_init__(self):
        n = self.num_points
        if not isinstance(n, (int, np.integer)) or not _is_power_of_two(int(n)):
            raise GridError(f"count must be power of two, got {n!r}")
        if n < 8:
            raise GridError(f"count must be at least 8, got {n}")
        if not (self.period > 0 and math.isfinite(self.period)):
            raise GridError(f"period must be positive, got {self.period!r}")
        object.__setattr__(self, "num_points", int(n))
        object.__setattr__(self, "period", float(self.period))

    @property
    def spacing(self) -> float:
        return self.period / self.num_points

    @property
    def nyquist_index(self) -> int:
        return self.num_points // 2

    @property
    def max_frequency(self) -> float:
        """Angular frequency of the Nyquist mode."""
        return 2 * math.pi * self.nyquist_index / self.period

    @cached_property
    def nodes(self) -> np.ndarray:
        return -self.period / 2 + self.spacing * np.arange(self.num_points)

    @cached_property
    def mode_numbers(self) -> np.ndarray:
        """Integer mode numbers in FFT order, Nyquist stored as ``+n/2``."""
        k = np.fft.fftfreq(self.num_points, d=1.0 / self.num_points).astype(np.int64)
        k[self.nyquist_index] = self.nyquist_index
        return k

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers ``2 pi k / L`` in FFT order."""
        return 2 * math.pi * self.mode_numbers / self.period

    @cached_property
    def xi(self) -> np.ndarray:
        """Non-negative angular wavenumbers of the half spectrum."""
        return 2 * math.pi * np.arange(self.nyquist_index + 1) / self.period

    @cached_property
    def derivative_symbol(self) -> np.ndarray:
        sym = 1j * self.xi
        sym[-1] = 0.0
        return sym

    @cached_property
    def helmholtz_inverse_symbol(self) -> np.ndarray:
        return -1.0 / (1.0 + self.xi**2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        k = np.arange(self.nyquist_index + 1)
        return k <= (2.0 / 3.0) * self.nyquist_index

    # -- transforms on raw arrays -------------------------------------------

    def rfft(self, samples: np.ndarray) -> np.ndarray:
        return _fft.rfft(samples)

    def irfft(self, spectrum: np.ndarray) -> np.ndarray:
        return _fft.irfft(spectrum, self.num_points)


def make_grid(num_points: int, period: float = 2 * math.pi) -> Grid:
    """Build a :class:`Grid`; rejects non-power-of-two counts and bad periods."""
    return Grid(num_points, period)


@dataclass(frozen=True, eq=False)
class RealField:
    """Real samples of a periodic function, one per grid node."""

    grid: Grid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.shape != (self.grid.num_points,):
            raise GridError(
                f"samples length {s.shape} does not match grid of {self.grid.num_points}"
            )
        if not np.all(np.isfinite(s)):
            raise NonFiniteFieldError("field contains non-finite samples")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, grid: Grid, func) -> RealField:
        return cls(grid, func(grid.nodes))

    @classmethod
    def from_spectrum(cls, grid: Grid, spectrum: np.ndarray) -> RealField:
        return cls(grid, grid.irfft(spectrum))

    @cached_property
    def spectrum(self) -> np.ndarray:
        """Half spectrum (numpy ``rfft`` convention)."""
        spec = self.grid.rfft(self.samples)
        spec.setflags(write=False)
        return spec

    def _check(self, other: RealField):
        if other.grid != self.grid:
            raise GridError("fields live on different grids")

    def _coerce(self, other):
        if isinstance(other, RealField):
            self._check(other)
            return other.samples
        return other

    def __add__(self, other):
        return RealField(self.grid, self.samples + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return RealField(self.grid, self.samples - self._coerce(other))

    def __rsub__(self, other):
        return RealField(self.grid, self._coerce(other) - self.samples)

    def __mul__(self, other):
        return RealField(self.grid, self.samples * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return RealField(self.grid, self.samples / self._coerce(other))

    def __neg__(self):
        return RealField(self.grid, -self.samples)

    def __pow__(self, p):
        return RealField(self.grid, self.samples**p)

    def shifted(self, cells: int) -> RealField:
        """Translate by an integer number of grid cells."""
        return RealField(self.grid, np.roll(self.samples, cells))

    def max_abs(self) -> float:
        """Largest sample magnitude (not the interpolant's sup)."""
        return float(np.max(np.abs(self.samples)))

    def mean(self) -> float:
        return float(np.mean(self.samples))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Full set of normalized Fourier coefficients, in FFT order."""

    grid: Grid
    coefficients: np.ndarray = field(repr=False)

    def coefficient(self, mode: int) -> complex:
        n = self.grid.num_points
        return complex(self.coefficients[mode % n])


def _origin_phase(grid: Grid) -> np.ndarray:
    # coefficients refer to x = 0, samples start at x = -L/2
    return np.exp(-1j * grid.wavenumbers * grid.nodes[0])


def to_spectral(f: RealField) -> SpectralField:
    """Coefficients ``c_k`` with ``f(x) = sum_k c_k exp(i 2 pi k x / L)``."""
    g = f.grid
    return SpectralField(g, np.fft.fft(f.samples) / g.num_points * _origin_phase(g))


def to_physical(s: SpectralField) -> RealField:
    g = s.grid
    vals = np.fft.ifft(s.coefficients / _origin_phase(g) * g.num_points)
    return RealField(g, vals.real)


def apply_symbol(f: RealField, symbol: np.ndarray) -> RealField:
    return RealField.from_spectrum(f.grid, f.spectrum * symbol)


def derivative(f: RealField, order: int = 1) -> RealField:
    """Spectral derivative; the Nyquist mode of odd derivatives is dropped."""
    return apply_symbol(f, f.grid.derivative_symbol**order)


def helmholtz_inverse(f: RealField) -> RealField:
    """Apply ``(d_xx - 1)^{-1}``, symbol ``-1/(1+xi^2)``."""
    return apply_symbol(f, f.grid.helmholtz_inverse_symbol)


def helmholtz(f: RealField) -> RealField:
    """Apply ``d_xx - 1``."""
    return apply_symbol(f, -(1.0 + f.grid.xi**2))


def dealias(f: RealField) -> RealField:
    """Zero every mode with ``|k| > (2/3) n/2``."""
    return apply_symbol(f, f.grid.dealias_mask)


# -- band-limited evaluation --------------------------------------------------


def _taylor_order(theta: float) -> int:
    """Smallest P with ``theta**(P+1)/(P+1)! < _TAYLOR_TOL``."""
    p = 0
    term = theta
    while term > _TAYLOR_TOL:
        p += 1
        term *= theta / (p + 1)
        if p > 200:
            raise GridError("Taylor expansion does not converge for this bandwidth")
    return p


def effective_bandwidth(grid: Grid, spectrum: np.ndarray, rel_tol: float = 1e-13) -> float:
    """Largest angular frequency whose coefficient exceeds ``rel_tol * peak``.

    Content below the tolerance perturbs a sup by at most that fraction, so
    it does not need to be resolved.
    """
    mag = np.abs(spectrum)
    peak = mag.max() if mag.size else 0.0
    if peak == 0.0:
        return 0.0
    idx = np.flatnonzero(mag > rel_tol * peak)
    return float(grid.xi[idx[-1]])


def _node_derivatives(grid, spectrum, order, idx):
    """Scaled derivatives ``h^m f^(m)`` for m = 0..order at node indices."""
    sym = grid.derivative_symbol.copy()
    # keep the Nyquist cosine's even derivatives; irfft drops the odd ones
    sym[-1] = 1j * grid.xi[-1]
    sym = sym * grid.spacing
    out = np.empty((order + 1, idx.size))
    cur = np.array(spectrum, dtype=complex)
    for m in range(order + 1):
        out[m] = grid.irfft(cur)[idx]
        cur = cur * sym
    return out


def _taylor_eval(derivs, s, deriv=0):
    """Evaluate the ``deriv``-th s-derivative of sum_m derivs[m] s^m / m!."""
    order = derivs.shape[0] - 1
    acc = np.zeros(derivs.shape[1])
    for m in range(order, deriv - 1, -1):
        acc = acc * s / (m - deriv + 1) + derivs[m]
    return acc


def sup_norm(grid: Grid, spectrum: np.ndarray, samples: np.ndarray | None = None) -> float:
    """Supremum of ``|f|`` for the trigonometric interpolant of ``spectrum``.

    Parameters
    ----------
    grid : Grid
    spectrum : ndarray
        Half spectrum of ``f``.
    samples : ndarray, optional
        ``irfft(spectrum)`` if already available.
    """
    f = grid.irfft(spectrum) if samples is None else samples
    m = float(np.max(np.abs(f)))
    if m == 0.0:
        return 0.0
    bw = effective_bandwidth(grid, spectrum)
    theta = 0.5 * bw * grid.spacing
    if 1.0 - math.cos(theta) < 1e-16:
        return m
    # a trig polynomial of degree F with sup S satisfies |f(x*+d)| >= S cos(F d)
    thresh = m * math.cos(theta) if theta < math.pi / 2 else 0.0
    idx = np.flatnonzero(np.abs(f) >= thresh * (1 - 1e-12))
    order = _taylor_order(2 * theta) + 2
    derivs = _node_derivatives(grid, spectrum, order, idx)
    s = np.zeros(idx.size)
    for _ in range(8):
        g = _taylor_eval(derivs, s)
        g1 = _taylor_eval(derivs, s, 1)
        g2 = _taylor_eval(derivs, s, 2)
        ok = g * g2 < 0
        step = np.where(ok, -g1 / np.where(ok, g2, 1.0), 0.0)
        s_new = np.clip(s + step, -1.0, 1.0)
        if np.max(np.abs(s_new - s)) < 1e-14:
            s = s_new
            break
        s = s_new
    refined = np.abs(_taylor_eval(derivs, s))
    return max(m, float(refined.max()))


def evaluate_direct(grid: Grid, spectrum: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Direct Fourier-series summation of the real interpolant at ``points``."""
    n = grid.num_points
    pts = np.asarray(points, dtype=float)
    phase = np.outer(pts - grid.nodes[0], grid.xi)
    w = np.full(grid.nyquist_index + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    spec = np.asarray(spectrum)
    terms = w * (spec.real * np.cos(phase) - spec.imag * np.sin(phase))
    # Nyquist mode is the cosine interpolant: drop its sine part
    terms[:, -1] = spec[-1].real * np.cos(phase[:, -1])
    return terms.sum(axis=1) / n


class OffGridEvaluator:
    """Evaluate a band-limited field (and its derivative) at arbitrary points.

    Uses a Taylor series about the nearest node whose coefficients are exact
    spectral derivatives; the truncation order is chosen from the field's
    bandwidth so the result agrees with direct summation to round-off.
    """

    def __init__(self, grid: Grid, spectrum: np.ndarray, with_derivative: bool = False):
        self.grid = grid
        bw = effective_bandwidth(grid, spectrum)
        order = _taylor_order(0.5 * bw * grid.spacing) + (1 if with_derivative else 0)
        self._derivs = _node_derivatives(
            grid, spectrum, order, np.arange(grid.num_points)
        )

    def _locate(self, points):
        g = self.grid
        rel = (np.asarray(points, dtype=float) - g.nodes[0]) / g.spacing
        i = np.rint(rel)
        s = rel - i
        return np.mod(i.astype(np.int64), g.num_points), s

    def __call__(self, points, derivative: bool = False):
        idx, s = self._locate(points)
        d = self._derivs[:, idx]
        val = _taylor_eval(d, s)
        if not derivative:
            return val
        return val, _taylor_eval(d, s, 1) / self.grid.spacing


def evaluate_at(grid: Grid, spectrum: np.ndarray, points: np.ndarray) -> np.ndarray:
    return OffGridEvaluator(grid, spectrum)(points)


def _symmetric_modes(grid: Grid, spectrum: np.ndarray) -> np.ndarray:
    """Coefficients for modes ``-n/2 .. n/2`` with the Nyquist term split evenly."""
    spec = np.asarray(spectrum, dtype=complex) / grid.num_points
    half = grid.nyquist_index
    out = np.empty(2 * half + 1, dtype=complex)
    out[half:] = spec
    out[:half] = np.conj(spec[1:][::-1])
    out[0] = out[-1] = 0.5 * spec[-1].real
    return out


def nufft_evaluate(
    grid: Grid, spectrum: np.ndarray, points: np.ndarray, derivative: bool = False, tol: float = 1e-14
):
    """Evaluate the interpolant (and optionally its derivative) with a type-2 NUFFT.

    Agrees with :func:`evaluate_direct` to about ``tol`` relative to the
    coefficient sum, at ``O(n log n)`` cost instead of ``O(n^2)``.
    """
    coeffs = _symmetric_modes(grid, spectrum)
    pts = np.asarray(points, dtype=float)
    arg = np.mod(2 * math.pi * (pts - grid.nodes[0]) / grid.period, 2 * math.pi)
    if not derivative:
        return finufft.nufft1d2(arg, coeffs, eps=tol, isign=1).real
    k = np.arange(-grid.nyquist_index, grid.nyquist_index + 1)
    stacked = np.stack([coeffs, coeffs * (2j * math.pi * k / grid.period)])
    both = finufft.nufft1d2(arg, stacked, eps=tol, isign=1).real
    return both[0], both[1]
