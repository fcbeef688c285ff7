"""The norm-inflation datum and the algebra defect of ``B^0_{inf,1}``.

The datum is

    gamma0 = eps * [cos(K x) (1 + eps S_N h) + R],   eps = N^{-1/10},  K = 2^{N+5},

where ``h`` is the indicator of ``[0, L/2)`` on the torus, ``S_N`` the
Littlewood-Paley low-pass and ``R`` a Helmholtz-type corrector applied to the
modulated carrier.  Two corrector readings are supported:

``regular``
    ``R = -(1 - d_xx)^{-1}[.]``, symbol ``-1/(1 + xi^2)``.
``literal``
    ``R = -(-1 - d_xx)^{-1}[.]``, symbol ``1/(1 - xi^2)``; singular at
    ``|xi| = 1``, which the modulated carrier never touches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .besov import norm_profile
from .errors import ParameterError, ResolutionError
from .grid import Grid, RealField, effective_bandwidth, make_grid
from .littlewood_paley import ANNULUS_OUTER, DyadicPartition, build_partition

CORRECTORS = ("regular", "literal")


def carrier_frequency(N: int) -> float:
    return 2.0 ** (N + 5)


def auto_grid_points(N: int) -> int:
    """Grid size with Nyquist ``>= 4 * 2^{N+5}`` on a ``2 pi`` period."""
    return 2 ** (N + 8)


def auto_grid(N: int) -> Grid:
    return make_grid(auto_grid_points(N))


def periodized_heaviside(grid: Grid) -> RealField:
    """Samples of the indicator of ``[0, L/2)``; the node at 0 takes value 1."""
    return RealField(grid, (grid.nodes >= 0).astype(float))


def heaviside_spectrum(grid: Grid) -> np.ndarray:
    """Exact Fourier coefficients of the periodized step, in rfft scaling.

    Only odd modes survive: ``c_k = n i / (pi k)`` for odd ``k`` and
    ``c_0 = n / 2``.  Using these instead of the FFT of the samples removes
    the ``O(k/n)`` sampling error of the discontinuity, so everything built
    from the low-passed step is independent of the grid size.
    """
    n = grid.num_points
    k = np.arange(grid.nyquist_index + 1)
    spec = np.zeros(k.size, dtype=complex)
    odd = k % 2 == 1
    spec[odd] = n * 1j / (math.pi * k[odd])
    spec[0] = n / 2.0
    return spec


def _require_lowpass_index(part: DyadicPartition, N: int):
    if N < 0 or N > part.j_max + 1:
        need = 2 ** max(N + 2, 3)
        raise ResolutionError(
            f"S_{N} needs blocks up to j={N - 1}; grid of {part.grid.num_points} points "
            f"hosts j<={part.j_max}. Use at least {need} points."
        )


def smoothed_step(part: DyadicPartition, N: int, sampled: bool = False) -> RealField:
    """``S_N h`` for the periodized step ``h``.

    Parameters
    ----------
    sampled : bool
        Low-pass the FFT of the grid samples instead of the exact step
        coefficients.  Differs by ``O(2^N / n)``.
    """
    _require_lowpass_index(part, N)
    g = part.grid
    if sampled:
        spec = periodized_heaviside(g).spectrum
    else:
        spec = heaviside_spectrum(g)
    return RealField.from_spectrum(g, spec * part.lowpass_multiplier(N))


def modulate(u: RealField, K: float) -> RealField:
    """``cos(K x) * u`` computed as an exact shift of the spectrum.

    Pointwise products with a high-frequency cosine leak round-off into every
    mode; the shift keeps the result band-limited to ``K +- band(u)``.
    """
    g = u.grid
    n = g.num_points
    q = int(round(K * g.period / (2 * math.pi)))
    full = np.fft.fft(u.samples)
    phase = np.exp(1j * K * g.nodes[0])
    prod = 0.5 * (phase * np.roll(full, q) + np.conj(phase) * np.roll(full, -q))
    return RealField(g, np.fft.ifft(prod).real)


def corrector_symbol(grid: Grid, mode: str) -> np.ndarray:
    xi = grid.xi
    if mode == "regular":
        return -1.0 / (1.0 + xi**2)
    if mode == "literal":
        with np.errstate(divide="ignore"):
            return 1.0 / (1.0 - xi**2)
    raise ParameterError(f"corrector must be one of {CORRECTORS}, got {mode!r}")


@dataclass(frozen=True, eq=False)
class InflationDatum:
    N: int
    grid: Grid
    gamma0: RealField
    carrier: RealField = field(repr=False)
    modulation: RealField = field(repr=False)
    corrector: RealField = field(repr=False)
    corrector_mode: str = "regular"
    norm_b0inf1: float = math.nan
    norm_weighted: float = math.nan
    norm_square_b0inf1: float = math.nan

    @property
    def desk_scale(self) -> bool:
        """True when N is below the theorem's ``N > 10`` range."""
        return self.N <= 10

    @property
    def ratio(self) -> float:
        return self.norm_square_b0inf1 / self.norm_b0inf1**2

    def report(self) -> dict:
        return {
            "N": self.N,
            "norm_B0inf1": self.norm_b0inf1,
            "norm_weighted": self.norm_weighted,
            "norm_square_B0inf1": self.norm_square_b0inf1,
            "ratio": self.ratio,
        }


def build_gamma0(
    part: DyadicPartition,
    N: int,
    corrector: str = "regular",
    with_norms: bool = True,
) -> InflationDatum:
    """Assemble the inflation datum on ``part.grid`` and attach its norms."""
    if not isinstance(N, (int, np.integer)) or N <= 0:
        raise ParameterError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    g = part.grid
    K = carrier_frequency(N)
    if not g.max_frequency > ANNULUS_OUTER * K:
        raise ResolutionError(
            f"N={N} needs Nyquist > {ANNULUS_OUTER * K:g}; grid of {g.num_points} points "
            f"reaches {g.max_frequency:g}. Use at least {auto_grid_points(N)} points."
        )
    mode_number = K * g.period / (2 * math.pi)
    if abs(mode_number - round(mode_number)) > 1e-9:
        raise ResolutionError("carrier cos(2^{N+5} x) is not periodic on this grid")

    eps = N ** -0.1
    step = smoothed_step(part, N)
    modulation = 1.0 + eps * step
    carrier = RealField.from_function(g, lambda x: np.cos(K * x))
    base = modulate(modulation, K)
    sym = corrector_symbol(g, corrector)
    spec = base.spectrum
    if corrector == "literal":
        singular = ~np.isfinite(sym)
        if np.any(np.abs(spec[singular]) > 1e-12 * np.abs(spec).max()):
            raise ResolutionError("literal corrector hits |xi| = 1 with nonzero content")
        sym = np.where(singular, 0.0, sym)
    corr = RealField.from_spectrum(g, spec * sym)
    gamma0 = eps * (base + corr)
    datum = InflationDatum(N, g, gamma0, carrier, modulation, corr, corrector)
    if not with_norms:
        return datum
    a, w = _norm_pair(part, gamma0)
    b = _square_norm(part, gamma0)
    return InflationDatum(
        N, g, gamma0, carrier, modulation, corr, corrector, a, w, b
    )


def _norm_pair(part, u):
    prof = norm_profile(part, u)
    return prof.b0_inf_1(), prof.weighted().value


def _square_norm(part, u):
    g = part.grid
    if 2 * effective_bandwidth(g, u.spectrum, rel_tol=1e-12) > g.max_frequency:
        raise ResolutionError("squaring would alias: grid needs 2x headroom over the band")
    return norm_profile(part, u * u).b0_inf_1()


@dataclass(frozen=True)
class AlgebraDefect:
    norm: float
    square_norm: float

    @property
    def ratio(self) -> float:
        return self.square_norm / self.norm**2


def algebra_defect(part: DyadicPartition, datum_or_field) -> AlgebraDefect:
    """``(||g||, ||g^2||, ||g^2|| / ||g||^2)`` in ``B^0_{inf,1}``."""
    u = getattr(datum_or_field, "gamma0", datum_or_field)
    a = norm_profile(part, u).b0_inf_1()
    b = _square_norm(part, u)
    return AlgebraDefect(a, b)


def datum_for(N: int, corrector: str = "regular", grid: Grid | None = None):
    """Convenience: auto-sized grid, partition and datum for ``N``."""
    g = grid or auto_grid(N)
    part = build_partition(g)
    return part, build_gamma0(part, N, corrector)
