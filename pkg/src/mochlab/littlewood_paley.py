"""Dyadic partition of unity, Littlewood-Paley blocks and Bony's decomposition.

The annulus profile ``psi`` is a C-infinity plateau equal to one on [1, 2]
and supported in [3/4, 8/3], built from the transition ``exp(-1/t)``.  The
block multiplier is ``phi(r) = psi(r) / sum_j psi(2^-j r)``, which makes the
dyadic dilates an exact partition of unity for ``r > 0``.  The low-frequency
multiplier is ``chi(xi) = sum_{j<0} phi(2^-j xi)`` with ``chi(0) = 1``, so
``chi + sum_{j>=0} phi(2^-j .) = 1`` on every represented frequency.

Blocks are indexed nonhomogeneously: ``j = -1`` is the ``chi`` block and
``j = 0 .. j_max`` are annuli, where ``j_max`` is the last index whose
annulus meets the grid's frequency range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BlockIndexError, DegenerateInputError, GridError
from .grid import Grid, RealField, sup_norm

ANNULUS_INNER = 3.0 / 4.0
ANNULUS_OUTER = 8.0 / 3.0


def _theta(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_ramp(t):
    """C-infinity ramp: 0 for t <= 0, 1 for t >= 1."""
    a = _theta(t)
    b = _theta(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


def annulus_profile(r):
    """Plateau ``psi``: 1 on [1, 2], smooth flanks, 0 outside (3/4, 8/3)."""
    r = np.abs(np.asarray(r, dtype=float))
    rise = smooth_ramp((r - ANNULUS_INNER) / (1.0 - ANNULUS_INNER))
    fall = smooth_ramp((ANNULUS_OUTER - r) / (ANNULUS_OUTER - 2.0))
    return np.minimum(rise, fall)


def phi(r):
    """Normalized annulus multiplier; dyadic dilates sum to one for r != 0."""
    r = np.abs(np.asarray(r, dtype=float))
    num = annulus_profile(r)
    den = annulus_profile(0.5 * r) + num + annulus_profile(2.0 * r)
    out = np.zeros_like(r)
    supp = num > 0
    out[supp] = num[supp] / den[supp]
    return out


def chi(xi):
    """Low-frequency multiplier ``sum_{j<0} phi(2^-j xi)``; ``chi(0) = 1``.

    Below 3/4 every annulus with j >= 0 vanishes, so chi = 1; above 4/3 every
    dilate with j < 0 vanishes; in between only ``phi(2 xi)`` survives.
    """
    xi = np.abs(np.asarray(xi, dtype=float))
    out = np.zeros_like(xi)
    out[xi <= ANNULUS_INNER] = 1.0
    mid = (xi > ANNULUS_INNER) & (xi < 0.5 * ANNULUS_OUTER)
    out[mid] = phi(2.0 * xi[mid])
    return out


@dataclass(frozen=True, eq=False)
class _Band:
    lo: int
    vals: np.ndarray = field(repr=False)

    @property
    def hi(self):
        return self.lo + self.vals.size


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Littlewood-Paley multipliers sampled on a grid's half spectrum.

    Each block is stored as the contiguous index range where its multiplier
    is nonzero, together with the multiplier values on that range.
    """

    grid: Grid
    j_max: int
    bands: tuple = field(repr=False)

    @property
    def j_values(self) -> range:
        return range(-1, self.j_max + 1)

    def _band(self, j: int) -> _Band:
        if not (-1 <= j <= self.j_max):
            raise BlockIndexError(f"block index {j} outside [-1, {self.j_max}]")
        return self.bands[j + 1]

    def multiplier(self, j: int) -> np.ndarray:
        """Full half-spectrum multiplier of block ``j``."""
        b = self._band(j)
        out = np.zeros(self.grid.nyquist_index + 1)
        out[b.lo : b.hi] = b.vals
        return out

    @property
    def chi(self) -> np.ndarray:
        return self.multiplier(-1)

    @property
    def phis(self) -> np.ndarray:
        return np.array([self.multiplier(j) for j in range(self.j_max + 1)])

    def lowpass_multiplier(self, j: int) -> np.ndarray:
        if not (0 <= j <= self.j_max + 1):
            raise BlockIndexError(f"lowpass index {j} outside [0, {self.j_max + 1}]")
        out = np.zeros(self.grid.nyquist_index + 1)
        for jj in range(-1, j):
            b = self.bands[jj + 1]
            out[b.lo : b.hi] += b.vals
        return out

    def block_spectrum(self, spectrum: np.ndarray, j: int) -> np.ndarray:
        """Half spectrum of ``Delta_j f`` given the half spectrum of ``f``."""
        b = self._band(j)
        out = np.zeros(self.grid.nyquist_index + 1, dtype=complex)
        out[b.lo : b.hi] = spectrum[b.lo : b.hi] * b.vals
        return out

    def block_sup_norms(self, spectrum: np.ndarray) -> np.ndarray:
        """``||Delta_j f||_Linf`` for j = -1 .. j_max.

        A block whose band sits well below Nyquist has the same interpolant
        on a coarser grid, so its sup is computed there.
        """
        out = np.zeros(self.j_max + 2)
        n = self.grid.num_points
        for j in self.j_values:
            b = self.bands[j + 1]
            if not np.any(spectrum[b.lo : b.hi]):
                continue
            m = 8
            while m < n and m // 2 < b.hi:
                m *= 2
            if m >= n:
                out[j + 1] = sup_norm(self.grid, self.block_spectrum(spectrum, j))
                continue
            small = _coarse_grid(m, self.grid.period)
            spec = np.zeros(m // 2 + 1, dtype=complex)
            spec[b.lo : b.hi] = spectrum[b.lo : b.hi] * b.vals * (m / n)
            out[j + 1] = sup_norm(small, spec)
        return out


@lru_cache(maxsize=64)
def _coarse_grid(m: int, period: float) -> Grid:
    return Grid(m, period)


def build_partition(grid: Grid) -> DyadicPartition:
    """Sample the dyadic partition on ``grid``.

    Raises
    ------
    GridError
        If the grid cannot host blocks -1, 0 and 1.
    """
    xi = grid.xi
    xi_max = grid.max_frequency
    j_max = -1
    while 2.0 ** (j_max + 1) * ANNULUS_INNER < xi_max:
        j_max += 1
    if j_max < 1:
        raise GridError("grid too small to host blocks j = -1, 0, 1")

    def band_of(values):
        nz = np.flatnonzero(values)
        if nz.size == 0:
            return _Band(0, np.zeros(0))
        lo, hi = nz[0], nz[-1] + 1
        vals = values[lo:hi].copy()
        vals.setflags(write=False)
        return _Band(int(lo), vals)

    bands = [band_of(chi(xi))]
    for j in range(j_max + 1):
        bands.append(band_of(phi(xi / 2.0**j)))
    return DyadicPartition(grid, j_max, tuple(bands))


def _check_grid(part: DyadicPartition, *fields: RealField):
    for f in fields:
        if f.grid != part.grid:
            raise GridError("field grid does not match the partition grid")


def block(part: DyadicPartition, u: RealField, j: int) -> RealField:
    """Littlewood-Paley block ``Delta_j u``."""
    _check_grid(part, u)
    return RealField.from_spectrum(u.grid, part.block_spectrum(u.spectrum, j))


def lowpass(part: DyadicPartition, u: RealField, j: int) -> RealField:
    """``S_j u = sum_{j' <= j-1} Delta_j' u`` (nonhomogeneous)."""
    _check_grid(part, u)
    return RealField.from_spectrum(u.grid, u.spectrum * part.lowpass_multiplier(j))


def blocks(part: DyadicPartition, u: RealField) -> list[RealField]:
    return [block(part, u, j) for j in part.j_values]


@dataclass(frozen=True)
class BonyTriple:
    paraproduct_uv: RealField  # T_u v
    paraproduct_vu: RealField  # T_v u
    remainder: RealField  # R(u, v)

    def total(self) -> RealField:
        return self.paraproduct_uv + self.paraproduct_vu + self.remainder


def bony_decompose(part: DyadicPartition, u: RealField, v: RealField) -> BonyTriple:
    """Split ``u v`` into ``T_u v + T_v u + R(u, v)``.

    ``T_u v = sum_j S_{j-1} u Delta_j v`` and
    ``R(u, v) = sum_{|j - j'| <= 1} Delta_j u Delta_j' v``; products are
    pointwise on the grid, so the three pieces add up to ``u v`` exactly.
    """
    _check_grid(part, u, v)
    if u.grid != v.grid:
        raise GridError("u and v live on different grids")
    du = [b.samples for b in blocks(part, u)]
    dv = [b.samples for b in blocks(part, v)]
    nb = len(du)
    n = part.grid.num_points
    t_uv = np.zeros(n)
    t_vu = np.zeros(n)
    rem = np.zeros(n)
    # running S_{j-1}: blocks with index <= j-2, i.e. list positions <= pos-2
    low_u = np.zeros(n)
    low_v = np.zeros(n)
    for pos in range(nb):
        if pos >= 2:
            low_u += du[pos - 2]
            low_v += dv[pos - 2]
        t_uv += low_u * dv[pos]
        t_vu += low_v * du[pos]
        for q in (pos - 1, pos, pos + 1):
            if 0 <= q < nb:
                rem += du[pos] * dv[q]
    g = part.grid
    return BonyTriple(RealField(g, t_uv), RealField(g, t_vu), RealField(g, rem))


@dataclass(frozen=True)
class BernsteinReport:
    j: int
    order: int
    ratio: float
    lower: float
    upper: float

    @property
    def within(self) -> bool:
        return self.lower <= self.ratio <= self.upper


def bernstein_bounds(order: int) -> tuple[float, float]:
    """Slack window ``[(3/4)^k / 4, 4 (8/3)^k]``."""
    return ANNULUS_INNER**order / 4.0, 4.0 * ANNULUS_OUTER**order


def bernstein_check(part: DyadicPartition, u: RealField, j: int, order: int) -> BernsteinReport:
    """Ratio ``||d^k Delta_j u|| / (2^{jk} ||Delta_j u||)`` in the sup norm."""
    _check_grid(part, u)
    if j < 0:
        raise BlockIndexError("Bernstein ratios need an annulus block (j >= 0)")
    g = part.grid
    spec = part.block_spectrum(u.spectrum, j)
    base = sup_norm(g, spec)
    # blocks at round-off level relative to the field carry no information
    if base <= 1e-13 * u.max_abs():
        raise DegenerateInputError(f"block {j} of the input is zero")
    scale = 2.0**j
    sym = (1j * g.xi) ** order
    top = sup_norm(g, spec * sym)
    ratio = top / (scale**order * base)
    lo, hi = bernstein_bounds(order)
    return BernsteinReport(j, order, ratio, lo, hi)
