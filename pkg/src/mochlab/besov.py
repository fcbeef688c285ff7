"""Besov norms of sampled fields.

All norms are nonhomogeneous: the block sequence starts at ``j = -1``.
The refined norm ``B^0_{inf,inf,1}`` weights block ``j`` by ``(j+2)^2``,
which gives the low-frequency block weight one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import RealField
from .littlewood_paley import DyadicPartition, _check_grid
from .persist import table_csv

INF = math.inf


@dataclass(frozen=True)
class BesovIndex:
    """Regularity ``s``, integrability ``p`` and summability ``r``."""

    s: float
    p: float = INF
    r: float = 1.0

    def __post_init__(self):
        for name in ("p", "r"):
            val = getattr(self, name)
            if not (val >= 1):
                raise ValueError(f"{name} must lie in [1, inf], got {val}")


B0_INF_1 = BesovIndex(0.0, INF, 1.0)
B0_INF_INF = BesovIndex(0.0, INF, INF)


@dataclass(frozen=True)
class WeightedNormValue:
    value: float
    argmax_j: int | None


@dataclass(frozen=True)
class NormProfile:
    j_values: np.ndarray
    block_sup_norms: np.ndarray
    block_lp_norms: dict | None = None

    @property
    def weights(self) -> np.ndarray:
        return (self.j_values + 2.0) ** 2

    def b0_inf_1(self) -> float:
        return float(np.sum(self.block_sup_norms))

    def weighted(self) -> WeightedNormValue:
        w = self.weights * self.block_sup_norms
        if not np.any(w > 0):
            return WeightedNormValue(0.0, None)
        k = int(np.argmax(w))
        return WeightedNormValue(float(w[k]), int(self.j_values[k]))

    def to_csv(self) -> str:
        return table_csv(("j", "block_sup_norm"), zip(self.j_values, self.block_sup_norms), ("j",))


def _block_lp(part: DyadicPartition, spectrum, p: float) -> np.ndarray:
    if p == INF:
        return part.block_sup_norms(spectrum)
    g = part.grid
    out = np.zeros(part.j_max + 2)
    for j in part.j_values:
        vals = g.irfft(part.block_spectrum(spectrum, j))
        out[j + 1] = (g.spacing * np.sum(np.abs(vals) ** p)) ** (1.0 / p)
    return out


def norm_profile(part: DyadicPartition, u: RealField, lp=()) -> NormProfile:
    """Per-block ``||Delta_j u||_Linf`` (and optional finite-p block norms)."""
    _check_grid(part, u)
    sup = part.block_sup_norms(u.spectrum)
    extra = {p: _block_lp(part, u.spectrum, p) for p in lp} or None
    return NormProfile(np.arange(-1, part.j_max + 1), sup, extra)


def sequence_norm(seq: np.ndarray, r: float) -> float:
    if r == INF:
        return float(np.max(seq)) if seq.size else 0.0
    return float(np.sum(seq**r) ** (1.0 / r))


def besov_norm(part: DyadicPartition, u: RealField, idx: BesovIndex = B0_INF_1) -> float:
    """``|| (2^{js} ||Delta_j u||_{L^p})_{j >= -1} ||_{l^r}``.

    Finite ``p`` uses the plain grid sum ``h * sum |f|^p``, i.e. the integral
    over one period.
    """
    _check_grid(part, u)
    blocks = _block_lp(part, u.spectrum, idx.p)
    j = np.arange(-1, part.j_max + 1, dtype=float)
    return sequence_norm(2.0 ** (j * idx.s) * blocks, idx.r)


def weighted_norm(part: DyadicPartition, u: RealField) -> WeightedNormValue:
    """``sup_j (j+2)^2 ||Delta_j u||_Linf`` with the attaining block."""
    return norm_profile(part, u).weighted()


def b0_inf_1(part: DyadicPartition, u: RealField) -> float:
    return besov_norm(part, u, B0_INF_1)


def both_norms(part: DyadicPartition, u: RealField) -> tuple[float, float]:
    """``(||u||_{B0_inf,1}, ||u||_{B0_inf,inf,1})`` from a single profile."""
    prof = norm_profile(part, u)
    return prof.b0_inf_1(), prof.weighted().value
