"""Measured product and commutator estimates, the datum sweep and the inflation runs.

Every inequality is reported as ``lhs``, ``rhs`` (the norm combination with
its constant stripped) and ``ratio = lhs / rhs``.  Quantities are evaluated
on a work grid wide enough that the cubic and quartic products involved are
alias-free, so the measured norms are those of the exact products.

Notation: ``a = ||G||_{B0_inf,1}``, ``w = ||G||_{B0_inf,inf,1}`` (the
``(j+2)^2`` weighted sup), ``M = G_x + G^2/(2 lam)`` and ``V = G^{-1} M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .besov import norm_profile
from .dynamics import MochParams, RhsTerms, cfl_step, rhs_terms, solve
from .errors import DegenerateInputError, ParameterError
from .grid import Grid, RealField, effective_bandwidth, make_grid, sup_norm
from .initial_data import (
    CORRECTORS,
    algebra_defect,
    auto_grid,
    build_gamma0,
    corrector_symbol,
    modulate,
)
from .littlewood_paley import DyadicPartition, build_partition
from .persist import table_csv

PRODUCT_IDS = ("2.6", "2.7", "2.8", "2.9")
COMMUTATOR_IDS = ("2.10", "2.11", "2.12")


@dataclass(frozen=True)
class EstimateReport:
    lemma_id: str
    lhs: float
    rhs: float
    ensemble_id: str = ""

    @property
    def degenerate(self) -> bool:
        return self.rhs == 0.0

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else math.inf
        return self.lhs / self.rhs


# -- alias-free work grid -----------------------------------------------------


def _band_index(u: RealField) -> int:
    bw = effective_bandwidth(u.grid, u.spectrum, rel_tol=1e-14)
    return int(round(bw * u.grid.period / (2 * math.pi)))


def resample(u: RealField, grid: Grid) -> RealField:
    """Same trigonometric polynomial on another grid of the same period.

    Raises if the target grid cannot hold the band strictly below Nyquist.
    """
    if grid.period != u.grid.period:
        raise ParameterError("resampling needs equal periods")
    if grid == u.grid:
        return u
    k = _band_index(u)
    if k >= grid.nyquist_index:
        raise ParameterError(f"band {k} does not fit below Nyquist {grid.nyquist_index}")
    spec = np.zeros(grid.nyquist_index + 1, dtype=complex)
    spec[: k + 1] = u.spectrum[: k + 1] * (grid.num_points / u.grid.num_points)
    return RealField.from_spectrum(grid, spec)


class _Work:
    """``G`` on a grid holding ``degree`` times its band, with derived fields."""

    def __init__(self, gamma: RealField, lam: float, degree: int):
        if lam == 0:
            raise ParameterError("MOCH requires λ ≠ 0")
        k = _band_index(gamma)
        n = gamma.grid.num_points
        while n // 2 <= degree * k:
            n *= 2
        grid = gamma.grid if n == gamma.grid.num_points else make_grid(n, gamma.grid.period)
        self.grid = grid
        self.part = build_partition(grid)
        self.lam = float(lam)
        self.G = resample(gamma, grid)
        g = grid
        ghat = self.G.spectrum
        self.Gx = RealField.from_spectrum(g, g.derivative_symbol * ghat)
        self.M = self.Gx + self.G * self.G / (2.0 * self.lam)
        self.V = RealField.from_spectrum(g, g.helmholtz_inverse_symbol * self.M.spectrum)
        self.Vx = RealField.from_spectrum(g, g.derivative_symbol * self.V.spectrum)
        prof = norm_profile(self.part, self.G)
        self.a = prof.b0_inf_1()
        self.w = prof.weighted().value

    def norms(self, u: RealField) -> tuple[float, float]:
        prof = norm_profile(self.part, u)
        return prof.b0_inf_1(), prof.weighted().value


# -- Lemma 2.13 type products --------------------------------------------------


def product_estimate_check(
    part: DyadicPartition, gamma: RealField, lam: float = 1.0, ensemble_id: str = ""
) -> list[EstimateReport]:
    """Reports for the four product inequalities.

    ``2.6``/``2.7``: ``||G V_x||`` in the summed / weighted norm against
    ``a^2 w / (2|lam|) + w a``.  ``2.8``/``2.9``: ``||G^2||`` in the summed /
    weighted norm against ``a w``.
    """
    if gamma.grid != part.grid:
        raise ParameterError("field grid does not match the partition grid")
    wk = _Work(gamma, lam, degree=3)
    a, w = wk.a, wk.w
    l26, l27 = wk.norms(wk.G * wk.Vx)
    l28, l29 = wk.norms(wk.G * wk.G)
    r_mix = a * a * w / (2 * abs(wk.lam)) + w * a
    r_sq = a * w
    return [
        EstimateReport("2.6", l26, r_mix, ensemble_id),
        EstimateReport("2.7", l27, r_mix, ensemble_id),
        EstimateReport("2.8", l28, r_sq, ensemble_id),
        EstimateReport("2.9", l29, r_sq, ensemble_id),
    ]


# -- Lemma 2.14 type commutators -------------------------------------------------


@dataclass(frozen=True)
class CommutatorProfile:
    j_values: np.ndarray
    sup_norms: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.sup_norms))

    @property
    def weighted_sup(self) -> float:
        return float(np.max((self.j_values + 2.0) ** 2 * self.sup_norms))


def _commutator_blocks(part: DyadicPartition, V: RealField, F: RealField) -> list[RealField]:
    """``V Delta_j F - Delta_j(V F)`` for every block, via pointwise products."""
    VF = (V * F).spectrum
    out = []
    for j in part.j_values:
        dF = RealField.from_spectrum(part.grid, part.block_spectrum(F.spectrum, j))
        out.append(V * dF - RealField.from_spectrum(part.grid, part.block_spectrum(VF, j)))
    return out


def _full_coeffs(u: RealField) -> np.ndarray:
    n = u.grid.num_points
    return np.fft.fft(u.samples) / n


def _convolve_product(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Full normalized coefficients of the product by direct O(n^2) convolution.

    Inputs are in FFT order; the result wraps modulo ``n``.  Alias-free when
    the combined band stays below Nyquist.
    """
    k = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    out = np.zeros(n, dtype=complex)
    nz_a = np.flatnonzero(np.abs(a) > 0)
    for i in nz_a:
        out += a[i] * np.roll(b, k[i])
    return out


def _commutator_blocks_convolution(part: DyadicPartition, V: RealField, F: RealField) -> list[RealField]:
    """Same blocks as :func:`_commutator_blocks` from spectral convolutions."""
    g = part.grid
    n = g.num_points
    cv, cf = _full_coeffs(V), _full_coeffs(F)
    mult_full = lambda half: np.concatenate([half, half[1:-1][::-1]])  # noqa: E731
    vf = _convolve_product(cv, cf, n)
    out = []
    for j in part.j_values:
        mj = mult_full(part.multiplier(j))
        c = _convolve_product(cv, cf * mj, n) - vf * mj
        out.append(RealField(g, np.fft.ifft(c * n).real))
    return out


@dataclass(frozen=True)
class CommutatorResult:
    R: CommutatorProfile
    R_tilde: CommutatorProfile
    R_tilde_display: CommutatorProfile
    reports: list = field(default_factory=list)


def _profile(part, blocks_) -> CommutatorProfile:
    vals = np.array([sup_norm(part.grid, b.spectrum, b.samples) for b in blocks_])
    return CommutatorProfile(np.arange(-1, part.j_max + 1), vals)


def commutator_check(
    part: DyadicPartition,
    gamma: RealField,
    lam: float = 1.0,
    ensemble_id: str = "",
    method: str = "fft",
) -> CommutatorResult:
    """Commutators with ``V = G^{-1} M`` and the three bounds.

    ``R_j = V Delta_j G_x - Delta_j(V G_x)``; the quadratic commutator uses
    ``F = G_x G``; the linear variant uses ``F = G_x / 2``.

    Parameters
    ----------
    method : {"fft", "convolution"}
        Pointwise products on the grid, or direct spectral convolution
        (O(n^2), for cross-checking on small grids).
    """
    if gamma.grid != part.grid:
        raise ParameterError("field grid does not match the partition grid")
    if method not in ("fft", "convolution"):
        raise ParameterError(f"unknown method {method!r}")
    wk = _Work(gamma, lam, degree=4)
    kern = _commutator_blocks if method == "fft" else _commutator_blocks_convolution
    R = _profile(wk.part, kern(wk.part, wk.V, wk.Gx))
    Rt = _profile(wk.part, kern(wk.part, wk.V, wk.Gx * wk.G))
    Rd = _profile(wk.part, kern(wk.part, wk.V, wk.Gx * 0.5))
    a, w = wk.a, wk.w
    il = 1.0 / (2 * abs(wk.lam))
    r_lin = a * (w + il * w * a)
    r_quad = a * a * w + il * (w * a) ** 2
    reports = [
        EstimateReport("2.10", R.weighted_sup, r_lin, ensemble_id),
        EstimateReport("2.11", R.total, r_lin, ensemble_id),
        EstimateReport("2.12", Rt.total, r_quad, ensemble_id),
    ]
    return CommutatorResult(R, Rt, Rd, reports)


# -- ensembles -------------------------------------------------------------------


def random_bandlimited(grid: Grid, rng: np.random.Generator, max_band: int | None = None) -> RealField:
    """Random real field with a random band ``<= max_band`` and ``k^-1`` decay.

    The default band cap is ``n/8``, which keeps quartic products alias-free.
    """
    cap = max_band or grid.num_points // 8
    band = int(rng.integers(2, cap + 1))
    k = np.arange(band + 1)
    amp = 1.0 / np.maximum(k, 1)
    coef = (rng.standard_normal(band + 1) + 1j * rng.standard_normal(band + 1)) * amp
    coef[0] = coef[0].real
    spec = np.zeros(grid.nyquist_index + 1, dtype=complex)
    spec[: band + 1] = coef * grid.num_points / 2
    scale = 10.0 ** rng.uniform(-1, 1)
    u = RealField.from_spectrum(grid, spec)
    peak = u.max_abs()
    if peak == 0:
        return u
    return u * (scale / peak)


@dataclass(frozen=True)
class EnsembleSummary:
    lemma: str
    seed: int
    size: int
    reports: list = field(repr=False)

    def max_ratio(self, lemma_id: str) -> float:
        return max(r.ratio for r in self.reports if r.lemma_id == lemma_id)

    def ids(self) -> tuple:
        return PRODUCT_IDS if self.lemma == "2.13" else COMMUTATOR_IDS


def run_ensemble(
    lemma: str, size: int, seed: int, num_points: int = 256, lam: float = 1.0
) -> EnsembleSummary:
    """Seeded ensemble of random band-limited fields for one lemma."""
    if lemma not in ("2.13", "2.14"):
        raise ParameterError(f"lemma must be 2.13 or 2.14, got {lemma!r}")
    if size < 1:
        raise ParameterError("ensemble size must be positive")
    grid = make_grid(num_points)
    part = build_partition(grid)
    rng = np.random.default_rng(seed)
    reports = []
    for i in range(size):
        u = random_bandlimited(grid, rng)
        tag = f"seed={seed}#{i}"
        if lemma == "2.13":
            reports.extend(product_estimate_check(part, u, lam, tag))
        else:
            reports.extend(commutator_check(part, u, lam, tag).reports)
    return EnsembleSummary(lemma, seed, size, reports)


# -- datum sweep -----------------------------------------------------------------


def fit_exponent(ns, values) -> float:
    """Least-squares slope of ``log values`` against ``log N``."""
    ns = np.asarray(ns, dtype=float)
    vals = np.asarray(values, dtype=float)
    if ns.size < 2:
        raise ParameterError("need at least two points to fit an exponent")
    return float(np.polyfit(np.log(ns), np.log(vals), 1)[0])


SWEEP_COLUMNS = (
    "N",
    "norm_B0inf1",
    "norm_weighted",
    "norm_square_B0inf1",
    "ratio",
    "low_fraction",
    "corrector_gap",
)


@dataclass(frozen=True)
class ScalingTable:
    rows: list
    exponents: dict

    def column(self, name: str) -> np.ndarray:
        i = SWEEP_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self) -> str:
        return table_csv(SWEEP_COLUMNS, self.rows, ("N",))


def low_frequency_fraction(part: DyadicPartition, u: RealField, j_cut: int) -> float:
    """Share of ``||u||_{B0_inf,1}`` carried by blocks ``j <= j_cut``."""
    prof = norm_profile(part, u)
    total = prof.b0_inf_1()
    if total == 0:
        raise DegenerateInputError("zero field has no frequency split")
    return float(prof.block_sup_norms[: j_cut + 2].sum() / total)


def _corrector_gap(part, datum) -> float:
    """``||gamma0(regular) - gamma0(literal)||_{B0_inf,1}``."""
    g = part.grid
    eps = datum.N ** -0.1
    base = modulate(datum.modulation, 2.0 ** (datum.N + 5))
    reg = corrector_symbol(g, "regular")
    lit = corrector_symbol(g, "literal")
    diff = np.where(np.isfinite(lit), lit - reg, 0.0)
    field_ = RealField.from_spectrum(g, eps * base.spectrum * diff)
    return norm_profile(part, field_).b0_inf_1()


def lemma212_scaling_sweep(N_list, corrector: str = "regular") -> ScalingTable:
    """Norms of the inflation datum and its square for every ``N``.

    ``low_fraction`` is the share of ``||gamma0^2||`` in blocks ``j <= N+2``.
    """
    ns = sorted({int(n) for n in N_list})
    if not ns:
        raise ParameterError("N list is empty")
    if corrector not in CORRECTORS:
        raise ParameterError(f"corrector must be one of {CORRECTORS}")
    rows = []
    for N in ns:
        part = build_partition(auto_grid(N))
        d = build_gamma0(part, N, corrector)
        sq = d.gamma0 * d.gamma0
        low = low_frequency_fraction(part, sq, N + 2)
        rows.append(
            (N, d.norm_b0inf1, d.norm_weighted, d.norm_square_b0inf1, d.ratio, low, _corrector_gap(part, d))
        )
    exps = {}
    if len(ns) >= 2:
        for name in ("norm_B0inf1", "norm_weighted", "norm_square_B0inf1", "ratio"):
            i = SWEEP_COLUMNS.index(name)
            exps[name] = fit_exponent(ns, [r[i] for r in rows])
    return ScalingTable(rows, exps)


# -- inflation experiment -----------------------------------------------------------


@dataclass(frozen=True)
class Mechanism:
    """Rate decomposition of ``||gamma||_{B0_inf,1}`` at ``t = 0``.

    Along particle paths each block obeys
    ``d/dt (Delta_j gamma)(y) = Delta_j(source + linear + stretch) + R_j``,
    so the rate of the norm is at most ``lagrangian_bound``, which in turn
    is at most the sum of the four piece norms.

    The ``low_*`` fields restrict the summed block norms to ``j <= j_cut``:
    ``low_flux`` is the net transport ``-(v gamma)_x`` there and
    ``low_total`` the full right-hand side.
    """

    source: float
    linear: float
    stretch: float
    commutator: float
    lagrangian_bound: float
    j_cut: int | None = None
    low_source: float = math.nan
    low_linear: float = math.nan
    low_flux: float = math.nan
    low_total: float = math.nan

    @property
    def others(self) -> float:
        return self.linear + self.stretch + self.commutator

    @property
    def triangle_bound(self) -> float:
        return self.source + self.others

    @property
    def source_share(self) -> float:
        t = self.triangle_bound
        return self.source / t if t else 0.0


def mechanism_at(part: DyadicPartition, gamma: RealField, lam: float, j_cut: int | None = None) -> Mechanism:
    terms: RhsTerms = rhs_terms(gamma, lam)
    g = part.grid
    nb = lambda u: norm_profile(part, u).b0_inf_1()  # noqa: E731
    st = terms.stretch + terms.source + terms.linear
    v = (terms.linear * (1.0 / lam)).samples
    gx = g.irfft(g.derivative_symbol * gamma.spectrum)
    vgx = g.rfft(v * gx) * g.dealias_mask
    comm = 0.0
    bound = 0.0
    for j in part.j_values:
        dgx = g.irfft(part.block_spectrum(g.rfft(gx), j))
        rj = v * dgx - g.irfft(part.block_spectrum(vgx, j))
        comm += sup_norm(g, g.rfft(rj), rj)
        tot = g.irfft(part.block_spectrum(st.spectrum, j)) + rj
        bound += sup_norm(g, g.rfft(tot), tot)
    mech = Mechanism(nb(terms.source), nb(terms.linear), nb(terms.stretch), comm, bound)
    if j_cut is None:
        return mech
    low = lambda u: float(norm_profile(part, u).block_sup_norms[: j_cut + 2].sum())  # noqa: E731
    return replace(
        mech,
        j_cut=int(j_cut),
        low_source=low(terms.source),
        low_linear=low(terms.linear),
        low_flux=low(terms.transport + terms.stretch),
        low_total=low(terms.total()),
    )


REPORT_COLUMNS = (
    "N",
    "T",
    "dt",
    "steps",
    "norm0_B0inf1",
    "norm0_weighted",
    "norm0_square",
    "sup_B0inf1",
    "t0",
    "amplification",
    "initial_slope",
    "weighted_ceiling",
    "source_rate",
    "linear_rate",
    "stretch_rate",
    "commutator_rate",
    "lagrangian_bound",
    "low_slope",
    "low_source_rate",
    "low_linear_rate",
    "low_flux_rate",
    "y_xi_min",
    "y_xi_max",
    "truncated",
)


@dataclass(frozen=True)
class InflationReport:
    N: int
    T: float
    dt: float
    steps: int
    norm0_B0inf1: float
    norm0_weighted: float
    norm0_square: float
    sup_B0inf1: float
    t0: float
    amplification: float
    initial_slope: float
    weighted_ceiling: float
    mechanism: Mechanism
    low_slope: float = math.nan
    y_xi_min: float = math.nan
    y_xi_max: float = math.nan
    truncated: bool = False
    times: np.ndarray = field(default=None, repr=False)
    norm_series: np.ndarray = field(default=None, repr=False)

    @property
    def ln_N_reached(self) -> bool:
        return self.sup_B0inf1 >= math.log(self.N)

    def row(self) -> tuple:
        m = self.mechanism
        return (
            self.N, self.T, self.dt, self.steps, self.norm0_B0inf1, self.norm0_weighted,
            self.norm0_square, self.sup_B0inf1, self.t0, self.amplification,
            self.initial_slope, self.weighted_ceiling, m.source, m.linear, m.stretch,
            m.commutator, m.lagrangian_bound, self.low_slope, m.low_source, m.low_linear,
            m.low_flux, self.y_xi_min, self.y_xi_max, int(self.truncated),
        )


def inflation_csv(reports) -> str:
    rows = [r.row() for r in sorted(reports, key=lambda r: r.N)]
    return table_csv(REPORT_COLUMNS, rows, ("N", "steps", "truncated"))


def run_inflation(
    N: int,
    lam: float = 1.0,
    dt_max: float = 1e-4,
    records: int = 40,
    track_flow: bool = False,
    corrector: str = "regular",
) -> InflationReport:
    """One inflation run on ``[0, N^{-1/2}]``.

    The step is the smaller of ``dt_max`` and the transport stability
    limit of the datum (:func:`cfl_step`).  The initial slopes, over all
    blocks and over ``j <= N+2``, are one-step forward differences.
    """
    part = build_partition(auto_grid(N))
    d = build_gamma0(part, N, corrector)
    T = N ** -0.5
    dt = cfl_step(d.gamma0, lam, dt_max)
    probe = MochParams(lam=lam, dt=dt, t_final=T)
    every = max(1, probe.num_steps // records)
    params = MochParams(lam=lam, dt=dt, t_final=T, record_every=every)
    tr = solve(d.gamma0, part, params, track_flow=track_flow, keep_states=False)
    first = solve(d.gamma0, part, MochParams(lam=lam, dt=params.step, t_final=2 * params.step))
    slope = (first.norm_series[1, 0] - first.norm_series[0, 0]) / params.step
    cut = N + 2
    low = [norm_profile(part, st.gamma).block_sup_norms[: cut + 2].sum() for st in first.states[:2]]
    low_slope = (low[1] - low[0]) / params.step
    ns = tr.norm_series
    k = int(np.argmax(ns[:, 0]))
    y_min = y_max = math.nan
    if tr.flow is not None:
        y_min = float(min(f.y_xi.min() for f in tr.flow))
        y_max = float(max(f.y_xi.max() for f in tr.flow))
    return InflationReport(
        N=N,
        T=T,
        dt=params.step,
        steps=params.num_steps,
        norm0_B0inf1=d.norm_b0inf1,
        norm0_weighted=d.norm_weighted,
        norm0_square=d.norm_square_b0inf1,
        sup_B0inf1=float(ns[k, 0]),
        t0=float(tr.times[k]),
        amplification=float(ns[k, 0] / ns[0, 0]),
        initial_slope=float(slope),
        weighted_ceiling=float(ns[:, 1].max()),
        mechanism=mechanism_at(part, d.gamma0, lam, j_cut=cut),
        low_slope=float(low_slope),
        y_xi_min=y_min,
        y_xi_max=y_max,
        truncated=tr.truncated,
        times=tr.times,
        norm_series=ns,
    )


@dataclass(frozen=True)
class InflationSummary:
    reports: list
    slope_exponent: float
    amplification_increasing: bool
    ceiling_constants: np.ndarray


def inflation_experiment(N_list, lam: float = 1.0, dt_max: float = 1e-4, records: int = 40,
                         flow_upto: int = 0, corrector: str = "regular") -> InflationSummary:
    """Run :func:`run_inflation` for each ``N`` and summarize across the sweep.

    ``flow_upto`` tracks particle paths for ``N <= flow_upto``.  A truncated
    run stays in the list with its flag set.
    """
    ns = sorted({int(n) for n in N_list})
    if not ns:
        raise ParameterError("N list is empty")
    reports = [
        run_inflation(N, lam, dt_max, records, track_flow=N <= flow_upto, corrector=corrector)
        for N in ns
    ]
    amps = [r.amplification for r in reports]
    slope_exp = fit_exponent(ns, [r.initial_slope for r in reports]) if len(ns) > 1 else math.nan
    ceil = np.array([r.weighted_ceiling / r.N**1.9 for r in reports])
    return InflationSummary(reports, slope_exp, bool(np.all(np.diff(amps) > 0)), ceil)


__all__ = [
    "EstimateReport",
    "CommutatorProfile",
    "CommutatorResult",
    "InflationReport",
    "InflationSummary",
    "Mechanism",
    "ScalingTable",
    "algebra_defect",
    "commutator_check",
    "fit_exponent",
    "inflation_csv",
    "inflation_experiment",
    "lemma212_scaling_sweep",
    "low_frequency_fraction",
    "mechanism_at",
    "product_estimate_check",
    "random_bandlimited",
    "resample",
    "run_ensemble",
    "run_inflation",
]
