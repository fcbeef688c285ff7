"""Pseudospectral integration of the modified Camassa-Holm equation.

The unknown ``gamma`` obeys

    gamma_t + v gamma_x = gamma^2 / 2 + lam v - gamma v_x,
    m = gamma_x + gamma^2 / (2 lam),   v = G^{-1} m,   G = d_xx - 1.

The state is advanced on its half spectrum with classical RK4 at a fixed
step.  With dealiasing on, the state is kept inside the 2/3 band and every
product is truncated back to it.  Particle paths ``y' = v(t, y)`` can be
integrated on the same clock, together with ``A' = v_x(t, y)`` whose
exponential is the Jacobian predicted along characteristics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import BlowUpError, DiffeomorphismLost, NonFiniteFieldError, ParameterError
from .grid import Grid, RealField, nufft_evaluate
from .littlewood_paley import DyadicPartition, _check_grid
from .persist import table_csv

DEFAULT_DT = 1e-4
BLOWUP_CEILING = 1e6
# |z| bound for RK4 on the imaginary axis is 2 sqrt(2); stay well inside it
RK4_IMAG_LIMIT = 2.0 * math.sqrt(2.0)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if lam == 0.0 or not math.isfinite(lam):
        raise ParameterError("MOCH requires λ ≠ 0 (finite)")
    return lam


@dataclass(frozen=True)
class MochParams:
    """Integration parameters.

    ``record_every`` thins the stored states and norm samples; the final
    time is always recorded.
    """

    lam: float = 1.0
    dt: float = DEFAULT_DT
    t_final: float = 1.0
    dealias_on: bool = True
    record_every: int = 1
    blowup_ceiling: float = BLOWUP_CEILING

    def __post_init__(self):
        _check_lambda(self.lam)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not (self.t_final > 0 and math.isfinite(self.t_final)):
            raise ParameterError(f"t_final must be positive, got {self.t_final}")
        if not self.dt < self.t_final:
            raise ParameterError("dt must be smaller than t_final")
        if int(self.record_every) < 1:
            raise ParameterError("record_every must be at least 1")

    @property
    def num_steps(self) -> int:
        return max(1, math.ceil(self.t_final / self.dt - 1e-9))

    @property
    def step(self) -> float:
        """Uniform step that lands exactly on ``t_final``."""
        return self.t_final / self.num_steps


class _Operator:
    """Precomputed symbols for one grid, lambda and dealiasing choice."""

    def __init__(self, grid: Grid, lam: float, dealias_on: bool = True):
        self.grid = grid
        self.lam = _check_lambda(lam)
        self.dealias_on = dealias_on
        self.ik = grid.derivative_symbol
        self.ginv = grid.helmholtz_inverse_symbol
        self.mask = grid.dealias_mask.astype(float) if dealias_on else None

    def trunc(self, spec):
        return spec * self.mask if self.dealias_on else spec

    def core(self, ghat):
        """Physical ``gamma`` and ``v`` with the spectra of ``gamma^2`` and ``v``."""
        g = self.grid
        ghat = self.trunc(ghat)
        gam = g.irfft(ghat)
        sq = self.trunc(g.rfft(gam * gam))
        vhat = self.ginv * (self.ik * ghat + sq / (2.0 * self.lam))
        return ghat, gam, sq, vhat, g.irfft(vhat)

    def rhs(self, ghat):
        # -v gamma_x - gamma v_x = -(v gamma)_x: four transforms per call
        ghat, gam, sq, vhat, v = self.core(ghat)
        flux = self.trunc(self.grid.rfft(v * gam))
        return -self.ik * flux + 0.5 * sq + self.lam * vhat, gam, vhat


def compute_m(gamma: RealField, lam: float, dealias_on: bool = True) -> RealField:
    """``m = gamma_x + gamma^2 / (2 lam)``."""
    op = _Operator(gamma.grid, lam, dealias_on)
    ghat = op.trunc(gamma.spectrum)
    sq = op.trunc(gamma.grid.rfft(gamma.grid.irfft(ghat) ** 2))
    return RealField.from_spectrum(gamma.grid, op.ik * ghat + sq / (2.0 * op.lam))


@dataclass(frozen=True, eq=False)
class RhsTerms:
    """The four pieces of the right-hand side, as physical fields."""

    transport: RealField  # -v gamma_x
    source: RealField  # gamma^2 / 2
    linear: RealField  # lam v
    stretch: RealField  # -gamma v_x

    def total(self) -> RealField:
        return self.transport + self.source + self.linear + self.stretch

    def as_dict(self) -> dict:
        return {
            "transport": self.transport,
            "source": self.source,
            "linear": self.linear,
            "stretch": self.stretch,
        }


def rhs_terms(gamma: RealField, lam: float, dealias_on: bool = True) -> RhsTerms:
    op = _Operator(gamma.grid, lam, dealias_on)
    g = gamma.grid
    ghat, gam, sq, vhat, v = op.core(gamma.spectrum)
    gx = g.irfft(op.ik * ghat)
    vx = g.irfft(op.ik * vhat)
    mk = lambda spec: RealField.from_spectrum(g, spec)  # noqa: E731
    try:
        return RhsTerms(
            transport=mk(op.trunc(g.rfft(-v * gx))),
            source=mk(0.5 * sq),
            linear=mk(op.lam * vhat),
            stretch=mk(op.trunc(g.rfft(-gam * vx))),
        )
    except NonFiniteFieldError as exc:
        raise BlowUpError("non-finite value in the right-hand side", None) from exc


def rhs(gamma: RealField, lam: float, dealias_on: bool = True) -> RealField:
    """``-v gamma_x + gamma^2/2 + lam v - gamma v_x``."""
    op = _Operator(gamma.grid, lam, dealias_on)
    out, _, _ = op.rhs(gamma.spectrum)
    if not np.all(np.isfinite(out)):
        raise BlowUpError("non-finite value in the right-hand side", None)
    return RealField.from_spectrum(gamma.grid, out)


@dataclass(frozen=True, eq=False)
class MochState:
    """Time and ``gamma``; ``m`` and ``v`` are derived on access."""

    t: float
    gamma: RealField
    lam: float = 1.0
    dealias_on: bool = True

    @cached_property
    def m(self) -> RealField:
        return compute_m(self.gamma, self.lam, self.dealias_on)

    @cached_property
    def v(self) -> RealField:
        g = self.gamma.grid
        return RealField.from_spectrum(g, g.helmholtz_inverse_symbol * self.m.spectrum)


def _rk4(op: _Operator, ghat, dt):
    k1, gam, _ = op.rhs(ghat)
    k2 = op.rhs(ghat + 0.5 * dt * k1)[0]
    k3 = op.rhs(ghat + 0.5 * dt * k2)[0]
    k4 = op.rhs(ghat + dt * k3)[0]
    return ghat + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), gam


def _check_finite(ghat, gam, ceiling, t):
    if not np.all(np.isfinite(ghat)):
        raise BlowUpError(f"non-finite state at t={t:g}", t)
    peak = float(np.max(np.abs(gam)))
    if peak > ceiling:
        raise BlowUpError(f"|gamma| = {peak:.3g} exceeds {ceiling:g} at t={t:g}", t)


def step_rk4(state: MochState, params: MochParams, dt: float | None = None) -> MochState:
    """Advance one RK4 step of size ``dt`` (default ``params.step``)."""
    op = _Operator(state.gamma.grid, params.lam, params.dealias_on)
    h = params.step if dt is None else dt
    ghat0 = op.trunc(state.gamma.spectrum)
    ghat, gam = _rk4(op, ghat0, h)
    _check_finite(ghat, gam, params.blowup_ceiling, state.t)
    new = state.gamma.grid.irfft(ghat)
    if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > params.blowup_ceiling:
        raise BlowUpError(f"state left the finite regime at t={state.t + h:g}", state.t)
    return MochState(state.t + h, RealField(state.gamma.grid, new), params.lam, params.dealias_on)


def cfl_step(gamma0: RealField, lam: float, dt_max: float = DEFAULT_DT, safety: float = 0.5) -> float:
    """Largest step ``<= dt_max`` keeping transport modes inside RK4's stable disc.

    The transport eigenvalue of mode ``xi`` is about ``i v xi``; the top of
    the retained band sets the limit.  ``safety`` leaves room for ``v`` to
    grow during the run.
    """
    st = MochState(0.0, gamma0, lam)
    g = gamma0.grid
    vmax = float(np.max(np.abs(st.v.samples)))
    # the linear and stretching terms are bounded multipliers of size O(1 + |gamma|)
    rate = vmax * g.xi[g.dealias_mask][-1] + abs(lam) + 2 * gamma0.max_abs()
    if rate == 0.0:
        return dt_max
    return min(dt_max, safety * RK4_IMAG_LIMIT / rate)


# -- trajectories ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FlowMap:
    """Particle positions started at the grid nodes.

    ``y_xi`` is the spectral derivative of ``y - xi`` plus one; ``jacobian_law``
    is ``exp`` of the integral of ``v_x`` along each path.
    """

    t: float
    y: np.ndarray = field(repr=False)
    y_xi: np.ndarray = field(repr=False)
    jacobian_law: np.ndarray = field(repr=False)

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(self.y_xi > 0) and np.all(np.diff(self.y) > 0))

    def law_error(self) -> float:
        """Largest relative gap between ``y_xi`` and the characteristic law."""
        return float(np.max(np.abs(self.y_xi - self.jacobian_law) / np.abs(self.jacobian_law)))


NORM_COLUMNS = ("B0inf1", "B0infinf1_weighted", "Linf")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded output of :func:`solve`.

    ``norm_series`` has one row per recorded time with columns
    :data:`NORM_COLUMNS`.  A truncated run stops at ``t_last``.
    """

    params: MochParams
    times: np.ndarray
    states: list = field(repr=False)
    norm_series: np.ndarray | None = field(default=None, repr=False)
    flow: list | None = field(default=None, repr=False)
    truncated: bool = False
    t_last: float | None = None
    message: str = ""

    @property
    def final(self) -> MochState:
        return self.states[-1]

    def norm_csv(self) -> str:
        if self.norm_series is None:
            raise ParameterError("trajectory was solved without norm recording")
        rows = [(t, *row) for t, row in zip(self.times, self.norm_series)]
        return table_csv(("t",) + NORM_COLUMNS, rows)


def _norm_row(part: DyadicPartition, spec, samples) -> tuple[float, float, float]:
    blocks = part.block_sup_norms(spec)
    w = (np.arange(-1, part.j_max + 1) + 2.0) ** 2 * blocks
    return float(blocks.sum()), float(w.max()), float(np.max(np.abs(samples)))


class _Particles:
    def __init__(self, grid: Grid):
        self.grid = grid
        self.y = grid.nodes.copy()
        self.a = np.zeros(grid.num_points)

    def velocity(self, vhat, y):
        return nufft_evaluate(self.grid, vhat, y, derivative=True)

    def snapshot(self, t) -> FlowMap:
        g = self.grid
        disp = self.y - g.nodes
        y_xi = 1.0 + g.irfft(g.derivative_symbol * g.rfft(disp))
        return FlowMap(t, self.y.copy(), y_xi, np.exp(self.a))


def _rk4_coupled(op: _Operator, ghat, particles: _Particles, dt):
    """One RK4 step of ``gamma`` with particle paths and log-Jacobians."""
    y0 = particles.y
    ks, kys, kas = [], [], []
    g_stage, y_stage = ghat, y0
    gam0 = None
    for c in (0.0, 0.5, 0.5, 1.0):
        if ks:
            g_stage = ghat + c * dt * ks[-1]
            y_stage = y0 + c * dt * kys[-1]
        k, gam, vhat = op.rhs(g_stage)
        gam0 = gam if gam0 is None else gam0
        vy, vxy = particles.velocity(vhat, y_stage)
        ks.append(k)
        kys.append(vy)
        kas.append(vxy)
    w = (1.0, 2.0, 2.0, 1.0)
    new = ghat + (dt / 6.0) * sum(wi * ki for wi, ki in zip(w, ks))
    particles.y = y0 + (dt / 6.0) * sum(wi * ki for wi, ki in zip(w, kys))
    particles.a = particles.a + (dt / 6.0) * sum(wi * ki for wi, ki in zip(w, kas))
    return new, gam0


def solve(
    gamma0: RealField,
    part: DyadicPartition | None,
    params: MochParams,
    track_flow: bool = False,
    keep_states: bool = True,
) -> Trajectory:
    """Integrate from ``gamma0`` to ``params.t_final``.

    Parameters
    ----------
    part : DyadicPartition or None
        Needed for the norm series; pass None to skip norms.
    track_flow : bool
        Integrate particle paths on the same clock (one NUFFT pair per stage).
    keep_states : bool
        Store a :class:`MochState` at every recorded time.

    A blow-up stops the run and returns the trajectory up to the last
    finite state with ``truncated`` set.
    """
    if part is not None:
        _check_grid(part, gamma0)
    g = gamma0.grid
    op = _Operator(g, params.lam, params.dealias_on)
    dt = params.step
    every = int(params.record_every)
    ghat = op.trunc(gamma0.spectrum)
    particles = _Particles(g) if track_flow else None

    times, states, norms, flows = [], [], [], []

    def record(t, spec):
        samples = g.irfft(spec)
        times.append(t)
        if keep_states or not states:
            states.append(MochState(t, RealField(g, samples), params.lam, params.dealias_on))
        else:
            states[-1] = MochState(t, RealField(g, samples), params.lam, params.dealias_on)
        if part is not None:
            norms.append(_norm_row(part, spec, samples))
        if particles is not None:
            fm = particles.snapshot(t)
            flows.append(fm)
            if not np.all(fm.y_xi > 0):
                raise DiffeomorphismLost(f"y_xi <= 0 at t={t:g}", t)

    record(0.0, ghat)
    truncated, t_last, msg = False, params.t_final, ""
    n = params.num_steps
    for i in range(1, n + 1):
        t_prev = (i - 1) * dt
        try:
            if particles is None:
                new, gam = _rk4(op, ghat, dt)
            else:
                new, gam = _rk4_coupled(op, ghat, particles, dt)
            _check_finite(new, gam, params.blowup_ceiling, t_prev)
        except BlowUpError as exc:
            truncated, t_last, msg = True, times[-1], str(exc)
            break
        ghat = new
        if i % every == 0 or i == n:
            t = params.t_final if i == n else i * dt
            record(t, ghat)

    return Trajectory(
        params=params,
        times=np.array(times),
        states=states,
        norm_series=np.array(norms) if part is not None else None,
        flow=flows if particles is not None else None,
        truncated=truncated,
        t_last=t_last,
        message=msg,
    )


def flow_map(trajectory: Trajectory, lam: float | None = None) -> list[FlowMap]:
    """Flow-map series of ``trajectory``, re-integrating if it was not tracked."""
    if trajectory.flow is not None and (lam is None or lam == trajectory.params.lam):
        return trajectory.flow
    params = trajectory.params if lam is None else replace(trajectory.params, lam=lam)
    gamma0 = trajectory.states[0].gamma
    return solve(gamma0, None, params, track_flow=True, keep_states=False).flow


# -- m-form consistency -----------------------------------------------------------


@dataclass(frozen=True)
class MFormResidual:
    """Sup-norm residuals of two orderings of the ``m`` equation per interior time.

    ``verbatim``:      m_t + 2 v m_x + m v_x - lam v_x
    ``conventional``:  m_t + v m_x + 2 m v_x - lam v_x
    """

    times: np.ndarray
    verbatim: np.ndarray
    conventional: np.ndarray
    m_scale: float


def m_form_residual(trajectory: Trajectory, lam: float | None = None) -> MFormResidual:
    """Centered-difference residuals at every interior recorded time."""
    states = trajectory.states
    if len(states) < 3:
        raise ParameterError("need at least 3 recorded states for centered differences")
    lam = trajectory.params.lam if lam is None else _check_lambda(lam)
    ts = np.array([s.t for s in states])
    g = states[0].gamma.grid
    ms = [s.m.samples for s in states]
    ver, con = [], []
    for i in range(1, len(states) - 1):
        mt = (ms[i + 1] - ms[i - 1]) / (ts[i + 1] - ts[i - 1])
        st = states[i]
        m = ms[i]
        v = st.v.samples
        mx = g.irfft(g.derivative_symbol * st.m.spectrum)
        vx = g.irfft(g.derivative_symbol * st.v.spectrum)
        ver.append(np.max(np.abs(mt + 2 * v * mx + m * vx - lam * vx)))
        con.append(np.max(np.abs(mt + v * mx + 2 * m * vx - lam * vx)))
    scale = max(float(np.max(np.abs(m))) for m in ms)
    return MFormResidual(ts[1:-1], np.array(ver), np.array(con), scale)
