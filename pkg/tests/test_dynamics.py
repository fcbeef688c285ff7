import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from mochlab.besov import b0_inf_1
from mochlab.dynamics import (
    NORM_COLUMNS,
    MochParams,
    MochState,
    cfl_step,
    compute_m,
    flow_map,
    m_form_residual,
    rhs,
    rhs_terms,
    solve,
    step_rk4,
)
from mochlab.errors import BlowUpError, ParameterError
from mochlab.grid import RealField, helmholtz, make_grid
from mochlab.initial_data import datum_for
from mochlab.littlewood_paley import build_partition

T_SMOOTH = 0.5


def smooth(x):
    return 0.5 * np.sin(x) + 0.3 * np.cos(2 * x)


def const(grid, c):
    return RealField(grid, np.full(grid.num_points, float(c)))


def final(u0, dt, T=T_SMOOTH, **kw):
    return solve(u0, None, MochParams(dt=dt, t_final=T, **kw), keep_states=False).final.gamma.samples


@pytest.fixture(scope="module")
def g64():
    return make_grid(64)


@pytest.fixture(scope="module")
def u64(g64):
    return RealField.from_function(g64, smooth)


class TestMIdentity:
    """Symbolic check of which m-equation the gamma-equation implies."""

    @pytest.fixture(scope="class")
    @staticmethod
    def residuals():
        x, lam = sp.symbols("x lambda", nonzero=True)
        g = sp.Function("g")(x)
        v = sp.Function("v")(x)
        m = sp.diff(g, x) + g**2 / (2 * lam)
        g_t = -v * sp.diff(g, x) + g**2 / 2 + lam * v - g * sp.diff(v, x)
        m_t = sp.diff(g_t, x) + g * g_t / lam
        vx = sp.diff(v, x)
        conv = m_t - (-v * sp.diff(m, x) - 2 * m * vx + lam * vx)
        verb = m_t - (-2 * v * sp.diff(m, x) - m * vx + lam * vx)
        # impose v = G^{-1} m, i.e. v_xx = v + m
        closure = {sp.diff(v, x, 2): v + m}
        return sp.simplify(conv.subs(closure)), sp.simplify(verb.subs(closure)), (g, v, x)

    def test_conventional_ordering_is_implied(self, residuals):
        assert residuals[0] == 0

    def test_verbatim_ordering_leaves_a_remainder(self, residuals):
        _, verb, (g, v, x) = residuals
        extra = sp.simplify(verb - (v * sp.diff(g, x, 2) - sp.diff(g, x) * sp.diff(v, x)))
        assert verb != 0
        # the remainder is v m_x - m v_x
        lam = [s for s in verb.free_symbols if s.name == "lambda"][0]
        m = sp.diff(g, x) + g**2 / (2 * lam)
        assert sp.simplify(verb - (v * sp.diff(m, x) - m * sp.diff(v, x))) == 0
        assert extra != 0


class TestComputeM:
    def test_zero(self, g64):
        assert not np.any(compute_m(const(g64, 0), 1.0).samples)

    @pytest.mark.parametrize("c, lam", [(2.0, 1.0), (-1.5, 0.25), (3.0, -2.0)])
    def test_constant(self, g64, c, lam):
        np.testing.assert_allclose(compute_m(const(g64, c), lam).samples, c * c / (2 * lam), rtol=1e-14)

    def test_sin_half_lambda(self, g64):
        u = RealField.from_function(g64, np.sin)
        x = g64.nodes
        np.testing.assert_allclose(compute_m(u, 0.5).samples, np.cos(x) + np.sin(x) ** 2, atol=1e-13)

    @pytest.mark.parametrize("lam", [0.0, math.inf, math.nan])
    def test_lambda_rejected(self, g64, lam):
        with pytest.raises(ParameterError, match="λ ≠ 0"):
            compute_m(const(g64, 1), lam)


class TestRhs:
    def test_zero(self, g64):
        assert np.max(np.abs(rhs(const(g64, 0), 1.0).samples)) == 0.0

    @pytest.mark.parametrize("c", [1.0, -2.0, 7.5])
    @pytest.mark.parametrize("lam", [1.0, -0.3])
    def test_constants_are_equilibria(self, g64, c, lam):
        assert np.max(np.abs(rhs(const(g64, c), lam).samples)) <= 1e-14 * (1 + abs(c) ** 3)

    def test_linearization(self, g64):
        eps = 1e-6
        u = RealField.from_function(g64, lambda x: eps * np.sin(x))
        out = rhs(u, 1.0).samples
        assert np.max(np.abs(out + 0.5 * eps * np.cos(g64.nodes))) <= 10 * eps**2

    def test_terms_sum_to_rhs(self, g64, u64):
        t = rhs_terms(u64, 0.7)
        np.testing.assert_allclose(t.total().samples, rhs(u64, 0.7).samples, atol=1e-13)
        assert set(t.as_dict()) == {"transport", "source", "linear", "stretch"}

    def test_terms_against_pointwise_formula(self, u64, g64):
        # band-limited data with no dealiasing loss: compare with direct formulas
        t = rhs_terms(u64, 1.0)
        st = MochState(0.0, u64)
        v = st.v.samples
        np.testing.assert_allclose(t.source.samples, 0.5 * u64.samples**2, atol=1e-13)
        np.testing.assert_allclose(t.linear.samples, v, atol=1e-13)

    def test_no_dealias_path(self, u64):
        a = rhs(u64, 1.0, dealias_on=False).samples
        b = rhs(u64, 1.0).samples
        # low modes only: both paths agree
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestState:
    def test_m_v_consistency(self, u64):
        st = MochState(0.0, u64, lam=0.8)
        np.testing.assert_allclose(helmholtz(st.v).samples, st.m.samples, atol=1e-10)


class TestParams:
    @pytest.mark.parametrize(
        "kw",
        [
            {"lam": 0.0},
            {"dt": 0.0},
            {"dt": -1e-3},
            {"t_final": 0.0},
            {"dt": 2.0, "t_final": 1.0},
            {"record_every": 0},
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ParameterError):
            MochParams(**kw)

    def test_step_lands_on_t_final(self):
        p = MochParams(dt=0.3, t_final=1.0)
        assert p.num_steps == 4
        assert p.num_steps * p.step == pytest.approx(1.0, abs=1e-15)

    def test_exact_multiple(self):
        p = MochParams(dt=1e-4, t_final=8**-0.5)
        assert p.step <= 1e-4


class TestStep:
    @pytest.mark.parametrize("c", [0.0, 1.0, -3.0])
    def test_constant_preserved(self, g64, c):
        s = step_rk4(MochState(0.0, const(g64, c)), MochParams(dt=1e-2))
        assert np.max(np.abs(s.gamma.samples - c)) <= 1e-14 * max(1.0, abs(c))
        assert s.t == pytest.approx(1e-2)

    def test_temporal_order(self, u64):
        dt = T_SMOOTH / 40
        ref = final(u64, dt / 8)
        e1 = np.max(np.abs(final(u64, dt) - ref))
        e2 = np.max(np.abs(final(u64, dt / 2) - ref))
        assert 14.0 <= e1 / e2 <= 18.0

    def test_spatial_convergence(self):
        a = final(RealField.from_function(make_grid(128), smooth), T_SMOOTH / 80)
        b = final(RealField.from_function(make_grid(256), smooth), T_SMOOTH / 80)
        assert np.max(np.abs(a - b[::2])) < 1e-9

    def test_time_reversal(self, u64):
        errs = []
        for n in (20, 40):
            h = T_SMOOTH / n
            p = MochParams(dt=h, t_final=T_SMOOTH)
            s = MochState(0.0, u64)
            for _ in range(n):
                s = step_rk4(s, p)
            for _ in range(n):
                s = step_rk4(s, p, dt=-h)
            errs.append(np.max(np.abs(s.gamma.samples - u64.samples)))
        assert errs[1] < 1e-9
        assert errs[0] / errs[1] >= 14.0

    def test_blowup_flag(self, g64):
        big = RealField.from_function(g64, lambda x: 50 * np.cos(x))
        with pytest.raises(BlowUpError):
            step_rk4(MochState(0.0, big), MochParams(dt=0.5, t_final=1.0, blowup_ceiling=60.0))


class TestSolve:
    def test_zero(self, g64):
        tr = solve(const(g64, 0), build_partition(g64), MochParams(dt=0.1, t_final=0.5))
        assert all(not np.any(s.gamma.samples) for s in tr.states)
        assert not np.any(tr.norm_series)

    def test_constant(self, g64):
        tr = solve(const(g64, 1.25), None, MochParams(dt=0.1, t_final=0.5))
        for s in tr.states:
            np.testing.assert_allclose(s.gamma.samples, 1.25, rtol=1e-14)

    def test_times_and_records(self, u64):
        p = MochParams(dt=0.01, t_final=0.105, record_every=3)
        tr = solve(u64, build_partition(u64.grid), p)
        assert tr.times[0] == 0.0 and tr.times[-1] == pytest.approx(0.105, abs=1e-15)
        assert np.all(np.diff(tr.times) > 0)
        assert tr.norm_series.shape == (len(tr.times), 3)
        assert np.all(np.isfinite(tr.norm_series))

    def test_norm_csv_header(self, u64):
        tr = solve(u64, build_partition(u64.grid), MochParams(dt=0.05, t_final=0.1))
        assert tr.norm_csv().splitlines()[0] == "t," + ",".join(NORM_COLUMNS)

    def test_truncation_reported(self, g64):
        big = RealField.from_function(g64, lambda x: 5 * np.cos(x))
        tr = solve(big, None, MochParams(dt=0.05, t_final=2.0, blowup_ceiling=5.5))
        assert tr.truncated
        assert tr.t_last < 2.0
        assert tr.t_last == tr.times[-1]

    def test_deterministic(self, u64):
        a = solve(u64, build_partition(u64.grid), MochParams(dt=0.01, t_final=0.1)).norm_csv()
        b = solve(u64, build_partition(u64.grid), MochParams(dt=0.01, t_final=0.1)).norm_csv()
        assert a == b


class TestMResidual:
    def test_zero_and_constant(self, g64):
        for c in (0.0, 2.0):
            tr = solve(const(g64, c), None, MochParams(dt=0.1, t_final=0.3))
            r = m_form_residual(tr)
            assert np.max(r.verbatim) <= 1e-13
            assert np.max(r.conventional) <= 1e-13

    def test_too_few_states(self, u64):
        tr = solve(u64, None, MochParams(dt=0.1, t_final=0.2, record_every=5))
        with pytest.raises(ParameterError):
            m_form_residual(tr)

    def test_conventional_second_order(self):
        u = RealField.from_function(make_grid(128), smooth)
        res = [
            m_form_residual(solve(u, None, MochParams(dt=T_SMOOTH / n, t_final=T_SMOOTH))).conventional.max()
            for n in (40, 80)
        ]
        assert 3.5 <= res[0] / res[1] <= 4.5


class TestFlowMap:
    def test_zero(self, g64):
        tr = solve(const(g64, 0), None, MochParams(dt=0.1, t_final=0.5), track_flow=True)
        for f in tr.flow:
            np.testing.assert_allclose(f.y, g64.nodes, atol=1e-15)

    @pytest.mark.parametrize("c, lam", [(1.0, 1.0), (2.0, -0.5)])
    def test_constant_translation(self, g64, c, lam):
        tr = solve(const(g64, c), None, MochParams(lam=lam, dt=0.1, t_final=0.5), track_flow=True)
        for f in tr.flow:
            np.testing.assert_allclose(f.y, g64.nodes - c * c / (2 * lam) * f.t, atol=1e-13)
            np.testing.assert_allclose(f.y_xi, 1.0, atol=1e-13)

    def test_jacobian_law(self, u64):
        tr = solve(u64, None, MochParams(dt=T_SMOOTH / 100, t_final=T_SMOOTH, record_every=10), track_flow=True)
        assert max(f.law_error() for f in tr.flow) <= 1e-6
        assert all(f.is_monotone for f in tr.flow)

    def test_post_hoc_matches_tracked(self, u64):
        p = MochParams(dt=0.05, t_final=0.25)
        tracked = solve(u64, None, p, track_flow=True).flow
        post = flow_map(solve(u64, None, p))
        np.testing.assert_allclose(post[-1].y, tracked[-1].y, atol=1e-14)

    def test_other_lambda(self, u64):
        p = MochParams(dt=0.05, t_final=0.25)
        f = flow_map(solve(u64, None, p), lam=2.0)
        assert len(f) == p.num_steps + 1


class TestInflationData:
    @pytest.fixture(scope="class")
    @staticmethod
    def datum6():
        return datum_for(6)

    def test_cfl_default(self, datum6):
        assert cfl_step(datum6[1].gamma0, 1.0) == pytest.approx(1e-4)

    def test_cfl_scales_with_velocity(self, g64):
        u = RealField.from_function(g64, lambda x: 40 * np.cos(x))
        assert cfl_step(u, 1.0, dt_max=1.0) < 0.5 * cfl_step(0.1 * u, 1.0, dt_max=1.0)

    def test_norm_bookkeeping(self, datum6):
        part, d = datum6
        a0 = b0_inf_1(part, d.gamma0)
        bound = b0_inf_1(part, rhs(d.gamma0, 1.0))
        for delta in (1e-4, 5e-5):
            s = step_rk4(MochState(0.0, d.gamma0), MochParams(dt=delta), dt=delta)
            assert (b0_inf_1(part, s.gamma) - a0) / delta <= bound


@settings(max_examples=20, deadline=None)
@given(
    c=st.floats(min_value=-20, max_value=20, allow_nan=False),
    lam=st.floats(min_value=0.05, max_value=5.0) | st.floats(min_value=-5.0, max_value=-0.05),
)
def test_equilibrium_property(c, lam):
    g = make_grid(16)
    assert np.max(np.abs(rhs(const(g, c), lam).samples)) <= 1e-14 * (1 + abs(c) ** 3) * max(1, 1 / abs(lam))
