import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from burgers_vlasov.core import FluidField, GridSpec, KineticField
from burgers_vlasov.vlasov import (characteristic_origin_const_u, exact_const_u, free_transport,
                                   jacobian, moments, support_box, trace_back, vlasov_step,
                                   vlasov_step_pointwise)

# mass and first moment of exp(-(v - 0.5)^2 / 2) / sqrt(2 pi) on [-4, 4] (mpmath, 30 digits)
TRUNC_GAUSS_MASS = 0.999763973247839744903248386664
TRUNC_GAUSS_MEAN = 0.499025287669981017860457414342


def grid(n=32, nv=None, **kw):
    base = dict(x_min=-4.0, x_max=4.0, v_min=-2.0, v_max=2.0, nx=n, nv=nv or n, epsilon=0.02,
                t_end=1.0)
    base.update(kw)
    return GridSpec(**base)


def blob(x, v):
    return np.exp(-0.5 * (x / 0.4) ** 2 - 0.5 * ((v - 0.3) / 0.5) ** 2)


def sample(g, fn=blob, t=0.0):
    xx, vv = np.meshgrid(g.x, g.v, indexing="ij")
    return KineticField(fn(xx, vv), g, t)


class TestTraceBack:
    def test_zero_step_is_identity(self):
        g = grid()
        u = FluidField(np.sin(g.x), g)
        foot = trace_back(0.3, -0.2, 1.0, 0.0, u)
        assert (foot.X, foot.V, foot.s) == (0.3, -0.2, 1.0)

    def test_constant_u_third_order_local_error(self):
        g = grid()
        u = FluidField(np.full(g.nx, 0.7), g)
        errs = []
        for dt in (0.1, 0.05):
            foot = trace_back(0.2, -0.5, dt, dt, u)
            X0, V0 = characteristic_origin_const_u(0.2, -0.5, 0.7, dt)
            errs.append(math.hypot(foot.X - X0, foot.V - V0))
        assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.1)

    def test_matches_ode_solver(self):
        g = grid(n=200)
        u = FluidField(0.5 * np.exp(-g.x ** 2), g)

        def rhs(s, y):
            return [y[1], float(np.interp(y[0], g.x, u.values)) - y[1]]

        dt = 0.02
        sol = solve_ivp(rhs, (dt, 0.0), [0.1, 0.4], rtol=1e-12, atol=1e-13)
        foot = trace_back(0.1, 0.4, dt, dt, u)
        assert abs(foot.X - sol.y[0, -1]) < 1e-5
        assert abs(foot.V - sol.y[1, -1]) < 1e-5

    def test_vectorised(self):
        g = grid()
        u = FluidField(np.zeros(g.nx), g)
        foot = trace_back(np.zeros(3), np.array([0.0, 1.0, -1.0]), 0.5, 0.1, u)
        assert foot.X.shape == (3,) and foot.s == pytest.approx(0.4)


class TestJacobian:
    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
    def test_group_property(self, t, s, r):
        assert jacobian(t, r) == pytest.approx(jacobian(t, s) * jacobian(s, r), rel=1e-12)

    def test_identity_and_ode(self):
        assert jacobian(1.3, 1.3) == 1.0
        h = 1e-4
        for t, tau in [(0.0, 0.5), (2.0, 1.0), (1.0, -0.7)]:
            d = (jacobian(t, tau + h) - jacobian(t, tau - h)) / (2 * h)
            assert abs(d + jacobian(t, tau)) <= 1e-8


class TestExactConstU:
    def test_foot_solves_characteristic_ode(self):
        x, v, u, t = 0.4, -0.3, 0.25, 1.5

        def rhs(s, y):
            return [y[1], u - y[1]]

        sol = solve_ivp(rhs, (t, 0.0), [x, v], rtol=1e-12, atol=1e-13)
        X0, V0 = characteristic_origin_const_u(x, v, u, t)
        assert X0 == pytest.approx(sol.y[0, -1], abs=1e-9)
        assert V0 == pytest.approx(sol.y[1, -1], abs=1e-9)

    def test_mass_invariance_is_quadrature_only(self):
        g = GridSpec(-6, 6, -4, 4, 128, 256, epsilon=0.02, t_end=1.0)
        f0 = sample(g).mass()
        for t in (0.5, 1.0, 2.0):
            ft = exact_const_u(blob, 0.2, t, g)
            assert abs(ft.mass() - f0) / f0 <= 1e-6

    def test_gaussian_moments_against_reference(self):
        g = GridSpec(-0.5, 0.5, -4, 4, 4, 512, epsilon=0.02, t_end=1.0)

        def gauss(x, v):
            return np.exp(-0.5 * (v - 0.5) ** 2) / math.sqrt(2 * math.pi) * np.ones_like(x)

        m = moments(sample(g, gauss))
        assert abs(m.rho[0] - TRUNC_GAUSS_MASS) <= g.dv ** 2
        assert abs(m.j[0] - TRUNC_GAUSS_MEAN) <= g.dv ** 2


class TestVlasovStep:
    def test_zero_density_stays_zero(self):
        g = grid()
        out = vlasov_step(KineticField(np.zeros((g.nx, g.nv)), g), FluidField(np.ones(g.nx), g), 0.01)
        assert not out.values.any() and out.time == pytest.approx(0.01)

    @given(st.floats(-1.0, 1.0), st.floats(0.001, 0.05))
    def test_mass_and_positivity(self, ushift, dt):
        g = grid(n=24)
        f = sample(g)
        u = FluidField(ushift * np.exp(-g.x ** 2), g)
        out = vlasov_step(f, u, dt)
        assert np.all(out.values >= 0)
        assert out.mass() == pytest.approx(f.mass(), rel=1e-12)

    def test_drag_contracts_towards_fluid_velocity(self):
        g = grid(n=64)
        f = sample(g)
        u = FluidField(np.full(g.nx, -0.5), g)
        out = free_transport(f, u, 1.0, 0.01)
        j0 = float(moments(f).j.sum()) / float(moments(f).rho.sum())
        j1 = float(moments(out).j.sum()) / float(moments(out).rho.sum())
        # mean velocity relaxes like u + (v0 - u) e^{-t}
        assert j1 == pytest.approx(-0.5 + (j0 + 0.5) * math.exp(-1.0), abs=0.02)

    def test_first_order_against_exact(self):
        def err(n):
            g = grid(n)
            fT = free_transport(sample(g), FluidField(np.zeros(n), g), 1.0, 0.4 * g.dv / 2)
            return float(np.abs(fT.values - exact_const_u(blob, 0.0, 1.0, g).values).sum() * g.dx * g.dv)

        ratio = err(32) / err(64)
        assert 1.6 <= ratio <= 2.6

    def test_pointwise_reference_agrees(self):
        g = grid(n=64)
        u = FluidField(np.zeros(g.nx), g)
        a = free_transport(sample(g), u, 0.5, 0.01)
        b = free_transport(sample(g), u, 0.5, 0.01, step=vlasov_step_pointwise)
        exact = exact_const_u(blob, 0.0, 0.5, g).values
        assert np.abs(a.values - exact).sum() < 0.2 * np.abs(exact).sum()
        assert np.abs(b.values - exact).sum() < 0.2 * np.abs(exact).sum()
        assert b.time == pytest.approx(0.5)


class TestSupportBox:
    def test_empty(self):
        g = grid(n=8)
        assert support_box(KineticField(np.zeros((8, 8)), g)) is None

    def test_single_cell(self):
        g = grid(n=8)
        vals = np.zeros((8, 8))
        vals[2, 5] = 1.0
        box = support_box(KineticField(vals, g))
        assert (box.i_lo, box.i_hi, box.k_lo, box.k_hi) == (2, 2, 5, 5)
        assert box.x_extent == pytest.approx(g.dx) and box.v_extent == pytest.approx(g.dv)

    def test_negative_threshold(self):
        g = grid(n=8)
        with pytest.raises(ValueError):
            support_box(KineticField(np.ones((8, 8)), g), -1.0)

    def test_moments_shapes(self):
        g = grid(n=8)
        m = moments(sample(g))
        assert m.rho.shape == m.j.shape == m.e2.shape == (8,)
