import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from cascade_scope.cutoffs import (
    CutoffError, build_eta, build_psi, check_scale_inequality, nested_cutoff, nested_margin,
    power_for, radial_profile, smoothstep, verify_cutoff_bounds,
)
from cascade_scope.fields import ScalarField, make_grid, sample_analytic

RHOS = (0.55, 0.65, 0.75, 0.85, 0.95)


def test_power_for():
    assert power_for(0.75) == 4
    assert power_for(0.55) == 3
    assert power_for(0.95) == 20


def test_smoothstep_endpoints_and_c2():
    assert smoothstep(0.0) == 0.0 and smoothstep(1.0) == 1.0
    # first and second derivatives vanish at both ends
    for t in (0.0, 1.0):
        _, d1, d2 = radial_profile(np.array([1.0 + t]), 1)
        assert abs(d1[0]) < 1e-12 and abs(d2[0]) < 1e-12
    assert smoothstep(0.5) == pytest.approx(0.5)
    assert np.all(np.diff(smoothstep(np.linspace(0, 1, 1001))) >= 0)


class TestEta:
    def test_plateaus(self):
        eta = build_eta(1.0, 0.75)
        assert eta(0.25) == 0.0
        assert eta(0.9) == 1.0

    def test_power(self):
        assert build_eta(1.0, 0.75).m == 4

    def test_out_of_range(self):
        with pytest.raises(CutoffError):
            build_eta(1.0, 0.4)
        with pytest.raises(CutoffError):
            build_eta(0.0, 0.75)

    def test_ratio_scale_invariant(self):
        vals = []
        for T in (1.0, 10.0):
            eta = build_eta(T, 0.75)
            t = np.linspace(T / 3, 2 * T / 3, 1_000_001)[1:-1]
            e, de = eta.evaluate(t)
            vals.append(np.max(np.abs(de) * T / e ** 0.75))
        assert all(math.isfinite(v) for v in vals)
        assert vals[0] == pytest.approx(vals[1], rel=1e-12)

    def test_integral_oracle(self):
        for rho in RHOS:
            eta = build_eta(3.0, rho)
            for p in (1.0, 0.5):
                want, _ = integrate.quad(lambda t: eta(t) ** p, 0, 3.0, points=[1.0, 2.0],
                                         epsabs=0, epsrel=1e-13, limit=400)
                assert eta.integral(p) == pytest.approx(want, rel=1e-9)


class TestPsi:
    def test_values(self):
        psi = build_psi([0.0, 0.0, 0.0], 1.0, 0.75)
        assert psi([[0.0], [0.0], [0.0]])[0] == 1.0
        assert psi([[2.5], [0.0], [0.0]])[0] == 0.0

    def test_plateau_gradient(self):
        psi = build_psi([0.0, 0.0], 2.0, 0.75)
        pts = np.random.default_rng(0).uniform(-1.4, 1.4, (2, 500))
        pts = pts[:, np.hypot(*pts) < 2.0]
        _, grad, lap = psi.evaluate(pts)
        assert np.all(grad == 0.0) and np.all(lap == 0.0)

    def test_gradient_doubles(self):
        r = np.linspace(0, 4, 2_000_001)
        sups = [np.max(np.abs(build_psi(0.0, R, 0.75, dim=3).radial(r * R)[1])) for R in (1.0, 0.5)]
        assert sups[1] / sups[0] == pytest.approx(2.0, rel=0.05)

    def test_inward(self):
        psi = build_psi(0.0, 1.0, 0.75, dim=3)
        _, dr, _ = psi.radial(np.linspace(0, 3, 100001))
        assert np.all(dr <= 0.0)

    def test_laplacian_matches_finite_difference(self):
        psi = build_psi([0.0, 0.0, 0.0], 1.0, 0.75)
        h = 1e-4
        x = np.array([[1.37], [0.2], [-0.4]])
        val, grad, lap = psi.evaluate(x)
        fd = 0.0
        for a in range(3):
            e = np.zeros((3, 1))
            e[a] = h
            fd += (psi(x + e)[0] - 2 * val[0] + psi(x - e)[0]) / h ** 2
        assert lap[0] == pytest.approx(fd, rel=1e-5)

    def test_nested(self):
        g = make_grid(-10.0, 20.0, 4001)
        psi0 = build_psi(0.0, 10.0, 0.75)
        for x in (-9.5, -3.0, 0.0, 6.0, 9.9):
            psi = nested_cutoff(x, 1.0, 10.0, 0.75)
            assert nested_margin(psi, psi0, g) >= 0.0
        with pytest.raises(CutoffError):
            nested_cutoff(10.0, 1.0, 10.0)


class TestBounds:
    @pytest.mark.parametrize("rho", RHOS)
    def test_built_cutoffs_bounded(self, rho):
        rep_s = verify_cutoff_bounds(build_psi(0.0, 1.0, rho, dim=3), samples=20_000)
        rep_t = verify_cutoff_bounds(build_eta(1.0, rho), samples=20_000)
        assert rep_s.bounded and rep_t.bounded and rep_s.inward
        for c in (rep_s.measured_C0_grad, rep_s.measured_C0_lap, rep_t.measured_C0_eta):
            assert math.isfinite(c)

    @pytest.mark.parametrize("rho", (0.65, 0.85))
    def test_constants_rescale_invariant(self, rho):
        a = verify_cutoff_bounds(build_psi(0.0, 1.0, rho, dim=3), samples=20_000)
        b = verify_cutoff_bounds(build_psi(5.0, 7.5, rho, dim=3), samples=20_000)
        assert a.measured_C0_grad == pytest.approx(b.measured_C0_grad, rel=1e-9)
        assert a.measured_C0_lap == pytest.approx(b.measured_C0_lap, rel=1e-9)
        c = verify_cutoff_bounds(build_eta(1.0, rho), samples=20_000)
        d = verify_cutoff_bounds(build_eta(13.0, rho), samples=20_000)
        assert c.measured_C0_eta == pytest.approx(d.measured_C0_eta, rel=1e-9)

    def test_unpowered_diverges(self):
        rep = verify_cutoff_bounds(build_psi(0.0, 1.0, 0.75, dim=1, m=1), samples=20_000)
        assert not rep.bounded
        assert rep.growth["grad"] > 1.5
        assert rep.measured_C0_grad == math.inf
        assert rep.to_dict()["measured_C0_grad"] == "inf"

    def test_constant_function_ratios_zero(self):
        class One:
            R, rho, m = 1.0, 0.75, None

            def radial(self, r):
                r = np.asarray(r)
                return np.ones_like(r), np.zeros_like(r), np.zeros_like(r)

        rep = verify_cutoff_bounds(One(), samples=1000)
        assert rep.measured_C0_grad == 0.0 and rep.measured_C0_lap == 0.0

    def test_rejects_non_cutoff(self):
        with pytest.raises(CutoffError):
            verify_cutoff_bounds(object())

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.55, 0.95), st.floats(0.01, 100.0))
    def test_grad_ratio_scale_invariant(self, rho, R):
        psi = build_psi(0.0, R, rho, dim=3)
        s = np.linspace(1.0, 2.0, 20001)[1:-1]
        p, dr, _ = psi.radial(s * R)
        ratio = np.max(np.abs(dr) * R / p ** rho)
        p1, dr1, _ = build_psi(0.0, 1.0, rho, dim=3).radial(s)
        assert ratio == pytest.approx(np.max(np.abs(dr1) / p1 ** rho), rel=1e-9)


class TestScaleInequality:
    def test_zero_field_degenerate(self):
        g = make_grid(-10.0, 20.0, 2048)
        rep = check_scale_inequality(ScalarField(g, np.zeros(2048)), build_psi(0.0, 5.0), 1)
        assert rep.degenerate and rep.lhs == 0.0 and rep.rhs_integral == 0.0

    @pytest.mark.parametrize("order", (1, 2))
    def test_demo_within_constant(self, order):
        g = make_grid(-10.0, 20.0, 8192)
        f = sample_analytic("demo1d", {}, g)
        rep = check_scale_inequality(f, build_psi(0.0, 5.0, 0.75), order)
        assert rep.within_bound

    @pytest.mark.parametrize("order", (1, 2))
    def test_bump_inside_plateau(self, order):
        g = make_grid(-4.0, 8.0, 4096)
        x = g.axis(0)
        bump = np.where(np.abs(x) < 0.5, np.exp(-1.0 / np.clip(0.25 - x * x, 1e-300, None)), 0.0)
        rep = check_scale_inequality(ScalarField(g, bump), build_psi(0.0, 1.0), order)
        assert rep.lhs <= 1e-12 * rep.rhs_integral

    def test_support_must_fit(self):
        g = make_grid(-1.0, 2.0, 64)
        with pytest.raises(CutoffError):
            check_scale_inequality(ScalarField(g, np.ones(64)), build_psi(0.0, 1.0), 1)


@pytest.mark.parametrize("m", (4, 20))
def test_profile_sign_near_outer_edge(m):
    # 1 - S(t) rounds below zero just under t = 1; odd powers must not flip sign
    s = np.linspace(1.99, 2.0, 200_001)
    psi, d1, _ = radial_profile(s, m)
    assert np.all(psi >= 0.0) and np.all(d1 <= 0.0)
