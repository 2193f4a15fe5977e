import math

import numpy as np
import pytest

from cascade_scope.fields import (
    FieldFileError, FieldSeries, GeneratorError, GridError, ScalarField, VectorField,
    curl_array, decode_field, derivative, encode_field, make_grid, read_field,
    sample_analytic, sample_series, velocity_from_vorticity, write_field,
)

TWO_PI = 2.0 * math.pi


def box(n, dim=3):
    return make_grid((0.0,) * dim, (TWO_PI,) * dim, (n,) * dim, (True,) * dim)


class TestGrid:
    def test_spacing_1d(self):
        g = make_grid(-10.0, 20.0, 4096)
        assert g.spacing == (20.0 / 4096,)
        assert g.dim == 1

    def test_spacing_3d_box(self):
        g = box(64)
        assert g.spacing == (TWO_PI / 64,) * 3

    def test_zero_extent_rejected(self):
        with pytest.raises(GridError):
            make_grid(0.0, 0.0, 16)

    def test_inconsistent_dimensions(self):
        with pytest.raises(GridError):
            make_grid((0.0, 0.0), (1.0, 1.0, 1.0), 8)

    def test_cell_centres(self):
        g = make_grid(0.0, 1.0, 4)
        np.testing.assert_array_equal(g.axis(0), [0.125, 0.375, 0.625, 0.875])

    def test_contains_ball(self):
        g = make_grid(-1.0, 2.0, 16)
        assert g.contains_ball([0.0], 1.0)
        assert not g.contains_ball([0.5], 1.0)
        p = box(8)
        assert p.contains_ball([0, 0, 0], math.pi)
        assert not p.contains_ball([0, 0, 0], math.pi * 1.01)

    def test_fields_are_immutable(self):
        g = make_grid(0.0, 1.0, 8)
        f = ScalarField(g, np.zeros(8))
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_shape_mismatch(self):
        g = make_grid(0.0, 1.0, 8)
        with pytest.raises(GridError):
            ScalarField(g, np.zeros(9))


class TestSeries:
    def test_uniform_times(self):
        g = box(8, 2)
        s = sample_series("taylor_green_2d3d", {}, g, 0.5, 4)
        np.testing.assert_allclose(s.times, [0, 0.125, 0.25, 0.375, 0.5])
        assert s.T == 0.5 and len(s) == 5

    def test_nonuniform_rejected(self):
        g = make_grid(0.0, 1.0, 8)
        snaps = [ScalarField(g, np.zeros(8), t) for t in (0.0, 0.1, 0.5)]
        with pytest.raises(GridError):
            FieldSeries.from_fields(snaps)

    def test_static(self):
        g = make_grid(0.0, 1.0, 8)
        s = FieldSeries.constant(ScalarField(g, np.ones(8)), 3.0)
        assert s.static and s.T == 3.0
        with pytest.raises(GridError):
            FieldSeries((s.final, s.final), 1.0, static=True)


class TestGenerators:
    def test_demo1d_zero_at_one(self):
        g = make_grid(0.75, 2.0, 4)  # first cell centre at x = 1
        f = sample_analytic("demo1d", {}, g)
        assert g.axis(0)[0] == 1.0
        assert f.values[0] == 0.0

    def test_demo1d_absolute(self):
        g = make_grid(-10.0, 20.0, 1000)
        f = sample_analytic("demo1d", {"absolute": True}, g)
        assert np.all(f.values >= 0)

    def test_random_multiscale_deterministic(self):
        g = box(32)
        a = sample_analytic("random_multiscale", {"seed": 7}, g)
        b = sample_analytic("random_multiscale", {"seed": 7}, g)
        assert a.values.tobytes() == b.values.tobytes()
        c = sample_analytic("random_multiscale", {"seed": 8}, g)
        assert not np.array_equal(a.values, c.values)

    def test_random_multiscale_divergence_free(self):
        g = box(32)
        u = sample_analytic("random_multiscale", {"seed": 3}, g)
        div = derivative(u, "divergence").values
        assert np.max(np.abs(div)) <= 1e-10 * np.max(np.abs(u.values))

    def test_abc_beltrami(self):
        g = box(64)
        u = sample_analytic("abc_flow", {}, g)
        w = curl_array(u.values, g)
        assert np.max(np.abs(w - u.values)) <= 1e-6 * np.max(np.abs(u.values))

    def test_abc_vorticity_generator(self):
        g = box(16)
        u = sample_analytic("abc_flow", {"field": "velocity"}, g, 0.3)
        w = sample_analytic("abc_flow", {"field": "vorticity"}, g, 0.3)
        np.testing.assert_allclose(curl_array(u.values, g), w.values, atol=1e-12)

    def test_unknown_generator(self):
        with pytest.raises(GeneratorError):
            sample_analytic("nope", {}, box(8))

    def test_unknown_param(self):
        with pytest.raises(GeneratorError):
            sample_analytic("abc_flow", {"Q": 1}, box(8))

    def test_abc_needs_3d(self):
        with pytest.raises(GeneratorError):
            sample_analytic("abc_flow", {}, box(8, 2))


class TestCalculus:
    def test_gradient_of_constant(self):
        g = box(16)
        f = ScalarField(g, np.full(g.shape, 3.5))
        for scheme in ("spectral", "central2"):
            assert np.all(derivative(f, "gradient", scheme).values == 0.0)

    def test_taylor_green_curl(self):
        g = box(32, 2)
        u = sample_analytic("taylor_green_2d3d", {"k": 2}, g, 0.1)
        w = sample_analytic("taylor_green_2d3d", {"k": 2, "field": "vorticity"}, g, 0.1)
        got = derivative(u, "curl").values
        assert np.max(np.abs(got - w.values)) <= 1e-10 * np.max(np.abs(w.values))

    def test_spectral_matches_analytic(self):
        g = box(32)
        x, y, z = g.mesh()
        f = ScalarField(g, np.sin(3 * x) * np.cos(2 * y) + np.sin(z))
        grad = derivative(f, "gradient").values
        want = np.stack([3 * np.cos(3 * x) * np.cos(2 * y),
                         -2 * np.sin(3 * x) * np.sin(2 * y), np.cos(z)])
        np.testing.assert_allclose(grad, want, atol=1e-10 * np.max(np.abs(want)))
        lap = derivative(f, "laplacian").values
        np.testing.assert_allclose(lap, -13 * np.sin(3 * x) * np.cos(2 * y) - np.sin(z), atol=1e-9)

    def test_central2_second_order(self):
        errs = []
        for n in (32, 64, 128):
            g = make_grid(0.0, TWO_PI, n, True)
            x = g.axis(0)
            f = ScalarField(g, np.sin(x))
            d = derivative(f, "gradient", "central2").values[0]
            errs.append(np.max(np.abs(d - np.cos(x))))
        for a, b in zip(errs, errs[1:]):
            assert 3.5 <= a / b <= 4.5

    def test_spectral_needs_periodic(self):
        g = make_grid(0.0, 1.0, 16)
        with pytest.raises(GridError):
            derivative(ScalarField(g, np.zeros(16)), "gradient", "spectral")

    def test_unknown_kind(self):
        g = box(8)
        with pytest.raises(ValueError):
            derivative(ScalarField(g, np.zeros(g.shape)), "hessian")


class TestBiotSavart:
    def test_zero(self):
        g = box(16)
        u = velocity_from_vorticity(VectorField(g, np.zeros((3,) + g.shape)))
        assert np.all(u.values == 0.0)

    def test_round_trip(self):
        g = box(32)
        w = sample_analytic("random_multiscale", {"seed": 1, "field": "vorticity"}, g)
        u = velocity_from_vorticity(w)
        back = curl_array(u.values, g)
        assert np.max(np.abs(back - w.values)) <= 1e-10 * np.max(np.abs(w.values))

    def test_single_mode_inversion(self):
        g = box(64, 2)
        for k in (1, 3, 16):
            w = sample_analytic("single_mode", {"k": k, "A": 2.0}, g)
            u = velocity_from_vorticity(w)
            want = sample_analytic("single_mode", {"k": k, "A": 2.0, "field": "velocity"}, g)
            np.testing.assert_allclose(u.values, want.values, atol=1e-10)

    def test_mean_reported(self):
        g = box(8)
        vals = np.zeros((3,) + g.shape)
        vals[2] = 1.5
        _, mean = velocity_from_vorticity(VectorField(g, vals), return_mean=True)
        np.testing.assert_allclose(mean, [0, 0, 1.5])


class TestIO:
    def test_roundtrip_vector(self, tmp_path):
        g = box(64)
        u = sample_analytic("random_multiscale", {"seed": 2}, g, 0.25)
        p = tmp_path / "u.cscope"
        write_field(u, p)
        v = read_field(p)
        assert v.grid == u.grid and v.time == u.time
        assert v.values.tobytes() == u.values.tobytes()

    def test_roundtrip_scalar_irrational(self):
        g = make_grid(-math.pi, math.e, 17)
        f = ScalarField(g, np.random.default_rng(0).standard_normal(17), 1 / 3)
        h = decode_field(encode_field(f))
        assert h.grid == g and h.time == f.time
        assert h.values.tobytes() == f.values.tobytes()

    def test_truncated_payload(self):
        g = make_grid(0.0, 1.0, 16)
        buf = encode_field(ScalarField(g, np.ones(16)))
        with pytest.raises(FieldFileError, match="size mismatch"):
            decode_field(buf[:-8])

    def test_edited_resolution(self):
        g = make_grid(0.0, 1.0, 16)
        buf = encode_field(ScalarField(g, np.ones(16)))
        bad = buf.replace(b'"resolution": [16]', b'"resolution": [18]')
        assert bad != buf
        with pytest.raises(FieldFileError):
            decode_field(bad)

    def test_bad_magic(self):
        with pytest.raises(FieldFileError, match="magic"):
            decode_field(b"garbage bytes here")
