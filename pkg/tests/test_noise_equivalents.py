import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssdim import ConvergenceError
from ssdim.noise_equivalents import (
    NoiseModel,
    SpectralMeasure,
    autocov_residual,
    autocov_support,
    cca_cdf,
    cca_density,
    cca_density_grid,
    cca_quadratic_residual,
    cca_stieltjes,
    cca_stieltjes_tilde,
    cca_support,
    density_autocov,
    f_ratio,
    phi_autocov,
    solve_t_autocov,
    support_edge_autocov,
    t_autocov_real,
    w_of_x,
)

X_PLUS_025 = 1.2120190528383288


def closed_w_plus(sigma2, c):
    return sigma2 * (1 + (1 + np.sqrt(1 + 8 * c)) / 2)


def white(c, sigma2=1.0, M=10):
    return NoiseModel.white(M, 1, M / c, sigma2)


class TestNoiseModel:
    def test_ratio(self):
        assert NoiseModel.white(200, 2, 1600).c == 0.25

    def test_rejects_c_at_least_one(self):
        with pytest.raises(ValueError):
            NoiseModel.white(100, 2, 200)

    def test_rejects_unsorted_or_nonpositive(self):
        with pytest.raises(ValueError):
            NoiseModel(3, 1, 10, [1.0, 2.0, 0.5])
        with pytest.raises(ValueError):
            NoiseModel(2, 1, 10, [1.0, 0.0])
        with pytest.raises(ValueError):
            NoiseModel(2, 1, 10, [np.inf, 1.0])

    def test_cosine_spectrum(self):
        n = NoiseModel.cosine(130, 4, 2000)
        assert n.lam[0] == pytest.approx(0.5 + np.pi / 4)
        assert np.all(np.diff(n.lam) <= 0)
        assert n.c == pytest.approx(0.26)

    def test_lam_is_read_only(self):
        n = NoiseModel.white(3, 1, 10)
        with pytest.raises(ValueError):
            n.lam[0] = 2.0


class TestEdge:
    @pytest.mark.parametrize("c", [0.1, 0.25, 0.5])
    def test_closed_form(self, c):
        assert support_edge_autocov(white(c)).w_plus == pytest.approx(closed_w_plus(1.0, c), abs=1e-9)

    def test_x_plus_value(self):
        e = support_edge_autocov(white(0.25))
        assert e.w_plus == pytest.approx(2.3660254, abs=1e-7)
        assert e.x_plus == pytest.approx(X_PLUS_025, abs=1e-12)

    def test_small_c(self):
        assert support_edge_autocov(NoiseModel.from_ratio(1e-4)).x_plus < 1e-2

    def test_cosine_regression(self):
        e = support_edge_autocov(NoiseModel.cosine(130, 4, 2000))
        # frozen from the solver itself
        assert e.x_plus == pytest.approx(1.3675380423734627, rel=1e-10)
        assert e.w_plus == pytest.approx(2.607909704089419, rel=1e-10)

    def test_phi_derivative_vanishes_at_edge(self):
        n = white(0.25)
        e = support_edge_autocov(n)
        assert abs(phi_autocov(n, e.w_plus, derivative=True)[1]) < 1e-9

    def test_phi_closed_scalar(self):
        c, w = 0.25, 2.3660254
        expected = c * w**2 * (1 / (1 - w)) * (c / (1 - w) - 1)
        assert phi_autocov(white(c), w) == pytest.approx(expected, rel=1e-13)
        assert phi_autocov(white(c), w) == pytest.approx(1.21202, abs=1e-5)

    def test_phi_derivative_finite_difference(self, rng):
        n = NoiseModel(4, 1, 20, [3.0, 2.0, 1.5, 1.0])
        for w in 3.3 + 10 * rng.random(10):
            _, d = phi_autocov(n, w, derivative=True)
            h = 1e-6
            fd = (phi_autocov(n, w + h) - phi_autocov(n, w - h)) / (2 * h)
            assert d == pytest.approx(fd, rel=1e-5)

    def test_phi_rejects_eigenvalue(self):
        with pytest.raises(ValueError):
            phi_autocov(white(0.25), 1.0)


class TestSupport:
    def test_white_single_interval(self):
        for c in (0.1, 0.5, 0.9):
            sup = autocov_support(white(c))
            assert len(sup.intervals) == 1 and sup.intervals[0][0] == 0.0

    def test_cosine_single_interval(self):
        assert len(autocov_support(NoiseModel.cosine(130, 4, 2000)).intervals) == 1

    def test_two_point_spectrum_matches_im_t_scan(self):
        n = NoiseModel(2, 1, 8, [100.0, 1.0])
        sup = autocov_support(n)
        xs = np.linspace(sup.x_plus * 1e-3, sup.x_plus * 1.1, 400)
        inside = np.array([solve_t_autocov(n, complex(x, 1e-7)).imag > 1e-4 for x in xs])
        h = xs[1] - xs[0]
        for x, flag in zip(xs, inside):
            in_sup = any(a - h <= x <= b + h for a, b in sup.intervals)
            near_edge = any(min(abs(x - a), abs(x - b)) < 3 * h for a, b in sup.intervals)
            if not near_edge:
                assert flag == in_sup


class TestWOfX:
    def test_round_trip(self, rng):
        n = white(0.25)
        e = support_edge_autocov(n)
        for w0 in e.w_plus * (1.01 + 5 * rng.random(10)):
            assert w_of_x(n, phi_autocov(n, w0), e) == pytest.approx(w0, abs=1e-9)

    def test_residual_at_twice_edge(self):
        n = white(0.25)
        x = 2 * X_PLUS_025
        assert abs(phi_autocov(n, w_of_x(n, x)) - x) < 1e-9

    def test_monotone(self, rng):
        n = NoiseModel.cosine(30, 2, 300)
        e = support_edge_autocov(n)
        for _ in range(10):
            x1, x2 = np.sort(e.x_plus * (1 + 4 * rng.random(2)))
            assert w_of_x(n, x1, e) < w_of_x(n, x2, e)

    def test_rejects_inside(self):
        with pytest.raises(ValueError):
            w_of_x(white(0.25), 1.0)


class TestFixedPoint:
    def test_large_z(self):
        z = 1e6j
        t = solve_t_autocov(white(0.25), z)
        assert abs(z * t + 1) < 1e-4

    def test_negative_real(self):
        n = white(0.25)
        t = solve_t_autocov(n, -1.0)
        assert abs(t.imag) < 1e-14
        assert autocov_residual(n, -1.0, t) < 1e-10

    def test_just_above_support_is_nearly_real(self):
        t = solve_t_autocov(white(0.25), 1.3 + 1e-6j)
        assert abs(t.imag) < 1e-3

    def test_boundary_value_matches_real_formula(self):
        n = white(0.25)
        t = solve_t_autocov(n, 1.5 + 1e-9j)
        assert t.real == pytest.approx(t_autocov_real(n, 1.5), rel=1e-6)

    def test_conjugate_symmetry(self):
        n = NoiseModel.cosine(20, 2, 200)
        z = 0.7 + 0.3j
        assert solve_t_autocov(n, z.conjugate()) == pytest.approx(solve_t_autocov(n, z).conjugate())

    def test_rejects_positive_real(self):
        with pytest.raises(ValueError):
            solve_t_autocov(white(0.25), 0.5)

    def test_convergence_error_is_runtime_error(self):
        assert issubclass(ConvergenceError, RuntimeError)


class TestAutocovDensity:
    def test_mass(self):
        n = NoiseModel.white(200, 2, 1600)
        grid = np.linspace(1e-3, X_PLUS_025, 2000)
        meas = density_autocov(n, grid)
        assert 0.95 <= meas.integral() <= 1.0
        assert meas.check_probability()

    def test_zero_beyond_edge(self):
        n = white(0.25)
        meas = density_autocov(n, np.array([X_PLUS_025 * 1.001, X_PLUS_025 * 1.01]))
        assert np.all(meas.density < 1e-2)

    def test_rejects_nonpositive_grid(self):
        with pytest.raises(ValueError):
            density_autocov(white(0.25), np.array([0.0, 0.5]))


class TestCcaLaw:
    def test_support_values(self):
        s = cca_support(0.25)
        assert s.bulk_right == 0.75 and not s.has_unit_atom
        s = cca_support(0.5)
        assert s.bulk_right == 1.0 and s.atom_mass_at_one == 0.0
        s = cca_support(0.75)
        assert s.bulk_right == 0.75 and s.has_unit_atom and s.atom_mass_at_one == 0.5

    def test_tilde_spot_value(self):
        tt = cca_stieltjes_tilde(0.25, -1.0)
        assert tt == pytest.approx(0.9557189138830738, abs=1e-12)
        assert cca_quadratic_residual(0.25, -1.0, tt) < 1e-10

    def test_tilde_large_z(self):
        y = 1e6
        assert abs(-1j * y * cca_stieltjes_tilde(0.25, 1j * y) - 1) < 1e-4

    def test_t_large_z(self):
        y = 1e6
        assert abs(-1j * y * cca_stieltjes(0.25, 1j * y) - 1) < 1e-4

    def test_values_at_09(self):
        # exact evaluation of the real-axis closed forms (differs from the rounded
        # reference -1.8350333 / -1.2920916 in the 7th digit)
        assert cca_stieltjes(0.25, 0.9) == pytest.approx(-1.8350341907227392, rel=1e-12)
        assert cca_stieltjes_tilde(0.25, 0.9) == pytest.approx(-1.292091881014018, rel=1e-12)
        assert cca_stieltjes(0.25, 0.9) == pytest.approx(-1.8350333, abs=1e-5)

    def test_identity(self, rng):
        c = 0.3
        for z in rng.normal(size=20) + 1j * rng.normal(size=20):
            lhs = cca_stieltjes(c, z)
            assert abs(lhs - (cca_stieltjes_tilde(c, z) / c + (1 - c) / (c * z))) < 1e-12

    def test_upper_half_plane(self, rng):
        for z in rng.normal(size=20) + 1j * rng.random(20) * 3 + 1e-3j:
            assert cca_stieltjes_tilde(0.4, z).imag > 0

    def test_unit_point_limit(self):
        c = 0.25
        assert cca_stieltjes_tilde(c, 1.0) == pytest.approx(cca_stieltjes_tilde(c, 1.0 + 1e-9), rel=1e-6)

    def test_rejects_support(self):
        with pytest.raises(ValueError):
            cca_stieltjes_tilde(0.25, 0.5)
        with pytest.raises(ValueError):
            cca_stieltjes_tilde(0.75, 1.0)

    def test_density_mass(self):
        meas = cca_density(0.25, cca_density_grid(0.25, 2000))
        assert 0.99 <= meas.total_mass() <= 1.01

    def test_density_mass_with_atom(self):
        meas = cca_density(0.7, cca_density_grid(0.7, 4000))
        assert meas.atoms[0][0] == 1.0
        assert 0.99 <= meas.total_mass() <= 1.01
        assert cca_cdf(0.7, 1.0) == pytest.approx(1.0, abs=1e-6)

    def test_arcsine_at_half(self):
        x = np.linspace(0.05, 0.95, 11)
        d = cca_density(0.5, x).density
        assert np.allclose(d, 1 / (np.pi * np.sqrt(x * (1 - x))))

    def test_density_grid_validation(self):
        with pytest.raises(ValueError):
            cca_density(0.25, np.array([0.1, 0.8]))

    def test_cdf_endpoints(self):
        assert cca_cdf(0.25, 0.0) == 0.0
        assert cca_cdf(0.25, 0.75) == pytest.approx(1.0, abs=1e-6)


class TestFRatio:
    def test_left_end(self):
        assert f_ratio(0.25, 0.75) == pytest.approx(1 / 3, rel=1e-12)

    def test_right_end(self):
        assert f_ratio(0.25, 1.0) == 1.0
        assert f_ratio(0.7, 1.0) == pytest.approx((0.7 / 0.3) ** 2)

    def test_value_at_09(self):
        # exact evaluation; the rounded reference 0.79334 is 7.5e-5 away
        assert f_ratio(0.25, 0.9) == pytest.approx(0.7932652990377572, rel=1e-12)
        assert f_ratio(0.25, 0.9) == pytest.approx(0.79334, abs=1e-4)

    def test_continuous_at_one(self):
        assert f_ratio(0.25, 1 - 1e-9) == pytest.approx(1.0, abs=1e-6)

    def test_rejects_outside(self):
        with pytest.raises(ValueError):
            f_ratio(0.25, 0.5)


class TestSpectralMeasure:
    def test_validation(self):
        with pytest.raises(ValueError):
            SpectralMeasure([0.0, 1.0], [1.0, -1.0])
        with pytest.raises(ValueError):
            SpectralMeasure([1.0, 0.0], [1.0, 1.0])

    def test_cdf_uniform(self):
        g = np.linspace(0, 1, 101)
        m = SpectralMeasure(g, np.ones_like(g))
        assert m.cdf(0.3) == pytest.approx(0.3)
        assert m.cdf(2.0) == pytest.approx(1.0)

    @given(st.floats(0.05, 0.95))
    def test_cca_cdf_matches_measure_cdf(self, x):
        c = 0.25
        b = 4 * c * (1 - c)
        meas = cca_density(c, cca_density_grid(c, 4000))
        assert meas.cdf(x * b) == pytest.approx(float(cca_cdf(c, x * b)), abs=5e-3)
