import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oldroyd_decay.spectral import (
    SHELL_INNER, SHELL_OUTER, build_grid, check_mean_free, dealias, fractional_symbol,
    homogeneous_symbol, inhomogeneous_symbol, leray_project, lp_chi, lp_phi, lp_shell_weights,
    spectral_l2_sq, to_physical, to_physical_complex, to_spectral,
)


class TestBuildGrid:
    def test_unit_box(self):
        g = build_grid(16, 2 * np.pi)
        i, j = g.mode_index(1, 0)
        assert (g.kx[i, j], g.ky[i, j]) == (1.0, 0.0)

    def test_half_box_doubles_wavenumbers(self):
        g = build_grid(16, np.pi)
        i, j = g.mode_index(1, 0)
        assert g.kx[i, j] == pytest.approx(2.0)
        assert g.ky[i, j] == 0.0

    def test_max_component(self):
        g = build_grid(64, 100.0)
        assert np.abs(g.kx).max() == pytest.approx(2 * np.pi / 100 * 32, rel=1e-14)
        assert np.abs(g.kx).max() == pytest.approx(2.0106, abs=1e-4)

    def test_single_zero_mode(self):
        g = build_grid(32, 5.0)
        assert np.count_nonzero(g.k2 == 0) == 1
        assert g.k2[0, 0] == 0

    def test_mask_symmetric(self):
        g = build_grid(48, 3.0)
        mirrored = np.roll(np.flip(g.dealias_mask, axis=(0, 1)), 1, axis=(0, 1))
        assert np.array_equal(mirrored, g.dealias_mask)

    @pytest.mark.parametrize("n", [15, 8, 0, 17.5])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            build_grid(n, 1.0)

    @pytest.mark.parametrize("length", [0.0, -1.0])
    def test_rejects_bad_length(self, length):
        with pytest.raises(ValueError):
            build_grid(16, length)

    def test_arrays_read_only(self, grid16):
        with pytest.raises(ValueError):
            grid16.k2[0, 0] = 1.0


class TestSymbols:
    def _at(self, g, n1, n2, beta):
        return fractional_symbol(g, beta)[g.mode_index(n1, n2)]

    def test_examples(self, grid16):
        assert self._at(grid16, 3, 4, 1.0) == pytest.approx(25.0, rel=1e-14)
        assert self._at(grid16, 3, 4, 0.5) == pytest.approx(5.0, rel=1e-14)
        assert self._at(grid16, 0, 2, 0.75) == pytest.approx(2**1.5, rel=1e-14)
        assert self._at(grid16, 0, 0, 0.5) == 0.0

    @pytest.mark.parametrize("beta", [0.49, 1.01, -1.0])
    def test_beta_range(self, grid16, beta):
        with pytest.raises(ValueError):
            fractional_symbol(grid16, beta)

    def test_homogeneous_zero_mode(self, grid16):
        assert homogeneous_symbol(grid16, -1.0)[0, 0] == 0.0
        assert homogeneous_symbol(grid16, 2.0)[grid16.mode_index(1, 1)] == pytest.approx(2.0)

    def test_inhomogeneous(self, grid16):
        assert inhomogeneous_symbol(grid16, 2.0)[grid16.mode_index(1, 2)] == pytest.approx(6.0)

    def test_mean_free_guard(self, grid16):
        f = np.zeros(grid16.shape, complex)
        f[1, 0] = 1.0
        check_mean_free(f)
        f[0, 0] = 1e-3
        with pytest.raises(ValueError):
            check_mean_free(f)


class TestLeray:
    def test_gradient_removed(self, grid16):
        v = np.zeros((2,) + grid16.shape, complex)
        i, j = grid16.mode_index(2, -3)
        v[:, i, j] = grid16.kx[i, j], grid16.ky[i, j]
        assert np.abs(leray_project(v, grid16)[:, i, j]).max() < 1e-15

    def test_perpendicular_unchanged(self, grid16):
        v = np.zeros((2,) + grid16.shape, complex)
        i, j = grid16.mode_index(2, -3)
        v[:, i, j] = -grid16.ky[i, j], grid16.kx[i, j]
        np.testing.assert_allclose(leray_project(v, grid16), v, atol=1e-15)

    def test_zero_mode_passes(self, grid16):
        v = np.zeros((2,) + grid16.shape, complex)
        v[:, 0, 0] = 1.0, 2.0
        np.testing.assert_array_equal(leray_project(v, grid16)[:, 0, 0], [1.0, 2.0])

    def test_random_divergence_free(self, grid32):
        rng = np.random.default_rng(1)
        v = rng.standard_normal((2,) + grid32.shape) + 1j * rng.standard_normal((2,) + grid32.shape)
        w = leray_project(v, grid32)
        div = np.abs(grid32.kx * w[0] + grid32.ky * w[1]).max()
        assert div < 1e-12 * np.abs(v).max() * grid32.kmax

    def test_idempotent(self, grid32):
        rng = np.random.default_rng(2)
        v = rng.standard_normal((2,) + grid32.shape) + 1j * rng.standard_normal((2,) + grid32.shape)
        w = leray_project(v, grid32)
        np.testing.assert_allclose(leray_project(w, grid32), w, atol=1e-15)


class TestTransforms:
    def test_single_harmonic(self, grid16):
        f_hat = np.zeros(grid16.shape, complex)
        f_hat[grid16.mode_index(2, 1)] = 1.0
        f_hat[grid16.mode_index(-2, -1)] = 1.0
        x1, x2 = grid16.physical_coords()
        np.testing.assert_allclose(to_physical(f_hat, grid16), 2 * np.cos(2 * x1 + x2), atol=1e-13)

    def test_round_trip(self, grid32):
        f = np.random.default_rng(3).standard_normal((3,) + grid32.shape)
        back = to_physical(to_spectral(f, grid32), grid32)
        assert np.abs(back - f).max() <= 1e-13 * np.abs(f).max()

    def test_parseval(self):
        g = build_grid(32, 7.0)
        f = np.random.default_rng(4).standard_normal(g.shape)
        physical = g.dx**2 * np.sum(f**2)
        assert spectral_l2_sq(to_spectral(f, g), g) == pytest.approx(physical, rel=1e-12)

    def test_complex_inverse_keeps_imaginary(self, grid16):
        f_hat = np.zeros(grid16.shape, complex)
        f_hat[grid16.mode_index(1, 0)] = 1.0
        assert np.abs(to_physical_complex(f_hat, grid16).imag).max() > 0.5

    def test_size_mismatch(self, grid16):
        with pytest.raises(ValueError):
            to_physical(np.zeros((8, 8), complex), grid16)
        with pytest.raises(ValueError):
            to_spectral(np.zeros((16, 8)), grid16)

    @settings(max_examples=25, deadline=None)
    @given(n=st.sampled_from([16, 18, 24, 32]), length=st.floats(0.5, 100.0), seed=st.integers(0, 2**32 - 1))
    def test_round_trip_and_parseval_property(self, n, length, seed):
        g = build_grid(n, length)
        f = np.random.default_rng(seed).standard_normal(g.shape)
        f_hat = to_spectral(f, g)
        assert np.abs(to_physical(f_hat, g) - f).max() <= 1e-13 * max(1.0, np.abs(f).max())
        assert spectral_l2_sq(f_hat, g) == pytest.approx(g.dx**2 * np.sum(f**2), rel=1e-12)


class TestDealias:
    def test_ones_n16(self, grid16):
        out = dealias(np.ones(grid16.shape, complex), grid16)
        n = np.fft.fftfreq(16, 1 / 16)
        n1, n2 = np.meshgrid(n, n, indexing="ij")
        keep = (np.abs(n1) <= 5) & (np.abs(n2) <= 5)
        assert np.all(out[~keep] == 0)
        assert np.all(out[keep] == 1)

    def test_idempotent(self, grid16):
        f = dealias(np.random.default_rng(5).standard_normal(grid16.shape) + 0j, grid16)
        np.testing.assert_array_equal(dealias(f, grid16), f)

    def test_product_matches_convolution(self, grid16):
        """Dealiased pseudo-spectral product against the exact convolution sum."""
        rng = np.random.default_rng(6)
        a_hat = dealias(to_spectral(rng.standard_normal(grid16.shape), grid16), grid16)
        b_hat = dealias(to_spectral(rng.standard_normal(grid16.shape), grid16), grid16)
        prod = dealias(to_spectral(to_physical(a_hat, grid16) * to_physical(b_hat, grid16), grid16), grid16)

        band = range(-5, 6)
        exact = np.zeros(grid16.shape, complex)
        for p1, p2, q1, q2 in itertools.product(band, band, band, band):
            r1, r2 = p1 + q1, p2 + q2
            if abs(r1) <= 5 and abs(r2) <= 5:
                exact[grid16.mode_index(r1, r2)] += a_hat[grid16.mode_index(p1, p2)] * b_hat[grid16.mode_index(q1, q2)]
        assert np.abs(prod - exact).max() <= 1e-12 * np.abs(exact).max()


class TestLittlewoodPaley:
    def test_chi_plateaus(self):
        r = np.array([0.0, 0.5, 0.75, 4 / 3, 2.0, 10.0])
        np.testing.assert_array_equal(lp_chi(r), [1, 1, 1, 0, 0, 0])
        mid = lp_chi(np.linspace(0.76, 1.33, 50))
        assert np.all((mid >= 0) & (mid <= 1)) and np.all(np.diff(mid) <= 0)
        assert 0 < lp_chi(np.array([1.0]))[0] < 1

    def test_phi_support_and_range(self):
        r = np.linspace(0, 4, 4001)
        phi = lp_phi(r)
        assert np.all((phi >= 0) & (phi <= 1))
        assert np.all(phi[(r < SHELL_INNER) | (r > SHELL_OUTER)] == 0)

    @pytest.mark.parametrize("j0", [-2, 0, 3])
    def test_dyadic_point(self, j0):
        r = 2.0**j0
        weights = {j: float(lp_phi(np.array([r * 2.0**-j]))[0]) for j in range(j0 - 4, j0 + 5)}
        assert all(w == 0 for j, w in weights.items() if abs(j - j0) > 1)
        assert sum(weights.values()) == pytest.approx(1.0, abs=1e-14)

    def test_unit_radius(self):
        w0 = lp_phi(np.array([1.0]))[0]
        assert 0 <= w0 <= 1
        total = sum(lp_phi(np.array([2.0**-j]))[0] for j in range(-5, 6))
        assert total == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("n,length", [(32, 2 * np.pi), (64, 64 * np.pi), (48, 3.0)])
    def test_grid_partition_of_unity(self, n, length):
        g = build_grid(n, length)
        sw = lp_shell_weights(g)
        nz = g.kmag > 0
        assert np.abs(sw.total()[nz] - 1).max() <= 1e-12
        assert sw.covered[nz].all() and not sw.covered[0, 0]
        sq = sum(w**2 for _, w in sw.levels)[nz]
        assert sq.min() >= 0.5 - 1e-12 and sq.max() <= 1 + 1e-12

    def test_restricted_range_flags_uncovered(self):
        g = build_grid(32, 2 * np.pi)
        full = lp_shell_weights(g)
        sw = lp_shell_weights(g, j_min=full.j_min + 2)
        below = (g.kmag > 0) & (g.kmag < SHELL_INNER * 2.0 ** (full.j_min + 2))
        assert below.any()
        assert np.all(sw.uncovered[below])
        assert sw.j_min == full.j_min + 2
