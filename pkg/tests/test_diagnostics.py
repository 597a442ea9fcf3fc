import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state, smooth_state
from oldroyd_decay.diagnostics import (
    KINDS, FunctionalSpec, besov_neg1, besov_neg1_state, cross_term, diagnostics_record, functional,
    inequality_monitor, low_freq_mass, sobolev_norm, splitting_radius_sq,
)
from oldroyd_decay.dynamics import gradient
from oldroyd_decay.linear import grid_linear_evolve
from oldroyd_decay.spectral import build_grid, lp_phi, lp_shell_weights, to_physical
from oldroyd_decay.state import TAU_WEIGHTS, Params, SpectralState, spectral_mass, zero_state


def single_mode(grid, n=(1, 2), u_amp=0.6, tau=(0.3, -0.2, 0.5)):
    """Real single-mode state: u = u_amp xi_perp cos(xi.x), tau = T sin(xi.x)."""
    i, j = grid.mode_index(*n)
    mi, mj = grid.mode_index(-n[0], -n[1])
    _, perp = grid.unit_vectors()
    u = np.zeros((2,) + grid.shape, complex)
    u[:, i, j] = u_amp * perp[:, i, j] / 2
    u[:, mi, mj] = u_amp * perp[:, i, j] / 2
    t = np.zeros((3,) + grid.shape, complex)
    t[:, i, j] = np.array(tau) / 2j
    t[:, mi, mj] = -np.array(tau) / 2j
    return SpectralState(0.0, u, t)


def physical_l2_sq(fields, grid, weights=None):
    f = to_physical(fields, grid)
    w = np.ones(len(f)) if weights is None else np.asarray(weights)
    return float(grid.dx**2 * np.sum(w[:, None, None] * f**2))


class TestSobolev:
    def test_single_mode_example(self):
        g = build_grid(16, 2 * np.pi)
        f = np.zeros(g.shape, complex)
        f[g.mode_index(2, 0)] = 1.0
        assert sobolev_norm(f, 1.0, True, g) == pytest.approx(2 * 2 * np.pi, rel=1e-14)

    def test_l2_parseval(self, grid32):
        s = random_state(grid32, seed=1)
        phys = physical_l2_sq(s.tau_hat, grid32, TAU_WEIGHTS)
        assert sobolev_norm(s.tau_hat, 0.0, False, grid32, TAU_WEIGHTS) ** 2 == pytest.approx(phys, rel=1e-12)

    def test_zero(self, grid16):
        assert sobolev_norm(np.zeros(grid16.shape), 2.0, False, grid16) == 0.0

    def test_negative_homogeneous_needs_mean_free(self, grid16):
        f = np.zeros(grid16.shape, complex)
        f[0, 0] = 1.0
        with pytest.raises(ValueError):
            sobolev_norm(f, -1.0, True, grid16)
        assert sobolev_norm(f, -1.0, False, grid16) > 0


class TestCrossTerm:
    def test_vanishes(self, grid16):
        s = random_state(grid16)
        assert cross_term(SpectralState(0, 0 * s.u_hat, s.tau_hat), 1.0, grid16) == 0.0
        assert cross_term(SpectralState(0, s.u_hat, 0 * s.tau_hat), 1.0, grid16) == 0.0

    @pytest.mark.parametrize("sigma", [0.0, 1.0, 2.5])
    def test_cauchy_schwarz(self, grid32, sigma):
        s = random_state(grid32, seed=2)
        c = cross_term(s, sigma, grid32)
        grad = gradient(s.u_hat, grid32).reshape((4,) + grid32.shape)
        bound = (sobolev_norm(s.tau_hat, sigma, False, grid32, TAU_WEIGHTS)
                 * sobolev_norm(grad, sigma, False, grid32))
        assert abs(c) <= bound * (1 + 1e-10)

    def test_single_mode_physical_pairing(self):
        g = build_grid(32, 5.0)
        s = single_mode(g)
        grad = to_physical(gradient(s.u_hat, g), g)       # grad[j, k] = d_k u_j
        tau = to_physical(s.tau_hat, g)
        tm = np.array([[tau[0], tau[1]], [tau[1], tau[2]]])
        pairing = -g.dx**2 * np.sum(grad * tm)
        k2 = g.k2[g.mode_index(1, 2)]
        assert cross_term(s, 0.0, g) == pytest.approx(pairing, rel=1e-13, abs=1e-15)
        assert cross_term(s, 1.5, g) == pytest.approx((1 + k2) ** 1.5 * pairing, rel=1e-13)
        assert abs(pairing) > 1e-3


class TestFunctionals:
    def test_zero_state(self, grid16):
        for kind in ("E0", "D0", "E1", "D1", "E_tilde_s", "D_tilde_s", "E_bar_beta", "D_bar_beta"):
            assert functional(zero_state(grid16), FunctionalSpec(kind), grid16) == 0.0

    def test_tau_zero_gives_velocity_norm(self, grid32):
        s = random_state(grid32, seed=3)
        s = SpectralState(0.0, s.u_hat, 0 * s.tau_hat)
        assert functional(s, FunctionalSpec("E0", s=3.0), grid32) == pytest.approx(
            sobolev_norm(s.u_hat, 3.0, False, grid32) ** 2, rel=1e-13)

    @pytest.mark.parametrize("beta", [1.0, 0.5])
    def test_single_mode_hand_assembly(self, beta):
        g = build_grid(32, 5.0)
        s = single_mode(g)
        k2 = g.k2[g.mode_index(1, 2)]
        kc, sob = 0.125, 3.0
        u2 = physical_l2_sq(s.u_hat, g)
        t2 = physical_l2_sq(s.tau_hat, g, TAU_WEIGHTS)
        grad = to_physical(gradient(s.u_hat, g), g)
        tau = to_physical(s.tau_hat, g)
        tm = np.array([[tau[0], tau[1]], [tau[1], tau[2]]])
        pairing = -g.dx**2 * np.sum(grad * tm)
        w = lambda sig: (1 + k2) ** sig  # noqa: E731
        e0 = w(sob) * (u2 + t2) + 2 * kc * w(sob - beta) * pairing
        d0 = 0.5 * kc * w(sob - beta) * k2 * u2 + k2**beta * w(sob) * t2
        e1 = k2 * w(sob - 1) * (u2 + t2) + 2 * kc * k2 * w(sob - 1 - beta) * pairing
        d1 = 0.5 * kc * k2 * k2 * w(sob - 1 - beta) * u2 + k2**beta * k2 * w(sob - 1) * t2
        for kind, expected in (("E0", e0), ("D0", d0), ("E1", e1), ("D1", d1)):
            got = functional(s, FunctionalSpec(kind, s=sob, beta=beta, cross_k=kc), g)
            assert got == pytest.approx(expected, rel=1e-12), kind

    def test_time_weighted_kinds(self):
        g = build_grid(32, 5.0)
        s0 = single_mode(g)
        s = SpectralState(3.0, s0.u_hat, s0.tau_hat)
        k2 = g.k2[g.mode_index(1, 2)]
        u2 = physical_l2_sq(s.u_hat, g)
        t2 = physical_l2_sq(s.tau_hat, g, TAU_WEIGHTS)
        pairing = cross_term(s, 0.0, g)
        kc, sob, beta = 0.125, 3.0, 0.75
        a = 2 - 1 / beta
        expected = {
            "E_tilde_s": kc * 4.0 * k2**sob * (u2 + t2) + k2 ** (sob - 1) * pairing,
            "D_tilde_s": kc * 4.0 * k2 ** (sob + 1) * t2 + 0.25 * k2**sob * u2,
            "E_bar_beta": 4.0**a * k2**sob * (u2 + t2) + kc * k2 ** (sob - beta) * pairing,
            "D_bar_beta": 4.0**a * k2 ** (sob + beta) * t2 + 0.25 * kc * k2 ** (sob - beta + 1) * u2,
        }
        for kind, value in expected.items():
            got = functional(s, FunctionalSpec(kind, s=sob, beta=beta, cross_k=kc), g)
            assert got == pytest.approx(value, rel=1e-12), kind

    @settings(max_examples=15, deadline=None)
    @given(lam=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
    def test_quadratic_homogeneity(self, lam, seed):
        g = build_grid(16, 3.0)
        s = random_state(g, seed=seed, time=2.0)
        for kind in ("E0", "D0", "E1", "D1", "E_tilde_s", "D_tilde_s", "E_bar_beta", "D_bar_beta"):
            spec = FunctionalSpec(kind, beta=0.75)
            assert functional(s.scaled(lam), spec, g) == pytest.approx(lam**2 * functional(s, spec, g), rel=1e-12)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            FunctionalSpec("E7")
        with pytest.raises(ValueError):
            FunctionalSpec("E0", s=2.0)
        with pytest.raises(ValueError):
            FunctionalSpec("E0", beta=0.3)
        assert "besov_neg1" in KINDS

    def test_small_data_energy_positive(self, grid32):
        s = smooth_state(grid32, seed=4, amplitude=1e-2)
        assert functional(s, FunctionalSpec("E0"), grid32) > 0


class TestBesov:
    def test_single_dyadic_mode(self):
        g = build_grid(32, 2 * np.pi)
        f = np.zeros(g.shape, complex)
        f[g.mode_index(4, 0)] = 1.0
        f[g.mode_index(-4, 0)] = 1.0
        res = besov_neg1(f, g, detail=True)
        per = {j: 2.0**-j * g.box_length * np.sqrt(2) * lp_phi(np.array([4 * 2.0**-j]))[0]
               for j in res.per_level}
        for j, v in res.per_level.items():
            assert v == pytest.approx(per[j], rel=1e-13, abs=1e-15)
        assert res.value == pytest.approx(max(per.values()), rel=1e-13)
        assert res.level in (1, 2, 3)
        assert all(v == 0 for j, v in res.per_level.items() if abs(j - 2) > 1)

    def test_zero_and_scaling(self, grid32):
        assert besov_neg1(np.zeros(grid32.shape), grid32) == 0.0
        s = random_state(grid32, seed=5)
        assert besov_neg1(2 * s.tau_hat, grid32, component_weights=TAU_WEIGHTS) == pytest.approx(
            2 * besov_neg1(s.tau_hat, grid32, component_weights=TAU_WEIGHTS), rel=1e-14)

    def test_state_uses_frobenius_mass(self, grid32):
        s = random_state(grid32, seed=6)
        joint = np.concatenate([s.u_hat, np.sqrt(TAU_WEIGHTS)[:, None, None] * s.tau_hat])
        assert besov_neg1_state(s, grid32) == pytest.approx(besov_neg1(joint, grid32), rel=1e-13)

    def test_bounded_by_l2(self, grid32):
        s = random_state(grid32, seed=7)
        res = besov_neg1_state(s, grid32, detail=True)
        l2 = np.sqrt(grid32.box_length**2 * np.sum(spectral_mass(s)))
        for j, v in res.per_level.items():
            assert v <= l2 * 2.0**-j * (1 + 1e-12)
        assert res.per_level[res.level] == res.value and np.isfinite(res.value)

    def test_uncovered_reported(self):
        g = build_grid(32, 2 * np.pi)
        full = lp_shell_weights(g)
        shells = lp_shell_weights(g, j_min=full.j_min + 1)
        res = besov_neg1(random_state(g).u_hat, g, shells=shells, detail=True)
        assert res.uncovered_modes > 0
        assert besov_neg1(random_state(g).u_hat, g, detail=True).uncovered_modes == 0


class TestLowFrequency:
    def test_only_zero_mode_at_large_time(self, grid16):
        s = random_state(grid16)
        s.u_hat[:, 0, 0] = 0.3, -0.1
        s.tau_hat[:, 0, 0] = 0.2, 0.1, 0.0
        p = Params()
        got = low_freq_mass(s, 1e9, p, "S", grid16)
        expected = grid16.mode_measure * (0.09 + 0.01 + 0.04 + 2 * 0.01)
        assert got == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("kind", ["S", "S0", "Sbeta"])
    def test_full_radius_matches_parseval(self, grid16, kind):
        s = random_state(grid16, seed=8)
        p = Params(c2_split=1e6, beta=0.75)
        total = grid16.box_length**2 * np.sum(spectral_mass(s))
        got = low_freq_mass(s, 0.0, p, kind, grid16)
        assert got == pytest.approx(total / grid16.box_length**2 * grid16.mode_measure, rel=1e-12)

    def test_monotone_in_time(self, grid32):
        s = random_state(grid32, seed=9)
        p = Params(beta=0.5)
        for kind in ("S", "S0", "Sbeta"):
            vals = [low_freq_mass(s, t, p, kind, grid32) for t in np.geomspace(1e-2, 1e4, 40)]
            assert all(b <= a for a, b in zip(vals, vals[1:]))
            assert vals[-1] <= grid32.mode_measure * np.sum(spectral_mass(s))

    def test_radii(self):
        assert splitting_radius_sq(3.0, 4.0, 1.0, "S") == pytest.approx(1.0)
        assert splitting_radius_sq(0.0, 1.0, 1.0, "S0") == pytest.approx(6.0 / np.e)
        assert splitting_radius_sq(3.0, 4.0, 0.5, "Sbeta") == pytest.approx(16.0)
        with pytest.raises(ValueError):
            splitting_radius_sq(1.0, 1.0, 1.0, "T")


class TestRecord:
    def test_consistent_fields(self):
        g = build_grid(32, 20.0)
        p = Params(beta=0.75)
        s = smooth_state(g, seed=10, amplitude=1e-2)
        r = diagnostics_record(s, p, g, (0.0, 1.0, 2.5))
        assert r.violations() == []
        assert r.l2 == pytest.approx(r.lambda_s1[0.0], rel=1e-14)
        assert r.hs == pytest.approx(np.sqrt(functional(s, FunctionalSpec("sobolev", s1=3.0, homogeneous=False), g)
                                             ** 2), rel=1e-14)
        assert r.e0 == pytest.approx(functional(s, FunctionalSpec.from_params("E0", p), g), rel=1e-14)
        assert r.d_bar == pytest.approx(functional(s, FunctionalSpec.from_params("D_bar_beta", p), g), rel=1e-14)
        assert r.mean_u == 0 and r.mean_tau == 0
        assert r.lowfreq_S <= g.mode_measure * np.sum(spectral_mass(s))


class TestInequalityMonitor:
    def test_linear_run_satisfies_energy_inequality(self):
        g = build_grid(32, 16 * np.pi)
        p = Params(beta=0.75)
        s = smooth_state(g, seed=11, amplitude=1e-2)
        series = []
        for t in np.arange(0, 20.0001, 0.05):
            st_ = grid_linear_evolve(s, t, p, g)
            series.append(diagnostics_record(st_, p, g))
        for lhs, rhs in (("e0", "d0"), ("e1", "d1")):
            rep = inequality_monitor(series, lhs, rhs, 1e-6)
            assert rep.passed, str(rep)
            assert rep.n_checked == len(series) - 2

    def test_zero_series(self):
        series = [{"t": t, "e0": 0.0, "d0": 0.0} for t in range(5)]
        rep = inequality_monitor(series, "e0", "d0", 1e-6)
        assert rep.passed and rep.fraction == 0.0

    def test_adversarial(self):
        ts = np.linspace(0, 10, 21)
        e = np.exp(-ts)
        e[12] = e[11] * 1.5      # jump up after t[11]
        series = [{"t": t, "e0": v, "d0": 0.5 * v} for t, v in zip(ts, e)]
        rep = inequality_monitor(series, "e0", "d0", 1e-6)
        assert not rep.passed
        assert rep.worst_time == pytest.approx(ts[11])
        assert rep.n_violations >= 1 and 0 < rep.fraction < 1
        assert "violations" in str(rep)

    def test_short_series(self):
        assert inequality_monitor([{"t": 0, "a": 1, "b": 1}], "a", "b", 0.0).n_checked == 0
