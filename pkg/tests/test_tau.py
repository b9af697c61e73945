import math

import numpy as np
import pytest

from enmeas.linalg import eig_hermitian
from enmeas.spectra import decompose_chains
from enmeas.tau import (
    BatteryState,
    EnergyDensity,
    epsilon_from_tau,
    optimal_finite_state,
    tau_coherent,
    tau_continuous,
    tau_finite,
    tau_near_resonant,
    tau_of_state,
)


def ladder(d):
    return decompose_chains(np.arange(d, dtype=float), 1.0)


def coupling(d):
    a = np.zeros((d, d))
    a += np.diag(0.5 * np.ones(d - 1), 1) + np.diag(0.5 * np.ones(d - 1), -1)
    return a


class TestTauOfState:
    def test_uniform_ladder(self):
        for d in (2, 3, 6):
            st = BatteryState.pure(np.ones(d) / math.sqrt(d))
            assert tau_of_state(st, ladder(d)).tau == pytest.approx((d - 1) / d, abs=1e-12)

    def test_energy_eigenstate_has_no_coherence(self):
        v = np.zeros(4)
        v[2] = 1.0
        assert tau_of_state(BatteryState.pure(v), ladder(4)).tau == 0.0

    def test_optimal_state_reaches_tau_finite(self):
        for d in (2, 3, 8):
            st = optimal_finite_state(d)
            got = tau_of_state(st, ladder(d)).tau
            assert got == pytest.approx(math.cos(math.pi / (d + 1)), abs=1e-12)

    def test_phase_rotation_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            d = int(rng.integers(2, 7))
            amps = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            amps /= np.linalg.norm(amps)
            phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=d))
            t1 = tau_of_state(BatteryState.pure(amps), ladder(d)).tau
            t2 = tau_of_state(BatteryState.pure(amps * phases), ladder(d)).tau
            assert t1 == pytest.approx(t2, abs=1e-12)

    def test_bounded_by_tau_finite(self):
        rng = np.random.default_rng(1)
        for d in range(2, 9):
            bound = tau_finite(d)
            chains = ladder(d)
            for _ in range(1000):
                amps = rng.standard_normal(d) + 1j * rng.standard_normal(d)
                amps /= np.linalg.norm(amps)
                assert tau_of_state(BatteryState.pure(amps), chains).tau <= bound + 1e-12

    def test_mixed_state_direct_evaluation(self):
        rho = np.array([[0.5, 0.2], [0.2, 0.5]], dtype=complex)
        assert tau_of_state(BatteryState.mixed(rho), ladder(2)).tau == pytest.approx(0.2)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            tau_of_state(BatteryState.pure([1.0, 0.0]), ladder(3))


class TestOptimalFiniteState:
    def test_d1(self):
        st = optimal_finite_state(1)
        assert st.amplitudes.shape == (1,)
        assert tau_of_state(st, ladder(1)).tau == 0.0

    def test_d2_amplitudes(self):
        st = optimal_finite_state(2)
        assert np.allclose(np.abs(st.amplitudes), [1 / math.sqrt(2)] * 2, atol=1e-12)
        assert tau_of_state(st, ladder(2)).tau == pytest.approx(0.5, abs=1e-12)

    def test_d10_populations_and_energy(self):
        st = optimal_finite_state(10)
        k = np.arange(10)
        expect = 2.0 / 11 * np.sin((k + 1) * np.pi / 11) ** 2
        assert np.allclose(st.populations(), expect, atol=1e-12)
        assert st.mean_energy() == pytest.approx(4.5, abs=1e-10)


class TestTauFinite:
    def test_d1_is_zero(self):
        assert tau_finite(1) == pytest.approx(0.0, abs=1e-15)

    def test_d3(self):
        assert tau_finite(3) == pytest.approx(math.sqrt(2) / 2, abs=1e-15)

    def test_matches_eigensolver_at_200(self):
        top = eig_hermitian(coupling(200)).eigenvalues[-1]
        assert abs(tau_finite(200) - top) < 1e-10

    def test_strictly_increasing(self):
        vals = [tau_finite(d) for d in range(1, 60)]
        assert all(b > a for a, b in zip(vals, vals[1:]))


class TestTauCoherent:
    def test_vacuum(self):
        assert tau_coherent(0.0) == 0.0

    def test_truncation_oracle(self):
        a2 = 1.0
        k = np.arange(60)
        log_p = -a2 + k * np.log(a2) - np.array(
            [math.lgamma(kk + 1) for kk in k]
        )
        amps = np.exp(0.5 * log_p)
        amps /= np.linalg.norm(amps)
        st = BatteryState.pure(amps)
        oracle = tau_of_state(st, ladder(60)).tau
        assert tau_coherent(a2) == pytest.approx(oracle, abs=1e-10)

    def test_large_alpha_window(self):
        got = (1.0 - tau_coherent(100.0)) * 800.0
        assert 0.9 <= got <= 1.1

    def test_increasing_in_alpha(self):
        vals = [tau_coherent(a) for a in np.linspace(0.1, 30, 40)]
        assert all(b > a for a, b in zip(vals, vals[1:]))


class TestTauContinuous:
    def test_gaussian_closed_form(self):
        for var, delta in ((1.0, 1.0), (0.5, 2.0), (2.0, 0.7)):
            f = EnergyDensity.gaussian(0.0, var)
            expect = math.exp(-(delta ** 2) / (8 * var))
            assert tau_continuous(f, delta) == pytest.approx(expect, abs=1e-6)

    def test_delta_zero_is_normalization(self):
        f = EnergyDensity.gaussian(3.0, 0.8)
        assert tau_continuous(f, 0.0) == pytest.approx(1.0, abs=1e-7)

    def test_disjoint_supports(self):
        f = EnergyDensity(f=lambda e: np.ones_like(np.asarray(e, dtype=float)),
                          support=(0.0, 1.0))
        assert tau_continuous(f, 5.0) == 0.0

    def test_unnormalized_rejected(self):
        f = EnergyDensity(f=lambda e: 2.0 * np.ones_like(np.asarray(e, dtype=float)),
                          support=(0.0, 1.0))
        with pytest.raises(ValueError, match="integrates"):
            tau_continuous(f, 0.5)

    def test_narrow_gaussian_limit_matches_discrete(self):
        # point masses at 0 and 1 with weights 1/2 each: tau -> 1/2
        var = 1e-4
        def f(e):
            e = np.asarray(e, dtype=float)
            n = 1.0 / math.sqrt(2 * math.pi * var)
            return 0.5 * n * (np.exp(-e ** 2 / (2 * var))
                              + np.exp(-(e - 1.0) ** 2 / (2 * var)))
        dens = EnergyDensity(f=f, support=(-0.05, 1.05))
        st = BatteryState.pure(np.array([1.0, 1.0]) / math.sqrt(2))
        discrete = tau_of_state(st, ladder(2)).tau
        assert tau_continuous(dens, 1.0) == pytest.approx(discrete, abs=1e-4)


class TestTauNearResonant:
    def test_exact_resonance_limit(self):
        c0 = 0.6
        c1 = 0.8
        clock = EnergyDensity.gaussian(10.0, 1e-4)
        got = tau_near_resonant(c0, c1, 0.0, clock, 1.0)
        assert got == pytest.approx(abs(c0 * c1), abs=1e-7)

    def test_concentrated_clock_near_c0c1(self):
        c = 1 / math.sqrt(2)
        clock = EnergyDensity.gaussian(50.0, 4e-4)  # width 0.02, eps << width << gap
        got = tau_near_resonant(c, c, 2e-4, clock, 1.0)
        assert got == pytest.approx(0.5, abs=1e-4)

    def test_maxwell_density_lower_bound(self):
        # sigma(E) ~ e^{-m E / s} sqrt(E): bound tau >= |c0 c1| e^{-3 m eps/(2 s)}
        m_over_s = 1.0
        def f(e):
            e = np.asarray(e, dtype=float)
            return np.where(e > 0, np.exp(-m_over_s * e) * np.sqrt(np.maximum(e, 0)), 0.0)
        grid = np.linspace(0.0, 60.0, 20001)
        dens = EnergyDensity.from_grid(grid, f(grid))
        c0 = c1 = 1 / math.sqrt(2)
        eps = 1e-3
        delta = 100.0  # gap >> clock spread so the cross terms vanish
        got = tau_near_resonant(c0, c1, eps, dens, delta)
        bound = abs(c0 * c1) * math.exp(-1.5 * m_over_s * eps)
        assert got >= bound - 1e-6

    def test_unnormalized_amplitudes_rejected(self):
        clock = EnergyDensity.gaussian(10.0, 1e-4)
        with pytest.raises(ValueError):
            tau_near_resonant(1.0, 1.0, 0.0, clock, 1.0)


def test_epsilon_from_tau():
    assert epsilon_from_tau(1.0) == 0.0
    assert epsilon_from_tau(math.cos(math.pi / 3)) == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(ValueError):
        epsilon_from_tau(1.5)


def test_battery_state_validation():
    with pytest.raises(ValueError):
        BatteryState.pure([1.0, 1.0])  # not normalized
    with pytest.raises(ValueError):
        BatteryState.mixed(np.diag([0.7, 0.7]))  # trace 1.4
    with pytest.raises(ValueError):
        BatteryState.mixed(np.array([[1.1, 0.0], [0.0, -0.1]]))  # not PSD


def test_battery_state_json_roundtrip():
    st = optimal_finite_state(4)
    back = BatteryState.from_json(st.to_json())
    assert np.allclose(back.amplitudes, st.amplitudes)
    assert np.allclose(back.levels, st.levels)
    rho = np.array([[0.5, 0.1j], [-0.1j, 0.5]])
    st2 = BatteryState.mixed(rho, levels=[0.0, 1.0])
    back2 = BatteryState.from_json(st2.to_json())
    assert np.allclose(back2.rho, rho)
