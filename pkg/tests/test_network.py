import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qlock import scenarios as S
from qlock.elements import DetectionPolicy, MechanicalMode
from qlock.errors import ConfigurationError, SingularDynamicsError, UnitsError
from qlock.network import (
    SENSOR,
    FrequencyGrid,
    NoiseBudget,
    assemble,
    budget,
    open_loop,
    solve,
)
from qlock.specalg import Units


def sigma(sc, omega):
    return solve(assemble(sc, omega)).spectrum()


class TestAssembly:
    def test_free_system_shape(self):
        sys = assemble(S.free(), 1.0)
        M, R = sys.matrices()
        assert M.shape == (2, 2)
        assert set(sys.sources) >= {"a0", "a90", "X_sig"}

    def test_estimator_has_unit_signal(self):
        for sc in (S.free(), S.locking(), S.backaction_cancel(), S.cavity_locking()):
            sol = solve(assemble(sc, 0.7))
            assert sol.estimator.coeff("X_sig") == pytest.approx(1.0, abs=1e-12)

    def test_unknown_scenario_id(self):
        with pytest.raises(ConfigurationError):
            assemble(S.free().replace(id="bogus"), 1.0)

    def test_sql_envelope_not_a_network(self):
        with pytest.raises(ConfigurationError, match="closed-form"):
            assemble(S.sql_reference(), 1.0)

    def test_optimized_needs_optimizer(self):
        with pytest.raises(ConfigurationError, match="optimizer"):
            assemble(S.locking(gain="optimized"), 1.0)

    def test_singular_dynamics_names_frequency(self):
        sc = S.free().replace(m=MechanicalMode("m", 1.0, impedance=lambda w: 0.0))
        with pytest.raises(SingularDynamicsError) as info:
            solve(assemble(sc, 0.5))
        assert info.value.omega == 0.5

    def test_free_matches_closed_form_per_source(self):
        xi = S.XI_A_NORMALIZED
        parts = solve(assemble(S.free(), 0.3)).spectrum(per_source=True)
        assert parts["a90"] == pytest.approx(1 / (4 * xi**2))
        assert parts["a0"] == pytest.approx(xi**2 / 0.3**4)

    def test_force_noise_adds(self):
        sc = S.free(force_noise=0.2)
        assert sigma(sc, 0.5) == pytest.approx(float(S.free_sigma(S.XI_A_NORMALIZED, 1.0, 0.5, 0.2)))


class TestLocking:
    def test_infinite_gain_pins_sensor(self):
        sol = solve(assemble(S.locking(), 0.4))
        assert all(abs(c) < 1e-12 for c in sol.coefficients(SENSOR).values())

    def test_large_gain_tends_to_infinite(self):
        w = 0.4
        inf = sigma(S.locking(), w)
        big = sigma(S.locking(gain=1e7), w)
        assert big == pytest.approx(inf, rel=1e-5)

    def test_zero_gain_is_free_plus_sensor_back_action(self):
        # the sensor beam still pushes on m when the loop is open
        xa, xb, w = S.XI_A_NORMALIZED, S.XI_A_NORMALIZED / 5, 0.5
        expected = 1 / (4 * xa**2) + (xa**2 + xb**2) / w**4
        assert sigma(S.locking(gain=0.0), w) == pytest.approx(expected)

    def test_open_loop_reproduces_closed(self):
        sc = S.locking(gain=0.3 - 1.2j)
        w = 0.8
        ol = open_loop(sc, w)
        assert ol.sigma(0.3 - 1.2j) == pytest.approx(sigma(sc, w), rel=1e-12)
        assert ol.sigma(complex(np.inf)) == pytest.approx(sigma(S.locking(), w), rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 20), st.floats(0.05, 5))
    def test_closed_form_oracle(self, w, ratio):
        xa = S.XI_A_NORMALIZED
        xb = xa * ratio
        got = sigma(S.locking(xb), w)
        assert got == pytest.approx(float(S.locking_sigma_inf(xa, xb, 1.0, w)), rel=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 20), st.floats(0.1, 5))
    def test_backaction_cancel_flat(self, w, ratio):
        xa = S.XI_A_NORMALIZED
        got = sigma(S.backaction_cancel(xa * ratio), w)
        assert got == pytest.approx(S.backaction_cancel_sigma(xa, xa * ratio), rel=1e-9)

    def test_sensor_force_noise_shows_up(self):
        base = sigma(S.locking(), 0.5)
        noisy = sigma(S.locking(force_noise_r=0.1), 0.5)
        assert noisy == pytest.approx(base + 0.1 / 0.5**4)


class TestGridAndBudget:
    def test_default_grid(self):
        g = FrequencyGrid.default()
        assert len(g) == 400 and g.values[0] == pytest.approx(0.1) and g.values[-1] == pytest.approx(10)

    @pytest.mark.parametrize("lo, hi, n", [(1.0, 1.0, 5), (2.0, 1.0, 5), (0.1, 1.0, 1), (-1.0, 1.0, 5)])
    def test_bad_grid(self, lo, hi, n):
        with pytest.raises(ConfigurationError):
            FrequencyGrid.make(lo, hi, n)

    def test_grid_mode_mismatch(self):
        with pytest.raises(UnitsError):
            budget(S.free(units="si"), FrequencyGrid.make(0.1, 1, 3))

    def test_budget_decomposition(self, grid):
        b = budget(S.locking(), grid)
        b.check()
        assert set(b.per_source) >= {"a0", "a90", "b0", "b90"}
        assert b.gain is None

    def test_normalized_toggle(self):
        xi, M = 3.1e3, 2.0
        sc_si = S.free(xi, M, units="si")
        sql = sc_si.sql_a
        w = np.array([0.2, 1.0, 7.0])
        b_si = budget(sc_si, FrequencyGrid(w * sql, Units.SI))
        b_n = budget(S.free(), FrequencyGrid(w, Units.NORMALIZED))
        conv = b_si.normalized()
        assert np.allclose(conv.omega, w, rtol=1e-10)
        assert np.allclose(conv.total, b_n.total, rtol=1e-10, atol=0)
        assert np.allclose(b_si.total * 2 * xi**2, b_n.total, rtol=1e-10, atol=0)

    def test_check_catches_bad_decomposition(self):
        nb = NoiseBudget("x", "free", np.array([1.0]), np.array([2.0]), {"a": np.array([1.0])}, Units.NORMALIZED)
        with pytest.raises(AssertionError):
            nb.check()

    def test_optimized_budget_records_gain(self):
        b = budget(S.locking(gain="optimized"), FrequencyGrid.make(0.5, 2, 5))
        assert b.gain is not None and b.gain.shape == (5,)
        b.check()


class TestSqueezing:
    @pytest.mark.parametrize("w", [0.2, 1.0, 5.0])
    def test_tracking_squeeze(self, w):
        r = 0.7
        got = sigma(S.squeezed_input(r), w)
        assert got == pytest.approx(float(S.squeezed_input_sigma(S.XI_A_NORMALIZED, 1.0, w, r)), rel=1e-9)

    def test_zero_squeezing_is_free(self):
        assert sigma(S.squeezed_input(0.0), 0.4) == pytest.approx(sigma(S.free(), 0.4))

    @pytest.mark.parametrize("phi, sign", [(0.0, 1), (math.pi / 2, -1)])
    def test_fixed_angle(self, phi, sign):
        # phi = 0 squeezes the amplitude quadrature, phi = pi/2 the phase
        r, xi, w = 0.5, S.XI_A_NORMALIZED, 10.0
        got = sigma(S.squeezed_input(r, squeeze_angle=phi), w)
        expected = math.exp(2 * sign * r) / (4 * xi**2) + math.exp(-2 * sign * r) * xi**2 / w**4
        assert got == pytest.approx(expected)


def test_variational_flat():
    for w in (0.1, 1.0, 3.3):
        assert sigma(S.variational_readout(), w) == pytest.approx(1.0 / (4 * S.XI_A_NORMALIZED**2))


def test_fixed_angle_readout():
    sc = S.free(readout=DetectionPolicy.parse("fixed=1.2"))
    xi, w = S.XI_A_NORMALIZED, 0.8
    cot = 1 / math.tan(1.2)
    expected = 1 / (4 * xi**2) + (xi / w**2 - cot / (2 * xi)) ** 2
    assert sigma(sc, w) == pytest.approx(expected)
