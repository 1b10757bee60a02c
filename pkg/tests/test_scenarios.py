import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qlock import scenarios as S
from qlock.elements import AngleRule, ControlKind, GainMode
from qlock.errors import ConfigurationError
from qlock.network import FrequencyGrid, assemble, solve

XA = S.XI_A_NORMALIZED


def sigma(sc, omega):
    return solve(assemble(sc, omega)).spectrum()


class TestBuilders:
    def test_defaults(self):
        assert S.locking().b.xi == pytest.approx(XA / 5)
        assert S.backaction_cancel().b.xi == pytest.approx(XA)
        assert S.backaction_cancel().readout_b.rule is AngleRule.EVADING
        cav = S.cavity_locking()
        assert cav.control.kind is ControlKind.FEEDFORWARD and cav.control.value(1.0) == 2.0
        assert cav.readout_b.rule is AngleRule.EVADING_CAVITY

    def test_build_lookup(self):
        assert S.build("free").id == "free"
        assert S.build("signal-correction").control.kind is ControlKind.SUBTRACTION
        with pytest.raises(ConfigurationError):
            S.build("nonsense")

    def test_gain_spec(self):
        assert S.control_law("optimized").mode is GainMode.OPTIMIZED
        assert S.control_law(1 + 2j).value(5.0) == 1 + 2j
        with pytest.raises(ConfigurationError):
            S.control_law("fixed")
        with pytest.raises(ConfigurationError):
            S.control_law("huge")

    def test_sql_frequency_is_one(self):
        assert S.free().sql_a == pytest.approx(1.0)

    def test_fig3_labels(self):
        names = [sc.name for sc in S.fig3()]
        assert names == ["a_free", "b_sql", "c_locking_inf", "d_locking_opt", "e_backaction_inf"]
        assert len(S.fig3(extended=True)) == 7


class TestClosedForms:
    def test_free_spot_values(self):
        assert S.free_sigma(XA, 1.0, 1.0) * 2 * XA**2 == pytest.approx(1.0)

    def test_sql_tangent(self):
        w = np.linspace(0.2, 5, 50)
        assert np.all(S.free_sigma(XA, 1.0, w) >= S.sql_envelope(1.0, w))

    def test_locking_limit(self):
        assert S.locking_sigma_inf(XA, XA / 5, 1.0, 1e6) * 2 * XA**2 == pytest.approx(13.0)

    def test_cavity_values(self):
        assert S.cavity_locking_sigma(XA, XA) * 2 * XA**2 == pytest.approx(2.5)
        assert S.cavity_locking_sigma(XA, 2 * XA) * 2 * XA**2 == pytest.approx(1.0)

    def test_cavity_angle(self):
        theta = S.cavity_locking_angle(0.5, 1.0)
        assert 1 / math.tan(theta) == pytest.approx(6.0)
        assert np.allclose(S.cavity_locking_angle(np.array([0.5]), 1.0), theta)


class TestCavityLocking:
    @pytest.mark.parametrize("ratio, expected", [(1.0, 2.5), (2.0, 1.0), (0.5, 8.5)])
    @pytest.mark.parametrize("w", [0.1, 1.0, 10.0])
    def test_flat_value(self, ratio, expected, w):
        assert sigma(S.cavity_locking(XA * ratio), w) * 2 * XA**2 == pytest.approx(expected, rel=1e-9)

    def test_wrong_feedforward_gain_leaves_back_action(self):
        w = 0.1
        assert sigma(S.cavity_locking(feedforward=1.0), w) > 10 * sigma(S.cavity_locking(), w)

    @pytest.mark.parametrize("gain", [0.0, 2.0, 0.7 - 0.3j])
    @pytest.mark.parametrize("w", [0.05, 1.0, 20.0])
    def test_force_sum_rule(self, gain, w):
        assert S.force_sum_residual(S.cavity_locking(feedforward=gain), w) < 1e-10

    def test_needs_three_mirrors(self):
        with pytest.raises(ConfigurationError):
            S.cavity_locking().replace(i=None).validate()


class TestSignalCorrection:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.1, 10))
    def test_matches_cavity_locking(self, w):
        sc = S.cavity_locking()
        assert S.signal_correction_sigma(sc, w) == pytest.approx(sigma(sc, w), rel=1e-10)

    @pytest.mark.parametrize(
        "sc", [S.locking(), S.locking(gain=0.4 + 0.9j), S.backaction_cancel(), S.locking(gain="optimized")]
    )
    def test_matches_feedback_variants(self, sc):
        from qlock.optimizer import optimize_gain

        for w in (0.2, 1.3, 6.0):
            ref = optimize_gain(sc, w).sigma_opt if sc.control.mode is GainMode.OPTIMIZED else sigma(sc, w)
            assert S.signal_correction_sigma(sc, w) == pytest.approx(ref, rel=1e-10)

    def test_explicit_weight(self):
        sc = S.locking()
        assert S.signal_correction_sigma(sc, 0.5, weight=0.0) == pytest.approx(
            sigma(S.locking(gain=0.0), 0.5), rel=1e-12
        )

    def test_rejects_unactuated(self):
        with pytest.raises(ConfigurationError):
            S.signal_correction(S.free())


def test_budget_for_sql(grid):
    b = S.budget_for(S.sql_reference(), grid)
    assert np.allclose(b.total, grid.values**-2, rtol=1e-14)
    b.check()


def test_budget_for_network(grid):
    b = S.budget_for(S.backaction_cancel(), FrequencyGrid.make(0.1, 10, 7))
    assert np.allclose(b.total, 1.0, rtol=1e-9)
