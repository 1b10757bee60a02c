import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qlock.elements import (
    AngleRule,
    ControlKind,
    ControlLaw,
    DetectionPolicy,
    FieldChannel,
    GainMode,
    MechanicalMode,
    cavity_reflect,
    homodyne,
    incident_power_for,
    intracavity_amplitude,
    lossy_sensor_port,
    mirror_response,
    optomech_coupling,
    sql_frequency,
)
from qlock.errors import ConfigurationError, DegenerateReadoutError, DomainError, SingularDynamicsError
from qlock.specalg import Constants, LinComb, NoiseSource, spectrum_of

a0 = LinComb.symbol("a0")
a90 = LinComb.symbol("a90")
X = LinComb.symbol("X_sig")
positive = st.floats(1e-3, 1e3, allow_nan=False)


def quadrature_map(xi, mass, omega, hbar=1.0):
    """(a0, a90)_in -> (a0, a90)_out for a free suspended end mirror."""
    mirror = MechanicalMode("m", mass)
    x_m = mirror_response(mirror.Z(omega), hbar * xi * a0, omega)
    out0, out90 = cavity_reflect(a0, a90, x_m, xi)
    return np.array([[out0.coeff("a0"), out0.coeff("a90")], [out90.coeff("a0"), out90.coeff("a90")]])


class TestCavityReflect:
    def test_no_motion_is_identity(self):
        out0, out90 = cavity_reflect(a0, a90, LinComb(), 0.3)
        assert out0 == a0 and out90.coeff("a90") == 1 and out90.coeff("X_sig") == 0

    def test_phase_carries_signal(self):
        xi = 0.3
        _, out90 = cavity_reflect(a0, a90, X, xi)
        assert out90.coeff("X_sig") == pytest.approx(2 * xi)
        est = homodyne(a0, out90, math.pi / 2, xi)
        assert est.coeff("X_sig") == pytest.approx(1.0)
        assert est.coeff("a90") == pytest.approx(1 / (2 * xi))

    def test_transfer_matrix_symbolic(self):
        sympy = pytest.importorskip("sympy")
        xi, hbar, M, W = sympy.symbols("xi hbar M Omega", positive=True)
        Z = -sympy.I * W * M
        x_coeff = hbar * xi / (-sympy.I * W * Z)
        T = sympy.Matrix([[1, 0], [2 * xi * x_coeff, 1]])
        assert sympy.simplify(T.det()) == 1
        num = quadrature_map(0.6, 2.0, 0.8, hbar=1.3)
        sub = {xi: 0.6, M: 2.0, W: 0.8, hbar: 1.3}
        assert np.allclose(np.array(T.subs(sub), dtype=complex), num, rtol=1e-14)

    @given(positive, positive, positive)
    def test_symplectic(self, xi, mass, omega):
        T = quadrature_map(xi, mass, omega)
        assert abs(np.linalg.det(T) - 1) < 1e-10


class TestCoupling:
    def test_zero_amplitude(self):
        assert optomech_coupling(1064e-9, 600, 0.0) == 0.0

    def test_finesse_scaling(self):
        x1 = optomech_coupling(1064e-9, 600, 1e10)
        x2 = optomech_coupling(1064e-9, 1200, 1e10)
        assert x2 / x1 == pytest.approx(math.sqrt(2), rel=1e-14)

    def test_formula(self):
        lam, F, alpha = 1e-6, 1e4, 3e9
        assert optomech_coupling(lam, F, alpha) == pytest.approx(
            4 * math.pi / lam * alpha * math.sqrt(2 * F / math.pi), rel=1e-15
        )

    @pytest.mark.parametrize("args", [(0, 600, 1.0), (1e-6, 0, 1.0), (1e-6, 600, -1.0)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            optomech_coupling(*args)

    @given(positive, positive, positive)
    def test_monotone(self, F, alpha, factor):
        lam = 1e-6
        assert optomech_coupling(lam, F * (1 + factor), alpha) > optomech_coupling(lam, F, alpha)
        assert optomech_coupling(lam, F, alpha * (1 + factor)) > optomech_coupling(lam, F, alpha)

    def test_design_example_ratio(self):
        si = Constants.for_units("si")
        a = FieldChannel.from_power("a", 1064e-9, 600, 15e3, si)
        b = FieldChannel.from_power("b", 1064e-9, 1e5, 90.0, si)
        assert b.xi / a.xi == pytest.approx(1.0, abs=1e-6)

    def test_amplitude_is_photon_flux(self):
        si = Constants.for_units("si")
        lam, P = 1064e-9, 2.0
        photon_energy = si.hbar * 2 * math.pi * si.c / lam
        assert intracavity_amplitude(P, lam, si) ** 2 == pytest.approx(P / photon_energy, rel=1e-14)


class TestIncidentPower:
    def test_sensor_example(self):
        assert incident_power_for(90.0, 1e5) == pytest.approx(1.414e-3, rel=1e-3)

    def test_unity_buildup(self):
        assert incident_power_for(7.0, math.pi / 2) == pytest.approx(7.0)

    def test_interferometer_example(self):
        p = incident_power_for(15e3, 600)
        assert p == pytest.approx(39.27, rel=1e-4)
        assert 15e3 / p == pytest.approx(2 * 600 / math.pi, rel=1e-12)
        assert 2 * 600 / math.pi == pytest.approx(381.97, rel=1e-5)


class TestMirror:
    def test_suspended_back_action_coefficient(self):
        xi, M, w = 0.7, 3.0, 0.4
        x = mirror_response(MechanicalMode("m", M).Z(w), xi * a0, w)
        assert x.coeff("a0") == pytest.approx(-xi / (w**2 * M), rel=1e-14)
        srcs = {"a0": NoiseSource("a0")}
        assert spectrum_of(x, srcs, w) == pytest.approx(xi**2 / (w**4 * M**2), rel=1e-14)

    def test_zero_force(self):
        x = mirror_response(-1j * 2.0, LinComb(), 2.0)
        assert len(x) == 0

    def test_singular_impedance(self):
        mirror = MechanicalMode("m", 1.0, impedance=lambda w: 0.0)
        with pytest.raises(SingularDynamicsError, match="omega=0.5"):
            mirror_response(mirror.Z(0.5), a0, 0.5)

    @given(st.floats(-5, 5), st.floats(-5, 5), positive)
    def test_linear(self, c1, c2, w):
        Z = -1j * w * 2.0
        f1, f2 = c1 * a0, c2 * a90 + 0.5 * a0
        lhs = mirror_response(Z, f1 + f2, w)
        rhs = mirror_response(Z, f1, w) + mirror_response(Z, f2, w)
        for k in ("a0", "a90"):
            assert abs(lhs.coeff(k) - rhs.coeff(k)) <= 1e-12 * (1 + abs(lhs.coeff(k)))

    def test_impedance_model(self):
        m = MechanicalMode("m", 2.5)
        assert m.Z(3.0) == -1j * 3.0 * 2.5
        with pytest.raises(DomainError):
            MechanicalMode("m", 0.0)


class TestSQL:
    def test_normalized(self):
        assert sql_frequency(1 / math.sqrt(2), 1.0, 1.0) == pytest.approx(1.0)

    def test_scaling(self):
        assert sql_frequency(2.0, 1.0) / sql_frequency(1.0, 1.0) == pytest.approx(2.0)

    def test_terms_balance_at_sql(self):
        xi, M, hbar = 0.9, 1.7, 1.0
        w = sql_frequency(xi, M, hbar)
        assert 1 / (4 * xi**2) == pytest.approx(hbar**2 * xi**2 / (w**4 * M**2), rel=1e-14)


class TestHomodyne:
    def test_degenerate(self):
        with pytest.raises(DegenerateReadoutError):
            homodyne(a0, a90, 0.0, 1.0)
        with pytest.raises(DegenerateReadoutError):
            DetectionPolicy(AngleRule.FIXED, math.pi)

    def test_quarter_turn_adds_amplitude_noise(self):
        xi = 0.8
        est = homodyne(a0, a90, math.pi / 4, xi)
        ref = homodyne(a0, a90, math.pi / 2, xi)
        assert est.coeff("a90") == pytest.approx(ref.coeff("a90"))
        assert est.coeff("a0") == pytest.approx(1.0 / (2 * xi))

    def test_optimal_angle_cancels_back_action(self):
        xi, M, w = 1 / math.sqrt(2), 1.0, 0.3
        x_m = mirror_response(MechanicalMode("m", M).Z(w), xi * a0, w)
        out0, out90 = cavity_reflect(a0, a90, X + x_m, xi)
        theta = DetectionPolicy(AngleRule.OPTIMAL).angle(w, sql_a=sql_frequency(xi, M))
        est = homodyne(out0, out90, theta, xi)
        assert abs(est.coeff("a0")) < 1e-12
        assert est.coeff("X_sig") == pytest.approx(1.0)
        assert est.coeff("a90") == pytest.approx(1 / (2 * xi))


class TestPolicies:
    @pytest.mark.parametrize(
        "text, rule, factor",
        [("evading", AngleRule.EVADING, 1.0), ("evading-cavity", AngleRule.EVADING_CAVITY, 1.5)],
    )
    def test_evading_rules(self, text, rule, factor):
        p = DetectionPolicy.parse(text)
        assert p.rule is rule
        theta = p.angle(0.5, sql_a=9.0, sql_b=2.0)
        assert 1 / math.tan(theta) == pytest.approx(factor * (2.0 / 0.5) ** 2)

    def test_phase_and_fixed(self):
        assert DetectionPolicy.parse("phase").angle(3.0) == pytest.approx(math.pi / 2)
        assert DetectionPolicy.parse("fixed=0.25").angle(3.0) == 0.25

    def test_bad_rule(self):
        with pytest.raises(ConfigurationError):
            DetectionPolicy.parse("sideways")
        with pytest.raises(ConfigurationError):
            DetectionPolicy(AngleRule.EVADING).angle(1.0)

    def test_control_law_modes(self):
        law = ControlLaw(ControlKind.FEEDBACK, GainMode.FIXED, lambda w: 2j * w)
        assert law.value(3.0) == 6j
        assert ControlLaw(mode=GainMode.OFF).value(1.0) == 0
        with pytest.raises(ConfigurationError):
            ControlLaw(mode=GainMode.INFINITE).value(1.0)
        with pytest.raises(ConfigurationError):
            ControlLaw(ControlKind.FEEDFORWARD, GainMode.INFINITE)
        assert ControlLaw(ControlKind.FEEDFORWARD, GainMode.FIXED, 2.0).target == "i"


class TestLossPort:
    def test_zero_loss_identity(self):
        out0, out90, srcs = lossy_sensor_port(a0, a90, 0.0)
        assert out0.coeff("a0") == 1 and out0.coeff("v0") == 0
        assert out90.coeff("a90") == 1 and out90.coeff("v90") == 0

    def test_mixes_vacuum(self):
        out0, out90, srcs = lossy_sensor_port(a0, a90, 0.01)
        assert out0.coeff("a0") == pytest.approx(math.sqrt(0.99))
        assert out90.coeff("v90") == pytest.approx(0.1)
        allsrc = {s.id: s for s in srcs} | {"a0": NoiseSource("a0"), "a90": NoiseSource("a90")}
        # total power of a unit-noise beam is preserved
        assert spectrum_of(out0, allsrc, 1.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("eps", [-0.1, 1.0, 2.0])
    def test_domain(self, eps):
        with pytest.raises(DomainError):
            lossy_sensor_port(a0, a90, eps)
