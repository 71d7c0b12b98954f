import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swivelsim.controller import (ControlGains, Euler312StickReference,
                                  ReferenceSample, controller_step,
                                  delta_from_mz, desired_moment,
                                  estimate_Md_second_derivative,
                                  init_controller_state, moment_tracking_u,
                                  mz_derivatives, mz_from_delta,
                                  reference_fixed_axis_sinusoid,
                                  tau_delta_from_uz)
from swivelsim.errors import DegenerateThrust, GimbalLock, SwivelSingularity
from swivelsim.so3 import (Euler312, attitude_error_eR, euler312_to_rotation,
                           exp_so3, hat)
from swivelsim.vehicle import VehicleParams, VehicleState

from oracles import random_rotation, second_order_response

P = VehicleParams()
T0 = 3.924
L_ARM = 0.21


def ref_rest(R_d=None):
    return ReferenceSample(np.eye(3) if R_d is None else R_d,
                           np.zeros(3), np.zeros(3))


# --- gains -------------------------------------------------------------------

def test_gains_validation():
    with pytest.raises(ValueError):
        ControlGains(k_R=-1.0)
    with pytest.raises(ValueError):
        ControlGains(zeta=(0.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        ControlGains(tau_delta_limit=0.0)
    g = ControlGains()
    assert np.allclose(np.diag(g.D), [2 * z * w for z, w
                                      in zip(g.zeta, g.Omega)])
    assert np.allclose(np.diag(g.K), np.array(g.Omega) ** 2)


# --- rigid-body law ------------------------------------------------------------

def test_desired_moment_equilibrium(gains, J_nominal):
    M = desired_moment(np.eye(3), np.zeros(3), ref_rest(), gains, J_nominal)
    assert np.allclose(M, 0.0)


def test_desired_moment_gyroscopic_feedforward(gains, J_nominal, rng):
    # tracking a constant-rate reference exactly: only omega x J omega is left
    R = random_rotation(rng)
    w = np.array([1.0, -2.0, 0.5])
    ref = ReferenceSample(R, w, np.zeros(3))
    M = desired_moment(R, w, ref, gains, J_nominal)
    assert np.allclose(M, np.cross(w, J_nominal @ w), atol=1e-12)


def test_desired_moment_small_error_is_proportional(gains, J_nominal):
    # at rest the law reduces to -k_R e_R; the residual against the
    # linearized gradient shrinks quadratically with the error angle
    e3 = np.array([0.0, 0.0, 1.0])
    B = 0.5 * (np.trace(gains.P) * np.eye(3) - gains.P)
    devs = []
    for eps in (1e-2, 5e-3):
        R = exp_so3(eps * e3)
        M = desired_moment(R, np.zeros(3), ref_rest(), gains, J_nominal)
        assert np.allclose(M, -gains.k_R
                           * attitude_error_eR(R, gains.P), atol=1e-15)
        devs.append(np.linalg.norm(M + gains.k_R * eps * (B @ e3)))
    assert devs[0] / devs[1] > 3.0  # O(eps^2) residual


# --- moment loop ----------------------------------------------------------------

def test_moment_tracking_feedforward_passthrough(gains):
    u = moment_tracking_u(np.zeros(3), np.zeros(3), np.array([1.0, 2.0, 3.0]),
                          gains)
    assert np.allclose(u, [1.0, 2.0, 3.0])


def test_moment_tracking_stiffness_entry():
    g = ControlGains(zeta=(1.0, 1.0, 1.0), Omega=(10.0, 10.0, 10.0))
    u = moment_tracking_u(np.array([1.0, 0, 0]), np.zeros(3), np.zeros(3), g)
    assert np.allclose(u, [-100.0, 0.0, 0.0])


def test_moment_error_critically_damped_envelope():
    # closed-loop moment error with zeta=1 obeys the (1 + w t) e^{-w t} bound
    g = ControlGains(zeta=(1.0, 1.0, 1.0), Omega=(12.0, 12.0, 12.0))
    Me = np.ones(3)
    dMe = np.zeros(3)
    h = 1e-4
    norm0 = np.linalg.norm(Me)
    for k in range(int(1.0 / h)):
        for _ in range(1):
            a1 = -g.D @ dMe - g.K @ Me
            dMe_mid = dMe + 0.5 * h * a1
            Me_mid = Me + 0.5 * h * dMe
            a2 = -g.D @ dMe_mid - g.K @ Me_mid
            Me = Me + h * dMe_mid
            dMe = dMe + h * a2
        t = (k + 1) * h
        bound = (1 + 12.0 * t) * np.exp(-12.0 * t) * norm0
        assert np.linalg.norm(Me) <= bound + 1e-6
    analytic = second_order_response(1.0, 0.0, 1.0, 12.0, np.array([1.0]))
    assert abs(np.linalg.norm(Me) / np.sqrt(3) - analytic[0]) < 1e-4


# --- Mz <-> delta diffeomorphism -------------------------------------------------

def test_mz_zero():
    assert mz_from_delta(0.0, T0, L_ARM) == 0.0


def test_mz_frozen_value():
    assert abs(mz_from_delta(np.deg2rad(15.0), T0, L_ARM)
               - (-0.4416018)) < 1e-6


@given(st.floats(-np.deg2rad(80), np.deg2rad(80)))
@settings(max_examples=200)
def test_mz_roundtrip(delta):
    assert abs(delta_from_mz(mz_from_delta(delta, T0, L_ARM), T0, L_ARM)
               - delta) < 1e-12


def test_mz_guards():
    with pytest.raises(SwivelSingularity):
        mz_from_delta(np.pi / 2, T0, L_ARM)
    with pytest.raises(DegenerateThrust):
        mz_from_delta(0.1, 0.0, L_ARM)


def test_mz_derivatives_zero_rate():
    assert mz_derivatives(0.3, 0.0, 0.0, T0, L_ARM) == (0.0, 0.0)


def test_mz_derivatives_linear_at_zero():
    dMz, _ = mz_derivatives(0.0, 0.7, 0.0, T0, L_ARM)
    assert abs(dMz - (-2 * L_ARM * T0 * 0.7)) < 1e-12


def test_mz_derivatives_match_finite_differences():
    # delta(t) = 0.3 sin(2t): compare dMz, ddMz against differences of Mz(t)
    h = 1e-5
    for t in np.linspace(0.1, 2.0, 25):
        d = lambda s: 0.3 * np.sin(2 * s)
        dd = lambda s: 0.6 * np.cos(2 * s)
        ddd = lambda s: -1.2 * np.sin(2 * s)
        mz = lambda s: mz_from_delta(d(s), T0, L_ARM)
        dMz, ddMz = mz_derivatives(d(t), dd(t), ddd(t), T0, L_ARM)
        fd1 = (mz(t + h) - mz(t - h)) / (2 * h)
        fd2 = (mz(t + h) - 2 * mz(t) + mz(t - h)) / (h * h)
        assert abs(dMz - fd1) < 1e-6 * max(1, abs(fd1))
        assert abs(ddMz - fd2) < 1e-5 * max(1, abs(fd2))


# --- exact swivel linearization ---------------------------------------------------

def test_tau_delta_zero_case():
    assert tau_delta_from_uz(0.0, 0.0, 0.0, 0.0, 0.0, T0, P) == 0.0


def test_tau_delta_zero_swivel_closed_form():
    u_z = 7.3
    tau = tau_delta_from_uz(u_z, 0.0, 0.0, 0.0, 0.0, T0, P)
    assert abs(tau - (-P.J_xx * u_z / (2 * L_ARM * T0))) < 1e-12


def test_tau_delta_thrust_guard():
    with pytest.raises(DegenerateThrust):
        tau_delta_from_uz(1.0, 0.1, 0.0, 0.0, 0.0, 0.0, P)


def test_exact_linearization_chain(rng):
    # apply the computed torque to the true swivel dynamics and verify the
    # realized second derivative of Mz equals the requested u_z
    for _ in range(100):
        delta = rng.uniform(-0.5, 0.5)
        ddelta = rng.uniform(-3, 3)
        wy, wz = rng.uniform(-4, 4, 2)
        u_z = rng.uniform(-300, 300)
        tau_d = tau_delta_from_uz(u_z, delta, ddelta, wy, wz, T0, P)
        dd_delta = (2 * tau_d - np.sin(2 * delta) * (P.J_yy - P.J_zz)
                    * (wy ** 2 - wz ** 2)) / (2 * P.J_xx)
        _, ddMz = mz_derivatives(delta, ddelta, dd_delta, T0, L_ARM)
        assert abs(ddMz - u_z) < 1e-9 * max(1.0, abs(u_z))


# --- desired-moment second derivative ----------------------------------------------

def test_md_second_derivative_constant():
    hist = [np.ones(3)] * 3
    assert np.allclose(estimate_Md_second_derivative(hist, 0.004), 0.0)


def test_md_second_derivative_quadratic_exact():
    a = np.array([2.0, -1.0, 0.5])
    h = 0.004
    hist = [0.5 * a * (t * h) ** 2 for t in range(3)]
    assert np.allclose(estimate_Md_second_derivative(hist, h), a, atol=1e-9)


def test_md_second_derivative_sinusoid():
    h = 1 / 250
    w = 2 * np.pi
    amp = np.array([1.0, 0.5, -2.0])
    t0 = 0.3
    hist = [amp * np.sin(w * (t0 + k * h)) for k in (-2, -1, 0)]
    est = estimate_Md_second_derivative(hist, h)
    # the symmetric difference is centered on the middle sample
    exact = -w * w * amp * np.sin(w * (t0 - h))
    assert np.all(np.abs(est - exact) <= 1e-3 * np.abs(exact))


def test_md_second_derivative_warmup():
    assert np.allclose(estimate_Md_second_derivative([np.ones(3)], 0.004), 0.0)


# --- discrete controller -------------------------------------------------------------

def test_controller_equilibrium_passthrough(gains):
    s = VehicleState(R=np.eye(3), omega=np.zeros(3), delta=0.0, ddelta=0.0,
                     f_act=np.full(4, T0 / 2))
    cs = init_controller_state(T0)
    w, cs = controller_step(s, ref_rest(), cs, gains, P, 1 / 250)
    assert np.allclose([w.T1, w.T2], T0, atol=1e-12)
    assert np.allclose([w.tau1, w.tau2], 0.0, atol=1e-12)


def test_controller_step_deterministic(gains, rng):
    s = VehicleState(R=random_rotation(rng), omega=rng.standard_normal(3),
                     delta=0.1, ddelta=-0.2, f_act=np.full(4, 2.0))
    ref = reference_fixed_axis_sinusoid(0.12, 0.5, 1.0, np.array([1, 1, 1.0]))
    cs0 = init_controller_state(T0)
    w1, cs1 = controller_step(s, ref, cs0, gains, P, 1 / 250)
    w2, cs2 = controller_step(s, ref, cs0, gains, P, 1 / 250)
    assert w1 == w2
    assert np.array_equal(cs1.M_xy, cs2.M_xy)
    # input state untouched
    assert np.allclose(cs0.M_xy, 0.0) and cs0.steps == 0


def test_extension_settles_to_constant_demand(gains, J_nominal):
    # constant desired moment (0, m, 0) through the reference feedforward:
    # after the inner loop settles, T_d = m / (2 l)
    m = 0.5
    wdot = np.linalg.solve(J_nominal, np.array([0.0, m, 0.0]))
    ref = ReferenceSample(np.eye(3), np.zeros(3), wdot)
    s = VehicleState(R=np.eye(3), omega=np.zeros(3), delta=0.0, ddelta=0.0)
    cs = init_controller_state(T0)
    h = 1 / 250
    for _ in range(500):
        w, cs = controller_step(s, ref, cs, gains, P, h)
    md_Td = 0.5 * (w.T1 - w.T2)
    assert abs(md_Td - m / (2 * L_ARM)) < 1e-6
    assert abs(cs.M_xy[1] - m) < 1e-6


def test_thrust_component_invariant(gains):
    # (T1 + T2) cos(delta) stays 2 T0 across swivel angles
    cs = init_controller_state(T0)
    for delta in (-0.4, -0.1, 0.0, 0.2, 0.45):
        s = VehicleState(R=np.eye(3), omega=np.zeros(3), delta=delta,
                         ddelta=0.0)
        w, _ = controller_step(s, ref_rest(), cs, gains, P, 1 / 250)
        assert abs((w.T1 + w.T2) * np.cos(delta) - 2 * T0) < 1e-9


def test_controller_rejects_singular_swivel(gains):
    s = VehicleState(R=np.eye(3), omega=np.zeros(3), delta=np.pi / 2,
                     ddelta=0.0)
    with pytest.raises(SwivelSingularity):
        controller_step(s, ref_rest(), init_controller_state(T0), gains, P,
                        1 / 250)


def test_tau_delta_command_clamped(gains):
    # a huge u_z demand cannot exceed the differential-torque limit
    s = VehicleState(R=exp_so3(np.array([0, 0, 2.0])), omega=np.zeros(3),
                     delta=0.0, ddelta=0.0)
    cs = init_controller_state(T0)
    w, _ = controller_step(s, ref_rest(), cs, gains, P, 1 / 250)
    assert abs(0.5 * (w.tau2 - w.tau1)) <= gains.tau_delta_limit + 1e-12


def test_envelope_protection_steers_home(gains):
    s = VehicleState(R=np.eye(3), omega=np.zeros(3),
                     delta=np.deg2rad(60.0), ddelta=0.0)
    cs = init_controller_state(T0)
    w, _ = controller_step(s, ref_rest(), cs, gains, P, 1 / 250)
    tau_d = 0.5 * (w.tau2 - w.tau1)
    assert tau_d < 0.0  # pushes delta back down toward the envelope


# --- reference generators ---------------------------------------------------------

def test_sinusoid_reference_at_zero():
    A, f = np.deg2rad(40.0), 1.0
    ref = reference_fixed_axis_sinusoid(0.0, A, f, np.array([1.0, 1.0, 1.0]))
    assert np.allclose(ref.R_d, np.eye(3))
    n = np.ones(3) / np.sqrt(3)
    assert np.allclose(ref.omega_d, 2 * np.pi * f * A * n, atol=1e-12)


def test_sinusoid_reference_peak_rate():
    A, f = np.deg2rad(40.0), 1.0
    ts = np.linspace(0, 1, 1001)
    peak = max(np.linalg.norm(reference_fixed_axis_sinusoid(
        t, A, f, np.array([1, 1, 1.0])).omega_d) for t in ts)
    assert abs(peak - 4.386) < 1e-3


def test_sinusoid_reference_kinematic_consistency():
    A, f = np.deg2rad(40.0), 1.0
    axis = np.array([1.0, 1.0, 1.0])
    h = 1e-6
    for t in np.linspace(0.0, 1.0, 17):
        r0 = reference_fixed_axis_sinusoid(t, A, f, axis)
        rp = reference_fixed_axis_sinusoid(t + h, A, f, axis)
        rm = reference_fixed_axis_sinusoid(t - h, A, f, axis)
        Rdot_fd = (rp.R_d - rm.R_d) / (2 * h)
        assert np.linalg.norm(Rdot_fd - r0.R_d @ hat(r0.omega_d)) < 1e-6
        wdot_fd = (rp.omega_d - rm.omega_d) / (2 * h)
        assert np.linalg.norm(wdot_fd - r0.domega_d) < 1e-5


def test_sinusoid_rejects_zero_axis():
    with pytest.raises(ValueError):
        reference_fixed_axis_sinusoid(0.0, 1.0, 1.0, np.zeros(3))


def test_stick_reference_zero():
    gen = Euler312StickReference()
    ref = gen.sample(0.0, 0.0, 0.0, 0.0)
    assert np.allclose(ref.R_d, np.eye(3))
    assert np.allclose(ref.omega_d, 0.0) and np.allclose(ref.domega_d, 0.0)


def test_stick_reference_step_settles():
    gen = Euler312StickReference(filter_omega=10.0, filter_zeta=1.0)
    cmd = (0.4, 0.2, -0.3, 0.1)
    h = 1 / 250
    for _ in range(int(3.0 / h)):
        gen.advance(*cmd, h)
    ref = gen.sample(*cmd)
    target = euler312_to_rotation(Euler312(yaw=0.4, roll=0.2,
                                           pitch=-0.3 + 0.1))
    assert np.linalg.norm(ref.R_d - target) < 1e-6
    assert np.linalg.norm(ref.omega_d) < 1e-5


def test_stick_reference_trim_ramp_consistency():
    # sweep trim 0 -> 90 deg over 10 s (hover-to-cruise profile) and verify
    # Rdot = R hat(omega_d) by finite differences of the generated samples
    gen = Euler312StickReference(filter_omega=8.0, filter_zeta=1.0)
    h = 1e-3
    samples = []
    for k in range(int(12.0 / h)):
        t = k * h
        trim = np.deg2rad(90.0) * min(t / 10.0, 1.0)
        samples.append(gen.sample(0.0, 0.0, 0.0, trim))
        gen.advance(0.0, 0.0, 0.0, trim, h)
    for k in range(1000, 9000, 1000):
        Rdot_fd = (samples[k + 1].R_d - samples[k - 1].R_d) / (2 * h)
        r = samples[k]
        assert np.linalg.norm(Rdot_fd - r.R_d @ hat(r.omega_d)) < 1e-5
    # pitch actually swept
    assert np.linalg.norm(samples[-1].R_d
                          - euler312_to_rotation(Euler312(0, 0, np.pi / 2))) < 0.01


def test_stick_reference_gimbal_guard():
    gen = Euler312StickReference(filter_omega=50.0, filter_zeta=1.0,
                                 initial=(0.0, np.deg2rad(89.8), 0.0, 0.0))
    with pytest.raises(GimbalLock):
        gen.sample(0.0, np.deg2rad(89.8), 0.0, 0.0)
