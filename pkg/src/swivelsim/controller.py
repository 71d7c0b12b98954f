"""Geometric attitude tracking controller with second-order moment dynamics.

Structure: a rigid-body tracking law on SO(3) produces the desired moment
M_d; the x/y moments are controller-internal double-integrator states
(dynamic extension) while the z moment is realized physically through the
swivel angle via the diffeomorphism M_z = -2 l T0 tan(delta). A
spring-mass-damper assignment of the moment error plus exact feedback
linearization of the swivel channel closes the inner loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateThrust, SwivelSingularity
from .so3 import attitude_error_eR, exp_so3, hat, validate_error_gain
from .vehicle import (MeanDiffInputs, VehicleParams, VehicleState,
                      WingInputs, wing_from_mean_diff)

_T0_EPS = 1e-6
_PROTECT_OMEGA = 15.0  # rad/s, swivel envelope-protection stiffness


@dataclass(frozen=True)
class ControlGains:
    """Controller tuning set.

    k_R/k_omega and P shape the outer (rigid-body) loop; zeta/Omega give
    per-axis damping ratios and natural frequencies of the inner moment
    loop. Md_limit and tau_delta_limit bound the commands to what the
    motor pairs can realize; delta_protect is the swivel angle beyond
    which the controller abandons moment tracking and steers the swivel
    back into range.
    """
    k_R: float = 1.6
    k_omega: float = 0.7
    P: np.ndarray = field(default_factory=lambda: np.diag([1.0, 2.0, 3.0]))
    zeta: tuple[float, float, float] = (1.1, 1.1, 1.1)
    Omega: tuple[float, float, float] = (40.0, 40.0, 18.0)
    Md_limit: tuple[float, float, float] = (2.2, 1.3, 1.3)
    tau_delta_limit: float = 1.6
    delta_protect: float = np.deg2rad(50.0)

    def __post_init__(self):
        if self.k_R <= 0.0 or self.k_omega <= 0.0:
            raise ValueError("k_R and k_omega must be positive")
        if min(self.zeta) <= 0.0 or min(self.Omega) <= 0.0:
            raise ValueError("zeta and Omega must be positive")
        if min(self.Md_limit) <= 0.0:
            raise ValueError("Md_limit must be positive")
        if self.tau_delta_limit <= 0.0:
            raise ValueError("tau_delta_limit must be positive")
        if not 0.0 < self.delta_protect < np.pi / 2:
            raise ValueError("delta_protect must lie in (0, pi/2)")
        validate_error_gain(self.P)

    @property
    def D(self) -> np.ndarray:
        """Damping matrix diag(2 zeta_i Omega_i) of the moment loop."""
        return np.diag([2 * z * w for z, w in zip(self.zeta, self.Omega)])

    @property
    def K(self) -> np.ndarray:
        """Stiffness matrix diag(Omega_i^2) of the moment loop."""
        return np.diag([w * w for w in self.Omega])


class ReferenceSample(NamedTuple):
    """Reference attitude with body-frame rate and acceleration."""
    R_d: np.ndarray
    omega_d: np.ndarray
    domega_d: np.ndarray


IDENTITY_REFERENCE = ReferenceSample(np.eye(3), np.zeros(3), np.zeros(3))


def desired_moment(R: np.ndarray, omega: np.ndarray, ref: ReferenceSample,
                   g: ControlGains, J: np.ndarray) -> np.ndarray:
    """Rigid-body tracking law: PD action on the configuration error plus
    gyroscopic and reference feedforward, evaluated with the constant
    design inertia J."""
    R_e = ref.R_d.T @ R
    e_omega = omega - R_e.T @ ref.omega_d
    e_R = attitude_error_eR(R_e, g.P)
    ff = hat(e_omega) @ (R_e.T @ ref.omega_d) - R_e.T @ ref.domega_d
    return (-g.k_R * e_R - g.k_omega * e_omega
            + np.cross(omega, J @ omega) - J @ ff)


def moment_tracking_u(M_e: np.ndarray, dM_e: np.ndarray, ddM_d: np.ndarray,
                      g: ControlGains) -> np.ndarray:
    """Inner-loop input assigning spring-mass-damper error dynamics:
    u = ddM_d - D dM_e - K M_e."""
    return ddM_d - g.D @ dM_e - g.K @ M_e


# ---------------------------------------------------------------------------
# M_z <-> delta diffeomorphism and exact swivel-channel linearization
# ---------------------------------------------------------------------------

def _check_thrust(T0: float) -> None:
    if T0 <= _T0_EPS:
        raise DegenerateThrust(f"T0 = {T0} N collapses the Mz map")


def _check_delta(delta: float) -> None:
    if abs(delta) >= np.pi / 2:
        raise SwivelSingularity(f"|delta| = {abs(delta):.4f} rad >= pi/2")


def mz_from_delta(delta: float, T0: float, l: float) -> float:
    """M_z = -2 l T0 tan(delta)."""
    _check_thrust(T0)
    _check_delta(delta)
    return -2.0 * l * T0 * np.tan(delta)


def delta_from_mz(M_z: float, T0: float, l: float) -> float:
    """Inverse of mz_from_delta: delta = -atan(M_z / (2 l T0))."""
    _check_thrust(T0)
    return float(-np.arctan(M_z / (2.0 * l * T0)))


def mz_derivatives(delta: float, ddelta: float, dddelta: float,
                   T0: float, l: float) -> tuple[float, float]:
    """First and second time derivatives of M_z along delta(t)."""
    _check_thrust(T0)
    _check_delta(delta)
    sec2 = 1.0 / np.cos(delta) ** 2
    dMz = -2.0 * l * T0 * sec2 * ddelta
    ddMz = (-4.0 * l * T0 * sec2 * np.tan(delta) * ddelta ** 2
            - 2.0 * l * T0 * sec2 * dddelta)
    return float(dMz), float(ddMz)


def tau_delta_from_uz(u_z: float, delta: float, ddelta: float,
                      omega_y: float, omega_z: float, T0: float,
                      p: VehicleParams) -> float:
    """Differential wing torque realizing ddot(M_z) = u_z exactly.

    Inverts the M_z kinematics for the virtual swivel acceleration v_z and
    cancels the inertia-difference coupling of the swivel dynamics.
    """
    _check_thrust(T0)
    _check_delta(delta)
    sec2 = 1.0 / np.cos(delta) ** 2
    v_z = -(u_z + 4.0 * p.l * T0 * sec2 * np.tan(delta) * ddelta ** 2) \
        / (2.0 * p.l * T0 * sec2)
    tau_d = (p.J_xx * v_z + 0.5 * (p.J_yy - p.J_zz) * np.sin(2 * delta)
             * (omega_y ** 2 - omega_z ** 2))
    return float(tau_d)


def estimate_Md_second_derivative(history: Sequence[np.ndarray],
                                  h: float) -> np.ndarray:
    """Three-point backward difference of the desired-moment history
    (oldest first). Exact on quadratics; zero until three samples exist."""
    if h <= 0.0:
        raise ValueError("sample period h must be positive")
    if len(history) < 3:
        return np.zeros(3)
    m2, m1, m0 = history[-3], history[-2], history[-1]
    return (m0 - 2.0 * m1 + m2) / (h * h)


# ---------------------------------------------------------------------------
# Discrete controller
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControllerState:
    """Controller memory carried between ticks.

    M_xy/dM_xy are the dynamic-extension double-integrator states;
    md_hist holds the recent locked-on desired moments feeding the
    backward differences for dM_d and ddM_d. The trailing fields are
    diagnostics of the most recent tick.
    """
    T0: float
    M_xy: np.ndarray = field(default_factory=lambda: np.zeros(2))
    dM_xy: np.ndarray = field(default_factory=lambda: np.zeros(2))
    md_hist: tuple = ()
    steps: int = 0
    last_Md: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_M: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_Me: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_dMe: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_u: np.ndarray = field(default_factory=lambda: np.zeros(3))


def init_controller_state(T0: float) -> ControllerState:
    _check_thrust(T0)
    return ControllerState(T0=T0)


def controller_step(s_measured: VehicleState, ref: ReferenceSample,
                    cs: ControllerState, g: ControlGains, p: VehicleParams,
                    h: float) -> tuple[WingInputs, ControllerState]:
    """One controller tick at period h: measured state in, wing commands out.

    Pure transition: (inputs, state) -> (outputs, next state), no hidden
    state, so independent instances may run concurrently.
    """
    J = p.nominal_inertia
    delta = s_measured.delta
    _check_delta(delta)

    # the actuators can only realize a bounded moment; clamping the
    # outer-loop demand keeps the moment loop tracking a feasible target
    # through large-error transients (no anti-windup on the extension is
    # needed then, because its states follow the bounded M_d)
    M_d = np.clip(desired_moment(s_measured.R, s_measured.omega, ref, g, J),
                  -np.asarray(g.Md_limit), np.asarray(g.Md_limit))

    # M_d derivative feedforward comes from the locked-on moment (M_d at
    # zero tracking error), a deterministic function of the reference:
    # differencing it is noise-free, whereas differencing the measured M_d
    # would amplify gyro noise by 1/h^2. Away from lock the mismatch is a
    # bounded disturbance the D/K feedback absorbs.
    M_d_lock = (np.cross(ref.omega_d, J @ ref.omega_d) + J @ ref.domega_d)
    md_hist = (cs.md_hist + (M_d_lock,))[-3:]

    dM_d = ((md_hist[-1] - md_hist[-2]) / h if len(md_hist) >= 2
            else np.zeros(3))
    ddM_d = estimate_Md_second_derivative(md_hist, h)

    # moment vector seen by the inner loop: extension states for x/y,
    # physical swivel state for z
    M_z = mz_from_delta(delta, cs.T0, p.l)
    dM_z, _ = mz_derivatives(delta, s_measured.ddelta, 0.0, cs.T0, p.l)
    M = np.array([cs.M_xy[0], cs.M_xy[1], M_z])
    dM = np.array([cs.dM_xy[0], cs.dM_xy[1], dM_z])
    M_e = M - M_d
    dM_e = dM - dM_d
    u = moment_tracking_u(M_e, dM_e, ddM_d, g)

    # dynamic extension, semi-implicit Euler at the controller period
    dM_xy = cs.dM_xy + h * u[:2]
    M_xy = cs.M_xy + h * dM_xy

    # the motor pairs can only realize a bounded differential torque;
    # exact swivel linearization holds whenever this clamp is inactive
    if abs(delta) <= g.delta_protect:
        tau_d = tau_delta_from_uz(u[2], delta, s_measured.ddelta,
                                  s_measured.omega[1], s_measured.omega[2],
                                  cs.T0, p)
    else:
        # envelope protection: outside the nominal swivel range, steer
        # delta back toward it instead of serving the moment loop
        home = np.sign(delta) * 0.8 * g.delta_protect
        v_home = (-_PROTECT_OMEGA ** 2 * (delta - home)
                  - 2.0 * _PROTECT_OMEGA * s_measured.ddelta)
        tau_d = (p.J_xx * v_home
                 + 0.5 * (p.J_yy - p.J_zz) * np.sin(2 * delta)
                 * (s_measured.omega[1] ** 2 - s_measured.omega[2] ** 2))
    tau_d = float(np.clip(tau_d, -g.tau_delta_limit, g.tau_delta_limit))

    c = np.cos(delta)
    md_inputs = MeanDiffInputs(T_m=cs.T0 / c,
                               T_d=M_xy[1] / (2.0 * p.l * c),
                               tau_m=0.5 * M_xy[0],
                               tau_d=tau_d)
    commands = wing_from_mean_diff(md_inputs)

    next_cs = replace(cs, M_xy=M_xy, dM_xy=dM_xy, md_hist=md_hist,
                      steps=cs.steps + 1, last_Md=M_d, last_M=M, last_Me=M_e,
                      last_dMe=dM_e, last_u=u)
    return commands, next_cs


# ---------------------------------------------------------------------------
# Reference generators
# ---------------------------------------------------------------------------

def reference_fixed_axis_sinusoid(t: float, amplitude: float, freq: float,
                                  axis: np.ndarray) -> ReferenceSample:
    """Sinusoidal rotation about a fixed spatial axis.

    theta(t) = amplitude sin(2 pi f t) about the unit axis; for a fixed
    axis the body and spatial angular rates coincide along it.
    """
    n = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(n)
    if norm <= 0.0:
        raise ValueError("axis must be nonzero")
    n = n / norm
    w = 2.0 * np.pi * freq
    theta = amplitude * np.sin(w * t)
    dtheta = amplitude * w * np.cos(w * t)
    ddtheta = -amplitude * w * w * np.sin(w * t)
    return ReferenceSample(R_d=exp_so3(theta * n), omega_d=dtheta * n,
                           domega_d=ddtheta * n)


def _euler312_rate_matrix(roll: float, pitch: float) -> np.ndarray:
    """Body rate = B(roll, pitch) @ [dyaw, droll, dpitch] for the 312 chart."""
    cf, sf = np.cos(roll), np.sin(roll)
    ct, st = np.cos(pitch), np.sin(pitch)
    return np.array([[-st * cf, ct, 0.0],
                     [sf, 0.0, 1.0],
                     [ct * cf, st, 0.0]])


def _euler312_rate_matrix_dot(roll: float, pitch: float, droll: float,
                              dpitch: float) -> np.ndarray:
    cf, sf = np.cos(roll), np.sin(roll)
    ct, st = np.cos(pitch), np.sin(pitch)
    return np.array([
        [-ct * cf * dpitch + st * sf * droll, -st * dpitch, 0.0],
        [cf * droll, 0.0, 0.0],
        [-st * cf * dpitch - ct * sf * droll, ct * dpitch, 0.0],
    ])


class Euler312StickReference:
    """Smoothed pilot-style reference: yaw/roll/pitch stick angles plus a
    pitch trim channel, each passed through a second-order filter so the
    resulting attitude trajectory has continuous rates and accelerations.

    The commanded pitch is stick pitch + trim; sweeping the trim from 0
    to 90 deg produces the hover-to-cruise transition profile.
    """

    def __init__(self, filter_omega: float = 10.0, filter_zeta: float = 1.0,
                 initial: Sequence[float] = (0.0, 0.0, 0.0, 0.0),
                 roll_margin: float = 0.01):
        if filter_omega <= 0.0 or filter_zeta <= 0.0:
            raise ValueError("filter parameters must be positive")
        self.omega = filter_omega
        self.zeta = filter_zeta
        self.roll_margin = roll_margin
        # channels: yaw, roll, pitch-stick, trim
        self.y = np.array(initial, dtype=float)
        self.dy = np.zeros(4)

    def _accel(self, y: np.ndarray, dy: np.ndarray,
               cmd: np.ndarray) -> np.ndarray:
        return self.omega ** 2 * (cmd - y) - 2.0 * self.zeta * self.omega * dy

    def advance(self, yaw_c: float, roll_c: float, pitch_c: float,
                trim_c: float, h: float) -> None:
        """Integrate the smoothing filters over one period (RK4)."""
        cmd = np.array([yaw_c, roll_c, pitch_c, trim_c])
        y, dy = self.y, self.dy
        k1y, k1v = dy, self._accel(y, dy, cmd)
        k2y, k2v = dy + 0.5 * h * k1v, self._accel(y + 0.5 * h * k1y,
                                                   dy + 0.5 * h * k1v, cmd)
        k3y, k3v = dy + 0.5 * h * k2v, self._accel(y + 0.5 * h * k2y,
                                                   dy + 0.5 * h * k2v, cmd)
        k4y, k4v = dy + h * k3v, self._accel(y + h * k3y, dy + h * k3v, cmd)
        self.y = y + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
        self.dy = dy + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)

    def sample(self, yaw_c: float | None = None, roll_c: float | None = None,
               pitch_c: float | None = None, trim_c: float | None = None
               ) -> ReferenceSample:
        """Reference at the current filter state.

        The command arguments are only needed to evaluate the filter
        accelerations; omitted channels reuse the current state (zero
        spring force).
        """
        from .so3 import Euler312, euler312_to_rotation
        from .errors import GimbalLock

        cmd = np.array([
            self.y[0] if yaw_c is None else yaw_c,
            self.y[1] if roll_c is None else roll_c,
            self.y[2] if pitch_c is None else pitch_c,
            self.y[3] if trim_c is None else trim_c,
        ])
        yaw, roll = self.y[0], self.y[1]
        pitch = self.y[2] + self.y[3]
        if abs(roll) >= np.pi / 2 - self.roll_margin:
            raise GimbalLock(f"filtered roll {roll:.4f} rad inside the "
                             f"312 singularity margin")
        dyaw, droll = self.dy[0], self.dy[1]
        dpitch = self.dy[2] + self.dy[3]
        acc = self._accel(self.y, self.dy, cmd)
        ddyaw, ddroll = acc[0], acc[1]
        ddpitch = acc[2] + acc[3]

        R_d = euler312_to_rotation(Euler312(yaw=yaw, roll=roll, pitch=pitch))
        B = _euler312_rate_matrix(roll, pitch)
        Bdot = _euler312_rate_matrix_dot(roll, pitch, droll, dpitch)
        rates = np.array([dyaw, droll, dpitch])
        accs = np.array([ddyaw, ddroll, ddpitch])
        return ReferenceSample(R_d=R_d, omega_d=B @ rates,
                               domega_d=B @ accs + Bdot @ rates)
