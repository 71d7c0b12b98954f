"""Two-wing swivel vehicle: rotational plant model in the bisector frame.

The vehicle is two identical wing bodies joined by a free bearing about
their common X axis; the half swivel angle delta tilts the wings in
opposite directions. States live in Frame-0, the bisector frame, whose
attitude R is the controlled output. The frame is singular at
|delta| = 90 deg, far outside the operating envelope.

Sign convention: R_delta = Rx(+delta) maps Frame-0 components to
Frame-1-parallel components, so Wing-1 sits at +delta and Wing-2 at
-delta about the shared X axis (e_Y of Frame-0 bisects the wing Y axes).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import NonFiniteState, Saturated, SwivelSingularity
from .so3 import hat

GRAVITY = 9.81

# Simulation aborts before the Frame-0 singularity rather than emitting NaNs.
DELTA_GUARD = np.pi / 2 - 0.01


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the vehicle.

    J_xx, J_yy, J_zz are per-wing principal inertias about the combined
    center of mass; l is the moment arm from the center of mass to each
    wing's thrust line (half the wing separation); L the motor separation
    on one wing.
    """
    J_xx: float = 1.111e-2   # kg m^2
    J_yy: float = 1.36e-2    # kg m^2
    J_zz: float = 2.275e-2   # kg m^2
    l: float = 0.21          # m
    L: float = 0.61          # m
    m_total: float = 0.8     # kg
    tau_motor: float = 0.015  # s
    F_max: float = 6.74      # N
    delta_max: float = np.deg2rad(30.0)  # rad, operational swivel bound

    def __post_init__(self):
        for name in ("J_xx", "J_yy", "J_zz", "l", "L", "m_total",
                     "tau_motor", "F_max", "delta_max"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"VehicleParams.{name} must be positive")
        if self.delta_max >= np.pi / 2:
            raise ValueError("delta_max must be below the 90 deg singularity")

    @property
    def nominal_inertia(self) -> np.ndarray:
        """Constant-inertia design model: J at delta = 0."""
        return np.diag([2 * self.J_xx, 2 * self.J_yy, 2 * self.J_zz])

    def scaled(self, factors) -> "VehicleParams":
        """Copy with per-axis inertia multipliers (plant-side uncertainty)."""
        fx, fy, fz = factors
        return VehicleParams(
            J_xx=self.J_xx * fx, J_yy=self.J_yy * fy, J_zz=self.J_zz * fz,
            l=self.l, L=self.L, m_total=self.m_total,
            tau_motor=self.tau_motor, F_max=self.F_max,
            delta_max=self.delta_max)


@dataclass
class VehicleState:
    """Full simulation state: bisector attitude and rates plus swivel and
    first-order motor filter states (motor order: wing1 a/b, wing2 a/b)."""
    R: np.ndarray
    omega: np.ndarray
    delta: float
    ddelta: float
    f_act: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def copy(self) -> "VehicleState":
        return VehicleState(self.R.copy(), self.omega.copy(),
                            self.delta, self.ddelta, self.f_act.copy())


class WingInputs(NamedTuple):
    """Per-wing resultant thrust (N) and torque about the wing X axis (N m)."""
    T1: float
    T2: float
    tau1: float
    tau2: float


class MeanDiffInputs(NamedTuple):
    """Symmetric decomposition of the wing inputs."""
    T_m: float
    T_d: float
    tau_m: float
    tau_d: float


def mean_diff_from_wing(w: WingInputs) -> MeanDiffInputs:
    return MeanDiffInputs(T_m=0.5 * (w.T1 + w.T2), T_d=0.5 * (w.T1 - w.T2),
                          tau_m=0.5 * (w.tau1 + w.tau2),
                          tau_d=0.5 * (w.tau2 - w.tau1))


def wing_from_mean_diff(md: MeanDiffInputs) -> WingInputs:
    return WingInputs(T1=md.T_m + md.T_d, T2=md.T_m - md.T_d,
                      tau1=md.tau_m - md.tau_d, tau2=md.tau_m + md.tau_d)


def _check_delta(delta: float, bound: float = np.pi / 2) -> None:
    if abs(delta) >= bound:
        raise SwivelSingularity(f"|delta| = {abs(delta):.4f} rad >= "
                                f"{bound:.4f} rad")


def inertia_of_delta(delta: float, p: VehicleParams) -> np.ndarray:
    """Equivalent Frame-0 inertia of the two-wing assembly (diagonal)."""
    _check_delta(delta)
    c2, s2 = np.cos(delta) ** 2, np.sin(delta) ** 2
    return np.diag([2 * p.J_xx,
                    2 * c2 * p.J_yy + 2 * s2 * p.J_zz,
                    2 * c2 * p.J_zz + 2 * s2 * p.J_yy])


def inertia_rate(delta: float, ddelta: float, p: VehicleParams) -> np.ndarray:
    """Time derivative of inertia_of_delta along delta(t)."""
    _check_delta(delta)
    s2d = np.sin(2 * delta)
    return np.diag([0.0,
                    2 * ddelta * s2d * (p.J_zz - p.J_yy),
                    2 * ddelta * s2d * (p.J_yy - p.J_zz)])


def control_moment(md: MeanDiffInputs, delta: float, p: VehicleParams) -> np.ndarray:
    """Frame-0 moment produced by the wing inputs:
    (2 tau_m, 2 l T_d cos(delta), -2 l T_m sin(delta))."""
    _check_delta(delta)
    return np.array([2 * md.tau_m,
                     2 * p.l * md.T_d * np.cos(delta),
                     -2 * p.l * md.T_m * np.sin(delta)])


def rotational_derivatives(R: np.ndarray, omega: np.ndarray, delta: float,
                           ddelta: float, w: WingInputs, p: VehicleParams
                           ) -> tuple[np.ndarray, np.ndarray, float]:
    """Torque-level rigid-body derivatives (Rdot, omegadot, dddelta).

    Momentum balance in Frame-0 with the swivel-dependent inertia; the
    swivel acceleration couples back through the inertia difference
    J_yy - J_zz.
    """
    md = mean_diff_from_wing(w)
    J = inertia_of_delta(delta, p)
    Jdot = inertia_rate(delta, ddelta, p)
    M = control_moment(md, delta, p)
    Rdot = R @ hat(omega)
    omegadot = np.linalg.solve(J, M - Jdot @ omega - np.cross(omega, J @ omega))
    dddelta = (2 * md.tau_d - np.sin(2 * delta) * (p.J_yy - p.J_zz)
               * (omega[1] ** 2 - omega[2] ** 2)) / (2 * p.J_xx)
    return Rdot, omegadot, dddelta


def motor_allocation(T_i: float, tau_i: float, p: VehicleParams
                     ) -> tuple[float, float]:
    """Solve the per-wing motor pair: f_a + f_b = T_i, (L/2)(f_a - f_b) = tau_i.

    Raises Saturated (carrying the clipped pair) when either motor falls
    outside [0, F_max].
    """
    f_a = 0.5 * T_i + tau_i / p.L
    f_b = 0.5 * T_i - tau_i / p.L
    if not (0.0 <= f_a <= p.F_max and 0.0 <= f_b <= p.F_max):
        clipped = (float(np.clip(f_a, 0.0, p.F_max)),
                   float(np.clip(f_b, 0.0, p.F_max)))
        raise Saturated(f"motor pair ({f_a:.3f}, {f_b:.3f}) N outside "
                        f"[0, {p.F_max}] N", clipped)
    return f_a, f_b


def allocate_motors(w: WingInputs, p: VehicleParams
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Motor thrusts for both wings (order: wing1 a/b, wing2 a/b).

    Returns (f_raw[4], f_clipped[4], saturated[4]); f_clipped is what the
    motors can actually be commanded, saturated flags the infeasible ones.
    """
    f_raw = np.empty(4)
    for k, (T, tau) in enumerate(((w.T1, w.tau1), (w.T2, w.tau2))):
        f_raw[2 * k] = 0.5 * T + tau / p.L
        f_raw[2 * k + 1] = 0.5 * T - tau / p.L
    f_clipped = np.clip(f_raw, 0.0, p.F_max)
    sat = (f_raw < 0.0) | (f_raw > p.F_max)
    return f_raw, f_clipped, sat


def wing_inputs_from_motors(f: np.ndarray, p: VehicleParams) -> WingInputs:
    """Resultant per-wing thrust/torque realized by motor thrusts f[4]."""
    return WingInputs(T1=f[0] + f[1], T2=f[2] + f[3],
                      tau1=0.5 * p.L * (f[0] - f[1]),
                      tau2=0.5 * p.L * (f[2] - f[3]))


def motor_lag_deriv(f_act: np.ndarray, f_cmd: np.ndarray,
                    tau_motor: float) -> np.ndarray:
    """First-order motor response toward the (pre-clipped) command."""
    if tau_motor <= 0.0:
        raise ValueError("tau_motor must be positive")
    return (f_cmd - f_act) / tau_motor


def dynamics_deriv(s: VehicleState, w: WingInputs, p: VehicleParams
                   ) -> tuple[np.ndarray, np.ndarray, float, float, np.ndarray]:
    """Full plant derivative (Rdot, omegadot, ddelta, dddelta, f_act_dot).

    The commanded wing inputs are allocated to motors, clipped to the
    force limits, and passed through the first-order lag; the rigid-body
    torques come from the actual (lagged) motor thrusts.
    """
    if not (np.isfinite(s.omega).all() and np.isfinite(s.R).all()
            and np.isfinite(s.delta) and np.isfinite(s.ddelta)
            and np.isfinite(s.f_act).all()):
        raise NonFiniteState("non-finite vehicle state")
    _check_delta(s.delta, DELTA_GUARD)
    _, f_cmd, _ = allocate_motors(w, p)
    f_dot = motor_lag_deriv(s.f_act, f_cmd, p.tau_motor)
    w_eff = wing_inputs_from_motors(s.f_act, p)
    Rdot, omegadot, dddelta = rotational_derivatives(
        s.R, s.omega, s.delta, s.ddelta, w_eff, p)
    return Rdot, omegadot, s.ddelta, dddelta, f_dot


def total_angular_momentum(s: VehicleState, p: VehicleParams) -> np.ndarray:
    """Inertial-frame angular momentum R J(delta) omega about the center
    of mass; conserved under zero inputs."""
    return s.R @ (inertia_of_delta(s.delta, p) @ s.omega)


def rotational_energy(s: VehicleState, p: VehicleParams) -> float:
    """Kinetic energy of the two-wing rotation,
    0.5 omega^T J(delta) omega + J_xx ddelta^2."""
    J = inertia_of_delta(s.delta, p)
    return float(0.5 * s.omega @ (J @ s.omega) + p.J_xx * s.ddelta ** 2)
