"""Fixed-step closed-loop simulation: multirate controller/plant loop,
measurement noise injection, telemetry, metrics, and parameter sweeps.

The controller runs at its own period on the measured (noisy) state and
its outputs are held constant between ticks; the plant integrates with
classical RK4 at a finer step, with the attitude re-orthonormalized
after every step. Runs are deterministic for a given scenario and seed.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .controller import (Euler312StickReference, ReferenceSample,
                         controller_step, init_controller_state,
                         reference_fixed_axis_sinusoid)
from .errors import GimbalLock, NonFiniteState, SwivelSingularity
from .scenario import Scenario, StickPoint, set_scenario_param
from .so3 import config_error_psi, orthonormalize, rotation_to_euler312
from .stability import ErrorState, lyapunov_rate, lyapunov_value
from .vehicle import (DELTA_GUARD, VehicleParams, VehicleState,
                      allocate_motors, motor_lag_deriv,
                      rotational_derivatives, wing_inputs_from_motors)

PSI_SETTLE_THRESHOLD = 0.01
PEAK_TRANSIENT_SKIP = 0.1  # s excluded from the peak-thrust metric


def rk4_step(y: np.ndarray, deriv: Callable[[np.ndarray], np.ndarray],
             h: float) -> np.ndarray:
    """One classical Runge-Kutta step for a flat state vector."""
    if h <= 0.0:
        raise ValueError("step size must be positive")
    k1 = deriv(y)
    k2 = deriv(y + 0.5 * h * k1)
    k3 = deriv(y + 0.5 * h * k2)
    k4 = deriv(y + h * k3)
    out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(out).all():
        raise NonFiniteState("integration produced a non-finite state")
    return out


# ---------------------------------------------------------------------------
# Plant stepping (flat layout: R[9], omega[3], delta, ddelta, f_act[4])
# ---------------------------------------------------------------------------

def _pack(s: VehicleState) -> np.ndarray:
    return np.concatenate([s.R.reshape(9), s.omega,
                           [s.delta, s.ddelta], s.f_act])


def _unpack(y: np.ndarray) -> VehicleState:
    return VehicleState(R=y[0:9].reshape(3, 3).copy(), omega=y[9:12].copy(),
                        delta=float(y[12]), ddelta=float(y[13]),
                        f_act=y[14:18].copy())


def _plant_deriv(y: np.ndarray, f_cmd: np.ndarray,
                 p: VehicleParams) -> np.ndarray:
    R = y[0:9].reshape(3, 3)
    omega = y[9:12]
    delta = float(y[12])
    ddelta = float(y[13])
    f_act = y[14:18]
    if abs(delta) >= DELTA_GUARD:
        raise SwivelSingularity(f"|delta| = {abs(delta):.4f} rad at the "
                                f"integration guard")
    w_eff = wing_inputs_from_motors(f_act, p)
    Rdot, omegadot, dddelta = rotational_derivatives(R, omega, delta, ddelta,
                                                     w_eff, p)
    dy = np.empty(18)
    dy[0:9] = Rdot.reshape(9)
    dy[9:12] = omegadot
    dy[12] = ddelta
    dy[13] = dddelta
    dy[14:18] = motor_lag_deriv(f_act, f_cmd, p.tau_motor)
    return dy


def plant_step(s: VehicleState, f_cmd: np.ndarray, p: VehicleParams,
               h: float) -> VehicleState:
    """Advance the plant by one RK4 step under held motor commands and
    re-orthonormalize the attitude."""
    y = rk4_step(_pack(s), lambda v: _plant_deriv(v, f_cmd, p), h)
    out = _unpack(y)
    out.R = orthonormalize(out.R)
    return out


# ---------------------------------------------------------------------------
# Disturbances
# ---------------------------------------------------------------------------

def inject_measurement_noise(s: VehicleState, sigma: float,
                             rng: np.random.Generator) -> VehicleState:
    """Gyro-style noise: zero-mean Gaussian on omega and ddelta; the
    configuration states R and delta are left untouched."""
    if sigma < 0.0:
        raise ValueError("noise standard deviation must be >= 0")
    if sigma == 0.0:
        return s
    draws = rng.standard_normal(4)
    return VehicleState(R=s.R, omega=s.omega + sigma * draws[:3],
                        delta=s.delta, ddelta=s.ddelta + sigma * draws[3],
                        f_act=s.f_act)


# ---------------------------------------------------------------------------
# Reference driver
# ---------------------------------------------------------------------------

def _script_command(script: Sequence[StickPoint], t: float,
                    interp: str) -> tuple[float, float, float, float]:
    if not script:
        return 0.0, 0.0, 0.0, 0.0

    def as_rad(p: StickPoint):
        return (math.radians(p.yaw_deg), math.radians(p.roll_deg),
                math.radians(p.pitch_deg), math.radians(p.trim_deg))

    if t <= script[0].t:
        return as_rad(script[0])
    if t >= script[-1].t:
        return as_rad(script[-1])
    hi = next(i for i, p in enumerate(script) if p.t > t)
    lo = hi - 1
    if interp == "hold":
        return as_rad(script[lo])
    a, b = as_rad(script[lo]), as_rad(script[hi])
    span = script[hi].t - script[lo].t
    w = (t - script[lo].t) / span if span > 0 else 1.0
    return tuple((1 - w) * x + w * y for x, y in zip(a, b))


def make_reference_driver(sc: Scenario) -> Callable[[float], ReferenceSample]:
    """Per-tick reference sampler for a scenario. The stick variant is
    stateful (smoothing filters) and must be called at consecutive
    controller ticks, which is how run_scenario drives it."""
    ref = sc.reference
    if ref.kind == "fixed_axis_sinusoid":
        amp = math.radians(ref.amplitude_deg)
        freq = ref.frequency_hz
        axis = np.array(ref.axis)
        return lambda t: reference_fixed_axis_sinusoid(t, amp, freq, axis)

    gen = Euler312StickReference(filter_omega=ref.filter_omega,
                                 filter_zeta=ref.filter_zeta,
                                 initial=_script_command(ref.script, 0.0,
                                                         ref.interp))
    period = sc.controller_period

    def sample(t: float) -> ReferenceSample:
        cmd = _script_command(ref.script, t, ref.interp)
        out = gen.sample(*cmd)
        gen.advance(*cmd, period)
        return out

    return sample


# ---------------------------------------------------------------------------
# Telemetry
# ---------------------------------------------------------------------------

TELEMETRY_COLUMNS = (
    "t", "eul_psi", "eul_phi", "eul_theta",
    "eul_psi_d", "eul_phi_d", "eul_theta_d",
    "wx", "wy", "wz", "delta", "ddelta",
    "Mx", "My", "Mz", "Mdx", "Mdy", "Mdz",
    "f1_cmd", "f2_cmd", "f3_cmd", "f4_cmd",
    "f1_act", "f2_act", "f3_act", "f4_act",
    "psi_err", "V", "Vdot", "sat_flags",
)


@dataclass
class TelemetryRecord:
    t: float
    eul: tuple[float, float, float]      # yaw, roll, pitch of R (rad)
    eul_d: tuple[float, float, float]    # same for R_d
    omega: np.ndarray
    delta: float
    ddelta: float
    M: np.ndarray                        # extension x/y + physical z moment
    M_d: np.ndarray
    f_cmd: np.ndarray                    # raw allocation output (pre-clip)
    f_act: np.ndarray
    psi_err: float
    V: float
    Vdot: float
    sat_flags: int

    def row(self) -> list[float]:
        return [self.t, *self.eul, *self.eul_d, *self.omega, self.delta,
                self.ddelta, *self.M, *self.M_d, *self.f_cmd, *self.f_act,
                self.psi_err, self.V, self.Vdot, self.sat_flags]


def _euler_or_nan(R: np.ndarray) -> tuple[float, float, float]:
    try:
        e = rotation_to_euler312(R)
        return e.yaw, e.roll, e.pitch
    except GimbalLock:
        return (math.nan, math.nan, math.nan)


def write_telemetry(records: Sequence[TelemetryRecord], path: str) -> None:
    """CSV with the documented fixed column order; floats are written as
    their shortest round-trip decimals."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TELEMETRY_COLUMNS) + "\n")
        for rec in records:
            row = rec.row()
            fh.write(",".join(repr(float(x)) if i < len(row) - 1
                              else str(int(x))
                              for i, x in enumerate(row)) + "\n")


def telemetry_column(records: Sequence[TelemetryRecord],
                     name: str) -> np.ndarray:
    idx = TELEMETRY_COLUMNS.index(name)
    return np.array([rec.row()[idx] for rec in records], dtype=float)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass
class MetricsSummary:
    status: str                    # ok | singularity | nonfinite
    halted_at: float | None
    settling_time: float | None    # first t after which psi stays < 0.01
    peak_motor_cmd: float          # after the 0.1 s transient
    peak_motor_cmd_full: float
    saturation_duty: float         # clipped samples / (4 * ticks)
    final_psi: float
    final_omega_err: float

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "halted_at": self.halted_at,
            "settling_time": self.settling_time,
            "peak_motor_cmd": self.peak_motor_cmd,
            "peak_motor_cmd_full": self.peak_motor_cmd_full,
            "saturation_duty": self.saturation_duty,
            "final_psi": self.final_psi,
            "final_omega_err": self.final_omega_err,
        }


def write_metrics(metrics: MetricsSummary, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass
class SimResult:
    records: list[TelemetryRecord]
    metrics: MetricsSummary
    final_state: VehicleState
    wall_time: float


def _compute_metrics(records: list[TelemetryRecord], status: str,
                     halted_at: float | None,
                     final_omega_err: float) -> MetricsSummary:
    if not records:
        return MetricsSummary(status=status, halted_at=halted_at,
                              settling_time=None, peak_motor_cmd=0.0,
                              peak_motor_cmd_full=0.0, saturation_duty=0.0,
                              final_psi=math.nan,
                              final_omega_err=final_omega_err)
    psi = np.array([r.psi_err for r in records])
    ts = np.array([r.t for r in records])
    settled = None
    if status == "ok":
        above = np.nonzero(psi >= PSI_SETTLE_THRESHOLD)[0]
        if above.size == 0:
            settled = float(ts[0])
        elif above[-1] + 1 < len(ts):
            settled = float(ts[above[-1] + 1])
    f_cmd = np.array([r.f_cmd for r in records])
    late = ts >= PEAK_TRANSIENT_SKIP
    peak_late = float(np.max(f_cmd[late])) if late.any() else float("nan")
    n_sat = sum(bin(r.sat_flags).count("1") for r in records)
    return MetricsSummary(
        status=status, halted_at=halted_at, settling_time=settled,
        peak_motor_cmd=peak_late, peak_motor_cmd_full=float(np.max(f_cmd)),
        saturation_duty=n_sat / (4.0 * len(records)),
        final_psi=float(psi[-1]), final_omega_err=final_omega_err)


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------

def run_scenario(sc: Scenario, seed: int | None = None) -> SimResult:
    """Run the closed loop described by a scenario.

    Deterministic for a given (scenario, seed); the optional seed argument
    overrides the scenario's. Structured runtime failures (swivel
    singularity, non-finite state) end the run gracefully with the fault
    recorded in the metrics.
    """
    p_nom = sc.vehicle_params()
    p_plant = sc.plant_params()
    gains = sc.control_gains()
    J_nom = p_nom.nominal_inertia
    state = sc.initial_state()
    cs = init_controller_state(sc.T0)
    ref_at = make_reference_driver(sc)
    rng = np.random.Generator(np.random.PCG64(sc.seed if seed is None
                                              else seed))
    sigma = sc.disturbance.gyro_noise_std
    motor_lag = sc.disturbance.motor_lag
    period = sc.controller_period
    n_sub = sc.steps_per_tick()
    n_ticks = int(round(sc.duration / period))

    records: list[TelemetryRecord] = []
    status, halted_at = "ok", None
    t = 0.0
    t_start = time.perf_counter()

    for k in range(n_ticks):
        t = k * period
        ref = ref_at(t)
        try:
            measured = inject_measurement_noise(state, sigma, rng)
            commands, cs = controller_step(measured, ref, cs, gains, p_nom,
                                           period)
            f_raw, f_clip, sat = allocate_motors(commands, p_nom)
            if not motor_lag:
                state.f_act = f_clip.copy()

            R_e = ref.R_d.T @ state.R
            e_omega = state.omega - R_e.T @ ref.omega_d
            err = ErrorState(R_e, e_omega, cs.last_Me, cs.last_dMe)
            records.append(TelemetryRecord(
                t=t, eul=_euler_or_nan(state.R), eul_d=_euler_or_nan(ref.R_d),
                omega=state.omega.copy(), delta=state.delta,
                ddelta=state.ddelta, M=cs.last_M.copy(),
                M_d=cs.last_Md.copy(), f_cmd=f_raw, f_act=state.f_act.copy(),
                psi_err=config_error_psi(R_e, gains.P),
                V=lyapunov_value(err, gains, J_nom),
                Vdot=lyapunov_rate(err, gains, J_nom),
                sat_flags=int(np.sum(sat * (1 << np.arange(4))))))

            for _ in range(n_sub):
                state = plant_step(state, f_clip, p_plant, sc.plant_step)
        except SwivelSingularity:
            status, halted_at = "singularity", t
            break
        except NonFiniteState:
            status, halted_at = "nonfinite", t
            break

    wall = time.perf_counter() - t_start
    final_ref = ref_at(n_ticks * period) if status == "ok" else None
    if final_ref is not None:
        R_e = final_ref.R_d.T @ state.R
        omega_err = float(np.linalg.norm(
            state.omega - R_e.T @ final_ref.omega_d))
    else:
        omega_err = math.nan
    metrics = _compute_metrics(records, status, halted_at, omega_err)
    return SimResult(records=records, metrics=metrics, final_state=state,
                     wall_time=wall)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    param: str
    value: float
    seed: int
    metrics: MetricsSummary


def sweep(sc: Scenario, param: str, values: Sequence[float]) -> list[SweepRow]:
    """Independent runs over a scalar parameter; run i uses seed
    base_seed + i so the family stays reproducible."""
    rows = []
    for i, value in enumerate(values):
        modified = set_scenario_param(sc, param, value)
        modified = replace(modified, seed=sc.seed + i)
        result = run_scenario(modified)
        rows.append(SweepRow(param=param, value=value, seed=sc.seed + i,
                             metrics=result.metrics))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    header = ("param,value,seed,status,settling_time,peak_motor_cmd,"
              "saturation_duty,final_psi")
    lines = [header]
    for r in rows:
        m = r.metrics
        lines.append(",".join([
            r.param, repr(float(r.value)), str(r.seed), m.status,
            "" if m.settling_time is None else repr(m.settling_time),
            repr(m.peak_motor_cmd), repr(m.saturation_duty),
            repr(m.final_psi)]))
    return "\n".join(lines) + "\n"
