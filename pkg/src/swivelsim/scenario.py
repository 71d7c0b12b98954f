"""Scenario files: schema, strict parsing with field/line diagnostics,
canonical serialization, and sweep parameter addressing.

A scenario is one human-readable YAML mapping. Angles in the file use
degree-suffixed keys; everything else is SI. Unknown keys are rejected.
The config layer mirrors the file exactly (so parse -> serialize is a
fixed point); builder methods produce the runtime objects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from .controller import ControlGains
from .errors import ParseError, UnknownParameter
from .so3 import Euler312, euler312_to_rotation
from .vehicle import GRAVITY, VehicleParams, VehicleState

RNG_ALGORITHM = "pcg64"  # the one documented/supported generator


@dataclass(frozen=True)
class InitialConfig:
    attitude_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)  # yaw, roll, pitch
    omega: tuple[float, float, float] = (0.0, 0.0, 0.0)         # rad/s
    delta_deg: float = 0.0
    ddelta: float = 0.0                                         # rad/s


@dataclass(frozen=True)
class StickPoint:
    t: float
    yaw_deg: float = 0.0
    roll_deg: float = 0.0
    pitch_deg: float = 0.0
    trim_deg: float = 0.0


@dataclass(frozen=True)
class ReferenceConfig:
    kind: str = "euler312_stick"
    # fixed_axis_sinusoid
    amplitude_deg: float = 40.0
    frequency_hz: float = 1.0
    axis: tuple[float, float, float] = (1.0, 1.0, 1.0)
    # euler312_stick
    filter_omega: float = 10.0
    filter_zeta: float = 1.0
    interp: str = "hold"
    script: tuple[StickPoint, ...] = ()


@dataclass(frozen=True)
class GainsConfig:
    k_R: float = 1.6
    k_omega: float = 0.7
    P: tuple[float, float, float] = (1.0, 2.0, 3.0)
    zeta: tuple[float, float, float] = (1.1, 1.1, 1.1)
    Omega: tuple[float, float, float] = (40.0, 40.0, 18.0)
    Md_limit: tuple[float, float, float] = (2.2, 1.3, 1.3)
    tau_delta_limit: float = 1.6
    delta_protect_deg: float = 50.0


@dataclass(frozen=True)
class VehicleConfig:
    J: tuple[float, float, float] = (1.111e-2, 1.36e-2, 2.275e-2)
    l: float = 0.21
    L: float = 0.61
    mass: float = 0.8
    motor_tau: float = 0.015
    F_max: float = 6.74
    delta_max_deg: float = 30.0


@dataclass(frozen=True)
class DisturbanceConfig:
    inertia_scale: tuple[float, float, float] = (1.0, 1.0, 1.0)
    gyro_noise_std: float = 0.0
    motor_lag: bool = False


@dataclass(frozen=True)
class Scenario:
    duration: float = 10.0
    plant_step: float = 1e-3
    controller_period: float = 4e-3
    seed: int = 0
    rng: str = RNG_ALGORITHM
    T0: float = 0.5 * 0.8 * GRAVITY
    initial: InitialConfig = field(default_factory=InitialConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    gains: GainsConfig = field(default_factory=GainsConfig)
    vehicle: VehicleConfig = field(default_factory=VehicleConfig)
    disturbance: DisturbanceConfig = field(default_factory=DisturbanceConfig)

    # -- runtime builders -------------------------------------------------

    def vehicle_params(self) -> VehicleParams:
        v = self.vehicle
        return VehicleParams(J_xx=v.J[0], J_yy=v.J[1], J_zz=v.J[2], l=v.l,
                             L=v.L, m_total=v.mass, tau_motor=v.motor_tau,
                             F_max=v.F_max,
                             delta_max=math.radians(v.delta_max_deg))

    def plant_params(self) -> VehicleParams:
        """Vehicle parameters as the plant integrates them (inertia scaled)."""
        return self.vehicle_params().scaled(self.disturbance.inertia_scale)

    def control_gains(self) -> ControlGains:
        g = self.gains
        return ControlGains(k_R=g.k_R, k_omega=g.k_omega, P=np.diag(g.P),
                            zeta=g.zeta, Omega=g.Omega,
                            Md_limit=g.Md_limit,
                            tau_delta_limit=g.tau_delta_limit,
                            delta_protect=math.radians(g.delta_protect_deg))

    def initial_state(self) -> VehicleState:
        i = self.initial
        R = euler312_to_rotation(Euler312(yaw=math.radians(i.attitude_deg[0]),
                                          roll=math.radians(i.attitude_deg[1]),
                                          pitch=math.radians(i.attitude_deg[2])))
        # motors start at the symmetric hover split so an error-free
        # scenario is an exact equilibrium
        return VehicleState(R=R, omega=np.array(i.omega, dtype=float),
                            delta=math.radians(i.delta_deg), ddelta=i.ddelta,
                            f_act=np.full(4, 0.5 * self.T0))

    def steps_per_tick(self) -> int:
        return int(round(self.controller_period / self.plant_step))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _collect_marks(node, path, marks) -> None:
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            if isinstance(k, yaml.ScalarNode):
                child = path + (str(k.value),)
                marks[child] = k.start_mark.line + 1
                _collect_marks(v, child, marks)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            child = path + (i,)
            marks[child] = v.start_mark.line + 1
            _collect_marks(v, child, marks)


class _Validator:
    def __init__(self, data: dict, marks: dict):
        self.data = data
        self.marks = marks

    def fail(self, path: tuple, reason: str):
        name = ".".join(str(p) for p in path) if path else "document"
        raise ParseError(name, reason, self.marks.get(path))

    def mapping(self, path: tuple, allowed: set[str]) -> dict:
        node = self._resolve(path)
        if node is None:
            return {}
        if not isinstance(node, dict):
            self.fail(path, "expected a mapping")
        for key in node:
            if key not in allowed:
                self.fail(path + (key,), f"unknown key (allowed: "
                          f"{', '.join(sorted(allowed))})")
        return node

    def _resolve(self, path: tuple):
        node = self.data
        for p in path:
            if isinstance(node, dict) and p in node:
                node = node[p]
            elif isinstance(node, list) and isinstance(p, int) \
                    and 0 <= p < len(node):
                node = node[p]
            else:
                return None
        return node

    def number(self, path: tuple, default: float, *, positive=False,
               nonnegative=False, lo=None, hi=None) -> float:
        node = self._resolve(path)
        if node is None:
            value = default
        else:
            if isinstance(node, bool) or not isinstance(node, (int, float)):
                self.fail(path, "expected a number")
            value = float(node)
        if not math.isfinite(value):
            self.fail(path, "must be finite")
        if positive and value <= 0.0:
            self.fail(path, "must be positive")
        if nonnegative and value < 0.0:
            self.fail(path, "must be >= 0")
        if lo is not None and value < lo:
            self.fail(path, f"must be >= {lo}")
        if hi is not None and value > hi:
            self.fail(path, f"must be <= {hi}")
        return value

    def integer(self, path: tuple, default: int, *, nonnegative=True) -> int:
        node = self._resolve(path)
        if node is None:
            return default
        if isinstance(node, bool) or not isinstance(node, int):
            self.fail(path, "expected an integer")
        if nonnegative and node < 0:
            self.fail(path, "must be >= 0")
        return node

    def boolean(self, path: tuple, default: bool) -> bool:
        node = self._resolve(path)
        if node is None:
            return default
        if not isinstance(node, bool):
            self.fail(path, "expected true or false")
        return node

    def choice(self, path: tuple, default: str, options: tuple[str, ...]) -> str:
        node = self._resolve(path)
        if node is None:
            return default
        if not isinstance(node, str) or node not in options:
            self.fail(path, f"expected one of {options}")
        return node

    def vec3(self, path: tuple, default: tuple, *, positive=False,
             lo=None, hi=None, broadcast_scalar=False) -> tuple:
        node = self._resolve(path)
        if node is None:
            return tuple(float(x) for x in default)
        if broadcast_scalar and isinstance(node, (int, float)) \
                and not isinstance(node, bool):
            node = [node, node, node]
        if not isinstance(node, list) or len(node) != 3:
            self.fail(path, "expected a list of 3 numbers")
        out = []
        for i, x in enumerate(node):
            if isinstance(x, bool) or not isinstance(x, (int, float)) \
                    or not math.isfinite(float(x)):
                self.fail(path + (i,), "expected a finite number")
            if positive and x <= 0:
                self.fail(path + (i,), "must be positive")
            if lo is not None and x < lo:
                self.fail(path + (i,), f"must be >= {lo}")
            if hi is not None and x > hi:
                self.fail(path + (i,), f"must be <= {hi}")
            out.append(float(x))
        return tuple(out)


_TOP_KEYS = {"duration", "plant_step", "controller_period", "seed", "rng",
             "T0", "initial", "reference", "gains", "vehicle", "disturbance"}
_REF_COMMON = {"type"}
_REF_SIN = _REF_COMMON | {"amplitude_deg", "frequency_hz", "axis"}
_REF_STICK = _REF_COMMON | {"filter_omega", "filter_zeta", "interp", "script"}


def scenario_from_dict(data: Any, marks: dict | None = None) -> Scenario:
    """Validate a parsed YAML document and build the Scenario."""
    marks = marks or {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ParseError("document", "scenario must be a mapping",
                         marks.get(()))
    v = _Validator(data, marks)
    v.mapping((), _TOP_KEYS)

    duration = v.number(("duration",), 10.0, positive=True)
    plant_step = v.number(("plant_step",), 1e-3, positive=True)
    period = v.number(("controller_period",), 4e-3, positive=True)
    ratio = period / plant_step
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        v.fail(("plant_step",),
               f"must divide controller_period (ratio {ratio:.6g})")
    seed = v.integer(("seed",), 0)
    rng = v.choice(("rng",), RNG_ALGORITHM, (RNG_ALGORITHM,))

    veh = v.mapping(("vehicle",), {"J", "l", "L", "mass", "motor_tau",
                                   "F_max", "delta_max_deg"})
    vehicle = VehicleConfig(
        J=v.vec3(("vehicle", "J"), VehicleConfig.J, positive=True),
        l=v.number(("vehicle", "l"), VehicleConfig.l, positive=True),
        L=v.number(("vehicle", "L"), VehicleConfig.L, positive=True),
        mass=v.number(("vehicle", "mass"), VehicleConfig.mass, positive=True),
        motor_tau=v.number(("vehicle", "motor_tau"), VehicleConfig.motor_tau,
                           positive=True),
        F_max=v.number(("vehicle", "F_max"), VehicleConfig.F_max, positive=True),
        delta_max_deg=v.number(("vehicle", "delta_max_deg"),
                               VehicleConfig.delta_max_deg, positive=True,
                               hi=89.0))
    del veh

    T0 = v.number(("T0",), 0.5 * vehicle.mass * GRAVITY, positive=True)

    v.mapping(("initial",), {"attitude_euler312_deg", "omega", "delta_deg",
                             "ddelta"})
    initial = InitialConfig(
        attitude_deg=v.vec3(("initial", "attitude_euler312_deg"),
                            InitialConfig.attitude_deg),
        omega=v.vec3(("initial", "omega"), InitialConfig.omega),
        delta_deg=v.number(("initial", "delta_deg"), 0.0, lo=-89.0, hi=89.0),
        ddelta=v.number(("initial", "ddelta"), 0.0))
    if abs(initial.attitude_deg[1]) >= 90.0:
        v.fail(("initial", "attitude_euler312_deg", 1),
               "roll must stay inside the 312 chart (|roll| < 90 deg)")

    kind = v.choice(("reference", "type"), "euler312_stick",
                    ("fixed_axis_sinusoid", "euler312_stick"))
    allowed = _REF_SIN if kind == "fixed_axis_sinusoid" else _REF_STICK
    v.mapping(("reference",), allowed)
    script: list[StickPoint] = []
    if kind == "euler312_stick":
        raw = v._resolve(("reference", "script"))
        if raw is not None:
            if not isinstance(raw, list):
                v.fail(("reference", "script"), "expected a list of setpoints")
            prev_t = -math.inf
            for i, _ in enumerate(raw):
                v.mapping(("reference", "script", i),
                          {"t", "yaw_deg", "roll_deg", "pitch_deg", "trim_deg"})
                pt = StickPoint(
                    t=v.number(("reference", "script", i, "t"), 0.0,
                               nonnegative=True),
                    yaw_deg=v.number(("reference", "script", i, "yaw_deg"), 0.0),
                    roll_deg=v.number(("reference", "script", i, "roll_deg"),
                                      0.0, lo=-85.0, hi=85.0),
                    pitch_deg=v.number(("reference", "script", i, "pitch_deg"),
                                       0.0),
                    trim_deg=v.number(("reference", "script", i, "trim_deg"),
                                      0.0))
                if pt.t < prev_t:
                    v.fail(("reference", "script", i, "t"),
                           "script times must be non-decreasing")
                prev_t = pt.t
                script.append(pt)
    axis = v.vec3(("reference", "axis"), ReferenceConfig.axis)
    if kind == "fixed_axis_sinusoid" and all(x == 0.0 for x in axis):
        v.fail(("reference", "axis"), "axis must be nonzero")
    reference = ReferenceConfig(
        kind=kind,
        amplitude_deg=v.number(("reference", "amplitude_deg"),
                               ReferenceConfig.amplitude_deg),
        frequency_hz=v.number(("reference", "frequency_hz"),
                              ReferenceConfig.frequency_hz, nonnegative=True),
        axis=axis,
        filter_omega=v.number(("reference", "filter_omega"),
                              ReferenceConfig.filter_omega, positive=True),
        filter_zeta=v.number(("reference", "filter_zeta"),
                             ReferenceConfig.filter_zeta, positive=True),
        interp=v.choice(("reference", "interp"), "hold", ("hold", "linear")),
        script=tuple(script))

    v.mapping(("gains",), {"k_R", "k_omega", "P", "zeta", "Omega",
                           "Md_limit", "tau_delta_limit",
                           "delta_protect_deg"})
    P = v.vec3(("gains", "P"), GainsConfig.P, positive=True)
    if min(abs(P[0] - P[1]), abs(P[0] - P[2]), abs(P[1] - P[2])) <= 1e-9:
        v.fail(("gains", "P"), "error-gain eigenvalues must be distinct")
    gains = GainsConfig(
        k_R=v.number(("gains", "k_R"), GainsConfig.k_R, positive=True),
        k_omega=v.number(("gains", "k_omega"), GainsConfig.k_omega,
                         positive=True),
        P=P,
        zeta=v.vec3(("gains", "zeta"), GainsConfig.zeta, positive=True),
        Omega=v.vec3(("gains", "Omega"), GainsConfig.Omega, positive=True),
        Md_limit=v.vec3(("gains", "Md_limit"), GainsConfig.Md_limit,
                        positive=True),
        tau_delta_limit=v.number(("gains", "tau_delta_limit"),
                                 GainsConfig.tau_delta_limit, positive=True),
        delta_protect_deg=v.number(("gains", "delta_protect_deg"),
                                   GainsConfig.delta_protect_deg,
                                   positive=True, hi=85.0))

    v.mapping(("disturbance",), {"inertia_scale", "gyro_noise_std",
                                 "motor_lag"})
    disturbance = DisturbanceConfig(
        inertia_scale=v.vec3(("disturbance", "inertia_scale"),
                             DisturbanceConfig.inertia_scale, lo=0.9, hi=1.1,
                             broadcast_scalar=True),
        gyro_noise_std=v.number(("disturbance", "gyro_noise_std"), 0.0,
                                nonnegative=True),
        motor_lag=v.boolean(("disturbance", "motor_lag"), False))

    return Scenario(duration=duration, plant_step=plant_step,
                    controller_period=period, seed=seed, rng=rng, T0=T0,
                    initial=initial, reference=reference, gains=gains,
                    vehicle=vehicle, disturbance=disturbance)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document (strict: unknown keys and
    out-of-range values are rejected with field/line diagnostics)."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        line = None
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            line = mark.line + 1
        raise ParseError("document", f"invalid YAML: {exc}", line) from exc
    marks: dict = {}
    if node is not None:
        marks[()] = node.start_mark.line + 1
        _collect_marks(node, (), marks)
    return scenario_from_dict(data, marks)


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# ---------------------------------------------------------------------------
# Canonical serialization and sweep parameter paths
# ---------------------------------------------------------------------------

def scenario_to_dict(sc: Scenario) -> dict:
    """Canonical mapping with every default materialized."""
    d: dict[str, Any] = {
        "duration": sc.duration,
        "plant_step": sc.plant_step,
        "controller_period": sc.controller_period,
        "seed": sc.seed,
        "rng": sc.rng,
        "T0": sc.T0,
        "initial": {
            "attitude_euler312_deg": list(sc.initial.attitude_deg),
            "omega": list(sc.initial.omega),
            "delta_deg": sc.initial.delta_deg,
            "ddelta": sc.initial.ddelta,
        },
        "gains": {
            "k_R": sc.gains.k_R,
            "k_omega": sc.gains.k_omega,
            "P": list(sc.gains.P),
            "zeta": list(sc.gains.zeta),
            "Omega": list(sc.gains.Omega),
            "Md_limit": list(sc.gains.Md_limit),
            "tau_delta_limit": sc.gains.tau_delta_limit,
            "delta_protect_deg": sc.gains.delta_protect_deg,
        },
        "vehicle": {
            "J": list(sc.vehicle.J),
            "l": sc.vehicle.l,
            "L": sc.vehicle.L,
            "mass": sc.vehicle.mass,
            "motor_tau": sc.vehicle.motor_tau,
            "F_max": sc.vehicle.F_max,
            "delta_max_deg": sc.vehicle.delta_max_deg,
        },
        "disturbance": {
            "inertia_scale": list(sc.disturbance.inertia_scale),
            "gyro_noise_std": sc.disturbance.gyro_noise_std,
            "motor_lag": sc.disturbance.motor_lag,
        },
    }
    if sc.reference.kind == "fixed_axis_sinusoid":
        d["reference"] = {
            "type": sc.reference.kind,
            "amplitude_deg": sc.reference.amplitude_deg,
            "frequency_hz": sc.reference.frequency_hz,
            "axis": list(sc.reference.axis),
        }
    else:
        d["reference"] = {
            "type": sc.reference.kind,
            "filter_omega": sc.reference.filter_omega,
            "filter_zeta": sc.reference.filter_zeta,
            "interp": sc.reference.interp,
            "script": [{
                "t": p.t, "yaw_deg": p.yaw_deg, "roll_deg": p.roll_deg,
                "pitch_deg": p.pitch_deg, "trim_deg": p.trim_deg,
            } for p in sc.reference.script],
        }
    return d


def serialize_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False,
                          default_flow_style=None)


def set_scenario_param(sc: Scenario, path: str, value: float) -> Scenario:
    """Return a copy of the scenario with one scalar field replaced.

    The path is dot-separated over the canonical document, with numeric
    segments indexing lists (e.g. "gains.k_R", "disturbance.inertia_scale",
    "disturbance.inertia_scale.1"). Raises UnknownParameter when the path
    does not address a scalar field.
    """
    data = scenario_to_dict(sc)
    segments = path.split(".") if path else []
    if not segments:
        raise UnknownParameter("empty parameter path")
    node: Any = data
    trail = []
    for seg in segments[:-1]:
        trail.append(seg)
        if isinstance(node, dict) and seg in node:
            node = node[seg]
        elif isinstance(node, list) and seg.isdigit() and int(seg) < len(node):
            node = node[int(seg)]
        else:
            raise UnknownParameter(f"no such field: {'.'.join(trail)}")
    last = segments[-1]
    if isinstance(node, dict) and last in node:
        current = node[last]
        if isinstance(current, dict):
            raise UnknownParameter(f"{path} is a section, not a scalar field")
        if isinstance(current, list) and last != "inertia_scale":
            raise UnknownParameter(f"{path} is a vector; index a component")
        node[last] = value
    elif isinstance(node, list) and last.isdigit() and int(last) < len(node):
        node[int(last)] = value
    else:
        raise UnknownParameter(f"no such field: {path}")
    return scenario_from_dict(data)
