import json
import os

import numpy as np
import pytest

from swivelsim.cli import main as cli_main
from swivelsim.errors import UnknownParameter
from swivelsim.scenario import scenario_from_dict, serialize_scenario
from swivelsim.sim import (TELEMETRY_COLUMNS, inject_measurement_noise,
                           plant_step, rk4_step, run_scenario, sweep,
                           sweep_csv, telemetry_column, write_telemetry)
from swivelsim.so3 import geodesic_angle
from swivelsim.vehicle import VehicleParams, VehicleState

from oracles import random_rotation

SINUSOID = {"type": "fixed_axis_sinusoid", "amplitude_deg": 40.0,
            "frequency_hz": 1.0, "axis": [1, 1, 1]}


# --- integrator ---------------------------------------------------------------

def test_rk4_zero_derivative():
    y = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(rk4_step(y, lambda v: np.zeros(3), 0.1), y)


def test_rk4_rejects_bad_step():
    with pytest.raises(ValueError):
        rk4_step(np.ones(2), lambda v: v, 0.0)


def test_rk4_fourth_order_convergence():
    # linear system xdot = A x against the exact matrix exponential:
    # halving h must shrink the global error by ~2^4
    rng = np.random.default_rng(3)
    A = rng.standard_normal((4, 4))
    A = A - 2.0 * np.eye(4)
    x0 = rng.standard_normal(4)
    w, V = np.linalg.eig(A)
    exact = (V @ np.diag(np.exp(w)) @ np.linalg.inv(V)).real @ x0

    def integrate(h):
        x = x0.copy()
        for _ in range(int(round(1.0 / h))):
            x = rk4_step(x, lambda v: A @ v, h)
        return np.linalg.norm(x - exact)

    e1, e2 = integrate(0.01), integrate(0.005)
    assert 14.0 < e1 / e2 < 18.0


def test_plant_step_keeps_rotation_orthonormal(rng):
    p = VehicleParams()
    s = VehicleState(R=random_rotation(rng), omega=np.array([2.0, -1.0, 3.0]),
                     delta=0.1, ddelta=0.2, f_act=np.full(4, 2.0))
    for _ in range(200):
        s = plant_step(s, np.full(4, 2.0), p, 1e-3)
    assert np.linalg.norm(s.R.T @ s.R - np.eye(3)) < 1e-12


# --- measurement noise ----------------------------------------------------------

def test_noise_zero_sigma_is_identity(rng):
    s = VehicleState(R=np.eye(3), omega=np.ones(3), delta=0.1, ddelta=0.2)
    out = inject_measurement_noise(s, 0.0, np.random.default_rng(0))
    assert out is s


def test_noise_statistics():
    g = np.random.default_rng(12)
    s = VehicleState(R=np.eye(3), omega=np.zeros(3), delta=0.0, ddelta=0.0)
    sigma = 0.075
    n = 100_000
    draws = np.empty((n, 4))
    for i in range(n):
        m = inject_measurement_noise(s, sigma, g)
        draws[i, :3] = m.omega
        draws[i, 3] = m.ddelta
    assert np.all(np.abs(draws.mean(axis=0)) < 3 * sigma / np.sqrt(n))
    assert np.all(np.abs(draws.std(axis=0) - sigma) < 0.02 * sigma)


def test_noise_leaves_configuration_untouched(rng):
    R = random_rotation(rng)
    s = VehicleState(R=R, omega=np.zeros(3), delta=0.3, ddelta=0.1)
    m = inject_measurement_noise(s, 0.5, np.random.default_rng(1))
    assert m.R is s.R           # bitwise identical configuration
    assert m.delta == s.delta
    assert m.ddelta != s.ddelta


# --- closed loop ------------------------------------------------------------------

def test_equilibrium_hold():
    sc = scenario_from_dict({"duration": 2.0})
    res = run_scenario(sc)
    psi = telemetry_column(res.records, "psi_err")
    assert res.metrics.status == "ok"
    assert psi.max() < 1e-9


def test_determinism_same_seed(tmp_path):
    doc = {"duration": 1.0, "seed": 5, "reference": SINUSOID,
           "initial": {"attitude_euler312_deg": [30.0, 0.0, 10.0]},
           "disturbance": {"gyro_noise_std": 0.075, "motor_lag": True}}
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_telemetry(run_scenario(scenario_from_dict(doc)).records, str(pa))
    write_telemetry(run_scenario(scenario_from_dict(doc)).records, str(pb))
    assert pa.read_bytes() == pb.read_bytes()


def test_different_seed_differs():
    doc = {"duration": 0.5, "reference": SINUSOID,
           "disturbance": {"gyro_noise_std": 0.075}}
    r1 = run_scenario(scenario_from_dict(doc), seed=1)
    r2 = run_scenario(scenario_from_dict(doc), seed=2)
    w1 = telemetry_column(r1.records, "wx")
    w2 = telemetry_column(r2.records, "wx")
    assert not np.allclose(w1, w2)


def test_plant_step_refinement_converges():
    # halving the plant step must barely change the final attitude
    base = {"duration": 1.5, "reference": SINUSOID,
            "initial": {"attitude_euler312_deg": [20.0, 0.0, 10.0]}}
    r1 = run_scenario(scenario_from_dict({**base, "plant_step": 1e-3}))
    r2 = run_scenario(scenario_from_dict({**base, "plant_step": 5e-4}))
    assert geodesic_angle(r1.final_state.R, r2.final_state.R) < 1e-4


def test_swivel_singularity_recorded():
    # drive the initial swivel near the guard with a spin that pushes it out
    sc = scenario_from_dict({
        "duration": 1.0,
        "initial": {"delta_deg": 85.0, "ddelta": 6.0},
        "gains": {"delta_protect_deg": 84.0},
    })
    res = run_scenario(sc)
    assert res.metrics.status == "singularity"
    assert res.metrics.halted_at is not None


def test_telemetry_file_format(tmp_path):
    sc = scenario_from_dict({"duration": 0.1, "reference": SINUSOID})
    res = run_scenario(sc)
    path = tmp_path / "t.csv"
    write_telemetry(res.records, str(path))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == ",".join(TELEMETRY_COLUMNS)
    assert len(lines) == 1 + len(res.records)
    first = lines[1].split(",")
    assert len(first) == len(TELEMETRY_COLUMNS)
    # shortest round-trip decimals parse back exactly
    assert float(first[0]) == res.records[0].t
    assert int(first[-1]) == res.records[0].sat_flags


def test_metrics_fields():
    sc = scenario_from_dict({"duration": 1.0})
    m = run_scenario(sc).metrics
    d = m.to_dict()
    assert set(d) == {"status", "halted_at", "settling_time",
                      "peak_motor_cmd", "peak_motor_cmd_full",
                      "saturation_duty", "final_psi", "final_omega_err"}
    assert d["status"] == "ok"
    assert d["settling_time"] == 0.0          # never above threshold
    assert d["saturation_duty"] == 0.0


# --- sweeps ------------------------------------------------------------------------

def test_sweep_inertia_scaling():
    sc = scenario_from_dict({
        "duration": 6.0, "seed": 11, "reference": SINUSOID,
        "initial": {"attitude_euler312_deg": [60.0, 0.0, 20.0]},
        "disturbance": {"gyro_noise_std": 0.075, "motor_lag": True}})
    rows = sweep(sc, "disturbance.inertia_scale", [1.0, 1.025, 1.05])
    assert [r.seed for r in rows] == [11, 12, 13]
    for r in rows:
        assert r.metrics.status == "ok"
        assert r.metrics.settling_time is not None
        assert r.metrics.settling_time < 2.5
    csv = sweep_csv(rows)
    assert csv.startswith("param,value,seed,")
    assert len(csv.strip().split("\n")) == 4


def test_sweep_empty_values():
    sc = scenario_from_dict({"duration": 1.0})
    assert sweep(sc, "gains.k_R", []) == []


def test_sweep_gyro_noise_recorded_not_asserted():
    sc = scenario_from_dict({"duration": 2.0, "reference": SINUSOID})
    rows = sweep(sc, "disturbance.gyro_noise_std", [0.0, 0.075])
    assert len(rows) == 2
    assert all(r.metrics.status == "ok" for r in rows)


def test_sweep_unknown_parameter():
    sc = scenario_from_dict({"duration": 1.0})
    with pytest.raises(UnknownParameter):
        sweep(sc, "gains.nope", [1.0])


# --- CLI ---------------------------------------------------------------------------

def _write_scenario(tmp_path, doc):
    path = tmp_path / "scenario.yaml"
    path.write_text(serialize_scenario(scenario_from_dict(doc)))
    return str(path)


def test_cli_simulate(tmp_path, capsys):
    path = _write_scenario(tmp_path, {"duration": 0.5, "reference": SINUSOID})
    out = tmp_path / "out"
    rc = cli_main(["simulate", path, "--out", str(out)])
    assert rc == 0
    assert (out / "telemetry.csv").exists()
    with open(out / "metrics.json") as fh:
        m = json.load(fh)
    assert m["status"] == "ok"
    assert "settling time" in capsys.readouterr().out


def test_cli_simulate_seed_override(tmp_path):
    path = _write_scenario(tmp_path, {
        "duration": 0.3, "reference": SINUSOID,
        "disturbance": {"gyro_noise_std": 0.075}})
    o1, o2, o3 = (tmp_path / n for n in ("o1", "o2", "o3"))
    assert cli_main(["simulate", path, "--out", str(o1), "--seed", "9"]) == 0
    assert cli_main(["simulate", path, "--out", str(o2), "--seed", "9"]) == 0
    assert cli_main(["simulate", path, "--out", str(o3), "--seed", "10"]) == 0
    t1 = (o1 / "telemetry.csv").read_bytes()
    assert t1 == (o2 / "telemetry.csv").read_bytes()
    assert t1 != (o3 / "telemetry.csv").read_bytes()


def test_cli_bad_scenario_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("duration: -5\n")
    assert cli_main(["simulate", str(path)]) == 2
    assert cli_main(["simulate", str(tmp_path / "missing.yaml")]) == 2
    err = capsys.readouterr().err
    assert "duration" in err


def test_cli_divergent_run_exit_3(tmp_path):
    path = _write_scenario(tmp_path, {
        "duration": 1.0,
        "initial": {"delta_deg": 85.0, "ddelta": 6.0},
        "gains": {"delta_protect_deg": 84.0}})
    assert cli_main(["simulate", path, "--out", str(tmp_path / "o")]) == 3


def test_cli_analyze(tmp_path, capsys):
    path = _write_scenario(tmp_path, {"duration": 1.0})
    out = tmp_path / "an"
    rc = cli_main(["analyze", path, "--out", str(out)])
    assert rc == 0
    text = (out / "equilibria.csv").read_text().strip().split("\n")
    assert text[0] == "equilibrium,classification,n_stable,eig_index,real,imag"
    assert len(text) == 1 + 4 * 12
    report = (out / "gain_rules.txt").read_text()
    assert "desired-stable" in report and "saddle" in report
    assert "PASS" in capsys.readouterr().out


def test_cli_analyze_bad_gains_exit_3(tmp_path):
    path = _write_scenario(tmp_path, {"gains": {"zeta": [0.2, 1.1, 1.1]}})
    assert cli_main(["analyze", path, "--out", str(tmp_path / "an2")]) == 3


def test_cli_sweep(tmp_path, capsys):
    path = _write_scenario(tmp_path, {"duration": 0.5, "reference": SINUSOID})
    rc = cli_main(["sweep", path, "--param", "gains.k_R",
                   "--values", "1.2,1.6"])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("param,value,seed,")
    assert out.count("\n") == 3
    assert cli_main(["sweep", path, "--param", "gains.zzz",
                     "--values", "1"]) == 2
