"""Attitude dynamics and geometric tracking control for a swiveling
biplane quadrotor tailsitter."""

from .controller import (ControlGains, ControllerState, Euler312StickReference,
                         ReferenceSample, controller_step, delta_from_mz,
                         desired_moment, estimate_Md_second_derivative,
                         init_controller_state, moment_tracking_u,
                         mz_derivatives, mz_from_delta,
                         reference_fixed_axis_sinusoid, tau_delta_from_uz)
from .scenario import (Scenario, load_scenario, parse_scenario,
                       scenario_from_dict, scenario_to_dict,
                       serialize_scenario, set_scenario_param)
from .sim import (MetricsSummary, SimResult, TelemetryRecord,
                  inject_measurement_noise, plant_step, rk4_step,
                  run_scenario, sweep, write_metrics, write_telemetry)
from .so3 import (Euler312, attitude_error_eR, config_error_psi,
                  critical_points, euler312_to_rotation, exp_so3,
                  geodesic_angle, hat, is_rotation, log_so3, orthonormalize,
                  rotation_to_euler312, vee)
from .stability import (EquilibriumReport, ErrorState, GainRuleReport,
                        b_matrix, check_gain_rules, classify_equilibria,
                        error_dynamics_deriv, linearized_system,
                        lyapunov_rate, lyapunov_value)
from .vehicle import (MeanDiffInputs, VehicleParams, VehicleState, WingInputs,
                      control_moment, dynamics_deriv, inertia_of_delta,
                      inertia_rate, mean_diff_from_wing, motor_allocation,
                      motor_lag_deriv, rotational_energy,
                      total_angular_momentum, wing_from_mean_diff)

__version__ = "0.1.0"
