"""Equilibrium analysis of the closed-loop tracking error dynamics.

The error state (R_e, e_omega, M_e, dM_e) has four equilibria, one per
critical point of the configuration error function. Linearizing about
each gives a 12x12 block system whose spectrum classifies the desired
equilibrium as stable and the remaining three as saddles, which is what
makes the tracking law almost-globally convergent.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .controller import ControlGains
from .errors import NonHyperbolic, NotCriticalPoint
from .so3 import (attitude_error_eR, config_error_psi, critical_points, hat)

HYPERBOLICITY_MARGIN = 1e-9


class ErrorState(NamedTuple):
    """12-dimensional tracking error coordinates."""
    R_e: np.ndarray
    e_omega: np.ndarray
    M_e: np.ndarray
    dM_e: np.ndarray


def b_matrix(R_eq: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Stiffness block of the linearization at a critical point:
    B(R_eq) = -1/2 sum_i hat(e_i) P R_eq hat(e_i).

    Equals the Jacobian of the attitude error e_R there; at the identity
    it reduces to (tr(P) I - P) / 2.
    """
    if np.linalg.norm(attitude_error_eR(R_eq, P)) > 1e-6:
        raise NotCriticalPoint("R_eq is not a critical point of the "
                               "configuration error function")
    A = P @ R_eq
    B = np.zeros((3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        E = hat(e)
        B -= 0.5 * E @ A @ E
    return B


def linearized_system(R_eq: np.ndarray, g: ControlGains,
                      J: np.ndarray) -> np.ndarray:
    """12x12 state matrix of the error dynamics linearized at R_eq, in
    coordinates (eta, e_omega, M_e, dM_e)."""
    B = b_matrix(R_eq, g.P)
    Jinv = np.linalg.inv(J)
    S = np.zeros((12, 12))
    I3 = np.eye(3)
    S[0:3, 3:6] = I3
    S[3:6, 0:3] = -g.k_R * Jinv @ B
    S[3:6, 3:6] = -g.k_omega * Jinv
    S[3:6, 6:9] = Jinv
    S[6:9, 9:12] = I3
    S[9:12, 6:9] = -g.K
    S[9:12, 9:12] = -g.D
    return S


@dataclass(frozen=True)
class EquilibriumReport:
    R_eq: np.ndarray
    eigenvalues: np.ndarray      # 12 complex values
    n_stable: int                # eigenvalues with negative real part
    hyperbolic: bool
    classification: str          # "desired-stable" | "saddle"


def classify_equilibria(g: ControlGains, J: np.ndarray
                        ) -> list[EquilibriumReport]:
    """Eigen-classify all four closed-loop equilibria.

    Raises NonHyperbolic if any eigenvalue real part falls inside the
    hyperbolicity margin, which signals a bad gain choice.
    """
    reports = []
    for R_eq in critical_points(g.P):
        S = linearized_system(R_eq, g, J)
        eig = np.linalg.eigvals(S)
        re = eig.real
        if np.min(np.abs(re)) <= HYPERBOLICITY_MARGIN:
            raise NonHyperbolic(f"eigenvalue real part {re[np.argmin(np.abs(re))]:.3e} "
                                f"inside margin {HYPERBOLICITY_MARGIN}")
        n_stable = int(np.sum(re < 0.0))
        reports.append(EquilibriumReport(
            R_eq=R_eq, eigenvalues=eig, n_stable=n_stable, hyperbolic=True,
            classification="desired-stable" if n_stable == 12 else "saddle"))
    return reports


# ---------------------------------------------------------------------------
# Lyapunov function of the stability proof and the nonlinear error flow
# ---------------------------------------------------------------------------

def lyapunov_value(e: ErrorState, g: ControlGains, J: np.ndarray) -> float:
    """V = k_R psi + 1/2 e_w' J e_w + 1/2 M_e' K M_e + 1/2 dM_e' dM_e."""
    return float(g.k_R * config_error_psi(e.R_e, g.P)
                 + 0.5 * e.e_omega @ (J @ e.e_omega)
                 + 0.5 * e.M_e @ (g.K @ e.M_e)
                 + 0.5 * e.dM_e @ e.dM_e)


def lyapunov_rate(e: ErrorState, g: ControlGains, J: np.ndarray) -> float:
    """Directional derivative of V along the error dynamics:
    Vdot = -e_w' (k_w e_w - M_e) - dM_e' D dM_e."""
    return float(-e.e_omega @ (g.k_omega * e.e_omega - e.M_e)
                 - e.dM_e @ (g.D @ e.dM_e))


def error_dynamics_deriv(e: ErrorState, g: ControlGains, J: np.ndarray
                         ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Nominal closed-loop error dynamics: the rigid-body error driven by
    the moment error, with spring-mass-damper moment error decay."""
    e_R = attitude_error_eR(e.R_e, g.P)
    dR_e = e.R_e @ hat(e.e_omega)
    de_omega = np.linalg.solve(
        J, -g.k_R * e_R - g.k_omega * e.e_omega + e.M_e)
    ddM_e = -g.K @ e.M_e - g.D @ e.dM_e
    return dR_e, de_omega, e.dM_e, ddM_e


# Batched integrator for the error flow; keeps Monte Carlo Lyapunov checks
# fast. States: R_e (N,3,3), e_omega/M_e/dM_e (N,3).

def _hat_batch(v: np.ndarray) -> np.ndarray:
    N = v.shape[0]
    H = np.zeros((N, 3, 3))
    H[:, 0, 1] = -v[:, 2]
    H[:, 0, 2] = v[:, 1]
    H[:, 1, 0] = v[:, 2]
    H[:, 1, 2] = -v[:, 0]
    H[:, 2, 0] = -v[:, 1]
    H[:, 2, 1] = v[:, 0]
    return H


def _eR_batch(R_e: np.ndarray, P: np.ndarray) -> np.ndarray:
    A = np.einsum('ij,njk->nik', P, R_e)
    S = 0.5 * (A - np.transpose(A, (0, 2, 1)))
    return np.stack([S[:, 2, 1], S[:, 0, 2], S[:, 1, 0]], axis=1)


def _error_deriv_batch(R_e, e_w, M_e, dM_e, g: ControlGains,
                       Jinv: np.ndarray):
    dR = np.einsum('nij,njk->nik', R_e, _hat_batch(e_w))
    rhs = -g.k_R * _eR_batch(R_e, g.P) - g.k_omega * e_w + M_e
    de_w = rhs @ Jinv.T
    ddM = -(M_e @ g.K.T) - (dM_e @ g.D.T)
    return dR, de_w, dM_e, ddM


def integrate_error_dynamics(R_e0: np.ndarray, e_w0: np.ndarray,
                             M_e0: np.ndarray, dM_e0: np.ndarray,
                             g: ControlGains, J: np.ndarray, h: float,
                             duration: float):
    """RK4 flow of the nonlinear error dynamics for a batch of initial
    conditions. Yields (t, R_e, e_omega, M_e, dM_e) at every step,
    starting with the initial state; rotations are not re-projected since
    the error flow is short and smooth (drift stays far below test
    tolerances).
    """
    Jinv = np.linalg.inv(J)
    n_steps = int(round(duration / h))
    R, w, M, dM = (R_e0.copy(), e_w0.copy(), M_e0.copy(), dM_e0.copy())
    yield 0.0, R, w, M, dM
    for k in range(n_steps):
        k1 = _error_deriv_batch(R, w, M, dM, g, Jinv)
        k2 = _error_deriv_batch(R + 0.5 * h * k1[0], w + 0.5 * h * k1[1],
                                M + 0.5 * h * k1[2], dM + 0.5 * h * k1[3],
                                g, Jinv)
        k3 = _error_deriv_batch(R + 0.5 * h * k2[0], w + 0.5 * h * k2[1],
                                M + 0.5 * h * k2[2], dM + 0.5 * h * k2[3],
                                g, Jinv)
        k4 = _error_deriv_batch(R + h * k3[0], w + h * k3[1],
                                M + h * k3[2], dM + h * k3[3], g, Jinv)
        R = R + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        w = w + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        M = M + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        dM = dM + (h / 6.0) * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
        yield (k + 1) * h, R, w, M, dM


def lyapunov_batch(R_e, e_w, M_e, dM_e, g: ControlGains,
                   J: np.ndarray) -> np.ndarray:
    """Vectorized Lyapunov value for a batch of error states."""
    psi = 0.5 * (np.trace(g.P) - np.einsum('ij,nji->n', g.P, R_e))
    return (g.k_R * psi
            + 0.5 * np.einsum('ni,ij,nj->n', e_w, J, e_w)
            + 0.5 * np.einsum('ni,ij,nj->n', M_e, g.K, M_e)
            + 0.5 * np.einsum('ni,ni->n', dM_e, dM_e))


# ---------------------------------------------------------------------------
# Gain selection rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainRuleReport:
    """Outcome of the tuning guidelines: overdamped inner loop, inner
    stiffness above the outer loop's, and non-oscillatory rigid-body
    error response."""
    overdamped_ok: bool
    inner_stiffer_ok: bool
    outer_nonoscillatory_ok: bool
    min_zeta: float
    min_inner_stiffness: float       # min Omega_i^2
    max_outer_stiffness: float       # max eigenvalue of J^-1 k_R B(I)
    max_outer_imag: float            # largest |Im| in the outer 6x6 spectrum

    @property
    def all_ok(self) -> bool:
        return (self.overdamped_ok and self.inner_stiffer_ok
                and self.outer_nonoscillatory_ok)

    def summary(self) -> str:
        def mark(ok):
            return "PASS" if ok else "FAIL"
        return "\n".join([
            f"overdamped inner loop (min zeta = {self.min_zeta:.3f} >= 1): "
            f"{mark(self.overdamped_ok)}",
            f"inner stiffer than outer (min Omega^2 = "
            f"{self.min_inner_stiffness:.1f} > {self.max_outer_stiffness:.1f}): "
            f"{mark(self.inner_stiffer_ok)}",
            f"non-oscillatory rigid-body error (max |Im| = "
            f"{self.max_outer_imag:.2e}): {mark(self.outer_nonoscillatory_ok)}",
        ])


def check_gain_rules(g: ControlGains, J: np.ndarray) -> GainRuleReport:
    """Evaluate the gain selection guidelines for a tuning set."""
    B_I = b_matrix(np.eye(3), g.P)
    Jinv = np.linalg.inv(J)
    outer_stiff = np.linalg.eigvals(g.k_R * Jinv @ B_I)
    max_outer = float(np.max(outer_stiff.real))
    min_inner = float(min(g.Omega) ** 2)

    S = linearized_system(np.eye(3), g, J)
    outer_eigs = np.linalg.eigvals(S[:6, :6])
    max_imag = float(np.max(np.abs(outer_eigs.imag)))
    nonosc = bool(np.all(np.abs(outer_eigs.imag)
                         <= 1e-7 * (1.0 + np.abs(outer_eigs.real))))

    return GainRuleReport(
        overdamped_ok=bool(min(g.zeta) >= 1.0),
        inner_stiffer_ok=min_inner > max_outer,
        outer_nonoscillatory_ok=nonosc,
        min_zeta=float(min(g.zeta)),
        min_inner_stiffness=min_inner,
        max_outer_stiffness=max_outer,
        max_outer_imag=max_imag)
