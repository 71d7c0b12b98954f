"""SO(3)/so(3) kernel: hat/vee maps, exponential/logarithm, 312 Euler
conversions, and the attitude configuration error function.

All rotations are plain 3x3 numpy arrays mapping body components to
inertial components. Angles are radians throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateP, GimbalLock, NonSkewInput, TooFarFromSO3

ROTATION_TOL = 1e-9
_EIG_SEPARATION = 1e-9


def hat(v: np.ndarray) -> np.ndarray:
    """Skew matrix of a 3-vector, defined by hat(v) @ b == cross(v, b)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(S: np.ndarray) -> np.ndarray:
    """Inverse of hat. Raises NonSkewInput if S is not skew-symmetric."""
    if np.linalg.norm(S + S.T) >= 1e-9:
        raise NonSkewInput(f"matrix is not skew-symmetric: ||S + S^T|| = "
                           f"{np.linalg.norm(S + S.T):.3e}")
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def skew_part_vee(S: np.ndarray) -> np.ndarray:
    """vee of the skew-symmetric part of an arbitrary matrix."""
    A = 0.5 * (S - S.T)
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def exp_so3(v: np.ndarray) -> np.ndarray:
    """Rodrigues formula for the rotation about axis v by angle ||v||."""
    theta = np.linalg.norm(v)
    if theta < 1e-12:
        # second-order series keeps the result orthogonal to machine precision
        V = hat(v)
        return np.eye(3) + V + 0.5 * (V @ V)
    K = hat(v / theta)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def log_so3(R: np.ndarray) -> np.ndarray:
    """Principal rotation vector of R, with ||result|| <= pi.

    At a half turn the two antipodal axis representatives are tied; the one
    whose first nonzero component is positive (the lexicographically larger
    of the pair) is returned, which keeps golden tests deterministic.
    """
    cos_theta = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    theta = np.arccos(cos_theta)
    s = skew_part_vee(R)  # equals sin(theta) * axis
    if theta < 1e-8:
        return s
    if theta < np.pi - 1e-6:
        return (theta / np.sin(theta)) * s
    # theta ~ pi: recover the axis from the symmetric part, R ~ 2vv^T - I
    B = 0.5 * (R + np.eye(3))
    i = int(np.argmax(np.diag(B)))
    v = B[:, i] / np.sqrt(B[i, i])
    v /= np.linalg.norm(v)
    if np.linalg.norm(s) > 1e-9 and abs(float(s @ v)) > 1e-12:
        if float(s @ v) < 0.0:
            v = -v
    else:
        for comp in v:
            if abs(comp) > 1e-12:
                if comp < 0.0:
                    v = -v
                break
    return theta * v


def is_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    """True if R^T R = I and det R = +1 within tol."""
    return (np.linalg.norm(R.T @ R - np.eye(3)) < tol
            and abs(np.linalg.det(R) - 1.0) < tol)


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix to the nearest element of SO(3).

    Used to repair integration drift; idempotent on valid rotations.
    Raises TooFarFromSO3 when the orthogonality defect exceeds 0.1 or the
    determinant is not positive (a reflection has no nearby rotation).
    """
    defect = np.linalg.norm(R.T @ R - np.eye(3))
    if defect >= 0.1 or np.linalg.det(R) <= 0.0:
        raise TooFarFromSO3(f"orthogonality defect {defect:.3e}, "
                            f"det {np.linalg.det(R):.3e}")
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0.0:
        Q = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
    return Q


def geodesic_angle(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Rotation angle between two attitudes, in [0, pi]."""
    return float(np.linalg.norm(log_so3(Ra.T @ Rb)))


# ---------------------------------------------------------------------------
# 312 Euler chart (yaw about inertial Z, then roll about X, then pitch
# about Y): R = Rz(psi) Rx(phi) Ry(theta). Gimbal lock at roll = +/-90 deg.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Euler312:
    """Yaw/roll/pitch triple of the 312 rotation sequence, radians."""
    yaw: float
    roll: float
    pitch: float


def euler312_to_rotation(e: Euler312) -> np.ndarray:
    cp, sp = np.cos(e.yaw), np.sin(e.yaw)
    cf, sf = np.cos(e.roll), np.sin(e.roll)
    ct, st = np.cos(e.pitch), np.sin(e.pitch)
    return np.array([
        [ct * cp - sf * st * sp, -cf * sp, st * cp + sf * ct * sp],
        [ct * sp + sf * st * cp, cf * cp, st * sp - sf * ct * cp],
        [-cf * st, sf, cf * ct],
    ])


def rotation_to_euler312(R: np.ndarray) -> Euler312:
    """Invert euler312_to_rotation. Raises GimbalLock near roll = +/-90 deg."""
    if abs(R[2, 1]) >= 1.0 - 1e-9:
        raise GimbalLock(f"roll sine {R[2, 1]:.12f} is at the chart singularity")
    roll = np.arcsin(R[2, 1])
    yaw = np.arctan2(-R[0, 1], R[1, 1])
    pitch = np.arctan2(-R[2, 0], R[2, 2])
    return Euler312(yaw=float(yaw), roll=float(roll), pitch=float(pitch))


# ---------------------------------------------------------------------------
# Configuration error function psi(R_e) = 0.5 tr(P (I - R_e)) and its
# left-trivialized gradient. For symmetric positive definite P with
# distinct eigenvalues psi has exactly four critical points.
# ---------------------------------------------------------------------------

def validate_error_gain(P: np.ndarray, separation: float = _EIG_SEPARATION) -> np.ndarray:
    """Check symmetry, positive definiteness and eigenvalue separation of P.

    Returns the sorted eigenvalues. Raises DegenerateP on failure.
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (3, 3) or np.linalg.norm(P - P.T) > 1e-12:
        raise DegenerateP("P must be a symmetric 3x3 matrix")
    w = np.linalg.eigvalsh(P)
    if w[0] <= 0.0:
        raise DegenerateP(f"P must be positive definite, eigenvalues {w}")
    if np.min(np.diff(w)) <= separation:
        raise DegenerateP(f"P eigenvalues must be distinct, got {w}")
    return w


def config_error_psi(R_e: np.ndarray, P: np.ndarray) -> float:
    """Attitude error scalar 0.5 tr(P (I - R_e)); zero iff R_e = I."""
    return float(0.5 * np.trace(P @ (np.eye(3) - R_e)))


def attitude_error_eR(R_e: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Gradient of config_error_psi pulled back to the Lie algebra:
    e_R = 0.5 vee(P R_e - R_e^T P)."""
    return skew_part_vee(P @ R_e)


def eR_jacobian(R_e: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Exact Jacobian of attitude_error_eR along right exp-perturbations.

    Column i is d/dt e_R(R_e exp(t hat(e_i))) at t = 0. At a critical point
    this equals the stiffness matrix entering the linearized error dynamics.
    """
    A = P @ R_e
    J = np.empty((3, 3))
    for i in range(3):
        Ei = np.zeros(3)
        Ei[i] = 1.0
        M = A @ hat(Ei)
        J[:, i] = np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0],
                            M[1, 0] - M[0, 1]]) * 0.5
    return J


def critical_points(P: np.ndarray) -> list[np.ndarray]:
    """The four critical points of psi: identity plus half turns about each
    eigenvector of P. Requires distinct eigenvalues (else DegenerateP)."""
    validate_error_gain(P)
    _, vecs = np.linalg.eigh(P)
    points = [np.eye(3)]
    for i in range(3):
        points.append(exp_so3(np.pi * vecs[:, i]))
    return points
