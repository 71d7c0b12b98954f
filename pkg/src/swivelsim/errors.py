"""Exception types shared across the package."""


class SwivelSimError(Exception):
    """Base class for all structured errors raised by swivelsim."""


class NonSkewInput(SwivelSimError):
    """Matrix passed to vee() is not skew-symmetric."""


class GimbalLock(SwivelSimError):
    """312 Euler extraction attempted at roll = +/-90 deg."""


class DegenerateP(SwivelSimError):
    """Error-gain matrix P has (near-)repeated eigenvalues."""


class TooFarFromSO3(SwivelSimError):
    """Matrix is too far from a rotation to be safely projected."""


class SwivelSingularity(SwivelSimError):
    """Half swivel angle delta reached the +/-90 deg frame singularity."""


class NonFiniteState(SwivelSimError):
    """NaN or inf appeared in a state vector."""


class DegenerateThrust(SwivelSimError):
    """Collective thrust T0 is too small for the Mz <-> delta map."""


class Saturated(SwivelSimError):
    """Commanded wing thrust/torque is infeasible for the motor pair.

    Carries the clipped per-motor thrusts so a caller may proceed with
    the feasible projection.
    """

    def __init__(self, message: str, clipped: tuple[float, float]):
        super().__init__(message)
        self.clipped = clipped


class NotCriticalPoint(SwivelSimError):
    """Rotation is not one of the four critical points of the error function."""


class NonHyperbolic(SwivelSimError):
    """An equilibrium has an eigenvalue too close to the imaginary axis."""


class ParseError(SwivelSimError):
    """Scenario document is malformed.

    Attributes mirror the diagnostic triple (field, line, reason); `line`
    is None when the location is not known.
    """

    def __init__(self, field: str, reason: str, line: int | None = None):
        self.field = field
        self.reason = reason
        self.line = line
        loc = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}{loc}: {reason}")


class UnknownParameter(SwivelSimError):
    """Sweep parameter path does not address a scalar scenario field."""
