"""Exception hierarchy shared across the package."""


class HawkesPopError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HawkesPopError):
    """Malformed or inconsistent model configuration."""


class StabilityError(HawkesPopError):
    """The branching matrix has spectral radius >= 1."""


class NumericsError(HawkesPopError):
    """Failure inside the linear-algebra / integration kernel."""


class SingularMatrixError(NumericsError):
    """Linear solve rejected: condition estimate above the gate."""

    def __init__(self, cond: float):
        super().__init__(f"matrix condition estimate {cond:.3e} exceeds 1e12")
        self.cond = cond


class EigenvalueOverlapError(NumericsError):
    """Sylvester solve rejected: A and -B share (nearly) an eigenvalue."""


class OdeFailure(NumericsError):
    """ODE integration did not reach the requested endpoint."""


class SimulationExplosion(HawkesPopError):
    """Thinning loop hit the event cap; the model is at or past criticality."""
