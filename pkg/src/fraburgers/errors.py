"""Exception hierarchy shared by every fraburgers module."""


class FraburgersError(Exception):
    """Base class for all package errors."""


class ContractViolation(FraburgersError, ValueError):
    """An operation was called with inputs outside its contract."""


class MeanNotZero(ContractViolation):
    """A mean-zero field was required (inverse multipliers, dual norms)."""


class ParameterRangeError(ContractViolation):
    """A parameter violates a strict inequality required by the scheme."""


class CFLViolation(FraburgersError):
    def __init__(self, dt: float, admissible_dt: float):
        self.dt = dt
        self.admissible_dt = admissible_dt
        super().__init__(f"dt={dt:.6g} exceeds the advective limit {admissible_dt:.6g}")


class BlowUpError(FraburgersError):
    def __init__(self, last_healthy_time: float):
        self.last_healthy_time = last_healthy_time
        super().__init__(f"non-finite coefficients after t={last_healthy_time:.6g}")


class DivergenceError(FraburgersError):
    """Inner Richardson iteration stopped contracting."""

    def __init__(self, message: str, history=()):
        self.history = list(history)
        super().__init__(message)


class NonContractionError(FraburgersError):
    """Outer Picard loop exhausted its budget without contracting."""

    def __init__(self, message: str, trace=None):
        self.trace = trace
        super().__init__(message)


class TailNotConverged(FraburgersError):
    def __init__(self, last_increment: float, horizon: float):
        self.last_increment = last_increment
        self.horizon = horizon
        super().__init__(
            f"time integral tail not converged by t={horizon:.6g} "
            f"(last unit-interval increment {last_increment:.3e})"
        )


class SmallnessGateError(FraburgersError):
    def __init__(self, report):
        self.report = report
        super().__init__(
            f"smallness gate failed: gate_value={report.gate_value:.6g} > 1/3"
        )


class ConfigError(FraburgersError):
    """Malformed or unknown configuration keys."""
