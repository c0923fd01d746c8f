"""Exception taxonomy shared by all engine modules."""


class EngineError(Exception):
    """Base class for every error raised by this package."""


class ParseError(EngineError):
    """Case file could not be parsed; carries file/field context."""


class ValidationError(EngineError):
    """Case data violates structural rules. Lists every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InvalidCase(EngineError):
    """Structural defect that prevents solving (no slack, dangling reference)."""


class UnknownBus(EngineError):
    pass


class ZeroImpedanceBranch(EngineError):
    pass


class UnknownComponent(EngineError):
    pass


class UnknownField(EngineError):
    pass


class ConstraintViolation(EngineError):
    """Parameter set rejected; message names the violated bound."""


class DimensionMismatch(EngineError):
    pass


class SingularMatrix(EngineError):
    """Zero pivot beyond tolerance during factorization."""

    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"zero pivot at elimination step {row}")


class NotConverged(EngineError):
    """A converged power flow was required but not available."""


class InnerLoopDiverged(EngineError):
    """Alternating network/device iteration failed to converge at a step.

    Carries the failure time and the last iterate (device states, voltages).
    """

    def __init__(self, t, last_voltage_change, last_state=None, message=None):
        self.t = t
        self.last_voltage_change = last_voltage_change
        self.last_state = last_state
        super().__init__(
            message
            or f"inner loop diverged at t={t:.6f}s (last |dV|={last_voltage_change:.3e})"
        )


class InfeasibleSpec(EngineError):
    """Sampler limits cannot satisfy the slack-range inequality."""


class NoBranches(EngineError):
    pass


class SchemaError(EngineError):
    """Neural-network structure file violates the documented schema."""


class DimensionChainBroken(EngineError):
    """Consecutive layer dimensions do not chain; names the offending layer."""


class BlobSizeMismatch(EngineError):
    """Parameter blob length differs from the declared parameter count."""


class InterfaceMismatch(EngineError):
    """A neural device model does not fit the device interface it replaces."""


class NotYetComputed(EngineError):
    """A solution-API value was requested before its producing call ran."""

    def __init__(self, item, prerequisite):
        self.item = item
        self.prerequisite = prerequisite
        super().__init__(f"{item!r} not available: run {prerequisite} first")


class OutOfRange(EngineError):
    pass
