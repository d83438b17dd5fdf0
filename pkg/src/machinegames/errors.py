"""Exception types shared across the engine."""


class MachineGameError(Exception):
    """Base class for every error raised by the engine."""


class DSLError(MachineGameError):
    """Malformed machine program text."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidProgram(MachineGameError):
    pass


class BudgetExceeded(MachineGameError):
    """A run went past its step, output or random-bit budget.

    ``meter`` holds the counters at the point the run was stopped and
    ``participant`` names the machine (player index, ``"Z"`` tuple or
    ``"mediator"``) when the run was part of a multi-party execution.
    """

    def __init__(self, message, meter=None, participant=None):
        super().__init__(message)
        self.meter = meter
        self.participant = participant


class TapeExhausted(BudgetExceeded):
    """The machine asked for a random bit past the end of the supplied tape."""


class PortFault(MachineGameError):
    """SEND/RECV executed without a message environment."""


class StageLimitExceeded(MachineGameError):
    pass


class InvalidSpec(MachineGameError):
    """A complexity specification that would break the zero-on-bot law."""


class ExactModeOverflow(MachineGameError):
    pass


class SchemaError(MachineGameError):
    pass


class ProbabilityNotOne(SchemaError):
    pass


class ModeAssumptionViolated(MachineGameError):
    pass


class NotComputationallyCheap(MachineGameError):
    pass


class NoEquilibriumInSupports(MachineGameError):
    pass


class SizeLimit(MachineGameError):
    pass


class IterationCapExceeded(MachineGameError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class UnknownCase(MachineGameError):
    pass


class ExpressionError(MachineGameError):
    pass
