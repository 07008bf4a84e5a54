"""Exception hierarchy shared by all modules."""


class FrontSpeedError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""


class InvalidSpec(FrontSpeedError):
    pass


class EvaluationFailure(FrontSpeedError):
    pass


class PreconditionViolation(FrontSpeedError):
    pass


class AssemblyFailure(FrontSpeedError):
    pass


class SolverFailure(FrontSpeedError):
    """Numerical solver did not deliver a certified result."""


class NoConvergence(SolverFailure):
    pass


class PositivityLoss(SolverFailure):
    pass


class BracketFailure(SolverFailure):
    def __init__(self, msg, boundary_values=None):
        super().__init__(msg)
        self.boundary_values = boundary_values


class NoFront(SolverFailure):
    pass


class CFLViolation(SolverFailure):
    pass


class NotShear(FrontSpeedError):
    pass


class NotFirstIntegral(FrontSpeedError):
    pass


class SingularMass(SolverFailure):
    pass


class SingularStiffness(SolverFailure):
    pass


class DegenerateRegion(FrontSpeedError):
    pass


class NotDivergenceFree(FrontSpeedError):
    pass


class TracingFailure(SolverFailure):
    def __init__(self, msg, level=None):
        super().__init__(msg)
        self.level = level


class NoChannel(FrontSpeedError):
    pass


class ConfigError(FrontSpeedError):
    def __init__(self, msg, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(msg + where)
        self.message = msg
        self.line = line
        self.column = column
