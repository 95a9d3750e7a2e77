"""Exception types raised across the package."""


class LaserUavError(Exception):
    """Base class for all package errors."""


class ValidationError(LaserUavError, ValueError):
    """One or more parameter invariants are violated.

    ``problems`` holds one human-readable entry per violated field so that a
    config loader can report all of them at once.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ConfigParseError(LaserUavError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class HoverInfeasible(LaserUavError):
    """External force exceeds the thrust the rotors can produce."""


class QuadratureNotConverged(LaserUavError):
    pass


class NotConverged(LaserUavError):
    pass


class Depleted(LaserUavError):
    """Available-charge well emptied before the step finished."""

    def __init__(self, time_to_empty, message=None):
        self.time_to_empty = time_to_empty
        super().__init__(message or f"available charge exhausted after {time_to_empty:.6g} s")


class Infeasible(LaserUavError):
    """Base class for planning failures."""


class NoFeasibleHoverPoint(Infeasible):
    pass


class PlanExceedsBudget(Infeasible):
    pass


class NoFeasibleDelta(Infeasible):
    pass


class NoFeasiblePlan(Infeasible):
    pass
