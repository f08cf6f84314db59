"""Exceptions raised by the toolkit."""


class EqoddsError(Exception):
    """Base class for all errors raised by this package."""


class EmptyGroupOutcome(EqoddsError, ValueError):
    """A conditioning event ``A=a, Y=y`` carries zero probability mass."""

    def __init__(self, group, outcome):
        self.group = group
        self.outcome = outcome
        super().__init__(f"no weight for group {group!r} with outcome {outcome}")


class NegativeWeight(EqoddsError, ValueError):
    pass


class NonFiniteScore(EqoddsError, ValueError):
    pass


class DegenerateLoss(EqoddsError, ValueError):
    pass


class UnknownGroup(EqoddsError, LookupError):
    pass


class StructureMismatch(EqoddsError, ValueError):
    pass


class Infeasible(EqoddsError, ValueError):
    """A target rate point lies outside the achievable region."""

    def __init__(self, target, message=None):
        self.target = tuple(float(v) for v in target)
        super().__init__(message or f"target {self.target} is outside the achievable region")


class ParseError(EqoddsError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
