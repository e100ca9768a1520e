"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented contract (bad MAF, unknown id, ...)."""


class IngestionError(ValidationError):
    """A genotype file could not be parsed.

    Attributes:
        line: 1-based line number of the offending row, if known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UndefinedKinshipError(ArithmeticError):
    """Kinship is undefined because one member has no visible heterozygous site."""


class InfeasibleError(Exception):
    """No hiding plan can bring the constrained pairs down to the target kinship.

    Attributes:
        violations: list of (pair, residual_kinship) where residual_kinship is
            the best value reachable (None when kinship becomes undefined).
        step: arrival step at which infeasibility occurred (sequential runs).
        member: id of the member being processed at that step.
    """

    def __init__(self, message, violations=(), step=None, member=None):
        super().__init__(message)
        self.violations = list(violations)
        self.step = step
        self.member = member
