class DpevalError(Exception):
    pass


class RankDeficientError(DpevalError, ValueError):
    """Weighted feature matrix lacks full column rank."""


class InvalidRegularizationError(DpevalError, ValueError):
    """Ridge parameter at or below the norm threshold required for privacy."""


class PrivacyParameterError(DpevalError, ValueError):
    pass


class OracleViolation(DpevalError, AssertionError):
    """A brute-force check found a counterexample to a claimed bound."""
