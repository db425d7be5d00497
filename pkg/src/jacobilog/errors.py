"""Exception types shared across the package.

Everything user-facing raises one of these so the CLI can map failures to a
single exit code without pattern-matching on messages.
"""


class JacobilogError(Exception):
    """Base class for all package errors."""


class DomainError(JacobilogError, ValueError):
    """Input outside the mathematical domain (e.g. z = 0 or |z| >= 2)."""


class NumericError(JacobilogError, ArithmeticError):
    """A numerical invariant broke mid-computation (names the offending index)."""


class DegenerateSpecError(JacobilogError, ValueError):
    """Ensemble spec produced pathological samples (rejection rate too high)."""


class ScheduleError(JacobilogError, ValueError):
    """Block schedule parameters degenerate (empty or inverted schedule)."""


class RegimeError(JacobilogError, ValueError):
    """Operation applied outside its regime of validity (e.g. |w_l| > 2)."""


class SingularBasisError(RegimeError):
    """Basis change undefined at the regime boundary (|w_l| = 2)."""


class DiagnosticUnavailableError(JacobilogError, ArithmeticError):
    """A diagnostic needs a trace value that carries a flag (zero or dead)."""
