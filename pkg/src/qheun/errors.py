"""Exception types shared across the package."""


class QHeunError(Exception):
    """Base class for every error raised by this package."""


class DomainError(QHeunError):
    """Numeric input outside the supported domain (e.g. q not in (0,1))."""


class ZeroQSumError(QHeunError):
    """The zero sum has no leading part, leading exponent or sign."""


class SignIndefiniteError(QHeunError):
    """A leading slice mixes positive and negative rational coefficients,
    so its sign (and hence the approx-equivalence constant) depends on the
    values of t1, t2."""


class ParameterError(QHeunError):
    """Invalid q-Heun parameter set; ``violations`` names every failed check."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ExcludedCaseError(QHeunError):
    """Parameters sit on a case boundary or inside an exclusion set where
    the leading-term results make no claim."""


class RegimeError(QHeunError):
    """Operation invoked with an incompatible regime tag."""


class CancellationError(QHeunError):
    """A leading-term recursion step cancelled a leading slice (or produced a
    sign-indefinite one); the sufficient non-cancellation condition does not
    cover these parameters."""

    def __init__(self, step, site, message):
        self.step = step
        self.site = site
        super().__init__(message)


class PrecisionError(QHeunError):
    """Real-root isolation found fewer distinct roots than the degree at the
    current working precision; retry with more bits."""


class MatchingError(QHeunError):
    """Numerical roots at the two q values cannot be paired unambiguously."""


class DegenerateSPolyError(QHeunError):
    """The prefactor polynomial in s degenerated (coefficients cancelled or
    its root pattern does not split the multiple root)."""
