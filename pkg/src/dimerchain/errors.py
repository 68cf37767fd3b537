"""Exception hierarchy shared by the library and the CLI."""


class DimerChainError(Exception):
    """Base class for all library errors."""


class OverlapError(DimerChainError, ValueError):
    """Resonators overlap or the center list is not strictly increasing."""


class DomainError(DimerChainError, ValueError):
    """An argument lies outside the domain of a formula."""


class SingularityError(DomainError):
    """Evaluation requested at (or too close to) a singular point, e.g. alpha = 0."""


class PoleError(DomainError):
    """A frequency coincides with a band value so that eta_j has a pole."""


class OutOfGapError(DomainError):
    """A spectral parameter that must lie inside the band gap does not."""


class NoMidGapError(DimerChainError):
    """No mid-gap frequency exists for the requested configuration."""


class ConvergenceError(DimerChainError, ArithmeticError):
    """A quadrature or iteration failed to reach its tolerance."""


class BranchAmbiguityError(DimerChainError):
    """More zero crossings were found than the theory allows."""
