"""Exception types raised across the package."""


class CR3Error(Exception):
    """Base class for all package errors."""


class CapExceeded(CR3Error):
    """A product or derivative would exceed the workspace degree cap."""


class IllConditioned(CR3Error):
    """A least-squares system is too badly conditioned to trust."""


class NonAdmissible(CR3Error):
    """A coframe fails the admissibility equation d(theta) = i theta^1 ^ theta^1bar."""


class Singular(CR3Error):
    """A pointwise linear solve (e.g. for the Reeb field) degenerated."""


class NotPositive(CR3Error):
    """A conformal factor is not positive at some sample point."""


class NoPrimitive(CR3Error):
    """No 1-form sigma with d(sigma) = d(omega) was found within tolerance."""


class NotSasakian(CR3Error):
    """The check requires vanishing torsion but A11 is not small."""


class PreconditionViolated(CR3Error):
    """The input does not satisfy the precondition of an identity check."""


class FrameGaugeMismatch(CR3Error):
    """Two structures cannot be compared through frame-covariant quantities."""


class EigenFailure(CR3Error):
    """The dense eigensolver failed or returned non-finite values."""


class MixedWeights(CR3Error):
    """Fields carrying different conformal log-factors were combined."""


class HypothesisUnmet(CR3Error):
    """A required hypothesis (e.g. convexity) does not hold on the model."""
