"""Exception hierarchy.

Every error raised by the package derives from :class:`BidGameError` and
belongs to one of three families, which the command line maps to exit codes.
"""


class BidGameError(Exception):
    """Base class."""

    exit_code = 1


class ValidationError(BidGameError):
    """Malformed input: graphs, parameters, budgets, bids."""

    exit_code = 2


class NumericError(BidGameError):
    """A numerical routine could not produce a trustworthy answer."""

    exit_code = 3


# arena
class EmptyGraph(ValidationError):
    pass


class NotStronglyConnected(ValidationError):
    pass


class NoSuccessor(NotStronglyConnected):
    pass


class BadWeight(ValidationError):
    pass


class NonFiniteWeight(BadWeight):
    pass


class BadParity(ValidationError):
    pass


class BadVertexId(ValidationError):
    pass


class NegativeBudget(ValidationError):
    pass


class DegenerateBudget(ValidationError):
    pass


class InvalidBid(ValidationError):
    pass


class BadMechanism(ValidationError):
    pass


# solver
class POutOfRange(ValidationError):
    pass


class BadPolicy(ValidationError):
    pass


class NonPositiveBudget(ValidationError):
    pass


class NoConvergence(NumericError):
    pass


class SingularSystem(NumericError):
    pass


# strategies
class DomainError(ValidationError):
    pass


class EpsilonOutOfRange(ValidationError):
    pass


class WNotAboveOne(ValidationError):
    pass


class WAboveOne(ValidationError):
    pass


class EpsilonTooLarge(ValidationError):
    pass


class BudgetBelowW(ValidationError):
    """Max's starting budget (or ratio) does not exceed ``W``."""


class RatioTooSmall(BudgetBelowW):
    pass


class NoPositiveStrength(ValidationError):
    pass


class BadStrategySpec(ValidationError):
    pass


# engine
class IllegalBid(ValidationError):
    pass


class IllegalMove(ValidationError):
    pass


class BothResponders(ValidationError):
    pass


class ResponderAgainstMixed(ValidationError):
    pass


ResponderVsMixed = ResponderAgainstMixed


class BadHorizon(ValidationError):
    pass


# certify
class InvalidPath(ValidationError):
    pass


BadPath = InvalidPath


class VariantMismatch(ValidationError):
    """A ledger check was asked of a construction that has no such claim."""


class VariantWithoutLuck(VariantMismatch):
    pass


class TooLong(ValidationError):
    pass


class YOutOfRange(ValidationError):
    pass


class CorruptTrace(ValidationError):
    pass


# parity
class HypothesisUnmet(ValidationError):
    pass


class AllZeroWeights(ValidationError):
    pass


class CertificateViolated(NumericError):
    """A computed value contradicts the analytic lower bound it must satisfy."""


class BudgetRangeExceeded(NumericError):
    """A budget fell below the normal double range, so play can no longer be exact."""
