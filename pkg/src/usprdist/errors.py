"""Exception types shared across the package."""


class UsprError(Exception):
    """Base class for all package errors."""


class NewickSyntaxError(UsprError):
    """Malformed Newick input (unbalanced parentheses, empty label, ...)."""


class DuplicateLabelError(UsprError):
    """A leaf label occurs more than once in one tree."""


class TooFewLeavesError(UsprError):
    """Input tree has no leaves at all."""


class NonBinaryError(UsprError):
    """An internal node of degree >= 4 remains after suppression."""


class UnknownLabelError(UsprError):
    """A requested label is not a leaf of the tree."""


class LabelMismatchError(UsprError):
    """Two trees that must share a leaf set do not."""


class NoSuchEdgeError(UsprError):
    """An edge argument does not exist in the tree or forest."""


class InvalidRegraftError(UsprError):
    """SPR regraft target lies on the wrong side of the cut, or is a null move."""


class TooSmallError(UsprError):
    """Operation undefined below a minimum leaf count."""


class TooLargeError(UsprError):
    """Brute-force oracle invoked beyond its size bound."""


class NotAnAgreementForestError(UsprError):
    """A forest claimed to be an agreement forest of a tree pair is not."""


class NotAnEafError(UsprError):
    """A forest claimed to be an endpoint agreement forest is not."""


class UncoverableVertexError(UsprError):
    """Edge cover requested on a graph with an isolated vertex."""


class ResourceLimitExceeded(UsprError):
    """Search aborted on a time or memory cap.

    Carries the best lower bound proven so far and the search statistics
    collected up to the abort.
    """

    def __init__(self, message, lower_bound=None, stats=None):
        super().__init__(message)
        self.lower_bound = lower_bound
        self.stats = stats
