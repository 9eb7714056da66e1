"""Exception types raised across the package.

Generation errors signal an unusable declarative spec or an impossible
sampling request.  Query errors signal that an analysis has no defined
value for the given data (empty windows, no matched pairs, and so on);
callers that sample queries catch ``QueryError`` and resample.
"""


class ForgeError(Exception):
    """Base class for every error raised by this package."""


class SpecError(ForgeError):
    """A declarative spec failed validation."""


class DomainEmpty(SpecError):
    """A domain clamp or allow-list excludes every possible sample."""


class DeadEnd(ForgeError):
    """A state machine reached a state with no admissible transition."""


class EmptyExemplar(ForgeError):
    """Sampling was requested from an exemplar with no series."""


class NoTargets(ForgeError):
    """A pattern's target filter selected no entity with in-window data."""


class WindowOutOfRange(ForgeError):
    """An injection window does not fit inside the dataset horizon."""


class BrokenLinkage(ForgeError):
    """A cascade stage's linkage resolved to zero downstream entities."""


class QueryError(ForgeError):
    """An analysis has no defined value for the given data."""


class ZeroWidthWindow(QueryError):
    """A rate was requested over a window of zero width."""


class EmptyWindowData(QueryError):
    """A statistic was requested over a window with no usable values."""


class EmptyGatedSet(QueryError):
    """A MAX/MIN/AVG aggregate was requested over zero gated values."""


class NoPairs(QueryError):
    """No event pairs could be matched for a time-between analysis."""


class NoDenominator(QueryError):
    """A conversion rate has an empty denominator population."""


class NeverReached(QueryError):
    """A first-passage analysis never observed the requested state."""


class NoTemplate(ForgeError):
    """No question template exists for an analysis kind and persona."""


class ExhaustedRetries(ForgeError):
    """Suite instantiation could not fill a slot within the retry budget."""


class EndpointUnusable(ForgeError):
    """An agent endpoint is misconfigured or unreachable at setup time."""


class ConfigError(ForgeError):
    """A project config file is invalid.  Carries the offending path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")
