"""Exception hierarchy shared by all modules.

The CLI maps :class:`DataError` to exit code 2 and :class:`ProviderError` to
exit code 3.
"""


class EmbedPcaError(Exception):
    """Base class for every error raised by this package."""


class DataError(EmbedPcaError, ValueError):
    """Malformed, degenerate or inconsistent input data."""


class FormatError(DataError):
    """A binary file failed header, size, checksum or invariant validation."""


class UndefinedMetricError(DataError):
    """A similarity or correlation is undefined for the given input
    (zero vector, constant column)."""


class ProviderError(EmbedPcaError):
    """Hard failure talking to an embedding provider."""


class RateLimitError(ProviderError):
    """The provider signalled throttling (HTTP 429) and retries ran out."""
