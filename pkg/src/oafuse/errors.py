"""Exception taxonomy shared across the toolkit.

The CLI maps these onto exit codes: usage errors exit 1, DataError exits 2,
BackendError exits 3.
"""


class OAFuseError(Exception):
    """Base class for all toolkit errors."""


class DataError(OAFuseError):
    """Malformed or inconsistent input data (files, manifests, posteriors)."""


class BackendError(OAFuseError):
    """An ASR backend failed: unreachable, timed out, or reported an error."""


class ProtocolError(BackendError):
    """A backend response violated the wire protocol or posterior format."""
