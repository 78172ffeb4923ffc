"""Exception taxonomy shared across the package.

Every error raised by our own code derives from MudocError so callers can
catch the whole family at a service boundary and map it to a transport code.
"""

from __future__ import annotations


class MudocError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(MudocError):
    """Input document or provider payload is structurally malformed."""


class ValidationError(MudocError):
    """Input is well-formed but violates a documented constraint."""


class IngestError(MudocError):
    """A document could not be ingested after retries."""


class ImageError(MudocError):
    """Image bytes are missing, empty, or undecodable."""


class IndexDimensionError(MudocError):
    """Embedding vectors disagree on dimension within one index build."""


class GatewayError(MudocError):
    """Provider call failed after exhausting the retry budget."""


class ScriptExhaustedError(GatewayError):
    """The scripted mock provider ran out of scripted steps."""


class ProtocolError(MudocError):
    """Provider output could not be parsed into an action, even after a reprompt."""


class NotFoundError(MudocError):
    """A referenced document, block, session, or turn does not exist."""


class ConditionError(MudocError):
    """The requested operation is not available under the session's condition."""


class BusyError(MudocError):
    """The session already has a turn in flight."""


class PayloadTooLargeError(MudocError):
    """A client payload exceeds its documented size cap."""
