"""Exception hierarchy shared by all engine modules."""


class EngineError(Exception):
    """Base class for every error raised by the engine."""


class AddressError(EngineError, IndexError):
    """A point address or block range falls outside its layer."""


class OverlapError(EngineError):
    """A write or excitation would intersect an existing block or excited region."""


class ArgumentError(EngineError, ValueError):
    """A structurally invalid argument (bad index, bad length, bad option value)."""


class AmbiguityError(EngineError):
    """No unique action point satisfies the active-quality condition."""


class NotEncodableError(EngineError):
    """The class carries no derivation record and cannot be mapped to bits."""


class CapacityError(EngineError):
    """Encoded data does not fit the target layer or region."""


class DecodeError(EngineError):
    """A bit string does not parse as the expected record."""


class ConflictError(EngineError):
    """A patch chain was built against a different memory snapshot."""


class BusyError(EngineError):
    """The single internal-speech slot is already occupied."""


class ForbiddenError(EngineError):
    """The request arrived over a route that is not allowed to issue it."""


class ScopeError(EngineError):
    """The operation needs surrounding structure (e.g. a grand-parent context) that is absent."""


class RejectionError(EngineError):
    """The class does not qualify for the requested role."""
