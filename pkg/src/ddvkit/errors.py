"""Exception types shared across the toolkit."""


class DdvkitError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(DdvkitError):
    """Tensor shapes do not compose or do not match a declared contract."""


class UnsupportedOperation(DdvkitError):
    """Operation requires white-box access the model does not grant."""


class ModelFormatError(DdvkitError):
    """Malformed model/container file.

    Carries the byte offset at which parsing failed when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class ProtocolError(DdvkitError):
    """Adapter wire-protocol violation; the session is aborted."""
