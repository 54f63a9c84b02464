"""Exception types shared across the package."""


class BubbleTrackError(Exception):
    """Base class for errors raised by this package."""


class IngestError(BubbleTrackError):
    """Input file failed schema or consistency validation.

    ``path`` points at the offending location inside the document,
    e.g. ``frames[3].detections[1].bbox``.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class MaskDecodeError(BubbleTrackError):
    """A mask payload could not be decoded into a bitmask."""


class UsageError(BubbleTrackError):
    """The caller violated an API contract (bad ordering, unknown id, ...)."""
