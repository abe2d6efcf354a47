"""Exception hierarchy shared by every subpackage."""


class VidInpaintError(Exception):
    """Base class for all library errors."""


class InvalidShapeError(VidInpaintError, ValueError):
    pass


class InvalidArgumentError(VidInpaintError, ValueError):
    pass


class FormatError(VidInpaintError):
    """A checkpoint or annotation file is malformed.

    ``field`` names the offending part of the file (``"magic"``,
    ``"header_length"``, ``"entry[conv.weight].nbytes"``...).
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class LoadError(VidInpaintError):
    """A checkpoint entry cannot be loaded into a parameter slot."""

    def __init__(self, entry: str, message: str):
        super().__init__(f"{entry}: {message}")
        self.entry = entry


class MergeError(VidInpaintError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class EmptyAssociationError(VidInpaintError):
    """No phrase in the first frame passes the score threshold."""
