"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures to distinct process exit statuses.
"""


class SynthForgeError(Exception):
    exit_code = 1


class ConfigError(SynthForgeError):
    exit_code = 2


class MeshFormatError(SynthForgeError):
    """Malformed mesh file. ``offset`` is the byte offset of the problem, if known."""

    exit_code = 3

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class EmptyMeshError(SynthForgeError):
    exit_code = 4


class SchemaError(SynthForgeError):
    exit_code = 5


class DuplicateComponentError(SchemaError):
    exit_code = 6


class UnresolvedComponentError(SchemaError):
    exit_code = 7


class PlacementError(SynthForgeError):
    exit_code = 8


class SettleError(SynthForgeError):
    exit_code = 9


class BehindCameraError(SynthForgeError):
    exit_code = 10


class DatasetValidationError(SynthForgeError):
    exit_code = 11


class InsufficientImagesError(SynthForgeError):
    exit_code = 12


class UnknownCategoryError(SynthForgeError):
    exit_code = 13


class MissingPairError(SynthForgeError):
    exit_code = 14


class DatasetWriteError(SynthForgeError):
    """I/O failure while writing a dataset; ``written`` lists files already in place."""

    exit_code = 15

    def __init__(self, message: str, written=()):
        self.written = list(written)
        if self.written:
            message = f"{message} ({len(self.written)} files written before the failure, last: {self.written[-1]})"
        super().__init__(message)


EXIT_CODES = {
    cls.__name__: cls.exit_code
    for cls in (
        SynthForgeError,
        ConfigError,
        MeshFormatError,
        EmptyMeshError,
        SchemaError,
        DuplicateComponentError,
        UnresolvedComponentError,
        PlacementError,
        SettleError,
        BehindCameraError,
        DatasetValidationError,
        InsufficientImagesError,
        UnknownCategoryError,
        MissingPairError,
        DatasetWriteError,
    )
}
