"""Exception hierarchy shared by all litedepth modules."""


class LiteDepthError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(LiteDepthError):
    """Tensor shapes are incompatible with the requested operation."""


class ConfigurationError(LiteDepthError):
    """A model or kernel configuration is invalid."""


class ValidationError(LiteDepthError):
    """An input value is outside its documented range."""


class ArchiveError(LiteDepthError):
    """Base class for weight-archive failures."""


class ChecksumError(ArchiveError):
    """A tensor payload does not match its recorded checksum."""


class MissingTensorError(ArchiveError):
    """The archive lacks a tensor the model requires."""


class ExtraTensorError(ArchiveError):
    """The archive contains a tensor the model does not know."""


class VariantMismatchError(ArchiveError):
    """The archive was saved for a different model variant."""


class DatasetError(LiteDepthError):
    """A dataset manifest or sample could not be used."""
