"""Exception types shared across the package."""


class FactCheckError(Exception):
    """Base class for all errors raised by this package."""


class CorpusError(FactCheckError):
    """Corpus file is malformed or violates a record invariant."""


class EncoderError(FactCheckError):
    """Text encoding failed (bad vector file, unreachable service, bad response)."""


class CheckpointError(FactCheckError):
    """Model checkpoint file is malformed or incompatible."""


class IndexFileError(FactCheckError):
    """Embedding index file is malformed or incompatible."""


class ConfigError(FactCheckError):
    """Application configuration is missing or inconsistent."""
