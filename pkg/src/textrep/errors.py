"""Exception types shared across the package.

Every error raised by this package derives from :class:`TextRepError` and
carries a ``category`` string ("input", "dependency" or "internal") that the
command line driver maps to its exit codes.
"""


class TextRepError(Exception):
    """Base class for all errors raised by this package."""

    category = "internal"


class CorpusFormatError(TextRepError):
    """A corpus line does not match the ``label<TAB>tokens`` format."""

    category = "input"

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EmptyCorpusError(TextRepError):
    """The corpus file contains no documents."""

    category = "input"


class EmptyVocabularyError(TextRepError):
    """Every token was filtered away while building a vocabulary."""

    category = "input"


class StratificationError(TextRepError):
    """A class has too few documents to appear in every requested split."""

    category = "input"


class ConfigError(TextRepError):
    """An invalid configuration value."""

    category = "input"


class ShapeError(TextRepError):
    """An array does not have the shape an operation requires."""


class DomainError(TextRepError):
    """A numeric argument lies outside an operation's mathematical domain."""


class NumericOverflowError(TextRepError):
    """A dot product or loss became non-finite during training."""


class TrainingDivergedError(NumericOverflowError):
    """Optimization produced a non-finite loss; names the epoch."""

    def __init__(self, epoch):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


class NotFittedError(TextRepError):
    """An estimator method that requires fit() was called before fit()."""


class MissingArtifactError(TextRepError):
    """A pipeline stage requires an artifact another stage has not produced."""

    category = "dependency"


class StaleArtifactError(MissingArtifactError):
    """An artifact's content no longer matches its recorded manifest hash."""
