"""Shared exception types."""


class CfaugError(Exception):
    """Base class for all package errors."""


class ConfigError(CfaugError):
    """Invalid configuration (bad lexicon, bad slot probabilities, bad enum value)."""


class ContractError(CfaugError):
    """A caller violated an operation precondition."""


class MalformedSentenceError(CfaugError):
    """Token sequence does not contain exactly one adjective."""


class EmptySliceError(CfaugError):
    """A metric was requested over an empty slice."""


class TrainingDivergedError(CfaugError):
    """Training produced a non-finite loss."""


class AnnotationRefusedError(CfaugError):
    """An annotation sink declined to label an item."""
