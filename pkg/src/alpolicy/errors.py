"""Exception hierarchy. Every error raised by the package derives from ``ALPolicyError``."""


class ALPolicyError(Exception):
    pass


class MalformedFileError(ALPolicyError):
    pass


class UnsupportedTaskError(ALPolicyError):
    pass


class DegenerateDatasetError(ALPolicyError):
    pass


class InvalidDataError(ALPolicyError, ValueError):
    pass


class DegenerateSplitError(ALPolicyError):
    pass


class ShapeError(ALPolicyError, ValueError):
    pass


class MissingClassError(ALPolicyError, ValueError):
    pass


class EmptyEvaluationError(ALPolicyError, ValueError):
    pass


class InvalidBudgetError(ALPolicyError, ValueError):
    pass


class InvalidActionError(ALPolicyError, IndexError):
    pass


class EpisodeDoneError(ALPolicyError):
    pass


class EmptyPoolError(ALPolicyError, ValueError):
    pass


class EmptyInputError(ALPolicyError, ValueError):
    pass


class DomainError(ALPolicyError, ValueError):
    pass


class InvalidStepError(ALPolicyError, ValueError):
    pass


class InvalidDistributionError(ALPolicyError, ValueError):
    pass


class InsufficientGroupError(ALPolicyError, ValueError):
    pass


class ChecksumError(ALPolicyError):
    pass


class VersionError(ALPolicyError):
    pass


class ReportError(ALPolicyError):
    pass


class ConfigError(ALPolicyError):
    pass
