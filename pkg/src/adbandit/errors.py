"""Semantic exception hierarchy shared across the package."""


class AdbanditError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class ConfigError(AdbanditError, ValueError):
    """Experiment configuration failed validation.

    ``fields`` maps offending field names to human-readable messages.
    """

    code = "invalid_config"

    def __init__(self, message, fields=None, code=None):
        super().__init__(message)
        self.fields = dict(fields or {})
        if code is not None:
            self.code = code


class EmptyInput(AdbanditError, ValueError):
    code = "empty_input"


class DuplicateId(AdbanditError, ValueError):
    code = "duplicate_id"


class MissingFeature(AdbanditError, KeyError):
    code = "missing_feature"


class EmptyTargetAudience(AdbanditError, ValueError):
    code = "empty_target_audience"


class TooManyArms(AdbanditError, ValueError):
    code = "too_many_arms"


class MalformedStats(AdbanditError, ValueError):
    code = "malformed_stats"


class InvalidStatus(AdbanditError, RuntimeError):
    code = "invalid_status"


class InvalidTransition(AdbanditError, RuntimeError):
    code = "invalid_transition"


class DegenerateReport(AdbanditError, ValueError):
    code = "degenerate_report"


class SingleCreative(AdbanditError, ValueError):
    code = "single_creative"


class CorruptSnapshot(AdbanditError, ValueError):
    code = "corrupt_snapshot"


class UnknownExperiment(AdbanditError, KeyError):
    code = "unknown_experiment"
