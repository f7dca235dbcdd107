"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for data, format, and configuration failures."""


class SchemaError(EngineError):
    """Input file does not match the expected schema (bad JSON, missing fields)."""


class FormatError(EngineError):
    """Binary file is malformed. Carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(EngineError):
    """Missing or inconsistent configuration (e.g. absent word-vector channel)."""


class BuildError(EngineError):
    """Index construction failed."""


class TrainingError(EngineError):
    """Filter training cannot proceed (e.g. no positive labels)."""


class EvaluationError(EngineError):
    """Evaluation cannot proceed (e.g. examples reference unindexed documents)."""
