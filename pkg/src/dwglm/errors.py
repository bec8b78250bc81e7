"""Exception types shared across the package."""


class DwglmError(Exception):
    """Base class for all package errors."""


class SolverError(DwglmError):
    """Base class for estimating-equation solver failures."""


class NonConvergence(SolverError):
    """Newton iteration exhausted max_iter (or line search stalled)."""


class SingularJacobian(SolverError):
    """Newton step unsolvable even after ridge escalation."""


class Separation(SolverError):
    """A coefficient exceeded the divergence bound, signalling perfect separation."""


class EmptyGroup(SolverError):
    """A required treatment arm has no observations."""


class EstimationError(DwglmError):
    """Estimation failure annotated with its (stage, replicate) location."""

    def __init__(self, message, stage=None, replicate=None):
        self.stage = stage
        self.replicate = replicate
        where = []
        if stage is not None:
            where.append(f"stage {stage}")
        if replicate is not None:
            where.append(f"replicate {replicate}")
        if where:
            message = f"{' '.join(where)}: {message}"
        super().__init__(message)


class AllReplicatesFailed(EstimationError):
    """Too few pseudo-outcome replicates produced a converged fit at a stage."""


class DataError(DwglmError):
    """Base class for dataset parsing/validation failures."""


class MissingColumn(DataError):
    """A column referenced by the configuration is absent from the file."""


class NonBinaryValue(DataError):
    """A treatment/outcome cell holds something other than 0 or 1."""


class RaggedStages(DataError):
    """A subject is missing one or more stage records."""


class ParseError(DataError):
    """Malformed cell, with row/column location in the message."""


class ConfigError(DwglmError):
    """Invalid analysis configuration."""
