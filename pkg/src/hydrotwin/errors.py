"""Exception types shared across the package."""


class HydrotwinError(Exception):
    """Base class for all package errors."""


class DomainError(HydrotwinError):
    """A value lies outside its documented domain."""


class DimensionError(HydrotwinError):
    """Array or vector shapes do not line up."""


class InsufficientHistoryError(HydrotwinError):
    """A series is too short for the requested operation."""


class CoverageError(HydrotwinError):
    """Exogenous features do not cover the required time range."""


class InfeasibleError(HydrotwinError):
    """No schedule satisfies the hard constraints."""


class SizeError(HydrotwinError):
    """An enumeration would exceed its configured cap."""


class BudgetError(HydrotwinError):
    """Search budget exhausted before any feasible incumbent was found."""


class EmptyDatasetError(HydrotwinError):
    """No usable rows survived dataset assembly."""


class UntrainedModelError(HydrotwinError):
    """An operation requires a fitted model."""


class ParseError(HydrotwinError):
    """Fatal document-level parse failure (bad header, bad JSON)."""


class IncompatibleVersionError(HydrotwinError):
    """A persisted document carries an unsupported schema version."""
