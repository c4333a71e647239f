"""Exceptions shared across the fitting modules."""


class DegenerateDataError(ValueError):
    """Raised when the data has zero dispersion and no fit is identifiable."""


class MomentExistenceError(ValueError):
    """Raised when population L-moments do not exist (k <= -1)."""
