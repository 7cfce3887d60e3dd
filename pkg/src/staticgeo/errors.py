"""Exception types shared across the toolkit."""


class StaticGeoError(Exception):
    """Base class for all toolkit errors."""


class CatalogError(StaticGeoError, ValueError):
    """Unknown catalog entry or invalid catalog parameters."""


class ChartDomainError(StaticGeoError, ValueError):
    """A point lies outside the coordinate chart of a metric."""


class DegenerateMetricError(StaticGeoError, ValueError):
    """Metric failed symmetry / positive-definiteness / inverse checks."""


class ResolutionError(StaticGeoError, ValueError):
    """Grid or quadrature resolution below the documented minimum."""


class SolverError(StaticGeoError, RuntimeError):
    """A linear / nonlinear / ODE solver failed to converge."""


class GeometryConsistencyError(StaticGeoError, RuntimeError):
    """Cross-checked geometric quantities disagree beyond tolerance."""


class TransversalityError(StaticGeoError, RuntimeError):
    """Zero-set extraction failed: no sign change or vanishing vertical derivative."""


class ClassificationError(StaticGeoError, RuntimeError):
    """Asymptotic expansion fit could not be classified unambiguously."""


class FlowAbortError(StaticGeoError, RuntimeError):
    """Conformal normal flow aborted (potential reached zero or geometry degenerated)."""

    def __init__(self, message, location=None, time=None):
        super().__init__(message)
        self.location = location
        self.time = time
