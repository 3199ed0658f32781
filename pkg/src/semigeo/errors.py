"""Typed failures raised by the geometry kernels.

Every error carries a short kebab-case ``code`` so that reports can record the
failure without depending on Python class names.
"""

from __future__ import annotations


class GeometryError(Exception):
    code = "geometry-error"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details


class PointOutsideDomain(GeometryError):
    code = "point-outside-domain"


class DegenerateMetric(GeometryError):
    code = "degenerate-metric"


class OrderUnsupported(GeometryError):
    code = "order-unsupported-for-family"


class LeftDomain(GeometryError):
    code = "left-domain"


class StepCountTooSmall(GeometryError):
    code = "step-count-too-small"


class EnergyDrift(GeometryError):
    code = "energy-drift"


class NoConvergence(GeometryError):
    code = "no-convergence"


class SingularEndpointJacobian(GeometryError):
    """The endpoint map is singular: the endpoints are conjugate.

    When Newton reached the target before the singularity was detected, the
    converged curve is attached as ``curve`` so callers can keep working on the
    degenerate configuration.
    """

    code = "singular-endpoint-jacobian"

    def __init__(self, message: str = "", curve=None, **details):
        super().__init__(message, **details)
        self.curve = curve


class EndpointsEqual(GeometryError):
    code = "endpoints-equal"


class NoIntervalFound(GeometryError):
    code = "no-interval-found"


class GridMismatch(GeometryError):
    code = "grid-mismatch"


class NotPeriodic(GeometryError):
    code = "not-periodic"


class NotCriticalPoint(GeometryError):
    code = "not-critical-point"


class NotLightlike(GeometryError):
    code = "not-lightlike"


class NotAGeodesic(GeometryError):
    code = "not-a-geodesic"


class TubeIntersectsCurve(GeometryError):
    code = "tube-intersects-curve"


class VParallel(GeometryError):
    code = "V-parallel"


class NotJacobi(GeometryError):
    code = "not-jacobi"


class BothVelocitiesVanish(GeometryError):
    code = "both-velocities-vanish"


class NotVertical(GeometryError):
    code = "not-vertical"


class ReshootFailed(GeometryError):
    code = "reshoot-failed"


class AlphaNotPositive(GeometryError):
    code = "alpha-not-positive"


class BetaNotPositive(GeometryError):
    code = "beta-not-positive"


class ScenarioError(Exception):
    code = "scenario-error"


class ParseError(ScenarioError):
    code = "parse-error"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class ValidationError(ScenarioError):
    code = "validation-error"

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
