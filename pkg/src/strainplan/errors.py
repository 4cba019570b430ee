"""Exception types shared across the package."""


class StrainPlanError(Exception):
    """Base class for all package-specific errors."""


class OutOfBoundsError(StrainPlanError):
    """A joint pose or velocity violates the configured bounds."""


class SingularPoseError(StrainPlanError):
    """Shoulder elevation too close to 0 or pi; Euler dynamics are degenerate."""


class FitError(StrainPlanError):
    """Surrogate map fit failed to reach the required quality."""


class SimulationFault(StrainPlanError):
    """The coupled plant diverged or a worker failed mid-run."""


class ConfigError(StrainPlanError):
    """Malformed or inconsistent configuration."""


class EstimationError(StrainPlanError):
    """Sensor data inconsistent with the rigid-link assumptions."""
