"""Exception hierarchy shared across the package."""


class FracmleError(Exception):
    """Base class for all package-specific errors."""


class ResourceError(FracmleError):
    """A requested computation exceeds a memory/size guard."""


class DataError(FracmleError):
    """Input data produced a non-finite or otherwise unusable value."""


class SimulationError(FracmleError):
    """A simulated trajectory blew up; carries trajectory index and step."""

    def __init__(self, message, trajectory=None, step=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.step = step


class ConfigError(FracmleError):
    """Invalid experiment or study configuration."""


class ExperimentError(FracmleError):
    """Too many replications of an experiment failed."""


class DegeneratePosteriorError(FracmleError):
    """Posterior of the random effect is a point mass (sigma0_sq == 0)."""

    def __init__(self, mu):
        super().__init__(
            f"posterior is a point mass at mu={mu!r} (sigma0_sq = 0); "
            "no Gaussian posterior exists"
        )
        self.mu = mu
