"""Exception types shared across the package."""


class CfmimoError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(CfmimoError):
    """A configuration value violates a documented precondition."""


class EstimationError(CfmimoError):
    """A covariance or channel estimate cannot be formed (e.g. singular input)."""


class CombinerError(CfmimoError):
    """Receive combining failed (rank-deficient Gram matrix)."""


class TheoryError(CfmimoError):
    """A closed-form expression is outside its validity region."""


class SimulationError(CfmimoError):
    """A Monte Carlo run could not produce a trustworthy estimate."""
