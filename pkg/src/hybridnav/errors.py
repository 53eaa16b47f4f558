"""Exception types raised across the package."""


class HybridNavError(Exception):
    """Base class for all package errors."""


class GimbalLock(HybridNavError, ValueError):
    """Euler-angle chart is singular (cos(theta) too close to zero)."""


class NonUnitQuaternion(HybridNavError, ValueError):
    pass


class NonFiniteState(HybridNavError, FloatingPointError):
    """Integrated state became NaN or infinite."""


class UncertifiedGain(HybridNavError, ValueError):
    """A discrete-update gain fails its contraction certificate."""


class MissingAccumulator(HybridNavError, RuntimeError):
    """Velocity update requested with no open position-fix interval."""


class SingularBeaconGeometry(HybridNavError, ValueError):
    """Beacon-difference matrix is (numerically) singular: beacons are coplanar."""


class SingularMetric(HybridNavError, ValueError):
    pass


class EmptyCandidates(HybridNavError, ValueError):
    pass


class ConfigError(HybridNavError, ValueError):
    pass


class SchemaMismatch(HybridNavError, ValueError):
    pass
