"""Exception hierarchy shared across the package."""


class TreemapperError(Exception):
    """Base class for all package errors."""


class GeoDomainError(TreemapperError, ValueError):
    """Coordinate outside the domain of a geodetic operation."""


class ZoneMismatchError(GeoDomainError):
    """Operands lie in different UTM zones or hemispheres."""


class DegenerateGeometryError(GeoDomainError):
    """Geometry collapses to a point where the operation is undefined."""


class IntegrityError(TreemapperError):
    """Dataset invariant violated (dangling references, split contamination)."""


class SequencingError(TreemapperError):
    """Round bookkeeping applied out of order."""


class DetectorError(TreemapperError):
    """Detection backend failed for a whole batch."""


class PanoramaSourceError(TreemapperError):
    """Panorama metadata lookup failed."""


class PoolExhaustedError(TreemapperError):
    """No unlabeled images left to sample."""


class ConfigError(TreemapperError, ValueError):
    """Invalid configuration value."""
