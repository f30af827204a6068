"""Geodetic primitives: WGS84/UTM conversion, planar distance, compass bearing.

UTM puts tree and camera positions in a shared Cartesian frame so that
distance is plain Euclidean math and the camera heading toward a tree is a
single atan2. The projection is a sixth-order Krueger series, accurate to
well under a millimeter inside a zone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._kernels import tm_forward, tm_inverse
from .errors import DegenerateGeometryError, GeoDomainError, ZoneMismatchError
from ._kernels.tm_constants import FALSE_EASTING, FALSE_NORTHING_SOUTH, K0

# UTM is defined between 80S and 84N; we use the symmetric 84 cutoff.
MAX_UTM_LATITUDE = 84.0


class Hemisphere(str, Enum):
    NORTH = "north"
    SOUTH = "south"


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 geodetic coordinate in degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if math.isnan(self.lat) or math.isnan(self.lon):
            raise GeoDomainError("NaN coordinate")
        if not -90.0 <= self.lat <= 90.0:
            raise GeoDomainError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon < 180.0:
            raise GeoDomainError(f"longitude {self.lon} outside [-180, 180)")


@dataclass(frozen=True)
class UtmPoint:
    """Projected coordinate in meters within one UTM zone."""

    easting: float
    northing: float
    zone: int
    hemisphere: Hemisphere = Hemisphere.NORTH

    def __post_init__(self) -> None:
        if not 1 <= self.zone <= 60:
            raise GeoDomainError(f"zone {self.zone} outside [1, 60]")
        if not 100000.0 <= self.easting <= 900000.0:
            raise GeoDomainError(f"easting {self.easting} outside UTM validity band")
        if self.northing < 0.0:
            raise GeoDomainError(f"northing {self.northing} negative")


@dataclass(frozen=True)
class Bearing:
    """Compass angle in degrees, clockwise from true north, in [0, 360)."""

    degrees: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.degrees < 360.0:
            raise GeoDomainError(f"bearing {self.degrees} outside [0, 360)")


def zone_for_longitude(lon: float) -> int:
    return int((lon + 180.0) // 6.0) + 1


def central_meridian(zone: int) -> float:
    return zone * 6.0 - 183.0


def to_utm(p: GeoPoint, zone: int | None = None) -> UtmPoint:
    """Project a geodetic point into UTM (its containing zone by default)."""
    if abs(p.lat) > MAX_UTM_LATITUDE:
        raise GeoDomainError(f"latitude {p.lat} outside UTM domain (|lat| <= 84)")
    if zone is None:
        zone = zone_for_longitude(p.lon)
    elif not 1 <= zone <= 60:
        raise GeoDomainError(f"zone {zone} outside [1, 60]")

    lat = np.array([math.radians(p.lat)])
    dlon = np.array([math.radians(p.lon - central_meridian(zone))])
    x, y = tm_forward(lat, dlon)
    easting = float(x[0]) * K0 + FALSE_EASTING
    northing = float(y[0]) * K0
    hemisphere = Hemisphere.NORTH if p.lat >= 0.0 else Hemisphere.SOUTH
    if hemisphere is Hemisphere.SOUTH:
        northing += FALSE_NORTHING_SOUTH
    return UtmPoint(easting, northing, zone, hemisphere)


def from_utm(u: UtmPoint) -> GeoPoint:
    """Inverse projection back to WGS84 degrees."""
    northing = u.northing
    if u.hemisphere is Hemisphere.SOUTH:
        northing -= FALSE_NORTHING_SOUTH
    x = np.array([(u.easting - FALSE_EASTING) / K0])
    y = np.array([northing / K0])
    lat, dlon = tm_inverse(x, y)
    return GeoPoint(
        lat=math.degrees(float(lat[0])),
        lon=math.degrees(float(dlon[0])) + central_meridian(u.zone),
    )


def project_batch(
    points: list[GeoPoint], zone: int | None = None
) -> tuple[np.ndarray, np.ndarray, int, Hemisphere]:
    """Project many points into one shared UTM frame.

    The zone defaults to the first point's containing zone; every point
    must fall in that zone and hemisphere or the batch is rejected.
    """
    if not points:
        raise GeoDomainError("empty point batch")
    if zone is None:
        zone = zone_for_longitude(points[0].lon)
    hemisphere = Hemisphere.NORTH if points[0].lat >= 0.0 else Hemisphere.SOUTH
    for p in points:
        if abs(p.lat) > MAX_UTM_LATITUDE:
            raise GeoDomainError(f"latitude {p.lat} outside UTM domain")
        if zone_for_longitude(p.lon) != zone:
            raise ZoneMismatchError(
                f"point at lon {p.lon} outside zone {zone}; "
                "re-project into a common zone explicitly"
            )
        if (Hemisphere.NORTH if p.lat >= 0.0 else Hemisphere.SOUTH) is not hemisphere:
            raise ZoneMismatchError("points straddle the equator")

    lat = np.radians(np.array([p.lat for p in points]))
    dlon = np.radians(np.array([p.lon for p in points]) - central_meridian(zone))
    x, y = tm_forward(lat, dlon)
    easting = x * K0 + FALSE_EASTING
    northing = y * K0
    if hemisphere is Hemisphere.SOUTH:
        northing = northing + FALSE_NORTHING_SOUTH
    return easting, northing, zone, hemisphere


def _require_same_frame(p: UtmPoint, t: UtmPoint) -> None:
    if p.zone != t.zone or p.hemisphere != t.hemisphere:
        raise ZoneMismatchError(
            f"points in zone {p.zone}{p.hemisphere.value[0]} vs "
            f"{t.zone}{t.hemisphere.value[0]}; re-project into a common zone"
        )


def planar_distance(p: UtmPoint, t: UtmPoint) -> float:
    """Euclidean distance in meters between two points of one UTM frame."""
    _require_same_frame(p, t)
    return math.sqrt((t.easting - p.easting) ** 2 + (t.northing - p.northing) ** 2)


def bearing(p: UtmPoint, t: UtmPoint) -> Bearing:
    """Compass bearing from p toward t (0 = north, 90 = east).

    This is the heading a street-view camera at p needs to face the target
    at t.
    """
    _require_same_frame(p, t)
    de = t.easting - p.easting
    dn = t.northing - p.northing
    if de == 0.0 and dn == 0.0:
        raise DegenerateGeometryError("bearing undefined for coincident points")
    theta = math.degrees(math.atan2(de, dn))
    if theta < 0.0:
        theta += 360.0
    if theta >= 360.0:  # atan2 can round to exactly 360 after the shift
        theta = 0.0
    return Bearing(theta)
