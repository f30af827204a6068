import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from treemapper.geo import GeoPoint, from_utm


@pytest.fixture(scope="session")
def la_points():
    """A reproducible cloud of LA-basin coordinates (all UTM zone 11)."""
    import numpy as np

    rng = np.random.default_rng(42)
    lats = rng.uniform(33.6, 34.4, 1000)
    lons = rng.uniform(-118.7, -117.6, 1000)
    return [GeoPoint(float(a), float(o)) for a, o in zip(lats, lons)]


def utm_neighborhood(easting: float, northing: float, zone: int = 11):
    """GeoPoint at the given UTM coordinate (helper for metric fixtures)."""
    from treemapper.geo import UtmPoint

    return from_utm(UtmPoint(easting, northing, zone))
