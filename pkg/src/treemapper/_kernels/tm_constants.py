"""WGS84 ellipsoid constants and Krueger-series coefficients.

Shared by both kernel lanes so the compiled and pure implementations are
guaranteed to evaluate the same series. Coefficients are the sixth-order
expansions in the third flattening n; truncation error is far below a
millimeter anywhere inside a UTM zone.
"""

import math

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563

K0 = 0.9996
FALSE_EASTING = 500000.0
FALSE_NORTHING_SOUTH = 10000000.0

_n = WGS84_F / (2.0 - WGS84_F)

# First eccentricity and rectifying radius.
ECC = math.sqrt(WGS84_F * (2.0 - WGS84_F))
A_BAR = WGS84_A / (1.0 + _n) * (1.0 + _n**2 / 4.0 + _n**4 / 64.0 + _n**6 / 256.0)

# Forward (geographic -> TM) series coefficients.
ALPHA = (
    _n / 2.0 - 2.0 / 3.0 * _n**2 + 5.0 / 16.0 * _n**3 + 41.0 / 180.0 * _n**4
    - 127.0 / 288.0 * _n**5 + 7891.0 / 37800.0 * _n**6,
    13.0 / 48.0 * _n**2 - 3.0 / 5.0 * _n**3 + 557.0 / 1440.0 * _n**4
    + 281.0 / 630.0 * _n**5 - 1983433.0 / 1935360.0 * _n**6,
    61.0 / 240.0 * _n**3 - 103.0 / 140.0 * _n**4 + 15061.0 / 26880.0 * _n**5
    + 167603.0 / 181440.0 * _n**6,
    49561.0 / 161280.0 * _n**4 - 179.0 / 168.0 * _n**5 + 6601661.0 / 7257600.0 * _n**6,
    34729.0 / 80640.0 * _n**5 - 3418889.0 / 1995840.0 * _n**6,
    212378941.0 / 319334400.0 * _n**6,
)

# Inverse (TM -> geographic) series coefficients.
BETA = (
    _n / 2.0 - 2.0 / 3.0 * _n**2 + 37.0 / 96.0 * _n**3 - 1.0 / 360.0 * _n**4
    - 81.0 / 512.0 * _n**5 + 96199.0 / 604800.0 * _n**6,
    1.0 / 48.0 * _n**2 + 1.0 / 15.0 * _n**3 - 437.0 / 1440.0 * _n**4
    + 46.0 / 105.0 * _n**5 - 1118711.0 / 3870720.0 * _n**6,
    17.0 / 480.0 * _n**3 - 37.0 / 840.0 * _n**4 - 209.0 / 4480.0 * _n**5
    + 5569.0 / 90720.0 * _n**6,
    4397.0 / 161280.0 * _n**4 - 11.0 / 504.0 * _n**5 - 830251.0 / 7257600.0 * _n**6,
    4583.0 / 161280.0 * _n**5 - 108847.0 / 3991680.0 * _n**6,
    20648693.0 / 638668800.0 * _n**6,
)
