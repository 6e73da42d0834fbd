"""Node positions, link distances, path loss and direction angles.

Angle convention used throughout the package: the azimuth is
``atan2(dy, dx)`` in (-pi, pi] and the elevation is measured from the
horizontal x-y plane, ``asin(dz / d)``.  Arrival angles at a receiver are
the direction *from the receiver towards the transmitter*.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import GeometryError

_COS_EPS = 1e-12


def thermal_noise_dbm(bandwidth_hz: float) -> float:
    """-174 dBm/Hz integrated over the bandwidth."""
    return -174.0 + 10.0 * math.log10(bandwidth_hz)


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise GeometryError(f"expected a 3D point, got shape {np.shape(p)}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"point has non-finite components: {arr}")
    return arr


class DirectionAngles(NamedTuple):
    azimuth: float
    elevation: float


@dataclass(frozen=True)
class Scenario:
    """All node positions plus the propagation constants of the link.

    Positions are 3-vectors in meters: ``p_B`` base station, ``p_R`` RIS,
    ``p_U`` receiving UE and ``p_D`` the drone.  ``noise_power_w`` defaults
    to thermal noise over ``bandwidth_hz``.
    """

    p_B: np.ndarray
    p_R: np.ndarray
    p_U: np.ndarray
    p_D: np.ndarray
    lam: float = 0.01
    gamma: float = 2.0
    zeta: complex = 1.0 + 0.0j
    bandwidth_hz: float = 20e6
    noise_power_w: float | None = field(default=None)

    def __post_init__(self):
        for name in ("p_B", "p_R", "p_U", "p_D"):
            object.__setattr__(self, name, as_point(getattr(self, name)))
        object.__setattr__(self, "zeta", complex(self.zeta))
        if not self.lam > 0:
            raise GeometryError(f"wavelength must be positive, got {self.lam}")
        if not self.gamma >= 0:
            raise GeometryError(f"path-loss exponent must be >= 0, got {self.gamma}")
        if not self.bandwidth_hz > 0:
            raise GeometryError(f"bandwidth must be positive, got {self.bandwidth_hz}")
        if self.noise_power_w is None:
            object.__setattr__(
                self, "noise_power_w", dbm_to_watt(thermal_noise_dbm(self.bandwidth_hz))
            )
        if not self.noise_power_w > 0:
            raise GeometryError(f"noise power must be positive, got {self.noise_power_w}")
        pts = self.positions()
        names = list(pts)
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                if distance(pts[names[i]], pts[names[j]]) == 0.0:
                    raise GeometryError(f"{names[i]} and {names[j]} coincide")

    def positions(self) -> dict:
        return {"bs": self.p_B, "ris": self.p_R, "ue": self.p_U, "drone": self.p_D}

    def replace(self, **changes) -> "Scenario":
        from dataclasses import replace

        return replace(self, **changes)


def distance(a, b) -> float:
    return float(np.linalg.norm(np.asarray(b, dtype=float) - np.asarray(a, dtype=float)))


def path_loss(d: float, gamma: float) -> float:
    """Path loss ``rho = d**gamma`` (no free-space wavelength factor)."""
    if not d > 0:
        raise GeometryError(f"path loss needs a positive distance, got {d}")
    return float(d) ** gamma


def direction_angles(frm, to) -> DirectionAngles:
    delta = np.asarray(to, dtype=float) - np.asarray(frm, dtype=float)
    d = float(np.linalg.norm(delta))
    if d == 0.0:
        raise GeometryError("direction between coincident points is undefined")
    az = math.atan2(delta[1], delta[0])
    if az == -math.pi:
        az = math.pi
    el = math.asin(max(-1.0, min(1.0, delta[2] / d)))
    return DirectionAngles(az, el)


def unit_direction(ang: DirectionAngles) -> np.ndarray:
    """Unit vector [cos az cos el, sin az cos el, sin el]."""
    az, el = ang
    return np.array([math.cos(az) * math.cos(el), math.sin(az) * math.cos(el), math.sin(el)])


def angle_gradients(anchor, target) -> np.ndarray:
    """Partial derivatives of (azimuth, elevation) of ``anchor -> target`` w.r.t. the target.

    Returns a 3x2 array; row i holds d(az)/dx_i and d(el)/dx_i.
    """
    az, el = direction_angles(anchor, target)
    d = distance(anchor, target)
    c_el = math.cos(el)
    if abs(c_el) < _COS_EPS:
        raise GeometryError("link is vertical (cos(elevation) = 0); azimuth derivative undefined")
    out = np.zeros((3, 2))
    out[0, 0] = -math.sin(az) / (d * c_el)
    out[1, 0] = math.cos(az) / (d * c_el)
    out[0, 1] = -math.cos(az) * math.sin(el) / d
    out[1, 1] = -math.sin(az) * math.sin(el) / d
    out[2, 1] = c_el / d
    return out


def jacobian_T(s: Scenario) -> np.ndarray:
    """3x10 transform from the channel parameter vector to the drone position.

    Columns follow the parameter ordering
    [Re eps~, Im eps~, Re eps^, Im eps^, az_BD, el_BD, az_RD, el_RD, az_UD, el_UD];
    the four gain columns are zero.
    """
    T = np.zeros((3, 10))
    for col, anchor in ((4, s.p_B), (6, s.p_R), (8, s.p_U)):
        T[:, col:col + 2] = angle_gradients(anchor, s.p_D)
    return T
