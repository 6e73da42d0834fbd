"""Uniform planar array responses.

Element ordering: the first-axis index varies slowest, i.e. the response is
``alpha_first kron alpha_second``.  Phases are centred on the array centroid,
so entry i of an axis factor carries the offset ``i - (m - 1) / 2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import DirectionAngles

PLANES = ("xy", "yz")


@dataclass(frozen=True)
class UpaConfig:
    """Planar array of ``m_a x m_b`` elements with spacings ``d_a``, ``d_b`` (meters).

    ``plane='xy'`` is a sky-facing array (axes x then y, RIS and UE);
    ``plane='yz'`` is the base-station array (axes y then z).
    """

    m_a: int
    m_b: int
    d_a: float
    d_b: float
    plane: str = "xy"

    def __post_init__(self):
        if int(self.m_a) < 1 or int(self.m_b) < 1:
            raise ConfigError(f"array dimensions must be >= 1, got {self.m_a}x{self.m_b}")
        if not (self.d_a > 0 and self.d_b > 0):
            raise ConfigError(f"element spacings must be positive, got {self.d_a}, {self.d_b}")
        if self.plane not in PLANES:
            raise ConfigError(f"unknown array plane {self.plane!r}, expected one of {PLANES}")

    @property
    def size(self) -> int:
        return self.m_a * self.m_b

    @classmethod
    def half_wavelength(cls, m_a, m_b, lam, plane="xy") -> "UpaConfig":
        return cls(int(m_a), int(m_b), lam / 2, lam / 2, plane)


def centered_indices(m: int) -> np.ndarray:
    return np.arange(m) - (m - 1) / 2.0


def alpha_axis(m: int, d: float, lam: float, g) -> np.ndarray:
    """Single-axis response ``exp(j 2 pi d/lam (i - (m-1)/2) g)``.

    ``g`` may be an array; the element axis is appended last.
    """
    g = np.asarray(g, dtype=float)
    phase = (2.0 * np.pi * d / lam) * np.multiply.outer(g, centered_indices(m))
    return np.exp(1j * phase)


def geometry_factors(plane: str, azimuth, elevation):
    """Per-axis factors (g_a, g_b) of a planar array."""
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    if plane == "xy":
        return np.cos(az) * np.sin(el), np.sin(az) * np.sin(el)
    if plane == "yz":
        return np.sin(az) * np.sin(el), np.cos(el)
    raise ConfigError(f"unknown array plane {plane!r}")


def axis_factors(cfg: UpaConfig, lam: float, azimuth, elevation):
    g_a, g_b = geometry_factors(cfg.plane, azimuth, elevation)
    return alpha_axis(cfg.m_a, cfg.d_a, lam, g_a), alpha_axis(cfg.m_b, cfg.d_b, lam, g_b)


def _kron_last(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = a[..., :, None] * b[..., None, :]
    return out.reshape(out.shape[:-2] + (-1,))


def steering(cfg: UpaConfig, lam: float, azimuth, elevation) -> np.ndarray:
    """Full response for either plane; broadcasts over array-valued angles."""
    a, b = axis_factors(cfg, lam, azimuth, elevation)
    return _kron_last(a, b)


def steering_xy(cfg: UpaConfig, ang: DirectionAngles, lam: float) -> np.ndarray:
    if cfg.plane != "xy":
        raise ConfigError(f"steering_xy needs an xy-plane array, got {cfg.plane!r}")
    return steering(cfg, lam, ang[0], ang[1])


def steering_yz(cfg: UpaConfig, ang: DirectionAngles, lam: float) -> np.ndarray:
    if cfg.plane != "yz":
        raise ConfigError(f"steering_yz needs a yz-plane array, got {cfg.plane!r}")
    return steering(cfg, lam, ang[0], ang[1])
