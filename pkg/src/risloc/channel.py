"""Line-of-sight channels of the BS / RIS / drone / UE link and the two cascades.

Vector channels are stored as 1-D arrays: ``h2`` (M_B,) and ``h3`` (M_R,)
act as row vectors, ``h4`` (M_U,) as a column vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .array import UpaConfig, steering
from .geometry import DirectionAngles, Scenario, direction_angles, distance, path_loss


class ArraySet(NamedTuple):
    bs: UpaConfig
    ris: UpaConfig
    ue: UpaConfig


def default_arrays(lam: float = 0.01) -> ArraySet:
    return ArraySet(
        bs=UpaConfig.half_wavelength(8, 8, lam, "yz"),
        ris=UpaConfig.half_wavelength(6, 6, lam, "xy"),
        ue=UpaConfig.half_wavelength(4, 4, lam, "xy"),
    )


def link_angles(s: Scenario) -> dict[str, DirectionAngles]:
    """Departure (``t*``) and arrival (``r*``) angles of every link."""
    return {
        "t1": direction_angles(s.p_B, s.p_R),
        "r1": direction_angles(s.p_R, s.p_B),
        "t2": direction_angles(s.p_B, s.p_D),
        "t3": direction_angles(s.p_R, s.p_D),
        "r4": direction_angles(s.p_U, s.p_D),
        "t5": direction_angles(s.p_B, s.p_U),
        "r5": direction_angles(s.p_U, s.p_B),
    }


def link_distances(s: Scenario) -> dict[int, float]:
    return {
        1: distance(s.p_B, s.p_R),
        2: distance(s.p_B, s.p_D),
        3: distance(s.p_R, s.p_D),
        4: distance(s.p_U, s.p_D),
        5: distance(s.p_B, s.p_U),
    }


def complex_gain(d: float, s: Scenario) -> complex:
    """exp(-j 2 pi d / lambda) / sqrt(rho)."""
    return complex(np.exp(-2j * np.pi * d / s.lam) / np.sqrt(path_loss(d, s.gamma)))


@dataclass(frozen=True)
class ChannelSet:
    H1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    h4: np.ndarray
    H5: np.ndarray
    angles: dict
    distances: dict
    gains: dict


@dataclass(frozen=True)
class CascadePair:
    H_tilde: np.ndarray
    H_hat: np.ndarray
    eps_tilde: complex
    eps_hat: complex


def build_channels(s: Scenario, arrays: ArraySet) -> ChannelSet:
    ang = link_angles(s)
    dist = link_distances(s)
    gains = {i: complex_gain(d, s) for i, d in dist.items()}

    def resp(cfg, key):
        return steering(cfg, s.lam, *ang[key])

    a_B1, a_R1 = resp(arrays.bs, "t1"), resp(arrays.ris, "r1")
    a_B5, a_U5 = resp(arrays.bs, "t5"), resp(arrays.ue, "r5")
    return ChannelSet(
        H1=gains[1] * np.outer(a_R1, a_B1.conj()),
        h2=gains[2] * resp(arrays.bs, "t2").conj(),
        h3=gains[3] * resp(arrays.ris, "t3").conj(),
        h4=gains[4] * resp(arrays.ue, "r4"),
        H5=gains[5] * np.outer(a_U5, a_B5.conj()),
        angles=ang,
        distances=dist,
        gains=gains,
    )


def cascade(s: Scenario, ch: ChannelSet, m_bs: int | None = None) -> CascadePair:
    """Double-bounce (BS-RIS-drone-UE) and single-bounce (BS-drone-UE) cascades.

    ``m_bs`` is the BS array size (the MRT gain towards the RIS); it defaults
    to the width of ``H1``.
    """
    m_bs = ch.H1.shape[1] if m_bs is None else m_bs
    g = ch.gains
    c1 = m_bs * g[1]
    H_tilde = s.zeta * c1 * np.outer(ch.h4, ch.h3)
    H_hat = s.zeta * np.outer(ch.h4, ch.h2)
    eps_tilde = s.zeta * c1 * g[4] * g[3]
    eps_hat = s.zeta * g[4] * g[2]
    return CascadePair(H_tilde, H_hat, complex(eps_tilde), complex(eps_hat))
