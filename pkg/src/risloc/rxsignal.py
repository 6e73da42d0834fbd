"""Received K-slot block at the UE."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, cascade
from .geometry import Scenario
from .sounding import SoundingFrames

log = logging.getLogger(__name__)

# relative residual tolerance for H5 f_k = 0
_NULL_TOL = 1e-10


@dataclass(frozen=True)
class ReceivedBlock:
    Y: np.ndarray
    sigma2: float
    seed: int | None
    interference_known: np.ndarray

    def cleaned(self) -> np.ndarray:
        """Y with the fully known direct-link term removed."""
        return self.Y - self.interference_known


def snr_to_power(snr_db: float, sigma2: float) -> float:
    """Pilot power P such that P / sigma2 equals ``snr_db``."""
    return sigma2 * 10.0 ** (snr_db / 10.0)


def complex_noise(shape, sigma2: float, seed: int) -> np.ndarray:
    """CN(0, sigma2) noise, one counter-based stream per slot (column).

    Column k depends only on ``(seed, k)``, so shorter blocks are prefixes
    of longer ones.
    """
    m, K = shape
    out = np.empty((m, K), dtype=complex)
    scale = math.sqrt(sigma2 / 2.0)
    for k in range(K):
        bitgen = np.random.Philox(np.random.SeedSequence([int(seed), k]))
        z = np.random.Generator(bitgen).standard_normal((2, m))
        out[:, k] = scale * (z[0] + 1j * z[1])
    return out


def interference_residual(ch: ChannelSet, frames: SoundingFrames) -> float:
    """max_k ||H5 f_k|| relative to ||H5||_F sqrt(M_B)."""
    ref = np.linalg.norm(ch.H5) * math.sqrt(frames.f0.size)
    return float(np.max(np.linalg.norm(ch.H5 @ frames.fk, axis=0)) / ref)


def noise_free_target(s: Scenario, ch: ChannelSet, frames: SoundingFrames) -> np.ndarray:
    """sqrt(P/2) (H~ Omega + H^ F_bar): the drone echo without the direct link."""
    pair = cascade(s, ch, frames.f0.size)
    return frames.s0 * (pair.H_tilde @ frames.Omega_plain + pair.H_hat @ frames.F_bar)


def synthesize(s: Scenario, ch: ChannelSet, frames: SoundingFrames, seed: int | None = 0,
               sigma2: float | None = None, noise: bool = True) -> ReceivedBlock:
    sigma2 = s.noise_power_w if sigma2 is None else sigma2
    resid = interference_residual(ch, frames)
    if resid > _NULL_TOL:
        log.warning("sky beams leak into the direct link: relative residual %.3e", resid)
    interference = frames.s0 * (ch.H5 @ frames.F_bar)
    Y = noise_free_target(s, ch, frames) + interference
    if noise and sigma2 > 0:
        Y = Y + complex_noise(Y.shape, sigma2, 0 if seed is None else seed)
    return ReceivedBlock(Y=Y, sigma2=float(sigma2), seed=seed, interference_known=interference)
