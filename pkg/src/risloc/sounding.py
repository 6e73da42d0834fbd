"""BS dual-beam design, RIS phase profiles and the effective training matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .array import UpaConfig, steering
from .channel import ArraySet, complex_gain, link_angles, link_distances
from .errors import ConfigError, InfeasibleDesignError
from .geometry import Scenario

RIS_POLICIES = ("codebook", "random-phase")
SKY_POLICIES = ("random", "directional")


@dataclass(frozen=True)
class SoundingConfig:
    """Beam policies.

    Sector bounds are in radians and grids are (n_azimuth, n_elevation).
    With ``paired`` set, slots come in pairs (2j, 2j+1) that repeat the BS
    sky beam while the RIS profile flips sign, which makes the RIS echo and
    the direct echo occupy orthogonal slot patterns.
    """

    ris_policy: str = "codebook"
    azimuth_range: tuple = (0.0, math.pi / 2)
    elevation_range: tuple = (math.pi / 4, math.pi / 2)
    grid: tuple = (6, 5)
    sky_policy: str = "directional"
    bs_azimuth_range: tuple = (0.0, math.pi / 2)
    bs_elevation_range: tuple = (math.radians(20.0), math.radians(70.0))
    bs_grid: tuple = (4, 3)
    paired: bool = True

    def __post_init__(self):
        if self.ris_policy not in RIS_POLICIES:
            raise ConfigError(f"unknown RIS policy {self.ris_policy!r}, expected one of {RIS_POLICIES}")
        if self.sky_policy not in SKY_POLICIES:
            raise ConfigError(f"unknown sky-beam policy {self.sky_policy!r}, expected one of {SKY_POLICIES}")
        if min(self.grid) < 1 or min(self.bs_grid) < 1:
            raise ConfigError(f"codebook grids must be at least 1x1, got {self.grid}, {self.bs_grid}")


@dataclass(frozen=True)
class SoundingFrames:
    """Designed beams for K slots.

    ``Omega_bar`` already carries the known BS-RIS constant ``c1`` (MRT gain
    times the BS-RIS propagation gain), so the noise-free received block is
    ``sqrt(P/2) * (zeta h4) (h3 Omega_bar + h2 F_bar)`` plus the direct-link term.
    """

    f0: np.ndarray
    g0: np.ndarray
    fk: np.ndarray
    omega: np.ndarray
    Omega_bar: np.ndarray
    F_bar: np.ndarray
    c1: complex
    power_w: float = 1.0
    ris_enabled: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.F_bar.shape[1]

    @property
    def s0(self) -> float:
        return math.sqrt(self.power_w / 2)

    @property
    def sk(self) -> float:
        return math.sqrt(self.power_w / 2)

    @property
    def Omega_plain(self) -> np.ndarray:
        """Omega_bar without the absorbed constant (diag(RIS arrival response) omega_k)."""
        return self.Omega_bar / self.c1

    def with_power(self, power_w: float) -> "SoundingFrames":
        return replace(self, power_w=float(power_w))

    def without_ris(self) -> "SoundingFrames":
        return replace(self, Omega_bar=np.zeros_like(self.Omega_bar), ris_enabled=False)

    def prefix(self, K: int) -> "SoundingFrames":
        """First ``K`` slots (nested frame sets)."""
        if not 1 <= K <= self.K:
            raise ConfigError(f"prefix length {K} outside 1..{self.K}")
        return replace(
            self,
            fk=self.fk[:, :K],
            omega=self.omega[:, :K],
            Omega_bar=self.Omega_bar[:, :K],
            F_bar=self.F_bar[:, :K],
        )


def design_f0(bs: UpaConfig, s: Scenario) -> np.ndarray:
    """MRT beam: the BS response towards the RIS."""
    return steering(bs, s.lam, *link_angles(s)["t1"])


def design_g0(bs: UpaConfig, s: Scenario) -> np.ndarray:
    return steering(bs, s.lam, *link_angles(s)["t5"])


def _null_space(A: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    _, sv, vh = np.linalg.svd(A)
    rank = int(np.sum(sv > rtol * sv[0])) if sv.size else 0
    return vh[rank:].conj().T


def _slot_pattern(K: int, paired: bool):
    """Distinct-beam index and sign of every slot."""
    k = np.arange(K)
    if not paired:
        return k, np.ones(K)
    return k // 2, np.where(k % 2 == 0, 1.0, -1.0)


def _grid_order(n: int) -> np.ndarray:
    """Golden-ratio stepping through n cells so that every prefix is spread out."""
    if n <= 2:
        return np.arange(n)
    step = max(1, int(round(n * 0.6180339887)))
    while math.gcd(step, n) != 1:
        step += 1
    return (np.arange(n) * step) % n


def design_sky_beams(bs: UpaConfig, s: Scenario, K: int, seed: int,
                     cfg: SoundingConfig | None = None) -> np.ndarray:
    """Sky beams in the null space of [f0, g0]^H, each of norm sqrt(M_B).

    ``directional``: BS responses towards a grid over the BS sky sector,
    projected onto the null space.  ``random``: i.i.d. complex Gaussian
    coordinates in a null-space basis.  Beams are generated in slot order,
    so a K'-slot design is the prefix of a K-slot design with the same seed.
    """
    cfg = cfg or SoundingConfig()
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    m = bs.size
    if m <= 2:
        raise InfeasibleDesignError(f"BS array of {m} antennas has no room for sky beams")
    F = np.column_stack([design_f0(bs, s), design_g0(bs, s)])
    basis = _null_space(F.conj().T)
    beam_of_slot, _ = _slot_pattern(K, cfg.paired)
    n_beams = int(beam_of_slot[-1]) + 1
    if cfg.sky_policy == "random":
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
        z = rng.standard_normal((n_beams, basis.shape[1], 2))
        fk = basis @ (z[..., 0] + 1j * z[..., 1]).T
    else:
        dirs = codebook_directions(cfg.bs_azimuth_range, cfg.bs_elevation_range, cfg.bs_grid)
        pick = dirs[np.arange(n_beams) % len(dirs)]
        target = steering(bs, s.lam, pick[:, 0], pick[:, 1]).T
        fk = basis @ (basis.conj().T @ target)
    fk = fk * (math.sqrt(m) / np.linalg.norm(fk, axis=0))
    return fk[:, beam_of_slot]


def codebook_directions(azimuth_range, elevation_range, grid) -> np.ndarray:
    """Cell-centred (azimuth, elevation) grid over a sector, in visiting order."""
    n_az, n_el = grid
    az_lo, az_hi = azimuth_range
    el_lo, el_hi = elevation_range
    az = az_lo + (np.arange(n_az) + 0.5) * (az_hi - az_lo) / n_az
    el = el_lo + (np.arange(n_el) + 0.5) * (el_hi - el_lo) / n_el
    A, E = np.meshgrid(az, el, indexing="ij")
    cells = np.column_stack([A.ravel(), E.ravel()])
    return cells[_grid_order(len(cells))]


def design_ris_profiles(ris: UpaConfig, s: Scenario, K: int, seed: int,
                        cfg: SoundingConfig | None = None) -> np.ndarray:
    """Unit-modulus RIS profiles, one column per slot.

    ``codebook``: conjugate-phase beams re-pointing the BS illumination to the
    codebook directions, cycled over the distinct beams.  ``random-phase``:
    i.i.d. uniform phases.  In paired mode the second slot of each pair uses
    the negated profile.
    """
    cfg = cfg or SoundingConfig()
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    beam_of_slot, sign = _slot_pattern(K, cfg.paired)
    n_beams = int(beam_of_slot[-1]) + 1
    if cfg.ris_policy == "random-phase":
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2]))
        profiles = np.exp(2j * np.pi * rng.random((n_beams, ris.size))).T
    else:
        dirs = codebook_directions(cfg.azimuth_range, cfg.elevation_range, cfg.grid)
        pick = dirs[np.arange(n_beams) % len(dirs)]
        beams = steering(ris, s.lam, pick[:, 0], pick[:, 1])
        a_in = steering(ris, s.lam, *link_angles(s)["r1"])
        profiles = (beams * a_in.conj()).T
    return profiles[:, beam_of_slot] * sign


def assemble_effective(s: Scenario, arrays: ArraySet, f0: np.ndarray, fk: np.ndarray,
                       omega: np.ndarray):
    """Return ``(Omega_bar, F_bar, c1)``.

    ``c1 = g1 * a_B(t1)^H f0`` equals ``M_B exp(-j 2 pi d1/lam)/sqrt(rho1)``
    for the MRT beam.
    """
    if fk.shape[0] != arrays.bs.size or f0.shape != (arrays.bs.size,):
        raise ConfigError(f"BS beam sizes {f0.shape}, {fk.shape} do not match M_B={arrays.bs.size}")
    if omega.shape[0] != arrays.ris.size:
        raise ConfigError(f"RIS profile height {omega.shape[0]} does not match M_R={arrays.ris.size}")
    if omega.shape[1] != fk.shape[1]:
        raise ConfigError(f"slot counts differ: {omega.shape[1]} RIS profiles vs {fk.shape[1]} beams")
    ang = link_angles(s)
    g1 = complex_gain(link_distances(s)[1], s)
    c1 = complex(g1 * np.vdot(steering(arrays.bs, s.lam, *ang["t1"]), f0))
    a_in = steering(arrays.ris, s.lam, *ang["r1"])
    Omega_bar = c1 * (a_in[:, None] * omega)
    F_bar = f0[:, None] + fk
    return Omega_bar, F_bar, c1


def design_frames(s: Scenario, arrays: ArraySet, K: int, seed: int = 0,
                  cfg: SoundingConfig | None = None, power_w: float = 1.0,
                  ris_enabled: bool = True) -> SoundingFrames:
    cfg = cfg or SoundingConfig()
    f0 = design_f0(arrays.bs, s)
    fk = design_sky_beams(arrays.bs, s, K, seed, cfg)
    omega = design_ris_profiles(arrays.ris, s, K, seed, cfg)
    Omega_bar, F_bar, c1 = assemble_effective(s, arrays, f0, fk, omega)
    frames = SoundingFrames(
        f0=f0, g0=design_g0(arrays.bs, s), fk=fk, omega=omega, Omega_bar=Omega_bar,
        F_bar=F_bar, c1=c1, power_w=float(power_w), meta={"seed": seed, "config": cfg},
    )
    return frames if ris_enabled else frames.without_ris()
