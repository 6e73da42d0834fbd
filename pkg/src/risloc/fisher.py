"""Fisher information of the channel parameters and the drone position error bound.

Parameter vector (10 reals)::

    [Re et, Im et, Re eh, Im eh, az_BD, el_BD, az_RD, el_RD, az_UD, el_UD]

``et`` is the complex gain that multiplies the *supplied* ``Omega_bar``.
Because ``SoundingFrames.Omega_bar`` carries the known BS-RIS constant
``c1``, :func:`true_params` stores ``eps_tilde / c1`` there; ``eh`` is the
single-bounce gain ``eps_hat``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .array import alpha_axis, centered_indices, geometry_factors
from .channel import ArraySet, cascade, build_channels, link_angles
from .errors import ConfigError, UnidentifiableGeometryError
from .geometry import Scenario, jacobian_T
from .sounding import SoundingFrames

log = logging.getLogger(__name__)

N_PARAMS = 10
NO_RIS_INDEX = np.array([2, 3, 4, 5, 8, 9])
COND_WARN = 1e12
COND_FAIL = 1e15


@dataclass(frozen=True)
class ParamVector:
    eps_tilde: complex
    eps_hat: complex
    az_bd: float
    el_bd: float
    az_rd: float
    el_rd: float
    az_ud: float
    el_ud: float

    def as_array(self) -> np.ndarray:
        return np.array([
            self.eps_tilde.real, self.eps_tilde.imag, self.eps_hat.real, self.eps_hat.imag,
            self.az_bd, self.el_bd, self.az_rd, self.el_rd, self.az_ud, self.el_ud,
        ])

    @classmethod
    def from_array(cls, eta) -> "ParamVector":
        e = np.asarray(eta, dtype=float)
        if e.shape != (N_PARAMS,):
            raise ConfigError(f"parameter vector must have {N_PARAMS} entries, got {e.shape}")
        return cls(complex(e[0], e[1]), complex(e[2], e[3]), *map(float, e[4:]))


@dataclass(frozen=True)
class FimResult:
    J: np.ndarray
    mu: np.ndarray
    dmu: np.ndarray
    eta: ParamVector


def true_params(s: Scenario, arrays: ArraySet, frames: SoundingFrames) -> ParamVector:
    ch = build_channels(s, arrays)
    pair = cascade(s, ch, arrays.bs.size)
    ang = link_angles(s)
    return ParamVector(
        pair.eps_tilde / frames.c1, pair.eps_hat,
        *ang["t2"], *ang["t3"], *ang["r4"],
    )


def _wavenumbers(cfg, lam):
    return 2 * np.pi * cfg.d_a / lam, 2 * np.pi * cfg.d_b / lam


def phi_matrices(eta: ParamVector, arrays: ArraySet, lam: float) -> dict[int, np.ndarray]:
    """Diagonals of the eleven phase-derivative matrices Phi_1 ... Phi_11.

    With half-wavelength spacing the wavenumber factor ``2 pi d / lam`` is pi.
    Phi_1..3 act on the (conjugated) BS factors, Phi_4..7 on the conjugated
    RIS factors and Phi_8..11 on the UE factors.
    """
    ky, kz = _wavenumbers(arrays.bs, lam)
    kx_r, ky_r = _wavenumbers(arrays.ris, lam)
    kx_u, ky_u = _wavenumbers(arrays.ue, lam)
    nB_y, nB_z = centered_indices(arrays.bs.m_a), centered_indices(arrays.bs.m_b)
    nR_x, nR_y = centered_indices(arrays.ris.m_a), centered_indices(arrays.ris.m_b)
    nU_x, nU_y = centered_indices(arrays.ue.m_a), centered_indices(arrays.ue.m_b)
    t2, p2 = eta.az_bd, eta.el_bd
    t3, p3 = eta.az_rd, eta.el_rd
    t4, p4 = eta.az_ud, eta.el_ud
    c, s = np.cos, np.sin
    return {
        1: -1j * ky * c(t2) * s(p2) * nB_y,
        2: -1j * ky * s(t2) * c(p2) * nB_y,
        3: 1j * kz * s(p2) * nB_z,
        4: 1j * kx_r * s(t3) * s(p3) * nR_x,
        5: -1j * ky_r * c(t3) * s(p3) * nR_y,
        6: -1j * kx_r * c(t3) * c(p3) * nR_x,
        7: -1j * ky_r * s(t3) * c(p3) * nR_y,
        8: -1j * kx_u * s(t4) * s(p4) * nU_x,
        9: 1j * ky_u * c(t4) * s(p4) * nU_y,
        10: 1j * kx_u * c(t4) * c(p4) * nU_x,
        11: 1j * ky_u * s(t4) * c(p4) * nU_y,
    }


def _factors(cfg, lam, az, el):
    g_a, g_b = geometry_factors(cfg.plane, az, el)
    return alpha_axis(cfg.m_a, cfg.d_a, lam, g_a), alpha_axis(cfg.m_b, cfg.d_b, lam, g_b)


def _project(A: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(A^T kron I) (u kron v) without forming the Kronecker products."""
    return np.outer(v, u @ A).ravel(order="F")


def _check_dims(frames: SoundingFrames, arrays: ArraySet):
    if frames.F_bar.shape[0] != arrays.bs.size or frames.Omega_bar.shape[0] != arrays.ris.size:
        raise ConfigError(
            f"frames ({frames.F_bar.shape[0]}, {frames.Omega_bar.shape[0]}) do not match "
            f"arrays (M_B={arrays.bs.size}, M_R={arrays.ris.size})"
        )


def mean_signal(eta: ParamVector, frames: SoundingFrames, arrays: ArraySet, lam: float) -> np.ndarray:
    """Noise- and interference-free vectorised block (length M_U K, column-major)."""
    _check_dims(frames, arrays)
    By, Bz = _factors(arrays.bs, lam, eta.az_bd, eta.el_bd)
    Rx, Ry = _factors(arrays.ris, lam, eta.az_rd, eta.el_rd)
    a_U = np.kron(*_factors(arrays.ue, lam, eta.az_ud, eta.el_ud))
    b_R = np.kron(Rx, Ry).conj()
    b_B = np.kron(By, Bz).conj()
    return frames.s0 * (eta.eps_tilde * _project(frames.Omega_bar, b_R, a_U)
                        + eta.eps_hat * _project(frames.F_bar, b_B, a_U))


def mean_derivatives(eta: ParamVector, frames: SoundingFrames, arrays: ArraySet,
                     lam: float) -> np.ndarray:
    """Analytic d(mu)/d(eta_n), one column per parameter."""
    _check_dims(frames, arrays)
    phi = phi_matrices(eta, arrays, lam)
    By, Bz = (f.conj() for f in _factors(arrays.bs, lam, eta.az_bd, eta.el_bd))
    Rx, Ry = (f.conj() for f in _factors(arrays.ris, lam, eta.az_rd, eta.el_rd))
    Ux, Uy = _factors(arrays.ue, lam, eta.az_ud, eta.el_ud)
    b_B, b_R, a_U = np.kron(By, Bz), np.kron(Rx, Ry), np.kron(Ux, Uy)
    Om, Fb, s0 = frames.Omega_bar, frames.F_bar, frames.s0
    et, eh = eta.eps_tilde, eta.eps_hat

    dU_az = np.kron(phi[8] * Ux, Uy) + np.kron(Ux, phi[9] * Uy)
    dU_el = np.kron(phi[10] * Ux, Uy) + np.kron(Ux, phi[11] * Uy)

    d = np.empty((a_U.size * frames.K, N_PARAMS), dtype=complex)
    d[:, 0] = s0 * _project(Om, b_R, a_U)
    d[:, 1] = 1j * d[:, 0]
    d[:, 2] = s0 * _project(Fb, b_B, a_U)
    d[:, 3] = 1j * d[:, 2]
    d[:, 4] = s0 * eh * _project(Fb, np.kron(phi[1] * By, Bz), a_U)
    d[:, 5] = s0 * eh * _project(Fb, np.kron(phi[2] * By, Bz) + np.kron(By, phi[3] * Bz), a_U)
    d[:, 6] = s0 * et * _project(Om, np.kron(phi[4] * Rx, Ry) + np.kron(Rx, phi[5] * Ry), a_U)
    d[:, 7] = s0 * et * _project(Om, np.kron(phi[6] * Rx, Ry) + np.kron(Rx, phi[7] * Ry), a_U)
    d[:, 8] = s0 * (et * _project(Om, b_R, dU_az) + eh * _project(Fb, b_B, dU_az))
    d[:, 9] = s0 * (et * _project(Om, b_R, dU_el) + eh * _project(Fb, b_B, dU_el))
    return d


def fim(dmu: np.ndarray, sigma2: float) -> np.ndarray:
    """[J]_mn = 2/sigma2 Re(dmu_m^H dmu_n)."""
    G = dmu.conj().T @ dmu
    J = (2.0 / sigma2) * G.real
    return 0.5 * (J + J.T)


def _spd_trace_inverse(M: np.ndarray, what: str) -> float:
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    if w[-1] <= 0:
        raise UnidentifiableGeometryError(f"{what} is identically zero", np.inf)
    cond = w[-1] / w[0] if w[0] > 0 else np.inf
    if cond > COND_FAIL:
        raise UnidentifiableGeometryError(
            f"{what} is singular (condition number {cond:.3e})", cond
        )
    if cond > COND_WARN:
        log.warning("%s is ill-conditioned (condition number %.3e)", what, cond)
    return float(np.sum(1.0 / w))


def peb(J: np.ndarray, T: np.ndarray, method: str = "verbatim") -> float:
    """Position error bound in meters.

    ``verbatim``: sqrt(tr((T J T^T)^-1)).  Columns of T that are zero (gain
    parameters) drop out, i.e. the gains are treated as known.
    ``efim``: the angle block is first replaced by its Schur complement with
    respect to the zero-column (nuisance) parameters, then mapped through T.
    """
    if method == "verbatim":
        return float(np.sqrt(_spd_trace_inverse(T @ J @ T.T, "position information T J T^T")))
    if method == "efim":
        nuis = np.flatnonzero(~np.any(T != 0, axis=0))
        keep = np.flatnonzero(np.any(T != 0, axis=0))
        Jaa = J[np.ix_(keep, keep)]
        if nuis.size:
            Jan = J[np.ix_(keep, nuis)]
            Jnn = J[np.ix_(nuis, nuis)]
            Jaa = Jaa - Jan @ np.linalg.solve(Jnn, Jan.T)
        Ta = T[:, keep]
        return float(np.sqrt(_spd_trace_inverse(Ta @ Jaa @ Ta.T, "equivalent position information")))
    raise ConfigError(f"unknown bound method {method!r}")


def fisher_information(s: Scenario, arrays: ArraySet, frames: SoundingFrames,
                       sigma2: float | None = None) -> FimResult:
    sigma2 = s.noise_power_w if sigma2 is None else sigma2
    eta = true_params(s, arrays, frames)
    dmu = mean_derivatives(eta, frames, arrays, s.lam)
    return FimResult(J=fim(dmu, sigma2), mu=mean_signal(eta, frames, arrays, s.lam), dmu=dmu, eta=eta)


def position_bound(s: Scenario, arrays: ArraySet, frames: SoundingFrames,
                   sigma2: float | None = None, method: str = "verbatim") -> float:
    """PEB at the scenario's drone position.

    Frames without the RIS use the reduced 6-parameter model (eps_hat and the
    BS/UE angle pairs).
    """
    res = fisher_information(s, arrays, frames, sigma2)
    T = jacobian_T(s)
    J = res.J
    if not frames.ris_enabled:
        J = J[np.ix_(NO_RIS_INDEX, NO_RIS_INDEX)]
        T = T[:, NO_RIS_INDEX]
    return peb(J, T, method)
