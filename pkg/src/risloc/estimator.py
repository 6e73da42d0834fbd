"""Three-stage drone localizer.

1. Coordinate gradient descent on the bilinear residual
   ``f(h2, h3, h4) = ||Y - sqrt(P/2) h4 (h3 Omega_bar + h2 F_bar)||_F^2``,
   cycling h4, h2, h3.  ``h4`` absorbs the drone reflection coefficient.
2. Two-dimensional matched-filter search for the three link angle pairs.
3. Least-squares intersection of the three anchor rays.

Gradients follow the conjugate (Wirtinger) convention ``A^H (A x - y)``; the
real gradient with respect to the stacked (Re, Im) parts is twice the real
and imaginary parts of it.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .array import UpaConfig, steering
from .channel import ArraySet
from .errors import ConfigError, DegenerateInputError, DivergenceError, GeometryError, RislocError
from .geometry import DirectionAngles, Scenario, unit_direction
from .rxsignal import ReceivedBlock
from .sounding import SoundingFrames

log = logging.getLogger(__name__)

STEP_POLICIES = ("backtracking", "fixed")
INIT_POLICIES = ("random", "truth-perturbed")
LINKS = ("bs-drone", "ris-drone", "ue-drone")


@dataclass(frozen=True)
class CgdConfig:
    """CGD settings.

    ``initial_step`` is relative to the exact quadratic line-search step of
    each block (backtracking) or to the inverse block Lipschitz constant
    (fixed), so it is independent of the absolute signal scale.
    """

    max_iters: int = 500
    step_policy: str = "backtracking"
    initial_step: float = 1.0
    tol: float = 1e-8
    restarts: int = 8
    init_policy: str = "random"
    perturbation: float = 0.05
    armijo: float = 1e-4
    subtract_interference: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.initial_step > 0:
            raise ConfigError(f"initial_step must be positive, got {self.initial_step}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")
        if self.step_policy not in STEP_POLICIES:
            raise ConfigError(f"unknown step policy {self.step_policy!r}")
        if self.init_policy not in INIT_POLICIES:
            raise ConfigError(f"unknown init policy {self.init_policy!r}")


@dataclass
class ChannelEstimates:
    h2_hat: np.ndarray
    h3_hat: np.ndarray
    h4_hat: np.ndarray
    objective_trace: list
    iterations: int
    restart: int
    objective: float


@dataclass(frozen=True)
class SearchGrid:
    """Admissible sector and grid steps, all in degrees."""

    azimuth: tuple = (-180.0, 180.0)
    elevation: tuple = (0.0, 90.0)
    coarse_step: float = 1.0
    fine_step: float = 0.01

    @property
    def full_circle(self) -> bool:
        return self.azimuth[1] - self.azimuth[0] >= 360.0


DEFAULT_GRIDS = {
    "bs-drone": SearchGrid(azimuth=(-90.0, 90.0)),
    "ris-drone": SearchGrid(),
    "ue-drone": SearchGrid(),
}


@dataclass
class LocalizationResult:
    p_hat: np.ndarray
    angles: dict
    estimates: ChannelEstimates
    error_m: float | None = None
    diagnostics: dict = field(default_factory=dict)


# -- stage 1: coordinate gradient descent ------------------------------------


def _model_rows(frames: SoundingFrames, h2, h3):
    return frames.s0 * (h3 @ frames.Omega_bar + h2 @ frames.F_bar)


def objective(Y, frames: SoundingFrames, h2, h3, h4) -> float:
    G = _model_rows(frames, h2, h3)
    return float(np.linalg.norm(Y - np.outer(h4, G)) ** 2)


def gradients(Y, frames: SoundingFrames, h2, h3, h4):
    """(df/dh4*, df/dh2*, df/dh3*) at one point, without forming Kronecker operators."""
    s0 = frames.s0
    G = _model_rows(frames, h2, h3)
    E = Y - np.outer(h4, G)
    r = h4.conj() @ E
    g4 = -(E @ G.conj())
    g2 = -s0 * (frames.F_bar.conj() @ r)
    g3 = -s0 * (frames.Omega_bar.conj() @ r)
    return g4, g2, g3


def gradients_kron(Y, frames: SoundingFrames, h2, h3, h4):
    """Same gradients built from the explicit operators B, C, D and residuals Y1, Y2."""
    s0 = frames.s0
    m_u = h4.size
    col = h4.reshape(-1, 1)
    D = np.kron((s0 * (h3 @ frames.Omega_bar) + s0 * (h2 @ frames.F_bar)).reshape(-1, 1), np.eye(m_u))
    B = s0 * np.kron(frames.F_bar.T, col)
    C = s0 * np.kron(frames.Omega_bar.T, col)
    Y1 = Y - s0 * np.outer(h4, h3 @ frames.Omega_bar)
    Y2 = Y - s0 * np.outer(h4, h2 @ frames.F_bar)
    vec = lambda M: M.ravel(order="F")  # noqa: E731
    g4 = D.conj().T @ (D @ h4) - D.conj().T @ vec(Y)
    g2 = B.conj().T @ (B @ h2) - B.conj().T @ vec(Y1)
    g3 = C.conj().T @ (C @ h3) - C.conj().T @ vec(Y2)
    return g4, g2, g3


def _residual_norms(Y, h4, G):
    """Row-wise ||Y_r - h4_r G_r||_F^2 for stacked blocks Y (R, M_U, K)."""
    E = Y - h4[:, :, None] * G[:, None, :]
    f = E.reshape(E.shape[0], -1).view(np.float64)
    return np.einsum("rk,rk->r", f, f)


def _sq(v):
    # row-wise ||v||^2 through the interleaved (re, im) float view
    f = np.ascontiguousarray(v).view(np.float64)
    return np.einsum("rk,rk->r", f, f)


def _re_inner(a, b):
    """Row-wise Re(a^H b)."""
    return np.einsum("rk,rk->r", np.ascontiguousarray(a).view(np.float64),
                     np.ascontiguousarray(b).view(np.float64))


class _Problem:
    """Block updates of the bilinear objective for a stack of rows.

    Row r carries its own received block ``Y[r]`` and iterate; rows are
    (trial, restart) pairs.  The objective is evaluated through the reduction
    ``||Y||^2 - 2 Re<h4^H Y, G> + ||h4||^2 ||G||^2`` (or the mirrored form
    for the h4 block), so line-search trials cost O(K) per row.
    """

    def __init__(self, Y, frames: SoundingFrames, cfg: CgdConfig):
        self.Y = Y
        self.y2 = _sq(Y.reshape(Y.shape[0], -1))
        self.Om = frames.Omega_bar
        self.Fb = frames.F_bar
        self.OmH = self.Om.conj().T.copy()
        self.FbH = self.Fb.conj().T.copy()
        self.s0 = frames.s0
        self.cfg = cfg
        self.L_F = np.linalg.norm(self.Fb, 2) ** 2
        self.L_O = np.linalg.norm(self.Om, 2) ** 2 if np.any(self.Om) else 0.0

    def rows(self, h2, h3):
        return self.s0 * (h3 @ self.Om + h2 @ self.Fb)

    def f(self, h2, h3, h4):
        return _residual_norms(self.Y, h4, self.rows(h2, h3))

    def project(self, h4):
        """(h4^H Y, ||h4||^2) per row."""
        return np.matmul(h4.conj()[:, None, :], self.Y)[:, 0], _sq(h4)

    def _accept(self, f0, gsq, t, fval):
        """Armijo backtracking on a batch of steps ``t``; returns (t, f).

        ``fval(t)`` is the objective after a step of length t along -g.
        Steps that still fail after 60 halvings are rejected (t = 0).
        """
        fnew = fval(t)
        if self.cfg.step_policy == "fixed":
            return t, fnew
        bad = fnew > f0 - self.cfg.armijo * t * gsq
        for _ in range(60):
            if not np.any(bad):
                return t, fnew
            t = np.where(bad, 0.5 * t, t)
            fnew = np.where(bad, fval(t), fnew)
            bad = fnew > f0 - self.cfg.armijo * t * gsq
        return np.where(bad, 0.0, t), np.where(bad, f0, fnew)

    def step_h4(self, h4, G):
        Gsq = _sq(G)
        w = np.matmul(self.Y, G.conj()[:, :, None])[:, :, 0]  # rows of Y G^H
        g = h4 * Gsq[:, None] - w
        gsq = _sq(g)

        def fval(t):
            h = h4 - t[:, None] * g
            return self.y2 - 2.0 * _re_inner(h, w) + Gsq * _sq(h)

        # the h4 block is isotropic: 1/||G||^2 is both the Lipschitz step and the exact one
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = self.cfg.initial_step * np.where(Gsq > 0, 1.0 / Gsq, 0.0)
        t, f = self._accept(fval(np.zeros_like(t0)), gsq, t0, fval)
        return h4 - t[:, None] * g, f

    def step_right(self, z, n4, P_other, P, x, A, AH, L):
        """One gradient step on a right factor x with row contribution P = s0 x A.

        Returns the new (x, P, f).
        """
        G = P_other + P
        r = z - n4[:, None] * G
        g = -self.s0 * (r @ AH)
        gsq = _sq(g)
        gA = self.s0 * (g @ A)

        def fval(t):
            Gt = G - t[:, None] * gA
            return self.y2 - 2.0 * _re_inner(z, Gt) + n4 * _sq(Gt)

        if self.cfg.step_policy == "fixed":
            lip = self.s0 ** 2 * n4 * L
            with np.errstate(divide="ignore", invalid="ignore"):
                base = np.where(lip > 0, 1.0 / lip, 0.0)
        else:
            denom = n4 * _sq(gA)
            with np.errstate(divide="ignore", invalid="ignore"):
                base = np.where(denom > 0, gsq / denom, 0.0)
        t, f = self._accept(fval(np.zeros_like(base)), gsq, self.cfg.initial_step * base, fval)
        return x - t[:, None] * g, P - t[:, None] * gA, f


def _initial_point(frames, cfg, seed, truth, m_u):
    R = cfg.restarts
    m_b, m_r = frames.F_bar.shape[0], frames.Omega_bar.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
    if cfg.init_policy == "truth-perturbed":
        if truth is None:
            raise ConfigError("truth-perturbed initialisation needs the true channels")
        out = []
        for key, size in (("h2", m_b), ("h3", m_r), ("h4", m_u)):
            v = np.asarray(truth[key], dtype=complex)
            z = rng.standard_normal((R, size)) + 1j * rng.standard_normal((R, size))
            scale = cfg.perturbation * np.linalg.norm(v) / math.sqrt(2 * size)
            out.append(v[None, :] + scale * z)
        return out
    z = rng.standard_normal((R, m_u)) + 1j * rng.standard_normal((R, m_u))
    # zero right factors keep h2/h3 inside the row spaces of F_bar / Omega_bar
    return [np.zeros((R, m_b), complex), np.zeros((R, m_r), complex), z / math.sqrt(2)]


def cgd_estimate_batch(Ys, frames: SoundingFrames, cfg: CgdConfig | None = None,
                       seeds=None, truth: dict | None = None) -> list:
    """Run CGD on several interference-free blocks that share ``frames``.

    Every (block, restart) pair is an independent row; rows that meet the
    stopping rule are frozen while the others continue.  Block ``i`` uses
    initial points drawn from ``seeds[i]``, so its result does not depend
    on which other blocks share the batch.  A block in which any restart
    produces a non-finite objective is returned as a :class:`DivergenceError`
    instead of an estimate.
    """
    cfg = cfg or CgdConfig()
    Ys = np.asarray(Ys, dtype=complex)
    if Ys.ndim == 2:
        Ys = Ys[None]
    n, m_u, K = Ys.shape
    seeds = list(range(n)) if seeds is None else list(seeds)
    if len(seeds) != n:
        raise ConfigError(f"{len(seeds)} seeds for {n} blocks")
    if K != frames.K:
        raise ConfigError(f"Y has {K} slots but frames carry {frames.K}")
    n_unknown = frames.F_bar.shape[0] + frames.Omega_bar.shape[0] + m_u
    if m_u * K < n_unknown:
        log.warning("K*M_U = %d is below the number of unknowns %d", m_u * K, n_unknown)

    R = cfg.restarts
    prob = _Problem(np.repeat(Ys, R, axis=0), frames, cfg)
    starts = [_initial_point(frames, cfg, sd, truth, m_u) for sd in seeds]
    h2, h3, h4 = (np.concatenate([st[i] for st in starts]) for i in range(3))
    rows = n * R
    f = prob.f(h2, h3, h4)
    trace = np.full((cfg.max_iters + 1, rows), np.nan)
    trace[0] = f
    active = np.ones(rows, dtype=bool)
    iters = np.zeros(rows, dtype=int)
    diverged = np.zeros(rows, dtype=bool)
    use_ris = frames.ris_enabled and np.any(frames.Omega_bar)

    P2 = frames.s0 * (h2 @ frames.F_bar)
    P3 = frames.s0 * (h3 @ frames.Omega_bar)
    for it in range(cfg.max_iters):
        if not np.any(active):
            break
        a4, _ = prob.step_h4(h4, P2 + P3)
        z, n4 = prob.project(a4)
        a2, Q2, f_new = prob.step_right(z, n4, P3, P2, h2, prob.Fb, prob.FbH, prob.L_F)
        a3, Q3 = h3, P3
        if use_ris:
            a3, Q3, f_new = prob.step_right(z, n4, Q2, P3, h3, prob.Om, prob.OmH, prob.L_O)
        bad = active & ~np.isfinite(f_new)
        if np.any(bad):
            diverged |= bad
            active = active & ~bad
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(f > 0, (f - f_new) / f, 0.0)
        keep = active[:, None]
        h2, h3, h4 = np.where(keep, a2, h2), np.where(keep, a3, h3), np.where(keep, a4, h4)
        P2, P3 = np.where(keep, Q2, P2), np.where(keep, Q3, P3)
        f = np.where(active, f_new, f)
        iters += active
        trace[it + 1, active] = f_new[active]
        active = active & (rel >= cfg.tol) & (f_new > 0)

    # direct residual for the reported values; the reduced form loses digits near zero
    f_direct = prob.f(h2, h3, h4)
    out = []
    for i in range(n):
        sl = slice(i * R, (i + 1) * R)
        if np.any(diverged[sl]):
            r = int(np.flatnonzero(diverged[sl])[0])
            out.append(DivergenceError(f"objective became non-finite in restart {r}", restart=r))
            continue
        best = i * R + int(np.argmin(f[sl]))
        out.append(ChannelEstimates(
            h2_hat=h2[best].copy(), h3_hat=h3[best].copy(), h4_hat=h4[best].copy(),
            objective_trace=trace[:iters[best] + 1, best].tolist(), iterations=int(iters[best]),
            restart=best - i * R, objective=float(f_direct[best]),
        ))
    return out


def cgd_estimate(Y: np.ndarray, frames: SoundingFrames, cfg: CgdConfig | None = None,
                 seed: int = 0, truth: dict | None = None) -> ChannelEstimates:
    """Estimate (h2, h3, zeta*h4) from an interference-free block ``Y``.

    All restarts advance together; the restart with the lowest final
    objective wins (ties go to the lower index).
    """
    Y = np.asarray(Y, dtype=complex)
    if Y.ndim != 2:
        raise ConfigError(f"Y must be M_U x K, got shape {Y.shape}")
    est = cgd_estimate_batch(Y[None], frames, cfg, [seed], truth)[0]
    if isinstance(est, DivergenceError):
        raise est
    return est


# -- stage 2: angle search ----------------------------------------------------


def _axis(lo, hi, step, closed_hi=True):
    n = int(math.floor((hi - lo) / step + 1e-9))
    vals = lo + step * np.arange(n + 1)
    return vals if closed_hi else vals[vals < hi - 1e-12]


@functools.lru_cache(maxsize=32)
def _coarse_dictionary(cfg: UpaConfig, lam: float, grid: SearchGrid):
    if grid.full_circle:
        az = _axis(grid.azimuth[0], grid.azimuth[0] + 360.0, grid.coarse_step, closed_hi=False)
        # (-180, 180]: move the -180 column to +180
        az = np.where(az <= -180.0, az + 360.0, az)
        az = np.sort(az)
    else:
        az = _axis(*grid.azimuth, grid.coarse_step)
    el = _axis(*grid.elevation, grid.coarse_step)
    A, E = np.meshgrid(az, el, indexing="ij")
    S = steering(cfg, lam, np.radians(A.ravel()), np.radians(E.ravel()))
    return A.ravel(), E.ravel(), S


def _link_vector(h_hat, link):
    h = np.asarray(h_hat, dtype=complex).ravel()
    # h2, h3 are row channels (response h a); h4 is a column channel (h^H a)
    return h.conj() if link == "ue-drone" else h


def _wrap_deg(az):
    return (az + 180.0) % 360.0 - 180.0 if az != 180.0 else 180.0


def _local_grid(grid: SearchGrid, az0, el0, half, step):
    n = int(round(2 * half / step))
    offs = -half + step * np.arange(n + 1)
    az_f = az0 + offs
    el_f = el0 + offs
    el_f = el_f[(el_f >= grid.elevation[0] - 1e-9) & (el_f <= grid.elevation[1] + 1e-9)]
    if not grid.full_circle:
        az_f = az_f[(az_f >= grid.azimuth[0] - 1e-9) & (az_f <= grid.azimuth[1] + 1e-9)]
    Af, Ef = np.meshgrid(az_f, el_f, indexing="ij")
    return Af.ravel(), Ef.ravel()


def _refine(w, cfg: UpaConfig, lam, grid: SearchGrid, az0, el0):
    """Search the fine lattice within one coarse step of the coarse peak.

    The lattice is visited in two passes (ten fine steps, then single fine
    steps around the first-pass peak); both passes lie on the same fine
    lattice, and the response is unimodal at this scale.
    """
    half, step = grid.coarse_step, grid.fine_step
    mid = 10 * step if half > 10 * step else step
    az_c, el_c = az0, el0
    for h, st in ((half, mid), (mid, step)):
        Af, Ef = _local_grid(grid, az0, el0, h, st)
        Sf = steering(cfg, lam, np.radians(Af), np.radians(Ef))
        j = int(np.argmax(np.abs(Sf @ w)))
        az0, el0 = Af[j], Ef[j]
    # snap accumulated offsets back onto the lattice anchored at the coarse peak
    return (float(az_c + np.round((az0 - az_c) / step) * step),
            float(el_c + np.round((el0 - el_c) / step) * step))


def angle_search_2d(h_hat, link: str, cfg: UpaConfig, lam: float,
                    grid: SearchGrid | None = None) -> DirectionAngles:
    """Coarse-then-fine maximisation of |matched response| over the link sector.

    Returns radians.  Ties resolve to the lowest grid index.
    """
    if link not in LINKS:
        raise ConfigError(f"unknown link {link!r}, expected one of {LINKS}")
    grid = grid or DEFAULT_GRIDS[link]
    w = _link_vector(h_hat, link)
    if w.size != cfg.size:
        raise ConfigError(f"{link}: channel length {w.size} does not match array size {cfg.size}")
    if not np.any(w):
        raise DegenerateInputError(f"{link}: channel estimate is identically zero")
    A, E, S = _coarse_dictionary(cfg, float(lam), grid)
    k = int(np.argmax(np.abs(S @ w)))
    az0, el0 = A[k], E[k]

    az, el = _refine(w, cfg, lam, grid, az0, el0)
    if grid.full_circle:
        az = _wrap_deg(az)
        if az == -180.0:
            az = 180.0
    return DirectionAngles(math.radians(az), math.radians(el))


# -- stage 3: least-squares triangulation -------------------------------------


def triangulate_ls(angles, anchors, weights=None) -> np.ndarray:
    """Point closest (in summed squared perpendicular distance) to the anchor rays.

    ``angles[i]`` is the direction from ``anchors[i]`` towards the target.
    """
    if len(angles) != len(anchors) or len(angles) < 2:
        raise GeometryError("need at least two (anchor, angle) pairs of equal count")
    weights = np.ones(len(angles)) if weights is None else np.asarray(weights, dtype=float)
    A = np.zeros((3, 3))
    b = np.zeros(3)
    for ang, p, w in zip(angles, anchors, weights):
        xi = unit_direction(ang)
        Bm = np.eye(3) - np.outer(xi, xi)
        A += w * Bm
        b += w * Bm @ np.asarray(p, dtype=float)
    if np.linalg.cond(A) > 1e12:
        raise GeometryError("anchor rays are (nearly) parallel; position is not identifiable")
    return np.linalg.solve(A, b)


# -- composition ---------------------------------------------------------------


def truth_channels(s: Scenario, arrays: ArraySet) -> dict:
    """Ground-truth factors in estimator units: (h2, h3, zeta*h4)."""
    from .channel import build_channels

    ch = build_channels(s, arrays)
    return {"h2": ch.h2, "h3": ch.h3, "h4": s.zeta * ch.h4}


def _finish(est: ChannelEstimates, y_norm: float, frames: SoundingFrames, s: Scenario,
            arrays: ArraySet, grids: dict) -> LocalizationResult:
    if y_norm == 0.0:
        raise DegenerateInputError("received block carries no signal")
    links = [("bs-drone", est.h2_hat, arrays.bs, s.p_B)]
    if frames.ris_enabled:
        links.append(("ris-drone", est.h3_hat, arrays.ris, s.p_R))
    links.append(("ue-drone", est.h4_hat, arrays.ue, s.p_U))

    model_energy = np.linalg.norm(est.h4_hat) * np.linalg.norm(_model_rows(frames, est.h2_hat, est.h3_hat))
    if model_energy < 1e-12 * y_norm:
        raise DegenerateInputError(f"fitted echo energy {model_energy:.3e} is negligible")

    angles = {}
    for name, h, cfg_arr, _ in links:
        angles[name] = angle_search_2d(h, name, cfg_arr, s.lam, grids[name])
    p_hat = triangulate_ls([angles[n] for n, *_ in links], [p for *_, p in links])
    return LocalizationResult(
        p_hat=p_hat,
        angles=angles,
        estimates=est,
        error_m=float(np.linalg.norm(p_hat - s.p_D)),
        diagnostics={"iterations": est.iterations, "objective": est.objective,
                     "restart": est.restart, "links": [n for n, *_ in links]},
    )


def _prepare(cfg, grids, s, arrays, truth):
    cfg = cfg or CgdConfig()
    grids = {**DEFAULT_GRIDS, **(grids or {})}
    if cfg.init_policy == "truth-perturbed" and truth is None:
        truth = truth_channels(s, arrays)
    return cfg, grids, truth


def localize(block: ReceivedBlock, frames: SoundingFrames, s: Scenario, arrays: ArraySet,
             cfg: CgdConfig | None = None, seed: int = 0, grids: dict | None = None,
             truth: dict | None = None) -> LocalizationResult:
    """Run all three stages on one received block.

    ``s`` supplies the anchor positions (and the drone position, used only
    for ``error_m``).
    """
    cfg, grids, truth = _prepare(cfg, grids, s, arrays, truth)
    Y = block.cleaned() if cfg.subtract_interference else block.Y
    y_norm = float(np.linalg.norm(Y))
    if y_norm == 0.0:
        raise DegenerateInputError("received block carries no signal")
    est = cgd_estimate(Y, frames, cfg, seed, truth)
    return _finish(est, y_norm, frames, s, arrays, grids)


def localize_batch(blocks, frames: SoundingFrames, s: Scenario, arrays: ArraySet,
                   cfg: CgdConfig | None = None, seeds=None, grids: dict | None = None,
                   truth: dict | None = None) -> list:
    """:func:`localize` over many blocks sharing ``frames``, with one batched CGD.

    Returns one entry per block: a :class:`LocalizationResult`, or the
    :class:`~risloc.errors.RislocError` raised for that block.
    """
    cfg, grids, truth = _prepare(cfg, grids, s, arrays, truth)
    seeds = list(range(len(blocks))) if seeds is None else list(seeds)
    Ys = np.stack([b.cleaned() if cfg.subtract_interference else b.Y for b in blocks])
    ests = cgd_estimate_batch(Ys, frames, cfg, seeds, truth)
    out = []
    for Y, est in zip(Ys, ests):
        if isinstance(est, RislocError):
            out.append(est)
            continue
        try:
            out.append(_finish(est, float(np.linalg.norm(Y)), frames, s, arrays, grids))
        except RislocError as exc:
            out.append(exc)
    return out
