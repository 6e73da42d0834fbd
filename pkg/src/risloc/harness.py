"""Scenario configuration, Monte Carlo sweeps and CSV output.

Randomness: every trial index t gets a seed derived from (master seed, t)
that drives both the receiver noise and the CGD starting points.  The same
trial index therefore sees the same noise draws at every SNR, K and zeta
(common random numbers), and since noise column k depends only on
(seed, k), a K=20 block is the prefix of the K=60 block of that trial.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .array import UpaConfig
from .channel import ArraySet, build_channels
from .errors import ConfigError, DegenerateInputError, GeometryError, RislocError
from .estimator import CgdConfig, localize_batch
from .fisher import position_bound
from .geometry import Scenario, dbm_to_watt, thermal_noise_dbm
from .rxsignal import snr_to_power, synthesize
from .sounding import SoundingConfig, SoundingFrames, design_frames

log = logging.getLogger(__name__)

CSV_HEADER = ["snr_db", "K", "zeta", "ris", "peb_m", "rmse_m", "trials", "mean_iterations", "failures"]
DEFAULT_SNR_DB = tuple(-10.0 + 2.5 * i for i in range(9))
# trials are batched in fixed-size chunks; chunks are the unit of parallel work
CHUNK = 50

_NODES = ("bs", "ris", "ue", "drone")
_PLANES = {"bs": "yz", "ris": "xy", "ue": "xy"}
_DIMS = {"bs": (8, 8), "ris": (6, 6), "ue": (4, 4)}


@dataclass(frozen=True)
class Experiment:
    """Everything needed to synthesize and localize one sweep point."""

    scenario: Scenario
    arrays: ArraySet
    sounding: SoundingConfig = field(default_factory=SoundingConfig)
    K: int = 60
    sounding_seed: int = 0
    estimator: CgdConfig = field(default_factory=CgdConfig)

    def frames(self, K: int | None = None, ris_enabled: bool = True) -> SoundingFrames:
        K = self.K if K is None else K
        return design_frames(self.scenario, self.arrays, K, self.sounding_seed, self.sounding,
                             ris_enabled=ris_enabled)


def default_experiment() -> Experiment:
    return experiment_from_dict({})


# -- JSON config -----------------------------------------------------------------


def _section(raw: dict, key: str, allowed) -> dict:
    sec = raw.get(key, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"'{key}' must be an object")
    unknown = set(sec) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in '{key}': {sorted(unknown)}")
    return sec


def _pair(v, what):
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(f"{what} must be a two-element list, got {v!r}")
    return float(v[0]), float(v[1])


def experiment_from_dict(raw: dict) -> Experiment:
    """Build an :class:`Experiment` from the parsed JSON schema.

    Missing keys fall back to the reference configuration (BS 8x8, RIS 6x6,
    UE 4x4 at half-wavelength spacing, 10 mm carrier, 20 MHz, Gamma = 2).
    """
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    allowed = {"nodes", "arrays", "carrier", "target", "sounding", "estimator", "noise"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    nodes = _section(raw, "nodes", _NODES)
    carrier = _section(raw, "carrier", ("lambda_m", "bandwidth_hz", "path_loss_exponent"))
    target = _section(raw, "target", ("zeta_re", "zeta_im"))
    noise = _section(raw, "noise", ("sigma2_dbm",))
    arrays_raw = _section(raw, "arrays", ("bs", "ris", "ue"))
    snd = _section(raw, "sounding", (
        "K", "seed", "ris_policy", "ris_azimuth_deg", "ris_elevation_deg", "ris_grid",
        "sky_policy", "bs_azimuth_deg", "bs_elevation_deg", "bs_grid", "paired",
    ))
    est = _section(raw, "estimator", [f.name for f in fields(CgdConfig)])

    try:
        lam = float(carrier.get("lambda_m", 0.01))
        bandwidth = float(carrier.get("bandwidth_hz", 20e6))
        gamma = float(carrier.get("path_loss_exponent", 2.0))
        sigma2_dbm = noise.get("sigma2_dbm")
        if sigma2_dbm is None and bandwidth > 0:
            sigma2_dbm = thermal_noise_dbm(bandwidth)
        positions = {
            "bs": nodes.get("bs", [0.0, 0.0, 26.0]),
            "ris": nodes.get("ris", [0.0, 0.5, 25.5]),
            "ue": nodes.get("ue", [2.0, 2.0, 24.0]),
            "drone": nodes.get("drone", [3.0, 3.0, 30.0]),
        }
        scenario = Scenario(
            positions["bs"], positions["ris"], positions["ue"], positions["drone"],
            lam=lam, gamma=gamma,
            zeta=complex(float(target.get("zeta_re", 1.0)), float(target.get("zeta_im", 0.0))),
            bandwidth_hz=bandwidth,
            noise_power_w=None if sigma2_dbm is None else dbm_to_watt(float(sigma2_dbm)),
        )

        arrays = {}
        for node in ("bs", "ris", "ue"):
            a = arrays_raw.get(node, {})
            if not isinstance(a, dict) or set(a) - {"dims", "spacing_wavelengths", "plane"}:
                raise ConfigError(f"arrays.{node} must be an object with dims/spacing_wavelengths/plane")
            m_a, m_b = _pair(a.get("dims", _DIMS[node]), f"arrays.{node}.dims")
            if m_a != int(m_a) or m_b != int(m_b):
                raise ConfigError(f"arrays.{node}.dims must be integers")
            s_a, s_b = _pair(a.get("spacing_wavelengths", (0.5, 0.5)), f"arrays.{node}.spacing_wavelengths")
            arrays[node] = UpaConfig(int(m_a), int(m_b), s_a * lam, s_b * lam, a.get("plane", _PLANES[node]))

        base = SoundingConfig()

        def sector(key, default):
            if key not in snd:
                return default
            return tuple(math.radians(v) for v in _pair(snd[key], f"sounding.{key}"))

        def grid(key, default):
            return tuple(int(v) for v in _pair(snd.get(key, default), f"sounding.{key}"))

        sounding = SoundingConfig(
            ris_policy=snd.get("ris_policy", base.ris_policy),
            azimuth_range=sector("ris_azimuth_deg", base.azimuth_range),
            elevation_range=sector("ris_elevation_deg", base.elevation_range),
            grid=grid("ris_grid", base.grid),
            sky_policy=snd.get("sky_policy", base.sky_policy),
            bs_azimuth_range=sector("bs_azimuth_deg", base.bs_azimuth_range),
            bs_elevation_range=sector("bs_elevation_deg", base.bs_elevation_range),
            bs_grid=grid("bs_grid", base.bs_grid),
            paired=bool(snd.get("paired", base.paired)),
        )
        K = int(snd.get("K", 60))
        if K < 1:
            raise ConfigError(f"sounding.K must be >= 1, got {K}")
        return Experiment(
            scenario=scenario,
            arrays=ArraySet(arrays["bs"], arrays["ris"], arrays["ue"]),
            sounding=sounding,
            K=K,
            sounding_seed=int(snd.get("seed", 0)),
            estimator=CgdConfig(**est),
        )
    except ConfigError:
        raise
    except (GeometryError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_experiment(path) -> Experiment:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    return experiment_from_dict(raw)


# -- sweeps ----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    experiment: Experiment = field(default_factory=default_experiment)
    snr_db: tuple = DEFAULT_SNR_DB
    K: tuple = (60,)
    zeta: tuple = (1.0,)
    trials: int = 200
    master_seed: int = 0
    ris_enabled: bool = True
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        for name in ("snr_db", "K", "zeta"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"sweep list '{name}' is empty")
        if any(int(k) < 1 for k in self.K):
            raise ConfigError(f"K values must be >= 1, got {self.K}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    K: int
    zeta: complex
    ris_enabled: bool
    peb_m: float
    rmse_m: float | None = None
    trials: int = 0
    mean_iterations: float | None = None
    failures: int = 0

    def sort_key(self):
        return (self.ris_enabled, self.K, abs(self.zeta), self.zeta.real, self.zeta.imag, self.snr_db)


def trial_seed(master_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), int(trial)]).generate_state(1, np.uint32)[0])


def _points(cfg: SweepConfig):
    for K in cfg.K:
        for z in cfg.zeta:
            for snr in cfg.snr_db:
                yield int(K), complex(z), float(snr)


def _frames_by_K(cfg: SweepConfig) -> dict[int, SoundingFrames]:
    # nested: every K is a prefix of the longest design
    full = cfg.experiment.frames(max(int(k) for k in cfg.K), cfg.ris_enabled)
    return {int(k): full.prefix(int(k)) for k in cfg.K}


def _bound(exp: Experiment, frames: SoundingFrames, scenario: Scenario, snr: float) -> float:
    fr = frames.with_power(snr_to_power(snr, scenario.noise_power_w))
    return position_bound(scenario, exp.arrays, fr, scenario.noise_power_w)


def run_crlb_only(cfg: SweepConfig) -> list[SweepRow]:
    exp = cfg.experiment
    frames = _frames_by_K(cfg)
    rows = []
    for K, z, snr in _points(cfg):
        scn = exp.scenario.replace(zeta=z)
        rows.append(SweepRow(snr, K, z, cfg.ris_enabled, _bound(exp, frames[K], scn, snr)))
    return sorted(rows, key=SweepRow.sort_key)


def _run_chunk(args):
    """Localize trials [lo, hi) at one sweep point; returns (errors, iterations, n_failed)."""
    exp, scn, frames, lo, hi, master_seed = args
    ch = build_channels(scn, exp.arrays)
    seeds = [trial_seed(master_seed, t) for t in range(lo, hi)]
    blocks = [synthesize(scn, ch, frames, seed=sd) for sd in seeds]
    results = localize_batch(blocks, frames, scn, exp.arrays, exp.estimator, seeds)
    errors, iters, failed, degenerate = [], [], 0, 0
    for t, res in zip(range(lo, hi), results):
        if isinstance(res, RislocError):
            failed += 1
            degenerate += isinstance(res, DegenerateInputError)
            log.debug("trial %d failed: %s", t, res)
            continue
        errors.append(res.error_m)
        iters.append(res.estimates.iterations)
    return errors, iters, failed, degenerate


def run_sweep(cfg: SweepConfig) -> list[SweepRow]:
    """Monte Carlo RMSE next to the PEB at every (K, zeta, SNR) point.

    Failed trials (degenerate input, divergence, parallel rays) are counted
    in ``failures`` and left out of the RMSE.
    """
    exp = cfg.experiment
    frames = _frames_by_K(cfg)
    jobs, meta = [], []
    for K, z, snr in _points(cfg):
        scn = exp.scenario.replace(zeta=z)
        fr = frames[K].with_power(snr_to_power(snr, scn.noise_power_w))
        for lo in range(0, cfg.trials, CHUNK):
            jobs.append((exp, scn, fr, lo, min(cfg.trials, lo + CHUNK), cfg.master_seed))
        meta.append((K, z, snr, scn))

    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]

    per_point = -(-cfg.trials // CHUNK)
    rows = []
    for i, (K, z, snr, scn) in enumerate(meta):
        errs, its, failed = [], [], 0
        for e, it, nf, _ in parts[i * per_point:(i + 1) * per_point]:
            errs += e
            its += it
            failed += nf
        if failed == cfg.trials:
            log.warning("all %d trials failed at K=%d zeta=%s snr=%g dB", cfg.trials, K, z, snr)
            rmse, mean_it = float("nan"), float("nan")
        else:
            rmse = float(np.sqrt(np.mean(np.square(errs))))
            mean_it = float(np.mean(its))
        rows.append(SweepRow(snr, K, z, cfg.ris_enabled, _bound(exp, frames[K], scn, snr),
                             rmse, cfg.trials, mean_it, failed))
    return sorted(rows, key=SweepRow.sort_key)


# -- CSV -------------------------------------------------------------------------


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return repr(float(v))


def _zeta_str(z: complex) -> str:
    z = complex(z)
    return repr(z.real) if z.imag == 0 else f"{z.real!r}{z.imag:+}j"


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([
            _num(r.snr_db), str(r.K), _zeta_str(r.zeta), "1" if r.ris_enabled else "0",
            _num(r.peb_m), _num(r.rmse_m), str(r.trials), _num(r.mean_iterations), str(r.failures),
        ])
    return buf.getvalue()


def write_csv(rows, path) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8")


def sweep_summary(cfg: SweepConfig) -> dict:
    """JSON-friendly description of a sweep (for logs)."""
    d = {k: v for k, v in asdict(cfg).items() if k != "experiment"}
    d["zeta"] = [_zeta_str(z) for z in cfg.zeta]
    return d


__all__ = [
    "CSV_HEADER", "DEFAULT_SNR_DB", "Experiment", "SweepConfig", "SweepRow", "default_experiment",
    "experiment_from_dict", "load_experiment", "replace", "rows_to_csv", "run_crlb_only", "run_sweep",
    "trial_seed", "write_csv",
]
