"""Command-line entry point.

Exit codes: 0 success, 1 configuration/usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from .channel import build_channels
from .errors import ConfigError, RislocError
from .estimator import localize
from .fisher import position_bound
from .harness import (
    DEFAULT_SNR_DB, SweepConfig, default_experiment, load_experiment, rows_to_csv,
    run_crlb_only, run_sweep, trial_seed,
)
from .rxsignal import snr_to_power, synthesize

log = logging.getLogger("risloc")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse would exit with status 2, which is reserved for numerical failures
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def parse_snr(text: str) -> tuple:
    """``a:b:step`` (inclusive) or a single value ``a``."""
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"bad --snr value {text!r}, expected a:b:step") from None
    if len(vals) == 1:
        return (vals[0],)
    if len(vals) != 3 or vals[2] <= 0 or vals[1] < vals[0]:
        raise ConfigError(f"bad --snr value {text!r}, expected a:b:step with step > 0 and a <= b")
    a, b, step = vals
    n = int(math.floor((b - a) / step + 1e-9))
    return tuple(a + step * i for i in range(n + 1))


def _parse_list(text: str, conv, flag):
    try:
        out = tuple(conv(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad {flag} value {text!r}") from None
    if not out:
        raise ConfigError(f"{flag} list is empty")
    return out


def _build_parser() -> _Parser:
    p = _Parser(prog="risloc", description="RIS-assisted bi-static drone localization simulator")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, text in (("crlb-sweep", "position error bound over the sweep grid"),
                       ("rmse-sweep", "Monte Carlo RMSE next to the bound"),
                       ("single-run", "localize one trial and print a summary")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", help="scenario JSON (defaults to the reference scenario)")
        s.add_argument("--out", help="CSV output path (default: stdout)")
        s.add_argument("--seed", type=int, default=0, help="master seed")
        s.add_argument("--trials", type=int, default=200)
        s.add_argument("--snr", help="SNR grid in dB, a:b:step")
        s.add_argument("--k", help="comma-separated K values")
        s.add_argument("--rcs", help="comma-separated RCS values (complex literals allowed)")
        s.add_argument("--no-ris", action="store_true", help="drop the RIS (direct echo only)")
        s.add_argument("--workers", type=int, default=1, help="worker processes for rmse-sweep")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _sweep_config(args) -> SweepConfig:
    exp = load_experiment(args.config) if args.config else default_experiment()
    return SweepConfig(
        experiment=exp,
        snr_db=parse_snr(args.snr) if args.snr else DEFAULT_SNR_DB,
        K=_parse_list(args.k, int, "--k") if args.k else (exp.K,),
        zeta=_parse_list(args.rcs, complex, "--rcs") if args.rcs else (exp.scenario.zeta,),
        trials=args.trials,
        master_seed=args.seed,
        ris_enabled=not args.no_ris,
        output=args.out,
        workers=args.workers,
    )


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _single_run(cfg: SweepConfig) -> str:
    exp = cfg.experiment
    K, zeta, snr = cfg.K[0], complex(cfg.zeta[0]), cfg.snr_db[-1]
    scn = exp.scenario.replace(zeta=zeta)
    frames = exp.frames(K, cfg.ris_enabled).with_power(snr_to_power(snr, scn.noise_power_w))
    seed = trial_seed(cfg.master_seed, 0)
    block = synthesize(scn, build_channels(scn, exp.arrays), frames, seed=seed)
    res = localize(block, frames, scn, exp.arrays, exp.estimator, seed)
    peb = position_bound(scn, exp.arrays, frames, scn.noise_power_w)
    lines = [
        f"snr_db={snr:g} K={K} zeta={zeta} ris={int(cfg.ris_enabled)} seed={cfg.master_seed}",
        "p_hat=[" + ", ".join(f"{v:.6f}" for v in res.p_hat) + "]",
        f"error_m={res.error_m:.6f} peb_m={peb:.6f}",
        f"iterations={res.estimates.iterations} restart={res.estimates.restart}",
    ]
    for link, ang in res.angles.items():
        lines.append(f"{link}: azimuth={np.degrees(ang.azimuth):.2f} deg elevation={np.degrees(ang.elevation):.2f} deg")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError(parser.format_usage() + "risloc: error: a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        cfg = _sweep_config(args)
        if args.command == "crlb-sweep":
            _emit(rows_to_csv(run_crlb_only(cfg)), args.out)
        elif args.command == "rmse-sweep":
            _emit(rows_to_csv(run_sweep(cfg)), args.out)
        else:
            _emit(_single_run(cfg), args.out)
        return 0
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"risloc: configuration error: {exc}", file=sys.stderr)
        return 1
    except (RislocError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"risloc: numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"risloc: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
