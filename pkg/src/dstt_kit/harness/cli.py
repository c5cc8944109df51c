"""``dstt-kit`` command line interface."""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..stt_engine import IntegrationError
from ..tensor_core import write_tensor_csv
from .config import ConfigError, ScenarioConfig
from .studies import STUDIES, Scenario, thread_count

log = logging.getLogger("dstt_kit")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_SOLVER = 4
EXIT_IO = 5


def run_scenario(cfg: ScenarioConfig, studies, out_dir=None, seed: int | None = None, order: int | None = None) -> int:
    """Integrate, factor and run ``studies``; write CSVs and ``manifest.json``.

    Returns a process exit code.
    """
    try:
        if seed is not None:
            cfg = cfg.replace(rng_seed=int(seed))
        if order is not None:
            cfg = cfg.replace(stt_order=int(order))
        unknown = [s for s in studies if s not in STUDIES]
        if unknown:
            raise ConfigError(f"unknown study {unknown[0]!r}")
        scn = Scenario(cfg)
        results = [STUDIES[s](scn) for s in studies]
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except IntegrationError as exc:
        log.error("integration error: %s", exc)
        return EXIT_INTEGRATION
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("solver error: %s", exc)
        return EXIT_SOLVER

    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for res in results:
            path = out / f"{cfg.name}_{res.name}.csv"
            res.write(path)
            files.append(path.name)
        manifest = {
            "config": cfg.to_dict(),
            "studies": list(studies),
            "outputs": files,
            "seeds": {"rng_seed": cfg.rng_seed, "eigen_rng_seed": cfg.eigen().rng_seed},
            "stt_order": scn.order,
            "versions": {
                "dstt_kit": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        }
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        log.error("io error: %s", exc)
        return EXIT_IO
    return EXIT_OK


def _load(path: str) -> ScenarioConfig:
    if path in ("leo", "nrho", "uranus_aerocapture") and not Path(path).exists():
        return ScenarioConfig.bundled(path)
    return ScenarioConfig.load(path)


def dump_stt(cfg: ScenarioConfig, epoch: int, out_dir) -> int:
    scn = Scenario(cfg)
    h = scn.history
    if not -len(h) <= epoch < len(h):
        raise ConfigError(f"epoch {epoch} outside 0..{len(h) - 1}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = epoch % len(h)
    for p, name in ((1, "stm"), (2, "stt2"), (3, "stt3")):
        if p <= h.order:
            write_tensor_csv(h.stt(k, p), out / f"{name}_{k}.csv")
    with open(out / "times.csv", "w") as fh:
        fh.write("k,time," + ",".join(f"x{i + 1}" for i in range(h.n)) + "\n")
        fh.write(f"{k},{h.times[k]:.17g}," + ",".join(f"{v:.17g}" for v in h.states[k]) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dstt-kit", description="Run state transition tensor studies on a scenario config.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one or more studies for a scenario")
    run.add_argument("--config", required=True, help="scenario JSON file or bundled name")
    run.add_argument("--study", choices=[*STUDIES, "all"], default="all")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--order", type=int, choices=[2, 3], default=None)

    dump = sub.add_parser("dump-stt", help="write the STM/STTs of one epoch as CSV")
    dump.add_argument("--config", required=True)
    dump.add_argument("--epoch", type=int, required=True)
    dump.add_argument("--out", default="stt_dump")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    log.info("using up to %d threads", thread_count())
    try:
        cfg = _load(args.config)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("io error: %s", exc)
        return EXIT_IO

    if args.command == "run":
        studies = list(STUDIES) if args.study == "all" else [args.study]
        return run_scenario(cfg, studies, args.out, args.seed, args.order)
    try:
        return dump_stt(cfg, args.epoch, args.out)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except IntegrationError as exc:
        log.error("integration error: %s", exc)
        return EXIT_INTEGRATION
    except OSError as exc:
        log.error("io error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
