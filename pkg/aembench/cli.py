"""Command-line entry point.

    python -m aembench gen-data --config exp.ini --seed 7
    python -m aembench sweep --config exp.ini --set solver.kind=na --jobs 4
    python -m aembench report --out runs/

Every verb prints its JSON result and exits with 0 on success, 2 on a
configuration error, 3 on a numeric failure and 4 on a missing artifact.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional

from aembench.config import settings
from aembench.errors import BenchError
from aembench.harness.commands import (
    cmd_eval,
    cmd_fit_surrogate,
    cmd_gen_data,
    cmd_report,
    cmd_sweep,
    cmd_train,
)
from aembench.harness.experiment import ExperimentConfig, load_experiment

logger = logging.getLogger(__name__)

COMMANDS: Dict[str, Callable[[ExperimentConfig], Dict[str, Any]]] = {
    "gen-data": cmd_gen_data,
    "fit-surrogate": cmd_fit_surrogate,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
    "report": cmd_report,
}

HELP = {
    "gen-data": "Sample designs and simulate a dataset with train/val/test splits",
    "fit-surrogate": "Train a forward network on a dataset and store it as a surrogate task",
    "train": "Train one solver and record the run",
    "sweep": "Train every cell of the [sweep] grid and keep the best validation r1",
    "eval": "Compute r_T, gamma, D_r and timings on the test split",
    "report": "Merge eval reports into tables and r_T plots",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aembench", description="AEM inverse-design benchmark")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", "-c", help="Experiment INI file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="Override one experiment value (repeatable)",
        )
        p.add_argument("--seed", type=int, help="Seed for data, training and proposals")
        p.add_argument("--paper-scale", action="store_true", default=None, help="Use the full training budget")
        p.add_argument("--force", action="store_true", default=None, help="Overwrite existing artifacts")
        p.add_argument("--jobs", type=int, help="Parallel workers")
        p.add_argument("--out", help=f"Output directory (default {settings.DATA_DIR})")
        p.add_argument("--log-level", default=settings.LOG_LEVEL, help="Logging level")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="[%(asctime)s] %(levelname)s:%(name)s: %(message)s",
    )

    try:
        cfg = load_experiment(
            args.config,
            args.set,
            seed=args.seed,
            paper_scale=args.paper_scale,
            force=args.force,
            jobs=args.jobs,
            out_dir=args.out,
        )
    except BenchError as e:
        logger.error("%s", e)
        print(json.dumps({"ok": False, "error": str(e), "exit_code": e.exit_code}, indent=2))
        return e.exit_code

    result = COMMANDS[args.command](cfg)
    print(json.dumps(result, indent=2, default=str))
    return 0 if result.get("ok") else int(result.get("exit_code", 1))


if __name__ == "__main__":
    sys.exit(main())
