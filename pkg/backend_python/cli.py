"""
Command line entry point.

    turbo-eq ber --channel h1 --variant tv_dfe_proposed --snr 4:7 --blocks 200 --out ber.csv
    turbo-eq exit --channel h1 --variant tv_dfe --snr 6
    turbo-eq snr --channel h2 --snr 0:14
    turbo-eq rho --variant tiv_bidfe_proposed --snr 6 --blocks 100
    turbo-eq selftest [--quick]
    turbo-eq serve
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

env_path = Path(__file__).parent / '.env'
load_dotenv(dotenv_path=env_path)

from services.csv_service import CSVService
from services.experiment_config import build_config
from services.experiment_runner import EXPERIMENT_KINDS, csv_notes, run_experiment, store_result
from utils.errors import TurboEqualizationError

logger = logging.getLogger("turbo_eq")


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="flat key=value file mirroring the experiment fields")
    parser.add_argument("--channel", type=str, help="h1, h2 or a comma separated tap list")
    parser.add_argument("--variant", type=str, help="equalizer variant, e.g. tv_dfe_proposed")
    parser.add_argument("--snr", dest="snr_db", type=str, help="SNR grid in dB: 6, 4,5,6 or 4:7[:step]")
    parser.add_argument("--iters", dest="iterations", type=int, help="turbo iterations per block")
    parser.add_argument("--blocks", type=int, help="maximum blocks per SNR point")
    parser.add_argument("--bits", dest="message_bits", type=int, help="message bits per block")
    parser.add_argument("--target-errors", dest="target_errors", type=int,
                        help="stop an SNR point after this many final-iteration bit errors")
    parser.add_argument("--seed", dest="base_seed", type=int, help="base seed of the per-block streams")
    parser.add_argument("--workers", type=int, help="worker processes for the block pool")
    parser.add_argument("--combiner", type=str, help="BiDFE combiner: equal_variance | whitened | mean")
    parser.add_argument("--rho-window", dest="rho_window", type=int, help="agreeing symbols used for rho_hat")
    parser.add_argument("--no-interleaver", dest="interleaver", action="store_const", const=False,
                        help="use the identity permutation")
    parser.add_argument("--ideal-feedback", dest="ideal_feedback", action="store_const", const=True,
                        help="feed back the true symbols (test hook)")
    parser.add_argument("--out", dest="output", type=str, help="CSV path; stdout when omitted")
    parser.add_argument("--store", action="store_true", help="also save the run in the results database")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="turbo-eq", description="Turbo equalization simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        kind_parser = sub.add_parser(kind)
        _add_experiment_flags(kind_parser)
        if kind == "selftest":
            kind_parser.add_argument("--quick", dest="selftest_quick", action="store_const", const=True,
                                     help="fewer random instances (same tolerances); rows are marked quick")
    serve = sub.add_parser("serve", help="start the HTTP API")
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--port", type=int, default=int(os.getenv("PORT", 8000)))
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    skip = {"command", "config", "store"}
    return {k: v for k, v in vars(args).items() if k not in skip and v is not None}


def run_command(args: argparse.Namespace) -> int:
    try:
        cfg = build_config(args.config, _overrides(args))
    except (ValueError, ValidationError, FileNotFoundError) as e:
        logger.error(f"❌ Invalid configuration: {e}")
        return 2

    try:
        df, text = run_experiment(args.command, cfg)
    except (TurboEqualizationError, ValueError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return 1

    if cfg.output:
        CSVService().write_csv(df, cfg.output, args.command, csv_notes(args.command, cfg))
    else:
        sys.stdout.write(text)
    if args.store:
        store_result(args.command, cfg, df, text)
    if args.command == "selftest" and not df["passed"].all():
        return 1
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=os.getenv("LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn
        uvicorn.run("main:app", host=args.host, port=args.port)
        return 0
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
