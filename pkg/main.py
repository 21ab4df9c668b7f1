"""anderson-lab: main entry point."""

import argparse
import asyncio
import json as _json
import logging
import os
import sys
from pathlib import Path

import yaml
from dotenv import load_dotenv

from anderson_lab.core.errors import LabError, NonConvergenceError, PreconditionError
from anderson_lab.core.ledger import RunLedgerStore
from anderson_lab.experiments.config import KINDS, SCHEMA_VERSION, ExperimentConfig, validate_section
from anderson_lab.experiments.runner import RUN_FIELDS, ExperimentRunner, RunContextFilter

# Load .env from project root
load_dotenv(Path(__file__).parent / ".env")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INADMISSIBLE = 2
EXIT_NONCONVERGENCE = 3


def load_config(path: str | None = None) -> dict:
    config_path = Path(path or os.getenv("ANDERSON_LAB_CONFIG") or Path(__file__).parent / "config.yaml")
    with open(config_path) as f:
        return yaml.safe_load(f) or {}


def validate_config(config: dict) -> list[str]:
    """Validate configuration and return a list of errors."""
    errors = []

    if config.get("schema_version") != SCHEMA_VERSION:
        errors.append(f"'schema_version' must be {SCHEMA_VERSION}")

    seed = config.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or not (0 <= seed < 2**64):
        errors.append("'seed' must be an unsigned 64-bit integer")

    threads = config.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        errors.append("'threads' must be an integer >= 1")

    if not isinstance(config.get("output_dir", ""), str):
        errors.append("'output_dir' must be a path string")

    guards = config.get("guards", {})
    if not isinstance(guards, dict):
        errors.append("'guards' must be a mapping")
    else:
        for key in ("max_radius", "max_samples"):
            val = guards.get(key)
            if val is not None and (not isinstance(val, int) or val < 1):
                errors.append(f"'guards.{key}' must be a positive integer")

    experiments = config.get("experiments", {})
    if not isinstance(experiments, dict):
        errors.append("'experiments' must be a mapping")
    else:
        for kind, section in experiments.items():
            if kind not in KINDS.values():
                errors.append(f"unknown experiment section '{kind}'")
                continue
            errors.extend(validate_section(kind, section))

    return errors


class JSONFormatter(logging.Formatter):
    """Structured JSON log formatter for batch and cluster runs."""

    def format(self, record: logging.LogRecord) -> str:
        entry = {
            "timestamp": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        for key in RUN_FIELDS:
            value = getattr(record, key, None)
            if value is not None:
                entry[key] = value
        if record.exc_info and record.exc_info[0]:
            entry["exception"] = self.formatException(record.exc_info)
        return _json.dumps(entry)


def setup_logging(level: str = "INFO", json_format: bool = False):
    log_level = getattr(logging, level.upper(), logging.INFO)
    if json_format:
        handler = logging.StreamHandler()
        handler.setFormatter(JSONFormatter(datefmt="%Y-%m-%dT%H:%M:%S"))
        handler.addFilter(RunContextFilter())
        logging.root.handlers = [handler]
        logging.root.setLevel(log_level)
    else:
        logging.basicConfig(
            level=log_level,
            format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anderson-lab",
        description="Desk-scale experiments on alloy-type random Schroedinger operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, kind in KINDS.items():
        p = sub.add_parser(command, help=f"run the {kind} experiment")
        p.add_argument("--config", default=None, help="YAML config (default: $ANDERSON_LAB_CONFIG or config.yaml)")
        p.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        p.add_argument("--unsafe-override", action="store_true", help="lift the desk-scale guards")
    return parser


async def run_experiment(config: dict, args: argparse.Namespace) -> int:
    logger = logging.getLogger("main")
    threads = args.threads or (int(os.environ["ANDERSON_LAB_THREADS"]) if os.getenv("ANDERSON_LAB_THREADS") else None)
    exp = ExperimentConfig.from_config(
        config,
        args.command,
        seed=args.seed,
        output_dir=args.out,
        threads=threads,
        unsafe_override=args.unsafe_override,
    )

    logger.info("=" * 60)
    logger.info("anderson-lab: %s", exp.kind)
    logger.info("Seed: %d | threads: %d | output: %s", exp.seed, exp.threads, exp.output_dir)
    logger.info("Config hash: %s", exp.config_hash())
    logger.info("=" * 60)

    store = RunLedgerStore(config.get("db_path", "data/ledger.db"))
    await store.initialize()
    try:
        ledger = await ExperimentRunner(exp, store).run()
    except NonConvergenceError as e:
        logger.error("Solver did not converge: %s", e)
        return EXIT_NONCONVERGENCE
    except PreconditionError as e:
        logger.error("Inadmissible configuration: %s", e)
        return EXIT_INADMISSIBLE
    except LabError as e:
        logger.error("Numerical failure: %s", e, exc_info=True)
        return EXIT_NONCONVERGENCE
    finally:
        await store.close()

    logger.info("Run %s: %s (%d certificates)", ledger.run_id, ledger.status, len(ledger.certificates))
    return EXIT_OK


async def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = load_config(args.config)
    setup_logging(
        level=os.getenv("LOG_LEVEL") or config.get("log_level", "INFO"),
        json_format=config.get("log_json", False),
    )
    logger = logging.getLogger("main")

    # Validate config
    config_errors = validate_config(config)
    for err in config_errors:
        logger.error("Config error: %s", err)
    if config_errors:
        return EXIT_CONFIG

    return await run_experiment(config, args)


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
