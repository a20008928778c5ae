import argparse
import logging
import sys
import time
from typing import Any, Dict, List, Optional, Sequence

from prometheus_client import REGISTRY, Counter, Histogram, write_to_textfile
from pydantic import ValidationError

from mtfcost import __version__
from mtfcost.core.errors import (
    DegenerateLawError,
    InvalidArgumentError,
    InvalidDensityError,
    OutOfRangeError,
    SizeError,
    ValidationFailedError,
)
from mtfcost.models.experiment_models import COMMANDS, SAMPLERS
from mtfcost.services import ExperimentService, resolve_config

# Import config
from mtfcost.config import LOGGING, METRICS

# Configure logging
logging.basicConfig(
    level=getattr(logging, LOGGING["level"]),
    format=LOGGING["format"]
)
logger = logging.getLogger(__name__)

# Define metrics
command_counter = Counter('mtf_commands_total', 'Commands run', ['command', 'status'])
command_duration = Histogram('mtf_command_duration_seconds', 'Command duration', ['command'])

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4

# first match wins
EXIT_CODES = [
    (ValidationFailedError, EXIT_VALIDATION),
    ((InvalidArgumentError, OutOfRangeError, InvalidDensityError, SizeError, DegenerateLawError, ValidationError), EXIT_USAGE),
    (OSError, EXIT_IO),
    (ValueError, EXIT_USAGE),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtfcost",
        description="Search-cost distributions of move-to-front lists: limiting laws, exact laws and simulation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--family", help="popularity law, e.g. exp(1), pareto(-0.5), beta(1,2), zipf(0.5), linear(1)")
    parser.add_argument("--n", type=int, help="number of items")
    parser.add_argument("--ordering", help="initial order: ex, dec or inc")
    parser.add_argument("--t", help="scaled time, or 'stationary'")
    parser.add_argument("--stationary", action="store_true", default=None, help="use the stationary regime")
    parser.add_argument("--m", type=int, help="number of samples")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--delta", type=float, help="cache fraction for lru")
    parser.add_argument("--ladder", help="comma-separated sizes for convergence, e.g. 125,250,500")
    parser.add_argument("--grid", type=int, help="grid points on [0, 1]")
    parser.add_argument("--sampler", choices=SAMPLERS)
    parser.add_argument("--validate", action="store_true", default=None, help="check samples against the limiting law")
    parser.add_argument("--quenched", action="store_true", default=None, help="reuse one weight vector for all samples")
    parser.add_argument("--pac", action="store_true", default=None, help="incomplete-gamma fault probability (pareto, or zipf with -1 < alpha < 0)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--config", help="JSON or key=value file; flags override its values")
    parser.add_argument("--metrics-file", dest="metrics_file", help="write Prometheus metrics to this file")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = ["family", "n", "ordering", "t", "stationary", "m", "seed", "delta", "ladder",
            "grid", "sampler", "validate", "quenched", "pac", "out", "metrics_file"]
    return {key: getattr(args, key) for key in keys}


def exit_code_for(exc: BaseException) -> int:
    for types, code in EXIT_CODES:
        if isinstance(exc, types):
            return code
    return EXIT_FAILURE


def handle_exception(exc: BaseException) -> int:
    """Global exception handler: log and map to an exit code"""
    code = exit_code_for(exc)
    if code == EXIT_FAILURE:
        logger.error(f"Unhandled exception: {exc}", exc_info=True)
    else:
        logger.error(f"{type(exc).__name__}: {exc}")
    print(f"error: {exc}", file=sys.stderr)
    return code


def _write_metrics(path: Optional[str]):
    if not path:
        return
    try:
        write_to_textfile(path, REGISTRY)
    except OSError as e:
        logger.error(f"Failed to write metrics to {path}: {e}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    start_time = time.time()
    metrics_file = args.metrics_file or METRICS["textfile"]

    try:
        config = resolve_config(command, _overrides(args), args.config)
        metrics_file = config.metrics_file or metrics_file
        logger.info(f"Running {command} with {config.model_dump_json(by_alias=True)}")

        service = ExperimentService()
        if command == "lru":
            result, fault = service.lru(config)
            print(f"{fault.probability:.12g}")
        else:
            result = service.run(config)

        files: List[str] = result.files
        for path in files:
            print(path)
        command_counter.labels(command=command, status='success').inc()
        code = EXIT_OK
    except Exception as exc:
        command_counter.labels(command=command, status='failed').inc()
        code = handle_exception(exc)
    finally:
        # Record metrics
        command_duration.labels(command=command).observe(time.time() - start_time)

    _write_metrics(metrics_file)
    return code


if __name__ == "__main__":
    sys.exit(main())
