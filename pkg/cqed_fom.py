"""
Cavity-QED figures of merit - command-line entry point
Emits plot-ready tables for emission efficiency, indistinguishability,
reflection contrast, mode volume and implantation statistics
"""
import argparse
import json
import os
import sys
from pathlib import Path

# Add project root to path so config and core import from anywhere
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import config
from core.exceptions import ConfigError
from core.logger_config import get_logger
from core.models.run_config import load_config, parse_config
from core.runner import COMMANDS, FORMATS, error_payload, write_json

logger = get_logger(__name__)


def build_parser():
    parser = argparse.ArgumentParser(
        description="Cavity-QED figures of merit for a cavity-coupled emitter",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Efficiency and indistinguishability against g (κ = κ_wg = 10 GHz defaults)
  python cqed_fom.py fom-sweep --out output/fom

  # Same sweep from a config file on 4 threads, JSON tables
  python cqed_fom.py fom-sweep --config runs/fig5.json --threads 4 --format json

  # Spin-resolved reflection spectra and contrast against cavity detuning
  python cqed_fom.py spectrum --config runs/spin.json --out output/spectra
  python cqed_fom.py contrast --config runs/spin.json --out output/contrast

  # Write the synthetic nanobeam mode, then analyse it
  python cqed_fom.py synth-field --out output/field
  python cqed_fom.py modevol --config runs/grid.json --out output/field
  python cqed_fom.py implant-stats --config runs/grid.json --out output/implant

Config:
  JSON object; every block optional. Quantities are {"value": x, "unit": u}
  with GHz/MHz/kHz/Hz (×2π) or rad/s, nm/um/m, Debye or C*m, m3/um3/lambda_n3.

Exit codes:
  0 success, 2 config or parameter error, 3 numerical failure, 4 I/O error,
  1 anything else. Failures print one JSON line and write error.json.

Environment:
  CQED_FOM_LOG        console log level (default INFO)
  CQED_FOM_THREADS    default worker count
        """
    )

    parser.add_argument(
        'command',
        choices=sorted(COMMANDS),
        help='What to compute'
    )

    parser.add_argument(
        '--config', '-c',
        type=str,
        metavar='PATH',
        help='Run configuration (JSON). Without it every default applies'
    )

    parser.add_argument(
        '--out', '-o',
        type=str,
        default=config.OUTPUT_DIR,
        metavar='DIR',
        help=f'Output directory (default: {config.OUTPUT_DIR})'
    )

    parser.add_argument(
        '--threads', '-t',
        type=int,
        default=config.MAX_PARALLEL_THREADS,
        help=f'Worker threads for sweeps (default: {config.MAX_PARALLEL_THREADS})'
    )

    parser.add_argument(
        '--format', '-f',
        choices=FORMATS,
        default='csv',
        help='Table format (default: csv)'
    )

    return parser


def main(argv=None):
    """Run one command; returns the process exit code"""
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out)

    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1", path="threads")
        run_config = load_config(args.config) if args.config else parse_config("{}")
        out_dir.mkdir(parents=True, exist_ok=True)

        logger.info(f"Running {args.command} → {out_dir}")
        paths = COMMANDS[args.command](run_config, out_dir, args.format, args.threads)

    except Exception as e:
        payload = error_payload(e)
        logger.error(f"{args.command} failed: {payload['error']}: {payload['message']}")
        print(json.dumps(payload))
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_json(out_dir / "error.json", payload)
        except OSError:
            pass
        return payload["exit_code"]

    print(json.dumps({"status": "ok", "command": args.command, "outputs": [p.name for p in paths]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
