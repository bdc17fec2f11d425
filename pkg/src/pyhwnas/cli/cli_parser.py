import sys
from argparse import (
    ArgumentDefaultsHelpFormatter,
    ArgumentParser,
    BooleanOptionalAction,
    RawTextHelpFormatter,
)
from typing import Optional, Sequence

from ..pyhwnas import pyhwnas
from ..utils.common import get_logger, terminate, unpack_error
from ..utils.exceptions import ErrorCodes, HwnasError
from .config import load_config


logger = get_logger(name="pyhwnas.cli")

COMMANDS = ("profile", "search", "sample", "train-child", "sweep", "pareto", "oracle")



def build_parser() -> ArgumentParser:
    # ─────────────── Main ArgParser ───────────────
    formatter_class = type(
        "CliFormatter",
        (RawTextHelpFormatter, ArgumentDefaultsHelpFormatter),
        {}
    )
    arg_parser = ArgumentParser(
        prog="pyhwnas",
        description="Hardware-aware differentiable architecture search: "
                    "profile -> search -> sample -> train-child -> sweep -> pareto.",
        formatter_class=formatter_class,
    )
    subparsers = arg_parser.add_subparsers(dest="command", required=True)

    # ─────────────── Global flags (every subcommand) ───────────────
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run-config file of section.key=value lines.")
    common.add_argument("--seed", type=int, help="Run seed; overrides run.seed.")
    common.add_argument("--strict", action=BooleanOptionalAction, default=None,
                        help="Sequential, fixed-order execution for byte-identical outputs; overrides run.strict.")
    common.add_argument("--out", help="Output directory; overrides run.out.")
    common.add_argument("-q", "--quiet", action="store_true", help="Only log warnings and errors.")

    def add(name, help_text):
        return subparsers.add_parser(name, parents=[common], help=help_text, formatter_class=formatter_class)

    add("profile", "Write latency and energy lookup tables from the device model.")
    add("search", "Run the supernet search; writes θ snapshots and search_log.csv.")

    sample_parser = add("sample", "Extract the argmax childnet from a θ snapshot.")
    sample_parser.add_argument("theta", nargs="?", help="θ snapshot (default: latest in the output directory).")

    child_parser = add("train-child", "Retrain a childnet from scratch and report accuracy, latency, energy.")
    child_parser.add_argument("childnet", nargs="?", help="Childnet file (default: childnet.txt in the output directory).")

    add("sweep", "Search, sample and retrain one model per knob point; writes sweep.csv.")

    pareto_parser = add("pareto", "Keep the Pareto-optimal rows of a sweep CSV; writes pareto.csv.")
    pareto_parser.add_argument("csv", nargs="?", help="Sweep CSV (default: sweep.csv in the output directory).")
    pareto_parser.add_argument("--max-latency", type=float, help="Drop records slower than this many seconds first.")
    pareto_parser.add_argument("--max-energy", type=float, help="Drop records using more than this many joules first.")
    pareto_parser.add_argument("--min-accuracy", type=float, help="Drop records below this accuracy fraction first.")

    add("oracle", "Enumerate a random micro search space and report exact expectations.")
    return arg_parser



def run_command(args) -> None:
    config = load_config(args.config).with_overrides(seed=args.seed, strict=args.strict, out=args.out)
    config.validate_paths()

    with pyhwnas(config, verbose=not args.quiet) as engine:
        match args.command:
            case "profile":
                engine.profile()
            case "search":
                theta, logs = engine.search()
                last = logs[-1]
                logger.info(f"search finished after {len(logs)} epochs; childnet [{','.join(map(str, last.child_choices))}]")
            case "sample":
                child, path = engine.sample(args.theta)
                logger.info(f"{child} -> {path}")
            case "train-child":
                report = engine.train_child(args.childnet)
                logger.info(
                    f"accuracy={report['accuracy']:.4f} latency={report['latency_s']:.6g}s "
                    f"energy={report['energy_j']:.6g}J"
                )
            case "sweep":
                records, path = engine.sweep()
                logger.info(f"{len(records)} records -> {path}")
            case "pareto":
                engine.pareto(
                    args.csv,
                    max_latency=args.max_latency,
                    max_energy=args.max_energy,
                    min_accuracy=args.min_accuracy,
                )
            case "oracle":
                engine.oracle()



def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return_code = ErrorCodes.SUCCESS
    error_msg = None

    try:
        run_command(args)
    except (HwnasError, OSError, ValueError) as e:
        error_msg = e
        return_code = ErrorCodes.from_exception(e)

    if error_msg is not None:
        assert return_code != ErrorCodes.SUCCESS
        logger.error(f"{args.command}: {unpack_error(error_msg)}")
    return int(return_code)



def cli_parser():
    terminate(main(sys.argv[1:]))
