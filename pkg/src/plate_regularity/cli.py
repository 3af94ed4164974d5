from argparse import ArgumentParser, Namespace
from csv import writer
from dataclasses import dataclass
from logging import DEBUG, INFO, WARNING, basicConfig, getLogger
from pathlib import Path
from sys import stderr
from typing import Callable, Dict, Iterable, List, NoReturn, Optional, Sequence, Union

import numpy as np

from plate_regularity.config import (
    COMMANDS,
    CONFIG_KEYS,
    ConfigError,
    RawValue,
    RunConfig,
    build_run_config,
    read_config_values,
)
from plate_regularity.decay import energy_history, fit_decay_rate, random_states
from plate_regularity.mode_block import (
    block_spectrum,
    build_mode_block,
    spectral_abscissa,
)
from plate_regularity.regularity import (
    RegionReport,
    classify_point,
    exponent_grid,
    gevrey_product,
    predicted_phi,
    region_sweep,
)
from plate_regularity.resolvent import TruncationError, resolvent_curve
from plate_regularity.spectrum import ModeSpectrum
from plate_regularity.static import NAME, SLUG
from plate_regularity.utils import format_value, get_valid_filename
from plate_regularity.version import get_version
from plate_regularity.witness import Normalization, WitnessCase, witness_report


DEFAULT_LOG_LEVEL = WARNING
CSV_DELIMITER = ","

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

REPORT_HEADER = (
    "theta",
    "beta",
    "in_RL",
    "in_RG1",
    "in_RG2",
    "predicted_phi",
    "measured_slope",
    "spectral_abscissa",
    "verdict",
)


logger = getLogger(SLUG)


Cell = Union[None, bool, int, float, str]
Row = Sequence[Cell]


@dataclass
class CommandResult:
    header: Sequence[str]
    rows: List[Row]
    failed: bool = False
    """Some rows are results of failed computations, the command exits with
    `EXIT_NUMERICAL`"""


def write_csv(header: Sequence[str], rows: Iterable[Row], filename: str) -> None:
    with open(filename, "w", encoding="utf-8", newline="") as f:
        w = writer(f, delimiter=CSV_DELIMITER, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(cell) for cell in row])


def _report_row(report: RegionReport) -> Row:
    return (
        report.theta,
        report.beta,
        report.in_RL,
        report.in_RG1,
        report.in_RG2,
        report.predicted_phi,
        report.measured_slope,
        report.spectral_abscissa,
        str(report.verdict),
    )


def run_spectrum(config: RunConfig) -> CommandResult:
    spectrum = config.spectrum.build(logger)
    rows: List[Row] = []
    for sigma in spectrum:
        for value in block_spectrum(build_mode_block(config.params, sigma)):
            rows.append((sigma, value.real, value.imag))

    logger.info(
        f"Spectral abscissa of {spectrum}: {spectral_abscissa(config.params, spectrum)}"
    )
    return CommandResult(("sigma", "re_eigenvalue", "im_eigenvalue"), rows)


def run_resolvent(config: RunConfig) -> CommandResult:
    curve = resolvent_curve(
        config.params, config.lambda_grid.build(), config.policy(logger), config.workers
    )
    return CommandResult(
        ("lambda", "norm", "argmax_sigma"),
        [(s.lambda_, s.norm, s.argmax_sigma) for s in curve.samples],
    )


def run_classify(config: RunConfig) -> CommandResult:
    grid = config.lambda_grid
    report = classify_point(
        config.params,
        (grid.lambda_min, grid.lambda_max),
        config.policy(logger),
        config.fit_window,
        grid.points,
        grid.spacing,
        config.workers,
    )
    logger.info(
        f"{config.params}: slope {report.measured_slope:.4f}, verdict {report.verdict}"
    )
    return CommandResult(REPORT_HEADER, [_report_row(report)])


def run_sweep(config: RunConfig) -> CommandResult:
    grid = config.lambda_grid
    reports = region_sweep(
        config.params,
        exponent_grid(config.theta_range, config.beta_range),
        config.policy(logger),
        (grid.lambda_min, grid.lambda_max),
        config.fit_window,
        grid.points,
        grid.spacing,
        config.workers,
    )
    return CommandResult(
        REPORT_HEADER,
        [_report_row(r) for r in reports],
        failed=any(r.error is not None for r in reports),
    )


def run_witness(config: RunConfig) -> CommandResult:
    assert config.case is not None
    report = witness_report(
        WitnessCase.parse(config.case),
        config.params,
        config.spectrum.build(logger),
        Normalization(config.normalization),
        workers=config.workers,
    )
    return CommandResult(
        (
            "sigma",
            "lambda",
            "re_mu",
            "im_mu",
            "re_nu",
            "im_nu",
            "norm_U",
            "norm_F",
            "product",
        ),
        [
            (
                p.sigma,
                p.lambda_,
                p.mu.real,
                p.mu.imag,
                p.nu.real,
                p.nu.imag,
                p.norm_u,
                p.norm_f,
                p.product,
            )
            for p in report.points
        ],
    )


def _log_decay_rate(
    config: RunConfig, spectrum: ModeSpectrum, times: np.ndarray, energies: np.ndarray
) -> None:
    if config.params.is_conservative:
        logger.info("Without damping the total energy is conserved")
        return

    try:
        rate = fit_decay_rate(times, energies)
    except ValueError as e:
        logger.info(f"No decay rate fitted: {e}")
        return

    logger.info(
        f"Log energy decays with rate {rate:.4g}, twice the spectral abscissa is "
        f"{2 * spectral_abscissa(config.params, spectrum):.4g}"
    )


def run_decay(config: RunConfig) -> CommandResult:
    spectrum = config.spectrum.build(logger)
    times = np.linspace(0, config.t_max, config.t_points)
    states = random_states(len(spectrum), config.seed)
    energies = energy_history(config.params, spectrum, states, times, config.workers)

    _log_decay_rate(config, spectrum, times, energies)
    return CommandResult(
        ("t", "energy"), [(float(t), float(e)) for t, e in zip(times, energies)]
    )


def run_gevrey(config: RunConfig) -> CommandResult:
    phi = config.phi
    if phi is None:
        phi = predicted_phi(config.params.theta, config.params.beta)
    if phi is None:
        raise ConfigError(
            f"{config.params} lies in no Gevrey region, give the exponent explicitly",
            "phi",
        )

    curve = resolvent_curve(
        config.params, config.lambda_grid.build(), config.policy(logger), config.workers
    )
    products = gevrey_product(curve, phi)
    return CommandResult(
        ("lambda", "norm_times_lambda_phi"),
        [(s.lambda_, float(p)) for s, p in zip(curve.samples, products)],
    )


COMMAND_RUNNERS: Dict[str, Callable[[RunConfig], CommandResult]] = {
    "spectrum": run_spectrum,
    "resolvent": run_resolvent,
    "classify": run_classify,
    "sweep": run_sweep,
    "witness": run_witness,
    "decay": run_decay,
    "gevrey": run_gevrey,
}


def default_output_path(command: str, config: RunConfig) -> str:
    return get_valid_filename(
        f"{command}_theta{config.params.theta:g}_beta{config.params.beta:g}.csv"
    )


def run_command(name: str, config: RunConfig) -> int:
    """Run the command and write its CSV, return the exit code"""
    try:
        config.validate_for(name)
        result = COMMAND_RUNNERS[name](config)

        output = config.output_path or default_output_path(name, config)
        write_csv(result.header, result.rows, output)
        logger.info(f"Wrote {len(result.rows)} rows to {output}")
    except (ArithmeticError, TruncationError, np.linalg.LinAlgError) as e:
        logger.error(f"Numerical failure in {name}: {e}")
        return EXIT_NUMERICAL
    except (ValueError, OSError) as e:
        logger.error(str(e))
        return EXIT_USAGE

    return EXIT_NUMERICAL if result.failed else EXIT_OK


class _ArgumentParser(ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def get_arg_parser() -> ArgumentParser:
    parser = _ArgumentParser(
        prog=SLUG,
        description=(
            f"{NAME} - Resolvent, Gevrey and decay analysis of a plate coupled to a "
            "fractionally damped electrical network"
        ),
    )

    parser.add_argument(
        "--version", "-V", action="version", version=f"{NAME}, version {get_version()}"
    )
    parser.add_argument(
        "-v",
        "--verbose",
        dest="log_level",
        help="Set the loglevel to INFO",
        action="store_const",
        const=INFO,
        default=DEFAULT_LOG_LEVEL,
    )
    parser.add_argument(
        "-vv",
        "--very-verbose",
        dest="log_level",
        help="Set the loglevel to DEBUG",
        action="store_const",
        const=DEBUG,
    )
    parser.add_argument(
        "--config",
        "-c",
        dest="config",
        help=(
            "A configuration file with one key=value per line, lines starting with "
            "'#' are comments. Every key can also be given as a flag, flags override "
            "the file"
        ),
        type=Path,
        default=None,
    )

    for key, definition in CONFIG_KEYS.items():
        default = (
            "" if definition.default is None else f", default is {definition.default}"
        )
        parser.add_argument(
            f"--{key.replace('_', '-')}",
            dest=key,
            help=f"{definition.help}{default}",
            type=str,
            default=None,
        )

    parser.add_argument(
        "command", help="The analysis to run", choices=COMMANDS, type=str
    )

    return parser


def get_flag_values(args: Namespace) -> Dict[str, RawValue]:
    return {
        key: RawValue(getattr(args, key), None)
        for key in CONFIG_KEYS
        if getattr(args, key, None) is not None
    }


def load_config(args: Namespace) -> RunConfig:
    values: Dict[str, RawValue] = {}
    if args.config is not None:
        values = read_config_values(Path(args.config).read_text(encoding="utf-8"))

    values.update(get_flag_values(args))
    config = build_run_config(values)
    logger.debug(f"Coefficients {config.params.as_dict()}")
    return config


def init_logging(args: Namespace) -> None:
    if args.log_level < INFO:
        log_format = "[%(asctime)s] %(levelname)s:%(name)s:%(message)s"
    else:
        log_format = "%(levelname)s: %(message)s"

    basicConfig(level=args.log_level, format=log_format, datefmt="%Y-%m-%d %H:%M:%S")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = get_arg_parser()
    args = parser.parse_args(argv)

    init_logging(args)

    try:
        config = load_config(args)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"Cannot read configuration file {args.config}: {e}")
        return EXIT_USAGE

    return run_command(args.command, config)


if __name__ == "__main__":
    raise SystemExit(main())
