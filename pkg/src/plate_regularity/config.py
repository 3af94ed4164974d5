from configparser import ConfigParser, Error as ConfigParserError, ParsingError
from dataclasses import dataclass, field
from logging import Logger
from math import isfinite, pi
from pathlib import Path
from typing import Any, Callable, Dict, Literal, Mapping, Optional, Tuple, get_args

import numpy as np

from plate_regularity.params import PARAM_KEYS, SystemParams
from plate_regularity.resolvent import (
    SPACINGS,
    TRUNCATION_MODES,
    ModePolicy,
    Spacing,
    Truncation,
    lambda_grid,
)
from plate_regularity.spectrum import (
    ModeSpectrum,
    spectrum_dirichlet_1d,
    spectrum_dirichlet_rectangle,
    spectrum_from_file,
    spectrum_from_list,
    spectrum_geometric,
)


CONFIG_SECTION = "run"
CONFIG_COMMENT_CHAR = "#"

Command = Literal[
    "spectrum", "resolvent", "classify", "sweep", "witness", "decay", "gevrey"
]
COMMANDS: Tuple[Command, ...] = get_args(Command)
REGULARITY_COMMANDS: Tuple[Command, ...] = ("classify", "sweep", "gevrey")

SpectrumProvider = Literal["dirichlet", "rectangle", "geometric", "list", "file"]
SPECTRUM_PROVIDERS: Tuple[SpectrumProvider, ...] = get_args(SpectrumProvider)

NORMALIZATIONS = ("resolvent_ratio", "paper_dbeta")
MIN_FIT_POINTS = 8


class ConfigError(ValueError):
    def __init__(
        self, message: str, key: Optional[str] = None, line: Optional[int] = None
    ) -> None:
        self.key = key
        self.line = line

        location = []
        if key is not None:
            location.append(f"key '{key}'")
        if line is not None:
            location.append(f"line {line}")
        super().__init__(
            f"{message} ({', '.join(location)})" if len(location) > 0 else message
        )


@dataclass(frozen=True)
class RawValue:
    text: str
    line: Optional[int]
    """1-based line of the last definition, `None` for command line flags"""


def _parse_float(text: str) -> float:
    value = float(text)
    if not isfinite(value):
        raise ValueError(f"{text!r} is not a finite number")
    return value


def _parse_bool(text: str) -> bool:
    try:
        return ConfigParser.BOOLEAN_STATES[text.lower()]
    except KeyError:
        raise ValueError(f"{text!r} is not a boolean, use true or false")


def _parse_float_list(text: str) -> Tuple[float, ...]:
    return tuple(_parse_float(v) for v in text.split(",") if len(v.strip()) > 0)


def _parse_path(text: str) -> str:
    if len(text.strip()) == 0:
        raise ValueError("Paths must not be empty")
    return text.strip()


def _choice(*choices: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in choices:
            raise ValueError(f"{text!r} is not one of {', '.join(choices)}")
        return text

    return parse


@dataclass(frozen=True)
class ConfigKey:
    parse: Callable[[str], Any]
    default: Any
    help: str


CONFIG_KEYS: Dict[str, ConfigKey] = {
    "alpha": ConfigKey(_parse_float, 1.0, "Plate stiffness α > 0"),
    "gamma": ConfigKey(_parse_float, 1.0, "Coupling γ ≠ 0"),
    "delta": ConfigKey(_parse_float, 1.0, "Damping strength δ >= 0"),
    "kappa": ConfigKey(_parse_float, 1.0, "Rotational inertia κ > 0"),
    "theta": ConfigKey(_parse_float, None, "Damping exponent θ in [0,1], required"),
    "beta": ConfigKey(_parse_float, None, "Inertia exponent β in (0,1], required"),
    "spectrum": ConfigKey(
        _choice(*SPECTRUM_PROVIDERS), "dirichlet", "The eigenvalue provider"
    ),
    "length": ConfigKey(_parse_float, pi, "Interval length of the dirichlet spectrum"),
    "width": ConfigKey(_parse_float, pi, "Width of the rectangle spectrum"),
    "height": ConfigKey(_parse_float, pi, "Height of the rectangle spectrum"),
    "count": ConfigKey(int, 400, "Number of modes"),
    "sigma_min": ConfigKey(
        _parse_float, 1.0, "Smallest eigenvalue of a geometric spectrum"
    ),
    "sigma_max": ConfigKey(
        _parse_float, 1e8, "Largest eigenvalue of a geometric spectrum"
    ),
    "sigma_values": ConfigKey(
        _parse_float_list, (), "Comma separated eigenvalues of a list spectrum"
    ),
    "spectrum_file": ConfigKey(
        _parse_path, None, "File with one eigenvalue per line for a file spectrum"
    ),
    "lambda_min": ConfigKey(_parse_float, 1.0, "Smallest frequency"),
    "lambda_max": ConfigKey(_parse_float, 100.0, "Largest frequency"),
    "lambda_points": ConfigKey(int, 64, "Number of frequencies"),
    "lambda_spacing": ConfigKey(_choice(*SPACINGS), "log", "Frequency spacing"),
    "fit_window": ConfigKey(
        _parse_float, 0.4, "Top fraction of the log frequency range used for fits"
    ),
    "output": ConfigKey(_parse_path, None, "The CSV file to write"),
    "truncation": ConfigKey(
        _choice(*TRUNCATION_MODES), "warn", "Whether inadequate truncations fail"
    ),
    "resonance_search": ConfigKey(
        _parse_bool, False, "Maximize over the eigenvalue continuum near resonances"
    ),
    "workers": ConfigKey(int, 1, "Number of worker threads"),
    "case": ConfigKey(int, None, "Witness case 1, 2, 3 or 4"),
    "normalization": ConfigKey(
        _choice(*NORMALIZATIONS),
        "resolvent_ratio",
        "Witness eigenfunction normalization",
    ),
    "t_max": ConfigKey(_parse_float, 50.0, "Final time of the decay command"),
    "t_points": ConfigKey(int, 100, "Number of times of the decay command"),
    "seed": ConfigKey(int, 0, "Seed of the random initial data"),
    "theta_min": ConfigKey(_parse_float, 0.0, "Smallest θ of a sweep"),
    "theta_max": ConfigKey(_parse_float, 1.0, "Largest θ of a sweep"),
    "theta_points": ConfigKey(int, 9, "Number of θ values of a sweep"),
    "beta_min": ConfigKey(_parse_float, 0.1, "Smallest β of a sweep"),
    "beta_max": ConfigKey(_parse_float, 1.0, "Largest β of a sweep"),
    "beta_points": ConfigKey(int, 9, "Number of β values of a sweep"),
    "phi": ConfigKey(
        _parse_float, None, "Exponent of the gevrey command, predicted if not given"
    ),
}


@dataclass(frozen=True)
class SpectrumConfig:
    provider: SpectrumProvider = "dirichlet"
    length: float = pi
    width: float = pi
    height: float = pi
    count: int = 400
    sigma_min: float = 1.0
    sigma_max: float = 1e8
    values: Tuple[float, ...] = ()
    path: Optional[str] = None

    def build(self, logger: Logger) -> ModeSpectrum:
        if self.provider == "dirichlet":
            return spectrum_dirichlet_1d(self.length, self.count)
        if self.provider == "rectangle":
            return spectrum_dirichlet_rectangle(self.width, self.height, self.count)
        if self.provider == "geometric":
            return spectrum_geometric(self.sigma_min, self.sigma_max, self.count)
        if self.provider == "list":
            return spectrum_from_list(self.values)
        if self.path is None:
            raise ConfigError("A file spectrum needs a spectrum_file", "spectrum_file")
        return spectrum_from_file(Path(self.path), logger)


@dataclass(frozen=True)
class LambdaGridConfig:
    lambda_min: float = 1.0
    lambda_max: float = 100.0
    points: int = 64
    spacing: Spacing = "log"

    def build(self) -> np.ndarray:
        return lambda_grid(self.lambda_min, self.lambda_max, self.points, self.spacing)


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    spectrum: SpectrumConfig = SpectrumConfig()
    lambda_grid: LambdaGridConfig = LambdaGridConfig()
    fit_window: float = 0.4
    output_path: Optional[str] = None
    truncation: Truncation = "warn"
    resonance_search: bool = False
    workers: int = 1
    case: Optional[int] = None
    normalization: str = "resolvent_ratio"
    t_max: float = 50.0
    t_points: int = 100
    seed: int = 0
    theta_range: Tuple[float, float, int] = (0.0, 1.0, 9)
    beta_range: Tuple[float, float, int] = (0.1, 1.0, 9)
    phi: Optional[float] = None
    lines: Mapping[str, Optional[int]] = field(default_factory=dict, compare=False)

    def policy(self, logger: Logger) -> ModePolicy:
        return ModePolicy(
            self.spectrum.build(logger), self.resonance_search, self.truncation
        )

    def _error(self, message: str, key: str) -> ConfigError:
        return ConfigError(message, key, self.lines.get(key))

    def validate_for(self, command: str) -> None:
        if command not in COMMANDS:
            raise ConfigError(
                f"Unknown command {command!r}, use one of {', '.join(COMMANDS)}"
            )

        if command in REGULARITY_COMMANDS:
            if self.lambda_grid.lambda_min < 1:
                raise self._error(f"{command} needs lambda_min >= 1", "lambda_min")
            if self.lambda_grid.points < MIN_FIT_POINTS:
                raise self._error(
                    f"Fits need at least {MIN_FIT_POINTS} frequencies", "lambda_points"
                )
        if command == "witness" and self.case is None:
            raise self._error("The witness command needs a case", "case")


def _definition_lines(text: str) -> Dict[str, int]:
    lines: Dict[str, int] = {}
    for i, raw_line in enumerate(text.splitlines()):
        line = raw_line.strip()
        if len(line) == 0 or line.startswith(CONFIG_COMMENT_CHAR) or "=" not in line:
            continue
        lines[line.split("=", 1)[0].strip()] = i + 1
    return lines


def read_config_values(text: str) -> Dict[str, RawValue]:
    """Read the `key=value` lines of a configuration document, later definitions of a
    key override earlier ones.
    """
    parser = ConfigParser(
        strict=False,
        interpolation=None,
        delimiters=("=",),
        comment_prefixes=(CONFIG_COMMENT_CHAR,),
        inline_comment_prefixes=(CONFIG_COMMENT_CHAR,),
        empty_lines_in_values=False,
    )
    parser.optionxform = str  # type: ignore[assignment,method-assign]

    try:
        parser.read_string(f"[{CONFIG_SECTION}]\n{text}")
    except ParsingError as e:
        line, content = e.errors[0]
        raise ConfigError(f"Malformed line {content}", line=line - 1) from e
    except ConfigParserError as e:
        raise ConfigError(f"Malformed configuration: {e.message}") from e

    if parser.sections() != [CONFIG_SECTION]:
        raise ConfigError("Sections are not supported in configuration documents")

    lines = _definition_lines(text)
    values: Dict[str, RawValue] = {}
    for key, value in parser.items(CONFIG_SECTION):
        if key not in CONFIG_KEYS:
            raise ConfigError("Unknown key", key, lines.get(key))
        values[key] = RawValue(value.strip(), lines.get(key))

    return values


def _typed_values(values: Mapping[str, RawValue]) -> Dict[str, Any]:
    typed = {}
    for key, definition in CONFIG_KEYS.items():
        if key not in values:
            typed[key] = definition.default
            continue

        raw = values[key]
        try:
            typed[key] = definition.parse(raw.text)
        except ValueError as e:
            raise ConfigError(
                f"Malformed value {raw.text!r}: {e}", key, raw.line
            ) from e
    return typed


def build_run_config(values: Mapping[str, RawValue]) -> RunConfig:
    unknown = set(values) - set(CONFIG_KEYS)
    if len(unknown) > 0:
        key = sorted(unknown)[0]
        raise ConfigError("Unknown key", key, values[key].line)

    v = _typed_values(values)
    lines = {key: raw.line for key, raw in values.items()}

    def error(message: str, key: str) -> ConfigError:
        return ConfigError(message, key, lines.get(key))

    # range errors of a given exponent take precedence over a missing one
    if v["theta"] is not None and not 0 <= v["theta"] <= 1:
        raise error(f"theta must lie in [0,1], got {v['theta']}", "theta")
    if v["beta"] is not None and not 0 < v["beta"] <= 1:
        raise error(f"beta must lie in (0,1], got {v['beta']}", "beta")
    for key in ("theta", "beta"):
        if v[key] is None:
            raise error(f"{key} is required", key)

    try:
        params = SystemParams.from_mapping({key: v[key] for key in PARAM_KEYS})
    except ValueError as e:
        key = str(e).split(" ", 1)[0]
        raise error(str(e), key if key in PARAM_KEYS else "theta") from e

    if not 0 < v["fit_window"] <= 1:
        raise error("fit_window must lie in (0,1]", "fit_window")
    for key in (
        "count",
        "lambda_points",
        "workers",
        "t_points",
        "theta_points",
        "beta_points",
    ):
        if v[key] < 1:
            raise error(f"{key} must be a positive integer", key)
    if v["seed"] < 0:
        raise error("seed must not be negative", "seed")
    if v["t_max"] < 0:
        raise error("t_max must not be negative", "t_max")
    if v["phi"] is not None and not 0 < v["phi"] <= 1:
        raise error("phi must lie in (0,1]", "phi")
    if v["case"] is not None and v["case"] not in (1, 2, 3, 4):
        raise error("case must be 1, 2, 3 or 4", "case")

    return RunConfig(
        params=params,
        spectrum=SpectrumConfig(
            provider=v["spectrum"],
            length=v["length"],
            width=v["width"],
            height=v["height"],
            count=v["count"],
            sigma_min=v["sigma_min"],
            sigma_max=v["sigma_max"],
            values=v["sigma_values"],
            path=v["spectrum_file"],
        ),
        lambda_grid=LambdaGridConfig(
            v["lambda_min"], v["lambda_max"], v["lambda_points"], v["lambda_spacing"]
        ),
        fit_window=v["fit_window"],
        output_path=v["output"],
        truncation=v["truncation"],
        resonance_search=v["resonance_search"],
        workers=v["workers"],
        case=v["case"],
        normalization=v["normalization"],
        t_max=v["t_max"],
        t_points=v["t_points"],
        seed=v["seed"],
        theta_range=(v["theta_min"], v["theta_max"], v["theta_points"]),
        beta_range=(v["beta_min"], v["beta_max"], v["beta_points"]),
        phi=v["phi"],
        lines=lines,
    )


def parse_config(text: str) -> RunConfig:
    return build_run_config(read_config_values(text))
