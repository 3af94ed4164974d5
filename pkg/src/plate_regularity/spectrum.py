from dataclasses import dataclass
from logging import Logger
from math import isfinite, pi
from pathlib import Path
from typing import Generator, Iterable, Iterator, List, Tuple, Union, overload

import numpy as np


SPECTRUM_FILE_COMMENT_CHAR = "#"


@dataclass(frozen=True)
class ModeSpectrum:
    """The eigenvalues σ_n of the positive operator A that are taken into account.

    Every eigenvalue is one mode, modes are ordered by increasing eigenvalue.
    """

    sigmas: Tuple[float, ...]
    label: str

    def __post_init__(self) -> None:
        if len(self.sigmas) == 0:
            raise ValueError("A spectrum needs at least one eigenvalue")

        previous = 0.0
        for i, sigma in enumerate(self.sigmas):
            if not isfinite(sigma) or sigma <= 0:
                raise ValueError(
                    f"Eigenvalue #{i + 1} must be positive and finite, got {sigma}"
                )
            if sigma <= previous:
                raise ValueError(
                    f"Eigenvalues must be strictly increasing, got {previous} "
                    f"followed by {sigma}"
                )
            previous = sigma

    def __len__(self) -> int:
        return len(self.sigmas)

    def __iter__(self) -> Iterator[float]:
        return iter(self.sigmas)

    @overload
    def __getitem__(self, index: int) -> float:
        ...

    @overload
    def __getitem__(self, index: slice) -> Tuple[float, ...]:
        ...

    def __getitem__(self, index: Union[int, slice]) -> Union[float, Tuple[float, ...]]:
        return self.sigmas[index]

    @property
    def sigma_min(self) -> float:
        return self.sigmas[0]

    @property
    def sigma_max(self) -> float:
        return self.sigmas[-1]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.sigmas, dtype=float)

    def head(self, count: int) -> "ModeSpectrum":
        if count < 1:
            raise ValueError(f"Cannot keep {count} modes of a spectrum")
        return ModeSpectrum(self.sigmas[:count], f"{self.label}[:{count}]")

    def __str__(self) -> str:
        return (
            f"{self.label} ({len(self)} modes, σ ∈ [{self.sigma_min:g}, "
            f"{self.sigma_max:g}])"
        )


def _check_count(count: int) -> None:
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ValueError(f"The number of modes must be a positive integer, got {count}")


def _check_length(name: str, value: float) -> None:
    if not isfinite(value) or value <= 0:
        raise ValueError(f"The {name} must be positive and finite, got {value}")


def spectrum_dirichlet_1d(length: float, count: int) -> ModeSpectrum:
    """The Dirichlet Laplacian on the interval (0, length): σ_n = (nπ/length)²"""
    _check_length("length", length)
    _check_count(count)

    return ModeSpectrum(
        tuple((n * pi / length) ** 2 for n in range(1, count + 1)),
        f"dirichlet_1d(length={length:g})",
    )


def spectrum_dirichlet_rectangle(
    width: float, height: float, count: int
) -> ModeSpectrum:
    """The first `count` distinct Dirichlet Laplacian eigenvalues of a rectangle.

    Eigenvalues with multiplicity (e.g. on a square) are listed once, the generator
    blocks depend on the eigenvalue only.
    """
    _check_length("width", width)
    _check_length("height", height)
    _check_count(count)

    # every distinct value of the first `count` is reached with m, n <= count
    m = np.arange(1, count + 1, dtype=float)
    values = np.add.outer((m * pi / width) ** 2, (m * pi / height) ** 2).ravel()
    values = np.unique(values)
    # coincident eigenvalues such as 1² + 7² = 5² + 5² may differ in the last bit
    keep = np.concatenate(([True], np.diff(values) > 1e-12 * values[1:]))
    values = values[keep]

    return ModeSpectrum(
        tuple(float(v) for v in values[:count]),
        f"dirichlet_rectangle(width={width:g}, height={height:g})",
    )


def spectrum_geometric(sigma_min: float, sigma_max: float, count: int) -> ModeSpectrum:
    _check_length("smallest eigenvalue", sigma_min)
    _check_length("largest eigenvalue", sigma_max)
    _check_count(count)

    if count == 1:
        if sigma_min != sigma_max:
            raise ValueError("A single mode needs sigma_min == sigma_max")
        return ModeSpectrum((float(sigma_min),), f"geometric({sigma_min:g})")
    if sigma_max <= sigma_min:
        raise ValueError(
            f"sigma_max ({sigma_max}) must be larger than sigma_min ({sigma_min})"
        )

    return ModeSpectrum(
        tuple(float(v) for v in np.geomspace(sigma_min, sigma_max, count)),
        f"geometric({sigma_min:g}..{sigma_max:g})",
    )


def spectrum_from_list(values: Iterable[float], label: str = "user") -> ModeSpectrum:
    return ModeSpectrum(tuple(float(v) for v in values), label)


def read_spectrum_file(
    file_path: Path, logger: Logger, encoding: str = "utf-8"
) -> Generator[float, None, None]:
    """Yield the eigenvalues listed in the given file, one per line.

    Blank lines and lines starting with `SPECTRUM_FILE_COMMENT_CHAR` are skipped,
    lines that are no number are reported and skipped.
    """
    with open(file_path, "r", encoding=encoding) as f:
        for i, raw_line in enumerate(f):
            line = raw_line.strip()

            if len(line) == 0 or line.startswith(SPECTRUM_FILE_COMMENT_CHAR):
                continue

            try:
                yield float(line)
            except ValueError as e:
                logger.warning(f"Cannot parse eigenvalue in line {i + 1}: {str(e)}")


def spectrum_from_file(file_path: Path, logger: Logger) -> ModeSpectrum:
    values: List[float] = list(read_spectrum_file(file_path, logger))
    return spectrum_from_list(values, f"file({file_path.name})")

