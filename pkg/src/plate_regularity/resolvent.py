from dataclasses import dataclass
from functools import partial
from logging import getLogger
from math import ceil, exp, isfinite, log
from typing import Callable, List, Literal, Optional, Sequence, Tuple, Union, get_args

import numpy as np
from scipy.optimize import brentq, minimize_scalar  # type: ignore[import]

from plate_regularity.mode_block import (
    ModeBlock,
    StateVec,
    conservative_polynomial,
    generator_stack,
)
from plate_regularity.params import SystemParams
from plate_regularity.spectrum import ModeSpectrum
from plate_regularity.utils import parallel_map


SINGULAR_TOLERANCE = 1e-12
SINGULAR_CONDITION = 1e15
RESIDUAL_TOLERANCE = 1e-10

TRUNCATION_FACTOR = 10.0
TAIL_FRACTION = 0.1
TAIL_SLACK = 1e-6

RESONANCE_SCAN_POINTS = 400
RESONANCE_BRACKET = 0.1
RESONANCE_XATOL = 1e-10

Truncation = Literal["warn", "strict"]
TRUNCATION_MODES: Tuple[Truncation, ...] = get_args(Truncation)

Spacing = Literal["log", "linear"]
SPACINGS: Tuple[Spacing, ...] = get_args(Spacing)


logger = getLogger("plate_regularity.resolvent")


class SingularSystemError(ArithmeticError):
    def __init__(self, lambda_: float, sigma: float, message: Optional[str] = None):
        self.lambda_ = lambda_
        self.sigma = sigma
        self.eigenvalue = complex(0, lambda_)
        super().__init__(
            message
            or f"iλ = {self.eigenvalue} is an eigenvalue of the σ={sigma:g} block"
        )


class TruncationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ResolventSample:
    lambda_: float
    norm: float
    argmax_mode: Optional[int]
    """Index of the attaining mode, `None` if the supremum lies between modes"""
    argmax_sigma: float
    at_boundary: bool = False


@dataclass(frozen=True)
class TruncationReport:
    lambda_max: float
    required_sigma: float
    sigma_max: float
    tail_monotone: bool

    @property
    def adequate(self) -> bool:
        return self.sigma_max >= self.required_sigma and self.tail_monotone

    def describe(self) -> str:
        problems = []
        if self.sigma_max < self.required_sigma:
            problems.append(
                f"largest eigenvalue {self.sigma_max:g} is below the required "
                f"{self.required_sigma:g} for λ={self.lambda_max:g}"
            )
        if not self.tail_monotone:
            problems.append("block norms do not decay over the last modes")
        return "; ".join(problems) if len(problems) > 0 else "adequate"


@dataclass(frozen=True)
class ModePolicy:
    spectrum: ModeSpectrum
    resonance_search: bool = False
    truncation: Truncation = "warn"

    def __post_init__(self) -> None:
        if self.truncation not in TRUNCATION_MODES:
            raise ValueError(
                f"Unknown truncation mode {self.truncation!r}, use one of "
                f"{', '.join(TRUNCATION_MODES)}"
            )


@dataclass(frozen=True)
class ResolventCurve:
    params: SystemParams
    samples: Tuple[ResolventSample, ...]
    mode_policy: ModePolicy
    truncation: TruncationReport

    def __post_init__(self) -> None:
        for previous, sample in zip(self.samples, self.samples[1:]):
            if sample.lambda_ <= previous.lambda_:
                raise ValueError("Resolvent samples must have increasing frequencies")

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s.lambda_ for s in self.samples])

    @property
    def norms(self) -> np.ndarray:
        return np.array([s.norm for s in self.samples])

    @property
    def truncation_suspect(self) -> bool:
        return not self.truncation.adequate or any(s.at_boundary for s in self.samples)


def reduced_determinant(
    params: SystemParams, sigma: Union[float, np.ndarray], lambda_: float
) -> Tuple[Union[complex, np.ndarray], Union[float, np.ndarray]]:
    """The determinant d of the 2×2 system for (u, v) forced in the w-equation and
    the sum of the magnitudes of its terms.
    """
    inertia = 1.0 + params.kappa * sigma**params.beta
    damping = params.delta * sigma**params.theta
    p1 = lambda_**2 * inertia - params.alpha * sigma**2
    p2 = lambda_**2 - params.alpha * sigma
    coupling = params.gamma**2 * lambda_**2 * sigma**2

    d = p1 * p2 - coupling - 1j * lambda_ * damping * p1
    scale = abs(p1 * p2) + coupling + abs(lambda_ * damping * p1)
    return d, scale


def _is_singular(params: SystemParams, sigma: float, lambda_: float) -> bool:
    d, scale = reduced_determinant(params, sigma, lambda_)
    return bool(abs(d) <= SINGULAR_TOLERANCE * scale)


def _check_block(block: ModeBlock, lambda_: float, system: np.ndarray) -> None:
    if block.params is not None:
        singular = _is_singular(block.params, block.sigma, lambda_)
    else:
        singular = bool(np.linalg.cond(system) >= SINGULAR_CONDITION)

    if singular:
        raise SingularSystemError(lambda_, block.sigma)


def _shifted(balanced: np.ndarray, lambda_: float) -> np.ndarray:
    return 1j * lambda_ * np.eye(4) - balanced


def resolvent_solve(block: ModeBlock, lambda_: float, force: StateVec) -> StateVec:
    system = _shifted(block.balanced, lambda_)
    _check_block(block, lambda_, system)

    rhs = block.to_energy(force)
    try:
        x = np.linalg.solve(system, rhs)
        residual = system @ x - rhs
        limit = RESIDUAL_TOLERANCE * (
            np.linalg.norm(rhs) + abs(lambda_) * np.linalg.norm(x)
        )
        if np.linalg.norm(residual) > limit:
            x = x - np.linalg.solve(system, residual)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(lambda_, block.sigma, str(e)) from e

    return block.from_energy(x)


def explicit_mu_nu(
    params: SystemParams, sigma: float, lambda_: float
) -> Tuple[complex, complex]:
    """The closed form (u, v) coefficients of the solution of (iλI - B)U = F with
    F = (0, 0, -1, 0), the remaining coefficients are w = iλu and z = iλv.
    """
    if not isfinite(sigma) or sigma <= 0:
        raise ValueError(f"The eigenvalue must be positive, got {sigma}")

    d, scale = reduced_determinant(params, sigma, lambda_)
    if abs(d) <= SINGULAR_TOLERANCE * scale:
        raise SingularSystemError(
            lambda_,
            sigma,
            f"The closed form solution has a vanishing denominator at σ={sigma:g}, "
            f"λ={lambda_:g}",
        )

    inertia = 1.0 + params.kappa * sigma**params.beta
    p2 = lambda_**2 - params.alpha * sigma
    damping = params.delta * sigma**params.theta

    mu = inertia * (p2 - 1j * lambda_ * damping) / d
    nu = -1j * params.gamma * lambda_ * sigma * inertia / d
    return complex(mu), complex(nu)


def resolvent_block_norm(block: ModeBlock, lambda_: float) -> float:
    system = _shifted(block.balanced, lambda_)
    _check_block(block, lambda_, system)

    return float(np.linalg.norm(np.linalg.inv(system), 2))


def block_norms(
    params: SystemParams, sigmas: Union[Sequence[float], np.ndarray], lambda_: float
) -> np.ndarray:
    s = np.asarray(sigmas, dtype=float).reshape(-1)
    d, scale = reduced_determinant(params, s, lambda_)
    singular = np.abs(d) <= SINGULAR_TOLERANCE * scale
    if np.any(singular):
        raise SingularSystemError(lambda_, float(s[np.argmax(singular)]))

    _, _, balanced = generator_stack(params, s)
    inverses = np.linalg.inv(1j * lambda_ * np.eye(4) - balanced)
    return np.linalg.svd(inverses, compute_uv=False)[:, 0]


def _plate_resonance(params: SystemParams, lambda_: float, s: np.ndarray) -> np.ndarray:
    return lambda_**2 * (1.0 + params.kappa * s**params.beta) - params.alpha * s**2


def _coupled_resonance(
    params: SystemParams, lambda_: float, s: np.ndarray
) -> np.ndarray:
    a, b, c = conservative_polynomial(params, s)
    square = lambda_**2
    return (a * square + b) * square + c


def resonant_sigmas(
    params: SystemParams, lambda_: float, sigma_lo: float, sigma_hi: float
) -> List[float]:
    if sigma_hi <= sigma_lo:
        return []

    grid = np.geomspace(sigma_lo, sigma_hi, RESONANCE_SCAN_POINTS)
    candidates = []
    residuals: List[Callable[[SystemParams, float, np.ndarray], np.ndarray]] = [
        _plate_resonance,
        _coupled_resonance,
    ]

    for residual in residuals:
        signs = np.sign(residual(params, lambda_, grid))
        candidates += [float(s) for s in grid[signs == 0]]

        for i in np.nonzero(signs[:-1] * signs[1:] < 0)[0]:
            root = brentq(
                lambda t: float(residual(params, lambda_, np.exp(t))),
                log(grid[i]),
                log(grid[i + 1]),
                xtol=1e-14,
            )
            candidates.append(exp(root))

    return sorted(set(candidates))


def _block_norm_at(params: SystemParams, lambda_: float, sigma: float) -> float:
    return float(block_norms(params, [sigma], lambda_)[0])


def _maximize_near(
    params: SystemParams, lambda_: float, sigma: float, sigma_lo: float, sigma_hi: float
) -> Tuple[float, float]:
    center = log(sigma)
    lower = max(log(sigma_lo), center - RESONANCE_BRACKET)
    upper = min(log(sigma_hi), center + RESONANCE_BRACKET)

    best = (_block_norm_at(params, lambda_, sigma), sigma)
    if upper > lower:
        result = minimize_scalar(
            lambda t: -_block_norm_at(params, lambda_, exp(t)),
            bounds=(lower, upper),
            method="bounded",
            options={"xatol": RESONANCE_XATOL},
        )
        best = max(best, (float(-result.fun), float(exp(result.x))))

    return best


def resolvent_norm(
    params: SystemParams,
    lambda_: float,
    spectrum: ModeSpectrum,
    resonance_search: bool = False,
) -> ResolventSample:
    """The supremum of the block norms over the modes of the spectrum.

    With `resonance_search` the supremum is taken over the continuum of eigenvalues
    between the smallest and the largest mode, resonance peaks between modes are
    located and maximized explicitly.
    """
    sigmas = spectrum.as_array()
    norms = block_norms(params, sigmas, lambda_)

    index = int(np.argmax(norms))
    norm, argmax_sigma = float(norms[index]), float(sigmas[index])
    argmax_mode: Optional[int] = index

    if resonance_search:
        for sigma in resonant_sigmas(params, lambda_, sigmas[0], sigmas[-1]):
            peak, peak_sigma = _maximize_near(
                params, lambda_, sigma, sigmas[0], sigmas[-1]
            )
            if peak > norm:
                norm, argmax_sigma, argmax_mode = peak, peak_sigma, None

    at_boundary = len(sigmas) > 1 and (
        argmax_mode == len(sigmas) - 1
        or (argmax_mode is None and argmax_sigma >= sigmas[-1] * (1 - 1e-9))
    )
    if at_boundary:
        logger.warning(
            f"The resolvent supremum at λ={lambda_:g} is attained at the largest "
            f"eigenvalue σ={argmax_sigma:g}, the mode truncation is suspect"
        )
    logger.debug(f"λ={lambda_:g}: norm={norm:.6g} at σ={argmax_sigma:.6g}")

    return ResolventSample(lambda_, norm, argmax_mode, argmax_sigma, at_boundary)


def lambda_grid(
    lambda_min: float, lambda_max: float, points: int, spacing: Spacing = "log"
) -> np.ndarray:
    if spacing not in SPACINGS:
        raise ValueError(
            f"Unknown spacing {spacing!r}, use one of {', '.join(SPACINGS)}"
        )
    if points < 1:
        raise ValueError(f"A frequency grid needs at least one point, got {points}")
    if not (isfinite(lambda_min) and isfinite(lambda_max)):
        raise ValueError("Frequencies must be finite")
    if points == 1:
        if lambda_min != lambda_max:
            raise ValueError("A single point grid needs lambda_min == lambda_max")
        return np.array([float(lambda_min)])
    if lambda_max <= lambda_min:
        raise ValueError(
            f"lambda_max ({lambda_max}) must be larger than lambda_min ({lambda_min})"
        )

    if spacing == "log":
        if lambda_min <= 0:
            raise ValueError("A logarithmic grid needs positive frequencies")
        return np.geomspace(lambda_min, lambda_max, points)
    return np.linspace(lambda_min, lambda_max, points)


def check_truncation(
    params: SystemParams, spectrum: ModeSpectrum, lambda_max: float
) -> TruncationReport:
    """Whether the spectrum reaches far enough to resolve frequencies up to
    `lambda_max`: the resonant eigenvalue of λ grows like λ^(2/(2-β)).
    """
    lambda_max = abs(lambda_max)
    required = TRUNCATION_FACTOR * lambda_max ** (2 / (2 - params.beta))

    monotone = True
    if len(spectrum) > 1:
        tail_count = max(2, ceil(TAIL_FRACTION * len(spectrum)))
        tail = block_norms(params, spectrum.as_array()[-tail_count:], lambda_max)
        monotone = bool(np.all(tail[1:] <= tail[:-1] * (1 + TAIL_SLACK)))

    return TruncationReport(lambda_max, required, spectrum.sigma_max, monotone)


def resolvent_curve(
    params: SystemParams,
    lambdas: Sequence[float],
    policy: Union[ModePolicy, ModeSpectrum],
    workers: Optional[int] = 1,
) -> ResolventCurve:
    if isinstance(policy, ModeSpectrum):
        policy = ModePolicy(policy)

    grid = [float(l) for l in lambdas]
    if len(grid) == 0:
        raise ValueError("The frequency grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("The frequency grid must be strictly increasing")

    truncation = check_truncation(params, policy.spectrum, max(abs(l) for l in grid))
    if not truncation.adequate:
        message = f"Mode truncation of {policy.spectrum}: {truncation.describe()}"
        if policy.truncation == "strict":
            raise TruncationError(message)
        logger.warning(message)

    evaluate = partial(
        resolvent_norm,
        params,
        spectrum=policy.spectrum,
        resonance_search=policy.resonance_search,
    )
    samples = tuple(parallel_map(evaluate, grid, workers))

    if policy.truncation == "strict" and any(s.at_boundary for s in samples):
        raise TruncationError(
            f"The resolvent supremum of {params} is attained at the largest mode"
        )

    return ResolventCurve(params, samples, policy, truncation)
