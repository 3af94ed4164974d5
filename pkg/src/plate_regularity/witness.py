from dataclasses import dataclass
from enum import Enum
from functools import partial
from logging import getLogger
from math import isfinite, sqrt
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from plate_regularity.mode_block import (
    StateVec,
    build_mode_block,
    conservative_polynomial,
    weighted_norm,
)
from plate_regularity.params import SystemParams
from plate_regularity.regularity import fit_loglog_slope
from plate_regularity.resolvent import explicit_mu_nu
from plate_regularity.spectrum import ModeSpectrum
from plate_regularity.utils import parallel_map


WITNESS_RESIDUAL_TOLERANCE = 1e-9
DEFAULT_WITNESS_WINDOW = 0.5
APPLICABILITY_TOLERANCE = 1e-12

UNIT_FORCE = StateVec(0, 0, -1, 0)


logger = getLogger("plate_regularity.witness")


class WitnessResidualError(ArithmeticError):
    pass


class Normalization(Enum):
    RESOLVENT_RATIO = "resolvent_ratio"
    """Eigenfunctions normalized in L², the ratio is the resolvent norm quotient"""
    PAPER_DBETA = "paper_dbeta"
    """Eigenfunctions normalized in D(A^(β/2))"""

    def __str__(self) -> str:
        return self.value


class WitnessCase(Enum):
    CASE1 = 1
    CASE2 = 2
    CASE3 = 3
    CASE4 = 4

    def __str__(self) -> str:
        return f"Case{self.value}"

    @classmethod
    def parse(cls, value: Union[int, str]) -> "WitnessCase":
        text = str(value).strip().lower()
        if text.startswith("case"):
            text = text[4:]
        try:
            return cls(int(text))
        except ValueError:
            raise ValueError(f"Unknown witness case {value!r}, use 1, 2, 3 or 4")

    def applies(self, theta: float, beta: float) -> bool:
        tol = APPLICABILITY_TOLERANCE
        if self is WitnessCase.CASE1:
            return theta + beta <= 1.5 + tol
        if self is WitnessCase.CASE2:
            return beta == 1 and 0 <= theta < 0.5
        if self is WitnessCase.CASE3:
            return beta == 1 and 0.5 < theta <= 1
        return 2 * theta + beta > 2 and 0 < beta < 1

    @property
    def lambda_rule(self) -> str:
        if self is WitnessCase.CASE1:
            return "λ² is the smaller root of q"
        if self is WitnessCase.CASE2:
            return "λ² is the larger root of q"
        return "λ² = ασ²/(1+κσ^β), the plate resonance"

    def check(self, theta: float, beta: float) -> None:
        if not self.applies(theta, beta):
            raise ValueError(f"{self} does not apply at θ={theta:g}, β={beta:g}")


@dataclass(frozen=True)
class WitnessPoint:
    sigma: float
    lambda_: float
    mu: complex
    nu: complex
    norm_u: float
    norm_f: float
    product: float
    """|λ|·norm_u/norm_f"""
    residual: float


@dataclass(frozen=True)
class WitnessReport:
    case: WitnessCase
    params: SystemParams
    normalization: Normalization
    points: Tuple[WitnessPoint, ...]
    measured: float
    predicted: float


def q_poly_coeffs(params: SystemParams, sigma: float) -> Tuple[float, float, float]:
    if not isfinite(sigma) or sigma <= 0:
        raise ValueError(f"The eigenvalue must be positive, got {sigma}")

    a, b, c = conservative_polynomial(params, np.array(sigma))
    return float(a), float(b), float(c)


def q_roots(params: SystemParams, sigma: float) -> Tuple[float, float]:
    """The roots s⁻ <= s⁺ of q, both real and positive"""
    a, b, c = q_poly_coeffs(params, sigma)
    discriminant = max(b * b - 4 * a * c, 0.0)

    larger = (-b + sqrt(discriminant)) / (2 * a)
    return c / (a * larger), larger


def choose_lambda(case: WitnessCase, params: SystemParams, sigma: float) -> float:
    case.check(params.theta, params.beta)

    if case in (WitnessCase.CASE1, WitnessCase.CASE2):
        smaller, larger = q_roots(params, sigma)
        return sqrt(smaller if case is WitnessCase.CASE1 else larger)

    return sqrt(params.alpha * sigma**2 / (1 + params.kappa * sigma**params.beta))


def witness_point(
    case: WitnessCase,
    params: SystemParams,
    sigma: float,
    normalization: Normalization = Normalization.RESOLVENT_RATIO,
) -> WitnessPoint:
    lambda_ = choose_lambda(case, params, sigma)
    mu, nu = explicit_mu_nu(params, sigma, lambda_)

    block = build_mode_block(params, sigma)
    state = StateVec(mu, nu, 1j * lambda_ * mu, 1j * lambda_ * nu)

    x = block.to_energy(state)
    rhs = block.to_energy(UNIT_FORCE)
    defect = (1j * lambda_ * np.eye(4) - block.balanced) @ x - rhs
    residual = float(
        np.linalg.norm(defect)
        / (np.linalg.norm(rhs) + abs(lambda_) * np.linalg.norm(x))
    )
    if residual > WITNESS_RESIDUAL_TOLERANCE:
        raise WitnessResidualError(
            f"{case} witness at σ={sigma:g} violates the resolvent equation, "
            f"relative residual {residual:.3g}"
        )

    norm_u = weighted_norm(state, block)
    if normalization is Normalization.PAPER_DBETA:
        norm_u *= sigma ** (-params.beta / 2)
        norm_f = sqrt(sigma ** (-params.beta) + params.kappa)
    else:
        norm_f = weighted_norm(UNIT_FORCE, block)

    return WitnessPoint(
        sigma, lambda_, mu, nu, norm_u, norm_f, abs(lambda_) * norm_u / norm_f, residual
    )


def witness_sequence(
    case: WitnessCase,
    params: SystemParams,
    spectrum: ModeSpectrum,
    normalization: Normalization = Normalization.RESOLVENT_RATIO,
    workers: Optional[int] = 1,
) -> List[WitnessPoint]:
    case.check(params.theta, params.beta)
    if case is WitnessCase.CASE1 and params.delta == 0:
        raise ValueError(f"{case} needs a positive damping delta")

    return parallel_map(
        partial(witness_point, case, params, normalization=normalization),
        spectrum.sigmas,
        workers,
    )


def predicted_witness_exponent(case: WitnessCase, theta: float, beta: float) -> float:
    case.check(theta, beta)

    if case is WitnessCase.CASE1:
        return 5 - 4 * beta - 2 * theta
    if case is WitnessCase.CASE2:
        return 1 - 2 * theta
    if case is WitnessCase.CASE3:
        return 2 * theta - 1
    return (beta + 2 * theta - 2) / (2 - beta)


def case1_mu_exponent_candidates(theta: float, beta: float) -> Tuple[float, float]:
    """Two competing orders of |μ| along the Case1 sequence, the first from the
    leading-order expansion, the second from counting orders of the determinant.
    """
    return 3 - 4 * beta - 2 * theta, 1 - 2 * beta - 2 * theta


def witness_growth_fit(
    points: Sequence[WitnessPoint], window: float = DEFAULT_WITNESS_WINDOW
) -> float:
    if len(points) < 3:
        raise ValueError(
            f"A growth fit needs at least 3 witness points, got {len(points)}"
        )

    return fit_loglog_slope(
        [abs(p.lambda_) for p in points], [p.product for p in points], window
    )


def witness_report(
    case: WitnessCase,
    params: SystemParams,
    spectrum: ModeSpectrum,
    normalization: Normalization = Normalization.RESOLVENT_RATIO,
    window: float = DEFAULT_WITNESS_WINDOW,
    workers: Optional[int] = 1,
) -> WitnessReport:
    points = witness_sequence(case, params, spectrum, normalization, workers)
    measured = witness_growth_fit(points, window)
    predicted = predicted_witness_exponent(case, params.theta, params.beta)

    logger.info(
        f"{case} at {params}: measured growth {measured:.4f}, predicted {predicted:.4f}"
    )
    if case is WitnessCase.CASE1:
        first, second = case1_mu_exponent_candidates(params.theta, params.beta)
        logger.info(
            f"{case} order candidates for |μ|: {first:.4f} and {second:.4f}, the "
            f"measured growth differs from the claimed {predicted:.4f} by "
            f"{measured - predicted:.4f}"
        )

    return WitnessReport(
        case, params, normalization, tuple(points), measured, predicted
    )
