from dataclasses import dataclass
from enum import Enum
from logging import getLogger
from math import isfinite, nan
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from plate_regularity.mode_block import spectral_abscissa
from plate_regularity.params import SystemParams
from plate_regularity.resolvent import (
    ModePolicy,
    ResolventCurve,
    Spacing,
    lambda_grid,
    resolvent_curve,
)
from plate_regularity.utils import parallel_map


EPSILON_ANALYTIC = 0.1
EPSILON_GEVREY = 0.05
BOUNDED_SLOPE = 0.05
DEFAULT_FIT_WINDOW = 0.4
DEFAULT_LAMBDA_POINTS = 64
MIN_FIT_POINTS = 8
REGION_TOLERANCE = 1e-12


class Verdict(Enum):
    ANALYTIC = "Analytic"
    GEVREY_ONLY = "GevreyOnly"
    STABLE_NOT_ANALYTIC = "StableNotAnalytic"
    UNSTABLE = "Unstable"
    UNKNOWN = "Unknown"

    def __str__(self) -> str:
        return self.value


class RegionMembership(NamedTuple):
    in_RL: bool
    in_RG1: bool
    in_RG2: bool
    in_RE: bool


@dataclass(frozen=True)
class RegionReport:
    theta: float
    beta: float
    in_RL: bool
    in_RG1: bool
    in_RG2: bool
    in_RE: bool
    predicted_phi: Optional[float]
    measured_slope: float
    spectral_abscissa: float
    verdict: Verdict
    provisional_verdict: Verdict
    """The verdict before a suspect truncation turned it into `Verdict.UNKNOWN`"""
    truncation_suspect: bool = False
    error: Optional[str] = None


def fit_loglog_slope(
    xs: Sequence[float], ys: Sequence[float], window: float = DEFAULT_FIT_WINDOW
) -> float:
    """Least squares slope of log y over log x, using the points in the top `window`
    fraction of the logarithmic x-range only.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)

    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"Cannot fit {x.shape} values against {y.shape} values")
    if not 0 < window <= 1:
        raise ValueError(f"The fit window must lie in (0,1], got {window}")
    if len(x) == 0 or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("Fits need finite values")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("Log-log fits need positive values")

    log_x, log_y = np.log(x), np.log(y)
    top = log_x.max()
    cutoff = top - window * (top - log_x.min())
    inside = log_x >= cutoff - REGION_TOLERANCE * (abs(cutoff) + 1)

    if np.count_nonzero(inside) < 3:
        raise ValueError(
            f"Too few points for a fit, {np.count_nonzero(inside)} of {len(x)} lie in "
            f"the top {window:g} of the range"
        )

    slope, _ = np.polyfit(log_x[inside], log_y[inside], 1)
    return float(slope)


def region_membership(theta: float, beta: float) -> RegionMembership:
    if not (isfinite(theta) and 0 <= theta <= 1):
        raise ValueError(f"theta must lie in [0,1], got {theta}")
    if not (isfinite(beta) and 0 < beta <= 1):
        raise ValueError(f"beta must lie in (0,1], got {beta}")

    gevrey_domain = 0 < theta <= 1 and 0 < beta < 1
    return RegionMembership(
        in_RL=not (theta == 0.5 and beta == 1),
        in_RG1=gevrey_domain and theta + 2 * beta >= 2 - REGION_TOLERANCE,
        in_RG2=gevrey_domain and 3 * theta / 4 + beta / 2 <= 1 + REGION_TOLERANCE,
        in_RE=True,
    )


def predicted_gevrey_exponent(theta: float, beta: float) -> Optional[float]:
    """The exponent φ with sup λ^φ‖(iλ - B)⁻¹‖ < ∞, the semigroup is then of Gevrey
    class s for every s > 1/φ. `None` outside of both Gevrey regions.
    """
    if not (0 < theta <= 1 and 0 < beta < 1):
        raise ValueError(
            f"Gevrey exponents need 0 < theta <= 1 and 0 < beta < 1, got "
            f"theta={theta}, beta={beta}"
        )

    membership = region_membership(theta, beta)
    exponents = []
    if membership.in_RG1:
        exponents.append(2 * max((1 - beta) / (3 - beta), theta / (2 + theta - beta)))
    if membership.in_RG2:
        exponents.append(theta / (2 * (2 + theta - beta)))

    return max(exponents) if len(exponents) > 0 else None


def predicted_phi(theta: float, beta: float) -> Optional[float]:
    """The predicted Gevrey exponent, `None` off the Gevrey domain as well"""
    if 0 < theta <= 1 and 0 < beta < 1:
        return predicted_gevrey_exponent(theta, beta)
    return None


def decide_verdict(
    slope: float, phi: Optional[float], abscissa: float, bounded: bool
) -> Verdict:
    if slope <= -1 + EPSILON_ANALYTIC:
        return Verdict.ANALYTIC
    if phi is not None and slope <= -phi + EPSILON_GEVREY:
        return Verdict.GEVREY_ONLY
    if abscissa < 0 and bounded:
        return Verdict.STABLE_NOT_ANALYTIC
    return Verdict.UNSTABLE


def gevrey_product(curve: ResolventCurve, phi: float) -> np.ndarray:
    """λ^φ·‖(iλ - B)⁻¹‖ along the curve, bounded if the semigroup is of Gevrey class
    s > 1/φ.
    """
    return np.abs(curve.lambdas) ** phi * curve.norms


def classify_curve(
    curve: ResolventCurve, fit_window: float = DEFAULT_FIT_WINDOW
) -> RegionReport:
    params = curve.params
    membership = region_membership(params.theta, params.beta)
    phi = predicted_phi(params.theta, params.beta)

    norms = curve.norms
    slope = fit_loglog_slope(np.abs(curve.lambdas), norms, fit_window)
    abscissa = spectral_abscissa(params, curve.mode_policy.spectrum)
    bounded = bool(np.all(np.isfinite(norms))) and slope <= BOUNDED_SLOPE

    provisional = decide_verdict(slope, phi, abscissa, bounded)
    verdict = Verdict.UNKNOWN if curve.truncation_suspect else provisional

    return RegionReport(
        params.theta,
        params.beta,
        *membership,
        predicted_phi=phi,
        measured_slope=slope,
        spectral_abscissa=abscissa,
        verdict=verdict,
        provisional_verdict=provisional,
        truncation_suspect=curve.truncation_suspect,
    )


def classify_point(
    params: SystemParams,
    lambda_range: Tuple[float, float],
    policy: ModePolicy,
    fit_window: float = DEFAULT_FIT_WINDOW,
    points: int = DEFAULT_LAMBDA_POINTS,
    spacing: Spacing = "log",
    workers: Optional[int] = 1,
) -> RegionReport:
    lambda_min, lambda_max = lambda_range
    if lambda_min < 1:
        raise ValueError(f"Classification needs lambda_min >= 1, got {lambda_min}")
    if points < MIN_FIT_POINTS:
        raise ValueError(f"Fits need at least {MIN_FIT_POINTS} frequencies")

    grid = lambda_grid(lambda_min, lambda_max, points, spacing)
    curve = resolvent_curve(params, grid, policy, workers)
    return classify_curve(curve, fit_window)


class RegionSweeper:
    params: SystemParams
    policy: ModePolicy
    lambda_range: Tuple[float, float]
    fit_window: float
    points: int
    spacing: Spacing
    workers: Optional[int]

    reports: List[RegionReport]
    error_count: int

    def __init__(
        self,
        params: SystemParams,
        policy: ModePolicy,
        lambda_range: Tuple[float, float],
        fit_window: float = DEFAULT_FIT_WINDOW,
        points: int = DEFAULT_LAMBDA_POINTS,
        spacing: Spacing = "log",
        workers: Optional[int] = 1,
    ) -> None:
        self.logger = getLogger("plate_regularity.regularity.RegionSweeper")

        self.params = params
        self.policy = policy
        self.lambda_range = lambda_range
        self.fit_window = fit_window
        self.points = points
        self.spacing = spacing
        self.workers = workers

        self.reset()

    def reset(self) -> None:
        self.reports = []
        self.error_count = 0

    def _failed_report(
        self, theta: float, beta: float, error: Exception
    ) -> RegionReport:
        return RegionReport(
            theta,
            beta,
            *region_membership(theta, beta),
            predicted_phi=predicted_phi(theta, beta),
            measured_slope=nan,
            spectral_abscissa=nan,
            verdict=Verdict.UNKNOWN,
            provisional_verdict=Verdict.UNKNOWN,
            error=f"{type(error).__name__}: {error}",
        )

    def _classify(self, point: Tuple[float, float]) -> RegionReport:
        theta, beta = point
        self.logger.debug(f"Classifying θ={theta:g}, β={beta:g}")

        try:
            return classify_point(
                self.params.with_exponents(theta, beta),
                self.lambda_range,
                self.policy,
                self.fit_window,
                self.points,
                self.spacing,
            )
        except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as e:
            self.logger.exception(f"Classification of θ={theta:g}, β={beta:g} failed")
            return self._failed_report(theta, beta, e)

    def collect(self, points: Sequence[Tuple[float, float]]) -> List[RegionReport]:
        for theta, beta in points:
            region_membership(theta, beta)

        self.reset()
        self.reports = parallel_map(self._classify, list(points), self.workers)
        self.error_count = sum(1 for r in self.reports if r.error is not None)

        self.logger.info(
            f"Classified {len(self.reports)} points, {self.error_count} failed"
        )
        return self.reports


def region_sweep(
    params: SystemParams,
    points: Sequence[Tuple[float, float]],
    policy: ModePolicy,
    lambda_range: Tuple[float, float],
    fit_window: float = DEFAULT_FIT_WINDOW,
    lambda_points: int = DEFAULT_LAMBDA_POINTS,
    spacing: Spacing = "log",
    workers: Optional[int] = 1,
) -> List[RegionReport]:
    """Classify every (θ, β) of `points`, the other coefficients are taken from
    `params`. A failing point is reported with `Verdict.UNKNOWN` and its error.
    """
    sweeper = RegionSweeper(
        params, policy, lambda_range, fit_window, lambda_points, spacing, workers
    )
    return sweeper.collect(points)


def exponent_grid(
    theta_range: Tuple[float, float, int], beta_range: Tuple[float, float, int]
) -> List[Tuple[float, float]]:
    thetas = np.linspace(*theta_range)
    betas = np.linspace(*beta_range)
    return [(float(t), float(b)) for t in thetas for b in betas]
