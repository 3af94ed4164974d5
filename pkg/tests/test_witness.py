from logging import INFO
from math import isfinite, sqrt
from typing import Union
import numpy as np
import pytest

from plate_regularity.mode_block import block_spectrum, build_mode_block
from plate_regularity.params import SystemParams
from plate_regularity.resolvent import explicit_mu_nu, resolvent_block_norm
from plate_regularity.spectrum import (
    ModeSpectrum,
    spectrum_dirichlet_1d,
    spectrum_geometric,
)
from plate_regularity.witness import (
    WITNESS_RESIDUAL_TOLERANCE,
    Normalization,
    WitnessCase,
    WitnessPoint,
    case1_mu_exponent_candidates,
    choose_lambda,
    predicted_witness_exponent,
    q_poly_coeffs,
    q_roots,
    witness_growth_fit,
    witness_point,
    witness_report,
    witness_sequence,
)
from tests.utils import unit_params


@pytest.fixture(scope="module")
def witness_spectrum() -> ModeSpectrum:
    return spectrum_geometric(1e2, 1e8, 100)


def test_q_poly_coeffs() -> None:
    assert q_poly_coeffs(unit_params(1, 1), 4) == (5, -52, 64)


@pytest.mark.parametrize("sigma", [0, -2, float("nan")])
def test_q_poly_coeffs_rejects(sigma: float) -> None:
    with pytest.raises(ValueError):
        q_poly_coeffs(unit_params(1, 1), sigma)


def test_q_roots() -> None:
    smaller, larger = q_roots(unit_params(1, 1), 4)

    assert smaller == pytest.approx((52 - sqrt(1424)) / 10, rel=1e-13)
    assert larger == pytest.approx((52 + sqrt(1424)) / 10, rel=1e-13)


def test_q_roots_real_and_ordered() -> None:
    rng = np.random.default_rng(8)

    for _ in range(500):
        params = SystemParams(
            theta=rng.uniform(0, 1),
            beta=rng.uniform(0.01, 1),
            alpha=rng.uniform(0.1, 10),
            gamma=rng.uniform(0.1, 10),
            kappa=rng.uniform(0.1, 10),
        )
        sigma = 10 ** rng.uniform(0, 8)
        a, b, c = q_poly_coeffs(params, sigma)
        assert b * b - 4 * a * c >= 0

        smaller, larger = q_roots(params, sigma)
        assert 0 < smaller <= larger


@pytest.mark.parametrize(
    "value, expected",
    [
        (1, WitnessCase.CASE1),
        ("2", WitnessCase.CASE2),
        ("case3", WitnessCase.CASE3),
        (" Case4 ", WitnessCase.CASE4),
    ],
)
def test_parse_case(value: Union[int, str], expected: WitnessCase) -> None:
    assert WitnessCase.parse(value) is expected


@pytest.mark.parametrize("value", [0, 5, "five", "case"])
def test_parse_case_rejects(value: Union[int, str]) -> None:
    with pytest.raises(ValueError):
        WitnessCase.parse(value)


@pytest.mark.parametrize(
    "case, theta, beta, applies",
    [
        (WitnessCase.CASE1, 0.5, 1, True),
        (WitnessCase.CASE1, 0.5, 0.5, True),
        (WitnessCase.CASE1, 1, 1, False),
        (WitnessCase.CASE2, 0.25, 1, True),
        (WitnessCase.CASE2, 0, 1, True),
        (WitnessCase.CASE2, 0.5, 1, False),
        (WitnessCase.CASE2, 0.25, 0.9, False),
        (WitnessCase.CASE3, 0.75, 1, True),
        (WitnessCase.CASE3, 0.5, 1, False),
        (WitnessCase.CASE4, 0.9, 0.5, True),
        (WitnessCase.CASE4, 1, 0.8, True),
        (WitnessCase.CASE4, 1, 1, False),
        (WitnessCase.CASE4, 0.5, 0.5, False),
    ],
)
def test_applies(case: WitnessCase, theta: float, beta: float, applies: bool) -> None:
    assert case.applies(theta, beta) is applies


def test_choose_lambda() -> None:
    params = unit_params(0.5, 1)

    assert choose_lambda(WitnessCase.CASE1, params, 4) == pytest.approx(
        sqrt((52 - sqrt(1424)) / 10), rel=1e-13
    )
    assert choose_lambda(WitnessCase.CASE1, params, 4) == pytest.approx(
        1.19433, abs=1e-5
    )
    assert choose_lambda(WitnessCase.CASE3, unit_params(1, 1), 4) == pytest.approx(
        sqrt(16 / 5), rel=1e-15
    )


def test_choose_lambda_rejects_inapplicable_case() -> None:
    with pytest.raises(ValueError):
        choose_lambda(WitnessCase.CASE3, unit_params(0.25, 1), 4)


@pytest.mark.parametrize("case", [WitnessCase.CASE1, WitnessCase.CASE2])
def test_choose_lambda_ignores_damping(case: WitnessCase) -> None:
    lambdas = [choose_lambda(case, unit_params(0.25, 1, delta=d), 9) for d in (0, 1, 7)]

    assert lambdas[0] == lambdas[1] == lambdas[2]


def test_smaller_root_case_below_larger_root_case() -> None:
    params = unit_params(0.25, 1)

    for sigma in [1, 4, 100, 1e6]:
        assert choose_lambda(WitnessCase.CASE1, params, sigma) <= choose_lambda(
            WitnessCase.CASE2, params, sigma
        )


@pytest.mark.parametrize("case", [WitnessCase.CASE1, WitnessCase.CASE2])
def test_conservative_frequencies_are_eigenvalues(case: WitnessCase) -> None:
    params = SystemParams(0.25, 1, delta=0)

    for sigma in [1, 4, 100]:
        lambda_ = choose_lambda(case, params, sigma)
        frequencies = [v.imag for v in block_spectrum(build_mode_block(params, sigma))]
        assert min(abs(f - lambda_) for f in frequencies) <= 1e-9 * lambda_


def test_plate_resonance_witness_point() -> None:
    params = unit_params(1, 1)

    point = witness_point(WitnessCase.CASE3, params, 4)

    assert point.lambda_ == pytest.approx(sqrt(16 / 5))
    assert point.mu == pytest.approx(complex(0.078125, 5 * 4 * sqrt(16 / 5) / 51.2))
    assert (point.mu, point.nu) == explicit_mu_nu(params, 4, point.lambda_)
    assert point.residual <= WITNESS_RESIDUAL_TOLERANCE


def test_normalizations_give_equal_products() -> None:
    params = unit_params(0.75, 1)

    for sigma in [4, 100, 1e5]:
        ratio = witness_point(WitnessCase.CASE3, params, sigma)
        scaled = witness_point(
            WitnessCase.CASE3, params, sigma, Normalization.PAPER_DBETA
        )
        assert scaled.norm_f == pytest.approx(sqrt(sigma**-1 + 1))
        assert scaled.product == pytest.approx(ratio.product, rel=1e-12)


def test_witness_is_dominated_by_resolvent_norm() -> None:
    params = unit_params(0.25, 1)

    for sigma in [4, 100, 1e5]:
        point = witness_point(WitnessCase.CASE2, params, sigma)
        block = build_mode_block(params, sigma)
        assert point.norm_u / point.norm_f <= resolvent_block_norm(
            block, point.lambda_
        ) * (1 + 1e-12)


def test_products_positive_and_finite() -> None:
    points = witness_sequence(
        WitnessCase.CASE3, unit_params(0.75, 1), spectrum_dirichlet_1d(np.pi, 50)
    )

    assert len(points) == 50
    for point in points:
        assert point.product > 0
        assert isfinite(point.product)
        assert point.residual <= WITNESS_RESIDUAL_TOLERANCE


def test_sequence_rejects_inapplicable() -> None:
    spectrum = spectrum_dirichlet_1d(np.pi, 5)

    with pytest.raises(ValueError):
        witness_sequence(WitnessCase.CASE2, unit_params(0.75, 1), spectrum)
    with pytest.raises(ValueError):
        witness_sequence(WitnessCase.CASE1, unit_params(0.5, 0.5, delta=0), spectrum)


@pytest.mark.parametrize(
    "case, theta, beta, expected",
    [
        (WitnessCase.CASE1, 0.5, 0.5, 2),
        (WitnessCase.CASE2, 0.25, 1, 0.5),
        (WitnessCase.CASE3, 0.75, 1, 0.5),
        (WitnessCase.CASE4, 0.9, 0.5, 0.2),
    ],
)
def test_predicted_exponent(
    case: WitnessCase, theta: float, beta: float, expected: float
) -> None:
    assert predicted_witness_exponent(case, theta, beta) == pytest.approx(expected)


def test_case1_candidates() -> None:
    assert case1_mu_exponent_candidates(0.5, 0.5) == (0, -1)


def test_growth_fit_synthetic() -> None:
    points = [
        WitnessPoint(x, x, 0j, 0j, 1, 1, x**0.5, 0) for x in np.geomspace(1, 1e4, 20)
    ]

    assert witness_growth_fit(points) == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(ValueError):
        witness_growth_fit(points[:2])


@pytest.mark.parametrize(
    "case, theta, beta, minimum",
    [
        (WitnessCase.CASE2, 0.25, 1, 0.4),
        (WitnessCase.CASE3, 0.75, 1, 0.4),
        (WitnessCase.CASE4, 0.9, 0.5, 0.15),
    ],
)
def test_witness_growth(
    case: WitnessCase,
    theta: float,
    beta: float,
    minimum: float,
    witness_spectrum: ModeSpectrum,
) -> None:
    report = witness_report(case, unit_params(theta, beta), witness_spectrum)

    assert report.measured >= minimum
    assert len(report.points) == 100
    assert all(p.residual <= WITNESS_RESIDUAL_TOLERANCE for p in report.points)


def test_smaller_root_witness_reports_candidates(
    witness_spectrum: ModeSpectrum, caplog: pytest.LogCaptureFixture
) -> None:
    with caplog.at_level(INFO, logger="plate_regularity.witness"):
        report = witness_report(
            WitnessCase.CASE1, unit_params(0.5, 0.5), witness_spectrum
        )

    assert report.predicted == 2
    assert isfinite(report.measured)
    assert all(isfinite(p.product) and p.product > 0 for p in report.points)
    assert "order candidates" in caplog.text


def test_parallel_sequence_is_identical(witness_spectrum: ModeSpectrum) -> None:
    params = unit_params(0.9, 0.5)

    serial = witness_sequence(WitnessCase.CASE4, params, witness_spectrum)
    parallel = witness_sequence(WitnessCase.CASE4, params, witness_spectrum, workers=4)

    assert serial == parallel
