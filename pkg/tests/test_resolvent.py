from logging import WARNING
from math import sqrt
import numpy as np
import pytest

from plate_regularity.mode_block import (
    ModeBlock,
    StateVec,
    build_mode_block,
    weighted_norm,
)
from plate_regularity.params import SystemParams
from plate_regularity.regularity import fit_loglog_slope
from plate_regularity.resolvent import (
    ModePolicy,
    SingularSystemError,
    TruncationError,
    block_norms,
    check_truncation,
    explicit_mu_nu,
    lambda_grid,
    resolvent_block_norm,
    resolvent_curve,
    resolvent_norm,
    resolvent_solve,
    resonant_sigmas,
)
from plate_regularity.spectrum import (
    spectrum_dirichlet_1d,
    spectrum_from_list,
    spectrum_geometric,
)
from plate_regularity.witness import UNIT_FORCE, q_roots
from tests.utils import unit_params


def random_damped_params(rng: np.random.Generator) -> SystemParams:
    return SystemParams(
        theta=rng.uniform(0, 1),
        beta=rng.uniform(0.05, 1),
        alpha=rng.uniform(0.5, 2),
        gamma=rng.uniform(0.5, 2),
        delta=rng.uniform(0.5, 2),
        kappa=rng.uniform(0.5, 2),
    )


def test_stationary_solve() -> None:
    block = build_mode_block(unit_params(1, 1), 1)

    solution = resolvent_solve(block, 0, UNIT_FORCE)

    np.testing.assert_allclose(solution.as_array(), [-2, 0, 0, 0], atol=1e-14)


def test_zero_force() -> None:
    block = build_mode_block(unit_params(0.5, 0.5), 9)

    assert resolvent_solve(block, 3.5, StateVec.zero()).as_array().tolist() == [0] * 4


def test_solve_matches_closed_form() -> None:
    rng = np.random.default_rng(2)

    for _ in range(1000):
        params = random_damped_params(rng)
        sigma = 10 ** rng.uniform(0, 4)
        lambda_ = 10 ** rng.uniform(-1, 3) * rng.choice([-1, 1])
        block = build_mode_block(params, sigma)

        solution = resolvent_solve(block, lambda_, UNIT_FORCE)
        mu, nu = explicit_mu_nu(params, sigma, lambda_)
        expected = StateVec(mu, nu, 1j * lambda_ * mu, 1j * lambda_ * nu)

        x = block.to_energy(solution)
        difference = x - block.to_energy(expected)
        assert np.linalg.norm(difference) <= 1e-9 * np.linalg.norm(x)

        rhs = block.to_energy(UNIT_FORCE)
        residual = (1j * lambda_ * np.eye(4) - block.balanced) @ x - rhs
        assert np.linalg.norm(residual) <= 1e-10 * (
            np.linalg.norm(rhs) + abs(lambda_) * np.linalg.norm(x)
        )


def test_closed_form_at_plate_resonance() -> None:
    lambda_ = sqrt(16 / 5)

    mu, nu = explicit_mu_nu(unit_params(1, 1), 4, lambda_)

    assert mu.real == pytest.approx(0.078125, rel=1e-9)
    assert mu.imag == pytest.approx(5 * 4 * lambda_ / 51.2, rel=1e-9)
    assert abs(mu) == pytest.approx(0.703125, rel=1e-9)


def test_closed_form_without_coupling() -> None:
    _, nu = explicit_mu_nu(SystemParams.uncoupled(0.5, 0.5), 4, 1.5)

    assert nu == 0


def test_conservative_resonance_is_singular() -> None:
    params = SystemParams(1, 1, delta=0)
    block = build_mode_block(params, 4)
    smaller, larger = q_roots(params, 4)

    for root in (smaller, larger):
        lambda_ = sqrt(root)
        with pytest.raises(SingularSystemError) as error:
            resolvent_solve(block, lambda_, UNIT_FORCE)
        assert error.value.eigenvalue == complex(0, lambda_)

        with pytest.raises(SingularSystemError):
            explicit_mu_nu(params, 4, lambda_)
        with pytest.raises(ArithmeticError):
            resolvent_block_norm(block, lambda_)


def test_singular_unbalanced_block() -> None:
    matrix = np.zeros((4, 4))
    matrix[0, 1], matrix[1, 0] = 2, -2
    block = ModeBlock.from_matrix(1, matrix, np.ones(4))

    with pytest.raises(SingularSystemError):
        resolvent_block_norm(block, 2)


def test_identity_block_norm() -> None:
    block = ModeBlock.from_matrix(1, np.zeros((4, 4)), np.ones(4))

    assert resolvent_block_norm(block, 1) == pytest.approx(1, rel=1e-15)


def test_block_norm_is_even() -> None:
    rng = np.random.default_rng(5)

    for _ in range(100):
        block = build_mode_block(random_damped_params(rng), 10 ** rng.uniform(0, 4))
        lambda_ = 10 ** rng.uniform(-1, 3)

        assert resolvent_block_norm(block, lambda_) == pytest.approx(
            resolvent_block_norm(block, -lambda_), rel=1e-12
        )


def test_block_norm_dominates_solution() -> None:
    rng = np.random.default_rng(6)

    for _ in range(100):
        block = build_mode_block(random_damped_params(rng), 10 ** rng.uniform(0, 4))
        lambda_ = 10 ** rng.uniform(-1, 3)

        ratio = weighted_norm(
            resolvent_solve(block, lambda_, UNIT_FORCE), block
        ) / weighted_norm(UNIT_FORCE, block)
        assert ratio <= resolvent_block_norm(block, lambda_) * (1 + 1e-12)


def test_block_norms_match_single_blocks() -> None:
    params = unit_params(0.3, 0.7)
    sigmas = [1, 4, 100, 1e5]

    np.testing.assert_allclose(
        block_norms(params, sigmas, 12),
        [resolvent_block_norm(build_mode_block(params, s), 12) for s in sigmas],
        rtol=1e-12,
    )


def test_stationary_bound_is_uniform() -> None:
    rng = np.random.default_rng(4)
    sigmas = spectrum_geometric(1, 1e8, 200).as_array()

    for _ in range(5):
        norms = block_norms(random_damped_params(rng), sigmas, 0)
        assert np.all(np.isfinite(norms))
        assert norms.max() <= 2 * norms[sigmas <= 1e2].max()


def test_single_mode_norm() -> None:
    params = unit_params(0.5, 1)
    sample = resolvent_norm(params, 7, spectrum_from_list([25]))

    assert sample.norm == pytest.approx(
        resolvent_block_norm(build_mode_block(params, 25), 7), rel=1e-12
    )
    assert sample.argmax_mode == 0
    assert sample.argmax_sigma == 25
    assert not sample.at_boundary


def test_more_modes_never_decrease_norm() -> None:
    params = unit_params(0.25, 0.5)
    spectrum = spectrum_dirichlet_1d(np.pi, 60)

    norms = [resolvent_norm(params, 40, spectrum.head(n)).norm for n in range(1, 61, 5)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(norms, norms[1:]))


def test_argmax_matches_scan() -> None:
    params = unit_params(1, 1)
    spectrum = spectrum_dirichlet_1d(np.pi, 40)
    # plate resonance of the 10th mode, σ = 100
    lambda_ = sqrt(100**2 / 101)

    sample = resolvent_norm(params, lambda_, spectrum)
    scan = [
        resolvent_block_norm(build_mode_block(params, s), lambda_) for s in spectrum
    ]

    assert sample.argmax_mode == int(np.argmax(scan))
    assert 0 < sample.argmax_mode < len(spectrum) - 1
    assert sample.norm == pytest.approx(max(scan), rel=1e-12)


def test_boundary_supremum_is_flagged(caplog: pytest.LogCaptureFixture) -> None:
    params = unit_params(0.5, 1)
    spectrum = spectrum_from_list([1, 4, 9])

    with caplog.at_level(WARNING, logger="plate_regularity.resolvent"):
        sample = resolvent_norm(params, 50, spectrum)

    assert sample.argmax_mode == 2
    assert sample.at_boundary
    assert "largest eigenvalue" in caplog.text


def test_resonant_sigmas() -> None:
    params = unit_params(0.25, 1)
    lambda_ = sqrt(100**2 / 101)

    resonant = resonant_sigmas(params, lambda_, 1, 1e4)

    assert any(abs(s - 100) <= 1e-9 * 100 for s in resonant)
    assert resonant == sorted(resonant)
    assert resonant_sigmas(params, lambda_, 10, 10) == []


def test_resonance_search_finds_peak_between_modes() -> None:
    params = unit_params(0.25, 1)
    spectrum = spectrum_from_list([1, 1e4])
    lambda_ = sqrt(100**2 / 101)

    discrete = resolvent_norm(params, lambda_, spectrum)
    searched = resolvent_norm(params, lambda_, spectrum, resonance_search=True)

    assert searched.norm > discrete.norm
    assert searched.argmax_mode is None
    assert 1 < searched.argmax_sigma < 1e4
    assert searched.norm == pytest.approx(
        block_norms(params, [searched.argmax_sigma], lambda_)[0], rel=1e-12
    )


@pytest.mark.parametrize(
    "lambda_min, lambda_max, points, spacing, expected",
    [
        (1, 100, 3, "log", [1, 10, 100]),
        (0, 10, 3, "linear", [0, 5, 10]),
        (-4, 4, 5, "linear", [-4, -2, 0, 2, 4]),
        (7, 7, 1, "log", [7]),
    ],
)
def test_lambda_grid(
    lambda_min: float, lambda_max: float, points: int, spacing: str, expected: list
) -> None:
    grid = lambda_grid(
        lambda_min, lambda_max, points, spacing  # type: ignore[arg-type]
    )

    np.testing.assert_allclose(grid, expected, rtol=1e-14)


@pytest.mark.parametrize(
    "lambda_min, lambda_max, points, spacing",
    [
        (1, 100, 0, "log"),
        (0, 100, 3, "log"),
        (10, 1, 3, "log"),
        (1, 2, 1, "log"),
        (1, 2, 3, "cubic"),
        (1, float("inf"), 3, "linear"),
    ],
)
def test_lambda_grid_rejects(
    lambda_min: float, lambda_max: float, points: int, spacing: str
) -> None:
    with pytest.raises(ValueError):
        lambda_grid(lambda_min, lambda_max, points, spacing)  # type: ignore[arg-type]


def test_truncation_rule() -> None:
    params = unit_params(0.5, 1)

    short = check_truncation(params, spectrum_geometric(1, 1e6, 50), 1e4)
    assert short.required_sigma == pytest.approx(1e9)
    assert not short.adequate
    assert "below" in short.describe()

    long = check_truncation(params, spectrum_geometric(1, 1e10, 100), 1e4)
    assert long.tail_monotone
    assert long.adequate
    assert long.describe() == "adequate"


def test_invalid_truncation_mode() -> None:
    with pytest.raises(ValueError):
        ModePolicy(
            spectrum_from_list([1]), truncation="ignore"  # type: ignore[arg-type]
        )


def test_strict_truncation_raises() -> None:
    policy = ModePolicy(spectrum_dirichlet_1d(np.pi, 10), truncation="strict")

    with pytest.raises(TruncationError):
        resolvent_curve(unit_params(0.5, 1), [10, 100], policy)


def test_lenient_truncation_warns(caplog: pytest.LogCaptureFixture) -> None:
    with caplog.at_level(WARNING, logger="plate_regularity.resolvent"):
        curve = resolvent_curve(
            unit_params(0.5, 1), [10, 100], spectrum_dirichlet_1d(np.pi, 10)
        )

    assert curve.truncation_suspect
    assert "Mode truncation" in caplog.text


@pytest.mark.parametrize("grid", [[], [1, 1], [3, 2]])
def test_curve_rejects_grid(grid: list) -> None:
    with pytest.raises(ValueError):
        resolvent_curve(unit_params(1, 1), grid, spectrum_dirichlet_1d(np.pi, 10))


def test_single_point_curve() -> None:
    params = unit_params(1, 1)
    spectrum = spectrum_dirichlet_1d(np.pi, 100)

    curve = resolvent_curve(params, [5], spectrum)

    assert curve.samples == (resolvent_norm(params, 5, spectrum),)


def test_curve_is_even() -> None:
    params = unit_params(0.3, 0.6)
    spectrum = spectrum_geometric(1, 1e6, 80)
    grid = lambda_grid(1, 100, 12)

    positive = resolvent_curve(params, grid, spectrum)
    negative = resolvent_curve(params, -grid[::-1], spectrum)

    np.testing.assert_allclose(negative.norms[::-1], positive.norms, rtol=1e-12)


def test_curve_is_deterministic_under_workers() -> None:
    params = unit_params(0.5, 0.5)
    policy = ModePolicy(spectrum_geometric(1, 1e8, 200), resonance_search=True)
    grid = lambda_grid(1, 1e3, 16)

    serial = resolvent_curve(params, grid, policy)
    parallel = resolvent_curve(params, grid, policy, workers=4)

    assert serial.samples == parallel.samples


def test_analytic_resolvent_decays_like_inverse_frequency() -> None:
    params = unit_params(0.5, 1)
    policy = ModePolicy(
        spectrum_geometric(1, 1e17, 500), resonance_search=True, truncation="strict"
    )
    grid = lambda_grid(1e3, 1e7, 64)

    curve = resolvent_curve(params, grid, policy)

    assert not curve.truncation_suspect
    assert fit_loglog_slope(curve.lambdas, curve.norms) <= -0.9

    scaled = (curve.lambdas * curve.norms)[curve.lambdas >= 1e6]
    assert scaled.max() < 2 * scaled.min()
