from math import fsum
from typing import List
import numpy as np
import pytest

from plate_regularity.decay import energy_history, fit_decay_rate, random_states
from plate_regularity.mode_block import build_mode_block, energy
from plate_regularity.params import SystemParams
from plate_regularity.spectrum import spectrum_dirichlet_1d
from tests.utils import unit_params


def test_random_states() -> None:
    states = random_states(30, seed=4)

    assert len(states) == 30
    assert states == random_states(30, seed=4)
    assert states != random_states(30, seed=5)
    assert all(abs(c) <= 1 for s in states for c in s.as_array())


def test_random_states_rejects() -> None:
    with pytest.raises(ValueError):
        random_states(0)


def test_energy_decays() -> None:
    params = unit_params(0.5, 0.5)
    spectrum = spectrum_dirichlet_1d(np.pi, 50)
    states = random_states(50, seed=0)
    times = np.linspace(0, 50, 100)

    energies = energy_history(params, spectrum, states, times)

    initial = fsum(
        energy(state, build_mode_block(params, sigma))
        for state, sigma in zip(states, spectrum)
    )
    assert energies[0] == initial
    for previous, current in zip(energies, energies[1:]):
        assert current <= previous * (1 + 1e-10)
    assert energies[-1] < energies[0]
    assert fit_decay_rate(times, energies) < 0


def test_conservative_energy_is_constant() -> None:
    params = SystemParams(0.5, 0.5, delta=0)
    spectrum = spectrum_dirichlet_1d(np.pi, 10)

    energies = energy_history(params, spectrum, random_states(10), [0, 1, 10, 100])

    np.testing.assert_allclose(energies, energies[0], rtol=1e-9)


def test_energy_history_workers() -> None:
    params = unit_params(1, 0.5)
    spectrum = spectrum_dirichlet_1d(np.pi, 20)
    states = random_states(20, seed=1)
    times = np.linspace(0, 5, 11)

    np.testing.assert_array_equal(
        energy_history(params, spectrum, states, times),
        energy_history(params, spectrum, states, times, workers=3),
    )


@pytest.mark.parametrize(
    "count, times", [(3, [0, 1]), (5, [0, -1]), (5, [0, 2, 1]), (5, [-1, 0])]
)
def test_energy_history_rejects(count: int, times: List[float]) -> None:
    with pytest.raises(ValueError):
        energy_history(
            unit_params(1, 1),
            spectrum_dirichlet_1d(np.pi, 5),
            random_states(count),
            times,
        )


@pytest.mark.parametrize("rate", [-0.3, -2, 0])
def test_fit_decay_rate(rate: float) -> None:
    times = np.linspace(0, 10, 41)

    assert fit_decay_rate(times, 3 * np.exp(rate * times)) == pytest.approx(
        rate, abs=1e-10
    )


@pytest.mark.parametrize(
    "times, energies, window",
    [
        ([0, 1, 2], [1, 0, 1], 1),
        ([0, 1, 2], [1, 1], 1),
        ([], [], 1),
        ([0, 1, 2, 3], [4, 3, 2, 1], 0.1),
        ([0, 1, 2], [3, 2, 1], 0),
    ],
)
def test_fit_decay_rate_rejects(
    times: List[float], energies: List[float], window: float
) -> None:
    with pytest.raises(ValueError):
        fit_decay_rate(times, energies, window)
