from logging import getLogger
from math import fsum, pi
from typing import List, Optional, Sequence

import numpy as np

from plate_regularity.mode_block import StateVec, build_mode_block, energy, evolve_mode
from plate_regularity.params import SystemParams
from plate_regularity.spectrum import ModeSpectrum
from plate_regularity.utils import parallel_map


DEFAULT_DECAY_WINDOW = 0.5


logger = getLogger("plate_regularity.decay")


def random_states(count: int, seed: int = 0) -> List[StateVec]:
    if count < 1:
        raise ValueError(f"Cannot create {count} states")

    rng = np.random.default_rng(seed)
    radius = np.sqrt(rng.uniform(0, 1, (count, 4)))
    angle = rng.uniform(0, 2 * pi, (count, 4))
    return [StateVec.from_array(row) for row in radius * np.exp(1j * angle)]


def energy_history(
    params: SystemParams,
    spectrum: ModeSpectrum,
    states: Sequence[StateVec],
    times: Sequence[float],
    workers: Optional[int] = 1,
) -> np.ndarray:
    """The total energy of the modes of `spectrum` started in `states` at each time"""
    if len(states) != len(spectrum):
        raise ValueError(
            f"Got {len(states)} initial states for a spectrum of {len(spectrum)} modes"
        )
    t = [float(x) for x in times]
    if any(x < 0 for x in t) or any(b < a for a, b in zip(t, t[1:])):
        raise ValueError("Times must be non-negative and non-decreasing")

    def mode_energies(index: int) -> List[float]:
        block = build_mode_block(params, spectrum[index])
        return [energy(evolve_mode(block, states[index], x), block) for x in t]

    per_mode = parallel_map(mode_energies, range(len(spectrum)), workers)
    history = np.array([fsum(values) for values in zip(*per_mode)])

    logger.debug(f"Energy {history[0]:.6g} decayed to {history[-1]:.6g}")
    return history


def fit_decay_rate(
    times: Sequence[float],
    energies: Sequence[float],
    window: float = DEFAULT_DECAY_WINDOW,
) -> float:
    """Slope of log energy over time on the last `window` fraction of the time range,
    twice the decay rate of the slowest mode for long times.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(energies, dtype=float)
    if t.shape != e.shape or len(t) == 0:
        raise ValueError("Times and energies must have the same nonzero length")
    if np.any(e <= 0):
        raise ValueError("Decay rates need positive energies")

    if not 0 < window <= 1:
        raise ValueError(f"The fit window must lie in (0,1], got {window}")

    inside = t >= t.max() - window * (t.max() - t.min())
    if np.count_nonzero(inside) < 3:
        raise ValueError("Too few samples in the fit window")

    slope, _ = np.polyfit(t[inside], np.log(e[inside]), 1)
    return float(slope)
