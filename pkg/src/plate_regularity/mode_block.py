from cmath import isfinite as is_finite_complex
from dataclasses import dataclass
from logging import getLogger
from math import fsum, isfinite
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from plate_regularity.matrix_exp import propagate
from plate_regularity.params import SystemParams
from plate_regularity.spectrum import ModeSpectrum


EIGEN_RESIDUAL_TOLERANCE = 1e-10
POLISH_STEPS = 50


logger = getLogger("plate_regularity.mode_block")


@dataclass(frozen=True)
class StateVec:
    u: complex
    v: complex
    w: complex
    z: complex

    def __post_init__(self) -> None:
        for name in ("u", "v", "w", "z"):
            value = complex(getattr(self, name))
            if not is_finite_complex(value):
                raise ValueError(f"State component {name} is not finite: {value}")
            object.__setattr__(self, name, value)

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w, self.z], dtype=complex)

    @classmethod
    def from_array(cls, values: Iterable[complex]) -> "StateVec":
        u, v, w, z = (complex(x) for x in values)
        return cls(u, v, w, z)

    @classmethod
    def zero(cls) -> "StateVec":
        return cls(0, 0, 0, 0)


def _readonly(values: np.ndarray) -> np.ndarray:
    copy = np.array(values, dtype=float)
    copy.setflags(write=False)
    return copy


@dataclass(frozen=True, eq=False)
class ModeBlock:
    sigma: float
    matrix: np.ndarray
    weights: np.ndarray
    balanced: np.ndarray
    params: Optional[SystemParams] = None

    def __post_init__(self) -> None:
        if not isfinite(self.sigma) or self.sigma <= 0:
            raise ValueError(f"The eigenvalue must be positive, got {self.sigma}")

        shapes = (("matrix", (4, 4)), ("weights", (4,)), ("balanced", (4, 4)))
        for name, shape in shapes:
            values = _readonly(getattr(self, name))
            if values.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {values.shape}")
            if not np.all(np.isfinite(values)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, values)

        if np.any(self.weights <= 0):
            raise ValueError(f"Weights must be positive, got {self.weights}")

    @classmethod
    def from_matrix(
        cls, sigma: float, matrix: np.ndarray, weights: np.ndarray
    ) -> "ModeBlock":
        scales = np.sqrt(np.asarray(weights, dtype=float))
        matrix = np.asarray(matrix, dtype=float)
        return cls(sigma, matrix, weights, scales[:, None] * matrix / scales[None, :])

    @property
    def scales(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def to_energy(self, state: StateVec) -> np.ndarray:
        return self.scales * state.as_array()

    def from_energy(self, values: np.ndarray) -> StateVec:
        return StateVec.from_array(np.asarray(values) / self.scales)


def generator_stack(
    params: SystemParams, sigmas: Union[Sequence[float], np.ndarray]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The blocks of all given eigenvalues at once.

    Returns the generators B with shape (n, 4, 4), the weights with shape (n, 4) and
    the energy coordinate generators K with shape (n, 4, 4).
    """
    s = np.asarray(sigmas, dtype=float).reshape(-1)
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        raise ValueError("Eigenvalues must be positive and finite")

    alpha, gamma = params.alpha, params.gamma
    inertia = 1.0 + params.kappa * s**params.beta
    damping = params.delta * s**params.theta

    matrices = np.zeros((len(s), 4, 4))
    matrices[:, 0, 2] = 1.0
    matrices[:, 1, 3] = 1.0
    matrices[:, 2, 0] = -alpha * s**2 / inertia
    matrices[:, 2, 3] = -gamma * s / inertia
    matrices[:, 3, 1] = -alpha * s
    matrices[:, 3, 2] = gamma * s
    matrices[:, 3, 3] = -damping

    weights = np.stack([alpha * s**2, alpha * s, inertia, np.ones_like(s)], axis=1)

    root_inertia = np.sqrt(inertia)
    plate = s * np.sqrt(alpha) / root_inertia
    network = np.sqrt(alpha * s)
    coupling = gamma * s / root_inertia

    balanced = np.zeros((len(s), 4, 4))
    balanced[:, 0, 2] = plate
    balanced[:, 2, 0] = -plate
    balanced[:, 1, 3] = network
    balanced[:, 3, 1] = -network
    balanced[:, 2, 3] = -coupling
    balanced[:, 3, 2] = coupling
    balanced[:, 3, 3] = -damping

    return matrices, weights, balanced


def build_mode_block(params: SystemParams, sigma: float) -> ModeBlock:
    if not isfinite(sigma) or sigma <= 0:
        raise ValueError(f"The eigenvalue must be positive, got {sigma}")

    matrices, weights, balanced = generator_stack(params, [sigma])
    return ModeBlock(float(sigma), matrices[0], weights[0], balanced[0], params)


def energy(state: StateVec, block: ModeBlock) -> float:
    return float(np.dot(block.weights, np.abs(state.as_array()) ** 2))


def weighted_norm(state: StateVec, block: ModeBlock) -> float:
    return float(np.sqrt(energy(state, block)))


def _real_product(a: complex, b: complex) -> float:
    return a.real * b.real + a.imag * b.imag


def dissipativity_defect(
    state: StateVec, block: ModeBlock, params: SystemParams
) -> float:
    """Re⟨BU, U⟩_W + δσ^θ|z|², zero up to rounding for every state.

    The weighted product ⟨BU, U⟩_W equals xᴴKx with x = D·U. The terms are summed
    exactly, so the conservative part cancels without rounding error.
    """
    x = [complex(c) for c in block.to_energy(state)]
    k = block.balanced

    terms = [
        float(k[i, j]) * _real_product(x[j], x[i])
        for i in range(4)
        for j in range(4)
        if k[i, j] != 0
    ]
    damping = params.delta * block.sigma**params.theta
    terms.append(damping * _real_product(state.z, state.z))
    return fsum(terms)


def characteristic_polynomial(
    params: SystemParams,
    sigmas: Union[Sequence[float], np.ndarray],
    mu: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """det(μ - B) of the blocks in factored form, its derivative in μ and the sum
    of the magnitudes of its terms.

    `mu` has one row per eigenvalue in `sigmas`.
    """
    s = np.asarray(sigmas, dtype=float).reshape(-1, 1)
    mu = np.asarray(mu, dtype=complex)

    inertia = 1.0 + params.kappa * s**params.beta
    plate = params.alpha * s**2 / inertia
    network = params.alpha * s
    coupling = params.gamma**2 * s**2 / inertia
    damping = params.delta * s**params.theta

    first = mu**2 + plate
    second = mu**2 + damping * mu + network
    value = first * second + coupling * mu**2
    slope = 2 * mu * second + first * (2 * mu + damping) + 2 * coupling * mu

    size = np.abs(mu)
    scale = (size**2 + plate) * (size**2 + damping * size + network)
    return value, slope, scale + coupling * size**2


def _polish_eigenvalues(
    params: SystemParams, sigmas: np.ndarray, values: np.ndarray
) -> np.ndarray:
    # dense eigenvalues carry errors of eps·‖K‖; Newton steps on the factored
    # determinant, each within half the distance to the nearest other start
    start = np.array(values, dtype=complex).reshape(-1, 4)
    gaps = np.abs(start[:, :, None] - start[:, None, :])
    gaps[:, np.arange(4), np.arange(4)] = np.inf
    reach = 0.5 * gaps.min(axis=2)

    mu = start.copy()
    value, slope, _ = characteristic_polynomial(params, sigmas, mu)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(POLISH_STEPS):
            candidate = mu - value / slope
            new_value, new_slope, _ = characteristic_polynomial(
                params, sigmas, candidate
            )
            accept = (
                np.isfinite(candidate)
                & (np.abs(new_value) < np.abs(value))
                & (np.abs(candidate - start) <= reach)
            )
            if not np.any(accept):
                break
            mu = np.where(accept, candidate, mu)
            value = np.where(accept, new_value, value)
            slope = np.where(accept, new_slope, slope)

    _, _, scale = characteristic_polynomial(params, sigmas, mu)
    failed = np.any(np.abs(value) > EIGEN_RESIDUAL_TOLERANCE * scale, axis=1)
    if np.any(failed):
        row = int(np.argmax(failed))
        sigma = float(np.asarray(sigmas, dtype=float).reshape(-1)[row])
        raise np.linalg.LinAlgError(
            f"Eigenvalues of the σ={sigma:g} block did not converge "
            f"(residuals {np.abs(value[row])})"
        )
    return mu


def block_spectrum(block: ModeBlock) -> Tuple[complex, ...]:
    """The four eigenvalues of the block, sorted by real part, then imaginary part"""
    k = block.balanced
    values, vectors = np.linalg.eig(k)

    if block.params is not None:
        values = _polish_eigenvalues(block.params, np.array([block.sigma]), values)[0]
    else:
        scale = float(np.linalg.norm(k, 2))
        residuals = np.linalg.norm(k @ vectors - vectors * values, axis=0)
        limit = EIGEN_RESIDUAL_TOLERANCE * scale * np.linalg.norm(vectors, axis=0)
        if np.any(residuals > limit):
            raise np.linalg.LinAlgError(
                f"Eigenvalues of the σ={block.sigma:g} block did not converge "
                f"(residuals {residuals})"
            )

    return tuple(sorted((complex(v) for v in values), key=lambda v: (v.real, v.imag)))


def spectral_abscissa(params: SystemParams, spectrum: ModeSpectrum) -> float:
    sigmas = spectrum.as_array()
    _, _, balanced = generator_stack(params, sigmas)
    values = _polish_eigenvalues(params, sigmas, np.linalg.eigvals(balanced))
    abscissa = float(np.max(values.real))
    logger.debug(
        f"Spectral abscissa over {len(spectrum)} modes at {params}: "
        f"{abscissa:.6g}"
    )
    return abscissa


def evolve_mode(block: ModeBlock, state0: StateVec, t: float) -> StateVec:
    if not isfinite(t) or t < 0:
        raise ValueError(f"Time must be non-negative and finite, got {t}")
    if t == 0:
        return state0

    x = propagate(block.balanced, t, block.to_energy(state0))
    return block.from_energy(x)


def conservative_polynomial(
    params: SystemParams, sigmas: Union[Sequence[float], np.ndarray]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients (a, b, c) of q(s) = a·s² + b·s + c.

    For δ = 0 the roots s of q are the squared frequencies λ² of the imaginary
    eigenvalues ±iλ of the block.
    """
    s = np.asarray(sigmas, dtype=float)
    inertia = 1.0 + params.kappa * s**params.beta
    a = inertia
    b = -(
        params.alpha * (s + params.kappa * s ** (1 + params.beta))
        + (params.alpha + params.gamma**2) * s**2
    )
    c = params.alpha**2 * s**3
    return a, b, c
