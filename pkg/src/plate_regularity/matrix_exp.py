from logging import getLogger
from math import ceil, exp, factorial, log2

import numpy as np


EIGEN_CONDITION_LIMIT = 1e8
SERIES_TOLERANCE = 1e-12
MAX_SERIES_ORDER = 40
SCALED_NORM = 0.5


logger = getLogger("plate_regularity.matrix_exp")


def series_order(norm: float, tolerance: float = SERIES_TOLERANCE) -> int:
    for order in range(1, MAX_SERIES_ORDER + 1):
        remainder = (
            norm ** (order + 1)
            / factorial(order + 1)
            * (order + 2)
            / (order + 2 - norm)
        )
        if remainder * exp(norm) <= tolerance:
            return order

    raise ValueError(f"No series order reaches {tolerance} for norm {norm}")


def expm_series(matrix: np.ndarray, tolerance: float = SERIES_TOLERANCE) -> np.ndarray:
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {a.shape}")

    norm = float(np.linalg.norm(a, 1))
    if not np.isfinite(norm):
        raise ValueError("Cannot exponentiate a matrix with non-finite entries")

    squarings = 0
    if norm > SCALED_NORM:
        squarings = int(ceil(log2(norm / SCALED_NORM)))
    scaled = a / 2.0**squarings

    order = series_order(norm / 2.0**squarings, tolerance)
    identity = np.eye(a.shape[0], dtype=np.result_type(a, float))

    # Horner form of sum_{k <= order} scaled^k / k!
    result = identity
    for k in range(order, 0, -1):
        result = identity + (scaled @ result) / k

    for _ in range(squarings):
        result = result @ result

    return result


def propagate(
    matrix: np.ndarray,
    t: float,
    x0: np.ndarray,
    condition_limit: float = EIGEN_CONDITION_LIMIT,
) -> np.ndarray:
    """Compute exp(t·matrix) @ x0"""
    values, vectors = np.linalg.eig(matrix)

    condition = np.linalg.cond(vectors)
    if condition < condition_limit:
        coefficients = np.linalg.solve(vectors, x0)
        return vectors @ (np.exp(values * t) * coefficients)

    logger.debug(
        f"Eigenvectors are ill conditioned (cond={condition:.3g}), using the series "
        "exponential"
    )
    return expm_series(np.asarray(matrix) * t) @ x0
