from dataclasses import dataclass, field, replace
from math import isfinite
from typing import Any, Dict, Mapping, Tuple


PARAM_KEYS: Tuple[str, ...] = ("alpha", "gamma", "delta", "kappa", "theta", "beta")
"""The coefficient names in the order they are listed in configuration files"""

DEFAULT_COEFFICIENTS: Dict[str, float] = {
    "alpha": 1.0,
    "gamma": 1.0,
    "delta": 1.0,
    "kappa": 1.0,
}


@dataclass(frozen=True)
class SystemParams:
    """The coefficients of the coupled plate / electrical network model

    u_tt + κ A^β u_tt + α A² u + γ A v_t = 0
    v_tt + α A v - γ A u_t + δ A^θ v_t = 0

    `theta` is the exponent of the fractional damping acting on the electrical field,
    `beta` the exponent of the rotational inertia of the plate.
    """

    theta: float
    beta: float
    alpha: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0
    kappa: float = 1.0
    require_coupling: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name in PARAM_KEYS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(f"{name} must be a real number, got {value!r}")
            if not isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")

        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.require_coupling and self.gamma == 0:
            raise ValueError("gamma must not be zero, the system would decouple")
        if self.delta < 0:
            raise ValueError(f"delta must not be negative, got {self.delta}")
        if not 0 <= self.theta <= 1:
            raise ValueError(f"theta must lie in [0,1], got {self.theta}")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0,1], got {self.beta}")

    @classmethod
    def uncoupled(
        cls,
        theta: float,
        beta: float,
        alpha: float = 1.0,
        delta: float = 1.0,
        kappa: float = 1.0,
    ) -> "SystemParams":
        """The γ = 0 limit, the plate and the network evolve independently."""
        return cls(
            theta,
            beta,
            alpha=alpha,
            gamma=0.0,
            delta=delta,
            kappa=kappa,
            require_coupling=False,
        )

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "SystemParams":
        unknown = set(values) - set(PARAM_KEYS)
        if len(unknown) > 0:
            raise KeyError(f"Unknown coefficients: {', '.join(sorted(unknown))}")

        for name in ("theta", "beta"):
            if name not in values:
                raise KeyError(f"The coefficient {name} is required")

        coefficients = {**DEFAULT_COEFFICIENTS, **values}
        return cls(**{k: float(v) for k, v in coefficients.items()})

    def as_dict(self) -> Dict[str, float]:
        return {key: getattr(self, key) for key in PARAM_KEYS}

    def with_exponents(self, theta: float, beta: float) -> "SystemParams":
        return replace(self, theta=theta, beta=beta)

    @property
    def is_conservative(self) -> bool:
        return self.delta == 0

    def __str__(self) -> str:
        return (
            f"θ={self.theta:g}, β={self.beta:g} "
            f"(α={self.alpha:g}, γ={self.gamma:g}, δ={self.delta:g}, κ={self.kappa:g})"
        )
