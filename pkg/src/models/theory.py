"""Fixed-design regression problems used to check the bias/variance results."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class FixedDesignProblem:
    """K context groups Y_i = X_i θ_i + ε_i with noise standard deviation σ."""

    designs: Tuple[np.ndarray, ...]
    thetas: Tuple[np.ndarray, ...]
    sigma: float

    def __post_init__(self) -> None:
        designs = tuple(np.asarray(x, dtype=np.float64) for x in self.designs)
        thetas = tuple(np.asarray(theta, dtype=np.float64).reshape(-1) for theta in self.thetas)
        if not designs:
            raise ValueError("A problem needs at least one group")
        if len(designs) != len(thetas):
            raise ValueError("Every group needs a design matrix and a parameter vector")
        d = designs[0].shape[1] if designs[0].ndim == 2 else -1
        for index, (design, theta) in enumerate(zip(designs, thetas)):
            if design.ndim != 2 or design.shape[0] < 1 or design.shape[1] != d:
                raise ValueError(f"Group {index} design must be n_i×{d}, got {design.shape}")
            if theta.shape != (d,):
                raise ValueError(f"Group {index} parameter must have length {d}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        object.__setattr__(self, "designs", designs)
        object.__setattr__(self, "thetas", thetas)

    @classmethod
    def from_groups(
        cls, groups: Sequence[Tuple[Sequence[Sequence[float]], Sequence[float]]], sigma: float
    ) -> FixedDesignProblem:
        """Build from (X_i, θ_i) pairs."""
        return cls(
            designs=tuple(np.asarray(x, dtype=np.float64) for x, _ in groups),
            thetas=tuple(np.asarray(theta, dtype=np.float64) for _, theta in groups),
            sigma=sigma,
        )

    @property
    def K(self) -> int:
        return len(self.designs)

    @property
    def d(self) -> int:
        return int(self.designs[0].shape[1])

    @property
    def n_total(self) -> int:
        return int(sum(design.shape[0] for design in self.designs))

    def psis(self) -> List[np.ndarray]:
        """Gram matrices ψ_i = X_iᵀ X_i."""
        return [design.T @ design for design in self.designs]

    def with_thetas(self, thetas: Sequence[np.ndarray]) -> FixedDesignProblem:
        return FixedDesignProblem(self.designs, tuple(thetas), self.sigma)

    def with_sigma(self, sigma: float) -> FixedDesignProblem:
        return FixedDesignProblem(self.designs, self.thetas, sigma)


@dataclass(frozen=True)
class RiskBreakdown:
    """Excess risk split into bias and variance parts."""

    bias: float
    variance: float
    theta_bar: Optional[np.ndarray] = None

    @property
    def total(self) -> float:
        return self.bias + self.variance


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Monte-Carlo excess risk with its standard error, in two forms."""

    estimate: float
    standard_error: float
    test_noise_estimate: float
    test_noise_standard_error: float
    trials: int
    per_trial: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    def within(self, expected: float, n_se: float = 3.0) -> bool:
        """Whether ``expected`` lies within n_se standard errors of the estimate."""
        return abs(self.estimate - expected) <= n_se * self.standard_error + 1e-12
