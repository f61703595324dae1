"""Global vs contextualized linear regressors under a fixed design.

For K groups Y_i = X_i θ_i + ε_i, the global regressor (GLR) pools every group
and the contextualized regressors (CLR) fit each group alone. With ψ_i = X_iᵀX_i
and θ̄ = (Σψ_i)⁻¹ Σψ_iθ_i their expected excess risks are

    GLR: Σ_i ||θ̄ − θ_i||²_{ψ_i} + σ² d
    CLR: K σ² d
"""
from __future__ import annotations

import logging
from typing import List, Sequence

import numpy as np

from src.common.errors import SingularDesign
from src.models.theory import FixedDesignProblem, MonteCarloEstimate, RiskBreakdown

LOGGER = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
ESTIMATORS = ("GLR", "CLR")
NOISES = ("gaussian", "uniform")


def _check_condition(matrix: np.ndarray, label: str, group: int | None = None) -> None:
    condition = np.linalg.cond(matrix)
    if not np.isfinite(condition) or condition >= CONDITION_LIMIT:
        raise SingularDesign(f"{label} is singular (condition number {condition:.3g})", group=group)


def draw_noise(rng: np.random.Generator, size: int, sigma: float, noise: str = "gaussian") -> np.ndarray:
    """Zero-mean noise with standard deviation sigma."""
    if noise == "gaussian":
        return rng.normal(0.0, sigma, size=size)
    if noise == "uniform":
        half_width = np.sqrt(3.0) * sigma
        return rng.uniform(-half_width, half_width, size=size)
    raise ValueError(f"noise must be one of {NOISES}, got '{noise}'")


def sample_problem_outputs(
    problem: FixedDesignProblem,
    rng_seed: int | Sequence[int],
    noise: str = "gaussian",
) -> List[np.ndarray]:
    """Draw Y_i = X_i θ_i + ε_i for every group, deterministically per seed."""
    rng = np.random.default_rng(rng_seed)
    return _sample_outputs(problem, rng, noise)


def _sample_outputs(problem: FixedDesignProblem, rng: np.random.Generator, noise: str) -> List[np.ndarray]:
    outputs = []
    for design, theta in zip(problem.designs, problem.thetas):
        clean = design @ theta
        if problem.sigma == 0.0:
            outputs.append(clean)
        else:
            outputs.append(clean + draw_noise(rng, design.shape[0], problem.sigma, noise))
    return outputs


def fit_glr(problem: FixedDesignProblem, outputs: Sequence[np.ndarray]) -> np.ndarray:
    """θ̂ = (Σψ_i)⁻¹ Σ X_iᵀ Y_i over all groups."""
    gram = sum(problem.psis())
    _check_condition(gram, "Pooled Gram matrix")
    moment = sum(design.T @ np.asarray(y) for design, y in zip(problem.designs, outputs))
    return np.linalg.solve(gram, moment)


def fit_clr(problem: FixedDesignProblem, outputs: Sequence[np.ndarray]) -> List[np.ndarray]:
    """θ̂_i = ψ_i⁻¹ X_iᵀ Y_i for each group."""
    estimates = []
    for index, (design, y) in enumerate(zip(problem.designs, outputs)):
        psi = design.T @ design
        _check_condition(psi, f"Gram matrix of group {index}", group=index)
        estimates.append(np.linalg.solve(psi, design.T @ np.asarray(y)))
    return estimates


def theta_bar(problem: FixedDesignProblem) -> np.ndarray:
    """ψ-weighted mean of the group parameters."""
    psis = problem.psis()
    gram = sum(psis)
    _check_condition(gram, "Pooled Gram matrix")
    return np.linalg.solve(gram, sum(psi @ theta for psi, theta in zip(psis, problem.thetas)))


def mahalanobis_sq(vector: np.ndarray, psi: np.ndarray) -> float:
    """||v||²_ψ = vᵀ ψ v."""
    return float(vector @ psi @ vector)


def analytic_excess_risk_glr(problem: FixedDesignProblem) -> RiskBreakdown:
    """Bias Σ||θ̄ − θ_i||²_{ψ_i} plus variance σ² d."""
    center = theta_bar(problem)
    bias = sum(
        mahalanobis_sq(center - theta, psi) for theta, psi in zip(problem.thetas, problem.psis())
    )
    return RiskBreakdown(bias=float(bias), variance=problem.sigma**2 * problem.d, theta_bar=center)


def analytic_excess_risk_clr(problem: FixedDesignProblem) -> RiskBreakdown:
    """Zero bias plus variance K σ² d."""
    for index, psi in enumerate(problem.psis()):
        _check_condition(psi, f"Gram matrix of group {index}", group=index)
    return RiskBreakdown(bias=0.0, variance=problem.K * problem.sigma**2 * problem.d)


def _fit(problem: FixedDesignProblem, outputs: Sequence[np.ndarray], estimator: str) -> List[np.ndarray]:
    if estimator == "GLR":
        shared = fit_glr(problem, outputs)
        return [shared for _ in range(problem.K)]
    if estimator == "CLR":
        return fit_clr(problem, outputs)
    raise ValueError(f"estimator must be one of {ESTIMATORS}, got '{estimator}'")


def parameter_excess_risk(problem: FixedDesignProblem, estimates: Sequence[np.ndarray]) -> float:
    """Σ_i ||α_i − θ_i||²_{ψ_i}."""
    return float(
        sum(
            mahalanobis_sq(alpha - theta, psi)
            for alpha, theta, psi in zip(estimates, problem.thetas, problem.psis())
        )
    )


def monte_carlo_excess_risk(
    problem: FixedDesignProblem,
    estimator: str,
    trials: int,
    rng_seed: int,
    noise: str = "gaussian",
) -> MonteCarloEstimate:
    """
    Estimate the excess risk of GLR or CLR by repeated noise draws.

    Each trial uses its own generator seeded by (rng_seed, trial), fits the
    estimator on one noise draw and scores it twice: in parameter form
    Σ||α_i − θ_i||²_{ψ_i}, and on a fresh test draw as Σ||Y'_i − X_iα_i||² − nσ².

    Args:
        problem: Fixed-design problem
        estimator: "GLR" or "CLR"
        trials: Number of trials (≥ 2)
        rng_seed: Base seed
        noise: "gaussian" or "uniform" (matched variance)

    Returns:
        MonteCarloEstimate with mean and standard error of both forms
    """
    if trials < 2:
        raise ValueError(f"Need at least 2 trials, got {trials}")
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}, got '{estimator}'")

    noise_floor = problem.n_total * problem.sigma**2
    parameter_form = np.empty(trials)
    test_form = np.empty(trials)
    for trial in range(trials):
        rng = np.random.default_rng([rng_seed, trial])
        estimates = _fit(problem, _sample_outputs(problem, rng, noise), estimator)
        parameter_form[trial] = parameter_excess_risk(problem, estimates)
        fresh = _sample_outputs(problem, rng, noise)
        test_form[trial] = (
            sum(
                float(np.sum((y - design @ alpha) ** 2))
                for y, design, alpha in zip(fresh, problem.designs, estimates)
            )
            - noise_floor
        )

    result = MonteCarloEstimate(
        estimate=float(parameter_form.mean()),
        standard_error=float(parameter_form.std(ddof=1) / np.sqrt(trials)),
        test_noise_estimate=float(test_form.mean()),
        test_noise_standard_error=float(test_form.std(ddof=1) / np.sqrt(trials)),
        trials=trials,
        per_trial=parameter_form,
    )
    LOGGER.info(
        "%s Monte-Carlo excess risk over %d trials: %.4f ± %.4f (test-noise form %.4f ± %.4f)",
        estimator,
        trials,
        result.estimate,
        result.standard_error,
        result.test_noise_estimate,
        result.test_noise_standard_error,
    )
    return result


def risk_decomposition(
    problem: FixedDesignProblem,
    estimator: str,
    trials: int,
    rng_seed: int,
    noise: str = "gaussian",
) -> RiskBreakdown:
    """
    Empirical bias/variance split of an estimator's excess risk.

    bias = Σ||E[α_i] − θ_i||²_{ψ_i}, variance = Σ E||α_i − E[α_i]||²_{ψ_i},
    with expectations replaced by averages over trials.
    """
    if trials < 2:
        raise ValueError(f"Need at least 2 trials, got {trials}")
    draws = []
    for trial in range(trials):
        rng = np.random.default_rng([rng_seed, trial])
        draws.append(_fit(problem, _sample_outputs(problem, rng, noise), estimator))

    stacked = [np.stack([draw[group] for draw in draws]) for group in range(problem.K)]
    means = [group_draws.mean(axis=0) for group_draws in stacked]
    psis = problem.psis()
    bias = sum(mahalanobis_sq(mean - theta, psi) for mean, theta, psi in zip(means, problem.thetas, psis))
    variance = sum(
        float(np.mean(np.einsum("ti,ij,tj->t", group_draws - mean, psi, group_draws - mean)))
        for group_draws, mean, psi in zip(stacked, means, psis)
    )
    return RiskBreakdown(bias=float(bias), variance=float(variance))


def random_problem(
    K: int,
    d: int,
    n_per_group: int,
    sigma: float,
    seed: int,
    shared_theta: bool = False,
) -> FixedDesignProblem:
    """A problem with standard-normal designs and distinct (or shared) parameters."""
    rng = np.random.default_rng(seed)
    designs = tuple(rng.standard_normal((n_per_group, d)) for _ in range(K))
    if shared_theta:
        theta = rng.standard_normal(d)
        thetas = tuple(theta.copy() for _ in range(K))
    else:
        thetas = tuple(rng.standard_normal(d) for _ in range(K))
    return FixedDesignProblem(designs=designs, thetas=thetas, sigma=sigma)
