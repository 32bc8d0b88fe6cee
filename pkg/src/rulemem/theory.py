"""Closed-form performance bounds and their Monte Carlo validators.

Every bound has two routes: the analytic formula and a simulation of the
matching stochastic process, so each constant the analysis predicts can be
checked empirically at a fixed seed. Illustrative anchor values ship as a
named preset; all oracles accept arbitrary parameters.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

# Illustrative anchor preset used in the worked examples (not fitted values).
ANCHORS = {
    "alpha_precept": 0.85,
    "alpha_verbal": 0.50,
    "p": 0.75,
    "d_precept": 0.95,
    "d_verbal": 0.60,
    "theta": 2,
}


@dataclass(frozen=True)
class TheoryParams:
    white: int = 0              # scenarios solvable without learning
    black: int = 1              # scenarios requiring a learned rule
    training_episodes: int = 0  # T (= beta * unique_keys under the controlled protocol)
    unique_keys: int = 1        # E
    beta: int = 0               # exposures per key
    retries: int = 0            # R
    p: float = 0.75             # per-condition accuracy
    alpha: float = 0.85         # learning effectiveness
    theta: int = 2              # invalidation threshold
    detection: float = 0.95     # per-encounter stale-rule detection accuracy


def coverage(training_episodes: int, unique_keys: int) -> float:
    """Probability a given key was seen during training (coupon collector):
    1 - (1 - 1/E)^T."""
    if unique_keys < 1:
        raise ValueError("unique_keys must be >= 1")
    if training_episodes < 0:
        raise ValueError("training_episodes must be >= 0")
    return 1.0 - (1.0 - 1.0 / unique_keys) ** training_episodes


def p_learn_uniform(retries: int, n_options: int) -> float:
    """Default learn-probability model: uniform exploration over the option
    space within the retry budget: 1 - (1 - 1/|options|)^R."""
    if n_options < 1:
        raise ValueError("n_options must be >= 1")
    return 1.0 - (1.0 - 1.0 / n_options) ** retries


def first_try(params: TheoryParams, p_learn: float) -> float:
    """Expected first-try success: W/(W+B) + B/(W+B) * C(T,E) * P_learn * alpha."""
    total = params.white + params.black
    if total <= 0:
        raise ValueError("need at least one scenario")
    if not (0.0 <= p_learn <= 1.0):
        raise ValueError("p_learn must be in [0, 1]")
    white_share = params.white / total
    black_share = params.black / total
    cov = coverage(params.training_episodes, params.unique_keys)
    return white_share + black_share * cov * p_learn * params.alpha


def degradation(alpha1: float, p: float, n_conditions: int) -> float:
    """Verbal effectiveness at N conditions under independence: alpha1 * p^(N-1)."""
    if n_conditions < 1:
        raise ValueError("n_conditions must be >= 1")
    return alpha1 * p ** (n_conditions - 1)


def effectiveness_ratio(alpha_precept: float, alpha_verbal: float, p: float,
                        n_conditions: int) -> float:
    """Exact-retrieval advantage over the degrading verbal baseline."""
    return alpha_precept / degradation(alpha_verbal, p, n_conditions)


def stale_persist(detection: float, theta: int) -> float:
    """Probability a stale rule survives theta detection encounters: (1-d)^theta."""
    if not (0.0 <= detection <= 1.0):
        raise ValueError("detection must be in [0, 1]")
    if theta < 1:
        raise ValueError("theta must be >= 1")
    return (1.0 - detection) ** theta


def resilience_ratio(d_verbal: float, d_precept: float, theta: int) -> float:
    denom = stale_persist(d_precept, theta)
    if denom == 0.0:
        raise ZeroDivisionError("perfect detection gives an infinite ratio")
    return stale_persist(d_verbal, theta) / denom


def partial_match(p: float, n_conditions: int) -> float:
    """Probability a verbal retrieval matches some but not all of N
    conditions: 1 - p^N - (1-p)^N."""
    if n_conditions < 1:
        raise ValueError("n_conditions must be >= 1")
    return 1.0 - p ** n_conditions - (1.0 - p) ** n_conditions


def wasted_retries(n_failed: float, p_forget: float, retries: float) -> float:
    """Expected wasted retries for the forgetting baseline: |F| * p_forget * R.
    The exact-retrieval path wastes zero by the pruning guarantee."""
    return n_failed * p_forget * retries


def anchor_sensitivity(n_conditions: int, p: float = 0.75,
                       alpha_precept_range: tuple[float, float] = (0.75, 0.95),
                       alpha_verbal_range: tuple[float, float] = (0.40, 0.60),
                       ) -> tuple[float, float]:
    """Ratio interval over the anchor endpoints."""
    ratios = [effectiveness_ratio(ap, av, p, n_conditions)
              for ap in alpha_precept_range for av in alpha_verbal_range]
    return min(ratios), max(ratios)


# -- Monte Carlo validators ---------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    bound_id: str
    analytic: float
    empirical: float
    abs_error: float
    trials: int
    seed: int


def _simulate_coverage(params: TheoryParams, trials: int, rng: np.random.Generator) -> float:
    draws = rng.integers(0, params.unique_keys, size=(trials, max(params.training_episodes, 1)))
    if params.training_episodes == 0:
        return 0.0
    targets = rng.integers(0, params.unique_keys, size=trials)
    seen = (draws == targets[:, None]).any(axis=1)
    return float(seen.mean())


def _simulate_first_try(params: TheoryParams, p_learn: float, trials: int,
                        rng: np.random.Generator) -> float:
    total = params.white + params.black
    is_white = rng.random(trials) < params.white / total
    covered = rng.random(trials) < coverage(params.training_episodes, params.unique_keys)
    learned = rng.random(trials) < p_learn
    applied = rng.random(trials) < params.alpha
    success = is_white | (~is_white & covered & learned & applied)
    return float(success.mean())


def _simulate_full_match(params: TheoryParams, n_conditions: int, trials: int,
                         rng: np.random.Generator) -> float:
    recalls = rng.random((trials, n_conditions)) < params.p
    return float(recalls.all(axis=1).mean())


def _simulate_partial_match(params: TheoryParams, n_conditions: int, trials: int,
                            rng: np.random.Generator) -> float:
    recalls = rng.random((trials, n_conditions)) < params.p
    count = recalls.sum(axis=1)
    return float(((count > 0) & (count < n_conditions)).mean())


def _simulate_stale_persist(params: TheoryParams, trials: int,
                            rng: np.random.Generator) -> float:
    detected = rng.random((trials, params.theta)) < params.detection
    return float((~detected).all(axis=1).mean())


def _simulate_wasted_retries(n_failed: int, p_forget: float, retries: int,
                             trials: int, rng: np.random.Generator) -> float:
    events = rng.random((trials, retries, n_failed)) < p_forget
    return float(events.sum(axis=(1, 2)).mean())


def monte_carlo_validate(bound_id: str, params: TheoryParams, trials: int = 100_000,
                         seed: int = 0, n_conditions: int = 10,
                         p_learn: float | None = None,
                         n_failed: int = 3, p_forget: float = 0.2,
                         ) -> ValidationReport:
    """Validate one bound against a simulation of its stochastic process.

    bound_id is one of: coverage, B1, B2, B4, B6, B8.
    """
    if trials < 10_000:
        raise ValueError("validators need at least 10^4 trials")
    rng = np.random.default_rng(seed)
    if bound_id == "coverage":
        analytic = coverage(params.training_episodes, params.unique_keys)
        empirical = _simulate_coverage(params, trials, rng)
    elif bound_id == "B1":
        learn = p_learn if p_learn is not None else 1.0
        analytic = first_try(params, learn)
        empirical = _simulate_first_try(params, learn, trials, rng)
    elif bound_id == "B2":
        analytic = params.p ** n_conditions  # full-match rate behind alpha(N) decay
        empirical = _simulate_full_match(params, n_conditions, trials, rng)
    elif bound_id == "B4":
        analytic = stale_persist(params.detection, params.theta)
        empirical = _simulate_stale_persist(params, trials, rng)
    elif bound_id == "B6":
        analytic = partial_match(params.p, n_conditions)
        empirical = _simulate_partial_match(params, n_conditions, trials, rng)
    elif bound_id == "B8":
        analytic = wasted_retries(n_failed, p_forget, params.retries)
        empirical = _simulate_wasted_retries(n_failed, p_forget, params.retries, trials, rng)
    else:
        raise ValueError(f"unknown bound id: {bound_id!r}")
    return ValidationReport(bound_id=bound_id, analytic=analytic, empirical=empirical,
                            abs_error=abs(analytic - empirical), trials=trials, seed=seed)


def oracle_report(reports: list[ValidationReport], path: str | Path | None = None) -> str:
    """CSV table {bound, params..., analytic, empirical, error}."""
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["bound", "trials", "seed", "analytic", "empirical", "abs_error"])
    for r in reports:
        writer.writerow([r.bound_id, r.trials, r.seed,
                         f"{r.analytic:.10f}", f"{r.empirical:.10f}", f"{r.abs_error:.10f}"])
    text = buffer.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def anchor_params() -> TheoryParams:
    return TheoryParams(p=ANCHORS["p"], alpha=ANCHORS["alpha_precept"],
                        theta=ANCHORS["theta"], detection=ANCHORS["d_precept"])


def with_params(params: TheoryParams, **overrides) -> TheoryParams:
    return replace(params, **overrides)
