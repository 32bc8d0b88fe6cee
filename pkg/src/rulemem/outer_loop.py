"""Dual-frequency adaptation layer over the agent pipeline.

High-frequency path: constant-time per-step gating (block / pivot /
fast-path / proceed). Low-frequency path: event-triggered prompt evolution
with pattern-based complexity estimation, smart rollout allocation,
bi-objective Pareto front maintenance, and a compilation winner picked by
the 0.7 success / 0.3 efficiency weighted rule. Prompts are rebuilt on
every call, so invalidated rules vanish from the active instructions with
no separate sanitization step.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .keys import ConditionKey
from .rules import RuleStore

DIMENSIONS = ("tool_use", "retrieval", "reasoning", "verification")

EARLY_STOP_SCORE = 0.98
CONSISTENCY_SCORE = 0.90
DIVERSITY_THRESHOLD = 0.70
DIVERSITY_ROLLOUTS = 5
CONSISTENCY_ROLLOUTS = 3
BASE_ROLLOUTS = 3
ROLLOUT_MIN, ROLLOUT_MAX = 1, 15
RECOVERY_INCREMENT = 2
MIN_COMPILED_SCORE = 0.6          # config key: compass_min_score
EVOLUTION_INTERVAL = 2            # tasks between low-frequency evolutions
COMPILATION_BATCH = 5
PARENT_SOFTMAX_TEMPERATURE = 0.5

# Keyword tables for the four complexity dimensions; defaults cover the
# shipped benchmark domains' vocabularies.
DEFAULT_PATTERN_TABLES: dict[str, tuple[str, ...]] = {
    "tool_use": ("book", "execute", "call", "dispatch", "route", "ship",
                 "reserve", "integrate", "invoke"),
    "retrieval": ("find", "lookup", "retrieve", "search", "history",
                  "recall", "known", "previous"),
    "reasoning": ("resolve", "decide", "choose", "compose", "conflict",
                  "constraint", "priority", "because"),
    "verification": ("verify", "validate", "check", "confirm", "audit",
                     "ensure"),
}


@dataclass(frozen=True)
class ComplexityEstimate:
    dimension_scores: dict[str, float]
    dominant_dimension: str
    estimated_steps: int
    confidence: float


def analyze_complexity(task_text: str,
                       pattern_tables: Mapping[str, Sequence[str]] | None = None,
                       history: Sequence[float] | None = None,
                       ) -> ComplexityEstimate:
    """Score each dimension by keyword hits (0.25 per hit), pick the argmax
    with ties broken in fixed dimension order, and estimate steps as base 2
    plus the rounded aggregate. History for a previously-seen domain pulls
    confidence up monotonically: conf = base + (1-base) * n/(n+3)."""
    tables = pattern_tables or DEFAULT_PATTERN_TABLES
    text = task_text.lower()
    scores = {dim: 0.0 for dim in DIMENSIONS}
    for dim in DIMENSIONS:
        hits = sum(text.count(kw) for kw in tables.get(dim, ()))
        scores[dim] = 0.25 * hits
    dominant = max(DIMENSIONS, key=lambda d: (scores[d], -DIMENSIONS.index(d)))
    estimated_steps = 2 + round(sum(scores.values()))
    base_confidence = 0.5
    n = len(history) if history else 0
    confidence = base_confidence + (1.0 - base_confidence) * (n / (n + 3.0))
    return ComplexityEstimate(dimension_scores=scores, dominant_dimension=dominant,
                              estimated_steps=estimated_steps, confidence=confidence)


class RolloutFocus(Enum):
    SKIP = "skip"
    CONSISTENCY = "consistency"
    DIVERSITY = "diversity"
    EXPLORE = "explore"
    RECOVERY = "recovery"


@dataclass(frozen=True)
class RolloutPlan:
    count: int
    focus: RolloutFocus


def allocate_rollouts(score: float, diversity_score: float,
                      complexity: ComplexityEstimate,
                      failed_before: bool = False) -> RolloutPlan:
    """Tiered allocation: near-perfect scores skip, low diversity spends the
    diversity budget, high scores get consistency checks, else exploration
    scaled by estimated steps (plus a recovery increment after failures).
    Output count always lands in [1, 15]."""
    if score >= EARLY_STOP_SCORE:
        return RolloutPlan(1, RolloutFocus.SKIP)
    if diversity_score < DIVERSITY_THRESHOLD:
        return RolloutPlan(DIVERSITY_ROLLOUTS, RolloutFocus.DIVERSITY)
    if CONSISTENCY_SCORE <= score < EARLY_STOP_SCORE:
        return RolloutPlan(CONSISTENCY_ROLLOUTS, RolloutFocus.CONSISTENCY)
    count = BASE_ROLLOUTS + max(0, complexity.estimated_steps - 2)
    focus = RolloutFocus.EXPLORE
    if failed_before:
        count += RECOVERY_INCREMENT
        focus = RolloutFocus.RECOVERY
    return RolloutPlan(max(ROLLOUT_MIN, min(ROLLOUT_MAX, count)), focus)


def step_efficiency(avg_steps: float, max_retries: int) -> float:
    """1 / (1 + avg_steps / s_max) with s_max = 1 + max_retries; 1.0 at zero
    steps, monotone decreasing."""
    if avg_steps < 0 or max_retries < 0:
        raise ValueError("avg_steps and max_retries must be non-negative")
    s_max = 1 + max_retries
    return 1.0 / (1.0 + avg_steps / s_max)


# -- Pareto front -----------------------------------------------------------------

@dataclass
class Candidate:
    id: int
    prompt_text: str
    success_rate: float
    step_efficiency: float
    rollouts_used: int = 0
    dominant_dimension: str = "tool_use"

    def objectives(self) -> tuple[float, float]:
        return (self.success_rate, self.step_efficiency)


def dominates(a: Candidate, b: Candidate) -> bool:
    """a is at least as good on both objectives and strictly better on one."""
    return (a.success_rate >= b.success_rate
            and a.step_efficiency >= b.step_efficiency
            and (a.success_rate > b.success_rate
                 or a.step_efficiency > b.step_efficiency))


def pareto_front(candidates: Sequence[Candidate]) -> list[Candidate]:
    front = []
    for c in candidates:
        if not any(dominates(other, c) for other in candidates if other is not c):
            front.append(c)
    return front


def weighted_score(candidate: Candidate) -> float:
    return 0.7 * candidate.success_rate + 0.3 * candidate.step_efficiency


def select_compilation_winner(front: Sequence[Candidate]) -> Candidate:
    """Argmax of the 0.7/0.3 weighted rule; ties break on higher success
    rate, then lower id."""
    if not front:
        raise ValueError("cannot select a winner from an empty front")
    return max(front, key=lambda c: (weighted_score(c), c.success_rate, -c.id))


# -- prompt evolution ---------------------------------------------------------------

class TriggerKind(Enum):
    NEW_RULE = "new_rule"
    GOAL_FAILURE = "goal_failure"
    PHASE_CHANGE = "phase_change"


@dataclass(frozen=True)
class TriggerEvent:
    kind: TriggerKind
    detail: str = ""


MutatorFn = Callable[[Candidate, dict], str]
EvaluatorFn = Callable[[str, int], tuple[float, float]]  # prompt, rollouts -> (success_rate, avg_steps)


def template_mutator(parent: Candidate, trajectory: dict) -> str:
    """Deterministic default mutation: append the most recent failure's
    constraint and the top rules to the parent prompt."""
    lines = [parent.prompt_text]
    failure = trajectory.get("last_failure")
    if failure:
        lines.append(f"Constraint: avoid {failure}.")
    for rule_line in trajectory.get("top_rules", [])[:3]:
        lines.append(f"Known mapping: {rule_line}.")
    return "\n".join(lines)


@dataclass
class PromptState:
    """Prompt-selection state shared between the agent and the outer loop."""

    base_prompt: str = "Solve the task using learned condition-key mappings."
    compiled_winner: Candidate | None = None
    front: list[Candidate] = field(default_factory=list)
    min_compiled_score: float = MIN_COMPILED_SCORE
    tasks_since_evolution: int = 0
    evolution_interval: int = EVOLUTION_INTERVAL
    next_candidate_id: int = 0
    log_path: str | Path | None = None
    events: list[dict] = field(default_factory=list)

    def allocate_id(self) -> int:
        cid = self.next_candidate_id
        self.next_candidate_id += 1
        return cid


def rule_lines(store: RuleStore) -> list[str]:
    return [f"RULE {r.key.text} -> {r.solution} (confidence {r.confidence:.2f})"
            for r in store.rules()]


def get_evolved_prompt(state: PromptState, store: RuleStore,
                       include_rules: bool = True) -> str:
    """Deployment choice: compilation winner above the acceptance threshold,
    else highest-success front member, else the base prompt. Current rules
    are re-appended on every call (self-sanitizing)."""
    prompt = state.base_prompt
    if state.compiled_winner is not None and weighted_score(state.compiled_winner) > state.min_compiled_score:
        prompt = state.compiled_winner.prompt_text
    elif state.front:
        best = max(state.front, key=lambda c: (c.success_rate, -c.id))
        prompt = best.prompt_text
    if include_rules:
        lines = rule_lines(store)
        if lines:
            prompt = prompt + "\n" + "\n".join(lines)
    return prompt


def evolve_on_trigger(event: TriggerEvent, trajectory: dict, mutator: MutatorFn,
                      state: PromptState, evaluator: EvaluatorFn,
                      rng: random.Random, max_retries: int = 4,
                      rollouts: int = BASE_ROLLOUTS) -> list[Candidate]:
    """One evolution step: sample a parent from the front (softmax over
    average score with exploration noise), mutate, evaluate the child through
    the full pipeline, and apply the dominance update. A failing mutator
    leaves the front unchanged and logs the event."""
    if state.tasks_since_evolution < state.evolution_interval:
        return state.front
    state.tasks_since_evolution = 0

    if state.front:
        weights = [math.exp(weighted_score(c) / PARENT_SOFTMAX_TEMPERATURE)
                   for c in state.front]
        parent = rng.choices(state.front, weights=weights, k=1)[0]
    else:
        parent = Candidate(id=state.allocate_id(), prompt_text=state.base_prompt,
                           success_rate=0.0, step_efficiency=0.0)

    try:
        child_prompt = mutator(parent, trajectory)
        if not child_prompt:
            raise ValueError("mutator returned an empty prompt")
    except Exception as exc:
        _log_evolution(state, event, parent, None, note=f"mutator failed: {exc}")
        return state.front

    success_rate, avg_steps = evaluator(child_prompt, rollouts)
    child = Candidate(id=state.allocate_id(), prompt_text=child_prompt,
                      success_rate=success_rate,
                      step_efficiency=step_efficiency(avg_steps, max_retries),
                      rollouts_used=rollouts)

    if any(dominates(member, child) for member in state.front):
        _log_evolution(state, event, parent, child, note="child dominated; discarded")
        return state.front
    state.front = [m for m in state.front if not dominates(child, m)]
    state.front.append(child)
    _log_evolution(state, event, parent, child, note="child added")
    return state.front


def _log_evolution(state: PromptState, event: TriggerEvent, parent: Candidate,
                   child: Candidate | None, note: str) -> None:
    entry = {
        "trigger": event.kind.value,
        "parent_id": parent.id,
        "child_id": child.id if child else None,
        "metrics": [child.success_rate, child.step_efficiency] if child else None,
        "front_ids_after": sorted(c.id for c in state.front),
        "note": note,
    }
    state.events.append(entry)
    if state.log_path:
        with Path(state.log_path).open("a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


class EvaluationCache:
    """Caches candidate metrics keyed by (prompt, validation-set fingerprint)
    so repeated evaluations skip re-execution."""

    def __init__(self) -> None:
        self._cache: dict[tuple[str, str], tuple[float, float]] = {}
        self.hits = 0
        self.misses = 0

    def evaluate(self, prompt: str, fingerprint: str,
                 compute: Callable[[], tuple[float, float]]) -> tuple[float, float]:
        cache_key = (prompt, fingerprint)
        if cache_key in self._cache:
            self.hits += 1
            return self._cache[cache_key]
        self.misses += 1
        result = compute()
        self._cache[cache_key] = result
        return result


# -- high-frequency gate --------------------------------------------------------

class ActionDecision(Enum):
    BLOCK = "BLOCK"
    PIVOT = "PIVOT"
    FAST_PATH = "FAST_PATH"
    PROCEED = "PROCEED"


def evaluate_action(key: ConditionKey, proposed_action: str | None,
                    rule_store: RuleStore, memory,
                    pruning_mode=None) -> ActionDecision:
    """Constant-time per-step gate: forbidden actions block, exact rule
    coverage fast-paths, transiently failed actions pivot, else proceed."""
    from .constraints import DEFAULT_PRUNING
    mode = pruning_mode or DEFAULT_PRUNING
    if proposed_action is not None and memory.is_forbidden(key, proposed_action, mode):
        return ActionDecision.BLOCK
    if rule_store.lookup_exact(key) is not None:
        return ActionDecision.FAST_PATH
    if proposed_action is not None and proposed_action in memory.transient_failures(key):
        return ActionDecision.PIVOT
    return ActionDecision.PROCEED
