"""Seven-phase agent loop with retry pruning and pluggable reasoners.

Per task: (1) rule-based parse, (2) constant-time action gate, (3) retrieval
(dual-mode, plus compositional precepts when enabled), (4) derivation (exact
rule fast path, then composition, then reasoner proposal filtered by the
forbidden set and option validity), (5) execution, (6) outcome handling
(restore / learn on success; decay / invalidate / forbid on failure, with a
bounded retry loop over the remaining options), (7) knowledge updates and
trigger events.

Execution never repeats a recorded HARD/SOFT failure: every candidate passes
the forbidden-set gate first. A fast-path proposal that is already forbidden
counts as a rule failure without consuming an execution step (the recorded
failure is first-hand evidence the rule is stale).

Two simulated reasoners stand in for a model: the engine's own (hint-driven,
exploring untried options), and a parametric verbal baseline whose
per-condition recall, failed-option forgetting, and brand-prior substitution
are the knobs the theory validators measure.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .conflict import ConflictEngine
from .constraints import (ConstraintMemory, ProcedureRecord, ProcedureStore,
                          PruningMode, classify_error)
from .envs import HiddenCSP, TaskInstance, execute, parse_task_description
from .keys import ConditionKey
from .outer_loop import (ActionDecision, PromptState, TriggerEvent, TriggerKind,
                         evaluate_action, get_evolved_prompt)
from .retrieval import (KnowledgeRecord, KnowledgeStores, PreceptStore,
                        retrieve_atomic_precepts, retrieve_with_dual_mode)
from .stacking import CompositionKind, compose, synthesize_deterministic


@dataclass
class AgentConfig:
    max_retries: int = 4
    pruning: PruningMode = field(default_factory=PruningMode)
    compositional: bool = False
    atomic_storage: bool = False
    probing: bool = False
    test_mode: str = "matched"  # matched | both


@dataclass
class EpisodeResult:
    key: ConditionKey
    success: bool
    first_try: bool
    steps: int
    solution: str | None = None
    rule_events: list[dict] = field(default_factory=list)
    executed: list[str] = field(default_factory=list)
    probes: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class ReasonerContext:
    """Everything a proposal callable may consult."""

    hint: str | None
    remaining: list[str]
    tried_episode: set[str]
    options: Sequence[str]


ReasonerFn = Callable[[TaskInstance, ReasonerContext, random.Random], str | None]


def make_precept_reasoner(deterministic: bool = False) -> ReasonerFn:
    """Hint first; otherwise explore options not yet tried this episode —
    in option order when deterministic, else a seeded uniform choice. Falls
    back to the first remaining option once everything was tried (transient
    retries)."""

    def propose(task: TaskInstance, ctx: ReasonerContext, rng: random.Random) -> str | None:
        if ctx.hint and ctx.hint in ctx.remaining and ctx.hint not in ctx.tried_episode:
            return ctx.hint
        untried = [o for o in ctx.remaining if o not in ctx.tried_episode]
        if untried:
            return untried[0] if deterministic else rng.choice(untried)
        return ctx.remaining[0] if ctx.remaining else None

    return propose


@dataclass
class AgentState:
    """Everything one seed's agent owns: environment, stores, clocks, logs."""

    env: HiddenCSP
    config: AgentConfig = field(default_factory=AgentConfig)
    rng: random.Random = field(default_factory=lambda: random.Random(0))
    reasoner: ReasonerFn = field(default_factory=make_precept_reasoner)
    memory: ConstraintMemory = field(default_factory=ConstraintMemory)
    stores: KnowledgeStores = field(default_factory=KnowledgeStores)
    precepts: PreceptStore = field(default_factory=PreceptStore)
    procedures: ProcedureStore = field(default_factory=ProcedureStore)
    prompt: PromptState = field(default_factory=PromptState)
    engine: ConflictEngine | None = None
    day: int = 0                   # logical clock, one day per episode
    trace: list[dict] = field(default_factory=list)
    triggers: list[TriggerEvent] = field(default_factory=list)

    def __post_init__(self):
        if self.engine is None:
            self.engine = ConflictEngine(rng=random.Random(self.rng.random()))

    @property
    def rules(self):
        return self.stores.rules

    def emit(self, event: TriggerEvent) -> None:
        self.triggers.append(event)

    def log(self, phase: str, key: ConditionKey, action: str | None,
            outcome: str, **extra) -> None:
        entry = {"phase": phase, "key": key.text, "action": action, "outcome": outcome}
        entry.update(extra)
        self.trace.append(entry)


def _record_dynamic_experience(state: AgentState, key: ConditionKey, solution: str) -> None:
    """One dynamic record per successful episode; re-learning the same key
    refreshes the recommendation on subsequent records."""
    state.stores.dynamic.append(KnowledgeRecord(
        source="dynamic", key_codes=frozenset(key.tokens),
        content=f"runtime experience for {key.text}: strategy is {solution}",
        recommendation=solution, timestamp=state.day, confirmations=1,
        record_id=f"dynamic:{key.text}:{state.day}"))


def _record_episode(state: AgentState, key: ConditionKey, success: bool) -> None:
    state.stores.episodic.append(KnowledgeRecord(
        source="episodic", key_codes=frozenset(key.tokens),
        content=f"episode on {key.text}: {'success' if success else 'failure'}",
        timestamp=state.day, confirmations=int(success), failures=int(not success),
        record_id=f"episodic:{key.text}:{state.day}"))


def execute_probe(state: AgentState, key: ConditionKey) -> list[tuple[str, str]]:
    """Diagnostic probe: reveals the constraint class of one previously
    attempted failed option (lexicographically first). No failures means no
    evidence; repetition is idempotent."""
    merged = dict(state.memory.cross.get(key, {}))
    merged.update(state.memory.episode.get(key, {}))
    if not merged:
        return []
    option = sorted(merged)[0]
    cls = merged[option]
    state.memory.record_failed_option(key, option, cls)  # idempotent set write
    state.log("probe", key, option, cls.value)
    return [(option, cls.value)]


def run_task(task: TaskInstance, state: AgentState) -> EpisodeResult:
    cfg = state.config
    env = state.env
    state.day += 1

    # Phase 1: rule-based parse (description template -> condition key).
    key = parse_task_description(task.description)
    state.log("parse", key, None, "ok")

    # Phase 2: constant-time gate (informational here; candidates are gated
    # individually before execution).
    gate = evaluate_action(key, None, state.rules, state.memory, cfg.pruning)
    state.log("gate", key, None, gate.value)

    # Phase 3: retrieval. Prompt is rebuilt every episode (self-sanitizing).
    get_evolved_prompt(state.prompt, state.rules, include_rules=True)
    context = retrieve_with_dual_mode(key, task.description, state.stores,
                                      state.engine, now=state.day)
    for verdict, resolution in context.conflicts:
        if resolution is not None:
            state.log("conflict", key, None, resolution.winner.value,
                      strategy=resolution.strategy.value,
                      score=round(verdict.weighted_score, 4))
    composed: str | None = None
    if cfg.compositional:
        precepts = retrieve_atomic_precepts(key, state.precepts)
        outcome = compose(precepts)
        if outcome.kind is CompositionKind.DIRECT:
            composed = outcome.solution
        elif outcome.kind is CompositionKind.SYNTHESIZE:
            composed = synthesize_deterministic(outcome.stack)
    state.log("retrieve", key, composed, context.records[0].source if context.records else "empty")

    result = EpisodeResult(key=key, success=False, first_try=False, steps=1)
    tried_episode: set[str] = set()
    rule_offered = False
    first_error_code: str | None = None

    def forbidden(option: str) -> bool:
        return state.memory.is_forbidden(key, option, cfg.pruning)

    max_attempts = 1 + cfg.max_retries
    while len(result.executed) < max_attempts:
        # Phase 4: derivation.
        candidate: str | None = None
        source = "reasoner"
        rule = state.rules.lookup_exact(key)
        if rule is not None and not rule_offered:
            rule_offered = True
            if forbidden(rule.solution):
                # Stale fast path: blocked before execution, counted as a
                # rule failure (the forbidden entry is a recorded failure of
                # exactly this option for this key).
                outcome = state.rules.record_failure(key)
                result.rule_events.append({"event": outcome.kind.value,
                                           "via": "blocked-fast-path",
                                           "solution": rule.solution})
                state.log("derive", key, rule.solution, "BLOCK", source="rule")
                continue
            candidate, source = rule.solution, "rule"
        elif composed is not None and composed in env.spec.options and \
                not forbidden(composed) and composed not in tried_episode:
            candidate, source = composed, "composition"
            composed = None
        else:
            remaining = state.memory.remaining_options(key, env.spec.options, cfg.pruning)
            if not remaining:
                break  # exhausted: every option is forbidden
            hint = context.top_recommendation()
            ctx = ReasonerContext(hint=hint, remaining=remaining,
                                  tried_episode=tried_episode,
                                  options=env.spec.options)
            candidate = state.reasoner(task, ctx, state.rng)
            if candidate is None:
                break
        if candidate not in env.spec.options or forbidden(candidate):
            # Validation filter: invalid or forbidden proposals fall back to
            # the first untried remaining option.
            remaining = state.memory.remaining_options(key, env.spec.options, cfg.pruning)
            untried = [o for o in remaining if o not in tried_episode]
            if not untried:
                break
            candidate, source = untried[0], "fallback"

        # Phase 5: execute.
        outcome = execute(env, task, candidate)
        result.steps += 1
        result.executed.append(candidate)
        tried_episode.add(candidate)
        state.log("execute", key, candidate, "success" if outcome.success else outcome.error_code,
                  source=source)

        # Phase 6: outcome handling.
        if outcome.success:
            result.success = True
            result.first_try = len(result.executed) == 1
            result.solution = candidate
            existing = state.rules.lookup_exact(key)
            if existing is not None and existing.solution == candidate:
                state.rules.record_success(key)
                result.rule_events.append({"event": "restored", "solution": candidate})
            else:
                state.rules.learn(key, candidate)
                result.rule_events.append({"event": "learned", "solution": candidate})
                state.emit(TriggerEvent(TriggerKind.NEW_RULE, detail=key.text))
            break
        error_class = classify_error(outcome.error_code, env.spec.class_keywords)
        if first_error_code is None:
            first_error_code = outcome.error_code
        state.memory.record_failed_option(key, candidate, error_class)
        if source == "rule":
            inv = state.rules.record_failure(key)
            result.rule_events.append({"event": inv.kind.value, "solution": candidate})

    # Phase 7: knowledge update.
    if result.success:
        _record_dynamic_experience(state, key, result.solution)
        if first_error_code is not None:
            state.procedures.store(ProcedureRecord(
                trigger_error_class=classify_error(first_error_code, env.spec.class_keywords),
                trigger_key=key, recovery_option=result.solution))
        if cfg.atomic_storage:
            for token in key.tokens:
                state.precepts.store(token, f"solution:{result.solution}")
    else:
        state.emit(TriggerEvent(TriggerKind.GOAL_FAILURE, detail=key.text))
        if cfg.probing:
            result.probes = execute_probe(state, key)
    _record_episode(state, key, result.success)
    state.memory.end_episode()
    state.prompt.tasks_since_evolution += 1
    state.log("update", key, result.solution, "success" if result.success else "failure",
              steps=result.steps)
    return result


# -- parametric simulated verbal baseline -----------------------------------------


@dataclass
class SimulatedVerbalParams:
    p: float = 0.75            # per-condition recall accuracy
    p_forget: float = 0.2      # per-retry probability a failed option is re-proposed
    prior_bias: float = 0.0    # probability a suffixed proposal reverts to its base brand

    def __post_init__(self):
        for name in ("p", "p_forget", "prior_bias"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")


class VerbalMemory:
    """Natural-language-style memory: per-composite solutions plus a
    per-token association index (the source of majority-vote traps)."""

    def __init__(self) -> None:
        self.composites: dict[str, str] = {}
        self.token_index: dict[str, list[str]] = {}

    def store(self, key: ConditionKey, solution: str) -> None:
        self.composites[key.text] = solution
        for token in key.tokens:
            self.token_index.setdefault(token, []).append(solution)

    def majority_for_tokens(self, tokens: Sequence[str]) -> str | None:
        votes: dict[str, int] = {}
        for token in tokens:
            for solution in self.token_index.get(token, []):
                votes[solution] = votes.get(solution, 0) + 1
        if not votes:
            return None
        # deterministic tie-break: highest count, then lexicographic
        return max(sorted(votes), key=lambda s: votes[s])


@dataclass
class VerbalProposal:
    option: str | None
    match_kind: str            # full | partial | miss


def simulated_verbal_baseline(key: ConditionKey, memory: VerbalMemory,
                              params: SimulatedVerbalParams, rng: random.Random,
                              options: Sequence[str],
                              decoy_map: dict[str, str] | None = None,
                              ) -> VerbalProposal:
    """One retrieval+proposal under the independence model: each condition is
    recalled with probability p; full recall applies the stored composite
    solution, partial recall applies the majority vote over matched tokens'
    associations, a complete miss explores uniformly. A suffixed proposal
    reverts to its decoy base name with probability prior_bias."""
    matched = [t for t in key.tokens if rng.random() < params.p]
    if len(matched) == len(key.tokens):
        kind = "full"
        proposal = memory.composites.get(key.text)
    elif matched:
        kind = "partial"
        proposal = memory.majority_for_tokens(matched)
    else:
        kind = "miss"
        proposal = None
    if proposal is None:
        proposal = rng.choice(list(options))
    if decoy_map and proposal in decoy_map and rng.random() < params.prior_bias:
        proposal = decoy_map[proposal]
    return VerbalProposal(option=proposal, match_kind=kind)


def verbal_wasted_retries(failed: Sequence[str], retries: int,
                          params: SimulatedVerbalParams, rng: random.Random) -> int:
    """Retry-waste mechanic: at each retry, every previously failed option is
    independently re-proposed with probability p_forget. Returns the wasted
    proposal count (expectation |F| * p_forget * R)."""
    wasted = 0
    for _ in range(retries):
        for _ in failed:
            if rng.random() < params.p_forget:
                wasted += 1
    return wasted
