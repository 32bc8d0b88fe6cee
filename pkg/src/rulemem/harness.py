"""Experiment drivers: desk-scale analogs of the benchmark protocols.

Each experiment id runs a per-seed train/test protocol over a hidden-CSP
domain with fully deterministic seeding: training is beta passes over the
domain's keys, testing follows the regime (matched keys, compositional
2/3-way composites, sequential encounters, persistence restart, adversarial
static knowledge, drift salt shift, or outer-loop ablation). Reports are
byte-identical for identical configs.
"""

from __future__ import annotations

import copy
import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from .agent import AgentConfig, AgentState, EpisodeResult, make_precept_reasoner, run_task
from .conflict import ConflictEngine, Winner
from .envs import (HiddenCSP, drift_changed_fraction,
                   expected_change_probability, generate_adversarial_sk,
                   make_compositional_domain, make_domain, make_task, solution_for)
from .keys import ConditionKey
from .outer_loop import (EvaluationCache, PromptState, TriggerEvent, TriggerKind,
                         evolve_on_trigger, step_efficiency, template_mutator,
                         rule_lines)
from .rules import RuleStore

# Published seeds where identifiable, zero-padded to ten; configurable.
DEFAULT_SEEDS = (42, 123, 3141, 0, 1, 2, 3, 4, 5, 6)

EXPERIMENT_ALIASES = {
    "2": "compositional", "3": "training-size", "4": "continuous",
    "5": "persistence", "6": "sk-ablation", "7": "drift",
    "8": "outer-matched", "9": "outer-ood",
}
EXPERIMENT_IDS = tuple(EXPERIMENT_ALIASES.values())

CSV_COLUMNS = ("experiment", "domain", "seed", "p1", "pt", "avg_steps",
               "conflicts", "static_wins", "dynamic_wins", "static_mean",
               "dynamic_mean", "p1_by_encounter", "pt_by_encounter",
               "drift_changed_fraction", "drift_expected_fraction")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    experiment: str = "5"
    domain: str = "logistics"
    n_conditions: int = 5
    beta: int = 3
    max_retries: int = 3
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    test_mode: str = "matched"          # matched | both
    train_salt: int = 0
    test_salt: int = 0
    sk: str = "off"                     # off | adversarial
    compass_outer: str = "disabled"     # enabled | disabled
    prompt_baking: bool = True
    test_encounters: int = 4
    deterministic_reasoner: bool = True
    compositional_ways: int = 3

    def resolved_experiment(self) -> str:
        exp = EXPERIMENT_ALIASES.get(self.experiment, self.experiment)
        if exp not in EXPERIMENT_IDS:
            raise ConfigError(f"unknown experiment id: {self.experiment!r}")
        return exp

    def validate(self) -> None:
        exp = self.resolved_experiment()
        if exp == "persistence" and self.train_salt != self.test_salt:
            raise ConfigError("persistence runs require train_salt == test_salt")
        if exp == "drift" and self.train_salt == self.test_salt:
            raise ConfigError("drift runs require train_salt != test_salt")
        if self.test_mode not in ("matched", "both"):
            raise ConfigError(f"unknown test_mode: {self.test_mode!r}")
        if self.sk not in ("off", "adversarial"):
            raise ConfigError(f"unknown sk setting: {self.sk!r}")
        if self.compass_outer not in ("enabled", "disabled"):
            raise ConfigError(f"unknown compass_outer setting: {self.compass_outer!r}")
        if not self.seeds:
            raise ConfigError("seed list must be non-empty")


@dataclass
class SeedOutcome:
    seed: int
    p1: float
    pt: float
    avg_steps: float
    p1_by_encounter: list[float] = field(default_factory=list)
    pt_by_encounter: list[float] = field(default_factory=list)
    conflicts: int = 0
    static_wins: int = 0
    dynamic_wins: int = 0
    static_mean: float = 0.0
    dynamic_mean: float = 0.0
    stale_gone_by_encounter: dict[str, int] = field(default_factory=dict)
    drift_changed: float | None = None
    drift_expected: float | None = None
    trace: list[dict] = field(default_factory=list)
    evolution_events: list[dict] = field(default_factory=list)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    outcomes: list[SeedOutcome]


def clone_rules(store: RuleStore) -> RuleStore:
    clone = RuleStore(config=store.config)
    for rule in store.rules():
        clone._rules[rule.key] = copy.deepcopy(rule)
    return clone


def _build_state(csp: HiddenCSP, cfg: ExperimentConfig, seed: int,
                 static_records=None, rules: RuleStore | None = None,
                 compositional: bool = False) -> AgentState:
    agent_cfg = AgentConfig(max_retries=cfg.max_retries,
                            compositional=compositional,
                            atomic_storage=compositional)
    state = AgentState(
        env=csp, config=agent_cfg, rng=random.Random(seed),
        reasoner=make_precept_reasoner(deterministic=cfg.deterministic_reasoner),
        engine=ConflictEngine(rng=random.Random(seed + 10_000)),
    )
    if static_records:
        state.stores.static.extend(static_records)
    if rules is not None:
        state.stores.rules = rules
    return state


def _run_episodes(state: AgentState, keys: list[ConditionKey],
                  encounter: int) -> list[EpisodeResult]:
    return [run_task(make_task(state.env, key, encounter), state) for key in keys]


def _p1(results: list[EpisodeResult]) -> float:
    return sum(r.first_try for r in results) / len(results)


def _pt(results: list[EpisodeResult]) -> float:
    return sum(r.success for r in results) / len(results)


def _avg_steps(results: list[EpisodeResult]) -> float:
    return sum(r.steps for r in results) / len(results)


def _maybe_evolve(state: AgentState, cfg: ExperimentConfig, seed: int,
                  validation_keys: list[ConditionKey], cache: EvaluationCache) -> None:
    """Low-frequency outer loop: single-flight evolution on pending triggers,
    evaluated by replaying validation tasks through a cloned pipeline."""
    if cfg.compass_outer != "enabled" or not state.triggers:
        return
    if state.prompt.tasks_since_evolution < state.prompt.evolution_interval:
        return
    event = state.triggers[-1]
    evolution_rng = random.Random(seed + 777_000 + len(state.prompt.events))
    fingerprint = hashlib.md5(
        ("|".join(k.text for k in validation_keys)
         + "#" + json.dumps(state.rules.to_payload(), sort_keys=True)).encode()
    ).hexdigest()

    def evaluator(prompt_text: str, rollouts: int) -> tuple[float, float]:
        def compute() -> tuple[float, float]:
            probe = AgentState(
                env=state.env, config=state.config,
                rng=random.Random(seed + 555_000),
                reasoner=make_precept_reasoner(deterministic=True),
                engine=ConflictEngine(rng=random.Random(seed + 555_001)),
            )
            probe.stores.rules = clone_rules(state.rules)
            probe.memory = copy.deepcopy(state.memory)
            results = [run_task(make_task(probe.env, k, 1), probe)
                       for k in validation_keys for _ in range(max(1, rollouts // len(validation_keys)))]
            return _pt(results), _avg_steps(results)
        return cache.evaluate(prompt_text, fingerprint, compute)

    trajectory = {
        "last_failure": next((e.detail for e in reversed(state.triggers)
                              if e.kind is TriggerKind.GOAL_FAILURE), None),
        "top_rules": rule_lines(state.rules),
    }
    evolve_on_trigger(event, trajectory, template_mutator, state.prompt,
                      evaluator, evolution_rng, max_retries=state.config.max_retries)
    state.triggers.clear()
    if state.prompt.events:
        state.log("evolution", validation_keys[0], None, "evolved",
                  front=len(state.prompt.front))


def _finalize(state: AgentState, outcome: SeedOutcome) -> None:
    outcome.conflicts = state.engine.conflicts_detected
    outcome.static_wins = state.engine.wins[Winner.STATIC]
    outcome.dynamic_wins = state.engine.wins[Winner.DYNAMIC]
    outcome.static_mean = state.engine.reliabilities.static.mean
    outcome.dynamic_mean = state.engine.reliabilities.dynamic.mean
    outcome.trace = state.trace
    outcome.evolution_events = list(state.prompt.events)


def _run_matched_seed(cfg: ExperimentConfig, seed: int) -> SeedOutcome:
    """Shared train-then-test protocol for matched-regime experiments
    (training-size, sk-ablation, outer-matched) and 'both' mode, where
    training covers only half the keys and testing covers all of them."""
    spec = make_domain(cfg.domain, cfg.n_conditions)
    train_csp = HiddenCSP(spec, cfg.train_salt)
    static = (generate_adversarial_sk(train_csp) if cfg.sk == "adversarial" else None)
    state = _build_state(train_csp, cfg, seed, static_records=static)
    keys = list(spec.unique_keys)
    train_keys = keys if cfg.test_mode == "matched" else keys[: max(1, len(keys) // 2)]
    cache = EvaluationCache()

    for _ in range(cfg.beta):
        _run_episodes(state, train_keys, encounter=0)
        _maybe_evolve(state, cfg, seed, train_keys, cache)
    state.emit(TriggerEvent(TriggerKind.PHASE_CHANGE, detail="train->test"))

    test_results: list[EpisodeResult] = []
    p1_curve, pt_curve = [], []
    for encounter in range(1, cfg.test_encounters + 1):
        results = _run_episodes(state, keys, encounter)
        test_results.extend(results)
        p1_curve.append(_p1(results))
        pt_curve.append(_pt(results))
        _maybe_evolve(state, cfg, seed, train_keys, cache)

    outcome = SeedOutcome(seed=seed, p1=_p1(test_results), pt=_pt(test_results),
                          avg_steps=_avg_steps(test_results),
                          p1_by_encounter=p1_curve, pt_by_encounter=pt_curve)
    _finalize(state, outcome)
    return outcome


def _run_restart_seed(cfg: ExperimentConfig, seed: int) -> SeedOutcome:
    """Persistence / drift protocol: train at train_salt, restart with the
    persisted rule store only, test at test_salt."""
    spec = make_domain(cfg.domain, cfg.n_conditions)
    train_csp = HiddenCSP(spec, cfg.train_salt)
    trainer = _build_state(train_csp, cfg, seed)
    keys = list(spec.unique_keys)
    for _ in range(cfg.beta):
        _run_episodes(trainer, keys, encounter=0)

    trained = {rule.key: rule.solution for rule in trainer.rules.rules()}
    test_csp = HiddenCSP(spec, cfg.test_salt)
    state = _build_state(test_csp, cfg, seed + 500_000,
                         rules=clone_rules(trainer.rules))

    stale = {key: sol for key, sol in trained.items()
             if sol != solution_for(test_csp, key)}
    stale_gone: dict[str, int] = {}

    test_results: list[EpisodeResult] = []
    p1_curve, pt_curve = [], []
    for encounter in range(1, cfg.test_encounters + 1):
        results = _run_episodes(state, keys, encounter)
        test_results.extend(results)
        p1_curve.append(_p1(results))
        pt_curve.append(_pt(results))
        for key, old_solution in stale.items():
            if key.text in stale_gone:
                continue
            current = state.rules.lookup_exact(key)
            if current is None or current.solution != old_solution:
                stale_gone[key.text] = encounter

    outcome = SeedOutcome(seed=seed, p1=_p1(test_results), pt=_pt(test_results),
                          avg_steps=_avg_steps(test_results),
                          p1_by_encounter=p1_curve, pt_by_encounter=pt_curve,
                          stale_gone_by_encounter=stale_gone)
    if cfg.train_salt != cfg.test_salt:
        outcome.drift_changed = drift_changed_fraction(spec, cfg.train_salt, cfg.test_salt)
        outcome.drift_expected = expected_change_probability(spec)
    _finalize(state, outcome)
    return outcome


def _run_continuous_seed(cfg: ExperimentConfig, seed: int) -> SeedOutcome:
    return _run_matched_seed(replace(cfg, beta=1, test_mode="matched"), seed)


def _run_compositional_seed(cfg: ExperimentConfig, seed: int) -> SeedOutcome:
    spec = make_compositional_domain(cfg.domain, max_way=cfg.compositional_ways)
    csp = HiddenCSP(spec, cfg.train_salt)
    state = _build_state(csp, cfg, seed, compositional=True)
    atoms = [k for k in spec.unique_keys if len(k) == 1]
    composites = [k for k in spec.unique_keys if len(k) > 1]
    for _ in range(cfg.beta):
        _run_episodes(state, atoms, encounter=0)
    results = _run_episodes(state, composites, encounter=1)
    outcome = SeedOutcome(seed=seed, p1=_p1(results), pt=_pt(results),
                          avg_steps=_avg_steps(results),
                          p1_by_encounter=[_p1(results)], pt_by_encounter=[_pt(results)])
    _finalize(state, outcome)
    return outcome


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.validate()
    exp = cfg.resolved_experiment()
    runners = {
        "compositional": _run_compositional_seed,
        "training-size": _run_matched_seed,
        "continuous": _run_continuous_seed,
        "persistence": _run_restart_seed,
        "sk-ablation": _run_matched_seed,
        "drift": _run_restart_seed,
        "outer-matched": _run_matched_seed,
        "outer-ood": _run_matched_seed,
    }
    if exp == "outer-ood":
        cfg = replace(cfg, test_mode="both")
    outcomes = [runners[exp](cfg, seed) for seed in cfg.seeds]
    return ExperimentResult(config=cfg, outcomes=outcomes)


# -- report emission --------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def result_rows(result: ExperimentResult) -> list[dict]:
    cfg = result.config
    exp = cfg.resolved_experiment()
    rows = []
    for outcome in sorted(result.outcomes, key=lambda o: o.seed):
        rows.append({
            "experiment": exp,
            "domain": cfg.domain,
            "seed": outcome.seed,
            "p1": outcome.p1,
            "pt": outcome.pt,
            "avg_steps": outcome.avg_steps,
            "conflicts": outcome.conflicts,
            "static_wins": outcome.static_wins,
            "dynamic_wins": outcome.dynamic_wins,
            "static_mean": outcome.static_mean,
            "dynamic_mean": outcome.dynamic_mean,
            "p1_by_encounter": ";".join(f"{v:.6f}" for v in outcome.p1_by_encounter),
            "pt_by_encounter": ";".join(f"{v:.6f}" for v in outcome.pt_by_encounter),
            "drift_changed_fraction": outcome.drift_changed,
            "drift_expected_fraction": outcome.drift_expected,
        })
    return rows


def emit_report(result: ExperimentResult, out_dir: str | Path) -> tuple[Path, Path]:
    """CSV (one row per seed, fixed column set) plus a markdown summary table.
    Deterministic: identical results re-emit byte-identically."""
    rows = result_rows(result)
    if not rows:
        raise ValueError("cannot emit a report for an empty result set")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    exp = result.config.resolved_experiment()
    csv_path = out / f"{exp}_{result.config.domain}.csv"
    md_path = out / f"{exp}_{result.config.domain}.md"

    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
    csv_path.write_text("\n".join(lines) + "\n")

    md = [f"# {exp} on {result.config.domain}", "",
          f"seeds: {list(result.config.seeds)}", "",
          "| seed | P1 | Pt | avg steps | conflicts |",
          "| --- | --- | --- | --- | --- |"]
    for row in rows:
        md.append(f"| {row['seed']} | {row['p1']:.3f} | {row['pt']:.3f} "
                  f"| {row['avg_steps']:.3f} | {row['conflicts']} |")
    md_path.write_text("\n".join(md) + "\n")
    return csv_path, md_path
