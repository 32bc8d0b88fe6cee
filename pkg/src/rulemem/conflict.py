"""Static-vs-dynamic conflict: weighted ensemble detection and resolution.

Six detector methods vote per record pair; the weighted score triggers
resolution at >= 0.30, or any single vote with confidence >= 0.60 trips the
circuit breaker. Resolution auto-selects a strategy (anomaly, recency,
evidence, then Bayesian Thompson sampling over per-source Beta posteriors)
and the posterior update credits the winner's alpha / loser's beta once.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

from .retrieval import KnowledgeRecord

STALENESS_DAYS = 30
EVIDENCE_MIN_OBSERVATIONS = 3
ANOMALY_DISAGREE_FRACTION = 0.75

# Phrase tables for the recommendation-conflict patterns.
DISMISSIVE_PHRASES = ("can be ignored", "ignore this", "proceed normally",
                      "no action needed", "not applicable", "safe to skip")
ACTIVE_PHRASES = ("strategy is", "solution:", "use ", "recommended", "switch to")

# Keyword contradiction pairs for the default semantic/nli heuristics.
CONTRADICTION_PAIRS = (
    ("always", "never"), ("enabled", "disabled"), ("open", "closed"),
    ("available", "unavailable"), ("allowed", "forbidden"),
    ("safe", "unsafe"), ("valid", "invalid"), ("increase", "decrease"),
)
NEGATION_MARKERS = ("not ", "no longer", "never", "avoid", "stopped", "deprecated")


class Method(Enum):
    NLI = "nli"
    SEMANTIC = "semantic"
    TEMPORAL = "temporal"
    EVIDENCE = "evidence"
    RECOMMENDATION = "recommendation"
    LLM = "llm"


@dataclass(frozen=True)
class DetectorVote:
    method: Method
    is_conflict: bool
    confidence: float


@dataclass
class EnsembleConfig:
    """Raw weights are scoring coefficients, normalized at score time."""

    weights: dict[Method, float] = field(default_factory=lambda: {
        Method.NLI: 0.30,
        Method.SEMANTIC: 0.30,
        Method.TEMPORAL: 0.15,
        Method.EVIDENCE: 0.15,
        Method.RECOMMENDATION: 0.50,
        Method.LLM: 0.10,
    })
    trigger_threshold: float = 0.30
    breaker_confidence: float = 0.60
    enabled: dict[Method, bool] = field(default_factory=lambda: {
        Method.NLI: True,
        Method.SEMANTIC: True,
        Method.TEMPORAL: True,
        Method.EVIDENCE: True,
        Method.RECOMMENDATION: True,
        Method.LLM: False,
    })


class Severity(Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


@dataclass(frozen=True)
class ConflictVerdict:
    weighted_score: float
    triggered: bool
    breaker_method: Method | None
    severity: Severity
    votes: tuple[DetectorVote, ...]


class Strategy(Enum):
    ANOMALY = "anomaly"
    RECENCY = "recency"
    EVIDENCE = "evidence"
    BAYESIAN = "bayesian"


class Winner(Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass
class Resolution:
    winner: Winner
    strategy: Strategy
    draws: tuple[float, float] | None = None  # (theta_static, theta_dynamic)
    posterior_applied: bool = False


@dataclass
class SourceReliability:
    """Beta posterior on one source's reliability."""

    alpha: float
    beta: float

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass
class ReliabilityPair:
    """Priors: static Beta(5,5) (unverified external input, mean 0.50);
    dynamic Beta(5,3) (first-hand outcomes, mean 0.625)."""

    static: SourceReliability = field(default_factory=lambda: SourceReliability(5.0, 5.0))
    dynamic: SourceReliability = field(default_factory=lambda: SourceReliability(5.0, 3.0))


def sample_beta(alpha: float, beta: float, rng: random.Random) -> float:
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    return rng.betavariate(alpha, beta)


# -- individual detector methods ----------------------------------------------

def recommendation_conflict(static_rec: KnowledgeRecord,
                            dynamic_rec: KnowledgeRecord) -> DetectorVote:
    """Fires on: (i) dismissive static vs active dynamic phrasing, (ii)
    overlapping key codes with divergent recommendations, (iii) explicitly
    different solution suggestions."""
    s_rec, d_rec = static_rec.recommendation, dynamic_rec.recommendation
    if s_rec is not None and d_rec is not None:
        if s_rec == d_rec:
            return DetectorVote(Method.RECOMMENDATION, False, 0.0)
        # divergent explicit recommendations: patterns (ii)/(iii)
        return DetectorVote(Method.RECOMMENDATION, True, 1.0)
    s_text = static_rec.content.lower()
    d_text = dynamic_rec.content.lower()
    dismissive = any(p in s_text for p in DISMISSIVE_PHRASES)
    active = any(p in d_text for p in ACTIVE_PHRASES)
    if dismissive and active:
        return DetectorVote(Method.RECOMMENDATION, True, 0.7)
    return DetectorVote(Method.RECOMMENDATION, False, 0.0)


def temporal_vote(static_rec: KnowledgeRecord, now: int) -> DetectorVote:
    """Staleness vote: fires once the static record is older than 30 logical
    days, confidence ramping to 1.0 at 60 days."""
    age = now - static_rec.timestamp
    if age > STALENESS_DAYS:
        confidence = min(1.0, (age - STALENESS_DAYS) / STALENESS_DAYS)
        return DetectorVote(Method.TEMPORAL, True, confidence)
    return DetectorVote(Method.TEMPORAL, False, 0.0)


def evidence_vote(static_rec: KnowledgeRecord,
                  dynamic_rec: KnowledgeRecord) -> DetectorVote:
    """Abstains below 3 observations on the dynamic side; otherwise fires when
    the confirmed dynamic recommendation diverges from the static one,
    confidence = confirmation ratio."""
    total = dynamic_rec.observations
    if total < EVIDENCE_MIN_OBSERVATIONS:
        return DetectorVote(Method.EVIDENCE, False, 0.0)
    diverges = (static_rec.recommendation is not None
                and dynamic_rec.recommendation is not None
                and static_rec.recommendation != dynamic_rec.recommendation)
    if diverges and dynamic_rec.confirmations > 0:
        return DetectorVote(Method.EVIDENCE, True, dynamic_rec.confirmations / total)
    return DetectorVote(Method.EVIDENCE, False, 0.0)


def _keyword_contradiction(a: str, b: str) -> bool:
    a, b = a.lower(), b.lower()
    for x, y in CONTRADICTION_PAIRS:
        if (x in a and y in b) or (y in a and x in b):
            return True
    return False


def semantic_vote(static_rec: KnowledgeRecord,
                  dynamic_rec: KnowledgeRecord) -> DetectorVote:
    if _keyword_contradiction(static_rec.content, dynamic_rec.content):
        return DetectorVote(Method.SEMANTIC, True, 0.7)
    return DetectorVote(Method.SEMANTIC, False, 0.0)


def nli_vote(static_rec: KnowledgeRecord,
             dynamic_rec: KnowledgeRecord) -> DetectorVote:
    """Default heuristic behind the pluggable NLI slot: negation of a shared
    topic term counts as contradiction."""
    s_text, d_text = static_rec.content.lower(), dynamic_rec.content.lower()
    shared = static_rec.key_codes & dynamic_rec.key_codes
    if shared:
        s_negated = any(m in s_text for m in NEGATION_MARKERS)
        d_negated = any(m in d_text for m in NEGATION_MARKERS)
        if s_negated != d_negated:
            return DetectorVote(Method.NLI, True, 0.5)
    return DetectorVote(Method.NLI, False, 0.0)


def abstain_llm_vote(static_rec: KnowledgeRecord,
                     dynamic_rec: KnowledgeRecord) -> DetectorVote:
    return DetectorVote(Method.LLM, False, 0.0)


VoterFn = Callable[[KnowledgeRecord, KnowledgeRecord], DetectorVote]


def _severity(score: float) -> Severity:
    if score < 0.45:
        return Severity.LOW
    if score < 0.70:
        return Severity.MEDIUM
    return Severity.HIGH


def detect(static_rec: KnowledgeRecord, dynamic_rec: KnowledgeRecord,
           config: EnsembleConfig | None = None, now: int = 0,
           nli: VoterFn | None = None, llm: VoterFn | None = None,
           ) -> ConflictVerdict:
    """Run every enabled method and combine votes.

    weighted_score = sum(w * 1[conflict] * confidence) / sum(w) over enabled
    methods (abstentions count in the denominator). The circuit breaker
    compares raw per-method confidence, pre-weighting.
    """
    cfg = config or EnsembleConfig()
    voters: dict[Method, Callable[[], DetectorVote]] = {
        Method.NLI: lambda: (nli or nli_vote)(static_rec, dynamic_rec),
        Method.SEMANTIC: lambda: semantic_vote(static_rec, dynamic_rec),
        Method.TEMPORAL: lambda: temporal_vote(static_rec, now),
        Method.EVIDENCE: lambda: evidence_vote(static_rec, dynamic_rec),
        Method.RECOMMENDATION: lambda: recommendation_conflict(static_rec, dynamic_rec),
        Method.LLM: lambda: (llm or abstain_llm_vote)(static_rec, dynamic_rec),
    }
    votes = []
    numerator = 0.0
    denominator = 0.0
    breaker_method = None
    for method, run in voters.items():
        if not cfg.enabled.get(method, False):
            continue
        vote = run()
        votes.append(vote)
        weight = cfg.weights[method]
        denominator += weight
        if vote.is_conflict:
            numerator += weight * vote.confidence
            if vote.confidence >= cfg.breaker_confidence and breaker_method is None:
                breaker_method = method
    score = numerator / denominator if denominator else 0.0
    triggered = score >= cfg.trigger_threshold or breaker_method is not None
    return ConflictVerdict(weighted_score=score, triggered=triggered,
                           breaker_method=breaker_method,
                           severity=_severity(score), votes=tuple(votes))


def resolve(verdict: ConflictVerdict, static_rec: KnowledgeRecord,
            dynamic_rec: KnowledgeRecord, reliabilities: ReliabilityPair,
            rng: random.Random, now: int = 0,
            dynamic_population: Sequence[KnowledgeRecord] | None = None,
            ) -> Resolution:
    """Pick a winner for a triggered conflict.

    Strategy order: anomaly (outlier dynamic item -> static wins), recency
    (static stale > 30 days -> dynamic wins), evidence (>= 3 observations ->
    majority outcome wins), else Bayesian (compare theta * confidence with
    theta drawn from each source's posterior).
    """
    if not verdict.triggered:
        raise ValueError("resolve() requires a triggered verdict")

    if dynamic_population and dynamic_rec.recommendation is not None:
        same_key = [r for r in dynamic_population
                    if r.key_codes == dynamic_rec.key_codes and r is not dynamic_rec
                    and r.recommendation is not None]
        if same_key:
            disagree = sum(1 for r in same_key if r.recommendation != dynamic_rec.recommendation)
            if disagree / len(same_key) >= ANOMALY_DISAGREE_FRACTION:
                return Resolution(Winner.STATIC, Strategy.ANOMALY)

    if now - static_rec.timestamp > STALENESS_DAYS:
        return Resolution(Winner.DYNAMIC, Strategy.RECENCY)

    if dynamic_rec.observations >= EVIDENCE_MIN_OBSERVATIONS:
        winner = (Winner.DYNAMIC if dynamic_rec.confirmations * 2 >= dynamic_rec.observations
                  else Winner.STATIC)
        return Resolution(winner, Strategy.EVIDENCE)

    theta_s = sample_beta(reliabilities.static.alpha, reliabilities.static.beta, rng)
    theta_d = sample_beta(reliabilities.dynamic.alpha, reliabilities.dynamic.beta, rng)
    score_s = theta_s * static_rec.confidence_prior
    score_d = theta_d * dynamic_rec.confidence_prior
    winner = Winner.DYNAMIC if score_d > score_s else Winner.STATIC
    return Resolution(winner, Strategy.BAYESIAN, draws=(theta_s, theta_d))


def update_posteriors(resolution: Resolution, reliabilities: ReliabilityPair) -> None:
    """Conjugate update, applied exactly once: winner alpha += 1, loser beta += 1."""
    if resolution.posterior_applied:
        raise ValueError("posterior update already applied for this resolution")
    if resolution.winner is Winner.DYNAMIC:
        reliabilities.dynamic.alpha += 1.0
        reliabilities.static.beta += 1.0
    else:
        reliabilities.static.alpha += 1.0
        reliabilities.dynamic.beta += 1.0
    resolution.posterior_applied = True


class ConflictEngine:
    """Detect -> resolve -> update pipeline with an append-only audit log."""

    def __init__(self, config: EnsembleConfig | None = None,
                 reliabilities: ReliabilityPair | None = None,
                 rng: random.Random | None = None,
                 audit_path: str | Path | None = None) -> None:
        self.config = config or EnsembleConfig()
        self.reliabilities = reliabilities or ReliabilityPair()
        self.rng = rng or random.Random(0)
        self.audit_path = Path(audit_path) if audit_path else None
        self.conflicts_detected = 0
        self.wins = {Winner.STATIC: 0, Winner.DYNAMIC: 0}

    def process_pair(self, static_rec: KnowledgeRecord, dynamic_rec: KnowledgeRecord,
                     now: int = 0,
                     dynamic_population: Sequence[KnowledgeRecord] | None = None,
                     ) -> tuple[ConflictVerdict, Resolution | None]:
        verdict = detect(static_rec, dynamic_rec, self.config, now=now)
        if not verdict.triggered:
            return verdict, None
        self.conflicts_detected += 1
        resolution = resolve(verdict, static_rec, dynamic_rec, self.reliabilities,
                             self.rng, now=now, dynamic_population=dynamic_population)
        update_posteriors(resolution, self.reliabilities)
        self.wins[resolution.winner] += 1
        self._audit(static_rec, dynamic_rec, verdict, resolution)
        return verdict, resolution

    def _audit(self, static_rec: KnowledgeRecord, dynamic_rec: KnowledgeRecord,
               verdict: ConflictVerdict, resolution: Resolution) -> None:
        if self.audit_path is None:
            return
        entry = {
            "static_id": static_rec.record_id,
            "dynamic_id": dynamic_rec.record_id,
            "votes": [[v.method.value, v.is_conflict, round(v.confidence, 6)]
                      for v in verdict.votes],
            "score": round(verdict.weighted_score, 6),
            "strategy": resolution.strategy.value,
            "winner": resolution.winner.value,
            "posteriors_after": {
                "static": [self.reliabilities.static.alpha, self.reliabilities.static.beta],
                "dynamic": [self.reliabilities.dynamic.alpha, self.reliabilities.dynamic.beta],
            },
        }
        with self.audit_path.open("a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
