"""Knowledge retrieval: hybrid cascade, atomic precepts, and dual-mode merge.

Three retrieval tiers back the rule path: exact hash lookup (score 1.0),
cosine similarity over a deterministic bag embedding, and structural Jaccard
over condition tokens. Dual-mode retrieval gathers all four knowledge
sources (static, dynamic, episodic, rules), runs conflict detection over
static-dynamic pairs, and ranks the merged context rule > dynamic >
episodic > static with conflict losers demoted.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .keys import ConditionKey, tier_of
from .rules import LearnedRule, RuleStore
from .stacking import AtomicPrecept, parse_solution_hint

# Confidence priors per knowledge source.
SOURCE_PRIORS = {"static": 0.9, "dynamic": 0.8, "rule": 1.0, "episodic": 0.7}
# Merge ranking: higher is retrieved first.
SOURCE_RANK = {"rule": 3, "dynamic": 2, "episodic": 1, "static": 0}

VECTOR_THRESHOLD = 0.80
JACCARD_THRESHOLD = 0.34


@dataclass
class KnowledgeRecord:
    source: str                      # static | dynamic | episodic | rule
    key_codes: frozenset[str]
    content: str
    recommendation: str | None = None
    confidence_prior: float | None = None
    timestamp: int = 0               # logical days
    confirmations: int = 0
    failures: int = 0
    record_id: str = ""

    def __post_init__(self) -> None:
        if self.source not in SOURCE_PRIORS:
            raise ValueError(f"unknown knowledge source: {self.source!r}")
        if self.confidence_prior is None:
            self.confidence_prior = SOURCE_PRIORS[self.source]
        if not self.record_id:
            self.record_id = f"{self.source}:{'+'.join(sorted(self.key_codes))}:{self.timestamp}"

    @property
    def observations(self) -> int:
        return self.confirmations + self.failures


def save_static_kb(records: Sequence[KnowledgeRecord], path: str | Path) -> None:
    payload = [{
        "source": r.source,
        "key_codes": sorted(r.key_codes),
        "content": r.content,
        "recommendation": r.recommendation,
        "confidence_prior": r.confidence_prior,
        "timestamp": r.timestamp,
        "confirmations": r.confirmations,
        "failures": r.failures,
        "record_id": r.record_id,
    } for r in records]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_static_kb(path: str | Path) -> list[KnowledgeRecord]:
    payload = json.loads(Path(path).read_text())
    return [KnowledgeRecord(
        source=entry["source"],
        key_codes=frozenset(entry["key_codes"]),
        content=entry["content"],
        recommendation=entry.get("recommendation"),
        confidence_prior=entry.get("confidence_prior"),
        timestamp=entry.get("timestamp", 0),
        confirmations=entry.get("confirmations", 0),
        failures=entry.get("failures", 0),
        record_id=entry.get("record_id", ""),
    ) for entry in payload]


# -- similarity primitives -----------------------------------------------------

def jaccard(a: ConditionKey, b: ConditionKey) -> float:
    sa, sb = set(a.tokens), set(b.tokens)
    union = sa | sb
    if not union:
        return 0.0
    return len(sa & sb) / len(union)


class Embedder(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class HashBagEmbedder:
    """Deterministic token-hash bag embedding (stand-in for an external
    embedding service). Tokens hash to a bucket and sign via MD5, so the
    vector is order-invariant and reproducible across processes."""

    def __init__(self, dimension: int = 64):
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension)
        for token in text.lower().split():
            digest = hashlib.md5(token.encode("utf-8")).hexdigest()
            bucket = int(digest[:8], 16) % self.dimension
            sign = 1.0 if int(digest[8], 16) % 2 == 0 else -1.0
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


# -- 3-tier hybrid rule retrieval ----------------------------------------------

class RetrievalTier(Enum):
    EXACT = "exact"
    VECTOR = "vector"
    JACCARD = "jaccard"
    NONE = "none"


@dataclass(frozen=True)
class RetrievalResult:
    tier_used: RetrievalTier
    payload: LearnedRule | None
    score: float


def _rule_text(rule: LearnedRule) -> str:
    return " ".join(rule.key.tokens)


def get_rule_hybrid(key: ConditionKey, store: RuleStore,
                    embedder: Embedder | None = None,
                    vector_threshold: float = VECTOR_THRESHOLD,
                    jaccard_threshold: float = JACCARD_THRESHOLD,
                    ) -> RetrievalResult:
    """Cascade: exact hit wins immediately; otherwise best cosine match over
    stored rule descriptions above threshold; otherwise best Jaccard over key
    token sets above threshold; otherwise a none-result."""
    exact = store.lookup_exact(key)
    if exact is not None:
        return RetrievalResult(RetrievalTier.EXACT, exact, 1.0)

    emb = embedder or HashBagEmbedder()
    query_vec = emb.embed(" ".join(key.tokens))
    best_vec: tuple[float, LearnedRule] | None = None
    best_jac: tuple[float, LearnedRule] | None = None
    for rule in store.rules():
        score = cosine(query_vec, emb.embed(_rule_text(rule)))
        if score >= vector_threshold and (best_vec is None or score > best_vec[0]):
            best_vec = (score, rule)
        jscore = jaccard(key, rule.key)
        if jscore >= jaccard_threshold and (best_jac is None or jscore > best_jac[0]):
            best_jac = (jscore, rule)
    if best_vec is not None:
        return RetrievalResult(RetrievalTier.VECTOR, best_vec[1], best_vec[0])
    if best_jac is not None:
        return RetrievalResult(RetrievalTier.JACCARD, best_jac[1], best_jac[0])
    return RetrievalResult(RetrievalTier.NONE, None, 0.0)


# -- atomic precept retrieval ----------------------------------------------------

class PreceptStore:
    """Per-token precept storage used by the compositional path."""

    def __init__(self, tier_table: Mapping[str, int] | None = None):
        self._precepts: dict[str, AtomicPrecept] = {}
        self.tier_table = tier_table

    def store(self, token: str, solution_hint: str) -> AtomicPrecept:
        token = token.strip().upper()
        precept = AtomicPrecept(token=token, tier=tier_of(token, self.tier_table),
                                solution_hint=solution_hint)
        self._precepts[token] = precept
        return precept

    def lookup(self, token: str) -> AtomicPrecept | None:
        return self._precepts.get(token.strip().upper())

    def __len__(self) -> int:
        return len(self._precepts)


PreceptConflictFn = Callable[[AtomicPrecept, AtomicPrecept], bool]


def default_precept_conflict(a: AtomicPrecept, b: AtomicPrecept) -> bool:
    """A pair conflicts when one hint explicitly negates the other's parsed
    solution ("avoid X" / "never X" / "not X" vs "solution:X")."""
    for first, second in ((a, b), (b, a)):
        target = parse_solution_hint(second.solution_hint)
        if target is None:
            continue
        text = first.solution_hint.lower()
        for marker in ("avoid", "never", "not"):
            if f"{marker} {target.lower()}" in text:
                return True
    return False


def retrieve_atomic_precepts(key: ConditionKey, store: PreceptStore,
                             conflict_check: PreceptConflictFn | None = None,
                             ) -> list[AtomicPrecept]:
    """One precept per decomposed token (missing tokens omitted), with
    pairwise conflict checks; conflicted precepts come back flagged."""
    check = conflict_check or default_precept_conflict
    found = [p for p in (store.lookup(t) for t in key.tokens) if p is not None]
    conflicted: set[str] = set()
    for i in range(len(found)):
        for j in range(i + 1, len(found)):
            if check(found[i], found[j]):
                conflicted.add(found[i].token)
                conflicted.add(found[j].token)
    return [AtomicPrecept(p.token, p.tier, p.solution_hint, flagged=p.token in conflicted)
            for p in found]


# -- dual-mode retrieval ---------------------------------------------------------

@dataclass
class KnowledgeStores:
    static: list[KnowledgeRecord] = field(default_factory=list)
    dynamic: list[KnowledgeRecord] = field(default_factory=list)
    episodic: list[KnowledgeRecord] = field(default_factory=list)
    rules: RuleStore = field(default_factory=RuleStore)


@dataclass
class MergedContext:
    records: list[KnowledgeRecord]
    rule: LearnedRule | None
    conflicts: list            # (verdict, resolution | None) pairs from the engine
    demoted_ids: set[str]

    def top_recommendation(self) -> str | None:
        for record in self.records:
            if record.recommendation is not None:
                return record.recommendation
        return None


def _semantic_matches(records: Iterable[KnowledgeRecord], query_vec: np.ndarray,
                      embedder: Embedder, top_k: int = 5,
                      key_filter: frozenset[str] | None = None,
                      ) -> list[KnowledgeRecord]:
    scored = []
    for record in records:
        if key_filter is not None and not (record.key_codes & key_filter):
            continue
        score = cosine(query_vec, embedder.embed(record.content))
        scored.append((score, record.record_id, record))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [r for _, _, r in scored[:top_k]]


def retrieve_with_dual_mode(key: ConditionKey, task_text: str,
                            stores: KnowledgeStores, engine,
                            embedder: Embedder | None = None,
                            now: int = 0, top_k: int = 5) -> MergedContext:
    """Gather all sources, detect static-dynamic conflicts, rank the merge.

    Gathering order never affects the output (sorting is total). With an
    empty static store, resolution is never invoked.
    """
    emb = embedder or HashBagEmbedder()
    query_vec = emb.embed(task_text if task_text else " ".join(key.tokens))
    key_codes = frozenset(key.tokens)

    static_hits = _semantic_matches(stores.static, query_vec, emb, top_k)
    dynamic_hits = _semantic_matches(stores.dynamic, query_vec, emb, top_k,
                                     key_filter=key_codes)
    episodic_hits = [r for r in stores.episodic if r.key_codes == key_codes][:top_k]
    rule = stores.rules.lookup_exact(key)

    conflicts = []
    demoted: set[str] = set()
    for static_rec in static_hits:
        for dynamic_rec in dynamic_hits:
            if not (static_rec.key_codes & dynamic_rec.key_codes):
                continue
            verdict, resolution = engine.process_pair(
                static_rec, dynamic_rec, now=now, dynamic_population=stores.dynamic)
            conflicts.append((verdict, resolution))
            if resolution is not None:
                loser = dynamic_rec if resolution.winner.value == "static" else static_rec
                demoted.add(loser.record_id)

    merged = static_hits + dynamic_hits + episodic_hits
    if rule is not None:
        merged.insert(0, KnowledgeRecord(
            source="rule", key_codes=key_codes,
            content=f"learned rule {key.text} -> {rule.solution}",
            recommendation=rule.solution, timestamp=now,
            record_id=f"rule:{key.text}"))
    merged.sort(key=lambda r: (r.record_id in demoted, -SOURCE_RANK[r.source], r.record_id))
    return MergedContext(records=merged, rule=rule, conflicts=conflicts,
                         demoted_ids=demoted)
