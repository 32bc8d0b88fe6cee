"""Learned-rule store: exact O(1) lookup with threshold-based invalidation.

Rules map a canonical condition key to a solution with confidence metadata.
Failures decay confidence (x decay) and count toward a threshold; reaching
the threshold deletes the rule outright and persists the deletion. Success
resets the failure counter and restores confidence (+restore, capped at 1.0).

Confidence is bookkeeping on the exact path: a rule that survives is applied
regardless of its confidence value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .keys import ConditionKey


class RuleStoreError(Exception):
    """Raised for malformed rule files or failed persistence."""


@dataclass
class InvalidationConfig:
    theta: int = 2          # consecutive failures before deletion
    decay: float = 0.5      # confidence multiplier per failure
    restore: float = 0.25   # confidence increment on success (capped at 1.0)

    def __post_init__(self) -> None:
        if self.theta < 1:
            raise ValueError("theta must be >= 1")
        if not (0.0 < self.decay < 1.0):
            raise ValueError("decay must be in (0, 1)")
        if self.restore <= 0.0:
            raise ValueError("restore must be positive")


@dataclass
class LearnedRule:
    key: ConditionKey
    solution: str
    confidence: float = 1.0
    failure_count: int = 0


class OutcomeKind(Enum):
    RETAINED = "retained"
    INVALIDATED = "invalidated"
    NOT_TRACKED = "not-tracked"


@dataclass(frozen=True)
class InvalidationOutcome:
    kind: OutcomeKind
    new_confidence: float | None = None


@dataclass
class RuleStore:
    """Single-writer rule store. Fresh rules enter with confidence 1.0.

    When `path` is set, every mutation is written through (determinism over
    throughput); deletion persistence in particular is unconditional.
    """

    config: InvalidationConfig = field(default_factory=InvalidationConfig)
    path: str | Path | None = None
    _rules: dict[ConditionKey, LearnedRule] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self._rules)

    def keys(self) -> list[ConditionKey]:
        return sorted(self._rules, key=lambda k: k.text)

    def rules(self) -> list[LearnedRule]:
        return [self._rules[k] for k in self.keys()]

    def learn(self, key: ConditionKey, solution: str) -> None:
        """Insert or overwrite the rule for `key`; counters start fresh."""
        self._rules[key] = LearnedRule(key=key, solution=solution)
        self._autopersist()

    def lookup_exact(self, key: ConditionKey) -> LearnedRule | None:
        return self._rules.get(key)

    def record_failure(self, key: ConditionKey) -> InvalidationOutcome:
        rule = self._rules.get(key)
        if rule is None:
            return InvalidationOutcome(OutcomeKind.NOT_TRACKED)
        rule.failure_count += 1
        rule.confidence *= self.config.decay
        if rule.failure_count >= self.config.theta:
            del self._rules[key]
            self._autopersist()
            return InvalidationOutcome(OutcomeKind.INVALIDATED)
        self._autopersist()
        return InvalidationOutcome(OutcomeKind.RETAINED, new_confidence=rule.confidence)

    def record_success(self, key: ConditionKey) -> None:
        rule = self._rules.get(key)
        if rule is None:
            return
        rule.failure_count = 0
        rule.confidence = min(1.0, rule.confidence + self.config.restore)
        self._autopersist()

    # -- persistence ---------------------------------------------------------

    def to_payload(self) -> dict:
        return {
            rule.key.text: {
                "solution": rule.solution,
                "confidence": rule.confidence,
                "failure_count": rule.failure_count,
            }
            for rule in self.rules()
        }

    def persist(self, path: str | Path | None = None) -> None:
        target = Path(path if path is not None else self.path or "")
        if not str(target):
            raise RuleStoreError("no path configured for persistence")
        try:
            target.write_text(json.dumps(self.to_payload(), indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise RuleStoreError(f"failed to persist rules to {target}: {exc}") from exc

    def _autopersist(self) -> None:
        if self.path is not None:
            self.persist(self.path)

    @classmethod
    def load(cls, path: str | Path, config: InvalidationConfig | None = None,
             attach_path: bool = False) -> "RuleStore":
        """Load a store byte-identically from a persisted rules file.

        Duplicate keys and schema violations fail loudly, naming the offender.
        """
        raw = Path(path).read_text()

        def reject_duplicates(pairs):
            seen = {}
            for k, v in pairs:
                if k in seen:
                    raise RuleStoreError(f"duplicate key in rules file: {k!r}")
                seen[k] = v
            return seen

        try:
            payload = json.loads(raw, object_pairs_hook=reject_duplicates)
        except json.JSONDecodeError as exc:
            raise RuleStoreError(f"malformed rules file at line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(payload, dict):
            raise RuleStoreError("rules file must contain a top-level object")

        store = cls(config=config or InvalidationConfig(),
                    path=path if attach_path else None)
        for key_text, entry in payload.items():
            if not isinstance(entry, dict) or not {"solution", "confidence", "failure_count"} <= set(entry):
                raise RuleStoreError(f"malformed entry for key {key_text!r}")
            key = ConditionKey.from_text(key_text)
            if key.text != key_text:
                raise RuleStoreError(f"non-canonical key in rules file: {key_text!r}")
            store._rules[key] = LearnedRule(
                key=key,
                solution=str(entry["solution"]),
                confidence=float(entry["confidence"]),
                failure_count=int(entry["failure_count"]),
            )
        return store
