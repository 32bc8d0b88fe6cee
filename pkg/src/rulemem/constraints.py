"""Failure-constraint memory: the forbidden-set gate behind retry pruning.

Every failed option is classified HARD (impossible), SOFT (situational), or
TRANSIENT (retryable). HARD and SOFT entries join a per-key forbidden set
that deterministically blocks re-selection; TRANSIENT failures are counted
for retry budgeting but never forbidden. History only grows within an
episode, and cross-episode entries reload from disk into the same gate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .keys import ConditionKey


class ConstraintClass(Enum):
    HARD = "HARD"
    SOFT = "SOFT"
    TRANSIENT = "TRANSIENT"


# Default keyword tables for error classification. Domains ship their own
# extensions; unmatched codes are treated as TRANSIENT (retryable).
DEFAULT_CLASS_KEYWORDS: dict[ConstraintClass, tuple[str, ...]] = {
    ConstraintClass.HARD: (
        "CLOSED", "CLOSURE", "STRIKE", "BANNED", "REVOKED", "INVALID",
        "IMPOSSIBLE", "DISCONTINUED", "RESTRICTED", "EMBARGO",
    ),
    ConstraintClass.SOFT: (
        "BUSY", "CONGESTION", "CAPACITY", "OVERBOOK", "HOLD", "DELAY",
        "UNAVAILABLE", "MAINTENANCE", "QUEUE",
    ),
    ConstraintClass.TRANSIENT: (
        "TIMEOUT", "RETRY", "GATEWAY", "FLAKY", "INTERMITTENT", "RESET",
    ),
}


def classify_error(error_code: str,
                   keyword_tables: Mapping[ConstraintClass, Sequence[str]] | None = None,
                   ) -> ConstraintClass:
    """Deterministic keyword classification; HARD checked first, then SOFT,
    then TRANSIENT; unmatched codes default to TRANSIENT."""
    tables = keyword_tables or DEFAULT_CLASS_KEYWORDS
    code = error_code.strip().upper()
    for cls in (ConstraintClass.HARD, ConstraintClass.SOFT, ConstraintClass.TRANSIENT):
        for keyword in tables.get(cls, ()):
            if keyword in code:
                return cls
    return ConstraintClass.TRANSIENT


@dataclass
class PruningMode:
    random_fallback: bool = False
    soft_retriable: bool = False
    exhausted_exit: bool = True


DEFAULT_PRUNING = PruningMode()


@dataclass
class ConstraintMemory:
    """Growing constraint history for one agent.

    `episode` holds failures discovered in the current episode, `cross`
    the failures carried over from previous episodes (or loaded from disk).
    The gate checks the union. Transient failures live in a separate
    per-episode tally and never enter the forbidden set.
    """

    episode: dict[ConditionKey, dict[str, ConstraintClass]] = field(default_factory=dict)
    cross: dict[ConditionKey, dict[str, ConstraintClass]] = field(default_factory=dict)
    transient_counts: dict[tuple[ConditionKey, str], int] = field(default_factory=dict)
    clock: int = 0  # logical timestamp, bumped on every record

    def record_failed_option(self, key: ConditionKey, option: str,
                             constraint_class: ConstraintClass) -> None:
        self.clock += 1
        if constraint_class is ConstraintClass.TRANSIENT:
            pair = (key, option)
            self.transient_counts[pair] = self.transient_counts.get(pair, 0) + 1
            return
        self.episode.setdefault(key, {})[option] = constraint_class

    def is_forbidden(self, key: ConditionKey, option: str,
                     mode: PruningMode = DEFAULT_PRUNING) -> bool:
        cls = self.episode.get(key, {}).get(option) or self.cross.get(key, {}).get(option)
        if cls is None:
            return False
        if cls is ConstraintClass.HARD:
            return True
        return not mode.soft_retriable  # SOFT

    def remaining_options(self, key: ConditionKey, all_options: Sequence[str],
                          mode: PruningMode = DEFAULT_PRUNING) -> list[str]:
        """`all_options` minus forbidden, input order preserved. An empty
        result signals exhaustion (probe trigger upstream)."""
        if not all_options:
            raise ValueError("all_options must be non-empty")
        return [o for o in all_options if not self.is_forbidden(key, o, mode)]

    def forbidden_options(self, key: ConditionKey,
                          mode: PruningMode = DEFAULT_PRUNING) -> set[str]:
        merged = dict(self.cross.get(key, {}))
        merged.update(self.episode.get(key, {}))
        return {o for o, cls in merged.items()
                if cls is ConstraintClass.HARD or not mode.soft_retriable}

    def transient_failures(self, key: ConditionKey) -> set[str]:
        return {opt for (k, opt) in self.transient_counts if k == key}

    def history_size(self) -> int:
        return (sum(len(v) for v in self.episode.values())
                + sum(len(v) for v in self.cross.values()))

    def recorded_class(self, key: ConditionKey, option: str) -> ConstraintClass | None:
        return self.episode.get(key, {}).get(option) or self.cross.get(key, {}).get(option)

    def end_episode(self) -> None:
        """Roll current-episode failures into the cross-episode set."""
        for key, options in self.episode.items():
            self.cross.setdefault(key, {}).update(options)
        self.episode.clear()
        self.transient_counts.clear()

    # -- persistence (partial progress) ---------------------------------------

    def save_partial_progress(self, path: str | Path) -> None:
        payload = {}
        for key, options in sorted(self._merged().items(), key=lambda kv: kv[0].text):
            ordered = sorted(options.items())
            payload[key.text] = {
                "failed_options": [o for o, _ in ordered],
                "classes": [c.value for _, c in ordered],
            }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def load_partial_progress(self, path: str | Path) -> None:
        """Merge persisted failures into the cross-episode set (union)."""
        raw = Path(path).read_text()
        try:
            payload = json.loads(raw) if raw.strip() else {}
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed partial-progress file at line {exc.lineno}: {exc.msg}") from exc
        for key_text, entry in payload.items():
            key = ConditionKey.from_text(key_text)
            options = entry.get("failed_options", [])
            classes = entry.get("classes", [])
            if len(options) != len(classes):
                raise ValueError(f"partial-progress entry for {key_text!r} has mismatched lists")
            for option, cls_name in zip(options, classes):
                self.cross.setdefault(key, {})[option] = ConstraintClass(cls_name)

    def _merged(self) -> dict[ConditionKey, dict[str, ConstraintClass]]:
        merged: dict[ConditionKey, dict[str, ConstraintClass]] = {}
        for source in (self.cross, self.episode):
            for key, options in source.items():
                merged.setdefault(key, {}).update(options)
        return merged


@dataclass
class ProcedureRecord:
    """A recovery that actually worked: error class + key pattern -> action."""

    trigger_error_class: ConstraintClass
    trigger_key: ConditionKey
    recovery_option: str
    uses: int = 0


class ProcedureStore:
    def __init__(self) -> None:
        self._records: dict[tuple[str, str], ProcedureRecord] = {}

    def store(self, record: ProcedureRecord) -> None:
        self._records[(record.trigger_key.text, record.trigger_error_class.value)] = record

    def lookup(self, key: ConditionKey, error_class: ConstraintClass) -> ProcedureRecord | None:
        record = self._records.get((key.text, error_class.value))
        if record is not None:
            record.uses += 1
        return record

    def __len__(self) -> int:
        return len(self._records)
