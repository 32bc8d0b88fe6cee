"""Canonical condition keys and the semantic tier table.

A condition key is the universal index used everywhere else: a '+'-joined,
uppercased, deduplicated, lexicographically sorted set of condition tokens.
Canonicalization is permutation-invariant and idempotent, so the same
scenario always hashes to the same key.

Tiers rank conditions for compositional resolution:
3 = safety, 2 = compliance, 1 = preferences (the default for unmapped tokens).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

SEPARATOR = "+"

TIER_SAFETY = 3
TIER_COMPLIANCE = 2
TIER_PREFERENCE = 1

# Default tier table: safety always wins, compliance beats preferences,
# anything unmapped falls back to tier 1.
DEFAULT_TIER_TABLE: dict[str, int] = {
    "SAFE": 3, "SECURE": 3, "RISK": 3, "CANCEL": 3, "AUTH": 3,
    "ASIA": 2, "EURO": 2, "INTL": 2, "HIPAA": 2, "AUDIT": 2,
    "FAST": 1, "ECON": 1, "BULK": 1, "SPEED": 1, "COST": 1,
}


class InvalidKeyError(ValueError):
    """Raised when raw tokens cannot form a valid condition key."""


class TierTableError(ValueError):
    """Raised when a tier table file is malformed or ambiguous."""


@dataclass(frozen=True, order=True)
class ConditionKey:
    """Immutable canonical key. `tokens` is sorted, deduplicated, uppercase."""

    tokens: tuple[str, ...]

    @property
    def text(self) -> str:
        return SEPARATOR.join(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __str__(self) -> str:
        return self.text

    @staticmethod
    def from_text(text: str) -> "ConditionKey":
        return canonicalize(text.split(SEPARATOR))


def canonicalize(raw_tokens: Iterable[str]) -> ConditionKey:
    """Build the canonical key from raw tokens.

    Trims whitespace, uppercases, drops empties, deduplicates, and sorts.
    Tokens containing the separator are rejected rather than escaped so that
    key text round-trips bijectively.
    """
    cleaned = []
    for raw in raw_tokens:
        token = raw.strip().upper()
        if not token:
            continue
        if SEPARATOR in token:
            raise InvalidKeyError(f"token contains reserved separator {SEPARATOR!r}: {raw!r}")
        cleaned.append(token)
    if not cleaned:
        raise InvalidKeyError("no tokens left after trimming")
    return ConditionKey(tokens=tuple(sorted(set(cleaned))))


def decompose(key: ConditionKey) -> list[str]:
    """Return the key's sorted token list (length == condition count)."""
    return list(key.tokens)


def tier_of(token: str, table: Mapping[str, int] | None = None) -> int:
    """Tier for a single token; unmapped tokens default to tier 1.

    Total function: never raises for any token string.
    """
    table = DEFAULT_TIER_TABLE if table is None else table
    return table.get(token.strip().upper(), TIER_PREFERENCE)


def max_tier(key: ConditionKey, table: Mapping[str, int] | None = None) -> int:
    return max(tier_of(t, table) for t in key.tokens)


def load_tier_table(path: str | Path) -> dict[str, int]:
    """Load a tier table from a plain text file: one `TOKEN<tab>TIER` per line.

    Blank lines and `#` comments are skipped. A token mapped to more than one
    tier is rejected at load time (ambiguous precedence would be a silent
    correctness bug downstream).
    """
    table: dict[str, int] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split("\t")
        if len(parts) != 2:
            raise TierTableError(f"line {lineno}: expected TOKEN<tab>TIER, got {line!r}")
        token = parts[0].strip().upper()
        try:
            tier = int(parts[1])
        except ValueError:
            raise TierTableError(f"line {lineno}: tier is not an integer: {parts[1]!r}") from None
        if tier not in (1, 2, 3):
            raise TierTableError(f"line {lineno}: tier must be 1, 2, or 3, got {tier}")
        if token in table and table[token] != tier:
            raise TierTableError(f"line {lineno}: token {token} already mapped to tier {table[token]}")
        table[token] = tier
    return table


def save_tier_table(table: Mapping[str, int], path: str | Path) -> None:
    lines = [f"{token}\t{tier}" for token, tier in sorted(table.items())]
    Path(path).write_text("\n".join(lines) + "\n")
