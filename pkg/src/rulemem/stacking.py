"""Atomic constraint stacking: tier-sorted composition of per-token precepts.

Given the precepts retrieved for one composite key, composition either takes
the deterministic highest-tier fast path (unique tier maximum), builds a
constraint stack for synthesis (tied maxima), or declines when fewer than
two active precepts exist.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

MAX_COVERAGE_ATOMS = 62


@dataclass(frozen=True)
class AtomicPrecept:
    """A learned rule for a single condition token.

    `solution_hint` formats: "solution:<value>" or "solution:LLM-><a>-><b>"
    (exploration path). `flagged` marks retrieval-time conflicts; flagged
    precepts are excluded from the tie test but kept as stack context.
    """

    token: str
    tier: int
    solution_hint: str
    flagged: bool = False


@dataclass(frozen=True)
class ConstraintStack:
    precepts: tuple[AtomicPrecept, ...]            # tier-descending, stable
    tie_group: tuple[AtomicPrecept, ...]           # active precepts at the max tier


class CompositionKind(Enum):
    DIRECT = "direct"
    SYNTHESIZE = "synthesize"
    NONE = "none"


@dataclass(frozen=True)
class CompositionOutcome:
    kind: CompositionKind
    solution: str | None = None
    stack: ConstraintStack | None = None


def parse_solution_hint(hint: str) -> str | None:
    """Extract the actionable solution from a hint string.

    Splits on the first ':'; an exploration path ("a->b->c") yields the
    first non-empty segment that is not "llm" (case-insensitive). A hint
    without ':' is returned trimmed; empty results are absent.
    """
    if ":" in hint:
        raw = hint.split(":", 1)[1]
        if "->" in raw:
            for part in raw.split("->"):
                part = part.strip()
                if part and part.lower() != "llm":
                    return part
            return None
        raw = raw.strip()
        return raw or None
    trimmed = hint.strip()
    return trimmed or None


def compose(precepts: Sequence[AtomicPrecept]) -> CompositionOutcome:
    """Tier-sorted composition over the retrieved precepts.

    Guard applies to active (unflagged) precepts: fewer than two means the
    composite path has nothing to stack and the caller falls back to other
    retrieval tiers. A unique active tier maximum resolves directly; ties
    produce a constraint stack for synthesis. An unparsable hint on the
    winning precept falls back to the stack as well.
    """
    active = [p for p in precepts if not p.flagged]
    if len(active) <= 1:
        return CompositionOutcome(CompositionKind.NONE)

    ordered = sorted(precepts, key=lambda p: -p.tier)  # stable: input order on ties
    top_tier = max(p.tier for p in active)
    tie_group = tuple(p for p in ordered if not p.flagged and p.tier == top_tier)
    stack = ConstraintStack(precepts=tuple(ordered), tie_group=tie_group)

    if len(tie_group) == 1:
        solution = parse_solution_hint(tie_group[0].solution_hint)
        if solution is not None:
            return CompositionOutcome(CompositionKind.DIRECT, solution=solution, stack=stack)
        return CompositionOutcome(CompositionKind.SYNTHESIZE, stack=stack)
    return CompositionOutcome(CompositionKind.SYNTHESIZE, stack=stack)


def synthesize_deterministic(stack: ConstraintStack) -> str | None:
    """Deterministic stand-in for tie synthesis: lexicographically smallest
    parsed solution among the tie group (the evaluated pipeline delegates
    ties to a reasoner; acceptance needs a reproducible choice)."""
    solutions = sorted(
        s for s in (parse_solution_hint(p.solution_hint) for p in stack.tie_group)
        if s is not None
    )
    return solutions[0] if solutions else None


def coverage_count(n_atoms: int) -> int:
    """Number of non-empty composites constructible from n stored atoms."""
    if n_atoms < 0:
        raise ValueError("n_atoms must be non-negative")
    if n_atoms > MAX_COVERAGE_ATOMS:
        raise OverflowError(f"coverage_count capped at {MAX_COVERAGE_ATOMS} atoms")
    return (1 << n_atoms) - 1
