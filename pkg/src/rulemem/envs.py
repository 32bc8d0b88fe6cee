"""Hidden constraint-satisfaction benchmark domains.

Each domain is a salted deterministic key -> solution mapping: the correct
option for a condition key is derived from the MD5 digest of
"<salt>:<key text>" (first 8 hex digits, big-endian, modulo the valid-option
count). Solutions are opaque by construction, error codes are deliberately
uninformative, and composite keys share tokens while mapping to unrelated
solutions (the majority-vote trap). Changing the salt re-randomizes the
mapping, which is the drift mechanism.

Unique keys are generated deterministically from the domain vocabulary as
consecutive sorted windows, so consecutive keys share all but one token.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

from .constraints import DEFAULT_CLASS_KEYWORDS, ConstraintClass
from .keys import ConditionKey, canonicalize
from .retrieval import KnowledgeRecord

DOMAIN_NAMES = ("logistics", "booking", "integration")

# Adversarial static knowledge models stale legacy documentation: records
# are backdated so the recency strategy resolves every conflict dynamically.
ADVERSARIAL_SK_AGE_DAYS = 45

_LOGISTICS_VOCAB = ("CU-119", "GT-550", "HZ-907", "PN-204",
                    "R-482", "SH-701", "TY-884", "WX-331")
_LOGISTICS_OPTIONS = ("ningbo", "hamburg", "singapore", "rotterdam")

_INTEGRATION_VOCAB = ("API-V2", "AUTH-401", "CRED-REV", "OAUTH-EXP",
                      "RATE-LMT", "SCOPE-MISS", "TOKEN-ROT", "WEBHOOK-FAIL")
_INTEGRATION_OPTIONS = (
    "salesforce", "salesforce-backup", "hubspot", "hubspot-v2", "stripe",
    "paypal", "twilio", "slack", "zendesk", "shopify", "github", "jira",
    "asana", "dropbox", "notion",
)
_INTEGRATION_VALID = ("salesforce-backup", "hubspot-v2")

_BOOKING_VOCAB = ("AP-330", "BG-415", "CX-208", "DT-512", "EQ-119",
                  "FR-640", "GH-227", "IN-853", "JK-304", "LM-668",
                  "NV-741", "OP-156", "QR-492", "ST-609", "UV-283",
                  "WY-520", "XZ-374")
_BOOKING_OPTIONS = ("DL-123", "UA-456", "AA-789", "BA-234", "LH-567",
                    "AF-890", "KL-345", "EK-678", "QF-901", "SQ-112",
                    "NH-223", "CX-334", "JL-445", "TK-556", "IB-667",
                    "AY-778", "SK-889", "LX-990", "OS-101", "TP-212")
_BOOKING_VALID = ("UA-456", "EK-678", "SQ-112")

_ERROR_POOLS = {
    "logistics": ("PORT_CLOSED_STRIKE", "CUSTOMS_HOLD", "ROUTE_CONGESTION",
                  "BERTH_UNAVAILABLE", "CHANNEL_RESTRICTED", "DOCK_CAPACITY"),
    "integration": ("AUTH_REVOKED", "WEBHOOK_INVALID", "SCOPE_RESTRICTED",
                    "SERVICE_BUSY", "SYNC_DELAY", "QUOTA_CAPACITY"),
    "booking": ("FARE_DISCONTINUED", "CABIN_OVERBOOK", "INVENTORY_HOLD",
                "ROUTE_EMBARGO", "SEAT_UNAVAILABLE", "BOOKING_QUEUE"),
}

# Semantic atom vocabularies for the compositional regime (train on atomics,
# test on 2/3-way composites).
_SEMANTIC_VOCAB = {
    "logistics": ("ASIA", "EURO", "AMER", "INTL", "FAST", "ECON", "SAFE", "BULK"),
    "integration": ("AUTH", "AUDIT", "HIPAA", "SECURE", "RISK", "SPEED", "COST", "CANCEL"),
}


class DomainError(ValueError):
    """Unknown domain, key, or option."""


@dataclass(frozen=True)
class DomainSpec:
    name: str
    condition_vocab: tuple[str, ...]
    unique_keys: tuple[ConditionKey, ...]
    options: tuple[str, ...]
    valid_options: tuple[str, ...]
    error_pool: tuple[str, ...]
    class_keywords: Mapping[ConstraintClass, Sequence[str]] = field(
        default=None, compare=False, hash=False)

    def __post_init__(self):
        if self.class_keywords is None:
            object.__setattr__(self, "class_keywords", DEFAULT_CLASS_KEYWORDS)

    @property
    def num_keys(self) -> int:
        return len(self.unique_keys)


@dataclass(frozen=True)
class HiddenCSP:
    spec: DomainSpec
    salt: int


@dataclass(frozen=True)
class TaskInstance:
    key: ConditionKey
    description: str
    encounter_index: int = 1


@dataclass(frozen=True)
class ExecutionOutcome:
    success: bool
    error_code: str | None = None


def _window_keys(vocab: Sequence[str], count: int, width: int,
                 offset: int = 0) -> tuple[ConditionKey, ...]:
    """Consecutive wrap-around windows over the sorted vocabulary; keys i and
    i+1 share width-1 tokens, realizing the component-overlap trap. The
    per-domain offset constants are pinned so that salts (0, 1) change more
    than half of each domain's solutions."""
    if count > len(vocab):
        raise DomainError(f"cannot generate {count} distinct windows from {len(vocab)} tokens")
    if width > len(vocab):
        raise DomainError("window width exceeds vocabulary size")
    ordered = sorted(vocab)
    keys = []
    for i in range(count):
        start = (offset + i) % len(ordered)
        tokens = [ordered[(start + j) % len(ordered)] for j in range(width)]
        keys.append(canonicalize(tokens))
    return tuple(keys)


def make_domain(name: str, n_conditions: int = 5) -> DomainSpec:
    """The three benchmark domains with their binding size constraints:
    logistics E=4 / 4 options (all valid); integration E=6 / 15 options
    (2 valid suffixed brands whose base names are decoys); booking E=17 /
    20 options (3 valid)."""
    if name == "logistics":
        return DomainSpec(
            name=name, condition_vocab=_LOGISTICS_VOCAB,
            unique_keys=_window_keys(_LOGISTICS_VOCAB, 4, n_conditions, offset=4),
            options=_LOGISTICS_OPTIONS, valid_options=_LOGISTICS_OPTIONS,
            error_pool=_ERROR_POOLS[name])
    if name == "integration":
        return DomainSpec(
            name=name, condition_vocab=_INTEGRATION_VOCAB,
            unique_keys=_window_keys(_INTEGRATION_VOCAB, 6, n_conditions, offset=5),
            options=_INTEGRATION_OPTIONS, valid_options=_INTEGRATION_VALID,
            error_pool=_ERROR_POOLS[name])
    if name == "booking":
        return DomainSpec(
            name=name, condition_vocab=_BOOKING_VOCAB,
            unique_keys=_window_keys(_BOOKING_VOCAB, 17, n_conditions),
            options=_BOOKING_OPTIONS, valid_options=_BOOKING_VALID,
            error_pool=_ERROR_POOLS[name])
    raise DomainError(f"unknown domain: {name!r}")


def make_compositional_domain(name: str, max_way: int = 3) -> DomainSpec:
    """Semantic-atom variant used by the compositional regime: 8 atomic keys
    plus every 2..max_way-token composite, over the same option space as the
    standard domain."""
    if name not in _SEMANTIC_VOCAB:
        raise DomainError(f"no semantic vocabulary for domain: {name!r}")
    base = make_domain(name)
    vocab = _SEMANTIC_VOCAB[name]
    keys = [canonicalize([t]) for t in sorted(vocab)]
    for way in range(2, max_way + 1):
        for combo in combinations(sorted(vocab), way):
            keys.append(canonicalize(combo))
    return DomainSpec(
        name=f"{name}-semantic", condition_vocab=vocab,
        unique_keys=tuple(keys), options=base.options,
        valid_options=base.valid_options, error_pool=base.error_pool)


def _digest_index(salt: int, text: str, modulo: int) -> int:
    digest = hashlib.md5(f"{salt}:{text}".encode("ascii")).hexdigest()
    return int(digest[:8], 16) % modulo


def solution_for(csp: HiddenCSP, key: ConditionKey) -> str:
    if key not in csp.spec.unique_keys:
        raise DomainError(f"key {key.text!r} is not in domain {csp.spec.name!r}")
    index = _digest_index(csp.salt, key.text, len(csp.spec.valid_options))
    return csp.spec.valid_options[index]


def make_task(csp: HiddenCSP, key: ConditionKey, encounter_index: int = 1) -> TaskInstance:
    description = (f"Handle {csp.spec.name} scenario under conditions "
                   f"[{', '.join(key.tokens)}]; choose the correct option.")
    return TaskInstance(key=key, description=description,
                        encounter_index=encounter_index)


def parse_task_description(description: str) -> ConditionKey:
    """Rule-based parser inverting the task template (bracketed token list)."""
    start = description.index("[")
    end = description.index("]", start)
    tokens = [t.strip() for t in description[start + 1:end].split(",")]
    return canonicalize(tokens)


def execute(csp: HiddenCSP, task: TaskInstance, chosen: str) -> ExecutionOutcome:
    """Success iff the chosen option equals the hidden solution; failures draw
    a pool code keyed by (key, chosen) — reproducible, salt-independent, and
    uninformative about the correct answer."""
    if chosen not in csp.spec.options:
        raise DomainError(f"option {chosen!r} is not in domain {csp.spec.name!r}")
    if chosen == solution_for(csp, task.key):
        return ExecutionOutcome(success=True)
    pool = csp.spec.error_pool
    code = pool[_digest_index(0, f"err:{task.key.text}:{chosen}", len(pool))]
    return ExecutionOutcome(success=False, error_code=code)


def generate_adversarial_sk(csp: HiddenCSP, now: int = 0) -> list[KnowledgeRecord]:
    """One static record per unique key recommending an in-vocabulary but
    wrong option (the next valid option after the true one, cyclically),
    phrased as an active legacy strategy and backdated as stale documentation."""
    records = []
    for key in csp.spec.unique_keys:
        correct = solution_for(csp, key)
        valid = csp.spec.valid_options
        wrong = valid[(valid.index(correct) + 1) % len(valid)]
        records.append(KnowledgeRecord(
            source="static",
            key_codes=frozenset(key.tokens),
            content=(f"Per legacy runbook for {key.text}: recommended strategy is "
                     f"{wrong}. Proceed normally."),
            recommendation=wrong,
            timestamp=now - ADVERSARIAL_SK_AGE_DAYS,
            record_id=f"static:{key.text}",
        ))
    return records


def drift_changed_fraction(spec: DomainSpec, salt_a: int, salt_b: int) -> float:
    """Fraction of unique keys whose mapped solution differs between salts.
    Under a uniform remap the expected fraction is 1 - 1/len(valid_options)."""
    a, b = HiddenCSP(spec, salt_a), HiddenCSP(spec, salt_b)
    changed = sum(1 for key in spec.unique_keys
                  if solution_for(a, key) != solution_for(b, key))
    return changed / len(spec.unique_keys)


def expected_change_probability(spec: DomainSpec) -> float:
    return 1.0 - 1.0 / len(spec.valid_options)


def overlap_trap_pairs(spec: DomainSpec, salt: int = 0,
                       min_shared: int = 2) -> list[tuple[ConditionKey, ConditionKey]]:
    """Key pairs sharing >= min_shared tokens whose solutions differ at the
    given salt; non-empty for every shipped domain at salt 0."""
    csp = HiddenCSP(spec, salt)
    pairs = []
    for a, b in combinations(spec.unique_keys, 2):
        shared = len(set(a.tokens) & set(b.tokens))
        if shared >= min_shared and solution_for(csp, a) != solution_for(csp, b):
            pairs.append((a, b))
    return pairs


# -- manifests and goldens -------------------------------------------------------

def domain_manifest(spec: DomainSpec) -> dict:
    return {
        "name": spec.name,
        "vocab": list(spec.condition_vocab),
        "unique_keys": [k.text for k in spec.unique_keys],
        "options": list(spec.options),
        "valid_options": list(spec.valid_options),
        "error_pool": list(spec.error_pool),
    }


def write_domain_manifest(spec: DomainSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(domain_manifest(spec), indent=2, sort_keys=True) + "\n")


GOLDEN_SALTS = (0, 1)


def golden_mapping() -> dict[str, dict[str, dict[str, str]]]:
    """Current mapping for all shipped domains at the golden salts:
    {domain: {salt: {key: solution}}}."""
    mapping: dict[str, dict[str, dict[str, str]]] = {}
    for name in DOMAIN_NAMES:
        spec = make_domain(name)
        mapping[name] = {}
        for salt in GOLDEN_SALTS:
            csp = HiddenCSP(spec, salt)
            mapping[name][str(salt)] = {
                key.text: solution_for(csp, key) for key in spec.unique_keys
            }
    return mapping


def golden_file_path() -> Path:
    return Path(__file__).parent / "data" / "golden_solutions.json"


def load_golden_mapping(path: str | Path | None = None) -> dict:
    return json.loads(Path(path or golden_file_path()).read_text())


def verify_goldens(path: str | Path | None = None) -> list[str]:
    """Compare the live mapping against the committed golden file; returns a
    list of mismatch descriptions (empty means verified)."""
    golden = load_golden_mapping(path)
    live = golden_mapping()
    problems = []
    if set(golden) != set(live):
        problems.append(f"domain sets differ: {sorted(golden)} vs {sorted(live)}")
        return problems
    for name, by_salt in live.items():
        for salt, mapping in by_salt.items():
            committed = golden[name].get(salt, {})
            if committed != mapping:
                for key_text in sorted(set(committed) | set(mapping)):
                    want, got = committed.get(key_text), mapping.get(key_text)
                    if want != got:
                        problems.append(
                            f"{name} salt={salt} key={key_text}: golden={want!r} live={got!r}")
    return problems
