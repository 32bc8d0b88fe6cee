import random

import pytest

from rulemem.keys import ConditionKey, canonicalize
from rulemem.rules import (InvalidationConfig, OutcomeKind, RuleStore,
                           RuleStoreError)

KEY = ConditionKey.from_text("ASIA+FAST")


def test_learn_sets_unit_confidence():
    store = RuleStore()
    store.learn(KEY, "ningbo")
    rule = store.lookup_exact(KEY)
    assert rule is not None
    assert rule.confidence == 1.0
    assert rule.failure_count == 0


def test_learn_overwrites_existing_rule():
    store = RuleStore()
    store.learn(KEY, "ningbo")
    store.record_failure(KEY)
    store.learn(KEY, "hamburg")
    rule = store.lookup_exact(KEY)
    assert rule.solution == "hamburg"
    assert rule.confidence == 1.0
    assert rule.failure_count == 0


def test_lookup_unseen_key_absent():
    assert RuleStore().lookup_exact(KEY) is None


def test_failure_decays_confidence_then_invalidates():
    store = RuleStore()
    store.learn(KEY, "ningbo")
    outcome = store.record_failure(KEY)
    assert outcome.kind is OutcomeKind.RETAINED
    assert outcome.new_confidence == 0.5
    assert store.lookup_exact(KEY).failure_count == 1
    outcome = store.record_failure(KEY)
    assert outcome.kind is OutcomeKind.INVALIDATED
    assert store.lookup_exact(KEY) is None


def test_failure_on_unknown_key_is_not_tracked():
    outcome = RuleStore().record_failure(KEY)
    assert outcome.kind is OutcomeKind.NOT_TRACKED


def test_success_restores_confidence_capped():
    store = RuleStore()
    store.learn(KEY, "ningbo")
    store.record_failure(KEY)             # c = 0.5, f = 1
    store.record_success(KEY)
    rule = store.lookup_exact(KEY)
    assert rule.confidence == 0.75
    assert rule.failure_count == 0
    store.record_success(KEY)
    assert store.lookup_exact(KEY).confidence == 1.0  # capped


def test_success_resets_failure_count():
    store = RuleStore()
    store.learn(KEY, "ningbo")
    store.record_failure(KEY)
    store.record_success(KEY)
    # two more failures needed again before invalidation
    assert store.record_failure(KEY).kind is OutcomeKind.RETAINED
    assert store.record_failure(KEY).kind is OutcomeKind.INVALIDATED


def test_confidence_stays_in_unit_interval_under_random_interleavings():
    rng = random.Random(5)
    for trial in range(50):
        store = RuleStore()
        store.learn(KEY, "x")
        consecutive = 0
        for _ in range(rng.randint(1, 40)):
            rule = store.lookup_exact(KEY)
            if rule is None:
                break
            assert 0.0 <= rule.confidence <= 1.0
            assert rule.failure_count < store.config.theta
            if rng.random() < 0.5:
                store.record_failure(KEY)
                consecutive += 1
                if consecutive >= store.config.theta:
                    assert store.lookup_exact(KEY) is None
                    break
            else:
                store.record_success(KEY)
                consecutive = 0


def test_custom_theta():
    store = RuleStore(config=InvalidationConfig(theta=3))
    store.learn(KEY, "x")
    assert store.record_failure(KEY).kind is OutcomeKind.RETAINED
    assert store.record_failure(KEY).kind is OutcomeKind.RETAINED
    assert store.record_failure(KEY).kind is OutcomeKind.INVALIDATED


def test_invalid_configs_rejected():
    with pytest.raises(ValueError):
        InvalidationConfig(theta=0)
    with pytest.raises(ValueError):
        InvalidationConfig(decay=1.0)
    with pytest.raises(ValueError):
        InvalidationConfig(restore=0.0)


def test_empty_store_round_trips(tmp_path):
    path = tmp_path / "rules.json"
    store = RuleStore()
    store.persist(path)
    assert len(RuleStore.load(path)) == 0


def test_thousand_random_rules_round_trip_exactly(tmp_path):
    rng = random.Random(17)
    store = RuleStore()
    tokens = [f"T-{i:03d}" for i in range(40)]
    for i in range(1000):
        key = canonicalize(rng.sample(tokens, rng.randint(1, 5)))
        store.learn(key, f"opt-{i % 13}")
        if rng.random() < 0.3:
            store.record_failure(key)
    path = tmp_path / "rules.json"
    store.persist(path)
    loaded = RuleStore.load(path)
    assert loaded.to_payload() == store.to_payload()
    # byte-identical re-persist
    path2 = tmp_path / "rules2.json"
    loaded.persist(path2)
    assert path.read_bytes() == path2.read_bytes()


def test_load_rejects_duplicate_keys(tmp_path):
    path = tmp_path / "rules.json"
    path.write_text('{"A": {"solution": "x", "confidence": 1.0, "failure_count": 0},\n'
                    ' "A": {"solution": "y", "confidence": 1.0, "failure_count": 0}}')
    with pytest.raises(RuleStoreError, match="duplicate"):
        RuleStore.load(path)


def test_load_reports_malformed_line(tmp_path):
    path = tmp_path / "rules.json"
    path.write_text('{"A": {"solution": "x",\n  broken\n}}')
    with pytest.raises(RuleStoreError, match="line"):
        RuleStore.load(path)


def test_write_through_persistence_on_invalidation(tmp_path):
    path = tmp_path / "rules.json"
    store = RuleStore(path=path)
    store.learn(KEY, "ningbo")
    assert "ningbo" in path.read_text()
    store.record_failure(KEY)
    store.record_failure(KEY)  # invalidated, deletion persisted
    assert KEY.text not in path.read_text()


def test_stale_persistence_matches_detection_model():
    """Per-encounter detection with probability d: a stale rule persists
    (evades detection entirely, no decay progress) through theta encounters
    with probability (1-d)^theta. Any detected failure starts the
    decay-toward-deletion trajectory, so an intact rule means zero
    detections."""
    rng = random.Random(99)
    for d in (0.95, 0.60):
        intact = 0
        trials = 40_000
        for _ in range(trials):
            store = RuleStore()
            store.learn(KEY, "stale")
            for _ in range(store.config.theta):
                if rng.random() < d:          # failure detected this encounter
                    store.record_failure(KEY)
            rule = store.lookup_exact(KEY)
            if rule is not None and rule.confidence == 1.0:
                intact += 1
        expected = (1 - d) ** 2
        assert abs(intact / trials - expected) < 0.005


class _CountingKey:
    """Hash-compatible wrapper that counts equality comparisons."""

    comparisons = 0

    def __init__(self, key: ConditionKey):
        self.key = key

    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        _CountingKey.comparisons += 1
        other_key = other.key if isinstance(other, _CountingKey) else other
        return self.key == other_key


def test_lookup_cost_is_constant_in_store_size():
    """Amortized equality comparisons per exact lookup stay O(1) as the
    store grows (hash-table property, asserted via counter not wall clock)."""
    def avg_comparisons(n_rules: int) -> float:
        store = RuleStore()
        keys = [_CountingKey(canonicalize([f"K-{i}", f"M-{i % 7}"])) for i in range(n_rules)]
        for i, key in enumerate(keys):
            store._rules[key] = object.__new__(object)  # payload irrelevant here
        _CountingKey.comparisons = 0
        probes = keys[:: max(1, n_rules // 200)][:200]
        for key in probes:
            assert store._rules.get(_CountingKey(key.key)) is not None
        return _CountingKey.comparisons / len(probes)

    small, large = avg_comparisons(100), avg_comparisons(10_000)
    assert small <= 3.0
    assert large <= 3.0
    assert large <= small * 2 + 1
