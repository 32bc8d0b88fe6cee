import random

import pytest

from rulemem.constraints import (ConstraintClass, ConstraintMemory,
                                 ProcedureRecord, ProcedureStore, PruningMode,
                                 classify_error)
from rulemem.keys import ConditionKey

KEY = ConditionKey.from_text("ASIA+FAST")
OTHER = ConditionKey.from_text("EURO+SAFE")


def test_classify_error_categories():
    assert classify_error("PORT_CLOSED_STRIKE") is ConstraintClass.HARD
    assert classify_error("ROUTE_CONGESTION") is ConstraintClass.SOFT
    assert classify_error("GATEWAY_TIMEOUT") is ConstraintClass.TRANSIENT


def test_classify_error_unmatched_defaults_transient():
    assert classify_error("SOMETHING_ODD") is ConstraintClass.TRANSIENT
    assert classify_error("") is ConstraintClass.TRANSIENT


def test_record_then_forbidden():
    memory = ConstraintMemory()
    memory.record_failed_option(KEY, "ningbo", ConstraintClass.HARD)
    assert memory.is_forbidden(KEY, "ningbo")
    assert not memory.is_forbidden(OTHER, "ningbo")


def test_transient_failures_never_forbidden():
    memory = ConstraintMemory()
    memory.record_failed_option(KEY, "ningbo", ConstraintClass.TRANSIENT)
    assert not memory.is_forbidden(KEY, "ningbo")
    assert memory.transient_failures(KEY) == {"ningbo"}


def test_duplicate_record_is_idempotent():
    memory = ConstraintMemory()
    memory.record_failed_option(KEY, "x", ConstraintClass.HARD)
    memory.record_failed_option(KEY, "x", ConstraintClass.HARD)
    assert memory.history_size() == 1


def test_soft_retriable_mode_gates_soft_only():
    memory = ConstraintMemory()
    memory.record_failed_option(KEY, "soft-opt", ConstraintClass.SOFT)
    memory.record_failed_option(KEY, "hard-opt", ConstraintClass.HARD)
    default = PruningMode()
    retriable = PruningMode(soft_retriable=True)
    assert memory.is_forbidden(KEY, "soft-opt", default)
    assert not memory.is_forbidden(KEY, "soft-opt", retriable)
    assert memory.is_forbidden(KEY, "hard-opt", retriable)  # HARD always blocked


def test_remaining_options_preserves_order():
    memory = ConstraintMemory()
    memory.record_failed_option(KEY, "b", ConstraintClass.HARD)
    memory.record_failed_option(KEY, "d", ConstraintClass.SOFT)
    assert memory.remaining_options(KEY, ["a", "b", "c", "d"]) == ["a", "c"]


def test_remaining_options_all_forbidden_signals_exhaustion():
    memory = ConstraintMemory()
    for option in ("a", "b"):
        memory.record_failed_option(KEY, option, ConstraintClass.HARD)
    assert memory.remaining_options(KEY, ["a", "b"]) == []


def test_remaining_options_empty_input_rejected():
    with pytest.raises(ValueError):
        ConstraintMemory().remaining_options(KEY, [])


def test_empty_forbidden_set_is_identity():
    memory = ConstraintMemory()
    assert memory.remaining_options(KEY, ["a", "b", "c"]) == ["a", "b", "c"]


def test_history_monotone_within_episode():
    rng = random.Random(2)
    memory = ConstraintMemory()
    previous = 0
    for i in range(200):
        key = KEY if rng.random() < 0.5 else OTHER
        cls = rng.choice([ConstraintClass.HARD, ConstraintClass.SOFT])
        memory.record_failed_option(key, f"opt-{rng.randint(0, 30)}", cls)
        size = memory.history_size()
        assert size >= previous
        previous = size


def test_end_episode_merges_into_cross():
    memory = ConstraintMemory()
    memory.record_failed_option(KEY, "x", ConstraintClass.HARD)
    memory.end_episode()
    assert memory.episode == {}
    assert memory.is_forbidden(KEY, "x")


def test_exhaustion_terminates_within_option_count():
    """Finite options, only HARD failures: a record-then-retry loop runs out
    of candidates within |options| attempts."""
    memory = ConstraintMemory()
    options = ["a", "b", "c", "d", "e"]
    attempts = 0
    while True:
        remaining = memory.remaining_options(KEY, options)
        if not remaining:
            break
        attempts += 1
        memory.record_failed_option(KEY, remaining[0], ConstraintClass.HARD)
        assert attempts <= len(options)
    assert attempts == len(options)


def test_partial_progress_round_trip(tmp_path):
    memory = ConstraintMemory()
    memory.record_failed_option(KEY, "x", ConstraintClass.HARD)
    memory.record_failed_option(KEY, "y", ConstraintClass.SOFT)
    memory.record_failed_option(OTHER, "z", ConstraintClass.HARD)
    path = tmp_path / "progress.json"
    memory.save_partial_progress(path)

    restarted = ConstraintMemory()
    restarted.load_partial_progress(path)
    assert restarted.is_forbidden(KEY, "x")
    assert restarted.is_forbidden(KEY, "y")
    assert restarted.is_forbidden(OTHER, "z")
    # round-trip exact: saving again produces identical bytes
    path2 = tmp_path / "progress2.json"
    restarted.save_partial_progress(path2)
    assert path.read_bytes() == path2.read_bytes()


def test_load_merges_as_union(tmp_path):
    memory = ConstraintMemory()
    memory.record_failed_option(KEY, "fresh", ConstraintClass.HARD)
    memory.end_episode()
    # simulate a prior session's file
    prior = ConstraintMemory()
    prior.record_failed_option(KEY, "old", ConstraintClass.HARD)
    path = tmp_path / "prior.json"
    prior.save_partial_progress(path)
    memory.load_partial_progress(path)
    assert memory.is_forbidden(KEY, "fresh")
    assert memory.is_forbidden(KEY, "old")


def test_empty_file_yields_empty_history(tmp_path):
    path = tmp_path / "progress.json"
    path.write_text("")
    memory = ConstraintMemory()
    memory.load_partial_progress(path)
    assert memory.history_size() == 0


def test_malformed_progress_file_raises(tmp_path):
    path = tmp_path / "progress.json"
    path.write_text("{ not json")
    with pytest.raises(ValueError, match="line"):
        ConstraintMemory().load_partial_progress(path)


def test_procedure_store_lookup_counts_uses():
    store = ProcedureStore()
    record = ProcedureRecord(trigger_error_class=ConstraintClass.HARD,
                             trigger_key=KEY, recovery_option="hamburg")
    store.store(record)
    found = store.lookup(KEY, ConstraintClass.HARD)
    assert found is record
    assert found.uses == 1
    assert store.lookup(KEY, ConstraintClass.SOFT) is None
