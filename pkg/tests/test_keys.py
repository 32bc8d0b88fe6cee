import random

import pytest

from rulemem.keys import (DEFAULT_TIER_TABLE, ConditionKey, InvalidKeyError,
                          TierTableError, canonicalize, decompose,
                          load_tier_table, max_tier, save_tier_table, tier_of)


def test_canonicalize_sorts_tokens():
    assert canonicalize(["FAST", "ASIA"]).text == "ASIA+FAST"


def test_canonicalize_dedupes_and_uppercases():
    assert canonicalize(["asia", "ASIA", "fast"]).text == "ASIA+FAST"


def test_canonicalize_composite_with_hyphenated_tokens():
    key = canonicalize(["HAZMAT", "PORT-503", "EXPRESS"])
    assert key.text == "EXPRESS+HAZMAT+PORT-503"


def test_canonicalize_rejects_empty_input():
    with pytest.raises(InvalidKeyError):
        canonicalize(["  ", ""])


def test_canonicalize_rejects_separator_in_token():
    with pytest.raises(InvalidKeyError):
        canonicalize(["A+B"])


def test_decompose_returns_sorted_tokens():
    assert decompose(ConditionKey.from_text("ASIA+FAST+SAFE")) == ["ASIA", "FAST", "SAFE"]
    assert decompose(ConditionKey.from_text("SAFE")) == ["SAFE"]


def test_round_trip_decompose_canonicalize():
    rng = random.Random(7)
    alphabet = ["ASIA", "FAST", "SAFE", "BULK", "X-1", "Y-2", "Z-3", "ECON"]
    for _ in range(200):
        tokens = rng.sample(alphabet, rng.randint(1, len(alphabet)))
        key = canonicalize(tokens)
        assert canonicalize(decompose(key)) == key


def test_permutation_invariance():
    rng = random.Random(11)
    tokens = ["SAFE", "ASIA", "FAST", "BULK", "INTL"]
    reference = canonicalize(tokens)
    for _ in range(50):
        shuffled = tokens[:]
        rng.shuffle(shuffled)
        assert canonicalize(shuffled) == reference


def test_tier_of_table_rows():
    assert tier_of("SAFE") == 3
    assert tier_of("ASIA") == 2
    assert tier_of("UNKNOWN-TOKEN") == 1


def test_tier_of_is_total_over_arbitrary_strings():
    rng = random.Random(3)
    for _ in range(100):
        token = "".join(rng.choice("ABCXYZ-0123") for _ in range(rng.randint(1, 8)))
        assert tier_of(token) in (1, 2, 3)


def test_max_tier_uses_highest_token():
    assert max_tier(ConditionKey.from_text("ASIA+FAST+SAFE")) == 3
    assert max_tier(ConditionKey.from_text("FAST+ECON")) == 1


def test_tier_table_round_trip(tmp_path):
    path = tmp_path / "tiers.tsv"
    save_tier_table(DEFAULT_TIER_TABLE, path)
    assert load_tier_table(path) == DEFAULT_TIER_TABLE


def test_tier_table_rejects_conflicting_duplicate(tmp_path):
    path = tmp_path / "tiers.tsv"
    path.write_text("SAFE\t3\nSAFE\t1\n")
    with pytest.raises(TierTableError):
        load_tier_table(path)


def test_tier_table_rejects_bad_tier(tmp_path):
    path = tmp_path / "tiers.tsv"
    path.write_text("SAFE\t9\n")
    with pytest.raises(TierTableError):
        load_tier_table(path)


def test_tier_table_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "tiers.tsv"
    path.write_text("# domain extension\n\nAMER\t2\n")
    assert load_tier_table(path) == {"AMER": 2}
