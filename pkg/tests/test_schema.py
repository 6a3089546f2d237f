"""Serializer/parser contract: round-trips, totality, corpus classification."""

import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fashiontag.rng import SplitMix64
from fashiontag.schema import (
    COLORS,
    CATEGORIES,
    AttributeRecord,
    ParseOutcome,
    Vocabulary,
    VocabularyError,
    canonical_tags,
    default_vocabulary,
    load_vocabulary,
    parse_strict,
    serialize_compact,
)

VOCAB = default_vocabulary()

EXAMPLE = AttributeRecord(
    category="top",
    primary_color="navy",
    material="cotton",
    style_tags=("classic",),
    occasion_tags=("everyday",),
)
EXAMPLE_WIRE = (
    '{"category":"top","primary_color":"navy","material":"cotton",'
    '"style_tags":["classic"],"occasion_tags":["everyday"]}'
)


def records(vocab: Vocabulary = VOCAB):
    """Strategy over invariant-satisfying records."""
    material = st.one_of(
        st.sampled_from(vocab.materials),
        st.text(alphabet="abcdefghijklmnopqrstuvwxyz -", min_size=1, max_size=12).map(
            lambda s: s.strip() or "x"
        ),
    )
    tags = lambda pool, min_size: st.lists(
        st.sampled_from(pool), min_size=min_size, max_size=4, unique=True
    ).map(canonical_tags)
    return st.builds(
        AttributeRecord,
        category=st.sampled_from(vocab.categories),
        primary_color=st.sampled_from(vocab.colors),
        material=material,
        style_tags=tags(vocab.style_tags, 0),
        occasion_tags=tags(vocab.occasion_tags, 1),
    )


def whitespace_outside_strings(serialized: str) -> str:
    """Characters of a JSON document that sit outside string literals."""
    outside = []
    in_string = False
    escaped = False
    for ch in serialized:
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        else:
            if ch == '"':
                in_string = True
            else:
                outside.append(ch)
    return "".join(c for c in outside if c in " \t\n\r")


class TestSerializeCompact:
    def test_known_example(self):
        assert serialize_compact(EXAMPLE) == EXAMPLE_WIRE

    def test_empty_style_tags_have_no_inner_space(self):
        record = AttributeRecord("dress", "red", "silk", (), ("party",))
        assert '"style_tags":[]' in serialize_compact(record)

    def test_equal_records_serialize_identically(self):
        twin = AttributeRecord("top", "navy", "cotton", ("classic",), ("everyday",))
        assert serialize_compact(EXAMPLE) == serialize_compact(twin)

    @given(records())
    def test_no_whitespace_outside_strings(self, record):
        assert whitespace_outside_strings(serialize_compact(record)) == ""

    @given(records())
    def test_roundtrip(self, record):
        report = parse_strict(serialize_compact(record), VOCAB, mode="schema_only")
        assert report.outcome is ParseOutcome.VALID
        assert report.record == record


class TestParseStrict:
    def test_valid_example(self):
        report = parse_strict(EXAMPLE_WIRE, VOCAB)
        assert report.outcome is ParseOutcome.VALID
        assert report.record == EXAMPLE

    def test_missing_fields(self):
        report = parse_strict('{"category":"top"}', VOCAB)
        assert report.outcome is ParseOutcome.MISSING_FIELD
        assert "primary_color" in report.detail
        assert report.record is None

    def test_wrong_type_style_tags(self):
        text = EXAMPLE_WIRE.replace('["classic"]', '"classic"')
        report = parse_strict(text, VOCAB)
        assert report.outcome is ParseOutcome.WRONG_TYPE
        assert "style_tags" in report.detail

    def test_free_text_caption(self):
        report = parse_strict("A navy cotton shirt.", VOCAB)
        assert report.outcome is ParseOutcome.INVALID_JSON

    def test_extra_keys_ignored(self):
        text = EXAMPLE_WIRE[:-1] + ',"confidence":0.93}'
        report = parse_strict(text, VOCAB)
        assert report.outcome is ParseOutcome.VALID
        assert report.record == EXAMPLE

    def test_tags_deduplicated_and_sorted(self):
        text = EXAMPLE_WIRE.replace('["classic"]', '["workwear","classic","classic"]')
        report = parse_strict(text, VOCAB)
        assert report.record.style_tags == ("classic", "workwear")

    def test_vocabulary_violation_keeps_record(self):
        text = EXAMPLE_WIRE.replace('"navy"', '"turquoise"')
        report = parse_strict(text, VOCAB, mode="vocabulary_checked")
        assert report.outcome is ParseOutcome.VOCABULARY_VIOLATION
        assert report.record is not None
        assert report.record.primary_color == "turquoise"
        # schema_only mode does not look at vocabularies
        assert parse_strict(text, VOCAB, mode="schema_only").outcome is ParseOutcome.VALID

    def test_accepts_bytes(self):
        report = parse_strict(EXAMPLE_WIRE.encode("utf-8"), VOCAB)
        assert report.outcome is ParseOutcome.VALID

    def test_non_utf8_bytes(self):
        report = parse_strict(b"\xff\xfe\x00", VOCAB)
        assert report.outcome is ParseOutcome.INVALID_JSON

    @given(st.text(max_size=300))
    @settings(max_examples=200)
    def test_total_over_text(self, text):
        report = parse_strict(text, VOCAB)
        assert report.outcome in ParseOutcome

    @given(st.binary(max_size=300))
    def test_total_over_bytes(self, blob):
        report = parse_strict(blob, VOCAB)
        assert report.outcome in ParseOutcome


def load_corpus():
    path = Path(__file__).parent / "data" / "malformed_corpus.jsonl"
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


CORPUS = load_corpus()


def test_corpus_has_thirty_cases():
    assert len(CORPUS) == 30


@pytest.mark.parametrize("case", CORPUS, ids=lambda c: c["name"])
def test_malformed_corpus_case(case):
    report = parse_strict(case["text"], VOCAB, mode=case["mode"])
    assert report.outcome.value == case["expected"]


class TestVocabulary:
    def test_default_counts(self):
        assert len(VOCAB.categories) == 6
        assert len(VOCAB.colors) == 16
        assert len(VOCAB.style_tags) == 19
        assert len(VOCAB.occasion_tags) == 15
        assert "everyday" in VOCAB.occasion_tags
        assert "unknown" in VOCAB.colors
        assert VOCAB.checksum

    def test_fixed_category_and_color_sets(self):
        assert VOCAB.categories == CATEGORIES
        assert VOCAB.colors == COLORS

    def test_rejects_wrong_style_count(self):
        doc = {
            "categories": list(CATEGORIES),
            "colors": list(COLORS),
            "materials": ["cotton"],
            "style_tags": ["classic"],
            "occasion_tags": ["everyday"] + [f"o{i}" for i in range(14)],
        }
        with pytest.raises(VocabularyError):
            load_vocabulary(json.dumps(doc).encode())

    def test_rejects_uppercase_entries(self):
        doc = {
            "categories": list(CATEGORIES),
            "colors": list(COLORS),
            "materials": ["Cotton"],
            "style_tags": list(VOCAB.style_tags),
            "occasion_tags": list(VOCAB.occasion_tags),
        }
        with pytest.raises(VocabularyError):
            load_vocabulary(json.dumps(doc).encode())

    def test_rejects_missing_everyday(self):
        occasions = [o for o in VOCAB.occasion_tags if o != "everyday"] + ["brunch"]
        doc = {
            "categories": list(CATEGORIES),
            "colors": list(COLORS),
            "materials": ["cotton"],
            "style_tags": list(VOCAB.style_tags),
            "occasion_tags": occasions,
        }
        with pytest.raises(VocabularyError):
            load_vocabulary(json.dumps(doc).encode())


def generate_random_records(n: int, seed: int = 99) -> list[AttributeRecord]:
    """Seeded record generator for fixed-count round-trip checks."""
    rng = SplitMix64(seed)
    vocab = VOCAB
    out = []
    for _ in range(n):
        style = canonical_tags(
            vocab.style_tags[rng.randbelow(19)] for _ in range(rng.randbelow(4))
        )
        occasion = canonical_tags(
            vocab.occasion_tags[rng.randbelow(15)] for _ in range(1 + rng.randbelow(3))
        )
        out.append(
            AttributeRecord(
                category=vocab.categories[rng.randbelow(6)],
                primary_color=vocab.colors[rng.randbelow(16)],
                material=vocab.materials[rng.randbelow(len(vocab.materials))],
                style_tags=style,
                occasion_tags=occasion,
            )
        )
    return out
