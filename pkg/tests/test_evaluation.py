"""Metric, interval, aggregation, and baseline behavior."""

import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fashiontag.evaluation import (
    DefaultTagTable,
    EvalSample,
    EvaluationError,
    SampleScore,
    aggregate,
    baseline_evaluate,
    build_default_table,
    clopper_pearson,
    finalize,
    merge_tallies,
    report_from_json,
    report_to_json,
    score_sample,
    set_f1,
    tally,
)
from fashiontag.schema import AttributeRecord, default_vocabulary, serialize_compact

from oracles import clopper_pearson_bisect, f1_precision_recall

VOCAB = default_vocabulary()


def record(category="top", color="navy", material="cotton", style=("classic",), occasion=("everyday",)):
    return AttributeRecord(category, color, material, tuple(style), tuple(occasion))


class TestSetF1:
    def test_identity(self):
        assert set_f1({"classic", "workwear"}, {"classic", "workwear"}) == 1.0

    def test_partial_overlap(self):
        assert set_f1({"classic", "workwear"}, {"classic"}) == pytest.approx(2 / 3)

    def test_both_empty(self):
        assert set_f1(set(), set()) == 1.0

    def test_one_empty(self):
        assert set_f1(set(), {"classic"}) == 0.0
        assert set_f1({"classic"}, set()) == 0.0

    def test_exhaustive_against_precision_recall_oracle(self):
        universe = ("a", "b", "c", "d")
        subsets = [
            frozenset(tags)
            for r in range(5)
            for tags in itertools.combinations(universe, r)
        ]
        assert len(subsets) == 16
        pairs = 0
        for predicted in subsets:
            for gold in subsets:
                assert set_f1(predicted, gold) == f1_precision_recall(set(predicted), set(gold))
                pairs += 1
        assert pairs == 256

    @given(
        st.frozensets(st.sampled_from("abcdef"), max_size=6),
        st.frozensets(st.sampled_from("abcdef"), max_size=6),
    )
    def test_symmetric_and_equality_iff_equal(self, p, g):
        assert set_f1(p, g) == set_f1(g, p)
        assert (set_f1(p, g) == 1.0) == (p == g)


class TestClopperPearson:
    def test_reference_interval(self):
        low, high = clopper_pearson(4, 5, 0.95)
        assert round(low, 3) == 0.284
        assert round(high, 3) == 0.995

    def test_boundaries_exact(self):
        assert clopper_pearson(0, 10)[0] == 0.0
        assert clopper_pearson(10, 10)[1] == 1.0

    def test_matches_bisection_oracle(self):
        low, high = clopper_pearson(5, 10, 0.95)
        olow, ohigh = clopper_pearson_bisect(5, 10, 0.95)
        assert abs(low - olow) < 1e-6
        assert abs(high - ohigh) < 1e-6

    def test_invalid_inputs(self):
        with pytest.raises(EvaluationError):
            clopper_pearson(5, 0)
        with pytest.raises(EvaluationError):
            clopper_pearson(6, 5)
        with pytest.raises(EvaluationError):
            clopper_pearson(1, 5, confidence=1.0)

    def test_monotone_in_k(self):
        bounds = [clopper_pearson(k, 25) for k in range(26)]
        for (lo_a, hi_a), (lo_b, hi_b) in zip(bounds, bounds[1:]):
            assert lo_b >= lo_a
            assert hi_b >= hi_a

    def test_width_shrinks_with_n(self):
        widths = []
        for n in (10, 100, 1000):
            k = int(n * 0.6)
            low, high = clopper_pearson(k, n)
            widths.append(high - low)
        assert widths[0] > widths[1] > widths[2]


class TestScoreSample:
    def test_identity_prediction(self):
        gold = record()
        sample = EvalSample("s1", serialize_compact(gold), gold)
        score = score_sample(sample, VOCAB)
        assert score.json_valid
        assert score.category_correct and score.material_correct and score.color_correct
        assert score.style_f1 == 1.0 and score.occasion_f1 == 1.0

    def test_invalid_output(self):
        score = score_sample(EvalSample("s2", "not json", record()), VOCAB)
        assert not score.json_valid
        assert score.category_correct is None
        assert score.style_f1 is None
        assert score.gold_category == "top"

    def test_material_case_insensitive(self):
        gold = record(material="cotton")
        text = serialize_compact(record(material="Cotton"))
        score = score_sample(EvalSample("s3", text, gold), VOCAB)
        assert score.material_correct

    def test_out_of_vocabulary_values_still_valid(self):
        # Validity is schema-only; a made-up tag still scores, just poorly.
        gold = record(style=("classic",))
        text = serialize_compact(record(style=("futuristic",)))
        score = score_sample(EvalSample("s4", text, gold), VOCAB)
        assert score.json_valid
        assert score.style_f1 == 0.0


def make_scores(n_valid: int, n_invalid: int, seed: int = 5) -> list[SampleScore]:
    rng = random.Random(seed)
    categories = ["top", "bottom", "dress", "layer", "shoes"]
    scores = []
    for i in range(n_valid):
        scores.append(
            SampleScore(
                json_valid=True,
                gold_category=categories[i % len(categories)],
                category_correct=rng.random() < 0.9,
                material_correct=rng.random() < 0.6,
                color_correct=rng.random() < 0.2,
                style_f1=rng.choice([0.0, 0.5, 2 / 3, 0.8, 1.0]),
                occasion_f1=rng.choice([0.0, 0.5, 1.0]),
            )
        )
    for i in range(n_invalid):
        scores.append(
            SampleScore(json_valid=False, gold_category=categories[i % len(categories)])
        )
    return scores


class TestAggregate:
    def test_validity_rate_460_of_461(self):
        report = aggregate(make_scores(460, 1))
        assert report.n_total == 461 and report.n_valid == 460
        assert round(report.validity_rate, 3) == 0.998

    def test_all_valid_all_correct(self):
        scores = [
            SampleScore(True, "top", True, True, True, 1.0, 1.0) for _ in range(12)
        ]
        report = aggregate(scores)
        assert report.validity_rate == 1.0
        assert report.category_acc == 1.0
        assert report.material_acc == 1.0
        assert report.style_f1_mean == 1.0
        assert report.occasion_f1_mean == 1.0

    def test_empty_rejected(self):
        with pytest.raises(EvaluationError):
            aggregate([])

    def test_no_valid_samples_rejected(self):
        with pytest.raises(EvaluationError, match="no valid samples"):
            aggregate([SampleScore(False, "top")] * 3)

    def test_per_category_ns_sum_to_n_valid(self):
        report = aggregate(make_scores(97, 4))
        assert sum(row.n for row in report.per_category) == report.n_valid

    def test_fractions_in_unit_interval(self):
        report = aggregate(make_scores(83, 7))
        values = [
            report.validity_rate, report.category_acc, report.material_acc,
            report.color_acc, report.style_f1_mean, report.occasion_f1_mean,
        ]
        assert all(0.0 <= v <= 1.0 for v in values)
        assert report.validity_rate * report.n_total == pytest.approx(report.n_valid)

    def test_permutation_invariance_is_exact(self):
        scores = make_scores(150, 6)
        shuffled = scores[:]
        random.Random(0).shuffle(shuffled)
        assert aggregate(scores) == aggregate(shuffled)

    def test_merge_matches_whole(self):
        scores = make_scores(120, 5)
        whole = finalize(tally(scores))
        halves = finalize(merge_tallies(tally(scores[:60]), tally(scores[60:])))
        assert whole == halves

    def test_merge_is_commutative(self):
        scores = make_scores(40, 2)
        a, b = tally(scores[:13]), tally(scores[13:])
        assert finalize(merge_tallies(a, b)) == finalize(merge_tallies(b, a))


class TestReportJson:
    def test_byte_stable(self):
        scores = make_scores(50, 3)
        assert report_to_json(aggregate(scores)) == report_to_json(aggregate(scores))

    def test_roundtrip(self):
        report = aggregate(make_scores(50, 3))
        text = report_to_json(report)
        parsed = report_from_json(text)
        assert parsed.n_total == report.n_total
        assert parsed.per_category[0].category == report.per_category[0].category
        # serialized floats are 6-decimal roundings of the originals
        assert parsed.category_acc == round(report.category_acc, 6)


def toy_training_records() -> list[AttributeRecord]:
    """20 records with hand-countable tag frequencies.

    dress (8): 5x {glamorous,sexy}/{night-out,party}, 2x {elegant}/{formal},
               1x {bohemian,elegant}/{festival}
    top (7):   4x {casual}/{everyday}, 2x {classic,workwear}/{work},
               1x {casual,classic}/{everyday}
    bottom (3): 2x {casual}/{everyday}, 1x {sporty,streetwear}/{gym,workout}
    layer (2): 2x {classic,workwear}/{work}
    """
    rows = []
    rows += [record("dress", style=("glamorous", "sexy"), occasion=("night-out", "party"))] * 5
    rows += [record("dress", style=("elegant",), occasion=("formal",))] * 2
    rows += [record("dress", style=("bohemian", "elegant"), occasion=("festival",))]
    rows += [record("top", style=("casual",), occasion=("everyday",))] * 4
    rows += [record("top", style=("classic", "workwear"), occasion=("work",))] * 2
    rows += [record("top", style=("casual", "classic"), occasion=("everyday",))]
    rows += [record("bottom", style=("casual",), occasion=("everyday",))] * 2
    rows += [record("bottom", style=("sporty", "streetwear"), occasion=("gym", "workout"))]
    rows += [record("layer", style=("classic", "workwear"), occasion=("work",))] * 2
    assert len(rows) == 20
    return rows


class TestDefaultTagTable:
    def test_hand_computed_oracle(self):
        table = build_default_table(toy_training_records())
        # Hand counts: dress style glamorous=5 sexy=5 elegant=3 bohemian=1;
        # occasion night-out=5 party=5 formal=2 festival=1.
        assert table.defaults_for("dress").top_style == ("glamorous", "sexy", "elegant")
        assert table.defaults_for("dress").top_occasion == ("night-out", "party")
        # top: casual=5 classic=3 workwear=2; everyday=5 work=2.
        assert table.defaults_for("top").top_style == ("casual", "classic", "workwear")
        assert table.defaults_for("top").top_occasion == ("everyday", "work")
        # bottom: casual=2 then sporty=1/streetwear=1 broken lexicographically.
        assert table.defaults_for("bottom").top_style == ("casual", "sporty", "streetwear")
        assert table.defaults_for("bottom").top_occasion == ("everyday", "gym")
        assert table.defaults_for("layer").top_style == ("classic", "workwear")
        assert table.defaults_for("layer").top_occasion == ("work",)

    def test_lexicographic_tie_break(self):
        # All frequencies equal: pure lexicographic order decides.
        rows = [
            record("dress", style=("glamorous", "sexy")),
            record("dress", style=("classic",)),
            record("top", style=("classic",)),
        ]
        table = build_default_table(rows)
        assert table.defaults_for("dress").top_style == ("classic", "glamorous", "sexy")

    def test_single_record(self):
        table = build_default_table([record("top", style=("edgy",))])
        assert table.defaults_for("top").top_style == ("edgy",)

    def test_absent_category_empty(self):
        table = build_default_table([record("top")])
        assert table.defaults_for("shoes").top_style == ()
        assert table.defaults_for("shoes").top_occasion == ()

    def test_counts_retained_for_audit(self):
        table = build_default_table(toy_training_records())
        assert table.defaults_for("dress").style_counts["glamorous"] == 5

    def test_empty_rejected(self):
        with pytest.raises(EvaluationError):
            build_default_table([])


def baseline_fixture():
    """10 samples with hand-computed baseline F1s against the toy table.

    With oracle (gold) categories the per-sample style F1s are
    0.8, 0.5, 0.5, 0.8, 0.8, 1.0, 0.0, 0.8, 0.0, 0.5 (mean 0.57) and the
    occasion F1s 2/3, 0, 2/3, 2/3, 0.5, 1.0, 0, 2/3, 0, 2/3 (mean 29/60).
    """
    gold = [
        record("dress", style=("glamorous", "sexy"), occasion=("party",)),
        record("dress", style=("elegant",), occasion=("formal",)),
        record("top", style=("casual",), occasion=("everyday",)),
        record("top", style=("classic", "workwear"), occasion=("work",)),
        record("bottom", style=("sporty", "streetwear"), occasion=("gym", "workout")),
        record("layer", style=("classic", "workwear"), occasion=("work",)),
        record("dress", style=("bohemian",), occasion=("festival",)),
        record("top", style=("casual", "classic"), occasion=("everyday",)),
        record("shoes", style=("sporty",), occasion=("everyday",)),
        record("bottom", style=("casual",), occasion=("everyday",)),
    ]
    samples = [
        EvalSample(f"b{i}", serialize_compact(g), g) for i, g in enumerate(gold)
    ]
    return samples


class TestBaselineEvaluate:
    def test_trivial_full_match(self):
        table = DefaultTagTable(
            per_category={
                "dress": build_default_table([record("dress", style=("classic",))]).defaults_for("dress")
            }
        )
        gold = record("dress", style=("classic",), occasion=("everyday",))
        sample = EvalSample("t", serialize_compact(gold), gold)
        report = baseline_evaluate([sample], ["dress"], table)
        assert report.style_f1_mean == 1.0

    def test_hand_computed_fixture(self):
        table = build_default_table(toy_training_records())
        samples = baseline_fixture()
        report = baseline_evaluate(samples, [s.gold.category for s in samples], table)
        assert report.n_valid == 10
        assert report.category_acc == 1.0  # oracle categories
        assert report.style_f1_mean == pytest.approx(0.57)
        assert report.occasion_f1_mean == pytest.approx(29 / 60)
        assert report.material_acc is None and report.color_acc is None

    def test_none_category_counts_invalid(self):
        table = build_default_table(toy_training_records())
        samples = baseline_fixture()
        categories = [s.gold.category for s in samples]
        categories[3] = None
        report = baseline_evaluate(samples, categories, table)
        assert report.n_valid == 9

    def test_misaligned_inputs_rejected(self):
        table = build_default_table(toy_training_records())
        with pytest.raises(EvaluationError):
            baseline_evaluate(baseline_fixture(), ["dress"], table)
