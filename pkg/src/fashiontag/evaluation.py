"""Scoring of model outputs against gold records.

Metrics follow the harness conventions used throughout the repo: validity is
"parses as a JSON object with all five fields present and correctly typed";
accuracies and mean set-F1s are computed over valid-output samples only (the
report carries ``n_total`` alongside so an all-samples variant can always be
derived); per-category accuracy rows get exact Clopper-Pearson confidence
intervals.

Scoring is embarrassingly parallel: :func:`tally` produces an associative,
commutative partial aggregate and :func:`merge_tallies` combines them.  F1
sums use ``math.fsum``, so aggregation is exactly permutation-invariant.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from scipy.stats import beta as _beta

from .schema import (
    CATEGORIES,
    AttributeRecord,
    ParseOutcome,
    Vocabulary,
    parse_strict,
)


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class EvalSample:
    item_id: str
    prediction_text: str
    gold: AttributeRecord

    def __post_init__(self) -> None:
        if not self.item_id:
            raise EvaluationError("item_id must be nonempty")


@dataclass(frozen=True)
class SampleScore:
    """Per-sample outcomes; the optional fields are None iff the output was invalid.

    Baseline scoring leaves ``material_correct``/``color_correct`` as None
    even for valid samples (those fields are not part of the tag-default
    comparison); the aggregator skips None entries per field.
    """

    json_valid: bool
    gold_category: str
    category_correct: Optional[bool] = None
    material_correct: Optional[bool] = None
    color_correct: Optional[bool] = None
    style_f1: Optional[float] = None
    occasion_f1: Optional[float] = None


def set_f1(predicted: Iterable[str], gold: Iterable[str]) -> float:
    """Harmonic-mean overlap between two tag sets: 2|P∩G| / (|P|+|G|).

    Two empty sets agree perfectly (1.0); exactly one empty set scores 0.0.
    """
    p, g = set(predicted), set(gold)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    return 2.0 * len(p & g) / (len(p) + len(g))


def _ci_eq(a: str, b: str) -> bool:
    return a.strip().lower() == b.strip().lower()


def _canon_tag_set(tags: Iterable[str]) -> set[str]:
    return {t.strip().lower() for t in tags}


def score_sample(sample: EvalSample, vocab: Vocabulary) -> SampleScore:
    """Score one prediction: validity, field matches, tag F1s.

    Validity uses schema-only parsing (vocabulary membership is not part of
    the validity definition).  Scalar fields compare case-insensitively with
    whitespace trimmed; tags are canonicalized the same way before set F1.
    """
    report = parse_strict(sample.prediction_text, vocab, mode="schema_only")
    gold = sample.gold
    if report.outcome is not ParseOutcome.VALID:
        return SampleScore(json_valid=False, gold_category=gold.category)
    predicted = report.record
    return SampleScore(
        json_valid=True,
        gold_category=gold.category,
        category_correct=_ci_eq(predicted.category, gold.category),
        material_correct=_ci_eq(predicted.material, gold.material),
        color_correct=_ci_eq(predicted.primary_color, gold.primary_color),
        style_f1=set_f1(_canon_tag_set(predicted.style_tags), _canon_tag_set(gold.style_tags)),
        occasion_f1=set_f1(
            _canon_tag_set(predicted.occasion_tags), _canon_tag_set(gold.occasion_tags)
        ),
    )


# -- exact binomial confidence interval --------------------------------------

def clopper_pearson(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact (Clopper-Pearson) binomial confidence interval for k/n.

    Bounds invert the binomial tails via the regularized incomplete beta
    function (scipy's beta quantile), equivalent to bisection on the binomial
    CDF and far tighter than the 1e-9 tolerance the contract requires.
    Boundary cases are exact: k=0 pins low to 0.0 and k=n pins high to 1.0.
    """
    if n < 1:
        raise EvaluationError("n must be >= 1")
    if not 0 <= k <= n:
        raise EvaluationError(f"k must be in [0, n], got k={k}, n={n}")
    if not 0.0 < confidence < 1.0:
        raise EvaluationError("confidence must be strictly between 0 and 1")
    alpha = 1.0 - confidence
    low = 0.0 if k == 0 else float(_beta.ppf(alpha / 2.0, k, n - k + 1))
    high = 1.0 if k == n else float(_beta.ppf(1.0 - alpha / 2.0, k + 1, n - k))
    return low, high


# -- aggregation --------------------------------------------------------------

@dataclass
class _FieldCount:
    n: int = 0
    correct: int = 0

    def add(self, flag: Optional[bool]) -> None:
        if flag is not None:
            self.n += 1
            self.correct += int(flag)

    def merge(self, other: "_FieldCount") -> "_FieldCount":
        return _FieldCount(self.n + other.n, self.correct + other.correct)

    def rate(self) -> Optional[float]:
        return self.correct / self.n if self.n else None


@dataclass
class _CategoryTally:
    n: int = 0
    category: _FieldCount = field(default_factory=_FieldCount)
    material: _FieldCount = field(default_factory=_FieldCount)

    def merge(self, other: "_CategoryTally") -> "_CategoryTally":
        return _CategoryTally(
            n=self.n + other.n,
            category=self.category.merge(other.category),
            material=self.material.merge(other.material),
        )


@dataclass
class PartialTally:
    """Associative, commutative partial aggregate of sample scores.

    F1 values are kept as lists and reduced with ``math.fsum`` at finalize
    time, which makes the final means independent of accumulation order.
    """

    n_total: int = 0
    n_valid: int = 0
    category: _FieldCount = field(default_factory=_FieldCount)
    material: _FieldCount = field(default_factory=_FieldCount)
    color: _FieldCount = field(default_factory=_FieldCount)
    style_f1s: list[float] = field(default_factory=list)
    occasion_f1s: list[float] = field(default_factory=list)
    per_category: dict[str, _CategoryTally] = field(default_factory=dict)

    def add(self, score: SampleScore) -> None:
        self.n_total += 1
        if not score.json_valid:
            return
        self.n_valid += 1
        self.category.add(score.category_correct)
        self.material.add(score.material_correct)
        self.color.add(score.color_correct)
        if score.style_f1 is not None:
            self.style_f1s.append(score.style_f1)
        if score.occasion_f1 is not None:
            self.occasion_f1s.append(score.occasion_f1)
        bucket = self.per_category.setdefault(score.gold_category, _CategoryTally())
        bucket.n += 1
        bucket.category.add(score.category_correct)
        bucket.material.add(score.material_correct)


def tally(scores: Iterable[SampleScore]) -> PartialTally:
    out = PartialTally()
    for score in scores:
        out.add(score)
    return out


def merge_tallies(a: PartialTally, b: PartialTally) -> PartialTally:
    merged = PartialTally(
        n_total=a.n_total + b.n_total,
        n_valid=a.n_valid + b.n_valid,
        category=a.category.merge(b.category),
        material=a.material.merge(b.material),
        color=a.color.merge(b.color),
        style_f1s=a.style_f1s + b.style_f1s,
        occasion_f1s=a.occasion_f1s + b.occasion_f1s,
    )
    for key in set(a.per_category) | set(b.per_category):
        left = a.per_category.get(key, _CategoryTally())
        right = b.per_category.get(key, _CategoryTally())
        merged.per_category[key] = left.merge(right)
    return merged


@dataclass(frozen=True)
class CategoryRow:
    category: str
    n: int
    category_acc: float
    material_acc: Optional[float]
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class MetricsReport:
    n_total: int
    n_valid: int
    validity_rate: float
    category_acc: float
    material_acc: Optional[float]
    color_acc: Optional[float]
    style_f1_mean: float
    occasion_f1_mean: float
    category_ci_low: float
    category_ci_high: float
    confidence: float
    per_category: tuple[CategoryRow, ...]


def finalize(partial: PartialTally, confidence: float = 0.95) -> MetricsReport:
    """Reduce a partial tally into a metrics report."""
    if partial.n_total == 0:
        raise EvaluationError("cannot aggregate zero samples")
    if partial.n_valid == 0:
        raise EvaluationError("no valid samples: accuracies are undefined")

    order = {cat: i for i, cat in enumerate(CATEGORIES)}
    rows = []
    for cat, bucket in partial.per_category.items():
        ci_low, ci_high = clopper_pearson(bucket.category.correct, bucket.n, confidence)
        rows.append(
            CategoryRow(
                category=cat,
                n=bucket.n,
                category_acc=bucket.category.correct / bucket.n,
                material_acc=bucket.material.rate(),
                ci_low=ci_low,
                ci_high=ci_high,
            )
        )
    rows.sort(key=lambda row: (-row.n, order.get(row.category, len(order))))

    overall_low, overall_high = clopper_pearson(
        partial.category.correct, partial.n_valid, confidence
    )
    return MetricsReport(
        n_total=partial.n_total,
        n_valid=partial.n_valid,
        validity_rate=partial.n_valid / partial.n_total,
        category_acc=partial.category.correct / partial.n_valid,
        material_acc=partial.material.rate(),
        color_acc=partial.color.rate(),
        style_f1_mean=math.fsum(partial.style_f1s) / len(partial.style_f1s)
        if partial.style_f1s
        else 0.0,
        occasion_f1_mean=math.fsum(partial.occasion_f1s) / len(partial.occasion_f1s)
        if partial.occasion_f1s
        else 0.0,
        category_ci_low=overall_low,
        category_ci_high=overall_high,
        confidence=confidence,
        per_category=tuple(rows),
    )


def aggregate(scores: Sequence[SampleScore], confidence: float = 0.95) -> MetricsReport:
    """Score list -> metrics report (tally + finalize in one step)."""
    if not scores:
        raise EvaluationError("cannot aggregate zero samples")
    return finalize(tally(scores), confidence)


def evaluate(
    samples: Sequence[EvalSample], vocab: Vocabulary, confidence: float = 0.95
) -> MetricsReport:
    return aggregate([score_sample(s, vocab) for s in samples], confidence)


def _r6(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(value, 6)


REPORT_SCHEMA = "attribute-eval-report/v1"


def report_to_json(report: MetricsReport) -> str:
    """Canonical JSON rendering of a report.

    Fixed key order, floats rounded to six decimals, two-space indent, and a
    trailing newline: two reports computed from the same scores serialize to
    identical bytes.
    """
    payload = {
        "schema": REPORT_SCHEMA,
        "confidence": _r6(report.confidence),
        "n_total": report.n_total,
        "n_valid": report.n_valid,
        "validity_rate": _r6(report.validity_rate),
        "category_acc": _r6(report.category_acc),
        "material_acc": _r6(report.material_acc),
        "color_acc": _r6(report.color_acc),
        "style_f1_mean": _r6(report.style_f1_mean),
        "occasion_f1_mean": _r6(report.occasion_f1_mean),
        "category_ci_low": _r6(report.category_ci_low),
        "category_ci_high": _r6(report.category_ci_high),
        "per_category": [
            {
                "category": row.category,
                "n": row.n,
                "category_acc": _r6(row.category_acc),
                "material_acc": _r6(row.material_acc),
                "ci_low": _r6(row.ci_low),
                "ci_high": _r6(row.ci_high),
            }
            for row in report.per_category
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def report_from_json(text: str) -> MetricsReport:
    payload = json.loads(text)
    if payload.get("schema") != REPORT_SCHEMA:
        raise EvaluationError(f"unrecognized report schema: {payload.get('schema')!r}")
    return MetricsReport(
        n_total=payload["n_total"],
        n_valid=payload["n_valid"],
        validity_rate=payload["validity_rate"],
        category_acc=payload["category_acc"],
        material_acc=payload["material_acc"],
        color_acc=payload["color_acc"],
        style_f1_mean=payload["style_f1_mean"],
        occasion_f1_mean=payload["occasion_f1_mean"],
        category_ci_low=payload["category_ci_low"],
        category_ci_high=payload["category_ci_high"],
        confidence=payload["confidence"],
        per_category=tuple(
            CategoryRow(
                category=row["category"],
                n=row["n"],
                category_acc=row["category_acc"],
                material_acc=row["material_acc"],
                ci_low=row["ci_low"],
                ci_high=row["ci_high"],
            )
            for row in payload["per_category"]
        ),
    )


# -- category-then-defaults baseline ------------------------------------------

@dataclass(frozen=True)
class CategoryDefaults:
    top_style: tuple[str, ...]
    top_occasion: tuple[str, ...]
    style_counts: dict[str, int]
    occasion_counts: dict[str, int]


@dataclass(frozen=True)
class DefaultTagTable:
    """Per-category most frequent tags from training statistics.

    Top-3 style and top-2 occasion tags, ordered by descending frequency
    with ascending lexicographic tie-break; raw counts are retained for
    audit.  Categories unseen in training have empty lists.
    """

    per_category: dict[str, CategoryDefaults]

    def defaults_for(self, category: str) -> CategoryDefaults:
        return self.per_category.get(
            category, CategoryDefaults((), (), {}, {})
        )


def _top_tags(counts: Counter, k: int) -> tuple[str, ...]:
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return tuple(tag for tag, _ in ranked[:k])


def build_default_table(train_records: Sequence[AttributeRecord]) -> DefaultTagTable:
    """Tag frequency table over training records, reduced to per-category defaults."""
    if not train_records:
        raise EvaluationError("cannot build a default-tag table from zero records")
    style_counts: dict[str, Counter] = {cat: Counter() for cat in CATEGORIES}
    occasion_counts: dict[str, Counter] = {cat: Counter() for cat in CATEGORIES}
    for record in train_records:
        style_counts.setdefault(record.category, Counter()).update(record.style_tags)
        occasion_counts.setdefault(record.category, Counter()).update(record.occasion_tags)
    table = {}
    for cat in style_counts:
        table[cat] = CategoryDefaults(
            top_style=_top_tags(style_counts[cat], 3),
            top_occasion=_top_tags(occasion_counts[cat], 2),
            style_counts=dict(style_counts[cat]),
            occasion_counts=dict(occasion_counts[cat]),
        )
    return DefaultTagTable(per_category=table)


def baseline_evaluate(
    samples: Sequence[EvalSample],
    categories: Sequence[Optional[str]],
    table: DefaultTagTable,
    confidence: float = 0.95,
) -> MetricsReport:
    """Score the category-then-defaults baseline.

    For each sample the given category (model-predicted, or gold for the
    oracle variant) selects the default tag lists, which stand in as the
    predicted tag sets.  A None category marks a sample whose prediction was
    unusable; it counts as invalid.  Material and color are not part of this
    comparison and stay None.
    """
    if len(samples) != len(categories):
        raise EvaluationError(
            f"got {len(samples)} samples but {len(categories)} categories"
        )
    scores = []
    for sample, category in zip(samples, categories):
        if category is None:
            scores.append(SampleScore(json_valid=False, gold_category=sample.gold.category))
            continue
        defaults = table.defaults_for(category.strip().lower())
        scores.append(
            SampleScore(
                json_valid=True,
                gold_category=sample.gold.category,
                category_correct=_ci_eq(category, sample.gold.category),
                style_f1=set_f1(
                    _canon_tag_set(defaults.top_style), _canon_tag_set(sample.gold.style_tags)
                ),
                occasion_f1=set_f1(
                    _canon_tag_set(defaults.top_occasion),
                    _canon_tag_set(sample.gold.occasion_tags),
                ),
            )
        )
    return aggregate(scores, confidence)
