"""Rule-based collapse of fine-grained annotations into attribute records.

The rule set is a declarative JSON document (see ``data/label_rules.json``):

* ``category_map`` — ordered list of ``{pattern, whole_name, output}`` rules;
  first match wins, ``output: null`` marks a deliberate discard.
* ``color_map`` — total mapping from the source dataset's color labels onto
  the 16-color vocabulary (totality over ``source_colors`` is validated at
  load time).
* ``style_rules`` / ``occasion_rules`` — ``{pattern, whole_name, output}``
  with tag-list outputs; all matching rules contribute (union semantics).
  Style rules are matched against the fine category name and every style
  label; occasion rules against the fine category name only.
* ``occasion_default`` — emitted when no occasion rule matches.

Patterns are case-insensitive literal substrings, or exact names when
``whole_name`` is set.  No regular expressions: rules stay auditable.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .rng import shuffled
from .schema import (
    CATEGORIES,
    AttributeRecord,
    Vocabulary,
    canonical_tags,
    sha256_hex,
)


class RulesetError(ValueError):
    """A rules document failed structural or vocabulary validation."""


class EmptyDatasetError(ValueError):
    """An operation that needs at least one row received none."""


@dataclass(frozen=True)
class RawAnnotation:
    """One source-dataset row, already adapted to our column layout."""

    item_id: str
    image_ref: str
    fine_category: str
    color_label: Optional[str] = None
    material_label: Optional[str] = None
    style_labels: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "image_ref": self.image_ref,
            "fine_category": self.fine_category,
            "color_label": self.color_label,
            "material_label": self.material_label,
            "style_labels": list(self.style_labels),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RawAnnotation":
        return cls(
            item_id=str(payload["item_id"]),
            image_ref=str(payload.get("image_ref", "")),
            fine_category=str(payload["fine_category"]),
            color_label=payload.get("color_label"),
            material_label=payload.get("material_label"),
            style_labels=tuple(payload.get("style_labels") or ()),
        )


def adapt_source_row(row: dict) -> RawAnnotation:
    """Best-effort adapter from upstream column names to :class:`RawAnnotation`.

    Accepts the aliases commonly seen in fashion datasets exported to JSON
    (``id``/``item_id``, ``image``/``image_url``/``image_ref``,
    ``category``/``fine_category``, ``color``, ``material``, ``style``).
    """

    def pick(*names):
        for name in names:
            if name in row and row[name] not in (None, ""):
                return row[name]
        return None

    item_id = pick("item_id", "id", "item_ID")
    fine = pick("fine_category", "category", "category_name")
    if item_id is None or fine is None:
        raise RulesetError(f"source row lacks an id or category: {sorted(row)}")
    styles = pick("style_labels", "style", "styles") or ()
    if isinstance(styles, str):
        styles = (styles,)
    return RawAnnotation(
        item_id=str(item_id),
        image_ref=str(pick("image_ref", "image", "image_url") or ""),
        fine_category=str(fine),
        color_label=pick("color_label", "color"),
        material_label=pick("material_label", "material"),
        style_labels=tuple(str(s) for s in styles),
    )


@dataclass(frozen=True)
class CategoryRule:
    pattern: str
    whole_name: bool
    category: Optional[str]  # None marks a deliberate discard

    def matches(self, lowered_name: str) -> bool:
        if self.whole_name:
            return lowered_name == self.pattern
        return self.pattern in lowered_name


@dataclass(frozen=True)
class TagRule:
    pattern: str
    whole_name: bool
    tags: tuple[str, ...]

    def matches(self, lowered_name: str) -> bool:
        if self.whole_name:
            return lowered_name == self.pattern
        return self.pattern in lowered_name


@dataclass(frozen=True)
class RuleSet:
    category_map: tuple[CategoryRule, ...]
    source_colors: tuple[str, ...]
    color_map: dict[str, str]
    style_rules: tuple[TagRule, ...]
    occasion_rules: tuple[TagRule, ...]
    occasion_default: tuple[str, ...]
    version: str = "unversioned"
    checksum: Optional[str] = None


def _parse_rule(entry: dict, where: str) -> tuple[str, bool, object]:
    if not isinstance(entry, dict):
        raise RulesetError(f"{where}: rule must be an object")
    pattern = entry.get("pattern")
    if not isinstance(pattern, str) or not pattern.strip():
        raise RulesetError(f"{where}: pattern must be a nonempty string")
    whole = entry.get("whole_name", False)
    if not isinstance(whole, bool):
        raise RulesetError(f"{where}: whole_name must be a boolean")
    return pattern.strip().lower(), whole, entry.get("output")


def load_ruleset(document: Union[str, bytes], vocab: Vocabulary) -> RuleSet:
    """Parse and validate a rules document.

    Rejects tags outside the vocabulary, non-total color maps, and malformed
    rules; errors name the offending rule index.
    """
    raw = document.encode("utf-8") if isinstance(document, str) else bytes(document)
    checksum = sha256_hex(raw)
    try:
        doc = json.loads(raw)
    except ValueError as exc:
        raise RulesetError(f"rules document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise RulesetError("rules document must be a JSON object")

    category_entries = doc.get("category_map")
    if not isinstance(category_entries, list) or not category_entries:
        raise RulesetError("category_map is required and must be a nonempty array")
    category_map = []
    for i, entry in enumerate(category_entries):
        pattern, whole, output = _parse_rule(entry, f"category_map[{i}]")
        if output is not None and output not in vocab.category_set:
            raise RulesetError(f"category_map[{i}]: output {output!r} is not a category")
        category_map.append(CategoryRule(pattern, whole, output))

    source_colors = doc.get("source_colors")
    if not isinstance(source_colors, list) or not source_colors:
        raise RulesetError("source_colors is required and must be a nonempty array")
    source_colors = tuple(str(c).strip().lower() for c in source_colors)

    color_entries = doc.get("color_map")
    if not isinstance(color_entries, dict):
        raise RulesetError("color_map is required and must be an object")
    color_map = {str(k).strip().lower(): v for k, v in color_entries.items()}
    for src in source_colors:
        if src not in color_map:
            raise RulesetError(f"color_map is not total: source color {src!r} unmapped")
    for src, dst in color_map.items():
        if dst not in vocab.color_set:
            raise RulesetError(f"color_map[{src!r}]: {dst!r} is not one of the 16 colors")

    def parse_tag_rules(key: str, allowed: frozenset[str]) -> tuple[TagRule, ...]:
        entries = doc.get(key)
        if not isinstance(entries, list):
            raise RulesetError(f"{key} is required and must be an array")
        rules = []
        for i, entry in enumerate(entries):
            pattern, whole, output = _parse_rule(entry, f"{key}[{i}]")
            if not isinstance(output, list) or not output:
                raise RulesetError(f"{key}[{i}]: output must be a nonempty tag array")
            for tag in output:
                if tag not in allowed:
                    raise RulesetError(f"{key}[{i}]: tag {tag!r} not in vocabulary")
            rules.append(TagRule(pattern, whole, canonical_tags(output)))
        return tuple(rules)

    style_rules = parse_tag_rules("style_rules", vocab.style_set)
    occasion_rules = parse_tag_rules("occasion_rules", vocab.occasion_set)

    default = doc.get("occasion_default")
    if default != ["everyday"]:
        raise RulesetError("occasion_default must be exactly [\"everyday\"]")

    return RuleSet(
        category_map=tuple(category_map),
        source_colors=source_colors,
        color_map=color_map,
        style_rules=style_rules,
        occasion_rules=occasion_rules,
        occasion_default=("everyday",),
        version=str(doc.get("version", "unversioned")),
        checksum=checksum,
    )


def load_ruleset_file(path: Union[str, Path], vocab: Vocabulary) -> RuleSet:
    return load_ruleset(Path(path).read_bytes(), vocab)


def default_ruleset(vocab: Vocabulary) -> RuleSet:
    """The rules file shipped with the package."""
    from importlib import resources

    raw = resources.files("fashiontag").joinpath("data/label_rules.json").read_bytes()
    return load_ruleset(raw, vocab)


# -- rule application -------------------------------------------------------

def category_match(fine_category: str, rules: RuleSet) -> tuple[str, Optional[str]]:
    """First-match category lookup with coverage information.

    Returns ``("mapped", category)``, ``("discarded", None)`` for an explicit
    discard rule, or ``("uncovered", None)`` when no rule matches at all.
    The distinction feeds the ingestion audit; deliberate discards are fine,
    uncovered names are a rules-file gap.
    """
    lowered = fine_category.strip().lower()
    for rule in rules.category_map:
        if rule.matches(lowered):
            if rule.category is None:
                return "discarded", None
            return "mapped", rule.category
    return "uncovered", None


def map_category(fine_category: str, rules: RuleSet) -> Optional[str]:
    """Coarse category for a fine name, or None (discard rule or no match)."""
    return category_match(fine_category, rules)[1]


def map_color(color_label: Optional[str], rules: RuleSet) -> str:
    """Target color for a source label; missing or unmapped labels are unknown."""
    if color_label is None:
        return "unknown"
    return rules.color_map.get(color_label.strip().lower(), "unknown")


def derive_tags(
    fine_category: str,
    style_labels: Sequence[str],
    rules: RuleSet,
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Union of matching style and occasion rules, canonicalized.

    Style rules see the fine category name and each style label; occasion
    rules see the fine category name only.  An empty occasion union falls
    back to the default tag list.
    """
    names = [fine_category.strip().lower()]
    names.extend(label.strip().lower() for label in style_labels)

    style: set[str] = set()
    for rule in rules.style_rules:
        if any(rule.matches(name) for name in names):
            style.update(rule.tags)

    occasion: set[str] = set()
    for rule in rules.occasion_rules:
        if rule.matches(names[0]):
            occasion.update(rule.tags)
    if not occasion:
        occasion.update(rules.occasion_default)

    return canonical_tags(style), canonical_tags(occasion)


@dataclass(frozen=True)
class MappingOutcome:
    status: str  # "mapped" | "discarded"
    record: Optional[AttributeRecord] = None
    discard_reason: Optional[str] = None


def build_record(raw: RawAnnotation, rules: RuleSet, vocab: Vocabulary) -> MappingOutcome:
    """Compose one annotation into an attribute record, or discard it.

    Never raises: a row with no category mapping becomes a discard with a
    reason.  Material passes through lowercased and trimmed ("unknown" when
    absent); missing colors map to "unknown"; empty occasion unions get the
    default.
    """
    category = map_category(raw.fine_category, rules)
    if category is None:
        return MappingOutcome(status="discarded", discard_reason="category unmapped")
    material = (raw.material_label or "").strip().lower() or "unknown"
    style, occasion = derive_tags(raw.fine_category, raw.style_labels, rules)
    record = AttributeRecord(
        category=category,
        primary_color=map_color(raw.color_label, rules),
        material=material,
        style_tags=style,
        occasion_tags=occasion,
    )
    return MappingOutcome(status="mapped", record=record)


@dataclass(frozen=True)
class MappingResult:
    mapped: tuple[tuple[RawAnnotation, AttributeRecord], ...]
    discarded: tuple[tuple[RawAnnotation, str], ...]


def map_annotations(
    annotations: Iterable[RawAnnotation], rules: RuleSet, vocab: Vocabulary
) -> MappingResult:
    """Apply :func:`build_record` to every row, preserving input order."""
    mapped = []
    discarded = []
    for raw in annotations:
        outcome = build_record(raw, rules, vocab)
        if outcome.status == "mapped":
            mapped.append((raw, outcome.record))
        else:
            discarded.append((raw, outcome.discard_reason or "unknown"))
    return MappingResult(mapped=tuple(mapped), discarded=tuple(discarded))


@dataclass(frozen=True)
class CoverageAudit:
    """Which fine-category names the rules file accounts for."""

    mapped: tuple[str, ...]
    discarded: tuple[str, ...]
    uncovered: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.uncovered


def audit_categories(annotations: Iterable[RawAnnotation], rules: RuleSet) -> CoverageAudit:
    """Classify every distinct fine-category name in the input.

    Uncovered names (no mapping rule and no discard rule) indicate a rules
    gap; ingestion is expected to fail loudly on them rather than silently
    drop rows.
    """
    outcomes: dict[str, str] = {}
    for raw in annotations:
        name = raw.fine_category
        if name not in outcomes:
            outcomes[name] = category_match(name, rules)[0]
    buckets: dict[str, list[str]] = {"mapped": [], "discarded": [], "uncovered": []}
    for name, kind in outcomes.items():
        buckets[kind].append(name)
    return CoverageAudit(
        mapped=tuple(sorted(buckets["mapped"])),
        discarded=tuple(sorted(buckets["discarded"])),
        uncovered=tuple(sorted(buckets["uncovered"])),
    )


# -- splitting --------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[tuple[RawAnnotation, AttributeRecord], ...]
    val: tuple[tuple[RawAnnotation, AttributeRecord], ...]
    test: tuple[tuple[RawAnnotation, AttributeRecord], ...]
    seed: int
    ratios: tuple[float, float, float]
    ruleset_checksum: Optional[str] = None

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.val), len(self.test))


def split_sizes(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """floor(n*r) for the first two splits, remainder for the third."""
    first = math.floor(n * ratios[0])
    second = math.floor(n * ratios[1])
    return first, second, n - first - second


def split_dataset(
    mapped: Sequence[tuple[RawAnnotation, AttributeRecord]],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 42,
    ruleset_checksum: Optional[str] = None,
) -> DatasetSplit:
    """Deterministic seeded shuffle followed by contiguous slicing.

    The shuffle is SplitMix64-driven Fisher-Yates (see :mod:`fashiontag.rng`),
    so identical (input, seed) pairs reproduce byte-identical splits.
    """
    if not mapped:
        raise EmptyDatasetError("cannot split an empty dataset")
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be three nonnegative fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    permuted = shuffled(mapped, seed)
    n_train, n_val, _ = split_sizes(len(permuted), ratios)
    return DatasetSplit(
        train=tuple(permuted[:n_train]),
        val=tuple(permuted[n_train : n_train + n_val]),
        test=tuple(permuted[n_train + n_val :]),
        seed=seed,
        ratios=tuple(ratios),
        ruleset_checksum=ruleset_checksum,
    )


# -- distribution reporting -------------------------------------------------

@dataclass(frozen=True)
class DistributionRow:
    category: str
    count: int
    percent: float


@dataclass(frozen=True)
class DistributionTable:
    rows: tuple[DistributionRow, ...]
    total: DistributionRow


def category_distribution(records: Sequence[AttributeRecord]) -> DistributionTable:
    """Per-category counts and percentages over all six categories.

    Zero-count categories are included; percentages are rounded to one
    decimal; rows are ordered by descending count, then vocabulary order.
    """
    if not records:
        raise EmptyDatasetError("cannot compute a distribution over zero records")
    counts = Counter(record.category for record in records)
    total = len(records)
    order = {cat: i for i, cat in enumerate(CATEGORIES)}
    rows = [
        DistributionRow(cat, counts.get(cat, 0), round(100.0 * counts.get(cat, 0) / total, 1))
        for cat in order
    ]
    rows.sort(key=lambda row: (-row.count, order[row.category]))
    return DistributionTable(
        rows=tuple(rows),
        total=DistributionRow("total", total, 100.0),
    )
