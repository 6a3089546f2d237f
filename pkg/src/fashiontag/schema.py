"""Attribute vocabularies, record types, and the compact-JSON wire format.

The single-line serialization produced by :func:`serialize_compact` is the
wire format for records throughout this repo: it is the training target
shape, the body of every inference-backend response, and the line format of
the files the CLI stages exchange.  :func:`parse_strict` is its total
inverse: any byte string yields a :class:`ParseReport`, never an exception.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Literal, Optional, Union

logger = logging.getLogger(__name__)

# Fixed by the application schema: 6 garment categories and 16 colors.
CATEGORIES: tuple[str, ...] = ("top", "bottom", "dress", "layer", "shoes", "accessory")
COLORS: tuple[str, ...] = (
    "black", "white", "gray", "beige", "brown", "blue", "navy", "green",
    "yellow", "orange", "red", "pink", "purple", "metallic", "multi", "unknown",
)

# Season vocabulary for the 8-field production schema.  Fit and formality
# scales are declared by the expansion rules file, not fixed here.
SEASON_TAGS: tuple[str, ...] = ("spring", "summer", "fall", "winter", "all-season")

RECORD_KEYS: tuple[str, ...] = (
    "category", "primary_color", "material", "style_tags", "occasion_tags",
)
EXPANDED_KEYS: tuple[str, ...] = RECORD_KEYS + ("season_tags", "fit", "formality")

STYLE_TAG_COUNT = 19
OCCASION_TAG_COUNT = 15

ParseMode = Literal["schema_only", "vocabulary_checked"]


class VocabularyError(ValueError):
    """A vocabulary document violates the schema contract."""


def canonical_tags(tags: Iterable[str]) -> tuple[str, ...]:
    """Deduplicate and sort a tag list into its stored canonical form."""
    return tuple(sorted(set(tags)))


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class Vocabulary:
    """The five closed(ish) vocabularies the pipeline operates over.

    Categories and colors are fixed sets; style and occasion tags have fixed
    cardinalities (19 and 15) with repo-declared members; materials are an
    open vocabulary and membership is never enforced on records.
    """

    categories: tuple[str, ...]
    colors: tuple[str, ...]
    materials: tuple[str, ...]
    style_tags: tuple[str, ...]
    occasion_tags: tuple[str, ...]
    version: str = "unversioned"
    checksum: Optional[str] = None

    def __post_init__(self) -> None:
        if set(self.categories) != set(CATEGORIES) or len(self.categories) != 6:
            raise VocabularyError(f"categories must be exactly {CATEGORIES}")
        if set(self.colors) != set(COLORS) or len(self.colors) != 16:
            raise VocabularyError(f"colors must be exactly the 16-color palette {COLORS}")
        for name, entries, expected in (
            ("style_tags", self.style_tags, STYLE_TAG_COUNT),
            ("occasion_tags", self.occasion_tags, OCCASION_TAG_COUNT),
        ):
            if len(entries) != expected:
                raise VocabularyError(f"{name} must have exactly {expected} entries, got {len(entries)}")
            _check_entries(name, entries)
        if "everyday" not in self.occasion_tags:
            raise VocabularyError("occasion_tags must include 'everyday'")
        if not self.materials:
            raise VocabularyError("materials must be nonempty")
        _check_entries("materials", self.materials)

    @property
    def category_set(self) -> frozenset[str]:
        return frozenset(self.categories)

    @property
    def color_set(self) -> frozenset[str]:
        return frozenset(self.colors)

    @property
    def style_set(self) -> frozenset[str]:
        return frozenset(self.style_tags)

    @property
    def occasion_set(self) -> frozenset[str]:
        return frozenset(self.occasion_tags)


def _check_entries(name: str, entries: tuple[str, ...]) -> None:
    if len(set(entries)) != len(entries):
        raise VocabularyError(f"{name} entries must be unique")
    for entry in entries:
        if not isinstance(entry, str) or not entry:
            raise VocabularyError(f"{name} entries must be nonempty strings")
        if entry != entry.lower():
            raise VocabularyError(f"{name} entry {entry!r} must be lowercase")


def load_vocabulary(source: Union[str, Path, bytes, None] = None) -> Vocabulary:
    """Load and validate a vocabulary file, logging its checksum.

    ``source`` may be a path or raw bytes; ``None`` loads the vocabulary
    shipped with the package.
    """
    if source is None:
        raw = resources.files("fashiontag").joinpath("data/vocabulary.json").read_bytes()
        origin = "packaged"
    elif isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
        origin = "<bytes>"
    else:
        raw = Path(source).read_bytes()
        origin = str(source)
    checksum = sha256_hex(raw)
    try:
        doc = json.loads(raw)
    except ValueError as exc:
        raise VocabularyError(f"vocabulary file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise VocabularyError("vocabulary file must be a JSON object")
    fields = {}
    for key in ("categories", "colors", "materials", "style_tags", "occasion_tags"):
        value = doc.get(key)
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise VocabularyError(f"vocabulary field {key!r} must be an array of strings")
        fields[key] = tuple(value)
    vocab = Vocabulary(
        version=str(doc.get("version", "unversioned")), checksum=checksum, **fields
    )
    logger.info("loaded vocabulary %s from %s (sha256=%s)", vocab.version, origin, checksum)
    return vocab


@lru_cache(maxsize=1)
def default_vocabulary() -> Vocabulary:
    """The vocabulary shipped with the package (cached)."""
    return load_vocabulary(None)


@dataclass(frozen=True)
class AttributeRecord:
    """The 5-field structured output.

    Tag tuples are kept in canonical form (deduplicated, sorted); material is
    free-form lowercase.  Equality is field-wise, which together with the
    fixed serialization key order makes round-trips byte-exact.
    """

    category: str
    primary_color: str
    material: str
    style_tags: tuple[str, ...]
    occasion_tags: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "primary_color": self.primary_color,
            "material": self.material,
            "style_tags": list(self.style_tags),
            "occasion_tags": list(self.occasion_tags),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "AttributeRecord":
        return cls(
            category=payload["category"],
            primary_color=payload["primary_color"],
            material=payload["material"],
            style_tags=canonical_tags(payload["style_tags"]),
            occasion_tags=canonical_tags(payload["occasion_tags"]),
        )


@dataclass(frozen=True)
class ExpandedRecord:
    """The 8-field production schema: base attributes plus derived fields."""

    category: str
    primary_color: str
    material: str
    style_tags: tuple[str, ...]
    occasion_tags: tuple[str, ...]
    season_tags: tuple[str, ...]
    fit: str
    formality: str

    def base(self) -> AttributeRecord:
        """The record with the derived fields stripped.

        The (rule-derived) occasion tags are retained: they replace the model
        occasions during expansion and belong to the 5-field shape.
        """
        return AttributeRecord(
            category=self.category,
            primary_color=self.primary_color,
            material=self.material,
            style_tags=self.style_tags,
            occasion_tags=self.occasion_tags,
        )

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "primary_color": self.primary_color,
            "material": self.material,
            "style_tags": list(self.style_tags),
            "occasion_tags": list(self.occasion_tags),
            "season_tags": list(self.season_tags),
            "fit": self.fit,
            "formality": self.formality,
        }


class ParseOutcome(str, Enum):
    VALID = "valid"
    INVALID_JSON = "invalid_json"
    MISSING_FIELD = "missing_field"
    WRONG_TYPE = "wrong_type"
    VOCABULARY_VIOLATION = "vocabulary_violation"


@dataclass(frozen=True)
class ParseReport:
    """Classification of one piece of model output.

    ``record`` is present iff ``outcome`` is ``valid`` or
    ``vocabulary_violation`` (the latter still carries the parsed record so
    callers can inspect the offending values).
    """

    outcome: ParseOutcome
    record: Optional[AttributeRecord]
    detail: str = ""


def serialize_compact(record: AttributeRecord) -> str:
    """Serialize a record as single-line compact JSON.

    Keys appear in the fixed order category, primary_color, material,
    style_tags, occasion_tags with "," and ":" separators and no whitespace
    outside string values.  Equal records serialize to identical bytes.
    """
    return json.dumps(record.to_dict(), separators=(",", ":"))


def serialize_compact_expanded(record: ExpandedRecord) -> str:
    """Compact serialization of the 8-field schema (base key order first)."""
    return json.dumps(record.to_dict(), separators=(",", ":"))


_STRING_FIELDS = ("category", "primary_color", "material")
_TAG_FIELDS = ("style_tags", "occasion_tags")


def parse_strict(
    text: Union[str, bytes],
    vocab: Vocabulary,
    mode: ParseMode = "vocabulary_checked",
) -> ParseReport:
    """Classify arbitrary model output against the record schema.

    Never raises: every failure mode is encoded in the report outcome.
    Extra keys are permitted and ignored; tag lists are deduplicated and
    sorted on ingestion.  In ``vocabulary_checked`` mode, out-of-vocabulary
    category/color/tag values downgrade the outcome to
    ``vocabulary_violation`` while still returning the parsed record
    (material is free-form and never vocabulary-checked).
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError:
            return ParseReport(ParseOutcome.INVALID_JSON, None, "input is not valid UTF-8")
    try:
        payload = json.loads(text)
    except (ValueError, RecursionError) as exc:
        return ParseReport(ParseOutcome.INVALID_JSON, None, f"not parseable as JSON: {exc}")
    if not isinstance(payload, dict):
        return ParseReport(
            ParseOutcome.WRONG_TYPE,
            None,
            f"top-level JSON value is {type(payload).__name__}, expected object",
        )

    missing = [key for key in RECORD_KEYS if key not in payload]
    if missing:
        return ParseReport(
            ParseOutcome.MISSING_FIELD, None, "missing fields: " + ", ".join(missing)
        )

    type_errors = []
    for key in _STRING_FIELDS:
        if not isinstance(payload[key], str):
            type_errors.append(f"{key} must be a string")
    for key in _TAG_FIELDS:
        value = payload[key]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            type_errors.append(f"{key} must be an array of strings")
    if type_errors:
        return ParseReport(ParseOutcome.WRONG_TYPE, None, "; ".join(type_errors))

    record = AttributeRecord(
        category=payload["category"],
        primary_color=payload["primary_color"],
        material=payload["material"],
        style_tags=canonical_tags(payload["style_tags"]),
        occasion_tags=canonical_tags(payload["occasion_tags"]),
    )

    if mode == "vocabulary_checked":
        violations = []
        if record.category not in vocab.category_set:
            violations.append(f"category {record.category!r} not in vocabulary")
        if record.primary_color not in vocab.color_set:
            violations.append(f"primary_color {record.primary_color!r} not in vocabulary")
        for tag in record.style_tags:
            if tag not in vocab.style_set:
                violations.append(f"style tag {tag!r} not in vocabulary")
        for tag in record.occasion_tags:
            if tag not in vocab.occasion_set:
                violations.append(f"occasion tag {tag!r} not in vocabulary")
        if violations:
            return ParseReport(
                ParseOutcome.VOCABULARY_VIOLATION, record, "; ".join(violations)
            )

    return ParseReport(ParseOutcome.VALID, record, "")


def validate_record(record: AttributeRecord, vocab: Vocabulary) -> list[str]:
    """Check a record against its invariants; returns a list of violations.

    Used by the label-engineering fuzz tests and the gateway to assert that
    pipeline-produced records are fully in-schema.
    """
    violations = []
    if record.category not in vocab.category_set:
        violations.append(f"category {record.category!r} not in vocabulary")
    if record.primary_color not in vocab.color_set:
        violations.append(f"primary_color {record.primary_color!r} not in vocabulary")
    if not record.material or record.material != record.material.lower():
        violations.append(f"material {record.material!r} must be nonempty lowercase")
    for field_name, tags, allowed in (
        ("style_tags", record.style_tags, vocab.style_set),
        ("occasion_tags", record.occasion_tags, vocab.occasion_set),
    ):
        if tags != canonical_tags(tags):
            violations.append(f"{field_name} not in canonical sorted form")
        for tag in tags:
            if tag not in allowed:
                violations.append(f"{field_name} entry {tag!r} not in vocabulary")
    if not record.occasion_tags:
        violations.append("occasion_tags must be nonempty")
    return violations
