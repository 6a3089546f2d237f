"""Structured fashion-attribute extraction toolkit.

Four layers around an opaque vision backend: the compact-JSON record schema
and strict parser, rule-based label engineering with deterministic splits,
an evaluation harness with exact binomial confidence intervals, and a
resilient HTTP gateway that expands records to the production schema.
"""

from .schema import (
    CATEGORIES,
    COLORS,
    SEASON_TAGS,
    AttributeRecord,
    ExpandedRecord,
    ParseOutcome,
    ParseReport,
    Vocabulary,
    VocabularyError,
    canonical_tags,
    default_vocabulary,
    load_vocabulary,
    parse_strict,
    serialize_compact,
    serialize_compact_expanded,
    validate_record,
)
from .labeling import (
    DatasetSplit,
    MappingOutcome,
    RawAnnotation,
    RuleSet,
    RulesetError,
    build_record,
    category_distribution,
    default_ruleset,
    derive_tags,
    load_ruleset,
    load_ruleset_file,
    map_annotations,
    map_category,
    map_color,
    split_dataset,
)
from .evaluation import (
    DefaultTagTable,
    EvalSample,
    MetricsReport,
    SampleScore,
    aggregate,
    baseline_evaluate,
    build_default_table,
    clopper_pearson,
    evaluate,
    report_to_json,
    score_sample,
    set_f1,
)
from .gateway import (
    AnalyzeResult,
    BackendConfig,
    BackendUnavailableError,
    BothBackendsFailedError,
    ExpansionRules,
    GatewayError,
    MalformedOutputError,
    analyze,
    analyze_with_fallback,
    batch_analyze,
    default_expansion_rules,
    expand,
    load_expansion_rules,
    load_expansion_rules_file,
    resolve_color,
)

__version__ = "0.1.0"
