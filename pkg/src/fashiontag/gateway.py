"""Production client around the inference backend's ``POST /analyze``.

The backend is opaque: it receives a multipart image upload (single file
part named ``file``) and answers 200 with a compact-JSON attribute record as
the entire body, or 503 while waking from sleep.  This module owns the
resilience around that contract: a long first-attempt timeout to absorb cold
starts, bounded retries with a fixed backoff schedule, an optional fallback
backend, unknown-color resolution via a pluggable resolver, and expansion of
5-field records to the 8-field production schema.

Transports are pluggable so the whole suite runs against in-process scripted
backends; :class:`HttpxTransport` is the real one.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Optional, Protocol, Sequence, Union

import httpx

from .schema import (
    SEASON_TAGS,
    AttributeRecord,
    ExpandedRecord,
    ParseOutcome,
    Vocabulary,
    canonical_tags,
    default_vocabulary,
    parse_strict,
    sha256_hex,
)


# -- errors -------------------------------------------------------------------

class GatewayError(Exception):
    """Base for analyze-path failures."""


class BackendUnavailableError(GatewayError):
    def __init__(self, endpoint: str, attempts: int, causes: list[str]):
        self.endpoint = endpoint
        self.attempts = attempts
        self.causes = causes
        super().__init__(
            f"backend {endpoint} unavailable after {attempts} attempt(s): "
            + "; ".join(causes)
        )


class MalformedOutputError(GatewayError):
    def __init__(self, endpoint: str, attempts: int, raw_text: str, detail: str):
        self.endpoint = endpoint
        self.attempts = attempts
        self.raw_text = raw_text
        self.detail = detail
        super().__init__(f"backend {endpoint} returned unparseable output: {detail}")


class BothBackendsFailedError(GatewayError):
    def __init__(self, primary_error: GatewayError, fallback_error: GatewayError):
        self.primary_error = primary_error
        self.fallback_error = fallback_error
        super().__init__(
            f"primary failed ({primary_error}); fallback failed ({fallback_error})"
        )


# -- transport ----------------------------------------------------------------

class TransportError(Exception):
    pass


class TransportTimeout(TransportError):
    pass


class TransportConnectError(TransportError):
    pass


@dataclass(frozen=True)
class TransportResponse:
    status_code: int
    text: str


class Transport(Protocol):
    def post_image(
        self,
        url: str,
        image: bytes,
        *,
        filename: str,
        timeout: float,
        headers: Mapping[str, str],
    ) -> TransportResponse:
        ...


class HttpxTransport:
    """Real HTTP transport: multipart upload with a single ``file`` part."""

    def post_image(self, url, image, *, filename, timeout, headers):
        try:
            response = httpx.post(
                url,
                files={"file": (filename, image, "application/octet-stream")},
                timeout=timeout,
                headers=dict(headers),
            )
        except httpx.TimeoutException as exc:
            raise TransportTimeout(str(exc)) from exc
        except httpx.TransportError as exc:
            raise TransportConnectError(str(exc)) from exc
        return TransportResponse(status_code=response.status_code, text=response.text)


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class BackendConfig:
    """Endpoint plus retry/timeout policy.

    The first attempt gets a long timeout to absorb container cold starts;
    later attempts use the steady-state timeout.  ``retry_backoff`` is the
    delay schedule between attempts (the last entry repeats if there are
    more retries than entries).
    """

    endpoint_url: str
    initial_timeout: float = 120.0
    subsequent_timeout: float = 30.0
    max_retries: int = 2
    retry_backoff: tuple[float, ...] = (2.0, 2.0)
    api_key: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.endpoint_url:
            raise ValueError("endpoint_url must be nonempty")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.initial_timeout <= 0 or self.subsequent_timeout <= 0:
            raise ValueError("timeouts must be positive")
        if any(delay < 0 for delay in self.retry_backoff):
            raise ValueError("backoff delays must be nonnegative")

    @property
    def analyze_url(self) -> str:
        return self.endpoint_url.rstrip("/") + "/analyze"

    def backoff_delay(self, retry_index: int) -> float:
        if not self.retry_backoff:
            return 0.0
        return self.retry_backoff[min(retry_index, len(self.retry_backoff) - 1)]

    def headers(self) -> dict[str, str]:
        if self.api_key:
            return {"Authorization": f"Bearer {self.api_key}"}
        return {}


@dataclass(frozen=True)
class AnalyzeResult:
    record: AttributeRecord
    raw_text: str
    backend_used: str  # "primary" | "fallback"
    color_resolved_by: str  # "model" | "resolver" | "none"
    attempts: int
    latency: float  # seconds, successful request only


# -- analyze ------------------------------------------------------------------

_DEFAULT_TRANSPORT = HttpxTransport()


def analyze(
    image: bytes,
    config: BackendConfig,
    *,
    transport: Optional[Transport] = None,
    vocab: Optional[Vocabulary] = None,
    sleep: Callable[[float], None] = time.sleep,
    _role: str = "primary",
) -> AnalyzeResult:
    """Send one image to the backend, retrying through 503s and timeouts.

    503, timeout, and connection failures are retryable (they all look like
    a sleeping or waking container); any other non-200 status fails
    immediately.  A 200 whose body does not parse as a fully valid record
    raises :class:`MalformedOutputError` with the raw body preserved.
    """
    if not image:
        raise ValueError("image must be nonempty bytes")
    transport = transport or _DEFAULT_TRANSPORT
    vocab = vocab or default_vocabulary()

    url = config.analyze_url
    headers = config.headers()
    causes: list[str] = []
    attempts = 1 + config.max_retries
    for attempt in range(attempts):
        timeout = config.initial_timeout if attempt == 0 else config.subsequent_timeout
        started = time.perf_counter()
        try:
            response = transport.post_image(
                url, image, filename="upload.jpg", timeout=timeout, headers=headers
            )
        except TransportTimeout as exc:
            causes.append(f"attempt {attempt + 1}: timeout ({exc})")
        except TransportConnectError as exc:
            causes.append(f"attempt {attempt + 1}: connection failed ({exc})")
        else:
            elapsed = time.perf_counter() - started
            if response.status_code == 503:
                causes.append(f"attempt {attempt + 1}: HTTP 503")
            elif response.status_code != 200:
                raise BackendUnavailableError(
                    url, attempt + 1, causes + [f"attempt {attempt + 1}: HTTP {response.status_code}"]
                )
            else:
                report = parse_strict(response.text, vocab, mode="vocabulary_checked")
                if report.outcome is not ParseOutcome.VALID:
                    raise MalformedOutputError(
                        url, attempt + 1, response.text, report.detail or report.outcome.value
                    )
                record = report.record
                return AnalyzeResult(
                    record=record,
                    raw_text=response.text,
                    backend_used=_role,
                    color_resolved_by="model" if record.primary_color != "unknown" else "none",
                    attempts=attempt + 1,
                    latency=elapsed,
                )
        if attempt < attempts - 1:
            delay = config.backoff_delay(attempt)
            if delay > 0:
                sleep(delay)
    raise BackendUnavailableError(url, attempts, causes)


def analyze_with_fallback(
    image: bytes,
    primary: BackendConfig,
    fallback: BackendConfig,
    *,
    transport: Optional[Transport] = None,
    vocab: Optional[Vocabulary] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> AnalyzeResult:
    """Primary first; the fallback backend is contacted only if it fails."""
    try:
        return analyze(image, primary, transport=transport, vocab=vocab, sleep=sleep)
    except GatewayError as primary_error:
        try:
            return analyze(
                image, fallback, transport=transport, vocab=vocab, sleep=sleep,
                _role="fallback",
            )
        except GatewayError as fallback_error:
            raise BothBackendsFailedError(primary_error, fallback_error) from None


# -- color resolution -----------------------------------------------------------

class ColorResolver(Protocol):
    def resolve(self, image: bytes) -> str:
        ...


def resolve_color(
    image: bytes,
    record: AttributeRecord,
    resolver: Optional[ColorResolver],
    vocab: Optional[Vocabulary] = None,
) -> AttributeRecord:
    """Substitute the resolver's answer when the model said "unknown".

    Known colors pass through untouched and the resolver is never invoked.
    Resolver failures (exceptions, or answers outside the 16-color
    vocabulary) are absorbed: the record keeps "unknown".
    """
    if record.primary_color != "unknown" or resolver is None:
        return record
    vocab = vocab or default_vocabulary()
    try:
        color = resolver.resolve(image)
    except Exception:
        return record
    if color not in vocab.color_set or color == "unknown":
        return record
    return replace(record, primary_color=color)


def apply_color_resolution(
    image: bytes,
    result: AnalyzeResult,
    resolver: Optional[ColorResolver],
    vocab: Optional[Vocabulary] = None,
) -> AnalyzeResult:
    """Resolve the result's record color and tag how the color was obtained."""
    resolved = resolve_color(image, result.record, resolver, vocab)
    if resolved.primary_color == result.record.primary_color:
        return result
    return replace(result, record=resolved, color_resolved_by="resolver")


# -- expansion to the 8-field schema ---------------------------------------------

class ExpansionRulesError(ValueError):
    pass


@dataclass(frozen=True)
class OccasionOverrideRule:
    category: str  # "any" or a category
    style: str  # "any" or a style tag
    occasions: tuple[str, ...]

    def matches(self, record: AttributeRecord) -> bool:
        if self.category != "any" and record.category != self.category:
            return False
        return self.style == "any" or self.style in record.style_tags


@dataclass(frozen=True)
class FitRule:
    style: str
    fit: str


@dataclass(frozen=True)
class FormalityRule:
    category: str
    style: str
    formality: str

    def matches(self, record: AttributeRecord) -> bool:
        if self.category != "any" and record.category != self.category:
            return False
        return self.style == "any" or self.style in record.style_tags


@dataclass(frozen=True)
class ExpansionRules:
    """Deterministic derivations for the three production-only fields.

    Occasion overrides are union-of-matches (replacing the model occasions
    entirely); fit and formality are first-match-wins over their ordered
    rule lists; every mapping has a declared default.
    """

    occasion_rules: tuple[OccasionOverrideRule, ...]
    occasion_default: tuple[str, ...]
    material_season: dict[str, tuple[str, ...]]
    season_default: tuple[str, ...]
    fit_rules: tuple[FitRule, ...]
    fit_default: str
    fit_vocabulary: tuple[str, ...]
    formality_rules: tuple[FormalityRule, ...]
    formality_default: str
    formality_vocabulary: tuple[str, ...]
    version: str = "unversioned"
    checksum: Optional[str] = None


def load_expansion_rules(
    document: Union[str, bytes], vocab: Optional[Vocabulary] = None
) -> ExpansionRules:
    """Parse and vocabulary-check an expansion rules document."""
    vocab = vocab or default_vocabulary()
    raw = document.encode("utf-8") if isinstance(document, str) else bytes(document)
    checksum = sha256_hex(raw)
    try:
        doc = json.loads(raw)
    except ValueError as exc:
        raise ExpansionRulesError(f"expansion rules are not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ExpansionRulesError("expansion rules must be a JSON object")

    fit_vocab = tuple(doc.get("fit_vocabulary") or ())
    formality_vocab = tuple(doc.get("formality_vocabulary") or ())
    if not fit_vocab or not formality_vocab:
        raise ExpansionRulesError("fit_vocabulary and formality_vocabulary are required")

    def check_tags(where: str, tags, allowed: frozenset[str]) -> tuple[str, ...]:
        if not isinstance(tags, list) or not tags:
            raise ExpansionRulesError(f"{where}: must be a nonempty tag array")
        for tag in tags:
            if tag not in allowed:
                raise ExpansionRulesError(f"{where}: tag {tag!r} not in vocabulary")
        return tuple(tags)

    occasion_rules = []
    for i, entry in enumerate(doc.get("occasion_rules") or []):
        category = entry.get("category", "any")
        style = entry.get("style", "any")
        if category != "any" and category not in vocab.category_set:
            raise ExpansionRulesError(f"occasion_rules[{i}]: bad category {category!r}")
        if style != "any" and style not in vocab.style_set:
            raise ExpansionRulesError(f"occasion_rules[{i}]: bad style tag {style!r}")
        occasions = check_tags(
            f"occasion_rules[{i}]", entry.get("occasions"), vocab.occasion_set
        )
        occasion_rules.append(OccasionOverrideRule(category, style, occasions))

    occasion_default = check_tags(
        "occasion_default", doc.get("occasion_default"), vocab.occasion_set
    )

    season_set = frozenset(SEASON_TAGS)
    material_season = {}
    for material, seasons in (doc.get("material_season") or {}).items():
        material_season[material] = check_tags(
            f"material_season[{material!r}]", seasons, season_set
        )
    season_default = check_tags("season_default", doc.get("season_default"), season_set)

    fit_set = frozenset(fit_vocab)
    fit_rules = []
    for i, entry in enumerate(doc.get("fit_rules") or []):
        style = entry.get("style")
        fit = entry.get("fit")
        if style not in vocab.style_set and style != "any":
            raise ExpansionRulesError(f"fit_rules[{i}]: bad style tag {style!r}")
        if fit not in fit_set:
            raise ExpansionRulesError(f"fit_rules[{i}]: fit {fit!r} not in fit_vocabulary")
        fit_rules.append(FitRule(style, fit))
    fit_default = doc.get("fit_default")
    if fit_default not in fit_set:
        raise ExpansionRulesError(f"fit_default {fit_default!r} not in fit_vocabulary")

    formality_set = frozenset(formality_vocab)
    formality_rules = []
    for i, entry in enumerate(doc.get("formality_rules") or []):
        category = entry.get("category", "any")
        style = entry.get("style", "any")
        formality = entry.get("formality")
        if category != "any" and category not in vocab.category_set:
            raise ExpansionRulesError(f"formality_rules[{i}]: bad category {category!r}")
        if style != "any" and style not in vocab.style_set:
            raise ExpansionRulesError(f"formality_rules[{i}]: bad style tag {style!r}")
        if formality not in formality_set:
            raise ExpansionRulesError(
                f"formality_rules[{i}]: formality {formality!r} not in formality_vocabulary"
            )
        formality_rules.append(FormalityRule(category, style, formality))
    formality_default = doc.get("formality_default")
    if formality_default not in formality_set:
        raise ExpansionRulesError(
            f"formality_default {formality_default!r} not in formality_vocabulary"
        )

    return ExpansionRules(
        occasion_rules=tuple(occasion_rules),
        occasion_default=occasion_default,
        material_season=material_season,
        season_default=season_default,
        fit_rules=tuple(fit_rules),
        fit_default=fit_default,
        fit_vocabulary=fit_vocab,
        formality_rules=tuple(formality_rules),
        formality_default=formality_default,
        formality_vocabulary=formality_vocab,
        version=str(doc.get("version", "unversioned")),
        checksum=checksum,
    )


def load_expansion_rules_file(
    path: Union[str, Path], vocab: Optional[Vocabulary] = None
) -> ExpansionRules:
    return load_expansion_rules(Path(path).read_bytes(), vocab)


def default_expansion_rules(vocab: Optional[Vocabulary] = None) -> ExpansionRules:
    from importlib import resources

    raw = resources.files("fashiontag").joinpath("data/expansion_rules.json").read_bytes()
    return load_expansion_rules(raw, vocab)


def expand(record: AttributeRecord, rules: ExpansionRules) -> ExpandedRecord:
    """Derive the 8-field production record.

    The model's occasion tags are discarded and replaced by the union of
    matching occasion overrides (the deterministic derivation is more
    reliable given a correct category); season comes from the material
    mapping, fit and formality from first-match rules, all with declared
    defaults.  Pure and deterministic.
    """
    occasions: set[str] = set()
    for rule in rules.occasion_rules:
        if rule.matches(record):
            occasions.update(rule.occasions)
    occasion_tags = canonical_tags(occasions) if occasions else tuple(rules.occasion_default)

    season_tags = rules.material_season.get(record.material, rules.season_default)

    fit = rules.fit_default
    for fit_rule in rules.fit_rules:
        if fit_rule.style == "any" or fit_rule.style in record.style_tags:
            fit = fit_rule.fit
            break

    formality = rules.formality_default
    for formality_rule in rules.formality_rules:
        if formality_rule.matches(record):
            formality = formality_rule.formality
            break

    return ExpandedRecord(
        category=record.category,
        primary_color=record.primary_color,
        material=record.material,
        style_tags=record.style_tags,
        occasion_tags=occasion_tags,
        season_tags=tuple(season_tags),
        fit=fit,
        formality=formality,
    )


# -- batch processing -------------------------------------------------------------

@dataclass(frozen=True)
class BatchItemOutcome:
    index: int
    image_ref: str
    record: Optional[ExpandedRecord]
    backend_used: Optional[str] = None
    color_resolved_by: Optional[str] = None
    latency: Optional[float] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class BatchSummary:
    n_items: int
    n_ok: int
    n_failed: int
    validity_rate: float
    fallback_rate: float
    color_resolution_rate: float
    latency_p50: Optional[float]
    latency_p90: Optional[float]
    latency_p99: Optional[float]
    failures: tuple[tuple[int, str, str], ...]  # (index, image_ref, error)

    def to_dict(self) -> dict:
        return {
            "n_items": self.n_items,
            "n_ok": self.n_ok,
            "n_failed": self.n_failed,
            "validity_rate": round(self.validity_rate, 6),
            "fallback_rate": round(self.fallback_rate, 6),
            "color_resolution_rate": round(self.color_resolution_rate, 6),
            "latency_p50": self.latency_p50,
            "latency_p90": self.latency_p90,
            "latency_p99": self.latency_p99,
            "failures": [
                {"index": index, "image_ref": ref, "error": error}
                for index, ref, error in self.failures
            ],
        }


def _percentile(sorted_values: list[float], q: float) -> float:
    # Nearest-rank percentile; deterministic and simple.
    rank = max(1, math.ceil(q * len(sorted_values)))
    return sorted_values[rank - 1]


def _default_loader(ref: str) -> bytes:
    return Path(ref).read_bytes()


def batch_analyze(
    image_refs: Sequence[str],
    config: BackendConfig,
    rules: ExpansionRules,
    *,
    fallback: Optional[BackendConfig] = None,
    resolver: Optional[ColorResolver] = None,
    transport: Optional[Transport] = None,
    vocab: Optional[Vocabulary] = None,
    parallelism: int = 4,
    loader: Callable[[str], bytes] = _default_loader,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[list[ExpandedRecord], BatchSummary, list[BatchItemOutcome]]:
    """Analyze a list of image refs with bounded parallelism.

    Output order always matches input order regardless of the parallelism
    level.  Per-item failures are recorded in the summary without aborting
    the batch.  Returns (successful expanded records in input order, run
    summary, per-item outcomes).
    """
    if not image_refs:
        raise ValueError("image_refs must be nonempty")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    vocab = vocab or default_vocabulary()

    def process(indexed: tuple[int, str]) -> BatchItemOutcome:
        index, ref = indexed
        try:
            image = loader(ref)
            if fallback is not None:
                result = analyze_with_fallback(
                    image, config, fallback, transport=transport, vocab=vocab, sleep=sleep
                )
            else:
                result = analyze(
                    image, config, transport=transport, vocab=vocab, sleep=sleep
                )
            result = apply_color_resolution(image, result, resolver, vocab)
            expanded = expand(result.record, rules)
            return BatchItemOutcome(
                index=index,
                image_ref=ref,
                record=expanded,
                backend_used=result.backend_used,
                color_resolved_by=result.color_resolved_by,
                latency=result.latency,
            )
        except (GatewayError, OSError, ValueError) as exc:
            return BatchItemOutcome(index=index, image_ref=ref, record=None, error=str(exc))

    indexed_refs = list(enumerate(image_refs))
    if parallelism == 1:
        outcomes = [process(item) for item in indexed_refs]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(process, indexed_refs))

    ok = [o for o in outcomes if o.record is not None]
    failures = tuple(
        (o.index, o.image_ref, o.error or "unknown error") for o in outcomes if o.record is None
    )
    latencies = sorted(o.latency for o in ok if o.latency is not None)
    summary = BatchSummary(
        n_items=len(outcomes),
        n_ok=len(ok),
        n_failed=len(failures),
        validity_rate=len(ok) / len(outcomes),
        fallback_rate=(sum(1 for o in ok if o.backend_used == "fallback") / len(ok)) if ok else 0.0,
        color_resolution_rate=(
            sum(1 for o in ok if o.color_resolved_by == "resolver") / len(ok)
        )
        if ok
        else 0.0,
        latency_p50=_percentile(latencies, 0.50) if latencies else None,
        latency_p90=_percentile(latencies, 0.90) if latencies else None,
        latency_p99=_percentile(latencies, 0.99) if latencies else None,
        failures=failures,
    )
    return [o.record for o in ok], summary, outcomes
