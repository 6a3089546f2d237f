"""Deterministic stand-in for the vision inference backend.

Serves the same wire contract the production gateway speaks: multipart image
upload on ``POST /analyze`` (single file part named ``file``), compact-JSON
attribute record as the entire 200 body, 503 while "asleep".  Three modes:

* ``fixture``      — sha256(image bytes) looked up in a digest->body map;
                     unmapped digests get a 404 data error.
* ``echo_sidecar`` — the record stored next to the image in a test corpus
                     (``<stem>.json`` beside ``<stem>.jpg``) is returned for
                     the uploaded filename.
* ``flaky``        — an ordered status script is consumed one entry per
                     request (503 bodies are not valid records), modeling a
                     sleeping container; an optional cold-start delay runs
                     before the first 200.

This package deliberately does not import the main toolkit: it shares only
the external interfaces (the vocabulary JSON file and the compact record
wire format), and validates its fixture map against that file at startup.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

RECORD_KEYS = ("category", "primary_color", "material", "style_tags", "occasion_tags")

DEFAULT_SUCCESS_BODY = (
    '{"category":"top","primary_color":"navy","material":"cotton",'
    '"style_tags":["classic"],"occasion_tags":["everyday"]}'
)


class FixtureValidationError(ValueError):
    """A fixture body violates the record schema or the vocabulary."""


def load_vocabulary_doc(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("categories", "colors", "style_tags", "occasion_tags"):
        if not isinstance(doc.get(key), list):
            raise FixtureValidationError(f"vocabulary file lacks array field {key!r}")
    return doc


def _whitespace_outside_strings(text: str) -> bool:
    in_string = False
    escaped = False
    for ch in text:
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
            elif ch in " \t\n\r":
                return True
    return False


def validate_record_body(body: str, vocab_doc: dict) -> None:
    """Schema- and vocabulary-check one fixture body; raises on violation."""
    try:
        payload = json.loads(body)
    except ValueError as exc:
        raise FixtureValidationError(f"body is not JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise FixtureValidationError("body is not a JSON object")
    for key in RECORD_KEYS:
        if key not in payload:
            raise FixtureValidationError(f"body is missing field {key!r}")
    for key in ("category", "primary_color", "material"):
        if not isinstance(payload[key], str):
            raise FixtureValidationError(f"field {key!r} must be a string")
    for key in ("style_tags", "occasion_tags"):
        value = payload[key]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise FixtureValidationError(f"field {key!r} must be an array of strings")
    if payload["category"] not in vocab_doc["categories"]:
        raise FixtureValidationError(f"category {payload['category']!r} not in vocabulary")
    if payload["primary_color"] not in vocab_doc["colors"]:
        raise FixtureValidationError(
            f"primary_color {payload['primary_color']!r} not in vocabulary"
        )
    for tag in payload["style_tags"]:
        if tag not in vocab_doc["style_tags"]:
            raise FixtureValidationError(f"style tag {tag!r} not in vocabulary")
    for tag in payload["occasion_tags"]:
        if tag not in vocab_doc["occasion_tags"]:
            raise FixtureValidationError(f"occasion tag {tag!r} not in vocabulary")
    if _whitespace_outside_strings(body):
        raise FixtureValidationError("body is not compact (whitespace outside strings)")


@dataclass
class MockBehavior:
    """Configuration for one server instance."""

    mode: str = "fixture"  # fixture | echo_sidecar | flaky
    fixture_map: Mapping[str, str] = field(default_factory=dict)
    corpus_dir: Optional[Path] = None
    flaky_script: Sequence[int] = ()
    cold_start_delay: float = 0.0
    success_body: str = DEFAULT_SUCCESS_BODY
    vocab_doc: Optional[dict] = None

    def __post_init__(self) -> None:
        if self.mode not in ("fixture", "echo_sidecar", "flaky"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "flaky" and not self.flaky_script:
            raise ValueError("flaky mode requires a nonempty status script")
        if self.mode == "echo_sidecar" and not self.corpus_dir:
            raise ValueError("echo_sidecar mode requires a corpus directory")
        if self.mode == "fixture":
            if self.vocab_doc is None:
                raise ValueError("fixture mode requires a vocabulary document")
            for digest, body in self.fixture_map.items():
                try:
                    validate_record_body(body, self.vocab_doc)
                except FixtureValidationError as exc:
                    raise FixtureValidationError(f"fixture {digest[:12]}...: {exc}") from None


class _FlakyState:
    """Script cursor and request sequencing under one lock."""

    def __init__(self, script: Sequence[int]):
        self.script = list(script)
        self.sequence = 0
        self.first_success_pending = True
        self.lock = threading.Lock()

    def next(self) -> tuple[int, int, bool]:
        """(sequence number, status, apply_cold_start_delay).

        Entries are consumed strictly in order; requests past the end of the
        script repeat the final entry.
        """
        with self.lock:
            self.sequence += 1
            index = min(self.sequence - 1, len(self.script) - 1)
            status = self.script[index]
            delay = False
            if status == 200 and self.first_success_pending:
                self.first_success_pending = False
                delay = True
            return self.sequence, status, delay


def create_app(behavior: MockBehavior) -> FastAPI:
    app = FastAPI(title="fashiontag mock inference server")
    flaky = _FlakyState(behavior.flaky_script) if behavior.mode == "flaky" else None
    sequence_lock = threading.Lock()
    sequence = {"n": 0}

    def next_sequence() -> int:
        with sequence_lock:
            sequence["n"] += 1
            return sequence["n"]

    @app.get("/health")
    def health():
        return {"status": "ok", "mode": behavior.mode}

    @app.post("/analyze")
    async def analyze(request: Request):
        try:
            form = await request.form()
        except Exception:
            form = None
        upload = form.get("file") if form is not None else None
        if upload is None or isinstance(upload, str):
            return JSONResponse(
                {"error": "multipart file part 'file' is required"}, status_code=400
            )
        data = await upload.read()

        if behavior.mode == "flaky":
            seq, status, apply_delay = flaky.next()
            headers = {"X-Request-Sequence": str(seq)}
            if status != 200:
                return PlainTextResponse(
                    "Service Unavailable" if status == 503 else f"HTTP {status}",
                    status_code=status,
                    headers=headers,
                )
            if apply_delay and behavior.cold_start_delay > 0:
                time.sleep(behavior.cold_start_delay)
            return PlainTextResponse(
                behavior.success_body, media_type="application/json", headers=headers
            )

        headers = {"X-Request-Sequence": str(next_sequence())}
        if behavior.mode == "fixture":
            digest = hashlib.sha256(data).hexdigest()
            body = behavior.fixture_map.get(digest)
            if body is None:
                return JSONResponse(
                    {"error": f"no fixture for digest {digest}"},
                    status_code=404,
                    headers=headers,
                )
            return PlainTextResponse(body, media_type="application/json", headers=headers)

        # echo_sidecar: the record lives beside the image in the corpus.
        stem = Path(upload.filename or "").stem
        sidecar = (behavior.corpus_dir / f"{stem}.json") if stem else None
        if not sidecar or not sidecar.is_file():
            return JSONResponse(
                {"error": f"no sidecar record for {upload.filename!r}"},
                status_code=404,
                headers=headers,
            )
        record = json.loads(sidecar.read_text(encoding="utf-8"))
        body = json.dumps(
            {key: record[key] for key in RECORD_KEYS}, separators=(",", ":")
        )
        return PlainTextResponse(body, media_type="application/json", headers=headers)

    return app
