"""Conformance against the primary toolkit: the acceptance surface.

Every fixture-mode 200 body must pass the toolkit's strict parser; missing
file parts must 400; flaky scripts must be consumed strictly in order under
concurrent clients; and the real gateway client must interoperate over HTTP.
"""

import hashlib
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest
import uvicorn
from fastapi.testclient import TestClient

from fashiontag.gateway import BackendConfig, analyze
from fashiontag.rng import SplitMix64
from fashiontag.schema import (
    AttributeRecord,
    ParseOutcome,
    default_vocabulary,
    parse_strict,
    serialize_compact,
)

from mockserver.app import MockBehavior, create_app, load_vocabulary_doc

VOCAB_PATH = Path(__file__).resolve().parents[2] / "src" / "fashiontag" / "data" / "vocabulary.json"


def build_fixture_set(n: int = 20):
    """n image blobs with schema-valid compact bodies, keyed by digest."""
    vocab = default_vocabulary()
    rng = SplitMix64(313)
    blobs, fixture_map = [], {}
    for i in range(n):
        blob = f"conformance-image-{i}".encode()
        record = AttributeRecord(
            category=vocab.categories[rng.randbelow(6)],
            primary_color=vocab.colors[rng.randbelow(16)],
            material=vocab.materials[rng.randbelow(len(vocab.materials))],
            style_tags=tuple(sorted({vocab.style_tags[rng.randbelow(19)],
                                     vocab.style_tags[rng.randbelow(19)]})),
            occasion_tags=tuple(sorted({vocab.occasion_tags[rng.randbelow(15)]})),
        )
        blobs.append(blob)
        fixture_map[hashlib.sha256(blob).hexdigest()] = serialize_compact(record)
    return blobs, fixture_map


class TestFixtureConformance:
    def test_every_200_body_passes_parse_strict(self):
        blobs, fixture_map = build_fixture_set(20)
        app = create_app(
            MockBehavior(
                mode="fixture",
                fixture_map=fixture_map,
                vocab_doc=load_vocabulary_doc(VOCAB_PATH),
            )
        )
        client = TestClient(app)
        vocab = default_vocabulary()
        for blob in blobs:
            response = client.post("/analyze", files={"file": ("img.png", blob)})
            assert response.status_code == 200
            report = parse_strict(response.text, vocab, mode="vocabulary_checked")
            assert report.outcome is ParseOutcome.VALID, report.detail

    def test_missing_file_part_returns_400(self):
        _, fixture_map = build_fixture_set(1)
        app = create_app(
            MockBehavior(
                mode="fixture",
                fixture_map=fixture_map,
                vocab_doc=load_vocabulary_doc(VOCAB_PATH),
            )
        )
        client = TestClient(app)
        assert client.post("/analyze", data={"note": "no file"}).status_code == 400


class TestFlakyConcurrency:
    def test_script_consumed_in_order_under_8_clients(self):
        # 24 entries; with 8 threads x 3 requests each, every response's
        # sequence number must line up with the script entry it consumed.
        script = tuple(503 if i % 3 else 200 for i in range(24))
        app = create_app(MockBehavior(mode="flaky", flaky_script=script))
        client = TestClient(app)

        def hit(_):
            response = client.post("/analyze", files={"file": ("a.jpg", b"x")})
            return int(response.headers["X-Request-Sequence"]), response.status_code

        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(hit, range(24)))

        sequences = sorted(seq for seq, _ in results)
        assert sequences == list(range(1, 25))
        for seq, status in results:
            assert status == script[seq - 1], (seq, status)


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture()
def flaky_http_server():
    """Real uvicorn server running a [503,503,200] script."""
    body = serialize_compact(
        AttributeRecord("dress", "red", "silk", ("glamorous",), ("party",))
    )
    app = create_app(
        MockBehavior(mode="flaky", flaky_script=(503, 503, 200), success_body=body)
    )
    port = free_port()
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    import httpx

    while time.time() < deadline:
        try:
            if httpx.get(f"http://127.0.0.1:{port}/health", timeout=1).status_code == 200:
                break
        except httpx.TransportError:
            time.sleep(0.05)
    else:
        raise RuntimeError("mock server did not come up")
    yield f"http://127.0.0.1:{port}", body
    server.should_exit = True
    thread.join(timeout=5)


class TestGatewayIntegration:
    def test_gateway_retries_through_real_http(self, flaky_http_server):
        url, body = flaky_http_server
        config = BackendConfig(
            endpoint_url=url, initial_timeout=10.0, subsequent_timeout=10.0,
            max_retries=2, retry_backoff=(0.05,),
        )
        result = analyze(b"real-http-image", config)
        assert result.attempts == 3
        assert result.raw_text == body
        assert result.record.category == "dress"
