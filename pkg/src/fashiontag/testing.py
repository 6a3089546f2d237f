"""In-process test doubles for the gateway: scripted and fixture transports.

These let the whole retry/fallback/batch surface run without a network or
the separate mock server process.  They are also handy for local demos, so
they live in the package rather than the test tree.
"""

from __future__ import annotations

import hashlib
import threading
from typing import Mapping, Sequence, Union

from .gateway import (
    TransportConnectError,
    TransportResponse,
    TransportTimeout,
)

# Script entries: an int status (503 etc., body "Service Unavailable"),
# a (status, body) pair, or the sentinels "timeout" / "connect_error".
ScriptEntry = Union[int, tuple[int, str], str]


class ScriptedTransport:
    """Replays a fixed per-endpoint script of responses, counting requests.

    ``script`` may be a single list (served to every URL) or a mapping from
    URL prefix to its own list.  Scripts are consumed strictly in order
    under a lock; running past the end raises, which keeps request-count
    assertions exact.
    """

    def __init__(self, script: Union[Sequence[ScriptEntry], Mapping[str, Sequence[ScriptEntry]]]):
        if isinstance(script, Mapping):
            self._scripts = {prefix: list(entries) for prefix, entries in script.items()}
            self._shared = None
        else:
            self._scripts = {}
            self._shared = list(script)
        self._positions: dict[str, int] = {}
        self._lock = threading.Lock()
        self.calls: list[tuple[str, float]] = []

    def _script_for(self, url: str) -> tuple[str, list]:
        if self._shared is not None:
            return "*", self._shared
        for prefix, entries in self._scripts.items():
            if url.startswith(prefix):
                return prefix, entries
        raise AssertionError(f"no script configured for {url}")

    def request_count(self, url_prefix: str = "*") -> int:
        if url_prefix == "*":
            return len(self.calls)
        return sum(1 for url, _ in self.calls if url.startswith(url_prefix))

    def post_image(self, url, image, *, filename, timeout, headers):
        with self._lock:
            key, entries = self._script_for(url)
            position = self._positions.get(key, 0)
            if position >= len(entries):
                raise AssertionError(f"script for {key} exhausted after {position} requests")
            self._positions[key] = position + 1
            self.calls.append((url, timeout))
            entry = entries[position]
        if entry == "timeout":
            raise TransportTimeout("scripted timeout")
        if entry == "connect_error":
            raise TransportConnectError("scripted connection failure")
        if isinstance(entry, int):
            body = "" if entry == 200 else "Service Unavailable"
            return TransportResponse(status_code=entry, text=body)
        status, body = entry
        return TransportResponse(status_code=status, text=body)


class FixtureTransport:
    """Digest-keyed fixture backend: sha256(image bytes) -> 200 body.

    The in-process equivalent of the mock server's fixture mode; unmapped
    digests get a 404.  Thread-safe; counts requests.
    """

    def __init__(self, fixture_map: Mapping[str, str]):
        self._fixtures = dict(fixture_map)
        self._lock = threading.Lock()
        self.calls: list[str] = []

    @staticmethod
    def digest(image: bytes) -> str:
        return hashlib.sha256(image).hexdigest()

    def post_image(self, url, image, *, filename, timeout, headers):
        digest = self.digest(image)
        with self._lock:
            self.calls.append(digest)
        body = self._fixtures.get(digest)
        if body is None:
            return TransportResponse(status_code=404, text='{"error":"no fixture for digest"}')
        return TransportResponse(status_code=200, text=body)


class StaticColorResolver:
    """Always answers with one color; records invocation count."""

    def __init__(self, color: str):
        self.color = color
        self.invocations = 0

    def resolve(self, image: bytes) -> str:
        self.invocations += 1
        return self.color


class FailingColorResolver:
    """Raises on every call (exercises the absorb-failures contract)."""

    def __init__(self, exc: Exception | None = None):
        self.exc = exc or RuntimeError("resolver unavailable")
        self.invocations = 0

    def resolve(self, image: bytes) -> str:
        self.invocations += 1
        raise self.exc
