"""CLI for the mock inference server.

Examples:
    fashiontag-mockserver --mode fixture --fixtures fixture_map.json \
        --vocab ../src/fashiontag/data/vocabulary.json --port 8900
    fashiontag-mockserver --mode flaky --script 503,503,200 --cold-start-delay 1.5
    fashiontag-mockserver --mode echo_sidecar --corpus tests/corpus/
"""

from __future__ import annotations

import argparse
import json
import os
from pathlib import Path

import uvicorn

from .app import MockBehavior, create_app, load_vocabulary_doc

ENV_VOCAB = "FASHIONTAG_VOCAB"


def parse_script(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise SystemExit(f"--script must be comma-separated status codes, got {text!r}")


def build_behavior(args) -> MockBehavior:
    vocab_doc = None
    if args.mode == "fixture":
        vocab_path = args.vocab or os.environ.get(ENV_VOCAB)
        if not vocab_path:
            raise SystemExit(f"fixture mode needs --vocab or ${ENV_VOCAB}")
        vocab_doc = load_vocabulary_doc(vocab_path)

    fixture_map = {}
    if args.fixtures:
        fixture_map = json.loads(Path(args.fixtures).read_text(encoding="utf-8"))

    success_body = None
    if args.success_body:
        success_body = Path(args.success_body).read_text(encoding="utf-8").strip()

    kwargs = dict(
        mode=args.mode,
        fixture_map=fixture_map,
        corpus_dir=Path(args.corpus) if args.corpus else None,
        flaky_script=parse_script(args.script) if args.script else (),
        cold_start_delay=args.cold_start_delay,
        vocab_doc=vocab_doc,
    )
    if success_body:
        kwargs["success_body"] = success_body
    return MockBehavior(**kwargs)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mode", choices=["fixture", "echo_sidecar", "flaky", "real"],
                        default="fixture")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8900)
    parser.add_argument("--fixtures", help="digest->body JSON map (fixture mode)")
    parser.add_argument("--corpus", help="image+sidecar directory (echo_sidecar mode)")
    parser.add_argument("--script", help="comma-separated statuses (flaky mode)")
    parser.add_argument("--cold-start-delay", type=float, default=0.0)
    parser.add_argument("--success-body", help="file with the flaky-mode 200 body")
    parser.add_argument("--vocab", help=f"vocabulary JSON path (or ${ENV_VOCAB})")
    parser.add_argument("--weights", help="local weights path/ref (real mode)")
    args = parser.parse_args()

    if args.mode == "real":
        if not args.weights:
            raise SystemExit("real mode needs --weights")
        from .real_adapter import create_real_app

        app = create_real_app(args.weights)
    else:
        try:
            app = create_app(build_behavior(args))
        except ValueError as exc:
            raise SystemExit(str(exc))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
