#!/usr/bin/env python3
"""Generate the deterministic fixture sets used by tests and demos.

Three fixture families, all reproducible from fixed seeds:

* ``corpus``      — a raw annotation JSONL with the reference category
                    distribution (4,610 mappable rows) plus discardable rows.
* ``eval-golden`` — a 40-sample gold split file and a predictions file with
                    crafted per-sample outcomes (invalid JSON, wrong fields,
                    tag perturbations) for golden-report tests.
* ``mock-images`` — solid-color PNGs plus a digest->body fixture map the
                    mock inference server can serve.

Usage:
    python scripts/make_fixtures.py corpus --out-dir fixtures/
    python scripts/make_fixtures.py eval-golden --out-dir tests/data/golden/
    python scripts/make_fixtures.py mock-images --out-dir fixtures/mock/
"""

from __future__ import annotations

import argparse
import hashlib
import json
from pathlib import Path

from fashiontag.jsonl import write_jsonl
from fashiontag.labeling import default_ruleset, map_annotations
from fashiontag.schema import (
    CATEGORIES,
    AttributeRecord,
    default_vocabulary,
    serialize_compact,
)
from fashiontag.synthetic import (
    generate_annotations,
    generate_discard_annotations,
)

GOLDEN_COUNTS = {"dress": 12, "top": 12, "bottom": 8, "layer": 5, "shoes": 3}
GOLDEN_SEED = 4242


def cmd_corpus(args) -> None:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = generate_annotations(seed=args.seed) + generate_discard_annotations(40)
    write_jsonl(out_dir / "raw.jsonl", (r.to_dict() for r in rows))
    print(f"wrote {len(rows)} rows to {out_dir / 'raw.jsonl'}")


def golden_gold_pairs():
    vocab = default_vocabulary()
    rules = default_ruleset(vocab)
    annotations = generate_annotations(GOLDEN_COUNTS, seed=GOLDEN_SEED, id_prefix="gold")
    return map_annotations(annotations, rules, vocab).mapped


def perturb_prediction(index: int, gold: AttributeRecord) -> str:
    """Deterministic per-index outcome pattern for the golden fixture."""
    kind = index % 10
    payload = gold.to_dict()
    if kind == 0:
        return "The image shows a garment on a plain background."
    if kind == 1:
        del payload["occasion_tags"]
        return json.dumps(payload, separators=(",", ":"))
    if kind == 2:
        wrong = CATEGORIES[(CATEGORIES.index(gold.category) + 1) % len(CATEGORIES)]
        payload["category"] = wrong
    elif kind == 3:
        payload["material"] = gold.material.title()  # still correct, case-insensitive
    elif kind == 4:
        payload["material"] = "papier-mache"
    elif kind == 5 and payload["style_tags"]:
        payload["style_tags"] = payload["style_tags"][:-1]
    elif kind == 6 and "vintage" not in payload["style_tags"]:
        payload["style_tags"] = payload["style_tags"] + ["vintage"]
    elif kind == 7:
        payload["occasion_tags"] = ["travel"]
    return json.dumps(payload, separators=(",", ":"))


def cmd_eval_golden(args) -> None:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = golden_gold_pairs()
    write_jsonl(
        out_dir / "gold.jsonl",
        ({"raw": raw.to_dict(), "record": record.to_dict()} for raw, record in pairs),
    )
    write_jsonl(
        out_dir / "preds.jsonl",
        (
            {"item_id": raw.item_id, "prediction_text": perturb_prediction(i, record)}
            for i, (raw, record) in enumerate(pairs)
        ),
    )
    print(f"wrote {len(pairs)} gold/pred pairs to {out_dir}")


def mock_image_fixtures(n: int = 20, seed: int = 11):
    """(filename, png_bytes, body) triples for the mock server fixture mode."""
    from PIL import Image
    from io import BytesIO

    from fashiontag.rng import SplitMix64

    vocab = default_vocabulary()
    rng = SplitMix64(seed)
    triples = []
    for i in range(n):
        rgb = (rng.randbelow(256), rng.randbelow(256), rng.randbelow(256))
        img = Image.new("RGB", (48, 48), rgb)
        buf = BytesIO()
        img.save(buf, format="PNG")
        png = buf.getvalue()
        record = AttributeRecord(
            category=vocab.categories[rng.randbelow(6)],
            primary_color=vocab.colors[rng.randbelow(16)],
            material=vocab.materials[rng.randbelow(len(vocab.materials))],
            style_tags=tuple(sorted({vocab.style_tags[rng.randbelow(19)]})),
            occasion_tags=tuple(sorted({vocab.occasion_tags[rng.randbelow(15)]})),
        )
        triples.append((f"mock-{i:03d}.png", png, serialize_compact(record)))
    return triples


def cmd_mock_images(args) -> None:
    out_dir = Path(args.out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    fixture_map = {}
    for filename, png, body in mock_image_fixtures(args.count):
        (out_dir / "images" / filename).write_bytes(png)
        fixture_map[hashlib.sha256(png).hexdigest()] = body
    (out_dir / "fixture_map.json").write_text(json.dumps(fixture_map, indent=2) + "\n")
    listing = "\n".join(
        str(out_dir / "images" / name) for name, _, _ in mock_image_fixtures(args.count)
    )
    (out_dir / "batch_list.txt").write_text(listing + "\n")
    print(f"wrote {args.count} images, fixture_map.json, batch_list.txt to {out_dir}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=2024)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("eval-golden")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval_golden)

    p = sub.add_parser("mock-images")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=20)
    p.set_defaults(func=cmd_mock_images)

    args = parser.parse_args()
    args.func(args)


if __name__ == "__main__":
    main()
