#!/usr/bin/env python3
"""End-to-end pipeline demo on synthetic data, no backend required.

Generates a raw corpus, ingests and splits it, fabricates model predictions
with a controllable error rate, then renders the evaluation and baseline
tables.  Everything lands in --out-dir; rerunning with the same seed
reproduces every file byte for byte.

Usage:
    python scripts/run_pipeline_demo.py --out-dir /tmp/demo [--seed 7] [--noise 0.2]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from fashiontag.cli import run
from fashiontag.jsonl import read_jsonl, write_jsonl
from fashiontag.rng import SplitMix64
from fashiontag.schema import CATEGORIES, AttributeRecord, serialize_compact
from fashiontag.synthetic import generate_annotations, generate_discard_annotations

DEMO_COUNTS = {"dress": 120, "top": 100, "bottom": 70, "layer": 40, "shoes": 12, "accessory": 4}


def fabricate_predictions(gold_path: Path, pred_path: Path, seed: int, noise: float) -> None:
    """Predictions that are mostly exact, with seeded corruption."""
    rng = SplitMix64(seed)
    noise_cut = int(noise * 1000)
    rows = []
    for payload in read_jsonl(gold_path):
        gold = AttributeRecord.from_dict(payload["record"])
        roll = rng.randbelow(1000)
        if roll < noise_cut // 4:
            text = "The model produced a caption instead of JSON."
        elif roll < noise_cut:
            wrong = CATEGORIES[(CATEGORIES.index(gold.category) + 1) % len(CATEGORIES)]
            text = serialize_compact(
                AttributeRecord(wrong, gold.primary_color, gold.material,
                                gold.style_tags, gold.occasion_tags)
            )
        else:
            text = serialize_compact(gold)
        rows.append({"item_id": payload["raw"]["item_id"], "prediction_text": text})
    write_jsonl(pred_path, rows)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--noise", type=float, default=0.2,
                        help="fraction of predictions corrupted")
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    raw = out / "raw.jsonl"
    rows = generate_annotations(DEMO_COUNTS, seed=args.seed) + generate_discard_annotations(10)
    write_jsonl(raw, (r.to_dict() for r in rows))

    def step(name: str, argv: list[str]) -> None:
        print(f"\n=== {name}: fashiontag {' '.join(argv)}")
        code = run(argv)
        if code != 0:
            sys.exit(f"{name} failed with exit code {code}")

    mapped = out / "mapped.jsonl"
    step("ingest", ["ingest", "--in", str(raw), "--out", str(mapped),
                    "--discards", str(out / "discards.jsonl")])
    step("split", ["split", "--in", str(mapped), "--out-dir", str(out / "splits"),
                   "--seed", str(args.seed)])

    gold = out / "splits" / "test.jsonl"
    preds = out / "preds.jsonl"
    fabricate_predictions(gold, preds, seed=args.seed + 1, noise=args.noise)

    step("eval", ["eval", "--gold", str(gold), "--pred", str(preds),
                  "--report", str(out / "report.json")])
    step("baseline", ["baseline", "--train", str(out / "splits" / "train.jsonl"),
                      "--gold", str(gold), "--pred", str(preds), "--oracle"])
    step("expand", ["expand", "--in", str(gold), "--out", str(out / "expanded.jsonl")])

    manifest = json.loads((out / "splits" / "manifest.json").read_text())
    print(f"\ndemo complete: splits {manifest['counts']} in {out}")


if __name__ == "__main__":
    main()
