#!/usr/bin/env python3
"""Standalone scorer for golden-report verification.

Recomputes the evaluation report from a gold split file and a predictions
file WITHOUT importing the fashiontag package: validation, matching, set F1,
interval math, and serialization are all reimplemented here from the
documented report contract (see README, "Evaluation report schema").  The
test suite asserts that this script and the library produce byte-identical
report JSON for the committed fixtures.

Usage:
    python scripts/independent_scoring.py --gold gold.jsonl --pred preds.jsonl [--out report.json]
"""

from __future__ import annotations

import argparse
import json
import math
import sys

CATEGORY_ORDER = ("top", "bottom", "dress", "layer", "shoes", "accessory")
REPORT_SCHEMA = "attribute-eval-report/v1"


# -- schema validation (mirrors the documented validity definition) ------------

def parse_prediction(text: str):
    """Returns the payload dict if text is a valid 5-field record, else None."""
    try:
        payload = json.loads(text)
    except (ValueError, RecursionError):
        return None
    if not isinstance(payload, dict):
        return None
    for key in ("category", "primary_color", "material"):
        if not isinstance(payload.get(key), str):
            return None
    for key in ("style_tags", "occasion_tags"):
        value = payload.get(key)
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            return None
    return payload


def norm(value: str) -> str:
    return value.strip().lower()


def tag_set(tags) -> set:
    return {norm(t) for t in tags}


def f1(predicted: set, gold: set) -> float:
    if not predicted and not gold:
        return 1.0
    if not predicted or not gold:
        return 0.0
    return 2.0 * len(predicted & gold) / (len(predicted) + len(gold))


# -- exact binomial interval by CDF bisection -----------------------------------

def binom_cdf_fn(k: int, n: int):
    log_combs = [
        math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1)
        for i in range(min(k, n) + 1)
    ]

    def cdf(p: float) -> float:
        if k >= n:
            return 1.0
        if p <= 0.0:
            return 1.0
        if p >= 1.0:
            return 0.0
        log_p = math.log(p)
        log_q = math.log1p(-p)
        return min(1.0, math.fsum(
            math.exp(c + i * log_p + (n - i) * log_q) for i, c in enumerate(log_combs)
        ))

    return cdf


def bisect_root(func, lo: float, hi: float, tol: float = 1e-12) -> float:
    f_lo = func(lo)
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if hi - lo < tol:
            return mid
        f_mid = func(mid)
        if (f_lo <= 0) == (f_mid <= 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def clopper_pearson(k: int, n: int, confidence: float) -> tuple[float, float]:
    alpha = 1.0 - confidence
    if k == 0:
        low = 0.0
    else:
        cdf = binom_cdf_fn(k - 1, n)
        low = bisect_root(lambda p: (1.0 - alpha / 2.0) - cdf(p), 0.0, 1.0)
    if k == n:
        high = 1.0
    else:
        cdf = binom_cdf_fn(k, n)
        high = bisect_root(lambda p: alpha / 2.0 - cdf(p), 0.0, 1.0)
    return low, high


# -- scoring --------------------------------------------------------------------

def read_jsonl(path: str):
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield json.loads(line)


def r6(value):
    return None if value is None else round(value, 6)


def score(gold_path: str, pred_path: str, confidence: float) -> dict:
    predictions = {}
    for row in read_jsonl(pred_path):
        predictions[str(row["item_id"])] = str(row["prediction_text"])

    n_total = 0
    n_valid = 0
    cat_correct = 0
    mat_correct = 0
    col_correct = 0
    style_f1s = []
    occ_f1s = []
    per_cat: dict[str, dict] = {}

    for row in read_jsonl(gold_path):
        item_id = str(row["raw"]["item_id"])
        gold = row["record"]
        if item_id not in predictions:
            raise SystemExit(f"no prediction for gold item {item_id}")
        n_total += 1
        payload = parse_prediction(predictions[item_id])
        gold_cat = gold["category"]
        if payload is None:
            continue
        n_valid += 1
        cat_ok = norm(payload["category"]) == norm(gold_cat)
        mat_ok = norm(payload["material"]) == norm(gold["material"])
        col_ok = norm(payload["primary_color"]) == norm(gold["primary_color"])
        cat_correct += cat_ok
        mat_correct += mat_ok
        col_correct += col_ok
        style_f1s.append(f1(tag_set(payload["style_tags"]), tag_set(gold["style_tags"])))
        occ_f1s.append(
            f1(tag_set(payload["occasion_tags"]), tag_set(gold["occasion_tags"]))
        )
        bucket = per_cat.setdefault(gold_cat, {"n": 0, "cat": 0, "mat": 0})
        bucket["n"] += 1
        bucket["cat"] += cat_ok
        bucket["mat"] += mat_ok

    if n_total == 0:
        raise SystemExit("no gold rows")
    if n_valid == 0:
        raise SystemExit("no valid predictions")

    order = {cat: i for i, cat in enumerate(CATEGORY_ORDER)}
    rows = []
    for cat, bucket in per_cat.items():
        low, high = clopper_pearson(bucket["cat"], bucket["n"], confidence)
        rows.append(
            {
                "category": cat,
                "n": bucket["n"],
                "category_acc": r6(bucket["cat"] / bucket["n"]),
                "material_acc": r6(bucket["mat"] / bucket["n"]),
                "ci_low": r6(low),
                "ci_high": r6(high),
            }
        )
    rows.sort(key=lambda row: (-row["n"], order.get(row["category"], len(order))))

    overall_low, overall_high = clopper_pearson(cat_correct, n_valid, confidence)
    return {
        "schema": REPORT_SCHEMA,
        "confidence": r6(confidence),
        "n_total": n_total,
        "n_valid": n_valid,
        "validity_rate": r6(n_valid / n_total),
        "category_acc": r6(cat_correct / n_valid),
        "material_acc": r6(mat_correct / n_valid),
        "color_acc": r6(col_correct / n_valid),
        "style_f1_mean": r6(math.fsum(style_f1s) / len(style_f1s)),
        "occasion_f1_mean": r6(math.fsum(occ_f1s) / len(occ_f1s)),
        "category_ci_low": r6(overall_low),
        "category_ci_high": r6(overall_high),
        "per_category": rows,
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--gold", required=True)
    parser.add_argument("--pred", required=True)
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--confidence", type=float, default=0.95)
    args = parser.parse_args()

    report = score(args.gold, args.pred, args.confidence)
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
