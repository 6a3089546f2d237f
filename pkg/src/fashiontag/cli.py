"""Command-line entry point wiring the pipeline stages together.

Subcommands: ingest, split, eval, baseline, analyze, expand, report.
Exit codes: 0 success, 1 usage error, 2 data error, 3 backend error.
Machine-readable output and rendered tables go to stdout; diagnostics and
structured error JSON go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import evaluation, gateway, labeling, render
from .jsonl import JsonlError, read_jsonl, write_jsonl
from .resolver import PaletteColorResolver
from .schema import (
    AttributeRecord,
    VocabularyError,
    default_vocabulary,
    load_vocabulary,
    serialize_compact,
    serialize_compact_expanded,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3

ENV_PRIMARY_URL = "FASHIONTAG_PRIMARY_URL"
ENV_FALLBACK_URL = "FASHIONTAG_FALLBACK_URL"
ENV_FALLBACK_API_KEY = "FASHIONTAG_FALLBACK_API_KEY"
ENV_PARALLELISM = "FASHIONTAG_PARALLELISM"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; route through our contract.
    def error(self, message):
        raise UsageError(message)


def _emit_error(kind: str, message: str, **extra) -> None:
    payload = {"error": kind, "message": message}
    payload.update(extra)
    print(json.dumps(payload), file=sys.stderr)


def _resolve(value, default):
    return default if value is None else value


def _load_vocab(path: Optional[str]):
    return load_vocabulary(path) if path else default_vocabulary()


def _load_rules(path: Optional[str], vocab) -> labeling.RuleSet:
    if path:
        return labeling.load_ruleset_file(path, vocab)
    return labeling.default_ruleset(vocab)


def _load_expansion(path: Optional[str], vocab) -> gateway.ExpansionRules:
    if path:
        return gateway.load_expansion_rules_file(path, vocab)
    return gateway.default_expansion_rules(vocab)


def _read_annotations(path: str, adapt: bool = False) -> list[labeling.RawAnnotation]:
    rows = []
    for payload in read_jsonl(path):
        try:
            if adapt:
                rows.append(labeling.adapt_source_row(payload))
            else:
                rows.append(labeling.RawAnnotation.from_dict(payload))
        except (KeyError, labeling.RulesetError) as exc:
            raise DataError(f"{path}: bad annotation row: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no annotations")
    return rows


def _read_pairs(path: str) -> list[tuple[labeling.RawAnnotation, AttributeRecord]]:
    """Read a mapped/split file: one {"raw":..., "record":...} object per line."""
    pairs = []
    for payload in read_jsonl(path):
        try:
            pairs.append(
                (
                    labeling.RawAnnotation.from_dict(payload["raw"]),
                    AttributeRecord.from_dict(payload["record"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: malformed mapped row: {exc}") from None
    if not pairs:
        raise DataError(f"{path}: no rows")
    return pairs


def _pair_dict(raw: labeling.RawAnnotation, record: AttributeRecord) -> dict:
    return {"raw": raw.to_dict(), "record": record.to_dict()}


# -- subcommands -----------------------------------------------------------------

def _cmd_ingest(args) -> int:
    vocab = _load_vocab(args.vocab)
    rules = _load_rules(args.rules, vocab)
    annotations = _read_annotations(args.input, adapt=args.adapt)

    audit = labeling.audit_categories(annotations, rules)
    if not audit.ok:
        raise DataError(
            "rules file does not cover fine categories: " + ", ".join(audit.uncovered)
        )

    result = labeling.map_annotations(annotations, rules, vocab)
    if not result.mapped:
        raise DataError("no rows mapped")
    write_jsonl(args.output, (_pair_dict(raw, rec) for raw, rec in result.mapped))
    if args.discards:
        write_jsonl(
            args.discards,
            ({"raw": raw.to_dict(), "reason": reason} for raw, reason in result.discarded),
        )
    logging.info(
        "ingest: %d mapped, %d discarded (ruleset %s)",
        len(result.mapped), len(result.discarded), rules.checksum,
    )
    table = labeling.category_distribution([rec for _, rec in result.mapped])
    sys.stdout.write(render.render_distribution_table(table))
    return EXIT_OK


def _parse_ratios(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise UsageError(f"--ratios must be three comma-separated numbers, got {text!r}")
    if len(parts) != 3:
        raise UsageError(f"--ratios must have exactly three parts, got {text!r}")
    return parts


def _cmd_split(args) -> int:
    vocab = _load_vocab(args.vocab)
    rules = _load_rules(args.rules, vocab)
    pairs = _read_pairs(args.input)
    ratios = _parse_ratios(_resolve(args.ratios, "0.8,0.1,0.1"))
    try:
        split = labeling.split_dataset(
            pairs, ratios=ratios, seed=_resolve(args.seed, 42),
            ruleset_checksum=rules.checksum,
        )
    except ValueError as exc:
        raise UsageError(str(exc))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", split.train), ("val", split.val), ("test", split.test)):
        write_jsonl(out_dir / f"{name}.jsonl", (_pair_dict(r, rec) for r, rec in part))
    manifest = {
        "seed": split.seed,
        "ratios": list(split.ratios),
        "ruleset_checksum": split.ruleset_checksum,
        "counts": {
            "train": len(split.train),
            "val": len(split.val),
            "test": len(split.test),
            "total": len(pairs),
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(json.dumps(manifest))
    return EXIT_OK


def _read_predictions(path: str) -> dict[str, str]:
    preds = {}
    for payload in read_jsonl(path):
        try:
            preds[str(payload["item_id"])] = str(payload["prediction_text"])
        except KeyError as exc:
            raise DataError(f"{path}: prediction row missing field {exc}") from None
    if not preds:
        raise DataError(f"{path}: no predictions")
    return preds


def _build_samples(gold_path: str, pred_path: str) -> list[evaluation.EvalSample]:
    pairs = _read_pairs(gold_path)
    preds = _read_predictions(pred_path)
    missing = [raw.item_id for raw, _ in pairs if raw.item_id not in preds]
    if missing:
        raise DataError(
            f"{pred_path}: no prediction for {len(missing)} gold item(s), "
            f"first missing: {missing[0]}"
        )
    return [
        evaluation.EvalSample(
            item_id=raw.item_id, prediction_text=preds[raw.item_id], gold=record
        )
        for raw, record in pairs
    ]


def _cmd_eval(args) -> int:
    vocab = _load_vocab(args.vocab)
    samples = _build_samples(args.gold, args.pred)
    try:
        report = evaluation.evaluate(
            samples, vocab, confidence=_resolve(args.confidence, 0.95)
        )
    except evaluation.EvaluationError as exc:
        raise DataError(str(exc))
    rendered = evaluation.report_to_json(report)
    if args.report:
        Path(args.report).write_text(rendered)
    sys.stdout.write(
        render.render_results_table(report, method=_resolve(args.method, "model"))
    )
    sys.stdout.write("\n")
    sys.stdout.write(render.render_per_category_table(report))
    return EXIT_OK


def _cmd_baseline(args) -> int:
    vocab = _load_vocab(args.vocab)
    train_pairs = _read_pairs(args.train)
    table = evaluation.build_default_table([rec for _, rec in train_pairs])
    samples = _build_samples(args.gold, args.pred)

    confidence = _resolve(args.confidence, 0.95)
    scores = [evaluation.score_sample(s, vocab) for s in samples]
    try:
        direct = evaluation.aggregate(scores, confidence=confidence)
    except evaluation.EvaluationError as exc:
        raise DataError(str(exc))

    if args.oracle:
        categories: list[Optional[str]] = [s.gold.category for s in samples]
    else:
        from .schema import ParseOutcome, parse_strict

        categories = []
        for sample in samples:
            report = parse_strict(sample.prediction_text, vocab, mode="schema_only")
            valid = report.outcome is ParseOutcome.VALID
            categories.append(report.record.category if valid else None)
    try:
        baseline = evaluation.baseline_evaluate(
            samples, categories, table, confidence=confidence
        )
    except evaluation.EvaluationError as exc:
        raise DataError(str(exc))

    if args.report:
        payload = {
            "direct": json.loads(evaluation.report_to_json(direct)),
            "baseline": json.loads(evaluation.report_to_json(baseline)),
            "oracle": args.oracle,
        }
        Path(args.report).write_text(json.dumps(payload, indent=2) + "\n")
    sys.stdout.write(render.render_baseline_table(direct, baseline, oracle=args.oracle))
    return EXIT_OK


def _backend_config(args, url: str, api_key: Optional[str] = None) -> gateway.BackendConfig:
    return gateway.BackendConfig(
        endpoint_url=url,
        initial_timeout=_resolve(args.timeout, 120.0),
        subsequent_timeout=_resolve(args.subsequent_timeout, 30.0),
        max_retries=_resolve(args.max_retries, 2),
        retry_backoff=(_resolve(args.retry_backoff, 2.0),),
        api_key=api_key,
    )


def _cmd_analyze(args) -> int:
    vocab = _load_vocab(args.vocab)
    endpoint = args.endpoint or os.environ.get(ENV_PRIMARY_URL)
    if not endpoint:
        raise UsageError(f"--endpoint or ${ENV_PRIMARY_URL} is required")
    config = _backend_config(args, endpoint)
    fallback_url = args.fallback_url or os.environ.get(ENV_FALLBACK_URL)
    fallback = (
        _backend_config(args, fallback_url, os.environ.get(ENV_FALLBACK_API_KEY))
        if fallback_url
        else None
    )
    resolver = PaletteColorResolver() if args.resolve_color else None
    rules = _load_expansion(args.expansion_rules, vocab) if (args.expand or args.batch) else None

    if args.batch:
        refs = [
            line.strip()
            for line in Path(args.batch).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if not refs:
            raise DataError(f"{args.batch}: no image refs")
        parallelism = args.parallelism or int(os.environ.get(ENV_PARALLELISM, "4"))
        records, summary, _ = gateway.batch_analyze(
            refs,
            config,
            rules,
            fallback=fallback,
            resolver=resolver,
            vocab=vocab,
            parallelism=parallelism,
        )
        if args.out:
            write_jsonl(args.out, (rec.to_dict() for rec in records))
        else:
            for rec in records:
                print(serialize_compact_expanded(rec))
        if args.summary:
            Path(args.summary).write_text(json.dumps(summary.to_dict(), indent=2) + "\n")
        print(json.dumps(summary.to_dict()), file=sys.stderr)
        if summary.n_ok == 0:
            raise gateway.GatewayError("batch produced no successful records")
        return EXIT_OK

    if not args.image:
        raise UsageError("--image or --batch is required")
    image = Path(args.image).read_bytes()
    if fallback is not None:
        result = gateway.analyze_with_fallback(image, config, fallback, vocab=vocab)
    else:
        result = gateway.analyze(image, config, vocab=vocab)
    result = gateway.apply_color_resolution(image, result, resolver, vocab)
    logging.info(
        "analyze: backend=%s attempts=%d latency=%.3fs color=%s",
        result.backend_used, result.attempts, result.latency, result.color_resolved_by,
    )
    if args.expand:
        print(serialize_compact_expanded(gateway.expand(result.record, rules)))
    else:
        print(serialize_compact(result.record))
    return EXIT_OK


def _cmd_expand(args) -> int:
    vocab = _load_vocab(args.vocab)
    rules = _load_expansion(args.expansion_rules, vocab)
    records = []
    for payload in read_jsonl(args.input):
        source = payload.get("record", payload)  # accept bare records or split rows
        try:
            records.append(AttributeRecord.from_dict(source))
        except (KeyError, TypeError) as exc:
            raise DataError(f"{args.input}: malformed record: {exc}") from None
    if not records:
        raise DataError(f"{args.input}: no records")
    expanded = [gateway.expand(record, rules) for record in records]
    if args.out:
        write_jsonl(args.out, (rec.to_dict() for rec in expanded))
    else:
        for rec in expanded:
            print(serialize_compact_expanded(rec))
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        text = Path(args.input).read_text(encoding="utf-8")
        report = evaluation.report_from_json(text)
    except (OSError, ValueError) as exc:
        raise DataError(f"{args.input}: {exc}")
    sys.stdout.write(
        render.render_results_table(report, method=_resolve(args.method, "model"))
    )
    sys.stdout.write("\n")
    sys.stdout.write(render.render_per_category_table(report))
    return EXIT_OK


# -- parser wiring ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fashiontag", description=__doc__)
    parser.add_argument("--vocab", help="vocabulary JSON file (default: packaged)")
    parser.add_argument("--config", help="JSON file supplying defaults for unset flags")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    p = sub.add_parser("ingest", help="map raw annotations to attribute records")
    p.add_argument("--rules", help="label rules JSON (default: packaged)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--discards", help="optional JSONL of discarded rows")
    p.add_argument("--adapt", action="store_true",
                   help="accept upstream column aliases (id/image/category/...)")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("split", help="deterministic train/val/test split")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--ratios")
    p.add_argument("--rules", help="label rules JSON for the manifest checksum")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("eval", help="score predictions against a gold split")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report", help="write the machine-readable report here")
    p.add_argument("--confidence", type=float, help="CI level (default 0.95)")
    p.add_argument("--method", help="row label in the rendered table (default: model)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("baseline", help="category-then-defaults comparison")
    p.add_argument("--train", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--oracle", action="store_true", help="use gold categories")
    p.add_argument("--report", help="write both reports as JSON here")
    p.add_argument("--confidence", type=float, help="CI level (default 0.95)")
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("analyze", help="call the inference backend")
    p.add_argument("--image", help="single image file")
    p.add_argument("--batch", help="file listing one image path per line")
    p.add_argument("--endpoint", help=f"backend base URL (or ${ENV_PRIMARY_URL})")
    p.add_argument("--fallback-url", help=f"fallback base URL (or ${ENV_FALLBACK_URL})")
    p.add_argument("--expand", action="store_true", help="emit 8-field records")
    p.add_argument("--resolve-color", action="store_true",
                   help="resolve unknown colors with the palette resolver")
    p.add_argument("--expansion-rules", help="expansion rules JSON (default: packaged)")
    p.add_argument("--timeout", type=float, help="first-attempt timeout (default 120)")
    p.add_argument("--subsequent-timeout", type=float, help="later-attempt timeout (default 30)")
    p.add_argument("--max-retries", type=int, help="retries after the first attempt (default 2)")
    p.add_argument("--retry-backoff", type=float, help="seconds between retries (default 2)")
    p.add_argument("--parallelism", type=int, help=f"batch workers (or ${ENV_PARALLELISM})")
    p.add_argument("--out", help="batch output JSONL")
    p.add_argument("--summary", help="batch summary JSON file")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("expand", help="expand 5-field records to the 8-field schema")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--rules", dest="expansion_rules", help="expansion rules JSON")
    p.add_argument("--out", help="output JSONL (default: stdout)")
    p.set_defaults(func=_cmd_expand)

    p = sub.add_parser("report", help="render a saved report JSON as tables")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--method")
    p.set_defaults(func=_cmd_report)

    return parser


def _apply_config_defaults(args) -> None:
    """Fill unset optional flags from the --config JSON file, if given."""
    if not getattr(args, "config", None):
        return
    try:
        defaults = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise DataError(f"config file {args.config}: {exc}") from None
    if not isinstance(defaults, dict):
        raise DataError(f"config file {args.config}: expected a JSON object")
    for key, value in defaults.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) in (None, False):
            setattr(args, attr, value)


def run(argv: Sequence[str]) -> int:
    """Dispatch one invocation; returns the exit code (never raises)."""
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required")
        _apply_config_defaults(args)
        return args.func(args)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except (DataError, JsonlError, labeling.RulesetError, labeling.EmptyDatasetError,
            gateway.ExpansionRulesError, VocabularyError, evaluation.EvaluationError) as exc:
        _emit_error("data", str(exc))
        return EXIT_DATA
    except FileNotFoundError as exc:
        _emit_error("data", f"file not found: {exc.filename}")
        return EXIT_DATA
    except gateway.BackendUnavailableError as exc:
        _emit_error("backend_unavailable", str(exc), attempts=exc.attempts)
        return EXIT_BACKEND
    except gateway.MalformedOutputError as exc:
        _emit_error("malformed_output", str(exc), raw_text=exc.raw_text)
        return EXIT_BACKEND
    except gateway.GatewayError as exc:
        _emit_error("backend", str(exc))
        return EXIT_BACKEND


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
