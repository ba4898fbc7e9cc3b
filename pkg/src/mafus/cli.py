"""Command-line entry point.

Subcommands: run (full pipeline), synth (write a synthetic cohort CSV),
explain (attribute rows of a CSV against a saved model artifact), and
serve (HTTP service around an artifact).

Exit codes: 0 success, 2 config error, 3 data error, 4 training error,
5 explanation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .artifact import load_artifact
from .cohort import write_csv
from .errors import ConfigError, DataError, ExplanationError, MafusError, TrainingError
from .explain import BackgroundSet, explain_sample
from .pipeline import PipelineConfig, StageFailure, run_pipeline
from .synth import gen_synthetic

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4
EXIT_EXPLAIN = 5


def _error_exit_code(exc: MafusError) -> int:
    if isinstance(exc, StageFailure):
        return exc.exit_code
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, TrainingError):
        return EXIT_TRAINING
    if isinstance(exc, ExplanationError):
        return EXIT_EXPLAIN
    return EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mafus",
                                     description="Mortality-risk classifier toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the full pipeline from a config file")
    run.add_argument("--config", required=True, help="path to a JSON run config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="override the output directory")

    synth = sub.add_parser("synth", help="generate a synthetic cohort CSV")
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--prevalence", type=float, required=True)
    synth.add_argument("--signal", type=float, required=True)
    synth.add_argument("--seed", type=int, default=1)
    synth.add_argument("--out", required=True, help="output CSV path")
    synth.add_argument("--exact-counts", action="store_true",
                       help="force exactly round(prevalence*n) positive rows")

    explain = sub.add_parser("explain", help="explain rows of a CSV with a saved model")
    explain.add_argument("--model", required=True, help="model artifact path")
    explain.add_argument("--input", required=True,
                         help="CSV with the model's selected feature columns (raw units)")
    explain.add_argument("--out", required=True, help="output directory")
    explain.add_argument("--permutations", type=int, default=200)

    serve = sub.add_parser("serve", help="serve a model artifact over HTTP")
    serve.add_argument("--model", required=True)
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    return parser


def _cmd_run(args) -> int:
    config = PipelineConfig.from_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.output_dir = args.out
    result = run_pipeline(config)
    chosen = result.comparison.chosen
    report = result.comparison.outcomes[chosen].test_report
    print(f"chosen model: {chosen}")
    print(f"test accuracy {report.accuracy:.4f}  auc {report.auc:.4f}  "
          f"f1(Yes) {report.class_f1('Yes'):.4f}")
    print(f"explained: |A|={len(result.partition.A)} |B|={len(result.partition.B)} "
          f"failed={len(result.partition.failed)}")
    print(f"artifacts: {result.output_dir}")
    return 0


def _cmd_synth(args) -> int:
    cohort = gen_synthetic(args.n, args.prevalence, args.signal, args.seed,
                           exact_counts=args.exact_counts)
    write_csv(cohort, args.out)
    positives = int(np.sum(cohort.labels == 1.0))
    print(f"wrote {cohort.n} rows ({positives} positive) to {args.out}")
    return 0


def _read_raw_rows(path, selected: list[str]) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        missing = [f for f in selected if f not in reader.fieldnames]
        if missing:
            raise DataError(f"{path}: missing column {missing[0]!r}")
        rows = []
        for i, record in enumerate(reader):
            try:
                rows.append({f: float(record[f]) for f in selected})
            except (TypeError, ValueError):
                raise DataError(f"{path}: row {i}: unparseable value") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return rows


def _cmd_explain(args) -> int:
    try:
        bundle, digest = load_artifact(args.model)
    except FileNotFoundError:
        raise ConfigError(f"model artifact not found: {args.model}") from None
    if bundle.background is None:
        raise ExplanationError("artifact stores no background set; re-run the pipeline")
    selected = bundle.selected_features
    raw_rows = _read_raw_rows(args.input, selected)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bg = BackgroundSet(bundle.background)
    results = []
    for i, raw in enumerate(raw_rows):
        x = np.empty(len(selected))
        for j, name in enumerate(selected):
            value = raw[name]
            if name in bundle.scaler.stats:
                mean, std = bundle.scaler.stats[name]
                value = (value - mean) / std if std > 0 else value - mean
            x[j] = value
        attribution = explain_sample(bundle.model, x, bg, mode="auto",
                                     permutations=args.permutations, seed=1 + i)
        results.append({
            "row": i,
            "yhat": int(bundle.model.predict(x)),
            "score": float(bundle.model.score(x)),
            "base_value": attribution.base_value,
            "phi": {name: float(attribution.phi[j]) for j, name in enumerate(selected)},
            "method": attribution.method,
            "adjusted": attribution.adjusted,
        })
    with open(out_dir / "explanations.json", "w", encoding="utf-8") as fh:
        json.dump({"artifact_hash": digest, "results": results}, fh,
                  sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    print(f"explained {len(results)} rows -> {out_dir / 'explanations.json'}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.model)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "synth": _cmd_synth,
        "explain": _cmd_explain,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except MafusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _error_exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
