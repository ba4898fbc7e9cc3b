"""End-to-end run orchestration: clean, standardize, select, split,
tune, compare, explain, and emit artifacts.

Every run is driven by one master seed; each random stage derives its
own seed from (master, stage name), so identical configs produce
byte-identical output trees. Artifacts are staged in a scratch
directory and published atomically; a failed stage removes partials.
"""

from __future__ import annotations

import csv
import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .artifact import ModelArtifact, save_artifact
from .cohort import (
    Cohort,
    ScalerStats,
    apply_scaler,
    drop_incomplete,
    encode_categoricals,
    fit_scaler,
    load_csv,
    split,
)
from .errors import ConfigError, MafusError
from .explain import (
    BackgroundSet,
    PartitionAB,
    Attribution,
    ExplainedSample,
    dependence_data,
    feature_order_by_impact,
    force_data,
    partition_run,
    sample_background,
    summary_data,
)
from .learners import ModelConfig, TrainedModel, fit
from .metrics import EvalReport, evaluate, roc_points
from .relevance import RelevanceReport, relevance_scores, select_features
from .schema import default_schema, load_schema
from .seeding import derive_seed
from .synth import gen_synthetic
from .tuning import HyperGrid, default_grid, demo_grid, grid_search, load_grid

ALGORITHM_ORDER = ("svm", "rf", "xgb", "lgbm", "mlp")

STAGE_EXIT_CODES = {
    "config": 2,
    "load": 3,
    "clean": 3,
    "split": 3,
    "standardize": 3,
    "select": 4,
    "tune": 4,
    "compare": 4,
    "explain": 5,
    "emit": 3,
}


class StageFailure(MafusError):
    """A pipeline stage failed; carries the stage tag for diagnostics."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r}: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = STAGE_EXIT_CODES.get(stage, 1)


@dataclass
class PipelineConfig:
    input_csv: str | None = None
    synthetic: dict | None = None
    schema_path: str | None = None
    seed: int = 1
    split_ratio: float = 0.8
    stratified_split: bool = False
    scaler_scope: str = "train"          # train | full (standardize before split)
    relevance_threshold: float = 105.0
    relevance_forced: list[str] = field(default_factory=lambda: ["Gender"])
    relevance_rounds: int = 100
    relevance_max_depth: int = 6
    relevance_learning_rate: float = 0.1
    relevance_importance: str = "splits"
    grids: dict[str, str] = field(default_factory=lambda: {a: "demo" for a in ALGORITHM_ORDER})
    cv_folds: int = 5
    background_size: int = 100
    explain_mode: str = "auto"
    explain_permutations: int = 200
    output_dir: str = "mafus-out"

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {
            "input_csv", "synthetic", "schema", "seed", "split", "scaler_scope",
            "relevance", "grids", "cv_folds", "background_size", "explain", "output_dir",
        }
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config field {unknown[0]!r}")
        cfg = cls()
        cfg.input_csv = doc.get("input_csv")
        if "synthetic" in doc:
            cfg.synthetic = doc["synthetic"]
        cfg.schema_path = doc.get("schema")
        cfg.seed = int(doc.get("seed", cfg.seed))
        split_doc = doc.get("split", {})
        cfg.split_ratio = float(split_doc.get("ratio", cfg.split_ratio))
        cfg.stratified_split = bool(split_doc.get("stratified", cfg.stratified_split))
        cfg.scaler_scope = doc.get("scaler_scope", cfg.scaler_scope)
        rel = doc.get("relevance", {})
        cfg.relevance_threshold = float(rel.get("threshold", cfg.relevance_threshold))
        cfg.relevance_forced = list(rel.get("forced", cfg.relevance_forced))
        cfg.relevance_rounds = int(rel.get("rounds", cfg.relevance_rounds))
        cfg.relevance_max_depth = int(rel.get("max_depth", cfg.relevance_max_depth))
        cfg.relevance_learning_rate = float(rel.get("learning_rate", cfg.relevance_learning_rate))
        cfg.relevance_importance = rel.get("importance", cfg.relevance_importance)
        if "grids" in doc:
            cfg.grids = {str(k): str(v) for k, v in doc["grids"].items()}
        cfg.cv_folds = int(doc.get("cv_folds", cfg.cv_folds))
        cfg.background_size = int(doc.get("background_size", cfg.background_size))
        explain_doc = doc.get("explain", {})
        cfg.explain_mode = explain_doc.get("mode", cfg.explain_mode)
        cfg.explain_permutations = int(explain_doc.get("permutations", cfg.explain_permutations))
        cfg.output_dir = doc.get("output_dir", cfg.output_dir)
        return cfg

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def validate(self) -> None:
        if (self.input_csv is None) == (self.synthetic is None):
            raise ConfigError("exactly one of input_csv or synthetic must be set")
        if self.input_csv is not None and not Path(self.input_csv).is_file():
            raise ConfigError(f"input_csv not found: {self.input_csv}")
        if self.schema_path is not None and not Path(self.schema_path).is_file():
            raise ConfigError(f"schema file not found: {self.schema_path}")
        if self.scaler_scope not in ("train", "full"):
            raise ConfigError(f"scaler_scope must be train|full, got {self.scaler_scope!r}")
        if not self.grids:
            raise ConfigError("grids must select at least one algorithm")
        for algo, spec in self.grids.items():
            if algo not in ALGORITHM_ORDER:
                raise ConfigError(f"unknown algorithm in grids: {algo!r}")
            if spec not in ("demo", "default") and not Path(spec).is_file():
                raise ConfigError(f"grid file not found for {algo}: {spec}")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if self.explain_mode not in ("auto", "exact", "sampled"):
            raise ConfigError(f"unknown explain mode {self.explain_mode!r}")

    def to_dict(self) -> dict:
        return {
            "input_csv": self.input_csv,
            "synthetic": self.synthetic,
            "schema": self.schema_path,
            "seed": self.seed,
            "split": {"ratio": self.split_ratio, "stratified": self.stratified_split},
            "scaler_scope": self.scaler_scope,
            "relevance": {
                "threshold": self.relevance_threshold,
                "forced": self.relevance_forced,
                "rounds": self.relevance_rounds,
                "max_depth": self.relevance_max_depth,
                "learning_rate": self.relevance_learning_rate,
                "importance": self.relevance_importance,
            },
            "grids": self.grids,
            "cv_folds": self.cv_folds,
            "background_size": self.background_size,
            "explain": {"mode": self.explain_mode, "permutations": self.explain_permutations},
            "output_dir": self.output_dir,
        }


@dataclass
class AlgorithmOutcome:
    algorithm: str
    best_config: ModelConfig
    cv_mean_f1: float
    model: TrainedModel
    test_report: EvalReport
    roc: list[tuple[float, float]]

    @property
    def class1_errors(self) -> int:
        return self.test_report.class1_errors()


@dataclass
class ComparisonReport:
    """Per-algorithm best configs and test reports plus the chosen model.

    Chosen = fewest class-1 misclassifications (FN + FP with class 1
    positive); ties break by higher class-1 F1, then AUC, then run order.
    """

    outcomes: dict[str, AlgorithmOutcome]
    chosen: str

    @classmethod
    def build(cls, outcomes: dict[str, AlgorithmOutcome]) -> "ComparisonReport":
        order = list(outcomes)
        chosen = min(
            order,
            key=lambda a: (
                outcomes[a].class1_errors,
                -outcomes[a].test_report.class_f1("Yes"),
                -outcomes[a].test_report.auc,
                order.index(a),
            ),
        )
        return cls(outcomes=outcomes, chosen=chosen)

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen,
            "rationale": [
                {
                    "algorithm": a,
                    "class1_errors": o.class1_errors,
                    "f1_yes": o.test_report.class_f1("Yes"),
                    "auc": o.test_report.auc,
                }
                for a, o in self.outcomes.items()
            ],
            "outcomes": {
                a: {
                    "best_config": o.best_config.to_dict(),
                    "cv_mean_f1": o.cv_mean_f1,
                    "test_report": o.test_report.to_dict(),
                }
                for a, o in self.outcomes.items()
            },
        }


@dataclass
class RunResult:
    comparison: ComparisonReport
    partition: PartitionAB
    output_dir: Path
    selected_features: list[str]
    manifest: dict


def _resolve_grid(algorithm: str, spec: str) -> HyperGrid:
    if spec == "demo":
        return demo_grid(algorithm)
    if spec == "default":
        return default_grid(algorithm)
    grid = load_grid(spec)
    if grid.algorithm != algorithm:
        raise ConfigError(f"grid file {spec} declares {grid.algorithm!r}, expected {algorithm!r}")
    return grid


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def run_pipeline(config: PipelineConfig) -> RunResult:
    """Execute all stages and publish artifacts atomically."""

    def stage(name):
        class _Guard:
            def __enter__(self):
                return None

            def __exit__(self, exc_type, exc, tb):
                if exc is not None and not isinstance(exc, StageFailure):
                    raise StageFailure(name, exc) from exc
                return False

        return _Guard()

    with stage("config"):
        config.validate()
        master = config.seed
        schema = load_schema(config.schema_path) if config.schema_path else default_schema()

    with stage("load"):
        if config.input_csv is not None:
            raw = load_csv(config.input_csv, schema)
        else:
            spec = dict(config.synthetic or {})
            raw = gen_synthetic(
                n=int(spec.get("n", 1000)),
                prevalence=float(spec.get("prevalence", 0.2)),
                signal=float(spec.get("signal", 3.0)),
                seed=derive_seed(master, "synthetic"),
                exact_counts=bool(spec.get("exact_counts", False)),
            )

    with stage("clean"):
        clean = encode_categoricals(drop_incomplete(raw))
        cohort_summary = {
            "rows_loaded": raw.n,
            "rows_clean": clean.n,
            "rows_dropped": raw.n - clean.n,
            "class_counts": {
                "0": int(np.sum(clean.labels == 0.0)),
                "1": int(np.sum(clean.labels == 1.0)),
            },
        }

    executed = ["config", "load", "clean"]
    full_stats: ScalerStats | None = None
    working = clean
    if config.scaler_scope == "full":
        with stage("standardize"):
            full_stats = fit_scaler(clean)
            working = apply_scaler(clean, full_stats)
        executed.append("standardize")

    with stage("select"):
        booster = ModelConfig(
            "xgb",
            {
                "n_estimators": config.relevance_rounds,
                "max_depth": config.relevance_max_depth,
                "learning_rate": config.relevance_learning_rate,
            },
            seed=derive_seed(master, "select"),
        )
        report = relevance_scores(working, booster, importance=config.relevance_importance)
        report = select_features(report, config.relevance_threshold, config.relevance_forced)
        selected = report.selected
        projected = working.project(selected)
    executed.append("select")

    with stage("split"):
        pair = split(projected, config.split_ratio, derive_seed(master, "split"),
                     stratified=config.stratified_split)
        train, test = pair.train, pair.test
    executed.append("split")

    if config.scaler_scope == "train":
        with stage("standardize"):
            stats = fit_scaler(train)
            train = apply_scaler(train, stats)
            test = apply_scaler(test, stats)
        executed.append("standardize")
    else:
        stats = ScalerStats({k: v for k, v in full_stats.stats.items() if k in set(selected)})

    with stage("tune"):
        algorithms = [a for a in ALGORITHM_ORDER if a in config.grids]
        searches = {}
        for algo in algorithms:
            grid = _resolve_grid(algo, config.grids[algo])
            searches[algo] = grid_search(grid, train, config.cv_folds,
                                         seed=derive_seed(master, f"cv:{algo}"))
    executed.append("tune")

    with stage("compare"):
        outcomes = {}
        for algo in algorithms:
            best = searches[algo].best
            model = fit(best, train)
            preds = model.predict(test.rows)
            scores = model.score(test.rows)
            outcomes[algo] = AlgorithmOutcome(
                algorithm=algo,
                best_config=best,
                cv_mean_f1=searches[algo].results[0].mean_f1,
                model=model,
                test_report=evaluate(test.labels, preds, scores),
                roc=roc_points(scores, test.labels),
            )
        comparison = ComparisonReport.build(outcomes)
        chosen_model = outcomes[comparison.chosen].model
    executed.append("compare")

    with stage("explain"):
        bg = sample_background(train.rows, config.background_size,
                               derive_seed(master, "background"))
        partition = partition_run(chosen_model, test, bg, mode=config.explain_mode,
                                  permutations=config.explain_permutations,
                                  seed=derive_seed(master, "explain"))
    executed.append("explain")

    with stage("emit"):
        out_dir = Path(config.output_dir)
        staging = out_dir.with_name(out_dir.name + ".partial")
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
        try:
            manifest = _emit_all(
                staging, config, executed, cohort_summary, report, searches,
                comparison, partition, train, test, stats, clean.schema, bg, master,
            )
        except Exception:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        if out_dir.exists():
            shutil.rmtree(out_dir)
        staging.rename(out_dir)
    executed.append("emit")

    return RunResult(
        comparison=comparison,
        partition=partition,
        output_dir=Path(config.output_dir),
        selected_features=selected,
        manifest=manifest,
    )


def _partition_to_doc(partition: PartitionAB) -> dict:
    return {
        "A": [s.row_id for s in partition.A],
        "B": [s.row_id for s in partition.B],
        "failed": [{"row_id": rid, "error": msg} for rid, msg in partition.failed],
        "samples": [
            {
                "row_id": s.row_id,
                "yhat": s.yhat,
                "score": s.score,
                "x": s.x.tolist(),
                "phi": s.attribution.phi.tolist(),
                "base_value": s.attribution.base_value,
                "method": s.attribution.method,
                "adjusted": s.attribution.adjusted,
            }
            for s in partition.samples
        ],
    }


def _partition_from_doc(doc: dict) -> PartitionAB:
    partition = PartitionAB()
    partition.failed = [(int(f["row_id"]), f["error"]) for f in doc["failed"]]
    for entry in doc["samples"]:
        attribution = Attribution(
            phi=np.asarray(entry["phi"], dtype=np.float64),
            base_value=float(entry["base_value"]),
            sample_id=int(entry["row_id"]),
            method=entry["method"],
            adjusted=bool(entry["adjusted"]),
        )
        sample = ExplainedSample(
            x=np.asarray(entry["x"], dtype=np.float64),
            attribution=attribution,
            yhat=int(entry["yhat"]),
            score=float(entry["score"]),
            row_id=int(entry["row_id"]),
        )
        partition.samples.append(sample)
        (partition.B if sample.yhat == 1 else partition.A).append(sample)
    return partition


def _emit_all(out, config, executed, cohort_summary, relevance_report, searches,
              comparison, partition, train, test, stats, schema, bg, master) -> dict:
    selected = relevance_report.selected
    _write_json(out / "cohort_summary.json", cohort_summary)
    _write_json(out / "relevance.json", relevance_report.to_dict())
    for algo, outcome in searches.items():
        _write_json(out / f"cv_{algo}.json", [r.to_dict() for r in outcome.results])
    for algo, outcome in comparison.outcomes.items():
        _write_json(out / f"eval_{algo}.json", outcome.test_report.to_dict())
    _write_json(out / "comparison.json", comparison.to_dict())
    _write_json(out / "partition.json", _partition_to_doc(partition))

    chosen = comparison.outcomes[comparison.chosen]
    kinds = {name: schema.kind_of(name) for name in selected}
    levels = {k: v for k, v in schema.categorical_levels.items() if k in set(selected)}
    ranges = {}
    for name in selected:
        j = train.feature_index(name)
        raw_train = train.rows[:, j]
        if name in stats.stats:
            mean, std = stats.stats[name]
            raw_train = raw_train * (std if std > 0 else 1.0) + mean
        ranges[name] = (float(np.min(raw_train)), float(np.max(raw_train)))
    beeswarm_rows, order = summary_data(partition, selected, stats) if partition.samples else ([], [])
    artifact = ModelArtifact(
        model=chosen.model,
        scaler=stats,
        selected_features=selected,
        feature_kinds=kinds,
        categorical_levels=levels,
        feature_ranges=ranges,
        background=bg.rows,
        partition_summary={"rows": beeswarm_rows, "feature_order": order} if beeswarm_rows else None,
    )
    save_artifact(artifact, out / "model_best.json")

    roc_docs = {algo: [[p[0], p[1]] for p in o.roc] for algo, o in comparison.outcomes.items()}
    _write_json(out / "roc_points.json", roc_docs)

    config_echo = config.to_dict()
    config_echo.pop("output_dir")  # environment detail; keeps reruns byte-identical
    manifest = {
        "stages": executed + ["emit"],
        "scaler_scope": config.scaler_scope,
        "master_seed": master,
        "seed_derivations": {
            name: derive_seed(master, name)
            for name in ("synthetic", "select", "split", "background", "explain")
        },
        "config": config_echo,
        "selected_features": selected,
        "chosen_model": comparison.chosen,
    }
    _write_json(out / "manifest.json", manifest)
    _emit_plot_files(out, relevance_report, comparison, partition, selected, stats)
    return manifest


def _emit_plot_files(out: Path, relevance_report, comparison, partition, selected, stats) -> None:
    plots = out / "plots"
    plots.mkdir(exist_ok=True)

    score_of = relevance_report.scores
    selected_rows = [{"feature": f, "score": score_of[f]}
                     for f in relevance_report.ranking if f in set(selected)]
    excluded_rows = [{"feature": f, "score": score_of[f]}
                     for f in relevance_report.ranking if f not in set(selected)]
    _write_csv(plots / "relevance_bar.csv", ["feature", "score"], selected_rows)
    _write_csv(plots / "relevance_excluded.csv", ["feature", "score"], excluded_rows)

    for algo, outcome in comparison.outcomes.items():
        _write_csv(plots / f"roc_{algo}.csv", ["fpr", "tpr"],
                   [{"fpr": p[0], "tpr": p[1]} for p in outcome.roc])
        cm = outcome.test_report.cm
        with open(plots / f"confusion_{algo}.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["", "pred_no", "pred_yes"])
            writer.writerow(["actual_no", cm.tn, cm.fp])
            writer.writerow(["actual_yes", cm.fn, cm.tp])

    if not partition.samples:
        return
    rows, order = summary_data(partition, selected, stats)
    _write_csv(plots / "beeswarm.csv",
               ["feature", "feature_rank", "sample_id", "shap", "value_std", "value_raw"], rows)
    top = order[0]
    for feature in selected:
        if feature == top:
            continue
        dep = dependence_data(partition, feature, top, selected, stats)
        name = f"dependence_{_slug(feature)}_vs_{_slug(top)}.csv"
        _write_csv(plots / name,
                   ["sample_id", "value_std", "value_raw", "shap", "interaction_std", "interaction_raw"],
                   dep)
    if partition.A:
        _write_json(plots / "force_mortality_no.json", force_data(partition.A[0], selected))
    if partition.B:
        _write_json(plots / "force_mortality_yes.json", force_data(partition.B[0], selected))


def _slug(name: str) -> str:
    return "".join(c.lower() if c.isalnum() else "_" for c in name)


def emit_plots(output_dir) -> list[Path]:
    """Regenerate plot-data files from a completed run's artifacts."""
    out = Path(output_dir)
    try:
        with open(out / "manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
        with open(out / "partition.json", encoding="utf-8") as fh:
            partition = _partition_from_doc(json.load(fh))
        with open(out / "relevance.json", encoding="utf-8") as fh:
            rel_doc = json.load(fh)
        with open(out / "comparison.json", encoding="utf-8") as fh:
            comparison_doc = json.load(fh)
        with open(out / "roc_points.json", encoding="utf-8") as fh:
            roc_docs = json.load(fh)
        from .artifact import load_artifact

        artifact, _ = load_artifact(out / "model_best.json")
    except FileNotFoundError as exc:
        raise StageFailure("emit", exc) from exc

    relevance_report = RelevanceReport(
        scores=rel_doc["scores"],
        ranking=rel_doc["ranking"],
        importance=rel_doc["importance"],
        threshold=rel_doc["threshold"],
        forced=rel_doc["forced"],
        selected=rel_doc["selected"],
    )
    selected = manifest["selected_features"]

    # Rebuild a minimal comparison view sufficient for the plot files.
    outcomes = {}
    for algo, entry in comparison_doc["outcomes"].items():
        report_doc = entry["test_report"]
        cm_doc = report_doc["confusion"]
        from .metrics import ClassMetrics, ConfusionMatrix

        outcomes[algo] = AlgorithmOutcome(
            algorithm=algo,
            best_config=ModelConfig.from_dict(entry["best_config"]),
            cv_mean_f1=entry["cv_mean_f1"],
            model=artifact.model,
            test_report=EvalReport(
                per_class={
                    name: ClassMetrics(m["precision"], m["recall"], m["f1"],
                                       frozenset(m["degenerate"]))
                    for name, m in report_doc["per_class"].items()
                },
                accuracy=report_doc["accuracy"],
                auc=report_doc["auc"],
                cm=ConfusionMatrix(cm_doc["tp"], cm_doc["tn"], cm_doc["fp"], cm_doc["fn"]),
            ),
            roc=[(p[0], p[1]) for p in roc_docs[algo]],
        )
    comparison = ComparisonReport(outcomes=outcomes, chosen=comparison_doc["chosen"])
    _emit_plot_files(out, relevance_report, comparison, partition, selected, artifact.scaler)
    return sorted((out / "plots").iterdir())
