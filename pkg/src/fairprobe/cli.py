"""Experiment orchestration and command-line interface.

Drives the full testing procedure from a JSON config: ingest and split the
data, train the models under test, rank the non-sensitive features (causal or
correlation selector), generate suites with and without guidance, compute the
fairness metrics, compare the modes statistically, and write machine-readable
reports. Wall-clock timings go to a separate file so the canonical report is
byte-identical across repeated runs of the same config.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .causal import (
    bootstrap_effect,
    direct_features,
    discover_graph,
    select_causal_feature,
    select_correlation_feature,
)
from .data import Dataset, Schema, load_csv, split_train_test
from .errors import FairprobeError, NoDirectFeature
from .generators import GeneratorSpec, run_base_generator, run_causalft
from .metrics import GroupRule, build_report
from .models import ModelConfig, train
from .retrain import correct_pairs, model_quality, retrain_and_retest
from .stats import compare

log = logging.getLogger(__name__)

REPORT_VERSION = 1
OUTPUT_DIR_ENV = "FAIRPROBE_OUT"

SELECTOR_CAUSAL = "causal"
SELECTOR_CORRELATION = "correlation"
SELECTOR_NONE = "none"


@dataclass
class ExperimentConfig:
    dataset: str
    schema: str
    sensitive: list[str]
    models: list[dict]
    generators: list[dict]
    selector: str = SELECTOR_CAUSAL
    budget: int = 10000
    runs: int = 10
    k_percent: float = 100.0
    m: int = 100
    bootstrap_repeats: int = 20
    seed: int = 0
    train_fraction: float = 0.7
    output_dir: str = "results"
    group_rules: dict = field(default_factory=dict)
    edge_threshold: float = 0.05
    retrain_budget: int | None = None
    run_retrain: bool = False

    def validate(self) -> None:
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not (0.0 < self.k_percent <= 100.0):
            raise ValueError("k_percent must lie in (0, 100]")
        if self.selector not in (SELECTOR_CAUSAL, SELECTOR_CORRELATION, SELECTOR_NONE):
            raise ValueError(f"unknown selector {self.selector!r}")
        if not self.sensitive:
            raise ValueError("at least one sensitive feature is required")
        if not self.models or not self.generators:
            raise ValueError("need at least one model and one generator")

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "schema": self.schema,
            "sensitive": list(self.sensitive),
            "models": [dict(m) for m in self.models],
            "generators": [dict(g) for g in self.generators],
            "selector": self.selector,
            "budget": self.budget,
            "runs": self.runs,
            "k_percent": self.k_percent,
            "m": self.m,
            "bootstrap_repeats": self.bootstrap_repeats,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "group_rules": self.group_rules,
            "edge_threshold": self.edge_threshold,
        }


def derive_seed(base: int, *parts) -> int:
    """Stable 63-bit seed from the base seed plus contextual parts."""
    text = ":".join([str(base), *map(str, parts)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _model_config(doc: dict, seed: int) -> ModelConfig:
    fields = {k: v for k, v in doc.items() if k != "name"}
    fields.setdefault("seed", 0)
    cfg = ModelConfig.from_dict(fields)
    return replace(cfg, seed=seed)


def _generator_spec(doc: dict) -> GeneratorSpec:
    fields = {k: v for k, v in doc.items() if k != "name"}
    return GeneratorSpec(**fields)


def _group_rule(config: ExperimentConfig, dataset: Dataset, feature: str) -> GroupRule:
    doc = config.group_rules.get(feature)
    if doc is None:
        return GroupRule.default_for(dataset, feature)
    if doc.get("kind") == "range":
        lo, hi = doc["range"]
        return GroupRule(feature=feature, kind="range", range=(lo, hi))
    return GroupRule(
        feature=feature, kind="binary-value", alpha_values=tuple(doc["alpha_values"])
    )


def _k_subsample(train: Dataset, k_percent: float, seed: int) -> Dataset:
    if k_percent >= 100.0:
        return train
    n_keep = max(1, int(round(train.n_rows * k_percent / 100.0)))
    idx = np.sort(np.random.default_rng(seed).permutation(train.n_rows)[:n_keep])
    from .data import _subset

    return _subset(train, idx)


def _select_feature(
    config: ExperimentConfig, train: Dataset, sensitive: str, seed: int
) -> tuple[str | None, dict]:
    """Pick the guidance feature per the configured selector.

    Returns (feature name or None, analysis detail dict)."""
    detail: dict = {"selector": config.selector}
    if config.selector == SELECTOR_NONE:
        return None, detail
    if config.selector == SELECTOR_CORRELATION:
        picked = select_correlation_feature(train, sensitive)
        detail["selected"] = picked
        return picked, detail

    analysis_data = _k_subsample(train, config.k_percent, derive_seed(seed, "k"))
    graph = discover_graph(
        analysis_data, sensitive, seed=seed, edge_threshold=config.edge_threshold
    )
    direct = direct_features(graph, sensitive, graph.label)
    detail["direct_features"] = list(direct)
    effects = []
    for candidate in direct:
        eff = bootstrap_effect(
            graph,
            analysis_data,
            sensitive,
            candidate,
            m=min(config.m, analysis_data.n_rows),
            repeats=config.bootstrap_repeats,
            seed=derive_seed(seed, "effect", candidate),
        )
        effects.append(eff)
    detail["effects"] = {e.feature: e.effect for e in effects}
    try:
        picked = select_causal_feature(effects, order=train.schema.feature_names)
    except NoDirectFeature:
        detail["selected"] = None
        return None, detail
    detail["selected"] = picked
    return picked, detail


def _suite_summary(suite, report) -> dict:
    doc = report.to_dict()
    doc["ledger"] = suite.ledger.to_dict()
    doc["used_fallback"] = suite.used_fallback
    doc["budget_reached"] = suite.budget_reached
    return doc


def _aggregate(values: list) -> dict:
    clean = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    if not clean:
        return {"mean": None, "std": None}
    mean = sum(clean) / len(clean)
    var = sum((v - mean) ** 2 for v in clean) / len(clean)
    return {"mean": mean, "std": math.sqrt(var)}


def _mode_block(run_docs: list[dict]) -> dict:
    block: dict = {"runs": run_docs}
    for metric in ("idi_ratio", "eod", "spd", "idi_count", "sample_count"):
        block[metric] = _aggregate([doc[metric] for doc in run_docs])
    block["ledger_means"] = {
        key: _aggregate([doc["ledger"][key] for doc in run_docs])["mean"]
        for key in run_docs[0]["ledger"]
    }
    block["fallback_runs"] = sum(1 for doc in run_docs if doc["used_fallback"])
    return block


def _compare_modes(guided: list[dict], base: list[dict]) -> dict:
    out = {}
    for metric in ("idi_ratio", "eod", "spd"):
        a = [doc[metric] for doc in guided if doc[metric] is not None]
        b = [doc[metric] for doc in base if doc[metric] is not None]
        a = [v for v in a if not (isinstance(v, float) and math.isnan(v))]
        b = [v for v in b if not (isinstance(v, float) and math.isnan(v))]
        if len(a) >= 2 and len(b) >= 2:
            out[metric] = compare(a, b).to_dict()
        else:
            out[metric] = None
    return out


def run_experiment(config: ExperimentConfig) -> tuple[dict, dict]:
    """Execute every sensitive feature x model x generator case.

    Returns (report document, timings document). The report carries per-run
    metrics and ledgers, per-mode aggregates, and guided-vs-base comparisons.
    """
    config.validate()
    schema = Schema.from_json(config.schema)
    dataset = load_csv(config.dataset, schema)
    dataset_name = Path(config.dataset).stem

    report: dict = {
        "report_version": REPORT_VERSION,
        "config": config.to_dict(),
        "cases": {},
    }
    timings: dict = {}

    for sensitive in config.sensitive:
        s_idx = schema.index(sensitive)
        rule = _group_rule(config, dataset, sensitive)
        for model_doc in config.models:
            model_name = model_doc.get("name", model_doc.get("kind", "model"))
            for gen_doc in config.generators:
                gen_name = gen_doc.get("name", gen_doc.get("kind", "generator"))
                case_key = f"{dataset_name}/{sensitive}/{model_name}/{gen_name}"
                spec = _generator_spec(gen_doc)

                base_runs, guided_runs = [], []
                analysis_details = []
                t_analysis = t_generation = 0.0
                for run_idx in range(config.runs):
                    run_seed = derive_seed(config.seed, case_key, run_idx)
                    train_data, test_data = split_train_test(
                        dataset, config.train_fraction, run_seed
                    )
                    model = train(train_data, _model_config(model_doc, run_seed))

                    t0 = time.perf_counter()
                    guide, detail = _select_feature(config, train_data, sensitive, run_seed)
                    t_analysis += time.perf_counter() - t0
                    analysis_details.append(detail)

                    t0 = time.perf_counter()
                    base_suite = run_base_generator(
                        spec,
                        model,
                        test_data,
                        s_idx,
                        config.budget,
                        derive_seed(run_seed, "base"),
                        domains=dataset.domains,
                    )
                    base_runs.append(
                        _suite_summary(
                            base_suite, build_report(base_suite, model, test_data, rule)
                        )
                    )
                    if config.selector != SELECTOR_NONE:
                        guided_suite = run_causalft(
                            spec,
                            model,
                            test_data,
                            s_idx,
                            schema.index(guide) if guide is not None else None,
                            config.budget,
                            derive_seed(run_seed, "guided"),
                            domains=dataset.domains,
                        )
                        guided_runs.append(
                            _suite_summary(
                                guided_suite,
                                build_report(guided_suite, model, test_data, rule),
                            )
                        )
                    t_generation += time.perf_counter() - t0

                case: dict = {"modes": {"base": _mode_block(base_runs)}}
                case["analysis"] = analysis_details
                if guided_runs:
                    case["modes"]["causalft"] = _mode_block(guided_runs)
                    case["comparisons"] = _compare_modes(guided_runs, base_runs)
                report["cases"][case_key] = case
                timings[case_key] = {
                    "analysis_s": t_analysis,
                    "generation_s": t_generation,
                }
    return report, timings


_CSV_COLUMNS = [
    "case",
    "mode",
    "runs",
    "idi_ratio_mean",
    "idi_ratio_std",
    "eod_mean",
    "eod_std",
    "spd_mean",
    "spd_std",
    "idi_count_mean",
    "sample_count_mean",
    "pairs_without_relaxation_mean",
    "pairs_with_relaxation_mean",
    "invalid_pairs_mean",
    "repaired_pairs_mean",
    "failed_samples_mean",
    "fallback_runs",
]


def emit_report(report: dict, out_dir: str | Path, timings: dict | None = None) -> dict:
    """Write report.json plus a flat report.csv; timings go to timings.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with (out / "report.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for case_key in sorted(report["cases"]):
            case = report["cases"][case_key]
            for mode in sorted(case["modes"]):
                block = case["modes"][mode]
                row = [
                    case_key,
                    mode,
                    len(block["runs"]),
                    block["idi_ratio"]["mean"],
                    block["idi_ratio"]["std"],
                    block["eod"]["mean"],
                    block["eod"]["std"],
                    block["spd"]["mean"],
                    block["spd"]["std"],
                    block["idi_count"]["mean"],
                    block["sample_count"]["mean"],
                    block["ledger_means"]["pairs_without_relaxation"],
                    block["ledger_means"]["pairs_with_relaxation"],
                    block["ledger_means"]["invalid_pairs"],
                    block["ledger_means"]["repaired_pairs"],
                    block["ledger_means"]["failed_samples"],
                    block["fallback_runs"],
                ]
                writer.writerow(row)
    if timings is not None:
        (out / "timings.json").write_text(
            json.dumps(timings, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return {
        "report_json": str(out / "report.json"),
        "report_csv": str(out / "report.csv"),
    }


def _resolve_out(config_dir: str, override: str | None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(config_dir)


def cmd_test(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    report, timings = run_experiment(config)
    out = _resolve_out(config.output_dir, args.out)
    paths = emit_report(report, out, timings)
    if config.run_retrain:
        for sensitive in config.sensitive:
            doc = _retrain_case(config, sensitive)
            target = out / f"retrain_{sensitive}.json"
            target.write_text(
                json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
            paths[f"retrain_{sensitive}"] = str(target)
    print(json.dumps(paths, indent=2))
    return 0


def cmd_analyze(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    schema = Schema.from_json(config.schema)
    dataset = load_csv(config.dataset, schema)
    out = _resolve_out(config.output_dir, args.out)
    out.mkdir(parents=True, exist_ok=True)

    doc: dict = {}
    run_seed = derive_seed(config.seed, "analyze")
    train_data, _ = split_train_test(dataset, config.train_fraction, run_seed)
    for sensitive in config.sensitive:
        analysis_data = _k_subsample(train_data, config.k_percent, derive_seed(run_seed, "k"))
        graph = discover_graph(
            analysis_data, sensitive, seed=run_seed, edge_threshold=config.edge_threshold
        )
        graph.write_edges(out / f"graph_{sensitive}.csv")
        direct = direct_features(graph, sensitive, graph.label)
        effects = []
        for candidate in direct:
            effects.append(
                bootstrap_effect(
                    graph,
                    analysis_data,
                    sensitive,
                    candidate,
                    m=min(config.m, analysis_data.n_rows),
                    repeats=config.bootstrap_repeats,
                    seed=derive_seed(run_seed, "effect", candidate),
                )
            )
        doc[sensitive] = {
            "direct_features": list(direct),
            "effects": {
                e.feature: {"median": e.effect, "repeats": list(e.raw_repeats)}
                for e in effects
            },
            "correlation_pick": select_correlation_feature(train_data, sensitive),
            "selected": (
                select_causal_feature(effects, order=schema.feature_names)
                if effects
                else None
            ),
        }
    (out / "analyze.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(json.dumps({"analyze_json": str(out / "analyze.json")}, indent=2))
    return 0


def cmd_compare(args) -> int:
    doc_a = json.loads(Path(args.report_a).read_text(encoding="utf-8"))
    doc_b = json.loads(Path(args.report_b).read_text(encoding="utf-8"))
    out_doc = {}
    shared = sorted(set(doc_a["cases"]) & set(doc_b["cases"]))
    for case_key in shared:
        out_doc[case_key] = {}
        modes = set(doc_a["cases"][case_key]["modes"]) & set(
            doc_b["cases"][case_key]["modes"]
        )
        for mode in sorted(modes):
            runs_a = doc_a["cases"][case_key]["modes"][mode]["runs"]
            runs_b = doc_b["cases"][case_key]["modes"][mode]["runs"]
            per_metric = {}
            for metric in ("idi_ratio", "eod", "spd"):
                a = [r[metric] for r in runs_a if r[metric] is not None]
                b = [r[metric] for r in runs_b if r[metric] is not None]
                per_metric[metric] = (
                    compare(a, b).to_dict() if len(a) >= 2 and len(b) >= 2 else None
                )
            out_doc[case_key][mode] = per_metric
    text = json.dumps(out_doc, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _retrain_case(config: ExperimentConfig, sensitive: str) -> dict:
    """Correct the discovered pairs of one case, retrain, and re-test; uses
    the first configured model and generator."""
    schema = Schema.from_json(config.schema)
    dataset = load_csv(config.dataset, schema)
    s_idx = schema.index(sensitive)
    rule = _group_rule(config, dataset, sensitive)
    spec = _generator_spec(config.generators[0])

    run_seed = derive_seed(config.seed, "retrain", sensitive)
    train_data, test_data = split_train_test(dataset, config.train_fraction, run_seed)
    model_cfg = _model_config(config.models[0], run_seed)
    model = train(train_data, model_cfg)
    guide, detail = _select_feature(config, train_data, sensitive, run_seed)
    c_idx = schema.index(guide) if guide is not None else None

    suite = run_causalft(
        spec, model, test_data, s_idx, c_idx, config.budget,
        derive_seed(run_seed, "corrections"), domains=dataset.domains,
    )
    corrections = correct_pairs(suite, model, test_data)
    before, after = retrain_and_retest(
        model_cfg,
        train_data,
        corrections,
        test_data,
        s_idx,
        c_idx,
        spec,
        config.retrain_budget or config.budget,
        config.runs,
        derive_seed(run_seed, "retest"),
        rule,
        old_model=model,
        domains=dataset.domains,
    )
    from .retrain import augment_training_data

    retrained = train(
        augment_training_data(train_data, corrections),
        replace(model_cfg, seed=model_cfg.seed + 1),
    )
    return {
        "sensitive": sensitive,
        "selected_feature": guide,
        "corrections": len(corrections),
        "before": [r.to_dict() for r in before],
        "after": [r.to_dict() for r in after],
        "quality_before": model_quality(model, test_data),
        "quality_after": model_quality(retrained, test_data),
        "analysis": detail,
    }


def cmd_retrain(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    out = _resolve_out(config.output_dir, args.out)
    out.mkdir(parents=True, exist_ok=True)
    sensitive = args.sensitive or config.sensitive[0]
    doc = _retrain_case(config, sensitive)
    (out / "retrain.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(json.dumps({"retrain_json": str(out / "retrain.json")}, indent=2))
    return 0


def cmd_report(args) -> int:
    report = json.loads(Path(args.results).read_text(encoding="utf-8"))
    paths = emit_report(report, args.out or ".")
    print(json.dumps(paths, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairprobe",
        description="Causally guided fairness testing for tabular classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run the full experiment pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory override")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("analyze", help="causal graph, effects, and feature selection only")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="statistics over two report files")
    p.add_argument("--report-a", required=True)
    p.add_argument("--report-b", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("retrain", help="correct discovered pairs, retrain, and re-test")
    p.add_argument("--config", required=True)
    p.add_argument("--sensitive", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_retrain)

    p = sub.add_parser("report", help="re-emit report files from a saved report.json")
    p.add_argument("--results", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FairprobeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
