"""Repair-and-retrain loop: correct discovered discriminatory pairs, retrain
on the augmented data, and re-test both models."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .data import Dataset, from_arrays
from .generators import GeneratorSpec, TestSuite, run_causalft
from .metrics import FairnessReport, GroupRule, build_report
from .models import ModelConfig, ModelUnderTest, train


def correct_pairs(
    suite: TestSuite, model: ModelUnderTest, test_data: Dataset
) -> list[tuple[tuple[int, ...], int]]:
    """Corrected training rows from the suite's discriminatory pairs.

    When exactly one member is a test row, the synthetic member is emitted
    with the test member's predicted label. When both members are test rows,
    the member the model predicts positive anchors the correction and both
    are emitted with label 1. Duplicates are dropped.
    """
    test_keys = {tuple(int(v) for v in row) for row in test_data.rows}
    out: dict[tuple[tuple[int, ...], int], None] = {}
    for pair in suite.true_pairs:
        a_in = pair.a in test_keys
        b_in = pair.b in test_keys
        if not (a_in or b_in):
            continue
        members = np.asarray([pair.a, pair.b], dtype=float)
        labels, _ = model.predict_batch(members)
        if a_in and b_in:
            out.setdefault((pair.a, 1), None)
            out.setdefault((pair.b, 1), None)
        elif a_in:
            out.setdefault((pair.b, int(labels[0])), None)
        else:
            out.setdefault((pair.a, int(labels[1])), None)
    return list(out.keys())


def augment_training_data(
    train_data: Dataset, corrections: list[tuple[tuple[int, ...], int]]
) -> Dataset:
    """Training data with corrected samples appended as ordinary rows."""
    if not corrections:
        return train_data
    extra_rows = np.asarray([c[0] for c in corrections], dtype=np.int64)
    extra_labels = np.asarray([c[1] for c in corrections], dtype=np.int64)
    return from_arrays(
        rows=np.vstack([train_data.rows, extra_rows]),
        labels=np.concatenate([train_data.labels, extra_labels]),
        schema=train_data.schema,
        decode_maps=train_data.decode_maps,
    )


def model_quality(model: ModelUnderTest, data: Dataset) -> dict:
    """Accuracy, F1 on the positive class, and rank-based AUC."""
    labels, probs = model.predict_batch(data.rows.astype(float))
    y = data.labels
    acc = float(np.mean(labels == y))
    tp = int(np.sum((labels == 1) & (y == 1)))
    fp = int(np.sum((labels == 1) & (y == 0)))
    fn = int(np.sum((labels == 0) & (y == 1)))
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        auc = float("nan")
    else:
        order = np.argsort(probs, kind="mergesort")
        ranks = np.empty(len(probs))
        sorted_p = probs[order]
        i = 0
        while i < len(probs):
            j = i
            while j + 1 < len(probs) and sorted_p[j + 1] == sorted_p[i]:
                j += 1
            ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
            i = j + 1
        auc = float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))
    return {"accuracy": acc, "f1": f1, "auc": auc}


def retrain_and_retest(
    model_config: ModelConfig,
    train_data: Dataset,
    corrections: list[tuple[tuple[int, ...], int]],
    test_data: Dataset,
    sensitive: int,
    causal: int | None,
    gen_spec: GeneratorSpec,
    budget: int,
    runs: int,
    seed: int,
    rule: GroupRule,
    old_model: ModelUnderTest | None = None,
    domains=None,
) -> tuple[list[FairnessReport], list[FairnessReport]]:
    """Retrain from scratch on train + corrections, then re-test the old and
    new models side by side over `runs` seeded generation runs."""
    if old_model is None:
        old_model = train(train_data, model_config)
    augmented = augment_training_data(train_data, corrections)
    retrained = train(augmented, replace(model_config, seed=model_config.seed + 1))

    before, after = [], []
    for r in range(runs):
        run_seed = seed + r
        suite_old = run_causalft(
            gen_spec, old_model, test_data, sensitive, causal, budget, run_seed, domains=domains
        )
        suite_new = run_causalft(
            gen_spec, retrained, test_data, sensitive, causal, budget, run_seed, domains=domains
        )
        before.append(build_report(suite_old, old_model, test_data, rule))
        after.append(build_report(suite_new, retrained, test_data, rule))
    return before, after
