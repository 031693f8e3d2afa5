"""Synthetic census-style demo data.

Rows come from a pool of profile families. A family fixes the economic
context (education, workclass, occupation, hours band, capital); each of its
slots draws an age plus demographic noise and emits a small set of variants:
a base row, coupling-preserving counterparts (flip a sensitive value and
recompute its dependent feature from the same noise), and exact twins that
differ in a single sensitive value only. Census data is full of such
near-twins, and they are what gives true-definition re-pairing a chance.

Couplings are linear with bounded uniform noise: age drives marital status,
gender drives relationship, race drives residence, and the label depends on
the economic context, the demographic mediators, and the sensitive features
themselves. Labels are drawn per row, so repeated profiles can carry both
outcomes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .data import Dataset, Schema, from_arrays

FEATURES = (
    "age",
    "workclass",
    "education",
    "marital_status",
    "occupation",
    "relationship",
    "race",
    "gender",
    "hours_band",
    "capital",
    "residence",
)
SENSITIVE = ("gender", "race", "age")
LABEL = "income"

AGE_LO, AGE_HI = 17, 40


def demo_schema() -> Schema:
    return Schema(
        feature_names=FEATURES,
        sensitive_features=SENSITIVE,
        label_name=LABEL,
        declared_kinds={name: "integer" for name in FEATURES},
    )


def _clip_round(x, lo, hi):
    return int(np.clip(np.rint(x), lo, hi))


def _logit(row: dict) -> float:
    return (
        0.25 * (row["education"] - 2)
        + 0.18 * (row["occupation"] - 1.8)
        + 0.30 * (row["hours_band"] - 1.6)
        + 0.18 * (row["capital"] - 1.3)
        + 0.45 * (row["marital_status"] - 2.0)
        + 0.90 * (row["relationship"] - 1.4)
        + 0.75 * (row["residence"] - 1.1)
        - 2.60 * (row["gender"] - 0.5)
        - 0.50 * (row["race"] - 0.55)
        + 0.09 * (row["age"] - 28)
    )


def _marital(age: int, u: float) -> int:
    return _clip_round((age - AGE_LO) / 5.0 + u, 0, 4)


def _relationship(gender: int, marital: int, u: float) -> int:
    return _clip_round(0.3 * gender + 0.35 * marital + 0.3 + u, 0, 3)


def _residence(race: int, u: float) -> int:
    return _clip_round(1.0 * race + 0.3 + u, 0, 3)


def _make_profiles(n_families: int, slots: int, rng: np.random.Generator):
    rows = []
    for _ in range(n_families):
        education = int(rng.integers(5))
        workclass = _clip_round(0.5 * education + rng.uniform(-1.0, 1.0), 0, 3)
        occupation = _clip_round(
            0.7 * education + 0.3 * workclass + rng.uniform(-1.0, 1.0), 0, 4
        )
        hours = _clip_round(0.8 * occupation + rng.uniform(-1.0, 1.0), 0, 5)
        capital = _clip_round(0.9 * education - 0.5 + rng.uniform(-1.0, 1.0), 0, 4)
        for _ in range(slots):
            age = int(rng.integers(AGE_LO, AGE_HI + 1))
            u_m = rng.uniform(-1.0, 1.0)
            u_rel = rng.uniform(-0.7, 0.7)
            u_res = rng.uniform(-0.6, 0.6)
            gender = int(rng.integers(2))
            race = int(rng.choice(3, p=[0.6, 0.25, 0.15]))
            marital = _marital(age, u_m)
            rel = _relationship(gender, marital, u_rel)
            res = _residence(race, u_res)

            base = {
                "age": age,
                "workclass": workclass,
                "education": education,
                "marital_status": marital,
                "occupation": occupation,
                "relationship": rel,
                "race": race,
                "gender": gender,
                "hours_band": hours,
                "capital": capital,
                "residence": res,
            }
            core = [base]
            # coupling-preserving race counterpart plus exact race twin
            other_race = int(rng.choice([r for r in range(3) if r != race]))
            shifted = dict(base, race=other_race)
            shifted["residence"] = _residence(other_race, u_res)
            core.append(shifted)
            core.append(dict(base, race=other_race))
            # age twin: small shift, marital re-derived from the same noise
            age2 = _clip_round(age + rng.choice([-3, -2, -1, 1, 2, 3]), AGE_LO, AGE_HI)
            core.append(dict(base, age=age2, marital_status=_marital(age2, u_m)))
            # single-feature mutations off the recipe, as real data would have;
            # the first one always explores another relationship value
            for k in range(3):
                donor = core[int(rng.integers(len(core)))]
                feat = "relationship" if k == 0 else (
                    "marital_status", "residence", "capital", "hours_band"
                )[int(rng.integers(4))]
                hi = {"relationship": 3, "marital_status": 4, "residence": 3,
                      "capital": 4, "hours_band": 5}[feat]
                core.append(dict(donor, **{feat: int(rng.integers(hi + 1))}))

            # every variant gets a gender counterpart from its own equation and
            # the slot's shared noise; with the mild coupling most counterparts
            # are exact twins, the rest shift relationship by one step
            variants = list(core)
            for v in core:
                other = dict(v, gender=1 - v["gender"])
                if v is not core[5]:  # keep the explored relationship value
                    other["relationship"] = _relationship(
                        other["gender"], other["marital_status"], u_rel
                    )
                variants.append(other)
            rows.extend(variants)
    profiles = np.asarray(
        [[v[name] for name in FEATURES] for v in rows], dtype=np.int64
    )
    logits = np.asarray([_logit(v) for v in rows])
    return profiles, logits


def generate_demo_dataset(
    n_rows: int = 8000,
    seed: int = 7,
    n_families: int = 40,
    slots: int = 2,
) -> Dataset:
    """Deterministic synthetic dataset with a binary income label."""
    rng = np.random.default_rng(seed)
    profiles, logits = _make_profiles(n_families, slots, rng)
    picks = rng.integers(len(profiles), size=n_rows)
    rows = profiles[picks]
    probs = 1.0 / (1.0 + np.exp(-2.2 * logits[picks]))
    labels = (rng.random(n_rows) < probs).astype(np.int64)
    return from_arrays(rows=rows, labels=labels, schema=demo_schema())


def write_demo_csv(path: str | Path, n_rows: int = 8000, seed: int = 7) -> None:
    """Emit the demo dataset as a CSV usable with the bundled schema file."""
    dataset = generate_demo_dataset(n_rows=n_rows, seed=seed)
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(FEATURES) + [LABEL])
        for row, label in zip(dataset.rows, dataset.labels):
            writer.writerow([int(v) for v in row] + [int(label)])


def write_demo_schema(path: str | Path) -> None:
    doc = {
        "label": LABEL,
        "sensitive": list(SENSITIVE),
        "features": {name: "integer" for name in FEATURES},
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
