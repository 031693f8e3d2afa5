#!/usr/bin/env python3
"""Write the bundled demo dataset, its schema, and a ready-to-run config."""

import argparse
import json
from pathlib import Path

from fairprobe.demo import write_demo_csv, write_demo_schema


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="demo", help="target directory")
    parser.add_argument("--rows", type=int, default=8000)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_demo_csv(out / "demo.csv", n_rows=args.rows, seed=args.seed)
    write_demo_schema(out / "schema.json")

    config = {
        "dataset": str(out / "demo.csv"),
        "schema": str(out / "schema.json"),
        "sensitive": ["gender", "race", "age"],
        "models": [
            {
                "name": "logistic",
                "kind": "logistic",
                "epochs": 40,
                "learning_rate": 0.05,
                "l2": 0.0001,
            },
            {
                "name": "mlp",
                "kind": "mlp",
                "hidden_sizes": [64, 32],
                "epochs": 30,
                "learning_rate": 0.001,
                "l2": 0.0001,
            },
        ],
        "generators": [
            {"name": "random", "kind": "random"},
            {"name": "adf_lite", "kind": "adf_lite", "local_steps": 8, "step_size": 1},
        ],
        "selector": "causal",
        "budget": 2000,
        "runs": 10,
        "k_percent": 100,
        "m": 100,
        "bootstrap_repeats": 20,
        "seed": 1,
        "train_fraction": 0.7,
        "output_dir": str(out / "results"),
        "group_rules": {"age": {"kind": "range", "range": [25, 40]}},
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out}/demo.csv, {out}/schema.json, {out}/config.json")


if __name__ == "__main__":
    main()
