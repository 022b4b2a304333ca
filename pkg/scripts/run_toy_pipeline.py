"""Run every CLI stage on a config: build, train both models, edit, evaluate and check."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from recipe_edit.cli import RunConfig, main as cli

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "toy.toml"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=DEFAULT_CONFIG)
    ap.add_argument("--recipe", default="chicken-dijon")
    ap.add_argument("--constraint", default="dairy-free")
    args = ap.parse_args()
    out = RunConfig.from_toml(args.config).out
    stages = [
        ["build-dataset"],
        ["train", "ingredients"],
        ["train", "steps"],
        ["edit", "--recipe", args.recipe, "--constraint", args.constraint],
    ]
    for system in ("share", "rule"):
        outputs = str(out / f"outputs.{system}.test.jsonl")
        stages += [["edit", "--split", "test", "--system", system], ["evaluate", "--outputs", outputs], ["check", "--outputs", outputs]]
    for stage in stages:
        print(f"$ recipe-edit {' '.join(stage)}", flush=True)
        code = cli(["--config", str(args.config), *stage])
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
