"""Command-line pipeline: build-dataset, train, edit, evaluate, check.

Every command reads one TOML config (``--config`` or ``$RECIPE_EDIT_CONFIG``)
with flag overrides and writes into a run directory holding a
``manifest.json`` of output hashes. Exit codes: 0 ok, 1 validation
error, 2 runtime or numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import editor as ed
from . import generator as gen
from .corpus import (
    CONSTRAINTS,
    CorpusFormatError,
    IngredientVocab,
    InsufficientPairsError,
    RawRecipe,
    Recipe,
    RecipePair,
    VocabError,
    build_vocab,
    load_corpus,
    load_pairs,
    pair_recipes,
    resolve_corpus,
    resolve_recipe,
    satisfies,
    save_pairs,
    split_dataset,
)
from .eval.report import SystemOutput, evaluate_pairs, format_report, report_json
from .eval.trees import load_verb_lexicon
from .nn import PRESETS, PAPER_GENERATOR_EMBED_DIM, CheckpointError
from .rules import RulesFormatError, check_recipe, load_constraint_specs, rule_edit
from .training import TrainingDiverged, UntrainedModelError, substream

logger = logging.getLogger("recipe_edit")

CONFIG_ENV = "RECIPE_EDIT_CONFIG"
SPLITS = ("train", "val", "test")


class ValidationError(Exception):
    pass


@dataclass
class RunConfig:
    corpus: str | None = None
    constraint_dir: str | None = None
    verbs: str | None = None
    out_dir: str = "runs/default"
    preset: str = "desk"
    seed: int = 0
    lr: float | None = None
    lr_grid: list[float] = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    epochs: int = 100
    generator_epochs: int | None = None
    batch_size: int = 8
    patience: int = 10
    min_recipe_count: int = 10
    overlap_min: float = 0.3
    max_targets_per_base: int | None = None
    n_val: int | None = None
    n_test: int | None = None
    word_min_freq: int = 1
    max_len: int = 256
    hard_filter: bool = False
    blacklist: bool = False
    paired_data_only: bool = False
    no_copy_attention: bool = False

    @classmethod
    def from_toml(cls, path: str | Path) -> "RunConfig":
        try:
            data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"{path}: unknown config keys {unknown}")
        base = Path(path).parent
        for key in ("corpus", "constraint_dir", "verbs", "out_dir"):
            if isinstance(data.get(key), str) and not Path(data[key]).is_absolute():
                data[key] = os.path.normpath(base / data[key])
        return cls(**data)

    def validate(self) -> None:
        if self.preset not in PRESETS:
            raise ValidationError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        for key in ("corpus", "constraint_dir", "verbs"):
            p = getattr(self, key)
            if p is not None and not Path(p).exists():
                raise ValidationError(f"{key} path does not exist: {p}")
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValidationError("epochs, batch_size and patience must be positive")

    @property
    def out(self) -> Path:
        return Path(self.out_dir)

    def editor_config(self, lr: float) -> ed.EditorConfig:
        t = PRESETS[self.preset]
        return ed.EditorConfig(
            n_layers=t.n_layers, d_model=t.d_model, n_heads=t.n_heads, d_ff=t.d_ff,
            lr=lr, epochs=self.epochs, batch_size=self.batch_size, patience=self.patience,
        )

    def generator_config(self, lr: float) -> gen.GeneratorConfig:
        t = PRESETS[self.preset]
        return gen.GeneratorConfig(
            n_layers=t.n_layers, d_model=t.d_model, n_heads=t.n_heads, d_ff=t.d_ff,
            embed_dim=PAPER_GENERATOR_EMBED_DIM if self.preset == "paper-generator-8x256" else None,
            max_len=self.max_len, copy=not self.no_copy_attention, lr=lr,
            epochs=self.generator_epochs or self.epochs, batch_size=self.batch_size, patience=self.patience,
        )

    def learning_rates(self) -> list[float]:
        return [self.lr] if self.lr is not None else list(self.lr_grid)


# ---------------------------------------------------------------------------
# run directory


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def record_outputs(cfg: RunConfig, command: str, outputs: Sequence[Path]) -> None:
    """Merge this command's outputs (with hashes) into the run manifest."""
    manifest_path = cfg.out / "manifest.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8")) if manifest_path.exists() else {}
    manifest.setdefault("commands", {})[command] = {
        "seed": cfg.seed,
        "config": {k: v for k, v in asdict(cfg).items() if k != "out_dir"},
        "outputs": {str(p.relative_to(cfg.out)): _sha256(p) for p in sorted(outputs)},
    }
    _write_text(manifest_path, _dump_json(manifest))


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise ValidationError(f"missing {what}: {path} (run the earlier pipeline step first)")
    return path


def _load_vocab(cfg: RunConfig) -> IngredientVocab:
    return IngredientVocab.load(_require(cfg.out / "vocab.json", "ingredient vocabulary"))


def _load_recipes(cfg: RunConfig, vocab: IngredientVocab) -> dict[str, Recipe]:
    if cfg.corpus is None:
        raise ValidationError("no corpus configured")
    return {r.recipe_id: r for r in resolve_corpus(load_corpus(cfg.corpus), vocab)}


def _load_split(cfg: RunConfig, name: str) -> list[RecipePair]:
    return load_pairs(_require(cfg.out / f"{name}.jsonl", f"{name} pairs"))


def _specs(cfg: RunConfig, vocab: IngredientVocab):
    return load_constraint_specs(vocab, Path(cfg.constraint_dir) if cfg.constraint_dir else None)


# ---------------------------------------------------------------------------
# build-dataset


def _split_sizes(cfg: RunConfig, n_pairs: int) -> tuple[int, int]:
    if cfg.n_val is not None and cfg.n_test is not None:
        return cfg.n_val, cfg.n_test
    default = n_pairs // 10 if n_pairs >= 10 else 0
    return (cfg.n_val if cfg.n_val is not None else default, cfg.n_test if cfg.n_test is not None else default)


def cmd_build_dataset(cfg: RunConfig, args: argparse.Namespace) -> int:
    if cfg.corpus is None:
        raise ValidationError("build-dataset needs a corpus path")
    raw = load_corpus(cfg.corpus)
    outputs: list[Path] = []
    if raw:
        vocab = build_vocab(raw, cfg.min_recipe_count)
        recipes = resolve_corpus(raw, vocab)
        specs = _specs(cfg, vocab)
    else:
        vocab, recipes, specs = IngredientVocab([], cfg.min_recipe_count), [], {}
    outputs.append(_write_text(cfg.out / "vocab.json", vocab.to_json()))

    by_constraint = {
        c: pair_recipes(recipes, specs[c], cfg.overlap_min, cfg.max_targets_per_base, seed=cfg.seed) for c in sorted(specs)
    }
    pairs = sorted(p for ps in by_constraint.values() for p in ps)
    n_val, n_test = _split_sizes(cfg, len(pairs))
    try:
        train, val, test = split_dataset(pairs, int(substream(cfg.seed, "split").integers(2**31)), n_val, n_test)
    except InsufficientPairsError as exc:
        raise ValidationError(str(exc)) from exc
    for name, ps in (("pairs", pairs), ("train", train), ("val", val), ("test", test)):
        save_pairs(cfg.out / f"{name}.jsonl", ps)
        outputs.append(cfg.out / f"{name}.jsonl")

    split_of = {p: n for n, ps in (("train", train), ("val", val), ("test", test)) for p in ps}
    lines = [f"{'constraint':14s}{'kind':>6s}{'banned':>8s}{'pairs':>8s}{'train':>8s}{'val':>6s}{'test':>6s}"]
    for c in CONSTRAINTS:
        if c not in specs:
            continue
        ps = by_constraint[c]
        counts = [sum(split_of.get(p) == s for p in ps) for s in SPLITS]
        banned = str(len(specs[c].banned)) if specs[c].is_hard else "--"
        lines.append(f"{c:14s}{specs[c].kind:>6s}{banned:>8s}{len(ps):>8d}{counts[0]:>8d}{counts[1]:>6d}{counts[2]:>6d}")
    lines.append(f"{'total':14s}{'':>6s}{'':>8s}{len(pairs):>8d}{len(train):>8d}{len(val):>6d}{len(test):>6d}")
    table = "\n".join(lines) + "\n"
    outputs.append(_write_text(cfg.out / "dataset_summary.txt", table))
    print(f"{len(raw)} recipes, {len(vocab)} ingredients")
    print(table, end="")
    record_outputs(cfg, "build-dataset", outputs)
    return 0


# ---------------------------------------------------------------------------
# train


def _write_log(path: Path, rows: list[dict]) -> Path:
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return _write_text(path, buf.getvalue())


def _best_score(history: list[dict], key: str, higher: bool) -> float:
    vals = [r[key] for r in history if key in r]
    return (max(vals) if higher else min(vals)) if vals else (-np.inf if higher else np.inf)


def _save_last_good(exc: TrainingDiverged, path: Path) -> None:
    if exc.model is not None:
        exc.model.save(path.with_suffix(".last-good.ckpt"))
        print(f"saved last good parameters to {path.with_suffix('.last-good.ckpt')}", file=sys.stderr)


def _train_ingredients(cfg: RunConfig) -> list[Path]:
    vocab = _load_vocab(cfg)
    recipes = _load_recipes(cfg, vocab)
    train, val = _load_split(cfg, "train"), _load_split(cfg, "val")
    if not train:
        raise ValidationError("no training pairs; build a larger dataset")
    best = None
    log_rows: list[dict] = []
    ckpt = cfg.out / "editor.ckpt"
    for lr in cfg.learning_rates():
        try:
            model, hist = ed.train_editor(train, recipes, vocab, cfg.editor_config(lr), cfg.seed, val or None)
        except TrainingDiverged as exc:
            _write_log(cfg.out / "editor_log.csv", log_rows + [dict(lr=lr, **r) for r in exc.history])
            _save_last_good(exc, ckpt)
            raise
        log_rows += [dict(lr=lr, **r) for r in hist]
        score = _best_score(hist, "val_f1", higher=True)
        print(f"editor lr={lr:g}: {len(hist)} epochs, best F1 {score:.4f}")
        if best is None or score > best[0]:
            best = (score, lr, model)
    _, lr, model = best
    model.save(ckpt)
    print(f"selected lr={lr:g}; checkpoint {ckpt}")
    return [ckpt, _write_log(cfg.out / "editor_log.csv", log_rows)]


def _generator_corpus(cfg: RunConfig, recipes: dict[str, Recipe]) -> tuple[list[Recipe], list[Recipe]]:
    train, val, test = (_load_split(cfg, s) for s in SPLITS)
    held_out = {r for p in val + test for r in (p.base, p.target)}
    if cfg.paired_data_only:
        ids = sorted({p.target for p in train})
    else:
        ids = sorted(r for r in recipes if r not in held_out)
    val_ids = sorted({p.target for p in val})
    return [recipes[i] for i in ids], [recipes[i] for i in val_ids]


def _train_steps(cfg: RunConfig) -> list[Path]:
    vocab = _load_vocab(cfg)
    recipes = _load_recipes(cfg, vocab)
    train_recipes, val_recipes = _generator_corpus(cfg, recipes)
    if not train_recipes:
        raise ValidationError("no recipes to train the step generator on")
    words = gen.build_word_vocab([s for r in train_recipes for s in r.steps_text], vocab, cfg.word_min_freq)
    train = [gen.recipe_example(r, vocab, words) for r in train_recipes]
    val = [gen.recipe_example(r, vocab, words) for r in val_recipes]
    print(f"step generator: {len(train)} training recipes, {len(words)} word types")
    best = None
    log_rows: list[dict] = []
    ckpt = cfg.out / "generator.ckpt"
    for lr in cfg.learning_rates():
        try:
            model, hist = gen.train_generator(train, words, cfg.generator_config(lr), cfg.seed, val or None)
        except TrainingDiverged as exc:
            _write_log(cfg.out / "generator_log.csv", log_rows + [dict(lr=lr, **r) for r in exc.history])
            _save_last_good(exc, ckpt)
            raise
        log_rows += [dict(lr=lr, **r) for r in hist]
        score = _best_score(hist, "val_loss" if val else "loss", higher=False)
        print(f"generator lr={lr:g}: {len(hist)} epochs, best loss {score:.4f}")
        if best is None or score < best[0]:
            best = (score, lr, model)
    _, lr, model = best
    model.save(ckpt)
    print(f"selected lr={lr:g}; checkpoint {ckpt}")
    return [ckpt, _write_log(cfg.out / "generator_log.csv", log_rows)]


def cmd_train(cfg: RunConfig, args: argparse.Namespace) -> int:
    outputs = _train_ingredients(cfg) if args.model == "ingredients" else _train_steps(cfg)
    record_outputs(cfg, f"train-{args.model}", outputs)
    return 0


# ---------------------------------------------------------------------------
# edit


@dataclass
class _System:
    kind: str
    vocab: IngredientVocab
    specs: dict
    editor: ed.IngredientEditor | None = None
    generator: gen.StepGenerator | None = None


def _load_system(cfg: RunConfig, kind: str) -> _System:
    vocab = _load_vocab(cfg)
    system = _System(kind, vocab, _specs(cfg, vocab))
    if kind == "share":
        system.editor = ed.IngredientEditor.load(_require(cfg.out / "editor.ckpt", "editor checkpoint"))
        system.generator = gen.StepGenerator.load(_require(cfg.out / "generator.ckpt", "generator checkpoint"))
    return system


def edit_recipe(system: _System, base: Recipe, constraint: str, cfg: RunConfig) -> dict:
    """One edited recipe as a JSON-ready record."""
    spec = system.specs.get(constraint)
    if spec is None:
        raise ValidationError(f"constraint {constraint!r} is not available for this vocabulary")
    vocab = system.vocab
    record: dict[str, Any] = {"base_id": base.recipe_id, "constraint": constraint, "system": system.kind, "seed": cfg.seed}
    if system.kind == "rule":
        edited = rule_edit(base, spec, vocab)
        ids, steps = edited.ingredient_ids, list(edited.steps_text)
        record.update(truncated=False, blacklist_active=False)
    else:
        pred = ed.edit_ingredients(system.editor, base, constraint, spec, hard_filter=cfg.hard_filter)
        ids = pred.selected
        words = system.generator.vocab
        trie = gen.BlacklistTrie.for_constraint(spec, vocab, words) if cfg.blacklist and spec.is_hard else None
        inp = gen.encode_ingredients([vocab.name(i) for i in ids], words) if ids else [words.unk]
        out = gen.generate_steps(system.generator, inp, trie, cfg.max_len)
        steps = out.steps
        record.update(k=pred.k_predicted, truncated=out.truncated, blacklist_active=trie is not None)
    names = lambda s: sorted(vocab.name(i) for i in s)  # noqa: E731
    record.update(
        ingredients=names(ids),
        added=names(set(ids) - base.ingredient_ids),
        removed=names(base.ingredient_ids - set(ids)),
        steps=steps,
    )
    return record


def side_by_side(base: Recipe, record: dict, vocab: IngredientVocab) -> str:
    """Base and edited recipe in two columns, with +/- marks on the ingredient diff."""
    left = [vocab.name(i) for i in sorted(base.ingredient_ids, key=vocab.name)]
    left = [("- " if n in record["removed"] else "  ") + n for n in left]
    right = [("+ " if n in record["added"] else "  ") + n for n in record["ingredients"]]
    width = max([len(x) for x in left] + [len(base.name or " ".join(base.name_tokens)) + 2, 24]) + 4
    lines = [f"{(base.name or ' '.join(base.name_tokens)):{width}s}{record['constraint']} ({record['system']})", ""]
    for k in range(max(len(left), len(right))):
        lines.append(f"{left[k] if k < len(left) else '':{width}s}{right[k] if k < len(right) else ''}")
    lines += ["", "Base directions:"] + [f"  {k + 1}. {s}" for k, s in enumerate(base.steps_text)]
    lines += ["", "Edited directions:"] + [f"  {k + 1}. {s}" for k, s in enumerate(record["steps"])]
    return "\n".join(lines) + "\n"


def cmd_edit(cfg: RunConfig, args: argparse.Namespace) -> int:
    system = _load_system(cfg, args.system)
    vocab = system.vocab
    outputs: list[Path] = []
    if args.split:
        recipes = _load_recipes(cfg, vocab)
        keys = sorted({p.key() for p in _load_split(cfg, args.split)})
        records = [edit_recipe(system, recipes[b], c, cfg) for b, c in keys]
        path = cfg.out / f"outputs.{args.system}.{args.split}.jsonl"
        _write_text(path, "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in records))
        print(f"wrote {len(records)} edits to {path}")
        outputs.append(path)
    else:
        if args.constraint is None:
            raise ValidationError("edit needs --constraint (or --split)")
        if args.recipe_file:
            raw = load_corpus(args.recipe_file)
            if len(raw) != 1:
                raise ValidationError(f"{args.recipe_file} must hold exactly one recipe")
            base = resolve_recipe(raw[0], vocab)
            if base is None:
                raise ValidationError(f"recipe in {args.recipe_file} has no known ingredients")
        elif args.recipe:
            recipes = _load_recipes(cfg, vocab)
            if args.recipe not in recipes:
                raise ValidationError(f"unknown recipe id {args.recipe!r}")
            base = recipes[args.recipe]
        else:
            raise ValidationError("edit needs --recipe, --recipe-file or --split")
        spec = system.specs.get(args.constraint)
        if spec is not None and (satisfies(base, spec) or (spec.is_hard and check_recipe(base, spec, vocab).is_empty)):
            logger.warning("%s already satisfies %s; editing anyway", base.recipe_id, args.constraint)
        record = edit_recipe(system, base, args.constraint, cfg)
        stem = f"edit.{base.recipe_id}.{args.constraint}.{args.system}"
        outputs.append(_write_text(cfg.out / f"{stem}.json", _dump_json(record)))
        text = side_by_side(base, record, vocab)
        outputs.append(_write_text(cfg.out / f"{stem}.txt", text))
        print(text, end="")
    record_outputs(cfg, f"edit-{args.system}" + (f"-{args.split}" if args.split else ""), outputs)
    return 0


# ---------------------------------------------------------------------------
# evaluate / check


def _read_outputs(path: Path, vocab: IngredientVocab) -> dict[tuple[str, str], SystemOutput]:
    outs: dict[tuple[str, str], SystemOutput] = {}
    for n, line in enumerate(_require(path, "system outputs").read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            o = SystemOutput.from_json(json.loads(line), vocab)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationError(f"{path}:{n}: bad output record ({exc})") from exc
        outs[o.key] = o
    return outs


def cmd_evaluate(cfg: RunConfig, args: argparse.Namespace) -> int:
    vocab = _load_vocab(cfg)
    recipes = _load_recipes(cfg, vocab)
    pairs = _load_split(cfg, args.split)
    outputs = _read_outputs(Path(args.outputs), vocab)
    pair_keys = {p.key() for p in pairs}
    stray = sorted(k for k in outputs if k not in pair_keys)
    if stray:
        raise ValidationError(f"{len(stray)} outputs do not match any {args.split} pair, e.g. {stray[0]}")
    verbs = load_verb_lexicon(Path(cfg.verbs) if cfg.verbs else None)
    report = evaluate_pairs(outputs, pairs, recipes, _specs(cfg, vocab), vocab, verbs)
    report["seed"] = cfg.seed
    stem = Path(args.outputs).name.removesuffix(".jsonl")
    text = format_report(report)
    written = [
        _write_text(cfg.out / f"report.{stem}.json", report_json(report)),
        _write_text(cfg.out / f"report.{stem}.txt", text),
    ]
    print(text, end="")
    record_outputs(cfg, f"evaluate-{stem}", written)
    return 0


def cmd_check(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Run the rules checker over a corpus or an outputs file; exit 1 if anything violates."""
    vocab = _load_vocab(cfg)
    specs = _specs(cfg, vocab)
    hard = [c for c in sorted(specs) if specs[c].is_hard]
    rows = []
    if args.outputs:
        for o in _read_outputs(Path(args.outputs), vocab).values():
            if o.constraint in hard:
                rec = Recipe(o.base_id, ("edited",), o.ingredient_ids, o.steps or ("",))
                rows.append(check_recipe(rec, specs[o.constraint], vocab))
    else:
        recipes = _load_recipes(cfg, vocab)
        for r in recipes.values():
            for c in hard:
                if c in r.raw_tags:
                    rows.append(check_recipe(r, specs[c], vocab))
    bad = [v for v in rows if not v.is_empty]
    for v in bad:
        listed = ", ".join(vocab.name(i) for i in sorted(v.list_violations))
        in_steps = ", ".join(f"step {k + 1}: {vocab.name(i)}" for k, _, i in v.step_violations)
        print(f"{v.recipe_id} [{v.constraint}] list: {listed or '-'}; steps: {in_steps or '-'}")
    print(f"checked {len(rows)} recipe/constraint combinations; {len(bad)} with violations")
    return 1 if bad else 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="recipe-edit", description=__doc__.splitlines()[0])
    p.add_argument("--config", help=f"TOML run config (default: ${CONFIG_ENV})")
    p.add_argument("--out", dest="out_dir", help="run directory")
    p.add_argument("--corpus")
    p.add_argument("--constraint-dir", dest="constraint_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--min-recipe-count", dest="min_recipe_count", type=int)
    p.add_argument("--hard-filter", dest="hard_filter", action="store_const", const=True)
    p.add_argument("--blacklist", action="store_const", const=True)
    p.add_argument("--paired-only", dest="paired_data_only", action="store_const", const=True)
    p.add_argument("--no-copy", dest="no_copy_attention", action="store_const", const=True)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("build-dataset", help="normalize, pair and split the corpus")
    t = sub.add_parser("train", help="train a model")
    t.add_argument("model", choices=["ingredients", "steps"])
    e = sub.add_parser("edit", help="edit one recipe or every base in a split")
    e.add_argument("--recipe", help="recipe id in the corpus")
    e.add_argument("--recipe-file", help="JSONL file holding one recipe")
    e.add_argument("--constraint", choices=CONSTRAINTS)
    e.add_argument("--split", choices=SPLITS)
    e.add_argument("--system", choices=["share", "rule"], default="share")
    v = sub.add_parser("evaluate", help="score system outputs against gold pairs")
    v.add_argument("--outputs", required=True)
    v.add_argument("--split", choices=SPLITS, default="test")
    c = sub.add_parser("check", help="run the rules checker")
    c.add_argument("--outputs", help="system outputs JSONL (default: check the corpus)")
    return p


OVERRIDES = ("out_dir", "corpus", "constraint_dir", "seed", "preset", "lr", "epochs", "min_recipe_count",
             "hard_filter", "blacklist", "paired_data_only", "no_copy_attention")

COMMANDS = {"build-dataset": cmd_build_dataset, "train": cmd_train, "edit": cmd_edit, "evaluate": cmd_evaluate, "check": cmd_check}


def load_config(args: argparse.Namespace) -> RunConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    cfg = RunConfig.from_toml(path) if path else RunConfig()
    for key in OVERRIDES:
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ValidationError, CorpusFormatError, VocabError, RulesFormatError, CheckpointError, UntrainedModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
