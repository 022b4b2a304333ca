"""Train the ingredient editor on the planted butter -> margarine corpus and report edit precision."""
from __future__ import annotations

import argparse

import numpy as np

from recipe_edit.corpus import RecipePair, build_vocab, resolve_corpus
from recipe_edit.editor import EditorConfig, edit_ingredients, train_editor
from recipe_edit.eval import edit_metrics
from recipe_edit.synthetic import planted_rule_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=500)
    args = ap.parse_args()

    raw = planted_rule_corpus(n_pairs=args.pairs, seed=args.seed)
    vocab = build_vocab(raw, min_recipe_count=1)
    recipes = {r.recipe_id: r for r in resolve_corpus(raw, vocab)}
    pairs = [RecipePair(f"b{k:03d}", f"t{k:03d}", "dairy-free") for k in range(args.pairs)]
    cfg = EditorConfig(n_layers=2, d_model=32, n_heads=4, d_ff=64, lr=3e-3, epochs=args.epochs, patience=args.epochs)
    model, history = train_editor(pairs, recipes, vocab, cfg, seed=args.seed)

    scores = []
    for p in pairs:
        base, target = recipes[p.base], recipes[p.target]
        pred = edit_ingredients(model, base, p.constraint).selected
        em = edit_metrics(base.ingredient_ids, pred, target.ingredient_ids)
        scores.append((em.del_precision, em.ins_precision))
    dele, ins = np.mean(scores, axis=0)
    print(f"epochs trained: {len(history)}")
    print(f"deletion precision:  {dele:.3f}")
    print(f"insertion precision: {ins:.3f}")


if __name__ == "__main__":
    main()
