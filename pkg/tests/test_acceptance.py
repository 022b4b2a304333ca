"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is echoed in the pytest terminal
summary. Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import itertools
import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import ForestGraph, bernoulli_scan_distribution, brute_prf, brute_set_scores, trees
from recipe_edit.cli import main as cli_main
from recipe_edit.corpus import ConstraintSpec, build_vocab, load_corpus, pair_recipes, resolve_corpus
from recipe_edit.editor import (
    EditorConfig,
    EditorInput,
    IngredientEditor,
    edit_ingredients,
    editor_loss,
    mean_f1,
    pool_scores,
    predict_cardinality,
    score_positions,
    train_editor,
)
from recipe_edit.eval import (
    SystemOutput,
    TreeNode,
    edit_metrics,
    rouge_l,
    set_f1,
    set_iou,
    tree_edit_distance,
    violation_rates,
)
from recipe_edit.generator import (
    BlacklistTrie,
    GeneratorConfig,
    StepGenerator,
    WordVocab,
    apply_blacklist,
    build_word_vocab,
    encode_ingredients,
    evaluate_lm,
    generate_steps,
    lm_loss,
    recipe_example,
    step_distribution,
    train_generator,
)
from recipe_edit.nn.gradcheck import grad_check
from recipe_edit.rules import check_ingredient_list, check_recipe, check_steps, load_constraint_specs, rule_edit
from recipe_edit.synthetic import rare_ingredient_corpus

ROOT = Path(__file__).resolve().parents[1]
TOY = ROOT / "src" / "recipe_edit" / "data" / "toy_corpus.jsonl"


# ---------------------------------------------------------------------------
# 1. gradients


def test_gradient_correctness(verdict):
    start = time.perf_counter()
    worst = {}

    ed_cfg = EditorConfig(n_layers=2, d_model=16, n_heads=2, d_ff=32, max_positions=8)
    for seed in range(2):
        model = IngredientEditor.create(12, ["chicken", "soup"], ed_cfg, seed)
        inp = EditorInput("dairy-free", ("chicken", "soup"), (7, 2, 9, 0))
        rep = grad_check(lambda: editor_loss(score_positions(model, inp, 6), {2, 5, 11}, 3), model.store, max_coords=8, seed=seed)
        worst[f"editor seed {seed}"] = rep.max_rel_error

    words = WordVocab(["<pad>", "<unk>", "<bos>", "<eos>", "<sep>", ",", ".", "add", "butter", "melt", "salt", "stir", "the", "oil"])
    v = words.index
    inp = [v["butter"], v[","], v["salt"], v[","], v["oil"]]
    tgt = [v["melt"], v["the"], v["butter"], v["."], words.sep, v["add"], v["salt"], words.eos]
    for embed_dim in (None, 8):
        cfg = GeneratorConfig(n_layers=2, d_model=16, n_heads=2, d_ff=32, embed_dim=embed_dim, max_input_len=8, max_len=10)
        model = StepGenerator.create(words, cfg, seed=1)
        rep = grad_check(lambda: lm_loss(model, inp, tgt)[0], model.store, max_coords=8)
        worst[f"generator embed_dim={embed_dim}"] = rep.max_rel_error

    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-4 and elapsed < 120
    detail = ", ".join(f"{k} {e:.1e}" for k, e in worst.items()) + f"; {elapsed:.1f}s"
    assert verdict(1, "gradient check (rel. err <= 1e-4, < 2 min)", ok, detail)


# ---------------------------------------------------------------------------
# 2. permutation invariance


def test_set_pooling_invariance(verdict):
    cfg = EditorConfig(n_layers=2, d_model=32, n_heads=4, d_ff=64, max_positions=16)
    base_ids = (0, 3, 5, 8, 12, 17, 19)
    rng = np.random.default_rng(0)
    worst = 0.0
    for seed in range(10):
        model = IngredientEditor.create(20, ["beef", "chili"], cfg, seed)
        ref = pool_scores(score_positions(model, EditorInput("vegetarian", ("beef", "chili"), base_ids), 12)).data
        for _ in range(20):
            perm = tuple(int(i) for i in rng.permutation(base_ids))
            out = pool_scores(score_positions(model, EditorInput("vegetarian", ("beef", "chili"), perm), 12)).data
            worst = max(worst, float(np.max(np.abs(1 / (1 + np.exp(-out)) - 1 / (1 + np.exp(-ref))))))
    assert verdict(2, "pooled probabilities permutation invariant (<= 1e-9)", worst <= 1e-9, f"max |diff| {worst:.1e} over 10 inits x 20 perms")


# ---------------------------------------------------------------------------
# 3. normalization


def test_distribution_normalization(synthetic_vocab, verdict):
    words = build_word_vocab(["melt the butter and stir in the milk, then add salt."], synthetic_vocab)
    dairy = {synthetic_vocab.require(n) for n in ("butter", "milk")}
    trie = BlacklistTrie.for_constraint(ConstraintSpec("dairy-free", "hard", frozenset(dairy)), synthetic_vocab, words)
    cfg = GeneratorConfig(n_layers=1, d_model=16, n_heads=2, d_ff=32, max_input_len=32, max_len=12)
    names = [e.text for e in synthetic_vocab.entries]
    rng = np.random.default_rng(0)
    worst, steps = 0.0, 0
    for decode in range(100):
        model = StepGenerator.create(words, cfg, seed=decode % 10)
        inp = encode_ingredients(rng.choice(names, size=3, replace=False), words)
        use_blacklist = decode % 2 == 1
        prefix: list[int] = []
        for _ in range(10):
            dist = step_distribution(model, inp, prefix)
            if use_blacklist:
                dist = apply_blacklist(dist, prefix, trie)
            for p in (dist.p_vocab, dist.alpha, dist.p_final):
                worst = max(worst, abs(float(p.sum()) - 1.0))
            steps += 1
            prefix.append(int(rng.choice(len(words), p=dist.p_final)))
    assert verdict(3, "p_vocab, alpha, p_final sum to 1 (+-1e-9)", worst <= 1e-9, f"max |sum-1| {worst:.1e} over {steps} steps of 100 decodes (50 blacklisted)")


# ---------------------------------------------------------------------------
# 4. safety


def test_rule_baseline_safety(synthetic_recipes, synthetic_specs, synthetic_vocab, verdict):
    toy_raw = load_corpus(TOY)
    toy_vocab = build_vocab(toy_raw, 2)
    corpora = [(synthetic_recipes, synthetic_specs, synthetic_vocab)]
    corpora.append((resolve_corpus(toy_raw, toy_vocab), load_constraint_specs(toy_vocab), toy_vocab))
    n, rates = 0, []
    for recipes, specs, vocab in corpora:
        outs = [
            SystemOutput(r.recipe_id, c, e.ingredient_ids, e.steps_text)
            for r in recipes
            for c, spec in specs.items()
            if spec.is_hard
            for e in [rule_edit(r, spec, vocab)]
        ]
        vr = violation_rates(outs, specs, vocab)
        n += vr.n_recipes
        rates.append((vr.list_rate, vr.step_rate))
    ok = all(r == (0.0, 0.0) for r in rates)
    assert verdict(4, "(a) rule baseline has 0% list and step violations", ok, f"{n} edits on 2 corpora, rates {rates}")


@pytest.fixture(scope="module")
def share_models(synthetic_raw, synthetic_vocab, synthetic_recipes, synthetic_specs):
    recipes = {r.recipe_id: r for r in synthetic_recipes}
    pairs = [p for c in sorted(synthetic_specs) for p in pair_recipes(synthetic_recipes, synthetic_specs[c])]
    editor, _ = train_editor(pairs, recipes, synthetic_vocab, EditorConfig(n_layers=1, d_model=32, n_heads=4, d_ff=64, lr=3e-3, epochs=15), seed=0)
    words = build_word_vocab([s for r in synthetic_recipes for s in r.steps_text], synthetic_vocab)
    examples = [recipe_example(r, synthetic_vocab, words) for r in synthetic_recipes[:40]]
    gcfg = GeneratorConfig(n_layers=1, d_model=32, n_heads=4, d_ff=64, max_len=64, lr=3e-3, epochs=10)
    generator, _ = train_generator(examples, words, gcfg, seed=0)
    return editor, generator, words


def _share(editor, generator, words, vocab, recipe, spec, guarded):
    pred = edit_ingredients(editor, recipe, spec.constraint_id, spec, hard_filter=guarded)
    names = [vocab.name(i) for i in pred.selected] or [vocab.name(i) for i in recipe.ingredient_ids]
    trie = BlacklistTrie.for_constraint(spec, vocab, words) if guarded else None
    steps = generate_steps(generator, encode_ingredients(names, words), blacklist=trie, max_len=48).steps
    return pred.selected, steps


def test_share_safety_with_filter_and_blacklist(share_models, synthetic_recipes, synthetic_specs, synthetic_vocab, verdict):
    editor, generator, words = share_models
    hard = [s for _, s in sorted(synthetic_specs.items()) if s.is_hard]
    jobs = [(r, s) for r in synthetic_recipes for s in hard if not check_recipe(r, s, synthetic_vocab).is_empty][:200]
    assert len(jobs) == 200
    guarded = {"list": 0, "steps": 0}
    for recipe, spec in jobs:
        selected, steps = _share(editor, generator, words, synthetic_vocab, recipe, spec, guarded=True)
        guarded["list"] += bool(check_ingredient_list(selected, spec))
        guarded["steps"] += bool(check_steps(steps, spec, synthetic_vocab))
    unguarded = 0
    for recipe, spec in jobs[:50]:
        selected, steps = _share(editor, generator, words, synthetic_vocab, recipe, spec, guarded=False)
        unguarded += bool(check_ingredient_list(selected, spec) or check_steps(steps, spec, synthetic_vocab))
    ok = guarded == {"list": 0, "steps": 0}
    detail = f"200 generations: {guarded['list']} list / {guarded['steps']} step violations (unguarded: {unguarded}/50 violate)"
    assert verdict(4, "(b) SHARE + filter + blacklist has 0% violations", ok, detail)


# ---------------------------------------------------------------------------
# 5. metric oracles


def _all_subsequences(seq):
    return frozenset(tuple(seq[i] for i in idx) for k in range(1, len(seq) + 1) for idx in itertools.combinations(range(len(seq)), k))


def test_metric_oracles(verdict):
    start = time.perf_counter()
    mismatches = {"sets": 0, "rouge": 0, "ted": 0}
    counts = {"sets": 0, "rouge": 0, "ted": 0}

    universe = range(6)
    subsets = [frozenset(c) for k in range(7) for c in itertools.combinations(universe, k)]
    for pred, gold in itertools.product(subsets, repeat=2):
        iou, f1 = brute_set_scores(pred, gold, universe)
        mismatches["sets"] += set_iou(pred, gold) != float(iou) or set_f1(pred, gold) != float(f1)
        counts["sets"] += 1
    for base, pred, gold in itertools.product(subsets, repeat=3):
        em = edit_metrics(base, pred, gold)
        ip, if1 = brute_prf(pred - base, gold - base)
        dp, df1 = brute_prf(base - pred, base - gold)
        got = (em.ins_precision, em.ins_f1, em.del_precision, em.del_f1)
        mismatches["sets"] += got != (float(ip), float(if1), float(dp), float(df1))
        counts["sets"] += 1

    # ROUGE-L over every pair of sequences of length <= 8 on {a, b, c}. Both
    # scorers compare tokens only for equality, so renaming symbols in both
    # sequences changes nothing: each pair is checked through the renamed copy
    # whose first sequence introduces symbols in the order a, b, c. The
    # renaming invariance itself is checked on random pairs below.
    seqs = [q for n in range(9) for q in itertools.product("abc", repeat=n)]
    column = {}
    for n in range(1, 9):
        column.update({q: i for i, q in enumerate(itertools.product("abc", repeat=n))})
    # present[k][row, col]: the length-k sequence ``col`` is a subsequence of seqs[row]
    present = {k: np.zeros((len(seqs), 3**k), dtype=bool) for k in range(1, 9)}
    subs = {}
    for row, q in enumerate(seqs):
        subs[q] = _all_subsequences(q)
        for sub in subs[q]:
            present[len(sub)][row, column[sub]] = True
    lengths = np.array([len(q) for q in seqs], dtype=float)

    def first_seen_order(q):
        order = list(dict.fromkeys(q))
        return order == list("abc"[: len(order)])

    for a in filter(first_seen_order, seqs):
        lcs = np.zeros(len(seqs))
        for k in range(1, len(a) + 1):
            cols = [column[sub] for sub in subs[a] if len(sub) == k]
            lcs[present[k][:, cols].any(axis=1)] = k
        expected = np.where(lcs > 0, 2 * lcs / np.maximum(len(a) + lengths, 1), 0.0)
        got = np.array([rouge_l(a, b) for b in seqs])
        mismatches["rouge"] += int(np.sum(np.abs(got - expected) > 1e-12))
        counts["rouge"] += len(seqs)
    pick = random.Random(0)
    for _ in range(100_000):
        a, b = pick.choice(seqs), pick.choice(seqs)
        rename = dict(zip("abc", pick.sample("abc", 3)))
        mismatches["rouge"] += rouge_l(a, b) != rouge_l([rename[x] for x in a], [rename[x] for x in b])

    # TED over every pair of trees with <= 6 nodes on {a, b}, against
    # shortest paths in the unit-cost forest edit graph. Swapping the two
    # labels in both trees is the only reduction used.
    graph = ForestGraph(6)
    every = [t for n in range(1, 7) for t in trees(n, ("a", "b"))]
    nodes = {t: TreeNode.from_tuple(t) for t in every}
    position = {t: i for i, t in enumerate(every)}

    def swap(t):
        return ("b" if t[0] == "a" else "a", tuple(swap(c) for c in t[1]))

    sources = [t for t in every if position[t] <= position[swap(t)]]
    targets = [graph.index[(u,)] for u in every]
    for lo in range(0, len(sources), 256):
        chunk = sources[lo : lo + 256]
        dist = graph.distances_from([(t,) for t in chunk])[:, targets]
        for t, row in zip(chunk, dist):
            got = [tree_edit_distance(nodes[t], nodes[u]) for u in every]
            mismatches["ted"] += int(np.sum(np.asarray(got) != row))
            counts["ted"] += len(every)
    for _ in range(20_000):
        t, u = pick.choice(every), pick.choice(every)
        swapped = tree_edit_distance(TreeNode.from_tuple(swap(t)), TreeNode.from_tuple(swap(u)))
        mismatches["ted"] += tree_edit_distance(nodes[t], nodes[u]) != swapped

    elapsed = time.perf_counter() - start
    ok = not any(mismatches.values()) and elapsed < 600
    detail = ", ".join(f"{k} {mismatches[k]}/{counts[k]} mismatches" for k in counts)
    detail += f" (covering all {len(seqs) ** 2} sequence pairs and {len(every) ** 2} tree pairs); {elapsed:.0f}s"
    assert verdict(5, "metrics match brute-force oracles (< 10 min)", ok, detail)


# ---------------------------------------------------------------------------
# 6. cardinality sampling


def test_cardinality_sampling(verdict):
    cases = [np.zeros(2), np.array([-1.0, 0.3, -0.2, 0.8]), np.array([2.0]), np.array([-3.0, -3.0, 1.5])]
    n = 100_000
    worst = 0.0
    for c, logits in enumerate(cases):
        rng = np.random.default_rng(100 + c)
        counts = np.bincount([predict_cardinality(logits, rng) for _ in range(n)], minlength=len(logits) + 1)
        exact = bernoulli_scan_distribution([1 / (1 + math.exp(-x)) for x in logits])
        for k, p in enumerate(exact):
            sigma = math.sqrt(p * (1 - p) / n)
            worst = max(worst, abs(counts[k] / n - p) / sigma if sigma else 0.0)
    ok = worst <= 3.0
    assert verdict(6, "empirical K distribution within 3 sigma", ok, f"max deviation {worst:.2f} sigma over {len(cases)} cases x 1e5 draws")


# ---------------------------------------------------------------------------
# 7 and 8. memorization and the planted rule


@pytest.fixture(scope="module")
def planted_editor(planted):
    recipes, vocab, pairs = planted
    cfg = EditorConfig(n_layers=2, d_model=32, n_heads=4, d_ff=64, lr=3e-3, epochs=500, patience=500)
    start = time.perf_counter()
    model, history = train_editor(pairs, recipes, vocab, cfg, seed=0)
    return model, history, time.perf_counter() - start


def test_memorization(planted, planted_editor, synthetic_recipes, synthetic_vocab, verdict):
    recipes, vocab, pairs = planted
    model, history, editor_secs = planted_editor
    f1 = mean_f1(model, [(recipes[p.base], recipes[p.target], p.constraint) for p in pairs])

    corpus = synthetic_recipes[:20]
    words = build_word_vocab([s for r in corpus for s in r.steps_text], synthetic_vocab)
    examples = [recipe_example(r, synthetic_vocab, words) for r in corpus]
    cfg = GeneratorConfig(n_layers=2, d_model=32, n_heads=4, d_ff=64, max_len=96, lr=3e-3, epochs=500, patience=500, target_accuracy=0.99)
    start = time.perf_counter()
    gen, gen_history = train_generator(examples, words, cfg, seed=0)
    gen_secs = time.perf_counter() - start
    _, accuracy = evaluate_lm(gen, examples)
    verbatim = sum(generate_steps(gen, inp).token_ids + [words.eos] == tgt for inp, tgt in examples)

    ok = f1 >= 0.95 and len(history) <= 500 and accuracy >= 0.9 and verbatim >= 1 and max(editor_secs, gen_secs) < 600
    detail = (
        f"editor F1 {f1:.3f} after {len(history)} epochs ({editor_secs:.0f}s); "
        f"generator accuracy {accuracy:.3f} after {len(gen_history)} epochs ({gen_secs:.0f}s), {verbatim}/20 verbatim"
    )
    assert verdict(7, "memorization smoke tests", ok, detail)


def test_planted_rule(planted, planted_editor, verdict):
    recipes, vocab, pairs = planted
    model, _, _ = planted_editor
    ins_p, del_p = [], []
    for p in pairs:
        base, target = recipes[p.base], recipes[p.target]
        pred = edit_ingredients(model, base, p.constraint).selected
        em = edit_metrics(base.ingredient_ids, pred, target.ingredient_ids)
        ins_p.append(em.ins_precision)
        del_p.append(em.del_precision)
    ins, dele = float(np.mean(ins_p)), float(np.mean(del_p))
    ok = dele >= 0.9 and ins >= 0.8
    assert verdict(8, "planted butter->margarine rule learned", ok, f"deletion precision {dele:.3f}, insertion precision {ins:.3f} on 50 held-in pairs")


# ---------------------------------------------------------------------------
# 9. copy ablation


def test_copy_ablation(verdict):
    raw = rare_ingredient_corpus(40, seed=0)
    vocab = build_vocab(raw, 1)
    recipes = resolve_corpus(raw, vocab)
    words = build_word_vocab([s for r in recipes[:30] for s in r.steps_text], vocab)
    train = [recipe_example(r, vocab, words) for r in recipes[:30]]
    held = [recipe_example(r, vocab, words) for r in recipes[30:]]
    losses = {}
    for copy in (True, False):
        cfg = GeneratorConfig(n_layers=2, d_model=32, n_heads=4, d_ff=64, max_len=64, lr=3e-3, epochs=60, patience=60, copy=copy)
        model, _ = train_generator(train, words, cfg, seed=0)
        losses[copy] = evaluate_lm(model, held)[0]
    ok = losses[True] < losses[False]
    detail = f"held-out lm_loss copy {losses[True]:.3f} vs no-copy {losses[False]:.3f} on 10 rare-ingredient recipes"
    assert verdict(9, "copy attention beats the no-copy ablation", ok, detail)


# ---------------------------------------------------------------------------
# 10. CLI determinism


def test_cli_determinism(tmp_path, verdict):
    commands = [
        ["build-dataset"],
        ["train", "ingredients"],
        ["train", "steps"],
        ["edit", "--recipe", "chicken-dijon", "--constraint", "dairy-free"],
        ["edit", "--split", "test", "--system", "share"],
        ["edit", "--split", "test", "--system", "rule"],
        ["evaluate", "--outputs", "{out}/outputs.share.test.jsonl"],
        ["evaluate", "--outputs", "{out}/outputs.rule.test.jsonl"],
        ["check", "--outputs", "{out}/outputs.share.test.jsonl"],
    ]
    snapshots = []
    codes = []
    for run in ("a", "b"):
        out = tmp_path / run
        base = ["--corpus", str(TOY), "--out", str(out), "--seed", "7", "--lr", "3e-3", "--epochs", "3",
                "--min-recipe-count", "2", "--hard-filter", "--blacklist"]
        for cmd in commands:
            codes.append(cli_main(base + [c.format(out=out) for c in cmd]))
        snapshots.append({p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    same = snapshots[0] == snapshots[1]
    ok = same and all(c == 0 for c in codes)
    detail = f"{len(commands)} commands x 2 runs, exit codes {sorted(set(codes))}, {len(snapshots[0])} files byte-identical: {same}"
    assert verdict(10, "CLI reruns are byte-identical", ok, detail)

