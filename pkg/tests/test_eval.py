import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import ForestGraph, brute_distinct, brute_lcs, brute_prf, brute_set_scores, trees
from recipe_edit.corpus import ConstraintSpec, IngredientVocab, Recipe, RecipePair, VocabEntry
from recipe_edit.eval import (
    ActionTree,
    SystemOutput,
    TreeNode,
    build_action_tree,
    extract_verbs,
    distinct_n,
    edit_metrics,
    evaluate_pairs,
    format_report,
    load_verb_lexicon,
    nted,
    report_json,
    rouge_l,
    set_f1,
    set_iou,
    tree_edit_distance,
    violation_rates,
)
from recipe_edit.rules import rule_edit

VERBS = load_verb_lexicon()


def _vocab(*names):
    return IngredientVocab([VocabEntry(i, tuple(n.split())) for i, n in enumerate(names)])


def _shape(tree: ActionTree):
    return tree.root.to_tuple()


def test_set_examples():
    assert set_iou({"a", "b"}, {"b", "c"}) == pytest.approx(1 / 3)
    assert set_f1({"a", "b"}, {"b", "c"}) == pytest.approx(1 / 2)
    assert set_iou({1}, {1}) == set_f1({1}, {1}) == 1.0
    assert set_iou(set(), set()) == set_f1(set(), set()) == 1.0
    assert set_iou({1}, set()) == set_f1({1}, set()) == 0.0


universe = range(5)
_sets = st.frozensets(st.integers(0, 4))


@given(_sets, _sets, _sets)
def test_set_metrics_match_enumeration(base, pred, gold):
    iou, f1 = brute_set_scores(pred, gold, universe)
    assert set_iou(pred, gold) == float(iou) and set_f1(pred, gold) == float(f1)
    em = edit_metrics(base, pred, gold)
    ip, if1 = brute_prf(pred - base, gold - base)
    dp, df1 = brute_prf(base - pred, base - gold)
    assert (em.ins_precision, em.ins_f1, em.del_precision, em.del_f1) == pytest.approx(
        (float(ip), float(if1), float(dp), float(df1)), abs=1e-15
    )
    assert set_iou(pred, gold) == set_iou(gold, pred)


def test_edit_metrics_hand_case():
    em = edit_metrics({"a", "b", "c"}, {"a", "d"}, {"a", "e"})
    assert em.ins_precision == 0.0 and em.ins_f1 == 0.0
    assert em.del_precision == 1.0 and em.del_f1 == 1.0
    none = edit_metrics({"a"}, {"a"}, {"b"})
    assert none.ins_precision == 0.0
    assert edit_metrics({"a"}, {"a"}, {"a"}).ins_precision == 1.0


def test_rouge_examples():
    assert rouge_l("a b c d".split(), "a c d e".split()) == pytest.approx(0.75)
    assert rouge_l(["x", "y"], ["x", "y"]) == 1.0
    assert rouge_l(["x"], ["y"]) == 0.0
    assert rouge_l([], ["y"]) == 0.0


@given(st.lists(st.sampled_from("abc"), max_size=10), st.lists(st.sampled_from("abc"), max_size=10))
def test_rouge_matches_brute_lcs(a, b):
    lcs = brute_lcs(tuple(a), tuple(b))
    expected = 0.0 if not a or not b or lcs == 0 else 2 * lcs / (len(a) + len(b))
    assert rouge_l(a, b) == pytest.approx(expected, abs=1e-15)


def test_distinct_examples():
    assert distinct_n([["a", "b", "a", "b"]], 2) == pytest.approx(2 / 3)
    assert distinct_n([["a", "b", "c"]], 2) == 1.0
    assert distinct_n([["a", "b", "c"], ["a", "b", "c"]], 2) == pytest.approx(2 / 4)
    assert distinct_n([["a"]], 2) == 0.0
    with pytest.raises(ValueError):
        distinct_n([["a"]], 0)


@given(st.lists(st.lists(st.sampled_from("abcd"), max_size=6), max_size=4), st.integers(1, 3))
def test_distinct_matches_enumeration(texts, n):
    assert distinct_n(texts, n) == pytest.approx(float(brute_distinct(texts, n)), abs=1e-15)


def test_tree_construction_examples():
    v = _vocab("flour", "onion", "water")
    assert _shape(build_action_tree(["chop onion"], VERBS, v)) == ("<root>", (("onion", (("chop", ()),)),))
    assert _shape(build_action_tree([], VERBS, v)) == ("<root>", ())
    assert _shape(build_action_tree(["mix flour and water"], VERBS, v)) == (
        "<root>",
        (("flour", (("mix", ()),)), ("water", (("mix", ()),))),
    )
    chained = build_action_tree(["Chop the onion.", "Then stir and simmer.", "Boil water."], VERBS, v)
    assert _shape(chained) == (
        "<root>",
        (("onion", (("chop", (("stir", (("simmer", ()),)),)),)), ("water", (("boil", ()),))),
    )


def test_extract_verbs_lemmatizes_and_skips_mentions():
    v = _vocab("dressing", "salad")
    assert extract_verbs("Chopped onions, then stirring.", VERBS, v) == ["chop", "stir"]
    assert "dress" not in extract_verbs("Toss salad with dressing.", VERBS, v)


def test_ted_examples():
    a = TreeNode.from_tuple(("r", (("a", ()), ("b", ()))))
    b = TreeNode.from_tuple(("r", (("a", ()), ("c", ()))))
    assert tree_edit_distance(a, a) == 0
    assert tree_edit_distance(a, b) == 1
    empty = ActionTree()
    t = ActionTree(TreeNode.from_tuple(("<root>", (("x", (("y", ()),)),))))
    assert tree_edit_distance(t, empty) == 2 and nted(t, empty) == 1.0
    assert nted(t, t) == 0.0 and nted(empty, empty) == 0.0


@pytest.fixture(scope="module")
def graph4():
    return ForestGraph(4)


def test_ted_matches_exhaustive_search_small(graph4):
    pool = [t for n in range(1, 5) for t in trees(n, ("a", "b"))]
    dist = graph4.distances_from([(t,) for t in pool])
    for i, t in enumerate(pool):
        for u in pool:
            assert tree_edit_distance(TreeNode.from_tuple(t), TreeNode.from_tuple(u)) == dist[i, graph4.index[(u,)]]


def test_ted_triangle_and_symmetry():
    rng = random.Random(0)
    pool = [TreeNode.from_tuple(t) for n in range(1, 6) for t in trees(n, ("a", "b"))]
    for _ in range(300):
        x, y, z = rng.sample(pool, 3)
        xy, yz, xz = tree_edit_distance(x, y), tree_edit_distance(y, z), tree_edit_distance(x, z)
        assert xz <= xy + yz
        assert xy == tree_edit_distance(y, x)


def test_violation_rates(synthetic_recipes, synthetic_specs, synthetic_vocab):
    clean = SystemOutput("r", "dairy-free", frozenset({synthetic_vocab.require("salt")}), ("Add salt.",))
    assert violation_rates([clean], synthetic_specs, synthetic_vocab).list_rate == 0.0
    dirty = SystemOutput("q", "dairy-free", frozenset({synthetic_vocab.require("butter")}), ("Add salt.",))
    vr = violation_rates([clean, dirty], synthetic_specs, synthetic_vocab)
    assert (vr.list_rate, vr.step_rate, vr.n_recipes) == (0.5, 0.0, 2)
    rule = [
        SystemOutput(r.recipe_id, c, out.ingredient_ids, out.steps_text)
        for r in synthetic_recipes
        for c, spec in synthetic_specs.items()
        for out in [rule_edit(r, spec, synthetic_vocab)]
    ]
    vr = violation_rates(rule, synthetic_specs, synthetic_vocab)
    assert vr.n_recipes > 0 and vr.list_rate == 0.0 and vr.step_rate == 0.0
    soft = SystemOutput("q", "low-fat", frozenset(), ("butter",))
    assert violation_rates([soft], synthetic_specs, synthetic_vocab).n_recipes == 0


def test_evaluate_pairs_identity_and_missing(synthetic_recipes, synthetic_specs, synthetic_vocab):
    from recipe_edit.corpus import pair_recipes

    recipes = {r.recipe_id: r for r in synthetic_recipes}
    pairs = [p for spec in synthetic_specs.values() for p in pair_recipes(synthetic_recipes, spec)][:30]
    assert pairs
    gold = {p.key(): SystemOutput(p.base, p.constraint, recipes[p.target].ingredient_ids, recipes[p.target].steps_text) for p in pairs}
    rep = evaluate_pairs(gold, pairs, recipes, synthetic_specs, synthetic_vocab, VERBS)["overall"]
    assert rep["iou"] == rep["f1"] == rep["rouge_l"] == 1.0
    assert rep["nted"] == 0.0 and rep["n_missing"] == 0
    empty = evaluate_pairs({}, pairs[:3], recipes, synthetic_specs, synthetic_vocab, VERBS)["overall"]
    assert empty["n_missing"] == 3 and empty["rouge_l"] == 0.0
    text = format_report(evaluate_pairs(gold, pairs, recipes, synthetic_specs, synthetic_vocab, VERBS))
    assert "IoU" in text and "NTED" in text
    assert report_json({"overall": rep, "per_constraint": {}}).endswith("\n")


def test_evaluate_pairs_composes_per_pair_metrics():
    v = _vocab("butter", "margarine", "onion", "salt")
    base = Recipe("b", ("soup",), frozenset({0, 2, 3}), ("Melt butter.", "Chop onion."))
    target = Recipe("t", ("vegan", "soup"), frozenset({1, 2}), ("Melt margarine.", "Chop onion."))
    spec = ConstraintSpec("dairy-free", "hard", frozenset({0}))
    out = SystemOutput("b", "dairy-free", frozenset({1, 2, 3}), ("Melt margarine.",))
    pair = RecipePair("b", "t", "dairy-free")
    rep = evaluate_pairs({pair.key(): out}, [pair], {"b": base, "t": target}, {"dairy-free": spec}, v, VERBS)
    o = rep["overall"]
    assert o["iou"] == pytest.approx(2 / 3) and o["f1"] == pytest.approx(0.8)
    assert o["ins_precision"] == 1.0 and o["del_precision"] == 1.0 and o["del_f1"] == pytest.approx(2 / 3)
    assert o["rouge_l"] == pytest.approx(2 * 3 / (3 + 6))
    # {margarine: melt} against {margarine: melt, onion: chop}: delete onion and chop
    assert o["nted"] == pytest.approx(2 / 6)
    assert o["list_violation_rate"] == 0.0 and o["distinct2"] == 1.0


def test_system_output_from_json_drops_unknown_names():
    v = _vocab("salt")
    out = SystemOutput.from_json({"base_id": "b", "constraint": "low-fat", "ingredients": ["salt", "moonrock"], "steps": []}, v)
    assert out.ingredient_ids == {0} and out.key == ("b", "low-fat")
    assert out.steps == ()
