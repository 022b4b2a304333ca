import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recipe_edit.corpus import ConstraintSpec, Recipe
from recipe_edit.editor import (
    EditorConfig,
    EditorInput,
    IngredientEditor,
    editor_loss,
    edit_ingredients,
    pool_scores,
    predict,
    predict_cardinality,
    score_positions,
    select_top_k,
    train_editor,
)
from recipe_edit.eval.metrics import set_f1
from recipe_edit.nn.gradcheck import grad_check
from recipe_edit.nn.tensor import Tensor
from recipe_edit.training import UntrainedModelError

TINY = EditorConfig(n_layers=1, d_model=8, n_heads=2, d_ff=16, max_positions=12, margin=2)


def _model(n_ingr=20, seed=0, config=TINY):
    return IngredientEditor.create(n_ingr, ["chicken", "soup"], config, seed)


def _input(ids=(3, 1, 7), constraint="dairy-free"):
    return EditorInput(constraint, ("chicken", "soup"), tuple(ids))


def test_score_positions_shapes():
    m = _model()
    assert score_positions(m, _input(), 1).shape == (1, 21)
    assert score_positions(m, _input(), 8).shape == (8, 21)
    with pytest.raises(ValueError, match="empty"):
        score_positions(m, EditorInput("dairy-free", (), (1,)), 4)
    with pytest.raises(ValueError, match="constraint"):
        score_positions(m, _input(constraint="keto"), 4)
    with pytest.raises(ValueError):
        score_positions(m, _input(), 13)
    with pytest.raises(IndexError):
        score_positions(m, _input(ids=(20,)), 4)


def test_unknown_name_tokens_map_to_unk():
    m = _model()
    a = score_positions(m, EditorInput("vegetarian", ("zzz",), (1,)), 3).data
    b = score_positions(m, EditorInput("vegetarian", ("qqq",), (1,)), 3).data
    assert np.array_equal(a, b)


def test_pool_examples():
    rows = Tensor(np.array([[1.0, 0.0, 9.0], [0.0, 2.0, -9.0]]))
    assert pool_scores(rows).data.tolist() == [1.0, 2.0]
    one = Tensor(np.array([[0.3, -0.2, 5.0]]))
    assert pool_scores(one).data.tolist() == [0.3, -0.2]
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 7))
    ref = [max(x[i, j] for i in range(4)) for j in range(6)]
    assert pool_scores(Tensor(x)).data.tolist() == ref


def test_cardinality_extremes():
    rng = np.random.default_rng(0)
    assert all(predict_cardinality(np.array([-np.inf, -np.inf, -np.inf, np.inf, -np.inf]), rng) == 3 for _ in range(50))
    assert predict_cardinality(np.full(4, -np.inf), rng) == 4


def test_cardinality_half_probability_distribution():
    rng = np.random.default_rng(7)
    n = 20000
    counts = np.bincount([predict_cardinality(np.zeros(2), rng) for _ in range(n)], minlength=3)
    for k, p in enumerate([0.5, 0.25, 0.25]):
        assert abs(counts[k] / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_top_k_examples():
    assert select_top_k(np.array([0.9, 0.1, 0.5]), 2) == {0, 2}
    assert select_top_k(np.full(4, 0.3), 2) == {0, 1}
    assert select_top_k(np.array([0.2, 0.7]), 0) == frozenset()
    with pytest.raises(ValueError):
        select_top_k(np.array([0.2]), 2)


@given(st.lists(st.sampled_from([0.1, 0.2, 0.5, 0.9]), min_size=1, max_size=8), st.data())
def test_top_k_is_well_formed(probs, data):
    k = data.draw(st.integers(0, len(probs)))
    sel = select_top_k(np.array(probs), k)
    assert len(sel) == k
    if 0 < k < len(probs):
        worst_in = min((probs[i], -i) for i in sel)
        best_out = max((probs[i], -i) for i in range(len(probs)) if i not in sel)
        assert worst_in > best_out


def test_loss_hand_values():
    logits = Tensor(np.zeros((2, 5)))
    assert editor_loss(logits, {0}, 1).data == pytest.approx(2 * math.log(2), abs=1e-14)
    big = np.full((2, 5), -40.0)
    big[0, 0] = 40.0
    big[1, -1] = 40.0
    assert editor_loss(Tensor(big), {0}, 1).data < 1e-15
    # K equal to T: all-zero eos target
    none = np.full((2, 5), -40.0)
    none[0, 2] = 40.0
    assert editor_loss(Tensor(none), {2}, 2).data < 1e-15
    with pytest.raises(ValueError):
        editor_loss(logits, {0}, 3)


def test_editor_loss_gradients():
    m = _model(n_ingr=6)
    inp = _input(ids=(4, 0, 2))
    report = grad_check(lambda: editor_loss(score_positions(m, inp, 5), {0, 5}, 2), m.store, max_coords=4)
    assert report.passed, report.max_rel_error


@given(st.permutations([0, 3, 5, 9, 11, 14]), st.integers(0, 3))
def test_pooled_scores_ignore_input_order(perm, seed):
    m = _model(seed=seed)
    base = score_positions(m, _input(ids=(0, 3, 5, 9, 11, 14)), 9).data
    perm_rows = score_positions(m, _input(ids=tuple(perm)), 9).data
    assert np.max(np.abs(pool_scores(Tensor(base)).data - pool_scores(Tensor(perm_rows)).data)) <= 1e-9


def _one_pair(planted):
    recipes, vocab, pairs = planted
    return recipes, vocab, pairs[:1]


def test_memorizes_one_pair(planted):
    recipes, vocab, pairs = _one_pair(planted)
    cfg = EditorConfig(n_layers=1, d_model=32, n_heads=2, d_ff=64, lr=3e-3, epochs=200, patience=200)
    model, history = train_editor(pairs, recipes, vocab, cfg, seed=0)
    base, target = recipes[pairs[0].base], recipes[pairs[0].target]
    pred = edit_ingredients(model, base, "dairy-free")
    assert set_f1(pred.selected, target.ingredient_ids) == 1.0
    assert history[-1]["val_f1"] == 1.0 and len(history) < 200


def test_training_is_deterministic(planted, tmp_path):
    recipes, vocab, pairs = planted
    cfg = EditorConfig(n_layers=1, d_model=8, n_heads=2, d_ff=16, epochs=2, batch_size=4)
    for name in ("a", "b"):
        model, _ = train_editor(pairs[:6], recipes, vocab, cfg, seed=3)
        model.save(tmp_path / f"{name}.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
    back = IngredientEditor.load(tmp_path / "a.ckpt")
    assert back.trained and back.n_ingredients == len(vocab)
    base = recipes[pairs[0].base]
    assert edit_ingredients(back, base, "dairy-free").selected == edit_ingredients(model, base, "dairy-free").selected


def test_prediction_invariants_and_hard_filter(planted):
    recipes, vocab, pairs = planted
    model = IngredientEditor.create(len(vocab), ["x"], TINY, seed=1)
    base = recipes[pairs[0].base]
    with pytest.raises(UntrainedModelError):
        edit_ingredients(model, base, "dairy-free")
    model.trained = True
    butter = vocab.require("butter")
    spec = ConstraintSpec("dairy-free", "hard", frozenset({butter}))
    rng = np.random.default_rng(0)
    for mode in ("deterministic", "sample"):
        raw = edit_ingredients(model, base, "dairy-free", mode=mode, rng=rng)
        assert len(raw.selected) == raw.k_predicted
        assert all(0 <= i < len(vocab) for i in raw.selected)
        assert np.all((raw.pooled_probs >= 0) & (raw.pooled_probs <= 1))
    # force butter into the top of the pooled scores
    model.store["out.b"].data[butter] = 50.0
    raw = edit_ingredients(model, base, "dairy-free")
    assert butter in raw.selected
    filtered = edit_ingredients(model, base, "dairy-free", spec, hard_filter=True)
    assert filtered.selected == raw.selected - {butter}
    assert filtered.k_predicted == len(filtered.selected)
    unused = next(i for i in range(len(vocab)) if i not in raw.selected)
    clean_spec = ConstraintSpec("dairy-free", "hard", frozenset({unused}))
    assert edit_ingredients(model, base, "dairy-free", clean_spec, hard_filter=True).selected == raw.selected
    with pytest.raises(ValueError):
        predict(model, EditorInput("dairy-free", ("x",), (0,)), mode="beam")


def test_training_rejects_empty_pairs(planted):
    recipes, vocab, _ = planted
    with pytest.raises(ValueError):
        train_editor([], recipes, vocab, TINY)


def test_empty_name_is_rejected(planted):
    _, vocab, _ = planted
    with pytest.raises(ValueError, match="empty"):
        Recipe("n", (), frozenset({0}), ("cook.",))
    model = IngredientEditor.create(len(vocab), ["x"], TINY)
    model.trained = True
    with pytest.raises(ValueError, match="empty"):
        predict(model, EditorInput("dairy-free", (), (0,)))
