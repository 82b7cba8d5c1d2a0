import numpy as np
import pytest

from gazex.attribution import (expected_gradients, expected_gradients_fn, explain, pick_explained,
                               summarize_context, write_attribution_csv, write_context_summary_csv)
from gazex.errors import InvalidInputError
from gazex.features import CONTEXT_CHANNELS, GazeMode
from gazex.neuralnet import TrainConfig, train


def linear(w):
    def fn(pts):
        return np.stack([sum((pts[k] * w[k][..., j]).reshape(len(pts[k]), -1).sum(1) for k in w)
                         for j in range(2)], axis=1)

    def grad(pts):
        return {k: np.broadcast_to(w[k], pts[k].shape + (2,)).copy() for k in w}
    return fn, grad


def test_linear_closed_form_and_completeness():
    rng = np.random.default_rng(0)
    w = {"a": rng.normal(size=(3, 2, 2)), "b": rng.normal(size=(4, 2))}
    x = {"a": rng.normal(size=(2, 3, 2)), "b": rng.normal(size=(2, 4))}
    bg = {"a": rng.normal(size=(30, 3, 2)), "b": rng.normal(size=(30, 4))}
    fn, grad = linear(w)
    attr = expected_gradients_fn(fn, grad, x, bg, n_background=30, n_alpha=3, seed=1)
    # sampling without replacement of all 30 rows makes the background mean exact
    for k in w:
        expect = w[k][None] * (x[k] - bg[k].mean(0))[..., None]
        np.testing.assert_allclose(attr.values[k], expect, atol=1e-6)
    assert attr.completeness_error().max() < 1e-6


def test_input_equal_to_background_gives_zero():
    rng = np.random.default_rng(0)
    w = {"a": rng.normal(size=(3, 2))}
    x = {"a": np.ones((1, 3))}
    fn, grad = linear(w)
    attr = expected_gradients_fn(fn, grad, x, {"a": np.ones((5, 3))}, n_background=5)
    assert not attr.values["a"].any()


def test_empty_background():
    fn, grad = linear({"a": np.ones((2, 2))})
    with pytest.raises(InvalidInputError):
        expected_gradients_fn(fn, grad, {"a": np.ones((1, 2))}, {"a": np.ones((0, 2))})


@pytest.fixture(scope="module")
def model(small_splits):
    tr, va, _ = small_splits
    cfg = TrainConfig(epochs=2, hidden_motion=8, hidden_distance=4, hidden_gaze=4, hidden_dense=16)
    return train(cfg, tr, va, GazeMode.EYE_VISLET, True)[0]


def test_linear_in_output(model, small_splits):
    te = small_splits[2].subset(np.arange(3))
    bg = small_splits[0]
    ax = expected_gradients(model, te, bg, 10, seed=5, output_weights=np.eye(2))
    mix = expected_gradients(model, te, bg, 10, seed=5, output_weights=np.array([[2.0, -3.0], [0.5, 0.5]]))
    for k, v in ax.values.items():
        np.testing.assert_allclose(mix.values[k][..., 0], 2 * v[..., 0] - 3 * v[..., 1], atol=1e-6)
        np.testing.assert_allclose(mix.values[k][..., 1], 0.5 * v[..., 0] + 0.5 * v[..., 1], atol=1e-6)


def test_seeded_determinism(model, small_splits):
    te = small_splits[2].subset(np.arange(2))
    a = expected_gradients(model, te, small_splits[0], 8, seed=3)
    b = expected_gradients(model, te, small_splits[0], 8, seed=3)
    for k in a.values:
        assert np.array_equal(a.values[k], b.values[k])


def test_context_off_attributions_zero(small_splits):
    tr, va, te = small_splits
    cfg = TrainConfig(epochs=1, hidden_motion=8, hidden_distance=4, hidden_gaze=4, hidden_dense=16)
    m = train(cfg, tr, va, GazeMode.EYE_VISLET, include_context=False)[0]
    attr = expected_gradients(m, te.subset(np.arange(3)), tr, 10)
    assert not attr.values["ctx"].any()


def test_summary_and_csv(model, small_splits, tmp_path, caplog):
    te = small_splits[2]
    chosen, attr = explain(model, te, small_splits[0], n_explain=4, n_background=5)
    assert len(chosen) == 4
    summ = summarize_context(attr, "x")
    assert [s.channel for s in summ] == list(CONTEXT_CHANNELS)
    assert all(s.n == 4 and 0 <= s.positive_fraction <= 1 for s in summ)
    write_attribution_csv(chosen, attr, tmp_path / "a.csv")
    write_context_summary_csv(summ, tmp_path / "s.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "sample,trial_id,window_start,axis,channel,value"
    assert len(lines) == 1 + 4 * 2 * (6 + 4 + 3 + 8)
    with caplog.at_level("WARNING"):
        assert len(pick_explained(te.subset(np.arange(3)), 50)) == 3
    assert "using all" in caplog.text
