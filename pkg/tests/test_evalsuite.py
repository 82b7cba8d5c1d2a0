import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gazex.errors import InvalidInputError, ShapeError
from gazex.evalsuite import (HORIZONS, ade, constant_position, constant_velocity, fde, horizon_report, min_k_eval,
                             select_min_ade, straight_walk_mask, write_reports_csv)
from gazex.neuralnet import MEAN, SampleK
from oracles import brute_ade_fde


def test_ade_examples():
    gt = np.zeros((3, 40, 2))
    assert ade(gt, gt) == 0
    assert ade(gt + [0.1, 0.0], gt) == pytest.approx(10)
    two = np.array([[[0.03, 0], [0.05, 0]]])
    assert ade(two, np.zeros_like(two)) == pytest.approx(4)


def test_fde_examples():
    gt = np.zeros((1, 40, 2))
    assert fde(gt, gt) == 0
    p = gt.copy()
    p[0, -1] = [0.03, 0.04]
    assert fde(p, gt) == pytest.approx(5)
    p = gt.copy()
    p[0, 0] = [1, 1]
    assert fde(p, gt) == 0


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        ade(np.zeros((2, 40, 2)), np.zeros((2, 39, 2)))


def test_brute_force_agreement():
    rng = np.random.default_rng(0)
    for _ in range(10):
        b = int(rng.integers(1, 6))
        p, g = rng.normal(size=(b, 40, 2)), rng.normal(size=(b, 40, 2))
        a, f = brute_ade_fde(p.tolist(), g.tolist())
        assert ade(p, g) == pytest.approx(a, abs=1e-9)
        assert fde(p, g) == pytest.approx(f, abs=1e-9)


pairs = arrays(np.float64, (3, 5, 2), elements=st.floats(-100, 100))


@given(pairs, pairs, st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_translation_invariant(p, g, dx, dy):
    s = np.array([dx, dy])
    assert ade(p, g) >= 0 and fde(p, g) >= 0
    assert ade(p + s, g + s) == pytest.approx(ade(p, g), abs=1e-6)
    assert fde(p + s, g + s) == pytest.approx(fde(p, g), abs=1e-6)


class Batch:
    def __init__(self, gt, anchor=None):
        self.gt = gt
        self.anchor = gt[:, 0] if anchor is None else anchor
        self.future = np.diff(np.concatenate([self.anchor[:, None], gt], 1), axis=1)
        self.normalized = False

    def __len__(self):
        return len(self.gt)

    def future_positions(self):
        return self.gt


def test_perfect_predictor_report():
    gt = np.random.default_rng(0).normal(size=(4, 40, 2))
    rep = horizon_report(lambda b, m: b.gt.copy(), Batch(gt))
    assert rep.horizons == HORIZONS
    assert rep.errors == (0.0,) * 8 and rep.ade == 0 and rep.fde == 0
    assert [r[0] for r in rep.rows()] == [str(h) for h in HORIZONS] + ["ADE", "FDE"]


def test_fde_row_equals_horizon_40():
    rng = np.random.default_rng(1)
    gt = rng.normal(size=(6, 40, 2))
    rep = horizon_report(lambda b, m: b.gt + rng.normal(size=b.gt.shape), Batch(gt))
    assert rep.fde == rep.at(40)


def test_empty_dataset():
    with pytest.raises(InvalidInputError):
        horizon_report(lambda b, m: b.gt, Batch(np.zeros((0, 40, 2))))


def test_min_k_selects_lowest_ade_first_on_ties():
    gt = np.zeros((1, 3, 2))
    s = np.stack([np.full((3, 2), 2.0), np.full((3, 2), 1.0), np.full((3, 2), -1.0)])[None]
    chosen, idx = select_min_ade(s, gt)
    assert idx[0] == 1
    np.testing.assert_array_equal(chosen[0], s[0, 1])


def sampler(noise):
    def f(b, mode):
        if mode == MEAN:
            return b.gt.copy()
        out = np.empty((len(b), mode.k) + b.gt.shape[1:])
        for i in range(len(b)):
            r = np.random.default_rng([mode.seed, i])
            out[i] = b.gt[i] + noise * r.normal(size=(mode.k,) + b.gt.shape[1:])
        return out
    return f


def test_min_k_degenerate_equals_mean():
    gt = np.random.default_rng(2).normal(size=(5, 40, 2))
    f = sampler(1e-6)
    assert min_k_eval(f, Batch(gt), 20, 0).ade == pytest.approx(horizon_report(f, Batch(gt)).ade, abs=0.1)


def test_min_k_is_minimum_and_k1_single():
    gt = np.random.default_rng(3).normal(size=(5, 40, 2))
    f = sampler(0.5)
    draws = f(Batch(gt), SampleK(20, 4))
    rep = min_k_eval(f, Batch(gt), 20, 4)
    per = [ade(draws[:, j], gt) for j in range(20)]
    assert rep.ade <= min(per) + 1e-9
    single = f(Batch(gt), SampleK(1, 4))[:, 0]
    assert min_k_eval(f, Batch(gt), 1, 4).ade == pytest.approx(ade(single, gt), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 10), st.integers(0, 100))
def test_min_k_monotone_in_k(k, seed):
    gt = np.random.default_rng(seed).normal(size=(3, 10, 2))
    f = sampler(0.3)
    assert min_k_eval(f, Batch(gt), k + 1, seed).ade <= min_k_eval(f, Batch(gt), k, seed).ade + 1e-12


def test_min_k_rejects_zero():
    with pytest.raises(InvalidInputError):
        min_k_eval(sampler(1.0), Batch(np.zeros((1, 4, 2))), 0)


def test_baselines(small_splits):
    b = small_splits[2]
    cp = constant_position(b)
    np.testing.assert_array_equal(cp[:, 5], b.anchor)
    cv = constant_velocity(b)
    np.testing.assert_allclose(cv[:, 0], b.anchor + b.motion[:, -1, 4:6] * 0.05)
    m = straight_walk_mask(b)
    assert m.dtype == bool and 0 < m.sum() < len(b)


def test_reports_csv(tmp_path):
    gt = np.zeros((2, 40, 2))
    rep = horizon_report(lambda b, m: b.gt + 0.01, Batch(gt))
    write_reports_csv({"mean": rep, "other": rep}, tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "horizon,mean,other"
    assert lines[-1].startswith("FDE,1.4142")
    assert len(lines) == 11
