import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sts.errors import DomainError, ShapeError, UndefinedMetricError
from sts.fusion import bce_depth_loss, decode_depth, fuse, softmax, to_distribution
from sts.hypotheses import make_sid, make_ud
from sts.tensors import DepthDistribution, DepthLogits


def logits(values, bins=None):
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v.reshape(-1, 1, 1)
    return DepthLogits(v, 4, bins)


def test_zero_stereo_returns_mono_softmax(rng):
    mono = rng.standard_normal((112, 2, 3))
    out = fuse(logits(np.zeros_like(mono)), logits(mono))
    np.testing.assert_array_equal(out.probs, softmax(mono))


def test_confident_stereo_dominates():
    s = np.zeros(112)
    s[40] = 100.0
    p = fuse(logits(s), logits(np.zeros(112))).probs[:, 0, 0]
    assert p[40] >= 1 - 1e-30
    assert np.all(np.delete(p, 40) < 1e-30)


def test_opposite_votes_split_evenly():
    p = fuse(logits([1.0, 0.0]), logits([0.0, 1.0])).probs[:, 0, 0]
    np.testing.assert_allclose(p, [0.5, 0.5])


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        fuse(logits(np.zeros(56)), logits(np.zeros(112)))
    with pytest.raises(ShapeError):
        fuse(logits(np.zeros(8), make_sid(count=8)), logits(np.zeros(8), make_ud(count=8)))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), shift=st.floats(-50, 50))
def test_fusion_invariants(seed, shift):
    rng = np.random.default_rng(seed)
    s, m = rng.standard_normal((16, 2, 2)) * 3, rng.standard_normal((16, 2, 2)) * 3
    p = fuse(logits(s), logits(m)).probs
    np.testing.assert_allclose(p.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(p >= 0)
    np.testing.assert_allclose(fuse(logits(s + shift), logits(m)).probs, p, atol=1e-12)
    # a bin that wins in both branches wins after fusion
    s[5], m[5] = 100.0, 100.0
    assert np.all(np.argmax(fuse(logits(s), logits(m)).probs, axis=0) == 5)


def test_decode_one_hot():
    bins = make_ud(5.0, 25.0, 2)  # centers 10, 20
    d = DepthDistribution(np.array([0.0, 1.0]).reshape(2, 1, 1), bins)
    assert decode_depth(d, "argmax")[0, 0] == 20.0
    assert decode_depth(d, "expectation")[0, 0] == 20.0


def test_decode_expectation():
    bins = make_ud(5.0, 25.0, 2)
    d = DepthDistribution(np.array([0.25, 0.75]).reshape(2, 1, 1), bins)
    assert decode_depth(d, "expectation")[0, 0] == pytest.approx(17.5)


def test_uniform_ud_expectation_is_mid_range():
    bins = make_ud()
    d = DepthDistribution(np.full((112, 1, 1), 1 / 112), bins)
    assert decode_depth(d, "expectation")[0, 0] == pytest.approx(30.0)


def test_unknown_decode():
    with pytest.raises(DomainError):
        decode_depth(DepthDistribution(np.ones((1, 1, 1)), make_ud(count=1)), "median")


def test_bce_perfect_prediction():
    bins = make_sid()
    gt = np.array([[10.0]])
    p = np.zeros((112, 1, 1))
    p[bins.assign(10.0), 0, 0] = 1.0
    assert bce_depth_loss(DepthDistribution(p, bins), gt) < 1e-6


def test_bce_uniform():
    bins = make_sid()
    d = DepthDistribution(np.full((112, 1, 1), 1 / 112), bins)
    expected = -(np.log(1 / 112) + 111 * np.log(1 - 1 / 112)) / 112
    assert bce_depth_loss(d, np.array([[10.0]])) == pytest.approx(expected, rel=1e-12)
    assert bce_depth_loss(d, np.array([[10.0]])) == pytest.approx(0.0510180, abs=1e-7)


def test_bce_ignores_out_of_range():
    bins = make_sid()
    p = np.full((112, 1, 2), 1 / 112)
    d = DepthDistribution(p, bins)
    assert bce_depth_loss(d, np.array([[10.0, 0.0]])) == bce_depth_loss(d, np.array([[10.0, 80.0]]))
    with pytest.raises(UndefinedMetricError):
        bce_depth_loss(d, np.array([[0.0, 70.0]]))


def test_to_distribution_normalizes(rng):
    d = to_distribution(logits(rng.standard_normal((112, 4, 4)) * 10, make_sid()))
    np.testing.assert_allclose(d.probs.sum(axis=0), 1.0, atol=1e-12)
