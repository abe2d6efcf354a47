import numpy as np
import pytest

from vidinpaint.diffusion import MaskSequence
from vidinpaint.errors import InvalidArgumentError, InvalidShapeError
from vidinpaint.metrics import (
    MetricRow,
    RandomProjectionProvider,
    background_preservation,
    clip_style_score,
    evaluate_clip,
    metric_rows_csv,
    temporal_consistency,
)

RNG = np.random.default_rng(5)


def _mask(f=3, w=6, h=5):
    m = np.zeros((f, w, h))
    m[:, 1:3, 2:4] = 1
    return MaskSequence.from_array(m, dtype=np.float64)


def test_bp_identical_is_zero():
    x = RNG.random((3, 3, 6, 5))
    assert background_preservation(x, x, _mask()) == 0.0


def test_bp_unit_offset():
    x = RNG.random((3, 3, 6, 5)) * 0.5
    y = x + 1 / 255
    assert background_preservation(x, y, _mask()) == pytest.approx(1.0, abs=1e-12)


def test_bp_only_background_counts_and_symmetric():
    x, y = RNG.random((3, 3, 6, 5)), RNG.random((3, 3, 6, 5))
    m = _mask()
    bg = np.broadcast_to(m.m.data == 0, x.shape)
    ref = sum(abs(a - b) for a, b in zip(x[bg], y[bg])) / bg.sum() * 255
    assert abs(background_preservation(x, y, m) - ref) < 1e-6
    assert background_preservation(y, x, m) == background_preservation(x, y, m)
    z = x.copy()
    z[np.broadcast_to(m.m.data == 1, x.shape)] = 9.0
    assert background_preservation(x, z, m) == 0.0


def test_bp_all_foreground_is_undefined():
    x = RNG.random((2, 3, 4, 4))
    assert background_preservation(x, x + 1, np.ones((2, 1, 4, 4))) is None


def test_bp_shape_errors():
    with pytest.raises(InvalidShapeError):
        background_preservation(np.zeros((3, 3, 6, 5)), np.zeros((3, 3, 6, 4)), _mask())
    with pytest.raises(InvalidArgumentError):
        background_preservation(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 2)), np.full((1, 1, 2, 2), 0.5))


def test_tc_cases():
    v = RNG.standard_normal(8)
    assert temporal_consistency(np.stack([v] * 5)) == pytest.approx(100.0)
    e0, e1 = np.eye(4)[0], np.eye(4)[1]
    assert temporal_consistency(np.stack([e0, e1, e0, e1])) == 0.0
    c60 = np.array([0.5, np.sqrt(0.75)])
    assert abs(temporal_consistency(np.stack([[1.0, 0.0], c60, 3 * c60])) - 75.0) < 1e-9


def test_tc_scale_invariant_and_zero_vector():
    f = RNG.standard_normal((6, 5))
    scaled = f * RNG.uniform(0.1, 10, size=(6, 1))
    assert abs(temporal_consistency(f) - temporal_consistency(scaled)) < 1e-7
    f[2] = 0
    assert temporal_consistency(f) is None
    with pytest.raises(InvalidArgumentError):
        temporal_consistency(np.ones((1, 3)))


def test_cs_cases():
    v = RNG.standard_normal(6)
    assert clip_style_score(np.stack([v, 2 * v]), v) == pytest.approx(100.0)
    assert clip_style_score(np.eye(3)[:2], np.eye(3)[2]) == 0.0
    assert clip_style_score(-np.eye(3)[:1], np.eye(3)[0]) == 0.0
    t = np.array([1.0, 0.0])
    frames = np.array([[0.2, np.sqrt(1 - 0.04)], [0.3, np.sqrt(1 - 0.09)]])
    assert clip_style_score(frames, t) == pytest.approx(25.0, abs=1e-9)
    with pytest.raises(InvalidShapeError):
        clip_style_score(np.ones((2, 3)), np.ones(4))


def test_provider_deterministic_and_row_csv():
    p = RandomProjectionProvider()
    frames = RNG.random((3, 3, 8, 8))
    assert np.array_equal(p.embed_frames(frames), RandomProjectionProvider().embed_frames(frames))
    assert p.embed_frames(frames).shape == (3, 32) and p.embed_text("a dog").shape == (32,)
    row = evaluate_clip("c0", frames, frames, _mask(3, 8, 8), "a dog", p)
    assert row.bp == 0.0 and row.tc is not None and row.cs is not None
    csv = metric_rows_csv([row, MetricRow("c1", None, 1.5, 99.0)]).splitlines()
    assert csv[0] == "clip_id,cs,bp,tc" and csv[2] == "c1,undefined,1.5,99.0"
