import json

import numpy as np
import pytest

from vidinpaint.errors import EmptyAssociationError, FormatError, InvalidArgumentError
from vidinpaint.regions import (
    Detection,
    DetectionAnnotation,
    Phrase,
    associate_tokenspan,
    detect_scene_cuts,
    rasterize_box,
    read_mask_frames,
    sample_training_clip,
    synthesize_instance_mask,
    synthesize_random_mask,
    write_mask_frames,
)

BOX_A = (0.1, 0.1, 0.4, 0.5)
BOX_B = (0.5, 0.5, 0.9, 0.8)


def _ann(frames, prompt="a dog chases a red ball", phrases=(("a dog", (0, 2)), ("a red ball", (3, 6)))):
    return DetectionAnnotation(prompt, tuple(Phrase(t, s) for t, s in phrases),
                               tuple(tuple(Detection(*d) for d in fr) for fr in frames))


# scene cuts ---------------------------------------------------------------

def test_constant_video_has_no_cuts():
    r = detect_scene_cuts(np.full((6, 3, 4, 4), 77.0))
    assert r.cuts == () and r.single_scene


def test_flip_at_frame_five():
    v = np.zeros((8, 3, 4, 4))
    v[5:] = 255
    assert detect_scene_cuts(v, 20).cuts == (5,)


def test_diff_at_threshold_is_not_a_cut():
    v = np.stack([np.full((1, 4, 4), 20.0 * i) for i in range(6)])
    r = detect_scene_cuts(v, 20)
    assert r.cuts == () and max(r.diffs) == 20.0
    assert detect_scene_cuts(v, 19.999).cuts == (1, 2, 3, 4, 5)


def test_normalized_input_scale():
    v = np.zeros((3, 1, 2, 2))
    v[2] = 1.0
    assert detect_scene_cuts(v, 20, value_max=1.0).cuts == (2,)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_k_segments_give_k_minus_one_cuts(k):
    rng = np.random.default_rng(k)
    levels = rng.permutation(np.linspace(0, 255, 6))[:k] if k > 1 else [10.0]
    segs = [np.full((int(rng.integers(1, 5)), 3, 4, 4), lv) for lv in levels]
    # neighbours differ by >= 51 on the 0-255 scale
    r = detect_scene_cuts(np.concatenate(segs), 20)
    assert len(r.cuts) == k - 1
    assert r.segments()[-1][1] == sum(len(s) for s in segs)


def test_single_frame_clip():
    assert detect_scene_cuts(np.zeros((1, 3, 2, 2))).cuts == ()


# annotation --------------------------------------------------------------

def test_annotation_json_round_trip(tmp_path):
    ann = _ann([[(0, BOX_A, 0.9), (1, BOX_B, 0.5)]])
    p = tmp_path / "a.json"
    p.write_text(json.dumps(ann.to_dict()))
    assert DetectionAnnotation.load(p) == ann


def test_annotation_phrase_by_text():
    obj = _ann([[]]).to_dict()
    obj["frames"] = [[{"phrase": "a dog", "box": list(BOX_A), "score": 0.3}]]
    assert DetectionAnnotation.from_dict(obj).frames[0][0].phrase == 0


@pytest.mark.parametrize("mutate, field", [
    (lambda o: o["phrases"].__setitem__(1, {"text": "x", "span": [1, 3]}), "phrases[1].span"),
    (lambda o: o["phrases"].__setitem__(1, {"text": "x", "span": [4, 9]}), "phrases[1].span"),
    (lambda o: o["frames"][0][0].__setitem__("box", [0.5, 0.1, 0.4, 0.2]), "frames[0][0].box"),
    (lambda o: o["frames"][0][0].__setitem__("box", [0.0, 0.0, 1.2, 0.5]), "frames[0][0].box"),
    (lambda o: o["frames"][0][0].__setitem__("score", 1.5), "frames[0][0].score"),
    (lambda o: o["frames"][0][0].__setitem__("phrase", 7), "frames[0][0].phrase"),
    (lambda o: o.pop("prompt"), "prompt"),
])
def test_annotation_rejects(mutate, field):
    obj = _ann([[(0, BOX_A, 0.9)]]).to_dict()
    mutate(obj)
    with pytest.raises(FormatError) as err:
        DetectionAnnotation.from_dict(obj)
    assert err.value.field == field


# association -------------------------------------------------------------

def test_track_equals_constant_input():
    tracks = associate_tokenspan(_ann([[(0, BOX_A, 0.8)]] * 4))
    assert tracks[0].boxes == (BOX_A,) * 4 and not any(tracks[0].inherited)


def test_missing_frame_carries_forward():
    box2 = (0.2, 0.1, 0.5, 0.5)
    tracks = associate_tokenspan(_ann([[(0, BOX_A, 0.8)], [], [(0, box2, 0.8)]]))
    assert tracks[0].boxes == (BOX_A, BOX_A, box2)
    assert tracks[0].inherited == (False, True, False)


def test_low_score_counts_as_missing():
    tracks = associate_tokenspan(_ann([[(0, BOX_A, 0.8)], [(0, BOX_B, 0.19)]]))
    assert tracks[0].boxes == (BOX_A, BOX_A)


def test_new_phrase_after_first_frame_is_ignored():
    tracks = associate_tokenspan(_ann([[(0, BOX_A, 0.8)], [(0, BOX_A, 0.8), (1, BOX_B, 0.9)]]))
    assert list(tracks) == [0]


def test_same_object_keeps_one_phrase():
    tracks = associate_tokenspan(_ann([[(0, BOX_A, 0.6), (1, BOX_A, 0.9)]]))
    assert list(tracks) == [1]


def test_empty_first_frame_raises():
    with pytest.raises(EmptyAssociationError):
        associate_tokenspan(_ann([[(0, BOX_A, 0.1)], [(0, BOX_A, 0.9)]]))


def test_association_deterministic():
    ann = _ann([[(0, BOX_A, 0.8), (1, BOX_B, 0.3)], [(1, BOX_A, 0.5)], []])
    assert associate_tokenspan(ann) == associate_tokenspan(ann)


# masks -------------------------------------------------------------------

def test_whole_frame_box():
    m = synthesize_instance_mask([(0, 0, 1, 1)], (8, 6), np.random.default_rng(0), "random_shape")
    assert m.all()


def test_box_style_exact_center_block():
    m = synthesize_instance_mask([(0.25, 0.25, 0.75, 0.75)], (16, 16), np.random.default_rng(0), "box")[0]
    ref = np.zeros((16, 16), bool)
    ref[4:12, 4:12] = True
    assert np.array_equal(m, ref)


def test_degenerate_box_gives_center_pixel():
    m = rasterize_box((0.5, 0.5, 0.5 + 1e-12, 0.5 + 1e-12), (10, 10))
    assert m.sum() >= 1


@pytest.mark.parametrize("style", ["box", "dilated", "random_shape"])
def test_instance_masks_cover_box(style):
    rng = np.random.default_rng(1)
    for _ in range(1000 if style == "random_shape" else 100):
        x0, y0 = rng.uniform(0, 0.8, 2)
        box = (x0, y0, rng.uniform(x0 + 0.01, 1), rng.uniform(y0 + 0.01, 1))
        m = synthesize_instance_mask([box], (24, 20), rng, style)[0]
        base = rasterize_box(box, (24, 20))
        assert not (base & ~m).any()


def test_instance_mask_seeded():
    a = synthesize_instance_mask([BOX_A, BOX_B], (16, 16), np.random.default_rng(3))
    b = synthesize_instance_mask([BOX_A, BOX_B], (16, 16), np.random.default_rng(3))
    assert np.array_equal(a, b)


def test_instance_mask_bad_style():
    with pytest.raises(InvalidArgumentError):
        synthesize_instance_mask([BOX_A], (8, 8), np.random.default_rng(0), "blob")


def test_random_mask_area_bounds():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        m = synthesize_random_mask((32, 24), 3, rng)
        frac = m.reshape(3, -1).mean(axis=1)
        assert ((frac >= 0.05) & (frac <= 0.60)).all(), frac


@pytest.mark.parametrize("kind", ["static_rect", "moving_rect", "stroke"])
def test_random_mask_kinds_seeded(kind):
    a = synthesize_random_mask((16, 16), 4, np.random.default_rng(9), kind)
    b = synthesize_random_mask((16, 16), 4, np.random.default_rng(9), kind)
    assert np.array_equal(a, b) and a.shape == (4, 16, 16)
    if kind != "moving_rect":
        assert all(np.array_equal(a[0], fr) for fr in a)


def test_random_mask_single_frame():
    assert synthesize_random_mask((8, 8), 1, np.random.default_rng(0)).shape == (1, 8, 8)


def test_pgm_round_trip(tmp_path):
    m = synthesize_random_mask((12, 7), 3, np.random.default_rng(2))
    paths = write_mask_frames(tmp_path, m)
    assert len(paths) == 3 and paths[0].read_bytes().startswith(b"P5\n12 7\n255\n")
    assert np.array_equal(read_mask_frames(tmp_path), m)


# sampler -----------------------------------------------------------------

ANN = _ann([[(0, BOX_A, 0.8), (1, BOX_B, 0.7)], [(0, (0.2, 0.1, 0.5, 0.5), 0.9)], [], []])


def test_all_precise():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s = sample_training_clip(ANN, (4, 16, 16), rng, probs=(1, 0, 0))
        assert s.kind == "precise" and s.phrase in ("a dog", "a red ball")
        for fr, box in zip(s.masks.m.data[:, 0] > 0, s.boxes):
            assert not (rasterize_box(box, (16, 16)) & ~fr).any()


def test_null_prompt_sample():
    s = sample_training_clip(ANN, (2, 16, 16), np.random.default_rng(0), probs=(0, 0, 1))
    assert s.kind == "null_prompt" and s.prompt == "" and s.masks.m.data.any()


def test_failed_association_falls_back():
    bad = _ann([[(0, BOX_A, 0.05)]])
    s = sample_training_clip(bad, (1, 8, 8), np.random.default_rng(0), probs=(1, 0, 0))
    assert s.kind == "random" and s.fell_back and s.prompt == bad.prompt


@pytest.mark.parametrize("probs", [(0.5, 0.5, 0.5), (1.2, -0.2, 0.0), (1.0, 0.0)])
def test_bad_probs(probs):
    with pytest.raises(InvalidArgumentError):
        sample_training_clip(ANN, (1, 8, 8), np.random.default_rng(0), probs=probs)


def test_clip_shape_from_array():
    s = sample_training_clip(ANN, np.zeros((3, 3, 10, 12)), np.random.default_rng(0))
    assert s.masks.m.shape == (3, 1, 10, 12)
