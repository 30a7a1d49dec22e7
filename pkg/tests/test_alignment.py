"""Geometric preprocessing: crops, eye levelling, least-squares alignment."""

import math
import warnings

import numpy as np
import pytest

from oracles import grid_search_alignment_residual
from ordibench.alignment import (
    DEFAULT_TEMPLATE_256,
    LANDMARK_ORDER,
    LandmarkSet,
    SimilarityTransform,
    alignment_residual,
    crop_transform,
    rotation_transform,
    similarity_align,
)
from ordibench.util import rng_from_seed


def test_transform_apply_and_inverse():
    t = SimilarityTransform(scale=2.0, rotation=math.pi / 6, tx=3.0, ty=-1.0)
    pts = rng_from_seed(1).normal(size=(6, 2)) * 10
    there = t.apply(pts)
    back = t.inverse().apply(there)
    np.testing.assert_allclose(back, pts, atol=1e-9)
    single = t.apply(pts[0])
    np.testing.assert_allclose(single, there[0])


def test_transform_composition_order():
    a = SimilarityTransform(scale=2.0, rotation=0.0, tx=1.0, ty=0.0)
    b = SimilarityTransform(scale=1.0, rotation=math.pi / 2, tx=0.0, ty=0.0)
    p = np.array([1.0, 0.0])
    composed = b.after(a)
    np.testing.assert_allclose(composed.apply(p), b.apply(a.apply(p)), atol=1e-12)


def test_transform_preserves_angles():
    t = SimilarityTransform(scale=0.7, rotation=1.1, tx=5.0, ty=2.0)
    o = t.apply(np.zeros(2))
    e1 = t.apply(np.array([1.0, 0.0])) - o
    e2 = t.apply(np.array([0.0, 1.0])) - o
    assert abs(float(e1 @ e2)) < 1e-9


def test_transform_validation():
    with pytest.raises(ValueError):
        SimilarityTransform(scale=0.0, rotation=0.0, tx=0.0, ty=0.0)
    with pytest.raises(ValueError):
        SimilarityTransform(scale=-2.0, rotation=0.0, tx=0.0, ty=0.0)


def test_landmark_set_validation():
    with pytest.raises(ValueError):
        LandmarkSet(points=[(0.0, 0.0)])
    with pytest.raises(ValueError):
        LandmarkSet(points=[(0.0, 0.0), (np.nan, 1.0)])
    assert len(LANDMARK_ORDER) == 5
    assert len(DEFAULT_TEMPLATE_256) == 5


def test_swapped_eyes_warn():
    pts = np.asarray(DEFAULT_TEMPLATE_256.points).copy()
    pts[[0, 1]] = pts[[1, 0]]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        LandmarkSet(points=pts)
    assert any("eye" in str(w.message).lower() for w in caught)


def test_crop_square_box():
    t = crop_transform((0.0, 0.0, 64.0, 64.0), 256)
    assert t.scale == pytest.approx(4.0)
    assert t.rotation == 0.0
    assert (t.tx, t.ty) == (0.0, 0.0)


def test_crop_canonical_box_is_identity():
    t = crop_transform((0.0, 0.0, 256.0, 256.0), 256)
    assert t.scale == 1.0 and t.tx == 0.0 and t.ty == 0.0


def test_crop_landscape_box_letterboxes_vertically():
    t = crop_transform((10.0, 10.0, 100.0, 50.0), 256)
    assert t.scale == pytest.approx(2.56)
    assert t.rotation == 0.0
    center = t.apply(np.array([60.0, 35.0]))  # box centre
    np.testing.assert_allclose(center, [128.0, 128.0], atol=1e-9)
    left, right = t.apply(np.array([[10.0, 35.0], [110.0, 35.0]]))
    assert left[0] == pytest.approx(0.0) and right[0] == pytest.approx(256.0)


def test_crop_rejects_degenerate_box():
    with pytest.raises(ValueError):
        crop_transform((0.0, 0.0, 0.0, 10.0), 256)
    with pytest.raises(ValueError):
        crop_transform((0.0, 0.0, 10.0, -1.0), 256)


def test_rotation_level_eyes_reduces_to_crop():
    bbox = (5.0, 5.0, 90.0, 110.0)
    t = rotation_transform(bbox, (30.0, 40.0), (70.0, 40.0), 256)
    c = crop_transform(bbox, 256)
    assert t.scale == pytest.approx(c.scale)
    np.testing.assert_allclose(t.matrix, c.matrix, atol=1e-12)


def test_rotation_forty_five_degrees():
    t = rotation_transform((0.0, 0.0, 100.0, 100.0), (20.0, 20.0), (80.0, 80.0), 256)
    assert t.rotation == pytest.approx(-math.pi / 4)


def test_rotation_levels_random_eye_pairs():
    rng = rng_from_seed(7)
    for _ in range(50):
        le = rng.uniform(0, 100, size=2)
        re = le + rng.uniform(-60, 60, size=2)
        if np.allclose(le, re):
            continue
        t = rotation_transform((0.0, 0.0, 128.0, 128.0), le, re, 256)
        a = t.apply(le)
        b = t.apply(re)
        assert abs(a[1] - b[1]) < 1e-9


def test_rotation_rejects_coincident_eyes():
    with pytest.raises(ValueError):
        rotation_transform((0, 0, 10, 10), (3.0, 3.0), (3.0, 3.0), 256)


def test_align_identity_fixed_point():
    t = similarity_align(DEFAULT_TEMPLATE_256, DEFAULT_TEMPLATE_256)
    assert t.scale == pytest.approx(1.0)
    assert t.rotation == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose((t.tx, t.ty), (0.0, 0.0), atol=1e-9)
    assert alignment_residual(t, DEFAULT_TEMPLATE_256, DEFAULT_TEMPLATE_256) < 1e-18


def test_align_recovers_constructed_inverse():
    """Source built by rotating the template 90 degrees and doubling it."""
    rot = SimilarityTransform(scale=2.0, rotation=math.pi / 2, tx=0.0, ty=0.0)
    src = LandmarkSet(points=rot.apply(np.asarray(DEFAULT_TEMPLATE_256.points)))
    t = similarity_align(src, DEFAULT_TEMPLATE_256)
    assert t.scale == pytest.approx(0.5)
    assert t.rotation == pytest.approx(-math.pi / 2)
    got = t.apply(np.asarray(src.points))
    np.testing.assert_allclose(got, DEFAULT_TEMPLATE_256.points, atol=1e-9)


@pytest.mark.filterwarnings("ignore:left eye")
def test_align_random_constructed_transforms_recover_exactly():
    rng = rng_from_seed(23)
    base = np.asarray(DEFAULT_TEMPLATE_256.points)
    for _ in range(50):
        truth = SimilarityTransform(
            scale=float(rng.uniform(0.3, 3.0)),
            rotation=float(rng.uniform(-math.pi, math.pi)),
            tx=float(rng.uniform(-80, 80)),
            ty=float(rng.uniform(-80, 80)),
        )
        src = truth.inverse().apply(base)
        t = similarity_align(LandmarkSet(points=src), DEFAULT_TEMPLATE_256)
        np.testing.assert_allclose(t.apply(src), base, atol=1e-8)
        assert t.scale == pytest.approx(truth.scale, rel=1e-9)


@pytest.mark.filterwarnings("ignore:left eye")
def test_align_never_reflects():
    rng = rng_from_seed(29)
    base = np.asarray(DEFAULT_TEMPLATE_256.points)
    mirrored = base * np.array([-1.0, 1.0])
    t = similarity_align(LandmarkSet(points=mirrored), DEFAULT_TEMPLATE_256)
    m = t.matrix[:, :2]
    assert np.linalg.det(m) > 0
    for _ in range(20):
        noisy = mirrored + rng.normal(size=mirrored.shape) * 5
        t = similarity_align(LandmarkSet(points=noisy), DEFAULT_TEMPLATE_256)
        assert np.linalg.det(t.matrix[:, :2]) > 0


@pytest.mark.filterwarnings("ignore:left eye")
def test_align_rejects_degenerate_source():
    pts = np.tile([[7.0, 7.0]], (5, 1))
    with pytest.raises(ValueError):
        similarity_align(LandmarkSet(points=pts), DEFAULT_TEMPLATE_256)


def test_align_residual_invariant_under_source_rotation():
    rng = rng_from_seed(31)
    base = np.asarray(DEFAULT_TEMPLATE_256.points)
    src = base + rng.normal(size=base.shape) * 8
    r0 = alignment_residual(similarity_align(LandmarkSet(points=src),
                                             DEFAULT_TEMPLATE_256),
                            LandmarkSet(points=src), DEFAULT_TEMPLATE_256)
    spin = SimilarityTransform(scale=1.0, rotation=0.9, tx=0.0, ty=0.0)
    spun = spin.apply(src)
    r1 = alignment_residual(similarity_align(LandmarkSet(points=spun),
                                             DEFAULT_TEMPLATE_256),
                            LandmarkSet(points=spun), DEFAULT_TEMPLATE_256)
    assert r1 == pytest.approx(r0, abs=1e-9)


def test_align_beats_grid_search_on_noisy_points():
    rng = rng_from_seed(37)
    base = np.asarray(DEFAULT_TEMPLATE_256.points)
    for trial in range(5):
        src = base + rng.normal(size=base.shape) * 12
        t = similarity_align(LandmarkSet(points=src), DEFAULT_TEMPLATE_256)
        ours = alignment_residual(t, LandmarkSet(points=src), DEFAULT_TEMPLATE_256)
        oracle = grid_search_alignment_residual(src, base)
        assert ours <= oracle + 1e-9, (trial, ours, oracle)
