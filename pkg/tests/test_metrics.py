import numpy as np
import pytest

from conftest import (
    brute_boundary,
    brute_distance_to_boundary,
    brute_surface_distances,
    random_mask_pair,
)
from kneeanomaly.metrics import (
    UndefinedDistanceError,
    distance_transform,
    dsc,
    evaluate_case,
    extract_boundary,
    surface_distances,
)
from kneeanomaly.volume import GeometryError, LabelMap


def test_dsc_examples():
    a = np.zeros((4, 4, 4), bool)
    a[:2, :2, :2] = True
    assert dsc(a, a) == 1.0
    b = np.zeros_like(a)
    b[2:, 2:, 2:] = True
    assert dsc(a, b) == 0.0
    assert dsc(a, np.roll(a, 1, axis=2)) == 0.5
    assert dsc(np.zeros_like(a), np.zeros_like(a)) == 1.0
    with pytest.raises(GeometryError):
        dsc(a, a[:3])


def test_boundary_examples():
    one = np.zeros((3, 3, 3), bool)
    one[1, 1, 1] = True
    assert len(extract_boundary(one)) == 1
    assert len(extract_boundary(np.ones((3, 3, 3), bool))) == 26
    cube5 = np.zeros((7, 7, 7), bool)
    cube5[1:6, 1:6, 1:6] = True
    assert len(brute_boundary(cube5)) == 98
    assert len(extract_boundary(cube5)) == 98
    assert len(extract_boundary(np.zeros((3, 3, 3), bool))) == 0


def test_boundary_points_physical():
    m = np.zeros((2, 2, 2), bool)
    m[1, 0, 1] = True
    b = extract_boundary(m, spacing=(2.0, 3.0, 0.5), origin=(10.0, 0.0, -1.0))
    assert b.points_mm.tolist() == [[12.0, 0.0, -0.5]]


def test_boundary_matches_brute_force(rng):
    for _ in range(50):
        a, _ = random_mask_pair(rng, max_side=10)
        got = sorted(map(tuple, extract_boundary(a).indices.astype(float)))
        assert got == sorted(map(tuple, brute_boundary(a)))


def test_surface_distance_examples():
    a = np.zeros((1, 1, 4), bool)
    b = np.zeros_like(a)
    a[0, 0, 0] = b[0, 0, 3] = True
    assert surface_distances(a, b) == (3.0, 3.0)
    cube = np.zeros((5, 5, 5), bool)
    cube[1:4, 1:4, 1:4] = True
    assert surface_distances(cube, cube) == (0.0, 0.0)
    with pytest.raises(UndefinedDistanceError):
        surface_distances(cube, np.zeros_like(cube))


def test_surface_distances_match_oracle(rng):
    for _ in range(60):
        a, b = random_mask_pair(rng, max_side=12)
        spacing = tuple(rng.uniform(0.3, 2.0, size=3))
        asd, hd = surface_distances(a, b, spacing)
        o_asd, o_hd = brute_surface_distances(a, b, spacing)
        assert asd == pytest.approx(o_asd, abs=1e-9)
        assert hd == pytest.approx(o_hd, abs=1e-9)


def test_distance_transform_examples():
    m = np.zeros((1, 1, 3), bool)
    m[0, 0, 0] = True
    d = distance_transform(m, spacing=(1.0, 1.0, 0.5))
    assert d[0, 0, 0] == 0.0 and d[0, 0, 1] == 0.5
    with pytest.raises(UndefinedDistanceError):
        distance_transform(np.zeros((2, 2, 2), bool))


def test_distance_transform_matches_oracle(rng):
    for _ in range(25):
        a, _ = random_mask_pair(rng, max_side=12)
        spacing = tuple(rng.uniform(0.3, 2.0, size=3))
        got = distance_transform(a, spacing)
        assert np.max(np.abs(got - brute_distance_to_boundary(a, spacing))) < 1e-9
        assert np.all(got[tuple(brute_boundary(a).astype(int).T)] == 0.0)


def test_metric_invariances(rng):
    for _ in range(20):
        a, b = random_mask_pair(rng, max_side=10)
        spacing = tuple(rng.uniform(0.5, 1.5, size=3))
        asd, hd = surface_distances(a, b, spacing)
        assert (asd, hd) == surface_distances(b, a, spacing)
        assert dsc(a, b) == dsc(b, a)
        assert asd <= hd + 1e-12

        pad = [(2, 3), (1, 0), (0, 2)]
        a2, b2 = np.pad(a, pad), np.pad(b, pad)
        assert surface_distances(a2, b2, spacing) == pytest.approx((asd, hd), abs=1e-12)
        assert dsc(a2, b2) == dsc(a, b)

        double = tuple(2 * s for s in spacing)
        asd2, hd2 = surface_distances(a, b, double)
        assert asd2 == pytest.approx(2 * asd, rel=1e-12)
        assert hd2 == pytest.approx(2 * hd, rel=1e-12)


def _labelmap(labels, spacing=(1.0, 1.0, 1.0)):
    return LabelMap(spacing, labels=labels)


def test_evaluate_case_identity():
    lab = np.zeros((8, 8, 8), np.uint8)
    lab[1:4, 1:4, 1:4] = 1
    lab[5:7, 5:7, 5:7] = 2
    gt = _labelmap(lab)
    res = evaluate_case(gt, gt, [1, 2, 3], pred_raw=gt)
    assert [r.status for r in res] == ["ok", "ok", "not_applicable"]
    for r in res[:2]:
        assert (r.dsc, r.asd_mm, r.hd_mm, r.hd_pre_mm) == (1.0, 0.0, 0.0, 0.0)


def test_evaluate_case_missing_class():
    lab = np.zeros((6, 6, 6), np.uint8)
    lab[1:3, 1:3, 1:3] = 1
    res = evaluate_case(_labelmap(np.zeros_like(lab)), _labelmap(lab), [1])[0]
    assert res.dsc == 0.0 and res.status == "undefined"
    assert res.asd_mm is None and res.hd_mm is None


def test_evaluate_case_uniform_offset():
    """A sphere grown by one voxel shell: ASD close to 1 mm, checked by brute force."""
    zz, yy, xx = np.mgrid[:21, :21, :21]
    r2 = (zz - 10) ** 2 + (yy - 10) ** 2 + (xx - 10) ** 2
    gt = (r2 <= 36).astype(np.uint8)
    pred = (r2 <= 49).astype(np.uint8)
    res = evaluate_case(_labelmap(pred), _labelmap(gt), [1])[0]
    o_asd, o_hd = brute_surface_distances(pred.astype(bool), gt.astype(bool), (1, 1, 1))
    assert res.asd_mm == pytest.approx(o_asd, abs=1e-9)
    assert res.hd_mm == pytest.approx(o_hd, abs=1e-9)
    assert res.asd_mm == pytest.approx(1.0, abs=0.25)


def test_evaluate_case_geometry_mismatch():
    a = LabelMap((1.0, 1.0, 1.0), labels=np.zeros((2, 2, 2), np.uint8))
    b = LabelMap((1.0, 1.0, 2.0), labels=np.zeros((2, 2, 2), np.uint8))
    with pytest.raises(GeometryError):
        evaluate_case(a, b, [1])
