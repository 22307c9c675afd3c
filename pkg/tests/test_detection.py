import numpy as np
import pytest

from kneeanomaly.detection import (
    BONES,
    PROB_THRESHOLDS,
    SIZE_THRESHOLDS,
    DegenerateRocError,
    DetectionCase,
    classify_bone,
    classify_case,
    confusion_counts,
    detection_report,
    roc_auc,
    sweep_detection,
    sweep_settings,
)
from kneeanomaly.volume import LabelMap


def _line(n, start=0, length=40):
    m = np.zeros((1, 1, length), bool)
    m[0, 0, start:start + n] = True
    return m


def test_dsc_threshold_boundary_is_inclusive():
    gt = _line(20, 0)
    pred = _line(20, 19)  # one voxel overlap: 2 * 1 / 40 = 0.05
    status, d = classify_bone(pred, gt)
    assert d == 0.05 and status == "TP"
    status, d = classify_bone(_line(21, 19, 41), _line(20, 0, 41))
    assert d < 0.05 and status == "FN"


def test_classify_bone_statuses():
    e = np.zeros((2, 2, 2), bool)
    f = e.copy()
    f[0, 0, 0] = True
    assert classify_bone(e, e) == ("TN", None)
    assert classify_bone(f, e) == ("FP", None)
    assert classify_bone(e, f) == ("FN", 0.0)
    assert classify_bone(f, f) == ("TP", 1.0)


def test_default_schedules():
    assert SIZE_THRESHOLDS == (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0)
    assert PROB_THRESHOLDS == (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    s = sweep_settings()
    assert len(s) == 19 and s[13] == (6.0, 0.5) and s[-1] == (6.0, 1.0)


def test_roc_auc_examples():
    assert roc_auc([(0.0, 1.0)]) == 1.0
    assert roc_auc([(0.2, 0.2), (0.7, 0.7)]) == pytest.approx(0.5, abs=1e-12)
    assert roc_auc([]) == pytest.approx(0.5, abs=1e-12)
    assert roc_auc([(0.5, 0.5), (0.0, 0.5)]) == pytest.approx(0.625, abs=1e-12)
    with pytest.raises(ValueError):
        roc_auc([(1.5, 0.2)])


def _case(case_id, lesions, spacing=(1.0, 1.0, 1.0), pred_lesions=None, probs=None):
    """``lesions`` maps bone -> list of (start, length) runs on a line volume."""
    def masks(runs):
        out = {}
        for b in BONES:
            m = np.zeros((1, 1, 60), bool)
            for s, n in runs.get(b, []):
                m[0, 0, s:s + n] = True
            out[b] = m
        return out

    gt = masks(lesions)
    pred = masks(lesions if pred_lesions is None else pred_lesions)
    return DetectionCase(case_id, gt, pred, spacing, probs)


def test_perfect_classifier_auc():
    cases = [_case("a", {"femur": [(0, 5)]}), _case("b", {"tibia": [(10, 3)]})]
    curve = sweep_detection(cases, [0.0], [])
    assert curve.auc == 1.0
    assert curve.points[0].fpr == 0.0 and curve.points[0].tpr == 1.0


def test_size_sweep_monotone_and_applies_to_ground_truth():
    # stray predictions and lesions of 1..6 voxels
    cases = []
    for i in range(6):
        cases.append(_case(f"c{i}", {"femur": [(0, i + 1)]}, pred_lesions={"femur": [(0, i + 1)], "tibia": [(20, i + 1)]}))
    outcomes = [[classify_case(c, t) for c in cases] for t in SIZE_THRESHOLDS]
    predicted = []
    for per_t in outcomes:
        flat = [o for case in per_t for o in case]
        c = confusion_counts(flat)
        predicted.append(c["TP"] + c["FP"])
    assert all(a >= b for a, b in zip(predicted, predicted[1:]))
    # at 6 mm^3 every ground-truth lesion below 6 voxels is also removed
    c6 = confusion_counts(o for case in outcomes[-1] for o in case)
    assert c6["TP"] + c6["FN"] == 1


def test_size_threshold_uses_physical_volume():
    case = _case("c", {"femur": [(0, 3)]}, spacing=(1.0, 1.0, 2.0))  # 6 mm^3
    assert classify_case(case, 5.5)[0].status == "TP"
    assert classify_case(case, 6.0)[0].status == "TP"  # strictly smaller is removed
    assert classify_case(case, 6.5)[0].status == "TN"


def test_probability_threshold_drops_voxels():
    p = {b: np.zeros((1, 1, 60)) for b in BONES}
    p["femur"][0, 0, :5] = [0.95, 0.95, 0.55, 0.55, 0.55]
    case = _case("c", {"femur": [(0, 5)]}, probs=p)
    assert classify_case(case, 0.0, 0.5)[0].dsc == 1.0
    assert classify_case(case, 0.0, 0.9)[0].dsc == pytest.approx(2 * 2 / 7)
    assert classify_case(case, 0.0, 1.0)[0].status == "FN"
    with pytest.raises(ValueError):
        classify_case(_case("d", {}), 0.0, 0.5)


def test_degenerate_roc():
    with pytest.raises(DegenerateRocError):
        sweep_detection([_case("a", {})], [0.0], [])


def test_detection_report_examples():
    cases = [
        _case("a", {"femur": [(0, 4)]}),
        _case("b", {"tibia": [(0, 4)]}, pred_lesions={}),
        _case("c", {}, pred_lesions={"patella": [(0, 2)]}),
    ]
    outs = [o for c in cases for o in classify_case(c)]
    r = detection_report(outs)
    assert (r["n"], r["TP"], r["FN"], r["FP"], r["TN"]) == (9, 1, 1, 1, 6)
    assert r["accuracy"] == pytest.approx(7 / 9)
    assert r["tpr"] == 0.5 and r["tnr"] == pytest.approx(6 / 7)
    assert r["mean_dsc"] == 0.5
    assert list(r["per_bone"]) == ["femur", "tibia", "patella"]
    assert r["per_bone"]["patella"]["tpr"] is None
    with pytest.raises(ValueError):
        detection_report([])


def test_from_labels_and_parallel_map():
    lab = np.zeros((4, 4, 4), np.uint8)
    lab[0, 0, :2] = 7
    lab[3, 3, 3] = 9
    m = LabelMap(labels=lab)
    case = DetectionCase.from_labels("x", m, m)
    assert [o.status for o in classify_case(case)] == ["TP", "TN", "TP"]
    cases = [case, DetectionCase.from_labels("y", LabelMap(labels=np.zeros_like(lab)), m)]
    a = sweep_detection(cases, [0.0, 1.0], [])
    b = sweep_detection(cases, [0.0, 1.0], [], map_fn=lambda f, xs: [f(x) for x in reversed(list(xs))][::-1])
    assert a.points == b.points and a.auc == b.auc
