"""Bone-wise lesion detection, threshold sweeps and ROC/AUC.

Each bone of each image is one detection case. A bone whose ground truth
contains lesion voxels is positive; a positive is detected when the lesion
Dice reaches 0.05.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .metrics import dsc
from .morphology import remove_small_components
from .volume import GeometryError, LESION_CLASSES

DSC_THRESHOLD = 0.05
BONES = ("femur", "tibia", "patella")
# 0.0, 0.5, ..., 6.0 mm^3 and 0.5, 0.6, ..., 1.0
SIZE_THRESHOLDS = tuple(round(0.5 * i, 1) for i in range(13))
PROB_THRESHOLDS = tuple(round(0.5 + 0.1 * i, 1) for i in range(6))


class DegenerateRocError(ValueError):
    pass


def classify_bone(pred_lesion, gt_lesion, threshold: float = DSC_THRESHOLD):
    """Return ``(status, dice)``; ``dice`` is None for negative cases."""
    p = np.asarray(pred_lesion, dtype=bool)
    g = np.asarray(gt_lesion, dtype=bool)
    if p.shape != g.shape:
        raise GeometryError(f"mask shapes differ: {p.shape} vs {g.shape}")
    if g.any():
        d = dsc(p, g)
        return ("TP" if d >= threshold else "FN"), d
    return ("FP" if p.any() else "TN"), None


@dataclass(frozen=True)
class DetectionOutcome:
    case_id: str
    bone: str
    status: str
    dsc: float | None = None


@dataclass
class DetectionCase:
    """Lesion masks for one image.

    ``gt`` and ``pred`` map bone name to boolean lesion masks; ``probs`` maps
    bone name to the lesion-channel probability of the prediction.
    """

    case_id: str
    gt: dict
    pred: dict
    spacing: tuple = (1.0, 1.0, 1.0)
    probs: dict | None = None

    @classmethod
    def from_labels(cls, case_id, gt, pred, probs=None, lesion_classes=None):
        lesion_classes = lesion_classes or LESION_CLASSES
        gt.check_geometry(pred)
        g = {b: gt.labels == c for b, c in lesion_classes.items()}
        p = {b: pred.labels == c for b, c in lesion_classes.items()}
        pr = None
        if probs is not None:
            pr = {b: np.asarray(probs[b], dtype=np.float64) for b in lesion_classes}
        return cls(case_id, g, p, gt.spacing, pr)


def classify_case(case: DetectionCase, size_threshold: float = 0.0, prob_threshold=None,
                  connectivity: int = 26):
    out = []
    for bone in case.gt:
        g = remove_small_components(case.gt[bone], size_threshold, case.spacing, connectivity)
        p = np.asarray(case.pred[bone], dtype=bool)
        if prob_threshold is not None:
            if case.probs is None or bone not in case.probs:
                raise ValueError(f"case {case.case_id!r} has no probability map for {bone}")
            # voxels below the softmax threshold are dropped
            p = p & (case.probs[bone] >= prob_threshold)
        p = remove_small_components(p, size_threshold, case.spacing, connectivity)
        status, d = classify_bone(p, g)
        out.append(DetectionOutcome(case.case_id, bone, status, d))
    return out


def confusion_counts(outcomes) -> dict:
    counts = {"TP": 0, "FP": 0, "TN": 0, "FN": 0}
    for o in outcomes:
        counts[o.status] += 1
    return counts


def _rates(c):
    pos, neg = c["TP"] + c["FN"], c["TN"] + c["FP"]
    tpr = c["TP"] / pos if pos else None
    tnr = c["TN"] / neg if neg else None
    return tpr, tnr


def detection_report(outcomes) -> dict:
    """Accuracy, sensitivity, specificity and mean positive-case Dice, overall and per bone."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("detection report needs at least one outcome")

    def summarize(items):
        c = confusion_counts(items)
        tpr, tnr = _rates(c)
        dices = [o.dsc for o in items if o.dsc is not None]
        return {
            **c,
            "n": len(items),
            "positives": c["TP"] + c["FN"],
            "negatives": c["TN"] + c["FP"],
            "accuracy": (c["TP"] + c["TN"]) / len(items),
            "tpr": tpr,
            "tnr": tnr,
            "mean_dsc": float(np.mean(dices)) if dices else None,
        }

    report = summarize(outcomes)
    bones = sorted({o.bone for o in outcomes}, key=lambda b: (BONES.index(b) if b in BONES else 99, b))
    report["per_bone"] = {b: summarize([o for o in outcomes if o.bone == b]) for b in bones}
    return report


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    size_threshold_mm3: float | None = None
    prob_threshold: float | None = None


@dataclass
class RocCurve:
    points: list
    auc: float
    counts: list = field(default_factory=list)


def roc_auc(points) -> float:
    """Trapezoidal area under (fpr, tpr) points anchored at (0, 0) and (1, 1)."""
    pts = [(0.0, 0.0), *[(float(p[0]), float(p[1])) for p in points], (1.0, 1.0)]
    pts.sort()
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)):
        raise ValueError("ROC coordinates must lie in [0, 1]")
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def _point(outcomes, size_t, prob_t):
    c = confusion_counts(outcomes)
    tpr, tnr = _rates(c)
    if tpr is None or tnr is None:
        raise DegenerateRocError(
            f"degenerate ROC at size threshold {size_t}, probability threshold {prob_t}: "
            f"{c['TP'] + c['FN']} positive and {c['TN'] + c['FP']} negative cases"
        )
    return RocPoint(1.0 - tnr, tpr, size_t, prob_t), c


def sweep_settings(size_thresholds=SIZE_THRESHOLDS, prob_thresholds=PROB_THRESHOLDS):
    """``(size, prob)`` pairs: every size threshold, then the probability
    thresholds at the last size threshold."""
    size_thresholds = [float(t) for t in size_thresholds]
    if not size_thresholds:
        raise ValueError("at least one size threshold is required")
    settings = [(s, None) for s in size_thresholds]
    settings += [(size_thresholds[-1], float(p)) for p in prob_thresholds or ()]
    return settings


def case_outcomes(case: DetectionCase, settings, connectivity: int = 26):
    """Outcomes of one case under each setting, in ``settings`` order."""
    return [classify_case(case, s, p, connectivity) for s, p in settings]


def roc_from_outcomes(settings, per_case) -> RocCurve:
    """Build the ROC curve from ``per_case[i][j]``: outcomes of case i under setting j."""
    points, counts = [], []
    for j, (size_t, prob_t) in enumerate(settings):
        outcomes = [o for case in per_case for o in case[j]]
        pt, c = _point(outcomes, size_t, prob_t)
        points.append(pt)
        counts.append({"size_threshold_mm3": size_t, "prob_threshold": prob_t, **c})
    ordered = sorted(points, key=lambda p: (p.fpr, p.tpr))
    return RocCurve(ordered, roc_auc([(p.fpr, p.tpr) for p in points]), counts)


def sweep_detection(cases, size_thresholds=SIZE_THRESHOLDS, prob_thresholds=PROB_THRESHOLDS,
                    connectivity: int = 26, map_fn=map) -> RocCurve:
    """Sweep lesion size thresholds, then softmax thresholds at the last size threshold.

    Size filtering is applied to prediction and ground truth alike. The
    probability sweep is skipped when ``prob_thresholds`` is empty.
    ``map_fn`` may be any order-preserving (parallel) map over cases.
    """
    cases = list(cases)
    settings = sweep_settings(size_thresholds, prob_thresholds)
    if prob_thresholds:
        missing = [c.case_id for c in cases if c.probs is None]
        if missing:
            raise ValueError(f"probability maps missing for cases {missing}")
    per_case = list(map_fn(partial(case_outcomes, settings=settings, connectivity=connectivity), cases))
    return roc_from_outcomes(settings, per_case)
