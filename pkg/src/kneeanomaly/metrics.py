"""Volumetric segmentation metrics: Dice, average surface distance, Hausdorff.

Boundary voxels are foreground voxels with at least one background face
neighbour, treating everything outside the array as background. Surface
distances are measured between voxel centres in millimetres and run from the
boundary of one mask to the boundary of the other.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .volume import GeometryError, LabelMap

_FACE = ndimage.generate_binary_structure(3, 1)


class UndefinedDistanceError(ValueError):
    """Surface distance requested for an empty mask."""


def _pair(a, b):
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise GeometryError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a, b


def dsc(a, b) -> float:
    """Dice coefficient; two empty masks score 1.0."""
    a, b = _pair(a, b)
    na, nb = int(np.count_nonzero(a)), int(np.count_nonzero(b))
    if na + nb == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(a & b)) / (na + nb)


def boundary_mask(m) -> np.ndarray:
    m = np.asarray(m, dtype=bool)
    if not m.any():
        return np.zeros_like(m)
    return m & ~ndimage.binary_erosion(m, structure=_FACE, border_value=0)


@dataclass(frozen=True)
class BoundarySet:
    indices: np.ndarray  # (n, 3) voxel indices, z y x
    points_mm: np.ndarray  # (n, 3) physical voxel centres

    def __len__(self):
        return len(self.indices)


def extract_boundary(m, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> BoundarySet:
    idx = np.argwhere(boundary_mask(m))
    pts = idx * np.asarray(spacing, dtype=float) + np.asarray(origin, dtype=float)
    return BoundarySet(idx, pts)


def distance_transform(m, spacing=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Exact Euclidean distance (mm) from every voxel to the nearest boundary voxel of ``m``."""
    border = boundary_mask(m)
    if not border.any():
        raise UndefinedDistanceError("distance transform of an empty mask")
    return ndimage.distance_transform_edt(~border, sampling=spacing)


def _bbox(m, pad=0):
    sl = []
    for axis in range(3):
        other = tuple(a for a in range(3) if a != axis)
        idx = np.flatnonzero(m.any(axis=other))
        sl.append(slice(max(int(idx[0]) - pad, 0), min(int(idx[-1]) + 1 + pad, m.shape[axis])))
    return tuple(sl)


def directed_distances(a, b, spacing=(1.0, 1.0, 1.0)):
    """Distances from each boundary voxel of ``a`` to the boundary of ``b`` and back.

    Returns ``(d_ab, d_ba)`` as 1-D arrays in mm. Nearest boundary points are
    found with exact k-d tree queries, whose cost scales with the boundary
    size rather than with the bounding box.
    """
    a, b = _pair(a, b)
    if not a.any() or not b.any():
        raise UndefinedDistanceError("undefined surface distance: a mask is empty")
    # The joint extent plus one voxel holds both boundaries intact.
    box = _bbox(a | b, pad=1)
    sp = np.asarray(spacing, dtype=np.float64)
    pa = np.argwhere(boundary_mask(a[box])) * sp
    pb = np.argwhere(boundary_mask(b[box])) * sp
    d_ab = cKDTree(pb).query(pa)[0]
    d_ba = cKDTree(pa).query(pb)[0]
    return d_ab, d_ba


def surface_distances(a, b, spacing=(1.0, 1.0, 1.0)) -> tuple[float, float]:
    """Symmetric average surface distance and Hausdorff distance, in mm."""
    d_ab, d_ba = directed_distances(a, b, spacing)
    asd = (d_ab.sum() + d_ba.sum()) / (d_ab.size + d_ba.size)
    hd = max(d_ab.max(), d_ba.max())
    return float(asd), float(hd)


@dataclass
class MetricResult:
    class_id: int
    dsc: float | None
    asd_mm: float | None
    hd_mm: float | None
    hd_pre_mm: float | None = None
    status: str = "ok"  # ok | undefined | not_applicable

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate_case(pred: LabelMap, gt: LabelMap, classes, pred_raw: LabelMap | None = None):
    """Per-class DSC/ASD/HD of ``pred`` against ``gt``.

    When ``pred_raw`` (the prediction before post-processing) is given its
    Hausdorff distance is reported as ``hd_pre_mm``.
    """
    pred.check_geometry(gt)
    if pred_raw is not None:
        pred_raw.check_geometry(gt)
    spacing = gt.spacing
    results = []
    for k in classes:
        k = int(k)
        if not 0 < k < gt.num_classes:
            raise ValueError(f"class {k} is outside 1..{gt.num_classes - 1}")
        g = gt.labels == k
        p = pred.labels == k
        if not g.any() and not p.any():
            results.append(MetricResult(k, None, None, None, status="not_applicable"))
            continue
        res = MetricResult(k, dsc(p, g), None, None)
        try:
            res.asd_mm, res.hd_mm = surface_distances(p, g, spacing)
        except UndefinedDistanceError:
            res.status = "undefined"
        if pred_raw is not None:
            r = pred_raw.labels == k
            if r.any() and g.any():
                res.hd_pre_mm = surface_distances(r, g, spacing)[1]
        results.append(res)
    return results
