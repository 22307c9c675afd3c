"""Binary mask operations and the component-based post-processing filters.

Masks are plain boolean ``(z, y, x)`` arrays; physical quantities take the
voxel spacing explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volume import GeometryError, Volume

_STRUCTURES = {
    6: ndimage.generate_binary_structure(3, 1),
    18: ndimage.generate_binary_structure(3, 2),
    26: ndimage.generate_binary_structure(3, 3),
}


def structure(connectivity: int) -> np.ndarray:
    try:
        return _STRUCTURES[int(connectivity)]
    except KeyError:
        raise ValueError(f"connectivity must be 6, 18 or 26, got {connectivity}") from None


def _as_mask(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 3:
        raise ValueError(f"expected a 3D mask, got shape {m.shape}")
    return m.astype(bool, copy=False)


def dilate(m, radius: int, metric: str = "chebyshev") -> np.ndarray:
    """Set every voxel within ``radius`` voxels of the mask.

    ``chebyshev`` grows a cube (per-axis expansion, separable);
    ``euclidean`` grows a ball of voxel-unit radius.
    """
    m = _as_mask(m)
    radius = int(radius)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0 or not m.any():
        return m.copy()
    if metric == "chebyshev":
        out = m.view(np.uint8)
        for axis in range(3):
            out = ndimage.maximum_filter1d(
                out, size=2 * radius + 1, axis=axis, mode="constant", cval=0
            )
        return out.astype(bool)
    if metric == "euclidean":
        dist = ndimage.distance_transform_edt(~m)
        return dist <= radius
    raise ValueError(f"unknown dilation metric {metric!r}")


def erase_region(x: Volume, m, fill: float = 0.0) -> Volume:
    m = _as_mask(m)
    if m.shape != x.dims:
        raise GeometryError(f"mask shape {m.shape} does not match volume dims {x.dims}")
    return x.with_values(np.where(m, float(fill), x.values))


@dataclass(frozen=True)
class ComponentSet:
    """Connected components of a mask; ids run from 1 in raster scan order."""

    labels: np.ndarray
    counts: np.ndarray
    voxel_volume: float = 1.0

    @property
    def n_components(self) -> int:
        return len(self.counts)

    @property
    def volumes_mm3(self) -> np.ndarray:
        return self.counts * self.voxel_volume

    def mask_of(self, ids) -> np.ndarray:
        keep = np.zeros(self.n_components + 1, dtype=bool)
        keep[np.asarray(ids, dtype=np.intp)] = True
        keep[0] = False
        return keep[self.labels]


def connected_components(m, connectivity: int = 26, spacing=(1.0, 1.0, 1.0)) -> ComponentSet:
    m = _as_mask(m)
    labels, n = ndimage.label(m, structure=structure(connectivity))
    counts = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return ComponentSet(labels, counts, float(np.prod(spacing)))


def largest_component_filter(
    m, allowance_voxels: float = 50, connectivity: int = 26, metric: str = "euclidean"
) -> np.ndarray:
    """Keep the largest component and every component within ``allowance_voxels`` of it.

    Distances are between voxel centres in voxel units. Equal-sized largest
    components resolve to the one met first in scan order.
    """
    m = _as_mask(m)
    cc = connected_components(m, connectivity)
    if cc.n_components == 0:
        raise ValueError("no foreground: largest component is undefined")
    largest = int(np.argmax(cc.counts)) + 1
    if cc.n_components == 1:
        return m.copy()

    # Anything outside the bounding box grown by the allowance is farther
    # than the allowance along at least one axis, under either metric.
    core = cc.labels == largest
    pad = int(np.floor(allowance_voxels)) + 1
    box = []
    for axis, (lo, hi) in enumerate(_extent(core)):
        box.append(slice(max(lo - pad, 0), min(hi + 1 + pad, m.shape[axis])))
    box = tuple(box)
    if metric == "euclidean":
        dist = ndimage.distance_transform_edt(~core[box])
    elif metric == "chebyshev":
        dist = ndimage.distance_transform_cdt(~core[box], metric="chessboard").astype(float)
    else:
        raise ValueError(f"unknown distance metric {metric!r}")

    sub_labels = cc.labels[box]
    n = cc.n_components
    min_dist = np.full(n + 1, np.inf)
    np.minimum.at(min_dist, sub_labels.ravel(), dist.ravel())
    keep = np.flatnonzero(min_dist <= allowance_voxels)
    keep = keep[keep > 0]
    return cc.mask_of(np.union1d(keep, [largest]))


def remove_small_components(
    m, min_volume_mm3: float, spacing=(1.0, 1.0, 1.0), connectivity: int = 26
) -> np.ndarray:
    """Drop components whose physical volume is strictly below ``min_volume_mm3``."""
    m = _as_mask(m)
    if min_volume_mm3 <= 0 or not m.any():
        return m.copy()
    cc = connected_components(m, connectivity, spacing)
    keep = np.flatnonzero(cc.volumes_mm3 >= min_volume_mm3) + 1
    return cc.mask_of(keep)


def _extent(m):
    out = []
    for axis in range(3):
        other = tuple(a for a in range(3) if a != axis)
        idx = np.flatnonzero(m.any(axis=other))
        out.append((int(idx[0]), int(idx[-1])))
    return out
