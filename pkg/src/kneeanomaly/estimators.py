"""scikit-learn compatible wrappers around the preprocessing and post-processing steps.

The transformers accept either raw ``(z, y, x)`` arrays or the volume
containers, and hand back the same kind of object they were given.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .morphology import largest_component_filter, remove_small_components
from .volume import LabelMap, Volume


def check_volume(X, allow_nan=False) -> np.ndarray:
    """Return the float voxel array behind ``X``, rejecting non-3D or non-finite input."""
    a = X.values if isinstance(X, Volume) else np.asarray(X, dtype=np.float64)
    if a.ndim != 3:
        raise ValueError(f"expected a 3D volume, got array with shape {a.shape}")
    if not allow_nan and not np.all(np.isfinite(a)):
        raise ValueError("input contains NaN or Inf values")
    return a


def check_labels(X) -> np.ndarray:
    a = X.labels if isinstance(X, LabelMap) else np.asarray(X)
    if a.ndim != 3:
        raise ValueError(f"expected a 3D label map, got array with shape {a.shape}")
    if a.dtype.kind not in "iub":
        raise ValueError(f"labels must be integers, got dtype {a.dtype}")
    return a


def _wrap(X, values):
    return X.with_values(values) if isinstance(X, Volume) else values


def _wrap_labels(X, labels):
    return X.with_labels(labels) if isinstance(X, LabelMap) else labels


class ZScoreNormalizer(TransformerMixin, BaseEstimator):
    """Z-score with statistics learned in ``fit``, clip, then rescale to [0, 1]."""

    def __init__(self, clip=5.0):
        self.clip = clip

    def fit(self, X, y=None, mask=None):
        a = check_volume(X)
        sample = a if mask is None else a[np.asarray(mask, dtype=bool)]
        if sample.size == 0:
            raise ValueError("normalization mask selects no voxels")
        std = float(sample.std())
        if not std > 0:
            raise ValueError("constant volume: standard deviation is zero")
        self.mean_ = float(sample.mean())
        self.scale_ = std
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        a = check_volume(X)
        z = np.clip((a - self.mean_) / self.scale_, -self.clip, self.clip)
        return _wrap(X, (z + self.clip) / (2.0 * self.clip))


class FocalWeightTransformer(TransformerMixin, BaseEstimator):
    """Maps an error map ``E`` to focal weights ``1 + beta * E``. Stateless."""

    def __init__(self, beta=99.0):
        self.beta = beta

    def fit(self, X, y=None):
        check_volume(X)
        return self

    def transform(self, X):
        a = check_volume(X)
        if np.any(a < 0):
            raise ValueError("error maps must be non-negative")
        return _wrap(X, 1.0 + float(self.beta) * a)


class LargestComponentFilter(TransformerMixin, BaseEstimator):
    """Per-class stray-component removal on a label map.

    For each class in ``classes`` the largest component is kept together with
    components within ``allowance_voxels`` of it; removed voxels become
    background.
    """

    def __init__(self, classes=(1, 2, 3, 4, 5, 6), allowance_voxels=50, connectivity=26,
                 metric="euclidean"):
        self.classes = classes
        self.allowance_voxels = allowance_voxels
        self.connectivity = connectivity
        self.metric = metric

    def fit(self, X, y=None):
        check_labels(X)
        return self

    def transform(self, X):
        labels = np.array(check_labels(X))
        for k in self.classes:
            m = labels == k
            if not m.any():
                continue
            kept = largest_component_filter(m, self.allowance_voxels, self.connectivity, self.metric)
            labels[m & ~kept] = 0
        return _wrap_labels(X, labels)


class SmallComponentFilter(TransformerMixin, BaseEstimator):
    """Removes components of ``classes`` smaller than ``min_volume_mm3``."""

    def __init__(self, classes=(7, 8, 9), min_volume_mm3=0.0, spacing=None, connectivity=26):
        self.classes = classes
        self.min_volume_mm3 = min_volume_mm3
        self.spacing = spacing
        self.connectivity = connectivity

    def fit(self, X, y=None):
        check_labels(X)
        return self

    def transform(self, X):
        labels = np.array(check_labels(X))
        spacing = self.spacing
        if spacing is None:
            spacing = X.spacing if isinstance(X, LabelMap) else (1.0, 1.0, 1.0)
        for k in self.classes:
            m = labels == k
            kept = remove_small_components(m, self.min_volume_mm3, spacing, self.connectivity)
            labels[m & ~kept] = 0
        return _wrap_labels(X, labels)
