"""Reconstruction-error maps and forward evaluation of the training losses.

These are reference values for checking training code, not differentiable
implementations. Probability inputs are ``(K, z, y, x)`` arrays or
:class:`ProbabilityMap` instances; the ground truth ``v`` is one-hot.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .morphology import dilate, erase_region
from .volume import GeometryError, LabelMap, ProbabilityMap, Volume

EPS = 1e-7


def _default_class_weights():
    return (1.0,) * 5 + (10.0,) * 5


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 10.0
    beta: float = 99.0
    class_weights: tuple = field(default_factory=_default_class_weights)
    dilation_radius_voxels: int = 50
    fill_value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "class_weights", tuple(float(w) for w in self.class_weights))
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if not all(np.isfinite(w) and w >= 0 for w in self.class_weights):
            raise ValueError("class weights must be finite and >= 0")
        if int(self.dilation_radius_voxels) < 0:
            raise ValueError("dilation radius must be >= 0")


def _values(x):
    return x.values if isinstance(x, Volume) else np.asarray(x, dtype=np.float64)


def _probs(u):
    return u.probs if isinstance(u, ProbabilityMap) else np.asarray(u, dtype=np.float64)


def _check_pair(x, y):
    if isinstance(x, Volume) and isinstance(y, Volume):
        x.check_geometry(y)
    a, b = _values(x), _values(y)
    if a.shape != b.shape:
        raise GeometryError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def _check_probs(u, v):
    a, b = _probs(u), _probs(v)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"channel count mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape != b.shape:
        raise GeometryError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("probabilities contain NaN or Inf values")
    return a, b


def error_map(x, recon):
    """Per-voxel squared difference ``(x - recon)**2``."""
    a, b = _check_pair(x, recon)
    e = (a - b) ** 2
    return x.with_values(e) if isinstance(x, Volume) else e


def focal_weights(e, beta: float = 99.0):
    """Focal weights ``1 + beta * e``."""
    w = 1.0 + float(beta) * _values(e)
    return e.with_values(w) if isinstance(e, Volume) else w


def prepare_masked_input(x: Volume, bones: LabelMap, bone_classes, cfg: LossConfig = LossConfig(),
                         metric: str = "chebyshev") -> Volume:
    """Erase the dilated union of ``bone_classes`` from ``x``."""
    bone_classes = list(bone_classes)
    if not bone_classes:
        raise ValueError("bone_classes must not be empty")
    x.check_geometry(bones)
    mask = dilate(bones.mask(*bone_classes), cfg.dilation_radius_voxels, metric=metric)
    return erase_region(x, mask, cfg.fill_value)


def loss_g(x, gx) -> float:
    a, b = _check_pair(x, gx)
    return float(np.mean((a - b) ** 2))


def loss_a(x, gx, ax) -> float:
    """MSE between the two reconstructions plus MSE between their error maps."""
    a, g = _check_pair(x, gx)
    _, r = _check_pair(x, ax)
    eg = (a - g) ** 2
    ea = (a - r) ** 2
    return float(np.mean((g - r) ** 2) + np.mean((eg - ea) ** 2))


def _flat(p):
    return p.reshape(p.shape[0], -1)


def _dice_terms(u, v):
    uf, vf = _flat(u), _flat(v)
    inter = (uf * vf).sum(axis=1)
    denom = uf.sum(axis=1) + vf.sum(axis=1)
    present = denom > 0
    ratio = np.zeros_like(inter)
    ratio[present] = 2.0 * inter[present] / denom[present]
    return ratio, present


def dice_loss(u, v) -> float:
    """Multi-class soft Dice loss averaged over all K channels, background included.

    A channel empty in both ``u`` and ``v`` contributes an overlap term of 0.
    """
    u, v = _check_probs(u, v)
    ratio, _ = _dice_terms(u, v)
    return float(1.0 - ratio.sum() / u.shape[0])


def focal_ce_loss(u, v, f=None) -> float:
    """Focal-weighted cross-entropy summed (not averaged) over voxels.

    ``f`` of ``None`` means unit weights, i.e. plain categorical cross-entropy.
    """
    u, v = _check_probs(u, v)
    logu = np.log(np.clip(u, EPS, 1.0))
    per_voxel = -(v * logu).sum(axis=0)
    if f is None:
        return float(per_voxel.sum())
    w = _values(f)
    if w.shape != per_voxel.shape:
        raise GeometryError(f"focal weight shape {w.shape} does not match {per_voxel.shape}")
    return float((w * per_voxel).sum())


def total_seg_loss(u, v, e, cfg: LossConfig = LossConfig()) -> float:
    return dice_loss(u, v) + cfg.alpha * focal_ce_loss(u, v, focal_weights(e, cfg.beta))


def weighted_dice_loss(u, v, cfg: LossConfig = LossConfig()) -> float:
    """Class-weighted Dice loss; channels empty in both inputs get weight 0."""
    u, v = _check_probs(u, v)
    w = np.asarray(cfg.class_weights, dtype=np.float64)
    if w.size != u.shape[0]:
        raise ValueError(f"{w.size} class weights given for {u.shape[0]} classes")
    ratio, present = _dice_terms(u, v)
    w = np.where(present, w, 0.0)
    return float((w * (1.0 - ratio)).sum() / u.shape[0])


def total_transfer_loss(u, v, e, cfg: LossConfig = LossConfig()) -> float:
    return weighted_dice_loss(u, v, cfg) + cfg.alpha * focal_ce_loss(u, v, focal_weights(e, cfg.beta))
