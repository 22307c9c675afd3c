"""Synthetic knee phantoms, a stand-in lesion-free reconstruction, and augmentation.

Random numbers come from numpy's counter-based Philox generator keyed by a
``SeedSequence``, which gives identical streams on every platform.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .volume import BONE_CLASSES, CARTILAGE_CLASSES, LESION_CLASSES, LabelMap, Volume

BACKGROUND_INTENSITY = 0.05
BONE_INTENSITY = 0.45
CARTILAGE_INTENSITY = 0.75

# Stream ids keep lesion placement independent of the noise field.
_LESION_STREAM, _NOISE_STREAM, _AFFINE_STREAM = 1, 2, 3


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream])))


@dataclass(frozen=True)
class PhantomConfig:
    dims: tuple = (64, 64, 64)
    spacing: tuple = (1.0, 1.0, 1.0)
    seed: int = 0
    lesion_count: int = 2
    lesion_radius_range: tuple = (1.5, 3.0)
    lesion_intensity_delta: float = 0.3
    noise_sigma: float = 0.02
    cartilage_thickness: int | None = None  # voxels; None scales with dims

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "lesion_radius_range", tuple(float(r) for r in self.lesion_radius_range))
        if len(self.dims) != 3 or min(self.dims) < 32:
            raise ValueError(f"phantom dims must be 3 values >= 32, got {self.dims}")
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise ValueError("spacing must be 3 positive values")
        lo, hi = self.lesion_radius_range
        if not 0 < lo <= hi:
            raise ValueError("lesion radius range must satisfy 0 < low <= high")
        if int(self.lesion_count) < 0:
            raise ValueError("lesion_count must be >= 0")
        if not self.lesion_intensity_delta > 0:
            raise ValueError("lesion_intensity_delta must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @property
    def thickness(self) -> int:
        if self.cartilage_thickness is not None:
            return int(self.cartilage_thickness)
        return max(1, round(min(self.dims) / 40))


def _ellipsoid(shape, center, radii):
    zz, yy, xx = np.ogrid[: shape[0], : shape[1], : shape[2]]
    return (
        ((zz - center[0]) / radii[0]) ** 2
        + ((yy - center[1]) / radii[1]) ** 2
        + ((xx - center[2]) / radii[2]) ** 2
    ) <= 1.0


def _layout(dims, t):
    """Ellipsoid centres and radii (voxels) for femur, tibia and patella."""
    nz, ny, nx = dims
    femur_c = (0.5 * (nz - 1), 0.30 * ny, 0.42 * nx)
    femur_r = (0.36 * nz, 0.20 * ny, 0.24 * nx)
    tibia_top = femur_c[1] + femur_r[1] + 2 * t + 2
    tibia_r = (0.34 * nz, 0.18 * ny, 0.22 * nx)
    tibia_c = (0.5 * (nz - 1), tibia_top + tibia_r[1], 0.42 * nx)
    patella_c = (0.5 * (nz - 1), 0.30 * ny, 0.85 * nx)
    patella_r = (0.18 * nz, 0.11 * ny, 0.09 * nx)
    return {
        "femur": (femur_c, femur_r),
        "tibia": (tibia_c, tibia_r),
        "patella": (patella_c, patella_r),
    }


def phantom_labels(cfg: PhantomConfig) -> np.ndarray:
    """Bone and cartilage labels (no lesions) for ``cfg``."""
    dims, t = cfg.dims, cfg.thickness
    layout = _layout(dims, t)
    labels = np.zeros(dims, dtype=np.uint8)
    bones = {}
    for name, (c, r) in layout.items():
        bones[name] = _ellipsoid(dims, c, r)
        if (bones[name] & (labels > 0)).any():
            raise ValueError(f"geometry too small: {name} overlaps another bone")
        labels[bones[name]] = BONE_CLASSES[name]
    any_bone = labels > 0

    zz, yy, xx = np.ogrid[: dims[0], : dims[1], : dims[2]]
    articular = {
        "femur": np.broadcast_to(yy > layout["femur"][0][1], dims),
        "tibia": np.broadcast_to(yy < layout["tibia"][0][1], dims),
        "patella": np.broadcast_to(xx < layout["patella"][0][2], dims),
    }
    for name, bone in bones.items():
        box = _box(bone, t + 1)
        near = np.zeros(dims, dtype=bool)
        near[box] = ndimage.distance_transform_edt(~bone[box]) <= t
        shell = near & ~any_bone & articular[name] & (labels == 0)
        if not shell.any():
            raise ValueError(f"geometry too small: empty {name} cartilage")
        labels[shell] = CARTILAGE_CLASSES[name]
    return labels


def _box(m, pad):
    sl = []
    for axis in range(3):
        other = tuple(a for a in range(3) if a != axis)
        idx = np.flatnonzero(m.any(axis=other))
        sl.append(slice(max(int(idx[0]) - pad, 0), min(int(idx[-1]) + 1 + pad, m.shape[axis])))
    return tuple(sl)


def _place_lesions(labels, cfg, rng):
    spacing = np.asarray(cfg.spacing)
    lo, hi = cfg.lesion_radius_range
    for name in ("femur", "tibia", "patella"):
        bone = labels == BONE_CLASSES[name]
        box = _box(bone, 1)
        depth = ndimage.distance_transform_edt(bone[box], sampling=cfg.spacing)
        origin = np.array([s.start for s in box])
        for _ in range(int(cfg.lesion_count)):
            radius = rng.uniform(lo, hi)
            candidates = np.flatnonzero(depth > radius + spacing.max())
            if candidates.size == 0:
                raise ValueError(
                    f"geometry too small: no room for a {radius:.2f} mm lesion in the {name}"
                )
            center = origin + np.unravel_index(candidates[rng.integers(candidates.size)], depth.shape)
            reach = np.ceil(radius / spacing).astype(int)
            local = tuple(slice(c - r, c + r + 1) for c, r in zip(center, reach))
            zz, yy, xx = np.ogrid[local]
            ball = (
                ((zz - center[0]) * spacing[0]) ** 2
                + ((yy - center[1]) * spacing[1]) ** 2
                + ((xx - center[2]) * spacing[2]) ** 2
            ) <= radius**2
            region = labels[local]
            region[ball & (region == BONE_CLASSES[name])] = LESION_CLASSES[name]
    return labels


def generate_phantom(cfg: PhantomConfig = PhantomConfig()) -> tuple[Volume, LabelMap]:
    labels = _place_lesions(phantom_labels(cfg), cfg, make_rng(cfg.seed, _LESION_STREAM))

    image = np.full(cfg.dims, BACKGROUND_INTENSITY)
    for name in BONE_CLASSES:
        image[labels == BONE_CLASSES[name]] = BONE_INTENSITY
        image[labels == CARTILAGE_CLASSES[name]] = CARTILAGE_INTENSITY
        image[labels == LESION_CLASSES[name]] = BONE_INTENSITY + cfg.lesion_intensity_delta
    if cfg.noise_sigma > 0:
        image += make_rng(cfg.seed, _NOISE_STREAM).normal(0.0, cfg.noise_sigma, size=cfg.dims)
    return (
        Volume(cfg.spacing, (0.0, 0.0, 0.0), values=image),
        LabelMap(cfg.spacing, (0.0, 0.0, 0.0), labels=labels, num_classes=10),
    )


def simulate_reconstruction(x: Volume, labels: LabelMap, bone_classes=None,
                            lesion_classes=None) -> Volume:
    """Replace lesion voxels by the mean of their host bone's lesion-free voxels.

    Plays the part of a lesion-free inpainting network.
    """
    x.check_geometry(labels)
    bone_classes = bone_classes or BONE_CLASSES
    lesion_classes = lesion_classes or LESION_CLASSES
    out = np.array(x.values)
    for name, lesion in lesion_classes.items():
        les = labels.labels == lesion
        if not les.any():
            continue
        host = labels.labels == bone_classes[name]
        if not host.any():
            raise ValueError(f"{name} lesion has no lesion-free host bone voxels")
        out[les] = x.values[host].mean()
    return x.with_values(out)


@dataclass(frozen=True)
class AugmentConfig:
    scale_range: tuple = (0.9, 1.1)
    rotation_deg_max: float = 10.0
    translation_vox_max: float = 10.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ValueError("scale range must satisfy 0 < low <= high")
        if self.rotation_deg_max < 0 or self.translation_vox_max < 0:
            raise ValueError("rotation and translation limits must be >= 0")


@dataclass(frozen=True)
class AffineParams:
    scale: float = 1.0
    axis: tuple = (1.0, 0.0, 0.0)  # unit vector, z y x
    angle_deg: float = 0.0
    translation: tuple = field(default=(0.0, 0.0, 0.0))  # voxels, z y x

    def is_identity(self) -> bool:
        return self.scale == 1.0 and self.angle_deg == 0.0 and not any(self.translation)


def sample_affine(cfg: AugmentConfig) -> AffineParams:
    rng = make_rng(cfg.seed, _AFFINE_STREAM)
    scale = rng.uniform(*cfg.scale_range)
    axis = rng.normal(size=3)
    axis = axis / np.linalg.norm(axis)  # uniform direction on the sphere
    angle = rng.uniform(-cfg.rotation_deg_max, cfg.rotation_deg_max)
    t = rng.uniform(-cfg.translation_vox_max, cfg.translation_vox_max, size=3)
    return AffineParams(float(scale), tuple(axis.tolist()), float(angle), tuple(t.tolist()))


def rotation_matrix(axis, angle_deg) -> np.ndarray:
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    a = np.deg2rad(angle_deg)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(a) * kx + (1 - np.cos(a)) * kx @ kx


def _snap(a, tol=1e-9):
    r = np.round(a)
    return np.where(np.abs(a - r) < tol, r, a)


def apply_affine(x: Volume, labels: LabelMap, params: AffineParams) -> tuple[Volume, LabelMap]:
    """Scale, rotate (in mm space) and translate about the volume centre.

    The image uses trilinear interpolation and the labels nearest neighbour;
    samples from outside the field of view are 0 / background.
    """
    x.check_geometry(labels)
    if params.is_identity():
        return x.with_values(np.array(x.values)), labels.with_labels(np.array(labels.labels))
    s = np.diag(x.spacing)
    s_inv = np.diag(1.0 / np.asarray(x.spacing))
    r = rotation_matrix(params.axis, params.angle_deg)
    matrix = s_inv @ r.T @ s / params.scale
    center = (np.asarray(x.dims) - 1) / 2.0
    offset = center - matrix @ (center + np.asarray(params.translation))
    # snap round-off so exact right-angle turns do not sample just outside the grid
    matrix, offset = _snap(matrix), _snap(offset)
    img = ndimage.affine_transform(x.values, matrix, offset, order=1, mode="constant", cval=0.0)
    lab = ndimage.affine_transform(labels.labels, matrix, offset, order=0, mode="constant", cval=0)
    return x.with_values(img), labels.with_labels(lab)


def random_affine(x: Volume, labels: LabelMap, cfg: AugmentConfig = AugmentConfig()):
    """Apply one sampled scale/rotation/translation to both image and labels."""
    params = sample_affine(cfg)
    img, lab = apply_affine(x, labels, params)
    return img, lab, params
