"""Volume containers and per-voxel conversions.

Arrays are stored in ``(z, y, x)`` order with spacing and origin given in the
same order, in millimetres.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Label scheme of the 10-class knee dataset. The 5-class scheme is the
# first five entries.
CLASS_NAMES = ("BG", "FB", "FC", "TB", "TC", "PB", "PC", "FL", "TL", "PL")
BONE_CLASSES = {"femur": 1, "tibia": 3, "patella": 5}
CARTILAGE_CLASSES = {"femur": 2, "tibia": 4, "patella": 6}
LESION_CLASSES = {"femur": 7, "tibia": 8, "patella": 9}


class GeometryError(ValueError):
    """Raised when two volumes do not share dims, spacing and origin."""


def _frozen(a: np.ndarray) -> np.ndarray:
    view = a.view()
    view.flags.writeable = False
    return view


def _triple(name, value) -> tuple[float, float, float]:
    t = tuple(float(v) for v in value)
    if len(t) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(t)}")
    return t


@dataclass(frozen=True)
class _Grid:
    spacing: tuple = (1.0, 1.0, 1.0)
    origin: tuple = (0.0, 0.0, 0.0)

    def _check_grid(self, shape):
        object.__setattr__(self, "spacing", _triple("spacing", self.spacing))
        object.__setattr__(self, "origin", _triple("origin", self.origin))
        if len(shape) != 3:
            raise ValueError(f"expected a 3D array, got shape {shape}")
        if not all(np.isfinite(s) and s > 0 for s in self.spacing):
            raise ValueError(f"spacing must be positive and finite, got {self.spacing}")
        if not all(np.isfinite(o) for o in self.origin):
            raise ValueError(f"origin must be finite, got {self.origin}")

    @property
    def voxel_volume(self) -> float:
        sz, sy, sx = self.spacing
        return sz * sy * sx

    def same_geometry(self, other) -> bool:
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and self.origin == other.origin
        )

    def check_geometry(self, other) -> None:
        if not self.same_geometry(other):
            raise GeometryError(
                f"geometry mismatch: dims {self.dims} vs {other.dims}, "
                f"spacing {self.spacing} vs {other.spacing}, "
                f"origin {self.origin} vs {other.origin}"
            )


@dataclass(frozen=True)
class Volume(_Grid):
    """Scalar field (image, error map, weight map) on a voxel grid."""

    values: np.ndarray = field(default=None, kw_only=True)

    def __post_init__(self):
        a = np.asarray(self.values, dtype=np.float64)
        self._check_grid(a.shape)
        if not np.all(np.isfinite(a)):
            raise ValueError("volume contains NaN or Inf values")
        object.__setattr__(self, "values", _frozen(a))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.values.shape)

    def with_values(self, values) -> Volume:
        return Volume(self.spacing, self.origin, values=values)


@dataclass(frozen=True)
class LabelMap(_Grid):
    """Integer label field with ``num_classes`` classes."""

    labels: np.ndarray = field(default=None, kw_only=True)
    num_classes: int = field(default=10, kw_only=True)

    def __post_init__(self):
        a = np.asarray(self.labels)
        if a.dtype.kind not in "iub":
            if not np.all(np.mod(a, 1) == 0):
                raise ValueError("labels must be integers")
        self._check_grid(a.shape)
        if a.size and (a.min() < 0 or a.max() >= self.num_classes):
            raise ValueError(
                f"labels must lie in [0, {self.num_classes - 1}], "
                f"found range [{a.min()}, {a.max()}]"
            )
        if self.num_classes > 256:
            raise ValueError("at most 256 classes are supported")
        object.__setattr__(self, "labels", _frozen(a.astype(np.uint8, copy=False)))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.labels.shape)

    def mask(self, *classes) -> np.ndarray:
        """Boolean mask of voxels belonging to any of ``classes``."""
        return np.isin(self.labels, classes)

    def with_labels(self, labels) -> LabelMap:
        return LabelMap(self.spacing, self.origin, labels=labels, num_classes=self.num_classes)


@dataclass(frozen=True)
class ProbabilityMap(_Grid):
    """Per-voxel class probabilities, channel axis first: ``(K, z, y, x)``."""

    probs: np.ndarray = field(default=None, kw_only=True)
    atol: float = field(default=1e-5, kw_only=True, repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 4:
            raise ValueError(f"expected (K, z, y, x) probabilities, got shape {p.shape}")
        self._check_grid(p.shape[1:])
        if not np.all(np.isfinite(p)):
            raise ValueError("probabilities contain NaN or Inf values")
        if p.min() < 0 or p.max() > 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.allclose(p.sum(axis=0), 1.0, rtol=0, atol=self.atol):
            raise ValueError("channel probabilities must sum to 1 at every voxel")
        object.__setattr__(self, "probs", _frozen(p))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.probs.shape[1:])

    @property
    def num_classes(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    image: str | None = None
    ground_truth: str | None = None
    predictions: dict = field(default_factory=dict)
    probabilities: dict = field(default_factory=dict)
    reconstruction: str | None = None
    grade: int | None = None

    def __post_init__(self):
        if not self.case_id:
            raise ValueError("case_id must be non-empty")
        if self.grade is not None and not 0 <= int(self.grade) <= 4:
            raise ValueError(f"osteoarthritis grade must be in 0..4, got {self.grade}")


def z_normalize(x: Volume, mask=None, clip: float = 5.0) -> Volume:
    """Z-score, clip to ``[-clip, clip]`` and rescale linearly to ``[0, 1]``.

    Statistics come from the whole volume unless ``mask`` selects a subset.
    """
    v = x.values
    sample = v if mask is None else v[np.asarray(mask, dtype=bool)]
    if sample.size == 0:
        raise ValueError("normalization mask selects no voxels")
    mean = sample.mean()
    std = sample.std()
    if not std > 0:
        raise ValueError("constant volume: standard deviation is zero")
    z = np.clip((v - mean) / std, -clip, clip)
    return x.with_values((z + clip) / (2.0 * clip))


def one_hot(m: LabelMap, num_classes: int | None = None) -> ProbabilityMap:
    k = m.num_classes if num_classes is None else int(num_classes)
    if m.labels.size and int(m.labels.max()) >= k:
        raise ValueError(f"label {int(m.labels.max())} is out of range for {k} classes")
    probs = np.zeros((k,) + m.dims, dtype=np.float64)
    np.put_along_axis(probs, m.labels[None].astype(np.intp), 1.0, axis=0)
    return ProbabilityMap(m.spacing, m.origin, probs=probs)


def argmax_labels(u: ProbabilityMap) -> LabelMap:
    # np.argmax returns the first maximal index, i.e. ties go to the lowest class
    return LabelMap(
        u.spacing, u.origin, labels=np.argmax(u.probs, axis=0), num_classes=u.num_classes
    )
