"""Shared fixtures and brute-force oracles.

The oracles here are deliberately naive (explicit loops, all-pairs
distances) and share no code with the package's accelerated paths.
"""
from collections import deque
from itertools import product

import numpy as np
import pytest

from kneeanomaly.io import write_volume
from kneeanomaly.volume import LabelMap, Volume

FACE_OFFSETS = [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)]


def brute_boundary(m):
    """Foreground voxels with a background (or out-of-array) face neighbour."""
    m = np.asarray(m, dtype=bool)
    out = []
    for z, y, x in zip(*np.nonzero(m)):
        for dz, dy, dx in FACE_OFFSETS:
            q = (z + dz, y + dy, x + dx)
            inside = all(0 <= q[i] < m.shape[i] for i in range(3))
            if not inside or not m[q]:
                out.append((z, y, x))
                break
    return np.array(out, dtype=float).reshape(-1, 3)


def brute_surface_distances(a, b, spacing):
    pa = brute_boundary(a) * np.asarray(spacing)
    pb = brute_boundary(b) * np.asarray(spacing)
    d = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=-1))
    d_ab, d_ba = d.min(axis=1), d.min(axis=0)
    asd = (d_ab.sum() + d_ba.sum()) / (len(d_ab) + len(d_ba))
    return asd, max(d_ab.max(), d_ba.max())


def brute_distance_to_boundary(m, spacing):
    pts = brute_boundary(m) * np.asarray(spacing)
    grid = np.stack(np.meshgrid(*[np.arange(n) for n in m.shape], indexing="ij"), axis=-1)
    grid = grid.reshape(-1, 3) * np.asarray(spacing)
    d = np.sqrt(((grid[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)).min(axis=1)
    return d.reshape(m.shape)


def flood_fill_components(m, connectivity):
    """Breadth-first labelling; returns a list of voxel sets."""
    m = np.asarray(m, dtype=bool)
    offsets = [
        o for o in product((-1, 0, 1), repeat=3)
        if o != (0, 0, 0) and sum(abs(v) for v in o) <= {6: 1, 18: 2, 26: 3}[connectivity]
    ]
    seen = np.zeros_like(m)
    comps = []
    for start in zip(*np.nonzero(m)):
        if seen[start]:
            continue
        seen[start] = True
        comp, queue = set(), deque([start])
        while queue:
            v = queue.popleft()
            comp.add(v)
            for o in offsets:
                q = tuple(v[i] + o[i] for i in range(3))
                if all(0 <= q[i] < m.shape[i] for i in range(3)) and m[q] and not seen[q]:
                    seen[q] = True
                    queue.append(q)
        comps.append(comp)
    return comps


def random_mask_pair(rng, max_side=16, min_side=2):
    shape = tuple(rng.integers(min_side, max_side + 1, size=3))
    density = rng.uniform(0.05, 0.7)
    while True:
        a = rng.random(shape) < density
        b = rng.random(shape) < rng.uniform(0.05, 0.7)
        if a.any() and b.any():
            return a, b


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def save_labels(path, labels, spacing=(1.0, 1.0, 1.0)):
    write_volume(LabelMap(spacing, (0.0, 0.0, 0.0), labels=labels), path)


def save_image(path, values, spacing=(1.0, 1.0, 1.0)):
    write_volume(Volume(spacing, (0.0, 0.0, 0.0), values=values), path)


def write_manifest(root, cases, **extra):
    """``cases``: list of dicts with in-memory arrays under ``gt``, ``pred``
    (model -> labels), optional ``image``, ``probs`` (model -> bone -> array)
    and ``grade``. Files land under ``root``; returns the manifest path."""
    import json

    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for c in cases:
        cid = c["case_id"]
        e = {"case_id": cid, "ground_truth": f"{cid}_gt.mha", "predictions": {}}
        save_labels(root / e["ground_truth"], c["gt"], c.get("spacing", (1.0, 1.0, 1.0)))
        for model, lab in c["pred"].items():
            e["predictions"][model] = f"{cid}_{model}.mha"
            save_labels(root / e["predictions"][model], lab, c.get("spacing", (1.0, 1.0, 1.0)))
        if "image" in c:
            e["image"] = f"{cid}_img.mha"
            save_image(root / e["image"], c["image"], c.get("spacing", (1.0, 1.0, 1.0)))
        if "probs" in c:
            e["probabilities"] = {}
            for model, per_bone in c["probs"].items():
                e["probabilities"][model] = {}
                for bone, arr in per_bone.items():
                    name = f"{cid}_{model}_{bone}_prob.mha"
                    save_image(root / name, arr, c.get("spacing", (1.0, 1.0, 1.0)))
                    e["probabilities"][model][bone] = name
        if c.get("grade") is not None:
            e["grade"] = c["grade"]
        entries.append(e)
    path = root / "manifest.json"
    path.write_text(json.dumps({"cases": entries, **extra}, indent=2))
    return path


# (criterion, passed, detail) lines recorded by the acceptance suite
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
