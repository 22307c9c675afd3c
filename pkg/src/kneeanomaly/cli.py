"""Batch command line: ``kneeanomaly {eval,detect,anomaly,phantom,augment,stats}``.

Reports are written with sorted keys and a fixed row order so that reruns
give byte-identical files whatever ``--jobs`` is. Run-specific details
(timestamps, worker count) go to ``run_metadata.json`` instead.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .detection import (
    PROB_THRESHOLDS,
    SIZE_THRESHOLDS,
    DegenerateRocError,
    DetectionCase,
    case_outcomes,
    detection_report,
    roc_from_outcomes,
    sweep_settings,
)
from .estimators import LargestComponentFilter
from .io import read_volume, write_volume
from .losses import LossConfig, error_map, focal_weights, prepare_masked_input
from .metrics import evaluate_case
from .phantom import AugmentConfig, PhantomConfig, generate_phantom, random_affine, simulate_reconstruction
from .stats import tukey_hsd
from .volume import (
    BONE_CLASSES,
    CLASS_NAMES,
    LESION_CLASSES,
    CaseRecord,
    LabelMap,
    Volume,
    z_normalize,
)

log = logging.getLogger("kneeanomaly")

DEFAULT_CONFIG = {
    "alpha": 10.0,
    "beta": 99.0,
    "class_weights": [1.0] * 5 + [10.0] * 5,
    "dilation_radius_voxels": 50,
    "dilation_metric": "chebyshev",
    "fill_value": 0.0,
    "allowance_voxels": 50,
    "allowance_metric": "euclidean",
    "connectivity": 26,
    "postprocess": True,
    "eval_classes": None,
    "normalize": True,
    "size_thresholds": list(SIZE_THRESHOLDS),
    "prob_thresholds": list(PROB_THRESHOLDS),
    "phantom": {},
    "augment": {},
}

METRICS = ("dsc", "asd_mm", "hd_mm", "hd_pre_mm", "hd0_mm", "hd1_mm")


class BatchError(RuntimeError):
    """Failure of the whole batch (exit code 1)."""


class UsageError(ValueError):
    """Invalid command line or configuration (exit code 2)."""


# ---------------------------------------------------------------- config


def load_config(path=None, overrides=None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        unknown = set(user) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    if int(cfg["connectivity"]) not in (6, 18, 26):
        raise UsageError(f"connectivity must be 6, 18 or 26, got {cfg['connectivity']}")
    return cfg


def loss_config(cfg) -> LossConfig:
    return LossConfig(
        alpha=cfg["alpha"],
        beta=cfg["beta"],
        class_weights=cfg["class_weights"],
        dilation_radius_voxels=cfg["dilation_radius_voxels"],
        fill_value=cfg["fill_value"],
    )


def _build(cls, values, seed=None):
    names = {f.name for f in fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise UsageError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    values = dict(values)
    if seed is not None:
        values["seed"] = seed
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid {cls.__name__}: {exc}") from exc


# -------------------------------------------------------------- manifest


@dataclass
class Manifest:
    path: Path
    cases: list
    num_classes: int = 10
    class_names: list = field(default_factory=lambda: list(CLASS_NAMES))
    bone_lesions: dict = field(default_factory=lambda: dict(LESION_CLASSES))

    @property
    def models(self) -> list:
        names = set()
        for c in self.cases:
            names.update(c.predictions)
        return sorted(names)


def load_manifest(path) -> Manifest:
    """Read a JSON manifest; paths inside it are relative to its directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BatchError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    k = int(doc.get("num_classes", 10))
    names = list(doc.get("class_names", CLASS_NAMES[:k]))
    lesions = {b: int(c) for b, c in doc.get("bone_lesions", LESION_CLASSES if k == 10 else {}).items()}

    def resolve(p):
        q = base / p
        if not q.exists():
            missing.append(str(q))
        return str(q)

    missing, cases, seen = [], [], set()
    for entry in doc.get("cases", []):
        cid = str(entry.get("case_id", ""))
        if not cid:
            raise BatchError("every case needs a non-empty case_id")
        if cid in seen:
            raise BatchError(f"duplicate case_id {cid!r}")
        seen.add(cid)
        preds = entry.get("predictions", {})
        if isinstance(preds, str):
            preds = {"model": preds}
        probs = {
            m: {b: resolve(p) for b, p in per_bone.items()}
            for m, per_bone in entry.get("probabilities", {}).items()
        }
        cases.append(
            CaseRecord(
                case_id=cid,
                image=resolve(entry["image"]) if entry.get("image") else None,
                ground_truth=resolve(entry["ground_truth"]) if entry.get("ground_truth") else None,
                predictions={m: resolve(p) for m, p in preds.items()},
                probabilities=probs,
                reconstruction=resolve(entry["reconstruction"]) if entry.get("reconstruction") else None,
                grade=entry.get("grade"),
            )
        )
    if missing:
        raise BatchError(f"manifest references missing files: {missing}")
    if not cases:
        raise BatchError("manifest contains no cases")
    return Manifest(path, sorted(cases, key=lambda c: c.case_id), k, names, lesions)


# --------------------------------------------------------------- helpers


def _clean(obj):
    """Convert numpy scalars and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, rows, columns) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({c: ("" if r.get(c) is None else r.get(c)) for c in columns})
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def _pool_map(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_metadata(out_dir: Path, command, jobs, started):
    write_json(
        out_dir / "run_metadata.json",
        {
            "command": command,
            "version": __version__,
            "jobs": jobs,
            "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
            "elapsed_s": round(time.time() - started, 3),
        },
    )


def _mean_std(values):
    v = np.asarray([x for x in values if x is not None], dtype=np.float64)
    if v.size == 0:
        return None, None, 0
    std = float(v.std(ddof=1)) if v.size > 1 else None
    return float(v.mean()), std, int(v.size)


# ------------------------------------------------------------------ eval


def eval_classes(cfg, num_classes):
    if cfg.get("eval_classes"):
        return [int(k) for k in cfg["eval_classes"]]
    # bones and cartilages; lesions are scored by the detection protocol
    return [k for k in (1, 2, 3, 4, 5, 6) if k < num_classes]


def _eval_one(task):
    case, model, classes, cfg, k = task
    rows = []
    base = {"model": model, "case_id": case.case_id, "grade": case.grade}
    try:
        gt = read_volume(case.ground_truth, num_classes=k)
        raw = read_volume(case.predictions[model], num_classes=k)
        if not isinstance(gt, LabelMap) or not isinstance(raw, LabelMap):
            raise ValueError("ground truth and predictions must be UINT8 label maps")
        post = raw
        if cfg["postprocess"]:
            post = LargestComponentFilter(
                classes, cfg["allowance_voxels"], int(cfg["connectivity"]), cfg["allowance_metric"]
            ).transform(raw)
        for res in evaluate_case(post, gt, classes, pred_raw=raw):
            row = {**base, **res.as_dict(), "error": None}
            g = case.grade
            row["hd0_mm"] = res.hd_mm if g is not None and int(g) <= 2 else None
            row["hd1_mm"] = res.hd_mm if g is not None and int(g) >= 3 else None
            rows.append(row)
    except Exception as exc:  # isolated per case
        rows.append({**base, "class_id": None, "status": "error", "error": f"{type(exc).__name__}: {exc}"})
    return rows


def _aggregate(rows, models, classes):
    out = []
    for model in models:
        for k in classes:
            sel = [r for r in rows if r["model"] == model and r.get("class_id") == k]
            for metric in METRICS:
                mean, std, n = _mean_std(r.get(metric) for r in sel)
                out.append({"model": model, "class_id": k, "class_name": None, "metric": metric,
                            "n": n, "mean": mean, "std": std})
    return out


def _tukey_table(rows, models, classes, class_names, alpha=0.05):
    table = []
    if len(models) < 2:
        return table
    for k in classes:
        for metric in METRICS:
            groups = {}
            for m in models:
                vals = [r[metric] for r in rows
                        if r["model"] == m and r.get("class_id") == k and r.get(metric) is not None]
                groups[m] = vals
            entry = {"class_id": k, "class_name": class_names[k] if k < len(class_names) else str(k),
                     "metric": metric}
            if any(len(v) < 2 for v in groups.values()):
                entry["skipped"] = "fewer than 2 values in a group"
                table.append(entry)
                continue
            try:
                res = tukey_hsd(groups, alpha)
            except ValueError as exc:
                entry["skipped"] = str(exc)
                table.append(entry)
                continue
            entry.update({"df": res.df, "msw": res.msw,
                          "pairwise": [r.__dict__ for r in res.pairwise]})
            table.append(entry)
    return table


def _significance(tukey, model, k, metric):
    for t in tukey:
        if t["class_id"] == k and t["metric"] == metric and "pairwise" in t:
            return ";".join(sorted(
                (p["group_b"] if p["group_a"] == model else p["group_a"])
                for p in t["pairwise"]
                if model in (p["group_a"], p["group_b"]) and p["significant"]
            ))
    return ""


def cmd_eval(manifest: Manifest, cfg: dict, out_dir: Path, jobs: int = 1) -> dict:
    classes = eval_classes(cfg, manifest.num_classes)
    models = manifest.models
    if not models:
        raise BatchError("manifest has no predictions to evaluate")
    tasks = [(c, m, classes, cfg, manifest.num_classes)
             for m in models for c in manifest.cases if m in c.predictions]
    rows = [r for part in _pool_map(_eval_one, tasks, jobs) for r in part]
    rows.sort(key=lambda r: (r["model"], r["case_id"], r.get("class_id") or 0))
    for r in rows:
        k = r.get("class_id")
        r["class_name"] = manifest.class_names[k] if k is not None and k < len(manifest.class_names) else None

    failures = [r for r in rows if r["status"] == "error"]
    ok_rows = [r for r in rows if r["status"] != "error"]
    aggregate = _aggregate(ok_rows, models, classes)
    for a in aggregate:
        a["class_name"] = manifest.class_names[a["class_id"]]
    tukey = _tukey_table(ok_rows, models, classes, manifest.class_names)
    for a in aggregate:
        a["significant_vs"] = _significance(tukey, a["model"], a["class_id"], a["metric"])

    detection = {}
    if manifest.num_classes == 10 and manifest.bone_lesions:
        for model in models:
            det_tasks = [(c, model, [(0.0, None)], cfg, manifest) for c in manifest.cases
                         if model in c.predictions]
            results = _pool_map(_detect_one, det_tasks, jobs)
            outcomes = [o for r in results if r["outcomes"] is not None for o in r["outcomes"][0]]
            if outcomes:
                detection[model] = detection_report(outcomes)

    report = {
        "command": "eval",
        "manifest": manifest.path.name,
        "config": {key: cfg[key] for key in ("postprocess", "allowance_voxels", "allowance_metric",
                                              "connectivity")},
        "classes": classes,
        "models": models,
        "cases": rows,
        "aggregate": aggregate,
        "tukey": tukey,
        "detection": detection,
        "failures": [{"model": f["model"], "case_id": f["case_id"], "error": f["error"]} for f in failures],
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "eval_report.json", report)
    write_csv(out_dir / "per_case.csv", rows,
              ["model", "case_id", "class_id", "class_name", "grade", "status", *METRICS, "error"])
    write_csv(out_dir / "summary.csv", aggregate,
              ["class_id", "class_name", "metric", "model", "n", "mean", "std", "significant_vs"])
    if not ok_rows:
        raise BatchError("every case failed; see eval_report.json")
    return report


# ---------------------------------------------------------------- detect


def _detect_one(task):
    case, model, settings, cfg, manifest = task
    try:
        k = manifest.num_classes
        gt = read_volume(case.ground_truth, num_classes=k)
        pred = read_volume(case.predictions[model], num_classes=k)
        probs = None
        if any(p is not None for _, p in settings):
            paths = case.probabilities.get(model)
            if not paths:
                raise ValueError(f"no probability maps for model {model!r}")
            probs = {}
            for bone in manifest.bone_lesions:
                v = read_volume(paths[bone])
                v.check_geometry(gt)
                probs[bone] = v.values
        dc = DetectionCase.from_labels(case.case_id, gt, pred, probs, manifest.bone_lesions)
        return {"case_id": case.case_id,
                "outcomes": case_outcomes(dc, settings, int(cfg["connectivity"])), "error": None}
    except Exception as exc:
        return {"case_id": case.case_id, "outcomes": None, "error": f"{type(exc).__name__}: {exc}"}


def cmd_detect(manifest: Manifest, cfg: dict, out_dir: Path, jobs: int = 1) -> dict:
    if not manifest.bone_lesions:
        raise BatchError("manifest declares no bone lesion classes")
    models = manifest.models
    if not models:
        raise BatchError("manifest has no predictions")
    report = {"command": "detect", "manifest": manifest.path.name,
              "size_thresholds": [float(t) for t in cfg["size_thresholds"]],
              "prob_thresholds": [float(t) for t in cfg["prob_thresholds"] or []],
              "models": {}}
    any_ok = False
    for model in models:
        cases = [c for c in manifest.cases if model in c.predictions]
        prob_t = cfg["prob_thresholds"]
        if prob_t and not all(model in c.probabilities for c in cases):
            log.warning("model %s lacks probability maps; skipping the softmax sweep", model)
            prob_t = []
        settings = sweep_settings(cfg["size_thresholds"], prob_t)
        results = _pool_map(_detect_one, [(c, model, settings, cfg, manifest) for c in cases], jobs)
        failures = [{"case_id": r["case_id"], "error": r["error"]} for r in results if r["error"]]
        per_case = [r["outcomes"] for r in results if r["outcomes"] is not None]
        entry = {"failures": failures, "n_cases": len(per_case)}
        if per_case:
            entry["sweep"] = [
                {"size_threshold_mm3": s, "prob_threshold": p,
                 "summary": detection_report([o for case in per_case for o in case[j]])}
                for j, (s, p) in enumerate(settings)
            ]
            entry["census"] = {key: entry["sweep"][0]["summary"][key]
                               for key in ("n", "positives", "negatives")}
            try:
                roc = roc_from_outcomes(settings, per_case)
                entry["roc_points"] = [asdict(p) for p in roc.points]
                entry["auc"] = roc.auc
                any_ok = True
            except DegenerateRocError as exc:
                entry["roc_error"] = str(exc)
        report["models"][model] = entry
    write_json(out_dir / "detection_report.json", report)
    if not any_ok:
        raise BatchError("no model produced a valid ROC curve; see detection_report.json")
    return report


# --------------------------------------------------------------- anomaly


def cmd_anomaly(image, cfg, out_dir: Path, recon=None, labels=None) -> dict:
    if recon is None and labels is None:
        raise UsageError("anomaly needs --recon or --labels")
    x = read_volume(image)
    if not isinstance(x, Volume):
        raise UsageError("--image must be a FLOAT32 volume")
    lab = read_volume(labels) if labels else None
    if lab is not None:
        x.check_geometry(lab)
    summary = {"command": "anomaly", "image": Path(image).name}
    if recon is not None:
        r = read_volume(recon)
        x.check_geometry(r)
        summary["reconstruction"] = "given"
    else:
        if cfg["normalize"]:
            x = z_normalize(x)
        r = simulate_reconstruction(x, lab)
        write_volume(r, out_dir / "reconstruction.mha")
        summary["reconstruction"] = "simulated"
    summary["normalized"] = recon is None and bool(cfg["normalize"])
    lc = loss_config(cfg)
    e = error_map(x, r)
    f = focal_weights(e, lc.beta)
    write_volume(e, out_dir / "error_map.mha")
    write_volume(f, out_dir / "focal_weights.mha")
    summary.update({"error_max": float(e.values.max()), "error_mean": float(e.values.mean()),
                    "focal_min": float(f.values.min()), "focal_max": float(f.values.max()),
                    "beta": lc.beta, "n_voxels": int(e.values.size)})
    if lab is not None:
        # femur and tibia profiles, lesions inside them included
        bones = [c for c in (BONE_CLASSES["femur"], BONE_CLASSES["tibia"],
                             LESION_CLASSES["femur"], LESION_CLASSES["tibia"]) if c < lab.num_classes]
        masked = prepare_masked_input(x, lab, bones, lc, metric=cfg["dilation_metric"])
        write_volume(masked, out_dir / "masked_input.mha")
        les = lab.mask(*LESION_CLASSES.values())
        summary["lesion_voxels"] = int(les.sum())
        if les.any():
            summary["error_mean_lesion"] = float(e.values[les].mean())
            summary["error_mean_outside"] = float(e.values[~les].mean())
    write_json(out_dir / "anomaly_report.json", summary)
    return summary


# ------------------------------------------------- phantom / augment / stats


def cmd_phantom(cfg, out_dir: Path, seed=None) -> dict:
    pc = _build(PhantomConfig, cfg["phantom"], seed)
    x, lab = generate_phantom(pc)
    write_volume(x, out_dir / "image.mha")
    write_volume(lab, out_dir / "labels.mha")
    info = {"command": "phantom", "config": asdict(pc),
            "label_counts": np.bincount(lab.labels.ravel(), minlength=10).tolist()}
    write_json(out_dir / "phantom.json", info)
    return info


def cmd_augment(image, labels, cfg, out_dir: Path, seed=None) -> dict:
    ac = _build(AugmentConfig, cfg["augment"], seed)
    x, lab = read_volume(image), read_volume(labels)
    if not isinstance(x, Volume) or not isinstance(lab, LabelMap):
        raise UsageError("augment needs a FLOAT32 image and a UINT8 label map")
    img2, lab2, params = random_affine(x, lab, ac)
    write_volume(img2, out_dir / "image.mha")
    write_volume(lab2, out_dir / "labels.mha")
    info = {"command": "augment", "config": asdict(ac), "params": asdict(params)}
    write_json(out_dir / "augment.json", info)
    return info


def read_metric_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "class_id" not in rows[0]:
        raise UsageError(f"{path}: missing class_id column")
    return rows


def cmd_stats(inputs: dict, out_dir: Path, alpha: float = 0.05) -> dict:
    if len(inputs) < 2:
        raise UsageError("stats needs at least two MODEL=CSV inputs")
    tables = {m: read_metric_csv(p) for m, p in inputs.items()}
    metrics = sorted({c for rows in tables.values() for c in (rows[0] if rows else {})} & set(METRICS))
    classes = sorted({int(r["class_id"]) for rows in tables.values() for r in rows if r.get("class_id")})
    results = []
    for k in classes:
        for metric in metrics:
            groups = {}
            for m, rows in sorted(tables.items()):
                vals = []
                for r in rows:
                    if r.get("class_id") and int(r["class_id"]) == k and r.get(metric) not in (None, ""):
                        vals.append(float(r[metric]))
                groups[m] = vals
            entry = {"class_id": k, "metric": metric}
            try:
                res = tukey_hsd(groups, alpha)
                entry.update({"df": res.df, "msw": res.msw, "means": res.means,
                              "pairwise": [p.__dict__ for p in res.pairwise]})
            except ValueError as exc:
                entry["skipped"] = str(exc)
            results.append(entry)
    report = {"command": "stats", "alpha": alpha, "models": sorted(inputs), "comparisons": results}
    write_json(out_dir / "tukey_report.json", report)
    return report


# ------------------------------------------------------------------ main


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out-dir", required=True, type=Path)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--seed", type=int)
    common.add_argument("--connectivity", type=int, choices=(6, 18, 26))
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="kneeanomaly", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", parents=[common], help="segmentation metrics per case and model")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--no-postprocess", action="store_true")

    de = sub.add_parser("detect", parents=[common], help="bone-wise lesion detection and ROC")
    de.add_argument("--manifest", required=True)
    de.add_argument("--size-thresholds", type=_floats)
    de.add_argument("--prob-thresholds", type=_floats)

    an = sub.add_parser("anomaly", parents=[common], help="error map, focal weights, masked input")
    an.add_argument("--image", required=True)
    an.add_argument("--recon")
    an.add_argument("--labels")

    sub.add_parser("phantom", parents=[common], help="write a synthetic phantom")

    au = sub.add_parser("augment", parents=[common], help="random affine augmentation")
    au.add_argument("--image", required=True)
    au.add_argument("--labels", required=True)

    st = sub.add_parser("stats", parents=[common], help="Tukey HSD across per-case metric CSVs")
    st.add_argument("inputs", nargs="+", metavar="MODEL=CSV")
    st.add_argument("--alpha", type=float, default=0.05)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    started = time.time()
    overrides = {"connectivity": args.connectivity}
    if args.command == "eval" and args.no_postprocess:
        overrides["postprocess"] = False
    if args.command == "detect":
        overrides["size_thresholds"] = args.size_thresholds
        overrides["prob_thresholds"] = args.prob_thresholds
    out = args.out_dir
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "eval":
            cmd_eval(load_manifest(args.manifest), cfg, out, args.jobs)
        elif args.command == "detect":
            cmd_detect(load_manifest(args.manifest), cfg, out, args.jobs)
        elif args.command == "anomaly":
            if not (args.recon or args.labels):
                parser.error("anomaly needs --recon or --labels")
            cmd_anomaly(args.image, cfg, out, args.recon, args.labels)
        elif args.command == "phantom":
            cmd_phantom(cfg, out, args.seed)
        elif args.command == "augment":
            cmd_augment(args.image, args.labels, cfg, out, args.seed)
        elif args.command == "stats":
            inputs = {}
            for item in args.inputs:
                if "=" not in item:
                    parser.error(f"stats inputs must look like MODEL=CSV, got {item!r}")
                name, path = item.split("=", 1)
                inputs[name] = path
            cmd_stats(inputs, out, args.alpha)
    except UsageError as exc:
        print(f"kneeanomaly: error: {exc}", file=sys.stderr)
        return 2
    except BatchError as exc:
        print(f"kneeanomaly: batch failed: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"kneeanomaly: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _write_metadata(out, args.command, args.jobs, started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
