"""CSV dataset formats, manifests, ingestion and model files.

Formats (UTF-8, header row, decimal-point floats):

``curves.csv``     ``sample_id,feature_id,time,value`` rows in any order
``locations.csv``  ``sample_id,coord_1,...,coord_d``
``responses.csv``  ``sample_id,y``

A manifest (YAML or JSON) names the three files, the feature order, the time
interval and the resampling grid size. With ``n_grid: null`` every sample
must already share one set of time points per feature, which are kept as is.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .errors import IngestionError, ShapeError
from .fda import FunctionalSample, SpatialDataset, TimeGrid


@dataclass
class DatasetManifest:
    curves: Path
    locations: Path
    responses: Optional[Path] = None
    features: Optional[list] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    n_grid: Optional[int] = None
    dim: Optional[int] = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise IngestionError(f"{path}: cannot read manifest: {exc}") from None
        if not isinstance(raw, dict):
            raise IngestionError(f"{path}: manifest must be a mapping")
        return cls.from_dict(raw, base=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base=Path(".")) -> "DatasetManifest":
        base = Path(base)
        known = {"curves", "locations", "responses", "features", "lower", "upper", "n_grid", "dim"}
        for key in ("curves", "locations"):
            if key not in raw:
                raise IngestionError(f"manifest lacks {key!r}")

        def resolve(p):
            return None if p is None else (base / p if not Path(p).is_absolute() else Path(p))

        return cls(
            resolve(raw["curves"]),
            resolve(raw["locations"]),
            resolve(raw.get("responses")),
            raw.get("features"),
            raw.get("lower"),
            raw.get("upper"),
            raw.get("n_grid"),
            raw.get("dim"),
            {k: v for k, v in raw.items() if k not in known},
        )


def _num(text: str, path, line: int, what: str) -> float:
    try:
        val = float(text)
    except (TypeError, ValueError):
        raise IngestionError(f"{path}:{line}: {what} {text!r} is not a number") from None
    if not math.isfinite(val):
        raise IngestionError(f"{path}:{line}: {what} is not finite ({text})")
    return val


def _maybe_int_ids(ids):
    try:
        conv = [int(i) for i in ids]
    except ValueError:
        return tuple(ids)
    if all(str(c) == i for c, i in zip(conv, ids)):
        return tuple(conv)
    return tuple(ids)


def _reader(path):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"{path}: {exc}") from None
    return fh


def read_locations(path):
    with _reader(path) as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if not header or header[0] != "sample_id" or len(header) < 2:
            raise IngestionError(f"{path}:1: expected header sample_id,coord_1,...")
        out = {}
        for line, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            if row[0] in out:
                raise IngestionError(f"{path}:{line}: duplicate sample_id {row[0]!r}")
            out[row[0]] = [_num(v, path, line, "coordinate") for v in row[1:]]
    return out


def read_responses(path):
    with _reader(path) as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header != ["sample_id", "y"]:
            raise IngestionError(f"{path}:1: expected header sample_id,y")
        out = {}
        for line, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise IngestionError(f"{path}:{line}: expected 2 fields")
            if row[0] in out:
                raise IngestionError(f"{path}:{line}: duplicate sample_id {row[0]!r}")
            out[row[0]] = _num(row[1], path, line, "response")
    return out


def read_curves(path):
    """``{sample_id: {feature_id: (times, values)}}`` sorted by time, plus feature order."""
    raw = defaultdict(lambda: defaultdict(list))
    seen = {}
    features = []
    with _reader(path) as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header != ["sample_id", "feature_id", "time", "value"]:
            raise IngestionError(f"{path}:1: expected header sample_id,feature_id,time,value")
        for line, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise IngestionError(f"{path}:{line}: expected 4 fields, got {len(row)}")
            sid, fid = row[0], row[1]
            t = _num(row[2], path, line, "time")
            v = _num(row[3], path, line, "value")
            key = (sid, fid, t)
            if key in seen:
                raise IngestionError(
                    f"{path}:{line}: duplicate (sample, feature, time) {key}, first seen on line {seen[key]}"
                )
            seen[key] = line
            if fid not in features:
                features.append(fid)
            raw[sid][fid].append((t, v))
    out = {}
    for sid, feats in raw.items():
        out[sid] = {}
        for fid, obs in feats.items():
            obs.sort()
            out[sid][fid] = (np.array([o[0] for o in obs]), np.array([o[1] for o in obs]))
    return out, features


def _bound(value, feature, default):
    # interval ends may be one number for all features or a per-feature mapping
    if isinstance(value, dict):
        value = value.get(feature)
    if value is None:
        return default
    try:
        return float(value)
    except (TypeError, ValueError):
        raise IngestionError(f"manifest: interval bound {value!r} is not a number") from None


def ingest(manifest) -> SpatialDataset:
    """Read, validate and resample a dataset described by a manifest."""
    if not isinstance(manifest, DatasetManifest):
        manifest = DatasetManifest.load(manifest)
    curves, seen_features = read_curves(manifest.curves)
    locs = read_locations(manifest.locations)
    resp = read_responses(manifest.responses) if manifest.responses is not None else None
    features = [str(f) for f in manifest.features] if manifest.features else seen_features
    ids = list(locs)
    for sid in ids:
        if sid not in curves:
            raise IngestionError(f"{manifest.curves}: no curves for sample_id {sid!r}")
        if resp is not None and sid not in resp:
            raise IngestionError(f"{manifest.responses}: no response for sample_id {sid!r}")
    for sid in curves:
        if sid not in locs:
            raise IngestionError(f"{manifest.locations}: no location for sample_id {sid!r}")
    if resp is not None:
        for sid in resp:
            if sid not in locs:
                raise IngestionError(f"{manifest.locations}: no location for sample_id {sid!r}")
    dims = {len(v) for v in locs.values()}
    if manifest.dim is not None and dims != {manifest.dim}:
        raise IngestionError(f"{manifest.locations}: expected {manifest.dim} coordinates")

    grids = []
    for fid in features:
        for sid in ids:
            if fid not in curves[sid]:
                raise IngestionError(f"{manifest.curves}: sample {sid!r} lacks feature {fid!r}")
            if curves[sid][fid][0].size < 2:
                raise IngestionError(f"{manifest.curves}: sample {sid!r} feature {fid!r} has < 2 observations")
        all_t = np.concatenate([curves[sid][fid][0] for sid in ids])
        lo = _bound(manifest.lower, fid, float(all_t.min()))
        hi = _bound(manifest.upper, fid, float(all_t.max()))
        if all_t.min() < lo or all_t.max() > hi:
            raise IngestionError(f"{manifest.curves}: feature {fid!r} has times outside [{lo}, {hi}]")
        if manifest.n_grid is None:
            t0 = curves[ids[0]][fid][0]
            for sid in ids:
                if not np.array_equal(curves[sid][fid][0], t0):
                    raise IngestionError(
                        f"{manifest.curves}: feature {fid!r} is observed on different times across "
                        "samples; set n_grid to resample"
                    )
            grids.append(TimeGrid(t0, lo, hi))
        else:
            grids.append(TimeGrid.uniform(lo, hi, int(manifest.n_grid)))

    samples = []
    for sid in ids:
        vals = []
        for fid, g in zip(features, grids):
            t, v = curves[sid][fid]
            vals.append(v if manifest.n_grid is None else np.interp(g.points, t, v))
        samples.append(FunctionalSample(tuple(grids), tuple(vals)))
    y = np.array([resp[sid] for sid in ids]) if resp is not None else np.zeros(len(ids))
    try:
        return SpatialDataset(tuple(samples), y, np.array([locs[sid] for sid in ids]), _maybe_int_ids(ids))
    except ShapeError as exc:
        raise IngestionError(str(exc)) from None


def read_samples(curves_path, locations_path, grids, features=None):
    """Covariates and locations for prediction, resampled onto given grids."""
    curves, seen = read_curves(curves_path)
    locs = read_locations(locations_path)
    features = [str(f) for f in features] if features else seen
    ids = list(locs)
    samples = []
    for sid in ids:
        if sid not in curves:
            raise IngestionError(f"{curves_path}: no curves for sample_id {sid!r}")
        vals = []
        for fid, g in zip(features, grids):
            if fid not in curves[sid]:
                raise IngestionError(f"{curves_path}: sample {sid!r} lacks feature {fid!r}")
            t, v = curves[sid][fid]
            vals.append(v if np.array_equal(t, g.points) else np.interp(g.points, t, v))
        samples.append(FunctionalSample(tuple(grids), tuple(vals)))
    return _maybe_int_ids(ids), samples, np.array([locs[sid] for sid in ids])


def write_dataset(dataset: SpatialDataset, out_dir, feature_names=None) -> Path:
    """Write curves/locations/responses CSVs and ``manifest.yaml`` into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        names = feature_names or [f"x{r + 1}" for r in range(dataset.n_features)]
        with open(out / "curves.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "feature_id", "time", "value"])
            for sid, s in zip(dataset.ids, dataset.samples):
                for name, g, v in zip(names, s.grids, s.values):
                    for t, x in zip(g.points, v):
                        w.writerow([sid, name, repr(float(t)), repr(float(x))])
        with open(out / "locations.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id"] + [f"coord_{j + 1}" for j in range(dataset.dim)])
            for sid, loc in zip(dataset.ids, dataset.locations):
                w.writerow([sid] + [repr(float(c)) for c in loc])
        with open(out / "responses.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "y"])
            for sid, y in zip(dataset.ids, dataset.responses):
                w.writerow([sid, repr(float(y))])
        grids = dataset.samples[0].grids
        lowers = {n: g.lower for n, g in zip(names, grids)}
        uppers = {n: g.upper for n, g in zip(names, grids)}
        same = len(set(lowers.values())) == 1 and len(set(uppers.values())) == 1
        manifest = {
            "curves": "curves.csv",
            "locations": "locations.csv",
            "responses": "responses.csv",
            "features": list(names),
            "lower": grids[0].lower if same else lowers,
            "upper": grids[0].upper if same else uppers,
            "n_grid": None,
            "dim": dataset.dim,
        }
        path = out / "manifest.yaml"
        path.write_text(yaml.safe_dump(manifest, sort_keys=False), encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"{out}: cannot write dataset: {exc}") from None
    return path


def save_model(model, path, features=None):
    d = model.to_dict()
    if features is not None:
        d["features"] = list(features)
    Path(path).write_text(json.dumps(d), encoding="utf-8")


def load_model(path):
    from .models import TrainedModel

    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestionError(f"{path}: cannot read model: {exc}") from None
    return TrainedModel.from_dict(d), d.get("features")
