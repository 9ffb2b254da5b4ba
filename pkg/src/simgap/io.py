"""JSON Lines scenario files and report output.

One scenario per line::

    {"scenario_id": "q1", "family": "multinomial", "n": 100, "k": 200,
     "p_hat": [0.45, 0.3, 0.25], "q_hat": [0.5, 0.3, 0.2]}

Instead of ``p_hat``/``q_hat``/``q_hat_2`` a line may carry raw
``gt_samples``/``sim_samples``/``sim2_samples`` or category
``gt_counts``/``sim_counts``/``sim2_counts``; ``n`` (and ``k``) may then be
omitted. Bernoulli categories are ordered (success, failure).
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import os
from datetime import datetime, timezone

import numpy as np

from .domain import BoundedScalar, Dataset, Empirical1D, Finding, ScenarioRecord, Simplex, validate_dataset
from .exceptions import DatasetInvalid, SchemaError

FAMILIES = ("bounded", "bernoulli", "multinomial", "empirical1d")
RENORMALIZE_TOL = 1e-6

_SLOTS = (("p_hat", "gt_samples", "gt_counts", "n"),
          ("q_hat", "sim_samples", "sim_counts", "k"),
          ("q_hat_2", "sim2_samples", "sim2_counts", "k_2"))
_KEYS = {"scenario_id", "family", "domain", "sigma", "d"} | {k for slot in _SLOTS for k in slot}


def _simplex(values, line, what):
    arr = [float(v) for v in values]
    total = math.fsum(arr)
    if any(v < 0 for v in arr) or abs(total - 1.0) > RENORMALIZE_TOL:
        raise SchemaError(f"{what} must be a probability vector (sum {total!r})", line)
    if abs(total - 1.0) > 1e-12:
        arr = [v / total for v in arr]
    return Simplex(tuple(arr))


def _point(obj, family, slot, line):
    """(ParamPoint, implied sample size or None) for one estimate slot."""
    est_key, samples_key, counts_key, _ = slot
    present = [k for k in (est_key, samples_key, counts_key) if k in obj]
    if len(present) > 1:
        raise SchemaError(f"give only one of {present}", line)
    if not present:
        return None, None
    key = present[0]
    value = obj[key]
    try:
        point, size = _point_inner(obj, family, slot, key, value, line)
    except SchemaError:
        raise
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{key}: {exc}", line) from None
    if isinstance(point, Simplex):
        want = 2 if family == "bernoulli" else obj.get("d", point.d)
        if point.d != want:
            raise SchemaError(f"{key} has {point.d} categories, expected {want}", line)
    return point, size


def _point_inner(obj, family, slot, key, value, line):
    est_key, samples_key, counts_key, _ = slot
    if family == "bounded":
        low, high = obj.get("domain", (-1.0, 1.0))
        if key == est_key:
            return BoundedScalar(float(value), low, high), None
        if key == samples_key:
            x = np.asarray(value, dtype=float)
            if x.ndim != 1 or x.size == 0:
                raise SchemaError(f"{key} must be a nonempty list", line)
            if x.min() < low or x.max() > high:
                raise SchemaError(f"{key} outside domain [{low}, {high}]", line)
            return BoundedScalar(float(x.mean()), low, high), int(x.size)
        raise SchemaError(f"family bounded does not take {key}", line)
    if family in ("bernoulli", "multinomial"):
        d = 2 if family == "bernoulli" else obj.get("d")
        if key == est_key:
            if family == "bernoulli" and not isinstance(value, list):
                p = float(value)
                return Simplex((p, 1.0 - p)), None
            return _simplex(value, line, key), None
        if key == counts_key:
            counts = np.asarray(value, dtype=float)
            if np.any(counts != np.round(counts)) or np.any(counts < 0) or counts.sum() <= 0:
                raise SchemaError(f"{key} must be nonnegative integer counts", line)
            return Simplex.from_counts(counts), int(counts.sum())
        x = np.asarray(value)
        if family == "bernoulli":
            # samples are 1 (success) or 0 (failure)
            if not np.isin(x, (0, 1)).all():
                raise SchemaError(f"{key} must hold 0/1 outcomes", line)
            counts = np.array([np.sum(x == 1), np.sum(x == 0)])
        else:
            if d is None:
                raise SchemaError("multinomial samples need the number of categories 'd'", line)
            if not np.issubdtype(x.dtype, np.integer) or x.min() < 0 or x.max() >= d:
                raise SchemaError(f"{key} must hold category indices in 0..{d - 1}", line)
            counts = np.bincount(x, minlength=d)
        return Simplex.from_counts(counts), int(x.size)
    sigma = obj.get("sigma")
    if key == counts_key:
        raise SchemaError(f"family empirical1d does not take {key}", line)
    x = [float(v) for v in value]
    return Empirical1D.from_samples(x, sigma), (len(x) if key == samples_key else None)


def parse_record(obj, line=None):
    """ScenarioRecord and family name from one decoded JSON object."""
    if not isinstance(obj, dict):
        raise SchemaError("each line must be a JSON object", line)
    unknown = sorted(set(obj) - _KEYS)
    if unknown:
        raise SchemaError(f"unknown keys {unknown}", line)
    for key in ("scenario_id", "family"):
        if key not in obj:
            raise SchemaError(f"missing {key!r}", line)
    family = obj["family"]
    if family not in FAMILIES:
        raise SchemaError(f"family must be one of {FAMILIES}, got {family!r}", line)
    sid = obj["scenario_id"]
    if not isinstance(sid, str):
        raise SchemaError("scenario_id must be a string", line)
    points, sizes = [], []
    for slot in _SLOTS:
        point, implied = _point(obj, family, slot, line)
        size_key = slot[3]
        size = obj.get(size_key, implied)
        if size_key in obj and implied is not None and obj[size_key] != implied:
            raise SchemaError(f"{size_key}={obj[size_key]} disagrees with {implied} raw samples", line)
        if size is not None and (isinstance(size, bool) or not isinstance(size, int)):
            raise SchemaError(f"{size_key} must be an integer", line)
        points.append(point)
        sizes.append(size)
    for (est, _, _, size_key), point, size in zip(_SLOTS[:2], points[:2], sizes[:2]):
        if point is None:
            raise SchemaError(f"missing {est!r} (or its samples/counts)", line)
        if size is None:
            raise SchemaError(f"missing {size_key!r}", line)
    if points[2] is None and sizes[2] is not None:
        raise SchemaError("k_2 given without a second simulator estimate", line)
    k_2 = sizes[2] if points[2] is not None and sizes[2] != sizes[1] else None
    return ScenarioRecord(sid, points[0], sizes[0], points[1], sizes[1], points[2], k_2), family


def ingest(path, k_uniform=True) -> Dataset:
    """Read and validate a JSON Lines scenario file."""
    records, families = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", lineno) from None
            rec, family = parse_record(obj, lineno)
            records.append(rec)
            families.append(family)
    data = Dataset(tuple(records), k_uniform)
    findings = validate_dataset(data)
    findings += [Finding(i, r.scenario_id, f"family {f!r} differs from first record's {families[0]!r}")
                 for i, (r, f) in enumerate(zip(records, families)) if f != families[0]]
    if findings:
        raise DatasetInvalid(findings)
    return data


def _family_of(point):
    if isinstance(point, BoundedScalar):
        return "bounded"
    if isinstance(point, Simplex):
        return "bernoulli" if point.d == 2 else "multinomial"
    return "empirical1d"


def _estimate_json(point):
    if isinstance(point, BoundedScalar):
        return point.value
    if isinstance(point, Simplex):
        return list(point.probs)
    return list(point.samples)


def record_to_json(rec: ScenarioRecord) -> dict:
    out = {"scenario_id": rec.scenario_id, "family": _family_of(rec.p_hat)}
    if isinstance(rec.p_hat, BoundedScalar):
        out["domain"] = [rec.p_hat.low, rec.p_hat.high]
    if isinstance(rec.p_hat, Empirical1D) and rec.p_hat.sigma is not None:
        out["sigma"] = rec.p_hat.sigma
    out.update({"n": rec.n, "k": rec.k, "p_hat": _estimate_json(rec.p_hat), "q_hat": _estimate_json(rec.q_hat)})
    if rec.q_hat_2 is not None:
        out["q_hat_2"] = _estimate_json(rec.q_hat_2)
    if rec.k_2 is not None:
        out["k_2"] = rec.k_2
    return out


def dumps_dataset(d: Dataset) -> str:
    # json writes floats with repr, which round-trips exactly
    return "".join(json.dumps(record_to_json(r)) + "\n" for r in d.records)


def write_dataset(d: Dataset, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_dataset(d))


def dataset_hash(d: Dataset) -> str:
    return hashlib.sha256(dumps_dataset(d).encode()).hexdigest()


# ---------------------------------------------------------------------------
# reports


def fmt(x):
    """CSV cell: floats with 17 significant digits, booleans as true/false."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def csv_text(columns, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _write(out_dir, name, text):
    with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_json(out_dir, name, payload, timestamp=True):
    payload = _jsonable(payload)
    if timestamp:
        payload.setdefault("metadata", {})["timestamp"] = datetime.now(timezone.utc).isoformat()
    _write(out_dir, name, json.dumps(payload, indent=2) + "\n")


def calibration_summary(report) -> str:
    p = report.params
    s = report.summaries
    lines = [
        f"scenarios m = {p['m']}",
        f"gamma = {p.get('gamma')!r}, eta = {p['eta']!r}, loss = {p.get('loss')}, mode = {p.get('mode')}",
        f"AUC_cal = {s['auc_cal']!r}",
    ]
    lines += [f"CVaR_cal({a}) = {v!r}" for a, v in s["cvar_cal"].items()]
    vacuous = [r["alpha"] for r in report.coverage if r["vacuous"]]
    for r in report.coverage:
        if any(abs(r["alpha"] - a) < 1e-12 for a in (0.05, 0.1, 0.2, 0.5)):
            flag = "  (vacuous at this m)" if r["vacuous"] else ""
            lines.append(f"alpha = {r['alpha']!r}: gap <= {r['threshold']!r} on at least {r['clamped']!r} "
                         f"of new scenarios{flag}")
    if vacuous:
        lines.append(f"coverage bound is vacuous for {len(vacuous)} of {len(report.coverage)} grid alphas "
                     f"(alpha >= {min(vacuous)!r})")
    return "\n".join(lines) + "\n"


def emit_calibration(report, out_dir, run_config=None):
    os.makedirs(out_dir, exist_ok=True)
    payload = report.to_dict()
    payload["run_config"] = dict(run_config or {})
    write_json(out_dir, "report.json", payload)
    _write(out_dir, "curve.csv", csv_text(["alpha", "threshold", "raw", "clamped", "vacuous"], report.coverage))
    _write(out_dir, "calibrated_curve.csv", csv_text(["tau", "value"], report.calibrated))
    _write(out_dir, "summary.txt", calibration_summary(report))


def pairwise_summary(report) -> str:
    p = report.params
    lines = [f"scenarios m = {p['m']}", f"gamma = {p['gamma']!r}, eta = {p['eta']!r}, loss = {p['loss']}"]
    for r in report.table:
        if any(abs(r["alpha"] - a) < 1e-12 for a in (0.05, 0.1, 0.2, 0.5)):
            if r["certified"]:
                kind = "tie" if r["tie"] else "strict"
                flag = ", vacuous at this m" if r["vacuous"] else ""
                lines.append(f"alpha = {r['alpha']!r}: simulator 1 at least as good as simulator 2, certified on "
                             f">= {r['clamped']!r} of scenarios ({kind}, threshold {r['threshold']!r}{flag})")
            else:
                lines.append(f"alpha = {r['alpha']!r}: not certified (threshold {r['threshold']!r})")
    return "\n".join(lines) + "\n"


def emit_pairwise(report, out_dir, run_config=None):
    os.makedirs(out_dir, exist_ok=True)
    payload = report.to_dict()
    payload["run_config"] = dict(run_config or {})
    write_json(out_dir, "report.json", payload)
    cols = ["alpha", "threshold", "raw", "clamped", "vacuous", "certified", "strict", "tie"]
    _write(out_dir, "dominance.csv", csv_text(cols, report.table))
    _write(out_dir, "summary.txt", pairwise_summary(report))


def emit_band(band_report, out_dir, run_config=None, extra=None):
    os.makedirs(out_dir, exist_ok=True)
    payload = band_report.to_dict()
    payload.update(extra or {})
    payload["run_config"] = dict(run_config or {})
    write_json(out_dir, "report.json", payload)
    rows = [r._asdict() for r in band_report.rows]
    _write(out_dir, "band.csv", csv_text(["tau", "lo", "hi", "lo_at_minimum"], rows))
    lines = [f"gamma = {band_report.gamma!r}"]
    lines += [f"tau = {r.tau!r}: {r.lo!r} <= V(tau) <= {r.hi!r}" + ("  (lower index at minimum)" if r.lo_at_minimum
                                                                     else "") for r in band_report.rows]
    lines += [f"note: {n}" for n in band_report.notes]
    _write(out_dir, "summary.txt", "\n".join(lines) + "\n")


def emit_experiment(result, out_dir, run_config=None):
    os.makedirs(out_dir, exist_ok=True)
    write_json(out_dir, "report.json", {"experiment": result.name, "params": result.params, "rows": result.rows,
                                        "run_config": dict(run_config or {})})
    _write(out_dir, f"{result.name}.csv", csv_text(result.columns(), result.rows))


__all__ = [
    "csv_text", "dataset_hash", "dumps_dataset", "emit_band", "emit_calibration", "emit_experiment",
    "emit_pairwise", "ingest", "parse_record", "record_to_json", "write_dataset",
]
