"""Dataset export and import.

Two parallel on-disk forms per table:

* ``<table>.csv`` is the agent-facing view: RFC 4180, header row, an
  ISO-8601 UTC ``timestamp`` column, one column per profile attribute
  and payload key.  Ground-truth state labels are withheld.
* ``<table>.jsonl`` is the full-fidelity archive (one record per line,
  state labels included), alongside ``dataset.json`` (name, epoch
  index, entity profiles) and ``manifests.json`` (injection ground
  truth).  ``import_dataset`` rebuilds an identical Dataset from these.

All writers emit deterministic bytes for a given dataset: keys and
rows are sorted, floats round-trip through repr.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

from .core import (Dataset, EntityRef, GlobalWindow, MeasurementRecord,
                   StaticProfile, TimeSeries)
from .errors import SpecError
from .patterns import AffectedSlice, BaselineStat, IncidentManifest

ISO_FMT = "%Y-%m-%dT%H:%M:%S"


def format_timestamp(t_ms: int) -> str:
    dt = datetime.fromtimestamp(t_ms // 1000, tz=timezone.utc)
    return f"{dt.strftime(ISO_FMT)}.{t_ms % 1000:03d}Z"


def parse_timestamp(text: str) -> int:
    dt = datetime.strptime(text[:19], ISO_FMT).replace(tzinfo=timezone.utc)
    millis = int(text[20:23]) if len(text) > 20 and text[19] == "." else 0
    return int(dt.timestamp()) * 1000 + millis


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _table_columns(series_list) -> tuple[list[str], list[str]]:
    attrs: set[str] = set()
    keys: set[str] = set()
    for series in series_list:
        attrs.update(series.profile.values)
        for rec in series.records:
            keys.update(rec.payload)
    return sorted(attrs), sorted(keys)


def write_table_csv(series_list, path) -> None:
    attrs, keys = _table_columns(series_list)
    header = ["entity_id", "entity_type", "timestamp"] + attrs + keys
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for series in series_list:
            profile_cells = [_cell(series.profile.values.get(a))
                             for a in attrs]
            for rec in series.records:
                row = [rec.entity_id, series.entity.entity_type,
                       format_timestamp(rec.timestamp)]
                row += profile_cells
                row += [_cell(rec.payload.get(k)) for k in keys]
                writer.writerow(row)


def write_table_jsonl(series_list, path) -> None:
    lines = []
    for series in series_list:
        for rec in series.records:
            lines.append(json.dumps(
                {"entity_id": rec.entity_id, "timestamp": rec.timestamp,
                 "payload": dict(sorted(rec.payload.items())),
                 "state_label": rec.state_label},
                sort_keys=True, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""),
                          encoding="utf-8")


def _window_json(w: GlobalWindow) -> list[int]:
    return [w.start_ms, w.end_ms]


def _manifest_json(m: IncidentManifest) -> dict:
    return {
        "incident_id": m.incident_id,
        "kind": m.kind,
        "magnitude": m.magnitude,
        "affected": [{"entity_id": a.entity_id, "keys": list(a.keys),
                      "window": _window_json(a.window)} for a in m.affected],
        "baseline_window": _window_json(m.baseline_window),
        "baseline_stats": [{"entity_id": s.entity_id, "key": s.key,
                            "mean": s.mean, "std": s.std}
                           for s in m.baseline_stats],
    }


def _manifest_from_json(obj: dict) -> IncidentManifest:
    return IncidentManifest(
        incident_id=obj["incident_id"],
        kind=obj["kind"],
        magnitude=obj["magnitude"],
        affected=tuple(AffectedSlice(a["entity_id"], tuple(a["keys"]),
                                     GlobalWindow(*a["window"]))
                       for a in obj["affected"]),
        baseline_window=GlobalWindow(*obj["baseline_window"]),
        baseline_stats=tuple(BaselineStat(s["entity_id"], s["key"],
                                          s["mean"], s["std"])
                             for s in obj["baseline_stats"]),
    )


def export_dataset(dataset: Dataset, out_dir) -> list[str]:
    """Write all dataset files into out_dir; returns written names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for table in sorted(dataset.tables):
        series_list = dataset.tables[table]
        write_table_csv(series_list, out / f"{table}.csv")
        write_table_jsonl(series_list, out / f"{table}.jsonl")
        written += [f"{table}.csv", f"{table}.jsonl"]

    meta = {
        "name": dataset.name,
        "epochs": [{"epoch_id": eid, "window": _window_json(w)}
                   for eid, w in dataset.epoch_index],
        "tables": {
            table: [{"entity_id": s.entity.entity_id,
                     "entity_type": s.entity.entity_type,
                     "profile": dict(sorted(s.profile.values.items()))}
                    for s in dataset.tables[table]]
            for table in sorted(dataset.tables)},
    }
    (out / "dataset.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    (out / "manifests.json").write_text(
        json.dumps([_manifest_json(m) for m in dataset.manifests],
                   sort_keys=True, indent=2) + "\n", encoding="utf-8")
    written += ["dataset.json", "manifests.json"]
    return written


def import_dataset(in_dir) -> Dataset:
    """Rebuild a Dataset from export_dataset output."""
    src = Path(in_dir)
    meta_path = src / "dataset.json"
    if not meta_path.exists():
        raise SpecError(f"no dataset.json under {src}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    tables: dict[str, tuple[TimeSeries, ...]] = {}
    for table, entities in meta["tables"].items():
        by_id: dict[str, list[MeasurementRecord]] = {
            e["entity_id"]: [] for e in entities}
        jsonl = src / f"{table}.jsonl"
        if jsonl.exists():
            for line in jsonl.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                obj = json.loads(line)
                by_id[obj["entity_id"]].append(MeasurementRecord(
                    obj["entity_id"], obj["timestamp"], obj["payload"],
                    obj.get("state_label")))
        series = []
        for e in entities:
            ref = EntityRef(e["entity_id"], e["entity_type"])
            series.append(TimeSeries(ref, StaticProfile(e["profile"]),
                                     tuple(by_id[e["entity_id"]])))
        tables[table] = tuple(series)
    epoch_index = tuple((e["epoch_id"], GlobalWindow(*e["window"]))
                        for e in meta["epochs"])
    manifests: tuple[IncidentManifest, ...] = ()
    man_path = src / "manifests.json"
    if man_path.exists():
        manifests = tuple(_manifest_from_json(o) for o in
                          json.loads(man_path.read_text(encoding="utf-8")))
    return Dataset(meta["name"], tables, epoch_index, manifests)
