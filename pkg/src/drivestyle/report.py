"""Run report assembly and deterministic serialization.

Every emitted file is byte-identical across reruns with the same inputs:
JSON uses sorted keys, CSV cells use shortest round-trip float strings, and
percentages are formatted to two decimals with half-away-from-zero rounding.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from decimal import Decimal, ROUND_HALF_UP
from pathlib import Path

import numpy as np

from .cluster import ClusterModel, Standardizer, centroid_in_raw_units, ElbowCurve
from .errors import IoFailure
from .features import MEASURE_NAMES
from .label import STYLES, StyleAssignment, StyleMap

REPORT_JSON = "report.json"
CENTERS_SCALED_CSV = "centers_scaled.csv"
CENTERS_RAW_CSV = "centers_raw.csv"
DISTRIBUTION_CSV = "distribution.csv"
ELBOW_CSV = "elbow.csv"

FORMATS = ("json", "csv")


def format_percentage(value: float) -> str:
    """Two decimals, ties rounded away from zero (e.g. 0.037 -> '0.04')."""
    return str(Decimal(repr(float(value))).quantize(Decimal("0.01"),
                                                    rounding=ROUND_HALF_UP))


@dataclass
class CentersTable:
    measures: tuple = MEASURE_NAMES
    columns: list[dict] = field(default_factory=list)
    # each column: clusterId, style, sampleSize, scaled[13], raw[13]


def render_centers_table(model: ClusterModel, standardizer: Standardizer,
                         style_map: StyleMap) -> CentersTable:
    """Centroid table, one column per cluster, ordered conservative to aggressive."""
    sizes = model.cluster_sizes()
    ordered = sorted(style_map.cluster_styles.items(),
                     key=lambda kv: (STYLES.index(kv[1]), kv[0]))
    table = CentersTable()
    for cid, style in ordered:
        table.columns.append({
            "clusterId": int(cid),
            "style": style,
            "sampleSize": int(sizes[cid]),
            "scaled": [float(v) for v in model.centroids[cid]],
            "raw": [float(v) for v in centroid_in_raw_units(model, standardizer, cid)],
        })
    return table


@dataclass
class DistributionTable:
    """Counts and formatted percentages per style for the three driver sets."""

    partitions: dict = field(default_factory=dict)
    # partition name -> {"counts": {style: int}, "percentages": {style: str}, "total": int}


def _partition_cell(assignment: StyleAssignment) -> dict:
    counts = assignment.counts
    total = len(assignment)
    percentages = {
        s: format_percentage(100.0 * counts[s] / total) if total else format_percentage(0.0)
        for s in STYLES
    }
    return {"counts": {s: counts[s] for s in STYLES},
            "percentages": percentages, "total": total}


def render_distribution_table(all_drivers: StyleAssignment,
                              no_interaction: StyleAssignment,
                              interaction: StyleAssignment) -> DistributionTable:
    return DistributionTable(partitions={
        "all": _partition_cell(all_drivers),
        "noInteraction": _partition_cell(no_interaction),
        "interaction": _partition_cell(interaction),
    })


@dataclass
class RunReport:
    config: dict
    elbow: list[dict]  # [{"k":, "distortion":, "iterations":}]
    models: dict  # str(k) -> summary dict
    centers: CentersTable
    distribution: DistributionTable
    style_map: dict
    exclusions: list[dict]  # [{"recordingId":, "trackId":, "reason":}]


def build_report(config: dict, elbow: ElbowCurve, models: dict,
                 centers: CentersTable, distribution: DistributionTable,
                 style_map: dict, exclusions) -> RunReport:
    return RunReport(
        config=dict(config),
        elbow=[{"k": e.k, "distortion": e.distortion, "iterations": e.iterations}
               for e in elbow.entries],
        models=models,
        centers=centers,
        distribution=distribution,
        style_map=style_map,
        exclusions=[{"recordingId": rid, "trackId": tid, "reason": reason}
                    for rid, tid, reason in exclusions],
    )


def _report_dict(report: RunReport) -> dict:
    return {
        "centers": {"measures": list(report.centers.measures),
                    "columns": report.centers.columns},
        "config": report.config,
        "distribution": report.distribution.partitions,
        "elbow": report.elbow,
        "exclusions": report.exclusions,
        "models": report.models,
        "styleMap": report.style_map,
    }


def _write_centers_csv(path: Path, table: CentersTable, kind: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["measure"] + [c["style"] for c in table.columns])
        w.writerow(["cluster_id"] + [c["clusterId"] for c in table.columns])
        for i, name in enumerate(table.measures):
            w.writerow([name] + [repr(c[kind][i]) for c in table.columns])
        w.writerow(["sample_size"] + [c["sampleSize"] for c in table.columns])


def _write_distribution_csv(path: Path, table: DistributionTable) -> None:
    parts = ("all", "noInteraction", "interaction")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([
            "style",
            "all_count", "all_percentage",
            "no_interaction_count", "no_interaction_percentage",
            "interaction_count", "interaction_percentage",
        ])
        for style in STYLES:
            row = [style]
            for p in parts:
                cell = table.partitions[p]
                row += [cell["counts"][style], cell["percentages"][style]]
            w.writerow(row)
        totals = ["total"]
        for p in parts:
            totals += [table.partitions[p]["total"], ""]
        w.writerow(totals)


def write_elbow_csv(path, elbow_rows) -> Path:
    """elbow_rows: iterable of dicts or ElbowEntry-like with k/distortion/iterations."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "distortion", "iterations"])
        for row in elbow_rows:
            if isinstance(row, dict):
                k, d, it = row["k"], row["distortion"], row["iterations"]
            else:
                k, d, it = row.k, row.distortion, row.iterations
            w.writerow([int(k), repr(float(d)), int(it)])
    return path


def read_elbow_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r, None)
        return [{"k": int(row[0]), "distortion": float(row[1]),
                 "iterations": int(row[2])} for row in r]


def emit(report: RunReport, out_dir, formats=FORMATS) -> list[Path]:
    """Write the report files; returns the paths written."""
    out = Path(out_dir)
    written: list[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            path = out / REPORT_JSON
            with open(path, "w") as fh:
                json.dump(_report_dict(report), fh, sort_keys=True, indent=2)
                fh.write("\n")
            written.append(path)
        if "csv" in formats:
            scaled = out / CENTERS_SCALED_CSV
            _write_centers_csv(scaled, report.centers, "scaled")
            written.append(scaled)
            raw = out / CENTERS_RAW_CSV
            _write_centers_csv(raw, report.centers, "raw")
            written.append(raw)
            dist = out / DISTRIBUTION_CSV
            _write_distribution_csv(dist, report.distribution)
            written.append(dist)
            written.append(write_elbow_csv(out / ELBOW_CSV, report.elbow))
    except OSError as exc:
        raise IoFailure(f"cannot write report to {out}: {exc}") from exc
    return written
