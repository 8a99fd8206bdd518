"""Mapping clusters to driving styles and drivers to clusters.

Clusters are ranked by a volatility score: the mean of the scaled centroid
coordinates after orienting every feature so that larger means more volatile
(the deceleration-side measures dv5, dv10 and dv13 point the other way and are
negated). Ascending score maps onto (conservative, normal) for k=2 and
(conservative, normal, aggressive) for k=3. A manual style map file overrides
the automatic assignment.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cluster import ClusterModel
from .errors import DataError, IncompleteMap, IoFailure, UnsupportedK

STYLES = ("conservative", "normal", "aggressive")

# +1 where larger values mean more volatile driving, -1 for dv5, dv10, dv13
ORIENTATION = np.array([1, 1, 1, 1, -1, 1, 1, 1, 1, -1, 1, 1, -1], dtype=float)


@dataclass
class StyleMap:
    cluster_styles: dict[int, str]
    score_used: dict[int, float]
    method: str  # "auto" or "manual"


@dataclass(frozen=True)
class LabeledDriver:
    recording_id: int
    track_id: int
    cluster_id: int
    style: str


@dataclass
class StyleAssignment:
    """Style per labeled driver plus counts/percentages over the labeled set."""

    entries: list[LabeledDriver]
    excluded: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        c = {s: 0 for s in STYLES}
        for e in self.entries:
            c[e.style] += 1
        return c

    @property
    def percentages(self) -> dict[str, float]:
        total = len(self.entries)
        if total == 0:
            return {s: 0.0 for s in STYLES}
        return {s: 100.0 * n / total for s, n in self.counts.items()}

    def __len__(self) -> int:
        return len(self.entries)


def score_clusters(model: ClusterModel) -> np.ndarray:
    """Volatility score per cluster: mean of orientation-adjusted coordinates."""
    if model.centroids.shape[1] != ORIENTATION.size:
        raise ValueError("model centroids do not match the 13-measure layout")
    return (model.centroids * ORIENTATION).mean(axis=1)


def _ranked_clusters(scores: np.ndarray, populations: np.ndarray) -> list[int]:
    """Cluster ids in ascending score order.

    Equal scores: the smaller cluster takes the more extreme rank (distance
    from the middle rank, lower rank first on equal distance), with cluster id
    as the final tie-break.
    """
    k = scores.size
    order = sorted(range(k), key=lambda c: (scores[c], c))
    ranks: list[int] = [-1] * k
    mid = (k - 1) / 2.0
    i = 0
    while i < k:
        j = i
        while j + 1 < k and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        group = order[i:j + 1]
        if len(group) == 1:
            ranks[i] = group[0]
        else:
            group_ranks = sorted(range(i, j + 1), key=lambda r: (-abs(r - mid), r))
            by_pop = sorted(group, key=lambda c: (populations[c], c))
            for rank, c in zip(group_ranks, by_pop):
                ranks[rank] = c
        i = j + 1
    return ranks


def assign_styles(model: ClusterModel, scores: np.ndarray,
                  manual: dict[int, str] | None = None) -> StyleMap:
    """Build the cluster -> style map, automatically or from a manual override."""
    k = model.k
    score_used = {c: float(scores[c]) for c in range(k)}
    if manual is not None:
        if k > len(STYLES):
            raise UnsupportedK(f"no style set of size {k}")
        style_set = set(STYLES[:k])
        missing = [c for c in range(k) if c not in manual]
        if missing:
            raise IncompleteMap(f"manual style map misses cluster(s) {missing}")
        extra = [c for c in manual if not 0 <= c < k]
        if extra:
            raise IncompleteMap(f"manual style map names unknown cluster(s) {sorted(extra)}")
        if set(manual.values()) != style_set:
            raise IncompleteMap(
                f"manual style map must use each of {sorted(style_set)} exactly once")
        return StyleMap(cluster_styles={c: manual[c] for c in range(k)},
                        score_used=score_used, method="manual")
    if k not in (2, 3):
        raise UnsupportedK(f"automatic style naming needs k in {{2, 3}}, got {k}")
    ranked = _ranked_clusters(np.asarray(scores, dtype=float), model.cluster_sizes())
    styles = STYLES[:k]
    return StyleMap(cluster_styles={c: styles[r] for r, c in enumerate(ranked)},
                    score_used=score_used, method="auto")


def label_drivers(model: ClusterModel, style_map: StyleMap,
                  ids: list[tuple[int, int]],
                  excluded: list[tuple[int, int, str]] | None = None) -> StyleAssignment:
    """Attach a style to every clustered driver.

    `ids` holds (recording_id, track_id) per matrix row, aligned with
    model.assignments. Excluded drivers ride along for reporting but never
    enter the percentages.
    """
    if len(ids) != model.assignments.size:
        raise ValueError("ids and assignments length mismatch")
    missing = sorted({int(c) for c in np.unique(model.assignments)}
                     - set(style_map.cluster_styles))
    if missing:
        raise IncompleteMap(f"style map misses cluster(s) {missing}")
    entries = [
        LabeledDriver(recording_id=rid, track_id=tid, cluster_id=int(c),
                      style=style_map.cluster_styles[int(c)])
        for (rid, tid), c in zip(ids, model.assignments)
    ]
    entries.sort(key=lambda e: (e.recording_id, e.track_id))
    return StyleAssignment(entries=entries, excluded=list(excluded or []))


def load_style_map_file(path) -> dict[int, str]:
    """Read a manual override file: a JSON object {clusterId: style}."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read style map {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"style map {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError(f"style map {path} must be an object of clusterId: style")
    out = {}
    for key, value in raw.items():
        try:
            cid = int(key)
        except ValueError as exc:
            raise DataError(f"style map {path}: cluster id '{key}' is not an integer") from exc
        if value not in STYLES:
            raise DataError(f"style map {path}: unknown style '{value}'")
        out[cid] = value
    return out


def write_style_map_file(style_map: StyleMap, path) -> Path:
    payload = {
        "method": style_map.method,
        "clusters": {str(c): s for c, s in sorted(style_map.cluster_styles.items())},
        "scores": {str(c): v for c, v in sorted(style_map.score_used.items())},
    }
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


ASSIGNMENTS_CSV_HEADER = ["trackId", "recordingId", "clusterId", "style"]


def write_assignments_csv(path, assignment: StyleAssignment) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ASSIGNMENTS_CSV_HEADER)
        for e in assignment.entries:
            w.writerow([e.track_id, e.recording_id, e.cluster_id, e.style])
    return path


def read_assignments_csv(path) -> list[LabeledDriver]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != ASSIGNMENTS_CSV_HEADER:
            raise DataError(f"{path} is not an assignments table")
        out = []
        for row in r:
            if row[3] not in STYLES:
                raise DataError(f"{path}: unknown style '{row[3]}'")
            out.append(LabeledDriver(recording_id=int(row[1]), track_id=int(row[0]),
                                     cluster_id=int(row[2]), style=row[3]))
    return out
