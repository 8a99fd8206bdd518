"""Vehicle-VRU proximity detection and driver partitioning.

An interaction is a vehicle-VRU pair from the same recording whose planar
center distance is within `radius` on at least `min_overlap_frames` of their
shared frames. Candidate pruning can use a uniform spatial grid with cell size
equal to the radius; grid results equal the all-pairs computation exactly, so
either method may be used interchangeably.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, UnknownTrackId
from .ingest import Recording, TrackSeries, VEHICLE_CLASSES, VRU_CLASSES
from .label import StyleAssignment

_FRAME_BITS = 20
_CELL_BITS = 21
_CELL_OFFSET = 1 << (_CELL_BITS - 1)


@dataclass(frozen=True)
class InteractionParams:
    radius: float = 10.0
    min_overlap_frames: int = 1

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")
        if self.min_overlap_frames < 1:
            raise ValueError(
                f"min_overlap_frames must be >= 1, got {self.min_overlap_frames}")


@dataclass(frozen=True)
class InteractionRecord:
    recording_id: int
    vehicle_track_id: int
    vru_track_id: int
    first_frame: int  # first frame within the radius
    last_frame: int  # last frame within the radius
    min_distance: float


def _qualifying_allpairs(vehicles, vrus, radius):
    """Per-pair frame alignment; yields (vi, ui, frames, dists) for hits."""
    for vi, veh in enumerate(vehicles):
        vf0, vf1 = int(veh.frames[0]), int(veh.frames[-1])
        for ui, vru in enumerate(vrus):
            uf0, uf1 = int(vru.frames[0]), int(vru.frames[-1])
            lo, hi = max(vf0, uf0), min(vf1, uf1)
            if lo > hi:
                continue
            vs = slice(lo - vf0, hi - vf0 + 1)
            us = slice(lo - uf0, hi - uf0 + 1)
            dx = veh.x[vs] - vru.x[us]
            dy = veh.y[vs] - vru.y[us]
            d = np.sqrt(dx * dx + dy * dy)
            mask = d <= radius
            if not mask.any():
                continue
            frames = np.arange(lo, hi + 1, dtype=np.int64)[mask]
            yield vi, ui, frames, d[mask]


def _flatten(tracks):
    frames = np.concatenate([t.frames for t in tracks])
    x = np.concatenate([t.x for t in tracks])
    y = np.concatenate([t.y for t in tracks])
    idx = np.concatenate([np.full(len(t), i, dtype=np.int64)
                          for i, t in enumerate(tracks)])
    return frames.astype(np.int64), x, y, idx


def _pack_keys(frames, cx, cy):
    if frames.size == 0:
        return frames.astype(np.int64)
    if int(frames.max()) >= 1 << _FRAME_BITS or int(frames.min()) < 0:
        raise ValueError("frame index out of range for grid packing")
    if (int(np.abs(cx).max(initial=0)) >= _CELL_OFFSET
            or int(np.abs(cy).max(initial=0)) >= _CELL_OFFSET):
        raise ValueError("coordinates out of range for grid packing")
    return (((frames << _CELL_BITS) | (cx + _CELL_OFFSET)) << _CELL_BITS) | (cy + _CELL_OFFSET)


def _qualifying_grid(vehicles, vrus, radius):
    """Uniform grid with cell size = radius, hashed per frame.

    Any pair within the radius sits in adjacent cells, so scanning the 3x3
    neighborhood loses nothing; actual distances are still checked, which
    makes the result identical to the all-pairs sweep.
    """
    vf, vx, vy, vidx = _flatten(vehicles)
    uf, ux, uy, uidx = _flatten(vrus)
    vcx = np.floor(vx / radius).astype(np.int64)
    vcy = np.floor(vy / radius).astype(np.int64)
    ucx = np.floor(ux / radius).astype(np.int64)
    ucy = np.floor(uy / radius).astype(np.int64)
    vkeys = _pack_keys(vf, vcx, vcy)
    order = np.argsort(vkeys, kind="stable")
    skeys = vkeys[order]

    hit_v, hit_u = [], []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            nkeys = _pack_keys(uf, ucx + dx, ucy + dy)
            lefts = np.searchsorted(skeys, nkeys, side="left")
            rights = np.searchsorted(skeys, nkeys, side="right")
            counts = rights - lefts
            nz = np.flatnonzero(counts)
            if nz.size == 0:
                continue
            cnts = counts[nz]
            starts = lefts[nz]
            total = int(cnts.sum())
            base = np.repeat(starts, cnts)
            step = np.arange(total) - np.repeat(np.cumsum(cnts) - cnts, cnts)
            hit_v.append(order[base + step])
            hit_u.append(np.repeat(nz, cnts))
    if not hit_v:
        return
    vs = np.concatenate(hit_v)
    us = np.concatenate(hit_u)
    dxs = vx[vs] - ux[us]
    dys = vy[vs] - uy[us]
    d = np.sqrt(dxs * dxs + dys * dys)
    keep = d <= radius
    if not keep.any():
        return
    vs, us, d = vs[keep], us[keep], d[keep]
    pair = vidx[vs] * len(vrus) + uidx[us]
    frames = vf[vs]
    order2 = np.lexsort((frames, pair))
    pair, frames, d = pair[order2], frames[order2], d[order2]
    starts = np.flatnonzero(np.r_[True, pair[1:] != pair[:-1]])
    counts = np.diff(np.r_[starts, pair.size])
    mins = np.minimum.reduceat(d, starts)
    for s, c, m in zip(starts, counts, mins):
        vi = int(pair[s]) // len(vrus)
        ui = int(pair[s]) % len(vrus)
        yield vi, ui, frames[s:s + c], None, float(m), int(c)


def find_interactions(recording: Recording, params: InteractionParams = InteractionParams(),
                      method: str = "grid") -> list[InteractionRecord]:
    """Detect vehicle-VRU proximity episodes within one recording.

    `method` selects the candidate generation route: "grid" (spatial hashing)
    or "allpairs" (exhaustive pair sweep). Both return the same records.
    """
    vehicles = [t for t in recording.tracks if t.road_user_class in VEHICLE_CLASSES]
    vrus = [t for t in recording.tracks if t.road_user_class in VRU_CLASSES]
    records: list[InteractionRecord] = []
    if not vehicles or not vrus:
        return records
    rid = recording.meta.recording_id

    if method == "allpairs":
        for vi, ui, frames, dists in _qualifying_allpairs(vehicles, vrus, params.radius):
            if frames.size < params.min_overlap_frames:
                continue
            records.append(InteractionRecord(
                recording_id=rid,
                vehicle_track_id=vehicles[vi].track_id,
                vru_track_id=vrus[ui].track_id,
                first_frame=int(frames[0]),
                last_frame=int(frames[-1]),
                min_distance=float(dists.min()),
            ))
    elif method == "grid":
        for vi, ui, frames, _, dmin, count in _qualifying_grid(vehicles, vrus, params.radius):
            if count < params.min_overlap_frames:
                continue
            records.append(InteractionRecord(
                recording_id=rid,
                vehicle_track_id=vehicles[vi].track_id,
                vru_track_id=vrus[ui].track_id,
                first_frame=int(frames[0]),
                last_frame=int(frames[-1]),
                min_distance=dmin,
            ))
    else:
        raise ValueError(f"unknown method '{method}'")
    records.sort(key=lambda r: (r.recording_id, r.vehicle_track_id, r.vru_track_id))
    return records


def find_interactions_all(recordings, params: InteractionParams = InteractionParams(),
                          method: str = "grid") -> list[InteractionRecord]:
    out: list[InteractionRecord] = []
    for rec in sorted(recordings, key=lambda r: r.meta.recording_id):
        out.extend(find_interactions(rec, params, method))
    return out


def partition_drivers(assignment: StyleAssignment,
                      records: list[InteractionRecord]) -> tuple[StyleAssignment, StyleAssignment]:
    """Split labeled drivers into (interacting, non-interacting).

    A driver interacts if it appears in at least one record. Every vehicle id
    in `records` must be labeled or excluded, else UnknownTrackId.
    """
    interacting_keys = {(r.recording_id, r.vehicle_track_id) for r in records}
    labeled = {(e.recording_id, e.track_id) for e in assignment.entries}
    excluded_keys = {(rid, tid) for rid, tid, _ in assignment.excluded}
    unknown = sorted(interacting_keys - labeled - excluded_keys)
    if unknown:
        raise UnknownTrackId(
            f"interaction refers to unlabeled vehicle track {unknown[0]}")
    inter = [e for e in assignment.entries
             if (e.recording_id, e.track_id) in interacting_keys]
    non = [e for e in assignment.entries
           if (e.recording_id, e.track_id) not in interacting_keys]
    return StyleAssignment(entries=inter), StyleAssignment(entries=non)


INTERACTIONS_CSV_HEADER = [
    "recordingId", "vehicleTrackId", "vruTrackId", "firstFrame", "lastFrame", "minDistance",
]


def write_interactions_csv(path, records) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(INTERACTIONS_CSV_HEADER)
        for r in records:
            w.writerow([r.recording_id, r.vehicle_track_id, r.vru_track_id,
                        r.first_frame, r.last_frame, repr(float(r.min_distance))])
    return path


def read_interactions_csv(path) -> list[InteractionRecord]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != INTERACTIONS_CSV_HEADER:
            raise DataError(f"{path} is not an interactions table")
        return [InteractionRecord(recording_id=int(row[0]), vehicle_track_id=int(row[1]),
                                  vru_track_id=int(row[2]), first_frame=int(row[3]),
                                  last_frame=int(row[4]), min_distance=float(row[5]))
                for row in r]
