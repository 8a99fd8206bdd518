"""Loading, validating and writing trajectory recordings.

A recording is stored as three CSV files sharing a prefix:

    <prefix>_recordingMeta.csv   recordingId, frameRate, locationId
    <prefix>_tracksMeta.csv      recordingId, trackId, initialFrame, finalFrame, class
    <prefix>_tracks.csv          recordingId, trackId, frame, xCenter, yCenter,
                                 xVelocity, yVelocity, xAcceleration, yAcceleration
                                 (+ optional lonVelocity, lonAcceleration)

All files are UTF-8, comma separated, one header row. Extra columns are ignored.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    FrameCountMismatch,
    MissingColumn,
    MissingMeta,
    NonFiniteValue,
    NonMonotonicFrames,
    UnknownRoadUserClass,
)

VEHICLE_CLASSES = frozenset({"car", "truck", "trailer", "van", "bus", "motorcycle"})
VRU_CLASSES = frozenset({"pedestrian", "bicycle"})
ROAD_USER_CLASSES = VEHICLE_CLASSES | VRU_CLASSES

RECORDING_META_COLUMNS = ("recordingId", "frameRate", "locationId")
TRACKS_META_COLUMNS = ("recordingId", "trackId", "initialFrame", "finalFrame", "class")
TRACKS_COLUMNS = (
    "recordingId",
    "trackId",
    "frame",
    "xCenter",
    "yCenter",
    "xVelocity",
    "yVelocity",
    "xAcceleration",
    "yAcceleration",
)
_TRACK_NUMERIC_COLUMNS = TRACKS_COLUMNS[2:]


@dataclass(frozen=True)
class RecordingMeta:
    recording_id: int
    frame_rate: float
    location_id: int
    duration_frames: int


@dataclass
class TrackSeries:
    """Per-frame kinematics of one road user within one recording."""

    track_id: int
    recording_id: int
    road_user_class: str
    frames: np.ndarray  # int64, strictly increasing, unit step
    x: np.ndarray
    y: np.ndarray
    speed: np.ndarray  # planar speed, m/s, >= 0
    lon_acc: np.ndarray  # longitudinal acceleration, m/s^2, signed

    @property
    def is_vru(self) -> bool:
        return self.road_user_class in VRU_CLASSES

    def __len__(self) -> int:
        return int(self.frames.size)


@dataclass
class Recording:
    meta: RecordingMeta
    tracks: list[TrackSeries] = field(default_factory=list)


@dataclass(frozen=True)
class ValidationVerdict:
    accepted: bool
    reason: str | None = None


def derive_kinematics(x_velocity, y_velocity, lon_acceleration=None,
                      x_acceleration=None, y_acceleration=None):
    """Derive (speed, lon_acc) from velocity and acceleration components.

    Speed is the planar norm sqrt(vx^2 + vy^2). Longitudinal acceleration is
    taken from the dedicated column when given, otherwise it is the projection
    of (ax, ay) onto the unit velocity vector; at zero speed the projection is
    defined as 0. Accepts scalars or equally shaped arrays.
    """
    vx = np.asarray(x_velocity, dtype=float)
    vy = np.asarray(y_velocity, dtype=float)
    scalar = vx.ndim == 0 and vy.ndim == 0
    vx = np.atleast_1d(vx)
    vy = np.atleast_1d(vy)
    if lon_acceleration is None and (x_acceleration is None or y_acceleration is None):
        raise ValueError("need lon_acceleration or both x_acceleration and y_acceleration")
    speed = np.sqrt(vx * vx + vy * vy)
    if lon_acceleration is not None:
        lon = np.atleast_1d(np.asarray(lon_acceleration, dtype=float))
    else:
        ax = np.atleast_1d(np.asarray(x_acceleration, dtype=float))
        ay = np.atleast_1d(np.asarray(y_acceleration, dtype=float))
        safe = np.where(speed > 0.0, speed, 1.0)
        lon = np.where(speed > 0.0, (ax * vx + ay * vy) / safe, 0.0)
    for name, arr in (("x_velocity", vx), ("y_velocity", vy), ("lon_acc", lon)):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"non-finite value in {name}")
    if scalar:
        return float(speed[0]), float(lon[0])
    return speed, lon


def _read_csv(path, required: tuple, label: str) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except OSError as exc:
        raise DataError(f"cannot read {label} file {path}: {exc}") from exc
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise MissingColumn(f"{label} file {path}: {exc}") from exc
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise MissingColumn(f"{label} file {path}: missing column(s) {', '.join(missing)}")
    return df


def _int_column(df: pd.DataFrame, col: str, label: str) -> np.ndarray:
    raw = pd.to_numeric(df[col], errors="coerce").to_numpy(dtype=float)
    if not np.all(np.isfinite(raw)):
        row = int(np.flatnonzero(~np.isfinite(raw))[0]) + 2
        raise NonFiniteValue(f"{label}: non-numeric {col} at file row {row}")
    out = raw.astype(np.int64)
    if not np.array_equal(out, raw):
        row = int(np.flatnonzero(out != raw)[0]) + 2
        raise DataError(f"{label}: non-integer {col} at file row {row}")
    return out


def load_recording(tracks_path, tracks_meta_path, recording_meta_path) -> Recording:
    """Load one recording from its three CSV files.

    Raises MissingColumn, MissingMeta, NonMonotonicFrames, NonFiniteValue or
    FrameCountMismatch on schema or consistency violations; error messages name
    the offending track and file row.
    """
    meta_df = _read_csv(recording_meta_path, RECORDING_META_COLUMNS, "recording meta")
    if len(meta_df) != 1:
        raise DataError(f"recording meta file {recording_meta_path}: expected exactly one row")
    rec_id = int(meta_df["recordingId"].iloc[0])
    frame_rate = float(meta_df["frameRate"].iloc[0])
    if not np.isfinite(frame_rate) or frame_rate <= 0:
        raise DataError(f"recording meta file {recording_meta_path}: frameRate must be > 0")
    location_id = int(meta_df["locationId"].iloc[0])

    tm_df = _read_csv(tracks_meta_path, TRACKS_META_COLUMNS, "tracks meta")
    tm_ids = _int_column(tm_df, "trackId", "tracks meta")
    tm_initial = _int_column(tm_df, "initialFrame", "tracks meta")
    tm_final = _int_column(tm_df, "finalFrame", "tracks meta")
    tm_rec = _int_column(tm_df, "recordingId", "tracks meta")
    if tm_rec.size and not np.all(tm_rec == rec_id):
        raise MissingMeta(f"tracks meta file {tracks_meta_path}: recordingId mismatch")
    if np.unique(tm_ids).size != tm_ids.size:
        raise MissingMeta(f"tracks meta file {tracks_meta_path}: duplicate trackId")
    classes = {}
    for tid, cls in zip(tm_ids, tm_df["class"].astype(str)):
        cls = cls.strip().lower()
        if cls not in ROAD_USER_CLASSES:
            raise UnknownRoadUserClass(f"track {tid}: unknown class '{cls}'")
        classes[int(tid)] = cls
    spans = {int(t): (int(i), int(f)) for t, i, f in zip(tm_ids, tm_initial, tm_final)}
    for tid, (ini, fin) in spans.items():
        if fin < ini:
            raise FrameCountMismatch(f"track {tid}: finalFrame {fin} before initialFrame {ini}")

    tr_df = _read_csv(tracks_path, TRACKS_COLUMNS, "tracks")
    has_lon_acc = "lonAcceleration" in tr_df.columns
    tr_ids = _int_column(tr_df, "trackId", "tracks")
    unknown = np.setdiff1d(np.unique(tr_ids), tm_ids)
    if unknown.size:
        raise MissingMeta(f"tracks file {tracks_path}: trackId {int(unknown[0])} absent from tracks meta")

    tracks: list[TrackSeries] = []
    groups = {int(tid): g for tid, g in tr_df.groupby(tr_ids, sort=True)}
    for tid in sorted(spans):
        ini, fin = spans[tid]
        expected = fin - ini + 1
        g = groups.get(tid)
        if g is None:
            raise FrameCountMismatch(f"track {tid}: expected {expected} rows, found 0")
        frames = _int_column(g, "frame", f"track {tid}")
        if len(g) != expected or frames[0] != ini:
            raise FrameCountMismatch(
                f"track {tid}: expected frames {ini}..{fin} ({expected} rows), "
                f"found {len(g)} rows starting at {int(frames[0])}"
            )
        steps = np.diff(frames)
        bad = np.flatnonzero(steps != 1)
        if bad.size:
            row = int(g.index[bad[0] + 1]) + 2
            raise NonMonotonicFrames(
                f"track {tid}: frames not strictly increasing with unit step at file row {row}"
            )
        cols = {}
        numeric_cols = _TRACK_NUMERIC_COLUMNS[1:] + (("lonAcceleration",) if has_lon_acc else ())
        for col in numeric_cols:
            vals = pd.to_numeric(g[col], errors="coerce").to_numpy(dtype=float)
            nonfinite = np.flatnonzero(~np.isfinite(vals))
            if nonfinite.size:
                row = int(g.index[nonfinite[0]]) + 2
                raise NonFiniteValue(f"track {tid}: non-finite {col} at file row {row}")
            cols[col] = vals
        speed, lon_acc = derive_kinematics(
            cols["xVelocity"],
            cols["yVelocity"],
            lon_acceleration=cols.get("lonAcceleration"),
            x_acceleration=cols["xAcceleration"],
            y_acceleration=cols["yAcceleration"],
        )
        tracks.append(
            TrackSeries(
                track_id=tid,
                recording_id=rec_id,
                road_user_class=classes[tid],
                frames=frames,
                x=cols["xCenter"],
                y=cols["yCenter"],
                speed=speed,
                lon_acc=lon_acc,
            )
        )

    duration = int(tm_final.max()) + 1 if tm_final.size else 0
    meta = RecordingMeta(rec_id, frame_rate, location_id, duration)
    return Recording(meta=meta, tracks=tracks)


def validate_track(track: TrackSeries, min_frames: int = 25,
                   min_mean_speed: float = 0.5) -> ValidationVerdict:
    """Gate a track before feature extraction.

    Structural defects (length mismatch, non-finite values, frame gaps,
    negative speed) always reject. Short tracks reject via min_frames. The
    mean-speed gate applies to vehicle tracks only; VRU tracks keep
    position-only validity.
    """
    n = len(track)
    arrays = (track.x, track.y, track.speed, track.lon_acc)
    if any(a.shape != (n,) for a in arrays):
        return ValidationVerdict(False, "LengthMismatch")
    for a in arrays:
        if not np.all(np.isfinite(a)):
            return ValidationVerdict(False, "NonFinite")
    if n and not np.all(np.diff(track.frames) == 1):
        return ValidationVerdict(False, "NonMonotonicFrames")
    if np.any(track.speed < 0.0):
        return ValidationVerdict(False, "NegativeSpeed")
    if n < max(int(min_frames), 1):
        return ValidationVerdict(False, "TooShort")
    if not track.is_vru and float(track.speed.mean()) < min_mean_speed:
        return ValidationVerdict(False, "Stationary")
    return ValidationVerdict(True, None)


def _fmt(v: float) -> str:
    # repr gives the shortest string that parses back to the same double
    return repr(float(v))


def write_recording(recording: Recording, out_dir, prefix: str | None = None) -> list[Path]:
    """Write a recording back to the three-file CSV layout.

    Kinematics are serialized so that reloading reproduces every TrackSeries
    bit for bit: xVelocity carries the speed (yVelocity 0) and lonAcceleration
    carries the longitudinal acceleration.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if prefix is None:
        prefix = f"{recording.meta.recording_id:02d}"
    meta_path = out / f"{prefix}_recordingMeta.csv"
    tmeta_path = out / f"{prefix}_tracksMeta.csv"
    tracks_path = out / f"{prefix}_tracks.csv"

    with open(meta_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORDING_META_COLUMNS)
        w.writerow([recording.meta.recording_id, _fmt(recording.meta.frame_rate),
                    recording.meta.location_id])

    tracks = sorted(recording.tracks, key=lambda t: t.track_id)
    with open(tmeta_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACKS_META_COLUMNS)
        for t in tracks:
            w.writerow([t.recording_id, t.track_id, int(t.frames[0]) if len(t) else 0,
                        int(t.frames[-1]) if len(t) else -1, t.road_user_class])

    with open(tracks_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACKS_COLUMNS + ("lonAcceleration",))
        for t in tracks:
            for i in range(len(t)):
                w.writerow([
                    t.recording_id,
                    t.track_id,
                    int(t.frames[i]),
                    _fmt(t.x[i]),
                    _fmt(t.y[i]),
                    _fmt(t.speed[i]),
                    _fmt(0.0),
                    _fmt(t.lon_acc[i]),
                    _fmt(0.0),
                    _fmt(t.lon_acc[i]),
                ])
    return [meta_path, tmeta_path, tracks_path]


def find_recording_files(input_spec: str) -> list[tuple[Path, Path, Path]]:
    """Resolve an input directory or glob to (tracks, tracksMeta, recordingMeta) triples."""
    import glob as _glob

    spec = str(input_spec)
    metas: list[Path]
    p = Path(spec)
    if p.is_dir():
        metas = sorted(p.glob("*_recordingMeta.csv"))
        if not metas and (p / "data").is_dir():
            metas = sorted((p / "data").glob("*_recordingMeta.csv"))
    elif "*" in spec or "?" in spec:
        metas = sorted(Path(m) for m in _glob.glob(spec))
    elif spec.endswith("_recordingMeta.csv"):
        metas = [p]
    else:
        metas = []
    if not metas:
        raise DataError(f"no recordings found at '{input_spec}'")
    triples = []
    for meta in metas:
        stem = meta.name[: -len("_recordingMeta.csv")]
        triples.append((meta.parent / f"{stem}_tracks.csv",
                        meta.parent / f"{stem}_tracksMeta.csv", meta))
    return triples


def load_recordings(input_spec: str) -> list[Recording]:
    """Load every recording reachable from a directory, glob or meta-file path."""
    recs = [load_recording(t, m, r) for t, m, r in find_recording_files(input_spec)]
    recs.sort(key=lambda r: r.meta.recording_id)
    return recs
