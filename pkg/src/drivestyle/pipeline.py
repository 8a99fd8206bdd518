"""File-level pipeline stages and the end-to-end runner.

Each stage reads its inputs from disk and writes its outputs under the
configured output directory, so stages can run standalone (CLI subcommands)
or chained; `run_pipeline` is exactly the chained sequence and therefore
produces byte-identical outputs to running the stages one by one.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import cluster as cluster_mod
from . import features as features_mod
from . import interact as interact_mod
from . import label as label_mod
from . import report as report_mod
from .config import PipelineConfig
from .errors import DataError, StageFailure
from .ingest import (Recording, ValidationVerdict, load_recordings, validate_track,
                     write_recording, VEHICLE_CLASSES)

NORMALIZED_DIR = "normalized"
VALIDATION_CSV = "validation.csv"
FEATURES_CSV = "features.csv"
ASSIGNMENTS_CSV = "assignments.csv"
STYLE_MAP_USED_JSON = "style_map_used.json"
INTERACTIONS_CSV = "interactions.csv"


def model_filename(k: int) -> str:
    return f"model_k{k}.json"


def _load_validated(cfg: PipelineConfig):
    """Load all recordings and validate every track.

    Returns (recordings, verdicts) where verdicts is a list of
    (recording_id, track_id, class, ValidationVerdict) and each recording's
    track list is filtered down to the accepted tracks.
    """
    recordings = load_recordings(cfg.input)
    verdicts = []
    filtered: list[Recording] = []
    for rec in recordings:
        kept = []
        for track in rec.tracks:
            verdict = validate_track(track, cfg.min_frames, cfg.min_mean_speed)
            verdicts.append((rec.meta.recording_id, track.track_id,
                             track.road_user_class, verdict))
            if verdict.accepted:
                kept.append(track)
        filtered.append(Recording(meta=rec.meta, tracks=kept))
    return filtered, verdicts


def stage_ingest(cfg: PipelineConfig) -> list[Path]:
    """Validate the input and write normalized recordings plus the audit table."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    recordings, verdicts = _load_validated(cfg)
    written: list[Path] = []
    norm = out / NORMALIZED_DIR
    for rec in recordings:
        written.extend(write_recording(rec, norm))
    path = out / VALIDATION_CSV
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["recordingId", "trackId", "class", "accepted", "reason"])
        for rid, tid, cls, verdict in sorted(verdicts, key=lambda v: (v[0], v[1])):
            w.writerow([rid, tid, cls, int(verdict.accepted), verdict.reason or ""])
    written.append(path)
    return written


def _vehicle_tracks(recordings):
    for rec in recordings:
        for track in rec.tracks:
            if track.road_user_class in VEHICLE_CLASSES:
                yield track


def stage_features(cfg: PipelineConfig) -> list[Path]:
    """Compute the 13 measures for every accepted vehicle track."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    recordings, _ = _load_validated(cfg)
    options = features_mod.VolatilityOptions(dv7_series=cfg.dv7_series,
                                             exceedance_alpha=cfg.exceedance_alpha)
    tracks = list(_vehicle_tracks(recordings))
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            vectors = list(pool.map(
                lambda t: features_mod.track_features(t, options), tracks))
    else:
        vectors = [features_mod.track_features(t, options) for t in tracks]
    return [features_mod.write_features_csv(out / FEATURES_CSV, vectors)]


def _matrix_from_file(cfg: PipelineConfig) -> features_mod.FeatureMatrix:
    vectors = features_mod.read_features_csv(Path(cfg.output_dir) / FEATURES_CSV)
    return features_mod.build_matrix(vectors)


def _scaled_matrix(cfg: PipelineConfig, matrix: features_mod.FeatureMatrix):
    if cfg.scale:
        return cluster_mod.standardize(matrix.values)
    scaler = cluster_mod.Standardizer.identity(matrix.values.shape[1])
    return scaler.transform(matrix.values), scaler


def stage_cluster(cfg: PipelineConfig) -> list[Path]:
    """Elbow scan plus one fitted model per requested k."""
    out = Path(cfg.output_dir)
    matrix = _matrix_from_file(cfg)
    scaled, scaler = _scaled_matrix(cfg, matrix)
    distinct = cluster_mod.distinct_row_count(scaled)
    k_max = min(cfg.elbow_kmax, distinct)
    k_min = min(cfg.elbow_kmin, k_max)
    curve = cluster_mod.elbow_scan(scaled, k_min, k_max, seed=cfg.seed,
                                   restarts=cfg.restarts, max_iter=cfg.max_iter,
                                   tol=cfg.tol)
    written = [report_mod.write_elbow_csv(out / report_mod.ELBOW_CSV, curve.entries)]
    for k in cfg.k_values:
        model = cluster_mod.kmeans_best_of(scaled, k, seed=cfg.seed,
                                           restarts=cfg.restarts,
                                           max_iter=cfg.max_iter, tol=cfg.tol)
        written.append(cluster_mod.save_model(model, scaler, out / model_filename(k)))
    return written


def _model_with_assignments(cfg: PipelineConfig, matrix, k: int):
    """Rebuild a fitted model from its file; assignments come from one
    nearest-centroid pass, which reproduces the fit exactly (fixed point)."""
    payload, scaler = cluster_mod.load_model(Path(cfg.output_dir) / model_filename(k))
    scaled = scaler.transform(matrix.values)
    centroids = payload["scaledCentroids"]
    assignments = cluster_mod.nearest_assignments(scaled, centroids)
    model = cluster_mod.ClusterModel(
        k=int(payload["k"]), centroids=centroids, assignments=assignments,
        distortion=float(payload["distortion"]), seed=int(payload["seed"]),
        iterations=int(payload["iterations"]), converged=bool(payload["converged"]),
    )
    return model, scaler, payload


def stage_label(cfg: PipelineConfig) -> list[Path]:
    """Name the clusters and attach a style to every clustered driver."""
    out = Path(cfg.output_dir)
    matrix = _matrix_from_file(cfg)
    model, _, _ = _model_with_assignments(cfg, matrix, cfg.effective_report_k)
    manual = label_mod.load_style_map_file(cfg.style_map) if cfg.style_map else None
    scores = label_mod.score_clusters(model)
    style_map = label_mod.assign_styles(model, scores, manual=manual)
    assignment = label_mod.label_drivers(model, style_map, matrix.ids, matrix.excluded)
    return [
        label_mod.write_assignments_csv(out / ASSIGNMENTS_CSV, assignment),
        label_mod.write_style_map_file(style_map, out / STYLE_MAP_USED_JSON),
    ]


def stage_interact(cfg: PipelineConfig) -> list[Path]:
    """Detect vehicle-VRU proximity episodes among accepted tracks."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    recordings, _ = _load_validated(cfg)
    params = interact_mod.InteractionParams(radius=cfg.radius,
                                            min_overlap_frames=cfg.min_overlap_frames)
    records = interact_mod.find_interactions_all(recordings, params)
    return [interact_mod.write_interactions_csv(out / INTERACTIONS_CSV, records)]


def stage_report(cfg: PipelineConfig) -> list[Path]:
    """Assemble and emit the run report from the prior stages' files."""
    out = Path(cfg.output_dir)
    matrix = _matrix_from_file(cfg)
    report_k = cfg.effective_report_k
    model, scaler, _ = _model_with_assignments(cfg, matrix, report_k)

    summaries = {}
    for k in cfg.k_values:
        payload, _ = cluster_mod.load_model(out / model_filename(k))
        summaries[str(k)] = {
            "k": int(payload["k"]),
            "seed": int(payload["seed"]),
            "distortion": float(payload["distortion"]),
            "iterations": int(payload["iterations"]),
            "converged": bool(payload["converged"]),
        }

    import json as _json
    with open(out / STYLE_MAP_USED_JSON) as fh:
        style_map_payload = _json.load(fh)
    cluster_styles = {int(c): s for c, s in style_map_payload["clusters"].items()}
    score_used = {int(c): float(v) for c, v in style_map_payload["scores"].items()}
    style_map = label_mod.StyleMap(cluster_styles=cluster_styles,
                                   score_used=score_used,
                                   method=style_map_payload["method"])

    entries = label_mod.read_assignments_csv(out / ASSIGNMENTS_CSV)
    assignment = label_mod.StyleAssignment(entries=entries, excluded=matrix.excluded)
    records = interact_mod.read_interactions_csv(out / INTERACTIONS_CSV)
    interacting, non_interacting = interact_mod.partition_drivers(assignment, records)

    centers = report_mod.render_centers_table(model, scaler, style_map)
    distribution = report_mod.render_distribution_table(
        assignment, non_interacting, interacting)
    elbow_rows = report_mod.read_elbow_csv(out / report_mod.ELBOW_CSV)
    curve = cluster_mod.ElbowCurve(entries=[
        cluster_mod.ElbowEntry(**row) for row in elbow_rows])
    run_report = report_mod.build_report(
        config=cfg.to_dict(), elbow=curve, models=summaries, centers=centers,
        distribution=distribution, style_map=style_map_payload,
        exclusions=matrix.excluded)
    return report_mod.emit(run_report, out, tuple(cfg.formats))


PIPELINE_STAGES = (
    ("ingest", stage_ingest),
    ("features", stage_features),
    ("cluster", stage_cluster),
    ("label", stage_label),
    ("interact", stage_interact),
    ("report", stage_report),
)


def run_pipeline(cfg: PipelineConfig) -> list[Path]:
    """Run every stage in order; on failure, remove this run's partial outputs."""
    out_dir = Path(cfg.output_dir)
    preexisting = {p for p in out_dir.rglob("*") if p.is_file()} if out_dir.is_dir() else set()
    written: list[Path] = []
    for stage_name, stage_fn in PIPELINE_STAGES:
        try:
            written.extend(stage_fn(cfg))
        except Exception as exc:
            new_files = {p for p in out_dir.rglob("*") if p.is_file()} - preexisting
            for path in new_files | {Path(p) for p in written}:
                try:
                    path.unlink(missing_ok=True)
                except OSError:
                    pass
            norm = out_dir / NORMALIZED_DIR
            if norm.is_dir() and not any(norm.iterdir()):
                norm.rmdir()
            if isinstance(exc, StageFailure):
                raise
            raise StageFailure(stage_name, exc) from exc
    return written


def run_stage(stage_name: str, cfg: PipelineConfig) -> list[Path]:
    """Run a single stage with stage-named error wrapping."""
    stage_fn = dict(PIPELINE_STAGES)[stage_name]
    try:
        return stage_fn(cfg)
    except StageFailure:
        raise
    except Exception as exc:
        raise StageFailure(stage_name, exc) from exc


def interacting_driver_count(recordings, params) -> int:
    records = interact_mod.find_interactions_all(recordings, params)
    return len({(r.recording_id, r.vehicle_track_id) for r in records})


def radius_grid(radius_min: float, radius_max: float, step: float) -> list[float]:
    if radius_min <= 0 or step <= 0 or radius_max < radius_min:
        raise DataError("need 0 < radius_min <= radius_max and step > 0")
    n = int(np.floor((radius_max - radius_min) / step + 1e-9))
    return [radius_min + i * step for i in range(n + 1)]


def calibrate_radius(cfg: PipelineConfig, target: int, radius_min: float = 0.5,
                     radius_max: float = 50.0, step: float = 0.25):
    """Smallest grid radius whose interacting-driver count reaches the target.

    The count is monotone non-decreasing in the radius, so a binary search
    over the grid finds the same answer as a linear sweep. Returns
    (radius, count) or None when even radius_max falls short.
    """
    if target < 0:
        raise DataError("target must be >= 0")
    recordings, _ = _load_validated(cfg)
    radii = radius_grid(radius_min, radius_max, step)

    def count_at(r: float) -> int:
        params = interact_mod.InteractionParams(
            radius=r, min_overlap_frames=cfg.min_overlap_frames)
        return interacting_driver_count(recordings, params)

    lo, hi = 0, len(radii) - 1
    if count_at(radii[hi]) < target:
        return None
    while lo < hi:
        mid = (lo + hi) // 2
        if count_at(radii[mid]) >= target:
            hi = mid
        else:
            lo = mid + 1
    return radii[lo], count_at(radii[lo])
