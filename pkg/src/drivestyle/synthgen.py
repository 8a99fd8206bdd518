"""Synthetic trajectory generator with known style labels.

Vehicle speed follows base + amplitude * sin(2*pi*f*t + phase) plus Gaussian
noise, clipped at zero; longitudinal acceleration is the discrete speed
derivative plus seeded point spikes of +-spike magnitude. Each vehicle drives
its own lane (y = 30 * index, spacing larger than the default interaction
radius), so the only proximity episodes are the ones placed on purpose:
stationary pedestrians 3 m off a chosen vehicle's mid-path position.
Everything is deterministic per seed. Generated tracks always pass ingest
validation under default thresholds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .ingest import Recording, RecordingMeta, TrackSeries, write_recording
from .label import STYLES

WAVE_HZ = 0.2  # speed oscillation frequency
LANE_SPACING = 30.0
VRU_LATERAL_OFFSET = 3.0
FAR_AWAY_Y = -1000.0


@dataclass(frozen=True)
class StyleProfile:
    base_speed: float  # m/s
    speed_amplitude: float  # m/s, sinusoidal swing
    accel_spike_rate: float  # expected spikes per second
    accel_spike_magnitude: float  # m/s^2
    noise_std: float  # m/s, additive speed noise

    def __post_init__(self):
        if not self.base_speed > self.speed_amplitude:
            raise ValueError("base_speed must exceed speed_amplitude")
        if min(self.speed_amplitude, self.accel_spike_rate,
               self.accel_spike_magnitude, self.noise_std) < 0:
            raise ValueError("profile parameters must be non-negative")


DEFAULT_PROFILES: dict[str, StyleProfile] = {
    "conservative": StyleProfile(base_speed=8.0, speed_amplitude=0.4,
                                 accel_spike_rate=0.5, accel_spike_magnitude=0.4,
                                 noise_std=0.02),
    "normal": StyleProfile(base_speed=10.0, speed_amplitude=1.5,
                           accel_spike_rate=1.0, accel_spike_magnitude=1.6,
                           noise_std=0.03),
    "aggressive": StyleProfile(base_speed=12.0, speed_amplitude=3.2,
                               accel_spike_rate=2.0, accel_spike_magnitude=6.0,
                               noise_std=0.06),
}


@dataclass
class GenConfig:
    tracks_per_style: dict[str, int] = field(
        default_factory=lambda: {s: 100 for s in STYLES})
    duration_frames: int = 500
    frame_rate: float = 25.0
    vru_count: int = 0
    vru_placement: float = 0.0  # fraction of vehicles that get a nearby VRU
    seed: int = 0
    profiles: dict[str, StyleProfile] = field(
        default_factory=lambda: dict(DEFAULT_PROFILES))

    def __post_init__(self):
        if self.duration_frames < 2:
            raise ValueError("duration_frames must be >= 2")
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be > 0")
        if not 0.0 <= self.vru_placement <= 1.0:
            raise ValueError("vru_placement must be in [0, 1]")
        if self.vru_count < 0:
            raise ValueError("vru_count must be >= 0")
        unknown = set(self.tracks_per_style) - set(STYLES)
        if unknown:
            raise ValueError(f"unknown styles {sorted(unknown)}")


def generate_track(profile: StyleProfile, seed: int, frames: int, frame_rate: float,
                   track_id: int = 0, recording_id: int = 0, lane_y: float = 0.0,
                   road_user_class: str = "car") -> TrackSeries:
    """One synthetic vehicle track; deterministic per seed.

    Draw order is fixed: phase, speed noise, spike mask, spike signs.
    """
    if frames < 2:
        raise ValueError("frames must be >= 2")
    rng = np.random.default_rng(seed)
    t = np.arange(frames, dtype=float) / frame_rate
    phase = rng.uniform(0.0, 2.0 * np.pi)
    speed = (profile.base_speed
             + profile.speed_amplitude * np.sin(2.0 * np.pi * WAVE_HZ * t + phase)
             + rng.normal(0.0, profile.noise_std, frames))
    np.maximum(speed, 0.0, out=speed)

    lon_acc = np.gradient(speed) * frame_rate
    spike_p = min(profile.accel_spike_rate / frame_rate, 1.0)
    spike_mask = rng.random(frames) < spike_p
    spike_sign = np.where(rng.random(frames) < 0.5, 1.0, -1.0)
    lon_acc = lon_acc + spike_mask * spike_sign * profile.accel_spike_magnitude

    x = np.concatenate([[0.0], np.cumsum(speed[:-1])]) / frame_rate
    return TrackSeries(
        track_id=track_id,
        recording_id=recording_id,
        road_user_class=road_user_class,
        frames=np.arange(frames, dtype=np.int64),
        x=x,
        y=np.full(frames, lane_y, dtype=float),
        speed=speed,
        lon_acc=lon_acc,
    )


def _pedestrian_track(track_id: int, recording_id: int, frames: int,
                      position: tuple[float, float]) -> TrackSeries:
    n = int(frames)
    return TrackSeries(
        track_id=track_id,
        recording_id=recording_id,
        road_user_class="pedestrian",
        frames=np.arange(n, dtype=np.int64),
        x=np.full(n, float(position[0])),
        y=np.full(n, float(position[1])),
        speed=np.zeros(n),
        lon_acc=np.zeros(n),
    )


def generate_dataset(config: GenConfig) -> tuple[Recording, dict[int, str]]:
    """Build one recording of styled vehicles plus optional pedestrians.

    Returns the recording and the ground-truth map track_id -> style for the
    vehicle tracks. round(vru_placement * n_vehicles) pedestrians (capped at
    vru_count) sit within the default interaction radius of distinct vehicles;
    the rest are far from every lane.
    """
    counts = [(style, int(config.tracks_per_style.get(style, 0))) for style in STYLES]
    n_vehicles = sum(c for _, c in counts)
    if n_vehicles == 0:
        raise DataError("tracks_per_style adds up to zero vehicles")

    root = np.random.SeedSequence(config.seed)
    children = root.spawn(n_vehicles + 1)
    tracks: list[TrackSeries] = []
    ground_truth: dict[int, str] = {}
    tid = 0
    for style, count in counts:
        profile = config.profiles[style]
        for _ in range(count):
            child_seed = int(children[tid].generate_state(1)[0])
            tracks.append(generate_track(
                profile, child_seed, config.duration_frames, config.frame_rate,
                track_id=tid, lane_y=LANE_SPACING * tid))
            ground_truth[tid] = style
            tid += 1

    n_near = min(config.vru_count, int(round(config.vru_placement * n_vehicles)))
    placement_rng = np.random.default_rng(children[n_vehicles])
    near_targets = (sorted(int(v) for v in placement_rng.choice(
        n_vehicles, size=n_near, replace=False)) if n_near else [])
    for j in range(config.vru_count):
        if j < n_near:
            veh = tracks[near_targets[j]]
            mid = len(veh) // 2
            position = (float(veh.x[mid]), float(veh.y[mid]) + VRU_LATERAL_OFFSET)
        else:
            position = (50.0 * (j + 1), FAR_AWAY_Y)
        tracks.append(_pedestrian_track(tid, 0, config.duration_frames, position))
        tid += 1

    meta = RecordingMeta(recording_id=0, frame_rate=config.frame_rate,
                         location_id=0, duration_frames=config.duration_frames)
    return Recording(meta=meta, tracks=tracks), ground_truth


GROUND_TRUTH_CSV_HEADER = ["trackId", "style"]


def write_ground_truth_csv(path, ground_truth: dict[int, str]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GROUND_TRUTH_CSV_HEADER)
        for tid in sorted(ground_truth):
            w.writerow([tid, ground_truth[tid]])
    return path


def read_ground_truth_csv(path) -> dict[int, str]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != GROUND_TRUTH_CSV_HEADER:
            raise DataError(f"{path} is not a ground-truth table")
        return {int(row[0]): row[1] for row in r}


def write_dataset(recording: Recording, ground_truth: dict[int, str],
                  out_dir) -> list[Path]:
    out = Path(out_dir)
    paths = write_recording(recording, out)
    paths.append(write_ground_truth_csv(out / "ground_truth.csv", ground_truth))
    return paths
