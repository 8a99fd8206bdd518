from __future__ import annotations

import math

import numpy as np
import pytest

from drivestyle.errors import (DataError, FrameCountMismatch, MissingColumn,
                               MissingMeta, NonFiniteValue, NonMonotonicFrames,
                               UnknownRoadUserClass)
from drivestyle.ingest import (ROAD_USER_CLASSES, VEHICLE_CLASSES, VRU_CLASSES,
                               derive_kinematics, find_recording_files,
                               load_recording, load_recordings, validate_track,
                               write_recording)

from .conftest import make_recording, make_track


def write_valid_recording(tmp_path, rng=None, n_tracks=3, n=40,
                          recording_id=0):
    rng = rng or np.random.default_rng(0)
    tracks = []
    for i in range(n_tracks):
        speed = np.abs(rng.normal(6, 1, size=n)) + 1.0
        lon = rng.normal(0, 1, size=n)
        tracks.append(make_track(track_id=i, recording_id=recording_id,
                                 speed=speed, lon_acc=lon,
                                 x=np.cumsum(speed) / 25.0,
                                 y=np.full(n, 30.0 * i)))
    rec = make_recording(tracks, recording_id=recording_id)
    write_recording(rec, tmp_path)
    return rec


def test_class_partition():
    assert set(VRU_CLASSES) == {"pedestrian", "bicycle"}
    assert len(ROAD_USER_CLASSES) == 8
    assert set(VEHICLE_CLASSES) | set(VRU_CLASSES) == set(ROAD_USER_CLASSES)
    assert not set(VEHICLE_CLASSES) & set(VRU_CLASSES)


def test_derive_kinematics_scalar():
    speed, lon = derive_kinematics(3.0, 4.0, x_acceleration=1.0,
                                   y_acceleration=0.0)
    assert speed == 5.0
    assert lon == pytest.approx(0.6, rel=1e-12)


def test_derive_kinematics_prefers_lon_column():
    speed, lon = derive_kinematics(3.0, 4.0, lon_acceleration=2.5,
                                   x_acceleration=99.0, y_acceleration=99.0)
    assert (speed, lon) == (5.0, 2.5)


def test_derive_kinematics_zero_speed_projection():
    _, lon = derive_kinematics(0.0, 0.0, x_acceleration=5.0, y_acceleration=5.0)
    assert lon == 0.0


def test_derive_kinematics_arrays_match_scalars():
    rng = np.random.default_rng(1)
    vx, vy = rng.normal(size=20), rng.normal(size=20)
    ax, ay = rng.normal(size=20), rng.normal(size=20)
    speed, lon = derive_kinematics(vx, vy, x_acceleration=ax, y_acceleration=ay)
    for i in range(20):
        s, l = derive_kinematics(float(vx[i]), float(vy[i]),
                                 x_acceleration=float(ax[i]),
                                 y_acceleration=float(ay[i]))
        assert speed[i] == s
        assert lon[i] == l
        assert s == math.sqrt(vx[i] * vx[i] + vy[i] * vy[i])


def test_derive_kinematics_rejects_nan_and_missing():
    with pytest.raises(NonFiniteValue):
        derive_kinematics(float("nan"), 0.0, lon_acceleration=0.0)
    with pytest.raises(ValueError):
        derive_kinematics(1.0, 1.0)


def test_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(7)
    rec = write_valid_recording(tmp_path, rng, n_tracks=4, n=60)
    back = load_recording(tmp_path / "00_tracks.csv",
                          tmp_path / "00_tracksMeta.csv",
                          tmp_path / "00_recordingMeta.csv")
    assert back.meta.recording_id == rec.meta.recording_id
    assert back.meta.frame_rate == rec.meta.frame_rate
    assert len(back.tracks) == len(rec.tracks)
    for got, want in zip(back.tracks, rec.tracks):
        assert got.track_id == want.track_id
        assert got.road_user_class == want.road_user_class
        np.testing.assert_array_equal(got.frames, want.frames)
        np.testing.assert_array_equal(got.x, want.x)
        np.testing.assert_array_equal(got.y, want.y)
        np.testing.assert_array_equal(got.speed, want.speed)
        np.testing.assert_array_equal(got.lon_acc, want.lon_acc)


def test_loader_rejects_missing_columns(tmp_path):
    write_valid_recording(tmp_path)
    tracks = tmp_path / "00_tracks.csv"
    lines = tracks.read_text().splitlines()
    header = lines[0].split(",")
    drop = header.index("xCenter")
    rows = [",".join(line.split(",")[:drop] + line.split(",")[drop + 1:])
            for line in lines]
    tracks.write_text("\n".join(rows) + "\n")
    with pytest.raises(MissingColumn):
        load_recording(tracks, tmp_path / "00_tracksMeta.csv",
                       tmp_path / "00_recordingMeta.csv")


def test_loader_rejects_frame_gap_with_row_number(tmp_path):
    write_valid_recording(tmp_path, n_tracks=1, n=10)
    tracks = tmp_path / "00_tracks.csv"
    lines = tracks.read_text().splitlines()
    # frame column is the third field; punch a hole at data row 5
    parts = lines[5].split(",")
    parts[2] = "99"
    lines[5] = ",".join(parts)
    tracks.write_text("\n".join(lines) + "\n")
    with pytest.raises(NonMonotonicFrames) as err:
        load_recording(tracks, tmp_path / "00_tracksMeta.csv",
                       tmp_path / "00_recordingMeta.csv")
    assert "row" in str(err.value)


def test_loader_rejects_nan_cell(tmp_path):
    write_valid_recording(tmp_path, n_tracks=1, n=10)
    tracks = tmp_path / "00_tracks.csv"
    lines = tracks.read_text().splitlines()
    parts = lines[3].split(",")
    parts[3] = "nan"
    lines[3] = ",".join(parts)
    tracks.write_text("\n".join(lines) + "\n")
    with pytest.raises(NonFiniteValue):
        load_recording(tracks, tmp_path / "00_tracksMeta.csv",
                       tmp_path / "00_recordingMeta.csv")


def test_loader_rejects_unknown_class(tmp_path):
    write_valid_recording(tmp_path, n_tracks=1, n=10)
    tmeta = tmp_path / "00_tracksMeta.csv"
    tmeta.write_text(tmeta.read_text().replace("car", "hovercraft"))
    with pytest.raises(UnknownRoadUserClass):
        load_recording(tmp_path / "00_tracks.csv", tmeta,
                       tmp_path / "00_recordingMeta.csv")


def test_loader_rejects_meta_mismatches(tmp_path):
    write_valid_recording(tmp_path, n_tracks=2, n=10)
    tmeta = tmp_path / "00_tracksMeta.csv"
    lines = tmeta.read_text().splitlines()
    tmeta.write_text("\n".join(lines[:-1]) + "\n")  # drop one track's meta
    with pytest.raises(MissingMeta):
        load_recording(tmp_path / "00_tracks.csv", tmeta,
                       tmp_path / "00_recordingMeta.csv")


def test_loader_rejects_frame_count_mismatch(tmp_path):
    write_valid_recording(tmp_path, n_tracks=1, n=10)
    tmeta = tmp_path / "00_tracksMeta.csv"
    lines = tmeta.read_text().splitlines()
    parts = lines[1].split(",")
    parts[3] = str(int(parts[3]) + 2)  # finalFrame now overshoots
    lines[1] = ",".join(parts)
    tmeta.write_text("\n".join(lines) + "\n")
    with pytest.raises(FrameCountMismatch):
        load_recording(tmp_path / "00_tracks.csv", tmeta,
                       tmp_path / "00_recordingMeta.csv")


def test_validation_order_and_reasons():
    ok = make_track(speed=np.full(30, 5.0))
    assert validate_track(ok).accepted

    short = make_track(speed=np.full(10, 5.0))
    assert validate_track(short).reason == "TooShort"

    slow = make_track(speed=np.full(30, 0.1))
    assert validate_track(slow).reason == "Stationary"

    vru_slow = make_track(speed=np.zeros(30), road_user_class="pedestrian")
    assert validate_track(vru_slow).accepted  # no speed gate for VRUs

    neg = make_track(speed=np.concatenate([np.full(29, 5.0), [-0.1]]))
    assert validate_track(neg).reason == "NegativeSpeed"

    gap = make_track(speed=np.full(30, 5.0),
                     frames=np.concatenate([np.arange(29), [40]]))
    assert validate_track(gap).reason == "NonMonotonicFrames"

    nan = make_track(speed=np.full(30, 5.0))
    nan.x[4] = np.nan
    assert validate_track(nan).reason == "NonFinite"

    bad_len = make_track(speed=np.full(30, 5.0))
    bad_len.y = bad_len.y[:-1]
    assert validate_track(bad_len).reason == "LengthMismatch"

    # structural defects win over the soft gates
    short_nan = make_track(speed=np.full(5, 5.0))
    short_nan.x[0] = np.nan
    assert validate_track(short_nan).reason == "NonFinite"


def test_validation_thresholds_are_tunable():
    t = make_track(speed=np.full(10, 0.3))
    assert validate_track(t, min_frames=5, min_mean_speed=0.2).accepted
    assert validate_track(t, min_frames=11).reason == "TooShort"


def test_find_recording_files(tmp_path):
    write_valid_recording(tmp_path / "data", recording_id=0)
    write_valid_recording(tmp_path / "data", recording_id=1)
    found = find_recording_files(str(tmp_path / "data"))
    assert len(found) == 2
    # nested data/ subdir fallback
    found2 = find_recording_files(str(tmp_path))
    assert len(found2) == 2
    # a single meta file path works too
    single = find_recording_files(str(tmp_path / "data" / "00_recordingMeta.csv"))
    assert len(single) == 1
    with pytest.raises(DataError):
        find_recording_files(str(tmp_path / "empty"))


def test_load_recordings_sorted(tmp_path):
    write_valid_recording(tmp_path, recording_id=2)
    write_valid_recording(tmp_path, recording_id=0)
    recs = load_recordings(str(tmp_path))
    assert [r.meta.recording_id for r in recs] == [0, 2]
