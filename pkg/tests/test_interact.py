from __future__ import annotations

import numpy as np
import pytest

from drivestyle.errors import UnknownTrackId
from drivestyle.interact import (InteractionParams, InteractionRecord,
                                 find_interactions, find_interactions_all,
                                 partition_drivers, read_interactions_csv,
                                 write_interactions_csv)
from drivestyle.label import LabeledDriver, StyleAssignment

from .conftest import make_recording, make_track
from .reference import ref_interactions


def still_track(track_id, x, y, first_frame, n, cls="car"):
    return make_track(track_id=track_id, road_user_class=cls,
                      x=np.full(n, float(x)), y=np.full(n, float(y)),
                      speed=np.full(n, 1.0), start_frame=first_frame)


def wander_track(rng, track_id, n, cls="car", span=40.0, start_frame=0):
    return make_track(track_id=track_id, road_user_class=cls,
                      x=rng.uniform(-span, span, size=n),
                      y=rng.uniform(-span, span, size=n),
                      speed=np.full(n, 1.0), start_frame=start_frame)


def as_dicts(records):
    return [{"vehicle_track_id": r.vehicle_track_id,
             "vru_track_id": r.vru_track_id, "first_frame": r.first_frame,
             "last_frame": r.last_frame, "min_distance": r.min_distance}
            for r in records]


def test_frozen_proximity_example():
    veh = still_track(1, 0.0, 0.0, first_frame=10, n=11)
    ped = still_track(2, 3.0, 0.0, first_frame=15, n=4, cls="pedestrian")
    rec = make_recording([veh, ped])
    records = find_interactions(rec, InteractionParams(radius=5.0))
    assert len(records) == 1
    r = records[0]
    assert (r.vehicle_track_id, r.vru_track_id) == (1, 2)
    assert (r.first_frame, r.last_frame) == (15, 18)
    assert r.min_distance == 3.0


def test_radius_is_inclusive():
    veh = still_track(1, 0.0, 0.0, first_frame=0, n=5)
    ped = still_track(2, 5.0, 0.0, first_frame=0, n=5, cls="bicycle")
    rec = make_recording([veh, ped])
    assert len(find_interactions(rec, InteractionParams(radius=5.0))) == 1
    assert not find_interactions(rec, InteractionParams(radius=4.999))


def test_no_temporal_overlap_no_record():
    veh = still_track(1, 0.0, 0.0, first_frame=0, n=5)
    ped = still_track(2, 0.0, 0.0, first_frame=10, n=5, cls="pedestrian")
    rec = make_recording([veh, ped])
    assert not find_interactions(rec, InteractionParams(radius=5.0))


def test_min_overlap_frames_gate():
    veh = still_track(1, 0.0, 0.0, first_frame=0, n=3)
    ped = still_track(2, 1.0, 0.0, first_frame=2, n=4, cls="pedestrian")
    rec = make_recording([veh, ped])
    params1 = InteractionParams(radius=5.0, min_overlap_frames=1)
    params2 = InteractionParams(radius=5.0, min_overlap_frames=2)
    assert len(find_interactions(rec, params1)) == 1
    assert not find_interactions(rec, params2)


def test_vehicle_pairs_are_ignored():
    a = still_track(1, 0.0, 0.0, first_frame=0, n=5)
    b = still_track(2, 1.0, 0.0, first_frame=0, n=5, cls="truck")
    rec = make_recording([a, b])
    assert not find_interactions(rec, InteractionParams(radius=5.0))


def test_grid_equals_allpairs_equals_naive():
    rng = np.random.default_rng(3)
    for trial in range(60):
        n_veh = int(rng.integers(1, 6))
        n_vru = int(rng.integers(1, 5))
        tracks = []
        tid = 1
        for _ in range(n_veh):
            tracks.append(wander_track(rng, tid, int(rng.integers(2, 40)),
                                       start_frame=int(rng.integers(0, 10))))
            tid += 1
        for _ in range(n_vru):
            cls = "pedestrian" if rng.random() < 0.5 else "bicycle"
            tracks.append(wander_track(rng, tid, int(rng.integers(2, 40)),
                                       cls=cls,
                                       start_frame=int(rng.integers(0, 10))))
            tid += 1
        rec = make_recording(tracks)
        radius = float(rng.uniform(2.0, 30.0))
        params = InteractionParams(radius=radius)
        got_grid = find_interactions(rec, params, method="grid")
        got_pairs = find_interactions(rec, params, method="allpairs")
        assert got_grid == got_pairs
        want = ref_interactions(tracks, radius)
        got = as_dicts(got_grid)
        assert len(got) == len(want)
        for g, w in zip(got, want):
            assert g["vehicle_track_id"] == w["vehicle_track_id"]
            assert g["vru_track_id"] == w["vru_track_id"]
            assert g["first_frame"] == w["first_frame"]
            assert g["last_frame"] == w["last_frame"]
            assert g["min_distance"] == w["min_distance"]  # bit-identical


def test_growing_radius_only_adds_records():
    rng = np.random.default_rng(11)
    tracks = [wander_track(rng, i, 30) for i in range(1, 5)]
    tracks += [wander_track(rng, i, 30, cls="pedestrian") for i in range(5, 9)]
    rec = make_recording(tracks)
    previous = set()
    for radius in (1.0, 3.0, 9.0, 27.0, 81.0):
        pairs = {(r.vehicle_track_id, r.vru_track_id)
                 for r in find_interactions(rec, InteractionParams(radius=radius))}
        assert previous <= pairs
        previous = pairs


def test_records_sorted_and_same_recording_only():
    veh0 = still_track(1, 0.0, 0.0, first_frame=0, n=5)
    ped0 = still_track(2, 1.0, 0.0, first_frame=0, n=5, cls="pedestrian")
    rec0 = make_recording([veh0, ped0], recording_id=0)
    # same geometry in another recording, different ids
    veh1 = still_track(7, 0.0, 0.0, first_frame=0, n=5)
    veh1.recording_id = 1
    ped1 = still_track(3, 1.0, 0.0, first_frame=0, n=5, cls="pedestrian")
    ped1.recording_id = 1
    rec1 = make_recording([veh1, ped1], recording_id=1)
    records = find_interactions_all([rec1, rec0], InteractionParams(radius=5.0))
    keyed = [(r.recording_id, r.vehicle_track_id, r.vru_track_id)
             for r in records]
    assert keyed == sorted(keyed)
    assert keyed == [(0, 1, 2), (1, 7, 3)]


def test_interactions_csv_round_trip(tmp_path):
    records = [
        InteractionRecord(recording_id=0, vehicle_track_id=1, vru_track_id=2,
                          first_frame=15, last_frame=18, min_distance=3.0),
        InteractionRecord(recording_id=1, vehicle_track_id=4, vru_track_id=9,
                          first_frame=0, last_frame=0,
                          min_distance=0.1234567890123456789),
    ]
    path = write_interactions_csv(tmp_path / "interactions.csv", records)
    assert read_interactions_csv(path) == records


def test_partition_drivers():
    entries = [
        LabeledDriver(recording_id=0, track_id=1, cluster_id=0, style="normal"),
        LabeledDriver(recording_id=0, track_id=2, cluster_id=1,
                      style="aggressive"),
        LabeledDriver(recording_id=1, track_id=1, cluster_id=0,
                      style="conservative"),
    ]
    assignment = StyleAssignment(entries=entries)
    records = [InteractionRecord(recording_id=0, vehicle_track_id=2,
                                 vru_track_id=9, first_frame=0, last_frame=3,
                                 min_distance=1.0)]
    interacting, quiet = partition_drivers(assignment, records)
    assert [e.track_id for e in interacting.entries] == [2]
    assert [(e.recording_id, e.track_id) for e in quiet.entries] == \
        [(0, 1), (1, 1)]
    # duplicated records for the same driver count once
    records2 = records + [InteractionRecord(recording_id=0, vehicle_track_id=2,
                                            vru_track_id=8, first_frame=1,
                                            last_frame=2, min_distance=0.5)]
    interacting2, _ = partition_drivers(assignment, records2)
    assert len(interacting2.entries) == 1


def test_partition_drivers_rejects_unknown_vehicle():
    assignment = StyleAssignment(entries=[], excluded=[(0, 5, "dv4")])
    ok_records = [InteractionRecord(recording_id=0, vehicle_track_id=5,
                                    vru_track_id=6, first_frame=0, last_frame=0,
                                    min_distance=1.0)]
    interacting, quiet = partition_drivers(assignment, ok_records)
    assert not interacting.entries and not quiet.entries
    bad_records = [InteractionRecord(recording_id=0, vehicle_track_id=77,
                                     vru_track_id=6, first_frame=0, last_frame=0,
                                     min_distance=1.0)]
    with pytest.raises(UnknownTrackId):
        partition_drivers(assignment, bad_records)


def test_params_validation():
    with pytest.raises(ValueError):
        InteractionParams(radius=0.0)
    with pytest.raises(ValueError):
        InteractionParams(radius=5.0, min_overlap_frames=0)
