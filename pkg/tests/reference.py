"""Slow reference implementations the tests compare against.

Everything here favors clarity over speed and avoids the package's own
numerics: plain loops and math.sqrt for the statistics and distances,
brute-force enumeration for the clustering optimum. Keep this file stupid;
it is the measuring stick.
"""

from __future__ import annotations

import math

import numpy as np


def ref_percentile(values, p):
    """Linear interpolation on the ascending sort, zero-based rank (n-1)*p."""
    s = sorted(float(v) for v in values)
    if not s:
        raise ValueError("empty sample")
    h = (len(s) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


def _mean(xs):
    return sum(xs) / len(xs)


def _pop_std(xs):
    m = _mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / len(xs))


def _mad(xs):
    m = _mean(xs)
    return sum(abs(x - m) for x in xs) / len(xs)


def _quart_coeff(xs):
    q1 = ref_percentile(xs, 0.25)
    q3 = ref_percentile(xs, 0.75)
    if q3 + q1 == 0.0:
        return 0.0, False
    return 100.0 * (q3 - q1) / (q3 + q1), True


def _exceed(xs, alpha):
    # nothing exceeds a zero-dispersion band
    if alpha == 0.0:
        return 0.0
    threshold = _mean(xs) + 2.0 * alpha
    return 100.0 * sum(1 for x in xs if x >= threshold) / len(xs)


def ref_volatility(speed, accel, dv7_series="full", exceedance_alpha="dv2"):
    """All 13 measures plus validity flags, as two plain lists."""
    S = [float(v) for v in speed]
    A = [float(v) for v in accel]
    Ap = [a for a in A if a > 0.0]
    Am = [a for a in A if a < 0.0]
    if len(S) < 2:
        raise ValueError("need at least two samples")

    values = [0.0] * 13
    valid = [False] * 13

    def put(i, value, ok=True):
        if ok:
            values[i] = value
            valid[i] = True

    std_s = _pop_std(S)
    std_a = _pop_std(A)
    mean_s = _mean(S)

    put(0, std_s)
    put(1, std_a)
    if mean_s != 0.0:
        put(2, 100.0 * std_s / mean_s)
    if len(Ap) >= 2:
        put(3, 100.0 * _pop_std(Ap) / _mean(Ap), _mean(Ap) != 0.0)
    if len(Am) >= 2:
        put(4, 100.0 * _pop_std(Am) / _mean(Am), _mean(Am) != 0.0)
    put(5, _mad(S))
    if dv7_series == "full":
        put(6, _mad(A))
    elif len(Ap) >= 2:
        put(6, _mad(Ap))
    v, ok = _quart_coeff(S)
    put(7, v, ok)
    if len(Ap) >= 2:
        v, ok = _quart_coeff(Ap)
        put(8, v, ok)
    if len(Am) >= 2:
        v, ok = _quart_coeff(Am)
        put(9, v, ok)
    put(10, _exceed(S, std_s))
    if len(Ap) >= 2:
        put(11, _exceed(Ap, std_a if exceedance_alpha == "dv2" else _pop_std(Ap)))
    if len(Am) >= 2:
        put(12, _exceed(Am, std_a if exceedance_alpha == "dv2" else _pop_std(Am)))
    return values, valid


def ref_kmeans_optimum(points, k, chunk=1 << 16):
    """Global minimum distortion over every assignment of n points to k clusters.

    Uses sum ||x||^2 - sum_c ||s_c||^2 / n_c, enumerating all k**n candidate
    assignments in chunks (n is small in the tests). Empty clusters are
    allowed in the enumeration; with k <= distinct(points) they never win.
    """
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    total = float((X * X).sum())
    n_candidates = k ** n
    powers = k ** np.arange(n)
    best_term = -np.inf
    for start in range(0, n_candidates, chunk):
        codes = np.arange(start, min(start + chunk, n_candidates))
        assign = (codes[:, None] // powers[None, :]) % k  # (C, n) mixed radix
        term = np.zeros(len(codes))
        for c in range(k):
            mask = (assign == c).astype(float)
            sums = mask @ X  # (C, d)
            counts = mask.sum(axis=1)
            term += (sums * sums).sum(axis=1) / np.maximum(counts, 1.0)
        best_term = max(best_term, float(term.max()))
    return total - best_term


def ref_interactions(tracks, radius, min_overlap_frames=1,
                     vru_classes=("pedestrian", "bicycle")):
    """Brute-force proximity episodes between vehicles and VRUs.

    tracks: iterable of objects with track_id, road_user_class, frames, x, y.
    Returns a sorted list of dicts keyed like the interaction records.
    """
    vehicles = [t for t in tracks if t.road_user_class not in vru_classes]
    vrus = [t for t in tracks if t.road_user_class in vru_classes]
    out = []
    for veh in vehicles:
        veh_by_frame = {int(f): (float(x), float(y))
                        for f, x, y in zip(veh.frames, veh.x, veh.y)}
        for vru in vrus:
            hits = []
            for f, x, y in zip(vru.frames, vru.x, vru.y):
                f = int(f)
                if f not in veh_by_frame:
                    continue
                vx, vy = veh_by_frame[f]
                dx = float(x) - vx
                dy = float(y) - vy
                d = math.sqrt(dx * dx + dy * dy)
                if d <= radius:
                    hits.append((f, d))
            if len(hits) >= min_overlap_frames and hits:
                out.append({
                    "recording_id": None,
                    "vehicle_track_id": veh.track_id,
                    "vru_track_id": vru.track_id,
                    "first_frame": hits[0][0],
                    "last_frame": hits[-1][0],
                    "min_distance": min(d for _, d in hits),
                })
    out.sort(key=lambda r: (r["vehicle_track_id"], r["vru_track_id"]))
    return out
