"""Driver volatility features.

Thirteen dispersion and exceedance statistics are computed per driver from two
per-frame series: planar speed S and signed longitudinal acceleration A, with
Aplus (strictly positive entries of A) and Aminus (strictly negative entries)
as subseries. Exact zeros belong to neither subseries. All statistics use
population (1/N) normalization.

    dv1   std of S
    dv2   std of A
    dv3   100 * std(S) / mean(S)                 coefficient of variation
    dv4   100 * std(Aplus) / mean(Aplus)
    dv5   100 * std(Aminus) / mean(Aminus)       <= 0 when valid
    dv6   mean absolute deviation of S
    dv7   mean absolute deviation of A           (option: Aplus instead)
    dv8   100 * (Q3 - Q1) / (Q3 + Q1) on S       quartile coefficient
    dv9   same on Aplus
    dv10  same on Aminus                         <= 0 when valid
    dv11  % of S at or above mean(S) + 2*std(S)
    dv12  % of Aplus at or above mean(Aplus) + 2*alpha,  alpha = dv2
    dv13  % of Aminus at or above mean(Aminus) + 2*alpha, alpha = dv2
          (option: alpha = the subseries' own std for dv12/dv13)

A measure is marked invalid, not NaN, when its series has fewer than two
samples or its denominator is zero; invalid slots hold 0.0. Exceedance
percentages are defined as 0 when the relevant spread alpha is exactly 0
(nothing exceeds a zero-dispersion band).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, EmptyMatrix, EmptySample
from .ingest import TrackSeries

MEASURE_NAMES = tuple(f"dv{i}" for i in range(1, 14))
N_MEASURES = 13

DV7_SERIES = ("full", "positive")
EXCEEDANCE_ALPHA = ("dv2", "subseries")


@dataclass(frozen=True)
class VolatilityOptions:
    dv7_series: str = "full"
    exceedance_alpha: str = "dv2"

    def __post_init__(self):
        if self.dv7_series not in DV7_SERIES:
            raise ValueError(f"dv7_series must be one of {DV7_SERIES}")
        if self.exceedance_alpha not in EXCEEDANCE_ALPHA:
            raise ValueError(f"exceedance_alpha must be one of {EXCEEDANCE_ALPHA}")


@dataclass
class KinematicSeries:
    track_id: int
    recording_id: int
    speed: np.ndarray
    accel: np.ndarray
    accel_pos: np.ndarray  # entries of accel > 0, original order
    accel_neg: np.ndarray  # entries of accel < 0, original order


@dataclass
class FeatureVector:
    track_id: int
    recording_id: int
    values: np.ndarray  # shape (13,)
    valid: np.ndarray  # shape (13,), bool

    @property
    def all_valid(self) -> bool:
        return bool(self.valid.all())


@dataclass
class FeatureMatrix:
    """Valid feature vectors stacked row-wise, plus the excluded remainder."""

    values: np.ndarray  # shape (n, 13)
    ids: list[tuple[int, int]]  # (recording_id, track_id) per row
    excluded: list[tuple[int, int, str]] = field(default_factory=list)


def split_series(track: TrackSeries, track_id: int | None = None,
                 recording_id: int | None = None) -> KinematicSeries:
    """Split a validated track into the speed/acceleration series set."""
    a = np.asarray(track.lon_acc, dtype=float)
    return KinematicSeries(
        track_id=track.track_id if track_id is None else track_id,
        recording_id=track.recording_id if recording_id is None else recording_id,
        speed=np.asarray(track.speed, dtype=float).copy(),
        accel=a.copy(),
        accel_pos=a[a > 0.0].copy(),
        accel_neg=a[a < 0.0].copy(),
    )


def _interp_sorted(s: np.ndarray, p: float) -> float:
    # linear interpolation on the ascending sort, zero-based rank h = (N-1)*p
    h = (s.size - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, s.size - 1)
    return float(s[lo] + (h - lo) * (s[hi] - s[lo]))


def percentile(samples, p: float) -> float:
    """Linear-interpolation percentile of a non-empty sample, p in [0, 1]."""
    arr = np.asarray(samples, dtype=float).ravel()
    if arr.size == 0:
        raise EmptySample("percentile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    return _interp_sorted(np.sort(arr), p)


def _pop_std(x: np.ndarray) -> float:
    return float(x.std())


def _mean_abs_dev(x: np.ndarray) -> float:
    return float(np.abs(x - x.mean()).mean())


def _quartile_coeff(x: np.ndarray) -> tuple[float, bool]:
    s = np.sort(x)
    q1 = _interp_sorted(s, 0.25)
    q3 = _interp_sorted(s, 0.75)
    denom = q3 + q1
    if denom == 0.0:
        return 0.0, False
    return 100.0 * (q3 - q1) / denom, True


def _exceedance_pct(series: np.ndarray, alpha: float) -> float:
    if alpha == 0.0:
        return 0.0
    threshold = series.mean() + 2.0 * alpha
    return 100.0 * int(np.count_nonzero(series >= threshold)) / series.size


def compute_volatility(ks: KinematicSeries,
                       options: VolatilityOptions | None = None) -> FeatureVector:
    """Compute the 13 volatility measures with per-measure validity flags."""
    opts = options or VolatilityOptions()
    S, A, Ap, Am = ks.speed, ks.accel, ks.accel_pos, ks.accel_neg
    if S.size < 2:
        raise ValueError("compute_volatility needs at least two samples")

    values = np.zeros(N_MEASURES, dtype=float)
    valid = np.zeros(N_MEASURES, dtype=bool)

    def put(i: int, value: float, ok: bool = True) -> None:
        if ok:
            values[i] = value
            valid[i] = True

    mean_s = float(S.mean())
    std_s = _pop_std(S)
    std_a = _pop_std(A)

    put(0, std_s)
    put(1, std_a)
    put(2, 100.0 * std_s / mean_s if mean_s != 0.0 else 0.0, mean_s != 0.0)

    if Ap.size >= 2:
        mp = float(Ap.mean())
        put(3, 100.0 * _pop_std(Ap) / mp if mp != 0.0 else 0.0, mp != 0.0)
    if Am.size >= 2:
        mm = float(Am.mean())
        put(4, 100.0 * _pop_std(Am) / mm if mm != 0.0 else 0.0, mm != 0.0)

    put(5, _mean_abs_dev(S))
    if opts.dv7_series == "full":
        put(6, _mean_abs_dev(A))
    elif Ap.size >= 2:
        put(6, _mean_abs_dev(Ap))

    v8, ok8 = _quartile_coeff(S)
    put(7, v8, ok8)
    if Ap.size >= 2:
        v9, ok9 = _quartile_coeff(Ap)
        put(8, v9, ok9)
    if Am.size >= 2:
        v10, ok10 = _quartile_coeff(Am)
        put(9, v10, ok10)

    put(10, _exceedance_pct(S, std_s))
    if Ap.size >= 2:
        alpha = std_a if opts.exceedance_alpha == "dv2" else _pop_std(Ap)
        put(11, _exceedance_pct(Ap, alpha))
    if Am.size >= 2:
        alpha = std_a if opts.exceedance_alpha == "dv2" else _pop_std(Am)
        put(12, _exceedance_pct(Am, alpha))

    return FeatureVector(track_id=ks.track_id, recording_id=ks.recording_id,
                         values=values, valid=valid)


def track_features(track: TrackSeries,
                   options: VolatilityOptions | None = None) -> FeatureVector:
    return compute_volatility(split_series(track), options)


def build_matrix(vectors, policy: str = "dropInvalid") -> FeatureMatrix:
    """Stack fully valid vectors into a matrix, ascending (recordingId, trackId).

    Vectors with any invalid measure are moved to the exclusion list with a
    reason naming the first invalid measure. Raises EmptyMatrix when nothing
    survives.
    """
    if policy != "dropInvalid":
        raise ValueError(f"unknown policy '{policy}'")
    ordered = sorted(vectors, key=lambda fv: (fv.recording_id, fv.track_id))
    rows, ids, excluded = [], [], []
    for fv in ordered:
        if fv.all_valid:
            rows.append(fv.values)
            ids.append((fv.recording_id, fv.track_id))
        else:
            first_bad = int(np.flatnonzero(~fv.valid)[0])
            excluded.append((fv.recording_id, fv.track_id, MEASURE_NAMES[first_bad]))
    if not rows:
        raise EmptyMatrix("no valid feature vectors to cluster")
    return FeatureMatrix(values=np.array(rows, dtype=float), ids=ids, excluded=excluded)


FEATURES_CSV_HEADER = (
    ["trackId", "recordingId"]
    + list(MEASURE_NAMES)
    + [f"valid{i}" for i in range(1, 14)]
)


def write_features_csv(path, vectors) -> Path:
    """Dump every computed vector (valid or not) with its validity flags."""
    path = Path(path)
    ordered = sorted(vectors, key=lambda fv: (fv.recording_id, fv.track_id))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FEATURES_CSV_HEADER)
        for fv in ordered:
            row = [fv.track_id, fv.recording_id]
            row += [repr(float(v)) for v in fv.values]
            row += [int(b) for b in fv.valid]
            w.writerow(row)
    return path


def read_features_csv(path) -> list[FeatureVector]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or header[: len(FEATURES_CSV_HEADER)] != FEATURES_CSV_HEADER:
            raise DataError(f"{path} is not a features table")
        out = []
        for row in r:
            values = np.array([float(v) for v in row[2:15]], dtype=float)
            valid = np.array([bool(int(v)) for v in row[15:28]], dtype=bool)
            out.append(FeatureVector(track_id=int(row[0]), recording_id=int(row[1]),
                                     values=values, valid=valid))
    return out
