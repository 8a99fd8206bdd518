"""Hand-written k-means with z-score standardization and an elbow scan.

Everything here is deterministic for a given (matrix, k, seed, max_iter, tol):
k-means++ seeding draws from a seeded generator, nearest-centroid ties go to
the lowest cluster id, centroid means reduce members in ascending row order,
and restart seeds are derived from (seed, k, restart) so that a larger restart
budget evaluates a superset of the smaller budget's candidates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadClusterId, IoFailure, KExceedsDistinctRows, TooFewRows

_MONOTONE_SLACK = 1e-12  # floating-point slack for the per-iteration distortion check


@dataclass
class Standardizer:
    """Per-feature z-score transform with population std.

    Columns whose std is exactly 0 are flagged constant and pass through
    unscaled in both directions.
    """

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool per feature
    enabled: bool = True

    def transform(self, values: np.ndarray) -> np.ndarray:
        x = np.asarray(values, dtype=float)
        if not self.enabled:
            return x.copy()
        safe = np.where(self.constant, 1.0, self.std)
        return np.where(self.constant, x, (x - self.mean) / safe)

    def inverse(self, scaled: np.ndarray) -> np.ndarray:
        z = np.asarray(scaled, dtype=float)
        if not self.enabled:
            return z.copy()
        return np.where(self.constant, z, z * self.std + self.mean)

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "constant": [bool(v) for v in self.constant],
            "enabled": bool(self.enabled),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(
            mean=np.array(d["mean"], dtype=float),
            std=np.array(d["std"], dtype=float),
            constant=np.array(d["constant"], dtype=bool),
            enabled=bool(d["enabled"]),
        )

    @classmethod
    def identity(cls, n_features: int) -> "Standardizer":
        return cls(mean=np.zeros(n_features), std=np.ones(n_features),
                   constant=np.zeros(n_features, dtype=bool), enabled=False)


def standardize(values: np.ndarray) -> tuple[np.ndarray, Standardizer]:
    """Z-score a matrix column-wise; needs at least two rows."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise TooFewRows("standardize needs a matrix with at least two rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    constant = std == 0.0
    s = Standardizer(mean=mean, std=std, constant=constant, enabled=True)
    return s.transform(x), s


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, d), scaled space
    assignments: np.ndarray  # (n,), int
    distortion: float  # sum of squared distances to assigned centroids
    seed: int
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


@dataclass(frozen=True)
class ElbowEntry:
    k: int
    distortion: float
    iterations: int


@dataclass
class ElbowCurve:
    entries: list[ElbowEntry]

    @property
    def distortions(self) -> list[float]:
        return [e.distortion for e in self.entries]


def distinct_row_count(values: np.ndarray) -> int:
    return int(np.unique(np.asarray(values, dtype=float), axis=0).shape[0])


def _pairwise_sq_dist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    x2 = np.einsum("ij,ij->i", X, X)
    c2 = np.einsum("ij,ij->i", C, C)
    d = x2[:, None] - 2.0 * (X @ C.T) + c2[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def nearest_assignments(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per row; ties go to the lowest cluster id."""
    return np.argmin(_pairwise_sq_dist(X, centroids), axis=1)


def _point_sq_dists(X: np.ndarray, C: np.ndarray, labels: np.ndarray) -> np.ndarray:
    diff = X - C[labels]
    return np.einsum("ij,ij->i", diff, diff)


def _repair_empty(X: np.ndarray, C: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Give each empty cluster the point currently farthest from its centroid.

    Mutates C in place and reassigns; terminates because a centroid placed on
    a data point keeps that point.
    """
    k = C.shape[0]
    for _ in range(k + 1):
        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size == 0:
            return labels
        e = int(empties[0])
        d = _point_sq_dists(X, C, labels)
        p = int(np.argmax(d))  # ties: lowest row index
        C[e] = X[p]
        labels = nearest_assignments(X, C)
    raise AssertionError("empty-cluster repair did not terminate")


def _cluster_means(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    C = np.empty((k, X.shape[1]), dtype=float)
    for c in range(k):
        C[c] = X[labels == c].mean(axis=0)  # members visited in ascending row order
    return C


_REFINE_MOVE_CAP = 100_000


def _refine_moves(X: np.ndarray, C: np.ndarray, labels: np.ndarray,
                  history: list[float]) -> np.ndarray:
    """Single-point improvement pass run after the Lloyd loop stalls.

    Repeatedly applies the one move (point -> other cluster) with the largest
    exact decrease in distortion, recomputing both affected means. Moving a
    point out of a size-m cluster changes the cost by -m/(m-1) * d_own, into
    a size-m' cluster by +m'/(m'+1) * d_new. A state with no improving move
    leaves every point strictly nearest to its own mean, so the usual
    fixed-point property is preserved while shallow local optima that pure
    Lloyd gets stuck in are escaped. Deterministic; mutates C and labels.
    """
    n, k = X.shape[0], C.shape[0]
    if k < 2:
        return labels
    counts = np.bincount(labels, minlength=k).astype(float)
    rows = np.arange(n)
    for _ in range(_REFINE_MOVE_CAP):
        D = _pairwise_sq_dist(X, C)
        own = D[rows, labels]
        member = counts[labels]
        # gain from removing each point; -inf forbids emptying a singleton
        gain = np.where(member > 1.0,
                        member / np.maximum(member - 1.0, 1.0) * own, -np.inf)
        delta = (counts / (counts + 1.0))[None, :] * D - gain[:, None]
        delta[rows, labels] = np.inf
        flat = int(np.argmin(delta))  # ties: lowest point index, then cluster id
        i, b = divmod(flat, k)
        if delta[i, b] >= -_MONOTONE_SLACK * max(1.0, abs(history[-1])):
            return labels
        a = int(labels[i])
        labels[i] = b
        counts[a] -= 1.0
        counts[b] += 1.0
        C[a] = X[labels == a].mean(axis=0)
        C[b] = X[labels == b].mean(axis=0)
        new_sse = float(_point_sq_dists(X, C, labels).sum())
        if history and new_sse > history[-1] * (1.0 + _MONOTONE_SLACK) + _MONOTONE_SLACK:
            raise AssertionError(
                f"distortion increased during refinement: {history[-1]} -> {new_sse}")
        history.append(new_sse)
    raise AssertionError("single-point refinement did not terminate")


def _lloyd(X: np.ndarray, init: np.ndarray, max_iter: int, tol: float,
           seed: int) -> ClusterModel:
    k = init.shape[0]
    C = init.copy()
    history: list[float] = []
    prev_labels = None
    converged = False
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        labels = nearest_assignments(X, C)
        labels = _repair_empty(X, C, labels)
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            converged = True
            break
        new_C = _cluster_means(X, labels, k)
        sse = float(_point_sq_dists(X, new_C, labels).sum())
        if history and sse > history[-1] * (1.0 + _MONOTONE_SLACK) + _MONOTONE_SLACK:
            raise AssertionError(
                f"distortion increased within a run: {history[-1]} -> {sse}")
        history.append(sse)
        movement = float(np.sqrt(((new_C - C) ** 2).sum(axis=1)).max())
        C = new_C
        prev_labels = labels
        if movement <= tol:
            converged = True
            break
    # settle on exact means for the final labels, then let the single-point
    # refinement drain any shallow local optimum the loop stalled in
    labels = nearest_assignments(X, C)
    labels = _repair_empty(X, C, labels)
    C = _cluster_means(X, labels, k)
    sse = float(_point_sq_dists(X, C, labels).sum())
    if history and sse > history[-1] * (1.0 + _MONOTONE_SLACK) + _MONOTONE_SLACK:
        raise AssertionError(
            f"distortion increased settling the means: {history[-1]} -> {sse}")
    history.append(sse)
    labels = _refine_moves(X, C, labels, history)
    # final assignment pass so the shipped model is a fixed point of one
    # assignment step (ties and empty repair included)
    labels = nearest_assignments(X, C)
    labels = _repair_empty(X, C, labels)
    distortion = float(_point_sq_dists(X, C, labels).sum())
    if distortion > history[-1] * (1.0 + _MONOTONE_SLACK) + _MONOTONE_SLACK:
        raise AssertionError(
            f"distortion increased at the final pass: {history[-1]} -> {distortion}")
    history.append(distortion)
    return ClusterModel(k=k, centroids=C, assignments=labels, distortion=distortion,
                        seed=seed, iterations=iterations, converged=converged,
                        history=history)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    first = int(rng.integers(n))
    chosen = [first]
    diff = X - X[first]
    d2 = np.einsum("ij,ij->i", diff, diff)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            raise AssertionError("k-means++ ran out of candidates")
        r = rng.random() * total
        j = int(np.searchsorted(np.cumsum(d2), r, side="right"))
        j = min(j, n - 1)
        chosen.append(j)
        diff = X - X[j]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return X[np.array(chosen, dtype=int)]


def kmeans(values: np.ndarray, k: int, seed: int = 0, max_iter: int = 300,
           tol: float = 1e-6) -> ClusterModel:
    """Lloyd iterations from a k-means++ start, plus a best-move polish.

    The loop stops when the maximum centroid movement is <= tol or after
    max_iter iterations; a single-point improvement pass then runs until no
    move lowers the distortion. Reruns with identical inputs are
    bit-identical.
    """
    X = np.ascontiguousarray(values, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TooFewRows("kmeans needs a non-empty 2-D matrix")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    distinct = distinct_row_count(X)
    if k > distinct:
        raise KExceedsDistinctRows(f"k={k} exceeds {distinct} distinct rows")
    rng = np.random.default_rng(seed)
    init = _kmeanspp_init(X, k, rng)
    return _lloyd(X, init, max_iter, tol, seed)


def _restart_seed(seed: int, k: int, restart: int) -> int:
    return int(np.random.SeedSequence([seed, k, restart]).generate_state(1)[0])


def kmeans_best_of(values: np.ndarray, k: int, seed: int = 0, restarts: int = 16,
                   max_iter: int = 300, tol: float = 1e-6) -> ClusterModel:
    """Best of `restarts` seeded runs by distortion (ties: earliest restart)."""
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    best: ClusterModel | None = None
    for r in range(restarts):
        model = kmeans(values, k, seed=_restart_seed(seed, k, r),
                       max_iter=max_iter, tol=tol)
        if best is None or model.distortion < best.distortion:
            best = model
    return best


def _warm_split_refit(X: np.ndarray, prev: ClusterModel, max_iter: int,
                      tol: float) -> ClusterModel:
    # previous winner's centroids plus the point farthest from its centroid:
    # Lloyd from this start cannot end worse than the previous distortion
    d = _point_sq_dists(X, prev.centroids, prev.assignments)
    p = int(np.argmax(d))
    init = np.vstack([prev.centroids, X[p]])
    return _lloyd(X, init, max_iter, tol, prev.seed)


def elbow_scan(values: np.ndarray, k_min: int, k_max: int, seed: int = 0,
               restarts: int = 16, max_iter: int = 300, tol: float = 1e-6) -> ElbowCurve:
    """Best-of-restarts distortion for each k in [k_min, k_max].

    The curve is non-increasing in k: in the rare case a cold scan inverts, a
    warm-start candidate grown from the previous k's winner restores order.
    """
    X = np.ascontiguousarray(values, dtype=float)
    if not 1 <= k_min <= k_max:
        raise ValueError(f"need 1 <= k_min <= k_max, got {k_min}..{k_max}")
    distinct = distinct_row_count(X)
    if k_max > distinct:
        raise KExceedsDistinctRows(f"k_max={k_max} exceeds {distinct} distinct rows")
    entries: list[ElbowEntry] = []
    prev: ClusterModel | None = None
    for k in range(k_min, k_max + 1):
        model = kmeans_best_of(X, k, seed=seed, restarts=restarts,
                               max_iter=max_iter, tol=tol)
        if prev is not None and model.distortion > prev.distortion:
            warm = _warm_split_refit(X, prev, max_iter, tol)
            if warm.distortion < model.distortion:
                model = warm
        entries.append(ElbowEntry(k=k, distortion=model.distortion,
                                  iterations=model.iterations))
        prev = model
    return ElbowCurve(entries=entries)


def centroid_in_raw_units(model: ClusterModel, standardizer: Standardizer,
                          cluster_id: int) -> np.ndarray:
    if not 0 <= cluster_id < model.k:
        raise BadClusterId(f"cluster id {cluster_id} out of range for k={model.k}")
    return standardizer.inverse(model.centroids[cluster_id])


def save_model(model: ClusterModel, standardizer: Standardizer, path) -> Path:
    """Dump a model to JSON: centroids in scaled and raw units plus fit metadata."""
    raw = [list(map(float, centroid_in_raw_units(model, standardizer, c)))
           for c in range(model.k)]
    payload = {
        "k": model.k,
        "seed": model.seed,
        "distortion": model.distortion,
        "iterations": model.iterations,
        "converged": model.converged,
        "scaledCentroids": [list(map(float, row)) for row in model.centroids],
        "rawCentroids": raw,
        "standardizer": standardizer.to_dict(),
    }
    path = Path(path)
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write model file {path}: {exc}") from exc
    return path


def load_model(path) -> tuple[dict, Standardizer]:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read model file {path}: {exc}") from exc
    standardizer = Standardizer.from_dict(payload["standardizer"])
    payload["scaledCentroids"] = np.array(payload["scaledCentroids"], dtype=float)
    return payload, standardizer
