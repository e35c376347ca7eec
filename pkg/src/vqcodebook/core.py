"""Vector math shared by every codebook algorithm.

Holds the training-set / codebook containers, nearest-codeword assignment,
centroids, and distortion accounting.  Everything here is a pure function of
its inputs; all accumulation is in float64.

Distances are squared Euclidean throughout.  A single computation path
(:func:`scipy.spatial.distance.cdist` with ``"sqeuclidean"``) backs both the
scalar :func:`sq_dist` and the batched :func:`assign_nearest`, so tie-breaking
is consistent everywhere: equal distances go to the lowest codeword index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


def _as_matrix(vectors, what: str) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{what} must be a 2-D array of row vectors, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{what} must contain at least one vector of dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite components")
    return arr


@dataclass(eq=False)
class TrainingSet:
    """N real vectors of a fixed dimension, stored as an (N, d) float64 array."""

    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = _as_matrix(self.vectors, "training set")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(eq=False)
class Codebook:
    """Ordered list of M codewords plus a free-form provenance note."""

    codewords: np.ndarray
    source: str = ""

    def __post_init__(self):
        self.codewords = _as_matrix(self.codewords, "codebook")

    @property
    def m(self) -> int:
        return self.codewords.shape[0]

    @property
    def dim(self) -> int:
        return self.codewords.shape[1]


@dataclass(eq=False)
class Assignment:
    """Map from each training index to a codeword index in [0, m)."""

    cluster_of: np.ndarray
    m: int

    def __post_init__(self):
        self.cluster_of = np.asarray(self.cluster_of, dtype=np.int64)
        if self.cluster_of.ndim != 1:
            raise ValueError("cluster_of must be 1-D")
        if self.m < 1:
            raise ValueError("assignment needs at least one codeword")
        if self.cluster_of.size and (
            self.cluster_of.min() < 0 or self.cluster_of.max() >= self.m
        ):
            raise ValueError("cluster index out of range")

    @property
    def n(self) -> int:
        return self.cluster_of.shape[0]

    @property
    def per_cluster_members(self) -> list[np.ndarray]:
        """Inverse map: for each codeword, the sorted training indices it serves."""
        return [np.flatnonzero(self.cluster_of == j) for j in range(self.m)]


@dataclass(eq=False)
class DistortionReport:
    """Squared-error bookkeeping for one (training set, codebook, assignment)."""

    total_sq_error: float
    mean_sq_error_per_vector: float
    per_cluster_error: np.ndarray

    def __post_init__(self):
        self.per_cluster_error = np.asarray(self.per_cluster_error, dtype=np.float64)
        if self.total_sq_error < 0 or self.mean_sq_error_per_vector < 0:
            raise ValueError("distortion cannot be negative")


def sq_dist(a, b) -> float:
    """Squared Euclidean distance between two vectors of equal dimension."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    # Same accumulation path as assign_nearest, so scalar and batched
    # distances agree bitwise.
    return float(cdist(a[None, :], b[None, :], "sqeuclidean")[0, 0])


def assign_nearest(ts: TrainingSet, cb: Codebook) -> Assignment:
    """Assign every training vector to its closest codeword.

    Ties break to the lowest codeword index.
    """
    if ts.dim != cb.dim:
        raise ValueError(f"dimension mismatch: training {ts.dim} vs codebook {cb.dim}")
    d = cdist(ts.vectors, cb.codewords, "sqeuclidean")
    return Assignment(cluster_of=d.argmin(axis=1), m=cb.m)


def centroid(members) -> np.ndarray:
    """Componentwise arithmetic mean of a nonempty set of vectors."""
    arr = np.asarray(members, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[0] == 0:
        raise ValueError("centroid of an empty member set is undefined")
    return arr.mean(axis=0)


def distortion(ts: TrainingSet, cb: Codebook, asg: Assignment) -> DistortionReport:
    """Total and per-vector squared error of an assignment.

    ``total_sq_error`` is the sum of ``per_cluster_error`` by construction;
    ``mean_sq_error_per_vector`` (total / N) is the overall average distortion
    used by every stopping rule in this package.
    """
    if asg.n != ts.n or asg.m != cb.m:
        raise ValueError("assignment inconsistent with training set / codebook")
    diff = ts.vectors - cb.codewords[asg.cluster_of]
    per_vector = (diff * diff).sum(axis=1)
    per_cluster = np.bincount(asg.cluster_of, weights=per_vector, minlength=cb.m)
    total = float(per_cluster.sum())
    return DistortionReport(
        total_sq_error=total,
        mean_sq_error_per_vector=total / ts.n,
        per_cluster_error=per_cluster,
    )
