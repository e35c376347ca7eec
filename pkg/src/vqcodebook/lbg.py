"""Conventional LBG codebook refinement.

Alternates nearest-codeword assignment with centroid replacement until the
overall average distortion stops moving (|D_prev - D| below a threshold), or
an iteration cap is reached.  Usable standalone with seeded random
initialization, or as the polish stage after exemplar clustering.

Random initialization uses numpy's PCG64 generator, so a given seed replays
identically on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Assignment, Codebook, TrainingSet, assign_nearest, distortion

SPLIT_WORST = "split_worst"
KEEP_CODEWORD = "keep_codeword"


@dataclass
class LBGConfig:
    max_iterations: int = 50
    threshold: float = 1e-8
    seed: int = 0
    empty_cluster_policy: str = SPLIT_WORST

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")
        if self.empty_cluster_policy not in (SPLIT_WORST, KEEP_CODEWORD):
            raise ValueError(f"unknown empty_cluster_policy: {self.empty_cluster_policy}")


@dataclass(eq=False)
class LBGResult:
    codebook: Codebook
    assignment: Assignment
    distortion_trace: list[float]
    iterations_run: int
    terminated_by: str  # "threshold" | "max_iterations"


def init_random(ts: TrainingSet, m: int, seed: int) -> Codebook:
    """Codebook of M distinct training vectors, sampled without replacement."""
    if not 1 <= m <= ts.n:
        raise ValueError(f"codebook size must be in [1, {ts.n}], got {m}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(ts.n, size=m, replace=False)
    return Codebook(codewords=ts.vectors[idx].copy(), source=f"random(seed={seed})")


def _repair_empty_clusters(
    codewords: np.ndarray,
    empty: np.ndarray,
    ts: TrainingSet,
    asg: Assignment,
):
    """Replace each memberless codeword with the worst-served training vector.

    Errors are measured against the freshly updated centroids.  The donor is
    the cluster with the highest remaining error; the donated member is its
    farthest vector.  Donated members are retired from the bookkeeping so two
    empty slots never receive the same vector.
    """
    diff = ts.vectors - codewords[asg.cluster_of]
    per_vector = (diff * diff).sum(axis=1)
    per_cluster = np.bincount(asg.cluster_of, weights=per_vector, minlength=len(codewords))
    membership = asg.cluster_of.copy()
    for slot in empty:
        while True:
            donor = int(per_cluster.argmax())
            members = np.flatnonzero(membership == donor)
            if len(members) > 0:
                break
            per_cluster[donor] = -np.inf
        donated = members[per_vector[members].argmax()]
        codewords[slot] = ts.vectors[donated]
        membership[donated] = -1
        per_cluster[donor] -= per_vector[donated]


def lbg_refine(ts: TrainingSet, initial: Codebook, cfg: LBGConfig | None = None) -> LBGResult:
    """Refine a codebook by Lloyd-style iteration.

    Each iteration assigns every vector to its nearest codeword, records the
    overall average distortion D, stops when |D_prev - D| < threshold or the
    cap is hit, and otherwise replaces each codeword with the centroid of its
    cluster.  Memberless codewords are handled per ``empty_cluster_policy``.
    """
    cfg = cfg or LBGConfig()
    if ts.dim != initial.dim:
        raise ValueError(f"dimension mismatch: training {ts.dim} vs codebook {initial.dim}")

    codewords = initial.codewords.copy()
    m = initial.m
    trace: list[float] = []
    prev_d: float | None = None
    asg = None
    terminated_by = "max_iterations"

    for iteration in range(1, cfg.max_iterations + 1):
        cb = Codebook(codewords=codewords, source=initial.source)
        asg = assign_nearest(ts, cb)
        report = distortion(ts, cb, asg)
        d = report.mean_sq_error_per_vector
        trace.append(d)

        if prev_d is not None and abs(prev_d - d) < cfg.threshold:
            terminated_by = "threshold"
            break
        prev_d = d
        if iteration == cfg.max_iterations:
            break

        counts = np.bincount(asg.cluster_of, minlength=m)
        sums = np.empty_like(codewords)
        for j in range(ts.dim):
            sums[:, j] = np.bincount(asg.cluster_of, weights=ts.vectors[:, j], minlength=m)
        nonempty = counts > 0
        codewords = codewords.copy()
        codewords[nonempty] = sums[nonempty] / counts[nonempty, None]

        empty = np.flatnonzero(~nonempty)
        if len(empty) and cfg.empty_cluster_policy == SPLIT_WORST:
            _repair_empty_clusters(codewords, empty, ts, asg)

    return LBGResult(
        codebook=Codebook(codewords=codewords, source=initial.source or "lbg"),
        assignment=asg,
        distortion_trace=trace,
        iterations_run=iteration,
        terminated_by=terminated_by,
    )
