"""Similarity matrices and exemplar preferences.

The affinity engine consumes a dense N x N similarity matrix whose
off-diagonal entries are negative squared Euclidean distances between
training vectors.  The diagonal ("preferences", or self-similarities)
controls how many exemplars emerge and is set by one of two rules:

* uniform -- every point gets the same value (the conventional baseline;
  defaults to the median of the off-diagonal similarities), or
* network support -- each point gets ``rs`` times its average similarity
  to all other points, so well-supported points prefer themselves.

A freshly built matrix has an *unset* diagonal (stored as zero); running the
engine on it is an error, because zero is the maximal possible similarity
and would silently select every point as an exemplar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import TrainingSet


@dataclass(eq=False)
class SimilarityMatrix:
    """Dense similarity matrix with an optional preference rule on the diagonal.

    ``preference_mode`` is ``None`` until a rule has been applied, then
    ``("uniform", value)`` or ``("network_support", rs)``.
    """

    s: np.ndarray
    preference_mode: tuple | None = None

    def __post_init__(self):
        self.s = np.ascontiguousarray(self.s, dtype=np.float64)
        if self.s.ndim != 2 or self.s.shape[0] != self.s.shape[1]:
            raise ValueError(f"similarity matrix must be square, got {self.s.shape}")
        if not np.all(np.isfinite(self.s)):
            raise ValueError("similarity matrix contains non-finite entries")

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def preferences_set(self) -> bool:
        return self.preference_mode is not None


@dataclass(frozen=True)
class UniformPreference:
    """Same self-similarity for every point; ``value=None`` means the median
    of the off-diagonal similarities."""

    value: float | None = None


@dataclass(frozen=True)
class NetworkSupportPreference:
    """Self-similarity ``rs`` times each point's network support; ``rs > 0``."""

    rs: float


def build_similarity(ts: TrainingSet) -> SimilarityMatrix:
    """Negative squared Euclidean similarities, diagonal left unset."""
    if ts.n < 2:
        raise ValueError("similarity matrix needs at least 2 points")
    s = -cdist(ts.vectors, ts.vectors, "sqeuclidean")
    np.fill_diagonal(s, 0.0)
    return SimilarityMatrix(s=s, preference_mode=None)


def network_support(sim: SimilarityMatrix) -> np.ndarray:
    """Average similarity from all other points to each point.

    Entry m is ``sum_{m' != m} s(m', m) / (N - 1)``; always <= 0, and 0 only
    when every other point coincides with point m.
    """
    if sim.n < 2:
        raise ValueError("network support needs at least 2 points")
    off_diag_colsum = sim.s.sum(axis=0) - sim.s.diagonal()
    return off_diag_colsum / (sim.n - 1)


def median_off_diagonal(sim: SimilarityMatrix) -> float:
    """Median of all off-diagonal similarities (the uniform-preference default)."""
    mask = ~np.eye(sim.n, dtype=bool)
    return float(np.median(sim.s[mask]))


def apply_preference(
    sim: SimilarityMatrix, mode: UniformPreference | NetworkSupportPreference
) -> SimilarityMatrix:
    """Return a copy of ``sim`` with the diagonal set by the given rule.

    Off-diagonal entries are never altered.
    """
    s = sim.s.copy()
    if isinstance(mode, NetworkSupportPreference):
        rs = float(mode.rs)
        if not np.isfinite(rs) or rs <= 0:
            raise ValueError(f"rs must be a positive finite real, got {mode.rs}")
        np.fill_diagonal(s, rs * network_support(sim))
        return SimilarityMatrix(s=s, preference_mode=("network_support", rs))
    if isinstance(mode, UniformPreference):
        value = median_off_diagonal(sim) if mode.value is None else float(mode.value)
        if not np.isfinite(value):
            raise ValueError(f"uniform preference must be finite, got {mode.value}")
        np.fill_diagonal(s, value)
        return SimilarityMatrix(s=s, preference_mode=("uniform", value))
    raise TypeError(f"unknown preference mode: {mode!r}")
