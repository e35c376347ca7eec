"""Affinity message passing: damped responsibility/availability updates,
exemplar identification, convergence detection, and net-similarity tracing.

Updates are synchronous sweeps: every raw responsibility is computed from the
pre-update availabilities, then every raw availability from the pre-update
availabilities and the fresh responsibilities.  Both message types are mixed
as ``new = damping * old + (1 - damping) * raw``.

The per-row ``max over m' != m`` uses the top-2 maxima of ``a + s``, so one
iteration costs O(N^2).  The sweeps are compiled with numba as sequential
row-major passes (the column sums accumulate into a cached vector while
streaming rows), free of BLAS and threading, so results are bit-identical
across runs and thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import Assignment
from .similarity import SimilarityMatrix


class NoExemplarsError(RuntimeError):
    """No point selected itself: preferences too negative, or no convergence."""


@njit(cache=True)
def _responsibility_sweep(s, a, r, damping):
    n = s.shape[0]
    keep = 1.0 - damping
    for i in range(n):
        best = -np.inf
        second = -np.inf
        best_j = -1
        for j in range(n):
            v = a[i, j] + s[i, j]
            if v > best:
                second = best
                best = v
                best_j = j
            elif v > second:
                second = v
        for j in range(n):
            competitor = second if j == best_j else best
            r[i, j] = damping * r[i, j] + keep * (s[i, j] - competitor)


@njit(cache=True)
def _availability_sweep(r, a, damping, choice):
    """Availability sweep; also fills ``choice`` with each row's argmax of
    a + r (ties to the lowest index), read from the freshly written values."""
    n = r.shape[0]
    keep = 1.0 - damping
    # colsum[j] = r(j,j) + sum over i != j of max(0, r(i,j)), accumulated in
    # row-major order so the colsum/diag vectors stay cache-resident
    colsum = np.zeros(n)
    diag = np.empty(n)
    for i in range(n):
        for j in range(n):
            v = r[i, j]
            if i == j:
                colsum[j] += v
                diag[j] = v
            elif v > 0.0:
                colsum[j] += v
    for i in range(n):
        best = -np.inf
        best_j = 0
        for j in range(n):
            if i == j:
                raw = colsum[j] - diag[j]
            else:
                rp = r[i, j] if r[i, j] > 0.0 else 0.0
                raw = colsum[j] - rp
                if raw > 0.0:
                    raw = 0.0
            new_a = damping * a[i, j] + keep * raw
            a[i, j] = new_a
            v = new_a + r[i, j]
            if v > best:
                best = v
                best_j = j
        choice[i] = best_j


@njit(cache=True)
def _exemplar_choice(a, r):
    """argmax_m of a(n,m) + r(n,m) per row, ties to the lowest index."""
    n = a.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = -np.inf
        best_j = 0
        for j in range(n):
            v = a[i, j] + r[i, j]
            if v > best:
                best = v
                best_j = j
        out[i] = best_j
    return out


@dataclass(eq=False)
class MessageState:
    """Paired responsibility/availability matrices plus iteration count."""

    r: np.ndarray
    a: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        self.r = np.ascontiguousarray(self.r, dtype=np.float64)
        self.a = np.ascontiguousarray(self.a, dtype=np.float64)
        if self.r.shape != self.a.shape or self.r.ndim != 2:
            raise ValueError("r and a must be square matrices of equal shape")

    @classmethod
    def zeros(cls, n: int) -> "MessageState":
        return cls(r=np.zeros((n, n)), a=np.zeros((n, n)))

    @property
    def n(self) -> int:
        return self.r.shape[0]


@dataclass
class APConfig:
    damping: float = 0.5
    max_iterations: int = 1000
    stable_window: int = 50
    trace_energy: bool = False

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ValueError(f"damping must be in [0, 1), got {self.damping}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 1 <= self.stable_window <= self.max_iterations:
            raise ValueError("stable_window must be in [1, max_iterations]")


@dataclass(eq=False)
class APResult:
    exemplar_indices: np.ndarray
    assignment: Assignment
    iterations_run: int
    converged: bool
    energy_trace: list[float] | None = None

    @property
    def n_exemplars(self) -> int:
        return len(self.exemplar_indices)


def _require_preferences(sim: SimilarityMatrix):
    if not sim.preferences_set:
        raise ValueError(
            "similarity diagonal is unset; apply a preference rule before message passing"
        )


def update_responsibilities(
    sim: SimilarityMatrix, state: MessageState, damping: float
) -> MessageState:
    """One synchronous responsibility sweep, damped in place."""
    _require_preferences(sim)
    if sim.n < 2:
        raise ValueError("message passing needs at least 2 points")
    _responsibility_sweep(sim.s, state.a, state.r, float(damping))
    return state


def update_availabilities(state: MessageState, damping: float) -> MessageState:
    """One synchronous availability sweep, damped in place."""
    if state.n < 2:
        raise ValueError("message passing needs at least 2 points")
    scratch = np.empty(state.n, dtype=np.int64)
    _availability_sweep(state.r, state.a, float(damping), scratch)
    return state


def _cleanup_assignment(sim: SimilarityMatrix, exemplars: np.ndarray) -> Assignment:
    """Assign every point to its most similar exemplar; exemplars to themselves."""
    k = len(exemplars)
    sub = sim.s[:, exemplars]
    cluster_of = sub.argmax(axis=1)
    cluster_of[exemplars] = np.arange(k)
    return Assignment(cluster_of=cluster_of, m=k)


def identify_exemplars(
    sim: SimilarityMatrix, state: MessageState
) -> tuple[np.ndarray, Assignment]:
    """Exemplar set and cleaned-up assignment from the current messages.

    A point is an exemplar when its own index maximizes ``a(n, m) + r(n, m)``
    over m (ties to the lowest index).  Every point, including any whose raw
    argmax lands on a non-exemplar mid-convergence, is then reassigned to its
    most similar exemplar so the result is always a well-formed clustering.
    """
    choice = _exemplar_choice(state.a, state.r)
    exemplars = np.flatnonzero(choice == np.arange(state.n))
    if len(exemplars) == 0:
        raise NoExemplarsError(
            "no point selected itself as exemplar; preferences may be too negative "
            "or message passing has not converged"
        )
    return exemplars, _cleanup_assignment(sim, exemplars)


def net_similarity(sim: SimilarityMatrix, exemplars: np.ndarray, asg: Assignment) -> float:
    """Sum of each point's similarity to its exemplar plus exemplar preferences.

    Higher is better.  Exemplar rows contribute their own diagonal preference,
    so the whole objective is one gather over the similarity matrix.
    """
    exemplars = np.asarray(exemplars, dtype=np.int64)
    targets = exemplars[asg.cluster_of]
    return float(sim.s[np.arange(asg.n), targets].sum())


def run_ap(sim: SimilarityMatrix, cfg: APConfig | None = None) -> APResult:
    """Run message passing to convergence or the iteration cap.

    Messages start at zero.  After each iteration the exemplar set is
    recorded; the run converges once the set is unchanged for
    ``stable_window`` consecutive iterations.  An empty exemplar set at
    termination raises :class:`NoExemplarsError`.
    """
    cfg = cfg or APConfig()
    _require_preferences(sim)
    if sim.n < 2:
        raise ValueError("message passing needs at least 2 points")

    n = sim.n
    state = MessageState.zeros(n)
    idx = np.arange(n)
    choice = np.empty(n, dtype=np.int64)
    trace: list[float] | None = [] if cfg.trace_energy else None
    prev_exemplars: np.ndarray | None = None
    unchanged = 0
    converged = False
    iterations = 0

    for iterations in range(1, cfg.max_iterations + 1):
        _responsibility_sweep(sim.s, state.a, state.r, cfg.damping)
        _availability_sweep(state.r, state.a, cfg.damping, choice)
        state.iteration = iterations

        exemplars = np.flatnonzero(choice == idx)

        if trace is not None:
            if len(exemplars) == 0:
                trace.append(float("nan"))
            else:
                asg = _cleanup_assignment(sim, exemplars)
                trace.append(net_similarity(sim, exemplars, asg))

        if prev_exemplars is not None and np.array_equal(exemplars, prev_exemplars):
            unchanged += 1
        else:
            unchanged = 0
        prev_exemplars = exemplars
        if unchanged >= cfg.stable_window:
            converged = True
            break

    exemplars, assignment = identify_exemplars(sim, state)
    return APResult(
        exemplar_indices=exemplars,
        assignment=assignment,
        iterations_run=iterations,
        converged=converged,
        energy_trace=trace,
    )
