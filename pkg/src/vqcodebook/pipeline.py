"""The hybrid codebook pipeline: network-support clustering plus LBG polish.

Steps: build similarities, compute network support, tune ``rs`` until the
converged exemplar count hits the target codebook size, materialize the
exemplar codebook, adjust its size if the search plateaued past the target,
and hand it to LBG as the initial codebook.

The exemplar count is (empirically) nonincreasing in ``rs``, so the search
brackets the target by doubling/halving from ``rs_initial`` and then bisects
in log space.  If a non-monotone pair is ever observed, the search falls back
to a geometric grid scan over ``rs_bounds``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .core import Codebook, TrainingSet, assign_nearest, distortion
from .lbg import LBGConfig, LBGResult, lbg_refine
from .ap_engine import APConfig, APResult, NoExemplarsError, run_ap
from .imageio import psnr_from_mse
from .similarity import (
    NetworkSupportPreference,
    SimilarityMatrix,
    UniformPreference,
    apply_preference,
    build_similarity,
    median_off_diagonal,
)

EXACT = "exact"
NEAREST = "nearest"


class SizeSearchError(RuntimeError):
    """Target codebook size out of reach; carries the achievable count range."""

    def __init__(self, target: int, achievable: tuple[int, int] | None):
        self.target = target
        self.achievable = achievable
        detail = (
            f"achievable counts {achievable[0]}..{achievable[1]}"
            if achievable
            else "no run produced exemplars"
        )
        super().__init__(f"could not reach {target} exemplars: {detail}")


class _ExactHit(Exception):
    def __init__(self, x: float, res: APResult):
        self.x, self.res = x, res


class _BudgetExhausted(Exception):
    pass


@dataclass
class PipelineConfig:
    target_m: int
    rs_initial: float = 0.1
    rs_bounds: tuple[float, float] = (1e-4, 16.0)
    rs_search_max_steps: int = 40
    ap: APConfig = field(default_factory=APConfig)
    lbg: LBGConfig = field(default_factory=LBGConfig)
    size_policy: str = EXACT

    def __post_init__(self):
        lo, hi = self.rs_bounds
        if not 0 < lo < hi:
            raise ValueError(f"rs_bounds must satisfy 0 < lo < hi, got {self.rs_bounds}")
        if self.target_m < 1:
            raise ValueError("target_m must be >= 1")
        if self.rs_search_max_steps < 1:
            raise ValueError("rs_search_max_steps must be >= 1")
        if self.size_policy not in (EXACT, NEAREST):
            raise ValueError(f"unknown size_policy: {self.size_policy}")


@dataclass(eq=False)
class PipelineResult:
    codebook: Codebook
    rs_used: float
    exemplar_count_before_adjust: int
    iap_result: APResult
    lbg_result: LBGResult
    stage_psnr: tuple[float, float] | None = None

    @property
    def iap_stage_mse(self) -> float:
        """Mean squared error per vector of the codebook handed to LBG."""
        return self.lbg_result.distortion_trace[0]

    @property
    def final_mse(self) -> float:
        return self.lbg_result.distortion_trace[-1]


def _search_monotone_scale(
    evaluate: Callable[[float], APResult | None],
    target: int,
    initial: float,
    bounds: tuple[float, float],
    max_steps: int,
) -> tuple[float, APResult]:
    """Find a positive scale whose exemplar count hits ``target``.

    ``evaluate`` returns the engine result for a scale, or ``None`` when no
    exemplar emerged (counted as 0 exemplars).  Returns the first scale whose
    *converged* run hits the target exactly, else the evaluated scale whose
    count is nearest the target (ties toward the larger count, then converged
    runs, then the smaller scale).
    """
    lo, hi = bounds
    cache: dict[float, APResult | None] = {}

    def count_of(res: APResult | None) -> int:
        return 0 if res is None else res.n_exemplars

    def ev(x: float) -> int:
        x = float(x)
        if x not in cache:
            if len(cache) >= max_steps:
                raise _BudgetExhausted
            res = evaluate(x)
            cache[x] = res
            if res is not None and res.converged and res.n_exemplars == target:
                raise _ExactHit(x, res)
        return count_of(cache[x])

    def monotone() -> bool:
        counts = [count_of(res) for _, res in sorted(cache.items())]
        return all(later <= earlier for earlier, later in zip(counts, counts[1:]))

    def grid_scan():
        remaining = max_steps - len(cache)
        if remaining >= 2:
            ratio = hi / lo
            for i in range(remaining):
                ev(lo * ratio ** (i / (remaining - 1)))

    try:
        x = min(max(float(initial), lo), hi)
        c = ev(x)
        x_lo = x_hi = None  # bracket: count(x_lo) > target > count(x_hi), x_lo < x_hi
        if c > target:
            x_lo = x
            while c > target and x < hi:
                x = min(x * 2.0, hi)
                c = ev(x)
                if c > target:
                    x_lo = x
            if c < target:
                x_hi = x
        elif c < target:
            x_hi = x
            while c < target and x > lo:
                x = max(x / 2.0, lo)
                c = ev(x)
                if c < target:
                    x_hi = x
            if c > target:
                x_lo = x
        # c == target here means an unconverged exact-count run; it stays a
        # fallback candidate but cannot seed a bracket.

        if not monotone():
            grid_scan()
        elif x_lo is not None and x_hi is not None:
            while True:
                mid = math.sqrt(x_lo * x_hi)
                if not x_lo < mid < x_hi:
                    break
                c = ev(mid)
                if not monotone():
                    grid_scan()
                    break
                if c > target:
                    x_lo = mid
                elif c < target:
                    x_hi = mid
                else:
                    break
    except _ExactHit as hit:
        return hit.x, hit.res
    except _BudgetExhausted:
        pass

    usable = [(x, res) for x, res in cache.items() if res is not None]
    if not usable:
        counts = [count_of(res) for res in cache.values()]
        raise SizeSearchError(target, (min(counts), max(counts)) if counts else None)

    def preference_key(item: tuple[float, APResult]):
        x, res = item
        return (abs(res.n_exemplars - target), -res.n_exemplars, 0 if res.converged else 1, x)

    return min(usable, key=preference_key)


def search_rs(sim: SimilarityMatrix, target_m: int, cfg: PipelineConfig) -> tuple[float, APResult]:
    """Tune the network-support ratio until the exemplar count hits ``target_m``."""
    if target_m > sim.n:
        raise ValueError(f"target_m {target_m} exceeds the number of points {sim.n}")

    def evaluate(rs: float) -> APResult | None:
        with_pref = apply_preference(sim, NetworkSupportPreference(rs))
        try:
            return run_ap(with_pref, cfg.ap)
        except NoExemplarsError:
            return None

    return _search_monotone_scale(
        evaluate, target_m, cfg.rs_initial, cfg.rs_bounds, cfg.rs_search_max_steps
    )


def search_uniform_scale(
    sim: SimilarityMatrix, target_m: int, cfg: PipelineConfig
) -> tuple[float, APResult]:
    """Tune a uniform preference (scale times the off-diagonal median) to hit
    ``target_m`` exemplars.

    The conventional-baseline analog of :func:`search_rs`, used by the
    comparison harness to produce equal-size codebooks.
    """
    if target_m > sim.n:
        raise ValueError(f"target_m {target_m} exceeds the number of points {sim.n}")
    median = median_off_diagonal(sim)

    def evaluate(scale: float) -> APResult | None:
        with_pref = apply_preference(sim, UniformPreference(scale * median))
        try:
            return run_ap(with_pref, cfg.ap)
        except NoExemplarsError:
            return None

    return _search_monotone_scale(
        evaluate, target_m, 1.0, cfg.rs_bounds, cfg.rs_search_max_steps
    )


def adjust_codebook_size(cb: Codebook, target_m: int, ts: TrainingSet) -> Codebook:
    """Merge or split codewords until the codebook has exactly ``target_m``.

    Oversized books repeatedly merge the closest codeword pair into its
    midpoint; undersized books repeatedly split the codeword with the highest
    cluster error, duplicating it with a small deterministic perturbation
    (+1e-3 of the per-dimension data range on every component).
    """
    if target_m > ts.n:
        raise ValueError(f"target_m {target_m} exceeds the number of training vectors {ts.n}")
    if target_m < 1:
        raise ValueError("target_m must be >= 1")
    if cb.m == target_m:
        return cb

    codewords = cb.codewords.copy()
    while len(codewords) > target_m:
        d = cdist(codewords, codewords, "sqeuclidean")
        iu = np.triu_indices(len(codewords), k=1)
        k = int(d[iu].argmin())
        i, j = int(iu[0][k]), int(iu[1][k])
        codewords[i] = (codewords[i] + codewords[j]) / 2.0
        codewords = np.delete(codewords, j, axis=0)

    if len(codewords) < target_m:
        span = ts.vectors.max(axis=0) - ts.vectors.min(axis=0)
        perturbation = 1e-3 * span
        while len(codewords) < target_m:
            working = Codebook(codewords=codewords, source=cb.source)
            asg = assign_nearest(ts, working)
            report = distortion(ts, working, asg)
            worst = int(report.per_cluster_error.argmax())
            codewords = np.vstack([codewords, codewords[worst] + perturbation])

    return Codebook(codewords=codewords, source=f"{cb.source}+resize({target_m})")


def run_iap_lbg(
    ts: TrainingSet, cfg: PipelineConfig, image_scale: bool = False
) -> PipelineResult:
    """Full hybrid pipeline: similarities, rs search, exemplar codebook, LBG.

    With ``image_scale=True`` the result also carries the vector-space PSNR
    (255 peak) of the codebook before and after the LBG stage.
    """
    if cfg.target_m > ts.n:
        raise ValueError(f"target_m {cfg.target_m} exceeds the number of vectors {ts.n}")

    sim = build_similarity(ts)
    rs, ap_result = search_rs(sim, cfg.target_m, cfg)

    exemplar_count = ap_result.n_exemplars
    codebook = Codebook(
        codewords=ts.vectors[ap_result.exemplar_indices].copy(),
        source=f"iap(rs={rs:g})",
    )
    if cfg.size_policy == EXACT and codebook.m != cfg.target_m:
        codebook = adjust_codebook_size(codebook, cfg.target_m, ts)

    lbg_result = lbg_refine(ts, codebook, cfg.lbg)

    stage_psnr = None
    if image_scale:
        dim = ts.dim
        stage_psnr = (
            psnr_from_mse(lbg_result.distortion_trace[0] / dim),
            psnr_from_mse(lbg_result.distortion_trace[-1] / dim),
        )

    final = Codebook(
        codewords=lbg_result.codebook.codewords,
        source=f"iap-lbg(rs={rs:g},m={lbg_result.codebook.m})",
    )
    return PipelineResult(
        codebook=final,
        rs_used=rs,
        exemplar_count_before_adjust=exemplar_count,
        iap_result=ap_result,
        lbg_result=lbg_result,
        stage_psnr=stage_psnr,
    )
