"""Rank intervals from bootstrap refits (HAPM) and posterior draws (LAPM)."""

from __future__ import annotations

import math

import numpy as np

from .errors import BootstrapDegenerate, SingularSystem
from .lapm import PosteriorSamples, SpectralBasis
from .metrics import RankedTable, descending_ranks, rank_scores
from .model import ExtendedDesign, GeneralizedLineup
from .regression import CVConfig, fit_ridge

MIN_POSTERIOR_DRAWS = 100


def rank_interval(ranks: np.ndarray) -> tuple[int, int]:
    """Empirical 25th/75th percentiles of a rank sample, rounded outward."""
    lo, hi = np.percentile(ranks, [25, 75])
    return int(math.floor(lo + 1e-9)), int(math.ceil(hi - 1e-9))


def summarize_draws(method: str, units, point: np.ndarray, draws: np.ndarray) -> dict[int, RankedTable]:
    """Point ranks plus 50% rank intervals, one table per unit size.

    ``draws`` is replicates x units; ranks are recomputed within each size
    for every replicate.
    """
    units = list(units)
    sizes = np.array([g.size for g in units])
    tables = {}
    for m in sorted(set(sizes.tolist())):
        idx = np.flatnonzero(sizes == m)
        table = rank_scores(method, {units[i]: float(point[i]) for i in idx}, m)
        rep_ranks = np.vstack([descending_ranks(row) for row in draws[:, idx]])
        col = {units[i]: c for c, i in enumerate(idx)}
        for r in table.rows:
            lo, hi = rank_interval(rep_ranks[:, col[r.lineup]])
            r.rank_lo, r.rank_hi = max(lo, 1), min(hi, len(idx))
            r.outside = not r.rank_lo <= r.rank <= r.rank_hi
        table.n_replicates = int(draws.shape[0])
        tables[m] = table
    return tables


def bootstrap_draws(design: ExtendedDesign, cfg: CVConfig | None, B: int, seed: int = 0,
                    reuse_lambda: bool = True, max_retries: int = 20):
    """Refit ridge on B row-resampled designs and predict every design row.

    Returns (point_fit, draws) where draws is B x rows. With ``reuse_lambda``
    the replicates keep the penalty chosen on the full data instead of
    re-running cross-validation.
    """
    cfg = cfg or CVConfig()
    if B < 1:
        raise ValueError("need at least one bootstrap replicate")
    X, Y, W = design.X, design.Y, design.W
    n = len(Y)
    if n == 0:
        raise BootstrapDegenerate("empty design")
    point = fit_ridge(X, Y, W, cfg)
    rep_cfg = CVConfig(lam=point.lam, intercept=cfg.intercept) if reuse_lambda else cfg
    children = np.random.SeedSequence(seed).spawn(B)
    draws = np.empty((B, n))
    for b, child in enumerate(children):
        rng = np.random.default_rng(child)
        for _ in range(max_retries):
            idx = rng.integers(0, n, n)
            if W[idx].sum() > 0 and len(np.unique(idx)) > 1:
                try:
                    fit = fit_ridge(X[idx], Y[idx], W[idx], rep_cfg)
                except (SingularSystem, np.linalg.LinAlgError):
                    continue
                break
        else:
            raise BootstrapDegenerate(f"replicate {b}: no usable resample in {max_retries} tries")
        draws[b] = fit.predict(X)
    return point, draws


def bootstrap_hapm(design: ExtendedDesign, cfg: CVConfig | None = None, B: int = 200,
                   seed: int = 0, reuse_lambda: bool = True) -> dict[int, RankedTable]:
    point, draws = bootstrap_draws(design, cfg, B, seed, reuse_lambda)
    units = list(design.rows)
    return summarize_draws("HAPM", units, point.fitted, draws)


def posterior_ranks(samples: PosteriorSamples, basis: SpectralBasis) -> dict[int, RankedTable]:
    """Rank intervals of vertex scores over posterior draws; points are posterior means."""
    if samples.theta_draws.shape[0] < MIN_POSTERIOR_DRAWS:
        raise ValueError(f"need at least {MIN_POSTERIOR_DRAWS} retained draws")
    beta = samples.beta_draws(basis)
    return summarize_draws("LAPM", basis.nodes, beta.mean(axis=0), beta)


def interval_coverage(tables: dict[int, RankedTable], truth: dict[GeneralizedLineup, int]) -> float:
    """Share of units whose true rank lies inside their interval."""
    hits = total = 0
    for t in tables.values():
        for r in t.rows:
            if r.lineup in truth:
                total += 1
                hits += r.rank_lo <= truth[r.lineup] <= r.rank_hi
    return hits / total if total else float("nan")
