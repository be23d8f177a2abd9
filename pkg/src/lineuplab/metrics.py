"""PM, APM, PAPM and HAPM estimators plus within-size ranking."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .errors import FeasibilityError, UnknownPlayer
from .ingest import LeagueDesignRow
from .model import AggregatedRecord, ExtendedDesign, GeneralizedLineup, as_lineup
from .regression import CVConfig, RidgeFit, fit_ridge

METHODS = ("PM", "APM", "APM_LEAGUE", "PAPM", "PAPM_LEAGUE", "HAPM", "LAPM", "SUM_APM")
DEFAULT_PAPM_MAX_COLUMNS = 5000


@dataclass
class MetricResult:
    method: str
    per_unit: dict[GeneralizedLineup, float]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        bad = [g for g, v in self.per_unit.items() if not np.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite scores for {bad[:3]}")

    def sizes(self) -> list[int]:
        return sorted({g.size for g in self.per_unit})

    def of_size(self, m: int) -> dict[GeneralizedLineup, float]:
        return {g: v for g, v in self.per_unit.items() if g.size == m}

    def players(self) -> dict[str, float]:
        """Individual scores keyed by plain player id."""
        return {g.members[0]: v for g, v in self.per_unit.items() if g.size == 1}

    def __getitem__(self, lineup) -> float:
        return self.per_unit[as_lineup(lineup)]


@dataclass
class RankedRow:
    lineup: GeneralizedLineup
    score: float
    rank: int
    rank_lo: int | None = None
    rank_hi: int | None = None
    tied: bool = False
    outside: bool = False


@dataclass
class RankedTable:
    method: str
    size: int
    rows: list[RankedRow]
    n_replicates: int = 0

    def __len__(self):
        return len(self.rows)

    def order(self) -> list[GeneralizedLineup]:
        return [r.lineup for r in self.rows]

    def ranks(self) -> dict[GeneralizedLineup, int]:
        return {r.lineup: r.rank for r in self.rows}

    def row(self, lineup) -> RankedRow:
        g = as_lineup(lineup)
        for r in self.rows:
            if r.lineup == g:
                return r
        raise KeyError(g)


TIE_RTOL = 1e-10


def descending_ranks(scores: np.ndarray) -> np.ndarray:
    """Rank 1 = largest score; ties share the smallest rank.

    Scores closer than ``TIE_RTOL`` relative to the largest magnitude count
    as tied, so solver round-off does not split exact ties.
    """
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        return np.zeros(0, dtype=int)
    tol = TIE_RTOL * max(1.0, float(np.abs(s).max()))
    order = np.argsort(-s, kind="stable")
    ranks = np.empty(s.size, dtype=int)
    rank = 1
    for pos, i in enumerate(order):
        if pos and s[order[pos - 1]] - s[i] > tol:
            rank = pos + 1
        ranks[i] = rank
    return ranks


def rank_scores(method: str, scores: Mapping[GeneralizedLineup, float], m: int) -> RankedTable:
    if m < 1:
        raise ValueError("size must be at least 1")
    units = sorted((g for g in scores if g.size == m), key=GeneralizedLineup.sort_key)
    if not units:
        return RankedTable(method, m, [])
    vals = np.array([scores[g] for g in units], dtype=float)
    ranks = descending_ranks(vals)
    counts = np.bincount(ranks)
    rows = [
        RankedRow(g, float(v), int(r), tied=bool(counts[r] > 1))
        for g, v, r in zip(units, vals, ranks)
    ]
    rows.sort(key=lambda r: (r.rank, r.lineup.members))
    return RankedTable(method, m, rows)


def rank_within_size(result: MetricResult, m: int) -> RankedTable:
    return rank_scores(result.method, result.per_unit, m)


def _meta(fit: RidgeFit, design_shape, cfg: CVConfig, **extra) -> dict:
    meta = {
        "lambda": fit.lam,
        "lambda_policy": "fixed" if cfg.lam is not None else "cv",
        "folds": cfg.folds,
        "seed": cfg.seed,
        "design_rows": int(design_shape[0]),
        "design_cols": int(design_shape[1]),
    }
    meta.update(extra)
    return meta


def raw_pm(records: Sequence[AggregatedRecord]) -> MetricResult:
    return MetricResult("PM", {r.lineup: float(r.pm) for r in records}, {"units": len(records)})


def _ridge_result(method: str, design: ExtendedDesign, cfg: CVConfig) -> tuple[RidgeFit, MetricResult]:
    fit = fit_ridge(design.X, design.Y, design.W, cfg)
    per_unit = {GeneralizedLineup((p,)): float(b) for p, b in zip(design.players, fit.beta)}
    for row, yhat in zip(design.rows, fit.fitted):
        if isinstance(row, GeneralizedLineup):
            per_unit[row] = float(yhat)
    return fit, MetricResult(method, per_unit, _meta(fit, design.shape, cfg))


def apm(design: ExtendedDesign, cfg: CVConfig | None = None) -> MetricResult:
    """Team-level APM: ridge coefficients per player, fitted values per full lineup."""
    cfg = cfg or CVConfig()
    if len(set(design.sizes.tolist())) > 1:
        raise ValueError("APM expects full-lineup rows only; use hapm for extended designs")
    fit, res = _ridge_result("APM", design, cfg)
    res.meta["coefficients"] = dict(zip(design.players, fit.beta.tolist()))
    return res


def hapm(design: ExtendedDesign, cfg: CVConfig | None = None) -> MetricResult:
    """Ridge on the extended design.

    Player scores are the coefficients; every generalized lineup row is
    scored by its fitted value, so singleton rows reproduce the coefficient.
    """
    cfg = cfg or CVConfig()
    fit, res = _ridge_result("HAPM", design, cfg)
    res.meta["coefficients"] = dict(zip(design.players, fit.beta.tolist()))
    res.meta["max_size"] = int(design.sizes.max()) if len(design.rows) else 0
    return res


def apm_league(design: ExtendedDesign, cfg: CVConfig | None = None) -> MetricResult:
    """League-level APM on the +1/-1 home/away design; players only."""
    cfg = cfg or CVConfig()
    if design.mode != "league":
        raise ValueError("apm_league needs a league-mode design")
    fit = fit_ridge(design.X, design.Y, design.W, cfg)
    per_unit = {GeneralizedLineup((p,)): float(b) for p, b in zip(design.players, fit.beta)}
    return MetricResult("APM_LEAGUE", per_unit, _meta(fit, design.shape, cfg))


def _observed_pairs(lineups) -> list[GeneralizedLineup]:
    pairs = {GeneralizedLineup(p) for g in lineups for p in combinations(g.members, 2)}
    return sorted(pairs, key=GeneralizedLineup.sort_key)


def papm_design(
    records: Sequence[AggregatedRecord], weighting: str = "total"
) -> tuple[np.ndarray, list[GeneralizedLineup], np.ndarray, np.ndarray]:
    """Player columns followed by one column per pair that shared the court.

    Returns (X, columns, Y, W) with rows in (size, members) order.
    """
    recs = sorted((r for r in records if r.seconds > 0), key=lambda r: r.lineup.sort_key())
    players = sorted({p for r in recs for p in r.lineup.members})
    columns = [GeneralizedLineup((p,)) for p in players] + _observed_pairs(r.lineup for r in recs)
    X = np.array(
        [[1.0 if c.issubset(r.lineup) else 0.0 for c in columns] for r in recs]
    ).reshape(len(recs), len(columns))
    Y = np.array([r.pm for r in recs], dtype=float)
    W = np.array([r.seconds if weighting == "total" else r.seconds_per_game for r in recs])
    return X, columns, Y, W


def _check_width(ncols: int, max_columns: int):
    if ncols > max_columns:
        raise FeasibilityError(
            f"PAPM design needs {ncols} columns (cap {max_columns}); "
            "HAPM scales to all generalized lineups without interaction columns"
        )


def papm(
    records: Sequence[AggregatedRecord],
    cfg: CVConfig | None = None,
    weighting: str = "total",
    max_columns: int = DEFAULT_PAPM_MAX_COLUMNS,
) -> MetricResult:
    cfg = cfg or CVConfig()
    X, columns, Y, W = papm_design(records, weighting)
    _check_width(len(columns), max_columns)
    fit = fit_ridge(X, Y, W, cfg)
    per_unit = {c: float(b) for c, b in zip(columns, fit.beta)}
    return MetricResult("PAPM", per_unit, _meta(fit, X.shape, cfg))


def papm_league_design(rows: Sequence[LeagueDesignRow]):
    """League PAPM design: +1/-1 player columns, pair columns +1 when both are
    on the home floor, -1 when both are on the away floor, else 0."""
    players = sorted({p for r in rows for p in r.home_lineup.members + r.away_lineup.members})
    pairs = _observed_pairs([r.home_lineup for r in rows] + [r.away_lineup for r in rows])
    columns = [GeneralizedLineup((p,)) for p in players] + pairs
    col = {c: j for j, c in enumerate(columns)}
    X = np.zeros((len(rows), len(columns)))
    for i, r in enumerate(rows):
        for sign, lineup in ((1.0, r.home_lineup), (-1.0, r.away_lineup)):
            for p in lineup.members:
                X[i, col[GeneralizedLineup((p,))]] = sign
            for pr in combinations(lineup.members, 2):
                X[i, col[GeneralizedLineup(pr)]] = sign
    Y = np.array([r.pm_home for r in rows], dtype=float)
    W = np.array([r.seconds for r in rows], dtype=float)
    return X, columns, Y, W


def papm_league(
    rows: Sequence[LeagueDesignRow],
    cfg: CVConfig | None = None,
    max_columns: int = DEFAULT_PAPM_MAX_COLUMNS,
) -> MetricResult:
    cfg = cfg or CVConfig()
    X, columns, Y, W = papm_league_design(rows)
    _check_width(len(columns), max_columns)
    fit = fit_ridge(X, Y, W, cfg)
    per_unit = {c: float(b) for c, b in zip(columns, fit.beta)}
    return MetricResult("PAPM_LEAGUE", per_unit, _meta(fit, X.shape, cfg))


def _coefficients(fit: MetricResult) -> dict[str, float]:
    coefs = fit.meta.get("coefficients")
    return coefs if coefs is not None else fit.players()


def predict_lineup(fit: MetricResult, lineup) -> float:
    """Additive prediction: the sum of member coefficients."""
    g = as_lineup(lineup)
    coefs = _coefficients(fit)
    missing = [p for p in g.members if p not in coefs]
    if missing:
        raise UnknownPlayer(f"no coefficient for {missing}")
    return float(sum(coefs[p] for p in g.members))


def sum_apm(fit: MetricResult, lineup) -> float:
    """Naive baseline: add up the APM of the lineup's players."""
    return predict_lineup(fit, lineup)


def sum_apm_result(fit: MetricResult, lineups) -> MetricResult:
    per_unit = {as_lineup(g): sum_apm(fit, g) for g in lineups}
    return MetricResult("SUM_APM", per_unit, dict(fit.meta, base_method=fit.method))
