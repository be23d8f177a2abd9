"""Rank-correlation evaluation: external metrics, year over year, split halves."""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import InsufficientOverlap, ParseError, SchemaError
from .metrics import MetricResult
from .model import StintRecord, enumerate_generalized
from .pipeline import LEAGUE_METHODS, FitConfig, combine_league, fit_season
from .metrics import raw_pm

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("season", "player_id", "metric_name", "value")


def _as_scores(x) -> Mapping[str, float]:
    if isinstance(x, MetricResult):
        return {g.label(): v for g, v in x.per_unit.items()}
    return {(k.label() if hasattr(k, "label") else str(k)): v for k, v in x.items()}


def spearman(x, y) -> float:
    """Spearman correlation over the common keys, average ranks for ties.

    Returns nan when either side is constant on the overlap.
    """
    xs, ys = _as_scores(x), _as_scores(y)
    keys = sorted(set(xs) & set(ys))
    if len(keys) < 3:
        raise InsufficientOverlap(f"only {len(keys)} common units; need at least 3")
    rx = rankdata([xs[k] for k in keys])
    ry = rankdata([ys[k] for k in keys])
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        return float("nan")
    return float(np.clip((rx @ ry) / denom, -1.0, 1.0))


def year_over_year(scores_t, scores_t1) -> float:
    """Spearman over players scored in both years, whatever their team."""
    return spearman(scores_t, scores_t1)


def _game_order(stints: Sequence[StintRecord]) -> list[str]:
    first = {}
    for s in stints:
        key = (s.date, s.game_id)
        first[s.game_id] = min(first.get(s.game_id, key), key)
    return [g for g, _ in sorted(first.items(), key=lambda kv: kv[1])]


def split_halves(team_stints: Mapping[str, Sequence[StintRecord]]):
    """Split every team's games at ceil(G/2) in date order.

    Returns (first, second) team-stint maps plus the per-(team, game) half
    label used to place league rows by the home team's schedule.
    """
    first: dict[str, list[StintRecord]] = {}
    second: dict[str, list[StintRecord]] = {}
    half_of: dict[tuple[str, str], int] = {}
    for team, rows in team_stints.items():
        order = _game_order(rows)
        cut = math.ceil(len(order) / 2)
        early = set(order[:cut])
        for g in order:
            half_of[(team, g)] = 1 if g in early else 2
        first[team] = [s for s in rows if s.game_id in early]
        second[team] = [s for s in rows if s.game_id not in early]
    return first, second, half_of


def _league_half(team_stints, half_of, half: int):
    """Home-view stints of games that fall in ``half`` of the home team's schedule."""
    out: dict[str, list[StintRecord]] = defaultdict(list)
    for team, rows in team_stints.items():
        for s in rows:
            home = s.team if s.is_home else s.opponent
            if half_of.get((home, s.game_id), half_of.get((s.team, s.game_id))) == half:
                out[team].append(s)
    return dict(out)


def observed_pm(team_stints: Mapping[str, Sequence[StintRecord]], season: str, size: int,
                max_size: int | None = None) -> dict[str, float]:
    results = {}
    for team, rows in team_stints.items():
        rows = [s for s in rows if s.season == season]
        if rows:
            ext = enumerate_generalized(rows, max_size)
            res = raw_pm(ext)
            res.meta["unit_seconds"] = {r.lineup: r.seconds for r in ext}
            results[team] = res
    return combine_league(results, size)


def season_scores(method: str, team_stints, season: str, size: int = 1,
                  cfg: FitConfig | None = None) -> dict[str, float]:
    return combine_league(fit_season(method, team_stints, season, cfg), size)


def split_half_eval(team_stints: Mapping[str, Sequence[StintRecord]], method: str, target: str,
                    season: str, size: int = 1, cfg: FitConfig | None = None) -> float:
    """Fit on each team's first half; correlate with second-half PM or a second-half refit."""
    target = target.lower()
    if target not in ("pm", "self"):
        raise ValueError("target must be 'pm' or 'self'")
    counts = {t: len(_game_order(rows)) for t, rows in team_stints.items()}
    if any(c < 2 for c in counts.values()):
        raise InsufficientOverlap("every team needs at least two games to split a season")
    first, second, half_of = split_halves(team_stints)
    if method.upper() in LEAGUE_METHODS:
        first = _league_half(team_stints, half_of, 1)
        second = _league_half(team_stints, half_of, 2)
    fitted = season_scores(method, first, season, size, cfg)
    if target == "pm":
        truth = observed_pm(second, season, size)
    else:
        truth = season_scores(method, second, season, size, cfg)
    return spearman(fitted, truth)


def parse_metrics(path: str | Path) -> dict[str, dict[str, dict[str, float]]]:
    """External metric CSV to {season: {metric_name: {player_id: value}}}."""
    out: dict = defaultdict(lambda: defaultdict(dict))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return {}
        if tuple(h.strip() for h in header) != METRIC_COLUMNS:
            raise SchemaError(f"expected header {','.join(METRIC_COLUMNS)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError("expected 4 fields", line=lineno)
            season, pid, name, value = (c.strip() for c in row)
            try:
                out[season][name][pid] = float(value)
            except ValueError:
                raise ParseError(f"bad value {value!r}", line=lineno) from None
    return {s: dict(m) for s, m in out.items()}


def _safe(fn, *args, **kwargs):
    try:
        v = fn(*args, **kwargs)
    except InsufficientOverlap as exc:
        log.warning("%s", exc)
        return None
    return None if v is None or (isinstance(v, float) and math.isnan(v)) else v


def evaluate(
    seasons: Mapping[str, Mapping[str, Sequence[StintRecord]]],
    methods: Sequence[str],
    pair_methods: Sequence[str] = ("PM", "SUM_APM", "PAPM", "HAPM", "LAPM"),
    metrics: Mapping[str, Mapping[str, Mapping[str, float]]] | None = None,
    cfg: FitConfig | None = None,
    split_half: bool = True,
) -> dict:
    """Build the evaluation report; see ``schemas/eval_report.schema.json``."""
    methods = [m.upper() for m in methods]
    pair_methods = [m.upper() for m in pair_methods]
    warnings_: list[str] = []
    order = sorted(seasons)
    indiv = {s: {m: season_scores(m, seasons[s], s, 1, cfg) for m in methods} for s in order}
    report: dict = {
        "seasons": order,
        "methods": methods,
        "pair_methods": pair_methods,
        "agreement": {
            s: {a: {b: _safe(spearman, indiv[s][a], indiv[s][b]) for b in methods} for a in methods}
            for s in order
        },
        "year_over_year": {
            f"{a}->{b}": {m: _safe(year_over_year, indiv[a][m], indiv[b][m]) for m in methods}
            for a, b in zip(order, order[1:])
        },
    }
    if metrics is None:
        warnings_.append("no advanced-metric file given; advanced_metrics section omitted")
    else:
        adv = {}
        for s in order:
            if s not in metrics:
                warnings_.append(f"no advanced metrics for season {s}")
                continue
            adv[s] = {
                name: {m: _safe(spearman, indiv[s][m], vals) for m in methods}
                for name, vals in sorted(metrics[s].items())
            }
        report["advanced_metrics"] = adv
    if split_half:
        sh = {}
        for s in order:
            sh[s] = {
                target: {
                    "individuals": {m: _safe(split_half_eval, seasons[s], m, target, s, 1, cfg) for m in methods},
                    "pairs": {m: _safe(split_half_eval, seasons[s], m, target, s, 2, cfg) for m in pair_methods},
                }
                for target in ("pm", "self")
            }
        report["split_half"] = sh
    report["warnings"] = warnings_
    return report
