"""Fit any metric on a season's team stints and merge teams into league tables."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .ingest import aggregate_team_season, build_league_rows
from .lapm import LapmConfig, lapm
from .metrics import (
    DEFAULT_PAPM_MAX_COLUMNS,
    MetricResult,
    apm,
    apm_league,
    hapm,
    papm,
    papm_league,
    raw_pm,
    sum_apm_result,
)
from .model import GeneralizedLineup, StintRecord, build_design, enumerate_generalized
from .errors import InsufficientData
from .regression import CVConfig

log = logging.getLogger(__name__)

TEAM_METHODS = ("PM", "APM", "PAPM", "HAPM", "LAPM", "SUM_APM")
LEAGUE_METHODS = ("APM_LEAGUE", "PAPM_LEAGUE")
LEAGUE_KEY = "LEAGUE"


@dataclass
class FitConfig:
    max_size: int | None = None
    weighting: str = "per_game"
    ridge: CVConfig = field(default_factory=CVConfig)
    lapm: LapmConfig = field(default_factory=LapmConfig)
    papm_max_columns: int = DEFAULT_PAPM_MAX_COLUMNS


def _unit_seconds(records) -> dict[GeneralizedLineup, float]:
    return {r.lineup: r.seconds for r in records}


def fit_team(method: str, stints: Sequence[StintRecord], team: str, season: str,
             cfg: FitConfig | None = None) -> MetricResult:
    """Fit one team-level method. ``meta['unit_seconds']`` records court time per unit."""
    cfg = cfg or FitConfig()
    method = method.upper()
    stints = [s for s in stints if s.team == team and s.season == season]
    if method in ("PM", "HAPM", "LAPM"):
        ext = enumerate_generalized(stints, cfg.max_size)
        if method == "PM":
            res = raw_pm(ext)
        elif method == "HAPM":
            res = hapm(build_design(ext, weighting=cfg.weighting), cfg.ridge)
        else:
            res = lapm(ext, cfg.lapm)[0]
        res.meta["unit_seconds"] = _unit_seconds(ext)
    elif method in ("APM", "PAPM", "SUM_APM"):
        full = aggregate_team_season(stints, team, season)
        if method == "PAPM":
            res = papm(full, cfg.ridge, cfg.weighting, cfg.papm_max_columns)
        else:
            res = apm(build_design(full, weighting=cfg.weighting), cfg.ridge)
        # sub-lineup court time comes from the same stints
        ext = enumerate_generalized(stints, cfg.max_size)
        if method == "SUM_APM":
            res = sum_apm_result(res, [r.lineup for r in ext])
        res.meta["unit_seconds"] = _unit_seconds(ext)
    else:
        raise ValueError(f"{method} is not a team-level method")
    res.meta.update(team=team, season=season)
    return res


def fit_season(method: str, team_stints: Mapping[str, Sequence[StintRecord]], season: str,
               cfg: FitConfig | None = None, teams: Sequence[str] | None = None
               ) -> dict[str, MetricResult]:
    """Per-team results, or a single ``LEAGUE`` entry for league-level methods."""
    cfg = cfg or FitConfig()
    method = method.upper()
    if method in LEAGUE_METHODS:
        # every physical stint appears in two team views; canonicalization dedups
        stints = [s for rows in team_stints.values() for s in rows]
        rows, design = build_league_rows(stints, season)
        if method == "APM_LEAGUE":
            res = apm_league(design, cfg.ridge)
        else:
            res = papm_league(rows, cfg.ridge, cfg.papm_max_columns)
        sec: dict[GeneralizedLineup, float] = defaultdict(float)
        for r in rows:
            for p in r.home_lineup.members + r.away_lineup.members:
                sec[GeneralizedLineup((p,))] += r.seconds
        res.meta.update(unit_seconds=dict(sec), team=LEAGUE_KEY, season=season)
        return {LEAGUE_KEY: res}
    out = {}
    for team in sorted(teams if teams is not None else team_stints):
        rows = team_stints.get(team, [])
        if not any(s.seconds > 0 for s in rows):
            continue
        try:
            out[team] = fit_team(method, rows, team, season, cfg)
        except InsufficientData as exc:
            log.warning("%s %s %s skipped: %s", method, season, team, exc)
    return out


def combine_league(results: Mapping[str, MetricResult], size: int = 1) -> dict[str, float]:
    """League table for one unit size keyed by ``;``-joined member ids.

    A unit scored on several teams (a traded player) gets the mean of its
    team scores weighted by court time on each team.
    """
    num: dict[str, float] = defaultdict(float)
    den: dict[str, float] = defaultdict(float)
    plain: dict[str, list[float]] = defaultdict(list)
    for res in results.values():
        secs = res.meta.get("unit_seconds", {})
        for g, v in res.per_unit.items():
            if g.size != size:
                continue
            key = g.label()
            w = secs.get(g, 0.0)
            num[key] += w * v
            den[key] += w
            plain[key].append(v)
    out = {}
    for key, vals in plain.items():
        out[key] = num[key] / den[key] if den[key] > 0 else math.fsum(vals) / len(vals)
    return dict(sorted(out.items()))
