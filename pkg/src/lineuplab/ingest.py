"""Stint and roster file IO, season aggregation and qualification filters.

Stint CSV columns::

    season,game_id,date,team,opponent,is_home,lineup,opp_lineup,seconds,points_for,points_against

Lineup fields hold ``;``-separated player ids. A file may carry one or both
benches' view of a game; :func:`canonical_stints` reduces every game to the
home team's view so each physical stint is counted once.
"""

from __future__ import annotations

import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataIntegrity, EmptyLineup, ParseError, SchemaError
from .model import (
    AggregatedRecord,
    ExtendedDesign,
    GeneralizedLineup,
    PlayerId,
    StintRecord,
    canonicalize,
)

log = logging.getLogger(__name__)

STINT_COLUMNS = (
    "season",
    "game_id",
    "date",
    "team",
    "opponent",
    "is_home",
    "lineup",
    "opp_lineup",
    "seconds",
    "points_for",
    "points_against",
)
ROSTER_COLUMNS = ("season", "team", "player_id", "display_name")

DEFAULT_MIN_SECONDS = 10_000.0

_TRUE = {"1", "true", "t", "yes", "y", "home"}
_FALSE = {"0", "false", "f", "no", "n", "away"}


def _parse_bool(text: str) -> bool:
    v = text.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_lineup(text: str) -> GeneralizedLineup:
    parts = [p.strip() for p in text.split(";")]
    if any(not p for p in parts):
        raise EmptyLineup(f"empty player id in lineup {text!r}")
    lineup = canonicalize(parts)
    if lineup.size != len(parts):
        raise ValueError(f"duplicate player in lineup {text!r}")
    return lineup


def format_number(x: float) -> str:
    """Shortest exact decimal text; integral values lose the trailing '.0'."""
    x = float(x)
    if x.is_integer():
        return str(int(x))
    return repr(x)


def parse_stints(path: str | Path, k: int | None = None) -> list[StintRecord]:
    """Read a stint CSV. ``k`` fixes the lineup size; None infers it from the first row."""
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_stints_text(fh.read(), k=k)


def parse_stints_text(text: str, k: int | None = None) -> list[StintRecord]:
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(h.strip() for h in header) != STINT_COLUMNS:
        raise SchemaError(f"expected header {','.join(STINT_COLUMNS)}", line=1)
    stints = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(STINT_COLUMNS):
            raise ParseError(f"expected {len(STINT_COLUMNS)} fields, got {len(row)}", line=lineno)
        rec = dict(zip(STINT_COLUMNS, (c.strip() for c in row)))
        try:
            lineup = _parse_lineup(rec["lineup"])
            opp = _parse_lineup(rec["opp_lineup"])
            stint = StintRecord(
                season=rec["season"],
                game_id=rec["game_id"],
                team=rec["team"],
                opponent=rec["opponent"],
                is_home=_parse_bool(rec["is_home"]),
                lineup=lineup,
                opp_lineup=opp,
                seconds=float(rec["seconds"]),
                points_for=int(rec["points_for"]),
                points_against=int(rec["points_against"]),
                date=rec["date"],
            )
        except (ValueError, EmptyLineup) as exc:
            raise ParseError(str(exc), line=lineno) from None
        if k is None:
            k = lineup.size
        if lineup.size != k or opp.size != k:
            raise SchemaError(
                f"lineup sizes ({lineup.size}, {opp.size}) differ from k={k}", line=lineno
            )
        stints.append(stint)
    return stints


def write_stints(stints: Iterable[StintRecord], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STINT_COLUMNS)
    for s in stints:
        w.writerow(
            [
                s.season,
                s.game_id,
                s.date,
                s.team,
                s.opponent,
                "true" if s.is_home else "false",
                s.lineup.label(),
                s.opp_lineup.label(),
                format_number(s.seconds),
                s.points_for,
                s.points_against,
            ]
        )
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def parse_roster(path: str | Path) -> dict[tuple[str, str], list[PlayerId]]:
    """Map (season, team) to the listed players."""
    out: dict[tuple[str, str], list[PlayerId]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return {}
        if tuple(h.strip() for h in header) != ROSTER_COLUMNS:
            raise SchemaError(f"expected header {','.join(ROSTER_COLUMNS)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(ROSTER_COLUMNS):
                raise ParseError(f"expected {len(ROSTER_COLUMNS)} fields", line=lineno)
            season, team, pid, name = (c.strip() for c in row)
            if not pid:
                raise ParseError("empty player_id", line=lineno)
            out[(season, team)].append(PlayerId(pid, name))
    return dict(out)


def canonical_stints(stints: Sequence[StintRecord]) -> list[StintRecord]:
    """One home-view record per physical stint.

    Games with home-view rows keep those; games seen only from the away bench
    are flipped.
    """
    by_game: dict[tuple[str, str], list[StintRecord]] = defaultdict(list)
    for s in stints:
        by_game[(s.season, s.game_id)].append(s)
    out = []
    for key in sorted(by_game):
        rows = by_game[key]
        home = [s for s in rows if s.is_home]
        out.extend(home if home else [s.flipped() for s in rows])
    return out


def team_view(stints: Sequence[StintRecord]) -> dict[str, list[StintRecord]]:
    """Both benches' view of every physical stint, keyed by team."""
    out: dict[str, list[StintRecord]] = defaultdict(list)
    for s in canonical_stints(stints):
        out[s.team].append(s)
        out[s.opponent].append(s.flipped())
    return dict(out)


@dataclass
class SeasonDataset:
    season: str
    team_stints: dict[str, list[StintRecord]]
    roster: dict[str, list[tuple[PlayerId, float]]]
    qualified: set[str]
    min_seconds: float = DEFAULT_MIN_SECONDS
    league_stints: list[StintRecord] = field(default_factory=list)

    def player_seconds(self) -> dict[str, float]:
        tot: dict[str, float] = defaultdict(float)
        for players in self.roster.values():
            for p, sec in players:
                tot[p.id] += sec
        return dict(tot)

    @property
    def teams(self) -> list[str]:
        return sorted(self.team_stints)


def qualify_players(dataset: SeasonDataset, min_seconds: float) -> set[str]:
    """Players whose season seconds, summed over all their teams, reach ``min_seconds``."""
    return {p for p, sec in dataset.player_seconds().items() if sec >= min_seconds}


def build_season_dataset(
    stints: Sequence[StintRecord],
    season: str,
    roster: dict[tuple[str, str], list[PlayerId]] | None = None,
    min_seconds: float = DEFAULT_MIN_SECONDS,
) -> SeasonDataset:
    """Assemble one season and drop every stint that involves an unqualified player."""
    season_stints = [s for s in stints if s.season == season]
    views = team_view(season_stints)
    names = {}
    for (se, _team), players in (roster or {}).items():
        if se == season:
            names.update({p.id: p.display_name for p in players})

    team_sec: dict[str, dict[str, float]] = {}
    for team, rows in views.items():
        acc: dict[str, float] = defaultdict(float)
        for s in rows:
            for p in s.lineup.members:
                acc[p] += s.seconds
        team_sec[team] = acc
    roster_out = {
        team: [(PlayerId(p, names.get(p, "")), sec) for p, sec in sorted(acc.items())]
        for team, acc in sorted(team_sec.items())
    }
    ds = SeasonDataset(season, {}, roster_out, set(), min_seconds)
    ds.qualified = qualify_players(ds, min_seconds)

    def ok(s: StintRecord, both: bool) -> bool:
        players = s.lineup.members + (s.opp_lineup.members if both else ())
        return all(p in ds.qualified for p in players)

    ds.team_stints = {team: [s for s in rows if ok(s, False)] for team, rows in sorted(views.items())}
    ds.league_stints = [s for s in canonical_stints(season_stints) if ok(s, True)]
    dropped = sum(len(v) for v in views.values()) - sum(len(v) for v in ds.team_stints.values())
    if dropped:
        log.info("season %s: dropped %d team-view stints with unqualified players", season, dropped)
    return ds


def aggregate_team_season(
    stints: Sequence[StintRecord], team: str, season: str
) -> list[AggregatedRecord]:
    """Unique full lineups of one team and season with summed pm, seconds and game count."""
    pm: dict[GeneralizedLineup, int] = defaultdict(int)
    sec: dict[GeneralizedLineup, float] = defaultdict(float)
    games: dict[GeneralizedLineup, set] = defaultdict(set)
    for s in stints:
        if s.team != team or s.season != season:
            continue
        pm[s.lineup] += s.pm
        sec[s.lineup] += s.seconds
        if s.seconds > 0:
            games[s.lineup].add(s.game_id)
    return [
        AggregatedRecord(g, pm[g], sec[g], len(games[g]))
        for g in sorted(pm, key=GeneralizedLineup.sort_key)
        if sec[g] > 0
    ]


@dataclass(frozen=True)
class LeagueDesignRow:
    home_lineup: GeneralizedLineup
    away_lineup: GeneralizedLineup
    pm_home: int
    seconds: float


def build_league_rows(
    stints: Sequence[StintRecord], season: str
) -> tuple[list[LeagueDesignRow], ExtendedDesign]:
    """League-wide design with +1 for home players and -1 for away players.

    Y is plus-minus from the home team's side and W is total seconds. The
    design's ``rows`` hold (home, away) lineup pairs.
    """
    pm: dict[tuple, int] = defaultdict(int)
    sec: dict[tuple, float] = defaultdict(float)
    for s in canonical_stints([s for s in stints if s.season == season]):
        home, away = s.lineup, s.opp_lineup
        if set(home.members) & set(away.members):
            raise DataIntegrity(
                f"game {s.game_id}: players {sorted(set(home.members) & set(away.members))} on both benches"
            )
        pm[(home, away)] += s.pm
        sec[(home, away)] += s.seconds
    keys = sorted((k for k in pm if sec[k] > 0), key=lambda k: (k[0].members, k[1].members))
    rows = [LeagueDesignRow(h, a, pm[(h, a)], sec[(h, a)]) for h, a in keys]
    players = sorted({p for h, a in keys for p in h.members + a.members})
    col = {p: j for j, p in enumerate(players)}
    X = np.zeros((len(rows), len(players)))
    for i, r in enumerate(rows):
        X[i, [col[p] for p in r.home_lineup.members]] = 1.0
        X[i, [col[p] for p in r.away_lineup.members]] = -1.0
    design = ExtendedDesign(
        rows=tuple((r.home_lineup, r.away_lineup) for r in rows),
        players=tuple(players),
        X=X,
        Y=np.array([r.pm_home for r in rows], dtype=float),
        W=np.array([r.seconds for r in rows], dtype=float),
        mode="league",
    )
    return rows, design
