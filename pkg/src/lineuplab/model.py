"""Domain types, the extended hypergraph design and its Jaccard line graph."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import EmptyLineup, HeterogeneousInput, UnknownPlayer

EIGEN_CLAMP = 1e-10


@dataclass(frozen=True, order=True)
class PlayerId:
    id: str
    display_name: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.id:
            raise ValueError("player id must be nonempty")

    def __str__(self):
        return self.id


@dataclass(frozen=True, order=True)
class GeneralizedLineup:
    """A set of player ids kept sorted so equal sets compare equal.

    Build instances with :func:`canonicalize`; the constructor assumes the
    members are already sorted and unique.
    """

    members: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, player):
        return str(player) in self.members

    def __len__(self):
        return len(self.members)

    def issubset(self, other: "GeneralizedLineup") -> bool:
        return set(self.members) <= set(other.members)

    def label(self, sep: str = ";") -> str:
        return sep.join(self.members)

    def __str__(self):
        return "{" + ",".join(self.members) + "}"

    def sort_key(self):
        return (self.size, self.members)


def canonicalize(lineup_members: Iterable[str | PlayerId]) -> GeneralizedLineup:
    members = tuple(sorted({str(m) for m in lineup_members}))
    if not members or any(m == "" for m in members):
        raise EmptyLineup("a lineup needs at least one nonempty player id")
    return GeneralizedLineup(members)


def as_lineup(value) -> GeneralizedLineup:
    if isinstance(value, GeneralizedLineup):
        return value
    if isinstance(value, str):
        return canonicalize(value.split(";"))
    return canonicalize(value)


@dataclass(frozen=True)
class StintRecord:
    season: str
    game_id: str
    team: str
    opponent: str
    is_home: bool
    lineup: GeneralizedLineup
    opp_lineup: GeneralizedLineup
    seconds: float
    points_for: int
    points_against: int
    date: str = ""

    def __post_init__(self):
        if self.seconds < 0:
            raise ValueError("stint seconds must be nonnegative")

    @property
    def pm(self) -> int:
        return self.points_for - self.points_against

    def flipped(self) -> "StintRecord":
        """The same stint seen from the opponent's bench."""
        return StintRecord(
            season=self.season,
            game_id=self.game_id,
            team=self.opponent,
            opponent=self.team,
            is_home=not self.is_home,
            lineup=self.opp_lineup,
            opp_lineup=self.lineup,
            seconds=self.seconds,
            points_for=self.points_against,
            points_against=self.points_for,
            date=self.date,
        )


@dataclass(frozen=True)
class AggregatedRecord:
    lineup: GeneralizedLineup
    pm: int
    seconds: float
    games: int = 1

    @property
    def size(self) -> int:
        return self.lineup.size

    @property
    def seconds_per_game(self) -> float:
        return self.seconds / max(self.games, 1)


def enumerate_generalized(
    stints: Sequence[StintRecord], max_size: int | None = None
) -> list[AggregatedRecord]:
    """Aggregate every on-court subset of size 1..max_size over the stints.

    A subset S receives the summed plus-minus and seconds of all stints whose
    lineup contains S. Subsets with no playing time are not emitted.
    """
    if not stints:
        return []
    teams = {s.team for s in stints}
    seasons = {s.season for s in stints}
    if len(teams) > 1 or len(seasons) > 1:
        raise HeterogeneousInput(
            f"expected one team and season, got teams={sorted(teams)} seasons={sorted(seasons)}"
        )
    k = max(s.lineup.size for s in stints)
    if max_size is None:
        max_size = k
    if not 1 <= max_size <= k:
        raise ValueError(f"max_size must lie in [1, {k}], got {max_size}")

    # merge identical full lineups first; the subset fan-out is then per unique lineup
    full_pm: dict[GeneralizedLineup, int] = defaultdict(int)
    full_sec: dict[GeneralizedLineup, float] = defaultdict(float)
    full_games: dict[GeneralizedLineup, set] = defaultdict(set)
    for s in stints:
        full_pm[s.lineup] += s.pm
        full_sec[s.lineup] += s.seconds
        if s.seconds > 0:
            full_games[s.lineup].add(s.game_id)

    # plain member tuples as keys; lineup objects are built once at the end
    pm: dict[tuple, int] = defaultdict(int)
    sec: dict[tuple, float] = defaultdict(float)
    parents: dict[tuple, list] = defaultdict(list)
    for lineup in sorted(full_pm):
        for m in range(1, min(max_size, lineup.size) + 1):
            for sub in combinations(lineup.members, m):
                pm[sub] += full_pm[lineup]
                sec[sub] += full_sec[lineup]
                parents[sub].append(lineup)

    out = [
        AggregatedRecord(GeneralizedLineup(sub), pm[sub], sec[sub],
                         len(set().union(*(full_games[g] for g in parents[sub]))))
        for sub in sorted(pm, key=lambda t: (len(t), t))
        if sec[sub] > 0
    ]
    return out


@dataclass(frozen=True, eq=False)
class ExtendedDesign:
    rows: tuple[GeneralizedLineup, ...]
    players: tuple[str, ...]
    X: np.ndarray
    Y: np.ndarray
    W: np.ndarray
    mode: str = "team"

    @property
    def shape(self):
        return self.X.shape

    @property
    def sizes(self) -> np.ndarray:
        return np.array([r.size for r in self.rows], dtype=int)

    def subset(self, mask) -> "ExtendedDesign":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        return ExtendedDesign(
            rows=tuple(self.rows[i] for i in idx),
            players=self.players,
            X=self.X[idx],
            Y=self.Y[idx],
            W=self.W[idx],
            mode=self.mode,
        )

    def restrict_sizes(self, sizes: Iterable[int]) -> "ExtendedDesign":
        return self.subset(np.isin(self.sizes, list(sizes)))

    def column(self, player: str) -> int:
        try:
            return self.players.index(str(player))
        except ValueError:
            raise UnknownPlayer(f"player {player!r} is not a design column") from None


def build_design(
    records: Sequence[AggregatedRecord],
    players: Iterable[str | PlayerId] | None = None,
    weighting: str = "total",
) -> ExtendedDesign:
    """Team-mode design: X[i, j] = 1 iff player j belongs to row i's lineup.

    ``weighting`` selects total seconds or seconds per game appeared as W.
    Rows are ordered by (size, members) and columns by player id. Players
    with no appearances are dropped so no column is all zero.
    """
    if weighting not in ("total", "per_game"):
        raise ValueError(f"unknown weighting {weighting!r}")
    recs = sorted(records, key=lambda r: r.lineup.sort_key())
    seen = sorted({p for r in recs for p in r.lineup.members})
    if players is not None:
        universe = {str(p) for p in players}
        unknown = [p for p in seen if p not in universe]
        if unknown:
            raise UnknownPlayer(f"records reference players outside the roster: {unknown}")
    col = {p: j for j, p in enumerate(seen)}
    X = np.zeros((len(recs), len(seen)))
    for i, r in enumerate(recs):
        X[i, [col[p] for p in r.lineup.members]] = 1.0
    Y = np.array([r.pm for r in recs], dtype=float)
    if weighting == "total":
        W = np.array([r.seconds for r in recs], dtype=float)
    else:
        W = np.array([r.seconds_per_game for r in recs], dtype=float)
    return ExtendedDesign(tuple(r.lineup for r in recs), tuple(seen), X, Y, W, "team")


def incidence_matrix(records: Sequence[AggregatedRecord]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Player x hyperedge 0/1 matrix, hyperedges in the given record order."""
    players = tuple(sorted({p for r in records for p in r.lineup.members}))
    col = {p: i for i, p in enumerate(players)}
    M = np.zeros((len(players), len(records)))
    for j, r in enumerate(records):
        for p in r.lineup.members:
            M[col[p], j] = 1.0
    return M, players


def jaccard(e_i: GeneralizedLineup, e_j: GeneralizedLineup) -> float:
    a, b = set(e_i.members), set(e_j.members)
    if not a or not b:
        raise EmptyLineup("jaccard needs nonempty lineups")
    return len(a & b) / len(a | b)


def jaccard_matrix(lineups: Sequence[GeneralizedLineup]) -> np.ndarray:
    """Pairwise Jaccard similarities with a zero diagonal."""
    players = sorted({p for g in lineups for p in g.members})
    col = {p: i for i, p in enumerate(players)}
    M = np.zeros((len(lineups), len(players)))
    for i, g in enumerate(lineups):
        M[i, [col[p] for p in g.members]] = 1.0
    inter = M @ M.T
    size = M.sum(axis=1)
    union = size[:, None] + size[None, :] - inter
    A = inter / union
    np.fill_diagonal(A, 0.0)
    return A


@dataclass(frozen=True, eq=False)
class LineGraph:
    nodes: tuple[GeneralizedLineup, ...]
    y: np.ndarray
    seconds: np.ndarray
    adjacency: np.ndarray
    laplacian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.nodes], dtype=int)

    def index(self, lineup) -> int:
        return self.nodes.index(as_lineup(lineup))

    def neighbors(self, lineup) -> list[GeneralizedLineup]:
        i = self.index(lineup)
        return [self.nodes[j] for j in np.flatnonzero(self.adjacency[i])]

    def edges(self):
        """Yield (i, j, w) for i < j."""
        iu, ju = np.nonzero(np.triu(self.adjacency, 1))
        for i, j in zip(iu, ju):
            yield int(i), int(j), float(self.adjacency[i, j])

    def n_components(self) -> int:
        n, _ = connected_components(csr_matrix(self.adjacency), directed=False)
        return int(n)


def laplacian_eigh(L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenpairs of a symmetric PSD matrix, tiny negatives clamped to 0."""
    xi, phi = np.linalg.eigh(L)
    xi = np.where((xi < 0) & (xi >= -EIGEN_CLAMP), 0.0, xi)
    return xi, phi


def build_line_graph(records: Sequence[AggregatedRecord]) -> LineGraph:
    if not records:
        raise ValueError("line graph needs at least one record")
    recs = sorted(records, key=lambda r: r.lineup.sort_key())
    nodes = tuple(r.lineup for r in recs)
    if len(set(nodes)) != len(nodes):
        raise ValueError("records must be deduplicated")
    A = jaccard_matrix(nodes)
    L = np.diag(A.sum(axis=1)) - A
    xi, phi = laplacian_eigh(L)
    return LineGraph(
        nodes=nodes,
        y=np.array([r.pm for r in recs], dtype=float),
        seconds=np.array([r.seconds for r in recs], dtype=float),
        adjacency=A,
        laplacian=L,
        eigenvalues=xi,
        eigenvectors=phi,
    )
