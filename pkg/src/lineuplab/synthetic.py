"""Synthetic seasons with planted player effects and pair synergies.

Effects are points per minute on court. A stint of lineup L lasting t
minutes has plus-minus ``round(t * (sum of member effects + sum of
synergies of pairs inside L + e))`` with ``e ~ N(0, noise_sd)``.
Lineups are drawn with probability proportional to
``exp(bias_strength * substitution_bias * s(L) / synergy_scale)`` where
s(L) is the lineup's total synergy, so bias 0 is uniform over all lineups
and larger bias makes coaches favour the high-synergy pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .model import GeneralizedLineup, StintRecord, canonicalize

GAME_SECONDS = 2880


@dataclass
class SyntheticConfig:
    n_players: int = 12
    k: int = 5
    games: int = 200
    stints_per_game: int = 12
    substitution_bias: float = 0.0
    effect_scale: float = 1.0
    synergy_scale: float = 1.0
    n_synergy_pairs: int = 6
    background_synergy_sd: float = 0.0
    noise_sd: float | None = None
    bias_strength: float = 4.0
    n_opponents: int = 5
    team: str = "SYN"
    season: str = "2024"
    seed: int = 0

    def __post_init__(self):
        if self.n_players < self.k:
            raise ValueError("roster must have at least k players")
        if not 0.0 <= self.substitution_bias <= 1.0:
            raise ValueError("substitution_bias must lie in [0, 1]")
        if self.noise_sd is None:
            self.noise_sd = 0.5 * self.effect_scale


@dataclass
class SyntheticSeason:
    true_individual: dict[str, float]
    true_pair_synergy: dict[GeneralizedLineup, float]
    substitution_bias: float
    stints: list[StintRecord]
    seed: int
    config: SyntheticConfig = field(repr=False, default=None)

    def true_pair_value(self, pair: GeneralizedLineup) -> float:
        a, b = pair.members
        return self.true_individual[a] + self.true_individual[b] + self.true_pair_synergy[pair]

    def lineup_rate(self, lineup: GeneralizedLineup) -> float:
        """Expected plus-minus per minute of a lineup."""
        ind = sum(self.true_individual[p] for p in lineup.members)
        syn = sum(self.true_pair_synergy[GeneralizedLineup(pr)] for pr in combinations(lineup.members, 2))
        return ind + syn


def player_ids(team: str, n: int) -> list[str]:
    return [f"{team}{i:02d}" for i in range(1, n + 1)]


def generate_synthetic(config: SyntheticConfig | None = None, **overrides) -> SyntheticSeason:
    cfg = config or SyntheticConfig(**overrides)
    rng = np.random.default_rng(cfg.seed)
    players = player_ids(cfg.team, cfg.n_players)
    effects = dict(zip(players, (rng.normal(0.0, cfg.effect_scale, cfg.n_players)).tolist()))

    all_pairs = [GeneralizedLineup(p) for p in combinations(players, 2)]
    background = rng.normal(0.0, cfg.background_synergy_sd, len(all_pairs)) if cfg.background_synergy_sd > 0 else np.zeros(len(all_pairs))
    synergy = {p: float(v) for p, v in zip(all_pairs, background)}
    n_planted = min(cfg.n_synergy_pairs, len(all_pairs))
    for i in rng.choice(len(all_pairs), size=n_planted, replace=False):
        synergy[all_pairs[i]] += float(cfg.synergy_scale * rng.uniform(0.5, 1.5))

    lineups = [GeneralizedLineup(c) for c in combinations(players, cfg.k)]
    syn_total = np.array(
        [sum(synergy[GeneralizedLineup(pr)] for pr in combinations(L.members, 2)) for L in lineups]
    )
    scale = cfg.synergy_scale if cfg.synergy_scale > 0 else 1.0
    logits = cfg.bias_strength * cfg.substitution_bias * syn_total / scale
    prob = np.exp(logits - logits.max())
    prob /= prob.sum()
    rates = np.array(
        [sum(effects[p] for p in L.members) for L in lineups]
    ) + syn_total

    stints = []
    n_st = cfg.stints_per_game
    floor = 30
    for g in range(cfg.games):
        game_id = f"{cfg.team}G{g + 1:04d}"
        date = f"{cfg.season}-{1 + g // 28:02d}-{1 + g % 28:02d}" if g < 12 * 28 else f"{cfg.season}-12-28"
        opp = f"OPP{g % cfg.n_opponents + 1}"
        opp_lineup = canonicalize(f"{opp}_{j}" for j in range(1, cfg.k + 1))
        shares = rng.dirichlet(np.full(n_st, 2.0))
        secs = floor + np.floor(shares * (GAME_SECONDS - floor * n_st)).astype(int)
        secs[-1] += GAME_SECONDS - secs.sum()
        picks = rng.choice(len(lineups), size=n_st, p=prob)
        noise = rng.normal(0.0, cfg.noise_sd, n_st)
        base = rng.poisson(2.0 * secs / 60.0)
        for li, t, e, b in zip(picks, secs, noise, base):
            pm = int(np.rint(t / 60.0 * (rates[li] + e)))
            stints.append(
                StintRecord(
                    season=cfg.season,
                    game_id=game_id,
                    team=cfg.team,
                    opponent=opp,
                    is_home=bool(g % 2 == 0),
                    lineup=lineups[li],
                    opp_lineup=opp_lineup,
                    seconds=float(t),
                    points_for=int(b) + max(pm, 0),
                    points_against=int(b) + max(-pm, 0),
                    date=date,
                )
            )
    return SyntheticSeason(effects, synergy, cfg.substitution_bias, stints, cfg.seed, cfg)
