"""``lineuplab`` command line: ingest, rank, uncertainty, eval, export-graph, synth."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import export
from .config import RunConfig, load_config
from .errors import InputError, NumericalError, ParseError
from .evaluation import evaluate, parse_metrics
from .ingest import build_season_dataset, canonical_stints, parse_roster, parse_stints, write_stints
from .lapm import lapm, mala_sample
from .metrics import rank_scores
from .model import as_lineup, build_design, enumerate_generalized
from .pipeline import LEAGUE_KEY, LEAGUE_METHODS, TEAM_METHODS, combine_league, fit_season
from .synthetic import SyntheticConfig, generate_synthetic
from .uncertainty import bootstrap_hapm, posterior_ranks

log = logging.getLogger("lineuplab")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
SCHEMA_FILE = Path(__file__).parent / "schemas" / "eval_report.schema.json"


# --- shared helpers -------------------------------------------------------


def _read_stints(cfg: RunConfig):
    if not cfg.stints:
        raise InputError("no stint files given (--stints or stints= in the config)")
    stints = []
    for path in cfg.stints:
        try:
            stints.extend(parse_stints(path, cfg.k))
        except ParseError as exc:
            raise type(exc)(f"{path}: {exc}") from None
        except OSError as exc:
            raise InputError(f"{path}: {exc.strerror}") from None
    return stints


def _datasets(cfg: RunConfig):
    stints = _read_stints(cfg)
    roster = parse_roster(cfg.roster) if cfg.roster else None
    seasons = sorted({s.season for s in stints})
    if cfg.season is not None:
        if cfg.season not in seasons:
            raise InputError(f"season {cfg.season} not present in the stint files")
        seasons = [cfg.season]
    return {se: build_season_dataset(stints, se, roster, cfg.min_seconds) for se in seasons}


def _teams(cfg: RunConfig, ds) -> list[str]:
    if cfg.team is None:
        return ds.teams
    if cfg.team not in ds.team_stints:
        raise InputError(f"team {cfg.team} not present in season {ds.season}")
    return [cfg.team]


def _out(cfg: RunConfig, name: str) -> Path:
    d = Path(cfg.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _tables(result, max_size=None):
    return export.result_tables(result, max_size)


def _combined_tables(method: str, results) -> dict:
    sizes = sorted({m for r in results.values() for m in r.sizes()})
    return {
        m: rank_scores(method, {as_lineup(k): v for k, v in combine_league(results, m).items()}, m)
        for m in sizes
    }


def _method(cfg: RunConfig) -> str:
    m = cfg.method.upper()
    if m not in TEAM_METHODS + LEAGUE_METHODS:
        raise InputError(f"unknown method {cfg.method!r}")
    return m


# --- commands -------------------------------------------------------------


def cmd_ingest(cfg: RunConfig, dry_run: bool = False) -> list[Path]:
    datasets = _datasets(cfg)
    summary = {
        se: {
            "teams": ds.teams,
            "qualified_players": sorted(ds.qualified),
            "team_stints": {t: len(v) for t, v in ds.team_stints.items()},
            "league_stints": len(ds.league_stints),
        }
        for se, ds in datasets.items()
    }
    if dry_run:
        return []
    written = []
    for se, ds in datasets.items():
        p = _out(cfg, f"stints_{se}.csv")
        write_stints(canonical_stints(ds.league_stints), p)
        written.append(p)
    p = _out(cfg, "ingest_summary.json")
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return written + [p]


def cmd_rank(cfg: RunConfig, dry_run: bool = False) -> list[Path]:
    method = _method(cfg)
    datasets = _datasets(cfg)
    if dry_run:
        return []
    fc = cfg.fit_config()
    written = []
    for se, ds in datasets.items():
        results = fit_season(method, ds.team_stints, se, fc, _teams(cfg, ds))
        for team, res in results.items():
            p = _out(cfg, f"rankings_{method.lower()}_{se}_{team}.csv")
            export.rankings_csv(_tables(res, cfg.max_size), p)
            written.append(p)
        if method not in LEAGUE_METHODS and len(results) > 1:
            p = _out(cfg, f"rankings_{method.lower()}_{se}_{LEAGUE_KEY}.csv")
            export.rankings_csv(_combined_tables(method, results), p)
            written.append(p)
    return written


def cmd_uncertainty(cfg: RunConfig, dry_run: bool = False) -> list[Path]:
    method = _method(cfg)
    if method not in ("HAPM", "LAPM"):
        raise InputError("uncertainty is available for HAPM (bootstrap) and LAPM (posterior)")
    datasets = _datasets(cfg)
    if dry_run:
        return []
    fc = cfg.fit_config()
    written = []
    for se, ds in datasets.items():
        for team in _teams(cfg, ds):
            rows = [s for s in ds.team_stints[team] if s.seconds > 0]
            if not rows:
                continue
            ext = enumerate_generalized(rows, cfg.max_size)
            stem = f"{method.lower()}_{se}_{team}"
            if method == "HAPM":
                design = build_design(ext, weighting=cfg.weighting)
                tables = bootstrap_hapm(design, fc.ridge, cfg.bootstrap_b, cfg.seed)
            else:
                _, fit, basis, lg = lapm(ext, fc.lapm)
                w = lg.seconds if fc.lapm.weighted else None
                lam = fit.kappa / max(fit.sigma2_hat, 1e-12)
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    samples = mala_sample(lg, basis, lam, cfg.schedule, seed=cfg.seed, weights=w)
                for wmsg in caught:
                    log.warning("%s %s: %s", se, team, wmsg.message)
                tables = posterior_ranks(samples, basis)
                p = _out(cfg, f"draws_{stem}.csv")
                export.draws_csv(samples, basis, p)
                written.append(p)
            p = _out(cfg, f"rankings_{stem}.csv")
            export.rankings_csv(tables, p)
            written.append(p)
    return written


def cmd_export_graph(cfg: RunConfig, dry_run: bool = False) -> list[Path]:
    method = _method(cfg)
    if method in LEAGUE_METHODS:
        raise InputError("graph export needs a team-level method")
    datasets = _datasets(cfg)
    if dry_run:
        return []
    fc = cfg.fit_config()
    written = []
    for se, ds in datasets.items():
        for team, res in fit_season(method, ds.team_stints, se, fc, _teams(cfg, ds)).items():
            graph = export.lineup_graph(_tables(res), cfg.top_n)
            stem = f"graph_{method.lower()}_{se}_{team}"
            for suffix, writer in ((".dot", export.graph_dot), (".json", export.graph_json)):
                p = _out(cfg, stem + suffix)
                writer(graph, p) if suffix == ".json" else writer(graph, p, name=stem)
                written.append(p)
    return written


def cmd_eval(cfg: RunConfig, dry_run: bool = False) -> list[Path]:
    datasets = _datasets(cfg)
    metrics = None
    if cfg.metrics:
        if Path(cfg.metrics).exists():
            metrics = parse_metrics(cfg.metrics)
        else:
            log.warning("metric file %s not found; advanced-metric section omitted", cfg.metrics)
    elif not dry_run:
        log.warning("no metric file given; advanced-metric section omitted")
    if dry_run:
        return []
    methods = [m.upper() for m in cfg.methods]
    for m in methods:
        if m not in TEAM_METHODS + LEAGUE_METHODS:
            raise InputError(f"unknown method {m!r}")
    report = evaluate({se: ds.team_stints for se, ds in datasets.items()}, methods,
                      metrics=metrics, cfg=cfg.fit_config())
    report["config"] = {"seed": cfg.seed, "min_seconds": cfg.min_seconds, "weighting": cfg.weighting}
    p = _out(cfg, "eval_report.json")
    p.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [p]


def cmd_synth(cfg: RunConfig, dry_run: bool = False, seasons: int = 1, bias: float = 0.0,
              games: int = 200) -> list[Path]:
    if dry_run:
        return []
    written = []
    first = int(cfg.season) if cfg.season and cfg.season.isdigit() else 2024
    for i in range(seasons):
        se = str(first + i)
        syn = generate_synthetic(SyntheticConfig(k=cfg.k or 5, games=games, substitution_bias=bias,
                                                 season=se, seed=cfg.seed + i))
        p = _out(cfg, f"synthetic_{se}.csv")
        write_stints(syn.stints, p)
        truth = {
            "season": se,
            "seed": syn.seed,
            "substitution_bias": syn.substitution_bias,
            "individual": syn.true_individual,
            "pair_synergy": {g.label(): v for g, v in sorted(syn.true_pair_synergy.items(),
                                                            key=lambda kv: kv[0].members)},
        }
        q = _out(cfg, f"synthetic_{se}_truth.json")
        q.write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written += [p, q]
    return written


COMMANDS = {
    "ingest": cmd_ingest,
    "rank": cmd_rank,
    "uncertainty": cmd_uncertainty,
    "eval": cmd_eval,
    "export-graph": cmd_export_graph,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or key=value config file")
    common.add_argument("--seed", type=int, help="master seed (fallback: $LINEUPLAB_SEED)")
    common.add_argument("--dry-run", action="store_true", help="validate inputs and exit")
    common.add_argument("--stints", nargs="+", help="stint CSV files")
    common.add_argument("--roster", help="roster CSV")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--season")
    common.add_argument("--team")
    common.add_argument("--method")
    common.add_argument("--lambda", dest="lam", help="'cv' or a fixed ridge penalty")
    common.add_argument("--kappa", help="'cv' or a fixed LAPM smoothing strength")
    common.add_argument("--tau", help="'elbow', 'full' or a basis size")
    common.add_argument("--k", type=int, help="players per lineup")
    common.add_argument("--min-seconds", dest="min_seconds", type=float)
    common.add_argument("--max-size", dest="max_size", type=int)
    common.add_argument("--folds", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="lineuplab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("ingest", "rank"):
        sub.add_parser(name, parents=[common])
    p = sub.add_parser("uncertainty", parents=[common])
    p.add_argument("--bootstrap-b", dest="bootstrap_b", type=int)
    p.add_argument("--retained", dest="mala_retained", type=int)
    p = sub.add_parser("eval", parents=[common])
    p.add_argument("--metrics", help="advanced-metric CSV")
    p.add_argument("--methods", help="comma-separated method list")
    p = sub.add_parser("export-graph", parents=[common])
    p.add_argument("--top-n", dest="top_n", type=int)
    p = sub.add_parser("synth", parents=[common])
    p.add_argument("--seasons", type=int, default=1)
    p.add_argument("--bias", type=float, default=0.0)
    p.add_argument("--games", type=int, default=200)
    return parser


_NOT_CONFIG = {"command", "config", "dry_run", "verbose", "seasons", "bias", "games"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    try:
        cfg = load_config(args.config, overrides)
        extra = {}
        if args.command == "synth":
            extra = dict(seasons=args.seasons, bias=args.bias, games=args.games)
        written = COMMANDS[args.command](cfg, dry_run=args.dry_run, **extra)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.dry_run:
        print(f"{args.command}: inputs valid")
    for p in written:
        print(p)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
