"""CSV, JSON and DOT writers for rankings, graphs and posterior draws."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .lapm import PosteriorSamples, SpectralBasis
from .metrics import MetricResult, RankedTable, rank_within_size

RANKING_COLUMNS = ("size", "members", "score", "rank", "rank_lo", "rank_hi")
RESULT_COLUMNS = ("method", "season", "team", "size", "members", "score", "rank")
DRAW_COLUMNS = ("draw", "vertex", "beta")

MIN_WIDTH = 0.5
MAX_WIDTH = 2.0
ZERO_SNAP = 1e-12


def fmt6(x: float) -> str:
    """Six significant digits; solver round-off below ZERO_SNAP prints as 0."""
    x = float(x)
    if abs(x) < ZERO_SNAP:
        return "0"
    s = f"{x:.6g}"
    return "0" if s == "-0" else s


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(text: str, path) -> str:
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="")
    return text


def _bound(v) -> str:
    return "" if v is None else str(int(v))


def rankings_csv(tables: Mapping[int, RankedTable], path=None) -> str:
    rows = [
        (t.size, r.lineup.label(), fmt6(r.score), r.rank, _bound(r.rank_lo), _bound(r.rank_hi))
        for _, t in sorted(tables.items())
        for r in t.rows
    ]
    return _write(_csv_text(RANKING_COLUMNS, rows), path)


def rankings_json(tables: Mapping[int, RankedTable], path=None, meta: dict | None = None) -> str:
    doc = {
        "meta": meta or {},
        "rankings": [
            {
                "size": t.size,
                "members": list(r.lineup.members),
                "score": r.score,
                "rank": r.rank,
                "rank_lo": r.rank_lo,
                "rank_hi": r.rank_hi,
                "tied": r.tied,
            }
            for _, t in sorted(tables.items())
            for r in t.rows
        ],
    }
    return _write(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n", path)


def result_tables(result: MetricResult, max_size: int | None = None) -> dict[int, RankedTable]:
    sizes = [m for m in result.sizes() if max_size is None or m <= max_size]
    return {m: rank_within_size(result, m) for m in sizes}


def result_rows(result: MetricResult, season: str = "", team: str = ""):
    season = result.meta.get("season", season)
    team = result.meta.get("team", team)
    for m, t in result_tables(result).items():
        for r in t.rows:
            yield result.method, season, team, m, r.lineup.label(), r.score, r.rank


def result_csv(results: Sequence[MetricResult], path=None) -> str:
    rows = [
        (meth, se, te, m, mem, fmt6(score), rank)
        for res in results
        for meth, se, te, m, mem, score, rank in result_rows(res)
    ]
    return _write(_csv_text(RESULT_COLUMNS, rows), path)


def result_json(results: Sequence[MetricResult], path=None) -> str:
    doc = [dict(zip(RESULT_COLUMNS, row)) for res in results for row in result_rows(res)]
    return _write(json.dumps(doc, indent=2) + "\n", path)


def draws_csv(samples: PosteriorSamples, basis: SpectralBasis, path=None) -> str:
    beta = samples.beta_draws(basis)
    labels = [g.label() for g in basis.nodes]
    rows = (
        (d, labels[v], repr(float(beta[d, v])))
        for d in range(beta.shape[0])
        for v in range(beta.shape[1])
    )
    return _write(_csv_text(DRAW_COLUMNS, rows), path)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if hasattr(x, "label"):
        return x.label()
    return str(x)


# --- graph ----------------------------------------------------------------


def _widths(scores: Sequence[float]) -> list[float]:
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        return []
    span = s.max() - s.min()
    norm = (s - s.min()) / span if span > 0 else np.full(s.size, 0.5)
    return (MIN_WIDTH + (MAX_WIDTH - MIN_WIDTH) * norm).tolist()


def lineup_graph(tables: Mapping[int, RankedTable], top_n: int | Mapping[int, int] = 15,
                 sizes: Sequence[int] = (2, 3)) -> dict:
    """Players plus the top-n units of each requested size, linked to their members.

    ``top_n`` is one count for every size or a per-size mapping.
    """
    if 1 not in tables:
        raise ValueError("graph export needs the individual (size 1) table")
    nodes, edges = [], []

    def add(t: RankedTable, rows):
        for r, w in zip(rows, _widths([r.score for r in rows])):
            nodes.append(
                {
                    "id": r.lineup.label(),
                    "size": t.size,
                    "members": list(r.lineup.members),
                    "score": r.score,
                    "rank": r.rank,
                    "width": w,
                    "negative": r.score < 0,
                }
            )

    players = tables[1]
    add(players, players.rows)
    present = {r.lineup.members[0] for r in players.rows}
    for m in sizes:
        n = top_n.get(m, 0) if isinstance(top_n, Mapping) else int(top_n)
        if m not in tables or n <= 0:
            continue
        top = [r for r in tables[m].rows if set(r.lineup.members) <= present][:n]
        add(tables[m], top)
        for r in top:
            edges.extend({"source": p, "target": r.lineup.label()} for p in r.lineup.members)
    return {"method": players.method, "nodes": nodes, "edges": edges}


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def graph_dot(graph: dict, path=None, name: str = "lineups") -> str:
    lines = [f"graph {_q(name)} {{", "  node [shape=circle, fixedsize=true];"]
    for v in graph["nodes"]:
        attrs = {
            "label": v["id"].replace(";", "+"),
            "width": f"{v['width']:.4f}",
            "score": fmt6(v["score"]),
            "rank": str(v["rank"]),
            "unit_size": str(v["size"]),
            "color": "red" if v["negative"] else "black",
            "style": "dashed" if v["negative"] else "solid",
        }
        body = ", ".join(f"{k}={_q(val)}" for k, val in attrs.items())
        lines.append(f"  {_q(v['id'])} [{body}];")
    for e in graph["edges"]:
        lines.append(f"  {_q(e['source'])} -- {_q(e['target'])};")
    lines.append("}")
    return _write("\n".join(lines) + "\n", path)


def graph_json(graph: dict, path=None) -> str:
    return _write(json.dumps(graph, indent=2, sort_keys=True) + "\n", path)
