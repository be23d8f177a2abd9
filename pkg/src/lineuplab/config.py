"""Run configuration: defaults, config files and the seed fallback."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import SchemaError
from .lapm import LapmConfig, MalaSchedule
from .pipeline import FitConfig
from .regression import CVConfig

SEED_ENV = "LINEUPLAB_SEED"


@dataclass
class RunConfig:
    k: int | None = 5
    min_seconds: float = 10_000.0
    max_size: int | None = None
    method: str = "HAPM"
    methods: list[str] = field(default_factory=lambda: ["PM", "APM", "HAPM", "LAPM"])
    weighting: str = "per_game"
    # "cv" or a fixed penalty
    lam: str | float = "cv"
    kappa: str | float = "cv"
    folds: int = 10
    tau: str | int = "elbow"
    min_tau: int = 5
    mala_retained: int = 1000
    mala_thin: int = 5
    mala_burn_in: float = 0.10
    bootstrap_b: int = 200
    seed: int = 0
    top_n: int = 15
    stints: list[str] = field(default_factory=list)
    roster: str | None = None
    metrics: str | None = None
    out_dir: str = "."
    season: str | None = None
    team: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def schedule(self) -> MalaSchedule:
        return MalaSchedule(self.mala_retained, self.mala_thin, self.mala_burn_in)

    def fit_config(self) -> FitConfig:
        lam = None if str(self.lam).lower() == "cv" else float(self.lam)
        kappa = None if str(self.kappa).lower() == "cv" else float(self.kappa)
        tau = self.tau if self.tau in ("elbow", "full") else int(self.tau)
        return FitConfig(
            max_size=self.max_size,
            weighting=self.weighting,
            ridge=CVConfig(lam=lam, folds=self.folds, seed=self.seed),
            lapm=LapmConfig(tau=tau, kappa=kappa, folds=self.folds, seed=self.seed,
                            min_tau=self.min_tau),
        )


_FIELDS = {f.name: f for f in fields(RunConfig)}
_LISTS = {"methods", "stints"}
_INTS = {"k", "max_size", "folds", "min_tau", "mala_retained", "mala_thin", "bootstrap_b", "seed", "top_n"}
_FLOATS = {"min_seconds", "mala_burn_in"}


def _coerce(key: str, value):
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "null")):
        return None
    if key in _LISTS:
        if isinstance(value, str):
            return [v.strip() for v in value.split(",") if v.strip()]
        return [str(v) for v in value]
    if key in _INTS:
        return int(value)
    if key in _FLOATS:
        return float(value)
    if key in ("lam", "kappa"):
        return value if str(value).lower() == "cv" else float(value)
    if key == "tau":
        return value if str(value) in ("elbow", "full") else int(value)
    return str(value)


def parse_config_text(text: str) -> dict:
    """JSON object or flat ``key=value`` lines (``#`` starts a comment)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"config: {exc.msg}", line=exc.lineno) from None
        items = list(raw.items())
        base = 1
    else:
        items = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError("config: expected key=value", line=lineno)
            key, value = (p.strip() for p in line.split("=", 1))
            items.append((key, value))
        base = None
    out = {}
    for key, value in items:
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise SchemaError(f"config: unknown key {key!r}", line=base)
        try:
            out[key] = _coerce(key, value)
        except ValueError:
            raise SchemaError(f"config: bad value for {key}: {value!r}", line=base) from None
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the config file, then explicit overrides.

    The seed falls back to ``LINEUPLAB_SEED`` when neither the file nor the
    overrides set one.
    """
    values = parse_config_text(Path(path).read_text(encoding="utf-8")) if path else {}
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if "seed" not in values and "seed" not in overrides and os.environ.get(SEED_ENV):
        try:
            values["seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise SchemaError(f"{SEED_ENV} must be an integer") from None
    values.update({k: _coerce(k, v) for k, v in overrides.items()})
    return RunConfig(**values)
