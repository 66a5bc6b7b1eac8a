"""Benchmark run configurations (JSON).

Example::

    {
      "name": "narrow_passage",
      "environments": ["narrow_passage.json"],
      "variants": ["POSH", "GRAPH_THEN_CHAIN", "SINGLE_CHAIN"],
      "runs": 10,
      "seed": 0,
      "builder": {"n_chains": 3, "b_max": 5.0},
      "lm": {"max_iters": 100},
      "noise": {"sigma_exec": 0.1, "sigma_loc": 0.05},
      "goal_tolerance": 0.5,
      "chain_counts": [2, 4, 6],
      "report_timing": false,
      "workers": 1
    }

Environment entries are paths or glob patterns relative to the config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from posh.environment import EnvironmentConfig, load_environment
from posh.graph_builder import BuilderParams
from posh.optimizer import LmParams
from posh.simulation import VARIANTS, TrialConfig

KNOWN_KEYS = {
    "name", "environments", "variants", "runs", "seed", "builder", "lm", "noise",
    "goal_tolerance", "chain_counts", "report_timing", "workers",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    name: str
    environments: list[EnvironmentConfig]
    variants: list[str] = field(default_factory=lambda: list(VARIANTS))
    runs: int = 10
    seed: int = 0
    builder: BuilderParams = field(default_factory=BuilderParams)
    lm: LmParams = field(default_factory=LmParams)
    sigma_exec: float = 0.1
    sigma_loc: float = 0.05
    goal_tolerance: float = 0.5
    chain_counts: list[int] = field(default_factory=lambda: [2, 4, 6])
    report_timing: bool = False
    workers: int = 1
    source: str | None = None

    def trial_configs(self, variants=None) -> list[TrialConfig]:
        """One base config per (environment, variant); seeds are set later."""
        return [
            TrialConfig(
                environment=env,
                variant=v,
                builder=self.builder,
                lm=self.lm,
                sigma_exec=self.sigma_exec,
                sigma_loc=self.sigma_loc,
                seed=self.seed,
                goal_tolerance=self.goal_tolerance,
            )
            for env in self.environments
            for v in (variants or self.variants)
        ]


def data_path(name: str = "") -> Path:
    """Location of a file shipped in ``posh/data``."""
    return Path(str(resources.files("posh") / "data")) / name


def _dataclass_from(cls, d, what):
    if not isinstance(d, dict):
        raise ConfigError(f"{what} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from exc


def _resolve_environments(entries, base: Path) -> list[Path]:
    paths = []
    for e in entries:
        p = Path(e)
        p = p if p.is_absolute() else base / p
        if any(ch in e for ch in "*?["):
            matches = sorted(p.parent.glob(p.name))
            if not matches:
                raise ConfigError(f"environment pattern matched nothing: {p}")
            paths.extend(matches)
        else:
            paths.append(p)
    return paths


def run_config_from_dict(d: dict, base: Path = Path("."), source: str | None = None) -> RunConfig:
    unknown = set(d) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    entries = d.get("environments")
    if not entries:
        raise ConfigError("config lists no environments")
    envs = [load_environment(p) for p in _resolve_environments(entries, base)]
    variants = list(d.get("variants", VARIANTS))
    bad = [v for v in variants if v not in VARIANTS]
    if bad or not variants:
        raise ConfigError(f"unknown variants {bad}; expected a subset of {list(VARIANTS)}")
    noise = d.get("noise", {})
    chain_counts = [int(k) for k in d.get("chain_counts", [2, 4, 6])]
    if not chain_counts or min(chain_counts) < 1:
        raise ConfigError("chain_counts must be positive integers")
    runs = int(d.get("runs", 10))
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    return RunConfig(
        name=d.get("name", Path(source).stem if source else "run"),
        environments=envs,
        variants=variants,
        runs=runs,
        seed=int(d.get("seed", 0)),
        builder=_dataclass_from(BuilderParams, d.get("builder", {}), "builder"),
        lm=_dataclass_from(LmParams, d.get("lm", {}), "lm"),
        sigma_exec=float(noise.get("sigma_exec", 0.1)),
        sigma_loc=float(noise.get("sigma_loc", 0.05)),
        goal_tolerance=float(d.get("goal_tolerance", 0.5)),
        chain_counts=chain_counts,
        report_timing=bool(d.get("report_timing", False)),
        workers=int(d.get("workers", 1)),
        source=source,
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"run config not found: {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return run_config_from_dict(d, base=path.parent, source=str(path))
