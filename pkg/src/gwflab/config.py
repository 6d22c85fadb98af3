"""Experiment configuration: one JSON file per run, flags only for overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from gwflab.branching import OffspringDistribution, offspring_from_json
from gwflab.errors import ConfigError
from gwflab.similarity import IFS, ifs_from_json


@dataclass
class ExperimentConfig:
    ifs: IFS
    offspring: OffspringDistribution
    horizon: int
    rho_schedule: list
    trials: int
    seed: int
    output_dir: str
    extras: dict = field(default_factory=dict)

    def extra(self, section: str, key: str, default):
        return self.extras.get(section, {}).get(key, default)


def _require_int(obj, key, default, lo, path):
    value = obj.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < lo:
        raise ConfigError(f"{path}.{key}: expected an integer >= {lo}, got {value!r}")
    return value


def parse_config(obj: dict, source: str = "config") -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError(f"{source}: expected a JSON object")
    if "ifs" not in obj:
        raise ConfigError(f"{source}: missing 'ifs'")
    ifs = ifs_from_json(obj["ifs"], path=f"{source}.ifs")
    if "offspring" not in obj:
        raise ConfigError(f"{source}: missing 'offspring'")
    offspring = offspring_from_json(
        obj["offspring"], ifs.alphabet_size, path=f"{source}.offspring"
    )
    horizon = _require_int(obj, "horizon", 10, 1, source)
    trials = _require_int(obj, "trials", 1000, 1, source)
    seed = obj.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError(f"{source}.seed: expected an unsigned 64-bit integer, got {seed!r}")
    schedule = obj.get("rho_schedule")
    if schedule is None:
        schedule = [ifs.r_min**k for k in (2, 3, 4)]
    if not isinstance(schedule, list) or not schedule:
        raise ConfigError(f"{source}.rho_schedule: expected a non-empty list of scales")
    for k, rho in enumerate(schedule):
        if not isinstance(rho, (int, float)) or not 0.0 < float(rho) < 1.0:
            raise ConfigError(f"{source}.rho_schedule[{k}]: scales must lie in (0, 1), got {rho!r}")
    output_dir = obj.get("output_dir", "runs/experiment")
    if not isinstance(output_dir, str):
        raise ConfigError(f"{source}.output_dir: expected a string")
    known = {
        "ifs", "offspring", "horizon", "trials", "seed", "rho_schedule", "output_dir",
        "kesten", "sections", "check", "zoom", "render",
    }
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    extras = {k: obj[k] for k in ("kesten", "sections", "check", "zoom", "render") if k in obj}
    for section, sub in extras.items():
        if not isinstance(sub, dict):
            raise ConfigError(f"{source}.{section}: expected an object")
    return ExperimentConfig(
        ifs=ifs,
        offspring=offspring,
        horizon=horizon,
        rho_schedule=[float(r) for r in schedule],
        trials=trials,
        seed=seed,
        output_dir=output_dir,
        extras=extras,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from None
    return parse_config(obj, source=str(path))
