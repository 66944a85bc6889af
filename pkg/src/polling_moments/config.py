"""Model/policy configuration files (YAML; JSON is accepted as a subset)."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from .model import BEP, BGP, BSP, FAMILIES, DistributionSpec, PollingTable, SystemModel

PARAM_NAMES = {
    "deterministic": ("value",),
    "exponential": ("rate",),
    "erlang": ("shape", "rate"),
    "uniform": ("low", "high"),
}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration file."""


def _dist(obj: Any, where: str) -> DistributionSpec:
    if not isinstance(obj, dict) or "family" not in obj:
        raise ConfigError(f"{where}: expected a mapping with 'family' and 'params'")
    fam = str(obj["family"]).lower()
    if fam not in PARAM_NAMES:
        raise ConfigError(f"{where}: unknown family {obj['family']!r}; expected one of {FAMILIES}")
    params = obj.get("params", {})
    names = PARAM_NAMES[fam]
    if isinstance(params, dict):
        missing = [n for n in names if n not in params]
        extra = sorted(set(params) - set(names))
        if missing or extra:
            raise ConfigError(f"{where}: {fam} params must be exactly {list(names)}; "
                              f"missing {missing}, unexpected {extra}")
        values = [params[n] for n in names]
    elif isinstance(params, (list, tuple)):
        if len(params) != len(names):
            raise ConfigError(f"{where}: {fam} needs {len(names)} params {list(names)}")
        values = list(params)
    else:
        values = [params] if len(names) == 1 else None
        if values is None:
            raise ConfigError(f"{where}: {fam} params must be a mapping {list(names)}")
    try:
        return DistributionSpec(fam, tuple(float(v) for v in values))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_policy(obj: Any):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError("policy: expected a mapping with 'kind' (bep, bgp or bsp)")
    kind = str(obj["kind"]).lower()
    try:
        if kind in ("bep", "bgp"):
            if "r" not in obj:
                raise ConfigError(f"policy: {kind} needs a list 'r' of per-stage service ratios")
            r = tuple(float(v) for v in obj["r"])
            return BEP(r) if kind == "bep" else BGP(r)
        if kind == "bsp":
            if "y" not in obj:
                raise ConfigError("policy: bsp needs a list 'y' of per-stage base-stock levels")
            return BSP(tuple(obj["y"]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"policy: {exc}") from None
    raise ConfigError(f"policy: unknown kind {obj['kind']!r}; expected bep, bgp or bsp")


def parse_config(data: Any):
    """(SystemModel, policy) from a parsed mapping."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    for key in ("queues", "table", "switchover", "policy"):
        if key not in data:
            raise ConfigError(f"config is missing required key {key!r}")
    queues = data["queues"]
    if not isinstance(queues, list) or not queues:
        raise ConfigError("queues: expected a nonempty list")
    lam, service = [], []
    for k, q in enumerate(queues, start=1):
        if not isinstance(q, dict) or "lambda" not in q or "service" not in q:
            raise ConfigError(f"queues[{k}]: expected keys 'lambda' and 'service'")
        try:
            lam.append(float(q["lambda"]))
        except (TypeError, ValueError):
            raise ConfigError(f"queues[{k}].lambda: not a number: {q['lambda']!r}") from None
        service.append(_dist(q["service"], f"queues[{k}].service"))
    table = data["table"]
    if not isinstance(table, list) or not table:
        raise ConfigError("table: expected a nonempty list of 1-based queue indices")
    try:
        tab = PollingTable.from_one_based([int(v) for v in table], len(queues))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"table: {exc}") from None
    sw = data["switchover"]
    if not isinstance(sw, list):
        raise ConfigError("switchover: expected a list with one distribution per stage")
    switch = [_dist(d, f"switchover[{i}]") for i, d in enumerate(sw, start=1)]
    try:
        model = SystemModel(tuple(lam), tuple(service), tuple(switch), tab)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return model, parse_policy(data["policy"])


def load_config(path):
    """Read a config file; raises ConfigError on syntax or schema problems, OSError on I/O."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: cannot parse: {exc}") from None
    return parse_config(data)


def policy_to_dict(policy) -> dict:
    if isinstance(policy, BSP):
        return {"kind": "bsp", "y": list(policy.y)}
    return {"kind": policy.kind, "r": list(policy.r)}


def config_to_dict(model: SystemModel, policy) -> dict:
    return {
        "queues": [{"lambda": lam, "service": d.to_dict()} for lam, d in zip(model.lam, model.service)],
        "table": model.table.to_one_based(),
        "switchover": [d.to_dict() for d in model.switchover],
        "policy": policy_to_dict(policy),
    }


def dump_config(model: SystemModel, policy, path):
    Path(path).write_text(yaml.safe_dump(config_to_dict(model, policy), sort_keys=False))
