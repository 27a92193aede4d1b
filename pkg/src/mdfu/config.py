"""YAML experiment configs: defaults, validation, overrides and resolution."""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import protocols
from .simulator import (ExperimentConfig, InputChange, Scenario, counting_scenario,
                        dynamic_scenario, uniform_scenario)
from .topology import generate_er, read_edge_list


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "graph": {"mode": "generate", "n": 200, "m": 1000, "seed": 0, "path": None},
    "protocol": protocols.MDFU,
    "loss": {"f": 0.0, "seeds": [0]},
    "scenario": {
        "kind": "counting", "seed": 0, "lo": 25.0, "hi": 35.0, "path": None, "changes": [],
        "fraction": 0.5, "start": 50, "window": 50, "rate": 0.05, "decrease": "mul",
    },
    "run": {"rounds": 100, "trace_sample": 100, "trace_seed": 0},
}

GRAPH_MODES = ("generate", "file")
SCENARIO_KINDS = ("counting", "uniform", "dynamic", "file")


def _merge(base: dict, extra: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        path = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path!r} must be a mapping")
            out[key] = _merge(base[key], value, path + ".")
        else:
            out[key] = value
    return out


def parse_override(item: str) -> tuple[list[str], Any]:
    if "=" not in item:
        raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw) if raw else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value for {key!r}: {exc}") from None
    return key.strip().split("."), value


def apply_override(cfg: dict, item: str) -> None:
    keys, value = parse_override(item)
    node = cfg
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError(f"unknown config key {'.'.join(keys)!r}")
        node = node[k]
    if keys[-1] not in node or isinstance(node[keys[-1]], dict):
        raise ConfigError(f"unknown config key {'.'.join(keys)!r}")
    node[keys[-1]] = value


def load_config(path: str | Path | None, overrides: list[str] = ()) -> dict:
    """Defaults <- file <- ``--set`` overrides, then validation."""
    raw: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
    cfg = _merge(DEFAULTS, raw)
    for item in overrides:
        apply_override(cfg, item)
    base = Path(path).parent if path is not None else Path(".")
    validate(cfg, base)
    return cfg


def _int(x, name, lo=None):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(f"{name} must be an integer, got {x!r}")
    if lo is not None and x < lo:
        raise ConfigError(f"{name} must be >= {lo}, got {x}")
    return x


def _num(x, name):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{name} must be a number, got {x!r}")
    return float(x)


def validate(cfg: dict, base: Path = Path(".")) -> None:
    g = cfg["graph"]
    if g["mode"] not in GRAPH_MODES:
        raise ConfigError(f"graph.mode must be one of {GRAPH_MODES}, got {g['mode']!r}")
    if g["mode"] == "generate":
        _int(g["n"], "graph.n", 2)
        _int(g["m"], "graph.m", 1)
        _int(g["seed"], "graph.seed", 0)
    elif not g["path"]:
        raise ConfigError("graph.path is required when graph.mode is 'file'")
    if cfg["protocol"] not in protocols.PROTOCOLS:
        raise ConfigError(f"protocol must be one of {protocols.PROTOCOLS}, got {cfg['protocol']!r}")

    loss = cfg["loss"]
    f = _num(loss["f"], "loss.f")
    if not (0.0 <= f < 1.0):
        raise ConfigError(f"loss.f must lie in [0, 1), got {f}")
    seeds = loss["seeds"]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("loss.seeds must be a non-empty list")
    for s in seeds:
        _int(s, "loss.seeds entry", 0)

    sc = cfg["scenario"]
    if sc["kind"] not in SCENARIO_KINDS:
        raise ConfigError(f"scenario.kind must be one of {SCENARIO_KINDS}, got {sc['kind']!r}")
    _int(sc["seed"], "scenario.seed", 0)
    lo, hi = _num(sc["lo"], "scenario.lo"), _num(sc["hi"], "scenario.hi")
    if lo > hi:
        raise ConfigError("scenario.lo must not exceed scenario.hi")
    if sc["kind"] == "file" and not sc["path"]:
        raise ConfigError("scenario.path is required when scenario.kind is 'file'")
    if sc["decrease"] not in ("mul", "inverse"):
        raise ConfigError("scenario.decrease must be 'mul' or 'inverse'")
    _num(sc["fraction"], "scenario.fraction")
    _num(sc["rate"], "scenario.rate")
    _int(sc["start"], "scenario.start", 1)
    _int(sc["window"], "scenario.window", 0)
    if not isinstance(sc["changes"], list):
        raise ConfigError("scenario.changes must be a list")
    for c in sc["changes"]:
        if not (isinstance(c, list) and len(c) == 4):
            raise ConfigError(f"scenario.changes entries are [round, node, kind, value], got {c!r}")
        _int(c[0], "change round", 1)
        _int(c[1], "change node", 0)
        if c[2] not in ("mul", "set"):
            raise ConfigError(f"change kind must be 'mul' or 'set', got {c[2]!r}")
        _num(c[3], "change value")

    r = cfg["run"]
    _int(r["rounds"], "run.rounds", 1)
    _int(r["trace_sample"], "run.trace_sample", 0)
    _int(r["trace_seed"], "run.trace_seed", 0)


def build_graph(cfg: dict, base: Path = Path(".")):
    g = cfg["graph"]
    if g["mode"] == "generate":
        return generate_er(g["n"], g["m"], g["seed"])
    return read_edge_list(base / g["path"])


def _read_inputs(path: Path) -> np.ndarray:
    vals = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            s = line.strip()
            if s and not s.startswith("#"):
                vals.extend(float(x) for x in s.split())
    return np.array(vals)


def build_scenario(cfg: dict, n: int, base: Path = Path(".")) -> Scenario:
    sc = cfg["scenario"]
    kind = sc["kind"]
    if kind == "counting":
        scenario = counting_scenario(n, sc["seed"])
    elif kind == "uniform":
        scenario = uniform_scenario(n, sc["lo"], sc["hi"], sc["seed"])
    elif kind == "dynamic":
        scenario = dynamic_scenario(n, sc["seed"], lo=sc["lo"], hi=sc["hi"],
                                    fraction=sc["fraction"], start=sc["start"],
                                    window=sc["window"], rate=sc["rate"],
                                    decrease=sc["decrease"])
    else:
        scenario = Scenario(_read_inputs(base / sc["path"]))
        if scenario.n != n:
            raise ConfigError(f"scenario file has {scenario.n} values for {n} nodes")
    if sc["changes"]:
        extra = [InputChange(int(r), int(i), k, float(v)) for r, i, k, v in sc["changes"]]
        merged = sorted(scenario.changes + extra, key=lambda c: c.round)
        scenario = Scenario(scenario.inputs, merged)
    return scenario


def experiment(cfg: dict, base: Path = Path(".")) -> tuple[ExperimentConfig, list[int]]:
    graph = build_graph(cfg, base)
    scenario = build_scenario(cfg, graph.n, base)
    exp = ExperimentConfig(graph, scenario, cfg["protocol"], float(cfg["loss"]["f"]),
                           cfg["run"]["rounds"], cfg["loss"]["seeds"][0])
    exp.validate()
    return exp, list(cfg["loss"]["seeds"])


def dump_manifest(cfg: dict, extra: dict | None = None) -> str:
    doc = copy.deepcopy(cfg)
    doc["loss"]["f"] = float(doc["loss"]["f"])
    if extra:
        doc.update(extra)
    return yaml.safe_dump(doc, sort_keys=True, default_flow_style=None)
