"""Command-line front end: ``mdfu simulate|analyze|trace|graph gen|graph check``."""

from __future__ import annotations

import argparse
import io
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__, analysis, config
from .protocols import ProtocolError
from .simulator import METRIC_NAMES, SimulationError, run, run_many, sample_nodes
from .topology import TopologyError, generate_er, read_edge_list, save_edge_list

FLOAT_FMT = "%.12g"


def _fmt(x) -> str:
    return FLOAT_FMT % x


def _write_text(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _manifest_path(out: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + ".manifest.yaml")


def _load(args) -> tuple[dict, Path]:
    cfg = config.load_config(args.config, args.set or [])
    base = Path(args.config).parent if args.config else Path(".")
    return cfg, base


def _maybe_manifest(args, cfg: dict, command: str, extra: dict | None = None) -> None:
    if not args.manifest:
        return
    if not args.out or args.out == "-":
        raise config.ConfigError("--manifest needs --out PATH")
    meta = {"command": command, "version": __version__}
    if extra:
        meta.update(extra)
    _write_text(config.dump_manifest(cfg, {"resolved": meta}), str(_manifest_path(args.out)))


def metrics_csv(agg) -> str:
    multi = len(agg.seeds) > 1
    header = ["round", *METRIC_NAMES]
    if multi:
        header += [f"{k}_std" for k in METRIC_NAMES]
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in range(len(agg.rounds)):
        row = [str(int(agg.rounds[r]))] + [_fmt(agg.mean[k][r]) for k in METRIC_NAMES]
        if multi:
            row += [_fmt(agg.std[k][r]) for k in METRIC_NAMES]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def cmd_simulate(args) -> int:
    cfg, base = _load(args)
    exp, seeds = config.experiment(cfg, base)
    agg = run_many(exp, seeds)
    _write_text(metrics_csv(agg), args.out)
    _maybe_manifest(args, cfg, "simulate", {"n": exp.graph.n, "m": exp.graph.m})
    if args.plot:
        from . import plotting

        plotting.plot_metrics(agg.rounds, agg.mean, args.plot, f=exp.f,
                              std=agg.std if len(seeds) > 1 else None,
                              title=f"{exp.protocol}, f={exp.f:g}, n={exp.graph.n}")
    return 0


def trace_csv(rounds, true_mean, nodes, estimates) -> str:
    buf = io.StringIO()
    buf.write(",".join(["round", "true_mean"] + [f"node_{i}" for i in nodes]) + "\n")
    for r in range(len(rounds)):
        row = [str(int(rounds[r])), _fmt(true_mean[r])] + [_fmt(x) for x in estimates[r]]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def cmd_trace(args) -> int:
    cfg, base = _load(args)
    if args.k is not None:
        cfg["run"]["trace_sample"] = args.k
    exp, seeds = config.experiment(cfg, base)
    nodes = sample_nodes(exp.graph.n, cfg["run"]["trace_sample"], cfg["run"]["trace_seed"])
    res = run(replace(exp, record_estimates=True))
    rounds = np.arange(exp.rounds + 1)
    est = res.estimates[:, nodes]
    _write_text(trace_csv(rounds, res.true_means, nodes, est), args.out)
    _maybe_manifest(args, cfg, "trace", {"nodes": nodes, "loss_seed": seeds[0]})
    if args.plot:
        from . import plotting

        plotting.plot_trace(rounds, res.true_means, nodes, est, args.plot,
                            title=f"{exp.protocol}, f={exp.f:g}, {len(nodes)} of {exp.graph.n} nodes")
    return 0


def cmd_analyze(args) -> int:
    if args.graph:
        graph = read_edge_list(args.graph)
        cfg = None
    else:
        cfg, base = _load(args)
        graph = config.build_graph(cfg, base)
    f = args.f if args.f is not None else (float(cfg["loss"]["f"]) if cfg else 0.0)
    if args.mean is not None:
        vbar = args.mean
    elif cfg is not None:
        vbar = float(np.mean(config.build_scenario(cfg, graph.n, base).inputs))
    else:
        vbar = 1.0
    report = analysis.bound_report(graph, args.xi, f, vbar)
    text = "key,value\n" + "".join(f"{k},{v}\n" for k, v in report.rows())
    _write_text(text, args.out)
    if cfg is not None:
        _maybe_manifest(args, cfg, "analyze", {"xi": args.xi, "f": f, "true_mean": vbar})
    return 0


def cmd_graph_gen(args) -> int:
    if args.config:
        cfg, _ = _load(args)
        g = cfg["graph"]
        n, m, seed = g["n"], g["m"], g["seed"]
    else:
        n, m, seed = args.n, args.m, args.seed
    if n is None or m is None:
        raise config.ConfigError("graph gen needs --n and --m (or --config)")
    graph = generate_er(n, m, seed)
    _write_text(f"# G(n={n}, m={m}) seed={seed}\n" + save_edge_list(graph), args.out)
    return 0


def cmd_graph_check(args) -> int:
    graph = read_edge_list(args.path)
    deg = graph.degrees
    lines = [
        f"n={graph.n}",
        f"m={graph.m}",
        f"degree_min={int(deg.min())}",
        f"degree_max={int(deg.max())}",
        f"degree_mean={_fmt(float(deg.mean()))}",
        "connected=true",
    ]
    if graph.labels is not None:
        lines.append("remapped=" + " ".join(f"{old}:{new}" for new, old in enumerate(graph.labels)))
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdfu", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, plot=True):
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
        p.add_argument("--set", metavar="KEY=VALUE", action="append",
                       help="override a config value, e.g. loss.f=0.1 (repeatable)")
        p.add_argument("--manifest", action="store_true",
                       help="also write the fully resolved config next to --out")
        if plot:
            p.add_argument("--plot", metavar="PATH", help="render a figure to PATH (.png/.pdf/.svg)")

    p = sub.add_parser("simulate", help="run the configured experiment, write per-round metrics CSV")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trace", help="write per-node estimates for a seeded node sample")
    common(p)
    p.add_argument("--k", type=int, help="sample size (overrides run.trace_sample)")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("analyze", help="report conductance, spectral gap and round/bias bounds")
    common(p, plot=False)
    p.add_argument("--graph", metavar="PATH", help="edge-list file instead of a config")
    p.add_argument("--xi", type=float, default=0.01)
    p.add_argument("--f", type=float, default=None)
    p.add_argument("--mean", type=float, default=None, help="true mean for the bias band")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("graph", help="topology utilities")
    gsub = p.add_subparsers(dest="graph_command", required=True)
    g = gsub.add_parser("gen", help="generate a connected G(n, m) edge list")
    common(g, plot=False)
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_graph_gen)
    g = gsub.add_parser("check", help="validate an edge-list file")
    g.add_argument("path")
    g.set_defaults(func=cmd_graph_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (config.ConfigError, TopologyError, SimulationError, analysis.AnalysisError,
            ProtocolError, OSError, yaml.YAMLError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"mdfu: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
