"""Synchronous round engine with per-directed-edge message loss."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import protocols as P
from .topology import Graph

MASK64 = (1 << 64) - 1
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_K_ROUND = 0x9E3779B97F4A7C15
_K_SRC = 0xD6E8FEB86659FD93
_K_DST = 0xA0761D6478BD642F


class SimulationError(ValueError):
    pass


class UndefinedMetrics(SimulationError):
    pass


def _splitmix(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _splitmix_np(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class LossModel:
    """Independent Bernoulli(f) drop for every directed message.

    The decision for ``(round, src, dst)`` is a pure function of the seed:
    ``h = mix(mix(mix(seed ^ round*K1) ^ src*K2) ^ dst*K3)`` with the SplitMix64
    finalizer as ``mix``; the top 53 bits of ``h`` give a uniform in [0, 1)
    and the message is dropped when that uniform is below ``f``.
    """

    f: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.f < 1.0):
            raise SimulationError(f"loss probability must lie in [0, 1), got {self.f}")

    def uniform(self, rnd: int, src: int, dst: int) -> float:
        h = _splitmix((self.seed & MASK64) ^ ((rnd * _K_ROUND) & MASK64))
        h = _splitmix(h ^ ((src * _K_SRC) & MASK64))
        h = _splitmix(h ^ ((dst * _K_DST) & MASK64))
        return (h >> 11) * 2.0**-53

    def dropped(self, rnd: int, src: int, dst: int) -> bool:
        return self.f > 0.0 and self.uniform(rnd, src, dst) < self.f

    def uniforms(self, rnd: int, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
        base = _splitmix((self.seed & MASK64) ^ ((rnd * _K_ROUND) & MASK64))
        with np.errstate(over="ignore"):
            h = np.uint64(base) ^ (src.astype(np.uint64) * np.uint64(_K_SRC))
            h = _splitmix_np(h)
            h = _splitmix_np(h ^ (dst.astype(np.uint64) * np.uint64(_K_DST)))
        return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def drop_mask(self, rnd: int, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
        if self.f == 0.0:
            return np.zeros(len(src), dtype=bool)
        return self.uniforms(rnd, src, dst) < self.f


MULTIPLY = "mul"
ASSIGN = "set"


@dataclass(frozen=True)
class InputChange:
    round: int
    node: int
    kind: str
    value: float


@dataclass
class Scenario:
    """Initial inputs plus scheduled input changes.

    Changes for round ``r`` are applied at the very start of round ``r``, in
    list order.
    """

    inputs: np.ndarray
    changes: list[InputChange] = field(default_factory=list)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64).copy()
        changes = [c if isinstance(c, InputChange) else InputChange(*c) for c in self.changes]
        last = 0
        for c in changes:
            if c.round < 1:
                raise SimulationError(f"input changes start at round 1, got {c.round}")
            if c.round < last:
                raise SimulationError("input change rounds must be non-decreasing")
            if not (0 <= c.node < len(self.inputs)):
                raise SimulationError(f"input change for unknown node {c.node}")
            if c.kind not in (MULTIPLY, ASSIGN):
                raise SimulationError(f"unknown change kind {c.kind!r}")
            last = c.round
        self.changes = changes

    @property
    def n(self) -> int:
        return len(self.inputs)

    def by_round(self) -> dict[int, list[InputChange]]:
        out: dict[int, list[InputChange]] = {}
        for c in self.changes:
            out.setdefault(c.round, []).append(c)
        return out

    def inputs_at(self, rnd: int) -> np.ndarray:
        """Inputs in force during round ``rnd`` (after its changes)."""
        v = self.inputs.copy()
        for c in self.changes:
            if c.round > rnd:
                break
            v[c.node] = v[c.node] * c.value if c.kind == MULTIPLY else c.value
        return v


def counting_scenario(n: int, seed: int = 0) -> Scenario:
    """All zeros except one uniformly chosen node holding 1."""
    if n < 1:
        raise SimulationError("n must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    v = np.zeros(n)
    v[int(rng.integers(n))] = 1.0
    return Scenario(v)


def uniform_scenario(n: int, lo: float, hi: float, seed: int = 0) -> Scenario:
    rng = np.random.Generator(np.random.PCG64(seed))
    return Scenario(rng.uniform(lo, hi, size=n))


def dynamic_scenario(n: int, seed: int = 0, *, lo: float = 25.0, hi: float = 35.0,
                     fraction: float = 0.5, start: int = 50, window: int = 50,
                     rate: float = 0.05, decrease: str = "mul") -> Scenario:
    """Rising-then-falling inputs on a random subset of nodes.

    Inputs start uniform in ``[lo, hi]``. A seeded ``fraction`` of the nodes is
    multiplied by ``1 + rate`` on each of the ``window`` rounds from ``start``,
    then by ``1 - rate`` (``decrease="mul"``) or ``1 / (1 + rate)``
    (``decrease="inverse"``) on each of the following ``window`` rounds.
    """
    if n < 2:
        raise SimulationError("n must be >= 2")
    if decrease not in ("mul", "inverse"):
        raise SimulationError(f"decrease must be 'mul' or 'inverse', got {decrease!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.uniform(lo, hi, size=n)
    k = int(round(fraction * n))
    chosen = np.sort(rng.choice(n, size=k, replace=False)).tolist()
    changes: list[InputChange] = []
    if rate != 0.0:
        up = 1.0 + rate
        down = 1.0 - rate if decrease == "mul" else 1.0 / (1.0 + rate)
        for r in range(start, start + window):
            changes.extend(InputChange(r, i, MULTIPLY, up) for i in chosen)
        for r in range(start + window, start + 2 * window):
            changes.extend(InputChange(r, i, MULTIPLY, down) for i in chosen)
    return Scenario(v, changes)


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    cv_rmse: float
    max_rel_err: float
    mean_estimate: float
    true_mean: float
    node_mass_fraction: float


METRIC_NAMES = ("cv_rmse", "max_rel_err", "mean_estimate", "true_mean", "node_mass_fraction")


def round_metrics(rnd: int, estimates: np.ndarray, inputs: np.ndarray) -> RoundMetrics:
    vbar = float(np.mean(inputs))
    if vbar == 0.0:
        raise UndefinedMetrics("true mean is zero; relative metrics are undefined")
    dev = estimates - vbar
    scale = abs(vbar)
    return RoundMetrics(
        round=rnd,
        cv_rmse=math.sqrt(float(np.mean(dev * dev))) / scale,
        max_rel_err=float(np.max(np.abs(dev))) / scale,
        mean_estimate=float(np.mean(estimates)),
        true_mean=vbar,
        node_mass_fraction=float(np.sum(estimates)) / float(np.sum(inputs)),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    graph: Graph
    scenario: Scenario
    protocol: str = P.MDFU
    f: float = 0.0
    rounds: int = 100
    loss_seed: int = 0
    record_estimates: bool = False

    def validate(self) -> None:
        if self.protocol not in P.PROTOCOLS:
            raise SimulationError(f"unknown protocol {self.protocol!r}")
        if self.rounds < 1:
            raise SimulationError("rounds must be >= 1")
        if not (0.0 <= self.f < 1.0):
            raise SimulationError(f"f must lie in [0, 1), got {self.f}")
        if self.scenario.n != self.graph.n:
            raise SimulationError(
                f"scenario has {self.scenario.n} inputs for a {self.graph.n}-node graph")
        if self.graph.n < 2:
            raise SimulationError("simulation needs at least two nodes")
        if self.protocol == P.PUSH_SYNOPSES and self.scenario.changes:
            raise SimulationError("push-synopses does not support input changes")


@dataclass
class RunResult:
    metrics: list[RoundMetrics]
    estimates: np.ndarray | None = None
    true_means: np.ndarray | None = None

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(m, name) for m in self.metrics])


class VectorEngine:
    """All nodes of one protocol as arrays over directed edges.

    Directed edge ``k`` is ``src[k] -> dst[k]``; ``rev[k]`` is its reverse.
    ``f_out[k]`` lives at ``src[k]``; ``f_in[k]`` is what ``dst[k]`` last heard
    over edge ``k``.
    """

    def __init__(self, graph: Graph, protocol: str, inputs: np.ndarray):
        self.protocol = protocol
        self.n = graph.n
        self.src, self.dst = graph.directed_edges()
        order = np.lexsort((self.src, self.dst))
        self.rev = np.empty_like(order)
        # (src, dst)-sorted position of each edge's reverse equals the
        # (dst, src)-sorted position of the edge itself.
        self.rev[order] = np.arange(len(order))
        deg = graph.degrees.astype(np.float64)
        self.denom = 2.0 * np.maximum(deg[self.src], deg[self.dst])
        self.v = np.asarray(inputs, dtype=np.float64).copy()
        self.e = self.v.copy()
        if protocol == P.PUSH_SYNOPSES:
            self.share = 1.0 / self.denom
            kept = np.ones(self.n)
            for k in range(len(self.src)):
                kept[self.src[k]] -= self.share[k]
            self.self_share = kept
            self.s = self.v.copy()
            self.w = np.ones(self.n)
        else:
            self.f_out = self.e[self.src] / self.denom
            self.f_in = np.zeros(len(self.src))
            if protocol == P.MDFU_LP:
                self.vel = np.zeros(len(self.src))
                self.since = np.ones(len(self.src))

    def set_input(self, i: int, value: float) -> None:
        self.v[i] = value

    def step(self, delivered: np.ndarray) -> np.ndarray:
        src, n = self.src, self.n
        if self.protocol == P.PUSH_SYNOPSES:
            got_s = np.where(delivered, self.s[src] * self.share, 0.0)
            got_w = np.where(delivered, self.w[src] * self.share, 0.0)
            s_keep = self.s * self.self_share
            w_keep = self.w * self.self_share
            self.s = s_keep + np.bincount(self.dst, got_s, minlength=n)
            self.w = w_keep + np.bincount(self.dst, got_w, minlength=n)
            if np.any(self.w < P.WEIGHT_FLOOR):
                raise P.WeightUnderflow("push-synopses weight underflow")
            self.e = self.s / self.w
            return self.e

        sent = self.f_out
        if self.protocol == P.MDFU_LP:
            r = self.since
            self.vel = np.where(delivered, (sent - self.f_in) / r, self.vel)
            self.since = np.where(delivered, 0.0, r)
        self.f_in = np.where(delivered, sent, self.f_in)

        inflow = self.f_in[self.rev]
        if self.protocol == P.MDFU_LP:
            inflow = inflow + self.vel[self.rev] * self.since[self.rev]
        self.e = self.v + np.bincount(src, inflow - self.f_out, minlength=n)
        self.f_out = self.f_out + self.e[src] / self.denom
        if self.protocol == P.MDFU_LP:
            self.since = self.since + 1.0
        return self.e


class NodeEngine:
    """Same contract as VectorEngine, driven by the per-node state objects."""

    def __init__(self, graph: Graph, protocol: str, inputs: np.ndarray):
        self.graph = graph
        self.states = P.node_states(graph, protocol, np.asarray(inputs, dtype=np.float64))
        self.src, self.dst = graph.directed_edges()
        self.e = np.asarray(inputs, dtype=np.float64).copy()

    def set_input(self, i: int, value: float) -> None:
        self.states[i].set_input(value)

    def step(self, delivered: np.ndarray) -> np.ndarray:
        ok = {(int(a), int(b)): bool(d) for a, b, d in zip(self.src, self.dst, delivered)}
        inbox: list[list] = [[] for _ in self.states]
        for i, st in enumerate(self.states):
            for j, msg in st.emit():
                if ok[(i, j)]:
                    inbox[j].append(msg)
        for st, msgs in zip(self.states, inbox):
            st.absorb(msgs)
        for st in self.states:
            st.compute()
        self.e = np.array([st.estimate for st in self.states])
        return self.e


ENGINES = {"vector": VectorEngine, "nodes": NodeEngine}


def run(config: ExperimentConfig, engine: str = "vector") -> RunResult:
    """Execute ``config.rounds`` rounds; metrics row 0 is the initial state."""
    config.validate()
    scenario = config.scenario
    v = scenario.inputs.copy()
    if float(np.mean(v)) == 0.0:
        raise UndefinedMetrics("true mean is zero; relative metrics are undefined")
    sim = ENGINES[engine](config.graph, config.protocol, v)
    loss = LossModel(config.f, config.loss_seed)
    src, dst = config.graph.directed_edges()
    changes = scenario.by_round()

    metrics = [round_metrics(0, v.copy(), v)]
    traces = [v.copy()] if config.record_estimates else None
    means = [metrics[0].true_mean] if config.record_estimates else None
    for rnd in range(1, config.rounds + 1):
        for c in changes.get(rnd, ()):
            v[c.node] = v[c.node] * c.value if c.kind == MULTIPLY else c.value
            sim.set_input(c.node, v[c.node])
        delivered = ~loss.drop_mask(rnd, src, dst)
        e = sim.step(delivered)
        m = round_metrics(rnd, e, v)
        metrics.append(m)
        if traces is not None:
            traces.append(e.copy())
            means.append(m.true_mean)
    if traces is None:
        return RunResult(metrics)
    return RunResult(metrics, np.array(traces), np.array(means))


@dataclass
class AggregateResult:
    """Per-round mean and population standard deviation across loss seeds."""

    rounds: np.ndarray
    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]
    seeds: list[int]
    runs: list[RunResult] = field(repr=False, default_factory=list)


def run_many(config: ExperimentConfig, loss_seeds: Sequence[int], engine: str = "vector") -> AggregateResult:
    seeds = [int(s) for s in loss_seeds]
    if not seeds:
        raise SimulationError("at least one loss seed is required")
    runs = []
    for s in seeds:
        cfg = ExperimentConfig(config.graph, config.scenario, config.protocol, config.f,
                               config.rounds, s, config.record_estimates)
        runs.append(run(cfg, engine=engine))
    table = {name: np.array([r.series(name) for r in runs]) for name in METRIC_NAMES}
    return AggregateResult(
        rounds=np.arange(config.rounds + 1),
        mean={k: x.mean(axis=0) for k, x in table.items()},
        std={k: x.std(axis=0) for k, x in table.items()},
        seeds=seeds,
        runs=runs,
    )


def sample_nodes(n: int, k: int, seed: int = 0) -> list[int]:
    """Seeded uniform sample of ``k`` distinct node ids, ascending."""
    if not (0 <= k <= n):
        raise SimulationError(f"sample size must lie in [0, {n}], got {k}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return sorted(rng.choice(n, size=k, replace=False).tolist())
