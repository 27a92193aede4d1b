"""Per-node state machines for MDFU, MDFU-LP and Push-Synopses.

Every protocol follows the same round contract: ``emit()`` during the
communication phase, ``absorb()`` with whatever messages survived, then
``compute()``. Neighbors are always visited in ascending id order so that
floating-point sums are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

MDFU = "mdfu"
MDFU_LP = "mdfu-lp"
PUSH_SYNOPSES = "push-synopses"
PROTOCOLS = (MDFU, MDFU_LP, PUSH_SYNOPSES)

WEIGHT_FLOOR = 1e-300


class ProtocolError(RuntimeError):
    pass


class EmptyNeighborhood(ProtocolError, ValueError):
    pass


class UnknownSender(ProtocolError):
    pass


class PhaseError(ProtocolError):
    """Raised on a second compute() without an intervening emit()."""


class WeightUnderflow(ProtocolError, ArithmeticError):
    pass


class UnsupportedOperation(ProtocolError):
    pass


@dataclass(frozen=True)
class FlowMessage:
    sender: int
    flow: float


@dataclass(frozen=True)
class ShareMessage:
    sender: int
    sum: float
    weight: float


def _check_neighbors(neighbors: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    if not neighbors:
        raise EmptyNeighborhood("node has no neighbors")
    out = sorted((int(j), int(d)) for j, d in neighbors)
    ids = [j for j, _ in out]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate neighbor id")
    for j, d in out:
        if d < 1:
            raise ValueError(f"pair degree for neighbor {j} must be >= 1, got {d}")
    return out


class _FlowNode:
    """Shared plumbing for the two flow-based protocols."""

    def __init__(self, v: float, neighbors: Sequence[tuple[int, int]], node_id: int = 0):
        nbrs = _check_neighbors(neighbors)
        self.node_id = node_id
        self.v = float(v)
        self.e = self.v
        self.neighbors = [j for j, _ in nbrs]
        self.denom = {j: 2.0 * d for j, d in nbrs}
        self.f_in = {j: 0.0 for j in self.neighbors}
        self.f_out = {j: self.e / self.denom[j] for j in self.neighbors}
        self._emitted = True
        self._heard: set[int] = set()

    def emit(self) -> list[tuple[int, FlowMessage]]:
        """Messages for this round as ``(destination, message)`` pairs."""
        self._emitted = True
        self._heard = set()
        return [(j, FlowMessage(self.node_id, self.f_out[j])) for j in self.neighbors]

    def absorb(self, msgs: Iterable[FlowMessage]) -> None:
        for msg in msgs:
            j = msg.sender
            if j not in self.f_in:
                raise UnknownSender(f"node {self.node_id} got a message from non-neighbor {j}")
            if j in self._heard:
                raise ProtocolError(f"second message from {j} in one round")
            self._heard.add(j)
            self._receive(j, float(msg.flow))

    def _receive(self, j: int, flow: float) -> None:
        self.f_in[j] = flow

    def _start_compute(self):
        if not self._emitted:
            raise PhaseError(f"node {self.node_id} computed twice in one round")
        self._emitted = False

    def _share_out(self):
        e = self.e
        for j in self.neighbors:
            self.f_out[j] += e / self.denom[j]

    def set_input(self, v_new: float) -> None:
        self.v = float(v_new)

    @property
    def estimate(self) -> float:
        return self.e


class MdfuState(_FlowNode):
    """Mass-Distribution with Flow-Updating.

    >>> s = MdfuState(6.0, [(1, 3), (2, 2)])
    >>> s.f_out
    {1: 1.0, 2: 1.5}
    """

    def compute(self) -> float:
        self._start_compute()
        total = 0.0
        for j in self.neighbors:
            total += self.f_in[j] - self.f_out[j]
        self.e = self.v + total
        self._share_out()
        return self.e


class MdfuLpState(_FlowNode):
    """MDFU with linear prediction of missing inflows."""

    def __init__(self, v: float, neighbors: Sequence[tuple[int, int]], node_id: int = 0):
        super().__init__(v, neighbors, node_id)
        self.velocity = {j: 0.0 for j in self.neighbors}
        self.since = {j: 1 for j in self.neighbors}

    def _receive(self, j: int, flow: float) -> None:
        self.velocity[j] = (flow - self.f_in[j]) / self.since[j]
        self.since[j] = 0
        self.f_in[j] = flow

    def predicted_inflow(self, j: int) -> float:
        return self.f_in[j] + self.velocity[j] * self.since[j]

    def compute(self) -> float:
        self._start_compute()
        total = 0.0
        for j in self.neighbors:
            total += self.f_in[j] + self.velocity[j] * self.since[j] - self.f_out[j]
        self.e = self.v + total
        self._share_out()
        for j in self.neighbors:
            self.since[j] += 1
        return self.e


class PushSynopsesState:
    """Push-sum style baseline sharing ``1/(2 D_ij)`` of (sum, weight) per neighbor.

    Lost shares are gone for good; that is the point of the comparison.
    """

    def __init__(self, v: float, neighbors: Sequence[tuple[int, int]], node_id: int = 0):
        nbrs = _check_neighbors(neighbors)
        self.node_id = node_id
        self.s = float(v)
        self.w = 1.0
        self.neighbors = [j for j, _ in nbrs]
        self.share = {j: 1.0 / (2.0 * d) for j, d in nbrs}
        kept = 1.0
        for j in self.neighbors:
            kept -= self.share[j]
        self.self_share = kept
        self._kept: tuple[float, float] | None = None
        self._inbox: dict[int, tuple[float, float]] = {}

    def emit(self) -> list[tuple[int, ShareMessage]]:
        self._kept = (self.s * self.self_share, self.w * self.self_share)
        self._inbox = {}
        return [(j, ShareMessage(self.node_id, self.s * self.share[j], self.w * self.share[j]))
                for j in self.neighbors]

    def absorb(self, msgs: Iterable[ShareMessage]) -> None:
        for msg in msgs:
            j = msg.sender
            if j not in self.share:
                raise UnknownSender(f"node {self.node_id} got a message from non-neighbor {j}")
            if j in self._inbox:
                raise ProtocolError(f"second message from {j} in one round")
            self._inbox[j] = (float(msg.sum), float(msg.weight))

    def compute(self) -> float:
        if self._kept is None:
            raise PhaseError(f"node {self.node_id} computed twice in one round")
        ds = dw = 0.0
        for j in self.neighbors:
            if j in self._inbox:
                a, b = self._inbox[j]
                ds += a
                dw += b
        self.s = self._kept[0] + ds
        self.w = self._kept[1] + dw
        self._kept = None
        if self.w < WEIGHT_FLOOR:
            raise WeightUnderflow(f"node {self.node_id} weight fell to {self.w!r}")
        return self.estimate

    def set_input(self, v_new: float) -> None:
        raise UnsupportedOperation("Push-Synopses cannot absorb input changes without a restart")

    @property
    def estimate(self) -> float:
        return self.s / self.w


_STATE_TYPES = {MDFU: MdfuState, MDFU_LP: MdfuLpState, PUSH_SYNOPSES: PushSynopsesState}


def make_state(protocol: str, v: float, neighbors: Sequence[tuple[int, int]], node_id: int = 0):
    try:
        cls = _STATE_TYPES[protocol]
    except KeyError:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}") from None
    return cls(v, neighbors, node_id)


def node_states(graph, protocol: str, inputs: Sequence[float]) -> list:
    """One state per node of ``graph`` wired with its pair degrees."""
    deg = graph.degrees
    return [
        make_state(protocol, inputs[i], [(j, max(deg[i], deg[j])) for j in graph.neighbors(i)], i)
        for i in range(graph.n)
    ]
