"""Undirected topologies, G(n, m) generation and edge-list I/O."""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np


class TopologyError(ValueError):
    pass


class InvalidParameters(TopologyError):
    pass


class GenerationFailure(TopologyError):
    pass


class NotAnEdge(TopologyError):
    pass


class EdgeListParseError(TopologyError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


MAX_ER_ATTEMPTS = 1000


@dataclass(frozen=True, eq=False)
class Graph:
    """Connected simple undirected graph on dense node ids ``0..n-1``.

    ``edges`` is stored as sorted ``(i, j)`` pairs with ``i < j``.
    ``labels`` carries the original ids when the graph was loaded from a file
    whose ids were not already dense; it does not take part in equality.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    labels: tuple[int, ...] | None = None
    adjacency: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameters("graph needs at least one node")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise TopologyError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise TopologyError(f"edge ({i}, {j}) outside node range [0, {self.n})")
            pair = (i, j) if i < j else (j, i)
            if pair in norm:
                raise TopologyError(f"duplicate edge {pair}")
            norm.add(pair)
        edges = tuple(sorted(norm))
        object.__setattr__(self, "edges", edges)

        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        adjacency = tuple(tuple(sorted(x)) for x in nbrs)
        object.__setattr__(self, "adjacency", adjacency)

        if self.n > 1 and any(len(x) == 0 for x in adjacency):
            raise TopologyError("graph has an isolated node")
        if not _is_connected(adjacency):
            raise TopologyError("graph is not connected")

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n > 1 else 0

    def has_edge(self, i: int, j: int) -> bool:
        if i == j or not (0 <= i < self.n and 0 <= j < self.n):
            return False
        a, b = (i, j) if self.degree(i) <= self.degree(j) else (j, i)
        return b in self.adjacency[a]

    def pair_degree(self, i: int, j: int) -> int:
        return pair_degree(self, i, j)

    def directed_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Both orientations of every edge, ordered by (source, destination)."""
        src = np.fromiter((i for i in range(self.n) for _ in self.adjacency[i]), dtype=np.int64)
        dst = np.fromiter((j for i in range(self.n) for j in self.adjacency[i]), dtype=np.int64)
        return src, dst

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))


def _is_connected(adjacency) -> bool:
    n = len(adjacency)
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if not seen[w]:
                seen[w] = True
                count += 1
                queue.append(w)
    return count == n


def is_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    return _is_connected(nbrs)


def pair_degree(g: Graph, i: int, j: int) -> int:
    """``max(deg i, deg j)`` for an edge ``(i, j)``."""
    if not g.has_edge(i, j):
        raise NotAnEdge(f"({i}, {j}) is not an edge")
    return max(g.degree(i), g.degree(j))


def _index_to_pair(idx: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    # Row-major enumeration of the strict upper triangle: row i holds n-1-i pairs.
    idx = np.asarray(idx, dtype=np.int64)
    starts = np.arange(n, dtype=np.int64) * (2 * n - np.arange(n, dtype=np.int64) - 1) // 2
    i = np.searchsorted(starts, idx, side="right") - 1
    j = idx - starts[i] + i + 1
    return i, j


def generate_er(n: int, m: int, seed: int, max_attempts: int = MAX_ER_ATTEMPTS) -> Graph:
    """Uniform connected G(n, m) graph by whole-graph rejection.

    Randomness comes from numpy's PCG64 bit generator seeded with ``seed``;
    each attempt draws ``m`` distinct indices of the ``n(n-1)/2`` possible
    edges without replacement.
    """
    n, m = int(n), int(m)
    if n < 2:
        raise InvalidParameters(f"n must be >= 2, got {n}")
    total = n * (n - 1) // 2
    if not (n - 1 <= m <= total):
        raise InvalidParameters(f"m must lie in [{n - 1}, {total}] for n={n}, got {m}")
    rng = np.random.Generator(np.random.PCG64(seed))
    for _ in range(max_attempts):
        idx = np.sort(rng.choice(total, size=m, replace=False))
        i, j = _index_to_pair(idx, n)
        edges = list(zip(i.tolist(), j.tolist()))
        if is_connected(n, edges):
            return Graph(n, tuple(edges))
    raise GenerationFailure(
        f"no connected G({n}, {m}) sample in {max_attempts} attempts")


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def star_graph(leaves: int) -> Graph:
    return Graph(leaves + 1, tuple((0, k) for k in range(1, leaves + 1)))


def cycle_graph(n: int) -> Graph:
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def load_edge_list(text: str | TextIO) -> Graph:
    """Parse a whitespace-separated edge list.

    Non-negative ids are remapped to ``0..n-1`` in ascending order; the
    original ids end up in ``Graph.labels`` unless they were already dense.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    raw: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int]] = set()
    for lineno, line in enumerate(text, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 2:
            raise EdgeListParseError(f"expected two ids, got {len(parts)} fields", lineno)
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListParseError(f"non-integer id in {s!r}", lineno) from None
        if a < 0 or b < 0:
            raise EdgeListParseError("ids must be non-negative", lineno)
        if a == b:
            raise EdgeListParseError(f"self-loop at node {a}", lineno)
        key = (min(a, b), max(a, b))
        if key in seen:
            raise EdgeListParseError(f"duplicate edge {key}", lineno)
        seen.add(key)
        raw.append((a, b, lineno))
    if not raw:
        raise EdgeListParseError("no edges")

    ids = sorted({x for a, b, _ in raw for x in (a, b)})
    dense = ids == list(range(len(ids)))
    remap = {x: k for k, x in enumerate(ids)}
    edges = tuple((remap[a], remap[b]) for a, b, _ in raw)
    try:
        return Graph(len(ids), edges, labels=None if dense else tuple(ids))
    except TopologyError as exc:
        raise EdgeListParseError(str(exc)) from exc


def save_edge_list(g: Graph) -> str:
    return "".join(f"{i} {j}\n" for i, j in g.edges)


def read_edge_list(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh)


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(save_edge_list(g))
