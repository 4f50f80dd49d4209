"""Undirected graphs: representation, compact keys, neighbor moves and
synthetic structure generators.

Nodes are labelled 1..p.  Edges are stored canonically as pairs (i, j)
with i < j, so a graph is fully described by the upper triangle of its
adjacency matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, MalformedKeyError

GRAPH_FAMILIES = ("random", "cluster", "scale-free", "hub", "AR2", "circle", "fixed")


def canonical_edge(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise InputError(f"self loop ({i},{j}) is not a valid edge")
    return (i, j) if i < j else (j, i)


def n_cells(p: int) -> int:
    """Number of upper-triangle cells (possible edges)."""
    return p * (p - 1) // 2


def cell_index(i: int, j: int, p: int) -> int:
    """Row-major position of cell (i, j), i < j, among the upper-triangle
    cells (1,2), (1,3), ..., (1,p), (2,3), ..."""
    return (i - 1) * p - (i - 1) * i // 2 + (j - i - 1)


def iter_cells(p: int):
    """All upper-triangle cells in canonical (row-major) order."""
    for i in range(1, p):
        for j in range(i + 1, p + 1):
            yield (i, j)


@dataclass(frozen=True)
class Graph:
    """Loop-free undirected graph on nodes 1..p with canonical edge set."""

    p: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.p < 1:
            raise InputError(f"node count must be >= 1, got {self.p}")
        edges = frozenset(canonical_edge(i, j) for (i, j) in self.edges)
        object.__setattr__(self, "edges", edges)
        for (i, j) in edges:
            if not (1 <= i < j <= self.p):
                raise InputError(f"edge ({i},{j}) out of range for p={self.p}")

    @property
    def size(self) -> int:
        return len(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return canonical_edge(i, j) in self.edges

    def neighbors_of(self, i: int) -> list[int]:
        out = [j for (a, j) in self.edges if a == i]
        out += [a for (a, j) in self.edges if j == i]
        return sorted(out)

    def with_edge(self, i: int, j: int) -> "Graph":
        return Graph(self.p, self.edges | {canonical_edge(i, j)})

    def without_edge(self, i: int, j: int) -> "Graph":
        return Graph(self.p, self.edges - {canonical_edge(i, j)})

    def adjacency(self) -> np.ndarray:
        """Symmetric 0/1 adjacency matrix (0-based rows/columns)."""
        a = np.zeros((self.p, self.p), dtype=np.uint8)
        for (i, j) in self.edges:
            a[i - 1, j - 1] = 1
            a[j - 1, i - 1] = 1
        return a

    @classmethod
    def from_adjacency(cls, a) -> "Graph":
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InputError("adjacency matrix must be square")
        p = a.shape[0]
        edges = {(i + 1, j + 1) for i in range(p) for j in range(i + 1, p)
                 if a[i, j] or a[j, i]}
        return cls(p, frozenset(edges))

    @classmethod
    def empty(cls, p: int) -> "Graph":
        return cls(p, frozenset())

    @classmethod
    def full(cls, p: int) -> "Graph":
        return cls(p, frozenset(iter_cells(p)))

    def to_dot(self, labels=None) -> str:
        labels = labels or [str(i) for i in range(1, self.p + 1)]
        lines = ["graph G {"]
        for i in range(1, self.p + 1):
            lines.append(f'  "{labels[i - 1]}";')
        for (i, j) in sorted(self.edges):
            lines.append(f'  "{labels[i - 1]}" -- "{labels[j - 1]}";')
        lines.append("}")
        return "\n".join(lines)


@dataclass(frozen=True)
class GraphKey:
    """Bit-packed upper triangle of an adjacency matrix.

    Bit k (LSB-first within each byte) is the k-th upper-triangle cell in
    row-major order; trailing pad bits are zero.
    """

    p: int
    bits: bytes

    def __post_init__(self):
        if len(self.bits) != key_length(self.p):
            raise MalformedKeyError(
                f"key of {len(self.bits)} bytes does not match p={self.p} "
                f"(expected {key_length(self.p)})")


def key_length(p: int) -> int:
    return (n_cells(p) + 7) // 8


def encode_key(g: Graph) -> GraphKey:
    buf = bytearray(key_length(g.p))
    for (i, j) in g.edges:
        k = cell_index(i, j, g.p)
        buf[k >> 3] |= 1 << (k & 7)
    return GraphKey(g.p, bytes(buf))


def decode_key(key: GraphKey) -> Graph:
    edges = set()
    for k, (i, j) in enumerate(iter_cells(key.p)):
        if key.bits[k >> 3] & (1 << (k & 7)):
            edges.add((i, j))
    return Graph(key.p, frozenset(edges))


def neighbors_one_edge(g: Graph):
    """All single-edge moves from g in canonical cell order.

    Yields (neighbor graph, toggled edge, kind) with kind "birth" for an
    added edge and "death" for a removed one; exactly p(p-1)/2 entries.
    """
    for (i, j) in iter_cells(g.p):
        if (i, j) in g.edges:
            yield g.without_edge(i, j), (i, j), "death"
        else:
            yield g.with_edge(i, j), (i, j), "birth"


@dataclass(frozen=True)
class GraphFamily:
    """A synthetic graph structure: one of the named generators, or a
    user-supplied fixed graph."""

    kind: str
    prob: float | None = None
    fixed: Graph | None = None

    def __post_init__(self):
        if self.kind not in GRAPH_FAMILIES:
            raise InputError(f"unknown graph family {self.kind!r}")
        if self.prob is not None and not (0.0 < self.prob < 1.0):
            raise InputError(f"edge probability must be in (0,1), got {self.prob}")


def _random_edges(nodes, prob, rng):
    edges = set()
    for a in range(len(nodes)):
        for b in range(a + 1, len(nodes)):
            if rng.random() < prob:
                edges.add(canonical_edge(nodes[a], nodes[b]))
    return edges


def generate_graph(family: GraphFamily, p: int, rng=None) -> Graph:
    """Draw a graph of the given family on p nodes.

    The random family defaults to edge probability 2/(p-1) when none is
    supplied.  Hub, AR2 and circle are deterministic.
    """
    if family.kind == "fixed":
        if family.fixed is None:
            raise InputError("family 'fixed' requires a user graph")
        return family.fixed
    if p < 2:
        raise InputError(f"graph generation needs p >= 2, got {p}")
    rng = rng if rng is not None else np.random.default_rng()

    if family.kind == "random":
        prob = family.prob if family.prob is not None else 2.0 / (p - 1)
        return Graph(p, frozenset(_random_edges(list(range(1, p + 1)), min(prob, 1.0), rng)))

    if family.kind == "cluster":
        nblocks = max(2, p // 20)
        base, rem = divmod(p, nblocks)
        sizes = [base + 1 if b < rem else base for b in range(nblocks)]
        edges, start = set(), 1
        for m in sizes:
            nodes = list(range(start, start + m))
            if m > 1:
                prob = family.prob if family.prob is not None else 2.0 / (m - 1)
                edges |= _random_edges(nodes, min(prob, 1.0), rng)
            start += m
        return Graph(p, frozenset(edges))

    if family.kind == "scale-free":
        # Preferential attachment: 2-node seed chain, one link per new node.
        edges = {(1, 2)}
        degree = [0, 1, 1] + [0] * (p - 2)  # 1-based
        for v in range(3, p + 1):
            weights = np.array(degree[1:v], dtype=float)
            target = int(rng.choice(np.arange(1, v), p=weights / weights.sum()))
            edges.add(canonical_edge(target, v))
            degree[target] += 1
            degree[v] += 1
        return Graph(p, frozenset(edges))

    if family.kind == "hub":
        return Graph(p, frozenset((1, j) for j in range(2, p + 1)))

    if family.kind == "AR2":
        edges = {(i - 1, i) for i in range(2, p + 1)}
        edges |= {(i - 2, i) for i in range(3, p + 1)}
        return Graph(p, frozenset(edges))

    if family.kind == "circle":
        edges = {(i - 1, i) for i in range(2, p + 1)}
        edges.add(canonical_edge(1, p))
        return Graph(p, frozenset(edges))

    raise InputError(f"unhandled family {family.kind!r}")


class KeyStore:
    """Append-only store of graph keys in one contiguous buffer.

    Holds the per-iteration graph history at ~p(p-1)/16 bytes per record
    instead of a dense p*p matrix each.
    """

    def __init__(self, p: int):
        self.p = p
        self.key_len = key_length(p)
        self._buf = bytearray()
        self.count = 0

    def append(self, key: GraphKey) -> None:
        if key.p != self.p:
            raise MalformedKeyError(f"key for p={key.p} appended to store for p={self.p}")
        self._buf += key.bits
        self.count += 1

    def append_bits(self, bits: bytes) -> None:
        if len(bits) != self.key_len:
            raise MalformedKeyError("key length mismatch")
        self._buf += bits
        self.count += 1

    def get(self, i: int) -> GraphKey:
        return GraphKey(self.p, self.get_bits(i))

    def get_bits(self, i: int) -> bytes:
        if not 0 <= i < self.count:
            raise IndexError(i)
        k = self.key_len
        return bytes(self._buf[i * k:(i + 1) * k])

    def __len__(self) -> int:
        return self.count

    @property
    def nbytes(self) -> int:
        return len(self._buf)

    def raw(self) -> bytes:
        return bytes(self._buf)
