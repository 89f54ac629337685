"""Graph data model, binary sparse matrices, BFS distances, and permutations.

Everything downstream (product-graph adjacencies, spectral encodings, the
attention model) is built on the three types defined here.  All types are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import InvalidPermutation, ParseError, ValidationError
from .rng import SplitMix64


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Graph:
    """Undirected graph on nodes 0..n-1 with optional node features.

    Edges are stored once, as unordered pairs (u, v) with u < v; dense and
    sparse views materialize both directions.  Self loops are rejected.
    """

    n: int
    edges: frozenset[tuple[int, int]]
    features: np.ndarray | None = None

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValidationError(f"node count must be a positive integer, got {self.n!r}")
        normalized = set()
        for edge in self.edges:
            u, v = edge
            if u == v:
                raise ValidationError(f"self loop on node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValidationError(f"edge {edge} out of range for n={self.n}")
            normalized.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(normalized))
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            if feats.ndim != 2 or feats.shape[0] != self.n:
                raise ValidationError(
                    f"features must be an {self.n}x d matrix, got shape {feats.shape}"
                )
            object.__setattr__(self, "features", _readonly(feats))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self) -> list[list[int]]:
        """Adjacency lists, each sorted ascending."""
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for lst in adj:
            lst.sort()
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg


def load_graph(source: IO[bytes] | IO[str] | bytes | str) -> Graph:
    """Parse a graph from the JSON format and validate it.

    The format is an object with keys "n" (int), "edges" (array of 2-arrays
    of ints), and optional "features" (array of n arrays of floats).  Edge
    order and direction are irrelevant; duplicates collapse.
    """
    if hasattr(source, "read"):
        payload = source.read()
    else:
        payload = source
    if isinstance(payload, bytes):
        try:
            payload = payload.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top-level JSON value must be an object")
    if "n" not in doc or "edges" not in doc:
        raise ParseError('graph object requires keys "n" and "edges"')
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise ParseError(f'"n" must be an integer, got {n!r}')
    raw_edges = doc["edges"]
    if not isinstance(raw_edges, list):
        raise ParseError('"edges" must be an array')
    edges = set()
    for item in raw_edges:
        if not (isinstance(item, list) and len(item) == 2):
            raise ParseError(f"edge entries must be 2-arrays, got {item!r}")
        u, v = item
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in (u, v)):
            raise ParseError(f"edge endpoints must be integers, got {item!r}")
        edges.add((u, v))
    features = doc.get("features")
    if features is not None:
        if not isinstance(features, list) or not all(isinstance(r, list) for r in features):
            raise ParseError('"features" must be an array of arrays')
        widths = {len(r) for r in features}
        if len(widths) > 1:
            raise ValidationError("feature rows have inconsistent widths")
        if len(features) != n:
            raise ValidationError(
                f"feature row count {len(features)} does not match n={n}"
            )
    return Graph(n=n, edges=frozenset(edges), features=features)


def graph_to_json(g: Graph) -> str:
    """Inverse of load_graph, with edges sorted for stable output."""
    doc: dict = {"n": g.n, "edges": [list(e) for e in sorted(g.edges)]}
    if g.features is not None:
        doc["features"] = g.features.tolist()
    return json.dumps(doc)


def dense_adjacency(g: Graph) -> np.ndarray:
    """Symmetric 0/1 adjacency matrix with zero diagonal."""
    a = np.zeros((g.n, g.n), dtype=np.int64)
    for u, v in g.edges:
        a[u, v] = 1
        a[v, u] = 1
    return a


@dataclass(frozen=True)
class DistanceMatrix:
    """All-pairs BFS hop counts; unreachable pairs carry the sentinel n.

    The sentinel n is strictly greater than any finite shortest-path distance
    in an n-node graph, and doubles as a valid embedding-table index for node
    marking.
    """

    n: int
    dist: np.ndarray

    @property
    def unreachable(self) -> int:
        return self.n


def shortest_path_distances(g: Graph) -> DistanceMatrix:
    """BFS from every source; O(n * (n + |E|))."""
    adj = g.neighbors()
    n = g.n
    dist = np.full((n, n), n, dtype=np.int64)
    for src in range(n):
        dist[src, src] = 0
        frontier = [src]
        depth = 0
        while frontier:
            depth += 1
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if dist[src, w] == n and w != src:
                        dist[src, w] = depth
                        nxt.append(w)
            frontier = nxt
    return DistanceMatrix(n=n, dist=_readonly(dist))


def check_permutation(perm: Sequence[int], n: int) -> list[int]:
    perm = list(perm)
    if len(perm) != n or sorted(perm) != list(range(n)):
        raise InvalidPermutation(f"not a bijection on [0, {n}): {perm!r}")
    return perm


def permute_graph(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel node u as perm[u]; the result is isomorphic to the input."""
    perm = check_permutation(perm, g.n)
    edges = frozenset((perm[u], perm[v]) for u, v in g.edges)
    features = None
    if g.features is not None:
        features = np.empty_like(g.features)
        for v in range(g.n):
            features[perm[v]] = g.features[v]
    return Graph(n=g.n, edges=edges, features=features)


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """P with P[perm[i], i] = 1, so that P A P^T relabels i as perm[i]."""
    n = len(perm)
    p = np.zeros((n, n), dtype=np.int64)
    for i, tgt in enumerate(check_permutation(perm, n)):
        p[tgt, i] = 1
    return p


def random_graph(n: int, p: float, seed: int, with_features: int = 0) -> Graph:
    """Erdos-Renyi draw from the SplitMix64 stream; same seed, same graph.

    Pairs are visited in lexicographic order so the consumed stream is fixed.
    `with_features` > 0 attaches that many uniform[0,1) feature columns.
    """
    rng = SplitMix64(seed)
    edges = set()
    for u in range(n):
        for v in range(u + 1, n):
            if rng.next_float() < p:
                edges.add((u, v))
    features = None
    if with_features:
        features = np.array(
            [[rng.next_float() for _ in range(with_features)] for _ in range(n)]
        )
    return Graph(n=n, edges=frozenset(edges), features=features)


def path_graph(n: int) -> Graph:
    return Graph(n=n, edges=frozenset((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> Graph:
    return Graph(n=n, edges=frozenset((i, (i + 1) % n) for i in range(n)))


def complete_graph(n: int) -> Graph:
    return Graph(n=n, edges=frozenset((u, v) for u in range(n) for v in range(u + 1, n)))


def random_permutation(n: int, seed: int) -> list[int]:
    rng = SplitMix64(seed)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.next_below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


@dataclass(frozen=True)
class SparseAdjacency:
    """Binary sparse matrix as a sorted, deduplicated set of (row, col) pairs.

    The entry set IS the matrix: every stored position holds 1.  Entries are
    kept in row-major order in a read-only (nnz, 2) int64 array.
    """

    rows: int
    cols: int
    entries: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))

    def __post_init__(self):
        ent = np.asarray(self.entries, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "entries", _readonly(ent))
        if ent.size:
            if ent[:, 0].min() < 0 or ent[:, 0].max() >= self.rows:
                raise ValidationError("entry row index out of bounds")
            if ent[:, 1].min() < 0 or ent[:, 1].max() >= self.cols:
                raise ValidationError("entry column index out of bounds")
            keys = ent[:, 0] * self.cols + ent[:, 1]
            if not (np.diff(keys) > 0).all():
                raise ValidationError("entries must be strictly row-major sorted, unique")

    @classmethod
    def from_pairs(cls, rows: int, cols: int, pairs: Iterable[tuple[int, int]] | np.ndarray) -> "SparseAdjacency":
        """Build from an arbitrary iterable of index pairs; sorts and dedups."""
        ent = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                         dtype=np.int64).reshape(-1, 2)
        if ent.size:
            keys = ent[:, 0] * cols + ent[:, 1]
            keys = np.unique(keys)
            ent = np.column_stack([keys // cols, keys % cols])
        return cls(rows=rows, cols=cols, entries=ent)

    @classmethod
    def from_dense(cls, mat: np.ndarray) -> "SparseAdjacency":
        mat = np.asarray(mat)
        r, c = np.nonzero(mat)
        return cls.from_pairs(mat.shape[0], mat.shape[1], np.column_stack([r, c]))

    @property
    def nnz(self) -> int:
        return self.entries.shape[0]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=np.int64)
        if self.nnz:
            out[self.entries[:, 0], self.entries[:, 1]] = 1
        return out

    def entry_set(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in self.entries}

    def matmul(self, x: np.ndarray) -> np.ndarray:
        """A @ x for a dense matrix x with self.cols rows."""
        if x.shape[0] != self.cols:
            raise ValidationError(f"operand has {x.shape[0]} rows, expected {self.cols}")
        out = np.zeros((self.rows,) + x.shape[1:], dtype=np.float64)
        if self.nnz:
            np.add.at(out, self.entries[:, 0], x[self.entries[:, 1]])
        return out

    def transpose(self) -> "SparseAdjacency":
        return SparseAdjacency.from_pairs(self.cols, self.rows, self.entries[:, ::-1])

    def union(self, other: "SparseAdjacency") -> "SparseAdjacency":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValidationError("union requires matching shapes")
        return SparseAdjacency.from_pairs(
            self.rows, self.cols, np.concatenate([self.entries, other.entries])
        )

    def to_coo_text(self) -> str:
        """Serialize as 'rows cols nnz' then one 'row col' pair per line."""
        lines = [f"{self.rows} {self.cols} {self.nnz}"]
        lines.extend(f"{r} {c}" for r, c in self.entries)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_coo_text(cls, text: str) -> "SparseAdjacency":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ParseError("empty COO text")
        try:
            rows, cols, nnz = (int(x) for x in lines[0].split())
            pairs = [tuple(int(x) for x in ln.split()) for ln in lines[1:]]
        except ValueError as exc:
            raise ParseError(f"malformed COO text: {exc}") from exc
        if len(pairs) != nnz or any(len(p) != 2 for p in pairs):
            raise ParseError("COO entry count does not match header")
        return cls.from_pairs(rows, cols, pairs)
