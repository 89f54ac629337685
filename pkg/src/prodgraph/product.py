"""Adjacency structures on tuples of nodes.

A graph on n nodes induces a product graph on the n^2 tuples (s, v), where s
indexes the subgraph (one marked root per subgraph) and v the node.  Tuples
flatten as s*n + v, so the LEFT Kronecker factor acts on the s slot:
(A (x) I)((s,v),(s',v')) = A(s,s') * I(v,v').  Three edge types live on this
node set:

  internal  (s,v)-(s,v')  for v ~ v'   == I (x) A   (within one subgraph)
  external  (s,v)-(s',v)  for s ~ s'   == A (x) I   (across subgraphs)
  point     (s,v) <- (v,v)             (each tuple reads its root's row)

The k-tuple generalization replaces pairs with K-tuples: the Cartesian
operator C^K(A), its closed form as a sum of single-slot matrices, and the
per-slot point adjacencies.  Dense matrices appear only for the k-tuple
operators, guarded to n^K <= 4096 product nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySample, InvalidInput, RangeError, ScaleError, ValidationError
from .graphs import Graph, SparseAdjacency

MAX_DENSE_PRODUCT_NODES = 4096


@dataclass(frozen=True)
class TupleIndexing:
    """Bijection between [0,n)^k tuples and flat indices [0, n^k).

    flatten((t_1, ..., t_k)) = sum_j t_j * n^(k-j): the first tuple slot is
    the most significant digit, matching row-major Kronecker flattening.
    """

    n: int
    k: int

    @property
    def size(self) -> int:
        return self.n**self.k

    def flatten(self, t: Sequence[int]) -> int:
        if len(t) != self.k:
            raise ValidationError(f"expected a {self.k}-tuple, got {t!r}")
        idx = 0
        for x in t:
            if not 0 <= x < self.n:
                raise ValidationError(f"tuple component {x} out of [0, {self.n})")
            idx = idx * self.n + x
        return idx

    def unflatten(self, idx: int) -> tuple[int, ...]:
        if not 0 <= idx < self.size:
            raise ValidationError(f"flat index {idx} out of [0, {self.size})")
        out = []
        for _ in range(self.k):
            out.append(idx % self.n)
            idx //= self.n
        return tuple(reversed(out))

    def product_permutation(self, perm: Sequence[int]) -> np.ndarray:
        """Flat image of applying a base-node permutation to every slot."""
        perm = np.asarray(perm, dtype=np.int64)
        out = np.zeros(self.size, dtype=np.int64)
        for idx in range(self.size):
            out[idx] = self.flatten([int(perm[x]) for x in self.unflatten(idx)])
        return out


@dataclass(frozen=True)
class ProductGraphBundle:
    """The three 2-tuple adjacencies of one base graph."""

    n: int
    internal: SparseAdjacency
    external: SparseAdjacency
    point: SparseAdjacency


def _directed_edge_arrays(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Both directions of every edge, as parallel (source, target) arrays."""
    if not g.edges:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    pairs = np.array(sorted(g.edges), dtype=np.int64)
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    return src, dst


def internal_adjacency(g: Graph) -> SparseAdjacency:
    """Entries ((s,v),(s,v')) for every subgraph s and edge v ~ v'; I (x) A."""
    n = g.n
    u, v = _directed_edge_arrays(g)
    s = np.arange(n, dtype=np.int64)
    rows = (s[:, None] * n + u[None, :]).ravel()
    cols = (s[:, None] * n + v[None, :]).ravel()
    return SparseAdjacency.from_pairs(n * n, n * n, np.column_stack([rows, cols]))


def external_adjacency(g: Graph) -> SparseAdjacency:
    """Entries ((s,v),(s',v)) for every node v and edge s ~ s'; A (x) I."""
    n = g.n
    s, t = _directed_edge_arrays(g)
    v = np.arange(n, dtype=np.int64)
    rows = (s[:, None] * n + v[None, :]).ravel()
    cols = (t[:, None] * n + v[None, :]).ravel()
    return SparseAdjacency.from_pairs(n * n, n * n, np.column_stack([rows, cols]))


def point_adjacency(n: int) -> SparseAdjacency:
    """Row (s,v) has its single entry at column (v,v); asymmetric, nnz = n^2."""
    if n < 1:
        raise RangeError(f"node count must be >= 1, got {n}")
    s = np.repeat(np.arange(n, dtype=np.int64), n)
    v = np.tile(np.arange(n, dtype=np.int64), n)
    rows = s * n + v
    cols = v * n + v
    return SparseAdjacency.from_pairs(n * n, n * n, np.column_stack([rows, cols]))


def cartesian_product_adjacency(g: Graph) -> SparseAdjacency:
    """Union of internal and external entries; equals A (x) I + I (x) A."""
    return internal_adjacency(g).union(external_adjacency(g))


def build_product_bundle(g: Graph) -> ProductGraphBundle:
    return ProductGraphBundle(
        n=g.n,
        internal=internal_adjacency(g),
        external=external_adjacency(g),
        point=point_adjacency(g.n),
    )


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product: (a (x) b)[(i,j),(i',j')] = a[i,i'] * b[j,j']."""
    a = np.asarray(a)
    b = np.asarray(b)
    p, q = a.shape
    r, s = b.shape
    return np.einsum("ik,jl->ijkl", a, b).reshape(p * r, q * s)


def _check_hollow_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"adjacency must be square, got shape {a.shape}")
    if np.diagonal(a).any():
        raise InvalidInput("adjacency has self loops")
    if not np.array_equal(a, a.T):
        raise InvalidInput("adjacency is not symmetric")
    return a.astype(np.int8)


def _check_scale(n: int, k: int) -> int:
    size = n**k
    if size > MAX_DENSE_PRODUCT_NODES:
        raise ScaleError(
            f"n^k = {n}^{k} = {size} exceeds the dense guard of {MAX_DENSE_PRODUCT_NODES}"
        )
    return size


def cartesian_operator(a: np.ndarray, k: int) -> np.ndarray:
    """K-fold Cartesian power adjacency, built from the recursion
    C^k(A) = C^(k-1)(A) (x) I_n + I_(n^(k-1)) (x) A, with C^1(A) = A.
    """
    if k < 1:
        raise RangeError(f"tuple order must be >= 1, got {k}")
    a = _check_hollow_symmetric(a)
    n = a.shape[0]
    _check_scale(n, k)
    out = a
    eye_n = np.eye(n, dtype=np.int8)
    for j in range(2, k + 1):
        out = kron(out, eye_n) + kron(np.eye(n ** (j - 1), dtype=np.int8), a)
    return out


def k_factor_adjacency(a: np.ndarray, k: int, tuple_order: int) -> np.ndarray:
    """I (x) ... (x) A (x) ... (x) I with A in slot k, 0-indexed from the left."""
    if not 0 <= k < tuple_order:
        raise RangeError(f"slot {k} out of [0, {tuple_order})")
    a = _check_hollow_symmetric(a)
    n = a.shape[0]
    _check_scale(n, tuple_order)
    left = np.eye(n**k, dtype=np.int8)
    right = np.eye(n ** (tuple_order - k - 1), dtype=np.int8)
    return kron(kron(left, a), right)


def closed_form_cartesian(a: np.ndarray, tuple_order: int) -> np.ndarray:
    """Sum of the single-slot adjacencies over all slots.

    Without self loops the slot entry sets are pairwise disjoint, so the sum
    stays binary and equals cartesian_operator(a, tuple_order) entrywise.
    """
    if tuple_order < 1:
        raise RangeError(f"tuple order must be >= 1, got {tuple_order}")
    a = _check_hollow_symmetric(a)
    n = a.shape[0]
    size = _check_scale(n, tuple_order)
    out = np.zeros((size, size), dtype=np.int8)
    for k in range(tuple_order):
        out += k_factor_adjacency(a, k, tuple_order)
    if out.max(initial=0) > 1:
        raise InvalidInput("slot sum exceeded 1; input cannot be loop-free")
    return out


def k_point_adjacency(n: int, tuple_order: int, i: int) -> np.ndarray:
    """Point update for K-tuples with free slot i (1-indexed).

    Entry ((v_1..v_K), (v'_1..v'_K)) is 1 iff the target is a root tuple,
    v'_1 = ... = v'_K = c, and every source slot except slot i equals c.
    For K = 2, i = 1 this recovers point_adjacency(n) exactly.
    """
    if n < 1:
        raise RangeError(f"node count must be >= 1, got {n}")
    if not 1 <= i <= tuple_order:
        raise RangeError(f"slot {i} out of [1, {tuple_order}]")
    size = _check_scale(n, tuple_order)
    out = np.zeros((size, size), dtype=np.int8)
    stride = n ** (tuple_order - i)
    # Row index decomposes as c * (everything) with slot i overwritten: start
    # from the all-c tuple, zero slot i, then add v_i * stride.
    all_c = (size - 1) // (n - 1) if n > 1 else 0  # flatten((c,..,c)) = c * all_ones
    for c in range(n):
        col = c * all_c if n > 1 else 0
        base = col - c * stride
        rows = base + np.arange(n, dtype=np.int64) * stride
        out[rows, col] = 1
    return out


def global_adjacencies(n: int) -> tuple[SparseAdjacency, SparseAdjacency]:
    """Clique-derived connectivities: (I (x) (J - I),  (J - I) (x) I).

    The first connects (s,v)-(s,v') for all v != v' (global within-subgraph),
    the second (s,v)-(s',v) for all s != s'.  Each has nnz = n^2 (n-1).
    """
    if n < 1:
        raise RangeError(f"node count must be >= 1, got {n}")
    idx = np.arange(n, dtype=np.int64)
    a, b = np.meshgrid(idx, idx, indexing="ij")
    off = a.ravel() != b.ravel()
    pairs_a, pairs_b = a.ravel()[off], b.ravel()[off]
    s = np.repeat(idx, pairs_a.size)
    gi_rows = s * n + np.tile(pairs_a, n)
    gi_cols = s * n + np.tile(pairs_b, n)
    ge_rows = np.tile(pairs_a, n) * n + s
    ge_cols = np.tile(pairs_b, n) * n + s
    nn = n * n
    gi = SparseAdjacency.from_pairs(nn, nn, np.column_stack([gi_rows, gi_cols]))
    ge = SparseAdjacency.from_pairs(nn, nn, np.column_stack([ge_rows, ge_cols]))
    return gi, ge


@dataclass(frozen=True)
class SamplingMask:
    """Subset of subgraph indices kept by stochastic sampling."""

    n: int
    sampled: tuple[int, ...]

    def __post_init__(self):
        kept = tuple(sorted(set(self.sampled)))
        if not kept:
            raise EmptySample("sampling mask keeps zero subgraphs")
        if kept[0] < 0 or kept[-1] >= self.n:
            raise ValidationError(f"sampled indices out of [0, {self.n})")
        object.__setattr__(self, "sampled", kept)

    @classmethod
    def full(cls, n: int) -> "SamplingMask":
        return cls(n=n, sampled=tuple(range(n)))

    @classmethod
    def from_ratio(cls, n: int, ratio: float, rng) -> "SamplingMask":
        """ceil(ratio * n) subgraphs chosen uniformly without replacement."""
        if ratio > 1.0:
            raise RangeError(f"sampling ratio must be <= 1, got {ratio}")
        count = math.ceil(ratio * n)
        if count <= 0:
            raise EmptySample(f"ratio {ratio} keeps ceil({ratio} * {n}) = 0 subgraphs")
        return cls(n=n, sampled=tuple(rng.sample_without_replacement(n, count)))

    @property
    def is_full(self) -> bool:
        return len(self.sampled) == self.n


def _tuple_grid_n(adj: SparseAdjacency) -> int:
    if adj.rows != adj.cols:
        raise ValidationError("mask applies to square product adjacencies only")
    n = math.isqrt(adj.rows)
    if n * n != adj.rows:
        raise ValidationError(f"adjacency size {adj.rows} is not a perfect square")
    return n


def apply_sampling_mask(adj: SparseAdjacency, mask: SamplingMask) -> SparseAdjacency:
    """Keep entry ((s,v),(s',v')) iff both s and s' are sampled."""
    n = _tuple_grid_n(adj)
    if mask.n != n:
        raise ValidationError(f"mask is for n={mask.n}, adjacency for n={n}")
    if adj.nnz == 0:
        return adj
    kept = np.asarray(mask.sampled, dtype=np.int64)
    row_s = adj.entries[:, 0] // n
    col_s = adj.entries[:, 1] // n
    keep = np.isin(row_s, kept) & np.isin(col_s, kept)
    return SparseAdjacency.from_pairs(adj.rows, adj.cols, adj.entries[keep])


def restrict_adjacency(adj: SparseAdjacency, mask: SamplingMask) -> SparseAdjacency:
    """Masked adjacency reindexed onto the m*n sampled product nodes.

    Subgraph s maps to its rank within mask.sampled; node indices are kept.
    With a full mask this is the identity reindexing.
    """
    n = _tuple_grid_n(adj)
    masked = apply_sampling_mask(adj, mask)
    kept = np.asarray(mask.sampled, dtype=np.int64)
    m = kept.size
    if masked.nnz == 0:
        return SparseAdjacency(rows=m * n, cols=m * n)
    rank = np.searchsorted(kept, masked.entries[:, 0] // n)
    rank_c = np.searchsorted(kept, masked.entries[:, 1] // n)
    rows = rank * n + masked.entries[:, 0] % n
    cols = rank_c * n + masked.entries[:, 1] % n
    return SparseAdjacency.from_pairs(m * n, m * n, np.column_stack([rows, cols]))


def restrict_rows(x: np.ndarray, mask: SamplingMask) -> np.ndarray:
    """Rows of an (n^2, d) product-node matrix for sampled subgraphs only."""
    n = mask.n
    if x.shape[0] != n * n:
        raise ValidationError(f"expected {n * n} rows, got {x.shape[0]}")
    idx = (np.asarray(mask.sampled, dtype=np.int64)[:, None] * n
           + np.arange(n, dtype=np.int64)[None, :]).ravel()
    return x[idx]
