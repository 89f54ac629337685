"""Laplacians, dense symmetric eigendecomposition, and positional encodings.

The key fact used throughout: the Laplacian of the Cartesian product G [] G
factorizes as L (x) I + I (x) L, so its eigenpairs are exactly
(u_i (x) u_j, lam_i + lam_j) over all pairs of base eigenpairs.  Positional
encodings for the n^2 product nodes therefore never require diagonalizing an
n^2 x n^2 matrix: we decompose the n x n base Laplacian once and materialize
only the k requested columns (k * n^2 output values, n^3-dominated work).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NotSymmetric, ParseError, ProdGraphError, RangeError, ScaleError
from .graphs import Graph, dense_adjacency, shortest_path_distances
from .product import cartesian_product_adjacency


def laplacian(g: Graph) -> np.ndarray:
    """L = D - A with D = diag(A 1); symmetric, PSD, zero row sums."""
    a = dense_adjacency(g).astype(np.float64)
    return np.diag(a.sum(axis=1)) - a


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix, values ascending, vectors orthonormal."""

    n: int
    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "vectors", _frozen(self.vectors))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def _round_robin_rounds(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Partition all index pairs into rounds of pairwise-disjoint pivots."""
    m = n if n % 2 == 0 else n + 1  # odd n gets a bye at index m-1
    others = list(range(1, m))
    rounds = []
    for _ in range(m - 1):
        arr = [0] + others
        ps, qs = [], []
        for i in range(m // 2):
            p, q = arr[i], arr[m - 1 - i]
            if p < n and q < n:
                ps.append(min(p, q))
                qs.append(max(p, q))
        rounds.append((np.array(ps, dtype=np.int64), np.array(qs, dtype=np.int64)))
        others = others[-1:] + others[:-1]
    return rounds


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60):
    """Cyclic Jacobi diagonalization of a symmetric matrix.

    Pivots follow a round-robin ordering; each round's pivots touch disjoint
    index pairs, so the whole round is applied as one batched rotation (the
    result is bit-identical to applying those rotations sequentially).  Stops
    when the off-diagonal Frobenius norm falls below tol * max(1, ||A||_F).

    Returns (values, vectors) with values unsorted (diagonal order).
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    scale = max(1.0, float(np.linalg.norm(a)))
    rounds = _round_robin_rounds(n)
    diag_mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a[diag_mask]))
        if off <= tol * scale:
            return a.diagonal().copy(), v
        for p_all, q_all in rounds:
            apq = a[p_all, q_all]
            live = apq != 0.0
            if not live.any():
                continue
            p, q = p_all[live], q_all[live]
            apq = apq[live]
            app, aqq = a[p, p], a[q, q]
            with np.errstate(over="ignore"):
                theta = np.clip((aqq - app) / (2.0 * apq), -1e150, 1e150)
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            t = sign / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # A <- J^T A J restricted to the touched rows/columns.
            acp, acq = a[:, p], a[:, q]
            a[:, p] = c * acp - s * acq
            a[:, q] = s * acp + c * acq
            arp, arq = a[p, :], a[q, :]
            a[p, :] = c[:, None] * arp - s[:, None] * arq
            a[q, :] = s[:, None] * arp + c[:, None] * arq
            # The rotated pivot block has the exact closed form; using it
            # avoids the roundoff of the generic update on the diagonal.
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vcp, vcq = v[:, p], v[:, q]
            v[:, p] = c * vcp - s * vcq
            v[:, q] = s * vcp + c * vcq
    raise ProdGraphError(f"jacobi did not converge in {max_sweeps} sweeps")


def _canonical_signs(vectors: np.ndarray, threshold: float = 1e-9) -> np.ndarray:
    """Flip each column so its first entry above threshold is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.flatnonzero(np.abs(col) > threshold)
        if nz.size and col[nz[0]] < 0:
            out[:, j] = -col
    return out


def eig_sym(matrix: np.ndarray) -> EigenDecomposition:
    """Full decomposition of a symmetric matrix, deterministic ordering.

    Values ascend (stable sort, so equal values keep diagonal order) and each
    eigenvector's first entry with magnitude > 1e-9 is positive.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetric(f"matrix must be square, got shape {m.shape}")
    bound = 1e-12 * max(1.0, float(np.abs(m).max(initial=0.0)))
    if m.size and float(np.abs(m - m.T).max()) > bound:
        raise NotSymmetric("matrix is not symmetric within 1e-12")
    values, vectors = jacobi_eigh(m)
    order = np.argsort(values, kind="stable")
    return EigenDecomposition(
        n=m.shape[0],
        values=values[order],
        vectors=_canonical_signs(vectors[:, order]),
    )


@dataclass(frozen=True)
class PEMatrix:
    """Positional-encoding block: rows x k values plus per-column labels."""

    rows: int
    k: int
    data: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data))
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues))

    def to_text(self) -> str:
        """Header 'rows k', one line of labels, then values row-major."""
        lines = [f"{self.rows} {self.k}"]
        lines.append(" ".join(format(x, ".17g") for x in self.eigenvalues))
        for row in self.data:
            lines.append(" ".join(format(x, ".17g") for x in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PEMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if len(lines) < 2:
            raise ParseError("PE text requires a header and a label line")
        try:
            rows, k = (int(x) for x in lines[0].split())
            labels = np.array([float(x) for x in lines[1].split()])
            data = np.array([[float(x) for x in ln.split()] for ln in lines[2:]])
        except ValueError as exc:
            raise ParseError(f"malformed PE text: {exc}") from exc
        if labels.shape != (k,) or data.shape != (rows, k):
            raise ParseError("PE text dimensions do not match header")
        return cls(rows=rows, k=k, data=data, eigenvalues=labels)


def product_pe(g: Graph, k: int) -> PEMatrix:
    """First k product-graph eigenvector columns, from the base spectrum.

    Candidate columns are (u_i (x) u_j) with label lam_i + lam_j over all n^2
    index pairs.  Pairs sort by (label, i, j); ties inherit the base order.
    Column (i, j) holds U[s,i] * U[v,j] at product node (s, v).  No matrix
    larger than n^2 entries is ever allocated here.
    """
    n = g.n
    if not 1 <= k <= n * n:
        raise RangeError(f"k must lie in [1, {n * n}], got {k}")
    base = eig_sym(laplacian(g))
    lam = base.values
    i_idx = np.repeat(np.arange(n), n)
    j_idx = np.tile(np.arange(n), n)
    labels = lam[i_idx] + lam[j_idx]
    order = np.lexsort((j_idx, i_idx, labels))[:k]
    data = np.empty((n * n, k))
    for col, pair in enumerate(order):
        data[:, col] = np.multiply.outer(
            base.vectors[:, i_idx[pair]], base.vectors[:, j_idx[pair]]
        ).ravel()
    return PEMatrix(rows=n * n, k=k, data=data, eigenvalues=labels[order])


def k_tuple_pe(g: Graph, tuple_order: int, k: int) -> PEMatrix:
    """Generalization to K-tuples: labels are K-fold eigenvalue sums."""
    n = g.n
    if tuple_order < 1:
        raise RangeError(f"tuple order must be >= 1, got {tuple_order}")
    size = n**tuple_order
    if size > 4096:
        raise ScaleError(f"n^K = {size} exceeds the 4096-node guard")
    if not 1 <= k <= size:
        raise RangeError(f"k must lie in [1, {size}], got {k}")
    base = eig_sym(laplacian(g))
    lam = base.values
    tuples = sorted(
        itertools.product(range(n), repeat=tuple_order),
        key=lambda t: (sum(lam[i] for i in t), t),
    )[:k]
    data = np.empty((size, k))
    labels = np.empty(k)
    for col, t in enumerate(tuples):
        vec = base.vectors[:, t[0]]
        for idx in t[1:]:
            vec = np.kron(vec, base.vectors[:, idx])
        data[:, col] = vec
        labels[col] = sum(lam[i] for i in t)
    return PEMatrix(rows=size, k=k, data=data, eigenvalues=labels)


def concatenation_pe(g: Graph, k: int) -> PEMatrix:
    """Row (s,v) = [U_s,1..k || U_v,1..k]; raw vectors, 2k columns.

    Any downstream mixing (the learned map that recovers products of halves)
    is the consumer's job.  The label array repeats the k base eigenvalues
    for each half.
    """
    n = g.n
    if not 1 <= k <= n:
        raise RangeError(f"k must lie in [1, {n}], got {k}")
    base = eig_sym(laplacian(g))
    block = base.vectors[:, :k]
    data = np.hstack([np.repeat(block, n, axis=0), np.tile(block, (n, 1))])
    labels = np.concatenate([base.values[:k], base.values[:k]])
    return PEMatrix(rows=n * n, k=2 * k, data=data, eigenvalues=labels)


@dataclass(frozen=True)
class NodeMarkIndex:
    """Embedding-table indices for node marking: dist(s, v) with sentinel n."""

    n: int
    marks: np.ndarray
    vocabulary: int

    def flat(self) -> np.ndarray:
        """Marks in product-node order, index (s * n + v)."""
        return self.marks.ravel()


def node_mark_indices(g: Graph) -> NodeMarkIndex:
    dist = shortest_path_distances(g)
    return NodeMarkIndex(n=g.n, marks=dist.dist, vocabulary=g.n + 1)


@dataclass(frozen=True)
class PEOracleReport:
    """Outcome of checking the factorized spectrum against direct diagonalization."""

    n: int
    passed: bool
    eigenvalue_deviation: float
    projector_deviation: float
    eigenvalue_tolerance: float
    projector_tolerance: float
    eigenvalues: np.ndarray


def _cluster_bounds(values: np.ndarray, gap: float) -> list[tuple[int, int]]:
    bounds = []
    start = 0
    for i in range(1, values.size):
        if values[i] - values[i - 1] > gap:
            bounds.append((start, i))
            start = i
    bounds.append((start, values.size))
    return bounds


def pe_oracle_check(g: Graph, eig_tol: float = 1e-8, proj_tol: float = 1e-6) -> PEOracleReport:
    """Diagonalize the product-graph Laplacian directly and compare.

    Eigenvalue multisets must agree within eig_tol; for each eigenvalue
    cluster the two orthogonal eigenspace projectors must agree within
    proj_tol in max-norm (individual eigenvectors of repeated eigenvalues
    are basis-ambiguous, projectors are not).
    """
    if g.n > 8:
        raise ScaleError(f"oracle check is limited to n <= 8, got n={g.n}")
    factored = product_pe(g, k=g.n * g.n)
    a2 = cartesian_product_adjacency(g).to_dense().astype(np.float64)
    l2 = np.diag(a2.sum(axis=1)) - a2
    direct = eig_sym(l2)
    eig_dev = float(np.abs(factored.eigenvalues - direct.values).max())
    gap = 1e-6 * max(1.0, float(np.abs(direct.values).max()))
    proj_dev = 0.0
    for lo, hi in _cluster_bounds(direct.values, gap):
        p_factored = factored.data[:, lo:hi] @ factored.data[:, lo:hi].T
        p_direct = direct.vectors[:, lo:hi] @ direct.vectors[:, lo:hi].T
        proj_dev = max(proj_dev, float(np.abs(p_factored - p_direct).max()))
    return PEOracleReport(
        n=g.n,
        passed=eig_dev <= eig_tol and proj_dev <= proj_tol,
        eigenvalue_deviation=eig_dev,
        projector_deviation=proj_dev,
        eigenvalue_tolerance=eig_tol,
        projector_tolerance=proj_tol,
        eigenvalues=factored.eigenvalues,
    )
