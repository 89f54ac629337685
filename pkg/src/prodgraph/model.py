"""Subgraph attention block: sparse attention, point update, fusion, pooling.

One block computes, per product node, an attention aggregation over each of
the two symmetric edge types plus a GIN-style point update, concatenates the
three d_out-wide results, and mixes them with an MLP:

    out = MLP_fuse( attn_internal(X) || attn_external(X) || point(X) )

Attention follows the GAT scoring rule per head h:

    z_ij = a_h . [ (W_Q x_i)_h || (W_K x_j)_h ]      (i receives from j)
    e_ij = LeakyReLU(z_ij, slope 0.2)
    alpha_i: = softmax of e over the in-neighborhood of i
    out_i,h = sum_j alpha_ij (W_V x_j)_h

computed only on the stored adjacency entries (row = receiver).  Rows with
an empty in-neighborhood emit zeros.  Every forward step caches what its
hand-written backward needs; gradients are validated against central finite
differences by grad_check.

All math is float64.  ReLU takes subgradient 0 at 0.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .errors import NonFiniteGradient, ParseError, ShapeMismatch
from .graphs import Graph, SparseAdjacency
from .product import ProductGraphBundle
from .rng import SplitMix64
from .spectral import NodeMarkIndex, PEMatrix

LEAKY_SLOPE = 0.2


def _uniform_array(rng: SplitMix64, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Uniform draws in [-1/sqrt(fan_in), +1/sqrt(fan_in)], C-order fill."""
    bound = 1.0 / np.sqrt(max(1, fan_in))
    size = int(np.prod(shape)) if shape else 1
    flat = np.array([rng.uniform(-bound, bound) for _ in range(size)])
    return flat.reshape(shape)


@dataclass
class MLPParams:
    """Single hidden layer with ReLU: y = relu(x W1 + b1) W2 + b2."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def from_rng(cls, d_in: int, hidden: int, d_out: int, rng: SplitMix64) -> "MLPParams":
        return cls(
            w1=_uniform_array(rng, (d_in, hidden), d_in),
            b1=_uniform_array(rng, (hidden,), d_in),
            w2=_uniform_array(rng, (hidden, d_out), hidden),
            b2=_uniform_array(rng, (d_out,), hidden),
        )

    def named(self, prefix: str):
        return [
            (f"{prefix}.w1", self.w1),
            (f"{prefix}.b1", self.b1),
            (f"{prefix}.w2", self.w2),
            (f"{prefix}.b2", self.b2),
        ]


@dataclass
class AttentionParams:
    """Per-edge-type projections and scoring vectors, split across heads."""

    w_query: np.ndarray  # (d_in, d_out)
    w_key: np.ndarray
    w_value: np.ndarray
    attn: np.ndarray  # (heads, 2 * d_out // heads)

    @classmethod
    def from_rng(cls, d_in: int, d_out: int, heads: int, rng: SplitMix64) -> "AttentionParams":
        hd = d_out // heads
        return cls(
            w_query=_uniform_array(rng, (d_in, d_out), d_in),
            w_key=_uniform_array(rng, (d_in, d_out), d_in),
            w_value=_uniform_array(rng, (d_in, d_out), d_in),
            attn=_uniform_array(rng, (heads, 2 * hd), 2 * hd),
        )

    def named(self, prefix: str):
        return [
            (f"{prefix}.w_query", self.w_query),
            (f"{prefix}.w_key", self.w_key),
            (f"{prefix}.w_value", self.w_value),
            (f"{prefix}.attn", self.attn),
        ]


@dataclass
class SABParams:
    """All weights of one subgraph attention block."""

    d_in: int
    d_out: int
    heads: int
    internal: AttentionParams
    external: AttentionParams
    epsilon: np.ndarray  # 0-d array so finite differences can perturb it
    point_mlp: MLPParams  # d_in -> d_out
    fuse_mlp: MLPParams  # 3 * d_out -> d_out

    @classmethod
    def from_rng(cls, d_in: int, d_out: int, rng: SplitMix64, heads: int = 4) -> "SABParams":
        if d_out % heads:
            raise ShapeMismatch(f"d_out={d_out} not divisible by heads={heads}")
        return cls(
            d_in=d_in,
            d_out=d_out,
            heads=heads,
            internal=AttentionParams.from_rng(d_in, d_out, heads, rng),
            external=AttentionParams.from_rng(d_in, d_out, heads, rng),
            epsilon=np.array(0.0),
            point_mlp=MLPParams.from_rng(d_in, d_out, d_out, rng),
            fuse_mlp=MLPParams.from_rng(3 * d_out, d_out, d_out, rng),
        )

    def named(self, prefix: str):
        out = self.internal.named(f"{prefix}.internal")
        out += self.external.named(f"{prefix}.external")
        out += self.point_mlp.named(f"{prefix}.point_mlp")
        out.append((f"{prefix}.epsilon", self.epsilon))
        out += self.fuse_mlp.named(f"{prefix}.fuse_mlp")
        return out


@dataclass
class RGCNParams:
    """Unnormalized relational layer: X W0 + sum_rel (A_rel X) W_rel."""

    w_self: np.ndarray
    w_internal: np.ndarray
    w_external: np.ndarray
    w_point: np.ndarray

    @classmethod
    def from_rng(cls, d_in: int, d_out: int, rng: SplitMix64) -> "RGCNParams":
        return cls(*(_uniform_array(rng, (d_in, d_out), d_in) for _ in range(4)))


@dataclass
class EncoderParams:
    """Single linear map fusing node feature, PE row, and mark embedding."""

    weight: np.ndarray
    bias: np.ndarray

    @classmethod
    def from_rng(cls, d_in: int, d_out: int, rng: SplitMix64) -> "EncoderParams":
        return cls(
            weight=_uniform_array(rng, (d_in, d_out), d_in),
            bias=_uniform_array(rng, (d_out,), d_in),
        )


@dataclass(frozen=True)
class ProductState:
    """Features of the n^2 product nodes, row index flatten((s,v)) = s*n + v."""

    n: int
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != self.n * self.n:
            raise ShapeMismatch(
                f"state must have {self.n * self.n} rows, got shape {x.shape}"
            )
        if not np.isfinite(x).all():
            raise ShapeMismatch("state contains non-finite entries")
        x.flags.writeable = False
        object.__setattr__(self, "x", x)


# ---------------------------------------------------------------------------
# forward/backward primitives (cache-passing style)
# ---------------------------------------------------------------------------


def _mlp_forward(x: np.ndarray, p: MLPParams):
    if x.shape[1] != p.w1.shape[0]:
        raise ShapeMismatch(f"MLP expects width {p.w1.shape[0]}, got {x.shape[1]}")
    h = x @ p.w1 + p.b1
    mask = h > 0.0
    act = h * mask
    y = act @ p.w2 + p.b2
    return y, (x, mask, act)


def _mlp_backward(dy: np.ndarray, cache, p: MLPParams):
    x, mask, act = cache
    dw2 = act.T @ dy
    db2 = dy.sum(axis=0)
    dh = (dy @ p.w2.T) * mask
    dw1 = x.T @ dh
    db1 = dh.sum(axis=0)
    dx = dh @ p.w1.T
    return dx, {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}


def _segments(rows: np.ndarray):
    """Start offsets and lengths of the contiguous equal-row runs."""
    starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    counts = np.diff(np.r_[starts, rows.size])
    return starts, counts


def _attention_forward(x: np.ndarray, adj: SparseAdjacency, p: AttentionParams, heads: int):
    rows_n, d_in = x.shape
    if adj.rows != rows_n or adj.cols != rows_n:
        raise ShapeMismatch(f"adjacency is {adj.rows}x{adj.cols}, state has {rows_n} rows")
    if p.w_query.shape[0] != d_in:
        raise ShapeMismatch(f"attention expects width {p.w_query.shape[0]}, got {d_in}")
    d_out = p.w_query.shape[1]
    hd = d_out // heads
    q = (x @ p.w_query).reshape(rows_n, heads, hd)
    k = (x @ p.w_key).reshape(rows_n, heads, hd)
    v = (x @ p.w_value).reshape(rows_n, heads, hd)
    out = np.zeros((rows_n, heads, hd))
    if adj.nnz == 0:
        cache = (x, adj, q, k, v, None, None, None, None, heads, hd)
        return out.reshape(rows_n, d_out), cache
    r = adj.entries[:, 0]
    c = adj.entries[:, 1]
    aq = p.attn[:, :hd]
    ak = p.attn[:, hd:]
    z = (q[r] * aq[None, :, :]).sum(-1) + (k[c] * ak[None, :, :]).sum(-1)  # (E, H)
    e = np.where(z > 0.0, z, LEAKY_SLOPE * z)
    starts, counts = _segments(r)
    shifted = e - np.repeat(np.maximum.reduceat(e, starts, axis=0), counts, axis=0)
    ex = np.exp(shifted)
    alpha = ex / np.repeat(np.add.reduceat(ex, starts, axis=0), counts, axis=0)
    np.add.at(out, r, alpha[:, :, None] * v[c])
    cache = (x, adj, q, k, v, z, alpha, starts, counts, heads, hd)
    return out.reshape(rows_n, d_out), cache


def _attention_backward(dout: np.ndarray, cache, p: AttentionParams):
    x, adj, q, k, v, z, alpha, starts, counts, heads, hd = cache
    rows_n, d_in = x.shape
    d_out = p.w_query.shape[1]
    dq = np.zeros_like(q)
    dk = np.zeros_like(k)
    dv = np.zeros_like(v)
    dattn = np.zeros_like(p.attn)
    if adj.nnz:
        r = adj.entries[:, 0]
        c = adj.entries[:, 1]
        aq = p.attn[:, :hd]
        ak = p.attn[:, hd:]
        dout_h = dout.reshape(rows_n, heads, hd)
        dalpha = (dout_h[r] * v[c]).sum(-1)  # (E, H)
        np.add.at(dv, c, alpha[:, :, None] * dout_h[r])
        weighted = alpha * dalpha
        seg = np.repeat(np.add.reduceat(weighted, starts, axis=0), counts, axis=0)
        dz = alpha * (dalpha - seg)
        dz = dz * np.where(z > 0.0, 1.0, LEAKY_SLOPE)
        dattn[:, :hd] = np.einsum("eh,ehd->hd", dz, q[r])
        dattn[:, hd:] = np.einsum("eh,ehd->hd", dz, k[c])
        np.add.at(dq, r, dz[:, :, None] * aq[None, :, :])
        np.add.at(dk, c, dz[:, :, None] * ak[None, :, :])
    dq_flat = dq.reshape(rows_n, d_out)
    dk_flat = dk.reshape(rows_n, d_out)
    dv_flat = dv.reshape(rows_n, d_out)
    grads = {
        "w_query": x.T @ dq_flat,
        "w_key": x.T @ dk_flat,
        "w_value": x.T @ dv_flat,
        "attn": dattn,
    }
    dx = dq_flat @ p.w_query.T + dk_flat @ p.w_key.T + dv_flat @ p.w_value.T
    return dx, grads


def _point_forward(x: np.ndarray, point: SparseAdjacency, epsilon: np.ndarray, mlp: MLPParams):
    if point.cols != x.shape[0]:
        raise ShapeMismatch(f"point adjacency is {point.rows}x{point.cols}, state has {x.shape[0]} rows")
    agg = point.matmul(x)
    pre = (1.0 + float(epsilon)) * x + agg
    y, mlp_cache = _mlp_forward(pre, mlp)
    return y, (x, point, mlp_cache)


def _point_backward(dy: np.ndarray, cache, epsilon: np.ndarray, mlp: MLPParams):
    x, point, mlp_cache = cache
    dpre, mlp_grads = _mlp_backward(dy, mlp_cache, mlp)
    deps = float((dpre * x).sum())
    dx = (1.0 + float(epsilon)) * dpre
    if point.nnz:
        np.add.at(dx, point.entries[:, 1], dpre[point.entries[:, 0]])
    return dx, deps, mlp_grads


def _sab_forward_raw(x, internal, external, point, params: SABParams):
    a_int, c_int = _attention_forward(x, internal, params.internal, params.heads)
    a_ext, c_ext = _attention_forward(x, external, params.external, params.heads)
    a_pt, c_pt = _point_forward(x, point, params.epsilon, params.point_mlp)
    fused_in = np.hstack([a_int, a_ext, a_pt])
    y, c_fuse = _mlp_forward(fused_in, params.fuse_mlp)
    return y, (c_int, c_ext, c_pt, c_fuse, params.d_out)


def _sab_backward_raw(dy, cache, params: SABParams):
    c_int, c_ext, c_pt, c_fuse, d_out = cache
    dfused, fuse_grads = _mlp_backward(dy, c_fuse, params.fuse_mlp)
    d_int = dfused[:, :d_out]
    d_ext = dfused[:, d_out : 2 * d_out]
    d_pt = dfused[:, 2 * d_out :]
    dx_int, int_grads = _attention_backward(d_int, c_int, params.internal)
    dx_ext, ext_grads = _attention_backward(d_ext, c_ext, params.external)
    dx_pt, deps, point_grads = _point_backward(d_pt, c_pt, params.epsilon, params.point_mlp)
    grads = {}
    for key, val in int_grads.items():
        grads[f"internal.{key}"] = val
    for key, val in ext_grads.items():
        grads[f"external.{key}"] = val
    for key, val in point_grads.items():
        grads[f"point_mlp.{key}"] = val
    grads["epsilon"] = np.array(deps)
    for key, val in fuse_grads.items():
        grads[f"fuse_mlp.{key}"] = val
    return dx_int + dx_ext + dx_pt, grads


def _pool_forward(x: np.ndarray, variant: str, n: int, mlp: MLPParams):
    if variant == "sum_sum":
        pre = x.sum(axis=0)
    elif variant == "mean_sum":
        pre = x.sum(axis=0) / n
    else:
        raise ShapeMismatch(f"unknown pooling variant {variant!r}")
    y, mlp_cache = _mlp_forward(pre[None, :], mlp)
    return y[0], (x.shape, variant, n, mlp_cache)


def _pool_backward(dy: np.ndarray, cache, mlp: MLPParams):
    shape, variant, n, mlp_cache = cache
    dpre, mlp_grads = _mlp_backward(dy[None, :], mlp_cache, mlp)
    dx = np.broadcast_to(dpre[0], shape).copy()
    if variant == "mean_sum":
        dx /= n
    return dx, mlp_grads


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def sparse_attention(state: ProductState, adj: SparseAdjacency, params: AttentionParams, heads: int) -> np.ndarray:
    out, _ = _attention_forward(state.x, adj, params, heads)
    return out


def point_update(state: ProductState, point: SparseAdjacency, epsilon: float, mlp: MLPParams) -> np.ndarray:
    out, _ = _point_forward(state.x, point, np.asarray(epsilon), mlp)
    return out


def sab_forward(state: ProductState, bundle: ProductGraphBundle, params: SABParams) -> ProductState:
    y, _ = _sab_forward_raw(state.x, bundle.internal, bundle.external, bundle.point, params)
    return ProductState(n=state.n, x=y)


def pool(state: ProductState, variant: str, mlp: MLPParams) -> np.ndarray:
    out, _ = _pool_forward(state.x, variant, state.n, mlp)
    return out


def rgcn_layer(state: ProductState, bundle: ProductGraphBundle, params: RGCNParams) -> ProductState:
    x = state.x
    if x.shape[1] != params.w_self.shape[0]:
        raise ShapeMismatch(
            f"RGCN expects width {params.w_self.shape[0]}, got {x.shape[1]}"
        )
    y = (
        x @ params.w_self
        + bundle.internal.matmul(x) @ params.w_internal
        + bundle.external.matmul(x) @ params.w_external
        + bundle.point.matmul(x) @ params.w_point
    )
    return ProductState(n=state.n, x=y)


def init_state(
    g: Graph,
    pe: PEMatrix,
    marks: NodeMarkIndex,
    mark_table: np.ndarray,
    encoder: EncoderParams,
) -> ProductState:
    """X(s,v) = Linear( feat(v) || pe(s,v) || mark_table[dist(s,v)] )."""
    n = g.n
    if pe.rows != n * n:
        raise ShapeMismatch(f"PE has {pe.rows} rows, expected {n * n}")
    if marks.n != n or mark_table.shape[0] != marks.vocabulary:
        raise ShapeMismatch("mark table rows must equal the mark vocabulary")
    feats = g.features if g.features is not None else np.ones((n, 1))
    node_part = np.tile(feats, (n, 1))  # row s*n + v carries feat(v)
    mark_part = mark_table[marks.flat()]
    combined = np.hstack([node_part, pe.data, mark_part])
    if combined.shape[1] != encoder.weight.shape[0]:
        raise ShapeMismatch(
            f"encoder expects width {encoder.weight.shape[0]}, got {combined.shape[1]}"
        )
    return ProductState(n=n, x=combined @ encoder.weight + encoder.bias)


# ---------------------------------------------------------------------------
# pipeline and gradient checking
# ---------------------------------------------------------------------------


@dataclass
class Pipeline:
    """SAB stack + pooling on a fixed set of adjacencies.

    Works on raw (rows, d) arrays so the same machinery drives both the full
    n^2-row system and row-restricted sampled systems.  The scalar objective
    used by loss/grad checking is the sum of the pooled vector.
    """

    internal: SparseAdjacency
    external: SparseAdjacency
    point: SparseAdjacency
    n: int
    layers: list[SABParams]
    pool_mlp: MLPParams
    variant: str = "sum_sum"

    def named_arrays(self):
        out = []
        for idx, layer in enumerate(self.layers):
            out += layer.named(f"layers.{idx}")
        out += self.pool_mlp.named("pool_mlp")
        return out

    def pooled(self, x0: np.ndarray) -> np.ndarray:
        x = x0
        for layer in self.layers:
            x, _ = _sab_forward_raw(x, self.internal, self.external, self.point, layer)
        out, _ = _pool_forward(x, self.variant, self.n, self.pool_mlp)
        return out

    def loss(self, x0: np.ndarray) -> float:
        return float(self.pooled(x0).sum())

    def loss_and_grads(self, x0: np.ndarray):
        x = x0
        caches = []
        for layer in self.layers:
            x, cache = _sab_forward_raw(x, self.internal, self.external, self.point, layer)
            caches.append(cache)
        pooled, pool_cache = _pool_forward(x, self.variant, self.n, self.pool_mlp)
        loss = float(pooled.sum())
        dpooled = np.ones_like(pooled)
        dx, pool_grads = _pool_backward(dpooled, pool_cache, self.pool_mlp)
        grads = {f"pool_mlp.{k}": v for k, v in pool_grads.items()}
        for idx in range(len(self.layers) - 1, -1, -1):
            dx, layer_grads = _sab_backward_raw(dx, caches[idx], self.layers[idx])
            for key, val in layer_grads.items():
                grads[f"layers.{idx}.{key}"] = val
        return loss, grads, dx


@dataclass(frozen=True)
class GradCheckReport:
    passed: bool
    max_rel_error: float
    worst_parameter: str
    worst_index: tuple
    parameter_count: int
    tolerance: float


def grad_check(
    pipeline: Pipeline,
    x0: np.ndarray,
    step: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Relative error per parameter entry is |a - f| / max(|a|, |f|, 1e-6);
    the report carries the worst offender so a corrupted gradient can be
    pinpointed.
    """
    _, grads, _ = pipeline.loss_and_grads(x0)
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteGradient(f"gradient of {name} is not finite")
    max_rel = 0.0
    worst_name = ""
    worst_index: tuple = ()
    count = 0
    for name, arr in pipeline.named_arrays():
        gflat = grads[name].ravel()
        flat = arr.reshape(-1)
        for idx in range(flat.size):
            count += 1
            orig = flat[idx]
            flat[idx] = orig + step
            f_plus = pipeline.loss(x0)
            flat[idx] = orig - step
            f_minus = pipeline.loss(x0)
            flat[idx] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            if not np.isfinite(fd):
                raise NonFiniteGradient(f"finite difference of {name}[{idx}] is not finite")
            rel = abs(gflat[idx] - fd) / max(abs(gflat[idx]), abs(fd), 1e-6)
            if rel > max_rel:
                max_rel = rel
                worst_name = name
                worst_index = np.unravel_index(idx, arr.shape) if arr.shape else ()
    return GradCheckReport(
        passed=max_rel <= tolerance,
        max_rel_error=max_rel,
        worst_parameter=worst_name,
        worst_index=tuple(int(i) for i in worst_index),
        parameter_count=count,
        tolerance=tolerance,
    )


# ---------------------------------------------------------------------------
# end-to-end forward driver
# ---------------------------------------------------------------------------


@dataclass
class ForwardConfig:
    """Knobs of the full forward pass; all defaults deterministic."""

    k: int = 4
    seed: int = 0
    layers: int = 2
    d: int = 8
    heads: int = 4
    pool_variant: str = "sum_sum"
    sample_ratio: float | None = None
    sample_seed: int | None = None


@dataclass
class ForwardModel:
    """All parameters of one forward pass, built from a single seed.

    Draw order is fixed (mark table, encoder, layers in order, pool MLP) so
    that a seed pins every weight.
    """

    mark_table: np.ndarray
    encoder: EncoderParams
    layers: list[SABParams]
    pool_mlp: MLPParams

    def named(self):
        out = [("mark_table", self.mark_table)]
        out.append(("encoder.weight", self.encoder.weight))
        out.append(("encoder.bias", self.encoder.bias))
        for idx, layer in enumerate(self.layers):
            out += layer.named(f"layers.{idx}")
        out += self.pool_mlp.named("pool_mlp")
        return out


def build_forward_model(g: Graph, cfg: ForwardConfig) -> ForwardModel:
    if cfg.d % cfg.heads:
        raise ShapeMismatch(f"d={cfg.d} not divisible by heads={cfg.heads}")
    rng = SplitMix64(cfg.seed)
    d_feat = g.features.shape[1] if g.features is not None else 1
    mark_table = _uniform_array(rng, (g.n + 1, cfg.d), g.n + 1)
    encoder = EncoderParams.from_rng(d_feat + cfg.k + cfg.d, cfg.d, rng)
    layers = [SABParams.from_rng(cfg.d, cfg.d, rng, cfg.heads) for _ in range(cfg.layers)]
    pool_mlp = MLPParams.from_rng(cfg.d, cfg.d, cfg.d, rng)
    return ForwardModel(mark_table=mark_table, encoder=encoder, layers=layers, pool_mlp=pool_mlp)


def run_forward(g: Graph, cfg: ForwardConfig, model: ForwardModel | None = None) -> np.ndarray:
    """Pooled output of the SAB stack; deterministic given graph and config.

    The positional encoding is always computed on the full, unsampled graph.
    With sampling, ceil(ratio * n) subgraphs are drawn from the seeded stream
    and the whole system (state rows and all three adjacencies) is restricted
    to their rows before the stack runs; ratio 1.0 reproduces the unsampled
    forward bit for bit.
    """
    from .product import SamplingMask, build_product_bundle, restrict_adjacency, restrict_rows
    from .spectral import node_mark_indices, product_pe

    if model is None:
        model = build_forward_model(g, cfg)
    pe = product_pe(g, cfg.k)
    marks = node_mark_indices(g)
    state = init_state(g, pe, marks, model.mark_table, model.encoder)
    bundle = build_product_bundle(g)
    x = state.x
    internal, external, point = bundle.internal, bundle.external, bundle.point
    if cfg.sample_ratio is not None:
        sample_seed = cfg.seed if cfg.sample_seed is None else cfg.sample_seed
        mask = SamplingMask.from_ratio(g.n, cfg.sample_ratio, SplitMix64(sample_seed))
        internal = restrict_adjacency(internal, mask)
        external = restrict_adjacency(external, mask)
        point = restrict_adjacency(point, mask)
        x = restrict_rows(x, mask)
    pipeline = Pipeline(
        internal, external, point, g.n, model.layers, model.pool_mlp, cfg.pool_variant
    )
    return pipeline.pooled(x)


# ---------------------------------------------------------------------------
# parameter container serialization
# ---------------------------------------------------------------------------


def save_parameters(fileobj: IO[bytes], named: Sequence[tuple[str, np.ndarray]]) -> None:
    """Flat binary container: length-prefixed JSON manifest, then raw f64.

    Layout: uint64 little-endian manifest length, the UTF-8 JSON manifest
    {"arrays": [{"name", "shape"}...]}, then each array's float64 buffer in
    little-endian C order, concatenated in manifest order.
    """
    manifest = json.dumps(
        {"arrays": [{"name": n, "shape": list(a.shape)} for n, a in named]}
    ).encode("utf-8")
    fileobj.write(struct.pack("<Q", len(manifest)))
    fileobj.write(manifest)
    for _, arr in named:
        fileobj.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_parameters(fileobj: IO[bytes]) -> dict[str, np.ndarray]:
    header = fileobj.read(8)
    if len(header) != 8:
        raise ParseError("parameter container too short for manifest length")
    (length,) = struct.unpack("<Q", header)
    try:
        manifest = json.loads(fileobj.read(length).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad parameter manifest: {exc}") from exc
    out: dict[str, np.ndarray] = {}
    for item in manifest.get("arrays", []):
        shape = tuple(item["shape"])
        size = int(np.prod(shape)) if shape else 1
        buf = fileobj.read(8 * size)
        if len(buf) != 8 * size:
            raise ParseError(f"parameter container truncated at {item['name']}")
        out[item["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return out


def load_into(named: Sequence[tuple[str, np.ndarray]], data: dict[str, np.ndarray]) -> None:
    """Copy loaded arrays into existing parameter storage, shape-checked."""
    for name, arr in named:
        if name not in data:
            raise ParseError(f"container is missing parameter {name}")
        if data[name].shape != arr.shape:
            raise ShapeMismatch(
                f"{name}: container shape {data[name].shape} != expected {arr.shape}"
            )
        arr[...] = data[name]
