import io

import numpy as np
import pytest

from prodgraph import (
    AttentionParams,
    EncoderParams,
    MLPParams,
    Pipeline,
    ProductState,
    RGCNParams,
    SABParams,
    ShapeMismatch,
    build_product_bundle,
    external_adjacency,
    grad_check,
    init_state,
    internal_adjacency,
    load_parameters,
    node_mark_indices,
    point_adjacency,
    point_update,
    pool,
    product_pe,
    random_graph,
    rgcn_layer,
    sab_forward,
    save_parameters,
    sparse_attention,
)
from prodgraph.graphs import complete_graph, path_graph
from prodgraph.model import (
    ForwardConfig,
    _uniform_array,
    build_forward_model,
    run_forward,
)
from prodgraph.product import TupleIndexing
from prodgraph.rng import SplitMix64
from prodgraph.verify import (
    dense_attention_oracle,
    dense_point_oracle,
    dense_rgcn_oracle,
)

P2 = path_graph(2)
K3 = complete_graph(3)


def random_state(rows, d, seed):
    rng = SplitMix64(seed)
    return np.array([[rng.uniform(-1.0, 1.0) for _ in range(d)] for _ in range(rows)])


def identity_mlp(d):
    """relu(x) - relu(-x) = x: an MLP that is exactly the identity."""
    eye = np.eye(d)
    return MLPParams(
        w1=np.hstack([eye, -eye]),
        b1=np.zeros(2 * d),
        w2=np.vstack([eye, -eye]),
        b2=np.zeros(d),
    )


def zero_sab_params(d, heads=4, with_bias=None):
    rng = SplitMix64(0)
    params = SABParams.from_rng(d, d, rng, heads=heads)
    for _, arr in params.named("p"):
        arr.reshape(-1)[...] = 0.0
    if with_bias is not None:
        params.fuse_mlp.b2[...] = with_bias
    return params


# --- sparse attention ------------------------------------------------------


def test_attention_singleton_neighborhood_is_value_projection():
    # point adjacency: every row has exactly one in-neighbor, so softmax = 1
    n = 3
    rng = SplitMix64(1)
    params = AttentionParams.from_rng(5, 8, 4, rng)
    x = random_state(n * n, 5, seed=2)
    pt = point_adjacency(n)
    out = sparse_attention(ProductState(n=n, x=x), pt, params, heads=4)
    values = x @ params.w_value
    for (r, c) in pt.entry_set():
        assert np.abs(out[r] - values[c]).max() <= 1e-14


def test_attention_identical_features_give_uniform_weights():
    g = complete_graph(4)
    adj = internal_adjacency(g)
    x = np.tile(random_state(1, 6, seed=3), (16, 1))
    rng = SplitMix64(4)
    params = AttentionParams.from_rng(6, 8, 4, rng)
    out = sparse_attention(ProductState(n=4, x=x), adj, params, heads=4)
    values = x @ params.w_value
    # uniform alpha over identical values reproduces any neighbor's value row
    assert np.abs(out[0] - values[0]).max() <= 1e-12


def test_attention_empty_rows_emit_zeros():
    g = path_graph(3)  # nodes 0-1-2; node pairs without edges stay empty
    adj = internal_adjacency(g)
    x = random_state(9, 4, seed=5)
    rng = SplitMix64(6)
    params = AttentionParams.from_rng(4, 4, 2, rng)
    out = sparse_attention(ProductState(n=3, x=x), adj, params, heads=2)
    rows_with_edges = set(adj.entries[:, 0].tolist())
    for r in range(9):
        if r not in rows_with_edges:
            assert not out[r].any()
    # fully empty adjacency (disconnected base graph) must not poison anything
    from prodgraph import SparseAdjacency

    x2 = random_state(4, 4, seed=7)
    none = SparseAdjacency(rows=4, cols=4)
    assert not sparse_attention(ProductState(n=2, x=x2), none, params, heads=2).any()


def test_attention_matches_dense_oracle():
    for seed in range(20):
        n = 2 + seed % 4
        g = random_graph(n, 0.5, seed=seed)
        rng = SplitMix64(seed + 10)
        params = AttentionParams.from_rng(6, 8, 4, rng)
        x = random_state(n * n, 6, seed=seed + 30)
        for adj in (internal_adjacency(g), external_adjacency(g)):
            sparse = sparse_attention(ProductState(n=n, x=x), adj, params, heads=4)
            dense = dense_attention_oracle(x, adj.to_dense(), params, heads=4)
            assert np.abs(sparse - dense).max() <= 1e-12


def test_attention_shape_mismatch():
    params = AttentionParams.from_rng(6, 8, 4, SplitMix64(0))
    x = random_state(4, 5, seed=1)
    with pytest.raises(ShapeMismatch):
        sparse_attention(ProductState(n=2, x=x), internal_adjacency(P2), params, heads=4)


# --- point update -----------------------------------------------------------


def test_point_update_formula_is_uniform_at_roots():
    # with eps = -1 the self term cancels and the root row passes through
    n = 3
    x = random_state(n * n, 4, seed=11)
    out = point_update(ProductState(n=n, x=x), point_adjacency(n), -1.0, identity_mlp(4))
    for v in range(n):
        root = v * n + v
        assert np.abs(out[root] - x[root]).max() <= 1e-14  # (1-1)X + X at roots


def test_point_update_identity_mlp_eps_zero():
    n = 3
    x = random_state(n * n, 4, seed=12)
    pt = point_adjacency(n)
    out = point_update(ProductState(n=n, x=x), pt, 0.0, identity_mlp(4))
    assert np.abs(out - (x + pt.to_dense() @ x)).max() <= 1e-14


def test_point_update_matches_dense_oracle():
    for seed in range(10):
        n = 2 + seed % 3
        rng = SplitMix64(seed)
        mlp = MLPParams.from_rng(4, 6, 5, rng)
        eps = rng.uniform(-0.5, 0.5)
        x = random_state(n * n, 4, seed=seed + 50)
        pt = point_adjacency(n)
        out = point_update(ProductState(n=n, x=x), pt, eps, mlp)
        dense = dense_point_oracle(x, pt.to_dense(), eps, mlp)
        assert np.abs(out - dense).max() <= 1e-12


# --- SAB forward ------------------------------------------------------------


def test_sab_zero_weights():
    bundle = build_product_bundle(P2)
    x = random_state(4, 4, seed=13)
    out = sab_forward(ProductState(n=2, x=x), bundle, zero_sab_params(4)).x
    assert not out.any()
    biased = sab_forward(
        ProductState(n=2, x=x), bundle, zero_sab_params(4, with_bias=2.5)
    ).x
    assert np.abs(biased - 2.5).max() == 0.0  # constant rows with bias


def test_sab_golden_p2():
    # reference run pinned at the first correct build (seed 42, d = 4)
    bundle = build_product_bundle(P2)
    rng = SplitMix64(42)
    params = SABParams.from_rng(4, 4, rng)
    x0 = np.array([[rng.uniform(-1.0, 1.0) for _ in range(4)] for _ in range(4)])
    out = sab_forward(ProductState(n=2, x=x0), bundle, params).x
    golden = np.array(
        [
            [-0.3473828393775458, -0.1603411238727743, 0.6737755799488487, 0.29212997992926715],
            [-0.41866679159588044, -0.3086526388381765, 0.49030106922545025, 0.3320667935107056],
            [-0.381271677020055, -0.26257772132974805, 0.5495999978325594, 0.2925838657929616],
            [-0.38361623964484964, -0.34481193109625485, 0.4715261244678642, 0.2902069521521371],
        ]
    )
    assert np.isfinite(out).all()
    assert np.abs(out - golden).max() <= 1e-12


def test_sab_permutation_equivariance():
    n = 4
    g = random_graph(n, 0.5, seed=21)
    bundle = build_product_bundle(g)
    rng = SplitMix64(22)
    params = SABParams.from_rng(4, 4, rng)
    x = random_state(n * n, 4, seed=23)
    out = sab_forward(ProductState(n=n, x=x), bundle, params).x
    from prodgraph import permute_graph, random_permutation

    perm = random_permutation(n, seed=24)
    pp = TupleIndexing(n, 2).product_permutation(perm)
    bundle_p = build_product_bundle(permute_graph(g, perm))
    x_p = np.empty_like(x)
    x_p[pp] = x
    out_p = sab_forward(ProductState(n=n, x=x_p), bundle_p, params).x
    expected = np.empty_like(out)
    expected[pp] = out
    assert np.abs(out_p - expected).max() <= 1e-10


# --- pooling ----------------------------------------------------------------


def test_pool_zero_state():
    mlp = MLPParams.from_rng(4, 4, 4, SplitMix64(31))
    x = np.zeros((4, 4))
    out = pool(ProductState(n=2, x=x), "sum_sum", mlp)
    h = np.maximum(mlp.b1, 0.0)
    assert np.abs(out - (h @ mlp.w2 + mlp.b2)).max() <= 1e-15


def test_pool_variants_differ_by_factor_n():
    n = 3
    x = np.ones((9, 4))
    mlp = identity_mlp(4)
    s = pool(ProductState(n=n, x=x), "sum_sum", mlp)
    m = pool(ProductState(n=n, x=x), "mean_sum", mlp)
    assert np.abs(s - n * m).max() <= 1e-12


def test_pool_rejects_unknown_variant():
    mlp = identity_mlp(4)
    with pytest.raises(ShapeMismatch):
        pool(ProductState(n=2, x=np.zeros((4, 4))), "max", mlp)


# --- RGCN -------------------------------------------------------------------


def test_rgcn_identity():
    bundle = build_product_bundle(K3)
    x = random_state(9, 4, seed=41)
    params = RGCNParams(
        w_self=np.eye(4), w_internal=np.zeros((4, 4)),
        w_external=np.zeros((4, 4)), w_point=np.zeros((4, 4)),
    )
    out = rgcn_layer(ProductState(n=3, x=x), bundle, params).x
    assert np.array_equal(out, x)


def test_rgcn_block_weights_concatenate():
    n = 3
    g = random_graph(n, 0.6, seed=42)
    bundle = build_product_bundle(g)
    d = 4
    x = random_state(n * n, d, seed=43)
    eye = np.eye(d)
    zeros = np.zeros((d, d))
    params = RGCNParams(
        w_self=np.hstack([eye, zeros, zeros, zeros]),
        w_point=np.hstack([zeros, eye, zeros, zeros]),
        w_internal=np.hstack([zeros, zeros, eye, zeros]),
        w_external=np.hstack([zeros, zeros, zeros, eye]),
    )
    out = rgcn_layer(ProductState(n=n, x=x), bundle, params).x
    expected = np.hstack(
        [x, bundle.point.matmul(x), bundle.internal.matmul(x), bundle.external.matmul(x)]
    )
    assert np.abs(out - expected).max() == 0.0


def test_rgcn_matches_dense_oracle():
    for seed in range(10):
        n = 2 + seed % 4
        g = random_graph(n, 0.5, seed=seed + 60)
        bundle = build_product_bundle(g)
        params = RGCNParams.from_rng(5, 7, SplitMix64(seed))
        x = random_state(n * n, 5, seed=seed + 70)
        out = rgcn_layer(ProductState(n=n, x=x), bundle, params).x
        dense = dense_rgcn_oracle(
            x,
            bundle.internal.to_dense(),
            bundle.external.to_dense(),
            bundle.point.to_dense(),
            params,
        )
        assert np.abs(out - dense).max() <= 1e-12


# --- gradient checking ------------------------------------------------------


def make_pipeline(g, seed, d=4, layers=1, variant="sum_sum"):
    bundle = build_product_bundle(g)
    rng = SplitMix64(seed)
    layer_params = [SABParams.from_rng(d, d, rng) for _ in range(layers)]
    pool_mlp = MLPParams.from_rng(d, d, d, rng)
    pipe = Pipeline(
        bundle.internal, bundle.external, bundle.point, g.n, layer_params, pool_mlp, variant
    )
    x0 = random_state(g.n * g.n, d, seed=seed + 1000)
    return pipe, x0


def test_grad_check_linear_pipeline_is_exact():
    # no SAB layers; pool MLP with ReLU forced active is affine per parameter
    bundle = build_product_bundle(P2)
    mlp = MLPParams.from_rng(4, 4, 4, SplitMix64(51))
    mlp.b1[...] = 10.0  # pre-activations strictly positive for this state
    pipe = Pipeline(bundle.internal, bundle.external, bundle.point, 2, [], mlp, "sum_sum")
    x0 = random_state(4, 4, seed=52)
    report = grad_check(pipe, x0)
    assert report.passed
    assert report.max_rel_error <= 1e-9


def test_grad_check_full_sab_on_p2():
    pipe, x0 = make_pipeline(P2, seed=0, layers=2)
    report = grad_check(pipe, x0)
    assert report.passed
    assert report.max_rel_error <= 1e-4


def test_grad_check_flags_corrupted_gradient():
    pipe, x0 = make_pipeline(P2, seed=1)
    original = pipe.loss_and_grads

    def corrupted(x):
        loss, grads, dx = original(x)
        grads["layers.0.fuse_mlp.w2"] = grads["layers.0.fuse_mlp.w2"] * 2.0
        return loss, grads, dx

    pipe.loss_and_grads = corrupted
    report = grad_check(pipe, x0)
    assert not report.passed
    assert report.worst_parameter == "layers.0.fuse_mlp.w2"


def test_grad_check_seeds_and_graphs():
    for g in (P2, path_graph(4), K3):
        for seed in range(2):
            pipe, x0 = make_pipeline(g, seed)
            assert grad_check(pipe, x0).passed


def test_grad_check_rejects_non_finite_gradient():
    from prodgraph import NonFiniteGradient

    pipe, x0 = make_pipeline(P2, seed=2)
    original = pipe.loss_and_grads

    def poisoned(x):
        loss, grads, dx = original(x)
        grads["pool_mlp.w1"] = grads["pool_mlp.w1"] * np.nan
        return loss, grads, dx

    pipe.loss_and_grads = poisoned
    with pytest.raises(NonFiniteGradient):
        grad_check(pipe, x0)


# --- init state -------------------------------------------------------------


def test_init_state_zero_weights():
    g = P2
    pe = product_pe(g, 2)
    marks = node_mark_indices(g)
    mark_table = np.zeros((3, 4))
    encoder = EncoderParams(weight=np.zeros((1 + 2 + 4, 4)), bias=np.zeros(4))
    state = init_state(g, pe, marks, mark_table, encoder)
    assert not state.x.any()


def test_init_state_composes_parts():
    # encoder that writes [feat, pe, mark-embedding] straight through
    g = P2
    pe = product_pe(g, 1)
    marks = node_mark_indices(g)
    mark_table = np.arange(3.0)[:, None]  # 1-wide embedding = the mark index
    width = 1 + 1 + 1
    encoder = EncoderParams(weight=np.eye(width), bias=np.zeros(width))
    state = init_state(g, pe, marks, mark_table, encoder)
    for s in range(2):
        for v in range(2):
            row = state.x[s * 2 + v]
            assert row[0] == 1.0  # constant feature stand-in
            assert row[1] == pytest.approx(0.5)  # constant eigenvector entry
            assert row[2] == float(marks.marks[s, v])


def test_init_state_feature_rows_indexed_by_node():
    g = random_graph(3, 0.5, seed=71, with_features=2)
    pe = product_pe(g, 2)
    marks = node_mark_indices(g)
    mark_table = np.zeros((4, 1))
    width = 2 + 2 + 1
    encoder = EncoderParams(weight=np.eye(width), bias=np.zeros(width))
    state = init_state(g, pe, marks, mark_table, encoder)
    for s in range(3):
        for v in range(3):
            assert np.array_equal(state.x[s * 3 + v, :2], g.features[v])


def test_init_state_equivariance_given_permuted_inputs():
    from prodgraph import permute_graph, random_permutation

    n = 4
    g = random_graph(n, 0.5, seed=72, with_features=2)
    pe = product_pe(g, 3)
    marks = node_mark_indices(g)
    rng = SplitMix64(73)
    mark_table = _uniform_array(rng, (n + 1, 3), n + 1)
    encoder = EncoderParams.from_rng(2 + 3 + 3, 5, rng)
    state = init_state(g, pe, marks, mark_table, encoder)
    perm = random_permutation(n, seed=74)
    pp = TupleIndexing(n, 2).product_permutation(perm)
    gp = permute_graph(g, perm)
    pe_rows = np.empty_like(pe.data)
    pe_rows[pp] = pe.data
    from prodgraph.spectral import PEMatrix

    pe_p = PEMatrix(rows=pe.rows, k=pe.k, data=pe_rows, eigenvalues=pe.eigenvalues)
    state_p = init_state(gp, pe_p, node_mark_indices(gp), mark_table, encoder)
    expected = np.empty_like(state.x)
    expected[pp] = state.x
    assert np.abs(state_p.x - expected).max() <= 1e-12


def test_init_state_shape_mismatch():
    g = P2
    pe = product_pe(g, 2)
    marks = node_mark_indices(g)
    with pytest.raises(ShapeMismatch):
        init_state(g, pe, marks, np.zeros((3, 4)), EncoderParams(np.zeros((5, 4)), np.zeros(4)))
    big_pe = product_pe(path_graph(3), 2)
    with pytest.raises(ShapeMismatch):
        init_state(g, big_pe, marks, np.zeros((3, 4)), EncoderParams(np.zeros((7, 4)), np.zeros(4)))


def test_product_state_validation():
    with pytest.raises(ShapeMismatch):
        ProductState(n=2, x=np.zeros((3, 4)))
    with pytest.raises(ShapeMismatch):
        ProductState(n=2, x=np.full((4, 2), np.nan))


# --- parameter container ----------------------------------------------------


def test_parameter_container_roundtrip():
    rng = SplitMix64(81)
    params = SABParams.from_rng(4, 8, rng)
    named = params.named("sab")
    buf = io.BytesIO()
    save_parameters(buf, named)
    buf.seek(0)
    loaded = load_parameters(buf)
    assert set(loaded) == {name for name, _ in named}
    for name, arr in named:
        assert np.array_equal(loaded[name], arr)


def test_parameter_container_load_into():
    from prodgraph.model import load_into

    rng = SplitMix64(82)
    a = SABParams.from_rng(4, 4, rng)
    b = SABParams.from_rng(4, 4, SplitMix64(83))
    buf = io.BytesIO()
    save_parameters(buf, a.named("p"))
    buf.seek(0)
    load_into(b.named("p"), load_parameters(buf))
    for (_, x), (_, y) in zip(a.named("p"), b.named("p")):
        assert np.array_equal(x, y)


# --- end-to-end forward -----------------------------------------------------


def test_run_forward_deterministic():
    g = random_graph(5, 0.5, seed=91)
    cfg = ForwardConfig(k=3, seed=7, layers=2, d=8, heads=4)
    a = run_forward(g, cfg)
    b = run_forward(g, cfg)
    assert np.array_equal(a, b)


def test_run_forward_full_ratio_matches_unsampled_bitwise():
    g = random_graph(5, 0.5, seed=92)
    base = run_forward(g, ForwardConfig(k=3, seed=1))
    full = run_forward(g, ForwardConfig(k=3, seed=1, sample_ratio=1.0, sample_seed=99))
    assert np.array_equal(base, full)


def test_run_forward_sampling_is_seeded():
    g = random_graph(6, 0.5, seed=93)
    a = run_forward(g, ForwardConfig(k=3, seed=1, sample_ratio=0.5, sample_seed=5))
    b = run_forward(g, ForwardConfig(k=3, seed=1, sample_ratio=0.5, sample_seed=5))
    c = run_forward(g, ForwardConfig(k=3, seed=1, sample_ratio=0.5, sample_seed=6))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_build_forward_model_rejects_bad_heads():
    with pytest.raises(ShapeMismatch):
        build_forward_model(P2, ForwardConfig(d=6, heads=4))
