import subprocess
import sys

import numpy as np
import pytest

from prodgraph import SparseAdjacency
from prodgraph.cli import main
from prodgraph.spectral import PEMatrix

P2_JSON = '{"n":2,"edges":[[0,1]]}'


@pytest.fixture()
def p2_file(tmp_path):
    path = tmp_path / "p2.json"
    path.write_text(P2_JSON)
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_build_product_k2(p2_file, tmp_path, capsys):
    out = tmp_path / "adj"
    code, _, _ = run_cli(capsys, "build-product", p2_file, "--out", str(out))
    assert code == 0
    for name, nnz in (("internal.coo", 4), ("external.coo", 4), ("point.coo", 4)):
        adj = SparseAdjacency.from_coo_text((out / name).read_text())
        assert adj.nnz == nnz
        assert (adj.rows, adj.cols) == (4, 4)


def test_build_product_k3_writes_four_files(p2_file, tmp_path, capsys):
    out = tmp_path / "adj3"
    code, _, _ = run_cli(capsys, "build-product", p2_file, "--tuple-order", "3", "--out", str(out))
    assert code == 0
    files = sorted(p.name for p in out.iterdir())
    assert files == ["slot0.coo", "slot1.coo", "slot2.coo", "union.coo"]
    union = SparseAdjacency.from_coo_text((out / "union.coo").read_text())
    assert union.nnz == 24  # the 3-cube


def test_build_product_k3_optional_point_files(p2_file, tmp_path, capsys):
    out = tmp_path / "adj3p"
    code, _, _ = run_cli(
        capsys, "build-product", p2_file, "--tuple-order", "3", "--out", str(out),
        "--include-point",
    )
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["point1.coo", "point2.coo", "point3.coo",
                     "slot0.coo", "slot1.coo", "slot2.coo", "union.coo"]
    for i in (1, 2, 3):
        pt = SparseAdjacency.from_coo_text((out / f"point{i}.coo").read_text())
        assert pt.nnz == 4  # n^2 entries


def test_build_product_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    code, _, err = run_cli(capsys, "build-product", str(bad), "--out", str(tmp_path / "x"))
    assert code == 2
    assert "ParseError" in err


def test_build_product_scale_guard(tmp_path, capsys):
    import json

    big = tmp_path / "big.json"
    big.write_text(json.dumps({"n": 9, "edges": [[0, 1]]}))
    code, _, err = run_cli(capsys, "build-product", str(big), "--tuple-order", "4",
                           "--out", str(tmp_path / "y"))
    assert code == 2
    assert "ScaleError" in err


def test_pe_product_labels(p2_file, tmp_path, capsys):
    out = tmp_path / "pe.txt"
    code, stdout, _ = run_cli(capsys, "pe", p2_file, "--k", "4", "--variant", "product",
                              "--out", str(out))
    assert code == 0
    assert stdout.splitlines()[-1] == "0 2 2 4"
    pe = PEMatrix.from_text(out.read_text())
    assert pe.rows == 4 and pe.k == 4


def test_pe_concat_shape(p2_file, capsys):
    code, stdout, _ = run_cli(capsys, "pe", p2_file, "--k", "2", "--variant", "concat")
    assert code == 0
    assert len(stdout.split()) == 4  # 2k labels


def test_pe_tuple_variant(p2_file, capsys):
    code, stdout, _ = run_cli(capsys, "pe", p2_file, "--k", "8", "--variant", "tuple:3")
    assert code == 0
    assert stdout.split() == ["0", "2", "2", "2", "4", "4", "4", "6"]


def test_pe_k_zero_is_input_error(p2_file, capsys):
    code, _, err = run_cli(capsys, "pe", p2_file, "--k", "0")
    assert code == 2
    assert "RangeError" in err


def test_mark_output(p2_file, capsys):
    code, stdout, _ = run_cli(capsys, "mark", p2_file)
    assert code == 0
    assert stdout.splitlines() == ["2 3", "0 1", "1 0"]


def test_forward_deterministic_and_golden(p2_file, capsys):
    args = ["forward", p2_file, "--k", "4", "--seed", "7", "--layers", "2"]
    code, out1, _ = run_cli(capsys, *args)
    assert code == 0
    code, out2, _ = run_cli(capsys, *args)
    assert out1 == out2  # byte-identical stdout for identical flags
    golden = np.array(
        [0.30116298190044843, 0.3676151750339528, 0.49567302214650349,
         0.37884628416192034, 0.086584872491644566, 0.19000755773772909,
         0.13867774728062007, 0.48568039882196862]
    )  # pinned reference run
    got = np.array([float(x) for x in out1.split()])
    assert np.abs(got - golden).max() <= 1e-12


def test_forward_sample_ratio_one_matches_unsampled(p2_file, capsys):
    base = ["forward", p2_file, "--k", "4", "--seed", "3"]
    code, out1, _ = run_cli(capsys, *base)
    code, out2, _ = run_cli(capsys, *base, "--sample-ratio", "1.0")
    assert out1 == out2


def test_forward_param_container_roundtrip(p2_file, tmp_path, capsys):
    container = tmp_path / "params.bin"
    args = ["forward", p2_file, "--k", "4", "--seed", "9"]
    _, out1, _ = run_cli(capsys, *args, "--save-params", str(container))
    assert container.exists()
    _, out2, _ = run_cli(capsys, *args, "--load-params", str(container))
    assert out1 == out2


def test_forward_bad_sample_ratio(p2_file, capsys):
    code, _, err = run_cli(capsys, "forward", p2_file, "--sample-ratio", "0.0")
    assert code == 2
    assert "EmptySample" in err
    code, _, err = run_cli(capsys, "forward", p2_file, "--sample-ratio", "1.5")
    assert code == 2
    assert "RangeError" in err


def test_sample_masked_files(p2_file, tmp_path, capsys):
    out = tmp_path / "masked"
    code, stdout, _ = run_cli(capsys, "sample", p2_file, "--ratio", "0.5", "--seed", "3",
                              "--out", str(out))
    assert code == 0
    sampled = {int(x) for x in stdout.splitlines()[0].split()}
    assert len(sampled) == 1
    external = SparseAdjacency.from_coo_text((out / "external.coo").read_text())
    assert external.nnz == 0  # external edges always cross subgraphs
    internal = SparseAdjacency.from_coo_text((out / "internal.coo").read_text())
    s = next(iter(sampled))
    assert internal.entry_set() == {(s * 2, s * 2 + 1), (s * 2 + 1, s * 2)}


def test_sample_is_seed_deterministic(p2_file, capsys):
    _, out1, _ = run_cli(capsys, "sample", p2_file, "--ratio", "0.5", "--seed", "3")
    _, out2, _ = run_cli(capsys, "sample", p2_file, "--ratio", "0.5", "--seed", "3")
    assert out1 == out2


def test_pe_output_independent_of_sampling(p2_file, tmp_path, capsys):
    pe1 = tmp_path / "pe1.txt"
    pe2 = tmp_path / "pe2.txt"
    run_cli(capsys, "pe", p2_file, "--k", "4", "--out", str(pe1))
    run_cli(capsys, "forward", p2_file, "--k", "4", "--sample-ratio", "0.5")
    run_cli(capsys, "pe", p2_file, "--k", "4", "--out", str(pe2))
    assert pe1.read_bytes() == pe2.read_bytes()


def test_missing_file_is_input_error(capsys):
    code, _, err = run_cli(capsys, "mark", "/nonexistent/graph.json")
    assert code == 2


def test_cli_subprocess_byte_determinism(p2_file):
    cmd = [sys.executable, "-m", "prodgraph", "forward", p2_file, "--k", "4", "--seed", "5"]
    a = subprocess.run(cmd, capture_output=True)
    b = subprocess.run(cmd, capture_output=True)
    assert a.returncode == 0
    assert a.stdout == b.stdout


def test_verify_quick_passes(capsys):
    code, stdout, _ = run_cli(capsys, "verify", "--scale", "quick")
    assert code == 0
    lines = [ln for ln in stdout.splitlines() if ln.startswith("[")]
    assert len(lines) == 24
    assert all(ln.startswith("[PASS]") for ln in lines)
