import csv
import io
import json
import os
import subprocess
import sys

import pytest

from geneaperc.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().out


def summary(path):
    return json.loads((path / "summary.json").read_text())


def test_simulate_bgw_deterministic(tmp_path, capsys):
    args = ["simulate", "--seed", 7, "--set", "model=bgw", "--set", "depth=4"]
    assert run(capsys, *args, "--out", tmp_path / "a")[0] == 0
    assert run(capsys, *args, "--out", tmp_path / "b")[0] == 0
    for name in ("tree.txt", "tree.dot", "summary.json", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["command"] == "simulate" and man["seed"] == 7 and "tree.txt" in man["outputs"]
    assert summary(tmp_path / "a")["height"] <= 4


def test_simulate_infinite_alleles_all_mutants(tmp_path, capsys):
    code, out = run(capsys, "simulate", "--out", tmp_path, "--set", "model=infinite-alleles", "--set", "r=1", "--set", "depth=5")
    s = summary(tmp_path)
    assert code == 0 and s["alleleCount"] == s["vertices"]
    assert json.loads(out)["alleleCount"] == s["vertices"]


def test_simulate_dac_full_retention(tmp_path, capsys):
    code, _ = run(capsys, "simulate", "--out", tmp_path, "--set", "model=dac", "--set", "p=1", "--set", "d=3")
    s = summary(tmp_path)
    assert code == 0 and s["colorClasses"] == 1 and s["rootComponentSize"] == s["vertices"]


@pytest.mark.parametrize("model, extra", [("percolation", ["p=0.5"]), ("restricted-dac", ["p=0.3", "d=3"]), ("mim", ["r=0.4", "d=2"]), ("mdm", ["r=0.4", "d=3"])])
def test_simulate_models(tmp_path, capsys, model, extra):
    sets = [x for kv in [f"model={model}", *extra] for x in ("--set", kv)]
    assert run(capsys, "simulate", "--out", tmp_path, "--seed", 1, *sets)[0] == 0
    assert summary(tmp_path)["model"] == model


def test_simulate_tree_from_file(tmp_path, capsys):
    (tmp_path / "t.txt").write_text("∅\t2\n1\t0\n2\t0\n")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "percolation", "p": 1, "tree": {"type": "file", "path": str(tmp_path / "t.txt")}}))
    assert run(capsys, "simulate", "--config", cfg, "--out", tmp_path / "o")[0] == 0
    assert summary(tmp_path / "o")["rootClusterSize"] == 3


def test_sweep_rows(tmp_path, capsys):
    code, out = run(capsys, "sweep", "--out", tmp_path, "--set", "replicates=200", "--set", "depth=10")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [float(r["param"]) for r in rows] == pytest.approx([0.1 * i for i in range(1, 10)])
    plot = (tmp_path / "plot-data.csv").read_text().splitlines()
    assert plot[0] == "x,y,ciLow,ciHigh" and len(plot) == 10


def test_sweep_workers_byte_identical(tmp_path, capsys):
    base = ["sweep", "--seed", 11, "--set", "replicates=500", "--set", "depth=12", "--set", "chunk_size=50"]
    outs = []
    for w in (1, 4, 8):
        assert run(capsys, *base, "--workers", w, "--out", tmp_path / str(w))[0] == 0
        outs.append((tmp_path / str(w) / "estimates.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_estimate_with_bracket(tmp_path, capsys):
    code, out = run(capsys, "estimate", "--out", tmp_path, "--set", "grid=[0.4,0.6]", "--set", "replicates=3000", "--set", "locate=true")
    assert code == 0
    br = json.loads((tmp_path / "bracket.json").read_text())
    assert br["status"] == "ok" and br["low"] <= 0.5 <= br["high"]
    assert out.splitlines()[1].startswith("param,")


def test_oracle_default_table(tmp_path, capsys):
    code, out = run(capsys, "oracle", "--out", tmp_path)
    assert code == 0
    assert out.splitlines()[1:] == ["1,1,4", "2,1,2", "3,1,4"]
    assert json.loads((tmp_path / "law.json").read_text()) == {"1": "0.25", "2": "0.5", "3": "0.25"}


def test_oracle_other_kinds(tmp_path, capsys):
    code, out = run(capsys, "oracle", "--out", tmp_path, "--set", "kind=bgw-truncated", "--set", "depth=1", "--set", 'law={"type":"binomial","n":2,"p":"1/2"}')
    assert code == 0 and '"2,0,0",1,4' in out
    code, out = run(
        capsys, "oracle", "--out", tmp_path, "--set", "kind=coloring", "--set", "model=dac",
        "--set", 'params={"p":"1/2","colors":["1/2","1/2"]}', "--set", "observable=root_component_size",
    )
    assert code == 0 and out.splitlines()[1:]
    with pytest.raises(SystemExit) as e:
        main(["oracle", "--out", str(tmp_path), "--set", "kind=nope"])
    assert e.value.code == 2


def test_export_dot_and_plot(tmp_path, capsys):
    pydot = pytest.importorskip("pydot")
    run(capsys, "simulate", "--out", tmp_path / "sim", "--set", "model=dac", "--set", "p=0.5", "--set", "depth=4")
    run(capsys, "sweep", "--out", tmp_path / "sw", "--set", "replicates=100", "--set", "depth=8", "--set", "num=3")
    code, out = run(capsys, "export", "--out", tmp_path / "ex", tmp_path / "sim", tmp_path / "sw")
    assert code == 0
    graphs = pydot.graph_from_dot_data((tmp_path / "ex" / "sim.dot").read_text())
    n = summary(tmp_path / "sim")["vertices"]
    assert len(graphs[0].get_nodes()) == n and len(graphs[0].get_edges()) == n - 1
    assert len((tmp_path / "ex" / "sw-plot-data.csv").read_text().splitlines()) == 4


def test_export_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["export", "--out", str(tmp_path)])
    assert e.value.code == 2
    assert main(["export", "--out", str(tmp_path), str(tmp_path / "missing")]) == 3


def test_verify_suites(tmp_path, capsys):
    code, out = run(capsys, "verify", "--out", tmp_path, "--suite", "correspondences,extinction", "--suite", "cluster-shape")
    assert code == 0
    assert out.count("PASS") >= 16 and "FAIL" not in out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"]


def test_verify_usage_errors(tmp_path):
    for argv in (["verify"], ["verify", "--suite", ""], ["verify", "--suite", "nonsense"]):
        with pytest.raises(SystemExit) as e:
            main([*argv, "--out", str(tmp_path)])
        assert e.value.code == 2


def test_verify_failure_exit_code(tmp_path, capsys):
    # an unreachable tolerance makes the bracket check fail
    code, out = run(capsys, "verify", "--out", tmp_path, "--suite", "bond-threshold", "--set", "replicates=200", "--set", "tol=0.001")
    assert code == 1 and "FAIL" in out


def test_bad_config_exit_code(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["simulate", "--config", str(tmp_path / "none.toml"), "--out", str(tmp_path)])
    assert e.value.code == 2
    assert main(["simulate", "--out", str(tmp_path), "--set", "model=percolation", "--set", "p=3"]) == 2
    with pytest.raises(SystemExit):
        main(["simulate", "--out", str(tmp_path), "--workers", "0"])


def test_env_override(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GENEAPERC_MODEL", "infinite-alleles")
    monkeypatch.setenv("GENEAPERC_R", "1")
    assert run(capsys, "simulate", "--out", tmp_path)[0] == 0
    assert "alleleCount" in summary(tmp_path)


def test_module_entry_point(tmp_path):
    env = {**os.environ, "GENEAPERC_DISABLE_JIT": "1"}
    res = subprocess.run([sys.executable, "-m", "geneaperc", "oracle", "--out", str(tmp_path)], capture_output=True, text=True, env=env)
    assert res.returncode == 0 and "2,1,2" in res.stdout
