import json

import numpy as np
import pytest
from click.testing import CliRunner

from nsgfb import io as nio
from nsgfb.cli import main
from nsgfb.exceptions import ParseError
from nsgfb.graph import coordinates_path, write_coordinates, write_edge_list


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def graph_file(tmp_path, rgg64):
    f = tmp_path / "g.edges"
    write_edge_list(rgg64, f)
    write_coordinates(rgg64, coordinates_path(f))
    return f


def invoke(runner, args):
    res = runner.invoke(main, [str(a) for a in args])
    assert res.exit_code == 0, res.output
    return res.output


def test_bank_roundtrip(tmp_path):
    for prov in ("bezout", "lifted-bezout", "least-squares"):
        spec = nio.BankSpec.spline(2, prov)
        f = tmp_path / f"{prov}.json"
        nio.write_bank(spec, f)
        back = nio.read_bank(f)
        assert back.provenance == prov and back.order == 2
        assert np.allclose(back.p1.coef, [0, 0, 0.25])
        if prov == "least-squares":
            assert back.q0 is None
        else:
            assert np.allclose(back.q0.coef, spec.q0.coef)


def test_bank_parse_errors(tmp_path):
    f = tmp_path / "b.json"
    f.write_text("{not json")
    with pytest.raises(ParseError):
        nio.read_bank(f)
    f.write_text(json.dumps({"format": "other"}))
    with pytest.raises(ParseError):
        nio.read_bank(f)
    f.write_text(json.dumps({"format": "nsgfb-bank", "analysis": {"p0": [1]},
                             "synthesis": {"provenance": "bezout"}}))
    with pytest.raises(ParseError):
        nio.read_bank(f)


def test_bank_without_q_recomputes(tmp_path):
    f = tmp_path / "b.json"
    f.write_text(json.dumps({"format": "nsgfb-bank", "analysis": {"p0": [1, -0.5],
                                                                  "p1": [0, 0.5]},
                             "synthesis": {"provenance": "bezout"}}))
    spec = nio.read_bank(f)
    assert np.allclose(spec.q0.coef, [1, 0.5])


def test_signal_roundtrip(tmp_path):
    f = tmp_path / "x.csv"
    x = np.array([0.1, -2.0, 1e-17])
    nio.write_signal(x, f, "x")
    assert f.read_text().splitlines()[0] == "vertex,x"
    assert np.array_equal(nio.read_signal(f), x)


def test_signal_plain_and_errors(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("1.5\n2.5\n")
    assert nio.read_signal(f).tolist() == [1.5, 2.5]
    f.write_text("vertex,value\n0,1\n2,3\n")
    with pytest.raises(ParseError):
        nio.read_signal(f)
    f.write_text("0,1\n1,abc\n")
    with pytest.raises(ParseError):
        nio.read_signal(f)


def test_labels(tmp_path):
    f = tmp_path / "l.csv"
    f.write_text("vertex,label\n0,3\n1,7\n2,3\n")
    assert nio.read_labels(f).tolist() == [3, 7, 3]
    f.write_text("0,north\n1,south\n")
    assert nio.read_labels(f).tolist() == ["north", "south"]


def test_cli_graph_gen_and_stats(runner, tmp_path):
    out = tmp_path / "g.edges"
    text = invoke(runner, ["graph", "gen", "--n", 64, "--seed", 7, "--connect", "resample",
                           "--out", out])
    assert text.startswith("N=64")
    assert coordinates_path(out).exists()
    stats = invoke(runner, ["graph", "stats", out])
    assert "vertices 64" in stats and "density" in stats


def test_cli_graph_gen_failure(runner, tmp_path):
    res = runner.invoke(main, ["graph", "gen", "--n", "4096", "--max-retries", "1",
                               "--out", str(tmp_path / "g.edges")])
    assert res.exit_code != 0
    assert "RetriesExhausted" in res.output


def test_cli_spectral_eig(runner, tmp_path, graph_file):
    out = tmp_path / "freq.csv"
    invoke(runner, ["spectral", "eig", graph_file, "--out", out])
    rows = out.read_text().splitlines()
    assert rows[0] == "lambda,P0,P1,Q0,Q1"
    assert len(rows) == 65
    lam, p0, p1, q0, q1 = map(float, rows[-1].split(","))
    assert p0 * q0 + p1 * q1 == pytest.approx(1.0)


def test_cli_bank_and_check(runner, tmp_path, graph_file):
    bank = tmp_path / "b.json"
    invoke(runner, ["bank", "spline", graph_file, "--n", 2, "--out", bank])
    out = invoke(runner, ["bank", "check", bank, graph_file])
    vals = dict(line.split(" ", 1) for line in out.splitlines())
    assert float(vals["c2"]) >= 2 ** -1.5 - 1e-9
    assert float(vals["pr_residual"]) < 1e-9
    poly = tmp_path / "p.json"
    invoke(runner, ["bank", "poly", "--p0", "1,-0.6,0.1", "--p1", "0,0.4,0.05", "--out", poly])
    out = invoke(runner, ["bank", "check", poly, graph_file])
    assert float(out.split("pr_residual ")[1]) < 1e-8


def test_cli_ls_certify_and_delta(runner, tmp_path, graph_file):
    bank = tmp_path / "b.json"
    invoke(runner, ["bank", "spline", "--n", 1, "--synthesis", "least-squares", "--out", bank])
    out = tmp_path / "decay.csv"
    text = invoke(runner, ["ls", "certify", bank, graph_file, "--out", out])
    assert "violations 0" in text
    assert out.read_text().startswith("filter,i,j,rho,abs_g,bound")
    delta = invoke(runner, ["ls", "delta", "--r", 4, "--sigma", 1, "--kappa", 2, "--d1", 3.08,
                            "--dim", 2])
    assert float(delta) == pytest.approx(19209.96, rel=1e-12)


def test_cli_reconstruct(runner, tmp_path, graph_file, rgg64, rng):
    bank = tmp_path / "b.json"
    invoke(runner, ["bank", "spline", "--n", 1, "--out", bank])
    x = rng.uniform(-1, 1, 64)
    h = nio.read_bank(bank).analysis(rgg64)
    z0, z1 = h.analyze(x)
    for name, v in (("x", x), ("z0", z0), ("z1", z1)):
        nio.write_signal(v, tmp_path / f"{name}.csv", name)
    trace = tmp_path / "trace.csv"
    xo = tmp_path / "xr.csv"
    text = invoke(runner, ["reconstruct", graph_file, bank, "--r", 2, "--z0", tmp_path / "z0.csv",
                           "--z1", tmp_path / "z1.csv", "--oracle", tmp_path / "x.csv",
                           "--out", trace, "--x-out", xo, "--max-iter", 500])
    assert "converged True" in text
    assert np.abs(nio.read_signal(xo) - x).max() < 1e-8
    assert trace.read_text().startswith("iter,rel_err_inf,rel_err_2,update_inf,msgs")


def test_cli_denoise(runner, tmp_path, graph_file):
    x = tmp_path / "x.csv"
    nio.write_signal(np.linspace(0, 1, 64), x)
    out = tmp_path / "d.csv"
    invoke(runner, ["denoise", graph_file, "--input", x, "--eta", 0.1, "--bank", "L",
                    "--out", out])
    assert len(nio.read_signal(out)) == 64
    res = runner.invoke(main, ["denoise", str(graph_file), "--input", str(x), "--out", str(out)])
    assert res.exit_code != 0


def test_cli_table_deterministic(runner, tmp_path, graph_file):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"etas": [0.25, 1.0], "banks": ["B1", "L1"], "trials": 2}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        invoke(runner, ["table", "--which", 5, "--config", cfg, "--graph", graph_file,
                        "--seed", 3, "--out", out, "--text", tmp_path / "t.txt"])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "eta,input,NSGFB-B1,NSGFB-L1"


def test_cli_table_needs_labels_for_real_graph(runner, tmp_path, graph_file):
    labels = tmp_path / "labels.csv"
    labels.write_text("vertex,label\n" + "".join(f"{i},{i % 3}\n" for i in range(64)))
    out = tmp_path / "t4.csv"
    invoke(runner, ["table", "--which", 4, "--graph", graph_file, "--labels", labels,
                    "--trials", 2, "--out", out])
    assert len(out.read_text().splitlines()) == 7
