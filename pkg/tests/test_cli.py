import csv
import json

import numpy as np
import pytest

from netsde.cli import main
from netsde.network import read_network, read_rate_columns


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def er_file(tmp_path):
    p = tmp_path / "er.txt"
    assert main(["generate", "--family", "er", "--n", "60", "--seed", "7", "--out", str(p)]) == 0
    return p


def test_generate_edge_count(tmp_path):
    p = tmp_path / "er.txt"
    assert main(["generate", "--family", "er", "--n", "200", "--kappa", "1", "--seed", "7", "--out", str(p)]) == 0
    assert read_network(p).m == 530
    prov = json.loads((tmp_path / "er.txt.json").read_text())
    assert prov["config"]["seed"] == 7


def test_generate_small_world_and_rate_columns(tmp_path):
    p = tmp_path / "sw.txt"
    assert main(["generate", "--family", "sw", "--n", "200", "--p", "0.2", "--shape", "2", "--out", str(p)]) == 0
    net, shape, cap = read_rate_columns(p)
    assert net.n == 200 and np.all(shape == 2.0)


def test_generate_missing_n_is_usage_error(tmp_path, capsys):
    assert main(["generate", "--family", "er", "--out", str(tmp_path / "x.txt")]) == 2


def test_generate_invalid_config_is_usage_error(tmp_path):
    assert main(["generate", "--family", "sw", "--n", "6", "--kappa", "3", "--out", str(tmp_path / "x")]) == 2


def test_predict_outputs(er_file, tmp_path):
    out = tmp_path / "p"
    args = ["predict", "--network", str(er_file), "--method", "sde-euler", "--T", "1", "--h", "0.1",
            "--L", "100", "--out", str(out), "--plot"]
    assert main(args) == 0
    inf = rows(out / "influence.csv")
    assert inf[0] == ["t", "mu", "se"] and len(inf) == 12
    marg = rows(out / "marginals.csv")
    assert marg[0] == ["t", "node", "prob"] and len(marg) == 1 + 11 * 60
    assert (out / "plot.svg").read_text().startswith("<svg")
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["config"]["method"] == "sde-euler" and prov["resolved_seed"] == 0
    first = (out / "marginals.csv").read_text()
    assert main(args + ["--threads", "3"]) == 0
    assert (out / "marginals.csv").read_text() == first


def test_predict_generated_network(tmp_path):
    out = tmp_path / "p"
    assert main(["predict", "--family", "sf", "--n", "30", "--method", "meanfield", "--T", "1", "--h", "0.1",
                 "--out", str(out)]) == 0
    assert len(rows(out / "influence.csv")) == 12


def test_predict_incompatible_model(er_file, tmp_path):
    code = main(["predict", "--network", str(er_file), "--method", "meanfield", "--rate-model", "weibull",
                 "--out", str(tmp_path / "p")])
    assert code == 3


def test_predict_io_errors(tmp_path):
    assert main(["predict", "--network", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "p")]) == 4
    bad = tmp_path / "bad.txt"
    bad.write_text("3 2\n0 1 1.0\n")
    assert main(["predict", "--network", str(bad), "--out", str(tmp_path / "p")]) == 4


def test_predict_usage_errors(er_file, tmp_path):
    assert main(["predict", "--out", str(tmp_path / "p")]) == 2
    assert main(["predict", "--network", str(er_file), "--h", "0.3", "--T", "1", "--out", str(tmp_path / "p")]) == 2
    assert main(["predict", "--network", str(er_file), "--method", "nope", "--out", str(tmp_path / "p")]) == 2


def test_compare_with_oracle(er_file, tmp_path):
    out = tmp_path / "c"
    assert main(["compare", "--network", str(er_file), "--methods", "sde-euler,meanfield,mc-oracle", "--T", "1",
                 "--h", "0.1", "--L", "200", "--truth-L", "500", "--out", str(out)]) == 0
    r = rows(out / "errors.csv")
    assert r[0] == ["t", "method", "rel_influence_err", "rel_marginal_err"]
    assert len(r) == 1 + 3 * 11
    assert all(float(x[2]) == 0 for x in r[1:] if x[1] == "mc-oracle")


def test_compare_with_truth_file(er_file, tmp_path):
    p = tmp_path / "p"
    base = ["--network", str(er_file), "--T", "1", "--h", "0.1", "--L", "100"]
    assert main(["predict", "--method", "sde-euler", *base, "--out", str(p)]) == 0
    out = tmp_path / "c"
    assert main(["compare", "--methods", "sde-euler", "--truth", str(p / "marginals.csv"), *base,
                 "--out", str(out)]) == 0
    assert all(float(x[2]) == 0 for x in rows(out / "errors.csv")[1:])


def test_compare_requires_truth(er_file, tmp_path):
    assert main(["compare", "--network", str(er_file), "--methods", "sde-euler", "--out", str(tmp_path / "c")]) == 2


def test_experiment_unknown_name(tmp_path):
    assert main(["experiment", "weibo", "--out", str(tmp_path / "e")]) == 2


@pytest.mark.parametrize("name", ["basic-si", "convergence"])
def test_experiment_quick(name, tmp_path):
    out = tmp_path / name
    assert main(["experiment", name, "--quick", "--out", str(out)]) == 0
    assert (out / "summary.txt").exists() and (out / "provenance.json").exists()
