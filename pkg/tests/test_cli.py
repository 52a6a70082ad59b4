import json

import numpy as np
import pytest

from hotspot_meta import cli
from hotspot_meta.errors import NumericError

SMALL = {
    "gen": {"width": 12000, "height": 12000, "rect_count": 60, "motif_rate": 0.1},
    "calib": {"ann": {"epochs": 150}, "meta_folds": 2},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    return str(p)


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_gen_is_deterministic(tmp_path, cfg_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert run("gen", "--seed", 4, "--config", cfg_path, "--out", a) == 0
    assert run("gen", "--seed", 4, "--config", cfg_path, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "# config_sha256=" in a.read_text()


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["gen"], ["gen", "--out", "x", "--threads", "0"],
                                  ["sweep", "--detections", "d", "--labels", "l", "--points", "1", "--out", "o"]])
def test_usage_errors_exit_1(argv, capsys):
    assert cli.main(argv) == 1
    assert "usage error" in capsys.readouterr().err


def test_data_errors_exit_2(tmp_path, capsys):
    assert run("label", "--layout", tmp_path / "missing.txt", "--out", tmp_path / "l.csv") == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"nonsense": 1}')
    assert run("gen", "--config", bad, "--out", tmp_path / "g.txt") == 2
    assert "error" in capsys.readouterr().err


def test_numeric_failure_exit_3(monkeypatch, tmp_path):
    def boom(args, cfg):
        raise NumericError("Q is not positive definite")

    monkeypatch.setitem(cli.COMMANDS, "gen", boom)
    assert run("gen", "--out", tmp_path / "x") == 3


def test_end_to_end_commands(tmp_path, cfg_path):
    lay, lab, smp = tmp_path / "lay.txt", tmp_path / "lab.csv", tmp_path / "smp.csv"
    model, det = tmp_path / "m.epic", tmp_path / "det.csv"
    common = ["--seed", 2, "--config", cfg_path]
    assert run("gen", *common, "--out", lay) == 0
    assert run("label", "--layout", lay, *common, "--out", lab) == 0
    assert run("extract", "--layout", lay, "--labels", lab, *common, "--out", smp) == 0
    assert run("calibrate", "--samples", smp, *common, "--out", model) == 0
    assert run("predict", "--model", model, "--layout", lay, *common, "--out", det) == 0
    ids_c, dec_c, sc_c = cli.read_detections(str(model) + ".calib.csv")
    ids_p, dec_p, sc_p = cli.read_detections(det)
    np.testing.assert_array_equal(ids_c, ids_p)
    np.testing.assert_array_equal(dec_c, dec_p)
    np.testing.assert_allclose(sc_c, sc_p, atol=1e-12, rtol=0)
    rep, sw = tmp_path / "rep.csv", tmp_path / "sw.csv"
    assert run("eval", "--detections", det, "--labels", lab, *common, "--out", rep) == 0
    assert run("sweep", "--detections", det, "--labels", lab, "--points", 16, *common, "--out", sw) == 0
    rows = [l for l in sw.read_text().splitlines() if not l.startswith("#")]
    assert rows[0].startswith("theta,hit,extra") and 3 <= len(rows) <= 19


def test_eval_missing_label_is_data_error(tmp_path):
    det = tmp_path / "d.csv"
    det.write_text("fragment_id,t_meta,score\n5,1,0.3\n")
    lab = tmp_path / "l.csv"
    lab.write_text("fragment_id,epe_nm,class,t_litho\n")
    assert run("eval", "--detections", det, "--labels", lab, "--out", tmp_path / "r.csv") == 2


def test_bench_writes_artifacts(tmp_path, cfg_path, capsys):
    out = tmp_path / "bench"
    assert run("bench", "--seed", 1, "--config", cfg_path, "--out", out) == 0
    names = {p.name for p in out.iterdir()}
    for n in ("layout.txt", "labels.csv", "samples.csv", "model.epic", "detections.csv", "split.csv",
              "report_meta.csv", "report_svm.csv", "sweep_meta.csv"):
        assert n in names
    assert "meta: hit" in capsys.readouterr().out
