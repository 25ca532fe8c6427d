import json
import subprocess
import sys

import numpy as np
import pytest

from selgen import cli, store
from selgen.table import ScoreTable


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    data, models = root / "data", root / "models"
    assert run("synth", "scenario", "--seed", 3, "--n-in", 300, "--n-ood", 300, "--shift", 6, "--out-dir", data) == 0
    assert run("fit-gaussian", "--fg", data / "fit_fg", "--bg", data / "fit_bg", "--out", models / "rmd.json") == 0
    assert run("fit-classifier", "--fg", data / "fit_fg", "--bg", data / "fit_bg", "--out", models / "clf.json") == 0
    assert run(
        "score", "--test", data / "test", "--gaussian", models / "rmd.json", "--classifier", models / "clf.json",
        "--knn-train", data / "fit_fg", "--knn-k", 10, "--threads", 2, "--out", root / "scores.csv",
    ) == 0
    assert run("combine", "--scores", root / "scores.csv", "--quality", "quality", "--out", root / "combined.csv") == 0
    return root


def test_scenario_files(pipeline):
    for split in ("fit_fg", "fit_bg", "test"):
        assert (pipeline / "data" / f"{split}.emb").exists() and (pipeline / "data" / f"{split}.jsonl").exists()


def test_score_columns(pipeline):
    header = (pipeline / "scores.csv").read_text().splitlines()[0].split(",")
    assert header == ["id", "dataset", "side", "md", "rmd", "logit", "knn", "perplexity", "q:quality"]
    t = ScoreTable.read_csv(pipeline / "scores.csv")
    assert len(t) == 600 and not np.any(np.isnan(t.numeric("rmd")))
    assert t.text("id") == store.load_store(pipeline / "data" / "test").ids


def test_combined_columns(pipeline):
    t = ScoreTable.read_csv(pipeline / "combined.csv")
    assert t.names()[-3:] == ["prsum", "linreg", "linreg_train"]
    assert int(t.numeric("linreg_train").sum()) == 60
    assert np.all((t.numeric("prsum") > 0) & (t.numeric("prsum") <= 200))


def test_eval_auroc(pipeline, capsys):
    out = pipeline / "eval"
    assert run("eval", "auroc", "--scores", pipeline / "scores.csv", "--indomain", "in_domain", "--column", "rmd,md", "--out-dir", out) == 0
    res = json.loads((out / "auroc.json").read_text())
    assert res["columns"]["rmd"]["all_ood"] > 0.99
    assert json.loads(capsys.readouterr().out) == res


def test_eval_qa_alpha_zero_is_pool_mean(pipeline):
    out = pipeline / "eval_qa"
    assert run("eval", "qa", "--scores", pipeline / "combined.csv", "--columns", "prsum,rmd", "--quality", "quality",
               "--include-train", "--svg", "--out-dir", out) == 0
    res = json.loads((out / "qa.json").read_text())
    q = ScoreTable.read_csv(pipeline / "combined.csv").quality("quality")
    alpha, mean, kept = res["curves"]["prsum"]["points"][0]
    assert alpha == 0.0 and kept == 600 and mean == pytest.approx(q.mean(), rel=1e-12)
    assert (out / "qa.csv").read_text().startswith("column,alpha,mean_quality,n_kept\n")
    assert (out / "qa.svg").read_text().startswith("<svg")


def test_eval_excludes_linreg_training_rows(pipeline):
    out = pipeline / "eval_q2"
    assert run("eval", "qa", "--scores", pipeline / "combined.csv", "--columns", "linreg", "--quality", "quality", "--out-dir", out) == 0
    assert json.loads((out / "qa.json").read_text())["curves"]["linreg"]["points"][0][2] == 540


def test_eval_kendall_and_survival(pipeline):
    out = pipeline / "eval_k"
    assert run("eval", "kendall", "--scores", pipeline / "combined.csv", "--columns", "perplexity,prsum", "--quality", "quality", "--out-dir", out) == 0
    res = json.loads((out / "kendall.json").read_text())
    assert set(res["columns"]["prsum"]) == {"All", "in_domain", "shifted"}
    assert -1 <= res["columns"]["prsum"]["All"]["tau"] <= 1
    assert run("eval", "survival", "--scores", pipeline / "scores.csv", "--column", "rmd", "--svg", "--out-dir", out) == 0
    surv = json.loads((out / "survival.json").read_text())
    assert surv["counts"]["in_domain"][0] == 300 and surv["counts"]["shifted"][0] == 300
    assert (out / "survival.csv").exists() and (out / "survival.svg").exists()


def test_manifest_contents(pipeline):
    m = json.loads((pipeline / "manifest.json").read_text())
    run_ = m["runs"]["scores.csv"]
    assert run_["command"] == "score" and run_["config"]["knn_k"] == 10 and run_["seeds"] == {"knn_seed": 0}
    assert any(p.endswith("test.emb") for p in run_["inputs"])
    assert all(len(h) == 64 for h in run_["inputs"].values())
    assert "combined.csv" in m["runs"]


def test_rerun_is_byte_identical(pipeline, tmp_path):
    args = ["--test", pipeline / "data" / "test", "--gaussian", pipeline / "models" / "rmd.json", "--classifier",
            pipeline / "models" / "clf.json", "--knn-train", pipeline / "data" / "fit_fg", "--knn-k", 10]
    assert run("score", *args, "--threads", 1, "--out", tmp_path / "a.csv") == 0
    assert run("score", *args, "--threads", 4, "--out", tmp_path / "b.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes() == (pipeline / "scores.csv").read_bytes()


def test_config_file_flags_win(pipeline, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"test": str(pipeline / "data" / "test"), "gaussian": str(pipeline / "models" / "rmd.json"),
                               "out": str(tmp_path / "from_cfg.csv"), "side": "input"}))
    assert run("score", "--config", cfg) == 0
    assert (tmp_path / "from_cfg.csv").exists()
    assert run("score", "--config", cfg, "--out", tmp_path / "flag.csv") == 0
    assert (tmp_path / "flag.csv").exists()
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run("synth", "domain", "--config", cfg, "--name", "a", "--n", 2, "--d", 2, "--out", tmp_path / "x") == 1


def test_unknown_subcommand_usage(capsys):
    assert run("frobnicate") == 1
    err = capsys.readouterr().err
    assert "usage:" in err and "invalid choice" in err


def test_missing_subcommand_and_flag(capsys):
    assert run() == 1
    assert run("score", "--test", "x") == 1
    assert "usage:" in capsys.readouterr().err


def test_data_errors_exit_two(tmp_path, capsys):
    assert run("fit-gaussian", "--fg", tmp_path / "missing", "--out", tmp_path / "g.json") == 2
    bad = tmp_path / "bad"
    (tmp_path / "bad.emb").write_bytes(b"NOPE" + bytes(24))
    (tmp_path / "bad.jsonl").write_text("")
    assert run("fit-gaussian", "--fg", bad, "--out", tmp_path / "g.json") == 2
    assert "bad magic" in capsys.readouterr().err


def test_plain_gaussian_and_attribute(tmp_path):
    assert run("synth", "domain", "--name", "a", "--n", 50, "--d", 1, "--seed", 2, "--out", tmp_path / "a") == 0
    assert run("fit-gaussian", "--fg", tmp_path / "a", "--out", tmp_path / "g.json") == 0
    assert store.load_model(tmp_path / "g.json", kind="gaussian").d == 1
    (tmp_path / "g.json").write_text(json.dumps({"kind": "gaussian", "version": 1, "mu": [0.0], "chol_lower": [[1.0]], "ridge": 0.0, "n_fit": 2}))
    doc = {"doc_id": "d", "segments": [{"segment_id": "p", "token_count": 1, "embedding": [0.0]},
                                       {"segment_id": "q", "token_count": 1, "embedding": [10.0]}]}
    (tmp_path / "docs.jsonl").write_text(json.dumps(doc) + "\n")
    assert run("attribute", "--docs", tmp_path / "docs.jsonl", "--gaussian", tmp_path / "g.json", "--out", tmp_path / "attr.jsonl") == 0
    rows = [json.loads(line) for line in (tmp_path / "attr.jsonl").read_text().splitlines()]
    assert [(r["segment_id"], r["attribution"], r["mode"]) for r in rows] == [("p", -75.0, "compositional"), ("q", 25.0, "compositional")]


def test_ngram(tmp_path, capsys):
    (tmp_path / "test.jsonl").write_text("".join(json.dumps({"id": str(i), "tokens": [i]}) + "\n" for i in range(1, 5)))
    (tmp_path / "train.jsonl").write_text(json.dumps({"id": "t", "tokens": [1, 2]}) + "\n")
    assert run("ngram", "--test", tmp_path / "test.jsonl", "--train", tmp_path / "train.jsonl", "--n-max", 1, "--out", tmp_path / "r.json") == 0
    assert json.loads((tmp_path / "r.json").read_text())["overlap_rate"]["1"] == 50.0
    (tmp_path / "train.jsonl").write_text('{"id": "t"}\n')
    assert run("ngram", "--test", tmp_path / "test.jsonl", "--train", tmp_path / "train.jsonl") == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "selgen", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("selgen ")
    out = subprocess.run([sys.executable, "-m", "selgen", "nope"], capture_output=True, text=True)
    assert out.returncode == 1 and "usage:" in out.stderr
