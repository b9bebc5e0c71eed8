import json

import pytest

from cone.cli import RunConfig, main, threads


def run(*argv):
    return main([str(a) for a in argv])


def status(out):
    return json.loads((out / "status.json").read_text())


@pytest.fixture
def data(tmp_path):
    out = tmp_path / "data"
    assert run("synth", "--out", out, "--seed", 3, "--community-size", 6, "--noise-edges", 4) == 0
    return out


FAST = ("--epochs", 15, "--p", 4)


def _pipeline(root, data):
    assert run("split", "--data", data, "--out", root / "split", "--train-fraction", 0.34, "--seed", 1) == 0
    train = root / "split" / "train.txt"
    assert run("train", "--data", data, "--train", train, "--out", root / "model", *FAST) == 0
    assert run("detect", "--data", data, "--model", root / "model" / "model.cone", "--train", train,
               "--out", root / "det") == 0
    assert run("evaluate", "--detected", root / "det" / "detected.txt", "--truth", data / "communities.txt",
               "--data", data, "--out", root / "eval", "--metric", "both") == 0
    return root


@pytest.mark.filterwarnings("ignore:only 2 training communities")
def test_pipeline_reproducible(tmp_path, data):
    a = _pipeline(tmp_path / "a", data)
    b = _pipeline(tmp_path / "b", data)
    for f in ("split/train.txt", "model/model.cone", "model/loss.csv", "det/detected.txt",
              "det/embeddings.cemb", "eval/scores.csv", "eval/matches.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f
    rows = (a / "eval" / "scores.csv").read_text().splitlines()
    assert rows[0] == "metric,value" and [r.split(",")[0] for r in rows[1:]] == ["f1", "jaccard"]
    s = status(a / "det")
    assert s["status"] == "ok" and s["exit_code"] == 0 and s["threads"] == 1


def test_refuses_non_empty_out(tmp_path, data):
    before = (data / "status.json").read_bytes()
    assert run("synth", "--out", data) == 1
    assert (data / "status.json").read_bytes() == before
    assert run("synth", "--out", data, "--force") == 0


def test_config_snapshot_round_trip(tmp_path, data):
    cfg = RunConfig.loads((data / "config.txt").read_text())
    assert cfg == RunConfig(seed=3, community_size=6, noise_edges=4)
    assert RunConfig.loads(cfg.dumps()) == cfg
    # config file values, overridden by flags
    conf = tmp_path / "run.txt"
    conf.write_text("# comment\nseed=9\nnum_communities=3\n")
    out = tmp_path / "s2"
    assert run("synth", "--config", conf, "--seed", 4, "--out", out) == 0
    cfg2 = RunConfig.loads((out / "config.txt").read_text())
    assert cfg2.seed == 4 and cfg2.num_communities == 3
    assert status(out)["communities"] == 3


def test_bad_config_key(tmp_path):
    conf = tmp_path / "run.txt"
    conf.write_text("colour=blue\n")
    assert run("synth", "--config", conf, "--out", tmp_path / "o") == 1


def test_thread_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("CONE_THREADS", "0")
    with pytest.raises(ValueError):
        threads()
    monkeypatch.setenv("CONE_THREADS", "4")
    assert threads() == 4


def _count(path):
    return sum(1 for line in path.read_text().splitlines() if line.strip())


@pytest.mark.parametrize("n,fraction,expected", [(10, 0.1, (1, 9)), (2, 0.5, (1, 1)), (6, 0.34, (2, 4))])
def test_split_sizes(tmp_path, n, fraction, expected):
    data = tmp_path / "d"
    assert run("synth", "--out", data, "--num-communities", n, "--community-size", 4, "--noise-edges", 0) == 0
    out = tmp_path / "s"
    assert run("split", "--data", data, "--out", out, "--train-fraction", fraction) == 0
    assert (_count(out / "train.txt"), _count(out / "test.txt")) == expected


def test_split_degenerate(tmp_path, data):
    out = tmp_path / "s"
    assert run("split", "--data", data, "--out", out, "--train-fraction", 0.01) == 1
    assert "SplitError" in status(out)["message"]


def test_evaluate_identity_and_hand_case(tmp_path, data):
    truth = data / "communities.txt"
    assert run("evaluate", "--detected", truth, "--truth", truth, "--out", tmp_path / "e") == 0
    assert (tmp_path / "e" / "scores.csv").read_text() == "metric,value\nf1,1.0\n"
    det, tru = tmp_path / "det.txt", tmp_path / "tru.txt"
    det.write_text("d x y z\n")
    tru.write_text("a x y z\nb u v\n")
    assert run("evaluate", "--detected", det, "--truth", tru, "--out", tmp_path / "h") == 0
    assert status(tmp_path / "h")["scores"]["f1"] == pytest.approx(0.75)
    matches = (tmp_path / "h" / "matches.csv").read_text().splitlines()
    assert matches[0] == "metric,side,id,best_match,score" and len(matches) == 4


def test_analyze_costar_bin(tmp_path, data):
    out = tmp_path / "an"
    assert run("analyze", "--data", data, "--out", out) == 0
    hist = (out / "density_hist.csv").read_text().splitlines()
    assert hist[0] == "bin_lo,bin_hi,count"
    row = [line for line in hist[1:] if line.startswith("0.6")]
    assert row and row[0] == "0.6,0.7,6"
    assert (out / "homogeneity.csv").exists()


def test_analyze_excludes_singletons(tmp_path, data):
    comm = tmp_path / "c.txt"
    comm.write_text("solo c0m0\npair c0h0 c0h1\n")
    out = tmp_path / "an"
    assert run("analyze", "--data", data, "--communities", comm, "--out", out) == 0
    s = status(out)
    assert s["excluded"] == 1 and s["excluded_ids"] == ["solo"]


def test_detect_options(tmp_path, data):
    split, model = tmp_path / "split", tmp_path / "model"
    assert run("split", "--data", data, "--out", split, "--train-fraction", 0.34) == 0
    assert run("train", "--data", data, "--train", split / "train.txt", "--out", model, *FAST) == 0
    m = model / "model.cone"
    out = tmp_path / "d1"
    assert run("detect", "--data", data, "--model", m, "--k-clusters", 4, "--out", out) == 0
    assert (out / "summary.txt").read_text().startswith("k=4 selected=false")
    out = tmp_path / "d2"
    assert run("detect", "--data", data, "--model", m, "--train", split / "train.txt", "--candidates", "",
               "--out", out) == 1
    assert "candidate" in status(out)["message"]
    out = tmp_path / "d3"
    assert run("detect", "--data", data, "--model", m, "--out", out) == 1
    out = tmp_path / "d4"
    assert run("detect", "--data", data, "--model", m, "--train", split / "train.txt", "--exclude-train",
               "--k-clusters", 4, "--out", out) == 0
    train_nodes = set((split / "train.txt").read_text().split()) - {"c0", "c1", "c2", "c3", "c4", "c5"}
    detected = {w for line in (out / "detected.txt").read_text().splitlines() for w in line.split()[1:]}
    assert detected and not detected & train_nodes
