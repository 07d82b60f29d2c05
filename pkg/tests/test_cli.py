import json

import numpy as np
import pytest
import yaml

from toponet.cli import main
from toponet.io import read_dataset, read_network
from toponet.network import forward
from toponet.pipeline import STAGES

SMALL = {
    "name": "small",
    "seed": 1,
    "dataset": {"kind": "BallShell", "points_per_class": 60, "seed": 0},
    "network": {"dims": [3, 2, 6, 2]},
    "train": {"epochs": 40, "lr": 0.01},
    "analyses": {"witness_injection": True, "isomap": {"k": 8, "target_dim": 2, "max_points": 80}},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(yaml.safe_dump(SMALL))
    return p


def write_cfg(tmp_path, obj):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump(obj))
    return p


class TestRun:
    def test_full_run(self, tmp_path, cfg_path):
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
        for name in ["config.yaml", "dataset.csv", "network.txt", "training.json", "report.json",
                     "metadata.json", "trace/manifest.json", "analysis/moves.json",
                     "analysis/separation.json", "analysis/separability.json",
                     "analysis/components.json", "analysis/cells.csv", "isomap/manifest.json"]:
            assert (out / name).exists(), name
        report = json.loads((out / "report.json").read_text())
        assert report["trace"]["dims"] == [3, 2, 6, 2]
        w = report["separation"]["witness"]
        assert w["indices"] == [120, 121] and w["first_layer_residual"] <= 1e-9
        assert not report["separation"]["separated"]

    def test_witness_pair_not_both_correct(self, tmp_path, cfg_path):
        out = tmp_path / "out"
        main(["run", "--config", str(cfg_path), "--out", str(out)])
        w = json.loads((out / "analysis/separation.json").read_text())["witness"]
        p = np.array(w["outputs"])
        correct = [np.argmax(p[0]) == 0, np.argmax(p[1]) == 1]
        assert sum(correct) <= 1

    def test_nonempty_out_rejected(self, tmp_path, cfg_path):
        out = tmp_path / "out"
        out.mkdir()
        (out / "x").write_text("")
        assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 1

    def test_seed_flag(self, tmp_path, cfg_path):
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg_path), "--out", str(out), "--seed", "5"]) == 0
        assert json.loads((out / "training.json").read_text())["seed"] == 5

    def test_output_from_config(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        p = write_cfg(tmp_path, {**SMALL, "output": "from_cfg"})
        assert main(["run", "--config", str(p)]) == 0
        assert (tmp_path / "from_cfg" / "report.json").exists()


class TestValidation:
    def test_dim_mismatch_exit_1_no_outputs(self, tmp_path, capsys):
        p = write_cfg(tmp_path, {**SMALL, "network": {"dims": [2, 2, 2]}})
        out = tmp_path / "out"
        assert main(["run", "--config", str(p), "--out", str(out)]) == 1
        assert not out.exists()
        assert "input dimension 2" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "no.yaml"), "--out", str(tmp_path / "o")]) == 1

    def test_no_out(self, cfg_path):
        assert main(["run", "--config", str(cfg_path)]) == 1

    def test_bad_seed(self, tmp_path, cfg_path):
        assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o"), "--seed", "-1"]) == 1

    def test_run_without_config(self, tmp_path):
        assert main(["run", "--out", str(tmp_path / "o")]) == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["fly"])
        assert exc.value.code == 2


class TestStages:
    def test_stages_compose_to_run(self, tmp_path, cfg_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(cfg_path), "--out", str(a)]) == 0
        assert main(["generate", "--config", str(cfg_path), "--out", str(b)]) == 0
        for stage in STAGES[1:]:
            assert main([stage, "--out", str(b)]) == 0, stage
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()

    def test_missing_upstream_exit_2(self, tmp_path, cfg_path, capsys):
        out = tmp_path / "o"
        assert main(["generate", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert main(["analyze", "--out", str(out)]) == 2
        assert "produced by the 'train' stage" in capsys.readouterr().err

    def test_append_only_and_force(self, tmp_path, cfg_path):
        out = tmp_path / "o"
        main(["run", "--config", str(cfg_path), "--out", str(out)])
        before = (out / "analysis/moves.json").read_bytes()
        assert main(["analyze", "--out", str(out)]) == 2
        assert main(["analyze", "--out", str(out), "--force"]) == 0
        assert (out / "analysis/moves.json").read_bytes() == before
        sep = (out / "analysis/separation.json").read_bytes()
        assert main(["run", "--stage", "analyze", "--out", str(out), "--force"]) == 0
        assert (out / "analysis/separation.json").read_bytes() == sep

    def test_analyze_byte_identical(self, tmp_path, cfg_path):
        out = tmp_path / "o"
        main(["run", "--config", str(cfg_path), "--out", str(out)])
        files = sorted((out / "analysis").iterdir())
        first = {f.name: f.read_bytes() for f in files}
        main(["analyze", "--out", str(out), "--force"])
        assert {f.name: f.read_bytes() for f in files} == first

    def test_trace_external_checkpoint(self, tmp_path, cfg_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", str(cfg_path), "--out", str(a)])
        main(["generate", "--config", str(cfg_path), "--out", str(b)])
        assert main(["trace", "--out", str(b), "--network", str(a / "network.txt")]) == 0
        for f in sorted((a / "trace").iterdir()):
            assert f.read_bytes() == (b / "trace" / f.name).read_bytes()
        net = read_network(a / "network.txt")
        d = read_dataset(a / "dataset.csv")
        from toponet.io import read_points
        last, _, _, _ = read_points(b / "trace" / "layer_03.csv")
        assert np.array_equal(last, forward(net, d.points))

    def test_config_conflict(self, tmp_path, cfg_path):
        out = tmp_path / "o"
        main(["generate", "--config", str(cfg_path), "--out", str(out)])
        other = write_cfg(tmp_path, {**SMALL, "name": "other"})
        assert main(["train", "--config", str(other), "--out", str(out)]) == 1

    def test_corrupt_checkpoint_exit_2(self, tmp_path, cfg_path):
        out = tmp_path / "o"
        main(["run", "--config", str(cfg_path), "--out", str(out)])
        (out / "network.txt").write_text("garbage\n")
        assert main(["trace", "--out", str(out), "--force"]) == 2

    def test_divergence_exit_2(self, tmp_path, capsys):
        p = write_cfg(tmp_path, {**SMALL, "train": {"epochs": 5, "lr": 1e308}})
        with np.errstate(all="ignore"):
            code = main(["run", "--config", str(p), "--out", str(tmp_path / "o")])
        assert code == 2 and "diverged" in capsys.readouterr().err

    def test_isomap_unconfigured(self, tmp_path):
        p = write_cfg(tmp_path, {k: v for k, v in SMALL.items() if k != "analyses"})
        out = tmp_path / "o"
        assert main(["run", "--config", str(p), "--out", str(out)]) == 0
        assert not (out / "isomap").exists()
        assert main(["isomap", "--out", str(out)]) == 2
