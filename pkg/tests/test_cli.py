import json
from pathlib import Path

import numpy as np
import pytest

from tabppo import checkpoint as ckpt
from tabppo.cli import main
from tabppo.data import SyntheticSpec, generate_synthetic
from tabppo.heads import PolicyValueNet
from tabppo.seeding import substream


def tiny_config(out, trainer="ppo", epochs=1, **synthetic_kw):
    synthetic = dict(
        n_classes=3, samples_per_class=[30, 30, 30], n_categorical=2,
        vocab_size=4, n_numerical=2, class_separation=2.0, seed=0)
    synthetic.update(synthetic_kw)
    return {
        "synthetic": synthetic,
        "encoder": {"embed_dim": 8, "n_heads": 2, "n_layers": 1},
        "ppo": {"minibatch_size": 72, "ppo_epochs": 2},
        "trainer": trainer,
        "epochs": epochs,
        "seed": 0,
        "out": str(out),
    }


def write_config(tmp_path, name="config.json", **kw):
    out = tmp_path / "run"
    cfg = tiny_config(out, **kw)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path, out


class TestGenerate:
    def test_byte_identical_across_runs(self, tmp_path):
        args = ["generate", "--classes", "2", "--samples-per-class", "8,8",
                "--categorical", "2", "--numerical", "2", "--seed", "7"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a" / "data.csv").read_bytes()
        b = (tmp_path / "b" / "data.csv").read_bytes()
        assert a == b
        assert (tmp_path / "a" / "schema.json").read_bytes() == \
            (tmp_path / "b" / "schema.json").read_bytes()


class TestTrain:
    def test_writes_all_artifacts(self, tmp_path):
        path, out = write_config(tmp_path)
        assert main(["train", "--config", str(path)]) == 0
        for name in ("config.json", "metrics.jsonl", "checkpoint.npz",
                     "checkpoint.json", "schema.json", "report.txt",
                     "report.json"):
            assert (out / name).exists(), name

    def test_zero_epochs_checkpoint_equals_init(self, tmp_path):
        path, out = write_config(tmp_path, epochs=0)
        assert main(["train", "--config", str(path)]) == 0
        assert (out / "metrics.jsonl").read_text() == ""
        state = ckpt.load_checkpoint(str(out))
        fresh = PolicyValueNet.create(
            state.net.schema, state.net.encoder_cfg, substream(0, "init"))
        for name, arr in fresh.state_dict().items():
            np.testing.assert_array_equal(arr, state.net.params[name].data)

    def test_rerun_from_materialized_config_identical_metrics(self, tmp_path):
        path, out = write_config(tmp_path, epochs=2)
        assert main(["train", "--config", str(path)]) == 0
        first = (out / "metrics.jsonl").read_bytes()
        # the resolved config written next to the outputs reproduces the run
        out2 = tmp_path / "rerun"
        assert main(["train", "--config", str(out / "config.json"),
                     "--out", str(out2)]) == 0
        assert (out2 / "metrics.jsonl").read_bytes() == first

    def test_ce_trainer(self, tmp_path):
        path, out = write_config(tmp_path, trainer="ce")
        assert main(["train", "--config", str(path)]) == 0
        record = json.loads((out / "metrics.jsonl").read_text().splitlines()[0])
        assert record["mean_reward"] is None
        assert record["clip_fraction"] is None

    def test_csv_source_via_flags(self, tmp_path):
        assert main(["generate", "--classes", "2", "--samples-per-class",
                     "20,20", "--categorical", "2", "--numerical", "1",
                     "--out", str(tmp_path / "data")]) == 0
        path, out = write_config(tmp_path)
        assert main(["train", "--config", str(path),
                     "--data", str(tmp_path / "data" / "data.csv"),
                     "--epochs", "1"]) == 0
        cfg = json.loads((out / "config.json").read_text())
        assert "csv" in cfg and "synthetic" not in cfg


class TestEval:
    def test_checkpoint_round_trip(self, tmp_path, capsys):
        path, out = write_config(tmp_path)
        assert main(["train", "--config", str(path)]) == 0
        spec = SyntheticSpec(
            n_classes=3, samples_per_class=[10, 10, 10], n_categorical=2,
            vocab_size=4, n_numerical=2, class_separation=2.0, seed=1)
        ds, _ = generate_synthetic(spec)
        from tabppo.data import write_csv
        write_csv(ds, str(tmp_path / "eval.csv"))
        assert main(["eval", "--checkpoint", str(out),
                     "--data", str(tmp_path / "eval.csv"),
                     "--out", str(tmp_path / "evalout")]) == 0
        text = capsys.readouterr().out
        assert "Macro Avg" in text
        rep = json.loads((tmp_path / "evalout" / "report.json").read_text())
        assert rep["total"] == 30


class TestAblate:
    def test_three_variants_reported(self, tmp_path, capsys):
        path, out = write_config(tmp_path)
        assert main(["ablate", "--config", str(path)]) == 0
        blob = json.loads((out / "ablation.json").read_text())
        assert set(blob["variants"]) == {"tt_ppo", "tt_ce", "mlp_ppo"}
        for result in blob["variants"].values():
            assert result is not None
            assert 0 <= result["macro_f1"] <= 1
        stdout = capsys.readouterr().out
        for name in ("tt_ppo", "tt_ce", "mlp_ppo"):
            assert name in stdout
            assert (out / name / "report.json").exists()


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"trainer": "sgd", "synthetic": {}}))
        assert main(["train", "--config", str(bad)]) == 2

    def test_missing_config_file_is_2(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.json")]) == 2

    def test_invalid_json_is_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["train", "--config", str(bad)]) == 2

    def test_data_error_is_3(self, tmp_path):
        csv = tmp_path / "d.csv"
        csv.write_text("a,b\n1,2\n")
        assert main(["train", "--data", str(csv), "--label-column", "label",
                     "--out", str(tmp_path / "out")]) == 3
