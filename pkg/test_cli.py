"""
End-to-End-Tests der Kommandozeile über rangeloop.main.run
Prüft Exit-Codes, Ausgaben und dass CLI und Bibliothek dieselben Zahlen liefern.
"""
import json

import numpy as np
import pytest

from rangeloop.commands import synth_command
from rangeloop.config import precision
from rangeloop.main import run
from rangeloop.schemas.model_schema import ModelConfig
from rangeloop.services.dataset_service import load_sequence
from rangeloop.services.equivariance_service import CONTROL_MARKER
from rangeloop.services.network_service import extract_descriptors
from rangeloop.utils.binary_formats import load_checkpoint, load_descriptor_db, save_descriptor_db
from rangeloop.utils.keyvalue import read_key_values
from rangeloop.utils.label_file import write_labels
from test_retrieval import adversarial_fixture


def _tree(root):
    return {str(path.relative_to(root)): path.read_bytes() for path in sorted(root.rglob("*")) if path.is_file()}


def _metric_lines(text):
    return [line for line in text.splitlines() if not line.startswith("search_ms_per_query")]


@pytest.fixture
def tiny_data(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_data")
    assert run(["synth", "--profile", "tiny", "--seed", "7", "--with-labels", "--out", str(out)]) == 0
    return out


class TestUsage:
    def test_unknown_flag(self, capsys):
        assert run(["synth", "--bogus"]) == 1
        assert "unrecognized arguments" in capsys.readouterr().err

    def test_unknown_command(self):
        assert run(["frobnicate"]) == 1

    def test_missing_out(self, capsys):
        assert run(["synth", "--profile", "tiny"]) == 1
        assert "needs --out" in capsys.readouterr().err

    def test_missing_data_directory(self, tmp_path):
        assert run(["train", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "run")]) == 1

    def test_bad_config_key(self, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("clusters = 4\n")
        assert run(["synth", "--profile", "tiny", "--config", str(config), "--out", str(tmp_path / "o")]) == 1

    def test_internal_value_error_is_runtime_failure(self, tmp_path, monkeypatch, capsys):
        def _broken(spec):
            raise ValueError("operands could not be broadcast together with shapes (6,6) (1,1,1)")

        monkeypatch.setattr(synth_command, "generate_world", _broken)
        assert run(["synth", "--profile", "tiny", "--out", str(tmp_path)]) == 2
        assert "could not be broadcast" in capsys.readouterr().err

    def test_descriptor_dimension_mismatch_is_input_error(self, tmp_path, rng):
        save_descriptor_db(tmp_path / "db.rld", [0, 1], rng.standard_normal((2, 8)))
        save_descriptor_db(tmp_path / "queries.rld", [5], rng.standard_normal((1, 4)))
        assert run(["query", "--index", str(tmp_path / "db.rld"), "--queries", str(tmp_path / "queries.rld")]) == 1

    def test_truncated_index_is_input_error(self, tmp_path):
        (tmp_path / "db.rld").write_bytes(b"RLD1\x01")
        (tmp_path / "queries.rld").write_bytes(b"RLD1\x01")
        assert run(["query", "--index", str(tmp_path / "db.rld"), "--queries", str(tmp_path / "queries.rld")]) == 1


class TestSynth:
    def test_repeated_runs_are_byte_identical(self, tmp_path, capsys):
        args = ["synth", "--profile", "tiny", "--seed", "7", "--out", str(tmp_path)]
        assert run(args) == 0
        first = _tree(tmp_path)
        assert run(args) == 0
        assert _tree(tmp_path) == first
        assert "scans 48 visits 2" in capsys.readouterr().out

    def test_manifest_lists_outputs(self, tiny_data):
        manifest = json.loads((tiny_data / "manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["seed"] == 7
        assert manifest["profile"] == "tiny"
        assert "labels.txt" in manifest["outputs"]
        assert "velodyne/000000.bin" in manifest["outputs"]

    def test_config_overrides_world(self, tmp_path, capsys):
        config = tmp_path / "small.cfg"
        config.write_text("world.poses_per_loop = 5\nworld.revisit_passes = 0\n")
        assert run(["synth", "--profile", "tiny", "--config", str(config), "--out", str(tmp_path / "o")]) == 0
        assert "scans 5 visits 1" in capsys.readouterr().out


class TestEval:
    def test_adversarial_descriptor_files(self, tmp_path, capsys):
        index, query_ids, queries, labels = adversarial_fixture()
        save_descriptor_db(tmp_path / "db.rld", index.scan_ids, index.descriptors)
        save_descriptor_db(tmp_path / "queries.rld", query_ids, queries)
        write_labels(tmp_path / "labels.txt", labels)
        code = run(["eval", "--index", str(tmp_path / "db.rld"), "--queries", str(tmp_path / "queries.rld"),
                    "--labels", str(tmp_path / "labels.txt"), "--exclusion-window", "0"])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert "Recall@1 0.0" in lines
        assert "Recall@1% 1.0" in lines
        assert not (tmp_path / "manifest.json").exists()

    def test_index_without_queries_rejected(self, tmp_path):
        index, _, _, _ = adversarial_fixture()
        save_descriptor_db(tmp_path / "db.rld", index.scan_ids, index.descriptors)
        assert run(["eval", "--index", str(tmp_path / "db.rld")]) == 1


class TestEquicheck:
    def test_circular_mode_passes(self, capsys):
        assert run(["equicheck", "--profile", "tiny", "--images", "2"]) == 0
        assert "equivariant within" in capsys.readouterr().out

    def test_zero_padding_control(self, capsys):
        assert run(["equicheck", "--profile", "tiny", "--images", "2", "--mode", "zero"]) == 0
        assert CONTROL_MARKER in capsys.readouterr().out

    def test_writes_report_with_out(self, tmp_path):
        assert run(["equicheck", "--profile", "tiny", "--images", "1", "--shifts", "0,3", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "equicheck_report.txt").exists()
        assert (tmp_path / "equicheck.csv").read_text().splitlines()[0] == "shift,ccm,rtm,descriptor"
        assert (tmp_path / "manifest.json").exists()


class TestPipeline:
    def test_label_and_project(self, tiny_data, tmp_path, capsys):
        assert run(["label", "--profile", "tiny", "--data", str(tiny_data), "--out", str(tmp_path / "labels")]) == 0
        relabeled = (tmp_path / "labels" / "labels.txt").read_text().splitlines()
        # velodyne/ speichert float32, die Paarmenge hängt nur von den Posen ab
        assert len(relabeled) == len((tiny_data / "labels.txt").read_text().splitlines())
        scan = tiny_data / "velodyne" / "000000.bin"
        assert run(["project", "--profile", "tiny", "--scan", str(scan), "--out", str(tmp_path / "rim")]) == 0
        assert (tmp_path / "rim" / "000000.rim").stat().st_size == (tiny_data / "range_images" / "000000.rim").stat().st_size
        assert "projected" in capsys.readouterr().out

    def test_train_index_eval(self, tiny_data, tmp_path, capsys):
        run_dir, index_dir = tmp_path / "run", tmp_path / "index"
        assert run(["train", "--profile", "tiny", "--data", str(tiny_data), "--epochs", "1", "--out", str(run_dir)]) == 0
        assert "epochs 1 initial_loss" in capsys.readouterr().out
        assert [line.split()[0] for line in (run_dir / "metrics.txt").read_text().splitlines()] == ["0", "1"]
        assert (run_dir / "checkpoints" / "epoch_0001.rlw").exists()

        weights = str(run_dir / "weights.rlw")
        common = ["--profile", "tiny", "--data", str(tiny_data), "--weights", weights, "--out", str(index_dir)]
        assert run(["index", *common, "--visit", "0", "--name", "db.rld"]) == 0
        assert run(["index", *common, "--visit", "1", "--name", "queries.rld"]) == 0

        scan_ids, stored = load_descriptor_db(index_dir / "db.rld")
        assert scan_ids == list(range(24))
        with precision("float32"):
            cfg = ModelConfig.from_key_values(read_key_values(run_dir / "model.cfg"))
            images = load_sequence(tiny_data, with_scans=False).images[:24]
            expected = extract_descriptors(images, cfg, load_checkpoint(run_dir / "weights.rlw"))
        assert stored.tobytes() == expected.astype(np.float32).tobytes()

        capsys.readouterr()
        code = run(["eval", "--profile", "tiny", "--index", str(index_dir / "db.rld"),
                    "--queries", str(index_dir / "queries.rld"), "--poses", str(tiny_data / "poses.txt"),
                    "--rule", "distance", "--exclusion-window", "0"])
        assert code == 0
        from_files = _metric_lines(capsys.readouterr().out)
        code = run(["eval", "--profile", "tiny", "--data", str(tiny_data), "--weights", weights,
                    "--rule", "distance", "--exclusion-window", "0"])
        assert code == 0
        assert _metric_lines(capsys.readouterr().out) == from_files

        assert run(["query", "--profile", "tiny", "--index", str(index_dir / "db.rld"),
                    "--queries", str(index_dir / "queries.rld"), "--top-k", "2"]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 48
