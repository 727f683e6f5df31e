"""Command-line behavior: flag plumbing, output formats, error reporting."""

import json

import numpy as np
import pytest

from knncal.cli import main
from knncal.core import Hyperparams
from knncal.harness import load_checkpoint, load_representations, train_modules
from knncal.synthgen import SynthConfig, generate


SMALL_FLAGS = ["--epochs", "3", "--k", "4", "--kmax", "8", "--z-dim", "4", "--ans-hidden", "6"]


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "small.jsonl"
    rc = main([
        "gen-synth", "--out", str(path), "--dim", "6", "--shots", "4",
        "--n-test", "20", "--seed", "2",
    ])
    assert rc == 0
    return path


def machine_lines(captured: str) -> list[str]:
    """The tab-separated block that follows the aligned human table."""

    blocks = captured.strip().split("\n\n")
    return blocks[-1].splitlines()


class TestGenSynth:
    def test_output_is_loadable(self, data_file):
        ds = load_representations(data_file)
        assert ds.dim == 6 and ds.k_shots == 4
        assert len(ds.split_instances("test")) == 20

    def test_same_flags_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        flags = ["--dim", "5", "--shots", "2", "--n-test", "4", "--seed", "7"]
        assert main(["gen-synth", "--out", str(a)] + flags) == 0
        assert main(["gen-synth", "--out", str(b)] + flags) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_preset_flag(self, tmp_path):
        path = tmp_path / "p.jsonl"
        assert main(["gen-synth", "--out", str(path), "--preset", "noiseless", "--seed", "1"]) == 0
        ds = load_representations(path)
        assert ds.dim == 16 and ds.k_shots == 16


class TestEval:
    def test_icl_on_noiseless_preset_is_perfect(self, capsys):
        rc = main(["eval", "--preset", "noiseless", "--mode", "icl", "--runs", "1", "--seed", "3"])
        assert rc == 0
        lines = machine_lines(capsys.readouterr().out)
        assert lines[0].startswith("method\tavg")
        cells = lines[1].split("\t")
        assert cells[0] == "ICL" and cells[1] == "1.0"

    def test_report_file_matches_stdout(self, data_file, tmp_path, capsys):
        out = tmp_path / "r.tsv"
        rc = main(["eval", "--data", str(data_file), "--mode", "knn_only",
                   "--runs", "2", "--out", str(out)] + SMALL_FLAGS)
        assert rc == 0
        printed = machine_lines(capsys.readouterr().out)
        assert out.read_text() == "\n".join(printed) + "\n"

    def test_identical_invocations_byte_identical(self, data_file, tmp_path):
        argv = ["eval", "--data", str(data_file), "--mode", "knn_c", "--runs", "2"] + SMALL_FLAGS
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_lambda_flag_pins_interpolation(self, data_file, capsys):
        rc = main(["eval", "--data", str(data_file), "--mode", "knn_c_minus_ans_fr",
                   "--lambda", "0.6"] + SMALL_FLAGS)
        assert rc == 0
        cells = machine_lines(capsys.readouterr().out)[1].split("\t")
        assert cells[5] == "0.6"

    def test_knn_only_ignores_lambda_flag(self, data_file, capsys):
        base = ["eval", "--data", str(data_file), "--mode", "knn_only"] + SMALL_FLAGS
        assert main(base + ["--lambda", "0.9"]) == 0
        with_lam = machine_lines(capsys.readouterr().out)[1]
        assert main(base) == 0
        without = machine_lines(capsys.readouterr().out)[1]
        assert with_lam == without


class TestAblate:
    def test_six_rows_in_order(self, data_file, tmp_path):
        out = tmp_path / "ablate.tsv"
        rc = main(["ablate", "--data", str(data_file), "--runs", "1",
                   "--out", str(out)] + SMALL_FLAGS)
        assert rc == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 7
        methods = [l.split("\t")[0] for l in lines[1:]]
        assert methods == ["ICL", "KNN_C", "KNN_C_MINUS_ANS", "KNN_C_MINUS_FR",
                           "KNN_C_MINUS_ANS_FR", "KNN_ONLY"]
        icl = lines[1].split("\t")
        assert icl[5] == icl[6] == icl[7] == "-"
        for line in lines[1:]:
            cells = line.split("\t")
            assert float(cells[2]) <= float(cells[1]) + 1e-12  # worst <= avg
            assert float(cells[3]) >= 0.0


class TestTrain:
    def test_checkpoints_match_library_training(self, data_file, tmp_path):
        fr_path, ans_path = tmp_path / "fr.ckpt", tmp_path / "ans.ckpt"
        rc = main(["train", "--data", str(data_file), "--fr-out", str(fr_path),
                   "--ans-out", str(ans_path), "--seed", "9"] + SMALL_FLAGS)
        assert rc == 0
        hp = Hyperparams(seed=9, epochs=3, k=4, k_max=8, z_dim=4, ans_hidden=6)
        fr_model, ans_model = train_modules(load_representations(data_file), hp)
        fr_ck = load_checkpoint(fr_path)
        ans_ck = load_checkpoint(ans_path)
        assert fr_ck.hyperparams == hp
        assert np.array_equal(fr_ck.model.weight, fr_model.weight)
        assert np.array_equal(fr_ck.model.bias, fr_model.bias)
        assert np.array_equal(ans_ck.model.w2, ans_model.w2)


class TestTune:
    def test_reports_chosen_lambda(self, tmp_path, capsys):
        # Clean clusters with uninformative logits: neighbors dominate, so the
        # tuned interpolation weight should be 0.
        ds = generate(SynthConfig(dim=6, n_classes=2, k_shots=4, n_test=2,
                                  variant_noise=0.1, cluster_noise=0.1, seed=5))
        from knncal.harness import save_representations

        path = tmp_path / "clean.jsonl"
        save_representations(ds, path)
        rc = main(["tune", "--data", str(path), "--k", "4"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "lambda=" in out and "tau=" in out and "k=4" in out


class TestConfigAndErrors:
    def test_config_file_applies_and_flags_override(self, data_file, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"lam": 0.3, "epochs": 3, "k": 4, "k_max": 8,
                                   "z_dim": 4, "ans_hidden": 6}))
        rc = main(["eval", "--data", str(data_file), "--mode", "knn_c_minus_ans_fr",
                   "--config", str(cfg)])
        assert rc == 0
        assert machine_lines(capsys.readouterr().out)[1].split("\t")[5] == "0.3"
        rc = main(["eval", "--data", str(data_file), "--mode", "knn_c_minus_ans_fr",
                   "--config", str(cfg), "--lambda", "0.6"])
        assert rc == 0
        assert machine_lines(capsys.readouterr().out)[1].split("\t")[5] == "0.6"

    def test_unknown_config_key(self, data_file, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"learning_rate": 0.1}))
        rc = main(["eval", "--data", str(data_file), "--mode", "icl", "--config", str(cfg)])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_data_file(self, capsys):
        rc = main(["eval", "--data", "/does/not/exist.jsonl", "--mode", "icl"])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_flag_exits_nonzero(self):
        with pytest.raises(SystemExit) as exc:
            main(["eval", "--data", "x.jsonl", "--frobnicate"])
        assert exc.value.code != 0

    def test_missing_subcommand_exits_nonzero(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code != 0


class TestCheckGradients:
    def test_passes_at_documented_tolerance(self, capsys):
        rc = main(["check-gradients", "--inits", "3", "--seed", "1"])
        assert rc == 0
        assert "OK" in capsys.readouterr().out

    def test_fails_when_tolerance_unreachable(self, capsys):
        rc = main(["check-gradients", "--inits", "2", "--tol", "1e-12"])
        assert rc == 1
        assert "FAIL" in capsys.readouterr().err
