import json

import pytest

from lfi_ident.cli import build_parser, main
from lfi_ident.config import RunConfig, config_hash, load_config, save_config


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "cohort"), "--subjects", "3", "--activities", "read,walk",
                 "--duration", "60", "--rate", "250", "--seed", "4", "--quiet"]) == 0
    assert main(["features", "--manifest", str(root / "cohort" / "manifest.csv"),
                 "--out", str(root / "feat.csv"), "--quiet"]) == 0
    return root


def test_synth_outputs(workspace):
    manifest = workspace / "cohort" / "manifest.csv"
    assert len(manifest.read_text().splitlines()) == 1 + 6
    meta = json.loads((workspace / "cohort" / "synth.json").read_text())
    assert meta["params"]["n_subjects"] == 3 and len(meta["config_hash"]) == 16


def test_ingest(workspace, capsys):
    code, out, _ = run(capsys, "ingest", "--manifest", str(workspace / "cohort" / "manifest.csv"))
    assert code == 0 and json.loads(out)["ok"] is True


def test_decimate(workspace, capsys):
    out_dir = workspace / "dec"
    code, out, _ = run(capsys, "decimate", "--manifest", str(workspace / "cohort" / "manifest.csv"),
                       "--rate", "125", "--out", str(out_dir), "--quiet")
    assert code == 0 and out.strip().endswith("manifest.csv")
    first = sorted(out_dir.glob("*.csv"))
    assert any(p.name != "manifest.csv" for p in first)


def test_features_sidecar_and_hash(workspace):
    cfg = json.loads((workspace / "feat.config.json").read_text())
    header = (workspace / "feat.csv").read_text().splitlines()[:3]
    assert header[1] == f"# config_hash={config_hash(RunConfig().features)}"
    assert cfg["config_hash"] == config_hash(RunConfig())
    assert (workspace / "feat.flags.csv").exists()


def test_features_rerun_byte_identical(workspace, tmp_path):
    argv = ["features", "--manifest", str(workspace / "cohort" / "manifest.csv"), "--quiet"]
    assert main(argv + ["--out", str(tmp_path / "again.csv")]) == 0
    assert (tmp_path / "again.csv").read_bytes() == (workspace / "feat.csv").read_bytes()


def test_train_then_eval_with_model(workspace, capsys):
    model = workspace / "model.json"
    code, _, _ = run(capsys, "train", "--features", str(workspace / "feat.csv"), "--mode", "m1",
                     "--activity", "read", "--classifier", "linear", "--out", str(model), "--quiet")
    assert code == 0 and model.exists()
    code, out, _ = run(capsys, "eval", "--features", str(workspace / "feat.csv"), "--mode", "m1",
                       "--activity", "read", "--classifier", "linear", "--model", str(model), "--quiet")
    doc = json.loads(out)
    assert code == 0 and doc["mode"] == "m1" and doc["activity"] == "read"
    assert {"accuracy", "eer", "far", "frr", "confusion", "n_test"} <= set(doc["metrics"])


def test_eval_rerun_byte_identical(workspace, capsys):
    argv = ["eval", "--features", str(workspace / "feat.csv"), "--mode", "m1", "--activity", "read",
            "--classifier", "gbdt", "--quiet"]
    log = workspace / "runs.jsonl"
    assert main(argv + ["--out", str(workspace / "r1.json"), "--run-log", str(log)]) == 0
    assert main(argv + ["--out", str(workspace / "r2.json"), "--run-log", str(log)]) == 0
    capsys.readouterr()
    assert (workspace / "r1.json").read_bytes() == (workspace / "r2.json").read_bytes()
    assert len(log.read_text().splitlines()) == 2
    assert (workspace / "r1.config.json").exists()


def test_eval_m2(workspace, capsys):
    code, out, _ = run(capsys, "eval", "--features", str(workspace / "feat.csv"), "--mode", "m2",
                       "--activity", "walk", "--classifier", "linear", "--quiet")
    assert code == 0 and json.loads(out)["metrics"]["n_test"] == 3 * 12


def test_sweep_window_nine_points(workspace, capsys):
    out_dir = workspace / "sweep"
    code, out, _ = run(capsys, "sweep", "--manifest", str(workspace / "cohort" / "manifest.csv"), "--axis", "window",
                       "--values", "0.5,1,2,3,4,5,6,8,10", "--classifier", "linear", "--out", str(out_dir),
                       "--quiet")
    assert code == 0
    doc = json.loads((out_dir / "sweep_window.json").read_text())
    assert len(doc["sweep"]["reports"]) == 9 and doc["sweep"]["axis"] == "window_seconds"
    rows = (out_dir / "sweep_window.csv").read_text().splitlines()
    assert rows[0].startswith("window_seconds,accuracy_pct") and len(rows) == 10
    assert json.loads(out) == doc
    assert (out_dir / "config.json").exists()


def test_sweep_vote(workspace, capsys):
    code, out, _ = run(capsys, "sweep", "--manifest", str(workspace / "cohort" / "manifest.csv"), "--axis", "vote",
                       "--values", "1,3", "--classifier", "linear", "--out", str(workspace / "vote"), "--quiet")
    assert code == 0 and json.loads(out)["sweep"]["values"] == [1, 3]


def test_missing_file_one_line_error(capsys, tmp_path):
    code, out, err = run(capsys, "ingest", "--manifest", str(tmp_path / "nope.csv"))
    assert code == 1 and out == ""
    assert err.count("\n") == 1 and err.startswith("lfi-ident ingest: error: missing file")


def test_unknown_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--features", "x.csv", "--bogus"])
    assert exc.value.code == 2
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "bogus" in err


def test_config_hash_mismatch(workspace, capsys):
    code, _, err = run(capsys, "train", "--features", str(workspace / "feat.csv"), "--window-seconds", "2",
                       "--out", str(workspace / "m2.json"), "--quiet")
    assert code == 1 and "config-hash mismatch" in err and err.count("\n") == 1


def test_model_config_mismatch(workspace, capsys):
    model = workspace / "seeded.json"
    assert main(["train", "--features", str(workspace / "feat.csv"), "--classifier", "linear", "--seed", "9",
                 "--out", str(model), "--quiet"]) == 0
    code, _, err = run(capsys, "eval", "--features", str(workspace / "feat.csv"), "--classifier", "linear",
                       "--model", str(model), "--quiet")
    assert code == 1 and "config-hash mismatch" in err


def test_set_and_env_config(tmp_path, monkeypatch):
    base = tmp_path / "base.json"
    save_config(RunConfig(seed=5), base)
    monkeypatch.setenv("LFI_IDENT_CONFIG", str(base))
    from lfi_ident.cli import effective_config
    args = build_parser().parse_args(["eval", "--features", "x.csv", "--set", "gbdt.rounds=7",
                                      "--window-seconds", "2"])
    cfg = effective_config(args)
    assert cfg.seed == 5 and cfg.gbdt.rounds == 7 and cfg.features.window_seconds == 2.0
    assert load_config() == RunConfig(seed=5)


def test_bad_set(capsys):
    code, _, err = run(capsys, "eval", "--features", "x.csv", "--set", "nonsense")
    assert code == 1 and "key=value" in err
    code, _, err = run(capsys, "eval", "--features", "x.csv", "--set", "gbdt.depth=3")
    assert code == 1 and err.count("\n") == 1


def test_sidecar_config_reloads(workspace):
    assert load_config(workspace / "feat.config.json") == RunConfig()
