# tests/test_cli.py

import json
import logging

import pytest

from gtn import cli
from gtn.core.definitions import ArchitectureTag
from gtn.core.loader import parse_experiment
from gtn.metrics.reports import ABLATION_HEADER, KNOWLEDGE_HEADER, RFS_HEADER, raps_header, read_csv
from gtn.service import experiments

from conftest import experiment_yaml


@pytest.fixture(autouse=True)
def quiet_logging(monkeypatch):
    monkeypatch.setattr(cli, "configure_logging", lambda level, command=None: None)


def run(*argv):
    return cli.main([str(a) for a in argv])


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def single_task_file(tmp_path, task="shoot"):
    path = tmp_path / f"{task}.yaml"
    path.write_text(experiment_yaml(tasks=(task,), workers=1))
    return path


def test_train_writes_every_listed_artifact(experiment_file, tmp_path, capsys):
    out = tmp_path / "train"
    assert run("train", "--config", experiment_file, "--out", out, "--checkpoint-every", 2) == 0
    assert capsys.readouterr().out.strip() == str(out / "manifest.json")

    data = manifest(out)
    assert data["command"] == "train"
    assert data["architecture"] == ArchitectureTag.GTN
    assert data["extra"]["torn_snapshots"] == 0
    assert set(data["extra"]["episodes"]) == {"shoot", "aim", "aim_valid"}
    listed = set(data["artifacts"].values())
    written = {str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()} - {"manifest.json"}
    assert listed == written
    assert {"model.gtn", "model.json", "training_log.jsonl", "config.yaml"} <= listed
    assert "checkpoints/model_ep000002.gtn" in listed


def test_recorded_config_reloads_to_the_same_hash(experiment_file, tmp_path):
    out = tmp_path / "train"
    run("train", "--config", experiment_file, "--out", out, "--seed", 4)
    recorded = parse_experiment((out / "config.yaml").read_text())
    assert recorded.train.seed == 4
    assert manifest(out)["config_hash"] == experiments.config_hash(recorded)


def test_single_worker_training_is_reproducible(tmp_path):
    config = single_task_file(tmp_path)
    for name in ("a", "b"):
        assert run("train", "--config", config, "--out", tmp_path / name, "--seed", 3) == 0
    a, b = manifest(tmp_path / "a"), manifest(tmp_path / "b")
    assert a["extra"]["checkpoint_sha256"] == b["extra"]["checkpoint_sha256"]
    assert a["config_hash"] == b["config_hash"]


def test_unknown_key_exits_with_configuration_error(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    text = experiment_yaml(extra_model="  depth: 3\n")
    path.write_text(text)
    assert run("train", "--config", path, "--out", tmp_path / "out") == 2
    err = capsys.readouterr().err
    line = text.splitlines().index("  depth: 3") + 1
    assert f"{path}:{line}: model.depth: unknown key 'depth'" in err
    assert not (tmp_path / "out").exists()


def test_bad_override_is_a_configuration_error(experiment_file, tmp_path):
    assert run("train", "--config", experiment_file, "--out", tmp_path / "out", "--workers", 1) == 2


def test_eval_against_itself_gives_rfs_one(tmp_path):
    config = single_task_file(tmp_path)
    run("train", "--config", config, "--out", tmp_path / "train")
    checkpoint = tmp_path / "train" / "model.gtn"

    assert run("eval", checkpoint, "--config", config, "--out", tmp_path / "single") == 0
    assert not (tmp_path / "single" / "rfs.csv").exists()
    assert json.loads((tmp_path / "single" / "eval_report.json").read_text())["rfs"] is None

    assert run("eval", checkpoint, "--config", config, "--out", tmp_path / "multi", "--reference", tmp_path / "single") == 0
    [row] = read_csv(tmp_path / "multi" / "rfs.csv")
    assert list(row) == RFS_HEADER
    if float(row["single_adjusted"]) != 0.0:
        assert float(row["rfs"]) == 1.0
        assert row["defined"] == "true"


def test_eval_with_a_missing_reference(tmp_path, capsys):
    config = single_task_file(tmp_path)
    run("train", "--config", config, "--out", tmp_path / "train")
    code = run(
        "eval", tmp_path / "train" / "model.gtn", "--config", config,
        "--out", tmp_path / "eval", "--reference", tmp_path / "nowhere",
    )
    assert code == 2
    assert "--reference" in capsys.readouterr().err


def test_eval_of_a_corrupt_checkpoint(tmp_path, experiment_file):
    bad = tmp_path / "model.gtn"
    bad.write_bytes(b"nope")
    assert run("eval", bad, "--config", experiment_file, "--out", tmp_path / "eval") == 3


def test_baseline_is_tagged_and_single_level(experiment_file, tmp_path):
    out = tmp_path / "baseline"
    assert run("baseline", "--config", experiment_file, "--out", out) == 0
    data = manifest(out)
    assert data["architecture"] == ArchitectureTag.BASELINE
    sidecar = json.loads((out / "model.json").read_text())
    assert sidecar["config"]["levels"] == 1


def test_baseline_warns_when_overriding_levels(experiment_file, tmp_path, caplog):
    config = parse_experiment(experiment_file.read_text())
    with caplog.at_level(logging.WARNING, logger="gtn.service.experiments"):
        experiments.run_baseline(config, tmp_path / "baseline")
    assert any("single level" in r.getMessage() for r in caplog.records)


def test_baseline_comparison_needs_references(experiment_file, tmp_path):
    run("train", "--config", experiment_file, "--out", tmp_path / "gtn")
    code = run(
        "baseline", "--config", experiment_file, "--out", tmp_path / "baseline",
        "--compare", tmp_path / "gtn" / "model.gtn",
    )
    assert code == 2


def test_hierarchy_writes_the_knowledge_matrix(experiment_file, tmp_path):
    out = tmp_path / "hierarchy"
    assert run("hierarchy", "--config", experiment_file, "--out", out, "--episodes", 10, "--seeds", 0, 1) == 0
    rows = read_csv(out / "knowledge_matrix.csv")
    assert list(rows[0]) == KNOWLEDGE_HEADER
    assert len(rows) == 9
    assert manifest(out)["extra"]["hierarchy_holds"] is True


def test_ablate_writes_one_row_per_cell_and_mode(tmp_path):
    config = tmp_path / "two.yaml"
    config.write_text(experiment_yaml(tasks=("shoot", "aim"), workers=2))
    out = tmp_path / "ablate"
    assert run("ablate", "--config", config, "--out", out, "--levels", 1, 2, "--layers", 1, 2) == 0
    rows = read_csv(out / "ablation.csv")
    assert list(rows[0]) == ABLATION_HEADER
    assert [(r["mode"], r["levels"], r["layers"]) for r in rows] == [
        (mode, m, n) for mode in ("single", "multi") for m in ("1", "2") for n in ("1", "2")
    ]


def test_ablate_rejects_an_invalid_grid(experiment_file, tmp_path):
    assert run("ablate", "--config", experiment_file, "--out", tmp_path / "a", "--levels", 0, "--layers", 1) == 2


def test_raps_episode_axis(experiment_file, tmp_path):
    out = tmp_path / "raps"
    assert run("raps", "--config", experiment_file, "--out", out, "--episode-axis", "--checkpoint-every", 2) == 0
    rows = read_csv(out / "raps.csv")
    assert list(rows[0]) == raps_header(2)
    assert sorted(int(r["episode"]) for r in rows) == [2, 4, 6]
    report = json.loads((out / "raps_report.json").read_text())
    assert report["trend"] is None


def test_raps_task_axis(experiment_file, tmp_path):
    out = tmp_path / "raps"
    assert run("raps", "--config", experiment_file, "--out", out, "--task-counts", 1, 3) == 0
    rows = read_csv(out / "raps.csv")
    assert [r["task_count"] for r in rows] == ["1", "3"]
    assert "per_seed" in json.loads((out / "raps_report.json").read_text())["trend"]


def test_raps_episode_axis_needs_an_interval(experiment_file, tmp_path):
    assert run("raps", "--config", experiment_file, "--out", tmp_path / "r", "--episode-axis") == 2
