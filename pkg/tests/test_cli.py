import csv
import json

import pytest
from typer.testing import CliRunner

from src.cli import app


runner = CliRunner()


def invoke(*args, **kwargs):
    return runner.invoke(app, [str(a) for a in args], **kwargs)


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


@pytest.fixture
def scene_path(tmp_path):
    result = invoke("make-scene", "--out", tmp_path / "scene", "--gaussians", 6, "--views", 3, "--size", 16, "--seed", 2)
    assert result.exit_code == 0, result.output
    return tmp_path / "scene" / "scene.json"


@pytest.fixture
def train_toml(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('[train]\ndtype = "float64"\niterations = 3\nlog_every = 1\n')
    return path


@pytest.fixture
def dataset(tmp_path, scene_path):
    out = tmp_path / "data"
    result = invoke("synth", "--out", out, "--scene", scene_path, "--profile", "varying", "--seed", 5)
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture
def trained(tmp_path, scene_path, dataset, train_toml):
    out = tmp_path / "train"
    result = invoke("train", "--out", out, "--scene", scene_path, "--images", dataset / "degraded", "--config", train_toml)
    assert result.exit_code == 0, result.output
    return out


def test_make_scene(tmp_path, scene_path):
    data = json.loads(scene_path.read_text())
    assert len(data["gaussians"]) == 6
    assert [c["view_id"] for c in data["cameras"]] == ["view_000", "view_001", "view_002"]
    manifest = json.loads((scene_path.parent / "run_manifest.json").read_text())
    assert manifest["command"] == "make-scene"
    assert manifest["seed"] == 2


def test_synth_none_copies_clean(tmp_path, scene_path):
    out = tmp_path / "none"
    assert invoke("synth", "--out", out, "--scene", scene_path, "--profile", "none").exit_code == 0
    for clean in sorted((out / "clean").glob("*.png")):
        assert (out / "degraded" / clean.name).read_bytes() == clean.read_bytes()
    manifest = json.loads((out / "degradations.json").read_text())
    assert manifest["profile"] == "none"
    assert len(manifest["views"]) == 3


def test_synth_same_seed_is_byte_identical(tmp_path, scene_path, dataset):
    again = tmp_path / "again"
    assert invoke("synth", "--out", again, "--scene", scene_path, "--profile", "varying", "--seed", 5).exit_code == 0
    for first in sorted((dataset / "degraded").glob("*.png")):
        assert (again / "degraded" / first.name).read_bytes() == first.read_bytes()
    assert (again / "degradations.json").read_text() == (dataset / "degradations.json").read_text()


def test_synth_unknown_profile(tmp_path, scene_path):
    result = invoke("synth", "--out", tmp_path / "x", "--scene", scene_path, "--profile", "sepia")
    assert result.exit_code == 2
    assert "unknown profile" in result.output


def test_synth_needs_a_scene(tmp_path):
    result = invoke("synth", "--out", tmp_path / "x", "--profile", "none")
    assert result.exit_code == 1
    assert "no scene" in result.output


def test_train_outputs(trained):
    rows = read_csv(trained / "loss.csv")
    assert rows[0] == ["iter", "reg", "spa", "tv", "curve", "cc", "total"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
    config = json.loads((trained / "config.json").read_text())
    assert config["iterations"] == 3 and config["dtype"] == "float64"
    assert (trained / "checkpoint.pt").exists()


def test_train_resume_continues(tmp_path, trained):
    out = tmp_path / "resumed"
    result = invoke("train", "--out", out, "--resume", trained / "checkpoint.pt", "--iterations", 5)
    assert result.exit_code == 0, result.output
    assert [r[0] for r in read_csv(out / "loss.csv")[1:]] == ["0", "1", "2", "3", "4"]


def test_render_is_reproducible(tmp_path, trained):
    first, second = tmp_path / "r1", tmp_path / "r2"
    for out in (first, second):
        result = invoke(
            "render", "--checkpoint", trained / "checkpoint.pt", "--out", out, "--dump-residual", "--contact-sheet"
        )
        assert result.exit_code == 0, result.output
    names = sorted(p.name for p in (first / "renders").glob("*.png"))
    assert names == ["view_000.png", "view_001.png", "view_002.png"]
    for name in names:
        assert (first / "renders" / name).read_bytes() == (second / "renders" / name).read_bytes()
    assert (first / "contact_sheet.png").exists()
    assert len(list((first / "residuals").glob("*.png"))) == 3


def test_render_unknown_view(tmp_path, trained):
    result = invoke("render", "--checkpoint", trained / "checkpoint.pt", "--out", tmp_path / "r", "--views", "nope")
    assert result.exit_code == 2
    assert "unknown view" in result.output


def test_export_curves(tmp_path, trained):
    out = tmp_path / "curves"
    assert invoke("export-curves", "--checkpoint", trained / "checkpoint.pt", "--out", out).exit_code == 0
    rows = read_csv(out / "curves.csv")
    assert rows[0] == ["view_id", "index", "global", "bias", "curve"]
    assert len(rows) == 1 + 3 * 256
    assert {r[0] for r in rows[1:]} == {"view_000", "view_001", "view_002"}


def test_eval_identical_folders(tmp_path, dataset):
    out = tmp_path / "eval"
    result = invoke("eval", "--renders", dataset / "clean", "--truth", dataset / "clean", "--out", out)
    assert result.exit_code == 0, result.output
    assert "mean PSNR 99.0 dB" in result.output
    rows = read_csv(out / "metrics.csv")
    assert rows[-1][0] == "mean"
    assert float(rows[-1][1]) == 99.0
    assert (out / "eval_report.json").exists()


def test_eval_missing_truth(tmp_path, dataset):
    result = invoke("eval", "--renders", dataset / "clean", "--truth", tmp_path / "nothing", "--out", tmp_path / "e")
    assert result.exit_code == 2


def test_gradcheck_subset_passes(tmp_path):
    out = tmp_path / "grad"
    result = invoke("gradcheck", "--out", out, "--ops", "apply_matrix,loss_tv")
    assert result.exit_code == 0, result.output
    rows = read_csv(out / "gradcheck.csv")
    assert [r[0] for r in rows[1:]] == ["apply_matrix", "loss_tv"]
    assert all(r[2] == "true" for r in rows[1:])


def test_gradcheck_failure_exit_code(tmp_path):
    result = invoke("gradcheck", "--out", tmp_path / "g", "--ops", "loss_spa", "--tolerance", "1e-30")
    assert result.exit_code == 3
    assert "loss_spa" in result.output


@pytest.mark.parametrize("flags", [["--step", "-1"], ["--ops", "not_an_op"]])
def test_gradcheck_usage_errors(tmp_path, flags):
    assert invoke("gradcheck", "--out", tmp_path / "g", *flags).exit_code == 1


def test_malformed_config_reports_key_path(tmp_path, scene_path, dataset):
    bad = tmp_path / "bad.toml"
    bad.write_text("[train]\niterations = 0\n")
    result = invoke("train", "--out", tmp_path / "t", "--scene", scene_path, "--images", dataset / "degraded", "--config", bad)
    assert result.exit_code == 1
    assert "train.iterations" in result.output


def test_missing_config_file(tmp_path, scene_path, dataset):
    result = invoke(
        "train", "--out", tmp_path / "t", "--scene", scene_path, "--images", dataset / "degraded",
        "--config", tmp_path / "absent.toml",
    )
    assert result.exit_code == 2


def test_invalid_thread_count(tmp_path):
    result = invoke("make-scene", "--out", tmp_path / "s", env={"TONESPLAT_THREADS": "many"})
    assert result.exit_code == 1
    assert "TONESPLAT_THREADS" in result.output


def test_compare_rejects_unknown_variant(tmp_path, scene_path):
    result = invoke("compare", "--out", tmp_path / "c", "--scene", scene_path, "--variants", "full,magic")
    assert result.exit_code == 1
    assert "magic" in result.output
