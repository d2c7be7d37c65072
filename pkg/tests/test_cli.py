"""End-to-end checks of the configuration-driven pipeline.

The pipeline runs twice into separate directories with the same light
configuration; every artifact must come out byte-identical, which is
the determinism contract the manifest advertises.
"""

import hashlib
import json
import shutil
import subprocess

import pytest

from multibump import ValidationError
from multibump.cli import RunConfig, main

LIGHT_CONFIG = {
    "dimension": 2,
    "exponent": 3.0,
    "k_values": [6, 8],
    "grid_step": 0.15,
    "curve_samples": 9,
}

EXPECTED_ARTIFACTS = [
    "ground_state.csv",
    "ground_state.json",
    "constants.json",
    "interaction.csv",
    "interaction.json",
    "expansion.csv",
    "f_curve_k6.csv",
    "f_curve_k8.csv",
    "reduce.json",
    "scaling.csv",
    "solution_k6.csv",
    "certificate_k6.json",
    "solution_k8.csv",
    "certificate_k8.json",
    "plot_f_curves.csv",
    "plot_trend.csv",
    "summary.md",
]


def write_config(tmp_path, mapping):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(mapping))
    return str(path)


def hash_tree(root):
    out = {}
    for path in sorted(root.iterdir()):
        out[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def test_config_round_trip():
    cfg = RunConfig(k_values=(4, 7, 9), grid_step=0.2, probe_seed=3)
    assert RunConfig.from_mapping(cfg.to_mapping()) == cfg


def test_config_rejects_unknown_and_badly_typed_keys():
    with pytest.raises(ValidationError, match="unknown key"):
        RunConfig.from_mapping({"spacing": 0.1})
    with pytest.raises(ValidationError, match="cannot interpret"):
        RunConfig.from_mapping({"grid_step": "fine"})
    with pytest.raises(ValidationError, match="k_values"):
        RunConfig.from_mapping({"k_values": [6, 8.5]})


def test_config_precondition_messages():
    with pytest.raises(ValidationError, match="supercritical"):
        RunConfig.from_mapping({"dimension": 3, "exponent": 7.0})
    with pytest.raises(ValidationError, match="wall_margin"):
        RunConfig.from_mapping({"wall_margin": 10.0})
    with pytest.raises(ValidationError, match="curve_samples"):
        RunConfig.from_mapping({"curve_samples": 5})
    with pytest.raises(ValidationError, match="strictly increasing"):
        RunConfig.from_mapping({"k_values": [8, 6]})


def test_main_reports_config_errors(tmp_path, capsys):
    cfg = write_config(tmp_path, {"dimension": 3, "exponent": 7.0})
    assert main(["all", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert "config error:" in err
    assert "supercritical" in err


def test_main_rejects_jobs_zero(tmp_path, capsys):
    assert main(["all", "--jobs", "0", "--out", str(tmp_path)]) == 2
    assert "--jobs" in capsys.readouterr().err


def test_main_rejects_both_stage_spellings(tmp_path, capsys):
    code = main(["--stage", "report", "report", "--out", str(tmp_path)])
    assert code == 2
    assert "not both" in capsys.readouterr().err


def test_report_requires_upstream_artifacts(tmp_path, capsys):
    out = tmp_path / "empty"
    assert main(["report", "--out", str(out)]) == 2
    err = capsys.readouterr().err
    assert "missing artifact: constants.json" in err
    # the failure is recorded in the manifest
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["stages"]["report"]["status"] == "error"


def test_ground_state_stage_alone(tmp_path):
    out = tmp_path / "gs"
    assert main(["ground-state", "--out", str(out)]) == 0
    assert (out / "ground_state.csv").exists()
    meta = json.loads((out / "ground_state.json").read_text())
    assert meta["dimension"] == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["stages"]) == {"ground-state"}


def test_console_script_is_installed():
    exe = shutil.which("multibump")
    if exe is None:
        pytest.skip("console script not on PATH")
    proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "usage" in proc.stdout.lower()


@pytest.fixture(scope="module")
def pipeline_dirs(tmp_path_factory):
    base = tmp_path_factory.mktemp("pipeline")
    cfg = write_config(base, LIGHT_CONFIG)
    out1, out2 = base / "run1", base / "run2"
    code1 = main(["all", "--config", cfg, "--out", str(out1)])
    code2 = main(["all", "--config", cfg, "--out", str(out2)])
    return cfg, out1, out2, code1, code2


def test_pipeline_completes(pipeline_dirs):
    _, out1, _, code1, _ = pipeline_dirs
    assert code1 == 0
    for name in EXPECTED_ARTIFACTS:
        assert (out1 / name).exists(), name


def test_pipeline_manifest(pipeline_dirs):
    _, out1, _, _, _ = pipeline_dirs
    manifest = json.loads((out1 / "manifest.json").read_text())
    for name in EXPECTED_ARTIFACTS:
        assert name in manifest["hashes"], name
        digest = hashlib.sha256((out1 / name).read_bytes()).hexdigest()
        assert manifest["hashes"][name] == digest
    assert manifest["config"]["grid_step"] == 0.15
    for stage, entry in manifest["stages"].items():
        assert entry["status"] == "ok", stage


def test_pipeline_certificates(pipeline_dirs):
    _, out1, _, _, _ = pipeline_dirs
    for k in (6, 8):
        cert = json.loads((out1 / f"certificate_k{k}.json").read_text())
        assert cert["k"] == k
        assert cert["residual_norm"] <= 1e-6
        assert cert["min_value"] > 0.0
        assert cert["nonradiality"] >= 0.1


def test_pipeline_is_deterministic(pipeline_dirs):
    _, out1, out2, code1, code2 = pipeline_dirs
    assert code1 == 0 and code2 == 0
    assert hash_tree(out1) == hash_tree(out2)


def test_report_is_idempotent(pipeline_dirs, capsys):
    cfg, out1, _, _, _ = pipeline_dirs
    before = hash_tree(out1)
    assert main(["--stage", "report", "--config", cfg, "--out", str(out1)]) == 0
    capsys.readouterr()
    assert hash_tree(out1) == before
