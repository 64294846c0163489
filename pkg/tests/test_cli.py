"""Configuration handling, run reports and the command-line interface."""

import json
import math
import subprocess
import sys

import pytest

from gbmfeynman.cli import format_complex, main
from gbmfeynman.config import build, config_hash, load_config, normalize, preset_names
from gbmfeynman.errors import ConfigError
from gbmfeynman.reports import report_json, run_suites

SMALL = {
    "mean": {"family": "linear", "alpha": 0.5},
    "variance": {"family": "polynomial", "coeffs": [0, 1, 0.5]},
    "grid_n": 64,
    "atoms": [
        {"weight": [0.6, 0.2], "density": {"family": "constant", "c": 1.0}},
        {"weight": [0.0, -0.4], "density": {"family": "sine", "amplitude": 0.8, "frequency": 2.0}},
    ],
    "operator": {"kind": "theta", "vartheta": "b"},
    "directions": {"g": {"family": "linear", "alpha": 0.7}},
    "N": 5000,
    "seed": 42,
}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# ---------------------------------------------------------------- config


def test_presets_are_bundled():
    assert set(preset_names()) >= {
        "table1_identity",
        "table1_negated",
        "section5_sine",
        "corollary_single_space",
        "delta_zero",
    }


def test_normalize_is_idempotent():
    once = normalize(SMALL)
    assert normalize(once) == once
    assert once["atoms"][1]["density"]["phase"] == 0.0


def test_hash_ignores_formatting_and_tracks_content():
    reordered = json.loads(json.dumps(SMALL, indent=7, sort_keys=True))
    assert config_hash(reordered) == config_hash(SMALL)
    assert config_hash(dict(SMALL, seed=43)) != config_hash(SMALL)


def test_missing_atoms_means_delta_zero():
    exp = build(normalize({"variance": {"family": "linear", "alpha": 1.0}}))
    assert len(exp.measure) == 1 and exp.measure.weights[0] == 1.0


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"variance": {"family": "polynomial", "coeffs": [0, -1]}}, "variance"),
        ({"atoms": []}, "atoms"),
        ({"q": [1, 0]}, "q"),
        ({"grid_n": 1}, "grid_n"),
        ({"bogus": 1}, "bogus"),
        ({"seed": -1}, "seed"),
        ({"operator": {"kind": "theta", "vartheta": "cosine"}}, "operator"),
    ],
)
def test_config_errors_name_the_field(patch, field):
    with pytest.raises(ConfigError, match=field):
        build(normalize(dict(SMALL, **patch)))


def test_seed_precedence(tmp_path, monkeypatch):
    path = write(tmp_path, SMALL)
    assert load_config(path).config["seed"] == 42
    monkeypatch.setenv("GBMF_SEED", "7")
    assert load_config(path).config["seed"] == 7
    assert load_config(path, seed_override=9).config["seed"] == 9
    monkeypatch.setenv("GBMF_SEED", "x")
    with pytest.raises(ConfigError, match="GBMF_SEED"):
        load_config(path)


def test_verify_needs_hundred_paths(tmp_path):
    with pytest.raises(ConfigError, match="N"):
        load_config(write(tmp_path, dict(SMALL, N=10)))


# ---------------------------------------------------------------- reports


def test_run_report_structure():
    exp = build(normalize(SMALL))
    report = run_suites(exp, ["cs-feynman", "final-display"])
    d = json.loads(report_json(report))
    assert d["overall_pass"] is True
    assert d["suites"] == ["cs-feynman", "final-display"]
    names = [c["name"] for c in d["checks"]]
    assert names[0] == "cs-feynman" and "final-display" in names
    assert any(n.startswith("operator-table") for n in names)
    assert "step2-formula-1" in names
    assert d["config_hash"] == config_hash(SMALL)


def test_final_display_skipped_for_operator_pairs():
    exp = load_config("corollary_single_space")
    report = run_suites(exp, ["final-display"])
    assert report.checks == [] and report.skipped


# ---------------------------------------------------------------- CLI


def test_simulate_writes_paths(tmp_path, capsys):
    cfg = dict(SMALL, grid_n=4, N=2)
    out = tmp_path / "paths"
    assert main(["simulate", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    files = sorted(out.iterdir())
    assert [f.name for f in files] == ["path_00000.csv", "path_00001.csv"]
    rows = files[0].read_text().splitlines()
    assert rows[0] == "t,x" and len(rows) == 6
    assert rows[1].split(",")[1] in ("0", "0.0", "0.000000000000000000e+00")
    first = [f.read_bytes() for f in files]
    assert main(["simulate", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    assert [f.read_bytes() for f in sorted(out.iterdir())] == first


def test_simulate_series_and_seed_override(tmp_path):
    cfg = dict(SMALL, grid_n=8, N=1, simulator={"kind": "series", "M": 16})
    path = write(tmp_path, cfg)
    main(["simulate", "--config", path, "--out", str(tmp_path / "a")])
    main(["simulate", "--config", path, "--out", str(tmp_path / "b"), "--seed-override", "5"])
    a = (tmp_path / "a" / "path_00000.csv").read_text()
    b = (tmp_path / "b" / "path_00000.csv").read_text()
    assert a != b


def test_bad_variance_exits_with_config_error(tmp_path, capsys):
    cfg = dict(SMALL, variance={"family": "polynomial", "coeffs": [0, -1]})
    assert main(["simulate", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    assert "variance" in capsys.readouterr().err


def test_unknown_config_exits_2(capsys):
    assert main(["feynman", "--config", "no_such_preset"]) == 2


def test_bad_seed_flag_is_rejected():
    with pytest.raises(SystemExit):
        main(["feynman", "--config", "delta_zero", "--seed-override", "-3"])


def test_format_complex():
    assert format_complex(1 + 0j) == "1.000000000000 + 0.000000000000i"
    assert format_complex(0.5 - 0.25j) == "0.500000000000 - 0.250000000000i"


def test_feynman_delta_zero(capsys):
    assert main(["feynman", "--config", "delta_zero"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "1.000000000000 + 0.000000000000i"
    assert lines[1].startswith("q0 = ") and lines[2].startswith("F_bound = ")


def test_feynman_unit_atom(tmp_path, capsys):
    cfg = {
        "variance": {"family": "linear", "alpha": 1.0},
        "atoms": [{"weight": [1, 0], "density": {"family": "constant", "c": 1.0}}],
        "operator": {"kind": "pair", "A1": {"family": "constant", "c": 1.0}, "A2": {"family": "zero"}},
        "q": [1, -1],
    }
    assert main(["feynman", "--config", write(tmp_path, cfg)]) == 0
    out = capsys.readouterr().out.splitlines()[0]
    assert out == format_complex(complex(math.cos(0.5), -math.sin(0.5)))


def test_verify_delta_zero_all_suites(tmp_path, capsys):
    target = tmp_path / "r.json"
    assert main(["verify", "--config", "delta_zero", "--out", str(target)]) == 0
    d = json.loads(target.read_text())
    assert d["overall_pass"] is True
    assert d["suites"] == ["translation", "parts", "parts-scaled", "continuation", "cs-feynman", "final-display"]
    for check in d["checks"]:
        if check["kind"] == "statistical" and not check["name"].startswith("continuation"):
            assert check["z"] == 0.0 and check["estimate"]["stderr"] == [0.0, 0.0]
    err = capsys.readouterr().err
    assert "PASS" in err and "FAIL" not in err


def test_verify_single_suite_to_stdout(tmp_path, capsys):
    assert main(["verify", "--config", write(tmp_path, SMALL), "--suite", "parts"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert [c["name"] for c in d["checks"]] == ["parts"]


def test_verify_failure_exits_1(tmp_path, capsys):
    # an impossible tolerance makes the closed-form comparison fail
    cfg = dict(SMALL, tolerances={"rel_tol": -1.0})
    assert main(["verify", "--config", write(tmp_path, cfg), "--suite", "cs-feynman"]) == 1
    assert "FAIL" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "gbmfeynman", "feynman", "--config", "delta_zero"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("1.000000000000 + 0.000000000000i")
