"""Command-line client: dispatch, config merging, error surfacing, replay."""

import json

import numpy as np
from click.testing import CliRunner

from scorelab.cli import main
from scorelab.oracle import OracleProfile
from scorelab.protocol import SamplerConfig, open_session, run_sampler, transcript_to_json
from scorelab.support import build_support

_SWEEP = ["sweep", "--d", "16", "--trials", "1", "--points", "33", "--seed", "4"]


def _invoke(args, env=None):
    return CliRunner().invoke(main, args, env=env, catch_exceptions=False)


def test_sweep_prints_manifest_and_reruns_byte_identical(tmp_path):
    out = tmp_path / "run1"
    res = _invoke(_SWEEP + ["--output-dir", str(out)])
    assert res.exit_code == 0, res.output
    manifest = json.loads(res.output)
    assert manifest["experiment"] == "sweep"
    assert "q_rho" in manifest["values"]
    first = (out / "sweep.csv").read_bytes()

    res2 = _invoke(_SWEEP + ["--output-dir", str(out)])
    assert res2.exit_code == 0
    assert (out / "sweep.csv").read_bytes() == first


def test_parameter_errors_exit_nonzero_with_message(tmp_path):
    res = _invoke(["sweep", "--d", "511", "--output-dir", str(tmp_path)])
    assert res.exit_code == 1
    assert "even dimension required, got 511" in res.stderr


def test_config_file_merges_under_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 11, "trials": 1, "points": 33, "d": 32}))
    out = tmp_path / "out"
    res = _invoke(["sweep", "--config", str(cfg), "--d", "16", "--output-dir", str(out)])
    assert res.exit_code == 0, res.output
    saved = json.loads((out / "config.json").read_text())
    assert saved["seed"] == 11  # from the file
    assert saved["d"] == 16  # flag wins
    assert saved["trials"] == 1


def test_malformed_config_names_file_and_line(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text('{"seed": 1,}\n')
    res = _invoke(["sweep", "--config", str(cfg)])
    assert res.exit_code == 1
    assert f"{cfg}:1:" in res.stderr


def test_unknown_config_field_points_at_its_line(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{\n  "bogus_knob": 3\n}\n')
    res = _invoke(["sweep", "--config", str(cfg), "--output-dir", str(tmp_path / "o")])
    assert res.exit_code == 1
    assert "bogus_knob" in res.stderr
    assert f"{cfg}:2" in res.stderr


def test_fig1_without_dimension_ladder_is_rejected(tmp_path):
    res = _invoke(["fig1", "--trials", "1", "--output-dir", str(tmp_path)])
    assert res.exit_code == 1
    assert "fig1 needs a nonempty d_list" in res.stderr


def test_output_dir_env_fallback(tmp_path):
    res = _invoke(_SWEEP, env={"SCORELAB_OUTPUT_DIR": str(tmp_path)})
    assert res.exit_code == 0, res.output
    assert (tmp_path / "sweep.csv").exists()


def test_schema_check_command(tmp_path):
    out = tmp_path / "run"
    assert _invoke(_SWEEP + ["--output-dir", str(out)]).exit_code == 0
    res = _invoke(["schema-check", str(out / "sweep.csv")])
    assert res.exit_code == 0
    assert "schema 'curves', 33 rows" in res.output

    broken = tmp_path / "broken.csv"
    broken.write_text("d,rho,trials,tau_star,ln_tau,median_signal\n16,0.2,oops,1.0,0.0,0.5\n")
    res = _invoke(["schema-check", str(broken)])
    assert res.exit_code == 1
    assert "column 'trials' row 1" in res.stderr


def test_replay_reproduces_null_transcript(tmp_path):
    spec = build_support("hypercube", 6, 1.0, 0.4)
    session = open_session(spec, OracleProfile("lp", 0.5), 3)
    config = SamplerConfig("reverse-sde-euler", np.geomspace(2.0, 0.1, 4))
    run_sampler(config, session, 9)
    src = tmp_path / "transcript.json"
    src.write_text(transcript_to_json(session.transcript))

    dst = tmp_path / "replayed.json"
    res = _invoke(["replay", str(src), "--d", "6", "--gamma", "0.4", "--out", str(dst)])
    assert res.exit_code == 0, res.output
    original = json.loads(src.read_text())
    replayed = json.loads(dst.read_text())
    assert len(replayed["entries"]) == 4
    for a, b in zip(original["entries"], replayed["entries"]):
        assert a["sigma"] == b["sigma"] and a["x"] == b["x"]
        assert a["answer"] == b["answer"]
