import hashlib
import json
import math

import numpy as np
import pytest

from hrlab.cli import EXIT_ASSERT, EXIT_BLOWUP, EXIT_OK, EXIT_VALIDATION, burst_table, main, rng_for

QUICK = {
    "params": "paper-typical",
    "domain": {"lengths": ["pi"]},
    "m_max": 8,
    "stepper": {"dt": 0.001, "record_every": 100},
    "seed": 11,
    "simulate": {"T": 1.0},
    "ode": {"T": 20.0},
    "absorb": {"ensemble": 4, "norm_max": 20.0, "horizon": 10.0, "warmup_time": 0.1, "sample_every": 5},
    "squeeze": {"n_pairs": 6, "t_star": 0.1, "embedding_samples": 1000, "phi_pairs": 2, "phi_T": 5e-5},
    "lipschitz": {"n_pairs": 4, "t_max": 0.1, "t_points": 3, "time_states": 2, "time_t_star": 0.1,
                  "embedding_samples": 1000},
    "determine": {"n_pairs": 4, "n_contrapositive": 2, "m": 2, "horizon": 5.0},
    "dimension": {"m": 2, "lipschitz": 2.0},
}


def write_config(tmp_path, name="c.json", **changes):
    data = json.loads(json.dumps(QUICK))
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key].update(value)
        else:
            data[key] = value
    data.setdefault("output_dir", str(tmp_path / "out"))
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return path


def run_cli(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def absorb_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("absorb")
    cfg = write_config(tmp, output_dir=str(tmp / "out"))
    assert run_cli("absorb", "--config", cfg) == EXIT_OK
    return tmp / "out"


def test_rng_streams_are_independent_and_reproducible():
    a = rng_for(2 ** 63 + 5, "x").random(3)
    assert (a == rng_for(2 ** 63 + 5, "x").random(3)).all()
    assert not (a == rng_for(2 ** 63 + 5, "y").random(3)).any()
    assert not (a == rng_for(5, "x").random(3)).any()


def test_burst_table():
    t = [float(i) for i in range(12)]
    u = [0, 2, 0, 2, 0, 0, 0, 0, 0, 2, 0, 0]
    spikes, bursts = burst_table(np.array(t), np.array(u), 1.0, 3.0)
    assert list(spikes) == [1.0, 3.0, 9.0]
    assert [b["n_spikes"] for b in bursts] == [2, 1]


def test_simulate_outputs_and_determinism(tmp_path, capsys):
    cfg = write_config(tmp_path, simulate={"T": 1.0})
    assert run_cli("simulate", "--config", cfg) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    out = tmp_path / "out"
    rows = (out / "trajectory.csv").read_text().splitlines()
    # T / (dt * record_every) intervals, both ends recorded, three components per sample
    assert len(rows) == 1 + 3 * (10 + 1) and summary["n_samples"] == 11
    manifest = json.loads((out / "simulate_manifest.json").read_text())
    assert manifest["seed"] == 11 and manifest["exit_code"] == 0
    assert manifest["config"]["params"]["J"] == 3.281 and "versions" in manifest
    assert manifest["outputs"]["trajectory.csv"] == hashlib.sha256((out / "trajectory.csv").read_bytes()).hexdigest()
    first = (out / "trajectory.csv").read_bytes(), (out / "trajectory.hrtraj").read_bytes()
    assert run_cli("simulate", "--config", cfg) == EXIT_OK
    assert first == ((out / "trajectory.csv").read_bytes(), (out / "trajectory.hrtraj").read_bytes())


def test_seed_and_out_overrides(tmp_path):
    cfg = write_config(tmp_path)
    assert run_cli("simulate", "--config", cfg, "--seed", 3, "--out", tmp_path / "a") == EXIT_OK
    assert run_cli("simulate", "--config", cfg, "--seed", 4, "--out", tmp_path / "b") == EXIT_OK
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a != (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert json.loads((tmp_path / "a" / "simulate_manifest.json").read_text())["seed"] == 3


def test_ode_reference_hash(tmp_path):
    # zero initial data, T = 20, dt = 1e-3, every 10th step
    cfg = write_config(tmp_path)
    assert run_cli("ode", "--config", cfg) == EXIT_OK
    report = json.loads((tmp_path / "out" / "ode_report.json").read_text())
    assert report["summary"]["series_sha256"] == "de47793c6a7eeeac49ba3c2f301199fea5cf84e6baab8b96ca7110b6ad23b698"
    assert report["summary"]["n_spikes"] == 6 and report["kind"] == "ode"


def test_invalid_parameter_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, params={"b": 0})
    assert run_cli("simulate", "--config", cfg) == EXIT_VALIDATION
    assert "params.b" in capsys.readouterr().err


def test_unknown_key_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, simulate={"TT": 1})
    assert run_cli("simulate", "--config", cfg) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "simulate.TT" in err and "line" in err


def test_bad_arguments():
    assert run_cli("simulate") == EXIT_VALIDATION
    assert run_cli("nonsense", "--config", "x") == EXIT_VALIDATION


def test_blowup_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, stepper={"dt": 1.0, "record_every": 1},
                       simulate={"T": 5.0, "initial": {"kind": "random", "e_norm": 200.0}})
    assert run_cli("simulate", "--config", cfg) == EXIT_BLOWUP
    assert "last valid time" in capsys.readouterr().err


def test_absorb_artifact(absorb_dir):
    report = json.loads((absorb_dir / "absorb_report.json").read_text())
    assert report["kind"] == "absorb" and report["verdict"] == "pass"
    assert report["config"]["absorb"]["ensemble"] == 4
    assert len(report["records"]) == 4 and report["n_samples"] == len(report["sample_members"])
    assert (absorb_dir / "absorb_samples.hrtraj").read_bytes()[:8] == b"HRTRAJ01"


def test_squeeze_pass_with_artifact(tmp_path, absorb_dir):
    cfg = write_config(tmp_path, squeeze={"absorb_artifact": str(absorb_dir)})
    assert run_cli("squeeze", "--config", cfg) == EXIT_OK
    report = json.loads((tmp_path / "out" / "squeeze_report.json").read_text())
    assert report["verdict"] == "pass" and report["ensemble"]["source"] == "artifact"
    assert len(report["records"]) == 6
    assert all(r["cone_ok"] or r["contraction_ok"] for r in report["records"])
    assert {"median", "max"} <= set(report["squeeze"]["delta_distribution"])
    assert report["squeeze"]["theory"]["n_rank"] == 3 * report["squeeze"]["m"]


def test_squeeze_injected_failure(tmp_path, absorb_dir):
    cfg = write_config(tmp_path, squeeze={"absorb_artifact": str(absorb_dir), "m": 1, "delta_threshold": 1e-12,
                                          "inject_cone_violation": True, "phi_pairs": 0})
    assert run_cli("squeeze", "--config", cfg) == EXIT_ASSERT
    report = json.loads((tmp_path / "out" / "squeeze_report.json").read_text())
    injected = report["records"][-1]
    assert injected["kind"] == "injected" and not (injected["cone_ok"] or injected["contraction_ok"])
    assert report["verdict"] == "fail"


def test_missing_artifact_is_named(tmp_path, capsys):
    cfg = write_config(tmp_path, squeeze={"absorb_artifact": str(tmp_path / "nowhere")})
    assert run_cli("squeeze", "--config", cfg) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "missing prerequisite artifact" in err and "nowhere" in err


def test_determine_inline_absorption(tmp_path):
    cfg = write_config(tmp_path)
    assert run_cli("determine", "--config", cfg) == EXIT_OK
    out = tmp_path / "out"
    report = json.loads((out / "determine_report.json").read_text())
    assert report["ensemble"]["source"] == "inline" and (out / "absorb_report.json").exists()
    assert report["determining"]["counterexamples"] == 0


def test_lipschitz_command(tmp_path):
    cfg = write_config(tmp_path)
    assert run_cli("lipschitz", "--config", cfg) == EXIT_OK
    report = json.loads((tmp_path / "out" / "lipschitz_report.json").read_text())
    assert report["records"][0]["max_ratio"] == 1.0
    assert report["k_at_1"] == pytest.approx(math.exp(60.021 / 2))
    assert report["time_lipschitz"]["violations"] == 0


def test_dimension_example(tmp_path):
    cfg = write_config(tmp_path, dimension={"n_rank": 10, "lipschitz": 1.0, "theta": 0.5, "m": None})
    assert run_cli("dimension", "--config", cfg) == EXIT_OK
    report = json.loads((tmp_path / "out" / "dimension_report.json").read_text())
    assert abs(report["bound"] - 27.35) < 0.01
    assert report["random_below_N"] == 0 and report["random_checks"] == 1000
    assert len(report["records"]) == 99


def test_reports_reproducible(tmp_path):
    for name in ("a", "b"):
        cfg = write_config(tmp_path, name=f"{name}.json", output_dir=str(tmp_path / name))
        assert run_cli("dimension", "--config", cfg) == EXIT_OK
    a = (tmp_path / "a" / "dimension_report.json").read_text().replace(str(tmp_path / "a"), "")
    b = (tmp_path / "b" / "dimension_report.json").read_text().replace(str(tmp_path / "b"), "")
    assert a == b
