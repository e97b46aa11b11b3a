import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from advsysid.cli import main
from advsysid.dynamics import read_trajectory_csv


def write_config(tmp_path, text, name="config.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_simulate_remark1(tmp_path, capsys):
    cfg = write_config(tmp_path, 'preset = "remark1"\n')
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "simulate"
    assert manifest["config"]["model"]["kind"] == "remark1"
    assert manifest["system"]["a_star"] == [[0.5]]
    traj = read_trajectory_csv(out / "trajectory.csv")
    x = traj.states[:, 0]
    assert np.all(x[0::2] > 0) and np.all(x[1::2] < 0)  # sign alternation


def test_simulate_csv_schema(tmp_path):
    cfg = write_config(tmp_path, """
preset = "example1"
[run]
T = 50
""")
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    header = (out / "trajectory.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 1 + 10 + 10 + 1


def test_simulate_missing_config_exit2(tmp_path, capsys):
    missing = str(tmp_path / "absent.toml")
    code = main(["simulate", "--config", missing, "--out", str(tmp_path / "o")])
    assert code == 2
    assert "absent.toml" in capsys.readouterr().err


def test_usage_error_exit2(capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2


def test_fit_noise_free_all_estimators(tmp_path):
    cfg = write_config(tmp_path, """
[system]
d = 2
target_norm = 0.6
[model]
kind = "zero"
[experiment]
t_checkpoints = [8, 12]
[run]
T = 12
master_seed = 5
""")
    sim_out = tmp_path / "sim"
    assert main(["simulate", "--config", cfg, "--out", str(sim_out)]) == 0
    fit_out = tmp_path / "fit"
    assert main(["fit", "--config", cfg, "--out", str(fit_out),
                 "--trajectory", str(sim_out / "trajectory.csv")]) == 0
    for name in ("ols", "l2norm", "l1norm"):
        payload = json.loads((fit_out / f"fit_{name}.json").read_text())
        assert payload["method"] == name
        assert payload["frobenius_error"] < 1e-6
        assert np.asarray(payload["a_hat"]).shape == (2, 2)


def test_certify_remark1_not_certified(tmp_path):
    cfg = write_config(tmp_path, 'preset = "remark1"\n')
    sim_out = tmp_path / "sim"
    assert main(["simulate", "--config", cfg, "--out", str(sim_out)]) == 0
    cert_out = tmp_path / "cert"
    assert main(["certify", "--config", cfg, "--out", str(cert_out),
                 "--trajectory", str(sim_out / "trajectory.csv")]) == 0
    payload = json.loads((cert_out / "certificate.json").read_text())
    assert payload["certified"] is False
    assert min(payload["per_coordinate_min"]) < 0
    assert payload["mode"] == "exact"


def test_certify_high_dim_requires_sampled(tmp_path, capsys):
    cfg = write_config(tmp_path, """
preset = "example1"
[run]
T = 60
""")
    sim_out = tmp_path / "sim"
    assert main(["simulate", "--config", cfg, "--out", str(sim_out)]) == 0
    code = main(["certify", "--config", cfg, "--out", str(tmp_path / "c"),
                 "--trajectory", str(sim_out / "trajectory.csv")])
    assert code == 2
    assert "covering bound" in capsys.readouterr().err

    cert_out = tmp_path / "cert_sampled"
    assert main(["certify", "--config", cfg, "--out", str(cert_out),
                 "--trajectory", str(sim_out / "trajectory.csv"),
                 "--sampled", "300"]) == 0
    payload = json.loads((cert_out / "certificate.json").read_text())
    assert payload["certified"] is False
    assert payload["mode"] == "sampled"
    assert payload["n_directions"] == 300
    assert len(payload["per_coordinate_min"]) == 10


def test_experiment_single_cell_outputs(tmp_path):
    cfg = write_config(tmp_path, """
[system]
d = 2
target_norm = 0.6
[model]
kind = "sign_restricted"
p = 0.6
[experiment]
t_checkpoints = [20, 40]
trials = 2
[run]
master_seed = 11
""")
    out = tmp_path / "exp"
    assert main(["experiment", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "manifest.json").exists()
    assert (out / "trace.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["report"]["summary"]["per_estimator"]["l1norm"]["trials"] == 2

    svgs = list(out.glob("*.svg"))
    assert len(svgs) == 1
    root = ET.parse(svgs[0]).getroot()
    assert root.tag.endswith("svg")
    body = svgs[0].read_text()
    assert "http" not in body.replace("http://www.w3.org/2000/svg", "")


def test_experiment_sweep_outputs(tmp_path):
    cfg = write_config(tmp_path, """
[system]
d = 2
target_norm = 0.6
[model]
kind = "sign_restricted"
p = 0.6
[experiment]
t_checkpoints = [20, 40]
trials = 2
p_values = [0.5, 0.7]
d_values = [2]
[run]
master_seed = 12
""")
    out = tmp_path / "sweep"
    assert main(["experiment", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "sweep.csv").exists()
    assert (out / "trace_p0.5_d2.csv").exists()
    assert (out / "trace_p0.7_d2.csv").exists()
    assert len(list(out.glob("*.svg"))) == 2
    report = json.loads((out / "report.json").read_text())
    assert set(report["cells"]) == {"p=0.5,d=2", "p=0.7,d=2"}


def test_experiment_empty_estimators_exit2(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[system]
d = 2
target_norm = 0.6
[model]
kind = "zero"
[experiment]
estimators = []
""")
    code = main(["experiment", "--config", cfg, "--out", str(tmp_path / "x")])
    assert code == 2
    assert "estimators" in capsys.readouterr().err


def test_seed_override_changes_manifest(tmp_path):
    cfg = write_config(tmp_path, 'preset = "remark1"\n')
    out = tmp_path / "o1"
    assert main(["simulate", "--config", cfg, "--out", str(out),
                 "--seed", "123"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 123
    assert manifest["config"]["run"]["master_seed"] == 123
