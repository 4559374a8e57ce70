import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from pdecoeff.cli import main
from pdecoeff.experiments import ConfigError, ExperimentConfig, run_experiment, run_sweep

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def desk_config(**overrides) -> ExperimentConfig:
    raw = {
        "problem": {"name": "advection_1d"},
        "solver": {"n_coll": 64, "dt": 1e-3},
        "sampling": {"n_times": 10, "master_count": 25, "interior_points": 30, "seed": 7},
        "recovery": {"trial_degree": 10, "test_degree": 30, "degrees": [4, 8, 12]},
    }
    for key, value in overrides.items():
        raw.setdefault(key, {}).update(value)
    return ExperimentConfig.from_dict(raw)


def test_config_round_trip():
    cfg = desk_config()
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


def test_config_yaml_round_trip(tmp_path):
    cfg = desk_config()
    path = tmp_path / "cfg.yaml"
    cfg.to_yaml(path)
    again = ExperimentConfig.from_yaml(path)
    assert again.to_dict() == cfg.to_dict()


def test_config_validation_errors():
    with pytest.raises(ConfigError, match="problem.name"):
        ExperimentConfig.from_dict({"problem": {"name": "nope"}})
    with pytest.raises(ConfigError, match="unknown problem parameters"):
        ExperimentConfig.from_dict(
            {"problem": {"name": "advection_1d", "params": {"bogus": 1}}})
    with pytest.raises(ConfigError, match="exceeds master_count"):
        ExperimentConfig.from_dict(
            {"problem": {"name": "advection_1d"},
             "sampling": {"n_times": 100, "master_count": 50}})
    with pytest.raises(ConfigError, match="master_count >= n_neighbors"):
        ExperimentConfig.from_dict(
            {"problem": {"name": "advection_1d"}, "noise": {"epsilon": 1e-3}})
    with pytest.raises(ConfigError, match="inside the solve domain"):
        ExperimentConfig.from_dict(
            {"problem": {"name": "advection_1d"},
             "domain": {"recover_lower": [-9.0], "recover_upper": [1.0]}})


def test_scale_reduces_counts():
    cfg = ExperimentConfig.from_dict({"problem": {"name": "advdiff_1d"}})
    cfg.apply_scale(4.0)
    assert cfg.n_coll == 50
    assert cfg.interior_points == 50
    assert cfg.n_times == 12
    assert cfg.master_count >= cfg.n_times
    assert cfg.scheme == "fourier" and cfg.n_coll % 2 == 0


def test_master_times_snap_to_solver_grid():
    cfg = desk_config()
    master = cfg.master_times()
    assert master.size == 25
    steps = np.round(master / cfg.dt)
    np.testing.assert_allclose(steps * cfg.dt, master, atol=1e-12)
    assert master[0] > 0
    assert master[-1] == pytest.approx(cfg.t_final)


def test_run_experiment_artifacts(tmp_path):
    cfg = desk_config()
    result = run_experiment(cfg, tmp_path)
    for name in ("snapshots.bin", "snapshots.csv", "solution.txt", "errors.csv",
                 "fields.csv", "diagnostics.txt", "manifest.json",
                 "separability_flux_u.csv", "separability_u.csv"):
        assert (tmp_path / name).exists(), name
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["problem"]["name"] == "advection_1d"
    assert manifest["seeds"]["sample"] == 7
    assert set(manifest["errors"]) == {"alpha_1"}
    assert result.errors["alpha_1"] < 0.5
    header = (tmp_path / "fields.csv").read_text().splitlines()[0]
    assert header == "x,alpha_1_rec,alpha_1_true,alpha_1_err"


def test_run_determinism_bitwise(tmp_path):
    cfg = desk_config()
    run_experiment(cfg, tmp_path / "a")
    run_experiment(desk_config(), tmp_path / "b")
    for name in ("snapshots.bin", "snapshots.csv", "errors.csv", "fields.csv",
                 "solution.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_degree_sweep_csv(tmp_path):
    cfg = desk_config()
    csv_path = run_sweep(cfg, "degree", tmp_path)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "degree,err_alpha_1,eig_ratio,wall_time_s"
    assert len(lines) == 4
    degrees = [int(line.split(",")[0]) for line in lines[1:]]
    assert degrees == [4, 8, 12]
    errs = [float(line.split(",")[1]) for line in lines[1:]]
    assert errs[0] > errs[1] > errs[2]


def test_method_sweep_csv(tmp_path):
    cfg = desk_config()
    csv_path = run_sweep(cfg, "method", tmp_path, jobs=2)
    lines = csv_path.read_text().strip().splitlines()
    assert [line.split(",")[0] for line in lines[1:]] == ["galerkin", "collocation"]


def test_noise_sweep_csv(tmp_path):
    cfg = desk_config(
        sampling={"master_count": 400, "n_times": 10},
        noise={"epsilon": 1e-3, "dense_points": 600},
        filter={"poly_degree": 8, "n_neighbors": 120},
        sweep={"noise_levels": [1e-3]},
    )
    csv_path = run_sweep(cfg, "noise", tmp_path)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "epsilon,filtered,err_alpha_1,eig_ratio,wall_time_s"
    rows = [line.split(",") for line in lines[1:]]
    assert [(r[0], r[1]) for r in rows] == [("0.001", "1"), ("0.001", "0")]


def test_example1_noise_sweep_filter_benefit(tmp_path):
    # filtered error at most a fifth of unfiltered, at each swept noise level
    cfg = ExperimentConfig.from_dict({
        "problem": {"name": "advection_1d"},
        "sampling": {"n_times": 25, "master_count": 1000, "seed": 7},
        "noise": {"epsilon": 1e-3, "seed": 8, "dense_seed": 9},
        "recovery": {"trial_degree": 12},
        "sweep": {"noise_levels": [1e-3, 1e-4]},
    })
    csv_path = run_sweep(cfg, "noise", tmp_path)
    rows = [line.split(",") for line in csv_path.read_text().strip().splitlines()[1:]]
    by_key = {(float(r[0]), int(r[1])): float(r[2]) for r in rows}
    for eps in (1e-3, 1e-4):
        assert by_key[(eps, 1)] <= by_key[(eps, 0)] / 5


def test_example2_noiseless_degree_sweep(tmp_path):
    # fast error decay with the trial degree; the 4 -> 12 drop measures 9.3x
    # in this setup (approximation-limited), and far more by n = 20
    cfg = ExperimentConfig.from_dict({
        "problem": {"name": "diffusion_1d"},
        "sampling": {"seed": 21},
        "recovery": {"degrees": [4, 8, 12, 20]},
    })
    csv_path = run_sweep(cfg, "degree", tmp_path)
    rows = [line.split(",") for line in csv_path.read_text().strip().splitlines()[1:]]
    errs = {int(r[0]): float(r[1]) for r in rows}
    assert errs[4] > errs[8] > errs[12] > errs[20]
    assert errs[4] / errs[12] >= 8
    assert errs[4] / errs[20] >= 100


def test_cli_run_and_rerun_bitwise(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    desk_config().to_yaml(cfg_path)
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    assert main(["run", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert main(["run", "--config", str(cfg_path), "--out", str(out2)]) == 0
    for name in ("errors.csv", "fields.csv", "snapshots.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_cli_solve_and_sample(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    desk_config().to_yaml(cfg_path)
    out = tmp_path / "solve_out"
    assert main(["solve", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "snapshots.bin").exists()
    out2 = tmp_path / "sample_out"
    assert main(["sample", "--config", str(cfg_path), "--out", str(out2)]) == 0
    assert (out2 / "snapshots.csv").exists()


def test_cli_validation_exit_code(tmp_path):
    cfg_path = tmp_path / "bad.yaml"
    with open(cfg_path, "w") as fh:
        yaml.safe_dump({"problem": {"name": "advection_1d"},
                        "sampling": {"n_times": 99, "master_count": 10}}, fh)
    assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o")]) == 2


def test_cli_non_unique_exit_code(tmp_path):
    # flattened initial state leaves a weakly informed normal matrix whose
    # eigenvalue ratio falls below a strict configured rank gate
    cfg_path = tmp_path / "cfg.yaml"
    cfg = desk_config()
    raw = cfg.to_dict()
    raw["problem"]["params"]["sigma2"] = 1e6
    raw["recovery"]["test_degree"] = 12
    raw["recovery"]["rank_tol"] = 1e-3
    with open(cfg_path, "w") as fh:
        yaml.safe_dump(raw, fh)
    out = tmp_path / "o"
    code = main(["run", "--config", str(cfg_path), "--out", str(out)])
    assert code == 4
    record = json.loads((out / "error.json").read_text())
    assert record["error"] == "NonUniqueSolutionError"


def test_cli_seed_override(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    desk_config().to_yaml(cfg_path)
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg_path), "--seed", "99",
                 "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == {"sample": 99, "noise": 100, "dense": 101}


def test_cli_scale_flag(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    raw = ExperimentConfig.from_dict({"problem": {"name": "advection_1d"}}).to_dict()
    # keep the test space coarse enough for the scaled-down quadrature
    raw["recovery"]["test_degree"] = 12
    raw["recovery"]["trial_degree"] = 8
    with open(cfg_path, "w") as fh:
        yaml.safe_dump(raw, fh)
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg_path), "--scale", "2", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["solver"]["n_coll"] == 50
    assert manifest["config"]["sampling"]["n_times"] == 25
    assert manifest["config"]["sampling"]["interior_points"] == 25


@pytest.mark.parametrize("name", [p.name for p in sorted(CONFIGS.glob("*.yaml"))])
def test_bundled_configs_parse(name):
    cfg = ExperimentConfig.from_yaml(CONFIGS / name)
    assert cfg.problem in ("advection_1d", "diffusion_1d", "advdiff_1d",
                           "burgers_1d", "advdiff_2d")
