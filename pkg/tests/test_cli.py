"""End-to-end command-line runs in a temp directory."""

import json

import pytest

from chargeopt.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, main
from chargeopt.optimizer import Scenario, save_scenario_json
from chargeopt.core import TimeGrid
from chargeopt.tariff import default_profiles


def _write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def _gen_events(tmp_path, n=6, seed=7):
    out = tmp_path / "events"
    cfg = _write(tmp_path / "gen.json", {"n_events": n, "seed": seed, "out": str(out)})
    assert main(["gen-synthetic", "--config", cfg]) == EXIT_OK
    return out


def test_gen_synthetic_deterministic(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    cfg_a = _write(tmp_path / "a.json", {"n_events": 4, "seed": 7, "out": str(out_a)})
    cfg_b = _write(tmp_path / "b.json", {"n_events": 4, "seed": 7, "out": str(out_b)})
    assert main(["gen-synthetic", "--config", cfg_a]) == EXIT_OK
    assert main(["gen-synthetic", "--config", cfg_b]) == EXIT_OK
    names = sorted(p.name for p in out_a.glob("*.csv"))
    assert len(names) == 4
    for name in names:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    manifest = json.loads((out_a / "manifest.json").read_text())
    assert manifest["seed"] == 7
    assert manifest["n_events"] == 4
    assert "plant" in manifest


def test_fit_thermal_and_validate(tmp_path):
    events = _gen_events(tmp_path, n=6, seed=11)
    fit_out = tmp_path / "fit"
    cfg = _write(
        tmp_path / "fit.json",
        {
            "events_dir": str(events),
            "out": str(fit_out),
            "seed": 3,
            "grid": [{"hidden_layers": 1, "neurons": 5}],
            "cv_epochs": 30,
            "final_epochs": 60,
        },
    )
    assert main(["fit-thermal", "--config", cfg]) == EXIT_OK
    assert (fit_out / "thermal_mlp.json").exists()
    assert (fit_out / "thermal_linear.json").exists()
    cv_rows = (fit_out / "cv_table.csv").read_text().strip().splitlines()
    assert cv_rows[0] == "hidden_layers,neurons,fold,rmse_k"
    assert len(cv_rows) == 1 + 1 * 5  # one architecture, five folds

    # same seed reruns bit-identically
    fit_out2 = tmp_path / "fit2"
    cfg2 = json.loads((tmp_path / "fit.json").read_text())
    cfg2["out"] = str(fit_out2)
    cfg2_path = _write(tmp_path / "fit2.json", cfg2)
    assert main(["fit-thermal", "--config", cfg2_path]) == EXIT_OK
    assert (fit_out / "thermal_mlp.json").read_bytes() == (fit_out2 / "thermal_mlp.json").read_bytes()

    val_out = tmp_path / "val"
    vcfg = _write(
        tmp_path / "val.json",
        {
            "events_dir": str(events),
            "out": str(val_out),
            "thermal_linear_json": str(fit_out / "thermal_linear.json"),
            "thermal_mlp_json": str(fit_out / "thermal_mlp.json"),
        },
    )
    assert main(["validate", "--config", vcfg]) == EXIT_OK
    rows = (val_out / "validation.csv").read_text().strip().splitlines()
    assert rows[0] == "model,local_rmse,global_mae"
    assert len(rows) == 1 + 4  # electrical + constant + linear + mlp


def _scenario_file(tmp_path, **overrides):
    wd, _ = default_profiles()
    kwargs = dict(
        grid=TimeGrid(t0=14 * 3600.0, n_intervals=24, dt_min=5.0),
        e0=24.0,
        e_target=34.0,
        theta0=20.0,
        profile=wd,
    )
    kwargs.update(overrides)
    s = Scenario(**kwargs)
    path = tmp_path / "scenario.json"
    save_scenario_json(s, path)
    return path


def test_optimize_roundtrip(tmp_path):
    spath = _scenario_file(tmp_path)
    out = tmp_path / "opt"
    cfg = _write(tmp_path / "opt.json", {"scenario_json": str(spath), "out": str(out)})
    assert main(["optimize", "--config", cfg]) == EXIT_OK
    cost = json.loads((out / "cost.json").read_text())
    assert cost["feasible"] is True
    assert cost["total"] == pytest.approx(
        cost["j_e_buy"] + cost["j_e_sell"] + cost["j_d_cyc"] + cost["j_d_cal"]
    )
    rows = (out / "solution.csv").read_text().strip().splitlines()
    assert rows[0] == "n,t_s,p_kw,e_kwh,theta_c,j_e_eur,j_d_eur"
    assert len(rows) == 1 + 25  # header + N+1 instants
    first = rows[1].split(",")
    assert float(first[3]) == 24.0  # initial energy


def test_optimize_infeasible_exit_code(tmp_path):
    # target unreachable in 30 minutes at 2 kW
    spath = _scenario_file(
        tmp_path,
        grid=TimeGrid(t0=14 * 3600.0, n_intervals=6, dt_min=5.0),
        e_target=60.0,
        p_lo=0.0,
        p_hi=2.0,
    )
    out = tmp_path / "opt"
    cfg = _write(tmp_path / "opt.json", {"scenario_json": str(spath), "out": str(out)})
    assert main(["optimize", "--config", cfg]) == EXIT_INFEASIBLE


def test_input_error_exit_code(tmp_path):
    cfg = _write(tmp_path / "bad.json", {"scenario_json": str(tmp_path / "missing.json")})
    assert main(["optimize", "--config", cfg]) == EXIT_INPUT
    assert main(["validate", "--config", str(tmp_path / "nonexistent.json")]) == EXIT_INPUT


def test_compare_modes_command(tmp_path):
    events = _gen_events(tmp_path, n=4, seed=13)
    out = tmp_path / "modes"
    cfg = _write(tmp_path / "modes.json", {"events_dir": str(events), "out": str(out)})
    assert main(["compare-modes", "--config", cfg]) == EXIT_OK
    rows = (out / "modes.csv").read_text().strip().splitlines()
    assert rows[0].startswith("event_id,mode,")
    assert (len(rows) - 1) % 3 == 0 and len(rows) > 1  # three rows per event


def test_sweep_commands(tmp_path):
    spath = _scenario_file(tmp_path)
    out = tmp_path / "sweeps"
    cfg = _write(
        tmp_path / "sweep.json",
        {"scenario_json": str(spath), "out": str(out), "gammas": [1.0, 1.8]},
    )
    assert main(["sweep-gamma", "--config", cfg]) == EXIT_OK
    rows = (out / "sweep_gamma.csv").read_text().strip().splitlines()
    assert len(rows) == 3

    cfg2 = _write(tmp_path / "vev.json", {"scenario_json": str(spath), "out": str(out)})
    assert main(["sweep-vev", "--config", cfg2]) == EXIT_OK
    rows = (out / "sweep_vev.csv").read_text().strip().splitlines()
    assert len(rows) == 4  # header + {2770, 4470, 6080}
    assert [float(r.split(",")[0]) for r in rows[1:]] == [2770.0, 4470.0, 6080.0]


def test_sweep_gamma_single_point_matches_optimize(tmp_path):
    spath = _scenario_file(tmp_path)
    out_opt = tmp_path / "o1"
    out_sweep = tmp_path / "o2"
    cfg_opt = _write(tmp_path / "c1.json", {"scenario_json": str(spath), "out": str(out_opt)})
    cfg_sweep = _write(
        tmp_path / "c2.json", {"scenario_json": str(spath), "out": str(out_sweep), "gammas": [1.0]}
    )
    assert main(["optimize", "--config", cfg_opt]) == EXIT_OK
    assert main(["sweep-gamma", "--config", cfg_sweep]) == EXIT_OK
    cost = json.loads((out_opt / "cost.json").read_text())
    row = (out_sweep / "sweep_gamma.csv").read_text().strip().splitlines()[1].split(",")
    assert float(row[5]) == pytest.approx(cost["total"], abs=1e-9)
