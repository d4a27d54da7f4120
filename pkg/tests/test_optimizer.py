"""DDP solver: grids, nearest-index rules, oracle equivalence, backends."""

from dataclasses import replace

import numpy as np
import pytest

from chargeopt import electrical, thermal
from chargeopt.aging import calendar_fade, default_params
from chargeopt.core import TimeGrid
from chargeopt.optimizer import (
    HAVE_COMPILED,
    BatteryModels,
    Scenario,
    backward_induction,
    build_grids,
    build_transition_table,
    forward_integration,
    load_scenario_json,
    make_range,
    nearest_index,
    nearest_indices,
    replay,
    save_scenario_json,
    solve,
)
from chargeopt.tariff import PriceProfile
from oracles import brute_force_optimum, chain_transitions, random_tiny_instance

BACKENDS = ["python"] + (["compiled"] if HAVE_COMPILED else [])


def _flat_profile(buy=0.3, sell=None):
    b = np.full(24, buy)
    s = np.full(24, sell if sell is not None else buy)
    return PriceProfile(b, s, "custom")


def _simple_models(u0=360.0, r=1e-9):
    tables = electrical.EcmTables(
        e_axis=np.array([0.0, 100.0]),
        theta_axis=np.array([0.0, 60.0]),
        u_ocv=np.full((2, 2), u0),
        r_i=np.full((2, 2), r),
    )
    return BatteryModels(tables=tables, thermal=thermal.constant_model(), aging=default_params())


def test_make_range_counts():
    assert len(make_range(8.0, 80.0, 0.8)) == 91
    assert len(make_range(-25.0, 60.0, 1.0)) == 86
    assert len(make_range(-50.0, 50.0, 1.0)) == 101
    # stop not included when the step does not divide the span
    r = make_range(0.0, 1.0, 0.3)
    assert r[-1] == pytest.approx(0.9)


def test_build_grids_full_scale_and_init():
    s = Scenario(
        grid=TimeGrid(t0=0.0, n_intervals=4, dt_min=5.0),
        e0=24.0,
        e_target=80.0,
        theta0=20.0,
        profile=_flat_profile(),
    )
    g = build_grids(s)
    assert g.shape == (91, 86, 101)
    n = 4
    i0 = nearest_index(g.e_d, 24.0)
    j0 = nearest_index(g.theta_d, 20.0)
    i_tgt = nearest_index(g.e_d, 80.0)
    assert g.cost[0, i0, j0] == 0.0
    mask = np.ones_like(g.cost[0], dtype=bool)
    mask[i0, j0] = False
    assert np.all(g.cost[0][mask] == s.penalty)
    assert np.all(g.cost[n, i_tgt, :] == 0.0)
    row_mask = np.ones(len(g.e_d), dtype=bool)
    row_mask[i_tgt] = False
    assert np.all(g.cost[n][row_mask, :] == s.penalty)
    assert np.all(g.cost[1:n] == 0.0)
    assert np.all(g.action == 0.0)


def test_nearest_index_rules():
    grid = np.array([8.0, 8.8, 9.6, 10.4])
    assert nearest_index(grid, 10.1) == 3  # |10.1-9.6| = 0.5 > 0.3
    assert nearest_index(grid, 9.6) == 2
    assert nearest_index(grid, 8.4) == 0  # exact midpoint resolves down
    assert nearest_index(grid, -100.0) == 0
    assert nearest_index(grid, 100.0) == 3


def test_nearest_indices_match_argmin():
    rng = np.random.default_rng(0)
    for _ in range(20):
        start = rng.uniform(-10, 10)
        step = rng.uniform(0.1, 3.0)
        grid = start + step * np.arange(rng.integers(2, 40))
        xs = np.concatenate(
            [
                rng.uniform(grid[0] - 2 * step, grid[-1] + 2 * step, 50),
                grid[:-1] + step / 2,  # exact midpoints
                grid,  # exact nodes
            ]
        )
        expected = np.array([np.argmin(np.abs(grid - x)) for x in xs])
        assert np.array_equal(nearest_indices(grid, xs), expected)


@pytest.mark.parametrize("backend", BACKENDS)
def test_oracle_equivalence_tiny_instances(backend):
    # mandatory: DDP equals exhaustive search on the snapped chain
    rng = np.random.default_rng(1234)
    for trial in range(20):
        s, models = random_tiny_instance(rng)
        grids = build_grids(s)
        backward_induction(s, grids, models, backend=backend)
        best_cost, best_seq, best_ok = brute_force_optimum(s, grids, models)
        i0 = nearest_index(grids.e_d, s.e0)
        j0 = nearest_index(grids.theta_d, s.theta0)
        assert grids.cost[0, i0, j0] == pytest.approx(best_cost, abs=1e-9), f"trial {trial}"
        sol = forward_integration(s, grids, models)
        if best_ok:  # feasible: trajectories must agree too
            assert np.array_equal(sol.p_star, best_seq), f"trial {trial}"
            assert sol.feasible, f"trial {trial}"
        else:
            assert not sol.feasible, f"trial {trial}"


def test_stay_put_costs_only_calendar_aging():
    models = _simple_models()
    s = Scenario(
        grid=TimeGrid(t0=0.0, n_intervals=1, dt_min=60.0),
        e0=3.0,
        e_target=3.0,
        theta0=20.0,
        profile=_flat_profile(),
        e_lo=0.0,
        e_hi=6.0,
        theta_lo=10.0,
        theta_hi=30.0,
        p_lo=-2.0,
        p_hi=2.0,
        e_step=1.0,
        theta_step=1.0,
        p_step=1.0,
        soh0=0.98,
    )
    grids = build_grids(s)
    backward_induction(s, grids, models)
    i0 = nearest_index(grids.e_d, s.e0)
    j0 = nearest_index(grids.theta_d, s.theta0)
    assert grids.action[0, i0, j0] == 0.0
    expected = models.aging.cost_per_fade * calendar_fade(models.aging, 20.0, 3.0, 0.98, 60.0)
    assert grids.cost[0, i0, j0] == pytest.approx(expected, rel=1e-9)
    sol = forward_integration(s, grids, models)
    assert np.array_equal(sol.p_star, [0.0])
    assert np.allclose(sol.e_traj, [3.0, 3.0])
    # without aging in the objective the cell cost is exactly zero
    s2 = replace(s, include_aging_in_objective=False)
    grids2 = build_grids(s2)
    backward_induction(s2, grids2, models)
    assert grids2.cost[0, i0, j0] == 0.0


def test_unreachable_target_is_penalized():
    models = _simple_models()
    s = Scenario(
        grid=TimeGrid(t0=0.0, n_intervals=2, dt_min=60.0),
        e0=0.0,
        e_target=6.0,
        theta0=20.0,
        profile=_flat_profile(),
        e_lo=0.0,
        e_hi=6.0,
        theta_lo=10.0,
        theta_hi=30.0,
        p_lo=0.0,
        p_hi=2.0,  # at most 4 kWh over two hours
        e_step=1.0,
        theta_step=1.0,
        p_step=1.0,
    )
    grids = build_grids(s)
    backward_induction(s, grids, models)
    i0 = nearest_index(grids.e_d, s.e0)
    j0 = nearest_index(grids.theta_d, s.theta0)
    assert grids.cost[0, i0, j0] >= s.penalty
    sol = forward_integration(s, grids, models)
    assert not sol.feasible


def test_penalty_value_does_not_change_feasible_trajectory():
    rng = np.random.default_rng(77)
    for _ in range(10):
        s, models = random_tiny_instance(rng)
        sol_lo = solve(s, models)
        if not sol_lo.feasible:
            continue
        s_hi = replace(s, penalty=10 * s.penalty)
        sol_hi = solve(s_hi, models)
        assert np.array_equal(sol_lo.p_star, sol_hi.p_star)


def test_replay_self_consistency():
    rng = np.random.default_rng(88)
    checked = 0
    for _ in range(10):
        s, models = random_tiny_instance(rng)
        sol = solve(s, models)
        if not sol.feasible:
            continue
        again = replay(sol.p_star, s, models)
        assert again.cost.total == pytest.approx(sol.cost.total, abs=1e-9)
        assert again.cost.j_e_buy == pytest.approx(sol.cost.j_e_buy, abs=1e-9)
        assert again.cost.j_d_cal == pytest.approx(sol.cost.j_d_cal, abs=1e-9)
        assert np.allclose(again.e_traj, sol.e_traj)
        checked += 1
    assert checked >= 3


def test_replay_zero_power_costs_calendar_only():
    models = _simple_models()
    s = Scenario(
        grid=TimeGrid(t0=0.0, n_intervals=3, dt_min=60.0),
        e0=3.0,
        e_target=3.0,
        theta0=20.0,
        profile=_flat_profile(),
        e_lo=0.0,
        e_hi=6.0,
        theta_lo=10.0,
        theta_hi=30.0,
        p_lo=-2.0,
        p_hi=2.0,
        soh0=0.98,
    )
    sol = replay(np.zeros(3), s, models)
    assert sol.cost.j_e_buy == 0.0
    assert sol.cost.j_e_sell == 0.0
    assert sol.cost.j_d_cyc == pytest.approx(0.0, abs=1e-15)
    assert sol.cost.j_d_cal > 0.0


def test_replay_charge_then_idle_profile():
    models = _simple_models()
    s = Scenario(
        grid=TimeGrid(t0=0.0, n_intervals=6, dt_min=60.0),
        e0=0.0,
        e_target=3.0,
        theta0=20.0,
        profile=_flat_profile(),
        e_lo=0.0,
        e_hi=6.0,
        theta_lo=10.0,
        theta_hi=30.0,
        p_lo=-2.0,
        p_hi=2.0,
    )
    sol = replay([1.0, 1.0, 1.0, 0.0, 0.0, 0.0], s, models)
    diffs = np.diff(sol.e_traj)
    assert np.all(diffs[:3] > 0)  # charging ramps the energy up
    assert np.allclose(diffs[3:], 0.0)  # then it stays flat


def test_replay_reports_bound_violation():
    models = _simple_models()
    s = Scenario(
        grid=TimeGrid(t0=0.0, n_intervals=2, dt_min=60.0),
        e0=1.0,
        e_target=3.0,
        theta0=20.0,
        profile=_flat_profile(),
        e_lo=0.0,
        e_hi=6.0,
        theta_lo=10.0,
        theta_hi=30.0,
        p_lo=-2.0,
        p_hi=2.0,
    )
    sol = replay([5.0, 0.0], s, models)  # exceeds p_hi
    assert any("outside" in note for note in sol.notes)


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled kernel not built")
def test_backends_bitwise_identical():
    rng = np.random.default_rng(99)
    for _ in range(10):
        s, models = random_tiny_instance(rng)
        ga = build_grids(s)
        gb = build_grids(s)
        table = build_transition_table(s, models, ga)
        backward_induction(s, ga, models, table=table, backend="python")
        backward_induction(s, gb, models, table=table, backend="compiled")
        assert np.array_equal(ga.cost, gb.cost)
        assert np.array_equal(ga.action, gb.action)


def test_bellman_consistency_post_hoc():
    rng = np.random.default_rng(55)
    s, models = random_tiny_instance(rng)
    grids = build_grids(s)
    backward_induction(s, grids, models)
    trans = chain_transitions(s, grids, models)
    from chargeopt.tariff import interval_prices

    eps_buy, eps_sell = interval_prices(s.profile, s.grid)
    dt_h = s.grid.dt_min / 60.0
    n_steps = s.grid.n_intervals
    for n in range(n_steps):
        for i in range(len(grids.e_d)):
            for j in range(len(grids.theta_d)):
                best = np.inf
                for k, p in enumerate(grids.p_d):
                    tr = trans[i, j, k]
                    if tr is None:
                        cand = s.penalty
                    else:
                        si, sj, jd = tr
                        je = max(p, 0.0) * dt_h * eps_buy[n] + min(p, 0.0) * dt_h * eps_sell[n]
                        cand = (je + jd) + grids.cost[n + 1, si, sj]
                    best = min(best, cand)
                assert grids.cost[n, i, j] == pytest.approx(best, abs=1e-9)


def test_mode_ii_iii_objective_ordering():
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(20):
        s, models = random_tiny_instance(rng)
        s3 = replace(s, include_aging_in_objective=True)
        s2 = replace(s, include_aging_in_objective=False)
        sol3 = solve(s3, models)
        sol2 = solve(s2, models)
        if not (sol3.feasible and sol2.feasible):
            continue
        assert sol3.cost.total <= sol2.cost.total + 1e-9
        assert sol2.cost.j_e <= sol3.cost.j_e + 1e-9
        checked += 1
    assert checked >= 5


def test_transition_table_reuse_matches_fresh_build():
    rng = np.random.default_rng(31)
    s, models = random_tiny_instance(rng)
    grids_fresh = build_grids(s)
    backward_induction(s, grids_fresh, models)
    table = build_transition_table(s, models, build_grids(s))
    # different endpoints, same bounds: the shared table must be valid
    s_alt = replace(s, e0=s.e_target, e_target=s.e0)
    grids_shared = build_grids(s_alt)
    backward_induction(s_alt, grids_shared, models, table=table)
    grids_direct = build_grids(s_alt)
    backward_induction(s_alt, grids_direct, models)
    assert np.array_equal(grids_shared.cost, grids_direct.cost)
    assert np.array_equal(grids_shared.action, grids_direct.action)


def test_state_dependent_power_bounds_hook():
    models = _simple_models()

    def derate(e, theta):
        # no charging above 4 kWh
        hi = np.where(np.asarray(e) >= 4.0, 0.0, 2.0)
        return np.full_like(np.asarray(e, float), -2.0), hi

    s = Scenario(
        grid=TimeGrid(t0=0.0, n_intervals=3, dt_min=60.0),
        e0=3.0,
        e_target=6.0,
        theta0=20.0,
        profile=_flat_profile(),
        e_lo=0.0,
        e_hi=6.0,
        theta_lo=10.0,
        theta_hi=30.0,
        p_lo=-2.0,
        p_hi=2.0,
        power_bounds=derate,
    )
    sol = solve(s, models)
    # 3 -> 6 kWh needs charging past the 4 kWh derating cap: infeasible
    assert not sol.feasible
    s_free = replace(s, power_bounds=None)
    assert solve(s_free, models).feasible


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_temperature_node_axis(backend):
    # theta_lo == theta_hi collapses the temperature axis to one node
    models = _simple_models()
    s = Scenario(
        grid=TimeGrid(t0=0.0, n_intervals=3, dt_min=60.0),
        e0=1.0,
        e_target=4.0,
        theta0=20.0,
        profile=_flat_profile(),
        e_lo=0.0,
        e_hi=6.0,
        theta_lo=20.0,
        theta_hi=20.0,
        p_lo=0.0,
        p_hi=2.0,
    )
    sol = solve(s, models, backend=backend)
    assert sol.feasible
    assert sol.e_traj[-1] == pytest.approx(4.0, abs=1e-6)


def test_scenario_json_round_trip(tmp_path):
    s = Scenario(
        grid=TimeGrid(t0=3600.0, n_intervals=12, dt_min=5.0),
        e0=24.0,
        e_target=64.0,
        theta0=18.0,
        profile=_flat_profile(0.25),
        include_aging_in_objective=False,
        soh0=0.95,
    )
    path = tmp_path / "scenario.json"
    save_scenario_json(s, path)
    back = load_scenario_json(path)
    assert back.e0 == s.e0
    assert back.e_target == s.e_target
    assert back.include_aging_in_objective is False
    assert back.grid == s.grid
    assert np.allclose(back.profile.eps_buy, s.profile.eps_buy)
