"""Backward induction, forward integration, and trajectory replay.

Backward induction fills the cost grid over a precomputed transition table
(cells of one time slice are independent; the table and models are
read-only, so results do not depend on evaluation order). Forward
integration then walks the continuous dynamics from the initial state,
looking the policy up at the nearest grid cell, which is exactly how the
cost grid was built. Costs along the returned trajectory are recomputed
from the models at the continuous states, never from grid snapshots.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .. import electrical, tariff, thermal
from ..aging import aging_cost
from ..core import BatteryState, CostBreakdown
from ..errors import InfeasiblePowerError, InvalidParameterError
from . import backend as backend_mod
from .scenario import BatteryModels, DdpGrids, Scenario, build_grids, nearest_index
from .transitions import TransitionTable, build_transition_table


@dataclass(frozen=True)
class DdpSolution:
    """Optimal power trajectory with simulated states and a cost breakdown.

    Trajectories satisfy the continuous transition functions exactly (they
    are forward-simulated, not grid-snapped). feasible is False when the
    forward pass visits a cell carrying the penalty cost. j_e_steps and
    j_d_steps hold the per-interval energy and aging costs.
    """

    p_star: np.ndarray
    e_traj: np.ndarray
    theta_traj: np.ndarray
    cost: CostBreakdown
    feasible: bool
    j_e_steps: np.ndarray
    j_d_steps: np.ndarray
    notes: tuple = ()


def backward_induction(
    s: Scenario,
    grids: DdpGrids,
    models: BatteryModels,
    table: TransitionTable | None = None,
    backend: str | None = None,
) -> DdpGrids:
    """Fill the cost and action grids from slice N-1 down to slice 0.

    For every cell and action the cached cost is the transition cost plus
    the successor cost one slice later, read by bilinear interpolation of
    the next cost slice at the continuous successor state (nearest-cell
    reads would let sub-cell sales move no energy on the grid, a
    quantization exploit the evaluation protocol rules out); invalid
    actions cache the penalty. The minimum over actions (lowest index on
    ties) lands in the grids. With include_aging_in_objective False the
    aging term is dropped from the transition cost (the models still drive
    the dynamics).
    """
    if table is None:
        table = build_transition_table(s, models, grids)
    elif not table.matches(grids):
        raise InvalidParameterError("transition table was built for different grids")
    eps_buy, eps_sell = tariff.interval_prices(s.profile, s.grid)
    je = table.buy_energy[None, :] * eps_buy[:, None] + table.sell_energy[None, :] * eps_sell[:, None]
    if s.include_aging_in_objective:
        scale = models.aging.cost_per_fade
        jd = scale * table.cyc_fade + (scale * table.calendar_fades(models.aging, s.soh0))[:, None]
    else:
        jd = np.zeros_like(table.cyc_fade)
    backend_mod.backward_pass(
        grids.cost,
        grids.action,
        table.valid,
        table.corner00,
        table.frac_e,
        table.frac_theta,
        jd,
        je,
        table.p_d,
        s.penalty,
        backend,
    )
    return grids


def _step_costs(s: Scenario, models: BatteryModels, e: float, theta: float, p: float, n: int, prices):
    """Continuous one-step transition and its cost components."""
    eps_buy, eps_sell = prices
    state = BatteryState(e, theta)
    delta_e, q_loss = electrical.energy_step(models.tables, state, p, s.grid.dt_min)
    d_theta = thermal.predict_delta_theta(
        models.thermal, thermal.make_features(state, p, q_loss, delta_e)
    )
    dt_h = s.grid.dt_h
    j_buy = max(p, 0.0) * dt_h * eps_buy[n]
    j_sell = min(p, 0.0) * dt_h * eps_sell[n]
    j_cyc, j_cal = aging_cost(models.aging, delta_e, theta, e, s.soh0, s.grid.dt_min)
    return delta_e, d_theta, j_buy, j_sell, j_cyc, j_cal


def _simulate(s: Scenario, models: BatteryModels, powers, grids: DdpGrids | None, clamp_power: bool):
    """Shared forward loop for policy rollout and replay."""
    n_steps = s.grid.n_intervals
    prices = tariff.interval_prices(s.profile, s.grid)
    p_star = np.zeros(n_steps)
    e_traj = np.empty(n_steps + 1)
    theta_traj = np.empty(n_steps + 1)
    j_e_steps = np.zeros(n_steps)
    j_d_steps = np.zeros(n_steps)
    e_traj[0], theta_traj[0] = s.e0, s.theta0
    totals = np.zeros(4)  # buy, sell, cyc, cal
    feasible = True
    notes: list[str] = []
    e, th = s.e0, s.theta0
    for n in range(n_steps):
        if grids is not None:
            i = nearest_index(grids.e_d, e)
            j = nearest_index(grids.theta_d, th)
            if grids.cost[n, i, j] >= s.penalty:
                feasible = False
            p = float(grids.action[n, i, j])
        else:
            p = float(powers[n])
            if not s.p_lo - 1e-12 <= p <= s.p_hi + 1e-12:
                notes.append(f"interval {n}: power {p:.3f} kW outside [{s.p_lo}, {s.p_hi}]")
        if clamp_power:
            u, r = electrical.lookup(models.tables, BatteryState(e, th))
            p_floor = electrical.max_discharge_power(u, r)
            if p < p_floor:
                notes.append(f"interval {n}: power {p:.3f} kW clamped to deliverable {p_floor:.3f}")
                p = float(p_floor)
        try:
            delta_e, d_theta, j_buy, j_sell, j_cyc, j_cal = _step_costs(s, models, e, th, p, n, prices)
        except (InfeasiblePowerError, InvalidParameterError) as exc:
            notes.append(f"interval {n}: cannot simulate action {p:.3f} kW ({exc})")
            feasible = False
            e_traj[n + 1 :] = e
            theta_traj[n + 1 :] = th
            break
        p_star[n] = p
        totals += (j_buy, j_sell, j_cyc, j_cal)
        j_e_steps[n] = j_buy + j_sell
        j_d_steps[n] = j_cyc + j_cal
        e += delta_e
        th += d_theta
        e_traj[n + 1] = e
        theta_traj[n + 1] = th
    if grids is not None:
        i = nearest_index(grids.e_d, e)
        j = nearest_index(grids.theta_d, th)
        if grids.cost[n_steps, i, j] >= s.penalty:
            feasible = False
        if not np.isclose(e, s.e_target, atol=0.5 * s.e_step + 1e-12):
            notes.append(
                f"terminal energy {e:.3f} kWh misses target {s.e_target:.3f} by more than half a grid step"
            )
    breakdown = CostBreakdown(
        j_e_buy=float(totals[0]),
        j_e_sell=float(totals[1]),
        j_d_cyc=float(totals[2]),
        j_d_cal=float(totals[3]),
    )
    return DdpSolution(
        p_star=p_star,
        e_traj=e_traj,
        theta_traj=theta_traj,
        cost=breakdown,
        feasible=feasible,
        j_e_steps=j_e_steps,
        j_d_steps=j_d_steps,
        notes=tuple(notes),
    )


def forward_integration(s: Scenario, grids: DdpGrids, models: BatteryModels) -> DdpSolution:
    """Extract the optimal trajectory after backward induction.

    Starts at the initial-state cell (the only cell whose slice-0 cost is
    meaningful), applies continuous transitions, and takes each next action
    from the action grid at the nearest cell of the continuous state.
    """
    return _simulate(s, models, None, grids, clamp_power=False)


def replay(powers, s: Scenario, models: BatteryModels) -> DdpSolution:
    """Simulate a given power trajectory and account its costs.

    No optimization; power-bound violations are reported in notes and
    undeliverable discharge requests are clamped to the physical limit.
    """
    powers = np.asarray(powers, float)
    if len(powers) != s.grid.n_intervals:
        raise InvalidParameterError(
            f"power trajectory has length {len(powers)}, scenario has N={s.grid.n_intervals}"
        )
    sol = _simulate(s, models, powers, None, clamp_power=True)
    notes = list(sol.notes)
    if np.any(sol.e_traj < s.e_lo - 1e-9) or np.any(sol.e_traj > s.e_hi + 1e-9):
        notes.append("energy trajectory leaves [e_lo, e_hi]")
    if np.any(sol.theta_traj < s.theta_lo - 1e-9) or np.any(sol.theta_traj > s.theta_hi + 1e-9):
        notes.append("temperature trajectory leaves [theta_lo, theta_hi]")
    return DdpSolution(
        p_star=sol.p_star,
        e_traj=sol.e_traj,
        theta_traj=sol.theta_traj,
        cost=sol.cost,
        feasible=sol.feasible,
        j_e_steps=sol.j_e_steps,
        j_d_steps=sol.j_d_steps,
        notes=tuple(notes),
    )


def solve(
    s: Scenario,
    models: BatteryModels,
    table: TransitionTable | None = None,
    backend: str | None = None,
) -> DdpSolution:
    """Build grids, run backward induction, and integrate forward."""
    grids = build_grids(s)
    backward_induction(s, grids, models, table=table, backend=backend)
    return forward_integration(s, grids, models)


SOLUTION_CSV_HEADER = ["n", "t_s", "p_kw", "e_kwh", "theta_c", "j_e_eur", "j_d_eur"]


def save_solution_csv(sol: DdpSolution, s: Scenario, path) -> None:
    """One row per state instant; power and costs belong to the interval
    starting at that instant (zero on the final row)."""
    n_steps = s.grid.n_intervals
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SOLUTION_CSV_HEADER)
        for n in range(n_steps + 1):
            last = n == n_steps
            w.writerow(
                [
                    n,
                    repr(n * s.grid.dt_min * 60.0),
                    repr(0.0 if last else float(sol.p_star[n])),
                    repr(float(sol.e_traj[n])),
                    repr(float(sol.theta_traj[n])),
                    repr(0.0 if last else float(sol.j_e_steps[n])),
                    repr(0.0 if last else float(sol.j_d_steps[n])),
                ]
            )
