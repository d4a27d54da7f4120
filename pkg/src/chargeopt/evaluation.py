"""Experimental protocols: model validation, mode comparison, sweeps.

Local errors score one-step predictions seeded with measured
start-of-interval states; global errors score full rollouts seeded only
with the initial state, quantifying error accumulation. Mode I replays the
event's own powers, Mode II optimizes energy cost only (aging re-priced
afterward), Mode III optimizes energy plus aging cost. Sweeps re-solve
Mode III over a gamma or battery-price axis. Events and sweep points are
independent; aggregation is ordered and deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import electrical, tariff, thermal
from .aging import aging_cost
from .core import ChargingEvent, CostBreakdown
from .errors import InvalidParameterError
from .optimizer import (
    BatteryModels,
    DdpSolution,
    Scenario,
    TransitionTable,
    build_grids,
    build_transition_table,
    replay,
    solve,
)
from .thermal import constant_model

HIGH_POWER_SPLIT_KW = 7.0
MIN_EVENT_DURATION_H = 2.0


# ---------------------------------------------------------------------------
# model validation (local / global errors)


@dataclass(frozen=True)
class ModelErrors:
    local_rmse: float
    global_mae: float


@dataclass(frozen=True)
class ValidationReport:
    """Electrical errors in % SOC, thermal errors in K, per predictor."""

    electrical: ModelErrors
    thermal: dict

    @property
    def local_rmse_soc(self) -> float:
        return self.electrical.local_rmse

    @property
    def global_mae_soc(self) -> float:
        return self.electrical.global_mae


def _event_one_step(tables, ev: ChargingEvent):
    """Predicted (delta_e, q_loss) per interval from measured interval-start states."""
    u, r = electrical.lookup_arrays(tables, ev.e[:-1], ev.theta[:-1])
    i_bat = electrical.battery_current(u, r, ev.p)
    q_loss = electrical.ohmic_loss(r, i_bat)
    delta_e = (ev.grid.dt_min / 60.0) * (ev.p - q_loss)
    return delta_e, q_loss


def validate_models(
    events: list[ChargingEvent],
    tables,
    thermal_models: dict,
    e_nom: float = 80.0,
) -> ValidationReport:
    """Local and global errors of the electrical and thermal models.

    The electrical rollout uses the measured temperature series (isolating
    circuit-model error); each thermal rollout propagates energy and
    temperature jointly through the coupled models.
    """
    if not events:
        raise InvalidParameterError("empty event corpus")
    err_de = []
    err_dtheta = {name: [] for name in thermal_models}
    for ev in events:
        de_hat, q_loss = _event_one_step(tables, ev)
        de_meas = np.diff(ev.e)
        err_de.append((de_hat - de_meas) / e_nom * 100.0)
        feats = thermal.feature_matrix(ev.p, q_loss, de_hat, ev.theta[:-1])
        dth_meas = np.diff(ev.theta)
        for name, model in thermal_models.items():
            err_dtheta[name].append(thermal.predict_batch(model, feats) - dth_meas)
    local_soc = float(np.sqrt(np.mean(np.concatenate(err_de) ** 2)))
    local_theta = {
        name: float(np.sqrt(np.mean(np.concatenate(errs) ** 2))) for name, errs in err_dtheta.items()
    }

    gl_soc = []
    gl_theta = {name: [] for name in thermal_models}
    for ev in events:
        dt = ev.grid.dt_min
        # electrical rollout with measured temperatures
        e_hat = ev.e[0]
        for n in range(ev.grid.n_intervals):
            u, r = electrical.lookup_arrays(tables, e_hat, ev.theta[n])
            i_bat = electrical.battery_current(u, r, ev.p[n])
            e_hat = e_hat + (dt / 60.0) * (ev.p[n] - electrical.ohmic_loss(r, i_bat))
        gl_soc.append(abs(e_hat - ev.e[-1]) / e_nom * 100.0)
        # joint rollouts per thermal model
        for name, model in thermal_models.items():
            e_hat, th_hat = ev.e[0], ev.theta[0]
            for n in range(ev.grid.n_intervals):
                u, r = electrical.lookup_arrays(tables, e_hat, th_hat)
                i_bat = electrical.battery_current(u, r, ev.p[n])
                q = electrical.ohmic_loss(r, i_bat)
                de = (dt / 60.0) * (ev.p[n] - q)
                feats = thermal.feature_matrix([ev.p[n]], [q], [de], [th_hat])
                th_hat = th_hat + float(thermal.predict_batch(model, feats)[0])
                e_hat = e_hat + de
            gl_theta[name].append(abs(th_hat - ev.theta[-1]))
    report_thermal = {
        name: ModelErrors(local_rmse=local_theta[name], global_mae=float(np.mean(gl_theta[name])))
        for name in thermal_models
    }
    return ValidationReport(
        electrical=ModelErrors(local_rmse=local_soc, global_mae=float(np.mean(gl_soc))),
        thermal=report_thermal,
    )


# ---------------------------------------------------------------------------
# mode comparison


@dataclass(frozen=True)
class ModeComparison:
    mode_i: DdpSolution
    mode_ii: DdpSolution
    mode_iii: DdpSolution

    def normalized_totals(self) -> tuple[float, float, float]:
        """Totals normalized against Mode I."""
        base = self.mode_i.cost.total
        if base == 0:
            raise InvalidParameterError("Mode I total is zero; cannot normalize")
        return (1.0, self.mode_ii.cost.total / base, self.mode_iii.cost.total / base)


def default_scenario(profile: tariff.PriceProfile | None = None, **overrides) -> Scenario:
    """Reference instance: an 8 h workday-afternoon event moving 24 to 64 kWh
    at the standard bounds and grid steps."""
    from .core import TimeGrid

    if profile is None:
        profile = tariff.default_profiles()[0]
    kwargs = dict(
        grid=TimeGrid(t0=14 * 3600.0, n_intervals=96, dt_min=5.0),
        e0=24.0,
        e_target=64.0,
        theta0=20.0,
        profile=profile,
        soh0=0.98,
    )
    kwargs.update(overrides)
    return Scenario(**kwargs)


def scenario_for_event(
    event: ChargingEvent,
    profile: tariff.PriceProfile,
    **overrides,
) -> Scenario:
    """Scenario matching an event's window, endpoints, and state of health."""
    kwargs = dict(
        grid=event.grid,
        e0=float(event.e[0]),
        e_target=float(event.e[-1]),
        theta0=float(event.theta[0]),
        profile=profile,
        soh0=event.soh0,
    )
    kwargs.update(overrides)
    return Scenario(**kwargs)


def compare_modes(
    event: ChargingEvent,
    s: Scenario,
    models: BatteryModels,
    table: TransitionTable | None = None,
    backend: str | None = None,
) -> ModeComparison:
    """Replay the event (Mode I) and solve Modes II and III on its scenario."""
    if event.duration_h < MIN_EVENT_DURATION_H:
        raise InvalidParameterError(
            f"event lasts {event.duration_h:.2f} h; mode comparison needs >= {MIN_EVENT_DURATION_H} h"
        )
    if table is None:
        table = build_transition_table(s, models, build_grids(s))
    mode_i = replay(event.p, s, models)
    s_ii = replace(s, include_aging_in_objective=False)
    s_iii = replace(s, include_aging_in_objective=True)
    mode_ii = solve(s_ii, models, table=table, backend=backend)
    mode_iii = solve(s_iii, models, table=table, backend=backend)
    return ModeComparison(mode_i=mode_i, mode_ii=mode_ii, mode_iii=mode_iii)


def eligible_events(events: list[ChargingEvent]) -> list[ChargingEvent]:
    """Events long enough for the mode-comparison protocol."""
    return [ev for ev in events if ev.duration_h >= MIN_EVENT_DURATION_H]


# ---------------------------------------------------------------------------
# thermal-model effect


@dataclass(frozen=True)
class ThermalEffectReport:
    """Mode III solved under a constant-temperature assumption vs a learned model.

    underestimation is the relative amount by which the constant-model
    optimum understates the learned-model optimum. Power deviations between
    the two trajectories are split at the high-power threshold; an interval
    counts as high-power when either trajectory exceeds it in magnitude.
    """

    sol_constant: DdpSolution
    sol_learned: DdpSolution
    constant_repriced: DdpSolution
    underestimation: float
    mean_dev_high_kw: float
    mean_dev_low_kw: float
    n_high: int
    n_low: int


def thermal_effect(
    s: Scenario,
    models: BatteryModels,
    table: TransitionTable | None = None,
    backend: str | None = None,
) -> ThermalEffectReport:
    models_const = replace(models, thermal=constant_model())
    sol_learned = solve(s, models, table=table, backend=backend)
    sol_const = solve(s, models_const, backend=backend)
    repriced = replay(sol_const.p_star, s, models)
    dev = np.abs(sol_const.p_star - sol_learned.p_star)
    high = np.maximum(np.abs(sol_const.p_star), np.abs(sol_learned.p_star)) > HIGH_POWER_SPLIT_KW
    total_learned = sol_learned.cost.total
    under = 1.0 - sol_const.cost.total / total_learned if total_learned != 0 else 0.0
    return ThermalEffectReport(
        sol_constant=sol_const,
        sol_learned=sol_learned,
        constant_repriced=repriced,
        underestimation=under,
        mean_dev_high_kw=float(dev[high].mean()) if high.any() else 0.0,
        mean_dev_low_kw=float(dev[~high].mean()) if (~high).any() else 0.0,
        n_high=int(high.sum()),
        n_low=int((~high).sum()),
    )


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepPoint:
    axis_value: float
    cost: CostBreakdown
    feasible: bool
    n_discharge_intervals: int
    p_star: np.ndarray


@dataclass(frozen=True)
class SweepResult:
    axis_name: str
    points: list

    @property
    def axis(self) -> np.ndarray:
        return np.array([pt.axis_value for pt in self.points])

    @property
    def totals(self) -> np.ndarray:
        return np.array([pt.cost.total for pt in self.points])


def _check_axis(values, name: str):
    values = np.asarray(values, float)
    if values.size == 0 or np.any(np.diff(values) <= 0):
        raise InvalidParameterError(f"{name} axis must be non-empty and strictly increasing")
    return values


def sweep_gamma(
    s: Scenario,
    models: BatteryModels,
    gammas,
    table: TransitionTable | None = None,
    backend: str | None = None,
) -> SweepResult:
    """Mode III solved per gamma, with sell prices scaled to gamma times buy."""
    gammas = _check_axis(gammas, "gamma")
    if table is None:
        table = build_transition_table(s, models, build_grids(s))
    points = []
    for g in gammas:
        sg = s.with_profile(tariff.scale_gamma(s.profile, float(g)))
        sol = solve(sg, models, table=table, backend=backend)
        points.append(
            SweepPoint(
                axis_value=float(g),
                cost=sol.cost,
                feasible=sol.feasible,
                n_discharge_intervals=int(np.sum(sol.p_star < 0)),
                p_star=sol.p_star,
            )
        )
    return SweepResult(axis_name="gamma", points=points)


def sweep_battery_price(
    s: Scenario,
    models: BatteryModels,
    v_ev_values,
    table: TransitionTable | None = None,
    backend: str | None = None,
) -> SweepResult:
    """Mode III re-solved per battery value loss V_EV; the axis is sorted
    ascending (the conventional listing runs from today's price downward)."""
    values = _check_axis(np.sort(np.asarray(v_ev_values, float)), "v_ev")
    if table is None:
        table = build_transition_table(s, models, build_grids(s))
    points = []
    for v in values:
        models_v = replace(models, aging=models.aging.with_value(float(v)))
        sol = solve(s, models_v, table=table, backend=backend)
        points.append(
            SweepPoint(
                axis_value=float(v),
                cost=sol.cost,
                feasible=sol.feasible,
                n_discharge_intervals=int(np.sum(sol.p_star < 0)),
                p_star=sol.p_star,
            )
        )
    return SweepResult(axis_name="v_ev", points=points)


def fixed_trajectory_aging(cost: CostBreakdown, v_base: float, v_new: float) -> float:
    """Aging cost of a fixed trajectory repriced from v_base to v_new; the
    aging cost is linear in the battery value loss."""
    if v_base <= 0:
        raise InvalidParameterError("v_base must be positive")
    return cost.j_d * v_new / v_base


# ---------------------------------------------------------------------------
# gamma-star threshold


def gamma_star(j_e: float, j_d: float, eta: float) -> float:
    """Sell/buy price ratio above which a charge-discharge round trip pays."""
    if j_e <= 0:
        raise InvalidParameterError("j_e must be positive")
    if not 0.0 < eta <= 1.0:
        raise InvalidParameterError("eta must be in (0, 1]")
    return (j_e + 2.0 * j_d) / (eta * j_e)


def gamma_star_two_interval(
    models: BatteryModels,
    eps_buy: float,
    p_abs: float = HIGH_POWER_SPLIT_KW,
    theta: float = 21.0,
    e: float = 40.0,
    h0: float = 0.975,
    eta: float = 0.997,
    dt_min: float = 5.0,
) -> float:
    """Threshold from charging one interval and discharging the next at
    equal magnitude: energy cost of the buy interval plus twice the
    per-interval aging cost, against the discounted resale."""
    from .core import BatteryState

    state = BatteryState(e, theta)
    delta_e, _ = electrical.energy_step(models.tables, state, p_abs, dt_min)
    j_cyc, j_cal = aging_cost(models.aging, delta_e, theta, e, h0, dt_min)
    j_e = p_abs * (dt_min / 60.0) * eps_buy
    return gamma_star(j_e, j_cyc + j_cal, eta)


# ---------------------------------------------------------------------------
# report CSVs


MODES_CSV_HEADER = ["event_id", "mode", "j_e_buy", "j_e_sell", "j_d_cyc", "j_d_cal", "total", "total_norm"]
SWEEP_CSV_HEADER = ["axis_value", "j_e_buy", "j_e_sell", "j_d_cyc", "j_d_cal", "total", "total_norm"]
VALIDATION_CSV_HEADER = ["model", "local_rmse", "global_mae"]


def save_modes_csv(rows: list[tuple[str, ModeComparison]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MODES_CSV_HEADER)
        for event_id, cmp_ in rows:
            base = cmp_.mode_i.cost.total
            for mode, sol in (("I", cmp_.mode_i), ("II", cmp_.mode_ii), ("III", cmp_.mode_iii)):
                c = sol.cost
                norm = c.total / base if base != 0 else float("nan")
                w.writerow(
                    [event_id, mode]
                    + [repr(v) for v in (c.j_e_buy, c.j_e_sell, c.j_d_cyc, c.j_d_cal, c.total, norm)]
                )


def save_sweep_csv(result: SweepResult, path, norm_base: float | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_CSV_HEADER)
        base = norm_base if norm_base is not None else result.points[0].cost.total
        for pt in result.points:
            c = pt.cost
            norm = c.total / base if base != 0 else float("nan")
            w.writerow(
                [repr(pt.axis_value)]
                + [repr(v) for v in (c.j_e_buy, c.j_e_sell, c.j_d_cyc, c.j_d_cal, c.total, norm)]
            )


def save_validation_csv(report: ValidationReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(VALIDATION_CSV_HEADER)
        w.writerow(["electrical_ecm", repr(report.electrical.local_rmse), repr(report.electrical.global_mae)])
        for name in sorted(report.thermal):
            errs = report.thermal[name]
            w.writerow([name, repr(errs.local_rmse), repr(errs.global_mae)])
