"""One-interval transition table over all (state cell, action) pairs.

Within one charging event the models are time-invariant: energy and
temperature transitions, feasibility, and aging fades depend only on the
state cell and the action, while time enters the objective solely through
the hourly prices. Backward induction therefore reduces to a cheap
gather/min pass over this table, which is built once per model/bounds
combination and reused across events, modes, and sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import aging as aging_mod
from .. import electrical, thermal
from ..errors import InvalidParameterError
from .scenario import BatteryModels, DdpGrids, Scenario


@dataclass(frozen=True)
class TransitionTable:
    """Precomputed one-step transitions on the state/action grid.

    Arrays are indexed by flattened cell (i * n_theta + j) and action k.
    The successor cost is read by bilinear interpolation of the next cost
    slice: corner00 is the flattened lower-left grid corner enclosing the
    continuous successor state and (frac_e, frac_theta) its interpolation
    weights. valid marks transitions that satisfy the power bounds, the
    deliverable-power limit, and the state bounds. cyc_fade and the cached
    calendar fades are capacity-fade fractions (unscaled by battery value),
    so one table serves every battery price.
    """

    e_d: np.ndarray
    theta_d: np.ndarray
    p_d: np.ndarray
    dt_min: float
    valid: np.ndarray  # (M, K) uint8
    corner00: np.ndarray  # (M, K) int64, flat index i*Nj + j of the lower corner
    frac_e: np.ndarray  # (M, K) in [0, 1]
    frac_theta: np.ndarray  # (M, K) in [0, 1]
    delta_e: np.ndarray  # (M, K) kWh
    cyc_fade: np.ndarray  # (M, K) fade fraction
    buy_energy: np.ndarray  # (K,) kWh drawn when p >= 0
    sell_energy: np.ndarray  # (K,) kWh fed back when p < 0
    theta_cells: np.ndarray  # (M,) degC of each cell
    e_cells: np.ndarray  # (M,) kWh of each cell
    _cal_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def calendar_fades(self, params: aging_mod.AgingParams, soh0: float) -> np.ndarray:
        """Per-cell calendar fade fractions for one interval at this soh0."""
        key = (params.beta_c, params.beta_d, params.beta_e, params.beta_f, soh0)
        if key not in self._cal_cache:
            self._cal_cache[key] = aging_mod.calendar_fade(
                params, self.theta_cells, self.e_cells, soh0, self.dt_min
            )
        return self._cal_cache[key]

    def matches(self, grids: DdpGrids) -> bool:
        return (
            len(self.e_d) == len(grids.e_d)
            and len(self.theta_d) == len(grids.theta_d)
            and len(self.p_d) == len(grids.p_d)
            and np.array_equal(self.e_d, grids.e_d)
            and np.array_equal(self.theta_d, grids.theta_d)
            and np.array_equal(self.p_d, grids.p_d)
        )


def build_transition_table(s: Scenario, models: BatteryModels, grids: DdpGrids) -> TransitionTable:
    """Evaluate the coupled models on every (cell, action) pair.

    Depends on the models, bounds, grid steps, dt, and the optional power
    derating hook; it does not depend on e0/e_target/theta0, prices, soh0,
    battery price, or the horizon length, so it can be shared across solves.
    """
    e_d, theta_d, p_d = grids.e_d, grids.theta_d, grids.p_d
    nj = len(theta_d)
    e_mesh, th_mesh = np.meshgrid(e_d, theta_d, indexing="ij")
    e_cells = e_mesh.reshape(-1)
    th_cells = th_mesh.reshape(-1)
    m = len(e_cells)
    k = len(p_d)

    u, r = electrical.lookup_arrays(models.tables, e_cells, th_cells)
    p_row = p_d[None, :]
    if s.power_bounds is not None:
        lo, hi = s.power_bounds(e_cells, th_cells)
        lo = np.broadcast_to(np.asarray(lo, float), (m,))
        hi = np.broadcast_to(np.asarray(hi, float), (m,))
        valid_power = (p_row >= lo[:, None]) & (p_row <= hi[:, None])
    else:
        valid_power = np.broadcast_to((p_d >= s.p_lo) & (p_d <= s.p_hi), (m, k))

    deliverable = p_row >= electrical.max_discharge_power(u, r)[:, None]
    p_eff = np.where(deliverable, p_row, 0.0)  # placeholder where the root is complex
    i_bat = electrical.battery_current(u[:, None], r[:, None], p_eff)
    q_loss = electrical.ohmic_loss(r[:, None], i_bat)
    delta_e = (s.grid.dt_min / 60.0) * (p_eff - q_loss)
    e_next = e_cells[:, None] + delta_e

    th_bc = np.broadcast_to(th_cells[:, None], (m, k))
    features = thermal.feature_matrix(
        p_eff.reshape(-1), q_loss.reshape(-1), delta_e.reshape(-1), th_bc.reshape(-1)
    )
    d_theta = thermal.predict_batch(models.thermal, features).reshape(m, k)
    th_next = th_cells[:, None] + d_theta

    valid_state = (
        (e_next >= s.e_lo)
        & (e_next <= s.e_hi)
        & (th_next >= s.theta_lo)
        & (th_next <= s.theta_hi)
    )
    valid = (valid_power & deliverable & valid_state).astype(np.uint8)
    corner00, frac_e, frac_theta = _interp_corners(e_d, theta_d, e_next, th_next)

    if np.any(~np.isfinite(delta_e[valid.astype(bool)])):
        raise InvalidParameterError("transition table produced non-finite energy steps")

    dt_h = s.grid.dt_min / 60.0
    return TransitionTable(
        e_d=e_d.copy(),
        theta_d=theta_d.copy(),
        p_d=p_d.copy(),
        dt_min=s.grid.dt_min,
        valid=valid,
        corner00=corner00,
        frac_e=frac_e,
        frac_theta=frac_theta,
        delta_e=delta_e,
        cyc_fade=aging_mod.cyclic_fade(models.aging, delta_e),
        buy_energy=np.maximum(p_d, 0.0) * dt_h,
        sell_energy=np.minimum(p_d, 0.0) * dt_h,
        theta_cells=th_cells,
        e_cells=e_cells,
    )


def _interp_corners(e_d, theta_d, e_next, th_next):
    """Lower corner indices and fractional weights for bilinear reads.

    Successor states are clamped to the grid hull; weights for degenerate
    single-node axes are zero.
    """
    nj = len(theta_d)

    def axis(grid, x):
        x = np.clip(x, grid[0], grid[-1])
        lo = np.clip(np.searchsorted(grid, x, side="right") - 1, 0, max(len(grid) - 2, 0))
        if len(grid) < 2:
            return lo, np.zeros_like(x)
        frac = (x - grid[lo]) / (grid[lo + 1] - grid[lo])
        return lo, frac

    ie, fe = axis(e_d, e_next)
    jt, ft = axis(theta_d, th_next)
    return (ie * nj + jt).astype(np.int64), fe, ft
