"""Equivalent-circuit battery model: current, Ohmic losses, energy throughput.

The battery is abstracted as a voltage source U_OCV in series with an
internal resistance R_i; both depend on battery energy and temperature and
come from a look-up table. Charging power p is gross power in kW at the
API boundary and is converted to W in exactly one place (battery_current).

All functions broadcast over NumPy arrays and are pure; EcmTables is
immutable after load, so everything here is safe for concurrent use.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import BatteryState
from .errors import InfeasiblePowerError, InvalidParameterError


@dataclass(frozen=True)
class EcmTables:
    """Rectangular look-up grids over (e in kWh, theta in degC).

    Axes must be strictly increasing; u_ocv and r_i have shape
    (len(e_axis), len(theta_axis)) with r_i > 0 and u_ocv > 0 everywhere.
    Queries outside the hull clamp to the nearest grid edge.
    """

    e_axis: np.ndarray
    theta_axis: np.ndarray
    u_ocv: np.ndarray
    r_i: np.ndarray

    def __post_init__(self):
        for label, ax in (("e_axis", self.e_axis), ("theta_axis", self.theta_axis)):
            ax = np.asarray(ax, float)
            if ax.ndim != 1 or ax.size < 2 or np.any(np.diff(ax) <= 0):
                raise InvalidParameterError(f"{label} must be 1-D, strictly increasing, length >= 2")
        shape = (len(self.e_axis), len(self.theta_axis))
        for label, grid in (("u_ocv", self.u_ocv), ("r_i", self.r_i)):
            if np.asarray(grid).shape != shape:
                raise InvalidParameterError(f"{label} grid shape {np.asarray(grid).shape} != {shape}")
            if np.any(np.asarray(grid) <= 0):
                raise InvalidParameterError(f"{label} must be positive everywhere")


def default_tables() -> EcmTables:
    """Demo tables for tests and the synthetic plant.

    U_OCV is affine in energy (300 V at 0 kWh to 420 V at 80 kWh), flat in
    temperature; R_i is 0.10 Ohm at and above 25 degC, rising linearly to
    0.25 Ohm at -25 degC, flat in energy.
    """
    e_axis = np.array([0.0, 80.0])
    theta_axis = np.array([-25.0, 25.0, 60.0])
    u = np.array([[300.0, 300.0, 300.0], [420.0, 420.0, 420.0]])
    r = np.array([[0.25, 0.10, 0.10], [0.25, 0.10, 0.10]])
    return EcmTables(e_axis, theta_axis, u, r)


def _interp2(e_axis, theta_axis, grid, e, theta):
    """Bilinear interpolation with clamping to the table hull."""
    e = np.clip(np.asarray(e, float), e_axis[0], e_axis[-1])
    th = np.clip(np.asarray(theta, float), theta_axis[0], theta_axis[-1])
    ie = np.clip(np.searchsorted(e_axis, e, side="right") - 1, 0, len(e_axis) - 2)
    it = np.clip(np.searchsorted(theta_axis, th, side="right") - 1, 0, len(theta_axis) - 2)
    fe = (e - e_axis[ie]) / (e_axis[ie + 1] - e_axis[ie])
    ft = (th - theta_axis[it]) / (theta_axis[it + 1] - theta_axis[it])
    return (
        grid[ie, it] * (1 - fe) * (1 - ft)
        + grid[ie + 1, it] * fe * (1 - ft)
        + grid[ie, it + 1] * (1 - fe) * ft
        + grid[ie + 1, it + 1] * fe * ft
    )


def lookup_arrays(tables: EcmTables, e, theta):
    """Vectorized (u_ocv, r_i) lookup; e/theta broadcast elementwise."""
    return (
        _interp2(tables.e_axis, tables.theta_axis, tables.u_ocv, e, theta),
        _interp2(tables.e_axis, tables.theta_axis, tables.r_i, e, theta),
    )


def lookup(tables: EcmTables, state: BatteryState) -> tuple[float, float]:
    """(U_OCV in V, R_i in Ohm) at one battery state."""
    u, r = lookup_arrays(tables, state.e, state.theta)
    return float(u), float(r)


def max_discharge_power(u_ocv, r_i):
    """Most negative gross power (kW) the cell can deliver at (u_ocv, r_i).

    Below this the current equation has no real solution.
    """
    return -np.asarray(u_ocv, float) ** 2 / (4.0 * np.asarray(r_i, float)) / 1000.0


def battery_current(u_ocv, r_i, p_kw):
    """Battery current in A for gross power p (kW), positive while charging.

    Solves R_i*I^2 + U_OCV*I - p = 0 for the greater root, the only
    physically feasible one; sign(I) = sign(p).
    """
    u = np.asarray(u_ocv, float)
    r = np.asarray(r_i, float)
    p_w = np.asarray(p_kw, float) * 1000.0
    disc = u * u + 4.0 * r * p_w
    if np.any(disc < 0):
        raise InfeasiblePowerError(
            "requested discharge power exceeds maximum deliverable "
            f"({np.min(max_discharge_power(u, r)):.3f} kW)"
        )
    i = (-u + np.sqrt(disc)) / (2.0 * r)
    return i if i.ndim else float(i)


def ohmic_loss(r_i, i_bat):
    """Ohmic heat flow R_i * I^2 in kW; positive for charge and discharge."""
    q = np.asarray(r_i, float) * np.asarray(i_bat, float) ** 2 / 1000.0
    return q if q.ndim else float(q)


def energy_step(
    tables: EcmTables, state: BatteryState, p_kw: float, dt_min: float
) -> tuple[float, float]:
    """(delta_e in kWh, q_loss in kW) over one interval at constant power.

    U_OCV and R_i are held fixed within the interval. Losses reduce the
    stored energy gain while charging and increase the drawn energy while
    discharging.
    """
    u, r = lookup(tables, state)
    i = battery_current(u, r, p_kw)
    q = ohmic_loss(r, i)
    delta_e = (dt_min / 60.0) * (p_kw - q)
    return float(delta_e), float(q)


ECM_CSV_HEADER = ["e_kwh", "theta_c", "u_ocv_v", "r_i_ohm"]


def save_tables_csv(tables: EcmTables, path) -> None:
    """Write tables in long format, one row per grid node."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ECM_CSV_HEADER)
        for i, e in enumerate(tables.e_axis):
            for j, th in enumerate(tables.theta_axis):
                w.writerow(
                    [repr(float(e)), repr(float(th)), repr(float(tables.u_ocv[i, j])), repr(float(tables.r_i[i, j]))]
                )


def load_tables_csv(path) -> EcmTables:
    """Read long-format tables; validates that the grid is rectangular."""
    rows = []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        missing = set(ECM_CSV_HEADER) - set(r.fieldnames or [])
        if missing:
            raise InvalidParameterError(f"lookup CSV {path} missing columns {sorted(missing)}")
        for row in r:
            rows.append([float(row[c]) for c in ECM_CSV_HEADER])
    if not rows:
        raise InvalidParameterError(f"lookup CSV {path} has no data rows")
    arr = np.asarray(rows, float)
    e_axis = np.unique(arr[:, 0])
    theta_axis = np.unique(arr[:, 1])
    if len(rows) != len(e_axis) * len(theta_axis):
        raise InvalidParameterError("lookup grid is not rectangular")
    u = np.full((len(e_axis), len(theta_axis)), np.nan)
    ri = np.full_like(u, np.nan)
    for e, th, uv, rv in arr:
        i = int(np.searchsorted(e_axis, e))
        j = int(np.searchsorted(theta_axis, th))
        u[i, j] = uv
        ri[i, j] = rv
    if np.any(np.isnan(u)) or np.any(np.isnan(ri)):
        raise InvalidParameterError("lookup grid has duplicate or missing nodes")
    return EcmTables(e_axis, theta_axis, u, ri)
