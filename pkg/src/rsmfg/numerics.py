"""Fixed-step matrix ODE integration and grid utilities.

Everything here is deterministic, allocation-light, and operates on a
uniform time grid.  The classical 4th-order Runge-Kutta scheme evaluates
vector fields only at grid nodes and midpoints, so time-dependent
coefficients sampled on the half-grid are sufficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteState, OutOfRange

# Any state entry beyond this magnitude is treated as finite escape.
BLOWUP_BOUND = 1e8


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [t_start, t_end] with `steps` intervals."""

    t_end: float
    steps: int
    t_start: float = 0.0

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("grid needs at least 2 steps")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")

    @property
    def h(self) -> float:
        return (self.t_end - self.t_start) / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.steps + 1)

    @property
    def half_nodes(self) -> np.ndarray:
        """All RK4 evaluation times: nodes plus interval midpoints."""
        return np.linspace(self.t_start, self.t_end, 2 * self.steps + 1)

    def node_index(self, t: float) -> int:
        """Nearest node index; raises if t is not (close to) a node."""
        pos = (t - self.t_start) / self.h
        i = int(round(pos))
        if abs(pos - i) > 1e-8:
            raise ValueError(f"t={t} is not a grid node")
        return i


@dataclass
class MatrixTrajectory:
    """Node-sampled matrix- or vector-valued function of time."""

    grid: TimeGrid
    values: np.ndarray  # shape (steps+1, ...) one entry per node

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.grid.steps + 1:
            raise ValueError("values length must equal steps+1")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trajectory contains non-finite entries")

    @property
    def shape(self) -> tuple:
        return self.values.shape[1:]

    def at_node(self, i: int) -> np.ndarray:
        return self.values[i]

    def __call__(self, t: float) -> np.ndarray:
        return interpolate(self, t)

    def half_values(self) -> np.ndarray:
        """Values on the half-grid (linear at midpoints, exact at nodes)."""
        v = self.values
        out = np.empty((2 * self.grid.steps + 1,) + v.shape[1:])
        out[0::2] = v
        out[1::2] = 0.5 * (v[:-1] + v[1:])
        return out


def interpolate(traj: MatrixTrajectory, t: float) -> np.ndarray:
    """Piecewise-linear interpolation; exact at nodes."""
    g = traj.grid
    if t < g.t_start - 1e-12 or t > g.t_end + 1e-12:
        raise OutOfRange(f"t={t} outside [{g.t_start}, {g.t_end}]")
    pos = np.clip((t - g.t_start) / g.h, 0.0, g.steps)
    nearest = int(round(pos))
    if abs(pos - nearest) < 1e-12:  # exact at nodes, up to time round-off
        return traj.values[nearest].copy()
    i = int(pos)
    frac = pos - i
    return (1.0 - frac) * traj.values[i] + frac * traj.values[i + 1]


def half_grid_sampler(grid: TimeGrid, node_values: np.ndarray):
    """Callable t -> value for t on the half-grid of `grid`.

    Exact at nodes, linear at midpoints.  Used to feed node-sampled
    coefficients to RK4 without per-call interpolation searches.
    """
    node_values = np.asarray(node_values, dtype=float)
    half = np.empty((2 * grid.steps + 1,) + node_values.shape[1:])
    half[0::2] = node_values
    half[1::2] = 0.5 * (node_values[:-1] + node_values[1:])
    half_h = grid.h / 2.0
    t0 = grid.t_start
    top = 2 * grid.steps

    def sample(t: float) -> np.ndarray:
        idx = int(round((t - t0) / half_h))
        if idx < 0 or idx > top:
            raise OutOfRange(f"t={t} outside grid")
        return half[idx]

    return sample


def _check_state(y: np.ndarray, t: float) -> None:
    m = np.max(np.abs(y))
    if not np.isfinite(m) or m > BLOWUP_BOUND:
        raise NonFiniteState(t)


def integrate_ode(vector_field, boundary_value, grid: TimeGrid,
                  direction: str = "forward",
                  post_step=None) -> MatrixTrajectory:
    """Classical RK4 over the grid.

    `direction="forward"` places the boundary value at t=t_start;
    `"backward"` places it at t=t_end and integrates by time reversal.
    `post_step`, if given, maps each new state (e.g. symmetrization).
    Raises NonFiniteState on blow-up.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    y0 = np.asarray(boundary_value, dtype=float)
    M = grid.steps
    h = grid.h
    nodes = grid.nodes
    values = np.empty((M + 1,) + y0.shape)

    if direction == "forward":
        order = range(M)
        step = h
        values[0] = y0
    else:
        order = range(M, 0, -1)
        step = -h
        values[M] = y0

    y = y0
    _check_state(y, nodes[0] if direction == "forward" else nodes[M])
    for i in order:
        t = nodes[i]
        k1 = vector_field(t, y)
        k2 = vector_field(t + step / 2.0, y + (step / 2.0) * k1)
        k3 = vector_field(t + step / 2.0, y + (step / 2.0) * k2)
        k4 = vector_field(t + step, y + step * k3)
        y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if post_step is not None:
            y = post_step(y)
        j = i + 1 if direction == "forward" else i - 1
        _check_state(y, nodes[j])
        values[j] = y
    return MatrixTrajectory(grid, values)


def state_transition(A, grid: TimeGrid):
    """Fundamental matrix and its inverse for dY = A(t) Y dt.

    Returns (Upsilon, Upsilon_inv) with Upsilon(0)=I, solving
    d/dt Upsilon = A Upsilon and d/dt Upsilon^{-1} = -Upsilon^{-1} A.
    """
    A0 = np.asarray(A(grid.t_start), dtype=float)
    n = A0.shape[0]
    eye = np.eye(n)
    ups = integrate_ode(lambda t, Y: A(t) @ Y, eye, grid, "forward")
    ups_inv = integrate_ode(lambda t, Y: -Y @ A(t), eye, grid, "forward")
    return ups, ups_inv
