"""Risk-sensitive Riccati/offset solves and the optimal feedback law.

The backward matrix Riccati equation carries an extra delta*Pi*sigma*
sigma^T*Pi term relative to the classical LQR equation; for large risk
loading it can escape to infinity in finite time, which is reported as
FiniteEscape rather than propagated as garbage.  The offset equation is
linear given Pi.  The constant C_star equals the log of the optimal
exponential cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FiniteEscape, NonFiniteState
from .model import LqgProblem
from .numerics import (
    MatrixTrajectory,
    TimeGrid,
    half_grid_sampler,
    integrate_ode,
)


@dataclass
class RiccatiSolution:
    """Solved feedback data: Pi, s, affine law, and the cost constant."""

    problem: LqgProblem
    grid: TimeGrid
    Pi: MatrixTrajectory       # (n,n) symmetric
    s: MatrixTrajectory        # (n,)
    K_gain: MatrixTrajectory   # (m,n)
    k_offset: MatrixTrajectory  # (m,)
    C_star: float

    def control(self, i: int, x: np.ndarray) -> np.ndarray:
        """Feedback control at node i for state x (vectorized over rows)."""
        return x @ self.K_gain.values[i].T + self.k_offset.values[i]


def _symmetrize(M):
    return 0.5 * (M + M.T)


def solve_riccati(p: LqgProblem, grid: TimeGrid) -> MatrixTrajectory:
    """Backward solve of the risk-sensitive Riccati equation, Pi(T)=Q_hat."""
    Rinv = np.linalg.inv(p.R)
    B, S, Q, delta = p.B, p.S, p.Q, p.delta

    def field(t, Pi):
        A = p.A(t)
        sig = p.sigma(t)
        PBpS = Pi @ B + S
        Psig = Pi @ sig
        return -(Pi @ A + A.T @ Pi - PBpS @ Rinv @ PBpS.T + Q
                 + delta * (Psig @ Psig.T))

    try:
        return integrate_ode(field, p.Q_hat, grid, "backward",
                             post_step=_symmetrize)
    except NonFiniteState as e:
        raise FiniteEscape(e.t) from e


def solve_offset(p: LqgProblem, Pi: MatrixTrajectory,
                 grid: TimeGrid) -> MatrixTrajectory:
    """Backward solve of the linear offset equation, s(T)=0."""
    Rinv = np.linalg.inv(p.R)
    B, S, delta = p.B, p.S, p.delta
    BRinv = B @ Rinv
    SRinv = S @ Rinv
    pi_at = half_grid_sampler(grid, Pi.values)

    def field(t, s):
        Pi_t = pi_at(t)
        sig = p.sigma(t)
        M = (p.A(t).T - Pi_t @ BRinv @ B.T - SRinv @ B.T
             + delta * Pi_t @ sig @ sig.T)
        forcing = Pi_t @ (p.b(t) + BRinv @ p.zeta) + SRinv @ p.zeta - p.eta
        return -(M @ s + forcing)

    try:
        return integrate_ode(field, np.zeros(p.n), grid, "backward")
    except NonFiniteState as e:
        raise FiniteEscape(e.t) from e


def feedback_law(p: LqgProblem, Pi: MatrixTrajectory, s: MatrixTrajectory):
    """Affine optimal law u(t,x) = K_gain(t) x + k_offset(t)."""
    Rinv = np.linalg.inv(p.R)
    gains = np.einsum("ij,tjk->tik", -Rinv,
                      p.S.T[None, :, :] + np.einsum(
                          "ij,tjk->tik", p.B.T, Pi.values))
    offsets = (s.values @ p.B @ (-Rinv).T) + p.zeta @ Rinv.T
    return (MatrixTrajectory(Pi.grid, gains),
            MatrixTrajectory(s.grid, offsets))


def c_star(p: LqgProblem, Pi: MatrixTrajectory, s: MatrixTrajectory,
           grid: TimeGrid) -> float:
    """Log of the optimal exponential cost, by trapezoidal quadrature."""
    Rinv = np.linalg.inv(p.R)
    nodes = grid.nodes
    integrand = np.empty(len(nodes))
    for i, t in enumerate(nodes):
        s_t = s.values[i]
        Pi_t = Pi.values[i]
        sig = p.sigma(t)
        v = p.B.T @ s_t - p.zeta
        sig_s = sig.T @ s_t
        integrand[i] = (0.5 * p.delta) * (
            2.0 * s_t @ p.b(t) - v @ Rinv @ v + np.trace(Pi_t @ sig @ sig.T)
        ) + (0.5 * p.delta ** 2) * (sig_s @ sig_s)
    integral = float(np.trapezoid(integrand, nodes))
    x0 = p.x0
    return integral + 0.5 * p.delta * float(x0 @ Pi.values[0] @ x0) \
        + p.delta * float(s.values[0] @ x0)


def solve(p: LqgProblem, grid: TimeGrid) -> RiccatiSolution:
    """Full solve: Riccati, offset, feedback law, and C_star."""
    Pi = solve_riccati(p, grid)
    s = solve_offset(p, Pi, grid)
    K_gain, k_offset = feedback_law(p, Pi, s)
    C = c_star(p, Pi, s, grid)
    return RiccatiSolution(problem=p, grid=grid, Pi=Pi, s=s,
                           K_gain=K_gain, k_offset=k_offset, C_star=C)
