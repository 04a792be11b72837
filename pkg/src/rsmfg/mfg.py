"""Major-minor mean-field equilibrium via the consistency fixed point.

The infinite-population game reduces to two families of single-agent
risk-sensitive problems on extended states: the major agent sees
(x0, xbar), a representative minor agent of type k sees (x, x0, xbar).
The mean-field drift coefficients Abar(t), Gbar(t), mbar(t) both feed
those extended problems and are recomputed from their solutions, so the
equilibrium is the fixed point of a sweep: solve the major's Riccati and
offset, then each minor type's, then refresh the coefficients.  Each
inner solve delegates to the single-agent riccati module with the
extended matrices substituted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotConverged
from .model import ExtendedSystem, LqgProblem, MajorMinorSpec
from .numerics import MatrixTrajectory, TimeGrid, half_grid_sampler, integrate_ode
from .riccati import feedback_law, solve_offset, solve_riccati


def _pi_blocks(M: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """[pi_1 M, ..., pi_K M] as one wide matrix."""
    return np.concatenate([w * M for w in pi], axis=1)


def assemble_mean_field(minors, pi):
    """Structural mean-field matrices (A_breve, G_breve, B_breve, m_breve).

    Row block k of A_breve is A_k e_k + [pi_1 F_k, ..., pi_K F_k]; G_breve
    stacks the G_k; B_breve is block-diagonal in the B_k; m_breve stacks
    the drift offsets b_k(t).
    """
    K = len(minors)
    n = minors[0].A.shape[0]
    m = minors[0].B.shape[1]
    pi = np.asarray(pi, dtype=float)
    if len(pi) != K:
        raise DimensionMismatch("pi length must equal the number of types")
    A_breve = np.zeros((n * K, n * K))
    G_breve = np.zeros((n * K, n))
    B_breve = np.zeros((n * K, m * K))
    for k, th in enumerate(minors):
        rows = slice(n * k, n * (k + 1))
        A_breve[rows] = _pi_blocks(th.F, pi)
        A_breve[rows, n * k:n * (k + 1)] += th.A
        G_breve[rows] = th.G
        B_breve[rows, m * k:m * (k + 1)] = th.B

    def m_breve(t):
        return np.concatenate([th.b(t) for th in minors])

    return A_breve, G_breve, B_breve, m_breve


def assemble_major(spec: MajorMinorSpec) -> ExtendedSystem:
    """Extended system of the major agent on the state (x0, xbar)."""
    n, K = spec.n, spec.K
    maj = spec.major
    A_breve, G_breve, B_breve, m_breve = assemble_mean_field(spec.minors,
                                                             spec.pi)
    F0_pi = _pi_blocks(maj.F, spec.pi)
    dim = n * (1 + K)
    A_tilde = np.block([[maj.A, F0_pi], [G_breve, A_breve]])
    B_own = np.vstack([maj.B, np.zeros((n * K, spec.m))])
    B_mean = np.vstack([np.zeros((n, B_breve.shape[1])), B_breve])

    T0 = np.concatenate([np.eye(n), -_pi_blocks(maj.H, spec.pi)], axis=1)
    Q_bb = T0.T @ maj.Q @ T0
    G_bb = T0.T @ maj.Q_hat @ T0
    S_bb = T0.T @ maj.S
    eta_bar = T0.T @ (maj.Q @ maj.eta)
    n_bar = maj.S.T @ maj.eta

    def M_tilde(t):
        return np.concatenate([maj.b(t), m_breve(t)])

    def Sigma(t):
        return np.vstack([maj.sigma(t), np.zeros((n * K, spec.r))])

    x0 = np.concatenate([maj.x0] + [th.x0 for th in spec.minors])
    return ExtendedSystem(dim=dim, A_tilde=A_tilde, B_own=B_own,
                          B_major=None, B_mean=B_mean, M_tilde=M_tilde,
                          Sigma=Sigma, Q_bb=Q_bb, S_bb=S_bb, G_bb=G_bb,
                          eta_bar=eta_bar, n_bar=n_bar, R=maj.R,
                          delta=maj.delta, x0=x0)


def assemble_minor(spec: MajorMinorSpec, k: int,
                   eta_hat_sign: float = -1.0) -> ExtendedSystem:
    """Extended system of a type-k minor agent on the state (x, x0, xbar).

    eta_hat_sign sets the sign of the mean-field tracking block in the
    linear cost term eta_bar; -1 matches the congruence transform used for
    every quadratic block, +1 is exposed as a configuration switch.
    """
    n, K = spec.n, spec.K
    th = spec.minors[k]
    major_ext = assemble_major(spec)
    dim = n * (2 + K)
    F_pi = _pi_blocks(th.F, spec.pi)
    top = np.concatenate([th.A, th.G, F_pi], axis=1)
    A_tilde = np.vstack([
        top,
        np.concatenate([np.zeros((major_ext.dim, n)), major_ext.A_tilde],
                       axis=1),
    ])
    B_own = np.vstack([th.B, np.zeros((major_ext.dim, spec.m))])
    B_major = np.vstack([np.zeros((n, spec.m)), major_ext.B_own])
    B_mean = np.vstack([np.zeros((n, major_ext.B_mean.shape[1])),
                        major_ext.B_mean])

    H_hat_pi = _pi_blocks(th.H_hat, spec.pi)
    Tk = np.concatenate([np.eye(n), -th.H, -H_hat_pi], axis=1)
    Tk_eta = np.concatenate([np.eye(n), -th.H, eta_hat_sign * H_hat_pi],
                            axis=1)
    Q_bb = Tk.T @ th.Q @ Tk
    G_bb = Tk.T @ th.Q_hat @ Tk
    S_bb = Tk.T @ th.S
    eta_bar = Tk_eta.T @ (th.Q @ th.eta)
    n_bar = th.S.T @ th.eta

    def M_tilde(t, _maj=major_ext.M_tilde):
        return np.concatenate([th.b(t), _maj(t)])

    def Sigma(t, _maj_sig=major_ext.Sigma):
        out = np.zeros((dim, 2 * spec.r))
        out[:n, :spec.r] = th.sigma(t)
        out[n:, spec.r:] = _maj_sig(t)
        return out

    x0 = np.concatenate([th.x0, major_ext.x0])
    return ExtendedSystem(dim=dim, A_tilde=A_tilde, B_own=B_own,
                          B_major=B_major, B_mean=B_mean, M_tilde=M_tilde,
                          Sigma=Sigma, Q_bb=Q_bb, S_bb=S_bb, G_bb=G_bb,
                          eta_bar=eta_bar, n_bar=n_bar, R=th.R,
                          delta=th.delta, x0=x0)


@dataclass
class IterationLog:
    """Per-sweep sup-norm errors of the coefficient update."""

    errors: list
    tolerance: float
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.errors)


@dataclass
class MfgEquilibrium:
    """Converged consistency solution and derived equilibrium laws."""

    spec: MajorMinorSpec
    grid: TimeGrid
    Pi0: MatrixTrajectory
    s0: MatrixTrajectory
    Pik: list
    sk: list
    A_bar: MatrixTrajectory   # (nK, nK)
    G_bar: MatrixTrajectory   # (nK, n)
    m_bar: MatrixTrajectory   # (nK,)
    major_problem: LqgProblem   # extended problem the major solution obeys
    minor_problems: list
    major_ext: ExtendedSystem
    minor_exts: list
    iterations: IterationLog


def _extended_problem(sys: ExtendedSystem, A_nodes, M_nodes, grid, T):
    """Wrap a time-varying extended system as a single-agent problem."""
    return LqgProblem(
        A=half_grid_sampler(grid, A_nodes),
        B=sys.B_own,
        b=half_grid_sampler(grid, M_nodes),
        sigma=sys.Sigma,
        Q=sys.Q_bb, S=sys.S_bb, R=sys.R,
        eta=sys.eta_bar, zeta=sys.n_bar, Q_hat=sys.G_bb,
        delta=sys.delta, x0=sys.x0, T=T,
    )


def solve_consistency(spec: MajorMinorSpec, grid: TimeGrid = None,
                      tol: float = 1e-10, max_iter: int = 50,
                      relaxation: float = 0.0, eta_hat_sign: float = -1.0,
                      callback=None) -> MfgEquilibrium:
    """Fixed-point sweep over (A_bar, G_bar, m_bar).

    Each sweep solves the major extended Riccati/offset first (the minor
    systems consume its closed-loop coefficients), then every minor type,
    then refreshes the mean-field coefficients.  The error is the sum of
    the sup-norms of the A_bar and G_bar changes over the grid.  The
    optional callback(j, A_bar, G_bar, m_bar, error) observes each sweep.
    """
    if grid is None:
        grid = TimeGrid(t_end=spec.T, steps=2000)
    n, m, K = spec.n, spec.m, spec.K
    M = grid.steps
    nodes = grid.nodes
    major_ext = assemble_major(spec)
    minor_exts = [assemble_minor(spec, k, eta_hat_sign) for k in range(K)]
    d0 = major_ext.dim

    R0inv = np.linalg.inv(major_ext.R)
    Rkinv = [np.linalg.inv(me.R) for me in minor_exts]
    F0_pi = _pi_blocks(spec.major.F, spec.pi)
    b0_nodes = np.stack([spec.major.b(t) for t in nodes])
    bk_nodes = [np.stack([th.b(t) for t in nodes]) for th in spec.minors]

    # iterates on the grid
    A_bar = np.zeros((M + 1, n * K, n * K))
    G_bar = np.zeros((M + 1, n * K, n))
    m_bar = np.zeros((M + 1, n * K))
    for k, me in enumerate(minor_exts):
        rows = slice(n * k, n * (k + 1))
        Bk = spec.minors[k].B
        m_bar[:, rows] = bk_nodes[k] + Bk @ Rkinv[k] @ me.n_bar

    errors = []
    converged = False
    result = None
    for sweep in range(1, max_iter + 1):
        # (1) major extended solve with the current mean-field coefficients
        A0_nodes = np.zeros((M + 1, d0, d0))
        A0_nodes[:, :n, :n] = spec.major.A
        A0_nodes[:, :n, n:] = F0_pi
        A0_nodes[:, n:, :n] = G_bar
        A0_nodes[:, n:, n:] = A_bar
        M0_nodes = np.concatenate([b0_nodes, m_bar], axis=1)
        p0 = _extended_problem(major_ext, A0_nodes, M0_nodes, grid, spec.T)
        Pi0 = solve_riccati(p0, grid)
        s0 = solve_offset(p0, Pi0, grid)

        # closed-loop major coefficients consumed by every minor system
        B0, S0 = major_ext.B_own, major_ext.S_bb
        BRS0 = B0 @ R0inv @ S0.T
        closed_A0 = A0_nodes - BRS0 \
            - np.einsum("ij,tjk->tik", B0 @ R0inv @ B0.T, Pi0.values)
        closed_M0 = M0_nodes - s0.values @ (B0 @ R0inv @ B0.T).T

        # (2) minor extended solves
        Piks, sks, pks = [], [], []
        for k, me in enumerate(minor_exts):
            th = spec.minors[k]
            dk = me.dim
            Ak_nodes = np.zeros((M + 1, dk, dk))
            Ak_nodes[:, :n, :n] = th.A
            Ak_nodes[:, :n, n:2 * n] = th.G
            Ak_nodes[:, :n, 2 * n:] = _pi_blocks(th.F, spec.pi)
            Ak_nodes[:, n:, n:] = closed_A0
            Mk_nodes = np.concatenate([bk_nodes[k], closed_M0], axis=1)
            pk = _extended_problem(me, Ak_nodes, Mk_nodes, grid, spec.T)
            Pik = solve_riccati(pk, grid)
            sk = solve_offset(pk, Pik, grid)
            Piks.append(Pik)
            sks.append(sk)
            pks.append(pk)

        # (3) refresh the mean-field coefficients from the minor blocks
        A_new = np.empty_like(A_bar)
        G_new = np.empty_like(G_bar)
        m_new = np.empty_like(m_bar)
        for k, me in enumerate(minor_exts):
            th = spec.minors[k]
            Bk = th.B
            BR = Bk @ Rkinv[k]
            Sk = me.S_bb
            S11, S21, S31 = Sk[:n], Sk[n:2 * n], Sk[2 * n:]
            P = Piks[k].values
            P11 = P[:, :n, :n]
            P12 = P[:, :n, n:2 * n]
            P13 = P[:, :n, 2 * n:]
            rows = slice(n * k, n * (k + 1))
            own = th.A - np.einsum("ij,tjk->tik", BR,
                                   S11.T + np.einsum("ij,tjk->tik",
                                                     Bk.T, P11))
            block = np.broadcast_to(_pi_blocks(th.F, spec.pi),
                                    (M + 1, n, n * K)).copy()
            block -= np.einsum("ij,tjk->tik", BR,
                               S31.T + np.einsum("ij,tjk->tik", Bk.T, P13))
            block[:, :, n * k:n * (k + 1)] += own
            A_new[:, rows] = block
            G_new[:, rows] = th.G - np.einsum(
                "ij,tjk->tik", BR,
                S21.T + np.einsum("ij,tjk->tik", Bk.T, P12))
            m_new[:, rows] = bk_nodes[k] + BR @ me.n_bar \
                - sks[k].values[:, :n] @ (BR @ Bk.T).T

        if relaxation:
            A_new = (1.0 - relaxation) * A_new + relaxation * A_bar
            G_new = (1.0 - relaxation) * G_new + relaxation * G_bar
            m_new = (1.0 - relaxation) * m_new + relaxation * m_bar

        error = float(np.max(np.abs(A_new - A_bar))
                      + np.max(np.abs(G_new - G_bar)))
        errors.append(error)
        A_bar, G_bar, m_bar = A_new, G_new, m_new
        if callback is not None:
            callback(sweep, A_bar, G_bar, m_bar, error)
        if error < tol:
            converged = True
            result = (Pi0, s0, Piks, sks, p0, pks)
            break

    if not converged:
        raise NotConverged(len(errors), errors[-1])

    Pi0, s0, Piks, sks, p0, pks = result
    log = IterationLog(errors=errors, tolerance=tol, converged=True)
    return MfgEquilibrium(
        spec=spec, grid=grid, Pi0=Pi0, s0=s0, Pik=Piks, sk=sks,
        A_bar=MatrixTrajectory(grid, A_bar),
        G_bar=MatrixTrajectory(grid, G_bar),
        m_bar=MatrixTrajectory(grid, m_bar),
        major_problem=p0, minor_problems=pks,
        major_ext=major_ext, minor_exts=minor_exts,
        iterations=log,
    )


def equilibrium_laws(eq: MfgEquilibrium):
    """Affine equilibrium laws on the extended states.

    Returns (major (K_gain, k_offset), [per-type minor (K_gain, k_offset)])
    where the major gain acts on (x0, xbar) and minor gains on
    (x, x0, xbar).
    """
    if not eq.iterations.converged:
        raise NotConverged(eq.iterations.iterations, eq.iterations.errors[-1])
    major = feedback_law(eq.major_problem, eq.Pi0, eq.s0)
    minors = [feedback_law(pk, Pik, sk)
              for pk, Pik, sk in zip(eq.minor_problems, eq.Pik, eq.sk)]
    return major, minors


def control_mean_field_coefficients(eq: MfgEquilibrium):
    """The affine map (Xi, varsigma) with ubar = Xi (x0, xbar) + varsigma.

    Obtained by averaging the minor equilibrium laws within each type,
    replacing the own state by the type's mean-field coordinate.
    """
    spec = eq.spec
    n, m, K = spec.n, spec.m, spec.K
    M = eq.grid.steps
    Xi = np.zeros((M + 1, m * K, n * (1 + K)))
    vs = np.zeros((M + 1, m * K))
    for k in range(K):
        me = eq.minor_exts[k]
        Rinv = np.linalg.inv(me.R)
        Bk = spec.minors[k].B
        Sk = me.S_bb
        P = eq.Pik[k].values
        sk = eq.sk[k].values
        own = -np.einsum("ij,tjk->tik", Rinv,
                         Sk[:n].T + np.einsum("ij,tjk->tik", Bk.T,
                                              P[:, :n, :n]))
        major_col = -np.einsum("ij,tjk->tik", Rinv,
                               Sk[n:2 * n].T
                               + np.einsum("ij,tjk->tik", Bk.T,
                                           P[:, :n, n:2 * n]))
        mf_cols = -np.einsum("ij,tjk->tik", Rinv,
                             Sk[2 * n:].T
                             + np.einsum("ij,tjk->tik", Bk.T,
                                         P[:, :n, 2 * n:]))
        rows = slice(m * k, m * (k + 1))
        Xi[:, rows, :n] = major_col
        Xi[:, rows, n:] = mf_cols
        Xi[:, rows, n * (1 + k):n * (2 + k)] += own
        vs[:, rows] = -(sk[:, :n] @ (Rinv @ Bk.T).T - me.n_bar @ Rinv.T)
    return Xi, vs


def mean_field_trajectory(eq: MfgEquilibrium, x0_path) -> MatrixTrajectory:
    """Forward solve of dxbar = (A_bar xbar + G_bar x0 + m_bar) dt.

    x0_path is the major state trajectory (or its mean) as an array of
    node samples or a MatrixTrajectory; xbar(0) stacks the minor initial
    states.
    """
    grid = eq.grid
    if isinstance(x0_path, MatrixTrajectory):
        x0_path = x0_path.values
    x0_path = np.asarray(x0_path, dtype=float).reshape(grid.steps + 1, -1)
    A_at = half_grid_sampler(grid, eq.A_bar.values)
    G_at = half_grid_sampler(grid, eq.G_bar.values)
    m_at = half_grid_sampler(grid, eq.m_bar.values)
    x0_at = half_grid_sampler(grid, x0_path)

    def fld(t, x):
        return A_at(t) @ x + G_at(t) @ x0_at(t) + m_at(t)

    xbar0 = np.concatenate([th.x0 for th in eq.spec.minors])
    return integrate_ode(fld, xbar0, grid, "forward")
