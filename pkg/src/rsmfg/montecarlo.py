"""Monte Carlo simulation and verification of the exponential-cost identities.

Paths follow Euler-Maruyama on the master grid; the accumulated quadratic
cost uses trapezoidal quadrature.  All expectations of exponentials are
computed as max-shifted log-mean-exp with delta-method standard errors, so
nothing is exponentiated before shifting.  Per-path noise comes from
counter-based Philox streams keyed by (master seed, path index), which
makes every estimate independent of block size, evaluation order, and
thread count.

Noise-free problems degenerate to a single deterministic path; the check_*
routines then evaluate the identity by high-order quadrature instead of
sampling and report a zero standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteState
from .model import LqgProblem
from .numerics import (
    BLOWUP_BOUND,
    MatrixTrajectory,
    TimeGrid,
    half_grid_sampler,
    integrate_ode,
    state_transition,
)
from .riccati import RiccatiSolution

DEFAULT_BLOCK = 4096

# When a standard error is exactly zero (deterministic run), a deviation
# within this tolerance counts as z=0, anything larger as z=inf.
DETERMINISTIC_TOL = 1e-6


@dataclass
class ControlLaw:
    """Affine law u(t,x) = K(t)x + k(t) sampled on the grid.

    K may be None for a purely open-loop control.
    """

    K: np.ndarray  # (M+1, m, n) or None
    k: np.ndarray  # (M+1, m)

    def u(self, i, x):
        if self.K is None:
            return np.broadcast_to(self.k[i], x.shape[:-1] + self.k[i].shape)
        return x @ self.K[i].T + self.k[i]

    def scaled(self, gain_factor=1.0, offset_shift=0.0):
        K = None if self.K is None else gain_factor * self.K
        return ControlLaw(K=K, k=self.k + offset_shift)


def as_control_law(law, grid: TimeGrid, n: int, m: int) -> ControlLaw:
    """Normalize a law given as RiccatiSolution, (K, k) pair, or open-loop
    control trajectory of shape (M+1, m)."""
    if isinstance(law, ControlLaw):
        return law
    if isinstance(law, RiccatiSolution):
        return ControlLaw(law.K_gain.values, law.k_offset.values)
    if isinstance(law, tuple) and len(law) == 2:
        K, k = law
        K = K.values if isinstance(K, MatrixTrajectory) else np.asarray(K, float)
        k = k.values if isinstance(k, MatrixTrajectory) else np.asarray(k, float)
        return ControlLaw(K, k)
    u = np.asarray(law, dtype=float)
    if u.ndim == 1:
        u = u.reshape(-1, 1)
    if u.shape != (grid.steps + 1, m):
        raise ValueError(f"open-loop control must have shape {(grid.steps + 1, m)}")
    return ControlLaw(K=None, k=u)


@dataclass
class PathEnsemble:
    """Seeded collection of simulated paths and their cost exponents."""

    grid: TimeGrid
    n_paths: int
    seed: int
    log_weights: np.ndarray       # (n_paths,) values of delta*Lambda_T
    x_T: np.ndarray               # (n_paths, n)
    states: np.ndarray = None     # (n_paths, M+1, n) if stored
    controls: np.ndarray = None   # (n_paths, M+1, m) if stored


@dataclass
class LogMeanExpEstimate:
    """log of a mean of exponentials, with a delta-method standard error."""

    log_value: float
    std_error: float
    n: int


@dataclass
class ZScoreReport:
    """Outcome of one identity check; floats to its z-score."""

    z: float
    value: float
    target: float
    std_error: float

    def __float__(self):
        return float(self.z)


@dataclass
class QuotientReport:
    """Componentwise self-normalized quotient check at t=0."""

    z: np.ndarray
    quotient: np.ndarray
    target: np.ndarray
    std_error: np.ndarray


@dataclass
class ConvexityReport:
    """One sampled convexity comparison with common random numbers."""

    lam: float
    margin: float       # lam*J1 + (1-lam)*J2 - J_lam, shifted linear domain
    std_error: float
    z: float            # margin / std_error; convexity holds when z > -3


def _zscore(value, target, std_error):
    diff = value - target
    if std_error == 0.0:
        z = 0.0 if abs(diff) <= DETERMINISTIC_TOL else math.inf * np.sign(diff)
        return float(z)
    return float(diff / std_error)


def log_mean_exp(log_values: np.ndarray) -> LogMeanExpEstimate:
    """Stable log(mean(exp(w))) with delta-method standard error."""
    w = np.asarray(log_values, dtype=float)
    n = w.size
    L = float(np.max(w))
    y = np.exp(w - L)
    mean = float(np.mean(y))
    if n > 1:
        se = float(np.std(y, ddof=1)) / (mean * math.sqrt(n))
    else:
        se = 0.0
    return LogMeanExpEstimate(L + math.log(mean), se, n)


def _coefficient_tables(p: LqgProblem, grid: TimeGrid):
    nodes = grid.nodes
    A = np.stack([p.A(t) for t in nodes])
    b = np.stack([p.b(t) for t in nodes])
    sig = np.stack([p.sigma(t) for t in nodes])
    return A, b, sig


def is_deterministic(p: LqgProblem, grid: TimeGrid) -> bool:
    return all(np.all(p.sigma(t) == 0.0) for t in grid.nodes)


def _noise_block(seed, first_path, count, steps, r):
    noise = np.empty((count, steps, r))
    for j in range(count):
        gen = np.random.Generator(np.random.Philox(key=[seed, first_path + j]))
        noise[j] = gen.standard_normal((steps, r))
    return noise


def _run_paths(p: LqgProblem, law: ControlLaw, n_paths: int, seed: int,
               grid: TimeGrid, store_paths=False, ups_values=None,
               omega=None, v=None, block=DEFAULT_BLOCK):
    """Core Euler-Maruyama engine with streaming accumulators.

    Always accumulates the trapezoidal cost integral.  When ups_values is
    given, also streams G(t) = int_0^t Ups(s)^T (Q x_s + S u_s - eta) ds
    per path; when (omega, v) are given, additionally streams the two
    perturbation integrals needed for the derivative estimator.
    """
    M = grid.steps
    h = grid.h
    sqrt_h = math.sqrt(h)
    n, m, r = p.n, p.m, p.r
    A_tab, b_tab, sig_tab = _coefficient_tables(p, grid)
    Q, S, R = p.Q, p.S, p.R
    eta, zeta, delta = p.eta, p.zeta, p.delta
    noisy = not is_deterministic(p, grid)

    out = {
        "log_weights": np.empty(n_paths),
        "x_T": np.empty((n_paths, n)),
    }
    stream_G = ups_values is not None
    if stream_G:
        out["G_T"] = np.empty((n_paths, n))
    stream_omega = omega is not None
    if stream_omega:
        out["qmid"] = np.empty(n_paths)
        out["cross"] = np.empty(n_paths)
    if store_paths:
        out["states"] = np.empty((n_paths, M + 1, n))
        out["controls"] = np.empty((n_paths, M + 1, m))

    for start in range(0, n_paths, block):
        stop = min(start + block, n_paths)
        nb = stop - start
        noise = _noise_block(seed, start, nb, M, r) if noisy else None
        x = np.broadcast_to(p.x0, (nb, n)).copy()
        lam = np.zeros(nb)
        if stream_G:
            G = np.zeros((nb, n))
            gu_prev = None
        if stream_omega:
            qmid = np.zeros(nb)
            cross = np.zeros(nb)

        for i in range(M + 1):
            u = law.u(i, x)
            if store_paths:
                out["states"][start:stop, i] = x
                out["controls"][start:stop, i] = u
            weight = h if 0 < i < M else 0.5 * h
            l_run = 0.5 * (np.einsum("bi,ij,bj->b", x, Q, x)
                           + 2.0 * np.einsum("bi,ij,bj->b", x, S, u)
                           + np.einsum("bi,ij,bj->b", u, R, u)) \
                - x @ eta - u @ zeta
            lam += weight * l_run
            if stream_G:
                # row form of Ups(t_i)^T (Q x + S u - eta), trapezoided
                gu = (x @ Q.T + u @ S.T - eta) @ ups_values[i]
                if i > 0:
                    G += (0.5 * h) * (gu_prev + gu)
                gu_prev = gu
            if stream_omega:
                qmid += weight * ((u @ R.T + x @ S - zeta) @ omega[i])
                cross += weight * (G @ v[i])
            if i < M:
                drift = x @ A_tab[i].T + u @ p.B.T + b_tab[i]
                x = x + drift * h
                if noisy:
                    x = x + (noise[:, i] @ sig_tab[i].T) * sqrt_h
                mx = np.max(np.abs(x))
                if not np.isfinite(mx) or mx > BLOWUP_BOUND:
                    raise NonFiniteState(grid.nodes[i + 1])

        lam += 0.5 * np.einsum("bi,ij,bj->b", x, p.Q_hat, x)
        out["log_weights"][start:stop] = delta * lam
        out["x_T"][start:stop] = x
        if stream_G:
            out["G_T"][start:stop] = G
        if stream_omega:
            out["qmid"][start:stop] = qmid
            out["cross"][start:stop] = cross
    return out


def simulate(p: LqgProblem, law, n_paths: int, seed: int,
             grid: TimeGrid = None, store_paths=False,
             block=DEFAULT_BLOCK) -> PathEnsemble:
    """Euler-Maruyama ensemble under the given control law."""
    if grid is None:
        grid = TimeGrid(t_end=p.T, steps=2000)
    cl = as_control_law(law, grid, p.n, p.m)
    res = _run_paths(p, cl, n_paths, seed, grid, store_paths=store_paths,
                     block=block)
    return PathEnsemble(grid=grid, n_paths=n_paths, seed=seed,
                        log_weights=res["log_weights"], x_T=res["x_T"],
                        states=res.get("states"),
                        controls=res.get("controls"))


def estimate_cost(ens: PathEnsemble) -> LogMeanExpEstimate:
    """log J(u) = log E[exp(delta*Lambda_T)] with standard error."""
    return log_mean_exp(ens.log_weights)


def deterministic_log_cost(p: LqgProblem, law, grid: TimeGrid) -> float:
    """delta*Lambda_T of the single noise-free path, by RK4 quadrature.

    The closed-loop state and the running cost integral are integrated
    jointly as one augmented ODE, so the result carries 4th-order error
    rather than the Euler scheme's 1st-order error.
    """
    cl = as_control_law(law, grid, p.n, p.m)
    n = p.n
    K_at = None if cl.K is None else half_grid_sampler(grid, cl.K)
    k_at = half_grid_sampler(grid, cl.k)

    def u_of(t, x):
        u = k_at(t).copy()
        if K_at is not None:
            u = u + K_at(t) @ x
        return u

    def field(t, y):
        x = y[:n]
        u = u_of(t, x)
        dx = p.A(t) @ x + p.B @ u + p.b(t)
        dl = 0.5 * (x @ p.Q @ x + 2.0 * x @ p.S @ u + u @ p.R @ u) \
            - p.eta @ x - p.zeta @ u
        return np.concatenate([dx, [dl]])

    y0 = np.concatenate([p.x0, [0.0]])
    traj = integrate_ode(field, y0, grid, "forward")
    x_T = traj.values[-1][:n]
    lam = traj.values[-1][n] + 0.5 * x_T @ p.Q_hat @ x_T
    return p.delta * lam


def check_normalization(p: LqgProblem, sol: RiccatiSolution, n_paths: int,
                        seed: int, grid: TimeGrid = None) -> ZScoreReport:
    """Verify E[exp(delta*Lambda_T(u*) - C_star)] = 1."""
    if grid is None:
        grid = sol.grid
    if is_deterministic(p, grid):
        w = deterministic_log_cost(p, sol, grid) - sol.C_star
        est = math.exp(w)
        return ZScoreReport(_zscore(est, 1.0, 0.0), est, 1.0, 0.0)
    ens = simulate(p, sol, n_paths, seed, grid)
    w = ens.log_weights - sol.C_star
    L = float(np.max(w))
    y = np.exp(w - L)
    mean = float(np.mean(y))
    est = math.exp(L) * mean
    se = math.exp(L) * float(np.std(y, ddof=1)) / math.sqrt(n_paths)
    return ZScoreReport(_zscore(est, 1.0, se), est, 1.0, se)


def check_optimal_cost(p: LqgProblem, sol: RiccatiSolution, n_paths: int,
                       seed: int, grid: TimeGrid = None) -> ZScoreReport:
    """Verify log J(u*) = C_star."""
    if grid is None:
        grid = sol.grid
    if is_deterministic(p, grid):
        log_j = deterministic_log_cost(p, sol, grid)
        return ZScoreReport(_zscore(log_j, sol.C_star, 0.0),
                            log_j, sol.C_star, 0.0)
    ens = simulate(p, sol, n_paths, seed, grid)
    est = estimate_cost(ens)
    return ZScoreReport(_zscore(est.log_value, sol.C_star, est.std_error),
                        est.log_value, sol.C_star, est.std_error)


def estimate_gateaux(p: LqgProblem, law, omega: np.ndarray, n_paths: int,
                     seed: int, grid: TimeGrid = None, block=DEFAULT_BLOCK):
    """Directional derivative of J at the law's control process.

    omega is a deterministic perturbation sampled on the grid, shape
    (M+1, m).  Returns (estimate, std_error).  The path-dependent inner
    time integral is rewritten through the state-transition matrices so
    everything streams in one pass without storing paths.
    """
    if grid is None:
        grid = TimeGrid(t_end=p.T, steps=2000)
    cl = as_control_law(law, grid, p.n, p.m)
    omega = np.asarray(omega, dtype=float)
    if omega.ndim == 1:
        omega = omega.reshape(-1, 1)
    ups, ups_inv = state_transition(p.A, grid)
    # v(t) = Ups^{-1}(t) B omega(t); W1 = int_0^T v dt (deterministic)
    v = np.einsum("tij,tj->ti", ups_inv.values, omega @ p.B.T)
    W1 = np.trapezoid(v, grid.nodes, axis=0)
    res = _run_paths(p, cl, n_paths, seed, grid, ups_values=ups.values,
                     omega=omega, v=v, block=block)
    x_T = res["x_T"]
    # terminal term: <Ups(T) W1, Q_hat x_T>
    w_tilde = ups.values[-1] @ W1
    q = (x_T @ p.Q_hat.T) @ w_tilde + res["qmid"] \
        + res["G_T"] @ W1 - res["cross"]
    w = res["log_weights"]
    L = float(np.max(w))
    y = np.exp(w - L) * q
    est = p.delta * math.exp(L) * float(np.mean(y))
    if n_paths > 1 and not is_deterministic(p, grid):
        se = p.delta * math.exp(L) * float(np.std(y, ddof=1)) \
            / math.sqrt(n_paths)
    else:
        se = 0.0
    return est, se


def check_martingale_quotient(p: LqgProblem, sol: RiccatiSolution,
                              n_paths: int, seed: int,
                              grid: TimeGrid = None) -> QuotientReport:
    """Verify Pi(0)x0 + s(0) equals the weighted quotient at t=0.

    The quotient is E[e^{dL}(Ups(T)^T Q_hat x_T + int_0^T Ups(s)^T
    (Q x_s + S u*_s - eta) ds)] / E[e^{dL}] under u*, estimated by
    self-normalized importance weighting.
    """
    if grid is None:
        grid = sol.grid
    cl = as_control_law(sol, grid, p.n, p.m)
    ups, _ = state_transition(p.A, grid)
    target = sol.Pi.values[0] @ p.x0 + sol.s.values[0]
    if is_deterministic(p, grid):
        # single path; integrate x and G jointly by RK4 for quadrature
        # accuracy instead of the Euler scheme's first-order error
        n = p.n
        K_at = None if cl.K is None else half_grid_sampler(grid, cl.K)
        k_at = half_grid_sampler(grid, cl.k)
        ups_at = half_grid_sampler(grid, ups.values)

        def field(t, y):
            x, _ = y[:n], y[n:]
            u = k_at(t).copy()
            if K_at is not None:
                u = u + K_at(t) @ x
            dx = p.A(t) @ x + p.B @ u + p.b(t)
            dG = ups_at(t).T @ (p.Q @ x + p.S @ u - p.eta)
            return np.concatenate([dx, dG])

        traj = integrate_ode(field, np.concatenate([p.x0, np.zeros(n)]),
                             grid, "forward")
        x_T, G_T = traj.values[-1][:n], traj.values[-1][n:]
        quotient = ups.values[-1].T @ (p.Q_hat @ x_T) + G_T
        se = np.zeros(n)
        z = np.array([_zscore(quotient[j], target[j], 0.0) for j in range(n)])
        return QuotientReport(z=z, quotient=quotient, target=target,
                              std_error=se)
    res = _run_paths(p, cl, n_paths, seed, grid, ups_values=ups.values)
    V = (res["x_T"] @ p.Q_hat.T) @ ups.values[-1] + res["G_T"]
    w = res["log_weights"]
    L = float(np.max(w))
    a = np.exp(w - L)
    a_mean = float(np.mean(a))
    quotient = (a @ V) / (a.size * a_mean)
    if is_deterministic(p, grid) or n_paths < 2:
        se = np.zeros(p.n)
    else:
        # ratio-estimator (delta method) variance of sum(a V)/sum(a)
        resid = a[:, None] * (V - quotient)
        se = np.std(resid, axis=0, ddof=1) / (a_mean * math.sqrt(n_paths))
    z = np.array([_zscore(quotient[j], target[j], se[j])
                  for j in range(p.n)])
    return QuotientReport(z=z, quotient=quotient, target=target,
                          std_error=se)


def sampled_convexity(p: LqgProblem, u1: np.ndarray, u2: np.ndarray,
                      lam: float, n_paths: int, seed: int,
                      grid: TimeGrid = None) -> ConvexityReport:
    """Check J(lam u1 + (1-lam) u2) <= lam J(u1) + (1-lam) J(u2).

    u1 and u2 are open-loop control trajectories; the three ensembles
    share the same per-path noise streams (common random numbers), and
    the comparison happens after one common max-shift.
    """
    if grid is None:
        grid = TimeGrid(t_end=p.T, steps=2000)
    u1 = np.asarray(u1, float).reshape(grid.steps + 1, p.m)
    u2 = np.asarray(u2, float).reshape(grid.steps + 1, p.m)
    u_mix = lam * u1 + (1.0 - lam) * u2
    w1 = simulate(p, u1, n_paths, seed, grid).log_weights
    w2 = simulate(p, u2, n_paths, seed, grid).log_weights
    wm = simulate(p, u_mix, n_paths, seed, grid).log_weights
    L = float(max(np.max(w1), np.max(w2), np.max(wm)))
    d = lam * np.exp(w1 - L) + (1.0 - lam) * np.exp(w2 - L) - np.exp(wm - L)
    margin = float(np.mean(d))
    if n_paths > 1:
        se = float(np.std(d, ddof=1)) / math.sqrt(n_paths)
    else:
        se = 0.0
    return ConvexityReport(lam=lam, margin=margin, std_error=se,
                           z=_zscore(margin, 0.0, se))


def mean_closed_loop(p: LqgProblem, law, grid: TimeGrid) -> MatrixTrajectory:
    """RK4 solution of the noise-free closed-loop mean dynamics."""
    cl = as_control_law(law, grid, p.n, p.m)
    K_at = None if cl.K is None else half_grid_sampler(grid, cl.K)
    k_at = half_grid_sampler(grid, cl.k)

    def field(t, x):
        u = k_at(t).copy()
        if K_at is not None:
            u = u + K_at(t) @ x
        return p.A(t) @ x + p.B @ u + p.b(t)

    return integrate_ode(field, p.x0, grid, "forward")


def check_weak_error(p: LqgProblem, law, n_paths: int, seed: int,
                     grid: TimeGrid = None) -> np.ndarray:
    """Componentwise z-scores of E[x_T] against the mean ODE solution."""
    if grid is None:
        grid = TimeGrid(t_end=p.T, steps=2000)
    ens = simulate(p, law, n_paths, seed, grid)
    target = mean_closed_loop(p, law, grid).values[-1]
    mean = ens.x_T.mean(axis=0)
    se = ens.x_T.std(axis=0, ddof=1) / math.sqrt(n_paths)
    return np.array([_zscore(mean[j], target[j], se[j]) for j in range(p.n)])
