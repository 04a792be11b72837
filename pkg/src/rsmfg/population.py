"""Finite-population co-simulation, per-agent costs, and Nash-gap probes.

The 1+N agents share one Euler-Maruyama grid.  Each agent applies the
infinite-population equilibrium law with the mean-field coordinates
replaced by per-type empirical averages, except for an optionally
overridden agent that plays an alternative law.  Per-agent noise comes
from counter-based Philox streams keyed by (master seed, agent slot), so
results are independent of replication batching and a single decoupled
minor reproduces the single-agent simulator path for path.  Empirical
averages use compensated summation, which makes them invariant under
relabeling agents of the same type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteState, OutOfRange
from .mfg import MfgEquilibrium, equilibrium_laws
from .montecarlo import ControlLaw, LogMeanExpEstimate, log_mean_exp
from .model import MajorMinorSpec
from .numerics import BLOWUP_BOUND, TimeGrid, half_grid_sampler, integrate_ode

# Per-replication noise arrays are sized so that all 1+N agent blocks
# together stay under this many bytes.
NOISE_BUDGET_BYTES = 256_000_000

DEFAULT_CHUNK = 2048

GAIN_FACTORS = (0.8, 0.9, 1.1, 1.2)
OFFSET_SHIFTS = (0.1, -0.1)


def apportion(pi, N: int) -> np.ndarray:
    """Largest-remainder type counts: N_k >= 0 integers summing to N."""
    pi = np.asarray(pi, dtype=float)
    quota = pi * N
    counts = np.floor(quota).astype(int)
    remainder = N - int(counts.sum())
    if remainder:
        # ties broken by lower index for determinism
        order = np.lexsort((np.arange(len(pi)), -(quota - counts)))
        counts[order[:remainder]] += 1
    return counts


def assignment_from_counts(counts) -> np.ndarray:
    """Slot -> type index, type-sorted so type blocks are contiguous."""
    return np.repeat(np.arange(len(counts)), counts)


def type_mismatch(pi, N: int) -> float:
    """tau_N = max_k |N_k/N - pi_k| for the largest-remainder assignment."""
    counts = apportion(pi, N)
    return float(np.max(np.abs(counts / N - np.asarray(pi, dtype=float))))


@dataclass
class FinitePopulationRun:
    """Ensemble outcome of one finite-population co-simulation.

    exponents[:, 0] holds the major agent's delta*Lambda_T per
    replication; column 1+j holds minor slot j.  paths and empirical_avg
    record the first replication only.
    """

    spec: MajorMinorSpec
    N: int
    assignment: np.ndarray       # (N,) slot -> type index
    seed: int
    grid: TimeGrid
    exponents: np.ndarray        # (n_reps, 1+N)
    fluct_sup: np.ndarray        # (n_reps,) sup_t |xhat - xbar|_inf
    fluct_T: np.ndarray          # (n_reps,) terminal |xhat - xbar|_inf
    paths: np.ndarray            # (M+1, 1+N, n), replication 0
    empirical_avg: np.ndarray    # (M+1, n), replication 0

    @property
    def n_reps(self) -> int:
        return self.exponents.shape[0]


@dataclass
class NashGapReport:
    """Equilibrium-vs-deviation cost comparison for one agent and one N."""

    agent: object                # "major" or minor slot index
    N: int
    equilibrium: LogMeanExpEstimate
    deviations: list             # [(label, LogMeanExpEstimate)]
    best_label: str
    gap: float                   # max(0, eq log-cost - best deviation's)
    gap_std_error: float         # paired (common-noise) standard error


def _as_law(law) -> ControlLaw:
    if isinstance(law, ControlLaw):
        return law
    K, k = law
    return ControlLaw(np.asarray(K, dtype=float), np.asarray(k, dtype=float))


def _minor_tables(spec, grid):
    nodes = grid.nodes
    out = []
    for th in spec.minors:
        out.append({
            "A": th.A, "F": th.F, "G": th.G, "B": th.B,
            "b": np.stack([th.b(t) for t in nodes]),
            "sig": np.stack([th.sigma(t) for t in nodes]),
            "Q": th.Q, "S": th.S, "R": th.R, "Q_hat": th.Q_hat,
            "H": th.H, "H_hat": th.H_hat, "eta": th.eta,
            "delta": th.delta, "x0": th.x0,
        })
    return out


def _major_tables(spec, grid):
    maj = spec.major
    nodes = grid.nodes
    return {
        "A": maj.A, "F": maj.F, "B": maj.B,
        "b": np.stack([maj.b(t) for t in nodes]),
        "sig": np.stack([maj.sigma(t) for t in nodes]),
        "Q": maj.Q, "S": maj.S, "R": maj.R, "Q_hat": maj.Q_hat,
        "H": maj.H, "eta": maj.eta, "delta": maj.delta, "x0": maj.x0,
    }


def _mm(x, T, out=None):
    """x @ T, with 1x1 blocks dispatched as elementwise multiplies."""
    if T.shape == (1, 1):
        return np.multiply(x, T[0, 0], out=out)
    return np.matmul(x, T, out=out)


def _quad(r, Q, S, R, u):
    """0.5 r'Qr + r'Su + 0.5 u'Ru along the leading axes."""
    if Q.shape == (1, 1) and R.shape == (1, 1):
        rr, uu = r[..., 0], u[..., 0]
        return (0.5 * Q[0, 0] * rr * rr + S[0, 0] * rr * uu
                + 0.5 * R[0, 0] * uu * uu)
    return (0.5 * np.einsum("...i,ij,...j->...", r, Q, r)
            + np.einsum("...i,ij,...j->...", r, S, u)
            + 0.5 * np.einsum("...i,ij,...j->...", u, R, u))


def _two_sum(s, v):
    """Knuth's branch-free error-free transformation: s + v = t + e."""
    t = s + v
    vp = t - s
    e = (s - (t - vp)) + (v - vp)
    return t, e


def _compensated_sum(x: np.ndarray):
    """Sum over axis 1 with exact rounding-error compensation.

    Returns (s, comp) with s + comp accurate to well below one double
    rounding of the exact sum, so the rounded result does not depend on
    the order of the summands.  The scan runs in two blocked passes of
    about sqrt(J) iterations each to keep Python-level overhead low.
    """
    c, J = x.shape[0], x.shape[1]
    tail = x.shape[2:]
    L = max(1, math.isqrt(J - 1) + 1)
    B = (J + L - 1) // L
    if B * L != J:
        x = np.concatenate(
            [x, np.zeros((c, B * L - J) + tail)], axis=1)
    xb = x.reshape((c, B, L) + tail)
    s = xb[:, :, 0].copy()
    comp = np.zeros_like(s)
    for pos in range(1, L):
        s, e = _two_sum(s, xb[:, :, pos])
        comp += e
    total = s[:, 0]
    carry = comp.sum(axis=1)
    for b in range(1, B):
        total, e = _two_sum(total, s[:, b])
        carry = carry + e
    return total, carry


def _compensated_mean(x: np.ndarray) -> np.ndarray:
    s, comp = _compensated_sum(x)
    return (s + comp) / x.shape[1]


def _type_slices(counts, n_offset=0):
    starts = np.concatenate([[0], np.cumsum(counts)])
    return [slice(int(starts[k]) + n_offset, int(starts[k + 1]) + n_offset)
            for k in range(len(counts))]


def simulate_population(spec: MajorMinorSpec, eq: MfgEquilibrium, N: int,
                        override=None, n_reps: int = 1, seed: int = 0,
                        grid: TimeGrid = None, chunk: int = DEFAULT_CHUNK,
                        agent_keys=None) -> FinitePopulationRun:
    """Euler-Maruyama co-simulation of the major agent and N minors.

    override, if given, is (agent, law) with agent either "major" or a
    minor slot index; the law acts on that agent's extended state
    (x0, xhat) or (x, x0, xhat) with xhat the stacked per-type empirical
    averages.  agent_keys customizes the per-slot noise stream keys
    (defaults to 0..N-1 for minors; the major always uses key N).
    """
    if N < 1:
        raise OutOfRange("N must be at least 1")
    if grid is None:
        grid = eq.grid
    elif grid != eq.grid:
        raise OutOfRange("simulation grid must match the equilibrium grid")
    n, K = spec.n, spec.K
    M, h = grid.steps, grid.h
    sqrt_h = math.sqrt(h)
    counts = apportion(spec.pi, N)
    assignment = assignment_from_counts(counts)
    slices = _type_slices(counts)
    if agent_keys is None:
        agent_keys = list(range(N))
    if len(agent_keys) != N:
        raise OutOfRange("agent_keys must have one entry per minor slot")

    (K0, k0), minor_laws = equilibrium_laws(eq)
    K0v, k0v = K0.values, k0.values
    mlaws = [(Kk.values, kk.values) for Kk, kk in minor_laws]
    dev_agent, dev_law = (None, None)
    if override is not None:
        dev_agent, dev_law = override
        dev_law = _as_law(dev_law)

    mt = _minor_tables(spec, grid)
    mj = _major_tables(spec, grid)
    deltas = np.concatenate([[mj["delta"]],
                             [mt[assignment[j]]["delta"] for j in range(N)]])
    A_bar, G_bar, m_bar = eq.A_bar.values, eq.G_bar.values, eq.m_bar.values

    cap = max(1, NOISE_BUDGET_BYTES // ((N + 1) * M * spec.r * 8))
    chunk = max(1, min(chunk, cap, n_reps))
    gens = [np.random.Generator(np.random.Philox(key=[seed, key]))
            for key in agent_keys]
    gen0 = np.random.Generator(np.random.Philox(key=[seed, N]))

    # transposed coefficient tables so the inner loop is pure matmul;
    # minor gains are split into the own-state block and the
    # (major, mean-field) block shared by every agent of the type
    KxT = [np.ascontiguousarray(np.swapaxes(Kk[:, :, :n], 1, 2))
           for Kk, _ in mlaws]
    KrT = [np.ascontiguousarray(np.swapaxes(Kk[:, :, n:], 1, 2))
           for Kk, _ in mlaws]
    AT = [np.ascontiguousarray(t["A"].T) for t in mt]
    BT = [np.ascontiguousarray(t["B"].T) for t in mt]
    FT = [np.ascontiguousarray(t["F"].T) for t in mt]
    GT = [np.ascontiguousarray(t["G"].T) for t in mt]
    sigT = [np.ascontiguousarray(np.swapaxes(t["sig"], 1, 2)) for t in mt]

    exponents = np.empty((n_reps, 1 + N))
    fluct_sup = np.empty(n_reps)
    fluct_T = np.empty(n_reps)
    paths = np.empty((M + 1, 1 + N, n))
    empirical_avg = np.empty((M + 1, n))

    for start in range(0, n_reps, chunk):
        stop = min(start + chunk, n_reps)
        c = stop - start
        noise0 = gen0.standard_normal((c, M, spec.r))
        # (c, N_k, M, r) per type, so the noise step is one matmul per type
        noise_k = []
        for k in range(K):
            sl = slices[k]
            block = np.empty((c, counts[k], M, spec.r))
            for idx, j in enumerate(range(sl.start, sl.stop)):
                block[:, idx] = gens[j].standard_normal((c, M, spec.r))
            noise_k.append(block)

        x0 = np.broadcast_to(mj["x0"], (c, n)).copy()
        xms = [np.broadcast_to(mt[k]["x0"], (c, counts[k], n)).copy()
               for k in range(K)]
        ums = [np.empty((c, counts[k], spec.m)) for k in range(K)]
        work = [np.empty((c, counts[k], n)) for k in range(K)]
        work2 = [np.empty((c, counts[k], n)) for k in range(K)]
        xhat = np.empty((c, K, n))
        xbar = np.broadcast_to(
            np.concatenate([th["x0"] for th in mt]), (c, n * K)).copy()
        lam = np.zeros((c, 1 + N))
        sup = np.zeros(c)
        diff_T = np.zeros(c)

        for i in range(M + 1):
            # per-type empirical averages in extended precision, rounded
            # once so they do not depend on within-type slot order
            s_tot = c_tot = None
            for k in range(K):
                sk, ck = _compensated_sum(xms[k])
                xhat[:, k] = (sk + ck) / counts[k]
                if s_tot is None:
                    s_tot, c_tot = sk, ck
                else:
                    s_tot, e = _two_sum(s_tot, sk)
                    c_tot = c_tot + ck + e
            xN = (s_tot + c_tot) / N
            xhat_stack = xhat.reshape(c, K * n)

            ext0 = np.concatenate([x0, xhat_stack], axis=1)
            if dev_agent == "major":
                u0 = dev_law.u(i, ext0)
            else:
                u0 = ext0 @ K0v[i].T + k0v[i]
            for k in range(K):
                base = ext0 @ KrT[k][i] + mlaws[k][1][i]
                _mm(xms[k], KxT[k][i], out=ums[k])
                ums[k] += base[:, None, :]
                if dev_agent is not None and dev_agent != "major" \
                        and slices[k].start <= dev_agent < slices[k].stop:
                    idx = dev_agent - slices[k].start
                    ext_j = np.concatenate(
                        [xms[k][:, idx], ext0], axis=1)
                    ums[k][:, idx] = dev_law.u(i, ext_j)

            weight = h if 0 < i < M else 0.5 * h
            r0 = x0 - (xN @ mj["H"].T + mj["eta"])
            lam[:, 0] += weight * _quad(r0, mj["Q"], mj["S"], mj["R"], u0)
            if i == M:
                lam[:, 0] += 0.5 * np.einsum("bi,ij,bj->b", r0,
                                             mj["Q_hat"], r0)
            for k in range(K):
                sl = slices[k]
                t = mt[k]
                psi = x0 @ t["H"].T + xN @ t["H_hat"].T + t["eta"]
                rr = np.subtract(xms[k], psi[:, None, :], out=work[k])
                lam[:, 1 + sl.start:1 + sl.stop] += weight * _quad(
                    rr, t["Q"], t["S"], t["R"], ums[k])
                if i == M:
                    lam[:, 1 + sl.start:1 + sl.stop] += 0.5 * np.einsum(
                        "bji,ik,bjk->bj", rr, t["Q_hat"], rr)

            d = np.max(np.abs(xhat_stack - xbar), axis=1)
            np.maximum(sup, d, out=sup)
            if i == M:
                diff_T = d
            if start == 0:
                paths[i, 0] = x0[0]
                for k in range(K):
                    sl = slices[k]
                    paths[i, 1 + sl.start:1 + sl.stop] = xms[k][0]
                empirical_avg[i] = xN[0]

            if i < M:
                xbar = xbar + (xbar @ A_bar[i].T + x0 @ G_bar[i].T
                               + m_bar[i]) * h
                drift0 = x0 @ mj["A"].T + xN @ mj["F"].T + mj["b"][i]
                x0 = x0 + (drift0 + u0 @ mj["B"].T) * h
                x0 = x0 + (noise0[:, i] @ mj["sig"][i].T) * sqrt_h
                coup = [xN @ FT[k] + x0 @ GT[k] for k in range(K)]
                mx = np.max(np.abs(x0))
                for k in range(K):
                    d1, d2 = work[k], work2[k]
                    _mm(xms[k], AT[k], out=d1)
                    d1 += coup[k][:, None, :]
                    _mm(ums[k], BT[k], out=d2)
                    d1 += d2
                    d1 += mt[k]["b"][i]
                    d1 *= h
                    xms[k] += d1
                    _mm(noise_k[k][:, :, i], sigT[k][i], out=d2)
                    d2 *= sqrt_h
                    xms[k] += d2
                    mx = max(mx, np.max(np.abs(xms[k])))
                if not np.isfinite(mx) or mx > BLOWUP_BOUND:
                    raise NonFiniteState(grid.nodes[i + 1])

        exponents[start:stop] = deltas * lam
        fluct_sup[start:stop] = sup
        fluct_T[start:stop] = diff_T

    return FinitePopulationRun(
        spec=spec, N=N, assignment=assignment, seed=seed, grid=grid,
        exponents=exponents, fluct_sup=fluct_sup, fluct_T=fluct_T,
        paths=paths, empirical_avg=empirical_avg,
    )


def deterministic_population_run(spec: MajorMinorSpec, eq: MfgEquilibrium,
                                 N: int, override=None,
                                 grid: TimeGrid = None) -> FinitePopulationRun:
    """Noise-free finite-population run by RK4 quadrature.

    Valid only when every diffusion coefficient vanishes; gives
    4th-order-accurate per-agent cost exponents for oracle comparisons.
    """
    if grid is None:
        grid = eq.grid
    elif grid != eq.grid:
        raise OutOfRange("simulation grid must match the equilibrium grid")
    for t in (grid.t_start, grid.t_end):
        if np.any(spec.major.sigma(t) != 0.0) or any(
                np.any(th.sigma(t) != 0.0) for th in spec.minors):
            raise OutOfRange("deterministic run requires zero diffusion")
    n, K = spec.n, spec.K
    counts = apportion(spec.pi, N)
    assignment = assignment_from_counts(counts)
    slices = _type_slices(counts)
    (K0, k0), minor_laws = equilibrium_laws(eq)
    K0_at = half_grid_sampler(grid, K0.values)
    k0_at = half_grid_sampler(grid, k0.values)
    law_at = [(half_grid_sampler(grid, Kk.values),
               half_grid_sampler(grid, kk.values)) for Kk, kk in minor_laws]
    dev_agent, dev_K, dev_k = None, None, None
    if override is not None:
        dev_agent, law = override
        law = _as_law(law)
        dev_K = None if law.K is None else half_grid_sampler(grid, law.K)
        dev_k = half_grid_sampler(grid, law.k)
    mt = _minor_tables(spec, grid)
    mj = _major_tables(spec, grid)
    maj, minors = spec.major, spec.minors

    def field(t, y):
        x0 = y[:n]
        xm = y[n:n * (1 + N)].reshape(N, n)
        xhat = np.stack([xm[slices[k]].mean(axis=0) for k in range(K)])
        xN = xm.mean(axis=0)
        xhat_stack = xhat.reshape(-1)
        ext0 = np.concatenate([x0, xhat_stack])
        if dev_agent == "major":
            u0 = dev_k(t).copy()
            if dev_K is not None:
                u0 = u0 + dev_K(t) @ ext0
        else:
            u0 = K0_at(t) @ ext0 + k0_at(t)
        dy = np.empty_like(y)
        dy[:n] = maj.A @ x0 + maj.F @ xN + maj.B @ u0 + maj.b(t)
        r0 = x0 - (maj.H @ xN + maj.eta)
        dy[n * (1 + N)] = float(_quad(r0, maj.Q, maj.S, maj.R, u0))
        for j in range(N):
            k = assignment[j]
            th = minors[k]
            ext = np.concatenate([xm[j], x0, xhat_stack])
            if dev_agent == j:
                u = dev_k(t).copy()
                if dev_K is not None:
                    u = u + dev_K(t) @ ext
            else:
                Kk_at, kk_at = law_at[k]
                u = Kk_at(t) @ ext + kk_at(t)
            dy[n * (1 + j):n * (2 + j)] = (th.A @ xm[j] + th.F @ xN
                                           + th.G @ x0 + th.B @ u + th.b(t))
            r = xm[j] - (th.H @ x0 + th.H_hat @ xN + th.eta)
            dy[n * (1 + N) + 1 + j] = float(_quad(r, th.Q, th.S, th.R, u))
        return dy

    y0 = np.concatenate([mj["x0"]]
                        + [mt[assignment[j]]["x0"] for j in range(N)]
                        + [np.zeros(1 + N)])
    traj = integrate_ode(field, y0, grid, "forward")
    states = traj.values[:, :n * (1 + N)].reshape(grid.steps + 1, 1 + N, n)
    lam = traj.values[-1, n * (1 + N):].copy()
    # terminal tracking costs at t=T
    x0_T, xm_T = states[-1, 0], states[-1, 1:]
    xN_T = xm_T.mean(axis=0)
    r0 = x0_T - (maj.H @ xN_T + maj.eta)
    lam[0] += 0.5 * r0 @ maj.Q_hat @ r0
    for j in range(N):
        th = minors[assignment[j]]
        r = xm_T[j] - (th.H @ x0_T + th.H_hat @ xN_T + th.eta)
        lam[1 + j] += 0.5 * r @ th.Q_hat @ r
    deltas = np.concatenate([[maj.delta],
                             [minors[assignment[j]].delta for j in range(N)]])
    return FinitePopulationRun(
        spec=spec, N=N, assignment=assignment, seed=0, grid=grid,
        exponents=(deltas * lam)[None, :],
        fluct_sup=np.zeros(1), fluct_T=np.zeros(1),
        paths=states, empirical_avg=states[:, 1:].mean(axis=1),
    )


def finite_cost(run: FinitePopulationRun, agent) -> LogMeanExpEstimate:
    """log E[exp(delta*Lambda_T)] for one agent across replications."""
    col = 0 if agent == "major" else 1 + int(agent)
    if col < 0 or col > run.N:
        raise OutOfRange(f"agent {agent!r} not in run")
    return log_mean_exp(run.exponents[:, col])


def paired_log_diff(w1: np.ndarray, w2: np.ndarray):
    """(log mean e^w1 - log mean e^w2, paired delta-method s.e.)."""
    L = float(max(np.max(w1), np.max(w2)))
    a, b = np.exp(w1 - L), np.exp(w2 - L)
    am, bm = float(np.mean(a)), float(np.mean(b))
    diff = math.log(am) - math.log(bm)
    n = a.size
    if n < 2:
        return diff, 0.0
    cov = np.cov(a, b, ddof=1)
    var = cov[0, 0] / am ** 2 + cov[1, 1] / bm ** 2 \
        - 2.0 * cov[0, 1] / (am * bm)
    return diff, math.sqrt(max(var, 0.0) / n)


def default_deviation_family(eq: MfgEquilibrium, agent, type_index: int = 0,
                             gain_factors=GAIN_FACTORS,
                             offset_shifts=OFFSET_SHIFTS):
    """Gain rescalings and offset shifts of an agent's equilibrium law."""
    (K0, k0), minor_laws = equilibrium_laws(eq)
    if agent == "major":
        base = ControlLaw(K0.values, k0.values)
    else:
        Kk, kk = minor_laws[type_index]
        base = ControlLaw(Kk.values, kk.values)
    family = [(f"gain x{g:g}", base.scaled(gain_factor=g))
              for g in gain_factors]
    family += [(f"offset {s:+g}", base.scaled(offset_shift=s))
               for s in offset_shifts]
    return family


def nash_gap(spec: MajorMinorSpec, eq: MfgEquilibrium, agent,
             deviation_family=None, N: int = 5, n_reps: int = 1000,
             seed: int = 0, grid: TimeGrid = None,
             equilibrium_run: FinitePopulationRun = None) -> NashGapReport:
    """Best-deviation probe of the agent's equilibrium cost at size N.

    Every law is evaluated on identical noise draws (common random
    numbers); the gap is max(0, equilibrium log-cost minus the best
    deviation's log-cost) with a paired standard error.  A previously
    simulated equilibrium ensemble with matching (N, n_reps, seed, grid)
    can be passed to avoid re-simulating it.
    """
    if deviation_family is None:
        deviation_family = default_deviation_family(eq, agent)
    if equilibrium_run is not None:
        if (equilibrium_run.N != N or equilibrium_run.seed != seed
                or equilibrium_run.n_reps != n_reps):
            raise OutOfRange(
                "equilibrium_run does not match (N, n_reps, seed)")
        base = equilibrium_run
    else:
        base = simulate_population(spec, eq, N, override=None,
                                   n_reps=n_reps, seed=seed, grid=grid)
    col = 0 if agent == "major" else 1 + int(agent)
    w_eq = base.exponents[:, col]
    results = []
    for label, law in deviation_family:
        run = simulate_population(spec, eq, N, override=(agent, law),
                                  n_reps=n_reps, seed=seed, grid=grid)
        results.append((label, run.exponents[:, col]))
    estimates = [(label, log_mean_exp(w)) for label, w in results]
    best_idx = int(np.argmin([e.log_value for _, e in estimates]))
    best_label, _ = estimates[best_idx]
    diff, se = paired_log_diff(w_eq, results[best_idx][1])
    return NashGapReport(
        agent=agent, N=N, equilibrium=log_mean_exp(w_eq),
        deviations=estimates, best_label=best_label,
        gap=max(0.0, diff), gap_std_error=se,
    )


@dataclass
class FluctuationStats:
    """Mean-field convergence statistics over an N-schedule."""

    N_schedule: list
    mean_sup: np.ndarray       # E sup_t |xhat_t - xbar_t|_inf per N
    mean_terminal: np.ndarray  # E |xhat_T - xbar_T|_inf per N
    slope_sup: float           # log-log fit slope vs N
    slope_terminal: float


def fluctuation_statistics(spec: MajorMinorSpec, eq: MfgEquilibrium,
                           N_schedule=(5, 20, 80), n_reps: int = 1000,
                           seed: int = 0,
                           grid: TimeGrid = None) -> FluctuationStats:
    """Empirical-average-to-mean-field gaps and their decay rate in N."""
    mean_sup, mean_T = [], []
    for N in N_schedule:
        run = simulate_population(spec, eq, N, n_reps=n_reps, seed=seed,
                                  grid=grid)
        mean_sup.append(float(np.mean(run.fluct_sup)))
        mean_T.append(float(np.mean(run.fluct_T)))
    logN = np.log(np.asarray(N_schedule, dtype=float))
    slope_sup = float(np.polyfit(logN, np.log(mean_sup), 1)[0])
    slope_T = float(np.polyfit(logN, np.log(mean_T), 1)[0])
    return FluctuationStats(
        N_schedule=list(N_schedule), mean_sup=np.asarray(mean_sup),
        mean_terminal=np.asarray(mean_T), slope_sup=slope_sup,
        slope_terminal=slope_T,
    )
