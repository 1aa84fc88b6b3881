"""Flow of pricing kernels along simulated paths.

For an evaluation time t, the kernels alpha1/alpha2/alpha3 tilt the physical
measure into one under which discounted market wealth loses its drift; the
associated density is accumulated as a stochastic exponential in log space.
Kernels are evaluated in extended precision: the cancellation they must
achieve is checked to 1e-10 *absolute* while the wealth terms reach 1e6, which
is beyond plain float64 at the stored-kernel level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Trajectory, simulate_path
from .network import DegreeDistribution
from .params import ModelParams

LD = np.longdouble

SIGMA_FLOOR = 1e-12

# pathwise density bound factor: Z <= 2 * exp(3 + T * Pi) * Zbar
def density_bound_factor(params: ModelParams) -> float:
    return 2.0 * math.exp(3.0 + params.T * params.pi_bound)


class UnsupportedModeError(ValueError):
    """Flow machinery asked for a mode outside its remit."""


@dataclass
class FlowKernels:
    t_eval: float
    t_idx: int
    eta: float
    alpha1: np.ndarray      # longdouble, one entry per grid point
    alpha2: np.ndarray
    alpha3: np.ndarray
    degenerate_steps: int   # volatility-floor activations


@dataclass
class DensityPath:
    t_idx: int
    Z: np.ndarray
    Zbar: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray
    jump_factor: np.ndarray
    flagged: bool
    degenerate_steps: int


def eta(t: float, tau: float, params: ModelParams,
        traj: Trajectory | None = None,
        T_moments: tuple[float, float] | None = None) -> float:
    """Time-centering constant of the drift-cancelling kernels.

    With deterministic horizon T and t >= tau this is (T + t) / 2.  For
    t < tau (deterministic tau only) the pre-birth correction term is
    estimated by quadrature of WF*pi*x*Lam*M*(alpha3+1) along the supplied
    path's pre-birth segment.  T_moments = (E[T|F_t], E[T^2|F_t]) supports a
    bounded random horizon.
    """
    if T_moments is None:
        ET, ET2 = params.T, params.T * params.T
    else:
        ET, ET2 = T_moments
    if t >= ET:
        return float(ET)
    if t >= tau:
        return (ET2 - t * t) / (2.0 * (ET - t))
    # t < tau
    if params.tau_mode != "deterministic" or not math.isfinite(tau):
        raise UnsupportedModeError(
            "eta with t < tau requires a deterministic birth time")
    c_hat = 0.0
    if traj is not None:
        dt = traj.dt
        i0 = int(round(t / dt))
        i1 = min(traj.tau_idx, len(traj.times) - 1)
        for i in range(i0, i1):
            g = 1.0 / ((traj.M[i] + 1.0) * (traj.WF[i] + 1.0))
            c_hat += traj.WF[i] * params.pi_intensity * params.x_init \
                * traj.Lambda[i] * traj.M[i] * g * dt
    return (c_hat + (ET2 - tau * tau) / 2.0) / (ET - tau)


def alpha2(s, t, tau, Lam, M, sigma_t, beta, mu_t, eta_val, k_decay):
    """Volume-factor kernel; zero before max(t, tau)."""
    if s < max(t, tau):
        return 0.0
    sig = max(sigma_t, SIGMA_FLOOR)
    return float(((s - eta_val) / (Lam * M) + k_decay * beta - mu_t) / sig)


def alpha3(s, t, tau, M, WF):
    """Jump kernel; lives on [t, tau), always in (-1, 0]."""
    if s < t or s >= tau:
        return 0.0
    return 1.0 / ((M + 1.0) * (WF + 1.0)) - 1.0


def alpha1(s, t, tau, a, b, pi_t, x, Lam, M, WF, eta_val):
    """Fundamental-factor kernel with the case split at t and tau."""
    if s < t:
        return 0.0
    if s < tau:
        return -a / b - (2.0 / b) * pi_t * x * Lam * (M / (M + 1.0)) \
            / (WF + 1.0)
    return -a / b - (2.0 / (b * WF)) * (s - eta_val)


def _effective_rates(traj: Trajectory):
    p = traj.params
    burst = traj.regime == 2
    delta_eff = np.where(burst, p.delta_sell * p.burst.delta_mult,
                         p.delta_sell)
    lam_eff = np.where(burst, p.lambda_contagion * p.burst.lambda_mult,
                       p.lambda_contagion)
    return delta_eff, lam_eff


def drift_and_vol(traj: Trajectory, dist: DegreeDistribution):
    """Regime-aware drift/vol of the aggregate volume along the path."""
    p = traj.params
    delta_eff, lam_eff = _effective_rates(traj)
    born = traj.regime >= 1
    mu = np.where(born, -delta_eff * traj.X + lam_eff * p.nodes * traj.n
                  * (traj.theta - traj.n / dist.z), 0.0)
    base = np.maximum(traj.X * (p.nodes * traj.theta - traj.X), 0.0)
    sig = np.where(born, p.sigma_bar * base ** p.alpha_vol, 0.0)
    return mu, sig


def kernels_for(traj: Trajectory, dist: DegreeDistribution, t: float,
                eta_val: float | None = None) -> FlowKernels:
    """Evaluate the three kernels on the trajectory grid (longdouble)."""
    p = traj.params
    dt = traj.dt
    t_idx = int(round(t / dt))
    tau = traj.tau
    if eta_val is None:
        eta_val = eta(t, tau, p, traj)
    mu, sig = drift_and_vol(traj, dist)

    s = traj.times.astype(LD)
    WF = traj.WF.astype(LD)
    M = traj.M.astype(LD)
    Lam = traj.Lambda.astype(LD)
    beta = traj.beta.astype(LD)
    mu = mu.astype(LD)
    sig = sig.astype(LD)
    e = LD(eta_val)
    a, b = LD(p.a), LD(p.b)

    n = len(s)
    a1 = np.zeros(n, dtype=LD)
    a2 = np.zeros(n, dtype=LD)
    a3 = np.zeros(n, dtype=LD)

    birth = max(t_idx, traj.tau_idx if traj.has_bubble else n)
    post = np.arange(n) >= birth
    pre = (np.arange(n) >= t_idx) & ~post     # [t, tau) window

    sig_f = np.maximum(sig, LD(SIGMA_FLOOR))
    degenerate = int(np.count_nonzero(post & (sig < SIGMA_FLOOR)))

    a2[post] = (((s - e) / (Lam * M))[post] + LD(p.k_decay) * beta[post]
                - mu[post]) / sig_f[post]
    a1[post] = -a / b - (LD(2.0) / (b * WF[post])) * (s[post] - e)
    if pre.any():
        g = LD(1.0) / ((M[pre] + LD(1.0)) * (WF[pre] + LD(1.0)))
        a3[pre] = g - LD(1.0)
        a1[pre] = -a / b - (LD(2.0) / b) * LD(p.pi_intensity) \
            * LD(p.x_init) * Lam[pre] * (M[pre] / (M[pre] + LD(1.0))) \
            / (WF[pre] + LD(1.0))
    return FlowKernels(t_eval=t, t_idx=t_idx, eta=float(eta_val),
                       alpha1=a1, alpha2=a2, alpha3=a3,
                       degenerate_steps=degenerate)


def drift_check(kernels: FlowKernels, traj: Trajectory,
                dist: DegreeDistribution, eps_steps: int = 1) -> float:
    """Max absolute residual of the drift-cancellation identity.

    Evaluates, at every grid point s in [t, T - eps], the combination
    WF*(a + b*alpha1) + 2*Lam*M*(mu + sigma*alpha2 - k*beta) on the born
    segment plus the jump branch 2*pi*x*WF*Lam*M*(alpha3+1) before birth.
    The kernels must annihilate it identically; only rounding survives.
    """
    p = traj.params
    mu, sig = drift_and_vol(traj, dist)
    n = len(traj.times)
    lo, hi = kernels.t_idx, n - eps_steps
    idx = np.arange(lo, hi)

    WF = traj.WF.astype(LD)[idx]
    Lam = traj.Lambda.astype(LD)[idx]
    M = traj.M.astype(LD)[idx]
    beta = traj.beta.astype(LD)[idx]
    mu = mu.astype(LD)[idx]
    sig = np.maximum(sig.astype(LD), LD(SIGMA_FLOOR))[idx]
    a1 = kernels.alpha1[idx]
    a2 = kernels.alpha2[idx]
    a3 = kernels.alpha3[idx]

    born = (traj.regime >= 1)[idx]
    resid = WF * (LD(p.a) + LD(p.b) * a1)
    resid = resid + np.where(
        born, LD(2.0) * Lam * M * (mu + sig * a2 - LD(p.k_decay) * beta), LD(0.0))
    resid = resid + np.where(
        ~born, LD(2.0) * LD(p.pi_intensity) * LD(p.x_init) * WF * Lam * M
        * (a3 + LD(1.0)), LD(0.0))
    return float(np.max(np.abs(resid))) if len(resid) else 0.0


def density_path(traj: Trajectory, dist: DegreeDistribution, t: float,
                 kernels: FlowKernels | None = None) -> DensityPath:
    """Stochastic-exponential densities along the path, from time t on.

    Continuous part accumulated in log space; the jump part multiplies in the
    birth-time factor and the pre-birth compensator.  Z equals 1 on [0, t].
    """
    p = traj.params
    if kernels is None:
        kernels = kernels_for(traj, dist, t)
    t_idx = kernels.t_idx
    n = len(traj.times)
    dt = LD(traj.dt)

    a1 = kernels.alpha1[:-1]
    a2 = kernels.alpha2[:-1]
    dB1 = traj.dB1.astype(LD)
    dB2 = traj.dB2.astype(LD)

    inc1 = a1 * dB1 - LD(0.5) * a1 * a1 * dt
    inc2 = a2 * dB2 - LD(0.5) * a2 * a2 * dt
    log1 = np.zeros(n, dtype=LD)
    log2 = np.zeros(n, dtype=LD)
    log1[1:] = np.cumsum(inc1)
    log2[1:] = np.cumsum(inc2)
    # normalize to start at t
    log1 -= log1[t_idx]
    log2 -= log2[t_idx]
    log1[:t_idx] = 0.0
    log2[:t_idx] = 0.0

    Z1 = np.exp(log1).astype(float)
    Z2 = np.exp(log2).astype(float)
    Zbar = np.exp(log1 + log2).astype(float)

    jump = np.ones(n)
    if traj.has_bubble and traj.tau_idx > t_idx:
        # compensator over [t, tau): exp(-int alpha3 * pi du)
        comp = np.zeros(n, dtype=LD)
        mask = np.zeros(n - 1, dtype=bool)
        mask[t_idx:traj.tau_idx] = True
        comp[1:] = np.cumsum(np.where(mask, kernels.alpha3[:-1]
                                      * LD(p.pi_intensity) * dt, LD(0.0)))
        jump = np.exp(-comp).astype(float)
        # birth jump: 1 + alpha3 evaluated just before the jump
        i = traj.tau_idx
        g = 1.0 / ((traj.M[i] + 1.0) * (traj.WF[i] + 1.0))
        jump[i:] *= g
    Z = Zbar * jump
    flagged = not np.all(np.isfinite(Z))
    return DensityPath(t_idx=t_idx, Z=Z, Zbar=Zbar, Z1=Z1, Z2=Z2,
                       jump_factor=jump, flagged=flagged,
                       degenerate_steps=kernels.degenerate_steps)


@dataclass
class FlowReport:
    t: float
    n_paths: int
    mean_Z: float
    se_Z: float
    pricing_lhs: float
    pricing_rhs: float
    z_score: float
    bound_violations: int
    degeneracy_count: int
    ess: float = 0.0
    flagged_paths: int = 0
    weight_warning: bool = False
    grid: list = field(default_factory=list)   # (s, mean, se, z) tuples

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("t", "n_paths", "mean_Z", "se_Z", "pricing_lhs", "pricing_rhs",
              "z_score", "bound_violations", "degeneracy_count", "ess",
              "flagged_paths", "weight_warning")}
        d["grid"] = [{"s": s, "mean_Z": m, "se_Z": se, "z": z}
                     for (s, m, se, z) in self.grid]
        return d


def flow_check(params: ModelParams, dist: DegreeDistribution, t: float,
               n_paths: int, eps_steps: int = 1,
               s_grid: list[float] | None = None,
               backend: str | None = None) -> FlowReport:
    """Monte Carlo verification of the pricing flow at evaluation time t.

    Estimates E[Z_{t,T-eps} * WF_{T-eps}] against WF_t * E[Z_{t,T-eps}]
    (paired z-score), the martingale property of Z on an s-grid, the
    pathwise bound Z <= 2 e^{3+T*Pi} Zbar, and degeneracy diagnostics.
    Requires a deterministic birth at or before t so that conditioning at
    t is trivial.
    """
    if params.tau_mode != "deterministic" or params.tau0 > t + 1e-12:
        raise UnsupportedModeError(
            "flow_check needs a deterministic birth time tau <= t")
    n_steps = params.n_steps
    hi = n_steps - eps_steps
    if s_grid is None:
        s_grid = [params.T * j / 10.0 for j in range(1, 10)] \
            + [hi * params.dt]
    grid_idx = sorted({min(int(round(s / params.dt)), hi) for s in s_grid})
    bound = density_bound_factor(params)

    Zend = np.empty(n_paths)
    WFend = np.empty(n_paths)
    Zgrid = np.empty((n_paths, len(grid_idx)))
    violations = 0
    degeneracy = 0
    flagged = 0
    for j in range(n_paths):
        traj = simulate_path(params, dist, j, backend=backend)
        dens = density_path(traj, dist, t)
        if dens.flagged:
            flagged += 1
            Zend[j] = np.nan
            WFend[j] = np.nan
            Zgrid[j] = np.nan
            continue
        degeneracy += dens.degenerate_steps
        if np.any(dens.Z > bound * dens.Zbar * (1.0 + 1e-12)):
            violations += 1
        Zend[j] = dens.Z[hi]
        WFend[j] = traj.WF[hi]
        Zgrid[j] = dens.Z[grid_idx]

    ok = np.isfinite(Zend)
    Zok, Wok = Zend[ok], WFend[ok]
    m = len(Zok)
    mean_Z = float(Zok.mean())
    se_Z = float(Zok.std(ddof=1) / math.sqrt(m))
    wf_t = params.wf0 if t == 0.0 else float("nan")
    lhs = float((Zok * Wok).mean())
    rhs = float(wf_t * mean_Z)
    diffs = Zok * (Wok - wf_t)
    z_score = float(diffs.mean() / (diffs.std(ddof=1) / math.sqrt(m)))
    ess = float(Zok.sum() ** 2 / (Zok ** 2).sum())
    grid_stats = []
    for col, gi in enumerate(grid_idx):
        zc = Zgrid[ok, col]
        gm = float(zc.mean())
        gse = float(zc.std(ddof=1) / math.sqrt(m))
        grid_stats.append((gi * params.dt, gm, gse,
                           (gm - 1.0) / gse if gse > 0 else math.inf))
    return FlowReport(
        t=t, n_paths=n_paths, mean_Z=mean_Z, se_Z=se_Z, pricing_lhs=lhs,
        pricing_rhs=rhs, z_score=z_score, bound_violations=violations,
        degeneracy_count=degeneracy, ess=ess, flagged_paths=flagged,
        weight_warning=ess < 100.0, grid=grid_stats)


def pricing_check(params: ModelParams, dist: DegreeDistribution, t: float,
                  n_paths: int, eps_steps: int = 1,
                  backend: str | None = None) -> FlowReport:
    """Pricing-identity check only (see flow_check for the full report)."""
    return flow_check(params, dist, t, n_paths, eps_steps,
                      s_grid=[(params.n_steps - eps_steps) * params.dt],
                      backend=backend)


def simulate_fundamental_under_flow(t: float, params: ModelParams,
                                    n_paths: int, wf_t: float | None = None,
                                    eta_val: float | None = None,
                                    seed_salt: int = 90210) -> dict:
    """Mean of the fundamental at the horizon under the tilted dynamics.

    Integrates dWF = (eta - s) ds + b * WF dB from (t, WF_t).  Because the
    centering satisfies int_t^T (eta - s) ds = 0, the sample mean must equal
    the starting value up to Monte Carlo error.
    """
    if wf_t is None:
        wf_t = params.wf0
    if eta_val is None:
        eta_val = (params.T + t) / 2.0
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((params.seed, seed_salt))))
    n0 = int(round(t / params.dt))
    n1 = params.n_steps
    W = np.full(n_paths, float(wf_t))
    sq = math.sqrt(params.dt)
    for i in range(n0, n1):
        # midpoint in time: the affine centering drift then integrates to
        # zero exactly on the grid
        s = (i + 0.5) * params.dt
        dB = rng.standard_normal(n_paths) * sq
        W = W + (eta_val - s) * params.dt + params.b * W * dB
    mean = float(W.mean())
    se = float(W.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    return {"mean": mean, "se": se, "target": float(wf_t),
            "z": (mean - wf_t) / se if se > 0 else 0.0}
