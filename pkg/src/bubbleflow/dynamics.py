"""Coupled Euler integration of the bubble model.

State per path: fundamental wealth WF, illiquidity M, resiliency Lambda,
per-investor wealth cap theta, per-degree volumes X^k (mean-field ODE),
aggregate volume X (SDE) and the bubble beta, born at tau.  The bubble is
coupled to the realized volume increment, beta' = beta + Lam*M*(-k*beta)*dt
+ 2*Lam*M*dX, which coincides with the drift/diffusion form off the volume
boundaries and stays meaningful when a clamped step pins X at 0 or N*theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import get_backend, pack_params
from .network import DegreeDistribution, PerDegreeVolumes, weighted_volume
from .params import ModelParams, ParameterError


class PathError(RuntimeError):
    """Non-finite state encountered during integration."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite state at step {step}")


REGIME_NAMES = {0: "pre-bubble", 1: "growth", 2: "burst"}


@dataclass
class Trajectory:
    times: np.ndarray
    WF: np.ndarray
    M: np.ndarray
    Lambda: np.ndarray
    theta: np.ndarray
    X: np.ndarray
    n: np.ndarray
    beta: np.ndarray
    regime: np.ndarray          # int8: 0 pre-bubble, 1 growth, 2 burst
    dB1: np.ndarray
    dB2: np.ndarray
    dB3: np.ndarray
    dB4: np.ndarray
    tau: float
    tau_idx: int
    switch_idx: int             # -1 when the burst never fired
    path_index: int
    seed: int
    params: ModelParams
    xk_final: np.ndarray | None = None

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def has_bubble(self) -> bool:
        return math.isfinite(self.tau)


# ---------------------------------------------------------------------------
# single-step operations


def step_fundamental(WF, a, b, dB1, dt):
    """One Euler step of the fundamental wealth, clamped positive."""
    return max(WF * (1.0 + a * dt + b * dB1), 1e-300)


def step_gbm(value, mu, sigma, dB, dt):
    """Euler step of a geometric Brownian motion with positivity clamp."""
    return max(value * (1.0 + mu * dt + sigma * dB), 1e-300)


def step_liquidity(M, mu_M, sigma_M, dB3, dt):
    return step_gbm(M, mu_M, sigma_M, dB3, dt)


def step_wealth_cap(theta, mu_theta, sigma_theta, dB3, dt):
    return step_gbm(theta, mu_theta, sigma_theta, dB3, dt)


def step_resiliency(Lam, params: ModelParams, dB4, dt):
    """Resiliency step; constant mode is the identity, diffusion mode is a
    mean-reverting Euler step clamped to [lambda_low, 1]."""
    if params.lambda_mode == "constant":
        return Lam
    if not (params.lambda_low < params.Lambda_star < 1.0):
        raise ParameterError("Lambda_star: must lie in (lambda_low, 1)")
    lnew = Lam + params.kappa * (params.Lambda_star - Lam) * dt \
        + params.c_lambda * (Lam - params.lambda_low) * (1.0 - Lam) * dB4
    return min(max(lnew, params.lambda_low), 1.0)


def step_contagion(vols: PerDegreeVolumes, dist: DegreeDistribution,
                   theta, lam, delta, dt) -> PerDegreeVolumes:
    """Explicit Euler step of the per-degree mean-field volume ODE."""
    n = weighted_volume(dist, vols)
    u = n / dist.z
    ks = dist.degrees
    new = vols.values + dt * (-delta * vols.values
                              + lam * ks * u * (theta - vols.values))
    np.clip(new, 0.0, theta, out=new)
    return PerDegreeVolumes(values=new, theta_cap=theta)


def aggregate_drift(X, n, theta, params: ModelParams, z: float):
    """Aggregate volume drift, -delta*X + lambda*N*n*(theta - n/z)."""
    return -params.delta_sell * X \
        + params.lambda_contagion * params.nodes * n * (theta - n / z)


def aggregate_vol(X, theta, params: ModelParams):
    base = X * (params.nodes * theta - X)
    return params.sigma_bar * max(base, 0.0) ** params.alpha_vol


def init_bubble(x, Lam, M, WF):
    """Bubble size at birth, 2*x*Lambda*M*WF."""
    return 2.0 * x * Lam * M * WF


def step_bubble(beta, mu_t, sigma_t, Lam, M, dB2, dN, params: ModelParams,
                dt, WF=1.0):
    """One bubble step in drift/diffusion form (no boundary clamping)."""
    return beta + Lam * M * (-params.k_decay * beta + 2.0 * mu_t) * dt \
        + 2.0 * Lam * M * sigma_t * dB2 \
        + 2.0 * Lam * M * params.x_init * WF * dN


def sample_tau(params: ModelParams, rng: np.random.Generator) -> float:
    """Bubble birth time.

    Deterministic mode returns tau0.  Intensity mode thins a rate-pi_bound
    Poisson stream down to rate pi_intensity and returns the first accepted
    event, or +inf when none lands before the horizon (no-bubble path).
    """
    if params.tau_mode == "deterministic":
        return params.tau0
    if params.pi_bound <= 0:
        return math.inf
    t = 0.0
    while True:
        t += rng.exponential(1.0 / params.pi_bound)
        if t >= params.T:
            return math.inf
        if rng.uniform() * params.pi_bound <= params.pi_intensity:
            return t


class BurstMonitor:
    """One-way regime switch: fires once the bubble has stayed strictly
    below its running maximum for at least `window` time units."""

    def __init__(self, window: float, t0: float, beta0: float):
        self.window = window
        self.run_max = beta0
        self.last_max_t = t0
        self.switched = False

    def update(self, t: float, beta: float) -> bool:
        """Advance to time t with bubble value beta; True once switched."""
        if self.switched:
            return True
        if beta >= self.run_max:
            self.run_max = beta
            self.last_max_t = t
        elif t - self.last_max_t >= self.window - 1e-12:
            self.switched = True
        return self.switched


# ---------------------------------------------------------------------------
# full path integration


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Independent, reproducible stream for one path."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((seed, path_index))))


def draw_increments(params: ModelParams, rng: np.random.Generator
                    ) -> np.ndarray:
    """Brownian increments, shape (4, n_steps), pre-scaled by sqrt(dt)."""
    return rng.standard_normal((4, params.n_steps)) * math.sqrt(params.dt)


def integrate(params: ModelParams, dist: DegreeDistribution, dB: np.ndarray,
              tau: float, path_index: int = 0, backend: str | None = None
              ) -> Trajectory:
    """Integrate one path on externally supplied increments."""
    _, kernel = get_backend(backend)
    n = dB.shape[1]
    if math.isfinite(tau):
        tau_idx = min(int(round(tau / params.dt)), n - 1)
    else:
        tau_idx = -1
    vec = pack_params(params, tau_idx)
    kw = np.ascontiguousarray(dist.edge_weights)
    out = {k: np.empty(n + 1) for k in
           ("WF", "M", "Lam", "Th", "X", "nvol", "beta")}
    regime = np.empty(n + 1, dtype=np.int8)
    xk_final = np.empty(dist.kmax + 1)
    status = np.zeros(2, dtype=np.int64)
    kernel(kw, dist.z, np.ascontiguousarray(dB), vec, out["WF"], out["M"],
           out["Lam"], out["Th"], out["X"], out["nvol"], out["beta"], regime,
           xk_final, status)
    if status[0] != 0:
        raise PathError(int(status[0]))
    times = np.arange(n + 1) * params.dt
    return Trajectory(
        times=times, WF=out["WF"], M=out["M"], Lambda=out["Lam"],
        theta=out["Th"], X=out["X"], n=out["nvol"], beta=out["beta"],
        regime=regime, dB1=dB[0], dB2=dB[1], dB3=dB[2], dB4=dB[3],
        tau=tau, tau_idx=tau_idx, switch_idx=int(status[1]),
        path_index=path_index, seed=params.seed, params=params,
        xk_final=xk_final)


def simulate_path(params: ModelParams, dist: DegreeDistribution,
                  path_index: int, backend: str | None = None) -> Trajectory:
    """Simulate one path; deterministic given (seed, path_index, dt)."""
    rng = path_rng(params.seed, path_index)
    dB = draw_increments(params, rng)
    tau_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((params.seed, path_index, 1))))
    tau = sample_tau(params, tau_rng)
    return integrate(params, dist, dB, tau, path_index, backend)


def explicit_bubble(traj: Trajectory) -> np.ndarray:
    """Closed-form bubble evaluated on the trajectory's own increments.

    beta_t = beta_tau * E(tau,t) + int 2*Lam*M*E(s,t) dX_s with
    E(s,t) = exp(-k int_s^t Lam M du), discretized on the trajectory grid.
    Uses the realized volume increments, matching the integrated coupling.
    Serves as the independent cross-check for the Euler recursion.
    """
    p = traj.params
    n = len(traj.times) - 1
    out = np.full(n + 1, np.nan)
    if not traj.has_bubble:
        return out
    i0 = traj.tau_idx
    lm = traj.Lambda[:-1] * traj.M[:-1]          # left-point Lam*M on steps
    # cumulative decay exponent int_tau^{t_i} Lam*M du (left Riemann)
    expo = np.zeros(n + 1)
    expo[i0 + 1:] = np.cumsum(lm[i0:]) * p.dt
    decay = np.exp(-p.k_decay * expo)            # E(tau, t_i)
    dX = np.diff(traj.X)
    beta0 = traj.beta[i0]
    out[i0] = beta0
    # running integral I_i = sum_{j<i} 2*Lam_j*M_j*dX_j / E(tau, t_{j+1})
    incr = np.zeros(n + 1)
    incr[i0 + 1:] = 2.0 * lm[i0:] * dX[i0:] / decay[i0 + 1:]
    run = np.cumsum(incr)
    out[i0:] = decay[i0:] * (beta0 + run[i0:])
    return out


def trajectory_to_rows(traj: Trajectory):
    """Yield (t, WF, M, Lambda, theta, X, n, beta, regime) rows."""
    for i, t in enumerate(traj.times):
        yield (t, traj.WF[i], traj.M[i], traj.Lambda[i], traj.theta[i],
               traj.X[i], traj.n[i], traj.beta[i],
               REGIME_NAMES[int(traj.regime[i])])
