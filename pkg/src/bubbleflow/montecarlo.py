"""Ensemble experiments: summary statistics, the four-network comparison
table, deterministic runs and discretization studies."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import (PathError, Trajectory, draw_increments,
                       explicit_bubble, integrate, path_rng, simulate_path)
from .network import DegreeDistribution, make_network
from .params import NETWORK_PRESETS, ModelParams, ParameterError


class EnsembleError(RuntimeError):
    pass


@dataclass
class EnsembleStats:
    mean_max: float
    se_max: float
    mean_argmax: float
    se_argmax: float
    beta_at: float
    se_beta_at: float
    n_paths: int
    t_probe: float


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("BUBBLEFLOW_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    if len(v) == 0:
        return math.nan, math.nan
    if len(v) == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def probe_index(times: np.ndarray, t_probe: float) -> int:
    dt = times[1] - times[0]
    idx = int(round(t_probe / dt))
    if idx < 0 or idx >= len(times) \
            or abs(times[idx] - t_probe) > 1e-9 * max(1.0, abs(t_probe)):
        raise ParameterError(f"t_probe: {t_probe} is not on the time grid")
    return idx


def path_summary(traj: Trajectory, probes: tuple[float, ...]) -> dict:
    """Per-path quantities entering the ensemble statistics."""
    if not traj.has_bubble:
        return {"max": math.nan, "argmax": math.nan,
                "beta_at": {p: math.nan for p in probes}, "no_bubble": True}
    beta = traj.beta
    mx = float(np.nanmax(beta))
    argmax = float(traj.times[int(np.nanargmax(beta))])
    return {"max": mx, "argmax": argmax,
            "beta_at": {p: float(beta[probe_index(traj.times, p)])
                        for p in probes},
            "no_bubble": False}


def stats(trajectories: list[Trajectory], t_probe: float) -> EnsembleStats:
    """Ensemble statistics from fully materialized trajectories."""
    sums = [path_summary(tr, (t_probe,)) for tr in trajectories]
    mx = np.array([s["max"] for s in sums])
    am = np.array([s["argmax"] for s in sums])
    bt = np.array([s["beta_at"][t_probe] for s in sums])
    keep = np.isfinite(mx)
    m, sm = _mean_se(mx[keep])
    a, sa = _mean_se(am[keep])
    b, sb = _mean_se(bt[keep])
    return EnsembleStats(mean_max=m, se_max=sm, mean_argmax=a, se_argmax=sa,
                         beta_at=b, se_beta_at=sb, n_paths=int(keep.sum()),
                         t_probe=t_probe)


def run_ensemble(params: ModelParams, dist: DegreeDistribution,
                 n_paths: int | None = None,
                 probes: tuple[float, ...] = (0.6, 1.6),
                 workers: int | None = None, backend: str | None = None,
                 dump=None) -> dict:
    """Simulate an ensemble, reducing per-path summaries on the fly.

    Results are reduced in path-index order, so they do not depend on the
    number of workers.  `dump(traj)` is called for every path when given
    (in index order is NOT guaranteed for dump; pass workers=1 for that).
    """
    n = n_paths or params.n_paths
    maxes = np.full(n, np.nan)
    argmaxes = np.full(n, np.nan)
    betas = {p: np.full(n, np.nan) for p in probes}
    invalid = np.zeros(n, dtype=bool)
    nobubble = np.zeros(n, dtype=bool)

    def one(j: int):
        try:
            traj = simulate_path(params, dist, j, backend=backend)
        except PathError:
            invalid[j] = True
            return
        s = path_summary(traj, probes)
        if s["no_bubble"]:
            nobubble[j] = True
            return
        maxes[j] = s["max"]
        argmaxes[j] = s["argmax"]
        for p in probes:
            betas[p][j] = s["beta_at"][p]
        if dump is not None:
            dump(traj)

    w = worker_count(workers)
    if w == 1:
        for j in range(n):
            one(j)
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            list(pool.map(one, range(n)))

    if invalid.sum() > 0.01 * n:
        raise EnsembleError(
            f"{int(invalid.sum())} of {n} paths invalid (>1%)")
    keep = ~(invalid | nobubble)
    out = {"n_paths": n, "invalid": int(invalid.sum()),
           "no_bubble": int(nobubble.sum()),
           "max": maxes, "argmax": argmaxes, "beta_at": betas}
    for p in probes:
        m, sm = _mean_se(maxes[keep])
        a, sa = _mean_se(argmaxes[keep])
        b, sb = _mean_se(betas[p][keep])
        out[p] = EnsembleStats(mean_max=m, se_max=sm, mean_argmax=a,
                               se_argmax=sa, beta_at=b, se_beta_at=sb,
                               n_paths=int(keep.sum()), t_probe=p)
    return out


def run_table(params: ModelParams, networks=("sf2.2", "sf2.5", "er3.2",
                                              "er1.9"),
              n_paths: int | None = None, workers: int | None = None,
              backend: str | None = None) -> list[dict]:
    """One ensemble row per network on a shared seed."""
    rows = []
    for name in networks:
        kind, param = NETWORK_PRESETS[name]
        dist = make_network(kind, param, params.nodes)
        res = run_ensemble(params, dist, n_paths=n_paths, workers=workers,
                           backend=backend)
        s06, s16 = res[0.6], res[1.6]
        rows.append({
            "network": name, "mean_degree": dist.z,
            "mean_max": s06.mean_max, "se_max": s06.se_max,
            "mean_argmax": s06.mean_argmax, "se_argmax": s06.se_argmax,
            "beta_at_0.6": s06.beta_at, "se_beta_at_0.6": s06.se_beta_at,
            "beta_at_1.6": s16.beta_at, "se_beta_at_1.6": s16.se_beta_at,
            "n_paths": s06.n_paths,
        })
    return rows


def deterministic_params(params: ModelParams) -> ModelParams:
    return params.replace(sigma_bar=0.0, sigma_M=0.0, sigma_theta=0.0)


def deterministic_run(params: ModelParams,
                      networks=("sf2.2", "sf2.5", "er3.2", "er1.9"),
                      backend: str | None = None) -> dict[str, Trajectory]:
    """Single zero-volatility path per network."""
    p = deterministic_params(params)
    out = {}
    for name in networks:
        kind, param = NETWORK_PRESETS[name]
        dist = make_network(kind, param, p.nodes)
        out[name] = simulate_path(p, dist, 0, backend=backend)
    return out


# ---------------------------------------------------------------------------
# deterministic reference integrator (classical 4-stage Runge-Kutta)

def rk4_reference(params: ModelParams, dist: DegreeDistribution
                  ) -> dict[str, np.ndarray]:
    """Fourth-order reference for the zero-volatility coupled system.

    Smooth dynamics integrate with RK4 stages; the volume clamp and the
    burst switch are discrete events applied at step boundaries, matching
    the Euler path's convention so the two are comparable.
    """
    p = deterministic_params(params)
    if p.tau_mode != "deterministic":
        raise ParameterError("tau_mode: reference run needs deterministic tau")
    n = p.n_steps
    dt = p.dt
    tau_idx = min(int(round(p.tau0 / dt)), n - 1)
    ks = dist.degrees
    kw = dist.edge_weights
    z = dist.z

    WF, M, Th, Lam = p.wf0, p.M0, p.theta0, p.Lambda0
    Xk = np.zeros(dist.kmax + 1)
    X, beta = 0.0, math.nan
    delta_eff, lam_eff = p.delta_sell, p.lambda_contagion
    run_max, last_max_t = -math.inf, 0.0
    reg = 0

    out_beta = np.full(n + 1, math.nan)
    out_X = np.zeros(n + 1)
    out_theta = np.zeros(n + 1)

    def deriv(state, Th_s):
        Xk_s, X_s, beta_s = state
        nv = float(kw @ Xk_s)
        mu = -delta_eff * X_s + lam_eff * p.nodes * nv * (Th_s - nv / z)
        dXk = -delta_eff * Xk_s + lam_eff * ks * (nv / z) * (Th_s - Xk_s)
        dbeta = Lam * M * (-p.k_decay * beta_s + 2.0 * mu)
        return dXk, mu, dbeta

    for i in range(n + 1):
        if i == tau_idx:
            Xk[:] = p.xk0
            X = p.x_init
            beta = 2.0 * p.x_init * Lam * M * WF
            reg = 1
            run_max, last_max_t = beta, i * dt
        out_beta[i], out_X[i], out_theta[i] = beta, X, Th
        if i == n:
            break
        t = i * dt
        if reg >= 1:
            th_mid = Th * math.exp(p.mu_theta * dt / 2.0)
            th_end = Th * math.exp(p.mu_theta * dt)
            k1 = deriv((Xk, X, beta), Th)
            k2 = deriv((Xk + dt / 2 * k1[0], X + dt / 2 * k1[1],
                        beta + dt / 2 * k1[2]), th_mid)
            k3 = deriv((Xk + dt / 2 * k2[0], X + dt / 2 * k2[1],
                        beta + dt / 2 * k2[2]), th_mid)
            k4 = deriv((Xk + dt * k3[0], X + dt * k3[1],
                        beta + dt * k3[2]), th_end)
            Xk = Xk + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            X = X + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            beta = beta + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            Th = th_end
            np.clip(Xk, 0.0, Th, out=Xk)
            X = min(max(X, 0.0), p.nodes * Th)
            tn = t + dt
            if beta >= run_max:
                run_max, last_max_t = beta, tn
            elif reg == 1 and tn - last_max_t >= p.burst.window - 1e-12:
                reg = 2
                delta_eff = p.delta_sell * p.burst.delta_mult
                lam_eff = p.lambda_contagion * p.burst.lambda_mult
        else:
            Th = Th * math.exp(p.mu_theta * dt)
        WF = WF * math.exp(p.a * dt)
        M = M * math.exp(p.mu_M * dt)
    return {"times": np.arange(n + 1) * dt, "beta": out_beta, "X": out_X,
            "theta": out_theta}


# ---------------------------------------------------------------------------
# discretization studies

def _coarsen(dB_fine: np.ndarray, factor: int) -> np.ndarray:
    """Aggregate fine increments into coarse ones (Brownian refinement)."""
    m = dB_fine.shape[1] // factor
    return dB_fine[:, :m * factor].reshape(4, m, factor).sum(axis=2)


def convergence_study(params: ModelParams, dist: DegreeDistribution,
                      dt_ladder: tuple[float, ...] = (4e-3, 2e-3, 1e-3),
                      n_paths: int = 100, backend: str | None = None) -> dict:
    """Euler-vs-closed-form gap per dt level on shared Brownian refinements.

    For each path, fine increments are drawn once and aggregated to every
    level; the per-level metric is sup_t |euler - explicit| over the bubble
    segment.  Also reports the strong error of the bubble against the
    finest level at shared grid times.
    """
    lad = sorted(dt_ladder, reverse=True)
    if len(lad) < 2:
        raise ParameterError("dt ladder: need at least two levels")
    finest = lad[-1]
    factors = []
    for d in lad:
        f = d / finest
        if abs(f - round(f)) > 1e-9:
            raise ParameterError("dt ladder: levels must be nested multiples")
        factors.append(int(round(f)))

    p_fine = params.replace(dt=finest)
    gaps = {d: [] for d in lad}
    strong = {d: [] for d in lad[:-1]}
    for j in range(n_paths):
        rng = path_rng(params.seed, j)
        dBf = draw_increments(p_fine, rng)
        tau = params.tau0 if params.tau_mode == "deterministic" else 0.0
        beta_by_level = {}
        for d, f in zip(lad, factors):
            pl = params.replace(dt=d)
            dB = dBf if f == 1 else _coarsen(dBf, f)
            traj = integrate(pl, dist, dB, tau, j, backend=backend)
            ref = explicit_bubble(traj)
            ok = np.isfinite(traj.beta)
            gaps[d].append(float(np.max(np.abs(traj.beta[ok] - ref[ok]))))
            beta_by_level[d] = traj.beta
        coarsest = lad[0]
        stride = {d: int(round(coarsest / d)) for d in lad}
        base = beta_by_level[finest][::stride[finest]]
        for d in lad[:-1]:
            b = beta_by_level[d][::stride[d]]
            ok = np.isfinite(b) & np.isfinite(base)
            strong[d].append(float(np.max(np.abs(b[ok] - base[ok]))))

    gap_med = {d: float(np.median(gaps[d])) for d in lad}
    ratios = []
    for a, b in zip(lad[:-1], lad[1:]):
        pair = np.array(gaps[a]) > 0
        r = np.array(gaps[b])[pair] / np.array(gaps[a])[pair]
        ratios.append(float(np.median(r)))
    return {"dt": lad, "gap_median": gap_med,
            "gap_ratio_medians": ratios,
            "strong_error_median": {d: float(np.median(strong[d]))
                                    for d in lad[:-1]},
            "n_paths": n_paths}
