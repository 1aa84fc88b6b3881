"""Pure-python backend for the coupled path integration.

Reference implementation of the per-path Euler loop; the compiled backend in
``_speedups.pyx`` mirrors it operation for operation.  Both consume the packed
parameter vector described in ``_backend.PARAM_LAYOUT`` and pre-drawn,
pre-scaled Brownian increments, so a path is a pure function of its inputs.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"


def integrate_path(kw, z, dB, p, WF, M, Lam, Th, X, nvol, beta, regime,
                   xk_final, status):
    (dt, a, b, wf0, k_decay, lam, delta, Lambda0, lambda_low, lam_mode,
     kappa, Lambda_star, c_lambda, M0, mu_M, sigma_M, theta0, mu_theta,
     sigma_theta, sigma_bar, alpha_vol, nodes, x_init, xk0, tau_f,
     burst_w, dmult, lmult) = p

    n_steps = dB.shape[1]
    tau_idx = int(tau_f) if tau_f >= 0 else -1
    ks = np.arange(kw.shape[0], dtype=float)
    Xk = np.zeros(kw.shape[0])

    WF[0], M[0], Lam[0], Th[0] = wf0, M0, Lambda0, theta0
    X[0], nvol[0], beta[0] = 0.0, 0.0, math.nan
    regime[0] = 0

    delta_eff, lam_eff = delta, lam
    run_max = -math.inf
    last_max_t = 0.0
    reg = 0
    status[0] = 0
    status[1] = -1

    for i in range(n_steps + 1):
        if i == tau_idx:
            Xk[:] = xk0
            X[i] = x_init
            beta[i] = 2.0 * x_init * Lam[i] * M[i] * WF[i]
            reg = 1
            run_max = beta[i]
            last_max_t = i * dt
            nvol[i] = float(kw @ Xk)
            regime[i] = reg
        if i == n_steps:
            break
        born = reg >= 1
        n_i = nvol[i]
        if born:
            mu_i = -delta_eff * X[i] + lam_eff * nodes * n_i * (Th[i] - n_i / z)
            sig_i = sigma_bar * (X[i] * (nodes * Th[i] - X[i])) ** alpha_vol
        else:
            mu_i = 0.0
            sig_i = 0.0
        dB1, dB2, dB3, dB4 = dB[0, i], dB[1, i], dB[2, i], dB[3, i]
        WF[i + 1] = max(WF[i] * (1.0 + a * dt + b * dB1), 1e-300)
        M[i + 1] = max(M[i] * (1.0 + mu_M * dt + sigma_M * dB3), 1e-300)
        Th[i + 1] = max(Th[i] * (1.0 + mu_theta * dt + sigma_theta * dB3), 1e-300)
        if lam_mode == 0.0:
            Lam[i + 1] = Lam[i]
        else:
            lnew = Lam[i] + kappa * (Lambda_star - Lam[i]) * dt \
                + c_lambda * (Lam[i] - lambda_low) * (1.0 - Lam[i]) * dB4
            Lam[i + 1] = min(max(lnew, lambda_low), 1.0)
        if born:
            u_i = n_i / z
            Xk += dt * (-delta_eff * Xk + lam_eff * ks * u_i * (Th[i] - Xk))
            np.clip(Xk, 0.0, Th[i + 1], out=Xk)
            xn = X[i] + mu_i * dt + sig_i * dB2
            hi = nodes * Th[i + 1]
            xn = min(max(xn, 0.0), hi)
            X[i + 1] = xn
            dX = xn - X[i]
            beta[i + 1] = beta[i] + Lam[i] * M[i] * (-k_decay * beta[i]) * dt \
                + 2.0 * Lam[i] * M[i] * dX
            tn = (i + 1) * dt
            if beta[i + 1] >= run_max:
                run_max = beta[i + 1]
                last_max_t = tn
            elif reg == 1 and tn - last_max_t >= burst_w - 1e-12:
                reg = 2
                delta_eff = delta * dmult
                lam_eff = lam * lmult
                status[1] = i + 1
            nvol[i + 1] = float(kw @ Xk)
        else:
            X[i + 1] = 0.0
            beta[i + 1] = math.nan
            nvol[i + 1] = 0.0
        regime[i + 1] = reg
        if not (math.isfinite(WF[i + 1]) and math.isfinite(M[i + 1])
                and math.isfinite(Th[i + 1]) and math.isfinite(X[i + 1])
                and (not born or math.isfinite(beta[i + 1]))):
            status[0] = i + 1
            return
    xk_final[:] = Xk
