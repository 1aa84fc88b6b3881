# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled backend for the coupled path integration.

Same contract as ``_kernels_py.integrate_path``; the hot loops (per-degree
contagion update inside the per-step loop) run as plain C over contiguous
doubles.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, NAN, isfinite, pow

cnp.import_array()

BACKEND_NAME = "compiled"


def integrate_path(double[::1] kw, double z, double[:, ::1] dB, double[::1] p,
                   double[::1] WF, double[::1] M, double[::1] Lam,
                   double[::1] Th, double[::1] X, double[::1] nvol,
                   double[::1] beta, signed char[::1] regime,
                   double[::1] xk_final, long long[::1] status):
    cdef double dt = p[0], a = p[1], b = p[2], wf0 = p[3], k_decay = p[4]
    cdef double lam = p[5], delta = p[6], Lambda0 = p[7], lambda_low = p[8]
    cdef double lam_mode = p[9], kappa = p[10], Lambda_star = p[11]
    cdef double c_lambda = p[12], M0 = p[13], mu_M = p[14], sigma_M = p[15]
    cdef double theta0 = p[16], mu_theta = p[17], sigma_theta = p[18]
    cdef double sigma_bar = p[19], alpha_vol = p[20], nodes = p[21]
    cdef double x_init = p[22], xk0 = p[23], tau_f = p[24]
    cdef double burst_w = p[25], dmult = p[26], lmult = p[27]

    cdef Py_ssize_t n_steps = dB.shape[1]
    cdef Py_ssize_t nk = kw.shape[0]
    cdef Py_ssize_t tau_idx = <Py_ssize_t> tau_f if tau_f >= 0 else -1
    cdef double[::1] Xk = np.zeros(nk)

    cdef Py_ssize_t i, k
    cdef int reg = 0, born
    cdef double delta_eff = delta, lam_eff = lam
    cdef double run_max = -INFINITY, last_max_t = 0.0
    cdef double n_i, mu_i, sig_i, u_i, xn, hi, dX, tn, lnew, acc
    cdef double dB1, dB2, dB3, dB4

    WF[0] = wf0; M[0] = M0; Lam[0] = Lambda0; Th[0] = theta0
    X[0] = 0.0; nvol[0] = 0.0; beta[0] = NAN
    regime[0] = 0
    status[0] = 0
    status[1] = -1

    with nogil:
        for i in range(n_steps + 1):
            if i == tau_idx:
                for k in range(nk):
                    Xk[k] = xk0
                X[i] = x_init
                beta[i] = 2.0 * x_init * Lam[i] * M[i] * WF[i]
                reg = 1
                run_max = beta[i]
                last_max_t = i * dt
                acc = 0.0
                for k in range(nk):
                    acc += kw[k] * Xk[k]
                nvol[i] = acc
                regime[i] = reg
            if i == n_steps:
                break
            born = reg >= 1
            n_i = nvol[i]
            if born:
                mu_i = -delta_eff * X[i] + lam_eff * nodes * n_i * (Th[i] - n_i / z)
                sig_i = sigma_bar * pow(X[i] * (nodes * Th[i] - X[i]), alpha_vol)
            else:
                mu_i = 0.0
                sig_i = 0.0
            dB1 = dB[0, i]; dB2 = dB[1, i]; dB3 = dB[2, i]; dB4 = dB[3, i]
            WF[i + 1] = WF[i] * (1.0 + a * dt + b * dB1)
            if WF[i + 1] < 1e-300:
                WF[i + 1] = 1e-300
            M[i + 1] = M[i] * (1.0 + mu_M * dt + sigma_M * dB3)
            if M[i + 1] < 1e-300:
                M[i + 1] = 1e-300
            Th[i + 1] = Th[i] * (1.0 + mu_theta * dt + sigma_theta * dB3)
            if Th[i + 1] < 1e-300:
                Th[i + 1] = 1e-300
            if lam_mode == 0.0:
                Lam[i + 1] = Lam[i]
            else:
                lnew = Lam[i] + kappa * (Lambda_star - Lam[i]) * dt \
                    + c_lambda * (Lam[i] - lambda_low) * (1.0 - Lam[i]) * dB4
                if lnew < lambda_low:
                    lnew = lambda_low
                elif lnew > 1.0:
                    lnew = 1.0
                Lam[i + 1] = lnew
            if born:
                u_i = n_i / z
                acc = 0.0
                for k in range(nk):
                    Xk[k] = Xk[k] + dt * (-delta_eff * Xk[k]
                                          + lam_eff * k * u_i * (Th[i] - Xk[k]))
                    if Xk[k] < 0.0:
                        Xk[k] = 0.0
                    elif Xk[k] > Th[i + 1]:
                        Xk[k] = Th[i + 1]
                    acc += kw[k] * Xk[k]
                xn = X[i] + mu_i * dt + sig_i * dB2
                hi = nodes * Th[i + 1]
                if xn < 0.0:
                    xn = 0.0
                elif xn > hi:
                    xn = hi
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
                nvol[i + 1] = acc
            else:
                X[i + 1] = 0.0
                beta[i + 1] = NAN
                nvol[i + 1] = 0.0
            regime[i + 1] = <signed char> reg
            if not (isfinite(WF[i + 1]) and isfinite(M[i + 1])
                    and isfinite(Th[i + 1]) and isfinite(X[i + 1])
                    and (born == 0 or isfinite(beta[i + 1]))):
                status[0] = i + 1
                break
    if status[0] == 0:
        for k in range(nk):
            xk_final[k] = Xk[k]
