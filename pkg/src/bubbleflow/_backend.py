"""Backend selection: compiled extension when available, numpy loop otherwise.

Set BUBBLEFLOW_BACKEND=python (or =compiled) to force a choice; the compiled
request fails loudly if the extension was not built.
"""

from __future__ import annotations

import os

import numpy as np

from .params import ModelParams

# packed parameter vector layout shared by both backends
PARAM_LAYOUT = (
    "dt", "a", "b", "wf0", "k_decay", "lambda_contagion", "delta_sell",
    "Lambda0", "lambda_low", "lambda_mode", "kappa", "Lambda_star",
    "c_lambda", "M0", "mu_M", "sigma_M", "theta0", "mu_theta",
    "sigma_theta", "sigma_bar", "alpha_vol", "nodes", "x_init", "xk0",
    "tau_idx", "burst_window", "burst_delta_mult", "burst_lambda_mult",
)

_forced = os.environ.get("BUBBLEFLOW_BACKEND", "").strip().lower()

if _forced == "python":
    from . import _kernels_py as _impl
elif _forced == "compiled":
    from . import _speedups as _impl  # type: ignore[attr-defined]
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND_NAME


def get_backend(name: str | None = None):
    """Return (name, integrate_path) for the active or a named backend."""
    if name in (None, "", BACKEND):
        return BACKEND, _impl.integrate_path
    if name == "python":
        from . import _kernels_py
        return "python", _kernels_py.integrate_path
    if name == "compiled":
        from . import _speedups  # type: ignore[attr-defined]
        return "compiled", _speedups.integrate_path
    raise ValueError(f"unknown backend '{name}'")


def pack_params(p: ModelParams, tau_idx: int) -> np.ndarray:
    vec = np.empty(len(PARAM_LAYOUT))
    vals = {
        "dt": p.dt, "a": p.a, "b": p.b, "wf0": p.wf0, "k_decay": p.k_decay,
        "lambda_contagion": p.lambda_contagion, "delta_sell": p.delta_sell,
        "Lambda0": p.Lambda0, "lambda_low": p.lambda_low,
        "lambda_mode": 0.0 if p.lambda_mode == "constant" else 1.0,
        "kappa": p.kappa, "Lambda_star": p.Lambda_star,
        "c_lambda": p.c_lambda, "M0": p.M0, "mu_M": p.mu_M,
        "sigma_M": p.sigma_M, "theta0": p.theta0, "mu_theta": p.mu_theta,
        "sigma_theta": p.sigma_theta, "sigma_bar": p.sigma_bar,
        "alpha_vol": p.alpha_vol, "nodes": float(p.nodes),
        "x_init": p.x_init, "xk0": p.xk0, "tau_idx": float(tau_idx),
        "burst_window": p.burst.window,
        "burst_delta_mult": p.burst.delta_mult,
        "burst_lambda_mult": p.burst.lambda_mult,
    }
    for j, name in enumerate(PARAM_LAYOUT):
        vec[j] = vals[name]
    return vec
