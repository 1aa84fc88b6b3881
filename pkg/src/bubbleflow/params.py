"""Model parameters, validation and canonical parameter sets."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field


class ParameterError(ValueError):
    """Raised when a parameter violates a model constraint."""


@dataclass
class BurstParams:
    """Regime switch fired once the bubble stalls below its running maximum.

    window: stall duration (time units) before the switch fires.
    delta_mult / lambda_mult: factors applied to the sell rate and the
    contagion rate after the switch.  A one-way switch per path.
    """

    window: float = 0.25
    delta_mult: float = 6.0
    lambda_mult: float = 0.05


@dataclass
class ModelParams:
    # fundamental wealth
    a: float = 0.05
    b: float = 0.2
    wf0: float = 50.0
    # bubble decay
    k_decay: float = 0.1
    # contagion rates
    lambda_contagion: float = 0.6
    delta_sell: float = 0.4
    # resiliency
    Lambda0: float = 0.5
    lambda_low: float = 0.05
    lambda_mode: str = "constant"       # "constant" | "diffusion"
    kappa: float = 1.0                  # diffusion mode: mean reversion speed
    Lambda_star: float = 0.5            # diffusion mode: long-run level
    c_lambda: float = 0.2               # diffusion mode: vol scale
    # illiquidity
    M0: float = 10.0
    mu_M: float = 0.0
    sigma_M: float = 0.5
    # per-investor wealth cap
    theta0: float = 2.0
    mu_theta: float = 0.2
    sigma_theta: float = 0.4
    # aggregate volume
    sigma_bar: float = 0.5
    alpha_vol: float = 0.51
    nodes: int = 50000
    x_init: float = 50.0
    xk0: float = 0.02
    # bubble birth time
    pi_intensity: float = 0.5
    pi_bound: float = 1.0
    tau_mode: str = "deterministic"     # "deterministic" | "intensity"
    tau0: float = 0.0
    # grid / ensemble
    T: float = 3.0
    dt: float = 1e-3
    n_paths: int = 2000
    seed: int = 7
    burst: BurstParams = field(default_factory=BurstParams)

    def __post_init__(self):
        self.validate()

    def validate(self):
        checks = [
            ("a", self.a > 0, "a must be > 0"),
            ("b", self.b > 0, "b must be > 0"),
            ("wf0", self.wf0 > 0, "wf0 must be > 0"),
            ("k_decay", self.k_decay > 0, "k_decay must be > 0"),
            ("delta_sell", self.delta_sell >= 0, "delta_sell must be >= 0"),
            ("lambda_contagion", self.lambda_contagion > self.delta_sell,
             "lambda_contagion must exceed delta_sell"),
            ("lambda_low", 0.0 < self.lambda_low < self.Lambda0 < 1.0,
             "need 0 < lambda_low < Lambda0 < 1"),
            ("lambda_mode", self.lambda_mode in ("constant", "diffusion"),
             "lambda_mode must be 'constant' or 'diffusion'"),
            ("M0", self.M0 > 0, "M0 must be > 0"),
            ("theta0", self.theta0 > 0, "theta0 must be > 0"),
            ("sigma_bar", self.sigma_bar >= 0, "sigma_bar must be >= 0"),
            ("alpha_vol", self.alpha_vol > 0.5, "alpha_vol must be > 1/2"),
            ("nodes", self.nodes >= 1, "nodes must be >= 1"),
            ("x_init", self.x_init >= 0, "x_init must be >= 0"),
            ("xk0", 0.0 <= self.xk0 <= self.theta0,
             "xk0 must lie in [0, theta0]"),
            ("pi_bound", self.pi_bound >= self.pi_intensity >= 0,
             "pi_bound must dominate pi_intensity"),
            ("tau_mode", self.tau_mode in ("deterministic", "intensity"),
             "tau_mode must be 'deterministic' or 'intensity'"),
            ("tau0", 0.0 <= self.tau0 < self.T or self.tau_mode == "intensity",
             "tau0 must lie in [0, T)"),
            ("T", self.T > 0, "T must be > 0"),
            ("dt", self.dt > 0, "dt must be > 0"),
            ("n_paths", self.n_paths >= 1, "n_paths must be >= 1"),
            ("burst.window", self.burst.window > 0, "burst.window must be > 0"),
        ]
        if self.lambda_mode == "diffusion":
            checks.append(("Lambda_star",
                           self.lambda_low < self.Lambda_star < 1.0,
                           "Lambda_star must lie in (lambda_low, 1)"))
        for name, ok, msg in checks:
            if not ok:
                raise ParameterError(f"{name}: {msg}")
        for name in ("a", "b", "wf0", "lambda_contagion", "delta_sell",
                     "Lambda0", "M0", "theta0", "sigma_bar", "x_init",
                     "T", "dt"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name}: must be finite")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def replace(self, **kw) -> "ModelParams":
        burst_kw = {k[6:]: kw.pop(k) for k in list(kw)
                    if k.startswith("burst_")}
        p = dataclasses.replace(self, **kw)
        if burst_kw:
            p.burst = dataclasses.replace(p.burst, **burst_kw)
            p.validate()
        return p


def paper_defaults() -> ModelParams:
    """Baseline parameter set used for the Figure-1 style experiments."""
    return ModelParams()


def flow_check_defaults() -> ModelParams:
    """Parameter set used by the pricing-flow verification commands.

    The pricing identity holds for any admissible parameters, but its Monte
    Carlo estimator degenerates when the volume process touches {0, N*theta}
    (vanishing volatility blows up the exchange-rate kernels) or when the
    Girsanov variance is large.  This instance keeps the volume at an interior
    equilibrium on a sparse network, with a small resiliency so the birth size
    of the bubble stays commensurate with the volume volatility, and disables
    the burst switch (it plays no role in the identity).
    """
    return ModelParams(
        wf0=20.0,
        Lambda0=0.005,
        lambda_low=1e-3,
        M0=1.0,
        mu_theta=0.05,
        sigma_theta=0.05,
        sigma_bar=0.2,
        x_init=4.5e4,
        xk0=0.5,
        burst=BurstParams(window=0.25, delta_mult=1.0, lambda_mult=1.0),
    )


# network presets: (kind, parameter); kind "powerlaw" takes the tail exponent,
# kind "poisson" the mean-degree rate
NETWORK_PRESETS = {
    "sf2.2": ("powerlaw", 2.2),
    "sf2.5": ("powerlaw", 2.5),
    "er3.2": ("poisson", 3.2),
    "er1.9": ("poisson", 1.9),
}

FLOW_NETWORK = ("poisson", 0.8)
