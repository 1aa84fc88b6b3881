"""Liquidity-driven asset bubble simulator.

Network contagion feeds an aggregate trading-volume SDE coupled to a bubble
process; a flow of pricing kernels is built along simulated paths and checked
numerically; a scale-function lab decides true-martingale questions for
stochastic exponentials of one-dimensional diffusions.
"""

from ._backend import BACKEND
from .params import BurstParams, ModelParams, ParameterError

__version__ = "0.1.0"

__all__ = ["BACKEND", "BurstParams", "ModelParams", "ParameterError",
           "__version__"]
