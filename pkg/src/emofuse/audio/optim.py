"""RMSProp with Nesterov-style momentum.

Per step, with gradient ``g`` at the current parameters::

    rms   <- rho * rms + (1 - rho) * g**2
    v     <- mu * v - eps0 * g
    theta <- theta + (mu * v - eps0 * g) / sqrt(rms + delta_eps)

The RMS buffer starts at 1 so the first step is well scaled.
"""

from dataclasses import dataclass, replace

import numpy as np


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass(frozen=True)
class OptimizerState:
    theta: dict
    v: dict
    rms: dict
    mu: float = 0.46
    eps0: float = 0.0005
    rho: float = 0.92
    delta_eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")

    @classmethod
    def init(cls, params, **hyper):
        params = _as_dict(params)
        return cls({k: np.array(p, dtype=np.float64) for k, p in params.items()},
                   {k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()},
                   {k: np.ones_like(p, dtype=np.float64) for k, p in params.items()},
                   **hyper)


def _as_dict(params):
    if isinstance(params, dict):
        return params
    return {"theta": np.asarray(params, dtype=np.float64)}


def apply_update(state: OptimizerState, grads: dict) -> OptimizerState:
    """One step given gradients already evaluated at ``state.theta``."""
    theta, v, rms = {}, {}, {}
    for k, p in state.theta.items():
        g = np.asarray(grads[k], dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"gradient for {k!r} is not finite")
        r = state.rho * state.rms[k] + (1.0 - state.rho) * g * g
        vel = state.mu * state.v[k] - state.eps0 * g
        theta[k] = p + (state.mu * vel - state.eps0 * g) / np.sqrt(r + state.delta_eps)
        v[k] = vel
        rms[k] = r
    return replace(state, theta=theta, v=v, rms=rms)


def rmsprop_nesterov_step(state: OptimizerState, grad_fn) -> OptimizerState:
    """``grad_fn(theta_dict) -> grad_dict``."""
    return apply_update(state, grad_fn(state.theta))
