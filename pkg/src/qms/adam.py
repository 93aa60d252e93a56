"""Adam updates with one independent state per parameter tensor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ConfigError(f"{name} must lie in [0, 1), got {v}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class AdamState:
    """Moment estimates for one tensor.

    ``beta1_pow``/``beta2_pow`` hold beta**t, advanced by one multiplication
    per step rather than recomputed with ``**``.
    """

    m1: np.ndarray
    v2: np.ndarray
    t: int = 0
    beta1_pow: float = 1.0
    beta2_pow: float = 1.0


def adam_init(shape) -> AdamState:
    return AdamState(np.zeros(shape), np.zeros(shape))


def _corrected(prev, g, beta, beta_pow):
    # (beta*prev + (1-beta)*g) / (1-beta^t), distributed over the two terms.
    # At t=1 the second factor is x/x == 1.0 and prev is 0, so the corrected
    # moment equals g bit for bit instead of merely to within an ulp.
    denom = 1.0 - beta_pow
    return (beta * prev) / denom + g * ((1.0 - beta) / denom)


def adam_step(state: AdamState, param, grad, cfg: AdamConfig):
    """One Adam update. Returns ``(new_state, new_param)``; inputs are not modified."""
    param = np.asarray(param, dtype=np.float64)
    g = np.asarray(grad, dtype=np.float64)
    if not (param.shape == g.shape == state.m1.shape):
        raise ShapeError(f"shape mismatch: param {param.shape}, grad {g.shape}, "
                         f"state {state.m1.shape}")
    b1, b2 = cfg.beta1, cfg.beta2
    gg = g * g
    m1 = b1 * state.m1 + (1.0 - b1) * g
    v2 = b2 * state.v2 + (1.0 - b2) * gg
    b1p = state.beta1_pow * b1
    b2p = state.beta2_pow * b2
    m_hat = _corrected(state.m1, g, b1, b1p)
    v_hat = _corrected(state.v2, gg, b2, b2p)
    new_param = param - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return AdamState(m1, v2, state.t + 1, b1p, b2p), new_param


def bias_corrected(state: AdamState):
    """``(m_hat, v_hat)`` for a state that has taken at least one step.

    Plain division of the stored moments; :func:`adam_step` uses an
    algebraically equal form that is exact at t=1.
    """
    if state.t < 1:
        raise ValueError("bias correction is undefined before the first step")
    return state.m1 / (1.0 - state.beta1_pow), state.v2 / (1.0 - state.beta2_pow)
