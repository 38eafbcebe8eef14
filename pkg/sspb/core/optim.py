"""
Adam optimizer.

`adam_step` is a pure function over named parameter arrays; `Adam` keeps the
state between steps for the training loop.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Tuple

import numpy as np

from ..utils.error_handler import ParameterError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamState:
    """Moments, step counter and hyperparameters of one Adam run."""
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def fresh(
        cls,
        params: Mapping[str, np.ndarray],
        lr: float = 0.01,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-7
    ) -> 'AdamState':
        if lr <= 0 or not 0 <= beta1 < 1 or not 0 <= beta2 < 1 or epsilon <= 0:
            raise ParameterError(
                f"invalid Adam hyperparameters lr={lr}, beta1={beta1}, "
                f"beta2={beta2}, epsilon={epsilon}"
            )
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
            m={name: np.zeros_like(p) for name, p in params.items()},
            v={name: np.zeros_like(p) for name, p in params.items()},
        )


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One bias-corrected Adam update.

    Returns new parameter arrays and a new state; inputs are left untouched.
    """
    if state.t < 0:
        raise ParameterError(f"Adam step counter must be >= 0, got {state.t}")

    t = state.t + 1
    correction1 = 1 - state.beta1 ** t
    correction2 = 1 - state.beta2 ** t

    new_params: Dict[str, np.ndarray] = {}
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}

    for name, param in params.items():
        grad = grads[name]
        m_prev = state.m.get(name)
        v_prev = state.v.get(name)
        if m_prev is None:
            m_prev = np.zeros_like(param)
            v_prev = np.zeros_like(param)
        if grad.shape != param.shape or m_prev.shape != param.shape:
            raise ShapeError(
                f"Adam shape mismatch for {name}: param {param.shape}, "
                f"grad {grad.shape}, moment {m_prev.shape}"
            )

        m = state.beta1 * m_prev + (1 - state.beta1) * grad
        v = state.beta2 * v_prev + (1 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2

        new_params[name] = (
            param - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        ).astype(param.dtype)
        new_m[name] = m.astype(param.dtype)
        new_v[name] = v.astype(param.dtype)

    return new_params, replace(state, t=t, m=new_m, v=new_v)


class Adam:
    """
    Stateful Adam wrapper used by the trainer.

    Features:
    - Keeps AdamState between steps
    - Applies updates to a named parameter mapping
    """

    def __init__(
        self,
        params: Mapping[str, np.ndarray],
        lr: float = 0.01,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-7
    ):
        self.logger = logging.getLogger(__name__)
        self.state = AdamState.fresh(params, lr, beta1, beta2, epsilon)

    def step(
        self,
        params: Mapping[str, np.ndarray],
        grads: Mapping[str, np.ndarray]
    ) -> Dict[str, np.ndarray]:
        new_params, self.state = adam_step(params, grads, self.state)
        return new_params
