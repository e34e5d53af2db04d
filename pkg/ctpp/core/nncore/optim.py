"""
Adam optimizer and gradient clipping over a ParamStore.
"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ctpp.core.exceptions import StateError
from ctpp.core.nncore.params import ParamStore


@dataclass
class AdamState:
    """Per-parameter first/second moment estimates and the step counter."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(store: ParamStore, state: AdamState, lr: float) -> AdamState:
    """
    Apply one bias-corrected Adam update in place and clear the gradients.

    Raises:
        StateError: if any parameter has no gradient
    """
    missing = [name for name, p in store.named() if p.grad is None]
    if missing:
        raise StateError(f"adam_step: no gradient for {missing}")

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, param in store.named():
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        g = param.grad
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / correction1
        v_hat = v / correction2
        param.data = param.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    store.zero_grad()
    return state


def clip_grad_norm(store: ParamStore, max_norm: float) -> float:
    """Rescale all gradients so their global L2 norm is at most ``max_norm``; returns the norm before clipping."""
    grads = [p.grad for p in store if p.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if np.isfinite(total) and total > max_norm > 0:
        scale = max_norm / total
        for param in store:
            if param.grad is not None:
                param.grad = param.grad * scale
    return total
