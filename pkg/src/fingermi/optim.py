"""Adam optimizer with bias-corrected moment estimates.

All training in the toolkit runs through this one optimizer. Hyperparameters
default to the canonical (lr=1e-3, betas 0.9/0.999, eps=1e-8) and are
overridable via the train.* config keys. No weight decay: the only
regularizers in the decoders are dropout and the max-norm constraint, which
is applied by the trainer after each step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    lr: float
    beta1: float
    beta2: float
    epsilon: float
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_init(params: dict[str, Tensor], lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    state = AdamState(lr, beta1, beta2, epsilon)
    for name, p in params.items():
        state.m[name] = np.zeros_like(p.data)
        state.v[name] = np.zeros_like(p.data)
    return state


def adam_step(state: AdamState, params: dict[str, Tensor],
              grads: dict[str, np.ndarray] | None = None) -> None:
    """One bias-corrected update, in place on the parameter buffers.

    Gradients default to each parameter's .grad; missing/None entries are
    treated as zero (the parameter simply does not move).
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name) if grads is not None else p.grad
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} does not match "
                             f"parameter {name} shape {p.data.shape}")
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for parameter {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
