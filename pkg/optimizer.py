from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from errors import ConfigError, UsageError
from tensor import Tensor

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS

    def __post_init__(self):
        if self.m.shape != self.v.shape:
            raise ConfigError(f"Adam moments disagree: {self.m.shape} vs {self.v.shape}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError(f"Adam betas must be in [0, 1): {self.beta1}, {self.beta2}")
        if self.eps <= 0.0:
            raise ConfigError(f"Adam eps must be positive, got {self.eps}")
        if self.t < 0:
            raise ConfigError(f"Adam step counter cannot be negative, got {self.t}")

    @classmethod
    def fresh(cls, param: Tensor) -> "AdamState":
        return cls(m=np.zeros_like(param.data), v=np.zeros_like(param.data))


def init_adam(params: Iterable[Tensor]) -> List[AdamState]:
    return [AdamState.fresh(p) for p in params]


def adam_step(params: List[Tensor], states: List[AdamState], lr: float) -> None:
    """One bias-corrected Adam update in place, then zero every gradient.

    All gradients are checked before any parameter moves, so a missing grad
    leaves the model untouched.
    """
    if len(params) != len(states):
        raise UsageError(f"{len(params)} parameters but {len(states)} Adam states")
    for p in params:
        if p.grad is None:
            raise UsageError(f"parameter {p.name or '?'} has no gradient; run backward() first")

    for p, s in zip(params, states):
        if s.m.shape != p.data.shape:
            raise UsageError(f"Adam state for {p.name or '?'} has shape {s.m.shape}, param {p.shape}")
        g = p.grad
        s.t += 1
        s.m *= s.beta1
        s.m += (1.0 - s.beta1) * g
        s.v *= s.beta2
        s.v += (1.0 - s.beta2) * (g * g)
        # lr * m_hat / (sqrt(v_hat) + eps), built in one scratch buffer
        step = s.v / (1.0 - s.beta2 ** s.t)
        np.sqrt(step, out=step)
        step += s.eps
        np.divide(s.m, step, out=step)
        step *= lr / (1.0 - s.beta1 ** s.t)
        p.data -= step
        p.zero_grad()
