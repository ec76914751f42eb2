"""Gradient-descent optimizers over lists of :class:`Parameter`."""

from __future__ import annotations

import math

import numpy as np

from maeeg.errors import ConfigError, ContractError


class Optimizer:
    def __init__(self, params, lr: float):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = float(lr)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def _check_grads(self):
        missing = [i for i, p in enumerate(self.params) if p.grad is None]
        if missing:
            raise ContractError(f"optimizer step with {len(missing)} parameter(s) lacking gradients")

    def step(self):
        raise NotImplementedError


class SGD(Optimizer):
    """SGD with heavy-ball momentum: ``v = mu*v + g; w -= lr*v``."""

    kind = "sgd-momentum"

    def __init__(self, params, lr: float, momentum: float = 0.9):
        super().__init__(params, lr)
        if not 0.0 <= momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {momentum}")
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self._check_grads()
        for p, v in zip(self.params, self.velocity):
            v *= self.momentum
            v += p.grad
            p.data -= (self.lr * v).astype(p.data.dtype)


class Adam(Optimizer):
    """Adam with bias correction and optional decoupled weight decay."""

    kind = "adam-like"

    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        super().__init__(params, lr)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self._check_grads()
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            denom = np.sqrt(v)
            denom *= 1.0 / math.sqrt(c2)
            denom += self.eps
            update = m / denom
            update *= self.lr / c1
            if self.weight_decay:
                update += self.lr * self.weight_decay * p.data
            p.data -= update.astype(p.data.dtype, copy=False)


def make_optimizer(kind: str, params, lr: float, **kwargs) -> Optimizer:
    if kind in ("adam", "adam-like"):
        return Adam(params, lr, **kwargs)
    if kind in ("sgd", "sgd-momentum"):
        return SGD(params, lr, **kwargs)
    raise ConfigError(f"unknown optimizer kind {kind!r}")
