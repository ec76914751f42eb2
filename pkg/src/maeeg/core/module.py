"""A small module container: named parameters, train/eval mode, dropout rng."""

from __future__ import annotations

import numpy as np

from maeeg.core.rng import Rng
from maeeg.core.tensor import Parameter


class Module:
    training: bool = False
    rng: Rng | None = None

    def children(self):
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = ""):
        """Parameters in deterministic attribute-insertion order."""
        out = {}
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                out[prefix + name] = value
        for name, child in self.children():
            out.update(child.named_parameters(f"{prefix}{name}."))
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def train(self, rng: Rng):
        """Enable dropout, drawing masks from ``rng``."""
        self.training = True
        self.rng = rng
        for _, child in self.children():
            child.train(rng)
        return self

    def eval(self):
        self.training = False
        self.rng = None
        for _, child in self.children():
            child.eval()
        return self

    def state_dict(self) -> dict:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict, strict: bool = True):
        from maeeg.errors import ConfigError

        params = self.named_parameters()
        if strict and set(state) != set(params):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise ConfigError(f"state mismatch: missing={missing[:5]} unexpected={extra[:5]}")
        for name, p in params.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != p.data.shape:
                raise ConfigError(f"shape mismatch for {name}: {value.shape} vs {p.data.shape}")
            p.data = value.astype(p.data.dtype).copy()

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None
