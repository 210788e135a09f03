"""Parameter containers, initialization, snapshots, and plain SGD."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

import numpy as np

from ..errors import ConfigurationError, DimensionError
from .tensor import Tensor


def glorot(rng: np.random.Generator, shape: tuple[int, ...], gain: float = 1.0) -> Tensor:
    fan = sum(shape) if len(shape) > 1 else shape[0] + 1
    return Tensor(rng.normal(0.0, gain * np.sqrt(2.0 / fan), shape))


@dataclass
class GRUParams:
    """Update/reset/candidate weights, stored input-major (``y = x @ W``)."""

    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor

    @classmethod
    def init(cls, d_in: int, d: int, rng: np.random.Generator) -> "GRUParams":
        def w():
            return glorot(rng, (d_in, d))

        def u():
            return glorot(rng, (d, d))

        def b():
            return Tensor(np.zeros(d))

        return cls(w(), u(), b(), w(), u(), b(), w(), u(), b())

    @classmethod
    def zero(cls, d_in: int, d: int) -> "GRUParams":
        # distinct tensors per field so gradients never alias
        mk = lambda shape: Tensor(np.zeros(shape))
        return cls(mk((d_in, d)), mk((d, d)), mk(d),
                   mk((d_in, d)), mk((d, d)), mk(d),
                   mk((d_in, d)), mk((d, d)), mk(d))

    @property
    def input_dim(self) -> int:
        return self.w_z.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w_z.shape[1]


@dataclass
class AttentionParams:
    """Per-head q/k/v projections plus one output projection."""

    w_q: list[Tensor]
    w_k: list[Tensor]
    w_v: list[Tensor]
    w_o: Tensor

    @classmethod
    def init(cls, d: int, heads: int, rng: np.random.Generator) -> "AttentionParams":
        if heads < 1 or d % heads != 0:
            raise ConfigurationError(f"{heads} heads do not divide d={d}")
        dh = d // heads
        mk = lambda: [glorot(rng, (d, dh)) for _ in range(heads)]
        return cls(mk(), mk(), mk(), glorot(rng, (d, d)))

    @classmethod
    def identity(cls, d: int) -> "AttentionParams":
        mk = lambda: Tensor(np.eye(d))
        return cls([mk()], [mk()], [mk()], mk())

    @property
    def heads(self) -> int:
        return len(self.w_q)


def named_tensors(obj, prefix: str) -> dict[str, Tensor]:
    """Flatten a parameter dataclass into ``{prefix.field: tensor}``."""
    out: dict[str, Tensor] = {}
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, Tensor):
            out[f"{prefix}.{f.name}"] = value
        elif isinstance(value, list):
            for i, t in enumerate(value):
                out[f"{prefix}.{f.name}{i}"] = t
    return out


def replace_tensors(obj, prefix: str, values: dict[str, Tensor]):
    """Rebuild a parameter dataclass from a flat name -> tensor mapping."""
    kwargs = {}
    for f in fields(obj):
        current = getattr(obj, f.name)
        if isinstance(current, Tensor):
            kwargs[f.name] = values.get(f"{prefix}.{f.name}", current)
        elif isinstance(current, list):
            kwargs[f.name] = [values.get(f"{prefix}.{f.name}{i}", t)
                              for i, t in enumerate(current)]
        else:
            kwargs[f.name] = current
    return type(obj)(**kwargs)


def sgd(params: dict[str, Tensor], grads: dict[str, Tensor], lr: float) -> dict[str, Tensor]:
    """One plain gradient-descent step; missing gradients leave entries unchanged."""
    out = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            out[name] = p
        else:
            if g.shape != p.shape:
                raise DimensionError(f"sgd: grad {g.shape} vs param {p.shape} for {name}")
            out[name] = Tensor(p.data - lr * g.data)
    return out


def save_params(path: str, params: dict[str, Tensor]) -> None:
    """Write a snapshot as ``{name: {shape: [...], data: [...]}}`` JSON."""
    doc = {name: {"shape": list(t.shape), "data": t.data.ravel().tolist()}
           for name, t in params.items()}
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def load_params(path: str) -> dict[str, Tensor]:
    with open(path) as fh:
        doc = json.load(fh)
    out = {}
    for name, entry in doc.items():
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        out[name] = Tensor(arr)
    return out
