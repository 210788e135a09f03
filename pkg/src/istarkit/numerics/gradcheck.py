"""Finite-difference gradient verification.

The central-difference oracle is deliberately independent of the tape: it
only re-evaluates the scalar function, so it can confirm (or expose) the
analytic backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ConfigurationError, NumericError
from .record import GradientMap
from .tensor import Tensor

Scalar = float
ParamDict = dict[str, Tensor]


def finite_difference_grad(f: Callable[[ParamDict], Scalar],
                           params: ParamDict,
                           eps: float = 1e-5) -> GradientMap:
    """Central differences (f(p + eps e) - f(p - eps e)) / (2 eps) per coordinate."""
    if eps <= 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    grads = GradientMap()
    for name, p in params.items():
        base = p.data
        g = np.zeros(base.shape)
        flat = g.ravel()
        for i in range(base.size):
            bumped = base.copy().ravel()
            bumped[i] += eps
            hi = f({**params, name: Tensor(bumped.reshape(base.shape))})
            bumped[i] -= 2 * eps
            lo = f({**params, name: Tensor(bumped.reshape(base.shape))})
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise NumericError(f"non-finite evaluation while probing {name}[{i}]")
            flat[i] = (hi - lo) / (2 * eps)
        grads[name] = Tensor(g)
    return grads


def max_relative_error(analytic: dict[str, Tensor], numeric: dict[str, Tensor]) -> float:
    """max over coordinates of |a - n| / max(1, |a|, |n|)."""
    worst = 0.0
    for name, a in analytic.items():
        n = numeric[name].data
        av = a.data
        denom = np.maximum(1.0, np.maximum(np.abs(av), np.abs(n)))
        err = np.abs(av - n) / denom
        if err.size:
            worst = max(worst, float(err.max()))
    return worst


@dataclass
class GradCheckResult:
    op: str
    max_rel_err: float
    instances: int

    def passed(self, tol: float = 1e-5) -> bool:
        return self.max_rel_err <= tol


Scenario = Callable[[np.random.Generator], tuple[ParamDict, Callable[[ParamDict], tuple]]]


def check_scenario(name: str,
                   scenario: Scenario,
                   instances: int,
                   seed: int,
                   eps: float = 1e-5,
                   corrupt: bool = False) -> GradCheckResult:
    """Compare analytic and central-difference gradients over random instances.

    ``scenario(rng)`` returns a parameter dict and a builder that maps a
    parameter dict to ``(record, scalar_loss)``. ``corrupt`` perturbs the
    analytic gradient (fault-injection hook used to prove the check can fail).
    """
    from .record import backward

    worst = 0.0
    for k in range(instances):
        rng = np.random.default_rng([seed, k])
        params, build = scenario(rng)
        record, loss = build(params)
        analytic = backward(record, loss)
        if corrupt and analytic:
            victim = sorted(analytic)[0]
            bumped = analytic[victim].data.copy()
            bumped.ravel()[0] += 1e-3
            analytic[victim] = Tensor(bumped)
        numeric = finite_difference_grad(lambda p: build(p)[1].item(), params, eps)
        missing = set(analytic) ^ set(numeric)
        if missing:
            raise ConfigurationError(f"{name}: gradient key mismatch {missing}")
        worst = max(worst, max_relative_error(analytic, numeric))
    return GradCheckResult(op=name, max_rel_err=worst, instances=instances)
