"""Recorded differentiable computation.

A :class:`ComputationRecord` is a write-once tape: every primitive applied
through it appends one step linking fresh output tensors to their inputs and
a vector-Jacobian closure. :func:`backward` replays the tape in reverse to
produce exact gradients for every registered parameter.

Records are single-writer; build and differentiate as many records as you
like concurrently as long as each record stays on one thread.

Conventions:

* vectors are shape ``(d,)``, row-major matrices ``(n, d)``; weight matrices
  are stored input-major, i.e. ``y = x @ W`` with ``W`` of shape
  ``(d_in, d_out)``
* reductions over graph nodes (attention normalizers, indexed log-sum-exp)
  use exactly rounded summation so outputs are bitwise invariant under node
  permutations
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigurationError, ContractError, DimensionError, NumericError
from .tensor import Tensor


@dataclass(frozen=True)
class _Step:
    out_id: int
    inputs: tuple[Tensor, ...]
    vjp: Callable[[np.ndarray], tuple]


class GradientMap(dict):
    """Parameter name -> gradient tensor of the same shape."""


def _fsum_rows(x: np.ndarray) -> np.ndarray:
    """Exactly rounded sum over the last axis (order-independent)."""
    out = np.empty(x.shape[:-1])
    for idx in np.ndindex(*x.shape[:-1]):
        out[idx] = math.fsum(x[idx])
    return out


class ComputationRecord:
    """Single-writer tape of primitive applications."""

    def __init__(self):
        self._steps: list[_Step] = []
        self._params: dict[str, Tensor] = {}
        self._produced: set[int] = set()
        self._consumed: set[int] = set()

    # -- registration -----------------------------------------------------

    def parameter(self, name: str, value) -> Tensor:
        """Register a named trainable tensor and return it."""
        if name in self._params:
            raise ContractError(f"parameter {name!r} registered twice")
        t = value if isinstance(value, Tensor) else Tensor(value)
        self._params[name] = t
        return t

    def register(self, named: dict[str, Tensor]) -> None:
        for name, value in named.items():
            self.parameter(name, value)

    @property
    def parameters(self) -> dict[str, Tensor]:
        return dict(self._params)

    def _emit(self, out: np.ndarray, inputs: Sequence[Tensor], vjp) -> Tensor:
        t = Tensor(out)
        if id(t) in self._produced:
            raise ContractError("output produced twice")  # pragma: no cover
        self._steps.append(_Step(id(t), tuple(inputs), vjp))
        self._produced.add(id(t))
        self._consumed.update(id(x) for x in inputs)
        return t

    # -- linear algebra ----------------------------------------------------

    def linear(self, x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
        """y = x @ w (+ b broadcast per row)."""
        if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
            raise DimensionError(f"linear: x has shape {x.shape}, w has shape {w.shape}")
        if b is not None and b.shape != (w.shape[1],):
            raise DimensionError(f"linear: bias shape {b.shape} != ({w.shape[1]},)")
        xv, wv = x.data, w.data
        out = xv @ wv
        if b is not None:
            out = out + b.data

        if b is None:
            def vjp(g):
                return g @ wv.T, xv.T @ g
            return self._emit(out, (x, w), vjp)

        def vjp(g):
            return g @ wv.T, xv.T @ g, g.sum(axis=0)
        return self._emit(out, (x, w, b), vjp)

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        """Matrix product; 3-D operands are treated as stacked matrices."""
        if a.ndim not in (2, 3) or b.ndim not in (2, 3) or a.ndim != b.ndim:
            raise DimensionError(f"matmul: ranks {a.shape} x {b.shape}")
        if a.shape[-1] != b.shape[-2] or (a.ndim == 3 and a.shape[0] != b.shape[0]):
            raise DimensionError(f"matmul: shapes {a.shape} x {b.shape}")
        av, bv = a.data, b.data
        out = av @ bv

        def vjp(g):
            return g @ bv.swapaxes(-1, -2), av.swapaxes(-1, -2) @ g
        return self._emit(out, (a, b), vjp)

    def matvec(self, a: Tensor, v: Tensor) -> Tensor:
        """(n, d) @ (d,) -> (n,)."""
        if a.ndim != 2 or v.ndim != 1 or a.shape[1] != v.shape[0]:
            raise DimensionError(f"matvec: shapes {a.shape} x {v.shape}")
        av, vv = a.data, v.data

        def vjp(g):
            return np.outer(g, vv), av.T @ g
        return self._emit(av @ vv, (a, v), vjp)

    def transpose(self, x: Tensor) -> Tensor:
        if x.ndim != 2:
            raise DimensionError(f"transpose: rank-{x.ndim} input")

        def vjp(g):
            return (g.T,)
        return self._emit(x.data.T.copy(), (x,), vjp)

    # -- elementwise --------------------------------------------------------

    def _same_shape(self, op: str, a: Tensor, b: Tensor) -> None:
        if a.shape != b.shape:
            raise DimensionError(f"{op}: shapes {a.shape} vs {b.shape}")

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        self._same_shape("add", a, b)
        return self._emit(a.data + b.data, (a, b), lambda g: (g, g))

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        self._same_shape("sub", a, b)
        return self._emit(a.data - b.data, (a, b), lambda g: (g, -g))

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        self._same_shape("mul", a, b)
        av, bv = a.data, b.data
        return self._emit(av * bv, (a, b), lambda g: (g * bv, g * av))

    def scale(self, x: Tensor, c: float) -> Tensor:
        c = float(c)
        return self._emit(x.data * c, (x,), lambda g: (g * c,))

    def sigmoid(self, x: Tensor) -> Tensor:
        xv = x.data
        out = np.empty_like(xv)
        pos = xv >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-xv[pos]))
        ex = np.exp(xv[~pos])
        out[~pos] = ex / (1.0 + ex)

        def vjp(g):
            return (g * out * (1.0 - out),)
        return self._emit(out, (x,), vjp)

    def tanh(self, x: Tensor) -> Tensor:
        out = np.tanh(x.data)

        def vjp(g):
            return (g * (1.0 - out * out),)
        return self._emit(out, (x,), vjp)

    def exp(self, x: Tensor) -> Tensor:
        out = np.exp(x.data)
        if not np.all(np.isfinite(out)):
            raise NumericError("exp overflow")

        def vjp(g):
            return (g * out,)
        return self._emit(out, (x,), vjp)

    def log(self, x: Tensor) -> Tensor:
        if np.any(x.data <= 0):
            raise NumericError("log of non-positive value")
        xv = x.data

        def vjp(g):
            return (g / xv,)
        return self._emit(np.log(xv), (x,), vjp)

    # -- reductions and shape ops -------------------------------------------

    def softmax(self, x: Tensor) -> Tensor:
        """Softmax over the last axis, computed with max subtraction."""
        if x.ndim < 1 or x.shape[-1] < 1:
            raise DimensionError(f"softmax: shape {x.shape}")
        xv = x.data
        m = xv.max(axis=-1, keepdims=True)
        e = np.exp(xv - m)
        out = e / e.sum(axis=-1, keepdims=True)

        def vjp(g):
            inner = (g * out).sum(axis=-1, keepdims=True)
            return ((g - inner) * out,)
        return self._emit(out, (x,), vjp)

    def sum(self, x: Tensor) -> Tensor:
        shape = x.shape

        def vjp(g):
            return (np.broadcast_to(g, shape).copy(),)
        return self._emit(np.asarray(x.data.sum()), (x,), vjp)

    def mean(self, x: Tensor) -> Tensor:
        shape, n = x.shape, x.size

        def vjp(g):
            return (np.broadcast_to(g / n, shape).copy(),)
        return self._emit(np.asarray(x.data.mean()), (x,), vjp)

    def mean_axis0(self, x: Tensor) -> Tensor:
        if x.ndim != 2:
            raise DimensionError(f"mean_axis0: rank-{x.ndim} input")
        n = x.shape[0]

        def vjp(g):
            return (np.tile(g / n, (n, 1)),)
        return self._emit(x.data.mean(axis=0), (x,), vjp)

    def max_axis0(self, x: Tensor) -> Tensor:
        """Columnwise maximum over rows; ties route gradient to the first row."""
        if x.ndim != 2:
            raise DimensionError(f"max_axis0: rank-{x.ndim} input")
        arg = x.data.argmax(axis=0)
        shape = x.shape

        def vjp(g):
            out = np.zeros(shape)
            out[arg, np.arange(shape[1])] = g
            return (out,)
        return self._emit(x.data.max(axis=0), (x,), vjp)

    def row(self, x: Tensor, i: int) -> Tensor:
        if x.ndim != 2:
            raise DimensionError(f"row: rank-{x.ndim} input")
        if not 0 <= i < x.shape[0]:
            raise ContractError(f"row index {i} out of range for {x.shape[0]} rows")
        shape = x.shape

        def vjp(g):
            out = np.zeros(shape)
            out[i] = g
            return (out,)
        return self._emit(x.data[i].copy(), (x,), vjp)

    def stack_rows(self, parts: Sequence[Tensor]) -> Tensor:
        if not parts:
            raise ContractError("stack_rows: empty input")
        if any(p.ndim != 1 or p.shape != parts[0].shape for p in parts):
            raise DimensionError("stack_rows: rows must be 1-D and same length")

        def vjp(g):
            return tuple(g[i] for i in range(len(parts)))
        return self._emit(np.stack([p.data for p in parts]), tuple(parts), vjp)

    def concat(self, parts: Sequence[Tensor]) -> Tensor:
        if not parts:
            raise ContractError("concat: empty input")
        if any(p.ndim != 1 for p in parts):
            raise DimensionError("concat: 1-D inputs required")
        sizes = [p.size for p in parts]
        offsets = np.cumsum([0] + sizes)

        def vjp(g):
            return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(parts)))
        return self._emit(np.concatenate([p.data for p in parts]), tuple(parts), vjp)

    def reshape(self, x: Tensor, shape: tuple[int, ...]) -> Tensor:
        old = x.shape

        def vjp(g):
            return (g.reshape(old),)
        return self._emit(x.data.reshape(shape).copy(), (x,), vjp)

    # -- fused losses ---------------------------------------------------------

    def cross_entropy_index(self, logits: Tensor, index: int) -> Tensor:
        """-log softmax(logits)[index] for a 1-D logit vector.

        The normalizer uses exactly rounded summation, so the value is
        invariant under permutations of the logits (with the index permuted
        consistently), and a uniform vector yields log(n) exactly.
        """
        if logits.ndim != 1 or logits.shape[0] < 1:
            raise DimensionError(f"cross_entropy_index: shape {logits.shape}")
        if not 0 <= index < logits.shape[0]:
            raise ContractError(f"target index {index} out of range")
        xv = logits.data
        m = float(xv.max())
        e = np.exp(xv - m)
        denom = math.fsum(e)
        out = (m - xv[index]) + math.log(denom)
        p = e / denom
        onehot = np.zeros_like(xv)
        onehot[index] = 1.0

        def vjp(g):
            return (g * (p - onehot),)
        return self._emit(np.asarray(out), (logits,), vjp)

    def cross_entropy(self, logits: Tensor, targets: np.ndarray) -> Tensor:
        """Mean negative log-likelihood over classification rows.

        ``logits`` has shape (n, c) or (b, n, c) with integer targets of the
        leading shape; 3-D input scores each stacked problem by its own row
        mean and sums the problems, so per-problem gradients do not shrink
        with the stack size.
        """
        if logits.ndim not in (2, 3):
            raise DimensionError(f"cross_entropy: shape {logits.shape}")
        tv = np.asarray(targets)
        if tv.shape != logits.shape[:-1]:
            raise DimensionError(
                f"cross_entropy: targets {tv.shape} vs logits {logits.shape}")
        xv = logits.data
        n = xv.shape[-2]
        m = xv.max(axis=-1, keepdims=True)
        e = np.exp(xv - m)
        z = e.sum(axis=-1, keepdims=True)
        lse = m[..., 0] + np.log(z[..., 0])
        picked = np.take_along_axis(xv, tv[..., None], axis=-1)[..., 0]
        out = (lse - picked).mean(axis=-1).sum()

        p = e / z

        def vjp(g):
            d = p.copy()
            np.put_along_axis(d, tv[..., None],
                              np.take_along_axis(d, tv[..., None], axis=-1) - 1.0,
                              axis=-1)
            return (g * d / n,)
        return self._emit(np.asarray(out), (logits,), vjp)

    def binary_entropy_mean(self, gate: Tensor) -> Tensor:
        """Mean elementwise binary entropy (nats) of values in (0, 1).

        Saturated values are clipped away from {0, 1} before the logs; the
        mean uses exactly rounded summation so a constant 0.5 gate yields
        log(2) exactly.
        """
        gv = np.clip(gate.data, 1e-300, 1.0 - 1e-16)
        h = -(gv * np.log(gv) + (1.0 - gv) * np.log1p(-gv))
        n = gate.size
        out = math.fsum(h.ravel()) / n

        def vjp(g):
            return (g * np.log((1.0 - gv) / gv) / n,)
        return self._emit(np.asarray(out), (gate,), vjp)

    # -- recurrent and attention blocks --------------------------------------

    def gru_cell(self, h_prev: Tensor, x: Tensor, params) -> Tensor:
        """One GRU step; rows are independent lanes.

        z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
        hc = tanh(x Wh + (r * h) Uh + bh), h' = (1 - z) * h + z * hc.
        Accepts matched 1-D vectors or (n, d) matrices.
        """
        if h_prev.ndim != x.ndim or h_prev.ndim not in (1, 2):
            raise DimensionError(f"gru_cell: h {h_prev.shape} vs x {x.shape}")
        squeeze = h_prev.ndim == 1
        if squeeze:
            h_prev = self.reshape(h_prev, (1, h_prev.shape[0]))
            x = self.reshape(x, (1, x.shape[0]))
        d = params.w_z.shape[1]
        if x.shape[1] != params.w_z.shape[0] or h_prev.shape[1] != d:
            raise DimensionError(
                f"gru_cell: x {x.shape}, h {h_prev.shape} vs weights "
                f"{params.w_z.shape}/{params.u_z.shape}")
        z = self.sigmoid(self.add(self.linear(x, params.w_z, params.b_z),
                                  self.matmul(h_prev, params.u_z)))
        r = self.sigmoid(self.add(self.linear(x, params.w_r, params.b_r),
                                  self.matmul(h_prev, params.u_r)))
        hc = self.tanh(self.add(self.linear(x, params.w_h, params.b_h),
                                self.matmul(self.mul(r, h_prev), params.u_h)))
        ones_like = Tensor(np.ones(z.shape))
        h_new = self.add(self.mul(self.sub(ones_like, z), h_prev),
                         self.mul(z, hc))
        if squeeze:
            h_new = self.reshape(h_new, (d,))
        return h_new

    def multi_head_attention(self, q: Tensor, k: Tensor, v: Tensor,
                             params, heads: int) -> Tensor:
        """Scaled dot-product attention with per-head projections.

        Heads are concatenated and passed through the output projection; no
        residual is added. Softmax normalizers and value aggregation use
        exactly rounded sums over keys, making the output rows bitwise
        invariant under a shared permutation of the q/k/v rows.
        """
        if q.ndim != 2 or k.shape != q.shape or v.shape != q.shape:
            raise DimensionError(
                f"attention: q {q.shape}, k {k.shape}, v {v.shape}")
        d = q.shape[1]
        if heads < 1 or d % heads != 0:
            raise ConfigurationError(f"attention: {heads} heads do not divide d={d}")
        if len(params.w_q) != heads:
            raise ConfigurationError(
                f"attention: params carry {len(params.w_q)} heads, expected {heads}")
        dh = d // heads
        for wt in (*params.w_q, *params.w_k, *params.w_v):
            if wt.shape != (d, dh):
                raise DimensionError(f"attention: head weight shape {wt.shape}")
        if params.w_o.shape != (d, d):
            raise DimensionError(f"attention: output weight shape {params.w_o.shape}")

        n = q.shape[0]
        qv, kv, vv = q.data, k.data, v.data
        scale = 1.0 / math.sqrt(dh)
        cache = []
        blocks = np.empty((n, d))
        for h in range(heads):
            qh = qv @ params.w_q[h].data
            kh = kv @ params.w_k[h].data
            vh = vv @ params.w_v[h].data
            scores = (qh @ kh.T) * scale
            m = scores.max(axis=1, keepdims=True)
            e = np.exp(scores - m)
            denom = _fsum_rows(e)[:, None]
            att = e / denom
            outh = np.empty((n, dh))
            for i in range(n):
                for c in range(dh):
                    outh[i, c] = math.fsum(att[i] * vh[:, c])
            blocks[:, h * dh:(h + 1) * dh] = outh
            cache.append((qh, kh, vh, att))
        out = blocks @ params.w_o.data

        inputs = (q, k, v, *params.w_q, *params.w_k, *params.w_v, params.w_o)

        def vjp(g):
            g_wo = blocks.T @ g
            g_blocks = g @ params.w_o.data.T
            gq = np.zeros_like(qv)
            gk = np.zeros_like(kv)
            gv_ = np.zeros_like(vv)
            g_wqs, g_wks, g_wvs = [], [], []
            for h in range(heads):
                qh, kh, vh, att = cache[h]
                g_outh = g_blocks[:, h * dh:(h + 1) * dh]
                g_att = g_outh @ vh.T
                g_vh = att.T @ g_outh
                g_scores = (g_att - (g_att * att).sum(axis=1, keepdims=True)) * att
                g_scores *= scale
                g_qh = g_scores @ kh
                g_kh = g_scores.T @ qh
                g_wqs.append(qv.T @ g_qh)
                g_wks.append(kv.T @ g_kh)
                g_wvs.append(vv.T @ g_vh)
                gq += g_qh @ params.w_q[h].data.T
                gk += g_kh @ params.w_k[h].data.T
                gv_ += g_vh @ params.w_v[h].data.T
            return (gq, gk, gv_, *g_wqs, *g_wks, *g_wvs, g_wo)

        return self._emit(out, inputs, vjp)


def backward(record: ComputationRecord, loss: Tensor) -> GradientMap:
    """Exact reverse-mode gradients of a scalar recorded output.

    Returns gradients for every registered parameter that participates in the
    record; parameters the loss does not depend on get zero gradients.
    """
    if loss.shape != ():
        raise ContractError(f"backward: loss has shape {loss.shape}, expected scalar")
    if id(loss) not in record._produced:
        raise ContractError("backward: loss is not an output of this record")
    adjoint: dict[int, np.ndarray] = {id(loss): np.ones(())}
    for step in reversed(record._steps):
        g = adjoint.get(step.out_id)
        if g is None:
            continue
        for tensor_in, grad_in in zip(step.inputs, step.vjp(g)):
            if grad_in is None:
                continue
            prev = adjoint.get(id(tensor_in))
            adjoint[id(tensor_in)] = grad_in if prev is None else prev + grad_in
    grads = GradientMap()
    for name, p in record._params.items():
        if id(p) in record._consumed:
            g = adjoint.get(id(p))
            grads[name] = Tensor(np.zeros(p.shape) if g is None else g)
    return grads
