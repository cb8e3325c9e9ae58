"""Reverse-mode differentiation over numpy arrays.

A :class:`Tape` records every primitive applied to its :class:`Var` nodes.
``Tape.grad`` walks the record backwards and returns the adjoint of each
registered parameter. Tapes are cheap and meant to be rebuilt per batch.

    tape = Tape()
    w = tape.param("w", np.array(3.0))
    tape.grad((w * w).sum())["w"]   # -> 6.0
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError, InvalidDimensionError


def unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Op:
    """A differentiable primitive. Subclasses define ``forward`` and ``backward``."""

    name = "op"

    @staticmethod
    def forward(*vals, **attrs):
        raise NotImplementedError

    @staticmethod
    def backward(g, out, *vals, **attrs):
        raise NotImplementedError


class Add(Op):
    name = "add"

    @staticmethod
    def forward(a, b):
        return a + b

    @staticmethod
    def backward(g, out, a, b):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)


class Sub(Op):
    name = "sub"

    @staticmethod
    def forward(a, b):
        return a - b

    @staticmethod
    def backward(g, out, a, b):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)


class Mul(Op):
    name = "mul"

    @staticmethod
    def forward(a, b):
        return a * b

    @staticmethod
    def backward(g, out, a, b):
        return unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)


class Neg(Op):
    name = "neg"

    @staticmethod
    def forward(a):
        return -a

    @staticmethod
    def backward(g, out, a):
        return (-g,)


class Square(Op):
    name = "square"

    @staticmethod
    def forward(a):
        return a * a

    @staticmethod
    def backward(g, out, a):
        return (2.0 * g * a,)


class MatMul(Op):
    """``a @ b`` with numpy broadcasting; a 2-D right operand folds into one GEMM."""

    name = "matmul"

    @staticmethod
    def forward(a, b):
        if b.ndim == 2 and a.ndim > 2:
            return (a.reshape(-1, a.shape[-1]) @ b).reshape(*a.shape[:-1], b.shape[-1])
        return np.matmul(a, b)

    @staticmethod
    def backward(g, out, a, b):
        if b.ndim == 2 and a.ndim > 2:
            a2 = a.reshape(-1, a.shape[-1])
            g2 = g.reshape(-1, g.shape[-1])
            return (g2 @ b.T).reshape(a.shape), a2.T @ g2
        ga = np.matmul(g, np.swapaxes(b, -1, -2))
        gb = np.matmul(np.swapaxes(a, -1, -2), g)
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)


class Transpose(Op):
    """Swap the last two axes."""

    name = "transpose"

    @staticmethod
    def forward(a):
        return np.swapaxes(a, -1, -2)

    @staticmethod
    def backward(g, out, a):
        return (np.swapaxes(g, -1, -2),)


class Reshape(Op):
    name = "reshape"

    @staticmethod
    def forward(a, shape):
        return a.reshape(shape)

    @staticmethod
    def backward(g, out, a, shape):
        return (g.reshape(a.shape),)


def _basic_index(idx):
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (slice, int, np.integer)) or i is Ellipsis or i is None for i in items)


class GetItem(Op):
    name = "getitem"

    @staticmethod
    def forward(a, idx):
        return a[idx]

    @staticmethod
    def backward(g, out, a, idx):
        ga = np.zeros_like(a)
        if _basic_index(idx):
            ga[idx] = g
        else:
            np.add.at(ga, idx, g)
        return (ga,)


class Sum(Op):
    name = "sum"

    @staticmethod
    def forward(a, axis=None, keepdims=False):
        return np.sum(a, axis=axis, keepdims=keepdims)

    @staticmethod
    def backward(g, out, a, axis=None, keepdims=False):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)


class Mean(Op):
    name = "mean"

    @staticmethod
    def forward(a, axis=None, keepdims=False):
        return np.mean(a, axis=axis, keepdims=keepdims)

    @staticmethod
    def backward(g, out, a, axis=None, keepdims=False):
        count = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)


class Norm(Op):
    """Euclidean norm over the last axis; the subgradient at 0 is taken as 0."""

    name = "norm"

    @staticmethod
    def forward(a):
        return np.sqrt(np.sum(a * a, axis=-1))

    @staticmethod
    def backward(g, out, a):
        safe = np.where(out > 0.0, out, 1.0)
        scale = np.where(out > 0.0, g / safe, 0.0)
        return (a * scale[..., None],)


class LayerNorm(Op):
    """Normalise over ``axis`` with per-element scale and bias of that axis' length."""

    name = "layer_norm"

    @staticmethod
    def _shape(a, axis):
        shape = [1] * a.ndim
        shape[axis] = a.shape[axis]
        return shape

    @staticmethod
    def forward(x, gamma, beta, axis=-1, eps=1e-6):
        mu = x.mean(axis=axis, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=axis, keepdims=True)
        xhat = xc / np.sqrt(var + eps)
        shape = LayerNorm._shape(x, axis)
        return xhat * gamma.reshape(shape) + beta.reshape(shape)

    @staticmethod
    def backward(g, out, x, gamma, beta, axis=-1, eps=1e-6):
        shape = LayerNorm._shape(x, axis)
        mu = x.mean(axis=axis, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=axis, keepdims=True)
        rstd = 1.0 / np.sqrt(var + eps)
        xhat = xc * rstd
        others = tuple(i for i in range(x.ndim) if i != axis % x.ndim)
        dgamma = (g * xhat).sum(axis=others).reshape(gamma.shape)
        dbeta = g.sum(axis=others).reshape(beta.shape)
        dxhat = g * gamma.reshape(shape)
        dx = rstd * (
            dxhat
            - dxhat.mean(axis=axis, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=axis, keepdims=True)
        )
        return dx, dgamma, dbeta


class Tanh(Op):
    name = "tanh"

    @staticmethod
    def forward(a):
        return np.tanh(a)

    @staticmethod
    def backward(g, out, a):
        return (g * (1.0 - out * out),)


class SoftmaxCrossEntropy(Op):
    """Per-row ``-log softmax(z)[label]`` with max-subtraction."""

    name = "softmax_ce"

    @staticmethod
    def _logp(z):
        top = np.argmax(z, axis=-1)[..., None]
        shifted = z - np.take_along_axis(z, top, axis=-1)
        rest = np.exp(shifted)
        np.put_along_axis(rest, top, 0.0, axis=-1)
        # log1p keeps tiny tail mass that log(1 + tail) would round away
        return shifted - np.log1p(rest.sum(axis=-1, keepdims=True))

    @staticmethod
    def forward(z, labels):
        logp = SoftmaxCrossEntropy._logp(z)
        return -logp[np.arange(z.shape[0]), labels]

    @staticmethod
    def backward(g, out, z, labels):
        p = np.exp(SoftmaxCrossEntropy._logp(z))
        p[np.arange(z.shape[0]), labels] -= 1.0
        return (g[:, None] * p,)


class Var:
    """A node on a :class:`Tape`. Arithmetic operators record primitives."""

    __slots__ = ("tape", "index", "value", "requires_grad")
    __array_priority__ = 100

    def __init__(self, tape, index, value, requires_grad):
        self.tape = tape
        self.index = index
        self.value = value
        self.requires_grad = requires_grad

    shape = property(lambda self: self.value.shape)
    ndim = property(lambda self: self.value.ndim)

    def __repr__(self):
        return f"Var(shape={self.shape}, index={self.index})"

    def _lift(self, other):
        return other if isinstance(other, Var) else self.tape.const(other)

    def __add__(self, other):
        return self.tape.apply(Add, self, self._lift(other))

    def __radd__(self, other):
        return self.tape.apply(Add, self._lift(other), self)

    def __sub__(self, other):
        return self.tape.apply(Sub, self, self._lift(other))

    def __rsub__(self, other):
        return self.tape.apply(Sub, self._lift(other), self)

    def __mul__(self, other):
        return self.tape.apply(Mul, self, self._lift(other))

    def __rmul__(self, other):
        return self.tape.apply(Mul, self._lift(other), self)

    def __neg__(self):
        return self.tape.apply(Neg, self)

    def __matmul__(self, other):
        return self.tape.apply(MatMul, self, self._lift(other))

    def __rmatmul__(self, other):
        return self.tape.apply(MatMul, self._lift(other), self)

    def __getitem__(self, idx):
        return self.tape.apply(GetItem, self, idx=idx)

    @property
    def T(self):
        return self.tape.apply(Transpose, self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return self.tape.apply(Reshape, self, shape=tuple(shape))

    def sum(self, axis=None, keepdims=False):
        return self.tape.apply(Sum, self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return self.tape.apply(Mean, self, axis=axis, keepdims=keepdims)

    def square(self):
        return self.tape.apply(Square, self)


class Tape:
    """Ordered record of primitive applications.

    With ``record=False`` operations still compute values but nothing is kept,
    which is what inference uses.
    """

    def __init__(self, record=True):
        self.record = record
        self.values = []
        self.needs = []
        self.ops = []  # (op, input ids, output id, attrs)
        self.params = {}

    def _node(self, value, requires_grad):
        if not self.record:
            return Var(self, -1, value, requires_grad)
        self.values.append(value)
        self.needs.append(requires_grad)
        return Var(self, len(self.values) - 1, value, requires_grad)

    def param(self, name, value):
        if name in self.params:
            raise ContractError(f"parameter {name!r} registered twice")
        var = self._node(np.asarray(value, dtype=np.float64), True)
        # an inference tape keeps names only, so no tape <-> Var cycle outlives the call
        self.params[name] = var if self.record else None
        return var

    def const(self, value):
        return self._node(np.asarray(value, dtype=np.float64), False)

    def apply(self, op, *inputs, **attrs):
        for v in inputs:
            if v.tape is not self:
                raise ContractError("operands live on different tapes")
        out = op.forward(*(v.value for v in inputs), **attrs)
        needs = any(v.requires_grad for v in inputs)
        var = self._node(out, needs)
        if self.record:
            self.ops.append((op, tuple(v.index for v in inputs), var.index, attrs))
        return var

    def backward(self, output):
        """Return the list of adjoints for every node (``None`` means zero)."""
        if not self.record:
            raise ContractError("tape was created with record=False")
        if output.tape is not self:
            raise ContractError("output belongs to another tape")
        if np.ndim(output.value) != 0:
            raise ContractError(f"grad needs a scalar output, got shape {np.shape(output.value)}")
        adj = [None] * len(self.values)
        adj[output.index] = np.ones_like(output.value)
        for op, ins, out, attrs in reversed(self.ops):
            g = adj[out]
            if g is None or not self.needs[out]:
                continue
            grads = op.backward(g, self.values[out], *(self.values[i] for i in ins), **attrs)
            for i, gi in zip(ins, grads):
                if gi is None or not self.needs[i]:
                    continue
                adj[i] = gi if adj[i] is None else adj[i] + gi
        return adj

    def grad(self, output):
        """Adjoint of ``output`` with respect to every registered parameter."""
        adj = self.backward(output)
        return {
            name: (np.zeros_like(v.value) if adj[v.index] is None else adj[v.index])
            for name, v in self.params.items()
        }

    def replay(self):
        """Recompute all node values from the leaves; returns the new value list."""
        vals = list(self.values)
        for op, ins, out, attrs in self.ops:
            vals[out] = op.forward(*(vals[i] for i in ins), **attrs)
        return vals


def matmul(a, b):
    return a @ b


def transpose(a):
    return a.T


def layer_norm(x, gamma, beta, axis=-1, eps=1e-6):
    return x.tape.apply(LayerNorm, x, gamma, beta, axis=axis, eps=eps)


def norm(x):
    return x.tape.apply(Norm, x)


def tanh(x):
    return x.tape.apply(Tanh, x)


def softmax_cross_entropy(logits, labels):
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise InvalidDimensionError(
            f"logits {logits.shape} and labels {labels.shape} do not line up"
        )
    return logits.tape.apply(SoftmaxCrossEntropy, logits, labels=labels)
