"""Reverse-mode automatic differentiation over numpy arrays.

A small tape: every operation records its parents and a closure that routes
the upstream gradient. Exactly the ops the skeleton-regression networks
need are provided (dense/batched matmul, broadcast add/mul, ReLU, reshape,
concat, axis max, same-padded conv2d, 2x2-style max pooling, mean).

Conventions that the gradient checks rely on:
  * everything is float64
  * ReLU subgradient at 0 is 0
  * max/pool ties route the gradient to the first (lowest-index) maximum
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Array node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    # ---- graph construction ------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data + other.data, _parents=(self, other))

        def backward(g):
            return _unbroadcast(g, self.shape), _unbroadcast(g, other.shape)

        out._backward = backward
        return out

    def __sub__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data - other.data, _parents=(self, other))

        def backward(g):
            return _unbroadcast(g, self.shape), _unbroadcast(-g, other.shape)

        out._backward = backward
        return out

    def __mul__(self, other):
        other = _as_tensor(other)
        out = Tensor(self.data * other.data, _parents=(self, other))

        def backward(g):
            return (
                _unbroadcast(g * other.data, self.shape),
                _unbroadcast(g * self.data, other.shape),
            )

        out._backward = backward
        return out

    def __matmul__(self, other):
        other = _as_tensor(other)
        if self.data.ndim < 2 or other.data.ndim < 2:
            raise ValueError("matmul operands must be at least 2-D")
        out = Tensor(np.matmul(self.data, other.data), _parents=(self, other))

        def backward(g):
            ga = np.matmul(g, np.swapaxes(other.data, -1, -2))
            gb = np.matmul(np.swapaxes(self.data, -1, -2), g)
            return _unbroadcast(ga, self.shape), _unbroadcast(gb, other.shape)

        out._backward = backward
        return out

    def relu(self):
        mask = self.data > 0
        out = Tensor(np.where(mask, self.data, 0.0), _parents=(self,))
        out._backward = lambda g: (g * mask,)
        return out

    def reshape(self, shape):
        out = Tensor(self.data.reshape(shape), _parents=(self,))
        out._backward = lambda g: (g.reshape(self.shape),)
        return out

    def mean(self):
        out = Tensor(self.data.mean(), _parents=(self,))
        out._backward = lambda g: (np.full(self.shape, float(g) / self.data.size),)
        return out

    # ---- backprop ----------------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() starts from a scalar loss")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))

        for node in topo:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node._parents, grads):
                parent.grad = parent.grad + g


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), _parents=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    out._backward = backward
    return out


def amax(t: Tensor, axis: int) -> Tensor:
    """Maximum along one axis; gradient flows to the first argmax."""
    t = _as_tensor(t)
    idx = np.expand_dims(np.argmax(t.data, axis=axis), axis)
    out = Tensor(np.take_along_axis(t.data, idx, axis=axis).squeeze(axis), _parents=(t,))

    def backward(g):
        full = np.zeros_like(t.data)
        np.put_along_axis(full, idx, np.expand_dims(g, axis), axis=axis)
        return (full,)

    out._backward = backward
    return out


def conv2d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Stride-1, zero-padded 'same' 2-D convolution (im2col + matmul).

    x: (B, C_in, H, W); w: (C_out, C_in, kh, kw) with odd kh, kw; b: (C_out,).
    """
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    batch, c_in, h, wd = x.data.shape
    c_out, c_in_w, kh, kw = w.data.shape
    if c_in != c_in_w:
        raise ValueError(f"conv2d channel mismatch: input {c_in}, weight {c_in_w}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("conv2d kernels must be odd-sized")
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))

    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(batch * h * wd, c_in * kh * kw)
    wmat = w.data.reshape(c_out, -1)
    out_data = (cols @ wmat.T + b.data).reshape(batch, h, wd, c_out).transpose(0, 3, 1, 2)
    out = Tensor(out_data, _parents=(x, w, b))

    def backward(g):
        g2 = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(batch * h * wd, c_out)
        gw = (g2.T @ cols).reshape(w.data.shape)
        gb = g2.sum(axis=0)
        gwin = (g2 @ wmat).reshape(batch, h, wd, c_in, kh, kw)
        gx_p = np.zeros_like(xp)
        for di in range(kh):
            for dj in range(kw):
                gx_p[:, :, di : di + h, dj : dj + wd] += gwin[:, :, :, :, di, dj].transpose(
                    0, 3, 1, 2
                )
        return gx_p[:, :, ph : ph + h, pw : pw + wd], gw, gb

    out._backward = backward
    return out


def maxpool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping max pooling; trailing rows/cols that do not fill a
    window are dropped (floor semantics)."""
    x = _as_tensor(x)
    batch, ch, h, w = x.data.shape
    h2, w2 = h // size, w // size
    if h2 == 0 or w2 == 0:
        raise ValueError(f"maxpool2d window {size} too large for input {x.data.shape}")
    crop = x.data[:, :, : h2 * size, : w2 * size]
    windows = crop.reshape(batch, ch, h2, size, w2, size).transpose(0, 1, 2, 4, 3, 5)
    flat = windows.reshape(batch, ch, h2, w2, size * size)
    idx = np.argmax(flat, axis=-1)
    out = Tensor(np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0], _parents=(x,))

    def backward(g):
        gflat = np.zeros_like(flat)
        np.put_along_axis(gflat, idx[..., None], g[..., None], axis=-1)
        gwin = gflat.reshape(batch, ch, h2, w2, size, size).transpose(0, 1, 2, 4, 3, 5)
        gx = np.zeros_like(x.data)
        gx[:, :, : h2 * size, : w2 * size] = gwin.reshape(batch, ch, h2 * size, w2 * size)
        return (gx,)

    out._backward = backward
    return out


def mse(pred: Tensor, target) -> Tensor:
    """Mean squared error over every element."""
    pred = _as_tensor(pred)
    target = _as_tensor(target)
    if pred.data.shape != target.data.shape:
        raise ValueError(f"mse shape mismatch: {pred.data.shape} vs {target.data.shape}")
    diff = pred - target
    return (diff * diff).mean()
