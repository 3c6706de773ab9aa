"""Minimal reverse-mode automatic differentiation over numpy arrays.

Just enough machinery for the graph encoder and the contrastive/cross-entropy
objectives: a taped Tensor, a handful of primitives with hand-written
backward rules, a finite-difference gradient checker, and Adam. Everything
runs in float64 by default so the gradient checker can use tight tolerances.

No operation mutates its inputs; gradients accumulate additively when a
tensor feeds several downstream ops.
"""

from __future__ import annotations

import numpy as np

from .errors import BadLength, NonFinite, ShapeMismatch


class Tensor:
    """Array node in a computation graph recorded on the fly."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, value, requires_grad=False, parents=(), backward=None):
        arr = np.asarray(value)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.value = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def T(self):
        return transpose(self)

    def item(self):
        return float(self.value)

    def backward(self):
        """Reverse-accumulate d(self)/d(leaf) into every reachable .grad."""
        if self.value.size != 1:
            raise ShapeMismatch("backward() requires a scalar output")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accumulate(self, g):
        # copy on first write: g may alias an upstream gradient buffer
        if self.grad is None:
            self.grad = np.array(g)
        else:
            self.grad += g

    # operator sugar; constants are lifted automatically
    def __add__(self, other):
        return add(self, as_tensor(other))

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __neg__(self):
        return mul(self, as_tensor(-1.0))

    def __sub__(self, other):
        return add(self, -as_tensor(other))

    def __rsub__(self, other):
        return add(as_tensor(other), -self)

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    def __repr__(self):
        tag = " param" if isinstance(self, Parameter) else ""
        return f"Tensor(shape={self.value.shape}{tag})"


class Parameter(Tensor):
    """Named trainable tensor; gradients persist until zero_grad()."""

    __slots__ = ("name",)

    def __init__(self, name, value):
        super().__init__(np.array(value, dtype=np.float64), requires_grad=True)
        self.name = name

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracked(value, parents, backward):
    needs = any(p.requires_grad for p in parents)
    return Tensor(value, requires_grad=needs, parents=tuple(parents), backward=backward if needs else None)


def _unbroadcast(grad, shape):
    """Reduce a broadcasted gradient back to `shape`."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value + b.value

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _tracked(out_val, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_val = a.value * b.value

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.shape))

    return _tracked(out_val, (a, b), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul shapes incompatible: {a.shape} @ {b.shape}")
    out_val = a.value @ b.value

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.value.T)
        if b.requires_grad:
            b._accumulate(a.value.T @ g)

    return _tracked(out_val, (a, b), backward)


def transpose(a):
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeMismatch(f"transpose expects a 2-D tensor, got {a.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.T)

    return _tracked(a.value.T.copy(), (a,), backward)


def reshape(a, shape):
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.shape))

    return _tracked(a.value.reshape(shape), (a,), backward)


def relu(a):
    a = as_tensor(a)
    keep = a.value > 0  # subgradient 0 at the kink

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * keep)

    return _tracked(np.where(keep, a.value, 0.0), (a,), backward)


def exp(a):
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out_val = np.exp(a.value)
    if not np.all(np.isfinite(out_val)):
        raise NonFinite("exp overflow")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out_val)

    return _tracked(out_val, (a,), backward)


def minimum_const(a, cap):
    """Elementwise min(a, cap); gradient passes only where a < cap."""
    a = as_tensor(a)
    keep = a.value < cap

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * keep)

    return _tracked(np.minimum(a.value, cap), (a,), backward)


def mean_all(a):
    a = as_tensor(a)
    n = a.value.size

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full(a.shape, float(g) / n))

    return _tracked(np.asarray(a.value.mean()), (a,), backward)


def sum_all(a):
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full(a.shape, float(g)))

    return _tracked(np.asarray(a.value.sum()), (a,), backward)


def log_softmax_rows(a):
    """Row-wise log-softmax of an (N, D) tensor, log-sum-exp stabilized."""
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeMismatch(f"log_softmax_rows expects (N, D), got {a.shape}")
    if not np.all(np.isfinite(a.value)):
        raise NonFinite("log_softmax input contains NaN or Inf")
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out_val = shifted - lse
    softmax = np.exp(out_val)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g - softmax * g.sum(axis=1, keepdims=True))

    return _tracked(out_val, (a,), backward)


def take_diag(a):
    a = as_tensor(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"take_diag expects a square matrix, got {a.shape}")

    def backward(g):
        if a.requires_grad:
            full = np.zeros(a.shape)
            np.fill_diagonal(full, g)
            a._accumulate(full)

    return _tracked(np.diagonal(a.value).copy(), (a,), backward)


def pick_rows(a, indices):
    """out[i] = a[i, indices[i]] for an (N, D) tensor; used by cross-entropy."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    if a.ndim != 2 or idx.shape != (a.shape[0],):
        raise ShapeMismatch("pick_rows expects (N, D) values and N indices")
    rows = np.arange(a.shape[0])

    def backward(g):
        if a.requires_grad:
            full = np.zeros(a.shape)
            full[rows, idx] = g
            a._accumulate(full)

    return _tracked(a.value[rows, idx].copy(), (a,), backward)


def stack_rows(tensors):
    """Stack k same-shape tensors along a new leading axis."""
    tensors = [as_tensor(t) for t in tensors]

    def backward(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accumulate(g[i])

    return _tracked(np.stack([t.value for t in tensors]), tuple(tensors), backward)


def embedding_mean(table, indices):
    """Mean of selected table rows; repeated indices accumulate correctly."""
    table = as_tensor(table)
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ShapeMismatch("embedding_mean needs a nonempty 1-D index list")
    n = idx.size

    def backward(g):
        if table.requires_grad:
            full = np.zeros(table.shape)
            np.add.at(full, idx, g / n)
            table._accumulate(full)

    return _tracked(table.value[idx].mean(axis=0), (table,), backward)


# ---------------------------------------------------------------------------
# Structured ops for the C x T x V graph tensors
# ---------------------------------------------------------------------------


def _as_cols(x4d):
    """(B,C,T,V) -> contiguous (C, B*T*V) column matrix."""
    b, c, t, v = x4d.shape
    return np.ascontiguousarray(x4d.transpose(1, 0, 2, 3)).reshape(c, b * t * v)


def _from_cols(cols, b, t, v):
    """(O, B*T*V) -> (B,O,T,V)."""
    o = cols.shape[0]
    return np.ascontiguousarray(cols.reshape(o, b, t, v).transpose(1, 0, 2, 3))


def graph_conv(x, w, adj_norm):
    """Spatial graph convolution: sum_k Phi_k (x @ A_hat_k).

    x: (B,C,T,V) tensor; w: (K,O,C) weights; adj_norm: constant (K,V,V)
    stack of symmetrically normalized adjacency matrices.
    """
    x, w = as_tensor(x), as_tensor(w)
    adj = np.asarray(adj_norm, dtype=np.float64)
    if x.ndim != 4 or w.ndim != 3 or adj.ndim != 3:
        raise ShapeMismatch("graph_conv expects x (B,C,T,V), w (K,O,C), adj (K,V,V)")
    k_s = adj.shape[0]
    if w.shape[0] != k_s or w.shape[2] != x.shape[1] or adj.shape[1:] != (x.shape[3],) * 2:
        raise ShapeMismatch(
            f"graph_conv shape mismatch: x {x.shape}, w {w.shape}, adj {adj.shape}"
        )
    b, c, t, v = x.shape
    o = w.shape[1]
    xa_cols = [_as_cols(x.value @ adj[k]) for k in range(k_s)]
    acc = w.value[0] @ xa_cols[0]
    for k in range(1, k_s):
        acc += w.value[k] @ xa_cols[k]
    out_val = _from_cols(acc, b, t, v)

    def backward(g):
        g_cols = _as_cols(g)
        if w.requires_grad:
            dw = np.stack([g_cols @ xa_cols[k].T for k in range(k_s)])
            w._accumulate(dw)
        if x.requires_grad:
            dx = np.zeros(x.shape)
            for k in range(k_s):
                dx += _from_cols(w.value[k].T @ g_cols, b, t, v) @ adj[k].T
            x._accumulate(dx)

    return _tracked(out_val, (x, w), backward)


def _conv_cols(values, k):
    """(B,C,T,V) -> im2col matrix (C*K, B*T*V) of zero-padded windows."""
    b, c, t, v = values.shape
    pad = (k - 1) // 2
    xp = np.zeros((b, c, t + k - 1, v))
    xp[:, :, pad : pad + t, :] = values
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)  # (B,C,T,V,K)
    return np.ascontiguousarray(win.transpose(1, 4, 0, 2, 3)).reshape(c * k, b * t * v)


def _conv_same(values, kernel, cols=None):
    """Same-length temporal convolution as one GEMM; returns ((B,O,T,V), cols)."""
    b, _, t, v = values.shape
    o, c, k = kernel.shape
    if cols is None:
        cols = _conv_cols(values, k)
    out = kernel.reshape(o, c * k) @ cols
    return _from_cols(out, b, t, v), cols


def time_conv(x, w):
    """Temporal convolution with a (O,C,K) kernel, zero-padded to keep T."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 3:
        raise ShapeMismatch("time_conv expects x (B,C,T,V) and w (O,C,K)")
    b, c, t, v = x.shape
    o, c2, k = w.shape
    if c2 != c:
        raise ShapeMismatch(f"kernel expects {c2} input channels, tensor has {c}")
    if k % 2 != 1:
        raise ShapeMismatch(f"temporal kernel size must be odd, got {k}")
    out_val, cols = _conv_same(x.value, w.value)

    def backward(g):
        if w.requires_grad:
            g_cols = _as_cols(g)
            w._accumulate((g_cols @ cols.T).reshape(w.shape))
        if x.requires_grad:
            # gradient wrt input is the same conv with the flipped, transposed kernel
            w_flip = np.ascontiguousarray(w.value[:, :, ::-1].transpose(1, 0, 2))
            x._accumulate(_conv_same(g, w_flip)[0])

    return _tracked(out_val, (x, w), backward)


def channel_affine(x, scale, shift):
    """Per-channel learnable scale and shift on a (B,C,T,V) tensor."""
    x, scale, shift = as_tensor(x), as_tensor(scale), as_tensor(shift)
    c = x.shape[1]
    if scale.shape != (c,) or shift.shape != (c,):
        raise ShapeMismatch(f"affine parameters must have shape ({c},)")
    s = scale.value[None, :, None, None]
    out_val = x.value * s + shift.value[None, :, None, None]

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * s)
        if scale.requires_grad:
            scale._accumulate(np.einsum("bctv,bctv->c", g, x.value))
        if shift.requires_grad:
            shift._accumulate(g.sum(axis=(0, 2, 3)))

    return _tracked(out_val, (x, scale, shift), backward)


def pool_time_joints(x, valid_t=None):
    """Mean over joints and the first valid_t timesteps: (B,C,T,V) -> (B,C)."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise ShapeMismatch(f"pool expects (B,C,T,V), got {x.shape}")
    t = x.shape[2]
    vt = t if valid_t is None else int(valid_t)
    if not (1 <= vt <= t):
        raise BadLength(f"valid_t must be in [1, {t}], got {valid_t}")
    denom = vt * x.shape[3]
    out_val = x.value[:, :, :vt, :].sum(axis=(2, 3)) / denom

    def backward(g):
        if x.requires_grad:
            dx = np.zeros(x.shape)
            dx[:, :, :vt, :] = g[:, :, None, None] / denom
            x._accumulate(dx)

    return _tracked(out_val, (x,), backward)


def linear(x, w, b):
    """Dense layer (B,C) @ (C,E) + (E,)."""
    return add(matmul(x, w), b)


# ---------------------------------------------------------------------------
# Gradient checking and optimization
# ---------------------------------------------------------------------------


def grad_check(fn, params, eps=1e-5):
    """Max relative error of backward gradients vs central differences.

    fn rebuilds the (deterministic, scalar-valued) computation from the
    current parameter values. Every coordinate of every parameter is
    perturbed by +/- eps; relative error is |a - n| / max(|a|, |n|, 1e-8).
    """
    for p in params:
        p.zero_grad()
    loss = fn()
    loss.backward()
    analytic = [np.zeros(p.shape) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, an in zip(params, analytic):
        flat = p.value.reshape(-1)
        an_flat = an.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(fn().value)
            flat[i] = orig - eps
            f_minus = float(fn().value)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(an_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(an_flat[i] - numeric) / denom)
    return worst


class Adam:
    """Bias-corrected Adam over a fixed parameter list; fully deterministic."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros(p.shape) for p in self.params]
        self._v = [np.zeros(p.shape) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad if p.grad is not None else np.zeros(p.shape)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
