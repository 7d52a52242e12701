"""Dense NCHW tensors with reverse-mode differentiation.

Every operation returns a new :class:`Tensor` that remembers its inputs and a
closure mapping the output gradient to input gradients. Calling
:meth:`Tensor.backward` on a scalar builds a :class:`Tape` (the recorded
graph in topological order) and replays it in reverse.

There is no general broadcasting: binary elementwise operations require
identical shapes or a Python scalar operand.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "no_grad",
    "is_grad_enabled",
    "conv2d",
    "pad2d",
    "activation",
    "mish",
    "sigmoid",
    "relu",
    "instance_norm",
    "concat_channels",
    "hadamard",
    "global_avg_pool",
    "channel_scale",
    "reshape",
    "crop",
    "square",
    "sqrt",
    "mean",
    "sum",
    "grad_check",
]

_grad_enabled = True


def is_grad_enabled() -> bool:
    return _grad_enabled


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    """An ndarray plus an optional gradient slot and a link to its producer.

    Network activations are rank 4 (N, C, H, W); losses reduce to rank 0.
    """

    __array_priority__ = 100  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._op = ""

    # -- bookkeeping -----------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.item()) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f", op={self._op}" if self._op else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{tag})"

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every requires_grad leaf.

        Gradients accumulate across calls; use ``zero_grad`` to reset.
        """
        if grad is None:
            if self.data.size != 1 or self.ndim != 0:
                raise ValueError(f"backward() needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        Tape.from_output(self).backward(grad)

    # -- operators -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return hadamard(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return scale(self, 1.0 / other)

    def __neg__(self):
        return neg(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Iterable[Tensor], backward: BackwardFn, op: str) -> Tensor:
    parents = tuple(parents)
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
        out._op = op
    return out


class Tape:
    """Recorded operations reachable from one output, in topological order."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(out, False)]
        # iterative post-order DFS; deep networks would overflow recursion
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in reversed(node._parents):
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, grad: np.ndarray) -> None:
        if not self.nodes:
            return
        out = self.nodes[-1]
        grads: dict[int, np.ndarray] = {id(out): np.asarray(grad, dtype=out.dtype)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def _same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


# -- elementwise ----------------------------------------------------------
def add(a, b) -> Tensor:
    a = _as_tensor(a)
    if not isinstance(b, Tensor):
        return _make(a.data + b, (a,), lambda g: (g,), "add_scalar")
    _same_shape(a, b, "add")
    return _make(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    a = _as_tensor(a)
    if not isinstance(b, Tensor):
        return _make(a.data - b, (a,), lambda g: (g,), "sub_scalar")
    _same_shape(a, b, "sub")
    return _make(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def scale(a: Tensor, c: float) -> Tensor:
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of two identically shaped tensors."""
    _same_shape(a, b, "hadamard")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b), lambda g: (g * bd, g * ad), "hadamard")


def div(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd
    return _make(out, (a, b), lambda g: (g / bd, -g * out / bd), "div")


def square(a: Tensor) -> Tensor:
    ad = a.data
    return _make(ad * ad, (a,), lambda g: (2.0 * g * ad,), "square")


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def sum(a: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape = a.shape
    return _make(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")


def mean(a: Tensor) -> Tensor:
    shape, n = a.shape, a.data.size
    return _make(np.asarray(a.data.mean()), (a,), lambda g: (np.full(shape, g / n, dtype=a.dtype),), "mean")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def crop(a: Tensor, border: int) -> Tensor:
    """Drop ``border`` rows/cols from every spatial edge."""
    if border == 0:
        return a
    shape = a.shape

    def backward(g):
        full = np.zeros(shape, dtype=g.dtype)
        full[..., border:-border, border:-border] = g
        return (full,)

    return _make(a.data[..., border:-border, border:-border].copy(), (a,), backward, "crop")


# -- activations ----------------------------------------------------------
def _softplus(t: np.ndarray) -> np.ndarray:
    # t + log1p(exp(-t)) above 20 keeps exp from overflowing
    big = t > 20
    safe = np.where(big, 0.0, t)
    return np.where(big, t + np.log1p(np.exp(-np.where(big, t, 0.0))), np.log1p(np.exp(safe)))


def _sigmoid(t: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def mish(x: Tensor) -> Tensor:
    t = x.data
    sp = _softplus(t)
    th = np.tanh(sp)
    out = t * th

    def backward(g):
        return (g * (th + t * (1.0 - th * th) * _sigmoid(t)),)

    return _make(out, (x,), backward, "mish")


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0.0).astype(x.dtype), (x,), lambda g: (g * mask,), "relu")


_ACTIVATIONS = {"mish": mish, "sigmoid": sigmoid, "relu": relu}


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}; expected one of {sorted(_ACTIVATIONS)}") from None
    return fn(x)


# -- convolution ----------------------------------------------------------
def pad2d(x: Tensor, pad: int, mode: str = "zeros") -> Tensor:
    """Pad both spatial axes by ``pad`` pixels (``zeros`` or ``replicate``)."""
    if pad == 0:
        return x
    if mode == "zeros":
        data = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))

        def backward(g):
            return (g[:, :, pad:-pad, pad:-pad],)

    elif mode == "replicate":
        data = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="edge")

        def backward(g):
            g = g.copy()
            g[:, :, pad, :] += g[:, :, :pad, :].sum(axis=2)
            g[:, :, -pad - 1, :] += g[:, :, -pad:, :].sum(axis=2)
            g[:, :, :, pad] += g[:, :, :, :pad].sum(axis=3)
            g[:, :, :, -pad - 1] += g[:, :, :, -pad:].sum(axis=3)
            return (g[:, :, pad:-pad, pad:-pad],)

    else:
        raise ValueError(f"unknown padding mode {mode!r}")
    return _make(data, (x,), backward, f"pad_{mode}")


def _correlate_valid(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Valid cross-correlation: (N,Cin,Hp,Wp) x (Cout,Cin,k,k) -> (N,Cout,H,W)."""
    k = w.shape[-1]
    cols = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
    out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))  # N,H,W,Cout
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, padding: int | None = None) -> Tensor:
    """Stride-1 convolution (cross-correlation) with zero padding.

    ``padding=None`` means same-size output, i.e. ``(k - 1) // 2``.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"conv2d expects rank-4 input and weight, got {x.shape} and {w.shape}")
    cout, cin, kh, kw = w.shape
    if kh != kw or kh % 2 == 0:
        raise ValueError(f"conv2d needs an odd square kernel, got {kh}x{kw}")
    if x.shape[1] != cin:
        raise ValueError(f"conv2d channel mismatch: input {x.shape} vs weight {w.shape}")
    if b is not None and b.shape != (cout,):
        raise ValueError(f"conv2d bias shape {b.shape} does not match {cout} output channels")
    k = kh
    pad = (k - 1) // 2 if padding is None else padding
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    if xp.shape[2] < k or xp.shape[3] < k:
        raise ValueError(f"conv2d input {x.shape} smaller than {k}x{k} kernel")
    wd = w.data
    out = _correlate_valid(xp, wd)
    if b is not None:
        out += b.data[None, :, None, None]

    def backward(g):
        gx = gw = gb = None
        if x.requires_grad:
            # full correlation with the spatially flipped, channel-transposed kernel
            gpad = np.pad(g, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
            wflip = np.ascontiguousarray(wd[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
            gxp = _correlate_valid(gpad, wflip)
            gx = gxp[:, :, pad:gxp.shape[2] - pad, pad:gxp.shape[3] - pad] if pad else gxp
        if w.requires_grad:
            cols = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
            gw = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        if b is not None and b.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gw, gb)

    parents = (x, w) if b is None else (x, w, b)
    return _make(out, parents, backward, f"conv{k}x{k}")


# -- normalisation / pooling ---------------------------------------------
def instance_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-(n, c) standardisation followed by a per-channel affine."""
    if x.ndim != 4:
        raise ValueError(f"instance_norm expects rank-4 input, got {x.shape}")
    n, c, h, w = x.shape
    if h * w < 2:
        raise ValueError("instance_norm needs at least two pixels per slice")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"instance_norm affine shapes {gamma.shape}/{beta.shape} do not match C={c}")
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=(2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gd = gamma.data[None, :, None, None]
    out = xhat * gd + beta.data[None, :, None, None]

    def backward(g):
        gxhat = g * gd
        m = h * w
        gx = inv / m * (m * gxhat - gxhat.sum(axis=(2, 3), keepdims=True)
                        - xhat * (gxhat * xhat).sum(axis=(2, 3), keepdims=True))
        ggamma = (g * xhat).sum(axis=(0, 2, 3))
        gbeta = g.sum(axis=(0, 2, 3))
        return (gx, ggamma, gbeta)

    return _make(out, (x, gamma, beta), backward, "instance_norm")


def global_avg_pool(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    m = h * w

    def backward(g):
        return (np.broadcast_to(g / m, x.shape).copy(),)

    return _make(x.data.mean(axis=(2, 3), keepdims=True), (x,), backward, "gap")


def channel_scale(x: Tensor, s: Tensor) -> Tensor:
    """Multiply each (n, c) slice of ``x`` by the matching entry of ``s`` (N,C,1,1)."""
    n, c = x.shape[:2]
    if s.shape != (n, c, 1, 1):
        raise ValueError(f"channel_scale: scale shape {s.shape} does not fit input {x.shape}")
    xd, sd = x.data, s.data

    def backward(g):
        return (g * sd, (g * xd).sum(axis=(2, 3), keepdims=True))

    return _make(xd * sd, (x, s), backward, "channel_scale")


def concat_channels(xs: Sequence[Tensor]) -> Tensor:
    """Stack tensors along the channel axis, preserving argument order."""
    xs = list(xs)
    if len(xs) < 2:
        raise ValueError("concat_channels needs at least two tensors")
    ref = xs[0].shape
    for t in xs[1:]:
        if t.ndim != 4 or (t.shape[0], t.shape[2], t.shape[3]) != (ref[0], ref[2], ref[3]):
            raise ValueError(f"concat_channels: incompatible shapes {ref} and {t.shape}")
    bounds = np.cumsum([0] + [t.shape[1] for t in xs])

    def backward(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(xs)))

    return _make(np.concatenate([t.data for t in xs], axis=1), xs, backward, "concat")


# -- testing helper -------------------------------------------------------
def grad_check(f: Callable[[Tensor], Tensor], x: Tensor | np.ndarray, h: float = 1e-5,
               indices: Iterable[tuple[int, ...]] | None = None) -> float:
    """Max relative error between backprop and central differences of scalar ``f`` at ``x``.

    Error per coordinate is ``|a - n| / max(|a|, |n|, 1e-12)``. ``indices``
    restricts the comparison to a subset of coordinates.
    """
    base = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    xt = Tensor(base.copy(), requires_grad=True)
    f(xt).backward()
    analytic = xt.grad if xt.grad is not None else np.zeros_like(base)

    if indices is None:
        indices = np.ndindex(*base.shape)
    worst = 0.0
    with no_grad():
        for idx in indices:
            plus = base.copy()
            plus[idx] += h
            minus = base.copy()
            minus[idx] -= h
            num = (f(Tensor(plus)).item() - f(Tensor(minus)).item()) / (2 * h)
            a = float(analytic[idx])
            err = abs(a - num) / max(abs(a), abs(num), 1e-12)
            worst = max(worst, err)
    return worst
