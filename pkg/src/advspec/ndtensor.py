"""Dense float64 tensors with reverse-mode automatic differentiation.

Combining tensors records a DAG of primitive operations. ``Tape.trace``
linearizes that DAG; replaying it in reverse drives both first-order
gradients (``backward``) and higher-order ones (``grad`` with
``create_graph=True``). Higher-order differentiation works because every
backward rule is itself written in terms of the primitives in this module,
so replaying a backward pass can record a new graph.

Double-backward is supported for the closure of operations used by the
critic networks: matmul, unfold1d/fold1d (the conv building blocks),
relu/leaky_relu, the smooth elementwise ops, reductions and the shape ops.
``max_last`` treats its argmax selection as a constant, the usual
convention for piecewise-linear ops.

Everything is float64 and single-threaded; identical inputs give
bit-identical outputs.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "GradientError",
    "no_grad",
    "add",
    "sub",
    "mul",
    "scale",
    "neg",
    "pow_const",
    "sqrt",
    "matmul",
    "transpose",
    "reshape",
    "broadcast_to",
    "sum",
    "mean",
    "relu",
    "leaky_relu",
    "tanh",
    "sigmoid",
    "exp",
    "log",
    "maximum_const",
    "slice_axis",
    "pad_axis",
    "max_last",
    "unfold1d",
    "fold1d",
    "conv1d",
    "conv1d_transpose",
    "backward",
    "grad",
    "grad_norm_of_output_wrt_input",
]


class ShapeError(ValueError):
    """Operand shapes cannot be combined."""


class GradientError(RuntimeError):
    """Invalid backward request (non-scalar root, repeated backward, ...)."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the context."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class _Op:
    """One recorded primitive: inputs plus a backward rule.

    ``backward`` maps the output gradient (a Tensor) to one gradient per
    input, each a Tensor or None for a constant input.
    """

    __slots__ = ("name", "inputs", "backward")

    def __init__(self, name: str, inputs: tuple["Tensor", ...], backward: Callable):
        self.name = name
        self.inputs = inputs
        self.backward = backward


class Tensor:
    """Dense n-dimensional float64 array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad", "_op", "_backward_done")

    # keep numpy from hijacking the arithmetic dunders
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._op: Optional[_Op] = None
        self._backward_done = False

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else self._not_scalar()

    def _not_scalar(self):
        raise GradientError(f"expected a scalar tensor, got shape {self.shape}")

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        backward(self)

    # ergonomics
    def reshape(self, shape) -> "Tensor":
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False) -> "Tensor":
        return sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{req})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __truediv__(self, other):
        return mul(self, pow_const(_lift(other), -1.0))

    def __rtruediv__(self, other):
        return mul(_lift(other), pow_const(self, -1.0))

    def __pow__(self, p):
        return pow_const(self, p)

    def __matmul__(self, other):
        return matmul(self, other)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, inputs: tuple, backward_fn: Callable, name: str) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._op = _Op(name, inputs, backward_fn)
    return out


class Tape:
    """Ordered record of the primitive operations feeding a result tensor.

    Nodes are stored in topological order (inputs before consumers, result
    last), so iterating in reverse visits the graph in reverse topological
    order. Only tensors on a gradient-requiring path are recorded.
    """

    __slots__ = ("nodes",)

    def __init__(self, nodes: list):
        self.nodes = nodes

    @staticmethod
    def trace(result: Tensor) -> "Tape":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(result, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                order.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            if t._op is not None:
                for inp in t._op.inputs:
                    if inp.requires_grad and id(inp) not in seen:
                        stack.append((inp, False))
        return Tape(order)

    def __len__(self) -> int:
        return len([t for t in self.nodes if t._op is not None])

    def replay_backward(self, seed: Tensor, create_graph: bool = False) -> dict:
        """Accumulate gradients for every node, result seeded with ``seed``.

        Returns a mapping keyed by node id; values are (tensor, grad Tensor)
        pairs. Gradients of shared subexpressions sum.
        """
        root = self.nodes[-1]
        grads: dict[int, Tensor] = {id(root): seed}
        ctx = contextlib.nullcontext() if create_graph else no_grad()
        with ctx:
            for t in reversed(self.nodes):
                g = grads.get(id(t))
                if g is None or t._op is None:
                    continue
                input_grads = t._op.backward(g)
                for inp, ig in zip(t._op.inputs, input_grads):
                    if ig is None or not inp.requires_grad:
                        continue
                    prev = grads.get(id(inp))
                    grads[id(inp)] = ig if prev is None else add(prev, ig)
        return {id(t): (t, grads[id(t)]) for t in self.nodes if id(t) in grads}


def backward(loss: Tensor) -> None:
    """Fill ``.grad`` on every gradient-requiring ancestor of a scalar loss.

    Gradients accumulate into any existing ``.grad``. Calling backward a
    second time on the same tensor raises.
    """
    if loss.size != 1:
        raise GradientError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss._backward_done:
        raise GradientError("backward already called on this tensor; rebuild the graph first")
    if not loss.requires_grad:
        raise GradientError("loss does not depend on any tensor with requires_grad")
    tape = Tape.trace(loss)
    table = tape.replay_backward(Tensor(np.ones_like(loss.data)), create_graph=False)
    for t, g in table.values():
        t.grad = g.data if t.grad is None else t.grad + g.data
    loss._backward_done = True


def grad(output: Tensor, inputs: Sequence[Tensor], create_graph: bool = False) -> tuple:
    """Gradients of a scalar output w.r.t. ``inputs``, without touching ``.grad``.

    With ``create_graph=True`` the returned tensors are themselves recorded,
    so they can be differentiated again (used by the Lipschitz penalty).
    """
    if output.size != 1:
        raise GradientError(f"grad requires a scalar output, got shape {output.shape}")
    if not output.requires_grad:
        return tuple(Tensor(np.zeros_like(i.data)) for i in inputs)
    tape = Tape.trace(output)
    table = tape.replay_backward(Tensor(np.ones_like(output.data)), create_graph=create_graph)
    out = []
    for inp in inputs:
        hit = table.get(id(inp))
        out.append(hit[1] if hit is not None else Tensor(np.zeros_like(inp.data)))
    return tuple(out)


# ---------------------------------------------------------------------------
# elementwise and scalar-broadcast arithmetic
# ---------------------------------------------------------------------------


def _check_broadcast(sa: tuple, sb: tuple, opname: str) -> None:
    if sa == sb:
        return
    if int(np.prod(sa)) == 1 or int(np.prod(sb)) == 1:
        return
    raise ShapeError(
        f"{opname}: cannot combine shapes {sa} and {sb}; "
        "only same-shape and scalar broadcasting are supported"
    )


def _sum_to(g: Tensor, shape: tuple) -> Tensor:
    if g.shape == shape:
        return g
    return reshape(sum(g), shape)


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a.shape, b.shape, "add")

    def bwd(g):
        return _sum_to(g, a.shape), _sum_to(g, b.shape)

    return _result(a.data + b.data, (a, b), bwd, "add")


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a.shape, b.shape, "sub")

    def bwd(g):
        return _sum_to(g, a.shape), _sum_to(neg(g), b.shape)

    return _result(a.data - b.data, (a, b), bwd, "sub")


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a.shape, b.shape, "mul")

    def bwd(g):
        return _sum_to(mul(g, b), a.shape), _sum_to(mul(g, a), b.shape)

    return _result(a.data * b.data, (a, b), bwd, "mul")


def scale(a, c: float) -> Tensor:
    """Multiply by a plain python scalar (not a graph node)."""
    a = _lift(a)
    c = float(c)

    def bwd(g):
        return (scale(g, c),)

    return _result(a.data * c, (a,), bwd, "scale")


def neg(a) -> Tensor:
    a = _lift(a)

    def bwd(g):
        return (neg(g),)

    return _result(-a.data, (a,), bwd, "neg")


def pow_const(a, p: float) -> Tensor:
    """Elementwise power with a constant exponent.

    Fractional exponents require nonnegative entries.
    """
    a = _lift(a)
    p = float(p)
    if p == 0.0:
        return _result(np.ones_like(a.data), (a,), lambda g: (None,), "pow0")
    if p != int(p) and np.any(a.data < 0.0):
        raise ValueError(f"pow_const: fractional exponent {p} of negative entries")

    def bwd(g):
        return (mul(g, scale(pow_const(a, p - 1.0), p)),)

    return _result(a.data**p, (a,), bwd, "pow")


def sqrt(a) -> Tensor:
    return pow_const(a, 0.5)


def maximum_const(a, c: float) -> Tensor:
    """Elementwise max with a constant; gradient is zero where clamped."""
    a = _lift(a)
    c = float(c)
    keep = Tensor((a.data > c).astype(np.float64))

    def bwd(g):
        return (mul(g, keep),)

    return _result(np.maximum(a.data, c), (a,), bwd, "maximum_const")


# ---------------------------------------------------------------------------
# linear algebra and shape ops
# ---------------------------------------------------------------------------


def _swap_last(t: Tensor) -> Tensor:
    axes = tuple(range(t.ndim - 2)) + (t.ndim - 1, t.ndim - 2)
    return transpose(t, axes)


def matmul(a, b) -> Tensor:
    """Matrix product; one operand may carry a leading batch axis."""
    a, b = _lift(a), _lift(b)
    if not (2 <= a.ndim <= 3 and 2 <= b.ndim <= 3):
        raise ShapeError(f"matmul: expected 2-D or 3-D tensors, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions disagree for {a.shape} and {b.shape}")
    if a.ndim == 3 and b.ndim == 3 and a.shape[0] != b.shape[0]:
        raise ShapeError(f"matmul: batch dimensions disagree for {a.shape} and {b.shape}")

    def bwd(g):
        ga = matmul(g, _swap_last(b))
        if ga.ndim > a.ndim:
            ga = sum(ga, axis=0)
        gb = matmul(_swap_last(a), g)
        if gb.ndim > b.ndim:
            gb = sum(gb, axis=0)
        return ga, gb

    return _result(a.data @ b.data, (a, b), bwd, "matmul")


def transpose(a, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = _lift(a)
    if axes is None:
        axes = tuple(range(a.ndim))[::-1]
    axes = tuple(int(x) for x in axes)
    inv = tuple(int(x) for x in np.argsort(axes))

    def bwd(g):
        return (transpose(g, inv),)

    return _result(a.data.transpose(axes), (a,), bwd, "transpose")


def reshape(a, shape) -> Tensor:
    a = _lift(a)
    shape = tuple(int(s) for s in (shape if isinstance(shape, Iterable) else (shape,)))
    src = a.shape

    def bwd(g):
        return (reshape(g, src),)

    return _result(a.data.reshape(shape), (a,), bwd, "reshape")


def broadcast_to(a, shape) -> Tensor:
    a = _lift(a)
    shape = tuple(int(s) for s in shape)
    extra = len(shape) - a.ndim
    if extra < 0:
        raise ShapeError(f"broadcast_to: cannot shrink {a.shape} to {shape}")
    for i, d in enumerate(a.shape):
        if d != shape[extra + i] and d != 1:
            raise ShapeError(f"broadcast_to: {a.shape} is incompatible with {shape}")
    axes = tuple(range(extra)) + tuple(
        extra + i for i, d in enumerate(a.shape) if d == 1 and shape[extra + i] != 1
    )

    def bwd(g):
        s = sum(g, axis=axes, keepdims=True) if axes else g
        return (reshape(s, a.shape),)

    return _result(np.broadcast_to(a.data, shape), (a,), bwd, "broadcast_to")


def _norm_axes(axis, ndim: int) -> Optional[tuple]:
    if axis is None:
        return None
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    axes = _norm_axes(axis, a.ndim)
    data = a.data.sum(axis=axes, keepdims=keepdims)

    def bwd(g):
        kd = list(a.shape)
        for ax in axes if axes is not None else range(a.ndim):
            kd[ax] = 1
        return (broadcast_to(reshape(g, tuple(kd)), a.shape),)

    return _result(data, (a,), bwd, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    axes = _norm_axes(axis, a.ndim)
    count = a.size if axes is None else int(np.prod([a.shape[ax] for ax in axes]))
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def slice_axis(a, axis: int, start: int, stop: int) -> Tensor:
    a = _lift(a)
    axis = axis % a.ndim
    if not (0 <= start < stop <= a.shape[axis]):
        raise ShapeError(f"slice_axis: [{start}:{stop}] out of range for axis {axis} of {a.shape}")
    idx = tuple(slice(start, stop) if i == axis else slice(None) for i in range(a.ndim))

    def bwd(g):
        return (pad_axis(g, axis, start, a.shape[axis] - stop),)

    return _result(a.data[idx], (a,), bwd, "slice_axis")


def pad_axis(a, axis: int, before: int, after: int) -> Tensor:
    a = _lift(a)
    axis = axis % a.ndim
    if before < 0 or after < 0:
        raise ShapeError("pad_axis: negative pad width")
    width = [(0, 0)] * a.ndim
    width[axis] = (before, after)

    def bwd(g):
        return (slice_axis(g, axis, before, before + a.shape[axis]),)

    return _result(np.pad(a.data, width), (a,), bwd, "pad_axis")


# ---------------------------------------------------------------------------
# smooth elementwise nonlinearities
# ---------------------------------------------------------------------------


def relu(a) -> Tensor:
    a = _lift(a)
    keep = Tensor((a.data > 0.0).astype(np.float64))

    def bwd(g):
        return (mul(g, keep),)

    return _result(np.maximum(a.data, 0.0), (a,), bwd, "relu")


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = _lift(a)
    fac_data = np.where(a.data > 0.0, 1.0, float(slope))
    fac = Tensor(fac_data)

    def bwd(g):
        return (mul(g, fac),)

    return _result(a.data * fac_data, (a,), bwd, "leaky_relu")


def tanh(a) -> Tensor:
    a = _lift(a)
    out = _result(np.tanh(a.data), (a,), None, "tanh")
    if out._op is not None:
        out._op.backward = lambda g: (mul(g, sub(Tensor(1.0), mul(out, out))),)
    return out


def sigmoid(a) -> Tensor:
    a = _lift(a)
    x = a.data
    data = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = _result(data, (a,), None, "sigmoid")
    if out._op is not None:
        out._op.backward = lambda g: (mul(g, mul(out, sub(Tensor(1.0), out))),)
    return out


def exp(a) -> Tensor:
    a = _lift(a)
    out = _result(np.exp(a.data), (a,), None, "exp")
    if out._op is not None:
        out._op.backward = lambda g: (mul(g, out),)
    return out


def log(a) -> Tensor:
    a = _lift(a)
    if np.any(a.data <= 0.0):
        raise ValueError("log of non-positive entry")

    def bwd(g):
        return (mul(g, pow_const(a, -1.0)),)

    return _result(np.log(a.data), (a,), bwd, "log")


def max_last(a) -> Tensor:
    """Max over the last axis; gradient routes to the (first) argmax."""
    a = _lift(a)
    idx = a.data.argmax(axis=-1)
    onehot = np.zeros_like(a.data)
    np.put_along_axis(onehot, idx[..., None], 1.0, axis=-1)
    sel = Tensor(onehot)

    def bwd(g):
        return (mul(broadcast_to(reshape(g, g.shape + (1,)), a.shape), sel),)

    return _result(np.take_along_axis(a.data, idx[..., None], axis=-1)[..., 0], (a,), bwd, "max_last")


# ---------------------------------------------------------------------------
# 1-D convolution building blocks
# ---------------------------------------------------------------------------


def _unfold_index(length_padded: int, kernel: int, stride: int) -> np.ndarray:
    cols = (length_padded - kernel) // stride + 1
    return (np.arange(cols) * stride)[None, :] + np.arange(kernel)[:, None]  # (K, cols)


def unfold1d(x, kernel: int, stride: int = 1, pad: int = 0) -> Tensor:
    """Extract sliding windows: (B, C, L) -> (B, C*K, L') columns.

    L' = floor((L + 2*pad - K)/stride) + 1. Adjoint of ``fold1d``.
    """
    x = _lift(x)
    if x.ndim != 3:
        raise ShapeError(f"unfold1d: expected (batch, channels, length), got {x.shape}")
    b, c, length = x.shape
    lp = length + 2 * pad
    if kernel > lp or (lp - kernel) // stride + 1 < 1:
        raise ShapeError(f"unfold1d: kernel {kernel} larger than padded input length {lp}")
    idx = _unfold_index(lp, kernel, stride)
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad)))
    cols = xp[:, :, idx]  # (B, C, K, L')
    data = cols.reshape(b, c * kernel, idx.shape[1])

    def bwd(g):
        return (fold1d(g, kernel, stride, pad, length),)

    return _result(data, (x,), bwd, "unfold1d")


def fold1d(cols, kernel: int, stride: int = 1, pad: int = 0, out_len: int = 0) -> Tensor:
    """Scatter-add columns back to a signal: exact adjoint of ``unfold1d``."""
    cols = _lift(cols)
    if cols.ndim != 3 or cols.shape[1] % kernel != 0:
        raise ShapeError(f"fold1d: bad column shape {cols.shape} for kernel {kernel}")
    b, ck, ncols = cols.shape
    c = ck // kernel
    lp = out_len + 2 * pad
    if (lp - kernel) // stride + 1 != ncols:
        raise ShapeError(
            f"fold1d: {ncols} columns inconsistent with output length {out_len} "
            f"(kernel {kernel}, stride {stride}, pad {pad})"
        )
    vals = cols.data.reshape(b, c, kernel, ncols)
    ypad = np.zeros((b, c, lp))
    # per-offset slice adds: within one kernel offset the targets are unique
    for kk in range(kernel):
        ypad[:, :, kk : kk + stride * ncols : stride] += vals[:, :, kk, :]
    data = ypad[:, :, pad : pad + out_len]

    def bwd(g):
        return (unfold1d(g, kernel, stride, pad),)

    return _result(data, (cols,), bwd, "fold1d")


def _batched(x: Tensor) -> tuple:
    if x.ndim == 2:
        return reshape(x, (1,) + x.shape), True
    return x, False


def conv1d(x, k, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of (B, C_in, L) with kernels (C_out, C_in, K).

    A 2-D input is treated as a single sample and returned unbatched.
    """
    x, k = _lift(x), _lift(k)
    if k.ndim != 3:
        raise ShapeError(f"conv1d: kernel must be (C_out, C_in, K), got {k.shape}")
    x3, squeeze = _batched(x)
    if x3.ndim != 3 or x3.shape[1] != k.shape[1]:
        raise ShapeError(f"conv1d: input {x.shape} does not match kernel {k.shape}")
    c_out, c_in, kernel = k.shape
    cols = unfold1d(x3, kernel, stride, pad)  # (B, C_in*K, L')
    w = reshape(k, (c_out, c_in * kernel))
    y = matmul(w, cols)  # broadcasts over the batch axis -> (B, C_out, L')
    return reshape(y, y.shape[1:]) if squeeze else y


def conv1d_transpose(x, k, stride: int = 1, pad: int = 0, out_pad: int = 0) -> Tensor:
    """Fractionally-strided convolution, the adjoint of ``conv1d``.

    Input (B, C_in, L), kernels (C_in, C_out, K); output length
    (L-1)*stride - 2*pad + K + out_pad. Requires out_pad < stride.
    """
    x, k = _lift(x), _lift(k)
    if k.ndim != 3:
        raise ShapeError(f"conv1d_transpose: kernel must be (C_in, C_out, K), got {k.shape}")
    x3, squeeze = _batched(x)
    if x3.ndim != 3 or x3.shape[1] != k.shape[0]:
        raise ShapeError(f"conv1d_transpose: input {x.shape} does not match kernel {k.shape}")
    if not 0 <= out_pad < max(stride, 1):
        raise ShapeError(f"conv1d_transpose: out_pad {out_pad} must satisfy 0 <= out_pad < stride {stride}")
    b, c_in, length = x3.shape
    _, c_out, kernel = k.shape
    out_len = (length - 1) * stride - 2 * pad + kernel + out_pad
    if out_len < 1:
        raise ShapeError(f"conv1d_transpose: computed output length {out_len} < 1")
    w = reshape(k, (c_in, c_out * kernel))
    cols = matmul(transpose(w), x3)  # (C_out*K, C_in) @ (B, C_in, L) -> (B, C_out*K, L)
    y = fold1d(cols, kernel, stride, pad, out_len)
    return reshape(y, y.shape[1:]) if squeeze else y


# ---------------------------------------------------------------------------
# gradient-norm helper for the Lipschitz penalty
# ---------------------------------------------------------------------------


def grad_norm_of_output_wrt_input(f: Callable[[Tensor], Tensor], x) -> Tensor:
    """Per-sample Euclidean norm of d f(x) / d x, itself differentiable.

    ``f`` must map a batch (B, ...) to one scalar per sample with no
    cross-sample coupling (true for the dense/conv critics here), so the
    per-sample gradients can be recovered from a single summed pass.
    """
    data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    xi = Tensor(data, requires_grad=True)
    out = f(xi)
    batch = xi.shape[0] if xi.ndim > 0 else 1
    if out.size != batch:
        raise GradientError(
            f"expected one scalar per sample ({batch}), got output shape {out.shape}"
        )
    (g,) = grad(sum(out), [xi], create_graph=True)
    flat = reshape(g, (batch, xi.size // batch))
    return sqrt(sum(mul(flat, flat), axis=1))
