"""Small reverse-mode differentiation kernel over numpy arrays.

Only the primitives the community embedding model needs are provided:
token lookup, a fused LSTM time step, mean pooling, affine layers, ReLU,
multiplication by a fixed (possibly sparse) propagation matrix, and
softmax cross-entropy.  Operations executed inside a :class:`Tape` context
are recorded with closures that map the output gradient to input
gradients; :meth:`Tape.backward` replays them in reverse.

Example
-------
>>> W = Parameter(np.ones((1, 2)), name="W")
>>> with Tape() as tape:
...     loss = softmax_xent_rows(linear(np.array([[1.0, 2.0]]), W), np.array([[1.0]]))
...     tape.backward(loss)
>>> W.grad
array([[0., 0.]])
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

ADAGRAD_EPS = 1e-8
INIT_SCALE = 0.08

_ACTIVE: list = []


class Tensor:
    """An ndarray value that may carry a gradient through the tape."""

    __slots__ = ("value", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, shape={self.value.shape})"


class Parameter(Tensor):
    """Trainable tensor with its gradient and AdaGrad accumulator."""

    __slots__ = ("grad", "acc")

    def __init__(self, value, name: str | None = None, frozen: bool = False):
        super().__init__(np.array(value, dtype=np.float64), requires_grad=not frozen, name=name)
        if not np.all(np.isfinite(self.value)):
            raise ValueError(f"parameter {name!r} has non-finite entries")
        self.grad = np.zeros_like(self.value)
        self.acc = np.zeros_like(self.value)

    @property
    def frozen(self) -> bool:
        return not self.requires_grad

    @frozen.setter
    def frozen(self, flag: bool):
        self.requires_grad = not flag

    def zero_grad(self):
        self.grad.fill(0.0)


class Tape:
    """Records operations in forward order; allows exactly one backward."""

    def __init__(self):
        self.records: list = []
        self._spent = False

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def record(self, out: Tensor, inputs: tuple, backward: Callable):
        if self._spent:
            raise RuntimeError("tape already consumed by backward()")
        self.records.append((out, inputs, backward))

    def backward(self, loss: Tensor) -> None:
        """Accumulate ``d loss / d p`` into ``p.grad`` for every parameter."""
        if self._spent:
            raise RuntimeError("backward() called twice on the same tape")
        if loss.value.size != 1:
            raise ValueError("backward() needs a scalar loss")
        self._spent = True
        grads = {id(loss): np.ones_like(loss.value)}
        for out, inputs, fn in reversed(self.records):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for x, gx in zip(inputs, fn(g)):
                if gx is None or not isinstance(x, Tensor) or not x.requires_grad:
                    continue
                if isinstance(x, Parameter):
                    x.grad += gx
                elif id(x) in grads:
                    grads[id(x)] = grads[id(x)] + gx
                else:
                    grads[id(x)] = gx
        self.records.clear()


def _tape():
    return _ACTIVE[-1] if _ACTIVE else None


def _val(x):
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _op(value, inputs: tuple, backward: Callable) -> Tensor:
    tape = _tape()
    needs = tape is not None and any(isinstance(x, Tensor) and x.requires_grad for x in inputs)
    if not np.all(np.isfinite(value)):
        raise FloatingPointError("non-finite value produced in forward pass")
    out = Tensor(value, requires_grad=needs)
    if needs:
        tape.record(out, inputs, backward)
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- primitives -------------------------------------------------------------


def add(a, b) -> Tensor:
    av, bv = _val(a), _val(b)
    return _op(av + bv, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def mul(a, b) -> Tensor:
    av, bv = _val(a), _val(b)
    return _op(av * bv, (a, b), lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def matmul(a, b) -> Tensor:
    """``a @ b`` for 1-D or 2-D operands."""
    av, bv = _val(a), _val(b)

    def back(g):
        a2 = av if av.ndim == 2 else av[None, :]
        b2 = bv if bv.ndim == 2 else bv[:, None]
        g2 = np.reshape(g, (a2.shape[0], b2.shape[1]))
        return (g2 @ b2.T).reshape(av.shape), (a2.T @ g2).reshape(bv.shape)

    return _op(av @ bv, (a, b), back)


def linear(x, W, b=None) -> Tensor:
    """``x @ W.T (+ b)`` with ``W`` shaped ``(out, in)``."""
    xv, Wv = _val(x), _val(W)
    out = xv @ Wv.T
    if b is None:
        return _op(out, (x, W), lambda g: (g @ Wv, g.T @ xv))
    return _op(out + _val(b), (x, W, b), lambda g: (g @ Wv, g.T @ xv, g.sum(axis=0)))


def relu(x) -> Tensor:
    xv = _val(x)
    mask = xv > 0
    return _op(np.where(mask, xv, 0.0), (x,), lambda g: (g * mask,))


def tanh(x) -> Tensor:
    y = np.tanh(_val(x))
    return _op(y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid_values(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x) -> Tensor:
    y = sigmoid_values(_val(x))
    return _op(y, (x,), lambda g: (g * y * (1.0 - y),))


def lookup(table, idx) -> Tensor:
    """Rows of ``table`` at integer positions ``idx``."""
    tv = _val(table)
    idx = np.asarray(idx, dtype=np.int64)

    def back(g):
        gt = np.zeros_like(tv)
        np.add.at(gt, idx, g)
        return (gt,)

    return _op(tv[idx], (table,), back)


def columns(x, start: int, stop: int) -> Tensor:
    xv = _val(x)

    def back(g):
        gx = np.zeros_like(xv)
        gx[:, start:stop] = g
        return (gx,)

    return _op(xv[:, start:stop].copy(), (x,), back)


def mean(tensors: Sequence) -> Tensor:
    """Element-wise mean of equally shaped tensors."""
    if not tensors:
        raise ValueError("mean of an empty list")
    d = len(tensors)
    vals = [_val(t) for t in tensors]
    shape = vals[0].shape
    if any(v.shape != shape for v in vals):
        raise ValueError("mean pooling needs equally shaped inputs")
    out = np.sum(vals, axis=0) / d
    return _op(out, tuple(tensors), lambda g: tuple(g / d for _ in range(d)))


def propagate(h, m) -> Tensor:
    """``m.T @ h`` for a fixed ``(n, n)`` matrix ``m`` (dense or sparse).

    With node-major rows ``h`` this is the column form ``H @ M``.
    """
    hv = _val(h)
    mt = m.T
    out = np.asarray(mt @ hv)
    return _op(out, (h,), lambda g: (np.asarray(m @ g),))


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits, target):
    """Cross-entropy ``-sum_k target_k log softmax(logits)_k``.

    Returns ``(loss, probabilities)``.  Works on a single vector.
    """
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite logits")
    if z.shape != t.shape:
        raise ValueError(f"logits {z.shape} and target {t.shape} differ in shape")
    if np.any(t < 0) or not np.isclose(t.sum(), 1.0):
        raise ValueError("target must be a probability vector")
    shifted = z - z.max()
    logz = np.log(np.exp(shifted).sum())
    logp = shifted - logz
    loss = float(-(t[t > 0] * logp[t > 0]).sum())
    return max(loss, 0.0), np.exp(logp)


def softmax_xent_rows(logits, targets, rows=None) -> Tensor:
    """Mean cross-entropy over the selected rows of a logit matrix."""
    z = _val(logits)
    t = np.asarray(targets, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite logits")
    rows = np.arange(z.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
    if len(rows) == 0:
        raise ValueError("no supervised rows")
    zr, tr = z[rows], t[rows]
    shifted = zr - zr.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -np.sum(np.where(tr > 0, tr * logp, 0.0)) / len(rows)
    p = np.exp(logp)

    def back(g):
        gz = np.zeros_like(z)
        gz[rows] = (p * tr.sum(axis=1, keepdims=True) - tr) * (g / len(rows))
        return (gz,)

    return _op(np.array(loss), (logits,), back)


def lstm_step(x, hc, Wx, Wh, b, mask) -> Tensor:
    """One masked LSTM step on a batch.

    ``hc`` is the concatenated state ``[h | c]`` of shape ``(n, 2p)``.
    Gate columns of ``Wx`` ``(e, 4p)``, ``Wh`` ``(p, 4p)`` and ``b``
    ``(4p,)`` are ordered input, forget, output, candidate.  Rows whose
    ``mask`` is 0 carry their state through unchanged.
    """
    xv, hcv, Wxv, Whv, bv = _val(x), _val(hc), _val(Wx), _val(Wh), _val(b)
    p = Whv.shape[0]
    h, c = hcv[:, :p], hcv[:, p:]
    z = xv @ Wxv + h @ Whv + bv
    gates = sigmoid_values(z[:, : 3 * p])
    i, f, o = gates[:, :p], gates[:, p:2 * p], gates[:, 2 * p:]
    g_ = np.tanh(z[:, 3 * p:])
    c_new = f * c + i * g_
    tc = np.tanh(c_new)
    h_new = o * tc
    m = np.asarray(mask, dtype=np.float64).reshape(-1, 1)
    out = np.concatenate([m * h_new + (1 - m) * h, m * c_new + (1 - m) * c], axis=1)

    def back(G):
        gh_out, gc_out = G[:, :p], G[:, p:]
        gh = m * gh_out
        gc = m * gc_out + gh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                gc * g_ * i * (1.0 - i),
                gc * c * f * (1.0 - f),
                gh * tc * o * (1.0 - o),
                gc * i * (1.0 - g_ * g_),
            ],
            axis=1,
        )
        dh = dz @ Whv.T + (1 - m) * gh_out
        dc = gc * f + (1 - m) * gc_out
        return dz @ Wxv.T, np.concatenate([dh, dc], axis=1), xv.T @ dz, h.T @ dz, dz.sum(axis=0)

    return _op(out, (x, hc, Wx, Wh, b, mask), back)


# -- layers -----------------------------------------------------------------


def uniform_init(rng: np.random.Generator, shape, scale: float = INIT_SCALE) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


@dataclass
class LSTMCell:
    """Gate parameters of one LSTM cell with hidden size ``p``."""

    Wx: Parameter
    Wh: Parameter
    b: Parameter

    @property
    def hidden_size(self) -> int:
        return self.Wh.value.shape[0]

    @property
    def input_size(self) -> int:
        return self.Wx.value.shape[0]

    def parameters(self):
        return [self.Wx, self.Wh, self.b]

    @classmethod
    def init(cls, rng, input_size: int, hidden_size: int, prefix: str = "", scale: float = INIT_SCALE):
        p = hidden_size
        b = np.zeros(4 * p)
        b[p:2 * p] = 1.0  # forget gate
        return cls(
            Parameter(uniform_init(rng, (input_size, 4 * p), scale), name=f"{prefix}Wx"),
            Parameter(uniform_init(rng, (p, 4 * p), scale), name=f"{prefix}Wh"),
            Parameter(b, name=f"{prefix}b"),
        )


def pad_sequences(sequences: Iterable) -> tuple:
    """Right-pad token lists with 0; returns ``(tokens, lengths)``."""
    seqs = [tuple(getattr(s, "tokens", s)) for s in sequences]
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    L = int(lengths.max()) if len(seqs) else 0
    tokens = np.zeros((len(seqs), L), dtype=np.int64)
    for r, s in enumerate(seqs):
        tokens[r, : len(s)] = s
    return tokens, lengths


def lstm_encode(tokens: np.ndarray, lengths: np.ndarray, cell: LSTMCell, token_table) -> Tensor:
    """Final hidden state for each padded row; empty rows give zeros."""
    n = tokens.shape[0]
    p = cell.hidden_size
    vocab_rows = _val(token_table).shape[0]
    if tokens.size and (tokens.max() >= vocab_rows or tokens.min() < 0):
        raise IndexError(
            f"token index {int(tokens.max())} outside token table of {vocab_rows - 1} entries"
        )
    hc = Tensor(np.zeros((n, 2 * p)))
    for t in range(tokens.shape[1]):
        active = (lengths > t).astype(np.float64)
        x = lookup(token_table, tokens[:, t])
        hc = lstm_step(x, hc, cell.Wx, cell.Wh, cell.b, active)
    return columns(hc, 0, p)


def lstm_forward(seq, cell: LSTMCell, token_table) -> np.ndarray:
    """Run one content sequence through an LSTM cell, return ``h`` at the end."""
    tokens, lengths = pad_sequences([seq])
    return lstm_encode(tokens, lengths, cell, token_table).value[0]


def mean_pool(vectors: Sequence) -> Tensor:
    return mean(list(vectors))


@dataclass
class DenseStack:
    """Affine layers with ReLU between them; the last layer is linear."""

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    def parameters(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    @property
    def output_size(self) -> int:
        return self.weights[-1].value.shape[0]

    @classmethod
    def init(cls, rng, input_size: int, widths: Sequence[int], prefix: str = "", scale: float = INIT_SCALE):
        ws, bs = [], []
        fan_in = input_size
        for j, w in enumerate(widths):
            ws.append(Parameter(uniform_init(rng, (w, fan_in), scale), name=f"{prefix}W{j}"))
            bs.append(Parameter(np.zeros(w), name=f"{prefix}b{j}"))
            fan_in = w
        return cls(ws, bs)


def dense_relu_stack(x, layers: DenseStack) -> Tensor:
    h = x
    last = len(layers.weights) - 1
    for j, (W, b) in enumerate(zip(layers.weights, layers.biases)):
        if _val(h).shape[-1] != W.value.shape[1]:
            raise ValueError(
                f"layer {j}: input width {_val(h).shape[-1]} does not match weight {W.value.shape}"
            )
        h = linear(h, W, b)
        if j < last:
            h = relu(h)
    return h


# -- optimisation -----------------------------------------------------------


def adagrad_step(params: Iterable[Parameter], rho: float, eps: float = ADAGRAD_EPS) -> None:
    """Diagonal AdaGrad: ``acc += g^2``, ``theta -= rho g / (sqrt(acc) + eps)``.

    Gradients are zeroed afterwards.  Frozen parameters are skipped.
    """
    for prm in params:
        if prm.frozen:
            prm.zero_grad()
            continue
        g = prm.grad
        prm.acc += g * g
        prm.value -= rho * g / (np.sqrt(prm.acc) + eps)
        prm.zero_grad()


@dataclass
class GradCheckReport:
    errors: dict = field(default_factory=dict)  # name -> max relative error
    tolerance: float = 1e-4

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def failures(self) -> list:
        return [k for k, v in self.errors.items() if not v < self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failures


def grad_check(
    forward: Callable[[], Tensor],
    params: Sequence[Parameter],
    tolerance: float = 1e-4,
    step: float = 1e-4,
) -> GradCheckReport:
    """Compare tape gradients against central finite differences.

    ``forward`` must be deterministic and return a scalar :class:`Tensor`.
    The perturbation for an entry ``x`` is ``step * max(1, |x|)``.  The
    reported error of a block is ``max|analytic - numeric|`` divided by the
    larger of the two gradients' max magnitudes.  Frozen blocks are left
    out of the report.
    """
    live = [p for p in params if not p.frozen]
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = forward()
        tape.backward(loss)
    analytic = {id(p): p.grad.copy() for p in live}
    for p in params:
        p.zero_grad()

    report = GradCheckReport(tolerance=tolerance)
    for p in live:
        numeric = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        nflat = numeric.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            h = step * max(1.0, abs(orig))
            flat[j] = orig + h
            up = float(forward().value)
            flat[j] = orig - h
            down = float(forward().value)
            flat[j] = orig
            nflat[j] = (up - down) / (2 * h)
        a = analytic[id(p)]
        scale = max(np.abs(a).max(initial=0.0), np.abs(numeric).max(initial=0.0))
        diff = np.abs(a - numeric).max(initial=0.0)
        report.errors[p.name or f"param{len(report.errors)}"] = 0.0 if scale == 0 else diff / scale
    return report
