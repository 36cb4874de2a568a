"""Dense float64 tensors with reverse-mode automatic differentiation.

The op set is exactly what the three decoder architectures and their losses
need: 2-d (cross-correlation) convolution with depthwise/separable variants,
average/max pooling, ELU, affine layers, log-softmax, dropout, and a handful
of elementwise/reduction helpers. Each op records a backward closure on its
output; the implicit tape formed by parent links is replayed once, in reverse
topological order, by `backprop`.

Design notes:
  * convolution is cross-correlation (no kernel flip), stride/padding in
    (height, width) order;
  * everything is double precision so finite-difference checks are sharp;
  * temporal convolutions with long kernels take an FFT fast path that is
    numerically equivalent (~1e-13) to the direct im2col path;
  * gradients of inputs with requires_grad=False are never computed, which
    keeps the first (widest) conv layer cheap during training.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as _fft

from .prng import Pcg32

# FFT path pays off only for long stride-1 temporal kernels.
_FFT_MIN_TAPS = 64
_FFT_MIN_WIDTH = 256
# whole-batch einsum below this window-tensor size, per-sample loop above
_EINSUM_BLOCK = 2_000_000


class Tensor:
    """A dense float64 array plus optional gradient bookkeeping.

    Treat instances as immutable once created; training code replaces
    parameter *contents* between graph builds (single-owner), never the
    arrays feeding an already-recorded graph.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # -- convenience arithmetic used by losses/tests ----------------------

    def __add__(self, other) -> "Tensor":
        return add(self, other if isinstance(other, Tensor) else Tensor(other))

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return smul(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return smul(self, -1.0)

    def sum(self) -> "Tensor":
        return tsum(self)

    def mean(self) -> "Tensor":
        return tmean(self)

    def reshape(self, shape) -> "Tensor":
        return reshape(self, shape)

    def backward(self) -> None:
        backprop(self)

    def zero_grad(self) -> None:
        self.grad = None


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.copy() if g.base is not None or not g.flags.owndata else g
    else:
        t.grad = t.grad + g


def _from_op(data: np.ndarray, parents: Sequence[Tensor],
             backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def backprop(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into .grad of every requires_grad leaf.

    The recorded graph is single-use: intermediate gradients and closures
    are released as soon as each node has been processed.
    """
    if loss.data.size != 1:
        raise ValueError(f"backprop needs a scalar loss, got shape {loss.data.shape}")
    if not np.isfinite(loss.data):
        raise FloatingPointError("loss is not finite")
    if not loss.requires_grad:
        return

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
        if node._parents:  # free intermediates, keep leaf grads
            node.grad = None
            node._backward = None
            node._parents = ()


# ---------------------------------------------------------------------------
# elementwise / reduction / shape ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, g)
        if b.requires_grad:
            _accumulate(b, g)

    return _from_op(a.data + b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, g * b.data)
        if b.requires_grad:
            _accumulate(b, g * a.data)

    return _from_op(a.data * b.data, (a, b), bwd)


def smul(a: Tensor, c: float) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            _accumulate(a, g * c)

    return _from_op(a.data * c, (a,), bwd)


def tsum(a: Tensor) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            _accumulate(a, np.broadcast_to(g, a.data.shape))

    return _from_op(np.asarray(a.data.sum()), (a,), bwd)


def tmean(a: Tensor) -> Tensor:
    n = a.data.size

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, np.broadcast_to(g / n, a.data.shape))

    return _from_op(np.asarray(a.data.mean()), (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            _accumulate(a, g.reshape(a.data.shape))

    return _from_op(a.data.reshape(shape), (a,), bwd)


def take_per_row(a: Tensor, idx) -> Tensor:
    """Pick a[i, idx[i]] for each row i; used by the NLL-style losses."""
    idx = np.asarray(idx)
    if a.data.ndim != 2:
        raise ValueError("take_per_row expects a 2-d tensor")
    if idx.ndim != 1 or idx.shape[0] != a.data.shape[0]:
        raise ValueError("index vector must have one entry per row")
    if idx.min(initial=0) < 0 or idx.max(initial=0) >= a.data.shape[1]:
        raise ValueError("row index out of range")
    rows = np.arange(a.data.shape[0])

    def bwd(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            buf[rows, idx] = g
            _accumulate(a, buf)

    return _from_op(a.data[rows, idx], (a,), bwd)


def zero_pad2d(a: Tensor, pad) -> Tensor:
    """Zero-pad the two trailing axes; pad = ((top, bottom), (left, right))."""
    (pt, pb), (pl, pr) = pad
    if min(pt, pb, pl, pr) < 0:
        raise ValueError("negative padding")
    widths = [(0, 0)] * (a.data.ndim - 2) + [(pt, pb), (pl, pr)]

    def bwd(g):
        if a.requires_grad:
            sl = [slice(None)] * (a.data.ndim - 2)
            sl += [slice(pt, g.shape[-2] - pb), slice(pl, g.shape[-1] - pr)]
            _accumulate(a, g[tuple(sl)])

    return _from_op(np.pad(a.data, widths), (a,), bwd)


# ---------------------------------------------------------------------------
# activations, dense layer, classification head
# ---------------------------------------------------------------------------

def elu(a: Tensor) -> Tensor:
    """x for x>0 else exp(x)-1 (alpha fixed at 1)."""
    em1 = np.expm1(a.data)
    pos = a.data > 0
    out = np.where(pos, a.data, em1)

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, g * np.where(pos, 1.0, em1 + 1.0))

    return _from_op(out, (a,), bwd)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map x @ weight.T + bias for x:[N,K], weight:[M,K], bias:[M]."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise ValueError("linear expects 2-d input and weight")
    if x.data.shape[1] != weight.data.shape[1]:
        raise ValueError(
            f"linear inner dims disagree: input K={x.data.shape[1]}, "
            f"weight K={weight.data.shape[1]}")
    if bias is not None and bias.data.shape != (weight.data.shape[0],):
        raise ValueError("bias must have one entry per output unit")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    parents = (x, weight) if bias is None else (x, weight, bias)

    def bwd(g):
        if x.requires_grad:
            _accumulate(x, g @ weight.data)
        if weight.requires_grad:
            _accumulate(weight, g.T @ x.data)
        if bias is not None and bias.requires_grad:
            _accumulate(bias, g.sum(axis=0))

    return _from_op(out, parents, bwd)


def log_softmax(logits: Tensor) -> Tensor:
    """Row-wise log-softmax via max subtraction; exp of rows sums to 1."""
    if logits.data.ndim != 2 or logits.data.shape[1] < 1:
        raise ValueError("log_softmax expects [N, K] with K >= 1")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=1, keepdims=True))

    def bwd(g):
        if logits.requires_grad:
            _accumulate(logits, g - np.exp(out) * g.sum(axis=1, keepdims=True))

    return _from_op(out, (logits,), bwd)


def dropout(a: Tensor, rate: float, rng: Pcg32, training: bool) -> Tensor:
    """Inverted dropout: zero with probability `rate`, scale survivors."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return a
    u = rng.uniform(a.data.size).reshape(a.data.shape)
    mask = (u >= rate) / (1.0 - rate)

    def bwd(g):
        if a.requires_grad:
            _accumulate(a, g * mask)

    return _from_op(a.data * mask, (a,), bwd)


# ---------------------------------------------------------------------------
# convolution machinery
# ---------------------------------------------------------------------------

def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        a, b = v
        return int(a), int(b)
    return int(v), int(v)


def _fft_eligible(kh: int, kw: int, sh: int, sw: int, wout: int) -> bool:
    return (kh == 1 and sh == 1 and sw == 1
            and kw >= _FFT_MIN_TAPS and wout >= _FFT_MIN_WIDTH)


def _corr2d(xp: np.ndarray, k: np.ndarray, sh: int, sw: int,
            cache: dict | None = None) -> np.ndarray:
    """Valid cross-correlation of padded input xp:[N,C,Hp,Wp] with k:[F,C,kh,kw].

    When `cache` is given and the FFT path fires, the input spectrum is
    stashed there so the backward pass can reuse it.
    """
    n, c, hp, wp = xp.shape
    f, _, kh, kw = k.shape
    hout = (hp - kh) // sh + 1
    wout = (wp - kw) // sw + 1

    if _fft_eligible(kh, kw, sh, sw, wout):
        l = _fft.next_fast_len(wp)
        xf = _fft.rfft(xp, n=l, axis=3)
        if cache is not None:
            cache["xf"], cache["l"] = xf, l
        kf = np.conj(_fft.rfft(k[:, :, 0, :], n=l, axis=2))
        if c == 1:  # broadcast multiply beats einsum in the common case
            prod = xf[:, 0][:, None] * kf[:, 0][None, :, None]
        else:
            prod = np.einsum("nchl,fcl->nfhl", xf, kf)
        return _fft.irfft(prod, n=l, axis=3)[:, :, :, :wout].copy()

    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    if win.size <= _EINSUM_BLOCK:
        return np.einsum("nchwij,fcij->nfhw", win, k, optimize=True)
    out = np.empty((n, f, hout, wout))
    for i in range(n):
        out[i] = np.einsum("chwij,fcij->fhw", win[i], k, optimize=True)
    return out


def _corr2d_kernel_grad(xp: np.ndarray, g: np.ndarray, kh: int, kw: int,
                        sh: int, sw: int, cache: dict | None = None) -> np.ndarray:
    """d(loss)/d(kernel) for the correlation above; g:[N,F,Hout,Wout]."""
    n, c = xp.shape[0], xp.shape[1]
    f, wout = g.shape[1], g.shape[3]
    if _fft_eligible(kh, kw, sh, sw, wout):
        if cache and "xf" in cache:
            xf, l = cache["xf"], cache["l"]
        else:
            l = _fft.next_fast_len(xp.shape[3])
            xf = _fft.rfft(xp, n=l, axis=3)
        gf = np.conj(_fft.rfft(g, n=l, axis=3))
        if c == 1:
            prod = (gf * xf[:, 0][:, None]).sum(axis=(0, 2))[:, None, :]
        else:
            prod = np.einsum("nchl,nfhl->fcl", xf, gf)
        return _fft.irfft(prod, n=l, axis=2)[:, :, None, :kw].copy()

    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    if win.size <= _EINSUM_BLOCK:
        return np.einsum("nchwij,nfhw->fcij", win, g, optimize=True)
    dk = np.zeros((f, c, kh, kw))
    for i in range(n):
        dk += np.einsum("chwij,fhw->fcij", win[i], g[i], optimize=True)
    return dk


def _dilate(g: np.ndarray, sh: int, sw: int) -> np.ndarray:
    """Insert stride-1 zeros between output-grad samples (transposed conv)."""
    if sh == 1 and sw == 1:
        return g
    n, f, h, w = g.shape
    out = np.zeros((n, f, (h - 1) * sh + 1, (w - 1) * sw + 1))
    out[:, :, ::sh, ::sw] = g
    return out


def _corr2d_input_grad(g: np.ndarray, k: np.ndarray, hp: int, wp: int,
                       sh: int, sw: int) -> np.ndarray:
    """d(loss)/d(padded input): full convolution of the dilated output grad."""
    f, c, kh, kw = k.shape
    n = g.shape[0]
    gd = _dilate(g, sh, sw)
    hd, wd = gd.shape[2], gd.shape[3]

    if _fft_eligible(kh, kw, 1, 1, wd):
        gp = np.pad(gd, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
        kt = np.ascontiguousarray(k[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
        core = _corr2d(gp, kt, 1, 1)
        if core.shape[2] == hp and core.shape[3] == wp:
            return core
        dxp = np.zeros((n, c, hp, wp))
        dxp[:, :, :core.shape[2], :core.shape[3]] = core
        return dxp

    # offset loop: each output-grad sample scatters one kernel footprint;
    # same MAC count as the forward pass and no windowed copies
    gt = np.ascontiguousarray(gd.transpose(0, 2, 3, 1)).reshape(n * hd * wd, f)
    dxp_t = np.zeros((n, hp, wp, c))
    for i in range(kh):
        for j in range(kw):
            contrib = (gt @ k[:, :, i, j]).reshape(n, hd, wd, c)
            dxp_t[:, i:i + hd, j:j + wd, :] += contrib
    return np.ascontiguousarray(dxp_t.transpose(0, 3, 1, 2))


def _validate_conv_geometry(x: Tensor, kh: int, kw: int, sh: int, sw: int,
                            ph: int, pw: int) -> None:
    if x.data.ndim != 4:
        raise ValueError(f"conv input must be [N,C,H,W], got shape {x.data.shape}")
    if sh < 1 or sw < 1:
        raise ValueError("stride entries must be >= 1")
    if ph < 0 or pw < 0:
        raise ValueError("padding entries must be >= 0")
    hp, wp = x.data.shape[2] + 2 * ph, x.data.shape[3] + 2 * pw
    if kh > hp or kw > wp:
        raise ValueError(
            f"kernel ({kh},{kw}) exceeds padded input ({hp},{wp}); output would be empty")


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None,
           stride=(1, 1), padding=(0, 0)) -> Tensor:
    """2-d cross-correlation with optional per-filter bias.

    x: [N,C,H,W], kernel: [F,C,kh,kw], bias: [F]. Output
    [N,F,(H+2ph-kh)//sh+1,(W+2pw-kw)//sw+1].
    """
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    if kernel.data.ndim != 4:
        raise ValueError(f"kernel must be [F,C,kh,kw], got shape {kernel.data.shape}")
    f, ck, kh, kw = kernel.data.shape
    _validate_conv_geometry(x, kh, kw, sh, sw, ph, pw)
    if ck != x.data.shape[1]:
        raise ValueError(
            f"kernel expects {ck} input channels, input has {x.data.shape[1]}")
    if bias is not None and bias.data.shape != (f,):
        raise ValueError(f"bias must have shape ({f},), got {bias.data.shape}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x.data
    cache: dict = {}
    out = _corr2d(xp, kernel.data, sh, sw, cache if kernel.requires_grad else None)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def bwd(g):
        if kernel.requires_grad:
            _accumulate(kernel, _corr2d_kernel_grad(xp, g, kh, kw, sh, sw, cache))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            dxp = _corr2d_input_grad(g, kernel.data, xp.shape[2], xp.shape[3], sh, sw)
            if ph or pw:
                dxp = dxp[:, :, ph:xp.shape[2] - ph, pw:xp.shape[3] - pw]
            _accumulate(x, dxp)

    return _from_op(out, parents, bwd)


def depthwise_conv2d(x: Tensor, kernel: Tensor, depth_multiplier: int,
                     stride=(1, 1), padding=(0, 0)) -> Tensor:
    """Per-channel convolution: channel c sees only its own D kernels.

    kernel: [C*D, 1, kh, kw]; output channel c*D+d = x[:,c] correlated with
    kernel[c*D+d]. No cross-channel mixing.
    """
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    if kernel.data.ndim != 4 or kernel.data.shape[1] != 1:
        raise ValueError(f"depthwise kernel must be [C*D,1,kh,kw], got {kernel.data.shape}")
    c = x.data.shape[1] if x.data.ndim == 4 else 0
    cd, _, kh, kw = kernel.data.shape
    _validate_conv_geometry(x, kh, kw, sh, sw, ph, pw)
    if c == 0 or cd % c != 0:
        raise ValueError(f"kernel count {cd} is not a multiple of input channels {c}")
    d = cd // c
    if d != int(depth_multiplier):
        raise ValueError(
            f"kernel count {cd} implies depth multiplier {d}, caller said {depth_multiplier}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x.data
    n = x.data.shape[0]
    hout = (xp.shape[2] - kh) // sh + 1
    wout = (xp.shape[3] - kw) // sw + 1
    kk = kernel.data.reshape(c, d, kh, kw)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    out = np.einsum("nchwij,cdij->ncdhw", win, kk, optimize=True)
    out = out.reshape(n, c * d, hout, wout)

    def bwd(g):
        g5 = g.reshape(n, c, d, hout, wout)
        if kernel.requires_grad:
            dk = np.einsum("nchwij,ncdhw->cdij", win, g5, optimize=True)
            _accumulate(kernel, dk.reshape(cd, 1, kh, kw))
        if x.requires_grad:
            gd = g5.reshape(n * c, d, hout, wout)
            gd = _dilate(gd, sh, sw).reshape(n, c, d, -1, (wout - 1) * sw + 1)
            hd, wd = gd.shape[3], gd.shape[4]
            dxp = np.zeros_like(xp)
            for dd in range(d):
                gslice = gd[:, :, dd]
                for i in range(kh):
                    for j in range(kw):
                        dxp[:, :, i:i + hd, j:j + wd] += (
                            gslice * kk[None, :, dd, i, j, None, None])
            if ph or pw:
                dxp = dxp[:, :, ph:xp.shape[2] - ph, pw:xp.shape[3] - pw]
            _accumulate(x, dxp)

    return _from_op(out, (x, kernel), bwd)


def separable_conv2d(x: Tensor, depthwise_kernel: Tensor, pointwise_kernel: Tensor,
                     stride=(1, 1), padding=(0, 0)) -> Tensor:
    """Depthwise convolution followed by a 1x1 pointwise convolution.

    Defined as the literal composition, so it is bit-identical to applying
    the two primitives in sequence.
    """
    if pointwise_kernel.data.ndim != 4 or pointwise_kernel.data.shape[2:] != (1, 1):
        raise ValueError(
            f"pointwise kernel must be [F,C*D,1,1], got {pointwise_kernel.data.shape}")
    c = x.data.shape[1] if x.data.ndim == 4 else 1
    cd = depthwise_kernel.data.shape[0]
    if c == 0 or cd % c != 0:
        raise ValueError(f"depthwise kernel count {cd} not a multiple of channels {c}")
    if pointwise_kernel.data.shape[1] != cd:
        raise ValueError(
            f"pointwise expects {pointwise_kernel.data.shape[1]} channels, "
            f"depthwise produces {cd}")
    mid = depthwise_conv2d(x, depthwise_kernel, cd // c, stride, padding)
    return conv2d(mid, pointwise_kernel)


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def _validate_pool(x: Tensor, kh: int, kw: int, sh: int, sw: int) -> tuple[int, int]:
    if x.data.ndim != 4:
        raise ValueError(f"pool input must be [N,C,H,W], got shape {x.data.shape}")
    h, w = x.data.shape[2], x.data.shape[3]
    if kh > h or kw > w:
        raise ValueError(f"pool window ({kh},{kw}) larger than input ({h},{w})")
    if sh < 1 or sw < 1:
        raise ValueError("pool stride entries must be >= 1")
    return (h - kh) // sh + 1, (w - kw) // sw + 1


def avg_pool2d(x: Tensor, window, stride=None) -> Tensor:
    """Mean over each window; backward spreads gradient uniformly."""
    kh, kw = _pair(window)
    sh, sw = _pair(stride) if stride is not None else (kh, kw)
    hout, wout = _validate_pool(x, kh, kw, sh, sw)
    win = sliding_window_view(x.data, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    out = win.mean(axis=(-2, -1))

    def bwd(g):
        if not x.requires_grad:
            return
        dx = np.zeros_like(x.data)
        gshare = g / (kh * kw)
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i:i + sh * (hout - 1) + 1:sh,
                   j:j + sw * (wout - 1) + 1:sw] += gshare
        _accumulate(x, dx)

    return _from_op(out, (x,), bwd)


def max_pool2d(x: Tensor, window, stride=None) -> Tensor:
    """Max over each window; gradient goes to the first (row-major) argmax."""
    kh, kw = _pair(window)
    sh, sw = _pair(stride) if stride is not None else (kh, kw)
    hout, wout = _validate_pool(x, kh, kw, sh, sw)
    win = sliding_window_view(x.data, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    flat = win.reshape(win.shape[:4] + (kh * kw,))
    arg = flat.argmax(axis=-1)  # np.argmax ties -> first index, row-major
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def bwd(g):
        if not x.requires_grad:
            return
        dx = np.zeros_like(x.data)
        for t in range(kh * kw):
            sel = arg == t
            if not sel.any():
                continue
            i, j = divmod(t, kw)
            view = dx[:, :, i:i + sh * (hout - 1) + 1:sh,
                      j:j + sw * (wout - 1) + 1:sw]
            view[sel] += g[sel]
        _accumulate(x, dx)

    return _from_op(out, (x,), bwd)


# ---------------------------------------------------------------------------
# finite-difference verification
# ---------------------------------------------------------------------------

def gradcheck(fn, inputs: Sequence[Tensor], eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    `fn(inputs) -> scalar Tensor` must be deterministic. Per-coordinate error
    is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    for t in inputs:
        t.grad = None
    out = fn(inputs)
    if out.data.size != 1:
        raise ValueError("gradcheck needs a scalar-valued fn")
    if not np.isfinite(out.data):
        raise FloatingPointError("fn produced a non-finite value")
    backprop(out)

    worst = 0.0
    for t in inputs:
        if not t.requires_grad:
            continue
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = float(fn(inputs).data)
            flat[i] = orig - eps
            fm = float(fn(inputs).data)
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise FloatingPointError("fn produced a non-finite value during probing")
            numeric = (fp - fm) / (2 * eps)
            a = analytic.reshape(-1)[i]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    return worst
