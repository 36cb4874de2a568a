"""Architecture specs and runnable networks for the three decoders.

A `ModelSpec` is an ordered list of `LayerSpec` rows mirroring the structural
table of each network: 7 rows for EEGNet, 11 for DeepConvNet, 13 for
FingerNet. ELU activations and dropout are carried as row attributes rather
than extra rows, so the row sequences stay comparable across models. The
terminal Softmax row marks the classification head; `forward` returns
pre-softmax logits and the log-softmax is applied by the loss / evaluation
path for numerical stability.

Sizes (kernel lengths, filter counts, pool widths) are configurable; the
defaults follow the canonical EEGNet (F1=8, D=2, F2=16, temporal kernel of
half the 250 Hz sampling rate) and canonical DeepConvNet (25/25/50/100/200
filters, pool 3). Batch normalization is deliberately absent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .prng import Pcg32, STREAM_INIT
from .tensor import (Tensor, avg_pool2d, conv2d, depthwise_conv2d, dropout,
                     elu, linear, max_pool2d, reshape, zero_pad2d)

LAYER_KINDS = frozenset({
    "Conv2D", "DepthwiseConv2D", "SeparableConv2D", "AvgPool2D", "MaxPool2D",
    "FullyConnected", "Softmax", "Activation", "Dropout",
})


class ModelShapeError(ValueError):
    """Shape propagation failed; the message names the offending layer."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters: int | None = None
    kernel: tuple[int, int] | None = None
    pool: tuple[int, int] | None = None
    stride: tuple[int, int] | None = None
    depth_multiplier: int | None = None
    padding: str = "valid"
    units: int | None = None
    activation: str | None = None   # "elu", applied after the layer op
    dropout: float | None = None    # rate, applied after the layer in training
    max_norm: float | None = None   # L2 cap on per-output-unit weight rows

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.padding not in ("valid", "same"):
            raise ValueError(f"padding must be 'valid' or 'same', got {self.padding!r}")
        for name in ("filters", "depth_multiplier", "units"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{self.kind}: {name} must be positive, got {v}")
        for name in ("kernel", "pool", "stride"):
            v = getattr(self, name)
            if v is not None and (len(v) != 2 or min(v) < 1):
                raise ValueError(f"{self.kind}: {name} must be two positive ints, got {v}")
        if self.dropout is not None and not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.dropout}")
        if self.max_norm is not None and self.max_norm <= 0:
            raise ValueError(f"max_norm cap must be positive, got {self.max_norm}")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    layers: tuple[LayerSpec, ...]
    n_channels: int = 24
    n_samples: int = 1000
    n_classes: int = 5

    def __post_init__(self):
        for i, ly in enumerate(self.layers):
            if ly.kind == "Softmax" and i != len(self.layers) - 1:
                raise ValueError("Softmax may appear only as the final layer")

    def kinds(self) -> tuple[str, ...]:
        return tuple(ly.kind for ly in self.layers)


@dataclass
class ModelConfig:
    """Size knobs for the three builders; every field is config-overridable."""

    f1: int = 8
    depth_multiplier: int = 2
    f2: int = 16
    temporal_kernel: int = 125
    separable_kernel: int = 16
    pool1: int = 4
    pool2: int = 8
    deep_filters: tuple[int, ...] = (32, 64, 128)
    deep_kernel: int = 5
    deep_pool: int = 2
    dcn_filters: tuple[int, ...] = (25, 25, 50, 100, 200)
    dcn_kernel: int = 10
    dcn_pool: int = 3
    dropout: float = 0.5
    max_norm_depthwise: float = 1.0
    max_norm_dense: float = 0.25
    dcn_max_norm_conv: float = 2.0
    dcn_max_norm_dense: float = 0.5
    n_channels: int = 24
    n_samples: int = 1000
    n_classes: int = 5

    _KEYS = {
        "model.f1": ("f1", int),
        "model.depth_multiplier": ("depth_multiplier", int),
        "model.f2": ("f2", int),
        "model.temporal_kernel": ("temporal_kernel", int),
        "model.separable_kernel": ("separable_kernel", int),
        "model.pool1": ("pool1", int),
        "model.pool2": ("pool2", int),
        "model.deep_kernel": ("deep_kernel", int),
        "model.deep_pool": ("deep_pool", int),
        "model.dcn_kernel": ("dcn_kernel", int),
        "model.dcn_pool": ("dcn_pool", int),
        "model.dropout": ("dropout", float),
        "model.max_norm_depthwise": ("max_norm_depthwise", float),
        "model.max_norm_dense": ("max_norm_dense", float),
        "model.n_channels": ("n_channels", int),
        "model.n_samples": ("n_samples", int),
        "model.n_classes": ("n_classes", int),
    }

    @classmethod
    def from_mapping(cls, cfg: dict[str, str]) -> "ModelConfig":
        out = cls()
        for key, (attr, conv) in cls._KEYS.items():
            if key in cfg:
                setattr(out, attr, conv(cfg[key]))
        if "model.deep_filters" in cfg:
            out.deep_filters = tuple(int(v) for v in cfg["model.deep_filters"].split(","))
        if "model.dcn_filters" in cfg:
            out.dcn_filters = tuple(int(v) for v in cfg["model.dcn_filters"].split(","))
        return out


# ---------------------------------------------------------------------------
# the three builders
# ---------------------------------------------------------------------------

def _eegnet_front_end(cfg: ModelConfig) -> tuple[LayerSpec, ...]:
    return (
        LayerSpec("Conv2D", filters=cfg.f1, kernel=(1, cfg.temporal_kernel),
                  padding="same"),
        LayerSpec("DepthwiseConv2D", kernel=(cfg.n_channels, 1),
                  depth_multiplier=cfg.depth_multiplier, activation="elu",
                  max_norm=cfg.max_norm_depthwise),
        LayerSpec("AvgPool2D", pool=(1, cfg.pool1), dropout=cfg.dropout),
        LayerSpec("SeparableConv2D", filters=cfg.f2,
                  kernel=(1, cfg.separable_kernel), padding="same",
                  activation="elu"),
        LayerSpec("AvgPool2D", pool=(1, cfg.pool2), dropout=cfg.dropout),
    )


def eegnet_spec(config: ModelConfig | None = None) -> ModelSpec:
    """Compact spatial-feature baseline: temporal conv, depthwise spatial
    filter, separable conv, two average pools, dense softmax head."""
    cfg = config or ModelConfig()
    layers = _eegnet_front_end(cfg) + (
        LayerSpec("FullyConnected", units=cfg.n_classes, max_norm=cfg.max_norm_dense),
        LayerSpec("Softmax"),
    )
    spec = ModelSpec("eegnet", layers, cfg.n_channels, cfg.n_samples, cfg.n_classes)
    propagate_shapes(spec)
    return spec


def deepconvnet_spec(config: ModelConfig | None = None) -> ModelSpec:
    """Deep temporal baseline: conv-conv-maxpool stem then three
    (conv, maxpool) stages, dense softmax head."""
    cfg = config or ModelConfig()
    f = cfg.dcn_filters
    if len(f) != 5:
        raise ValueError(f"deepconvnet needs 5 filter counts, got {f}")
    pool = LayerSpec("MaxPool2D", pool=(1, cfg.dcn_pool), stride=(1, cfg.dcn_pool),
                     dropout=cfg.dropout)
    layers = (
        LayerSpec("Conv2D", filters=f[0], kernel=(1, cfg.dcn_kernel),
                  max_norm=cfg.dcn_max_norm_conv),
        LayerSpec("Conv2D", filters=f[1], kernel=(cfg.n_channels, 1),
                  activation="elu", max_norm=cfg.dcn_max_norm_conv),
        pool,
        LayerSpec("Conv2D", filters=f[2], kernel=(1, cfg.dcn_kernel),
                  activation="elu", max_norm=cfg.dcn_max_norm_conv),
        pool,
        LayerSpec("Conv2D", filters=f[3], kernel=(1, cfg.dcn_kernel),
                  activation="elu", max_norm=cfg.dcn_max_norm_conv),
        pool,
        LayerSpec("Conv2D", filters=f[4], kernel=(1, cfg.dcn_kernel),
                  activation="elu", max_norm=cfg.dcn_max_norm_conv),
        pool,
        LayerSpec("FullyConnected", units=cfg.n_classes, max_norm=cfg.dcn_max_norm_dense),
        LayerSpec("Softmax"),
    )
    spec = ModelSpec("deepconvnet", layers, cfg.n_channels, cfg.n_samples, cfg.n_classes)
    propagate_shapes(spec)
    return spec


def fingernet_spec(config: ModelConfig | None = None) -> ModelSpec:
    """EEGNet front end followed by three (conv, avgpool) stages that extract
    higher-order temporal features, dense softmax head."""
    cfg = config or ModelConfig()
    deep = []
    for nf in cfg.deep_filters:
        deep.append(LayerSpec("Conv2D", filters=nf, kernel=(1, cfg.deep_kernel),
                              padding="same", activation="elu"))
        deep.append(LayerSpec("AvgPool2D", pool=(1, cfg.deep_pool), dropout=cfg.dropout))
    layers = _eegnet_front_end(cfg) + tuple(deep) + (
        LayerSpec("FullyConnected", units=cfg.n_classes, max_norm=cfg.max_norm_dense),
        LayerSpec("Softmax"),
    )
    spec = ModelSpec("fingernet", layers, cfg.n_channels, cfg.n_samples, cfg.n_classes)
    propagate_shapes(spec)
    return spec


MODEL_BUILDERS = {
    "eegnet": eegnet_spec,
    "deepconvnet": deepconvnet_spec,
    "fingernet": fingernet_spec,
}


# ---------------------------------------------------------------------------
# shape propagation
# ---------------------------------------------------------------------------

def _same_padding(k: int) -> tuple[int, int]:
    # even kernels pad one more at the trailing edge
    return (k - 1) // 2, k - 1 - (k - 1) // 2


def _layer_padding(ly: LayerSpec) -> tuple[tuple[int, int], tuple[int, int]]:
    if ly.padding == "valid" or ly.kernel is None:
        return (0, 0), (0, 0)
    kh, kw = ly.kernel
    return _same_padding(kh), _same_padding(kw)


def _trace(spec: ModelSpec) -> Iterator[tuple[int, LayerSpec, tuple, tuple]]:
    """Yield (index, layer, in_shape, out_shape) with shapes as (C, H, W)."""
    c, h, w = 1, spec.n_channels, spec.n_samples
    for i, ly in enumerate(spec.layers):
        shape_in = (c, h, w)
        try:
            if ly.kind == "Conv2D":
                (pt, pb), (pl, pr) = _layer_padding(ly)
                kh, kw = ly.kernel
                c, h, w = ly.filters, h + pt + pb - kh + 1, w + pl + pr - kw + 1
            elif ly.kind == "DepthwiseConv2D":
                (pt, pb), (pl, pr) = _layer_padding(ly)
                kh, kw = ly.kernel
                c = c * ly.depth_multiplier
                h, w = h + pt + pb - kh + 1, w + pl + pr - kw + 1
            elif ly.kind == "SeparableConv2D":
                (pt, pb), (pl, pr) = _layer_padding(ly)
                kh, kw = ly.kernel
                c, h, w = ly.filters, h + pt + pb - kh + 1, w + pl + pr - kw + 1
            elif ly.kind in ("AvgPool2D", "MaxPool2D"):
                kh, kw = ly.pool
                sh, sw = ly.stride if ly.stride else ly.pool
                if kh > h or kw > w:
                    raise ValueError(f"pool window ({kh},{kw}) exceeds input ({h},{w})")
                h, w = (h - kh) // sh + 1, (w - kw) // sw + 1
            elif ly.kind == "FullyConnected":
                c, h, w = ly.units, 1, 1
            elif ly.kind in ("Softmax", "Activation", "Dropout"):
                pass
            if min(c, h, w) < 1:
                raise ValueError(f"dimensions collapse to {(c, h, w)}")
        except ValueError as e:
            raise ModelShapeError(f"layer {i} ({ly.kind}): {e}") from e
        yield i, ly, shape_in, (c, h, w)


def propagate_shapes(spec: ModelSpec) -> list[tuple[int, int, int]]:
    """Symbolic (C, H, W) after every layer; raises ModelShapeError on collapse."""
    shapes = [out for _, _, _, out in _trace(spec)]
    if shapes and spec.layers[-1].kind == "Softmax":
        if shapes[-1][0] != spec.n_classes:
            raise ModelShapeError(
                f"head produces {shapes[-1][0]} values, expected {spec.n_classes}")
    return shapes


def parameter_fans(spec: ModelSpec) -> dict[str, tuple[int, int]]:
    """(fan_in, fan_out) per weight tensor, matching init_params naming."""
    fans = {}
    for i, ly, (c, _, _), _ in _trace(spec):
        if ly.kind == "Conv2D":
            kh, kw = ly.kernel
            fans[f"L{i}.kernel"] = (c * kh * kw, ly.filters * kh * kw)
        elif ly.kind == "DepthwiseConv2D":
            kh, kw = ly.kernel
            fans[f"L{i}.kernel"] = (kh * kw, ly.depth_multiplier * kh * kw)
        elif ly.kind == "SeparableConv2D":
            kh, kw = ly.kernel
            fans[f"L{i}.depthwise"] = (kh * kw, kh * kw)
            fans[f"L{i}.pointwise"] = (c, ly.filters)
        elif ly.kind == "FullyConnected":
            pass  # fan_in needs the flattened width, filled below
    for i, ly, (c, h, w), _ in _trace(spec):
        if ly.kind == "FullyConnected":
            fans[f"L{i}.weight"] = (c * h * w, ly.units)
    return fans


# ---------------------------------------------------------------------------
# runnable network
# ---------------------------------------------------------------------------

@dataclass
class Network:
    spec: ModelSpec
    params: dict[str, Tensor]
    mode: str = "train"

    def train_mode(self) -> "Network":
        self.mode = "train"
        return self

    def eval_mode(self) -> "Network":
        self.mode = "eval"
        return self


def _glorot(rng: Pcg32, shape: tuple[int, ...], fan_in: int, fan_out: int) -> Tensor:
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    vals = rng.uniform_range(-limit, limit, int(np.prod(shape))).reshape(shape)
    return Tensor(vals, requires_grad=True)


def init_params(spec: ModelSpec, seed: int) -> Network:
    """Glorot-uniform weights, zero biases; bit-deterministic given seed."""
    rng = Pcg32(seed, STREAM_INIT)
    fans = parameter_fans(spec)
    params: dict[str, Tensor] = {}
    for i, ly, (c, h, w), _ in _trace(spec):
        if ly.kind == "Conv2D":
            kh, kw = ly.kernel
            params[f"L{i}.kernel"] = _glorot(rng, (ly.filters, c, kh, kw),
                                             *fans[f"L{i}.kernel"])
            params[f"L{i}.bias"] = Tensor(np.zeros(ly.filters), requires_grad=True)
        elif ly.kind == "DepthwiseConv2D":
            kh, kw = ly.kernel
            params[f"L{i}.kernel"] = _glorot(
                rng, (c * ly.depth_multiplier, 1, kh, kw), *fans[f"L{i}.kernel"])
        elif ly.kind == "SeparableConv2D":
            kh, kw = ly.kernel
            params[f"L{i}.depthwise"] = _glorot(rng, (c, 1, kh, kw),
                                                *fans[f"L{i}.depthwise"])
            params[f"L{i}.pointwise"] = _glorot(rng, (ly.filters, c, 1, 1),
                                                *fans[f"L{i}.pointwise"])
            params[f"L{i}.bias"] = Tensor(np.zeros(ly.filters), requires_grad=True)
        elif ly.kind == "FullyConnected":
            params[f"L{i}.weight"] = _glorot(rng, (ly.units, c * h * w),
                                             *fans[f"L{i}.weight"])
            params[f"L{i}.bias"] = Tensor(np.zeros(ly.units), requires_grad=True)
    return Network(spec, params)


def _padded(x: Tensor, ly: LayerSpec) -> Tensor:
    (pt, pb), (pl, pr) = _layer_padding(ly)
    if pt or pb or pl or pr:
        return zero_pad2d(x, ((pt, pb), (pl, pr)))
    return x


def forward(network: Network, batch, rng: Pcg32 | None = None) -> Tensor:
    """Run the layer stack on batch [N,1,channels,samples]; returns logits
    [N, n_classes]. Dropout fires only in training mode and needs `rng`."""
    spec = network.spec
    x = batch if isinstance(batch, Tensor) else Tensor(batch)
    expect = (1, spec.n_channels, spec.n_samples)
    if x.data.ndim != 4 or x.data.shape[1:] != expect:
        raise ValueError(
            f"batch geometry {x.data.shape} does not match spec [N,{expect[0]},"
            f"{expect[1]},{expect[2]}]")
    training = network.mode == "train"
    has_dropout = any(ly.dropout is not None or ly.kind == "Dropout"
                      for ly in spec.layers)
    if training and has_dropout and rng is None:
        raise ValueError("training-mode forward requires an rng for dropout")

    p = network.params
    for i, ly in enumerate(spec.layers):
        if ly.kind == "Conv2D":
            x = conv2d(_padded(x, ly), p[f"L{i}.kernel"], p[f"L{i}.bias"])
        elif ly.kind == "DepthwiseConv2D":
            x = depthwise_conv2d(_padded(x, ly), p[f"L{i}.kernel"],
                                 ly.depth_multiplier)
        elif ly.kind == "SeparableConv2D":
            x = depthwise_conv2d(_padded(x, ly), p[f"L{i}.depthwise"], 1)
            x = conv2d(x, p[f"L{i}.pointwise"], p[f"L{i}.bias"])
        elif ly.kind == "AvgPool2D":
            x = avg_pool2d(x, ly.pool, ly.stride if ly.stride else ly.pool)
        elif ly.kind == "MaxPool2D":
            x = max_pool2d(x, ly.pool, ly.stride if ly.stride else ly.pool)
        elif ly.kind == "FullyConnected":
            x = reshape(x, (x.data.shape[0], -1))
            x = linear(x, p[f"L{i}.weight"], p[f"L{i}.bias"])
        elif ly.kind == "Activation":
            x = elu(x)
        elif ly.kind == "Dropout":
            x = dropout(x, ly.dropout, rng, training)
        # Softmax row: classification head marker; logits returned as-is
        if ly.activation == "elu" and ly.kind not in ("Activation",):
            x = elu(x)
        if ly.dropout is not None and ly.kind != "Dropout" and training:
            x = dropout(x, ly.dropout, rng, training)
    return x


def apply_max_norm(network: Network, caps: dict[int, float] | None = None) -> Network:
    """Rescale weight rows whose L2 norm exceeds the layer's cap to exactly
    the cap; unconstrained layers and in-cap rows are untouched."""
    constrained = {
        "Conv2D": "kernel", "DepthwiseConv2D": "kernel",
        "SeparableConv2D": "pointwise", "FullyConnected": "weight",
    }
    for i, ly in enumerate(network.spec.layers):
        cap = ly.max_norm
        if caps is not None and i in caps:
            cap = caps[i]
        if cap is None or ly.kind not in constrained:
            continue
        w = network.params[f"L{i}.{constrained[ly.kind]}"].data
        rows = w.reshape(w.shape[0], -1)
        norms = np.sqrt((rows * rows).sum(axis=1))
        over = norms > cap
        if over.any():
            rows[over] *= (cap / norms[over])[:, None]
    return network


def param_count(network: Network) -> int:
    return sum(t.data.size for t in network.params.values())
