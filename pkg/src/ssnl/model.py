"""Bidirectional spectral-spatial classifier over hyperspectral patches.

A patch is flattened to a sequence of per-pixel spectra, layer-normalized,
and linearly projected twice. One projection runs through a depthwise 1-d
convolution + activation in sequence order; the other is reversed first and
runs through its own kernel. Each direction gets an additive learned
modulation (a dense mix of softplus-positive per-channel deltas) inside a
tanh state update, then is mean-reduced over the sequence. In parallel, a
2-d convolutional branch pools the normalized patch plane into a spatial
descriptor. The concatenated descriptor feeds a one-hidden-layer softmax
classifier. Forward/backward/spatial branches can be disabled independently
for ablations; the classifier is dimensioned at init from those flags.

Checkpoint format: ASCII magic line ``SSNLCKPT1\\n``; one ASCII config line
with all ModelConfig fields space-separated in field order (bools as 0/1);
then every parameter tensor in ``ModelParams.named_tensors`` order, each as
an ASCII shape line followed by little-endian 32-bit floats.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import Patch
from .errors import ConfigError, ContractError, MagicError, ShapeError, TruncatedError

CHECKPOINT_MAGIC = b"SSNLCKPT1\n"


@dataclass
class ModelConfig:
    bands: int
    num_classes: int
    patch_size: int = 5
    hidden_dim: int = 64
    seq_kernel: int = 3
    spatial_channels: int = 32
    spatial_kernel: int = 3
    classifier_hidden: int = 128
    activation: str = "silu"
    forward_on: bool = True
    backward_on: bool = True
    spatial_on: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be at least 1")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be at least 2")
        if self.patch_size % 2 == 0 or self.patch_size < 1:
            raise ConfigError(f"patch_size must be odd and positive, got {self.patch_size}")
        if self.seq_kernel % 2 == 0:
            raise ConfigError(f"seq_kernel must be odd, got {self.seq_kernel}")
        if self.spatial_kernel % 2 == 0:
            raise ConfigError(f"spatial_kernel must be odd, got {self.spatial_kernel}")
        if self.activation not in ("silu", "tanh"):
            raise ConfigError(f"activation must be silu or tanh, got {self.activation!r}")
        if not (self.forward_on or self.backward_on or self.spatial_on):
            raise ConfigError("at least one of forward/backward/spatial must be enabled")

    @property
    def spectral_on(self) -> bool:
        return self.forward_on or self.backward_on

    @property
    def feature_dim(self) -> int:
        """Classifier input width under the current ablation flags."""
        dim = 0
        if self.spatial_on:
            dim += self.spatial_channels
        if self.spectral_on:
            dim += self.hidden_dim
        return dim


@dataclass
class ModelParams:
    """Every learnable tensor, as autodiff leaves.

    All tensors exist regardless of ablation flags (so checkpoints are flag
    independent in layout); only the classifier input width follows the flags.
    """

    norm_gain: Tensor
    norm_bias: Tensor
    proj_fwd: Tensor       # bands x hidden projection feeding the forward path
    proj_bwd: Tensor       # bands x hidden projection feeding the reversed path
    kernel_fwd: Tensor     # hidden x seq_kernel depthwise kernels
    kernel_bwd: Tensor
    mix_fwd: Tensor        # hidden x hidden modulation mix for the forward path
    mix_bwd: Tensor
    delta_raw: Tensor      # hidden-vector, softplus-mapped to the positive deltas
    spatial_kernels: Tensor
    spatial_bias: Tensor
    classifier_w1: Tensor
    classifier_b1: Tensor
    classifier_w2: Tensor
    classifier_b2: Tensor

    def named_tensors(self):
        """Yield (name, tensor) in the fixed serialization order."""
        for f in fields(self):
            yield f.name, getattr(self, f.name)

    @property
    def dtype(self):
        return self.norm_gain.dtype

    def zero_grads(self):
        for _, t in self.named_tensors():
            t.zero_grad()


@dataclass
class ForwardTrace:
    """Intermediate activations of one forward pass."""

    x_norm: Tensor
    x_proj: Tensor | None
    z_proj_reversed: Tensor | None
    x_forward: Tensor | None
    x_backward: Tensor | None
    h_forward: Tensor | None
    h_backward: Tensor | None
    h_combined: Tensor
    h_spatial: Tensor | None
    h_final: Tensor
    logits: Tensor
    probabilities: Tensor


def expected_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    ch, d = config.bands, config.hidden_dim
    s, hc, k = config.spatial_channels, config.classifier_hidden, config.num_classes
    return {
        "norm_gain": (ch,),
        "norm_bias": (ch,),
        "proj_fwd": (ch, d),
        "proj_bwd": (ch, d),
        "kernel_fwd": (d, config.seq_kernel),
        "kernel_bwd": (d, config.seq_kernel),
        "mix_fwd": (d, d),
        "mix_bwd": (d, d),
        "delta_raw": (d,),
        "spatial_kernels": (s, ch, config.spatial_kernel, config.spatial_kernel),
        "spatial_bias": (s,),
        "classifier_w1": (hc, config.feature_dim),
        "classifier_b1": (hc,),
        "classifier_w2": (k, hc),
        "classifier_b2": (k,),
    }


_FAN_IN = {
    "proj_fwd": lambda c: c.bands,
    "proj_bwd": lambda c: c.bands,
    "kernel_fwd": lambda c: c.seq_kernel,
    "kernel_bwd": lambda c: c.seq_kernel,
    "mix_fwd": lambda c: c.hidden_dim,
    "mix_bwd": lambda c: c.hidden_dim,
    "spatial_kernels": lambda c: c.bands * c.spatial_kernel ** 2,
    "classifier_w1": lambda c: c.feature_dim,
    "classifier_w2": lambda c: c.classifier_hidden,
}


def init_model(config: ModelConfig, seed: int, dtype=np.float32) -> ModelParams:
    """Seed-deterministic initialization: weight matrices and kernels uniform in
    (-1/sqrt(fan_in), +1/sqrt(fan_in)); norm gain ones; deltas and biases zero."""
    config.validate()
    rng = np.random.default_rng(seed)
    shapes = expected_shapes(config)
    tensors: dict[str, Tensor] = {}
    for name, shape in shapes.items():
        if name in _FAN_IN:
            bound = 1.0 / np.sqrt(_FAN_IN[name](config))
            arr = rng.uniform(-bound, bound, size=shape)
        elif name == "norm_gain":
            arr = np.ones(shape)
        else:
            arr = np.zeros(shape)
        tensors[name] = Tensor(arr.astype(dtype), requires_grad=True)
    return ModelParams(**tensors)


# -- forward stages ------------------------------------------------------------------


def _patch_array(patch, config: ModelConfig, dtype) -> np.ndarray:
    arr = patch.data if isinstance(patch, Patch) else np.asarray(patch)
    if arr.shape != (config.patch_size, config.patch_size, config.bands):
        raise ShapeError(
            f"patch shape {arr.shape} does not match config "
            f"({config.patch_size}, {config.patch_size}, {config.bands})"
        )
    return arr.astype(dtype)


def normalize_input(patch, params: ModelParams, config: ModelConfig,
                    eps: float = 1e-5) -> Tensor:
    """Flatten the patch to a (p*p, bands) pixel sequence and layer-normalize
    each pixel's spectrum with the model's gain/bias."""
    arr = _patch_array(patch, config, params.dtype)
    seq = Tensor(arr.reshape(-1, config.bands))
    return ad.layer_norm(seq, params.norm_gain, params.norm_bias, eps=eps)


def project(x_norm: Tensor, params: ModelParams) -> tuple[Tensor, Tensor]:
    """Linear projections of the normalized sequence for the two directions."""
    return ad.matmul(x_norm, params.proj_fwd), ad.matmul(x_norm, params.proj_bwd)


def reverse_spectral(z_proj: Tensor) -> Tensor:
    """Reverse the sequence axis (axis 0)."""
    return ad.flip(z_proj, axis=0)


def _direction(seq: Tensor, kernel: Tensor, mix: Tensor, params: ModelParams,
               config: ModelConfig) -> tuple[Tensor, Tensor]:
    """One direction of the spectral block: depthwise conv over the sequence,
    activation, additive delta modulation inside tanh. Returns the activated
    conv output and the per-position hidden states, both (hidden, length)."""
    length = seq.shape[0]
    channels_first = ad.transpose(seq, (1, 0))
    conv_out = ad.activation(config.activation, ad.conv1d(channels_first, kernel))
    delta = ad.softplus(params.delta_raw)
    modulation = ad.matmul(mix, delta)              # (hidden,)
    expanded = ad.broadcast_to(ad.reshape(modulation, (config.hidden_dim, 1)),
                               (config.hidden_dim, length))
    hidden = ad.tanh(ad.add(conv_out, expanded))
    return conv_out, hidden


def bi_network_forward(x_norm: Tensor, params: ModelParams, config: ModelConfig,
                       trace: ForwardTrace | None = None) -> Tensor:
    """Bidirectional spectral descriptor: mean-over-sequence of each enabled
    direction's hidden states, summed. A disabled direction contributes zeros."""
    d = config.hidden_dim
    zero = Tensor(np.zeros(d, dtype=x_norm.dtype))
    fwd_mean = bwd_mean = zero
    x_proj = z_rev = x_fwd = x_bwd = h_fwd = h_bwd = None
    if config.forward_on:
        x_proj = ad.matmul(x_norm, params.proj_fwd)
        x_fwd, h_fwd = _direction(x_proj, params.kernel_fwd, params.mix_fwd,
                                  params, config)
        fwd_mean = ad.mean(h_fwd, axis=1)
    if config.backward_on:
        z_proj = ad.matmul(x_norm, params.proj_bwd)
        z_rev = reverse_spectral(z_proj)
        x_bwd, h_bwd = _direction(z_rev, params.kernel_bwd, params.mix_bwd,
                                  params, config)
        bwd_mean = ad.mean(h_bwd, axis=1)
    combined = ad.add(fwd_mean, bwd_mean)
    if trace is not None:
        trace.x_proj = x_proj
        trace.z_proj_reversed = z_rev
        trace.x_forward = x_fwd
        trace.x_backward = x_bwd
        trace.h_forward = h_fwd
        trace.h_backward = h_bwd
        trace.h_combined = combined
    return combined


def spatial_forward(patch_norm_2d: Tensor, params: ModelParams,
                    config: ModelConfig) -> Tensor:
    """Spatial descriptor: 2-d convolution over the normalized patch plane,
    activation, then global average pooling to a channel vector."""
    if not config.spatial_on:
        raise ContractError("spatial_forward called with the spatial branch disabled")
    conv = ad.conv2d(patch_norm_2d, params.spatial_kernels)
    bias = ad.broadcast_to(
        ad.reshape(params.spatial_bias, (config.spatial_channels, 1, 1)), conv.shape
    )
    activated = ad.activation(config.activation, ad.add(conv, bias))
    return ad.mean(activated, axis=(1, 2))


def model_forward(patch, params: ModelParams,
                  config: ModelConfig) -> tuple[Tensor, ForwardTrace]:
    """Full pass: normalize, bidirectional spectral block, spatial branch,
    concatenation, one-hidden-layer classifier, softmax."""
    p = config.patch_size
    x_norm = normalize_input(patch, params, config)
    trace = ForwardTrace(
        x_norm=x_norm, x_proj=None, z_proj_reversed=None, x_forward=None,
        x_backward=None, h_forward=None, h_backward=None,
        h_combined=None, h_spatial=None, h_final=None, logits=None,
        probabilities=None,
    )
    parts = []
    h_spatial = None
    if config.spatial_on:
        plane = ad.transpose(ad.reshape(x_norm, (p, p, config.bands)), (2, 0, 1))
        h_spatial = spatial_forward(plane, params, config)
        parts.append(h_spatial)
    h_combined = bi_network_forward(x_norm, params, config, trace)
    if config.spectral_on:
        parts.append(h_combined)
    h_final = parts[0] if len(parts) == 1 else ad.concat(parts)

    hidden = ad.activation(
        config.activation,
        ad.add(ad.matmul(params.classifier_w1, h_final), params.classifier_b1),
    )
    logits = ad.add(ad.matmul(params.classifier_w2, hidden), params.classifier_b2)
    probs = ad.softmax(logits)

    trace.h_spatial = h_spatial
    trace.h_final = h_final
    trace.logits = logits
    trace.probabilities = probs
    return probs, trace


def predict(patch, params: ModelParams, config: ModelConfig) -> int:
    """Class id in 1..num_classes; ties break toward the lowest class index."""
    with ad.no_grad():
        probs, _ = model_forward(patch, params, config)
    return int(np.argmax(probs.data)) + 1


# -- checkpoints ----------------------------------------------------------------------


def _config_line(config: ModelConfig) -> bytes:
    vals = []
    for f in fields(ModelConfig):
        v = getattr(config, f.name)
        if isinstance(v, bool):
            vals.append("1" if v else "0")
        else:
            vals.append(str(v))
    return (" ".join(vals) + "\n").encode("ascii")


def _parse_config_line(line: bytes, path: str) -> ModelConfig:
    parts = line.split()
    names = [f.name for f in fields(ModelConfig)]
    if len(parts) != len(names):
        raise ShapeError(f"{path}: config line has {len(parts)} fields, expected {len(names)}")
    kwargs = {}
    for f, raw in zip(fields(ModelConfig), parts):
        text = raw.decode("ascii")
        if f.type == "bool" or isinstance(f.default, bool):
            kwargs[f.name] = text == "1"
        elif f.name == "activation":
            kwargs[f.name] = text
        else:
            try:
                kwargs[f.name] = int(text)
            except ValueError:
                raise ShapeError(f"{path}: bad config field {f.name}={text!r}") from None
    return ModelConfig(**kwargs)


def save_model(path, params: ModelParams, config: ModelConfig) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(_config_line(config))
        for _, tensor in params.named_tensors():
            shape = " ".join(str(d) for d in tensor.shape)
            fh.write((shape + "\n").encode("ascii"))
            fh.write(np.ascontiguousarray(tensor.data, dtype="<f4").tobytes())


def load_model(path) -> tuple[ModelParams, ModelConfig]:
    with open(path, "rb") as fh:
        buf = fh.read()
    if not buf.startswith(CHECKPOINT_MAGIC):
        raise MagicError(f"{path}: bad magic, expected {CHECKPOINT_MAGIC!r}")
    offset = len(CHECKPOINT_MAGIC)
    end = buf.find(b"\n", offset)
    if end < 0:
        raise TruncatedError(f"{path}: missing config line")
    config = _parse_config_line(buf[offset:end], str(path))
    offset = end + 1

    shapes = expected_shapes(config)
    tensors: dict[str, Tensor] = {}
    for name, want in shapes.items():
        end = buf.find(b"\n", offset)
        if end < 0:
            raise TruncatedError(f"{path}: missing shape line for {name}")
        got = tuple(int(tok) for tok in buf[offset:end].split())
        if got != want:
            raise ShapeError(f"{path}: {name} has shape {got}, expected {want}")
        offset = end + 1
        count = int(np.prod(want, dtype=np.int64))
        nbytes = count * 4
        if len(buf) - offset < nbytes:
            raise TruncatedError(f"{path}: truncated payload for {name}")
        arr = np.frombuffer(buf[offset:offset + nbytes], dtype="<f4").reshape(want)
        offset += nbytes
        tensors[name] = Tensor(arr.astype(np.float32), requires_grad=True)
    if offset != len(buf):
        raise ShapeError(f"{path}: {len(buf) - offset} trailing bytes")
    return ModelParams(**tensors), config
