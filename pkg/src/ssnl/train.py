"""Supervised training: Adam, cross-entropy from logits, deterministic epochs.

Every source of randomness is an explicit seed. Epoch shuffles draw from a
generator seeded by a splitmix-style mix of (seed, epoch), so the whole
trajectory is a pure function of (data, split, configs).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .data import HsiCube, LabelRaster, SplitSpec, augment, extract_patch
from .errors import ConfigError, ContractError, NumericalError
from .metrics import ConfusionMatrix
from .model import ModelConfig, ModelParams, init_model, model_forward, predict


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 5e-4
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    augment: bool = True
    record_interval: int = 1      # progress-echo cadence; history records every epoch
    early_stop: bool = False
    patience: int = 20
    min_delta: float = 1e-5
    clip_norm: float | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(
            m={name: np.zeros_like(t.data) for name, t in params.named_tensors()},
            v={name: np.zeros_like(t.data) for name, t in params.named_tensors()},
        )


@dataclass
class TrainReport:
    losses: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    confusion: ConfusionMatrix | None = None
    train_seconds: float = 0.0
    test_seconds: float = 0.0

    @property
    def epochs_run(self) -> int:
        return len(self.losses)


def serialize_report(report: TrainReport, echo_lines: list[str] | None = None) -> str:
    """Plain text table, one ``epoch loss train_oa`` row per epoch.

    Contains no wall-clock figures, so re-running with identical inputs yields
    identical text.
    """
    lines = [f"# {line}" for line in (echo_lines or [])]
    lines.append("epoch loss train_oa")
    for i, (loss, acc) in enumerate(zip(report.losses, report.train_accuracy), start=1):
        lines.append(f"{i} {loss:.10e} {acc:.6f}")
    return "\n".join(lines) + "\n"


def cross_entropy(logits: ad.Tensor, label: int) -> ad.Tensor:
    """-log softmax(logits)[label], computed from logits via log-sum-exp.

    ``label`` is a 1-based class id.
    """
    k = logits.size
    if not 1 <= label <= k:
        raise ContractError(f"label {label} outside 1..{k}")
    return ad.add(ad.log_sum_exp(logits), -ad.pick(logits, label - 1))


def _mix_seed(*values: int) -> int:
    """splitmix64-style mixing of integers into one 64-bit seed."""
    mask = (1 << 64) - 1
    h = 0x9E3779B97F4A7C15
    for v in values:
        h = (h + (v & mask)) & mask
        z = h
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        h = (z ^ (z >> 31)) & mask
    return h


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], state: AdamState,
              config: TrainConfig) -> tuple[ModelParams, AdamState]:
    """One Adam update over every parameter tensor, in place."""
    state.t += 1
    t = state.t
    bias1 = 1.0 - config.beta1 ** t
    bias2 = 1.0 - config.beta2 ** t
    for name, tensor in params.named_tensors():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(tensor.data)
        if not np.isfinite(g).all():
            raise NumericalError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        tensor.data -= (config.learning_rate * m_hat /
                        (np.sqrt(v_hat) + config.adam_eps)).astype(tensor.data.dtype)
    return params, state


def _collect_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: t.grad_array() for name, t in params.named_tensors()}


def _clip_global_norm(grads: dict[str, np.ndarray], max_norm: float):
    total = float(sum((g.astype(np.float64) ** 2).sum() for g in grads.values()))
    norm = total ** 0.5
    if norm > max_norm:
        scale = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * scale


def _training_samples(cube: HsiCube, split: SplitSpec, config: ModelConfig,
                      use_augment: bool, dtype) -> tuple[list[np.ndarray], list[int]]:
    arrays: list[np.ndarray] = []
    labels: list[int] = []
    for cls, row, col in split.train_items():
        patch = extract_patch(cube, row, col, config.patch_size, label=cls)
        variants = augment(patch) if use_augment else [patch]
        for var in variants:
            arrays.append(var.data.astype(dtype))
            labels.append(cls)
    return arrays, labels


def train(cube: HsiCube, labels: LabelRaster, split: SplitSpec,
          model_config: ModelConfig, train_config: TrainConfig,
          verbose: bool = False) -> tuple[ModelParams, TrainReport]:
    """Mini-batch Adam training over the split's training pixels.

    Augmentation (when on) expands the sample list sixfold once, before the
    first epoch. Each epoch reshuffles with a (seed, epoch)-mixed generator;
    the last partial batch is kept. Returns the trained parameters and a
    report holding per-epoch mean loss, per-epoch as-trained accuracy, and
    the confusion matrix of the split's test pixels.
    """
    if split.train_count() == 0:
        missing = ", ".join(str(c) for c in split.skipped) or "all"
        raise ConfigError(f"empty training split (classes with no samples: {missing})")
    params = init_model(model_config, train_config.seed)
    state = AdamState.for_params(params)
    report = TrainReport()

    start = time.perf_counter()
    samples, sample_labels = _training_samples(
        cube, split, model_config, train_config.augment, params.dtype
    )
    n = len(samples)
    best_loss = np.inf
    stale = 0
    for epoch in range(train_config.epochs):
        rng = np.random.default_rng(_mix_seed(train_config.seed, epoch))
        order = rng.permutation(n)
        epoch_loss = 0.0
        correct = 0
        for lo in range(0, n, train_config.batch_size):
            batch = order[lo:lo + train_config.batch_size]
            params.zero_grads()
            total = None
            for idx in batch:
                probs, trace = model_forward(samples[idx], params, model_config)
                loss = cross_entropy(trace.logits, sample_labels[idx])
                total = loss if total is None else ad.add(total, loss)
                if int(np.argmax(probs.data)) + 1 == sample_labels[idx]:
                    correct += 1
            batch_loss = ad.mul(total, 1.0 / len(batch))
            batch_loss.backward()
            value = batch_loss.item()
            if not np.isfinite(value):
                raise NumericalError(f"non-finite training loss at epoch {epoch + 1}")
            epoch_loss += value * len(batch)
            grads = _collect_grads(params)
            if train_config.clip_norm is not None:
                _clip_global_norm(grads, train_config.clip_norm)
            adam_step(params, grads, state, train_config)
        mean_loss = epoch_loss / n
        report.losses.append(mean_loss)
        report.train_accuracy.append(correct / n)
        if verbose and (epoch + 1) % train_config.record_interval == 0:
            print(f"epoch {epoch + 1}: loss {mean_loss:.6f} "
                  f"train_oa {correct / n:.4f}")
        if train_config.early_stop:
            if mean_loss < best_loss - train_config.min_delta:
                best_loss = mean_loss
                stale = 0
            else:
                stale += 1
                if stale >= train_config.patience:
                    break
    report.train_seconds = time.perf_counter() - start

    start = time.perf_counter()
    coords = [(row, col) for _, row, col in split.test_items()]
    report.confusion = evaluate(params, model_config, cube, labels, coords)
    report.test_seconds = time.perf_counter() - start
    return params, report


def gradient_check_model(config: ModelConfig, seed: int, step: float = 1e-5) -> float:
    """End-to-end 64-bit gradient check of the cross-entropy loss against
    central finite differences over every parameter; returns the worst
    relative error.

    The default step balances truncation against cancellation noise for a
    loss-scale objective: at 1e-6 the difference quotient loses ~5e-11
    absolute to rounding, which swamps the relative error of coordinates
    whose true gradient is ~1e-6.
    """
    params = init_model(config, seed, dtype=np.float64)
    rng = np.random.default_rng(_mix_seed(seed, 1))
    patch = rng.standard_normal(
        (config.patch_size, config.patch_size, config.bands)
    )
    label = 1 + int(rng.integers(config.num_classes))
    names = [name for name, _ in params.named_tensors()]
    leaves = [t for _, t in params.named_tensors()]

    def fn(*tensors):
        p = ModelParams(**dict(zip(names, tensors)))
        _, trace = model_forward(patch, p, config)
        return cross_entropy(trace.logits, label)

    return ad.grad_check(fn, leaves, step=step)


def evaluate(params: ModelParams, config: ModelConfig, cube: HsiCube,
             labels: LabelRaster, coords: list[tuple[int, int]]) -> ConfusionMatrix:
    """Predict each labeled coordinate and accumulate counts[truth][prediction]."""
    cm = ConfusionMatrix.zeros(config.num_classes)
    for row, col in coords:
        truth = int(labels.labels[row, col])
        if truth < 1:
            raise ContractError(f"coordinate ({row},{col}) is unlabeled")
        if truth > config.num_classes:
            raise ContractError(
                f"coordinate ({row},{col}) has class {truth} beyond the model's "
                f"{config.num_classes} classes"
            )
        window = extract_patch(cube, row, col, config.patch_size).data
        cm.add(truth, predict(window.astype(params.dtype), params, config))
    return cm
