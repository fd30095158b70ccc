"""ssnl: spectral-spatial nonlinear classification of hyperspectral patches.

A desk-scale, fully deterministic library: a minimal reverse-mode autodiff
engine, band-sequential cube/label file formats, a synthetic-scene generator,
stratified splitting with patch extraction and geometric augmentation, the
bidirectional spectral + spatial patch classifier, Adam training with
cross-entropy, confusion-matrix metrics (OA/AA/kappa), an exact
parameter/MAC complexity accountant, and a scripting CLI.
"""

from . import autodiff
from .autodiff import Tensor, grad_check
from .complexity import (
    count_params,
    estimate_flops,
    family_comparison,
    macs_per_patch,
    param_bytes,
    render_complexity_report,
)
from .data import (
    HsiCube,
    LabelRaster,
    Patch,
    SplitSpec,
    augment,
    extract_patch,
    extract_window,
    load_cube,
    load_labels,
    scale_bands,
    split_samples,
    synthesize_cube,
    write_cube,
    write_labels,
)
from .metrics import (
    ConfusionMatrix,
    average_accuracy,
    kappa,
    overall_accuracy,
    render_report,
)
from .model import (
    ForwardTrace,
    ModelConfig,
    ModelParams,
    bi_network_forward,
    init_model,
    load_model,
    model_forward,
    normalize_input,
    predict,
    project,
    reverse_spectral,
    save_model,
    spatial_forward,
)
from .render import class_palette, render_class_map, write_ppm
from .train import (
    AdamState,
    TrainConfig,
    TrainReport,
    adam_step,
    cross_entropy,
    evaluate,
    gradient_check_model,
    serialize_report,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "ConfusionMatrix",
    "ForwardTrace",
    "HsiCube",
    "LabelRaster",
    "ModelConfig",
    "ModelParams",
    "Patch",
    "SplitSpec",
    "Tensor",
    "TrainConfig",
    "TrainReport",
    "adam_step",
    "augment",
    "autodiff",
    "average_accuracy",
    "bi_network_forward",
    "class_palette",
    "count_params",
    "cross_entropy",
    "estimate_flops",
    "evaluate",
    "extract_patch",
    "extract_window",
    "family_comparison",
    "grad_check",
    "gradient_check_model",
    "init_model",
    "kappa",
    "load_cube",
    "load_labels",
    "load_model",
    "macs_per_patch",
    "model_forward",
    "normalize_input",
    "overall_accuracy",
    "param_bytes",
    "predict",
    "project",
    "render_class_map",
    "render_complexity_report",
    "render_report",
    "reverse_spectral",
    "save_model",
    "scale_bands",
    "serialize_report",
    "spatial_forward",
    "split_samples",
    "synthesize_cube",
    "train",
    "write_cube",
    "write_labels",
    "write_ppm",
]
