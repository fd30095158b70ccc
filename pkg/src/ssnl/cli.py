"""Command-line surface: synth, train, eval, map, complexity, gradcheck.

Every command is a pure function of its flags, input files, and seeds, so
repeated invocations produce byte-identical outputs. Run configuration comes
from (in increasing precedence) built-in defaults, an optional ``key=value``
config file ('#' starts a comment), and repeated ``--set key=value`` flags.
Unknown keys are rejected; the resolved configuration is echoed into outputs
for provenance.

Exit codes: 0 success, 1 usage, 2 I/O or file format, 3 contract/shape,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields

import numpy as np

from .complexity import render_complexity_report
from .data import (
    load_cube,
    load_labels,
    scale_bands,
    split_samples,
    synthesize_cube,
    write_cube,
    write_labels,
)
from .errors import (
    ConfigError,
    ContractError,
    FormatError,
    NumericalError,
    ShapeError,
)
from .metrics import render_report
from .model import ModelConfig, load_model, predict, save_model
from .render import render_class_map, write_ppm
from .train import (
    TrainConfig,
    evaluate,
    gradient_check_model,
    serialize_report,
    train,
)

GRADCHECK_TOLERANCE = 1e-5


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Every tunable of a run as flat key=value entries."""

    # model
    bands: int | None = None          # default: taken from the cube header
    num_classes: int | None = None    # default: taken from the label raster
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
    # training
    batch_size: int = 32
    learning_rate: float = 5e-4
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    augment: bool = True
    record_interval: int = 1
    early_stop: bool = False
    patience: int = 20
    min_delta: float = 1e-5
    clip_norm: float | None = None
    # splitting
    ratio: float = 0.10
    split_seed: int | None = None     # default: same as seed

    def set_key(self, key: str, raw: str, where: str = "flag"):
        try:
            f = next(f for f in fields(self) if f.name == key)
        except StopIteration:
            raise UsageError(f"{where}: unknown configuration key {key!r}") from None
        text = raw.strip()
        if f.name == "activation":
            self.activation = text
            return
        if f.name == "clip_norm":
            self.clip_norm = None if text.lower() == "none" else float(text)
            return
        kind = f.type
        try:
            if "bool" in kind:
                if text.lower() not in ("0", "1", "true", "false"):
                    raise ValueError(text)
                value = text.lower() in ("1", "true")
            elif "float" in kind:
                value = float(text)
            else:
                value = int(text)
        except ValueError:
            raise UsageError(f"{where}: bad value {raw!r} for key {key!r}") from None
        setattr(self, f.name, value)

    def read_file(self, path):
        try:
            lines = open(path, "r", encoding="ascii").read().splitlines()
        except OSError as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from None
        for lineno, line in enumerate(lines, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = stripped.partition("=")
            self.set_key(key.strip(), raw, where=f"{path}:{lineno}")

    def echo_lines(self, **extra) -> list[str]:
        pairs = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "split_seed" and v is None:
                v = self.seed
            pairs.append(f"{f.name}={'none' if v is None else v}")
        for key in sorted(extra):
            pairs.append(f"{key}={extra[key]}")
        return pairs

    def model_config(self) -> ModelConfig:
        if self.bands is None or self.num_classes is None:
            raise ConfigError("bands and num_classes must be resolved before use")
        return ModelConfig(
            bands=self.bands,
            num_classes=self.num_classes,
            patch_size=self.patch_size,
            hidden_dim=self.hidden_dim,
            seq_kernel=self.seq_kernel,
            spatial_channels=self.spatial_channels,
            spatial_kernel=self.spatial_kernel,
            classifier_hidden=self.classifier_hidden,
            activation=self.activation,
            forward_on=self.forward_on,
            backward_on=self.backward_on,
            spatial_on=self.spatial_on,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
            seed=self.seed,
            augment=self.augment,
            record_interval=self.record_interval,
            early_stop=self.early_stop,
            patience=self.patience,
            min_delta=self.min_delta,
            clip_norm=self.clip_norm,
        )


def _resolve_run_config(args, base: RunConfig | None = None) -> RunConfig:
    run = base if base is not None else RunConfig()
    if getattr(args, "config", None):
        run.read_file(args.config)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        run.set_key(key.strip(), raw)
    if getattr(args, "seed", None) is not None:
        run.seed = args.seed
    if getattr(args, "epochs", None) is not None:
        run.epochs = args.epochs
    if getattr(args, "ratio", None) is not None:
        run.ratio = args.ratio
    return run


# -- subcommands ----------------------------------------------------------------


def cmd_synth(args) -> int:
    cube, labels = synthesize_cube(
        args.rows, args.cols, args.bands, args.classes, args.noise, args.seed
    )
    write_cube(args.out_cube, cube)
    write_labels(args.out_labels, labels)
    print(
        f"synth rows={args.rows} cols={args.cols} bands={args.bands} "
        f"classes={args.classes} noise={args.noise} seed={args.seed} "
        f"cube={args.out_cube} labels={args.out_labels}"
    )
    return 0


def cmd_train(args) -> int:
    run = _resolve_run_config(args)
    cube = scale_bands(load_cube(args.cube))
    labels = load_labels(args.labels)
    if run.bands is not None and run.bands != cube.bands:
        raise ShapeError(f"config bands={run.bands} but cube has {cube.bands}")
    run.bands = cube.bands
    if run.num_classes is None:
        run.num_classes = labels.num_classes
    split_seed = run.split_seed if run.split_seed is not None else run.seed
    split = split_samples(labels, run.ratio, split_seed)
    params, report = train(
        cube, labels, split, run.model_config(), run.train_config(),
        verbose=args.verbose,
    )
    save_model(args.out_model, params, run.model_config())
    echo = run.echo_lines(cube=args.cube, labels=args.labels)
    with open(args.out_report, "w", encoding="ascii") as fh:
        fh.write(serialize_report(report, echo))
    oa = np.trace(report.confusion.counts) / max(1, report.confusion.total)
    print(
        f"train epochs={report.epochs_run} final_loss={report.losses[-1]:.6f} "
        f"test_oa={oa:.4f} train_s={report.train_seconds:.2f} "
        f"test_s={report.test_seconds:.2f} model={args.out_model}"
    )
    return 0


def cmd_eval(args) -> int:
    params, config = load_model(args.model)
    cube = scale_bands(load_cube(args.cube))
    labels = load_labels(args.labels)
    if config.bands != cube.bands:
        raise ShapeError(
            f"model expects {config.bands} bands but cube has {cube.bands}"
        )
    split = split_samples(labels, args.ratio, args.split_seed)
    coords = [(r, c) for _, r, c in split.test_items()]
    cm = evaluate(params, config, cube, labels, coords)
    print(f"# eval model={args.model} cube={args.cube} ratio={args.ratio} "
          f"split_seed={args.split_seed}")
    print(render_report(cm))
    return 0


def cmd_map(args) -> int:
    params, config = load_model(args.model)
    cube = scale_bands(load_cube(args.cube))
    if config.bands != cube.bands:
        raise ShapeError(
            f"model expects {config.bands} bands but cube has {cube.bands}"
        )
    from .data import extract_window

    ids = np.zeros((cube.rows, cube.cols), dtype=np.int64)
    for row in range(cube.rows):
        for col in range(cube.cols):
            window = extract_window(cube, row, col, config.patch_size)
            ids[row, col] = predict(window.astype(params.dtype), params, config)
    image = render_class_map(ids, config.num_classes)
    comment = f"cube={args.cube} model={args.model} classes={config.num_classes}"
    write_ppm(args.out_image, image, comment=comment)
    print(f"map {cube.rows}x{cube.cols} classes={config.num_classes} "
          f"image={args.out_image}")
    return 0


def cmd_complexity(args) -> int:
    run = _resolve_run_config(args)
    if run.bands is None:
        run.bands = args.bands
    if run.num_classes is None:
        run.num_classes = args.classes
    print(render_complexity_report(run.model_config(), batch=args.batch))
    return 0


def cmd_gradcheck(args) -> int:
    base = RunConfig(bands=6, num_classes=3, patch_size=3, hidden_dim=4,
                     spatial_channels=3, classifier_hidden=8)
    run = _resolve_run_config(args, base)
    worst = gradient_check_model(run.model_config(), args.seed)
    print(f"gradcheck seed={args.seed} worst_relative_error={worst:.3e} "
          f"tolerance={GRADCHECK_TOLERANCE:.0e}")
    if not worst < GRADCHECK_TOLERANCE:
        raise NumericalError(
            f"gradient check failed: worst relative error {worst:.3e}"
        )
    return 0


# -- parser / dispatcher -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config_flags(sub):
    sub.add_argument("--config", help="key=value config file ('#' comments)")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override one configuration key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssnl", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = parser.add_subparsers(dest="command", required=True)

    synth = subs.add_parser("synth", help="write a synthetic cube + labels")
    synth.add_argument("--rows", type=int, required=True)
    synth.add_argument("--cols", type=int, required=True)
    synth.add_argument("--bands", type=int, required=True)
    synth.add_argument("--classes", type=int, required=True)
    synth.add_argument("--noise", type=float, default=0.05)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out-cube", required=True)
    synth.add_argument("--out-labels", required=True)
    synth.set_defaults(func=cmd_synth)

    tr = subs.add_parser("train", help="train on a cube/labels pair")
    tr.add_argument("--cube", required=True)
    tr.add_argument("--labels", required=True)
    tr.add_argument("--out-model", required=True)
    tr.add_argument("--out-report", required=True)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--ratio", type=float)
    tr.add_argument("--verbose", action="store_true")
    _add_config_flags(tr)
    tr.set_defaults(func=cmd_train)

    ev = subs.add_parser("eval", help="score a checkpoint on a fresh split")
    ev.add_argument("--cube", required=True)
    ev.add_argument("--labels", required=True)
    ev.add_argument("--model", required=True)
    ev.add_argument("--ratio", type=float, default=0.10)
    ev.add_argument("--split-seed", type=int, default=0)
    ev.set_defaults(func=cmd_eval)

    mp = subs.add_parser("map", help="predict every pixel to a PPM image")
    mp.add_argument("--cube", required=True)
    mp.add_argument("--model", required=True)
    mp.add_argument("--out-image", required=True)
    mp.set_defaults(func=cmd_map)

    cx = subs.add_parser("complexity", help="parameter / MAC report")
    cx.add_argument("--bands", type=int, default=32)
    cx.add_argument("--classes", type=int, default=4)
    cx.add_argument("--batch", type=int, default=1)
    _add_config_flags(cx)
    cx.set_defaults(func=cmd_complexity)

    gc = subs.add_parser("gradcheck", help="end-to-end 64-bit gradient check")
    gc.add_argument("--seed", type=int, default=0)
    _add_config_flags(gc)
    gc.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except FormatError as exc:
        print(f"file format error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except (ShapeError, ContractError, ConfigError) as exc:
        print(f"contract error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
