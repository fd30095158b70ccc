"""Hyperspectral cubes, labels, synthetic scenes, splits, patches, augmentation.

On-disk formats (both bit-exact round-trippable):

* Cube file — ASCII magic line ``HSICUBE1\\n``; ASCII header line
  ``<rows> <cols> <bands>\\n``; then rows*cols*bands little-endian IEEE-754
  32-bit floats in band-sequential order (band-major, then row, then col).
* Label file — ASCII magic ``HSILBL1\\n``; header ``<rows> <cols>\\n``; then
  rows*cols little-endian unsigned 16-bit ints, row-major. Label 0 means
  unlabeled/background and is never trained or scored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, HeaderError, MagicError, TruncatedError

CUBE_MAGIC = b"HSICUBE1\n"
LABEL_MAGIC = b"HSILBL1\n"


@dataclass
class HsiCube:
    """rows x cols x bands raster of reflectance values."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ContractError(f"cube values must be 3-d, got shape {self.values.shape}")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]


@dataclass
class LabelRaster:
    """rows x cols class ids; 0 = unlabeled, 1..K = classes."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2:
            raise ContractError(f"labels must be 2-d, got shape {self.labels.shape}")
        if self.labels.min() < 0:
            raise ContractError("labels must be non-negative")
        self.labels = self.labels.astype(np.int64)

    @property
    def rows(self) -> int:
        return self.labels.shape[0]

    @property
    def cols(self) -> int:
        return self.labels.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max())


@dataclass
class Patch:
    """p x p x bands window labeled by its center pixel."""

    center: tuple[int, int]
    size: int
    data: np.ndarray
    label: int | None = None


@dataclass
class SplitSpec:
    """Per-class train/test pixel coordinates derived from (labels, ratio, seed)."""

    seed: int
    ratio: float
    train: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    test: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    skipped: list[int] = field(default_factory=list)

    def train_items(self):
        """Yield (class_id, row, col) in the fixed (class, shuffled index) order."""
        for cls in sorted(self.train):
            for row, col in self.train[cls]:
                yield cls, row, col

    def test_items(self):
        for cls in sorted(self.test):
            for row, col in self.test[cls]:
                yield cls, row, col

    def train_count(self) -> int:
        return sum(len(v) for v in self.train.values())

    def test_count(self) -> int:
        return sum(len(v) for v in self.test.values())


# -- file IO --------------------------------------------------------------------


def _read_line(buf: bytes, offset: int, path: str) -> tuple[bytes, int]:
    end = buf.find(b"\n", offset)
    if end < 0:
        raise TruncatedError(f"{path}: header line missing newline")
    return buf[offset:end + 1], end + 1


def _parse_dims(line: bytes, count: int, path: str) -> tuple[int, ...]:
    parts = line.split()
    if len(parts) != count:
        raise HeaderError(f"{path}: expected {count} dimensions, got {line!r}")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise HeaderError(f"{path}: non-integer dimension in {line!r}") from None
    if any(d <= 0 for d in dims):
        raise HeaderError(f"{path}: non-positive dimension in {line!r}")
    return dims


def write_cube(path, cube: HsiCube) -> None:
    payload = np.ascontiguousarray(
        cube.values.transpose(2, 0, 1), dtype="<f4"
    )  # band-major, then row, then col
    with open(path, "wb") as fh:
        fh.write(CUBE_MAGIC)
        fh.write(f"{cube.rows} {cube.cols} {cube.bands}\n".encode("ascii"))
        fh.write(payload.tobytes())


def load_cube(path) -> HsiCube:
    with open(path, "rb") as fh:
        buf = fh.read()
    if not buf.startswith(CUBE_MAGIC):
        raise MagicError(f"{path}: bad magic, expected {CUBE_MAGIC!r}")
    header, offset = _read_line(buf, len(CUBE_MAGIC), str(path))
    rows, cols, bands = _parse_dims(header, 3, str(path))
    expected = rows * cols * bands * 4
    payload = buf[offset:]
    if len(payload) < expected:
        raise TruncatedError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    if len(payload) > expected:
        raise HeaderError(f"{path}: {len(payload) - expected} trailing bytes")
    flat = np.frombuffer(payload, dtype="<f4")
    values = flat.reshape(bands, rows, cols).transpose(1, 2, 0).astype(np.float64)
    return HsiCube(values)


def write_labels(path, raster: LabelRaster) -> None:
    if raster.labels.max() > np.iinfo(np.uint16).max:
        raise ContractError("label ids exceed the uint16 storage range")
    with open(path, "wb") as fh:
        fh.write(LABEL_MAGIC)
        fh.write(f"{raster.rows} {raster.cols}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(raster.labels, dtype="<u2").tobytes())


def load_labels(path) -> LabelRaster:
    with open(path, "rb") as fh:
        buf = fh.read()
    if not buf.startswith(LABEL_MAGIC):
        raise MagicError(f"{path}: bad magic, expected {LABEL_MAGIC!r}")
    header, offset = _read_line(buf, len(LABEL_MAGIC), str(path))
    rows, cols = _parse_dims(header, 2, str(path))
    expected = rows * cols * 2
    payload = buf[offset:]
    if len(payload) < expected:
        raise TruncatedError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    if len(payload) > expected:
        raise HeaderError(f"{path}: {len(payload) - expected} trailing bytes")
    labels = np.frombuffer(payload, dtype="<u2").reshape(rows, cols)
    return LabelRaster(labels)


# -- synthetic scenes --------------------------------------------------------------


def synthesize_cube(
    rows: int, cols: int, bands: int, classes: int, noise_sigma: float, seed: int
) -> tuple[HsiCube, LabelRaster]:
    """Deterministic striped scene: class c fills a horizontal stripe and emits a
    Gaussian spectral bump centered at band c*bands/(classes+1), plus optional
    zero-mean Gaussian noise. Every pixel is labeled (1..classes)."""
    if classes > rows:
        raise ConfigError(f"classes ({classes}) must not exceed rows ({rows})")
    if classes < 1:
        raise ConfigError("need at least one class")
    if bands < classes:
        raise ConfigError(f"bands ({bands}) must be at least classes ({classes})")
    rng = np.random.default_rng(seed)
    row_idx = np.arange(rows)
    labels = (row_idx * classes // rows + 1).astype(np.int64)
    labels = np.repeat(labels[:, None], cols, axis=1)

    band_idx = np.arange(bands, dtype=np.float64)
    width = bands / (2.0 * (classes + 1))
    centers = np.array([c * bands / (classes + 1.0) for c in range(1, classes + 1)])
    spectra = np.exp(-0.5 * ((band_idx[None, :] - centers[:, None]) / width) ** 2)

    values = spectra[labels - 1] + noise_sigma * rng.standard_normal(
        (rows, cols, bands)
    )
    return HsiCube(values), LabelRaster(labels)


# -- splitting ----------------------------------------------------------------------


def split_samples(labels: LabelRaster, ratio: float, seed: int) -> SplitSpec:
    """Stratified split: per class, a seeded shuffle puts the first
    max(1, floor(ratio*n)) pixels in train and the rest in test."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"ratio must lie in (0,1), got {ratio}")
    rng = np.random.default_rng(seed)
    spec = SplitSpec(seed=seed, ratio=ratio)
    for cls in range(1, labels.num_classes + 1):
        coords = np.argwhere(labels.labels == cls)
        n = len(coords)
        if n == 0:
            spec.skipped.append(cls)
            continue
        order = rng.permutation(n)
        take = max(1, int(math.floor(ratio * n)))
        shuffled = coords[order]
        spec.train[cls] = [(int(r), int(c)) for r, c in shuffled[:take]]
        spec.test[cls] = [(int(r), int(c)) for r, c in shuffled[take:]]
    return spec


# -- patches ------------------------------------------------------------------------


def mirror_indices(start: int, count: int, n: int) -> np.ndarray:
    """Reflect out-of-range indices about the edges (edge pixel not duplicated)."""
    idx = np.arange(start, start + count)
    if n == 1:
        return np.zeros(count, dtype=np.int64)
    period = 2 * n - 2
    m = idx % period
    return np.where(m > n - 1, period - m, m)


def extract_window(cube: HsiCube, row: int, col: int, p: int) -> np.ndarray:
    """p x p x bands window centered at (row, col) with reflect padding."""
    if p % 2 == 0:
        raise ConfigError(f"patch size must be odd, got {p}")
    if not (0 <= row < cube.rows and 0 <= col < cube.cols):
        raise ContractError(f"center ({row},{col}) outside {cube.rows}x{cube.cols} raster")
    half = p // 2
    r_idx = mirror_indices(row - half, p, cube.rows)
    c_idx = mirror_indices(col - half, p, cube.cols)
    return cube.values[np.ix_(r_idx, c_idx)].copy()


def extract_patch(cube: HsiCube, row: int, col: int, p: int, label: int | None = None) -> Patch:
    return Patch(center=(row, col), size=p, data=extract_window(cube, row, col, p), label=label)


# -- augmentation --------------------------------------------------------------------


def _rotate_nearest(data: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the patch center, nearest-neighbor, reflect fill outside."""
    p = data.shape[0]
    center = (p - 1) / 2.0
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    ii, jj = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
    di, dj = ii - center, jj - center
    src_r = np.rint(center + cos_t * di + sin_t * dj).astype(np.int64)
    src_c = np.rint(center - sin_t * di + cos_t * dj).astype(np.int64)
    if p == 1:
        src_r[:] = 0
        src_c[:] = 0
    else:
        period = 2 * p - 2
        src_r %= period
        src_r = np.where(src_r > p - 1, period - src_r, src_r)
        src_c %= period
        src_c = np.where(src_c > p - 1, period - src_c, src_c)
    return data[src_r, src_c].copy()


def augment(patch: Patch, diagonal_rotations: bool = True) -> list[Patch]:
    """Geometric training variants of one patch, all keeping its label.

    With diagonal rotations on (the default) the result is the original plus
    45/90/135-degree rotations and horizontal/vertical flips — six patches.
    90-degree rotation and the flips are exact index permutations; the 45 and
    135-degree rotations resample nearest-neighbor with reflect fill.
    """
    d = patch.data
    if d.ndim != 3 or d.shape[0] != d.shape[1]:
        raise ContractError(f"augment expects a square patch, got shape {d.shape}")

    def mk(arr):
        return Patch(center=patch.center, size=patch.size, data=arr, label=patch.label)

    variants = [mk(d.copy())]
    if diagonal_rotations:
        variants.append(mk(_rotate_nearest(d, 45.0)))
    variants.append(mk(np.rot90(d, k=1, axes=(0, 1)).copy()))
    if diagonal_rotations:
        variants.append(mk(_rotate_nearest(d, 135.0)))
    variants.append(mk(d[:, ::-1].copy()))  # horizontal flip
    variants.append(mk(d[::-1].copy()))     # vertical flip
    return variants


# -- scaling -------------------------------------------------------------------------


def scale_bands(cube: HsiCube) -> HsiCube:
    """Per-band min-max scaling to [0,1]; a constant band maps to zeros."""
    v = cube.values
    lo = v.min(axis=(0, 1))
    hi = v.max(axis=(0, 1))
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return HsiCube((v - lo) / safe)
