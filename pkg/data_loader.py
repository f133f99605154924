"""
Dataset construction: synthetic low-rank regression data, MNIST-style IDX
files and CIFAR binary batches, plus one-hot encoding and seeded
permutation/subsampling.

IDX layout (big-endian):
    [offset] [type]   [value]      [description]
    0000     u32      0x00000803   magic (images)
    0004     u32      N            number of images
    0008     u32      rows
    0012     u32      cols
    0016     u8[]                  pixels, row-wise
Label files use magic 0x00000801, a u32 count at 0004 and u8 labels from 0008.

CIFAR binary records are <label u8> <pixels u8 x 3072> (CIFAR-10) or
<coarse u8> <fine u8> <pixels u8 x 3072> (CIFAR-100).
"""
import gzip
import os
import struct
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import DatasetFormatError, DimensionError
from models import Dataset, Split

PathLike = Union[str, os.PathLike]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
MNIST_CLASSES = 10
CIFAR_PIXELS = 3072
MNIST_TEST_SPLITS = {"50k": 50000, "60k": 60000}


def one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    """classes x T matrix with a single 1.0 per column."""
    return np.eye(classes)[np.asarray(labels, dtype=np.int64)].T


def is_one_hot(Y: np.ndarray) -> bool:
    return bool(np.all((Y == 0.0) | (Y == 1.0)) and np.all(Y.sum(axis=0) == 1.0))


def synth_linear(m: int, n: int, k_true: int, T: int, noise_sigma: float, seed: int) -> Dataset:
    """
    x_t ~ N(0, I_m), y_t = B2 B1 x_t + noise_sigma * N(0, I_n) with
    B1 ~ N(0, 1/m) of shape k_true x m and B2 ~ N(0, 1/n) of shape n x k_true.
    """
    if min(m, n, k_true, T) < 1:
        raise DimensionError(f"dimensions must be >= 1, got m={m}, n={n}, k_true={k_true}, T={T}")
    if k_true > min(m, n):
        raise DimensionError(f"k_true={k_true} exceeds min(m, n)={min(m, n)}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")

    rng = np.random.default_rng(seed)
    B1 = rng.standard_normal((k_true, m)) / np.sqrt(m)
    B2 = rng.standard_normal((n, k_true)) / np.sqrt(n)
    X = rng.standard_normal((m, T))
    Y = B2 @ (B1 @ X) + noise_sigma * rng.standard_normal((n, T))
    return Dataset(name=f"synth-m{m}-n{n}-k{k_true}", X=X, Y=Y, split=Split.TRAIN)


def _read_bytes(path: PathLike) -> bytes:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def parse_idx_images(data: bytes, path: Optional[PathLike] = None) -> np.ndarray:
    """N x (rows*cols) uint8 pixel matrix."""
    if len(data) < 16:
        raise DatasetFormatError("truncated IDX image header", path, len(data))
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise DatasetFormatError(
            f"bad IDX image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}", path, 0
        )
    expected = 16 + count * rows * cols
    if len(data) < expected:
        raise DatasetFormatError(
            f"truncated IDX image file: header promises {count} images of {rows}x{cols}",
            path, len(data),
        )
    if len(data) > expected:
        raise DatasetFormatError(f"{len(data) - expected} trailing bytes in IDX image file", path, expected)
    return np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(count, rows * cols)


def parse_idx_labels(data: bytes, path: Optional[PathLike] = None) -> np.ndarray:
    if len(data) < 8:
        raise DatasetFormatError("truncated IDX label header", path, len(data))
    magic, count = struct.unpack(">II", data[:8])
    if magic != IDX_LABEL_MAGIC:
        raise DatasetFormatError(
            f"bad IDX label magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}", path, 0
        )
    if len(data) < 8 + count:
        raise DatasetFormatError(f"truncated IDX label file: header promises {count} labels", path, len(data))
    if len(data) > 8 + count:
        raise DatasetFormatError(f"{len(data) - 8 - count} trailing bytes in IDX label file", path, 8 + count)
    labels = np.frombuffer(data, dtype=np.uint8, count=count, offset=8)
    bad = np.flatnonzero(labels >= MNIST_CLASSES)
    if bad.size:
        raise DatasetFormatError(f"label {labels[bad[0]]} out of range", path, 8 + int(bad[0]))
    return labels


def load_idx(images_path: PathLike, labels_path: PathLike, normalize: bool = True,
             name: Optional[str] = None, split: Split = Split.TRAIN) -> Dataset:
    """
    Load an IDX image/label pair (optionally gzipped).

    Returns:
        Dataset with X = flattened pixels (scaled to [0, 1] when normalize)
        and Y = one-hot labels over 10 classes
    """
    pixels = parse_idx_images(_read_bytes(images_path), images_path)
    labels = parse_idx_labels(_read_bytes(labels_path), labels_path)
    if pixels.shape[0] != labels.shape[0]:
        raise DatasetFormatError(
            f"image count {pixels.shape[0]} does not match label count {labels.shape[0]}",
            labels_path, 4,
        )
    X = pixels.T.astype(np.float64)
    if normalize:
        X /= 255.0
    return Dataset(
        name=name or os.path.basename(str(images_path)),
        X=X,
        Y=one_hot(labels, MNIST_CLASSES),
        split=split,
    )


def load_cifar(paths: Sequence[PathLike], coarse_labels: bool = False, superclasses: bool = False,
               normalize: bool = True, name: Optional[str] = None,
               split: Split = Split.TRAIN) -> Dataset:
    """
    Concatenate CIFAR binary batch files.

    Args:
        paths: batch files, read in order
        coarse_labels: records carry a coarse label byte before the fine one
            (CIFAR-100 layout); Y is one-hot over the 100 fine classes
        superclasses: with coarse_labels, one-hot over the 20 coarse classes instead
    """
    if superclasses and not coarse_labels:
        raise ValueError("superclasses needs the CIFAR-100 layout (coarse_labels=True)")
    label_bytes = 2 if coarse_labels else 1
    record = label_bytes + CIFAR_PIXELS
    classes = (20 if superclasses else 100) if coarse_labels else 10
    label_column = 1 if (coarse_labels and not superclasses) else 0

    pixel_blocks: List[np.ndarray] = []
    label_blocks: List[np.ndarray] = []
    for path in paths:
        data = _read_bytes(path)
        if len(data) == 0 or len(data) % record:
            raise DatasetFormatError(
                f"file length {len(data)} is not a positive multiple of the {record}-byte record",
                path, len(data) - len(data) % record,
            )
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, record)
        labels = records[:, label_column]
        bad = np.flatnonzero(labels >= classes)
        if bad.size:
            raise DatasetFormatError(
                f"label {labels[bad[0]]} out of range for {classes} classes",
                path, int(bad[0]) * record + label_column,
            )
        pixel_blocks.append(records[:, label_bytes:])
        label_blocks.append(labels)

    if not pixel_blocks:
        raise DimensionError("load_cifar needs at least one batch file")
    X = np.concatenate(pixel_blocks).T.astype(np.float64)
    if normalize:
        X /= 255.0
    return Dataset(
        name=name or ("cifar100" if coarse_labels else "cifar10"),
        X=X,
        Y=one_hot(np.concatenate(label_blocks), classes),
        split=split,
    )


def permute(dataset: Dataset, seed: int) -> Dataset:
    order = np.random.default_rng(seed).permutation(dataset.T)
    return dataset.model_copy(update={"X": dataset.X[:, order], "Y": dataset.Y[:, order]})


def subsample(dataset: Dataset, count: int, seed: int) -> Dataset:
    """Seeded subset of `count` samples without replacement, original order kept."""
    if count < 1:
        raise DimensionError(f"subsample count must be >= 1, got {count}")
    if count >= dataset.T:
        return dataset
    keep = np.sort(np.random.default_rng(seed).choice(dataset.T, size=count, replace=False))
    return dataset.model_copy(update={"X": dataset.X[:, keep], "Y": dataset.Y[:, keep]})


def take_first(dataset: Dataset, count: int) -> Dataset:
    if count >= dataset.T:
        return dataset
    return dataset.model_copy(update={"X": dataset.X[:, :count], "Y": dataset.Y[:, :count]})


def _find_file(directories: Sequence[str], candidates: Sequence[str]) -> str:
    for directory in directories:
        for candidate in candidates:
            for suffix in ("", ".gz"):
                path = os.path.join(directory, candidate + suffix)
                if os.path.isfile(path):
                    return path
    raise FileNotFoundError(f"none of {list(candidates)} (optionally .gz) found under {list(directories)}")


def _search_dirs(data_dir: PathLike, *subdirs: str) -> List[str]:
    root = str(data_dir)
    return [os.path.join(root, sub) for sub in subdirs] + [root]


def mnist_files(data_dir: PathLike, kind: str, prefix: str) -> Tuple[str, str]:
    directories = _search_dirs(data_dir, kind, kind.upper())
    images = _find_file(directories, [f"{prefix}-images-idx3-ubyte", f"{prefix}-images.idx3-ubyte"])
    labels = _find_file(directories, [f"{prefix}-labels-idx1-ubyte", f"{prefix}-labels.idx1-ubyte"])
    return images, labels


def mnist_protocol(data_dir: PathLike, kind: str = "mnist", test_split: str = "50k") -> Tuple[Dataset, Dataset]:
    """
    Inverted protocol: train on the 10k "t10k" files and test on the
    "train" files, either their first 50,000 samples or all 60,000.
    Files are looked up in data_dir/<kind>/ and then data_dir/.
    """
    if kind not in ("mnist", "fmnist"):
        raise ValueError(f"unknown IDX dataset {kind!r}")
    if test_split not in MNIST_TEST_SPLITS:
        raise ValueError(f"test_split must be one of {sorted(MNIST_TEST_SPLITS)}, got {test_split!r}")

    train = load_idx(*mnist_files(data_dir, kind, "t10k"), name=f"{kind}-t10k", split=Split.TRAIN)
    test = load_idx(*mnist_files(data_dir, kind, "train"), name=f"{kind}-train", split=Split.TEST)
    return train, take_first(test, MNIST_TEST_SPLITS[test_split])


def cifar_protocol(data_dir: PathLike, kind: str = "cifar10") -> Tuple[Dataset, Dataset]:
    """Standard train/test batches from cifar-10-batches-bin/ or cifar-100-binary/."""
    if kind == "cifar10":
        directories = _search_dirs(data_dir, "cifar-10-batches-bin", "cifar10")
        train_paths = [_find_file(directories, [f"data_batch_{i}.bin"]) for i in range(1, 6)]
        test_paths = [_find_file(directories, ["test_batch.bin"])]
        coarse_labels = False
    elif kind == "cifar100":
        directories = _search_dirs(data_dir, "cifar-100-binary", "cifar100")
        train_paths = [_find_file(directories, ["train.bin"])]
        test_paths = [_find_file(directories, ["test.bin"])]
        coarse_labels = True
    else:
        raise ValueError(f"unknown CIFAR dataset {kind!r}")

    train = load_cifar(train_paths, coarse_labels, name=f"{kind}-train", split=Split.TRAIN)
    test = load_cifar(test_paths, coarse_labels, name=f"{kind}-test", split=Split.TEST)
    return train, test
