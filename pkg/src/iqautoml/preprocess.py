"""Windowing, min-max normalization, classifier-input assembly, and splits.

A classifier input is a (w, 2, n) float tensor: w time steps, I then Q
components, n receiver channels, with element [l, 0, i] the l-th in-phase
sample of receiver i and [l, 1, i] the matching quadrature sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from iqautoml.signals.channel import IQStreamSet
from iqautoml.signals.waveform import TechClass

_SEED_MASK = (1 << 64) - 1
_CLASS_ORDER = {c: i for i, c in enumerate(TechClass)}


class StreamSelectionError(ValueError):
    """Requested more streams than the stream set provides."""


class WindowingError(ValueError):
    """Window size exceeds the stream length, so no window can be produced."""


class SplitError(ValueError):
    """Split ratios or inputs violate the split preconditions."""


@dataclass
class ClassifierInput:
    tensor: np.ndarray  # (w, 2, n) float32
    label: np.ndarray  # one-hot, float32

    @property
    def class_index(self) -> int:
        return int(np.argmax(self.label))


@dataclass
class SplitDataset:
    train: list[ClassifierInput]
    valid: list[ClassifierInput]
    test: list[ClassifierInput]
    split_seed: int

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.valid), len(self.test)


def window_streams(stream_set: IQStreamSet, w: int, n: int) -> np.ndarray:
    """Cut the first n streams into floor(len/w) non-overlapping windows.

    Returns a complex array of shape (num_windows, n, w); window k covers
    samples [k*w, (k+1)*w) and the trailing remainder is discarded.
    """
    if w < 1:
        raise WindowingError(f"window size must be positive, got {w}")
    if n < 1 or n > stream_set.num_receivers:
        raise StreamSelectionError(
            f"cannot select {n} streams from a set of {stream_set.num_receivers}"
        )
    length = stream_set.length
    if w > length:
        raise WindowingError(f"window of {w} samples exceeds stream length {length}")
    count = length // w
    selected = stream_set.streams[:n, : count * w]
    # (n, count, w) -> (count, n, w)
    return selected.reshape(n, count, w).transpose(1, 0, 2)


def window_to_tensor(window: np.ndarray) -> np.ndarray:
    """Convert one complex (n, w) window to the (w, 2, n) real input layout."""
    n, w = window.shape
    tensor = np.empty((w, 2, n), dtype=np.float32)
    tensor[:, 0, :] = window.real.T
    tensor[:, 1, :] = window.imag.T
    return tensor


def minmax_normalize(tensor: np.ndarray, *, joint_channels: bool = False) -> np.ndarray:
    """Map a (w, 2, n) window tensor to [0, 1].

    Default granularity is per stream channel with the min/max taken jointly
    over that channel's I and Q values; `joint_channels=True` switches to one
    min/max across the whole window (the ablation alternative). A constant
    channel maps to all zeros.
    """
    x = np.asarray(tensor, dtype=np.float32)
    axes = (0, 1, 2) if joint_channels else (0, 1)
    lo = x.min(axis=axes, keepdims=True)
    hi = x.max(axis=axes, keepdims=True)
    span = hi - lo
    out = np.zeros_like(x)
    np.divide(x - lo, span, out=out, where=span > 0)
    return out


def assemble_inputs(
    stream_sets: list[IQStreamSet],
    w: int,
    n: int,
    normalize: bool,
    *,
    num_classes: int = 3,
    joint_channels: bool = False,
) -> list[ClassifierInput]:
    """Window every stream set and label each window by its source class."""
    inputs: list[ClassifierInput] = []
    for ss in stream_sets:
        if ss.class_id is None:
            raise ValueError("stream set has no class label")
        class_index = _CLASS_ORDER[ss.class_id]
        label = np.zeros(num_classes, dtype=np.float32)
        label[class_index] = 1.0
        for window in window_streams(ss, w, n):
            tensor = window_to_tensor(window)
            if normalize:
                tensor = minmax_normalize(tensor, joint_channels=joint_channels)
            inputs.append(ClassifierInput(tensor=tensor, label=label.copy()))
    return inputs


def split_dataset(
    inputs: list[ClassifierInput],
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> SplitDataset:
    """Stratified shuffled train/valid/test split, deterministic under seed.

    Global split sizes come from cumulative rounding of the ratios; per-class
    allocations use largest-remainder rounding against those totals, keeping
    each split's class proportions close to the global ones.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must sum to 1, got {ratios}")
    if len(ratios) != 3:
        raise SplitError("expected exactly three ratios (train, valid, test)")

    by_class: dict[int, list[int]] = {}
    for idx, inp in enumerate(inputs):
        by_class.setdefault(inp.class_index, []).append(idx)
    for ci, members in sorted(by_class.items()):
        if len(members) < 5:
            raise SplitError(f"class {ci} has only {len(members)} inputs, need >= 5")

    total = len(inputs)
    g_train = round(ratios[0] * total)
    g_valid = round((ratios[0] + ratios[1]) * total) - g_train
    classes = sorted(by_class)
    counts = {ci: len(by_class[ci]) for ci in classes}

    alloc_train = _largest_remainder({ci: ratios[0] * counts[ci] for ci in classes}, g_train)
    remaining = {ci: counts[ci] - alloc_train[ci] for ci in classes}
    valid_share = ratios[1] / (ratios[1] + ratios[2])
    alloc_valid = _largest_remainder(
        {ci: valid_share * remaining[ci] for ci in classes}, g_valid
    )

    rng = np.random.default_rng(np.random.SeedSequence([seed & _SEED_MASK]))
    train_idx: list[int] = []
    valid_idx: list[int] = []
    test_idx: list[int] = []
    for ci in classes:
        members = np.array(by_class[ci])
        perm = members[rng.permutation(members.size)]
        t, v = alloc_train[ci], alloc_valid[ci]
        train_idx.extend(perm[:t].tolist())
        valid_idx.extend(perm[t : t + v].tolist())
        test_idx.extend(perm[t + v :].tolist())

    return SplitDataset(
        train=[inputs[i] for i in train_idx],
        valid=[inputs[i] for i in valid_idx],
        test=[inputs[i] for i in test_idx],
        split_seed=seed,
    )


def _largest_remainder(targets: dict[int, float], total: int) -> dict[int, int]:
    """Integer allocation matching `total` with per-key largest-remainder rounding."""
    base = {k: int(np.floor(v)) for k, v in targets.items()}
    shortfall = total - sum(base.values())
    if shortfall < 0:
        # Floors already exceed the target: trim keys with the smallest remainders.
        order = sorted(targets, key=lambda k: (targets[k] - base[k], k))
        for k in order[: -shortfall]:
            base[k] -= 1
        return base
    order = sorted(targets, key=lambda k: (base[k] - targets[k], k))
    for k in order[:shortfall]:
        base[k] += 1
    return base


def stack_inputs(inputs: list[ClassifierInput]) -> tuple[np.ndarray, np.ndarray]:
    """Stack ClassifierInputs into (X, Y) arrays for batched training."""
    if not inputs:
        raise ValueError("cannot stack an empty input list")
    x = np.stack([inp.tensor for inp in inputs]).astype(np.float32)
    y = np.stack([inp.label for inp in inputs]).astype(np.float32)
    return x, y
