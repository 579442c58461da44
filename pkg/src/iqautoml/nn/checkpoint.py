"""Versioned binary checkpoints, round-trippable for successive-halving resume.

Layout: magic ``IQCK`` | version u16 LE | header length u32 LE | JSON header |
raw little-endian array blobs in header-declared order. Blobs cover model
weights, optimizer slots, and (when present) the best-validation snapshot.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from iqautoml.nn.model import Model, ModelSpec
from iqautoml.nn.optim import make_optimizer
from iqautoml.nn.train import EpochRecord, LearnConfig, TrainedModel

CHECKPOINT_MAGIC = b"IQCK"
CHECKPOINT_VERSION = 1

_DTYPES = {"float32": "<f4", "float64": "<f8"}


class CheckpointError(ValueError):
    pass


def _array_meta(arr: np.ndarray) -> dict:
    name = str(arr.dtype)
    if name not in _DTYPES:
        raise CheckpointError(f"unsupported array dtype {name}")
    return {"shape": list(arr.shape), "dtype": name}


def save_checkpoint(tm: TrainedModel, path: str | Path) -> Path:
    path = Path(path)
    weights = tm.model.parameters()
    opt_state = tm.optimizer.state_arrays()
    best = tm.best_weights or []

    blobs = [*weights, *opt_state, *best]
    header = {
        "model_spec": tm.spec.to_dict(),
        "learn": vars(tm.learn),
        "seed": tm.seed,
        "dtype": str(np.dtype(tm.model.dtype)),
        "epochs_consumed": tm.epochs_consumed,
        "early_stopped": tm.early_stopped,
        "best_valid_loss": None if np.isinf(tm.best_valid_loss) else tm.best_valid_loss,
        "best_epoch": tm.best_epoch,
        "epochs_since_improve": tm.epochs_since_improve,
        "optimizer": {"kind": tm.optimizer.kind, "lr": tm.optimizer.lr, "t": tm.optimizer.t},
        "history": [vars(rec) for rec in tm.history],
        "counts": {
            "weights": len(weights),
            "optimizer": len(opt_state),
            "best_weights": len(best),
        },
        "arrays": [_array_meta(a) for a in blobs],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<HI", CHECKPOINT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for arr in blobs:
            fh.write(np.ascontiguousarray(arr).astype(_DTYPES[str(arr.dtype)]).tobytes())
    return path


def load_checkpoint(path: str | Path) -> TrainedModel:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, header_len = struct.unpack_from("<HI", data, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    offset = 4 + struct.calcsize("<HI")
    header = json.loads(data[offset : offset + header_len])
    offset += header_len

    arrays = []
    for meta in header["arrays"]:
        dtype = _DTYPES[meta["dtype"]]
        count = int(np.prod(meta["shape"])) if meta["shape"] else 1
        flat = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        offset += flat.nbytes
        arrays.append(flat.reshape(meta["shape"]).astype(meta["dtype"]))

    counts = header["counts"]
    n_w, n_o = counts["weights"], counts["optimizer"]
    weights = arrays[:n_w]
    opt_state = arrays[n_w : n_w + n_o]
    best = arrays[n_w + n_o :] or None

    spec = ModelSpec.from_dict(header["model_spec"])
    dtype = np.dtype(header["dtype"]).type
    model = Model(spec, init_seed=0, dtype=dtype)
    model.set_weights(weights)
    optimizer = make_optimizer(
        header["optimizer"]["kind"], header["optimizer"]["lr"], model.parameters()
    )
    optimizer.t = header["optimizer"]["t"]
    optimizer.load_state_arrays(opt_state)

    best_loss = header["best_valid_loss"]
    return TrainedModel(
        spec=spec,
        learn=LearnConfig(**header["learn"]),
        seed=header["seed"],
        model=model,
        optimizer=optimizer,
        history=[EpochRecord(**rec) for rec in header["history"]],
        epochs_consumed=header["epochs_consumed"],
        early_stopped=header["early_stopped"],
        best_valid_loss=np.inf if best_loss is None else best_loss,
        best_epoch=header["best_epoch"],
        epochs_since_improve=header["epochs_since_improve"],
        best_weights=best,
    )
