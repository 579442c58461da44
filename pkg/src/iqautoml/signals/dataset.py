"""Balanced raw dataset construction, the IQDS shard format, and manifests.

A raw dataset is a class-major list of IQStreamSets. Every waveform gets its
own payload/channel/noise seeds derived from the master seed, all recorded in
the manifest, so the whole dataset is reproducible from the manifest alone.

Shard format (per record): magic ``IQDS`` | version u16 LE | N u16 | stream
length u64 | N streams of interleaved float32 (I, Q) pairs, little-endian.
A per-class shard file is a concatenation of such records.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from iqautoml.signals.channel import ChannelParams, IQStreamSet, add_awgn, apply_simo_channel
from iqautoml.signals.waveform import (
    TechClass,
    WaveformParams,
    generate_waveform,
    with_payload_seed,
)

IQDS_MAGIC = b"IQDS"
IQDS_VERSION = 1
MANIFEST_NAME = "manifest.json"

_ROLE_PAYLOAD, _ROLE_CHANNEL, _ROLE_NOISE = 0, 1, 2
_SEED_MASK = (1 << 64) - 1


class DatasetSpecError(ValueError):
    """Dataset specification violates its preconditions."""


@dataclass(frozen=True)
class DatasetSpec:
    classes: tuple[WaveformParams, ...]
    waveforms_per_class: int
    channel: ChannelParams
    snr_db: float | None
    master_seed: int


@dataclass
class RawDataset:
    spec: DatasetSpec
    stream_sets: list[IQStreamSet]  # class-major order
    manifest: dict

    @property
    def content_hash(self) -> str:
        return self.manifest["content_hash"]

    def by_class(self) -> dict[TechClass, list[IQStreamSet]]:
        out: dict[TechClass, list[IQStreamSet]] = {p.class_id: [] for p in self.spec.classes}
        for ss in self.stream_sets:
            out[ss.class_id].append(ss)
        return out


def derive_seed(master: int, *path: int) -> int:
    """Deterministic 64-bit child seed for (master, path...)."""
    entropy = [master & _SEED_MASK] + [p & _SEED_MASK for p in path]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def build_dataset(spec: DatasetSpec) -> RawDataset:
    """Generate a class-balanced raw dataset of noisy multi-receiver streams."""
    if len(spec.classes) == 0:
        raise DatasetSpecError("dataset needs at least one class")
    if spec.waveforms_per_class < 1:
        raise DatasetSpecError("waveforms_per_class must be >= 1")
    class_ids = [p.class_id for p in spec.classes]
    if len(set(class_ids)) != len(class_ids):
        raise DatasetSpecError("duplicate class_id in dataset spec")

    stream_sets: list[IQStreamSet] = []
    class_entries = []
    for ci, params in enumerate(spec.classes):
        waveform_entries = []
        for k in range(spec.waveforms_per_class):
            payload_seed = derive_seed(spec.master_seed, ci, k, _ROLE_PAYLOAD)
            channel_seed = derive_seed(spec.master_seed, ci, k, _ROLE_CHANNEL)
            noise_seed = derive_seed(spec.master_seed, ci, k, _ROLE_NOISE)

            wave = generate_waveform(with_payload_seed(params, payload_seed))
            received = apply_simo_channel(
                wave,
                ChannelParams(
                    num_receivers=spec.channel.num_receivers,
                    num_taps=spec.channel.num_taps,
                    tap_decay_db=spec.channel.tap_decay_db,
                    seed=channel_seed,
                    per_receiver_phase=spec.channel.per_receiver_phase,
                ),
                class_id=params.class_id,
            )
            received.seeds["payload"] = payload_seed
            noisy = add_awgn(received, spec.snr_db, noise_seed)
            stream_sets.append(noisy)
            waveform_entries.append(
                {
                    "index": k,
                    "payload_seed": payload_seed,
                    "channel_seed": channel_seed,
                    "noise_seed": noise_seed,
                }
            )
        class_entries.append(
            {
                "class_id": params.class_id.value,
                "fft_size": params.fft_size,
                "cp_length": params.cp_length,
                "preamble_reps": params.preamble_reps,
                "qam_order": params.qam_order,
                "num_symbols": params.num_symbols,
                "count": spec.waveforms_per_class,
                "waveforms": waveform_entries,
            }
        )

    manifest = {
        "format": "iqds-manifest",
        "version": IQDS_VERSION,
        "master_seed": spec.master_seed,
        "snr_db": spec.snr_db,
        "num_receivers": spec.channel.num_receivers,
        "num_taps": spec.channel.num_taps,
        "tap_decay_db": spec.channel.tap_decay_db,
        "per_receiver_phase": spec.channel.per_receiver_phase,
        "waveforms_per_class": spec.waveforms_per_class,
        "classes": class_entries,
    }
    manifest["content_hash"] = _content_hash(manifest, stream_sets)
    return RawDataset(spec=spec, stream_sets=stream_sets, manifest=manifest)


def iqds_record_bytes(stream_set: IQStreamSet) -> bytes:
    """Serialize one IQStreamSet to an IQDS record."""
    streams = stream_set.streams
    n, length = streams.shape
    header = IQDS_MAGIC + struct.pack("<HHQ", IQDS_VERSION, n, length)
    interleaved = np.empty((n, 2 * length), dtype="<f4")
    interleaved[:, 0::2] = streams.real
    interleaved[:, 1::2] = streams.imag
    return header + interleaved.tobytes()


def read_iqds_records(data: bytes) -> list[np.ndarray]:
    """Parse concatenated IQDS records into (N, length) complex64 arrays."""
    out = []
    offset = 0
    header_len = len(IQDS_MAGIC) + struct.calcsize("<HHQ")
    while offset < len(data):
        if data[offset : offset + 4] != IQDS_MAGIC:
            raise ValueError(f"bad IQDS magic at offset {offset}")
        version, n, length = struct.unpack_from("<HHQ", data, offset + 4)
        if version != IQDS_VERSION:
            raise ValueError(f"unsupported IQDS version {version}")
        offset += header_len
        count = n * 2 * length
        flat = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset += count * 4
        pairs = flat.reshape(n, 2 * length)
        out.append((pairs[:, 0::2] + 1j * pairs[:, 1::2]).astype(np.complex64))
    return out


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _content_hash(manifest_without_hash: dict, stream_sets: list[IQStreamSet]) -> str:
    h = hashlib.sha256()
    h.update(_canonical_json(manifest_without_hash))
    for ss in stream_sets:
        h.update(hashlib.sha256(iqds_record_bytes(ss)).digest())
    return h.hexdigest()


def _shard_name(class_id: TechClass) -> str:
    return f"class_{class_id.value}.iqds"


def save_dataset(ds: RawDataset, out_dir: str | Path) -> Path:
    """Write per-class IQDS shards plus manifest.json; returns the directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_class = ds.by_class()
    shard_hashes = {}
    for params in ds.spec.classes:
        blob = b"".join(iqds_record_bytes(ss) for ss in by_class[params.class_id])
        path = out / _shard_name(params.class_id)
        path.write_bytes(blob)
        shard_hashes[_shard_name(params.class_id)] = hashlib.sha256(blob).hexdigest()
    manifest = dict(ds.manifest)
    manifest["shards"] = shard_hashes
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return out


def load_dataset(in_dir: str | Path) -> RawDataset:
    """Load a dataset directory written by save_dataset."""
    root = Path(in_dir)
    manifest = json.loads((root / MANIFEST_NAME).read_text())
    classes = []
    stream_sets: list[IQStreamSet] = []
    for entry in manifest["classes"]:
        class_id = TechClass(entry["class_id"])
        params = WaveformParams(
            class_id=class_id,
            fft_size=entry["fft_size"],
            cp_length=entry["cp_length"],
            preamble_reps=entry["preamble_reps"],
            qam_order=entry["qam_order"],
            num_symbols=entry["num_symbols"],
        )
        classes.append(params)
        blob = (root / _shard_name(class_id)).read_bytes()
        records = read_iqds_records(blob)
        if len(records) != entry["count"]:
            raise ValueError(
                f"shard for {class_id.value} holds {len(records)} records, "
                f"manifest says {entry['count']}"
            )
        for wf, streams in zip(entry["waveforms"], records):
            stream_sets.append(
                IQStreamSet(
                    streams=streams,
                    class_id=class_id,
                    snr_db=manifest["snr_db"],
                    seeds={
                        "payload": wf["payload_seed"],
                        "channel": wf["channel_seed"],
                        "noise": wf["noise_seed"],
                    },
                )
            )
    spec = DatasetSpec(
        classes=tuple(classes),
        waveforms_per_class=manifest["waveforms_per_class"],
        channel=ChannelParams(
            num_receivers=manifest["num_receivers"],
            num_taps=manifest["num_taps"],
            tap_decay_db=manifest["tap_decay_db"],
            per_receiver_phase=manifest["per_receiver_phase"],
        ),
        snr_db=manifest["snr_db"],
        master_seed=manifest["master_seed"],
    )
    # Class-major file order matches build order, so the hash fields carry over.
    manifest_core = {k: v for k, v in manifest.items() if k != "shards"}
    return RawDataset(spec=spec, stream_sets=stream_sets, manifest=manifest_core)
