"""Labeled multi-receiver I/Q stream synthesis: waveforms, SIMO channel, noise."""

from iqautoml.signals.waveform import (
    TechClass,
    WaveformParams,
    WaveformParamError,
    class_preset,
    generate_waveform,
)
from iqautoml.signals.channel import (
    ChannelParams,
    ChannelParamError,
    IQStreamSet,
    add_awgn,
    apply_simo_channel,
    draw_channel_taps,
)
from iqautoml.signals.dataset import (
    DatasetSpec,
    RawDataset,
    build_dataset,
    derive_seed,
    load_dataset,
    save_dataset,
)

__all__ = [
    "TechClass",
    "WaveformParams",
    "WaveformParamError",
    "class_preset",
    "generate_waveform",
    "ChannelParams",
    "ChannelParamError",
    "IQStreamSet",
    "add_awgn",
    "apply_simo_channel",
    "draw_channel_taps",
    "DatasetSpec",
    "RawDataset",
    "build_dataset",
    "derive_seed",
    "load_dataset",
    "save_dataset",
]
