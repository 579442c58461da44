"""SIMO multipath channel and per-receiver AWGN.

Each receiver sees the transmitted signal through an independently drawn FIR
tap vector (Rayleigh amplitudes under an exponential power-delay profile,
uniform phases). One tap reduces to the flat-fading scalar model
y_i = M_i * exp(j*phi_i) * x exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from iqautoml.signals.waveform import TechClass

_SEED_MASK = (1 << 64) - 1


class ChannelParamError(ValueError):
    """Channel parameters violate their invariants."""


@dataclass(frozen=True)
class ChannelParams:
    num_receivers: int
    num_taps: int = 1
    tap_decay_db: float = 3.0
    seed: int = 0
    per_receiver_phase: bool = True


@dataclass
class IQStreamSet:
    """Aligned complex baseband streams from N receivers plus metadata.

    snr_db is None for noiseless data (a reserved flag rather than a magic
    float, so no infinities enter the arithmetic).
    """

    streams: np.ndarray  # (N, length), complex
    class_id: TechClass | None = None
    snr_db: float | None = None
    seeds: dict = field(default_factory=dict)
    sample_rate: float | None = None

    def __post_init__(self) -> None:
        self.streams = np.asarray(self.streams)
        if self.streams.ndim != 2:
            raise ValueError(f"streams must be 2-D (N, length), got {self.streams.shape}")
        if self.streams.shape[1] < 1:
            raise ValueError("streams must contain at least one sample")

    @property
    def num_receivers(self) -> int:
        return self.streams.shape[0]

    @property
    def length(self) -> int:
        return self.streams.shape[1]


def validate_channel(ch: ChannelParams) -> None:
    if ch.num_receivers < 1:
        raise ChannelParamError(f"num_receivers must be >= 1, got {ch.num_receivers}")
    if ch.num_taps < 1:
        raise ChannelParamError(f"num_taps must be >= 1, got {ch.num_taps}")


def power_delay_profile(num_taps: int, tap_decay_db: float) -> np.ndarray:
    """Exponential tap-power profile normalized to unit total energy."""
    p = 10.0 ** (-tap_decay_db * np.arange(num_taps) / 10.0)
    return p / p.sum()


def draw_channel_taps(ch: ChannelParams, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw (N, num_taps) complex taps: Rayleigh amplitudes, uniform phases.

    The profile carries unit total energy per receiver in expectation, so
    realizations keep honest fading variation.
    """
    validate_channel(ch)
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([ch.seed & _SEED_MASK]))
    p = power_delay_profile(ch.num_taps, ch.tap_decay_db)
    shape = (ch.num_receivers, ch.num_taps)
    taps = np.sqrt(p / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    if not ch.per_receiver_phase:
        taps = np.abs(taps).astype(complex)
    return taps


def apply_simo_channel(
    signal: np.ndarray,
    ch: ChannelParams,
    *,
    taps: np.ndarray | None = None,
    class_id: TechClass | None = None,
) -> IQStreamSet:
    """Pass one transmitted signal through N independent FIR channels.

    Per receiver i: output_i = conv(signal, taps_i) truncated to the input
    length. `taps` overrides the seeded draw (used to force exact channels in
    tests); forced taps are used verbatim, never renormalized.
    """
    signal = np.asarray(signal)
    if signal.ndim != 1 or signal.size == 0:
        raise ValueError("signal must be a non-empty 1-D complex sequence")
    validate_channel(ch)

    drawn = taps is None
    if drawn:
        taps = draw_channel_taps(ch)
    else:
        taps = np.asarray(taps, dtype=complex)
        if taps.shape != (ch.num_receivers, ch.num_taps):
            raise ChannelParamError(
                f"taps shape {taps.shape} does not match (N={ch.num_receivers}, "
                f"taps={ch.num_taps})"
            )

    n = signal.size
    out = np.empty((ch.num_receivers, n), dtype=complex)
    for i in range(ch.num_receivers):
        out[i] = np.convolve(signal, taps[i])[:n]
    return IQStreamSet(
        streams=out,
        class_id=class_id,
        snr_db=None,
        seeds={"channel": ch.seed} if drawn else {},
    )


def add_awgn(stream_set: IQStreamSet, snr_db: float | None, seed: int = 0) -> IQStreamSet:
    """Add complex AWGN per stream so each stream meets snr_db exactly.

    The noise variance is calibrated against the measured per-stream power,
    so the receiver-averaged SNR equals the target as well. snr_db=None means
    noiseless: the streams pass through unchanged.
    """
    if snr_db is None:
        return replace(stream_set, streams=stream_set.streams.copy())

    rng = np.random.default_rng(np.random.SeedSequence([seed & _SEED_MASK]))
    streams = stream_set.streams
    power = np.mean(np.abs(streams) ** 2, axis=1, keepdims=True)
    noise_var = power / (10.0 ** (snr_db / 10.0))
    noise = np.sqrt(noise_var / 2.0) * (
        rng.standard_normal(streams.shape) + 1j * rng.standard_normal(streams.shape)
    )
    seeds = dict(stream_set.seeds)
    seeds["noise"] = seed
    return replace(stream_set, streams=streams + noise, snr_db=snr_db, seeds=seeds)
