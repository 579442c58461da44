"""OFDM surrogate waveforms for the three coexisting technology classes.

Each class is a structural surrogate, not a standards-compliant waveform: the
class-separating features are the preamble periodicity, cyclic-prefix length,
symbol duration, and (for class B) a fixed pilot comb. All durations are in
samples; there is no sample-rate dependence in the synthesis itself.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

# Root entropy for structures that must be identical across all waveforms of a
# class (training sequences, pilot values). Payload randomness never feeds in.
_FIXED_STRUCTURE_SEED = 0x1A57AB1E

_SEED_MASK = (1 << 64) - 1


class TechClass(enum.Enum):
    """Technology-class surrogates (Wi-Fi-like, LTE-like, 5G-NR-like)."""

    A_WIFI_LIKE = "A_wifi_like"
    B_LTE_LIKE = "B_lte_like"
    C_NR_LIKE = "C_nr_like"


class WaveformParamError(ValueError):
    """Waveform parameters violate their invariants."""


@dataclass(frozen=True)
class WaveformParams:
    class_id: TechClass
    fft_size: int
    cp_length: int
    preamble_reps: int
    qam_order: int
    num_symbols: int
    payload_seed: int = 0

    @property
    def symbol_length(self) -> int:
        return self.fft_size + self.cp_length

    @property
    def preamble_length(self) -> int:
        return self.preamble_reps * (self.fft_size // 4)

    @property
    def waveform_length(self) -> int:
        return self.preamble_length + self.num_symbols * self.symbol_length


# Built-in class presets. num_symbols defaults give all three classes the same
# waveform length (10,960 samples) so per-class window counts stay balanced.
#   A: short-training preamble, small FFT (Wi-Fi-like)
#   B: pilot comb on every 6th active bin, no preamble (LTE-like)
#   C: large FFT, no preamble, no pilots (NR-like)
_PRESETS = {
    TechClass.A_WIFI_LIKE: dict(fft_size=64, cp_length=16, preamble_reps=10, num_symbols=135),
    TechClass.B_LTE_LIKE: dict(fft_size=128, cp_length=9, preamble_reps=0, num_symbols=80),
    TechClass.C_NR_LIKE: dict(fft_size=256, cp_length=18, preamble_reps=0, num_symbols=40),
}

# Occupied subcarriers per class (split evenly around DC, DC unused).
_ACTIVE_BINS = {
    TechClass.A_WIFI_LIKE: 52,
    TechClass.B_LTE_LIKE: 72,
    TechClass.C_NR_LIKE: 160,
}

_PILOT_SPACING = {TechClass.B_LTE_LIKE: 6}


def class_preset(
    class_id: TechClass,
    *,
    num_symbols: int | None = None,
    qam_order: int = 64,
    payload_seed: int = 0,
) -> WaveformParams:
    """Built-in preset for one technology class, payload/symbol-count overridable."""
    base = _PRESETS[class_id]
    return WaveformParams(
        class_id=class_id,
        fft_size=base["fft_size"],
        cp_length=base["cp_length"],
        preamble_reps=base["preamble_reps"],
        qam_order=qam_order,
        num_symbols=num_symbols if num_symbols is not None else base["num_symbols"],
        payload_seed=payload_seed,
    )


def validate_params(params: WaveformParams) -> None:
    """Raise WaveformParamError unless params satisfy all type invariants."""
    if not isinstance(params.class_id, TechClass):
        raise WaveformParamError(f"unknown class_id: {params.class_id!r}")
    if params.fft_size < 1:
        raise WaveformParamError(f"fft_size must be positive, got {params.fft_size}")
    if params.cp_length < 0 or params.cp_length >= params.fft_size:
        raise WaveformParamError(
            f"cp_length must satisfy 0 <= cp < fft_size, got cp={params.cp_length} "
            f"fft={params.fft_size}"
        )
    if params.preamble_reps < 0:
        raise WaveformParamError(f"preamble_reps must be >= 0, got {params.preamble_reps}")
    if params.qam_order not in (4, 16, 64):
        raise WaveformParamError(f"qam_order must be one of 4/16/64, got {params.qam_order}")
    if params.num_symbols < 1:
        raise WaveformParamError(f"num_symbols must be positive, got {params.num_symbols}")


def _active_bin_indices(fft_size: int, count: int) -> np.ndarray:
    """Occupied FFT bins in negative-to-positive frequency order, DC excluded."""
    half = count // 2
    if half < 1 or half >= fft_size // 2:
        raise WaveformParamError(f"cannot place {count} active bins in fft of {fft_size}")
    negative = np.arange(fft_size - half, fft_size)
    positive = np.arange(1, half + 1)
    return np.concatenate([negative, positive])


def _qam_symbols(order: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-average-energy square-QAM symbols."""
    side = int(round(np.sqrt(order)))
    levels = 2.0 * np.arange(side) - (side - 1)
    idx = rng.integers(0, side, size=(count, 2))
    raw = levels[idx[:, 0]] + 1j * levels[idx[:, 1]]
    return raw / np.sqrt(2.0 * (order - 1) / 3.0)


def _training_sequence(fft_size: int) -> np.ndarray:
    """Fixed constant-modulus sequence of length fft_size/4, shared by every waveform."""
    rng = np.random.default_rng(np.random.SeedSequence([_FIXED_STRUCTURE_SEED, fft_size, 0]))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=fft_size // 4)
    return np.exp(1j * phases)


def _pilot_values(count: int, fft_size: int) -> np.ndarray:
    """Fixed QPSK pilot values, identical for every symbol and waveform."""
    rng = np.random.default_rng(np.random.SeedSequence([_FIXED_STRUCTURE_SEED, fft_size, 1]))
    quad = rng.integers(0, 4, size=count)
    return np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * quad))


def generate_waveform(params: WaveformParams) -> np.ndarray:
    """Generate one complex baseband waveform, unit average power.

    Layout: optional preamble (preamble_reps repetitions of a fixed
    fft_size/4-length training sequence) followed by num_symbols OFDM symbols
    of fft_size + cp_length samples each. Payload QAM symbols come from a PRNG
    seeded with payload_seed, so the output is a pure function of params.
    """
    validate_params(params)
    rng = np.random.default_rng(
        np.random.SeedSequence([params.payload_seed & _SEED_MASK, params.fft_size])
    )

    nfft = params.fft_size
    active = _active_bin_indices(nfft, _ACTIVE_BINS[params.class_id])

    pilot_step = _PILOT_SPACING.get(params.class_id, 0)
    if pilot_step:
        pilot_pos = np.arange(0, active.size, pilot_step)
        pilots = _pilot_values(pilot_pos.size, nfft)
    else:
        pilot_pos = np.empty(0, dtype=int)
        pilots = np.empty(0, dtype=complex)
    data_pos = np.setdiff1d(np.arange(active.size), pilot_pos)

    # All data symbols drawn in one call keeps generation order stable.
    data = _qam_symbols(params.qam_order, params.num_symbols * data_pos.size, rng)
    data = data.reshape(params.num_symbols, data_pos.size)

    freq = np.zeros((params.num_symbols, nfft), dtype=complex)
    freq[:, active[data_pos]] = data
    if pilot_step:
        freq[:, active[pilot_pos]] = pilots

    time = np.fft.ifft(freq, axis=1) * (nfft / np.sqrt(active.size))
    if params.cp_length:
        time = np.concatenate([time[:, -params.cp_length:], time], axis=1)

    parts = []
    if params.preamble_reps:
        parts.append(np.tile(_training_sequence(nfft), params.preamble_reps))
    parts.append(time.reshape(-1))
    wave = np.concatenate(parts)

    wave /= np.sqrt(np.mean(np.abs(wave) ** 2))
    return wave


def presets_pairwise_distinct() -> bool:
    """True when the built-in presets differ pairwise in (fft, cp, preamble_reps)."""
    keys = [
        (p["fft_size"], p["cp_length"], p["preamble_reps"]) for p in _PRESETS.values()
    ]
    return len(set(keys)) == len(keys)


def with_payload_seed(params: WaveformParams, payload_seed: int) -> WaveformParams:
    return replace(params, payload_seed=payload_seed)
