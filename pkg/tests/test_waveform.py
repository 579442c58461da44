"""Waveform generator: length arithmetic, determinism, power calibration."""

import numpy as np
import pytest

from iqautoml.signals.waveform import (
    TechClass,
    WaveformParamError,
    WaveformParams,
    class_preset,
    generate_waveform,
    presets_pairwise_distinct,
)


def test_class_a_example_length():
    # 10 preamble reps of 64/4 samples plus 20 symbols of 64+16 samples.
    params = class_preset(TechClass.A_WIFI_LIKE, num_symbols=20, payload_seed=1)
    wave = generate_waveform(params)
    assert wave.size == 10 * 16 + 20 * 80 == 1760


def test_deterministic_per_seed():
    params = class_preset(TechClass.B_LTE_LIKE, num_symbols=10, payload_seed=99)
    a = generate_waveform(params)
    b = generate_waveform(params)
    np.testing.assert_array_equal(a, b)


def test_different_seeds_differ():
    a = generate_waveform(class_preset(TechClass.C_NR_LIKE, num_symbols=5, payload_seed=1))
    b = generate_waveform(class_preset(TechClass.C_NR_LIKE, num_symbols=5, payload_seed=2))
    assert not np.allclose(a, b)


@pytest.mark.parametrize("class_id", list(TechClass))
def test_monte_carlo_power_within_5_percent(class_id):
    # Monte-Carlo oracle: empirical mean power over 100 waveforms.
    powers = []
    for seed in range(100):
        wave = generate_waveform(class_preset(class_id, num_symbols=10, payload_seed=seed))
        powers.append(np.mean(np.abs(wave) ** 2))
    mean_power = float(np.mean(powers))
    assert abs(mean_power - 1.0) < 0.05
    # the energy invariant is tighter still: every preset stays in [0.9, 1.1]
    assert 0.9 < min(powers) and max(powers) < 1.1


def test_preamble_repeats_verbatim():
    params = class_preset(TechClass.A_WIFI_LIKE, num_symbols=4, payload_seed=3)
    wave = generate_waveform(params)
    seg = params.fft_size // 4
    first = wave[:seg]
    for rep in range(1, params.preamble_reps):
        np.testing.assert_allclose(wave[rep * seg : (rep + 1) * seg], first)


def test_cyclic_prefix_structure():
    # Last cp samples of each symbol body equal the prepended prefix.
    params = class_preset(TechClass.B_LTE_LIKE, num_symbols=3, payload_seed=11)
    wave = generate_waveform(params)
    nfft, cp = params.fft_size, params.cp_length
    sym = wave[: nfft + cp]  # no preamble for class B
    np.testing.assert_allclose(sym[:cp], sym[nfft:])


def test_presets_pairwise_distinct():
    assert presets_pairwise_distinct()


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(fft_size=0),
        dict(cp_length=-1),
        dict(cp_length=64),
        dict(preamble_reps=-2),
        dict(qam_order=8),
        dict(qam_order=256),
        dict(num_symbols=0),
    ],
)
def test_invalid_params_rejected(kwargs):
    base = dict(
        class_id=TechClass.A_WIFI_LIKE,
        fft_size=64,
        cp_length=16,
        preamble_reps=10,
        qam_order=64,
        num_symbols=5,
        payload_seed=0,
    )
    base.update(kwargs)
    with pytest.raises(WaveformParamError):
        generate_waveform(WaveformParams(**base))


def test_equal_default_lengths_across_classes():
    lengths = {class_preset(c).waveform_length for c in TechClass}
    assert len(lengths) == 1
