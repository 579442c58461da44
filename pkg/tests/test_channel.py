"""SIMO channel and AWGN: scalar model, multipath correlation, SNR calibration."""

import numpy as np
import pytest

from iqautoml.signals.channel import (
    ChannelParamError,
    ChannelParams,
    IQStreamSet,
    add_awgn,
    apply_simo_channel,
    draw_channel_taps,
    power_delay_profile,
)
from iqautoml.signals.waveform import TechClass, class_preset, generate_waveform


def _test_signal(n=4096, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)


def test_identity_channel():
    ch = ChannelParams(num_receivers=1, num_taps=1)
    x = _test_signal(256)
    out = apply_simo_channel(x, ch, taps=np.array([[1.0 + 0j]]))
    np.testing.assert_allclose(out.streams[0], x)


def test_scalar_channel_amplitude_and_phase():
    # Flat fading: y = M * exp(j*phi) * x, here M=2, phi=pi.
    ch = ChannelParams(num_receivers=1, num_taps=1)
    x = _test_signal(256, seed=1)
    out = apply_simo_channel(x, ch, taps=np.array([[2.0 * np.exp(1j * np.pi)]]))
    np.testing.assert_allclose(out.streams[0], -2.0 * x, atol=1e-12)


def test_flat_channel_matches_drawn_scalar_exactly():
    ch = ChannelParams(num_receivers=3, num_taps=1, seed=7)
    taps = draw_channel_taps(ch)
    x = _test_signal(512, seed=2)
    out = apply_simo_channel(x, ch, taps=taps)
    for i in range(3):
        np.testing.assert_allclose(out.streams[i], taps[i, 0] * x, rtol=1e-12)


def test_multipath_streams_distinct_and_correlated():
    # Correlation oracle: envelope correlation of each received stream with
    # the transmitted waveform stays above 0.2 over seeded runs.
    wave = generate_waveform(class_preset(TechClass.A_WIFI_LIKE, payload_seed=5))
    ch = ChannelParams(num_receivers=6, num_taps=4, tap_decay_db=3.0, seed=11)
    out = apply_simo_channel(wave, ch)
    assert out.num_receivers == 6
    for i in range(6):
        for j in range(i + 1, 6):
            assert not np.allclose(out.streams[i], out.streams[j])
    env_in = np.abs(wave)
    for i in range(6):
        corr = np.corrcoef(env_in, np.abs(out.streams[i]))[0, 1]
        assert corr > 0.2, f"receiver {i} envelope correlation {corr}"


def test_tap_profile_unit_energy():
    p = power_delay_profile(8, 3.0)
    assert p.shape == (8,)
    assert abs(p.sum() - 1.0) < 1e-12
    assert np.all(np.diff(p) < 0)


def test_drawn_taps_unit_energy_in_expectation():
    ch = ChannelParams(num_receivers=2000, num_taps=4, tap_decay_db=3.0, seed=3)
    taps = draw_channel_taps(ch)
    energy = (np.abs(taps) ** 2).sum(axis=1)
    assert abs(energy.mean() - 1.0) < 0.05


def test_channel_param_validation():
    with pytest.raises(ChannelParamError):
        apply_simo_channel(_test_signal(16), ChannelParams(num_receivers=0))
    with pytest.raises(ChannelParamError):
        apply_simo_channel(_test_signal(16), ChannelParams(num_receivers=1, num_taps=0))
    with pytest.raises(ValueError):
        apply_simo_channel(np.array([], dtype=complex), ChannelParams(num_receivers=1))


def test_awgn_noiseless_flag_passthrough():
    ss = IQStreamSet(streams=_test_signal(128)[None, :], class_id=TechClass.A_WIFI_LIKE)
    out = add_awgn(ss, None, seed=4)
    np.testing.assert_array_equal(out.streams, ss.streams)
    assert out.snr_db is None


def test_awgn_variance_at_0db():
    # Sample-variance oracle on a unit-power stream: at 0 dB the measured
    # noise variance must be 1.0 within 5%.
    n = 200_000
    x = _test_signal(n, seed=9)
    x /= np.sqrt(np.mean(np.abs(x) ** 2))
    ss = IQStreamSet(streams=x[None, :])
    out = add_awgn(ss, 0.0, seed=13)
    noise = out.streams[0] - x
    var = float(np.mean(np.abs(noise) ** 2))
    assert abs(var - 1.0) < 0.05
    assert out.snr_db == 0.0


def test_awgn_deterministic_per_seed():
    ss = IQStreamSet(streams=_test_signal(512)[None, :])
    a = add_awgn(ss, 5.0, seed=21)
    b = add_awgn(ss, 5.0, seed=21)
    np.testing.assert_array_equal(a.streams, b.streams)
    c = add_awgn(ss, 5.0, seed=22)
    assert not np.allclose(a.streams, c.streams)


@pytest.mark.parametrize("snr_db", [-10.0, 0.0, 10.0, 20.0])
def test_snr_calibration_within_half_db(snr_db):
    # Measured average SNR over receivers within +-0.5 dB for long streams.
    wave = generate_waveform(class_preset(TechClass.C_NR_LIKE, num_symbols=40, payload_seed=2))
    assert wave.size >= 10_000
    ch = ChannelParams(num_receivers=4, num_taps=3, seed=17)
    clean = apply_simo_channel(wave, ch)
    noisy = add_awgn(clean, snr_db, seed=18)
    per_stream = []
    for i in range(4):
        sig_p = np.mean(np.abs(clean.streams[i]) ** 2)
        noise_p = np.mean(np.abs(noisy.streams[i] - clean.streams[i]) ** 2)
        per_stream.append(10.0 * np.log10(sig_p / noise_p))
    assert abs(np.mean(per_stream) - snr_db) < 0.5
