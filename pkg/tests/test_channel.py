import math

import numpy as np
import pytest

from cssplc.channel import (
    ImpulseResponse,
    NoiseSpec,
    apply_awgn,
    apply_multipath,
    apply_timing_offset,
    get_preset,
    load_impulse_response,
    noise_variance,
    rayleigh_channel,
    rms_delay_spread,
    save_impulse_response,
)
from cssplc.core import ComplexSignal, argmax_bin, demodulate_fft, modulate, modulate_superbin
from cssplc.demod import decide_mod, superbin_energies
from cssplc.errors import ConfigurationError, ParameterError, ParseError

from conftest import make_params


class TestImpulseResponse:
    def test_normalizes_energy(self):
        h = ImpulseResponse(np.array([0, 3]), np.array([3.0 + 0j, 4.0 + 0j]))
        assert np.sum(np.abs(h.gains) ** 2) == pytest.approx(1.0, abs=1e-12)
        assert h.normalization == pytest.approx(25.0)
        assert h.max_delay == 3

    @pytest.mark.parametrize(
        "delays,gains",
        [
            ([], []),
            ([2, 1], [1.0, 1.0]),
            ([0, 0], [1.0, 1.0]),
            ([-1], [1.0]),
            ([0], [0.0]),
            ([0], [np.nan]),
        ],
    )
    def test_rejects_invalid(self, delays, gains):
        with pytest.raises(ParameterError):
            ImpulseResponse(np.array(delays), np.array(gains, dtype=complex))

    def test_noise_spec_rejects_nan(self):
        with pytest.raises(ParameterError):
            NoiseSpec(snr_db=float("nan"))


class TestApplyAwgn:
    def test_infinite_snr_is_identity(self):
        params = make_params(sf=8)
        w = modulate(params, 3)
        out = apply_awgn(w, NoiseSpec(snr_db=math.inf, seed=1))
        np.testing.assert_array_equal(out.samples, w.samples)

    def test_zero_db_noise_power_matches_signal_power(self):
        x = ComplexSignal(np.ones(1_000_000), 1e3)
        out = apply_awgn(x, NoiseSpec(snr_db=0.0, seed=7))
        noise = out.samples - x.samples
        assert np.mean(np.abs(noise) ** 2) == pytest.approx(1.0, rel=0.02)

    @pytest.mark.parametrize("snr_db", [-10.0, 5.0])
    def test_calibration_across_levels(self, snr_db):
        x = ComplexSignal(np.full(1_000_000, 2.0j), 1e3)
        out = apply_awgn(x, NoiseSpec(snr_db=snr_db, seed=3))
        noise = out.samples - x.samples
        expected = noise_variance(4.0, snr_db)
        assert np.mean(np.abs(noise) ** 2) == pytest.approx(expected, rel=0.02)

    def test_same_seed_same_noise(self):
        params = make_params(sf=9)
        w = modulate(params, 100)
        a = apply_awgn(w, NoiseSpec(snr_db=-3.0, seed=42))
        b = apply_awgn(w, NoiseSpec(snr_db=-3.0, seed=42))
        np.testing.assert_array_equal(a.samples, b.samples)
        c = apply_awgn(w, NoiseSpec(snr_db=-3.0, seed=43))
        assert not np.array_equal(a.samples, c.samples)

    def test_empty_signal_rejected(self):
        with pytest.raises(ParameterError):
            apply_awgn(ComplexSignal(np.zeros(0), 1e3), NoiseSpec(0.0))


class TestApplyMultipath:
    def test_identity_channel(self):
        params = make_params(sf=8)
        w = modulate(params, 77)
        out = apply_multipath(w, get_preset("identity"))
        np.testing.assert_allclose(out.samples, w.samples, atol=1e-15)

    def test_single_delayed_tap_moves_peak(self):
        params = make_params(sf=10)
        k, d = 300, 9
        h = ImpulseResponse(np.array([d]), np.array([1.0 + 0j]))
        out = apply_multipath(modulate(params, k), h)
        assert argmax_bin(demodulate_fft(params, out)) == k + d

    def test_fourtap_spreads_energy_four_bins_apart(self):
        params = make_params(sf=10)
        k = 512
        out = apply_multipath(modulate(params, k), get_preset("fourtap"))
        mags = np.abs(demodulate_fft(params, out)) ** 2
        peaks = {k, k + 4, k + 8, k + 12}
        strong = set(np.argsort(mags)[-4:])
        assert strong == peaks
        assert mags[sorted(peaks)].sum() / mags.sum() > 0.95

    def test_linearity(self, rng):
        params = make_params(sf=8)
        h = rayleigh_channel(3.0, seed=5)
        x = ComplexSignal(
            rng.standard_normal(256) + 1j * rng.standard_normal(256), params.bandwidth_hz
        )
        ax = ComplexSignal(2.5 * x.samples, params.bandwidth_hz)
        np.testing.assert_allclose(
            apply_multipath(ax, h).samples, 2.5 * apply_multipath(x, h).samples, rtol=1e-12
        )

    def test_tap_beyond_signal_rejected(self):
        h = ImpulseResponse(np.array([0, 600]), np.array([1.0 + 0j, 0.5 + 0j]))
        with pytest.raises(ConfigurationError):
            apply_multipath(ComplexSignal(np.zeros(256), 1e3), h)

    def test_containment_random_channels(self, rng):
        # any channel with max tap delay < P keeps > 95% of the spectral
        # energy inside the transmitted superbin (noiseless)
        params = make_params(sf=9, p=16)
        for trial in range(10):
            n_taps = int(rng.integers(1, 6))
            delays = np.sort(rng.choice(params.superbin_size_p, size=n_taps, replace=False))
            gains = rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)
            h = ImpulseResponse(delays, gains)
            g = int(rng.integers(0, params.g_count))
            out = apply_multipath(modulate_superbin(params, g), h)
            s = superbin_energies(params, demodulate_fft(params, out))
            assert s[g] / s.sum() > 0.95
            assert decide_mod(s) == g


class TestTimingOffset:
    def test_zero_offset_identity(self):
        params = make_params(sf=8)
        w = modulate(params, 10)
        np.testing.assert_array_equal(apply_timing_offset(w, 0).samples, w.samples)

    def test_positive_offset_delays_signal(self):
        x = ComplexSignal(np.arange(8, dtype=float) + 1, 1e3)
        out = apply_timing_offset(x, 3).samples
        np.testing.assert_array_equal(out[:3], 0)
        np.testing.assert_array_equal(out[3:], x.samples[:5])

    def test_negative_offset_advances_signal(self):
        x = ComplexSignal(np.arange(8, dtype=float) + 1, 1e3)
        out = apply_timing_offset(x, -3).samples
        np.testing.assert_array_equal(out[:5], x.samples[3:])
        np.testing.assert_array_equal(out[5:], 0)

    def test_offset_inside_superbin_keeps_decision(self):
        # frozen from the sweep oracle: early windows up to P-1 samples do
        # not change the superbin decision of a noiseless symbol
        params = make_params(sf=10, p=16)
        p = params.superbin_size_p
        for g in (0, 13, params.g_count - 1):
            w = modulate_superbin(params, g)
            out = apply_timing_offset(w, p - 1)
            s = superbin_energies(params, demodulate_fft(params, out))
            assert decide_mod(s) == g

    def test_offset_of_two_superbins_moves_decision_two(self):
        # frozen from the sweep oracle: one bin per sample means an offset
        # of 2P samples lands exactly two superbins up (cyclically)
        params = make_params(sf=10, p=16)
        p = params.superbin_size_p
        for g in (0, 13):
            w = modulate_superbin(params, g)
            out = apply_timing_offset(w, 2 * p)
            s = superbin_energies(params, demodulate_fft(params, out))
            assert decide_mod(s) == (g + 2) % params.g_count

    def test_oversized_offset_rejected(self):
        params = make_params(sf=7)
        w = modulate(params, 0)
        with pytest.raises(ConfigurationError):
            apply_timing_offset(w, 128)


class TestRmsDelaySpread:
    def test_single_tap_zero(self):
        assert rms_delay_spread(get_preset("identity")) == 0.0

    def test_two_equal_taps(self):
        h = ImpulseResponse(np.array([0, 14]), np.array([1.0 + 0j, 1.0 + 0j]))
        assert rms_delay_spread(h) == pytest.approx(7.0)

    def test_fourtap_preset(self):
        # sqrt((36 + 4 + 4 + 36) / 4) for equal taps at {0, 4, 8, 12}
        assert rms_delay_spread(get_preset("fourtap")) == pytest.approx(np.sqrt(20), rel=1e-12)


class TestRayleighChannel:
    def test_deterministic_given_seed(self):
        a = rayleigh_channel(10.0, seed=11)
        b = rayleigh_channel(10.0, seed=11)
        np.testing.assert_array_equal(a.gains, b.gains)
        assert not np.array_equal(a.gains, rayleigh_channel(10.0, seed=12).gains)

    def test_energy_normalized(self):
        h = rayleigh_channel(20.0, seed=3)
        assert np.sum(np.abs(h.gains) ** 2) == pytest.approx(1.0, abs=1e-9)

    def test_ensemble_rms_matches_target(self):
        target = 20.0
        spreads = [rms_delay_spread(rayleigh_channel(target, seed=s)) for s in range(100)]
        assert np.mean(spreads) == pytest.approx(target, rel=0.15)

    def test_single_tap_degenerate(self):
        h = rayleigh_channel(1e-9, num_taps=1, seed=0)
        assert h.delays.tolist() == [0]
        assert rms_delay_spread(h) == 0.0

    def test_rejects_nonpositive_spread(self):
        with pytest.raises(ConfigurationError):
            rayleigh_channel(0.0, seed=0)

    def test_rejects_unreachable_spread(self):
        with pytest.raises(ConfigurationError):
            rayleigh_channel(50.0, num_taps=4, seed=0)


class TestImpulseResponseCsv:
    def test_single_tap_line(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("0,1.0,0.0\n")
        h = load_impulse_response(path)
        assert h.delays.tolist() == [0]
        assert h.gains[0] == pytest.approx(1.0 + 0j)

    def test_fourtap_fixture_matches_preset(self, tmp_path):
        path = tmp_path / "fourtap.csv"
        path.write_text(
            "# four equal taps, four samples apart\n"
            "0,1.0,0.0\n4,1.0,0.0\n8,1.0,0.0\n12,1.0,0.0\n"
        )
        h = load_impulse_response(path)
        preset = get_preset("fourtap")
        np.testing.assert_array_equal(h.delays, preset.delays)
        np.testing.assert_allclose(h.gains, preset.gains, atol=1e-12)

    def test_decreasing_delays_error_carries_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1.0,0.0\n8,0.5,0.0\n4,0.5,0.0\n")
        with pytest.raises(ParseError) as err:
            load_impulse_response(path)
        assert err.value.line == 3

    def test_malformed_row_error_carries_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1.0,0.0\nnot-a-tap\n")
        with pytest.raises(ParseError) as err:
            load_impulse_response(path)
        assert err.value.line == 2

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# only a comment\n")
        with pytest.raises(ParseError):
            load_impulse_response(path)

    def test_save_load_roundtrip(self, tmp_path):
        h = rayleigh_channel(5.0, seed=9)
        path = tmp_path / "rt.csv"
        save_impulse_response(path, h, comment="roundtrip")
        back = load_impulse_response(path)
        np.testing.assert_array_equal(back.delays, h.delays)
        np.testing.assert_allclose(back.gains, h.gains, atol=1e-15)
