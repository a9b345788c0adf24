import numpy as np
import pytest

from cssplc.channel import apply_multipath, get_preset
from cssplc.core import ComplexSignal, argmax_bin, demodulate_fft, modulate, modulate_superbin
from cssplc.demod import (
    DemodFrame,
    RunningMeanState,
    decide_enhanced,
    decide_mod,
    demodulate_symbol,
    superbin_energies,
    update_enhanced,
)
from cssplc.errors import FramingError, ParameterError

from conftest import make_params, noisy


class TestSuperbinEnergies:
    def test_p1_is_bin_energy(self, rng):
        params = make_params(sf=7, p=1)
        y = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        np.testing.assert_allclose(superbin_energies(params, y), np.abs(y) ** 2, rtol=1e-12)

    def test_one_hot_bin_37_with_p16(self):
        params = make_params(sf=7, p=16)
        y = np.zeros(128, dtype=complex)
        y[37] = 1.0
        s = superbin_energies(params, y)
        expected = np.zeros(8)
        expected[2] = 1.0  # 37 lies in [32, 48)
        np.testing.assert_allclose(s, expected, atol=1e-15)

    def test_partition_completeness(self, rng):
        params = make_params(sf=9, p=32)
        y = rng.standard_normal(512) + 1j * rng.standard_normal(512)
        s = superbin_energies(params, y)
        total = float(np.sum(np.abs(y) ** 2))
        assert s.sum() == pytest.approx(total, rel=1e-9)
        assert s.shape == (params.g_count,)

    def test_wrong_length_rejected(self):
        params = make_params(sf=7, p=16)
        with pytest.raises(FramingError):
            superbin_energies(params, np.zeros(100, dtype=complex))


class TestDecisions:
    def test_simple_argmax(self):
        assert decide_mod([0.0, 0.0, 5.0, 0.0]) == 2

    def test_tie_breaks_to_lowest_index(self):
        assert decide_mod([0.0, 3.0, 1.0, 3.0]) == 1

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            decide_mod([])

    def test_enhanced_equals_mod_for_q1(self, rng):
        params = make_params(sf=7, p=16, q=1)
        state = RunningMeanState(params.g_count, 1)
        for _ in range(50):
            s = rng.gamma(2.0, 1.0, size=params.g_count)
            h = update_enhanced(state, s)
            np.testing.assert_allclose(h, s, rtol=1e-12)
            assert decide_enhanced(h) == decide_mod(s)

    def test_noiseless_fourtap_decides_correctly(self):
        params = make_params(sf=10, p=16)
        h = get_preset("fourtap")
        for g in (0, 7, 31, 63):
            out = apply_multipath(modulate_superbin(params, g), h)
            s = superbin_energies(params, demodulate_fft(params, out))
            assert decide_mod(s) == g


class TestRunningMeanState:
    def test_incremental_matches_recompute(self, rng):
        state = RunningMeanState(g_count=8, depth_q=5)
        for frame in range(23):
            h = state.update(rng.gamma(2.0, 1.0, size=8))
            np.testing.assert_allclose(h, state.recompute_mean(), rtol=1e-9)
            assert state.frames_seen == min(frame + 1, 5)

    def test_constant_input_gives_constant_mean(self):
        state = RunningMeanState(g_count=4, depth_q=6)
        s = np.array([1.0, 2.0, 3.0, 4.0])
        for _ in range(12):
            h = state.update(s)
        np.testing.assert_array_equal(h, s)

    def test_warmup_uses_frames_seen(self):
        state = RunningMeanState(g_count=2, depth_q=10)
        state.update(np.array([2.0, 0.0]))
        h = state.update(np.array([4.0, 2.0]))
        np.testing.assert_allclose(h, [3.0, 1.0])
        assert state.frames_seen == 2

    def test_window_slides_after_depth(self):
        state = RunningMeanState(g_count=1, depth_q=2)
        state.update(np.array([1.0]))
        state.update(np.array([3.0]))
        h = state.update(np.array([5.0]))  # the 1.0 frame has fallen out
        np.testing.assert_allclose(h, [4.0])

    def test_reset_forgets_history(self):
        state = RunningMeanState(g_count=2, depth_q=3)
        state.update(np.array([9.0, 9.0]))
        state.reset()
        assert state.frames_seen == 0
        h = state.update(np.array([1.0, 0.0]))
        np.testing.assert_allclose(h, [1.0, 0.0])

    def test_variance_narrows_as_one_over_q(self, rng):
        # windows of i.i.d. frames: Var(h) ~ Var(s) / Q within 10%
        q = 8
        windows = 4000
        s = rng.gamma(4.0, 1.0, size=(windows, q))
        h = s.mean(axis=1)
        ratio = h.var() * q / s.var()
        assert 0.9 < ratio < 1.1

    def test_shape_mismatch_rejected(self):
        state = RunningMeanState(g_count=4, depth_q=2)
        with pytest.raises(ParameterError):
            state.update(np.zeros(5))


class TestDemodulateSymbol:
    def test_noiseless_identity_both_decisions(self):
        params = make_params(sf=9, p=8, q=4)
        state = RunningMeanState(params.g_count, params.averaging_depth_q)
        for g in (0, 9, params.g_count - 1):
            frame = demodulate_symbol(params, modulate_superbin(params, g), state)
            assert isinstance(frame, DemodFrame)
            assert frame.decision_mod == g
            # state mixes symbols here, so only the per-frame decision is pinned

    def test_frame_fields_consistent(self, rng):
        params = make_params(sf=8, p=16, q=2)
        state = RunningMeanState(params.g_count, 2)
        w = noisy(modulate_superbin(params, 3), rng, 0.001)
        frame = demodulate_symbol(params, w, state)
        assert frame.y.shape == (params.m,)
        assert frame.s.shape == (params.g_count,)
        assert frame.h.shape == (params.g_count,)
        assert frame.s.sum() == pytest.approx(float(np.sum(np.abs(frame.y) ** 2)), rel=1e-9)
        assert frame.frame_index == 0
        frame2 = demodulate_symbol(params, w, state)
        assert frame2.frame_index == 1

    def test_stateless_call_degenerates(self, rng):
        params = make_params(sf=8, p=16)
        w = noisy(modulate_superbin(params, 5), rng, 0.01)
        frame = demodulate_symbol(params, w)
        np.testing.assert_array_equal(frame.h, frame.s)
        assert frame.decision_mod == frame.decision_enhanced

    def test_reduction_matches_plain_argmax(self, rng):
        # P=1, Q=1 pipeline is bit-for-bit conventional argmax demodulation
        params = make_params(sf=7, p=1, q=1)
        zero = ComplexSignal(np.zeros(params.m), params.bandwidth_hz)
        for _ in range(300):
            r = noisy(zero, rng, 1.0)
            frame = demodulate_symbol(params, r)
            plain = argmax_bin(demodulate_fft(params, r))
            assert frame.decision_mod == plain == frame.decision_enhanced

    def test_awgn_only_decisions_uniform(self, rng):
        from scipy import stats

        params = make_params(sf=7, p=16)
        zero = ComplexSignal(np.zeros(params.m), params.bandwidth_hz)
        counts = np.zeros(params.g_count)
        trials = 10_000
        for _ in range(trials):
            frame = demodulate_symbol(params, noisy(zero, rng, 1.0))
            counts[frame.decision_mod] += 1
        expected = trials / params.g_count
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        # chi-square with G-1 = 7 dof; reject only below p = 0.001
        assert chi2 < stats.chi2.ppf(0.999, params.g_count - 1)


class TestDeepAveraging:
    def _window_means(self, params, snr_db, q, windows, seed):
        from cssplc.harness import CaptureConfig, ChannelSpec, run_distribution_capture

        cfg = CaptureConfig(
            params=params,
            channel=ChannelSpec(kind="rayleigh", rms_delay_samples=20.0),
            snr_db=snr_db,
            frames=q * windows,
            master_seed=seed,
            symbol_g=5,
            q_values=(q,),
            normalize=False,
            channel_regeneration="fixed",
        )
        cap = run_distribution_capture(cfg)
        return cap.h_signal[q], cap.h_noise[q]

    def test_separation_visible_in_means_at_minus_40db(self):
        # at -40 dB the correct superbin's running mean still sits above the
        # average noise superbin mean once Q is deep enough
        params = make_params(sf=12, p=64, q=1500, bw=100e3)
        h_sig, h_noise = self._window_means(params, -40.0, 1500, windows=4, seed=3)
        assert h_sig.mean() > h_noise.mean()

    @pytest.mark.xfail(
        strict=False,
        reason="a running mean of depth 1500 does not clear the max of 63 "
        "averaged noise superbins at -40 dB under the per-sample SNR "
        "convention; the margin sits almost exactly at the decision "
        "threshold, so windows are split roughly evenly",
    )
    def test_decisions_correct_at_minus_40db_q1500(self):
        params = make_params(sf=12, p=64, q=1500, bw=100e3)
        h_sig, h_noise = self._window_means(params, -40.0, 1500, windows=6, seed=4)
        decisions_ok = h_sig > h_noise.max(axis=1)
        assert decisions_ok.all()
