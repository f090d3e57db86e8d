import math

import numpy as np
import pytest

from rfdae.numeric import Rng
from rfdae.synth import (MODULATIONS, ChannelSpec, constellation, make_synthetic_dataset,
                         rrc_taps, synthesize)

CLEAN = ChannelSpec(snr_db=math.inf)


class TestConstellations:
    def test_all_unit_average_power(self):
        for name in ("bpsk", "qpsk", "psk8", "pam4", "qam16", "qam64"):
            pts = constellation(name)
            assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_sizes(self):
        for name, size in (("bpsk", 2), ("qpsk", 4), ("psk8", 8), ("pam4", 4),
                           ("qam16", 16), ("qam64", 64)):
            assert len(constellation(name)) == size


class TestSynthesize:
    def test_bpsk_rect_pulse_exact_constellation(self):
        # Pure constellation path: I takes exactly the two BPSK values at
        # symbol centers (indeed at every sample), Q is exactly 0.
        rec = synthesize("bpsk", 128, CLEAN, Rng(1), pulse="rect")
        i_col = rec.features[:, 0]
        q_col = rec.features[:, 1]
        centers = i_col[::8]
        assert set(np.unique(centers)) == {np.float32(-1.0), np.float32(1.0)}
        assert np.array_equal(q_col, np.zeros(128, dtype=np.float32))

    def test_bpsk_rrc_sign_match_and_bounded_isi(self):
        # True RRC shaping is not Nyquist, so centers carry ISI; the sign at
        # each center still matches a +-1 symbol and the deviation is bounded.
        rec = synthesize("bpsk", 256, CLEAN, Rng(2), pulse="rrc")
        centers = rec.features[::8, 0]
        q_centers = rec.features[::8, 1]
        assert np.all(np.abs(np.abs(centers) - 1.0) < 0.45)
        assert np.max(np.abs(q_centers)) < 1e-6
        assert set(np.unique(np.sign(centers))) <= {-1.0, 1.0}

    def test_snr_0db_noise_power_matches_signal_power(self):
        # Same seed at +inf and 0 dB shares the symbol draws, so the
        # difference isolates the injected noise.
        clean = synthesize("qpsk", 4096, CLEAN, Rng(3)).features.astype(np.float64)
        noisy = synthesize("qpsk", 4096, ChannelSpec(snr_db=0.0), Rng(3)).features.astype(np.float64)
        noise = noisy - clean
        p_sig = np.mean(np.sum(clean ** 2, axis=1))
        p_noise = np.mean(np.sum(noise ** 2, axis=1))
        assert abs(p_noise / p_sig - 1.0) < 0.05

    @pytest.mark.parametrize("snr", [0.0, 10.0, 20.0])
    def test_empirical_snr_recovery(self, snr):
        clean = synthesize("qam16", 4096, CLEAN, Rng(4)).features.astype(np.float64)
        noisy = synthesize("qam16", 4096, ChannelSpec(snr_db=snr), Rng(4)).features.astype(np.float64)
        noise = noisy - clean
        measured = 10.0 * np.log10(np.sum(clean ** 2) / np.sum(noise ** 2))
        assert abs(measured - snr) < 0.5

    def test_phase_rotation_swaps_energy_to_q(self):
        base = synthesize("bpsk", 128, CLEAN, Rng(5), pulse="rect")
        rot = synthesize("bpsk", 128,
                         ChannelSpec(snr_db=math.inf, phase_rotation=np.pi / 2),
                         Rng(5), pulse="rect")
        e_i = np.sum(base.features[:, 0] ** 2)
        assert np.sum(rot.features[:, 0] ** 2) < 1e-12 * e_i
        assert np.sum(rot.features[:, 1] ** 2) == pytest.approx(e_i, rel=1e-6)

    def test_freq_offset_and_timing_are_applied(self):
        a = synthesize("qpsk", 64, CLEAN, Rng(6))
        b = synthesize("qpsk", 64, ChannelSpec(snr_db=math.inf, freq_offset=0.01), Rng(6))
        c = synthesize("qpsk", 64, ChannelSpec(snr_db=math.inf, timing_offset=0.5), Rng(6))
        assert not np.array_equal(a.features, b.features)
        assert not np.array_equal(a.features, c.features)

    def test_fsk_constant_envelope(self):
        for mod in ("gfsk", "cpfsk"):
            rec = synthesize(mod, 256, CLEAN, Rng(7))
            env = np.sum(rec.features.astype(np.float64) ** 2, axis=1)
            assert np.allclose(env, 1.0, atol=1e-6)

    def test_unsupported_modulation(self):
        with pytest.raises(ValueError, match="unsupported"):
            synthesize("am-dsb", 128, CLEAN, Rng(8))

    def test_too_short_rejected(self):
        with pytest.raises(ValueError, match="16"):
            synthesize("bpsk", 8, CLEAN, Rng(9))

    def test_snr_tag_sentinel(self):
        assert synthesize("bpsk", 32, CLEAN, Rng(10)).snr_db == 32767
        assert synthesize("bpsk", 32, ChannelSpec(snr_db=-19.6), Rng(10)).snr_db == -20


class TestRrcTaps:
    def test_peak_normalized_and_symmetric(self):
        taps = rrc_taps(8, 8, 0.35)
        mid = (len(taps) - 1) // 2
        assert taps[mid] == 1.0
        assert np.allclose(taps, taps[::-1], atol=1e-12)

    def test_nonzero_isi_at_symbol_offsets(self):
        # Root-raised-cosine alone is not Nyquist: taps at integer-symbol
        # offsets are nonzero (this is why the exact-constellation test
        # above uses the rect pulse).
        taps = rrc_taps(8, 8, 0.35)
        mid = (len(taps) - 1) // 2
        assert abs(taps[mid + 8]) > 0.05


class TestMakeDataset:
    def test_counts_and_lexicographic_labels(self):
        ds = make_synthetic_dataset(["qpsk", "bpsk"], [0.0, 10.0], per_class=3,
                                    n=32, seed=1)
        assert ds.class_names == ["bpsk", "qpsk"]  # sorted
        assert len(ds.records) == 2 * 2 * 3
        assert ds.n == 32 and ds.m == 2
        labels = ds.labels_array()
        assert np.count_nonzero(labels == 0) == 6

    def test_deterministic(self):
        a = make_synthetic_dataset(["bpsk"], [5.0], 2, 32, seed=9)
        b = make_synthetic_dataset(["bpsk"], [5.0], 2, 32, seed=9)
        for ra, rb in zip(a.records, b.records):
            assert np.array_equal(ra.features, rb.features)

    def test_all_modulations_generate(self):
        ds = make_synthetic_dataset(list(MODULATIONS), [10.0], 1, 64, seed=2)
        assert len(ds.records) == len(MODULATIONS)
        ds.validate()
