"""Tests for the regular LDPC construction, encoder, and decoder."""

import numpy as np
import pytest

from rislink.ldpc import (LdpcCode, build_code, decode, encode,
                          export_parity_text, parity_text_to_dense, syndrome)
from rislink.modem import qpsk_modulate, qpsk_soft_demod


class TestConstruction:
    """Structural properties of the generated parity-check matrix."""

    def test_column_weight_is_regular(self):
        """Every variable node participates in exactly three checks."""
        code = build_code(256, 0.5, seed=1)
        weights = code.column_weights
        assert np.all(weights == 3), (
            f"column weights span {weights.min()}..{weights.max()}")

    def test_row_weights_balanced(self):
        """Check degrees differ by at most one across rows."""
        code = build_code(512, 0.5, seed=2)
        weights = code.row_weights
        assert weights.max() - weights.min() <= 1, (
            f"row weights span {weights.min()}..{weights.max()}")

    def test_rate_and_lengths(self):
        """n, k, and m follow the requested rate."""
        code = build_code(1024, 0.5, seed=3)
        assert code.n == 1024
        assert code.message_len == 512
        assert code.num_checks == 512

    def test_seeded_builds_are_identical(self):
        """The same seed reproduces the same graph and encoder."""
        a = build_code(256, 0.5, seed=9)
        b = build_code(256, 0.5, seed=9)
        assert np.array_equal(a.check_cols, b.check_cols)
        assert np.array_equal(a.encode_matrix, b.encode_matrix)

    def test_different_seeds_differ(self):
        """Distinct seeds explore distinct graphs."""
        a = build_code(256, 0.5, seed=1)
        b = build_code(256, 0.5, seed=2)
        assert not np.array_equal(a.check_cols, b.check_cols)

    def test_rejects_fractional_message_length(self):
        """n * rate must be an integer."""
        with pytest.raises(ValueError):
            build_code(100, 1 / 3, seed=0)

    def test_parity_text_round_trip(self):
        """The text export reproduces the dense parity-check matrix."""
        code = build_code(128, 0.5, seed=5)
        dense = parity_text_to_dense(export_parity_text(code))
        assert np.array_equal(dense, code.parity_check_dense())


class TestEncoding:
    """Systematic encoding against the parity-check matrix."""

    def test_codeword_is_systematic(self):
        """The first k bits of a codeword are the message verbatim."""
        code = build_code(256, 0.5, seed=4)
        rng = np.random.default_rng(0)
        msg = rng.integers(0, 2, code.message_len, dtype=np.uint8)
        cw = encode(code, msg)
        assert np.array_equal(cw[:code.message_len], msg)

    def test_every_codeword_satisfies_checks(self):
        """H c^T = 0 for a batch of random messages."""
        code = build_code(256, 0.5, seed=4)
        rng = np.random.default_rng(1)
        msgs = rng.integers(0, 2, (50, code.message_len), dtype=np.uint8)
        cws = encode(code, msgs)
        assert not syndrome(code, cws).any(), "an encoded word fails a check"

    def test_encoding_is_linear(self):
        """encode(a xor b) = encode(a) xor encode(b)."""
        code = build_code(128, 0.5, seed=6)
        rng = np.random.default_rng(2)
        a = rng.integers(0, 2, code.message_len, dtype=np.uint8)
        b = rng.integers(0, 2, code.message_len, dtype=np.uint8)
        lhs = encode(code, a ^ b)
        rhs = encode(code, a) ^ encode(code, b)
        assert np.array_equal(lhs, rhs)


class TestDecoding:
    """Belief-propagation behaviour on noisy and clean inputs."""

    def test_noiseless_input_decodes_immediately(self):
        """Strong correct LLRs converge with zero errors."""
        code = build_code(256, 0.5, seed=7)
        rng = np.random.default_rng(3)
        msgs = rng.integers(0, 2, (8, code.message_len), dtype=np.uint8)
        cws = encode(code, msgs)
        llrs = 20.0 * (1.0 - 2.0 * cws.astype(np.float64))
        res = decode(code, llrs, max_iters=5)
        assert np.array_equal(res.hard_bits, cws)
        assert res.converged.all()

    def test_corrects_small_error_patterns(self):
        """A few flipped bits inside otherwise confident LLRs are repaired."""
        code = build_code(512, 0.5, seed=8)
        rng = np.random.default_rng(4)
        msg = rng.integers(0, 2, code.message_len, dtype=np.uint8)
        cw = encode(code, msg)
        llrs = 6.0 * (1.0 - 2.0 * cw.astype(np.float64))
        flip = rng.choice(code.n, size=8, replace=False)
        llrs[flip] *= -1.0
        res = decode(code, llrs, max_iters=50)
        assert np.array_equal(res.hard_bits, cw), (
            f"{np.sum(res.hard_bits != cw)} residual errors")

    def test_awgn_coding_gain(self):
        """At a moderate SNR the coded BER sits far below the raw BER."""
        code = build_code(1024, 0.5, seed=10)
        rng = np.random.default_rng(5)
        es, nvar = 1.0, 10 ** (-3.0 / 10.0)   # 3 dB Es/N0
        n_blocks = 40
        msgs = rng.integers(0, 2, (n_blocks, code.message_len), dtype=np.uint8)
        cws = encode(code, msgs)
        syms = qpsk_modulate(cws, es)
        noisy = syms + np.sqrt(nvar / 2.0) * (
            rng.standard_normal(syms.shape)
            + 1j * rng.standard_normal(syms.shape))
        llrs = qpsk_soft_demod(noisy, nvar, es)
        raw_ber = np.mean((llrs < 0) != cws.astype(bool))
        res = decode(code, llrs, max_iters=50)
        coded_ber = np.mean(res.hard_bits[:, :code.message_len]
                            != msgs)
        assert raw_ber > 0.01, f"operating point too clean: raw {raw_ber}"
        assert coded_ber < raw_ber / 10.0, (
            f"coded {coded_ber:.5f} vs raw {raw_ber:.5f}: no coding gain")

    def test_zero_iterations_returns_hard_decision(self):
        """max_iters=0 degrades to the channel hard decision."""
        code = build_code(128, 0.5, seed=11)
        rng = np.random.default_rng(6)
        llrs = rng.normal(0, 2, code.n)
        res = decode(code, llrs, max_iters=0)
        assert np.array_equal(res.hard_bits, (llrs < 0).astype(np.uint8))
        assert np.all(res.extrinsic_llrs == 0)

    def test_extrinsic_excludes_channel_prior(self):
        """Returned extrinsic plus input reproduces the posterior decision."""
        code = build_code(256, 0.5, seed=12)
        rng = np.random.default_rng(7)
        msg = rng.integers(0, 2, code.message_len, dtype=np.uint8)
        cw = encode(code, msg)
        llrs = 4.0 * (1.0 - 2.0 * cw.astype(np.float64))
        llrs += rng.normal(0, 1.0, code.n)
        res = decode(code, llrs, max_iters=25)
        posterior = llrs + res.extrinsic_llrs
        assert np.array_equal(res.hard_bits,
                              (posterior < 0).astype(np.uint8)), (
            "hard bits must be the sign of channel + extrinsic")

    def test_decoder_is_deterministic(self):
        """Identical inputs give identical outputs (no hidden state)."""
        code = build_code(256, 0.5, seed=13)
        rng = np.random.default_rng(8)
        llrs = rng.normal(0, 2, (4, code.n))
        a = decode(code, llrs, max_iters=20)
        b = decode(code, llrs, max_iters=20)
        assert np.array_equal(a.hard_bits, b.hard_bits)
        assert np.array_equal(a.extrinsic_llrs, b.extrinsic_llrs)
