import os
import unittest

import numpy as np
import torch

from ddvc.codec.bitstream.container import pack_container, parse_container
from ddvc.codec.classic.correlation import (
    ALPHA_MAX,
    LaplacianModel,
    bit_probability,
    laplacian_fit,
    plane_llr,
    reconstruct_bands,
    soft_input,
)
from ddvc.codec.classic.dct import BAND_COUNT, dct4
from ddvc.codec.classic.ldpca import LLR_CLIP, LdpcaCode, binary_entropy, crc8
from ddvc.codec.classic.quantizer import (
    QuantizedBands,
    dequantize,
    float32_ceil,
    from_bit_planes,
    qi_levels,
    quantize_bands,
    to_bit_planes,
)
from ddvc.codec.classic.sw_check import bsc_llr, sw_rate_check
from ddvc.codec.coders.classic import ClassicCodec, calibrate_alphas
from ddvc.codec.coders.deep import DeepCodec
from ddvc.codec.config import CodecConfig
from ddvc.codec.errors import BitstreamError, ContractError, ParameterError
from ddvc.codec.model import DistributedVideoCodec
from ddvc.codec.types import EncodedFrame, Frame, FrameRole, VideoSequence


SLOW = os.getenv("DDVC_SLOW_TESTS") == "1"


class TestDct(unittest.TestCase):
    def test_constant_block(self):
        # Verifies a constant 4×4 block has DC = 4c and zero AC bands.
        bands = dct4(np.full((4, 4), 0.25))
        self.assertAlmostEqual(float(bands[0, 0, 0]), 1.0, places=12)
        self.assertTrue(np.allclose(bands[1:], 0.0, atol=1e-12))

    def test_inverse_and_energy(self):
        # Verifies the inverse restores the plane and the transform preserves energy.
        plane = np.random.default_rng(0).random((16, 24))
        bands = dct4(plane)
        self.assertEqual(bands.shape, (BAND_COUNT, 4, 6))
        self.assertTrue(np.allclose(dct4(bands, inverse=True), plane, atol=1e-12))
        self.assertAlmostEqual(float((bands**2).sum()), float((plane**2).sum()), places=9)

    def test_band_layout(self):
        # Verifies band 4u+v holds coefficient (u, v) of each block.
        plane = np.zeros((4, 8))
        plane[:, 4:] = np.cos(np.pi * (2 * np.arange(4) + 1) / 8)[None, :]
        bands = dct4(plane)
        self.assertAlmostEqual(float(bands[1, 0, 0]), 0.0, places=12)
        self.assertGreater(abs(float(bands[1, 0, 1])), 1.0)
        self.assertAlmostEqual(float(bands[4, 0, 1]), 0.0, places=12)

    def test_indivisible_plane(self):
        # Verifies planes whose sides are not multiples of 4 are refused.
        with self.assertRaises(ParameterError):
            dct4(np.zeros((6, 8)))


class TestQuantizer(unittest.TestCase):
    def test_qi_presets(self):
        # Verifies qi 1 codes the DC and the first two AC bands and qi 9 is refused.
        levels = qi_levels(1)
        self.assertEqual(levels.shape, (16,))
        self.assertEqual(np.flatnonzero(levels).tolist(), [0, 1, 4])
        self.assertEqual(int(levels[0]), 16)
        with self.assertRaises(ParameterError):
            qi_levels(9)

    def test_dc_cell_index(self):
        # Verifies a DC value of 1.0 with 16 levels over [0, 4] lands in cell 4.
        bands = np.zeros((BAND_COUNT, 1, 1))
        bands[0] = 1.0
        quantized = quantize_bands(bands, qi_levels(1))
        self.assertEqual(int(quantized.symbols[0][0, 0]), 4)
        self.assertIsNone(quantized.symbols[2])
        self.assertTrue(bool(quantized.skipped[2]))

    def test_midpoint_error_bound(self):
        # Verifies dequantized midpoints are within half a cell of the coefficients.
        bands = np.random.default_rng(1).uniform(-1.0, 1.0, (BAND_COUNT, 8, 8))
        bands[0] = np.abs(bands[0]) * 3.0
        levels = qi_levels(8)
        quantized = quantize_bands(bands, levels)
        for band in np.flatnonzero(levels):
            width = quantized.cell_width(band)
            values = dequantize(quantized.symbols[band], quantized.low[band], quantized.high[band], int(levels[band]))
            self.assertLessEqual(float(np.abs(values - bands[band]).max()), width / 2 + 1e-9)

    def test_ac_range_is_float32(self):
        # Verifies the AC radius is a float32 value no smaller than the band's largest magnitude.
        bands = np.zeros((BAND_COUNT, 2, 2))
        bands[3] = [[0.1, -0.3], [0.2, 0.0]]
        quantized = quantize_bands(bands, qi_levels(4))
        self.assertGreaterEqual(quantized.high[3], 0.3)
        self.assertEqual(float(np.float32(quantized.high[3])), quantized.high[3])
        self.assertEqual(quantized.low[3], -quantized.high[3])
        self.assertGreaterEqual(float32_ceil(0.1), 0.1)

    def test_invalid_level(self):
        # Verifies a level outside {0, 2, 4, ..., 128} is refused.
        levels = qi_levels(1).copy()
        levels[0] = 3
        with self.assertRaises(ParameterError):
            quantize_bands(np.zeros((BAND_COUNT, 1, 1)), levels)

    def test_bit_planes(self):
        # Verifies symbols split MSB first and reassemble.
        planes = to_bit_planes(np.array([5, 2]), 8)
        self.assertEqual(planes.tolist(), [[1, 0], [0, 1], [1, 0]])
        self.assertEqual(from_bit_planes(planes).tolist(), [5, 2])


class TestLdpca(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.code = LdpcaCode(n=256, chunks=16, seed=1)

    def test_zero_block(self):
        # Verifies the all-zero block has all-zero accumulated syndromes.
        self.assertFalse(self.code.encode(np.zeros(256, dtype=np.uint8)).any())

    def test_linearity(self):
        # Verifies syndromes are linear over GF(2).
        rng = np.random.default_rng(0)
        a, b = rng.integers(0, 2, 256), rng.integers(0, 2, 256)
        self.assertTrue(np.array_equal(self.code.encode(a ^ b), self.code.encode(a) ^ self.code.encode(b)))

    def test_matrix_is_seeded(self):
        # Verifies the same seed rebuilds the same parity matrix with column degree 3.
        other = LdpcaCode(n=256, chunks=16, seed=1)
        self.assertEqual((self.code.H != other.H).nnz, 0)
        self.assertTrue(np.all(np.asarray(self.code.H.sum(axis=0)).reshape(-1) == 3))

    def test_matrix_is_square_and_row_regular(self):
        # Verifies H is n×n with every row of degree 3, so all chunks together reach rate 1.
        self.assertEqual(self.code.H.shape, (256, 256))
        self.assertTrue(np.all(np.asarray(self.code.H.sum(axis=1)).reshape(-1) == 3))

    def test_chunks_partition_syndromes(self):
        # Verifies the chunks reveal every syndrome index exactly once.
        indices = np.concatenate([self.code.chunk_indices(j) for j in range(16)])
        self.assertEqual(sorted(indices.tolist()), list(range(256)))
        self.assertEqual(int(self.code.chunk_indices(0)[-1]), 255)

    def test_perfect_side_information(self):
        # Verifies exact side information decodes after a single chunk.
        bits = np.random.default_rng(2).integers(0, 2, 256).astype(np.uint8)
        accumulated = self.code.encode(bits)
        llr = (1.0 - 2.0 * bits) * LLR_CLIP
        decoded, transcript = self.code.decode(llr, lambda chunk: self.code.chunk(accumulated, chunk), crc8(bits))
        self.assertTrue(np.array_equal(decoded, bits))
        self.assertTrue(transcript.success)
        self.assertEqual(transcript.chunks_requested, 1)
        self.assertEqual(transcript.syndrome_bits, 16)

    def test_failure_after_last_chunk(self):
        # Verifies a decode capped at one chunk with uninformative LLRs reports failure.
        bits = np.random.default_rng(3).integers(0, 2, 256).astype(np.uint8)
        accumulated = self.code.encode(bits)
        _, transcript = self.code.decode(
            np.zeros(256), lambda chunk: self.code.chunk(accumulated, chunk), crc8(bits), max_chunks=1
        )
        self.assertFalse(transcript.success)
        self.assertEqual(transcript.chunks_requested, 1)

    def test_invalid_geometry(self):
        # Verifies chunk counts that are not powers of two or do not divide n are refused.
        with self.assertRaises(ParameterError):
            LdpcaCode(n=256, chunks=12)
        with self.assertRaises(ParameterError):
            LdpcaCode(n=100, chunks=16)

    def test_binary_entropy(self):
        # Verifies h(0.1) = 0.469 and the endpoints are zero.
        self.assertAlmostEqual(binary_entropy(0.1), 0.469, places=3)
        self.assertEqual(binary_entropy(0.0), 0.0)
        self.assertAlmostEqual(binary_entropy(0.5), 1.0)


class TestSlepianWolfCheck(unittest.TestCase):
    def test_noiseless_channel(self):
        # Verifies p=0 needs one chunk per block and always succeeds.
        code = LdpcaCode(n=256, chunks=16, seed=1)
        report = sw_rate_check(0.0, blocklen=256, trials=5, code=code)
        self.assertEqual(report.success_rate, 1.0)
        self.assertAlmostEqual(report.achieved_rate, 1 / 16)
        self.assertEqual(report.entropy, 0.0)

    def test_bsc_llr_signs(self):
        # Verifies received zeros give positive LLRs and received ones negative.
        llr = bsc_llr(np.array([0, 1]), 0.1)
        self.assertAlmostEqual(float(llr[0]), np.log(9.0))
        self.assertAlmostEqual(float(llr[1]), -np.log(9.0))

    def test_invalid_probability(self):
        # Verifies crossover probabilities above 0.5 are refused.
        with self.assertRaises(ParameterError):
            sw_rate_check(0.6, trials=1)

    @unittest.skipUnless(SLOW, "set DDVC_SLOW_TESTS=1")
    def test_rate_near_entropy(self):
        # Verifies p=0.1 at n=1024 needs between h(0.1) and h(0.1) + 0.25 bits per source bit.
        report = sw_rate_check(0.1, blocklen=1024, trials=50)
        self.assertGreaterEqual(report.achieved_rate, 0.469)
        self.assertLessEqual(report.achieved_rate, 0.719)
        self.assertGreaterEqual(report.success_rate, 0.9)


class TestCorrelation(unittest.TestCase):
    def test_soft_input_on_boundary(self):
        # Verifies SI exactly on the cell boundary gives an LLR of zero.
        llr = soft_input(0.0, LaplacianModel(2.0), [(-1.0, 0.0, 0), (0.0, 1.0, 1)])
        self.assertAlmostEqual(llr, 0.0, places=12)

    def test_confident_soft_input(self):
        # Verifies alpha=100 with SI inside the zero cell gives P(bit=1) < 1e-3.
        llr = soft_input(-0.5, LaplacianModel(100.0), [(-1.0, 0.0, 0), (0.0, 1.0, 1)])
        self.assertLess(float(bit_probability(llr)), 1e-3)

    def test_single_candidate(self):
        # Verifies a single remaining cell gives the clipped LLR of its bit.
        self.assertEqual(soft_input(0.3, LaplacianModel(1.0), [(0.0, 1.0, 0)]), LLR_CLIP)
        self.assertEqual(soft_input(0.3, LaplacianModel(1.0), [(0.0, 1.0, 1)]), -LLR_CLIP)

    def test_no_candidates(self):
        # Verifies an empty candidate set is a contract error.
        with self.assertRaises(ContractError):
            soft_input(0.0, LaplacianModel(1.0), [])

    def test_alpha_must_be_positive(self):
        # Verifies a non-positive alpha is refused.
        with self.assertRaises(ParameterError):
            LaplacianModel(0.0)

    def test_laplacian_fit_values(self):
        # Verifies alpha = 1/mean|r| and the cap for all-zero residuals.
        self.assertAlmostEqual(laplacian_fit(np.array([1.0, -1.0])).alpha, 1.0)
        self.assertEqual(laplacian_fit(np.zeros(10)).alpha, ALPHA_MAX)
        with self.assertRaises(ParameterError):
            laplacian_fit(np.array([]))

    def test_laplacian_fit_recovers_alpha(self):
        # Verifies fitting 10^5 Laplacian samples with alpha=2 recovers it within 2%.
        samples = np.random.default_rng(0).laplace(0.0, 0.5, 100_000)
        self.assertAlmostEqual(laplacian_fit(samples).alpha, 2.0, delta=0.04)

    def test_plane_llr_msb(self):
        # Verifies the MSB LLR favours 0 for SI in the lower half and 1 in the upper half.
        llr = plane_llr(np.array([0.5, 3.5]), 4.0, np.zeros(2, dtype=np.int64), 0, 2, 0.0, 4.0, 4)
        self.assertGreater(float(llr[0]), 0.0)
        self.assertLess(float(llr[1]), 0.0)

    def test_plane_llr_uses_prefix(self):
        # Verifies the second plane only weighs cells consistent with the decoded MSB.
        llr = plane_llr(np.array([1.9]), 4.0, np.array([0]), 1, 2, 0.0, 4.0, 4)
        self.assertLess(float(llr[0]), 0.0)


def _bands_with_dc(level: int) -> QuantizedBands:
    levels = np.zeros(BAND_COUNT, dtype=np.int64)
    levels[0] = level
    low = np.zeros(BAND_COUNT)
    high = np.ones(BAND_COUNT)
    high[0] = 4.0
    return QuantizedBands(symbols=[None] * BAND_COUNT, levels=levels, low=low, high=high)


class TestReconstruction(unittest.TestCase):
    def test_clamp_into_cell(self):
        # Verifies SI outside the decoded cell is clamped to its edge and SI inside is kept.
        quantized = _bands_with_dc(4)
        si = np.zeros((BAND_COUNT, 1, 2))
        si[0] = [[3.7, 1.5]]
        si[5] = 0.42
        decoded = [np.array([[1, 1]])] + [None] * (BAND_COUNT - 1)
        out = reconstruct_bands(decoded, si, quantized, np.ones(BAND_COUNT))
        self.assertEqual(out[0].tolist(), [[2.0, 1.5]])
        self.assertTrue(np.array_equal(out[5], si[5]))

    def test_all_bands_skipped(self):
        # Verifies that without decoded bands the SI is returned unchanged.
        si = np.random.default_rng(0).random((BAND_COUNT, 2, 2))
        quantized = _bands_with_dc(0)
        out = reconstruct_bands([None] * BAND_COUNT, si, quantized, np.ones(BAND_COUNT))
        self.assertTrue(np.array_equal(out, si))

    def test_centroid_inside_cell(self):
        # Verifies the centroid lies in the decoded cell and leans towards the SI.
        quantized = _bands_with_dc(4)
        si = np.zeros((BAND_COUNT, 1, 1))
        si[0] = 3.0
        decoded = [np.array([[1]])] + [None] * (BAND_COUNT - 1)
        out = reconstruct_bands(decoded, si, quantized, np.full(BAND_COUNT, 5.0), mode="centroid")
        self.assertGreater(float(out[0, 0, 0]), 1.5)
        self.assertLessEqual(float(out[0, 0, 0]), 2.0)

    def test_unknown_mode(self):
        # Verifies an unknown reconstruction mode is refused.
        with self.assertRaises(ParameterError):
            reconstruct_bands([None] * BAND_COUNT, np.zeros((BAND_COUNT, 1, 1)), _bands_with_dc(0), np.ones(16), "median")


def _sequence(count: int = 3) -> VideoSequence:
    rng = np.random.default_rng(4)
    base = rng.random((64, 64, 3)).astype(np.float32)
    frames = [
        Frame(pixels=np.clip(np.roll(base, 2 * index, axis=0), 0.0, 1.0).astype(np.float32), index=index)
        for index in range(1, count + 1)
    ]
    return VideoSequence(frames=frames)


class TestClassicCodec(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        torch.manual_seed(0)
        cls.model = DistributedVideoCodec(CodecConfig(n_filters=32, m_latent=64, s_slices=8, ifnet_channels=16))
        cls.codec = ClassicCodec(cls.model, qi=1, code=LdpcaCode(n=256, chunks=16, seed=1))
        cls.data = cls.codec.encode_sequence(_sequence(), gop=2)

    def test_round_trip(self):
        # Verifies the decoder replays the stored feedback session and returns every frame.
        trace = self.codec.decode_trace(self.data)
        self.assertEqual([frame.index for frame in trace.frames], [1, 2, 3])
        self.assertEqual(trace.frames[1].pixels.shape, (64, 64, 3))
        self.assertEqual(set(trace.si_frames), {2})
        self.assertGreater(self.codec.transcript.total_chunks, 0)

    def test_keys_match_deep_codec(self):
        # Verifies key frames are coded exactly as by the deep intra codec.
        classic_frames = self.codec.decode_sequence(self.data)
        deep_frames = DeepCodec(self.model).decode_sequence(DeepCodec(self.model).encode_sequence(_sequence(), gop=2))
        self.assertTrue(np.array_equal(classic_frames[0].pixels, deep_frames[0].pixels))

    def test_stream_layout(self):
        # Verifies a WZ frame holds one meta stream plus one stream per colour and coded band.
        container = parse_container(self.data)
        wz = [frame for frame in container.frames if frame.role is FrameRole.WZ]
        self.assertEqual(len(wz), 1)
        self.assertEqual(len(wz[0].streams), 1 + 3 * 3)
        self.assertEqual(self.codec.stream_names[0], "meta")
        self.assertEqual(len(self.codec.stream_names), 10)

    def test_truncated_syndromes(self):
        # Verifies a shortened syndrome stream is a bitstream error for that frame.
        container = parse_container(self.data)
        frames = []
        for frame in container.frames:
            if frame.role is FrameRole.WZ:
                streams = list(frame.streams)
                streams[1] = streams[1][:-1]
                frame = EncodedFrame(index=frame.index, role=frame.role, streams=streams)
            frames.append(frame)
        with self.assertRaises(BitstreamError) as ctx:
            self.codec.decode_sequence(pack_container(frames, container.header))
        self.assertEqual(ctx.exception.frame, 2)

    def test_invalid_settings(self):
        # Verifies an unknown reconstruction mode or a wrong alpha vector is refused.
        with self.assertRaises(ParameterError):
            ClassicCodec(self.model, reconstruction="median")
        with self.assertRaises(ParameterError):
            ClassicCodec(self.model, alphas=np.ones(4))

    def test_calibrated_alphas(self):
        # Verifies offline calibration yields one positive alpha per band.
        alphas = calibrate_alphas(self.model, _sequence(), gop=2)
        self.assertEqual(alphas.shape, (BAND_COUNT,))
        self.assertTrue(bool((alphas > 0).all()))
