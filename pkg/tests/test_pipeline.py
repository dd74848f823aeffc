import numpy as np
import pytest

from conftest import make_training_patches, sample_image
from irec import container, pipeline
from irec.codec import RecConfig
from irec.errors import (
    CorruptStreamError,
    FormatError,
    IrecError,
    ModelMismatchError,
)
from irec.model import ImageGray8, LinearGaussianModel, fit_ppca, quantize_clamp
from irec.pipeline import (
    compress_lossless,
    compress_lossy,
    decompress_lossless,
    decompress_lossy,
    model_elbo_bits,
)

CFG = RecConfig(omega=3.0, epsilon=0.2, beams=4)


def pruned_model(noise_var=4.0):
    return LinearGaussianModel(
        W=np.zeros((64, 4)), mu=np.full(64, 128.0), noise_var=noise_var
    )


class TestLossy:
    def test_round_trip_determinism(self, fitted_model, small_image):
        a = compress_lossy(small_image, fitted_model, CFG, seed=3)
        b = compress_lossy(small_image, fitted_model, CFG, seed=3)
        assert a.data == b.data
        img_a = decompress_lossy(a.data, fitted_model)
        img_b = decompress_lossy(b.data, fitted_model)
        assert np.array_equal(img_a.pixels, img_b.pixels)

    def test_zero_kl_constant_image(self):
        model = pruned_model()
        img = ImageGray8(16, 16, np.full((16, 16), 128, dtype=np.uint8))
        result = compress_lossy(img, model, CFG, seed=0)
        assert all(kl == 0.0 for kl in result.kl_per_block)
        _, blocks, _ = container.unpack(result.data)
        assert all(len(b) == 1 for b in blocks)
        # Reconstruction is the quantized model mean everywhere.
        out = decompress_lossy(result.data, model)
        assert np.all(out.pixels == quantize_clamp(model.mu)[0])

    def test_reconstruction_quality_reasonable(self, fitted_model, small_image):
        result = compress_lossy(small_image, fitted_model, CFG, seed=1)
        assert result.psnr > 20.0
        out = decompress_lossy(result.data, fitted_model)
        assert (out.width, out.height) == (16, 16)

    def test_bpp_decreases_with_noisier_models(self):
        # Higher modeled noise shrinks posteriors toward the prior, so the
        # index payload gets cheaper.
        rng = np.random.default_rng(11)
        patches = make_training_patches(rng)
        base = fit_ppca(patches, latent_dim=6)
        img = sample_image(base, rng, 24, 24)
        bpps = []
        for scale in (0.25, 4.0, 64.0):
            model = LinearGaussianModel(
                W=base.W, mu=base.mu, noise_var=base.noise_var * scale
            )
            bpps.append(compress_lossy(img, model, CFG, seed=5).bpp)
        assert bpps[0] >= bpps[1] >= bpps[2]

    def test_model_mismatch_detected(self, fitted_model, small_image):
        result = compress_lossy(small_image, fitted_model, CFG, seed=0)
        other = LinearGaussianModel(
            W=fitted_model.W, mu=fitted_model.mu, noise_var=fitted_model.noise_var * 2
        )
        with pytest.raises(ModelMismatchError):
            decompress_lossy(result.data, other)

    def test_bit_flip_fuzz_never_crashes(self, fitted_model, small_image):
        rng = np.random.default_rng(12)
        data = compress_lossy(small_image, fitted_model, CFG, seed=2).data
        nbits = 8 * len(data)
        for _ in range(200):
            pos = int(rng.integers(0, nbits))
            mutated = bytearray(data)
            mutated[pos // 8] ^= 1 << (pos % 8)
            try:
                decompress_lossy(bytes(mutated), fitted_model)
            except IrecError:
                pass


class TestLossless:
    def test_exact_round_trip_model_images(self, fitted_model):
        rng = np.random.default_rng(20)
        for _ in range(5):
            img = sample_image(fitted_model, rng, 16, 16)
            result = compress_lossless(img, fitted_model, CFG, seed=6)
            out = decompress_lossless(result.data, fitted_model)
            assert np.array_equal(out.pixels, img.pixels)

    def test_exact_round_trip_adversarial_noise(self, fitted_model):
        rng = np.random.default_rng(21)
        img = ImageGray8(16, 16, rng.integers(0, 256, size=(16, 16), dtype=np.uint8))
        result = compress_lossless(img, fitted_model, CFG, seed=7)
        out = decompress_lossless(result.data, fitted_model)
        assert np.array_equal(out.pixels, img.pixels)

    def test_round_trip_odd_size(self, fitted_model):
        rng = np.random.default_rng(22)
        img = ImageGray8(13, 9, rng.integers(0, 256, size=(9, 13), dtype=np.uint8))
        result = compress_lossless(img, fitted_model, CFG, seed=8)
        out = decompress_lossless(result.data, fitted_model)
        assert np.array_equal(out.pixels, img.pixels)

    def test_determinism(self, fitted_model, small_image):
        a = compress_lossless(small_image, fitted_model, CFG, seed=9)
        b = compress_lossless(small_image, fitted_model, CFG, seed=9)
        assert a.data == b.data

    def test_missing_residual_section(self, fitted_model, small_image):
        lossy = compress_lossy(small_image, fitted_model, CFG, seed=0)
        with pytest.raises(FormatError):
            decompress_lossless(lossy.data, fitted_model)

    def test_truncated_residual(self, fitted_model, small_image):
        result = compress_lossless(small_image, fitted_model, CFG, seed=0)
        with pytest.raises((CorruptStreamError, FormatError)):
            decompress_lossless(result.data[:-8], fitted_model)

    def test_model_mismatch(self, fitted_model, small_image):
        result = compress_lossless(small_image, fitted_model, CFG, seed=0)
        other = LinearGaussianModel(
            W=fitted_model.W, mu=fitted_model.mu + 1.0, noise_var=fitted_model.noise_var
        )
        with pytest.raises(ModelMismatchError):
            decompress_lossless(result.data, other)

    def test_stats_accounting(self, fitted_model, small_image):
        result = compress_lossless(small_image, fitted_model, CFG, seed=0)
        assert result.bpp == pytest.approx(8.0 * len(result.data) / 256)
        assert result.residual_bits > 0
        assert len(result.kl_per_block) == 4


class TestElbo:
    def test_positive_and_dominates_kl(self, fitted_model, small_image):
        bits = model_elbo_bits(small_image, fitted_model)
        assert bits > 0
        result = compress_lossless(small_image, fitted_model, CFG, seed=0)
        # The real file can never beat the analytic codelength by much.
        assert 8 * len(result.data) >= 0.9 * bits
