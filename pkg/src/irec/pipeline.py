"""End-to-end lossy and lossless image compression.

Each 8x8 patch is one coded block: posterior -> whiten -> schedule -> index
coding. The lossless path appends a range-coded residual of x minus the
quantized reconstruction, using the decoded (possibly biased) latent on both
sides so encoder and decoder stay synchronized.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import codec, container, model as model_mod, residual as residual_mod
from .chain import build_schedule, schedule_from_steps
from .codec import IndexTuple, RecConfig
from .container import ContainerHeader
from .errors import CorruptStreamError, FormatError, ModelMismatchError, UsageError
from .gauss import DiagGaussian, kl_divergence, whiten
from .model import ImageGray8, LinearGaussianModel

_LN2 = math.log(2.0)


@dataclass
class CompressionResult:
    data: bytes
    kl_per_block: list[float]
    payload_bits: int
    residual_bits: int
    bpp: float
    psnr: float
    seconds: float


def _encode_blocks(img: ImageGray8, model: LinearGaussianModel, cfg: RecConfig, seed: int):
    prior = DiagGaussian.standard(model.latent_dim)
    blocks: list[IndexTuple] = []
    kls: list[float] = []
    zs: list[np.ndarray] = []
    for i, patch in enumerate(model_mod.patchify(img)):
        q = model_mod.posterior(model, patch)
        q_std, _ = whiten(q, prior)
        kl = kl_divergence(q_std, prior)
        schedule = build_schedule(kl, cfg.omega, cfg.epsilon)
        indices, z, _ = codec.encode(q_std, schedule, cfg, seed, block=i)
        blocks.append(indices)
        kls.append(kl)
        zs.append(z)
    return blocks, kls, zs


def _reconstruct_image(
    zs: list[np.ndarray], model: LinearGaussianModel, width: int, height: int
) -> ImageGray8:
    patches = [
        model_mod.quantize_clamp(model_mod.reconstruct(model, z)).astype(np.float64)
        for z in zs
    ]
    plane = model_mod.unpatchify(patches, width, height)
    return ImageGray8(width=width, height=height, pixels=plane.astype(np.uint8))


def _header_for(
    img: ImageGray8, model: LinearGaussianModel, cfg: RecConfig, seed: int, nblocks: int
) -> ContainerHeader:
    return ContainerHeader(
        seed=seed,
        omega=cfg.omega,
        epsilon=cfg.epsilon,
        model_id=model.model_id,
        block_count=nblocks,
        latent_dim=model.latent_dim,
        image_width=img.width,
        image_height=img.height,
    )


def compress_lossy(
    img: ImageGray8, model: LinearGaussianModel, cfg: RecConfig, seed: int
) -> CompressionResult:
    t0 = time.perf_counter()
    blocks, kls, zs = _encode_blocks(img, model, cfg, seed)
    header = _header_for(img, model, cfg, seed, len(blocks))
    data = container.pack(header, blocks)
    recon = _reconstruct_image(zs, model, img.width, img.height)
    report = container.codelength_report(header, blocks, kls)
    return CompressionResult(
        data=data,
        kl_per_block=kls,
        payload_bits=report["payload_bits"] + report["varint_bits"],
        residual_bits=0,
        bpp=8.0 * len(data) / (img.width * img.height),
        psnr=model_mod.psnr(img, recon),
        seconds=time.perf_counter() - t0,
    )


def _decode_blocks(header: ContainerHeader, blocks, model: LinearGaussianModel):
    if header.model_id != model.model_id:
        raise ModelMismatchError(
            f"container model id {header.model_id:#x} != model {model.model_id:#x}"
        )
    if header.latent_dim != model.latent_dim:
        raise ModelMismatchError("latent dimension mismatch")
    zs = []
    for i, indices in enumerate(blocks):
        schedule = schedule_from_steps(len(indices), header.omega, header.epsilon)
        zs.append(
            codec.decode(indices, schedule, header.seed, block=i, dims=header.latent_dim)
        )
    return zs


def decompress_lossy(data: bytes, model: LinearGaussianModel) -> ImageGray8:
    header, blocks, _ = container.unpack(data)
    zs = _decode_blocks(header, blocks, model)
    return _reconstruct_image(zs, model, header.image_width, header.image_height)


def _residual_model(model: LinearGaussianModel) -> residual_mod.DiscretizedGaussian:
    return residual_mod.DiscretizedGaussian(
        mu=0.0, sigma=math.sqrt(model.noise_var), lo=-255, hi=255
    )


def compress_lossless(
    img: ImageGray8, model: LinearGaussianModel, cfg: RecConfig, seed: int
) -> CompressionResult:
    t0 = time.perf_counter()
    blocks, kls, zs = _encode_blocks(img, model, cfg, seed)
    recon = _reconstruct_image(zs, model, img.width, img.height)
    residuals = (
        img.pixels.astype(np.int64) - recon.pixels.astype(np.int64)
    ).reshape(-1)
    coded = residual_mod.encode_residuals(residuals, _residual_model(model))
    section = len(residuals).to_bytes(4, "little") + coded
    header = _header_for(img, model, cfg, seed, len(blocks))
    data = container.pack(header, blocks, residual=section)
    report = container.codelength_report(header, blocks, kls)
    return CompressionResult(
        data=data,
        kl_per_block=kls,
        payload_bits=report["payload_bits"] + report["varint_bits"],
        residual_bits=8 * len(section),
        bpp=8.0 * len(data) / (img.width * img.height),
        psnr=model_mod.psnr(img, recon),
        seconds=time.perf_counter() - t0,
    )


def decompress_lossless(data: bytes, model: LinearGaussianModel) -> ImageGray8:
    header, blocks, section = container.unpack(data)
    if section is None:
        raise FormatError("container has no residual section")
    zs = _decode_blocks(header, blocks, model)
    recon = _reconstruct_image(zs, model, header.image_width, header.image_height)
    if len(section) < 4:
        raise CorruptStreamError("residual section shorter than its count field")
    count = int.from_bytes(section[:4], "little")
    npix = header.image_width * header.image_height
    if count != npix:
        raise CorruptStreamError(f"residual count {count} != pixel count {npix}")
    residuals = residual_mod.decode_residuals(
        section[4:], _residual_model(model), count
    )
    pixels = recon.pixels.astype(np.int64) + residuals.reshape(
        header.image_height, header.image_width
    )
    pixels = np.clip(pixels, 0, 255).astype(np.uint8)
    return ImageGray8(
        width=header.image_width, height=header.image_height, pixels=pixels
    )


def model_elbo_bits(img: ImageGray8, model: LinearGaussianModel) -> float:
    """Analytic negative ELBO of the image in bits: KL term + residual entropy.

    The residual term uses the entropy of the discretized per-pixel noise
    model, matching what the lossless residual coder can achieve.
    """
    prior = DiagGaussian.standard(model.latent_dim)
    kl_total = sum(
        kl_divergence(model_mod.posterior(model, p), prior)
        for p in model_mod.patchify(img)
    )
    freq = residual_mod.pmf_quantized(_residual_model(model))
    p = freq / freq.sum()
    entropy_bits = float(-np.sum(p * np.log2(p)))
    return kl_total / _LN2 + entropy_bits * img.width * img.height
