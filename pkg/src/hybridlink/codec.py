"""Semantic codec: builtin transform codec, budget math, quality metrics.

The builtin codec turns a frame into a real coefficient vector that meets a
target channel-bandwidth ratio exactly: per channel it applies an orthonormal
8x8 block DCT, scans each block in zig-zag order and keeps a global budget of
R = 2*k coefficients, where k = round(target_cbr * W * H * 3) complex symbols.
The budget spreads evenly over all blocks (channel-major raster order), with
the first R mod n_blocks blocks taking one extra coefficient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dctn, idctn
from scipy.signal import fftconvolve

from .errors import BadDimensions, ImageTooSmall, LengthMismatch
from .sempath import SemanticVector

BLOCK = 8
KIND_BUILTIN = "builtin"
KIND_PLUGIN = "plugin"

# standard multi-scale similarity constants: 11-tap Gaussian window with
# sigma 1.5, stability constants K1/K2, five scale weights
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_SIGMA = 1.5
SSIM_WIN = 11
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
MSSSIM_FULL_MIN_DIM = 176  # 11 * 2^4: five scales with margin


@dataclass
class ImageFrame:
    """8-bit RGB frame, row-major and channel-interleaved."""

    width: int
    height: int
    data: np.ndarray  # uint8, length width*height*3
    channels: int = 3

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.uint8).ravel()
        if len(self.data) != self.width * self.height * self.channels:
            raise ValueError("data length must be width*height*channels")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageFrame":
        arr = np.asarray(arr, dtype=np.uint8)
        h, w, c = arr.shape
        return cls(w, h, arr.reshape(-1), channels=c)

    def to_array(self) -> np.ndarray:
        return self.data.reshape(self.height, self.width, self.channels)


@dataclass
class CodecSpec:
    """Session-level codec agreement shared by transmitter and receiver."""

    kind: str = KIND_BUILTIN
    target_cbr: float = 0.0417
    snr_hint_db: float = 0.0  # 0 when the receiver gives no feedback
    frame_width: int = 256
    frame_height: int = 256
    plugin_cmd: list[str] | None = None
    strict_plugin: bool = False
    plugin_timeout: float = 30.0

    def __post_init__(self):
        if not 0.0 < self.target_cbr <= 0.5:
            raise ValueError("target_cbr must be in (0, 0.5]")


def symbol_budget(target_cbr: float, width: int, height: int) -> int:
    """Complex symbols for one frame: k = round(cbr * W * H * 3)."""
    return int(round(target_cbr * width * height * 3))


def measure_cbr(n_complex_symbols: int, width: int, height: int) -> float:
    """Channel symbols per source sample (W*H*3 denominator)."""
    return n_complex_symbols / (width * height * 3)


def zigzag_order(n: int = BLOCK) -> np.ndarray:
    """Flat indices of an n x n block in standard zig-zag scan order."""
    coords = []
    for s in range(2 * n - 1):
        diag = [(i, s - i) for i in range(max(0, s - n + 1), min(s, n - 1) + 1)]
        coords.extend(diag if s % 2 else diag[::-1])
    return np.array([i * n + j for i, j in coords])


_ZIGZAG = zigzag_order()


def _to_blocks(img: ImageFrame) -> tuple[np.ndarray, int, int]:
    """Centered pixels chopped into 8x8 blocks, channel-major raster order."""
    arr = img.to_array().astype(np.float64) / 255.0 - 0.5
    pad_h = (-img.height) % BLOCK
    pad_w = (-img.width) % BLOCK
    arr = np.pad(arr, ((0, pad_h), (0, pad_w), (0, 0)), mode="edge")
    h, w = arr.shape[:2]
    nbh, nbw = h // BLOCK, w // BLOCK
    # (channel, block_row, block_col, 8, 8) -> (n_blocks, 8, 8)
    blocks = (arr.transpose(2, 0, 1)
                 .reshape(3, nbh, BLOCK, nbw, BLOCK)
                 .transpose(0, 1, 3, 2, 4)
                 .reshape(-1, BLOCK, BLOCK))
    return blocks, nbh, nbw


def _from_blocks(blocks: np.ndarray, nbh: int, nbw: int,
                 width: int, height: int) -> ImageFrame:
    arr = (blocks.reshape(3, nbh, nbw, BLOCK, BLOCK)
                 .transpose(0, 1, 3, 2, 4)
                 .reshape(3, nbh * BLOCK, nbw * BLOCK)
                 .transpose(1, 2, 0))
    arr = arr[:height, :width]
    pixels = np.rint((arr + 0.5) * 255.0)  # rint rounds half to even
    return ImageFrame.from_array(np.clip(pixels, 0, 255).astype(np.uint8))


def _budget_per_block(r_total: int, n_blocks: int) -> np.ndarray:
    base, extra = divmod(r_total, n_blocks)
    counts = np.full(n_blocks, base, dtype=np.int64)
    counts[:extra] += 1
    return counts


def builtin_encode(img: ImageFrame, spec: CodecSpec) -> SemanticVector:
    """Transform-code a frame into its real coefficient vector.

    Output length is exactly 2*k regardless of snr_hint_db; only learned
    codecs use the hint adaptively.
    """
    if img.width < 1 or img.height < 1:
        raise BadDimensions("zero-sized image")
    k = symbol_budget(spec.target_cbr, img.width, img.height)
    blocks, nbh, nbw = _to_blocks(img)
    spectra = dctn(blocks, type=2, norm="ortho", axes=(1, 2))
    scanned = spectra.reshape(-1, BLOCK * BLOCK)[:, _ZIGZAG]
    counts = _budget_per_block(2 * k, len(scanned))
    values = np.concatenate([scanned[b, :counts[b]] for b in range(len(scanned))])
    meta = {"width": img.width, "height": img.height, "k": k}
    return SemanticVector(values=values, gain=1.0, shape_meta=meta)


def builtin_decode(values: np.ndarray, width: int, height: int,
                   spec: CodecSpec) -> ImageFrame:
    """Invert builtin_encode from a (gain-corrected) coefficient vector."""
    values = np.asarray(values, dtype=np.float64).ravel()
    k = symbol_budget(spec.target_cbr, width, height)
    nbh = (height + BLOCK - 1) // BLOCK
    nbw = (width + BLOCK - 1) // BLOCK
    n_blocks = 3 * nbh * nbw
    if len(values) != 2 * k:
        raise LengthMismatch(f"expected {2 * k} coefficients, got {len(values)}")
    counts = _budget_per_block(2 * k, n_blocks)
    scanned = np.zeros((n_blocks, BLOCK * BLOCK))
    pos = 0
    for b in range(n_blocks):
        scanned[b, :counts[b]] = values[pos:pos + counts[b]]
        pos += counts[b]
    spectra = np.zeros_like(scanned)
    spectra[:, _ZIGZAG] = scanned
    blocks = idctn(spectra.reshape(-1, BLOCK, BLOCK), type=2, norm="ortho",
                   axes=(1, 2))
    return _from_blocks(blocks, nbh, nbw, width, height)


def psnr(a: ImageFrame, b: ImageFrame) -> float:
    """Peak signal-to-noise ratio in dB over all samples; inf for identity."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("frames must share dimensions")
    mse = np.mean((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _luma(img: ImageFrame) -> np.ndarray:
    arr = img.to_array().astype(np.float64)
    return 0.299 * arr[:, :, 0] + 0.587 * arr[:, :, 1] + 0.114 * arr[:, :, 2]


def _gaussian_kernel() -> np.ndarray:
    half = SSIM_WIN // 2
    g = np.exp(-0.5 * (np.arange(-half, half + 1) / SSIM_SIGMA) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


_SSIM_KERNEL = _gaussian_kernel()


def _ssim_maps(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Luminance and contrast-structure maps over valid window positions."""
    c1 = (SSIM_K1 * 255.0) ** 2
    c2 = (SSIM_K2 * 255.0) ** 2
    win = lambda z: fftconvolve(z, _SSIM_KERNEL, mode="valid")
    mx, my = win(x), win(y)
    sxx = win(x * x) - mx * mx
    syy = win(y * y) - my * my
    sxy = win(x * y) - mx * my
    lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
    cs = (2 * sxy + c2) / (sxx + syy + c2)
    return lum, cs


def ms_ssim_scales(width: int, height: int) -> int:
    """Scales that fit: each halving must keep min dim >= the window size."""
    m = 0
    dim = min(width, height)
    while dim >= SSIM_WIN and m < len(MSSSIM_WEIGHTS):
        m += 1
        dim //= 2
    return m


def ms_ssim(a: ImageFrame, b: ImageFrame) -> float:
    """Multi-scale structural similarity on luma, in [0, 1].

    Standard five-scale form: the contrast-structure mean at every scale and
    the full similarity mean at the coarsest, combined with the canonical
    weights. Frames below 176 pixels min-dim use as many scales as fit, with
    weights renormalized (see ms_ssim_scales); below one window, raises.
    """
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("frames must share dimensions")
    m = ms_ssim_scales(a.width, a.height)
    if m == 0:
        raise ImageTooSmall(f"min dimension below {SSIM_WIN} pixels")
    weights = np.array(MSSSIM_WEIGHTS[:m])
    weights = weights / weights.sum()
    x, y = _luma(a), _luma(b)
    score = 1.0
    for scale in range(m):
        lum, cs = _ssim_maps(x, y)
        if scale < m - 1:
            score *= max(float(cs.mean()), 0.0) ** weights[scale]
            # dyadic downsampling by 2x2 mean (trailing odd row/col dropped)
            he, we = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
            x = x[:he, :we].reshape(he // 2, 2, we // 2, 2).mean(axis=(1, 3))
            y = y[:he, :we].reshape(he // 2, 2, we // 2, 2).mean(axis=(1, 3))
        else:
            score *= max(float((lum * cs).mean()), 0.0) ** weights[scale]
    return float(min(score, 1.0))
