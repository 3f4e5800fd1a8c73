"""Image I/O (binary PPM, optional PNG) and deterministic test frames."""
from __future__ import annotations

import numpy as np

from .codec import ImageFrame

try:
    from PIL import Image as _PilImage
    HAVE_PIL = True
except ImportError:  # PNG support is optional
    HAVE_PIL = False


def write_ppm(img: ImageFrame, path) -> None:
    """Binary P6, maxval 255."""
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (img.width, img.height))
        f.write(img.data.tobytes())


def read_ppm(path) -> ImageFrame:
    with open(path, "rb") as f:
        if f.read(2) != b"P6":
            raise ValueError("not a binary PPM (P6) file")

        def token():
            # skip whitespace and '#' comment lines between header fields
            c = f.read(1)
            while c.isspace() or c == b"#":
                if c == b"#":
                    while c not in (b"\n", b""):
                        c = f.read(1)
                c = f.read(1)
            tok = b""
            while c and not c.isspace():
                tok += c
                c = f.read(1)
            return tok

        width, height, maxval = int(token()), int(token()), int(token())
        if maxval != 255:
            raise ValueError("only maxval 255 supported")
        data = np.frombuffer(f.read(width * height * 3), dtype=np.uint8)
    if len(data) != width * height * 3:
        raise ValueError("truncated PPM payload")
    return ImageFrame(width, height, data.copy())


def write_png(img: ImageFrame, path) -> None:
    if not HAVE_PIL:
        raise RuntimeError("PNG support requires Pillow")
    _PilImage.fromarray(img.to_array()).save(path, format="PNG")


def read_image(path) -> ImageFrame:
    """Read PPM always, or any Pillow-readable format when available."""
    spath = str(path)
    if spath.lower().endswith(".ppm"):
        return read_ppm(path)
    if not HAVE_PIL:
        raise RuntimeError(f"cannot read {spath!r}: only PPM supported without Pillow")
    arr = np.asarray(_PilImage.open(path).convert("RGB"), dtype=np.uint8)
    return ImageFrame.from_array(arr)


def synthetic_image(seed: int, width: int = 256, height: int = 256) -> ImageFrame:
    """Deterministic natural-looking frame: smooth color field plus texture.

    Built from a handful of random 2D cosines per channel with mid-range
    mean, so codec tests see realistic (non-saturated) statistics.
    """
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.empty((height, width, 3))
    for c in range(3):
        field = np.zeros((height, width))
        for _ in range(6):
            fx, fy = rng.uniform(0.2, 4.0, 2)
            phase = rng.uniform(0, 2 * np.pi)
            amp = rng.uniform(15, 45)
            field += amp * np.cos(2 * np.pi * (fx * x / width + fy * y / height) + phase)
        field += rng.normal(0.0, 6.0, field.shape)
        img[:, :, c] = 128.0 + rng.uniform(-30, 30) + field / 2.5
    return ImageFrame.from_array(np.clip(np.rint(img), 0, 255).astype(np.uint8))
