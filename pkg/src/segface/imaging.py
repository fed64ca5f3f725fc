"""Grayscale frame primitives: block downsampling, CLAHE, integral images, PGM I/O.

Frames are plain 2-D ``uint8`` numpy arrays indexed ``[row, col]``; width is
``shape[1]`` and height is ``shape[0]``.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .validation import check_gray_image, check_positive_int

__all__ = [
    "downsample",
    "clahe",
    "integral",
    "rect_sum",
    "read_pgm",
    "write_pgm",
    "pgm_size",
    "read_image",
    "image_size",
    "rgb_to_luma",
    "Preprocessor",
]


def _round_half_up(x):
    return np.floor(x + 0.5)


def downsample(img, factor):
    """Block-mean downsample by an integer ``factor``.

    Output dimensions are ``floor(dim / factor)``; trailing rows and columns
    that do not fill a complete block are dropped. Each output pixel is the
    mean of its ``factor x factor`` block rounded half up.

    >>> downsample(np.array([[0, 255], [255, 0]], dtype=np.uint8), 2)
    array([[128]], dtype=uint8)
    """
    img = check_gray_image(img, allow_empty=True)
    factor = check_positive_int(factor, "factor")
    if factor == 1:
        return img.copy()
    h, w = img.shape[0] // factor, img.shape[1] // factor
    blocks = img[: h * factor, : w * factor].astype(np.int64)
    sums = blocks.reshape(h, factor, w, factor).sum(axis=(1, 3))
    area = factor * factor
    return ((sums + area // 2) // area).astype(np.uint8)


def _tile_luts(padded, tiles_x, tiles_y, tile_w, tile_h, clip_limit):
    npix = tile_w * tile_h
    tiles = padded.reshape(tiles_y, tile_h, tiles_x, tile_w).transpose(0, 2, 1, 3)
    tiles = tiles.reshape(tiles_y * tiles_x, npix).astype(np.int64)
    offsets = (np.arange(tiles_y * tiles_x, dtype=np.int64) * 256)[:, None]
    hist = np.bincount((tiles + offsets).ravel(), minlength=tiles_y * tiles_x * 256)
    hist = hist.reshape(tiles_y * tiles_x, 256)

    if math.isfinite(clip_limit):
        limit = max(int(clip_limit * npix / 256.0), 1)
        excess = np.maximum(hist - limit, 0).sum(axis=1)
        hist = np.minimum(hist, limit)
        hist += (excess // 256)[:, None]
        residual = excess % 256
        # residual goes to the lowest bins
        hist += (np.arange(256)[None, :] < residual[:, None]).astype(np.int64)

    cdf = np.cumsum(hist, axis=1)
    lut = np.clip(_round_half_up(cdf * (255.0 / npix)), 0, 255)
    return lut.reshape(tiles_y, tiles_x, 256)


def _interp_axis(n, tile, ntiles):
    # position of each pixel centre in tile-centre coordinates
    g = (np.arange(n) + 0.5) / tile - 0.5
    i0 = np.floor(g).astype(np.int64)
    wgt = g - i0
    i1 = np.clip(i0 + 1, 0, ntiles - 1)
    i0 = np.clip(i0, 0, ntiles - 1)
    return i0, i1, wgt


def clahe(img, tiles_x=8, tiles_y=8, clip_limit=2.0):
    """Contrast limited adaptive histogram equalization.

    The frame is split into ``tiles_x x tiles_y`` equal tiles (the frame is
    padded by mirroring when its size is not a multiple of the tile grid).
    Each tile histogram is clipped at ``clip_limit * tile_pixels / 256``; the
    clipped excess is spread uniformly over all bins in a single pass. Output
    pixels bilinearly interpolate the four nearest tile mappings, replicating
    the edge tiles at the borders. ``clip_limit=float("inf")`` disables
    clipping.

    A constant frame carries no contrast to redistribute and is returned
    unchanged.
    """
    img = check_gray_image(img, allow_empty=True)
    if img.size == 0:
        raise ValueError("clahe needs a non-empty image")
    tiles_x = check_positive_int(tiles_x, "tiles_x")
    tiles_y = check_positive_int(tiles_y, "tiles_y")
    clip_limit = float(clip_limit)
    if not clip_limit > 0:
        raise ValueError(f"clip_limit must be positive, got {clip_limit}")
    h, w = img.shape
    if tiles_x > w or tiles_y > h:
        raise ValueError(f"{tiles_x}x{tiles_y} tiles do not fit a {w}x{h} image")
    if img.min() == img.max():
        return img.copy()

    tile_w, tile_h = -(-w // tiles_x), -(-h // tiles_y)
    pad_w, pad_h = tile_w * tiles_x - w, tile_h * tiles_y - h
    padded = np.pad(img, ((0, pad_h), (0, pad_w)), mode="symmetric")
    lut = _tile_luts(padded, tiles_x, tiles_y, tile_w, tile_h, clip_limit)

    x0, x1, wx = _interp_axis(w, tile_w, tiles_x)
    y0, y1, wy = _interp_axis(h, tile_h, tiles_y)
    v = img.astype(np.int64)
    top = (1 - wx) * lut[y0[:, None], x0[None, :], v] + wx * lut[y0[:, None], x1[None, :], v]
    bot = (1 - wx) * lut[y1[:, None], x0[None, :], v] + wx * lut[y1[:, None], x1[None, :], v]
    out = (1 - wy)[:, None] * top + wy[:, None] * bot
    return np.clip(_round_half_up(out), 0, 255).astype(np.uint8)


def integral(img):
    """Summed-area table of shape ``(h + 1, w + 1)`` with a zero first row and column.

    Entries are exact ``int64`` sums, so rectangle sums never suffer from
    floating-point accumulation.
    """
    img = check_gray_image(img, allow_empty=True)
    ii = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(img, axis=0, dtype=np.int64), axis=1, out=ii[1:, 1:])
    return ii


def rect_sum(ii, x1, y1, x2, y2):
    """Sum of pixels in ``[x1, x2) x [y1, y2)`` using four table lookups.

    Coordinates may be scalars or equally shaped integer arrays.
    """
    return ii[y2, x2] - ii[y1, x2] - ii[y2, x1] + ii[y1, x1]


def rgb_to_luma(rgb):
    """Convert an ``(h, w, 3)`` RGB array to luma ``round(.299 R + .587 G + .114 B)``."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] < 3:
        raise ValueError(f"expected an (h, w, 3) RGB array, got shape {rgb.shape}")
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(_round_half_up(y), 0, 255).astype(np.uint8)


def _read_pgm_header(fh):
    tokens = []
    while len(tokens) < 4:
        line = fh.readline()
        if not line:
            raise ValueError("truncated PGM header")
        line = line.split(b"#", 1)[0]
        tokens.extend(line.split())
    magic, w, h, maxval = tokens[:4]
    if magic != b"P5":
        raise ValueError(f"only binary PGM (P5) is supported, got {magic!r}")
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval <= 255:
        raise ValueError(f"unsupported PGM maxval {maxval}")
    return w, h, maxval


def pgm_size(path):
    """Return ``(width, height)`` from a PGM header without reading the pixels."""
    with open(path, "rb") as fh:
        w, h, _ = _read_pgm_header(fh)
    return w, h


def read_pgm(path):
    with open(path, "rb") as fh:
        w, h, maxval = _read_pgm_header(fh)
        data = fh.read(w * h)
    if len(data) != w * h:
        raise ValueError(f"{path}: expected {w * h} pixel bytes, got {len(data)}")
    img = np.frombuffer(data, dtype=np.uint8).reshape(h, w)
    if maxval != 255:
        img = np.clip(_round_half_up(img * (255.0 / maxval)), 0, 255).astype(np.uint8)
    return img.copy()


def write_pgm(path, img):
    img = check_gray_image(img)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_image(path):
    """Load any image as grayscale; PGM natively, other formats through Pillow."""
    path = os.fspath(path)
    if path.lower().endswith(".pgm"):
        return read_pgm(path)
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise ImportError(f"reading {path!r} requires Pillow (pip install segface[images])") from exc
    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8).copy()
        return rgb_to_luma(np.asarray(im.convert("RGB")))


def image_size(path):
    path = os.fspath(path)
    if path.lower().endswith(".pgm"):
        return pgm_size(path)
    from PIL import Image

    with Image.open(path) as im:
        return im.size


class Preprocessor:
    """Downsample then CLAHE, the frame preparation ahead of segment detection."""

    def __init__(self, factor=4, tiles_x=8, tiles_y=8, clip_limit=2.0, equalize=True):
        self.factor = check_positive_int(factor, "factor")
        self.tiles_x = tiles_x
        self.tiles_y = tiles_y
        self.clip_limit = clip_limit
        self.equalize = equalize

    def __call__(self, img):
        small = downsample(img, self.factor)
        if not self.equalize:
            return small
        tx = min(self.tiles_x, small.shape[1])
        ty = min(self.tiles_y, small.shape[0])
        return clahe(small, tx, ty, self.clip_limit)
