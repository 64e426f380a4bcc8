"""Deterministic 224x224 candlestick+volume renderer and tensor normalizer.

Rendering is plain integer rasterization over a numpy buffer: no text, no
axes, no anti-aliasing, no plotting library. Identical inputs give
byte-identical images on any platform, which is the contract the classifier
relies on between training and inference.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .config import kv_float, kv_int, kv_rgb, read_kv
from .errors import InputError
from .marketdata import FIRST_HOUR_BARS, OhlcvBar

IMAGE_SIZE = 224


@dataclass(frozen=True, eq=False)
class ChartImage:
    """224x224 RGB pixel buffer, row-major, read-only."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.pixels.shape != (IMAGE_SIZE, IMAGE_SIZE, 3):
            raise InputError(f"expected {IMAGE_SIZE}x{IMAGE_SIZE}x3, got {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise InputError(f"expected uint8 pixels, got {self.pixels.dtype}")
        self.pixels.setflags(write=False)

    @property
    def width(self) -> int:
        return IMAGE_SIZE

    @property
    def height(self) -> int:
        return IMAGE_SIZE

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChartImage):
            return NotImplemented
        return bool(np.array_equal(self.pixels, other.pixels))


@dataclass(frozen=True)
class RenderSpec:
    """Chart geometry and palette.

    The price pane takes the top `price_pane_fraction` of the image, the
    volume pane the rows left after a `gap_fraction` separator. Twelve candle
    slots are centered between the side margins.
    """

    price_pane_fraction: float = 0.72
    gap_fraction: float = 0.03
    candle_body_width: int = 14
    wick_width: int = 2
    margin: int = 6
    up_color: tuple[int, int, int] = (0, 128, 0)
    down_color: tuple[int, int, int] = (200, 30, 30)
    volume_color: tuple[int, int, int] = (120, 120, 120)
    background: tuple[int, int, int] = (255, 255, 255)

    def __post_init__(self) -> None:
        if not 0.0 < self.price_pane_fraction < 1.0:
            raise InputError("price_pane_fraction must be in (0,1)")
        if self.gap_fraction < 0 or self.price_pane_fraction + self.gap_fraction >= 1.0:
            raise InputError("gap_fraction leaves no room for the volume pane")
        if self.margin < 0 or self.candle_body_width < 1 or self.wick_width < 1:
            raise InputError("margin/body/wick sizes out of range")
        slot = (IMAGE_SIZE - 2 * self.margin) // FIRST_HOUR_BARS
        if slot < max(self.candle_body_width, self.wick_width):
            raise InputError("12 candles do not fit the width at this geometry")
        for name in ("up_color", "down_color", "volume_color", "background"):
            rgb = getattr(self, name)
            if len(rgb) != 3 or any(not 0 <= c <= 255 for c in rgb):
                raise InputError(f"{name} must be an RGB triplet in [0,255]")

    @classmethod
    def from_file(cls, path) -> "RenderSpec":
        kv = read_kv(path)
        return cls(
            price_pane_fraction=kv_float(kv, "price_pane_fraction", 0.72),
            gap_fraction=kv_float(kv, "gap_fraction", 0.03),
            candle_body_width=kv_int(kv, "candle_body_width", 14),
            wick_width=kv_int(kv, "wick_width", 2),
            margin=kv_int(kv, "margin", 6),
            up_color=kv_rgb(kv, "up_color", (0, 128, 0)),
            down_color=kv_rgb(kv, "down_color", (200, 30, 30)),
            volume_color=kv_rgb(kv, "volume_color", (120, 120, 120)),
            background=kv_rgb(kv, "background", (255, 255, 255)),
        )


@dataclass(frozen=True)
class ImageNormSpec:
    """Per-channel mean/stdev for (byte/255 - mean)/stdev normalization."""

    mean: tuple[float, float, float] = (0.485, 0.456, 0.406)
    stdev: tuple[float, float, float] = (0.229, 0.224, 0.225)

    def __post_init__(self) -> None:
        if any(s <= 0 for s in self.stdev):
            raise InputError("stdev channels must be positive")


DEFAULT_NORM = ImageNormSpec()


def pane_row(value: float, lo: float, hi: float, pane_height: int) -> int:
    """Row index of `value` in a pane scaled to [lo, hi], 0 = pane top.

    Mapping is floor((1 - (v-lo)/(hi-lo)) * (pane_height-1)); ties break by
    flooring. Callers handle the degenerate lo == hi case.
    """
    rel = (value - lo) / (hi - lo)
    return math.floor((1.0 - rel) * (pane_height - 1))


def _panes(spec: RenderSpec) -> tuple[int, int, int]:
    """(price pane height, volume pane top row, volume pane height)."""
    price_h = math.floor(spec.price_pane_fraction * IMAGE_SIZE)
    gap = math.floor(spec.gap_fraction * IMAGE_SIZE)
    vol_top = price_h + gap
    return price_h, vol_top, IMAGE_SIZE - vol_top


def _slots(spec: RenderSpec) -> list[int]:
    """Left x of each of the 12 candle slots."""
    drawable = IMAGE_SIZE - 2 * spec.margin
    slot_w = drawable // FIRST_HOUR_BARS
    x0 = spec.margin + (drawable - slot_w * FIRST_HOUR_BARS) // 2
    return [x0 + i * slot_w for i in range(FIRST_HOUR_BARS)]


def render_candles(bars: tuple[OhlcvBar, ...], spec: RenderSpec = RenderSpec()) -> ChartImage:
    """Rasterize 12 bars into a candlestick+volume chart.

    The price pane is min-max scaled to [min(low), max(high)] of the window
    and the volume pane to [0, max(volume)], so the image depends only on
    the shape of the window, not its absolute price or volume level. Flat
    prices degrade to midline one-pixel bodies; an all-zero volume window
    leaves the volume pane empty.
    """
    if len(bars) != FIRST_HOUR_BARS:
        raise InputError(f"expected {FIRST_HOUR_BARS} bars, got {len(bars)}")

    price_h, vol_top, vol_h = _panes(spec)
    slot_w = (IMAGE_SIZE - 2 * spec.margin) // FIRST_HOUR_BARS
    body_pad = (slot_w - spec.candle_body_width) // 2
    wick_pad = (slot_w - spec.wick_width) // 2

    buf = np.empty((IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.uint8)
    buf[:, :] = spec.background

    lo = min(b.low for b in bars)
    hi = max(b.high for b in bars)
    flat = hi == lo
    flat_row = (price_h - 1) // 2

    vmax = max(b.volume for b in bars)

    for x_slot, bar in zip(_slots(spec), bars):
        color = spec.up_color if bar.close >= bar.open else spec.down_color

        if flat:
            r_high = r_low = r_top = r_bot = flat_row
        else:
            r_high = pane_row(bar.high, lo, hi, price_h)
            r_low = pane_row(bar.low, lo, hi, price_h)
            r_top = pane_row(max(bar.open, bar.close), lo, hi, price_h)
            r_bot = pane_row(min(bar.open, bar.close), lo, hi, price_h)

        wick_x = x_slot + wick_pad
        buf[r_high : r_low + 1, wick_x : wick_x + spec.wick_width] = color
        body_x = x_slot + body_pad
        buf[r_top : r_bot + 1, body_x : body_x + spec.candle_body_width] = color

        if vmax > 0:
            v_row = vol_top + math.floor((1.0 - bar.volume / vmax) * (vol_h - 1))
            buf[v_row:IMAGE_SIZE, body_x : body_x + spec.candle_body_width] = spec.volume_color

    return ChartImage(pixels=buf)


def normalize_image(img: ChartImage, norm: ImageNormSpec = DEFAULT_NORM) -> np.ndarray:
    """Channel-major float32 tensor: ((byte/255) - mean_c) / stdev_c."""
    scaled = img.pixels.astype(np.float32) / np.float32(255.0)
    mean = np.asarray(norm.mean, dtype=np.float32).reshape(1, 1, 3)
    stdev = np.asarray(norm.stdev, dtype=np.float32).reshape(1, 1, 3)
    return np.ascontiguousarray(((scaled - mean) / stdev).transpose(2, 0, 1))


def denormalize_image(tensor: np.ndarray, norm: ImageNormSpec = DEFAULT_NORM) -> ChartImage:
    """Invert normalize_image back to a byte image (rounded to nearest)."""
    if tensor.shape != (3, IMAGE_SIZE, IMAGE_SIZE):
        raise InputError(f"expected (3,{IMAGE_SIZE},{IMAGE_SIZE}) tensor, got {tensor.shape}")
    mean = np.asarray(norm.mean, dtype=np.float64).reshape(3, 1, 1)
    stdev = np.asarray(norm.stdev, dtype=np.float64).reshape(3, 1, 1)
    bytes_ = np.rint((tensor.astype(np.float64) * stdev + mean) * 255.0)
    pixels = np.clip(bytes_, 0, 255).astype(np.uint8).transpose(1, 2, 0)
    return ChartImage(pixels=np.ascontiguousarray(pixels))


def encode_png(img: ChartImage, path) -> None:
    """Write a lossless 8-bit RGB PNG (no alpha)."""
    try:
        Image.fromarray(img.pixels, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise InputError(f"cannot write PNG {path}: {exc}") from exc


def decode_png(path) -> ChartImage:
    try:
        with Image.open(path) as im:
            pixels = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise InputError(f"cannot read PNG {path}: {exc}") from exc
    return ChartImage(pixels=np.ascontiguousarray(pixels))


def png_bytes(img: ChartImage) -> bytes:
    out = io.BytesIO()
    Image.fromarray(img.pixels, mode="RGB").save(out, format="PNG")
    return out.getvalue()
