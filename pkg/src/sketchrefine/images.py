"""Image array conventions and 8-bit PNG I/O.

Arrays are numpy, channels-last:
  sketch  H x W      float in [0, 1], 1 = stroke
  mask    H x W      float in {0, 1}, 1 = editable region
  photo   H x W x 3  float in [-1, 1]

Quantization to 8-bit uses round-half-up so byte-exact round trips are stable.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image


class ImageError(ValueError):
    """Raised for images that violate the array conventions."""


def validate_sketch(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ImageError(f"sketch must be H x W, got shape {arr.shape}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ImageError("sketch values must lie in [0, 1]")
    return arr


def validate_mask(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ImageError(f"mask must be H x W, got shape {arr.shape}")
    if not np.isin(arr, (0.0, 1.0)).all():
        raise ImageError("mask must be strictly binary")
    return arr


def validate_photo(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageError(f"photo must be H x W x 3, got shape {arr.shape}")
    if arr.min() < -1.0 or arr.max() > 1.0:
        raise ImageError("photo values must lie in [-1, 1]")
    return arr


def all_ones_mask(height: int, width: int) -> np.ndarray:
    return np.ones((height, width), dtype=np.float64)


def quantize_unit(arr: np.ndarray) -> np.ndarray:
    """[0,1] float -> uint8, round half up."""
    return np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def quantize_signed(arr: np.ndarray) -> np.ndarray:
    """[-1,1] float -> uint8, round half up."""
    return quantize_unit((np.asarray(arr) + 1.0) / 2.0)


def unit_from_bytes(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float64) / 255.0


def signed_from_bytes(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float64) / 255.0 * 2.0 - 1.0


def save_sketch_png(path, sketch: np.ndarray) -> None:
    Image.fromarray(quantize_unit(sketch), mode="L").save(path, format="PNG")


def save_mask_png(path, mask: np.ndarray) -> None:
    Image.fromarray(quantize_unit(mask), mode="L").save(path, format="PNG")


def save_photo_png(path, photo: np.ndarray) -> None:
    Image.fromarray(quantize_signed(photo), mode="RGB").save(path, format="PNG")


def load_sketch_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return unit_from_bytes(np.asarray(im.convert("L")))


def load_mask_png(path) -> np.ndarray:
    """Grayscale PNG -> strictly binary mask (threshold 0.5)."""
    with Image.open(path) as im:
        gray = unit_from_bytes(np.asarray(im.convert("L")))
    return (gray >= 0.5).astype(np.float64)


def load_photo_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return signed_from_bytes(np.asarray(im.convert("RGB")))


def png_bytes(arr_u8: np.ndarray, mode: str) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr_u8, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def sketch_to_png_b64(sketch: np.ndarray) -> str:
    return base64.b64encode(png_bytes(quantize_unit(sketch), "L")).decode("ascii")


def photo_to_png_b64(photo: np.ndarray) -> str:
    return base64.b64encode(png_bytes(quantize_signed(photo), "RGB")).decode("ascii")


def decode_png_b64(data: str) -> np.ndarray:
    """base64 PNG -> uint8 array (H x W for grayscale, H x W x 3 for RGB)."""
    try:
        raw = base64.b64decode(data, validate=True)
        with Image.open(io.BytesIO(raw)) as im:
            if im.mode in ("L", "1"):
                return np.asarray(im.convert("L"))
            return np.asarray(im.convert("RGB"))
    except Exception as exc:
        raise ImageError(f"could not decode PNG payload: {exc}") from exc
