"""Rough-sketch synthesis by dilation, deformation and line discarding.

Training pairs are built by warping fine edge lines, dropping random patches,
and dilating the result into a drawable region whose radius is level * R.
All operations are pure functions of (inputs, rng) and keep values in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import images


@dataclass(frozen=True)
class RoughSketchConfig:
    """Knobs for drawable-region generation.

    max_radius is the dilation radius at level 1.0; per-pixel deformation
    offsets are bounded by radius * deform_max_offset_factor (factor <= 1 so
    the offset never exceeds the radius). Patch count/size ranges are
    inclusive. Soft inputs are binarized at binarize_threshold before warping.
    """

    max_radius: float = 10.0
    deform_max_offset_factor: float = 1.0
    discard_patch_count_range: tuple[int, int] = (0, 4)
    discard_patch_size_range: tuple[int, int] = (8, 32)
    deform_enabled: bool = True
    discard_enabled: bool = True
    binarize_threshold: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_radius < 1:
            raise ValueError("max_radius must be >= 1")
        if not 0.0 <= self.deform_max_offset_factor <= 1.0:
            raise ValueError("deform_max_offset_factor must be in [0, 1]")
        for lo, hi in (self.discard_patch_count_range, self.discard_patch_size_range):
            if lo < 0 or hi < lo:
                raise ValueError("ranges must be non-empty and non-negative")
        if not 0.0 < self.binarize_threshold < 1.0:
            raise ValueError("binarize_threshold must be in (0, 1)")

    def scaled_to_resolution(self, resolution: int, base_resolution: int = 256) -> "RoughSketchConfig":
        """Scale discard patch sizes proportionally from base_resolution."""
        if resolution == base_resolution:
            return self
        f = resolution / base_resolution
        lo, hi = self.discard_patch_size_range
        return replace(
            self,
            discard_patch_size_range=(max(1, round(lo * f)), max(1, round(hi * f))),
        )


def validate_level(level: float) -> float:
    level = float(level)
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"refinement level must be in [0, 1], got {level}")
    return level


def binarize(sketch: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return (images.validate_sketch(sketch) >= threshold).astype(np.float64)


def _sliding_sum(arr: np.ndarray, radius: int, axis: int) -> np.ndarray:
    """Sum over the centered window of half-width radius, zero padding."""
    n = arr.shape[axis]
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad)
    csum = np.cumsum(padded, axis=axis)
    zeros_shape = list(csum.shape)
    zeros_shape[axis] = 1
    csum = np.concatenate([np.zeros(zeros_shape), csum], axis=axis)
    width = 2 * radius + 1
    hi = csum.take(np.arange(width, width + n), axis=axis)
    lo = csum.take(np.arange(0, n), axis=axis)
    return hi - lo


def _dilate_integer(sketch: np.ndarray, radius: int) -> np.ndarray:
    if radius == 0:
        return sketch.copy()
    summed = _sliding_sum(_sliding_sum(sketch, radius, axis=0), radius, axis=1)
    return np.clip(summed, 0.0, 1.0)


def dilate(sketch: np.ndarray, radius: float) -> np.ndarray:
    """Dilate with an all-ones square kernel of side 2*radius+1, clipped to [0,1].

    Fractional radii blend the two neighboring integer dilations:
    (1-a) * dilate(floor) + a * dilate(ceil) with a the fractional part.
    """
    s = images.validate_sketch(sketch)
    radius = float(radius)
    if radius < 0:
        raise ValueError(f"dilation radius must be >= 0, got {radius}")
    lo = math.floor(radius)
    if radius == lo:
        return _dilate_integer(s, lo)
    alpha = radius - lo
    return (1.0 - alpha) * _dilate_integer(s, lo) + alpha * _dilate_integer(s, lo + 1)


def _smooth_offset_field(height: int, width: int, rng: np.random.Generator,
                         cell: int = 16) -> np.ndarray:
    """Random offsets on a coarse grid, bilinearly upsampled to H x W x 2."""
    gy = max(2, height // cell + 2)
    gx = max(2, width // cell + 2)
    nodes = rng.uniform(-1.0, 1.0, size=(gy, gx, 2))
    yy = np.linspace(0.0, gy - 1.0, height)
    xx = np.linspace(0.0, gx - 1.0, width)
    y0 = np.minimum(np.floor(yy).astype(int), gy - 2)
    x0 = np.minimum(np.floor(xx).astype(int), gx - 2)
    fy = (yy - y0)[:, None, None]
    fx = (xx - x0)[None, :, None]
    n00 = nodes[y0[:, None], x0[None, :]]
    n01 = nodes[y0[:, None], x0[None, :] + 1]
    n10 = nodes[y0[:, None] + 1, x0[None, :]]
    n11 = nodes[y0[:, None] + 1, x0[None, :] + 1]
    top = n00 * (1 - fx) + n01 * fx
    bot = n10 * (1 - fx) + n11 * fx
    return top * (1 - fy) + bot * fy


def deform_lines(sketch: np.ndarray, radius: float, cfg: RoughSketchConfig,
                 rng: np.random.Generator) -> np.ndarray:
    """Warp strokes by a smooth random field, Euclidean offset <= radius * factor.

    Lit pixels (after binarization at cfg.binarize_threshold) are forward-mapped
    to integer destinations; rounding falls back to truncation whenever it would
    push a pixel past the bound, so the offset limit holds exactly. radius == 0
    returns the input unchanged.
    """
    s = images.validate_sketch(sketch)
    radius = float(radius)
    if radius < 0:
        raise ValueError(f"deformation radius must be >= 0, got {radius}")
    bound = radius * cfg.deform_max_offset_factor
    if bound == 0.0:
        return s.copy()

    height, width = s.shape
    field = _smooth_offset_field(height, width, rng)
    mag = np.hypot(field[..., 0], field[..., 1])
    peak = mag.max()
    if peak > 0:
        field = field * (bound / peak)

    lit = binarize(s, cfg.binarize_threshold) > 0
    ys, xs = np.nonzero(lit)
    if ys.size == 0:
        return np.zeros_like(s)

    d = field[ys, xs]
    moved = np.rint(d)
    over = np.hypot(moved[:, 0], moved[:, 1]) > bound
    moved[over] = np.trunc(d[over])

    dest_y = np.clip(ys + moved[:, 0].astype(int), 0, height - 1)
    dest_x = np.clip(xs + moved[:, 1].astype(int), 0, width - 1)
    out = np.zeros_like(s)
    out[dest_y, dest_x] = 1.0
    return out


def discard_patches(sketch: np.ndarray, cfg: RoughSketchConfig,
                    rng: np.random.Generator) -> np.ndarray:
    """Zero out k random axis-aligned square patches; output <= input pixelwise."""
    s = images.validate_sketch(sketch).copy()
    height, width = s.shape
    lo, hi = cfg.discard_patch_count_range
    count = int(rng.integers(lo, hi + 1))
    slo, shi = cfg.discard_patch_size_range
    for _ in range(count):
        size = int(rng.integers(slo, shi + 1))
        size = min(size, height, width)
        if size == 0:
            continue
        y0 = int(rng.integers(0, height - size + 1))
        x0 = int(rng.integers(0, width - size + 1))
        s[y0:y0 + size, x0:x0 + size] = 0.0
    return s


def make_drawable_region(sketch: np.ndarray, level: float, cfg: RoughSketchConfig,
                         rng: np.random.Generator, training: bool) -> np.ndarray:
    """Drawable region at the given refinement level (radius = level * max_radius).

    Training mode deforms and discards lines before dilating, so the fine lines
    end up off-center in, but always covered by, the region. Inference dilates
    only. Masking against an editable region is the caller's responsibility.
    """
    level = validate_level(level)
    radius = level * cfg.max_radius
    s = images.validate_sketch(sketch)
    if training:
        if cfg.deform_enabled:
            s = deform_lines(s, radius, cfg, rng)
        if cfg.discard_enabled:
            s = discard_patches(s, cfg, rng)
    return dilate(s, radius)


def generate_mask(height: int, width: int, rng: np.random.Generator,
                  min_side_frac: float = 0.25, max_side_frac: float = 0.60) -> np.ndarray:
    """Binary mask holding one randomly rotated rectangle, clipped to bounds.

    Side lengths are uniform fractions of the image sides, rotation uniform in
    [0, 180) degrees, center uniform over the image.
    """
    if height <= 0 or width <= 0:
        raise ValueError("mask dimensions must be positive")
    rect_h = rng.uniform(min_side_frac, max_side_frac) * height
    rect_w = rng.uniform(min_side_frac, max_side_frac) * width
    cy = rng.uniform(0.0, height - 1.0)
    cx = rng.uniform(0.0, width - 1.0)
    theta = rng.uniform(0.0, math.pi)

    ys = np.arange(height, dtype=np.float64)[:, None] - cy
    xs = np.arange(width, dtype=np.float64)[None, :] - cx
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    u = cos_t * xs + sin_t * ys
    v = -sin_t * xs + cos_t * ys
    inside = (np.abs(u) <= rect_w / 2.0) & (np.abs(v) <= rect_h / 2.0)
    return inside.astype(np.float64)
