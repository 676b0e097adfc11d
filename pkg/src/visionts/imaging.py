"""Series-to-image codec and its exact inverse.

Encoding turns the last ``m = L // P`` periods of a context window into a
``P x m`` matrix (column per period, row per phase), standardizes it to a
small target deviation, and bilinearly resizes it onto the left portion of a
fixed 224 x 224 patch grid.  Decoding reverses every step: resize the
reconstructed image back to series coordinates, undo the normalization,
flatten column-major, and read the horizon right after the context periods.

All image math is float32; per-window statistics and decoded forecasts are
kept in float64 so the affine round trip stays tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, SegmentError, ShapeError
from .mae_infer import PatchMask
from .resample import ResizeSpec, _resize_hw, bilinear_resize

IMAGE_SIDE = 224  # pre-training image height/width in pixels


@dataclass(frozen=True)
class ImagePlan:
    """All geometry for one forecast window.

    ``visible_cols`` is the number of patch columns holding context; the
    remaining columns to the right are masked and reconstructed.
    """

    period: int                # P, rows of the encoded matrix
    periods_in_context: int    # m = L // P, columns of the encoded matrix
    context_length: int        # L
    horizon: int               # H
    visible_cols: int          # n, patch columns carrying context
    target_std: float = 0.4    # r, standard deviation after normalization
    visible_scale: float = 0.4  # c, shrink factor applied to the visible width
    grid_side: int = 14        # N, patches per image side
    patch_size: int = 16       # S, pixels per patch side

    def __post_init__(self) -> None:
        if self.grid_side * self.patch_size != IMAGE_SIDE:
            raise ShapeError(
                f"grid_side*patch_size must equal {IMAGE_SIDE}, got "
                f"{self.grid_side}*{self.patch_size}"
            )
        if not 1 <= self.visible_cols <= self.grid_side:
            raise ShapeError(f"visible_cols must be in [1, {self.grid_side}], got {self.visible_cols}")
        if self.periods_in_context < 1:
            raise SegmentError("context must cover at least one period")
        if self.periods_in_context != self.context_length // self.period:
            raise ShapeError("periods_in_context must equal context_length // period")
        if not (0.0 < self.target_std <= 1.0 and 0.0 < self.visible_scale <= 1.0):
            raise ShapeError("target_std and visible_scale must lie in (0, 1]")
        if self.horizon < 0:
            raise ShapeError("horizon must be >= 0")

    @property
    def visible_width(self) -> int:
        """Pixel width of the visible (context) portion."""
        return self.visible_cols * self.patch_size

    @property
    def output_periods(self) -> int:
        """Columns of the decoded matrix: periods represented by the full image."""
        return int(math.floor(self.periods_in_context * self.grid_side / self.visible_cols + 0.5))

    @property
    def forecast_capacity(self) -> int:
        """Longest horizon the decoded image can express."""
        return (self.output_periods - self.periods_in_context) * self.period


@dataclass(frozen=True)
class NormStats:
    """Mean and standard deviation removed from one window (for de-normalization)."""

    mean: float
    std: float

    def __post_init__(self) -> None:
        if not (self.std > 0 and math.isfinite(self.std) and math.isfinite(self.mean)):
            raise ShapeError(f"invalid normalization stats: mean={self.mean}, std={self.std}")


@dataclass(frozen=True)
class GrayImage:
    """Single-channel image; three-channel replication happens at the model boundary."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ShapeError(f"GrayImage expects a 2-D pixel matrix, got ndim={px.ndim}")
        if not np.isfinite(px).all():
            raise ShapeError("GrayImage contains non-finite pixels")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


def visible_columns(context_length: int, horizon: int, visible_scale: float, grid_side: int) -> int:
    """Patch columns granted to the context: floor(c * N * L / (L + H)), at least 1."""
    if context_length < 1 or horizon < 1:
        raise ShapeError("context_length and horizon must be >= 1")
    if not 0.0 < visible_scale <= 1.0 or grid_side < 1:
        raise ShapeError("visible_scale must be in (0, 1] and grid_side >= 1")
    raw = visible_scale * grid_side * context_length / (context_length + horizon)
    return min(grid_side, max(1, int(math.floor(raw))))


def plan_for(
    context_length: int,
    horizon: int,
    period: int,
    *,
    target_std: float = 0.4,
    visible_scale: float = 0.4,
    grid_side: int = 14,
    patch_size: int = 16,
) -> ImagePlan:
    """Derive the full image geometry for a (L, H, P) forecasting task."""
    if period < 1:
        raise SegmentError(f"period must be >= 1, got {period}")
    if context_length < period:
        raise SegmentError(f"context length {context_length} shorter than period {period}")
    return ImagePlan(
        period=period,
        periods_in_context=context_length // period,
        context_length=context_length,
        horizon=horizon,
        visible_cols=visible_columns(context_length, horizon, visible_scale, grid_side),
        target_std=target_std,
        visible_scale=visible_scale,
        grid_side=grid_side,
        patch_size=patch_size,
    )


def segment(context: np.ndarray, period: int) -> np.ndarray:
    """Stack the most recent full periods into a (period x m) float32 matrix.

    The oldest ``L - m*P`` values are discarded; column j holds the j-th
    retained period, so a column-major flatten reproduces the tail of the
    context exactly.
    """
    x = np.asarray(context, dtype=np.float64).ravel()
    if period < 1:
        raise SegmentError(f"period must be >= 1, got {period}")
    if x.size < period:
        raise SegmentError(f"context length {x.size} shorter than period {period}")
    m = x.size // period
    tail = x[x.size - m * period :]
    return np.ascontiguousarray(tail.reshape(m, period).T, dtype=np.float32)


def normalize(raw: np.ndarray, target_std: float) -> tuple[np.ndarray, NormStats]:
    """Shift/scale a matrix to mean 0 and standard deviation ``target_std``.

    Statistics are population statistics computed in float64.  A constant
    input gets std substituted with 1 so the output is all zeros and
    de-normalization returns the constant.
    """
    if not 0.0 < target_std <= 1.0:
        raise ShapeError(f"target_std must lie in (0, 1], got {target_std}")
    a = np.asarray(raw, dtype=np.float64)
    if a.size == 0:
        raise ShapeError("cannot normalize an empty matrix")
    mean = float(a.mean())
    std = float(a.std())
    if std == 0.0:
        std = 1.0
    norm = ((a - mean) * (target_std / std)).astype(np.float32)
    return norm, NormStats(mean=mean, std=std)


def denormalize(values: np.ndarray, stats: NormStats, target_std: float) -> np.ndarray:
    """Exact inverse of :func:`normalize`'s affine map (float64 output)."""
    if target_std <= 0:
        raise ShapeError(f"target_std must be > 0, got {target_std}")
    v = np.asarray(values, dtype=np.float64)
    return v * (stats.std / target_std) + stats.mean


def align(norm: np.ndarray, plan: ImagePlan) -> tuple[GrayImage, PatchMask]:
    """Resize the normalized matrix onto the visible patch columns.

    Returns the 224 x (n*S) visible image and the patch-grid mask marking the
    left ``n`` columns visible, everything to the right masked.
    """
    norm = np.asarray(norm)
    expected = (plan.period, plan.periods_in_context)
    if norm.shape != expected:
        raise ShapeError(f"normalized matrix shape {norm.shape} does not match plan {expected}")
    visible = bilinear_resize(
        norm.astype(np.float32, copy=False),
        ResizeSpec(plan.period, plan.periods_in_context, IMAGE_SIDE, plan.visible_width),
    )
    return GrayImage(visible), PatchMask.left_visible(plan.grid_side, plan.visible_cols)


def reconstruct_to_forecast(
    full_image: GrayImage | np.ndarray, plan: ImagePlan, stats: NormStats
) -> np.ndarray:
    """Decode a reconstructed 224 x 224 image into the H-step forecast.

    Accepts a single- or three-channel image (channels averaged first).
    Raises :class:`CapacityError` when the plan's decoded width cannot hold
    the requested horizon.
    """
    px = full_image.pixels if isinstance(full_image, GrayImage) else np.asarray(full_image)
    if px.ndim == 3:
        if px.shape[2] != 3:
            raise ShapeError(f"expected 3 channels, got {px.shape[2]}")
        px = px.mean(axis=2)
    if px.shape != (IMAGE_SIDE, IMAGE_SIDE):
        raise ShapeError(f"expected {IMAGE_SIDE} x {IMAGE_SIDE} image, got {px.shape}")
    width = plan.output_periods
    if plan.forecast_capacity < plan.horizon:
        raise CapacityError(
            f"plan holds {plan.forecast_capacity} future steps "
            f"({width} decoded periods of {plan.period}), horizon {plan.horizon} requested"
        )
    small = bilinear_resize(
        px.astype(np.float32, copy=False), ResizeSpec(IMAGE_SIDE, IMAGE_SIDE, plan.period, width)
    )
    flat = denormalize(small, stats, plan.target_std).ravel(order="F")
    begin = plan.periods_in_context * plan.period
    return flat[begin : begin + plan.horizon]


def encode_window(context: np.ndarray, plan: ImagePlan) -> tuple[np.ndarray, PatchMask, NormStats]:
    """Run the full forward codec; returns the 224 x 224 canvas, mask, and stats.

    The canvas holds the visible image in its left columns and zeros across
    the masked region (the reconstructor never reads masked content).
    """
    matrix = segment(context, plan.period)
    if matrix.shape[1] != plan.periods_in_context:
        raise ShapeError(
            f"context yields {matrix.shape[1]} periods, plan expects {plan.periods_in_context}"
        )
    norm, stats = normalize(matrix, plan.target_std)
    visible, mask = align(norm, plan)
    canvas = np.zeros((IMAGE_SIDE, IMAGE_SIDE), dtype=np.float32)
    canvas[:, : plan.visible_width] = visible.pixels
    return canvas, mask, stats


def forecast_window(context, plan: ImagePlan, reconstructor) -> np.ndarray:
    """Encode, reconstruct with the supplied callable, and decode one window.

    ``reconstructor(canvas, mask)`` must return a full 224 x 224 image
    (single- or three-channel).
    """
    canvas, mask, stats = encode_window(context, plan)
    full = reconstructor(canvas, mask)
    return reconstruct_to_forecast(np.asarray(full), plan, stats)


def to_pgm(image: GrayImage | np.ndarray) -> bytes:
    """Serialize an image as binary PGM (P5, maxval 255).

    Pixels are mapped linearly from [min, max] onto 0..255 with round-half-
    to-even; a constant image maps to mid-gray 128.  The exact layout is
    ``b"P5\\n{width} {height}\\n255\\n"`` followed by row-major bytes.
    """
    px = image.pixels if isinstance(image, GrayImage) else np.asarray(image)
    if px.ndim != 2:
        raise ShapeError(f"PGM dump expects a 2-D image, got ndim={px.ndim}")
    lo = float(px.min())
    hi = float(px.max())
    if hi > lo:
        scaled = np.rint((px - lo) * (255.0 / (hi - lo))).astype(np.uint8)
    else:
        scaled = np.full(px.shape, 128, dtype=np.uint8)
    header = f"P5\n{px.shape[1]} {px.shape[0]}\n255\n".encode("ascii")
    return header + scaled.tobytes()


def _batch_encode(contexts: np.ndarray, plan: ImagePlan) -> tuple[np.ndarray, PatchMask, np.ndarray, np.ndarray]:
    """Vectorized forward codec over a (B, L) batch sharing one plan.

    Returns (canvases (B,224,224) float32, mask, means (B,), stds (B,)).
    """
    x = np.asarray(contexts, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected a (B, L) batch, got ndim={x.ndim}")
    length = x.shape[1]
    m = plan.periods_in_context
    p = plan.period
    if length // p != m or length != plan.context_length:
        raise ShapeError(f"batch context length {length} does not match plan L={plan.context_length}")
    tail = x[:, length - m * p :]
    # Same narrowing sequence as segment() followed by normalize(), so the
    # batched path is bit-identical to the per-window one.
    mats = tail.reshape(-1, m, p).transpose(0, 2, 1).astype(np.float32).astype(np.float64)
    means = mats.reshape(len(mats), -1).mean(axis=1)
    stds = mats.reshape(len(mats), -1).std(axis=1)
    stds = np.where(stds == 0.0, 1.0, stds)
    norm = ((mats - means[:, None, None]) * (plan.target_std / stds)[:, None, None]).astype(np.float32)
    visible = _resize_hw(norm, IMAGE_SIDE, plan.visible_width)
    canvases = np.zeros((len(mats), IMAGE_SIDE, IMAGE_SIDE), dtype=np.float32)
    canvases[:, :, : plan.visible_width] = visible
    mask = PatchMask.left_visible(plan.grid_side, plan.visible_cols)
    return canvases, mask, means, stds


def _batch_decode(images: np.ndarray, plan: ImagePlan, means: np.ndarray, stds: np.ndarray) -> np.ndarray:
    """Vectorized inverse codec over (B, 224, 224[, 3]) images; returns (B, H)."""
    px = np.asarray(images)
    if px.ndim == 4:
        px = px.mean(axis=3)
    if plan.forecast_capacity < plan.horizon:
        raise CapacityError(
            f"plan holds {plan.forecast_capacity} future steps, horizon {plan.horizon} requested"
        )
    small = _resize_hw(px.astype(np.float32, copy=False), plan.period, plan.output_periods)
    small = small.astype(np.float64)
    small *= (stds / plan.target_std)[:, None, None]
    small += means[:, None, None]
    flat = small.transpose(0, 2, 1).reshape(len(small), -1)  # column-major per item
    begin = plan.periods_in_context * plan.period
    return flat[:, begin : begin + plan.horizon]
