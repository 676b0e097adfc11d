"""Deterministic bilinear image resizing.

Both the forward alignment (series matrix -> model-sized image) and the
inverse mapping (reconstructed image -> series matrix) go through
:func:`bilinear_resize`.  The coordinate convention is pinned here once:

    source position of output pixel i = (i + 0.5) * in / out - 0.5

clamped to ``[0, in - 1]`` (half-pixel centers, no corner alignment, no
antialias prefilter).  Each output value blends the two nearest source
samples per axis.  Same-size resizes are the identity, constants are
preserved exactly, and outputs never leave ``[src.min(), src.max()]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class ResizeSpec:
    """Input and output pixel dimensions of one resize."""

    in_h: int
    in_w: int
    out_h: int
    out_w: int

    def __post_init__(self) -> None:
        for name in ("in_h", "in_w", "out_h", "out_w"):
            if getattr(self, name) < 1:
                raise ShapeError(f"ResizeSpec.{name} must be >= 1, got {getattr(self, name)}")


def _axis_samples(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-output-pixel (low index, high index, fraction) for one axis."""
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    np.clip(pos, 0.0, n_in - 1.0, out=pos)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def _resize_hw(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize the last two axes of ``src``; float64 math, clamped to the source range.

    Shared by the public 2-D operation and batched internal callers.
    """
    in_h, in_w = src.shape[-2], src.shape[-1]
    if (in_h, in_w) == (out_h, out_w):
        return src.copy()
    work = np.asarray(src, dtype=np.float64)
    rlo, rhi, rfrac = _axis_samples(in_h, out_h)
    clo, chi, cfrac = _axis_samples(in_w, out_w)
    low = work[..., rlo, :]
    rows = low + rfrac[:, None] * (work[..., rhi, :] - low)
    left = rows[..., :, clo]
    out = left + cfrac * (rows[..., :, chi] - left)
    # Bilinear blending is a convex combination; clip away fp overshoot so
    # the range bound holds exactly.
    np.clip(out, work.min(), work.max(), out=out)
    if src.dtype == np.float32:
        return out.astype(np.float32)
    return out


def bilinear_resize(src: np.ndarray, spec: ResizeSpec) -> np.ndarray:
    """Resize a 2-D matrix to ``(spec.out_h, spec.out_w)``.

    The source shape must match ``(spec.in_h, spec.in_w)``.  float32 input
    yields float32 output; everything else comes back as float64.
    """
    src = np.asarray(src)
    if src.ndim != 2:
        raise ShapeError(f"bilinear_resize expects a 2-D matrix, got ndim={src.ndim}")
    if src.shape != (spec.in_h, spec.in_w):
        raise ShapeError(f"source shape {src.shape} does not match spec ({spec.in_h}, {spec.in_w})")
    return _resize_hw(src, spec.out_h, spec.out_w)
