"""Fixtures and reference reconstructors for tests and demos.

The row-mean reconstructor is the desk-scale stand-in for pre-trained
behavior: filling each masked pixel row with that row's mean over the
visible region makes the whole pipeline collapse to the seasonal-average
baseline, which gives an independent end-to-end oracle.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .archive import IMAGENET_MEAN, IMAGENET_STD, ModelManifest, write_archive
from .errors import ShapeError
from .mae_infer import MaeModel, PatchMask, expected_tensor_shapes


def row_mean_reconstructor(canvas: np.ndarray, mask: PatchMask) -> np.ndarray:
    """Fill every masked pixel row with its mean over the visible region.

    Only meaningful for the left-visible column layout the codec emits.
    Accepts a single canvas or a batch with a leading axis.
    """
    grid = mask.grid
    if not all(bool(col.all()) or not bool(col.any()) for col in grid.T):
        raise ShapeError("row-mean reconstruction expects full visible/masked patch columns")
    visible_cols = int(grid[0].sum())
    side = grid.shape[0]
    canvas = np.asarray(canvas, dtype=np.float32)
    patch = canvas.shape[-1] // side
    width = visible_cols * patch
    out = canvas.copy()
    row_means = canvas[..., :width].mean(axis=-1, keepdims=True)
    out[..., width:] = np.broadcast_to(row_means, out[..., width:].shape)
    return out


def identity_reconstructor(canvas: np.ndarray, mask: PatchMask) -> np.ndarray:
    """Return the canvas untouched (masked region stays zero)."""
    return np.asarray(canvas, dtype=np.float32).copy()


def tiny_manifest(
    *,
    encoder_dim: int = 32,
    encoder_depth: int = 2,
    encoder_heads: int = 2,
    decoder_dim: int = 16,
    decoder_depth: int = 1,
    decoder_heads: int = 2,
    grid_side: int = 14,
    patch_size: int = 16,
    pixel_targets: bool = True,
) -> ModelManifest:
    """A manifest small enough for fast forward passes in tests."""
    manifest = ModelManifest(
        encoder_dim=encoder_dim,
        encoder_depth=encoder_depth,
        encoder_heads=encoder_heads,
        decoder_dim=decoder_dim,
        decoder_depth=decoder_depth,
        decoder_heads=decoder_heads,
        patch_size=patch_size,
        grid_side=grid_side,
        mlp_ratio=4.0,
        pixel_targets=pixel_targets,
        channel_mean=IMAGENET_MEAN,
        channel_std=IMAGENET_STD,
        param_count=0,
    )
    count = sum(int(np.prod(s)) for s in expected_tensor_shapes(manifest).values())
    return ModelManifest(**{**manifest.to_dict(), "param_count": count})


def random_tensors(manifest: ModelManifest, seed: int = 0) -> dict[str, np.ndarray]:
    """Seeded random weights with healthy activation scales.

    Weight matrices are fan-in scaled and token vectors carry O(1) variance,
    mimicking trained checkpoints closely enough for numerics checks.
    """
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in sorted(expected_tensor_shapes(manifest).items()):
        if name.endswith("token"):
            scale = 0.5
        elif ".norm" in name and name.endswith(".weight"):
            tensors[name] = np.ones(shape, dtype=np.float32)
            continue
        elif name.endswith("bias"):
            scale = 0.01
        else:
            scale = 1.0 / np.sqrt(shape[-1])
        tensors[name] = rng.normal(0.0, scale, size=shape).astype(np.float32)
    return tensors


def random_model(seed: int = 0, manifest: ModelManifest | None = None) -> MaeModel:
    manifest = manifest or tiny_manifest()
    return MaeModel(manifest=manifest, tensors=random_tensors(manifest, seed))


def write_random_archive(path: str | Path, seed: int = 0, manifest: ModelManifest | None = None) -> Path:
    """Write a loadable random-weight archive; returns the path."""
    manifest = manifest or tiny_manifest()
    write_archive(path, random_tensors(manifest, seed), manifest)
    return Path(path)
