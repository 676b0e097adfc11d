"""Inference-only masked autoencoder over a 224 x 224 patch grid.

The encoder embeds only the visible patches (linear patch embedding, fixed
2-D sin-cos position encodings, a class token, pre-norm transformer blocks
with softmax attention and erf-GELU MLPs, final norm).  The decoder projects
to its own width, substitutes a learned mask token at every masked position,
adds decoder position encodings, runs its own blocks, and regresses each
patch back to raw pixel values.  Visible patches keep their original pixels
in the output image.

Everything runs in float32 by default; ``strict=True`` switches the whole
forward pass to float64 for tolerance debugging.  No architecture constant
is hard-coded: dimensions, depths, head counts, and the patch grid all come
from the archive manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.special import ndtr

from .archive import ModelManifest, read_archive
from .errors import LoadError, NumericsError, ShapeError

_LN_EPS = 1e-6


@dataclass(frozen=True)
class PatchMask:
    """N x N boolean patch grid; True marks a visible patch."""

    grid: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=bool)
        if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
            raise ShapeError(f"mask grid must be square, got shape {grid.shape}")
        if not grid.any():
            raise ValueError("mask must leave at least one patch visible")
        if grid.all():
            raise ValueError("mask must cover at least one patch")
        grid = grid.copy()
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @classmethod
    def left_visible(cls, grid_side: int, visible_cols: int) -> "PatchMask":
        """Context on the left ``visible_cols`` columns, forecast on the right."""
        grid = np.zeros((grid_side, grid_side), dtype=bool)
        grid[:, :visible_cols] = True
        return cls(grid)

    @property
    def side(self) -> int:
        return int(self.grid.shape[0])

    @property
    def visible_indices(self) -> np.ndarray:
        """Flat indices of visible patches in row-major grid order."""
        return np.flatnonzero(self.grid.ravel())

    @property
    def masked_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.grid.ravel())


class ForwardTrace:
    """Numerics instrumentation collected during a forward pass."""

    def __init__(self) -> None:
        self.attention_row_sums: list[tuple[float, float]] = []
        self.layernorm_means: list[tuple[float, float]] = []
        self.layernorm_vars: list[tuple[float, float]] = []

    def record_attention(self, probs: np.ndarray) -> None:
        sums = probs.sum(axis=-1)
        self.attention_row_sums.append((float(sums.min()), float(sums.max())))

    def record_layernorm(self, normalized: np.ndarray) -> None:
        means = normalized.mean(axis=-1)
        variances = normalized.var(axis=-1)
        self.layernorm_means.append((float(means.min()), float(means.max())))
        self.layernorm_vars.append((float(variances.min()), float(variances.max())))

    @property
    def max_attention_row_error(self) -> float:
        return max((max(abs(lo - 1.0), abs(hi - 1.0)) for lo, hi in self.attention_row_sums), default=0.0)

    @property
    def max_layernorm_mean(self) -> float:
        return max((max(abs(lo), abs(hi)) for lo, hi in self.layernorm_means), default=0.0)

    @property
    def max_layernorm_var_error(self) -> float:
        return max((max(abs(lo - 1.0), abs(hi - 1.0)) for lo, hi in self.layernorm_vars), default=0.0)


def sincos_position_embeddings(embed_dim: int, grid_side: int, *, with_cls: bool = True) -> np.ndarray:
    """Fixed 2-D sine/cosine position table for a square patch grid.

    Half the embedding encodes one axis, half the other; each half splits
    again into sine and cosine banks over a geometric frequency ladder.  The
    class token, when present, sits first with an all-zero encoding.  This
    reproduces the fixed tables the pre-trained checkpoints were built with.
    """
    if embed_dim % 4 != 0:
        raise ShapeError(f"embed_dim must be divisible by 4, got {embed_dim}")
    steps = np.arange(grid_side, dtype=np.float64)
    axis_w, axis_h = np.meshgrid(steps, steps)  # row-major grid: h varies slowest

    def _bank(values: np.ndarray) -> np.ndarray:
        half = embed_dim // 2
        omega = 1.0 / 10000.0 ** (np.arange(half // 2, dtype=np.float64) / (half / 2.0))
        angles = values.reshape(-1)[:, None] * omega[None, :]
        return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)

    table = np.concatenate([_bank(axis_w), _bank(axis_h)], axis=1)
    if with_cls:
        table = np.concatenate([np.zeros((1, embed_dim)), table], axis=0)
    return table.astype(np.float32)


def patchify(image: np.ndarray, patch_size: int) -> np.ndarray:
    """Split a (side, side, 3) image into row-major patch vectors.

    Within one patch the pixel order is row-major with the channel varying
    fastest, so ``unpatchify(patchify(x)) == x`` bit-exactly.
    """
    img = np.asarray(image)
    single = img.ndim == 3
    if single:
        img = img[None]
    if img.ndim != 4 or img.shape[1] != img.shape[2] or img.shape[3] != 3:
        raise ShapeError(f"expected (side, side, 3) image, got shape {np.asarray(image).shape}")
    side = img.shape[1]
    if side % patch_size != 0:
        raise ShapeError(f"image side {side} not divisible by patch size {patch_size}")
    n = side // patch_size
    batch = img.shape[0]
    patches = (
        img.reshape(batch, n, patch_size, n, patch_size, 3)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(batch, n * n, patch_size * patch_size * 3)
    )
    return patches[0] if single else patches


def unpatchify(patches: np.ndarray, patch_size: int) -> np.ndarray:
    """Inverse of :func:`patchify`."""
    arr = np.asarray(patches)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[2] != patch_size * patch_size * 3:
        raise ShapeError(f"expected (count, {patch_size * patch_size * 3}) patches, got {np.asarray(patches).shape}")
    n = int(round(arr.shape[1] ** 0.5))
    if n * n != arr.shape[1]:
        raise ShapeError(f"{arr.shape[1]} patches do not form a square grid")
    batch = arr.shape[0]
    img = (
        arr.reshape(batch, n, n, patch_size, patch_size, 3)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(batch, n * patch_size, n * patch_size, 3)
    )
    return img[0] if single else img


def _block_shapes(prefix: str, dim: int, hidden: int) -> dict[str, tuple[int, ...]]:
    return {
        f"{prefix}.norm1.weight": (dim,),
        f"{prefix}.norm1.bias": (dim,),
        f"{prefix}.attn.qkv.weight": (3 * dim, dim),
        f"{prefix}.attn.qkv.bias": (3 * dim,),
        f"{prefix}.attn.proj.weight": (dim, dim),
        f"{prefix}.attn.proj.bias": (dim,),
        f"{prefix}.norm2.weight": (dim,),
        f"{prefix}.norm2.bias": (dim,),
        f"{prefix}.mlp.fc1.weight": (hidden, dim),
        f"{prefix}.mlp.fc1.bias": (hidden,),
        f"{prefix}.mlp.fc2.weight": (dim, hidden),
        f"{prefix}.mlp.fc2.bias": (dim,),
    }


def expected_tensor_shapes(manifest: ModelManifest) -> dict[str, tuple[int, ...]]:
    """Required tensor names and shapes for a manifest's architecture."""
    d, dd = manifest.encoder_dim, manifest.decoder_dim
    pv = manifest.patch_values
    shapes: dict[str, tuple[int, ...]] = {
        "encoder.cls_token": (d,),
        "encoder.patch_embed.weight": (d, pv),
        "encoder.patch_embed.bias": (d,),
        "encoder.norm.weight": (d,),
        "encoder.norm.bias": (d,),
        "decoder.embed.weight": (dd, d),
        "decoder.embed.bias": (dd,),
        "decoder.mask_token": (dd,),
        "decoder.norm.weight": (dd,),
        "decoder.norm.bias": (dd,),
        "decoder.pred.weight": (pv, dd),
        "decoder.pred.bias": (pv,),
    }
    for i in range(manifest.encoder_depth):
        shapes.update(_block_shapes(f"encoder.blocks.{i}", d, int(d * manifest.mlp_ratio)))
    for i in range(manifest.decoder_depth):
        shapes.update(_block_shapes(f"decoder.blocks.{i}", dd, int(dd * manifest.mlp_ratio)))
    return shapes


def optional_tensor_shapes(manifest: ModelManifest) -> dict[str, tuple[int, ...]]:
    """Stored position tables; when present they override the generated ones."""
    tokens = manifest.grid_side * manifest.grid_side + 1
    return {
        "encoder.pos_embed": (tokens, manifest.encoder_dim),
        "decoder.pos_embed": (tokens, manifest.decoder_dim),
    }


@dataclass(frozen=True)
class MaeModel:
    """Loaded weights plus precomputed position tables; immutable and shareable."""

    manifest: ModelManifest
    tensors: Mapping[str, np.ndarray]
    encoder_pos: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]
    decoder_pos: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        man = self.manifest
        if man.image_side != 224:
            raise LoadError(f"grid_side*patch_size must be 224, got {man.image_side}")
        if man.encoder_dim % man.encoder_heads or man.decoder_dim % man.decoder_heads:
            raise LoadError("embedding dims must be divisible by their head counts")
        if not man.pixel_targets:
            raise LoadError(
                "archive was exported from a checkpoint without raw-pixel reconstruction "
                "targets (pixel_targets=false); pixel read-back would be invalid"
            )
        expected = expected_tensor_shapes(man)
        optional = optional_tensor_shapes(man)
        for name, shape in expected.items():
            if name not in self.tensors:
                raise LoadError(f"missing tensor {name!r}")
            got = tuple(self.tensors[name].shape)
            if got != shape:
                raise LoadError(f"tensor {name!r} has shape {got}, expected {shape}")
        for name in self.tensors:
            if name not in expected and name not in optional:
                raise LoadError(f"unexpected tensor {name!r}")
            if name in optional and tuple(self.tensors[name].shape) != optional[name]:
                raise LoadError(
                    f"tensor {name!r} has shape {tuple(self.tensors[name].shape)}, "
                    f"expected {optional[name]}"
                )
        total = sum(int(t.size) for t in self.tensors.values())
        if total != man.param_count:
            raise LoadError(f"manifest declares {man.param_count} parameters, tensors hold {total}")
        enc_pos = self.tensors.get("encoder.pos_embed")
        if enc_pos is None:
            enc_pos = sincos_position_embeddings(man.encoder_dim, man.grid_side)
        dec_pos = self.tensors.get("decoder.pos_embed")
        if dec_pos is None:
            dec_pos = sincos_position_embeddings(man.decoder_dim, man.grid_side)
        object.__setattr__(self, "encoder_pos", np.ascontiguousarray(enc_pos, dtype=np.float32))
        object.__setattr__(self, "decoder_pos", np.ascontiguousarray(dec_pos, dtype=np.float32))

    @property
    def param_count(self) -> int:
        return int(self.manifest.param_count)


def load_model(path: str | Path) -> MaeModel:
    """Read a tensor archive and validate it against its manifest."""
    tensors, manifest = read_archive(path)
    return MaeModel(manifest=manifest, tensors=tensors)


def _layer_norm(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, trace: ForwardTrace | None) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    normalized = (x - mean) / np.sqrt(var + np.asarray(_LN_EPS, dtype=x.dtype))
    if trace is not None:
        trace.record_layernorm(normalized)
    return normalized * weight + bias


def _gelu(x: np.ndarray) -> np.ndarray:
    # exact (erf) GELU, written as x * Phi(x); ndtr keeps the input dtype
    return x * ndtr(x)


def _attention(x: np.ndarray, t: Mapping[str, np.ndarray], prefix: str, heads: int,
               trace: ForwardTrace | None) -> np.ndarray:
    batch, tokens, dim = x.shape
    head_dim = dim // heads
    qkv = x @ t[f"{prefix}.qkv.weight"].T + t[f"{prefix}.qkv.bias"]
    qkv = qkv.reshape(batch, tokens, 3, heads, head_dim).transpose(2, 0, 3, 1, 4)
    q, k, v = qkv[0], qkv[1], qkv[2]
    scores = (q @ k.transpose(0, 1, 3, 2)) * np.asarray(head_dim**-0.5, dtype=x.dtype)
    scores -= scores.max(axis=-1, keepdims=True)
    weights = np.exp(scores)
    weights /= weights.sum(axis=-1, keepdims=True)
    if trace is not None:
        trace.record_attention(weights)
    merged = (weights @ v).transpose(0, 2, 1, 3).reshape(batch, tokens, dim)
    return merged @ t[f"{prefix}.proj.weight"].T + t[f"{prefix}.proj.bias"]


def _transformer_block(x: np.ndarray, t: Mapping[str, np.ndarray], prefix: str, heads: int,
                       trace: ForwardTrace | None) -> np.ndarray:
    h = _layer_norm(x, t[f"{prefix}.norm1.weight"], t[f"{prefix}.norm1.bias"], trace)
    x = x + _attention(h, t, f"{prefix}.attn", heads, trace)
    h = _layer_norm(x, t[f"{prefix}.norm2.weight"], t[f"{prefix}.norm2.bias"], trace)
    h = _gelu(h @ t[f"{prefix}.mlp.fc1.weight"].T + t[f"{prefix}.mlp.fc1.bias"])
    return x + (h @ t[f"{prefix}.mlp.fc2.weight"].T + t[f"{prefix}.mlp.fc2.bias"])


def forward_reconstruct(
    model: MaeModel,
    image: np.ndarray,
    mask: PatchMask,
    *,
    strict: bool = False,
    trace: ForwardTrace | None = None,
    visible_order: np.ndarray | None = None,
) -> np.ndarray:
    """Reconstruct masked patches; visible patches pass through untouched.

    ``image`` is a (224, 224, 3) float array, or a batch (B, 224, 224, 3).
    ``visible_order`` optionally feeds the visible patches to the encoder in
    a custom order (it must be a permutation of the mask's visible set);
    position encodings follow the patches, so the output is order-invariant
    up to floating-point reduction noise.

    The image is standardized with the manifest's pre-training channel
    statistics on the way in and de-standardized on the way out, so inputs
    and outputs live in the caller's pixel space.
    """
    man = model.manifest
    side = man.image_side
    img = np.asarray(image)
    batched = img.ndim == 4
    if not batched:
        img = img[None]
    if img.shape[1:] != (side, side, 3):
        raise ShapeError(f"expected (.., {side}, {side}, 3) image, got {np.asarray(image).shape}")
    if mask.side != man.grid_side:
        raise ShapeError(f"mask side {mask.side} does not match grid side {man.grid_side}")

    dtype = np.float64 if strict else np.float32
    original = np.ascontiguousarray(img, dtype=np.float32)
    tensors: Mapping[str, np.ndarray] = model.tensors
    if strict:
        tensors = {k: v.astype(np.float64) for k, v in model.tensors.items()}
    enc_pos = model.encoder_pos.astype(dtype)
    dec_pos = model.decoder_pos.astype(dtype)

    visible = mask.visible_indices
    if visible_order is not None:
        order = np.asarray(visible_order, dtype=np.intp)
        if not np.array_equal(np.sort(order), visible):
            raise ShapeError("visible_order must be a permutation of the mask's visible patches")
        visible = order

    mean = np.asarray(man.channel_mean, dtype=dtype)
    std = np.asarray(man.channel_std, dtype=dtype)
    # overflow is detected explicitly (NumericsError); silence numpy's
    # duplicate warnings for the whole pass
    with np.errstate(over="ignore", invalid="ignore"):
        return _forward(model, original, mask, visible, tensors, enc_pos, dec_pos,
                        mean, std, dtype, batched, trace)


def _forward(model, original, mask, visible, tensors, enc_pos, dec_pos,
             mean, std, dtype, batched, trace):
    man = model.manifest
    work = (original.astype(dtype) - mean) / std
    patches = patchify(work, man.patch_size)  # (B, N*N, pv)

    x = patches[:, visible] @ tensors["encoder.patch_embed.weight"].T
    x += tensors["encoder.patch_embed.bias"]
    x += enc_pos[visible + 1]
    cls = tensors["encoder.cls_token"] + enc_pos[0]
    tokens = np.concatenate([np.broadcast_to(cls, (x.shape[0], 1, x.shape[2])), x], axis=1)
    for i in range(man.encoder_depth):
        tokens = _transformer_block(tokens, tensors, f"encoder.blocks.{i}", man.encoder_heads, trace)
    tokens = _layer_norm(tokens, tensors["encoder.norm.weight"], tensors["encoder.norm.bias"], trace)
    if not np.isfinite(tokens).all():
        raise NumericsError("non-finite values after the encoder stack")

    dec = tokens @ tensors["decoder.embed.weight"].T + tensors["decoder.embed.bias"]
    total = man.grid_side * man.grid_side
    seq = np.empty((dec.shape[0], total + 1, man.decoder_dim), dtype=dtype)
    seq[:] = tensors["decoder.mask_token"]
    seq[:, 0] = dec[:, 0]
    seq[:, visible + 1] = dec[:, 1:]
    seq = seq + dec_pos
    for i in range(man.decoder_depth):
        seq = _transformer_block(seq, tensors, f"decoder.blocks.{i}", man.decoder_heads, trace)
    seq = _layer_norm(seq, tensors["decoder.norm.weight"], tensors["decoder.norm.bias"], trace)
    pred = seq[:, 1:] @ tensors["decoder.pred.weight"].T + tensors["decoder.pred.bias"]

    out = unpatchify(pred, man.patch_size)
    out = out * std + mean
    if not np.isfinite(out).all():
        raise NumericsError("non-finite values in reconstructed image")
    out = out.astype(np.float32)

    pixel_visible = np.kron(mask.grid, np.ones((man.patch_size, man.patch_size), dtype=bool))
    out[:, pixel_visible, :] = original[:, pixel_visible, :]
    return out if batched else out[0]
