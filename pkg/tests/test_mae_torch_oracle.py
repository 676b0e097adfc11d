"""Optional cross-backend oracle: the numpy forward pass vs a torch twin.

Skipped when torch is unavailable; torch is not a package dependency, it
just happens to make a convenient independent implementation of layer
norm, softmax attention, and erf-GELU for verifying the kernels.
"""

from __future__ import annotations

import numpy as np
import pytest

import visionts as v
from visionts.testing import random_model

torch = pytest.importorskip("torch")


def _torch_forward(model, img: np.ndarray, mask) -> np.ndarray:
    man = model.manifest
    weights = {k: torch.from_numpy(np.array(t)) for k, t in model.tensors.items()}
    enc_pos = torch.from_numpy(np.array(model.encoder_pos))
    dec_pos = torch.from_numpy(np.array(model.decoder_pos))

    def ln(x, p):
        return torch.nn.functional.layer_norm(
            x, (x.shape[-1],), weights[p + ".weight"], weights[p + ".bias"], eps=1e-6
        )

    def block(x, p, heads):
        h = ln(x, p + ".norm1")
        batch, tokens, dim = h.shape
        head_dim = dim // heads
        qkv = h @ weights[p + ".attn.qkv.weight"].T + weights[p + ".attn.qkv.bias"]
        qkv = qkv.reshape(batch, tokens, 3, heads, head_dim).permute(2, 0, 3, 1, 4)
        q, k, vv = qkv[0], qkv[1], qkv[2]
        attn = torch.softmax((q @ k.transpose(-2, -1)) * head_dim**-0.5, dim=-1)
        merged = (attn @ vv).transpose(1, 2).reshape(batch, tokens, dim)
        x = x + merged @ weights[p + ".attn.proj.weight"].T + weights[p + ".attn.proj.bias"]
        h = ln(x, p + ".norm2")
        h = torch.nn.functional.gelu(h @ weights[p + ".mlp.fc1.weight"].T + weights[p + ".mlp.fc1.bias"])
        return x + h @ weights[p + ".mlp.fc2.weight"].T + weights[p + ".mlp.fc2.bias"]

    with torch.no_grad():
        mean = torch.tensor(man.channel_mean)
        std = torch.tensor(man.channel_std)
        work = (torch.from_numpy(img) - mean) / std
        patches = torch.from_numpy(np.array(v.patchify(work.numpy(), man.patch_size)))
        vis = torch.from_numpy(mask.visible_indices)
        x = patches[vis] @ weights["encoder.patch_embed.weight"].T + weights["encoder.patch_embed.bias"]
        x = x + enc_pos[vis + 1]
        cls = (weights["encoder.cls_token"] + enc_pos[0]).reshape(1, 1, -1)
        tokens = torch.cat([cls, x.unsqueeze(0)], dim=1)
        for i in range(man.encoder_depth):
            tokens = block(tokens, f"encoder.blocks.{i}", man.encoder_heads)
        tokens = ln(tokens, "encoder.norm")
        dec = tokens @ weights["decoder.embed.weight"].T + weights["decoder.embed.bias"]
        total = man.grid_side**2
        seq = weights["decoder.mask_token"].repeat(1, total + 1, 1).clone()
        seq[0, 0] = dec[0, 0]
        seq[0, vis + 1] = dec[0, 1:]
        seq = seq + dec_pos
        for i in range(man.decoder_depth):
            seq = block(seq, f"decoder.blocks.{i}", man.decoder_heads)
        seq = ln(seq, "decoder.norm")
        pred = seq[:, 1:] @ weights["decoder.pred.weight"].T + weights["decoder.pred.bias"]
        out = torch.from_numpy(np.array(v.unpatchify(pred[0].numpy(), man.patch_size)))
        return (out * std + mean).numpy()


def test_forward_matches_torch_twin(rng):
    model = random_model(seed=7)
    img = rng.normal(0.4, 0.2, size=(224, 224, 3)).astype(np.float32)
    mask = v.PatchMask.left_visible(14, 5)
    mine = v.forward_reconstruct(model, img, mask)
    twin = _torch_forward(model, img, mask)
    masked = ~np.kron(mask.grid, np.ones((16, 16), dtype=bool))
    assert np.abs(twin[masked] - mine[masked]).max() <= 1e-5
