"""Tensor archive: the on-disk weight format consumed by the inference model.

Layout (little-endian):

* bytes 0-7: unsigned 64-bit length of the JSON header
* JSON header (UTF-8): tensor name -> {"dtype": "F32", "shape": [...],
  "data_offsets": [begin, end)} plus a "__metadata__" object carrying the
  architecture manifest
* raw float32 payload; offsets are relative to the payload start

The manifest records the architecture hyperparameters, the pixel-targets
flag, the pre-training channel statistics, the parameter count, and a
SHA-256 checksum of the payload.  Loading validates all of them.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import LoadError

_METADATA_KEY = "__metadata__"

# ImageNet channel statistics used by the pre-training standardization.
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class ModelManifest:
    """Architecture hyperparameters and provenance stored inside the archive."""

    encoder_dim: int
    encoder_depth: int
    encoder_heads: int
    decoder_dim: int
    decoder_depth: int
    decoder_heads: int
    patch_size: int
    grid_side: int
    mlp_ratio: float
    pixel_targets: bool
    channel_mean: tuple[float, float, float]
    channel_std: tuple[float, float, float]
    param_count: int
    checksum: str = ""

    def __post_init__(self) -> None:
        for name in (
            "encoder_dim", "encoder_depth", "encoder_heads",
            "decoder_dim", "decoder_depth", "decoder_heads",
            "patch_size", "grid_side",
        ):
            if getattr(self, name) < 1:
                raise LoadError(f"manifest field {name} must be >= 1, got {getattr(self, name)}")
        if len(self.channel_mean) != 3 or len(self.channel_std) != 3:
            raise LoadError("channel statistics must have exactly 3 entries")
        object.__setattr__(self, "channel_mean", tuple(float(v) for v in self.channel_mean))
        object.__setattr__(self, "channel_std", tuple(float(v) for v in self.channel_std))

    @property
    def image_side(self) -> int:
        return self.patch_size * self.grid_side

    @property
    def patch_values(self) -> int:
        """Length of one flattened patch vector (pixels times 3 channels)."""
        return self.patch_size * self.patch_size * 3

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channel_mean"] = list(self.channel_mean)
        d["channel_std"] = list(self.channel_std)
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelManifest":
        try:
            return cls(
                encoder_dim=int(data["encoder_dim"]),
                encoder_depth=int(data["encoder_depth"]),
                encoder_heads=int(data["encoder_heads"]),
                decoder_dim=int(data["decoder_dim"]),
                decoder_depth=int(data["decoder_depth"]),
                decoder_heads=int(data["decoder_heads"]),
                patch_size=int(data["patch_size"]),
                grid_side=int(data["grid_side"]),
                mlp_ratio=float(data.get("mlp_ratio", 4.0)),
                pixel_targets=bool(data["pixel_targets"]),
                channel_mean=tuple(data.get("channel_mean", IMAGENET_MEAN)),
                channel_std=tuple(data.get("channel_std", IMAGENET_STD)),
                param_count=int(data["param_count"]),
                checksum=str(data.get("checksum", "")),
            )
        except KeyError as exc:
            raise LoadError(f"manifest is missing field {exc.args[0]!r}") from None


def write_archive(path: str | Path, tensors: Mapping[str, np.ndarray], manifest: ModelManifest) -> ModelManifest:
    """Serialize tensors plus manifest; returns the manifest with checksum filled in.

    Tensors are stored in sorted name order so identical inputs always yield
    byte-identical files.  All tensors are normalized to little-endian float32.
    """
    ordered = sorted(tensors.items())
    header: dict[str, object] = {}
    chunks: list[bytes] = []
    offset = 0
    total = 0
    for name, array in ordered:
        data = np.ascontiguousarray(array, dtype="<f4")
        raw = data.tobytes()
        header[name] = {
            "dtype": "F32",
            "shape": list(data.shape),
            "data_offsets": [offset, offset + len(raw)],
        }
        chunks.append(raw)
        offset += len(raw)
        total += data.size
    payload = b"".join(chunks)
    digest = "sha256:" + hashlib.sha256(payload).hexdigest()
    if manifest.param_count != total:
        raise LoadError(f"manifest declares {manifest.param_count} parameters, tensors hold {total}")
    manifest = ModelManifest(**{**manifest.to_dict(), "checksum": digest})
    header[_METADATA_KEY] = manifest.to_dict()
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)
    return manifest


def read_archive(path: str | Path) -> tuple[dict[str, np.ndarray], ModelManifest]:
    """Load every tensor and the manifest, verifying offsets and the checksum."""
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"archive not found: {path}")
    blob = path.read_bytes()
    if len(blob) < 8:
        raise LoadError(f"archive too short ({len(blob)} bytes): {path}")
    (header_len,) = struct.unpack("<Q", blob[:8])
    if 8 + header_len > len(blob):
        raise LoadError(f"declared header length {header_len} exceeds file size")
    try:
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LoadError(f"malformed archive header: {exc}") from None
    if _METADATA_KEY not in header:
        raise LoadError("archive header lacks __metadata__ manifest")
    manifest = ModelManifest.from_dict(header.pop(_METADATA_KEY))
    payload = blob[8 + header_len :]
    digest = "sha256:" + hashlib.sha256(payload).hexdigest()
    if manifest.checksum and manifest.checksum != digest:
        raise LoadError(f"payload checksum mismatch: manifest {manifest.checksum}, file {digest}")
    tensors: dict[str, np.ndarray] = {}
    for name, entry in header.items():
        if entry.get("dtype") != "F32":
            raise LoadError(f"tensor {name!r} has unsupported dtype {entry.get('dtype')!r}")
        begin, end = entry["data_offsets"]
        shape = tuple(int(s) for s in entry["shape"])
        expected = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
        if not (0 <= begin <= end <= len(payload)) or end - begin != expected:
            raise LoadError(f"tensor {name!r} has inconsistent offsets {entry['data_offsets']}")
        array = np.frombuffer(payload, dtype="<f4", count=(end - begin) // 4, offset=begin)
        array = array.reshape(shape).astype(np.float32, copy=True)
        array.setflags(write=False)
        tensors[name] = array
    return tensors, manifest
