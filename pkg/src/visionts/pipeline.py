"""Window-level forecasting: codec in front, a reconstructor in the middle.

A reconstructor is any callable ``(canvas, mask) -> full_image`` where
``canvas`` is the 224 x 224 single-channel float32 input (visible content on
the left, zeros elsewhere) and the result is a full 224 x 224 image, single-
or three-channel.  :class:`MaeReconstructor` backs this with the loaded
masked autoencoder; tests substitute cheap stand-ins.
"""

from __future__ import annotations

import numpy as np

from . import imaging
from .errors import ShapeError
from .mae_infer import MaeModel, PatchMask, forward_reconstruct


class MaeReconstructor:
    """Adapts the three-channel model to the single-channel codec boundary.

    Replicates the grayscale canvas across three channels on the way in and
    averages the channels on the way out, per the rendering convention.
    """

    def __init__(self, model: MaeModel, *, strict: bool = False):
        self.model = model
        self.strict = strict

    def __call__(self, canvas: np.ndarray, mask: PatchMask) -> np.ndarray:
        canvas = np.asarray(canvas, dtype=np.float32)
        three = np.repeat(canvas[..., None], 3, axis=-1)
        out = forward_reconstruct(self.model, three, mask, strict=self.strict)
        # float64 mean keeps identical channels (the visible region) bit-exact.
        return out.astype(np.float64).mean(axis=-1).astype(np.float32)


class Forecaster:
    """Callable (context, horizon) -> forecast built from a reconstructor.

    The image plan is derived per call from the context length, the horizon,
    and the configured period/constants, so one instance serves any geometry.
    """

    name = "model"

    def __init__(
        self,
        reconstructor,
        period: int,
        *,
        target_std: float = 0.4,
        visible_scale: float = 0.4,
        grid_side: int = 14,
        patch_size: int = 16,
        name: str | None = None,
    ):
        self.reconstructor = reconstructor
        self.period = period
        self.target_std = target_std
        self.visible_scale = visible_scale
        self.grid_side = grid_side
        self.patch_size = patch_size
        if name is not None:
            self.name = name

    def plan(self, context_length: int, horizon: int) -> imaging.ImagePlan:
        return imaging.plan_for(
            context_length,
            horizon,
            self.period,
            target_std=self.target_std,
            visible_scale=self.visible_scale,
            grid_side=self.grid_side,
            patch_size=self.patch_size,
        )

    def __call__(self, context: np.ndarray, horizon: int) -> np.ndarray:
        context = np.asarray(context, dtype=np.float64).ravel()
        plan = self.plan(context.size, horizon)
        return imaging.forecast_window(context, plan, self.reconstructor)

    def forecast_batch(self, contexts: np.ndarray, horizon: int) -> np.ndarray:
        """Vectorized forecasting over a (B, L) batch sharing one geometry."""
        contexts = np.asarray(contexts, dtype=np.float64)
        if contexts.ndim != 2:
            raise ShapeError(f"expected (B, L) contexts, got shape {contexts.shape}")
        plan = self.plan(contexts.shape[1], horizon)
        canvases, mask, means, stds = imaging._batch_encode(contexts, plan)
        images = self.reconstructor(canvases, mask)
        return imaging._batch_decode(np.asarray(images), plan, means, stds)


def mae_forecaster(
    model: MaeModel,
    period: int,
    *,
    target_std: float = 0.4,
    visible_scale: float = 0.4,
    strict: bool = False,
) -> Forecaster:
    """The production forecaster: codec plus masked-autoencoder reconstruction."""
    return Forecaster(
        MaeReconstructor(model, strict=strict),
        period,
        target_std=target_std,
        visible_scale=visible_scale,
        grid_side=model.manifest.grid_side,
        patch_size=model.manifest.patch_size,
        name="visionts",
    )
