"""Zero-shot time-series forecasting by masked-image reconstruction.

A context window is segmented by period, standardized, rendered as a
grayscale image aligned to a fixed 224 x 224 patch grid, reconstructed by a
pre-trained visual masked autoencoder, and decoded back into a numeric
forecast.  The package also ships the standard long-horizon evaluation
protocol and seasonal baselines.
"""

from . import errors
from .archive import ModelManifest, read_archive, write_archive
from .eval import (
    BenchmarkConfig,
    EvalReport,
    EvalRow,
    mae,
    merge_reports,
    mse,
    normalized_mae,
    run_benchmark,
    seasonal_avg_forecast,
    seasonal_naive_forecast,
)
from .imaging import (
    GrayImage,
    ImagePlan,
    NormStats,
    align,
    denormalize,
    encode_window,
    forecast_window,
    normalize,
    plan_for,
    reconstruct_to_forecast,
    segment,
    to_pgm,
    visible_columns,
)
from .mae_infer import (
    ForwardTrace,
    MaeModel,
    PatchMask,
    forward_reconstruct,
    load_model,
    patchify,
    sincos_position_embeddings,
    unpatchify,
)
from .periodicity import Frequency, PeriodChoice, PeriodSource, candidate_periods, select_period
from .pipeline import Forecaster, MaeReconstructor, mae_forecaster
from .resample import ResizeSpec, bilinear_resize
from .series import (
    CsvSchema,
    SeriesFrame,
    SplitSpec,
    WindowPair,
    parse_csv,
    sliding_windows,
    split,
    window_count,
    write_csv,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
