"""Metrics, classical baselines, and the zero-shot evaluation protocol.

The benchmark walks stride-1 sliding windows over the test region of a
z-scored frame (statistics fitted on the train rows only), forecasting every
variable independently, and reports per-horizon MSE/MAE for the model and
for the requested seasonal baselines.  Context windows may reach back across
the split boundary, matching long-horizon benchmark convention.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import AggregationError, BaselineError, MetricError, VisionTSError, WindowError
from .series import SeriesFrame, SplitSpec, window_count


def mse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean squared error, averaged per element."""
    p, t = _paired(pred, truth)
    return float(np.mean((p - t) ** 2))


def mae(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean absolute error, averaged per element."""
    p, t = _paired(pred, truth)
    return float(np.mean(np.abs(p - t)))


def _paired(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.size != t.size:
        raise MetricError(f"length mismatch: prediction {p.size}, truth {t.size}")
    if p.size == 0:
        raise MetricError("metrics need at least one element")
    return p, t


def seasonal_naive_forecast(context: np.ndarray, period: int, horizon: int) -> np.ndarray:
    """Repeat the last observed period across the horizon."""
    x = np.asarray(context, dtype=np.float64).ravel()
    if period < 1 or x.size < period:
        raise BaselineError(f"context of {x.size} values cannot supply a period of {period}")
    last = x[x.size - period :]
    return last[np.arange(horizon) % period]


def seasonal_avg_forecast(context: np.ndarray, period: int, horizon: int) -> np.ndarray:
    """Repeat the phase-wise mean of all full periods in the context.

    Mirrors the codec's segmentation: only the most recent ``L // P`` full
    periods contribute, the oldest remainder is discarded.
    """
    x = np.asarray(context, dtype=np.float64).ravel()
    if period < 1 or x.size < period:
        raise BaselineError(f"context of {x.size} values cannot supply a period of {period}")
    m = x.size // period
    phases = x[x.size - m * period :].reshape(m, period).mean(axis=0)
    return phases[np.arange(horizon) % period]


def normalized_mae(
    per_dataset_mae: Mapping[str, float], per_dataset_naive_mae: Mapping[str, float]
) -> float:
    """Geometric mean over datasets of MAE divided by the naive forecast's MAE."""
    if set(per_dataset_mae) != set(per_dataset_naive_mae):
        raise AggregationError(
            f"key sets differ: {sorted(per_dataset_mae)} vs {sorted(per_dataset_naive_mae)}"
        )
    if not per_dataset_mae:
        raise AggregationError("no datasets to aggregate")
    log_sum = 0.0
    for key, value in per_dataset_mae.items():
        naive = per_dataset_naive_mae[key]
        if naive <= 0:
            raise AggregationError(f"naive MAE for {key!r} must be > 0, got {naive}")
        log_sum += math.log(value / naive)
    return math.exp(log_sum / len(per_dataset_mae))


class SeasonalBaseline:
    """Wraps a seasonal baseline as a forecaster with batch support."""

    def __init__(self, kind: str, period: int, name: str | None = None):
        if kind not in ("seasonal_naive", "seasonal_avg"):
            raise BaselineError(f"unknown baseline {kind!r}")
        self._fn = seasonal_naive_forecast if kind == "seasonal_naive" else seasonal_avg_forecast
        self.period = period
        self.name = name or kind

    def __call__(self, context: np.ndarray, horizon: int) -> np.ndarray:
        return self._fn(context, self.period, horizon)

    def forecast_batch(self, contexts: np.ndarray, horizon: int) -> np.ndarray:
        return np.stack([self._fn(row, self.period, horizon) for row in np.asarray(contexts)])


@dataclass(frozen=True)
class BenchmarkConfig:
    """Per-dataset evaluation plan."""

    dataset: str
    context_length: int
    horizons: tuple[int, ...]
    period: int
    split: SplitSpec
    target_std: float = 0.4
    visible_scale: float = 0.4

    def __post_init__(self) -> None:
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        if self.context_length < 1 or not self.horizons or min(self.horizons) < 1:
            raise VisionTSError("context length and horizons must be >= 1")
        if self.period < 1:
            raise VisionTSError(f"period must be >= 1, got {self.period}")


@dataclass(frozen=True)
class EvalRow:
    dataset: str
    horizon: int
    method: str
    mse: float
    mae: float
    window_count: int


@dataclass(frozen=True)
class EvalReport:
    """Per-(dataset, horizon, method) metrics plus aggregates and a config echo."""

    rows: tuple[EvalRow, ...]
    aggregates: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def row(self, horizon: int, method: str, dataset: str | None = None) -> EvalRow:
        for r in self.rows:
            if r.horizon == horizon and r.method == method and (dataset is None or r.dataset == dataset):
                return r
        raise KeyError((dataset, horizon, method))

    def to_json(self) -> str:
        doc = {
            "rows": [
                {
                    "dataset": r.dataset,
                    "horizon": r.horizon,
                    "method": r.method,
                    "mse": r.mse,
                    "mae": r.mae,
                    "window_count": r.window_count,
                }
                for r in self.rows
            ],
            "aggregates": self.aggregates,
            "config": self.metadata,
        }
        return json.dumps(doc, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        doc = json.loads(text)
        rows = tuple(EvalRow(**row) for row in doc.get("rows", []))
        return cls(rows=rows, aggregates=doc.get("aggregates", {}), metadata=doc.get("config", {}))


def _threads() -> int:
    raw = os.environ.get("VISIONTS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# Windows evaluated per model invocation; bounds activation memory while
# keeping the matmuls large enough to be efficient.
_BATCH_WINDOWS = 64


def _forecast_variable(
    forecaster, column: np.ndarray, starts: np.ndarray, length: int, horizon: int, variable: int
) -> tuple[np.ndarray, np.ndarray]:
    """All forecasts and targets for one variable; windows stacked row-wise."""
    contexts = np.stack([column[s : s + length] for s in starts])
    targets = np.stack([column[s + length : s + length + horizon] for s in starts])
    try:
        batch = getattr(forecaster, "forecast_batch", None)
        if batch is not None:
            chunks = [
                np.asarray(batch(contexts[i : i + _BATCH_WINDOWS], horizon), dtype=np.float64)
                for i in range(0, len(contexts), _BATCH_WINDOWS)
            ]
            preds = np.concatenate(chunks)
        else:
            preds = np.stack(
                [np.asarray(forecaster(c, horizon), dtype=np.float64) for c in contexts]
            )
    except VisionTSError as exc:
        raise type(exc)(f"variable {variable}, window origins {starts[0]}..{starts[-1]}: {exc}") from exc
    if preds.shape != targets.shape:
        raise MetricError(
            f"forecaster returned shape {preds.shape}, expected {targets.shape} "
            f"(variable {variable})"
        )
    return preds, targets


def run_benchmark(
    frame: SeriesFrame,
    config: BenchmarkConfig,
    forecaster: Callable[[np.ndarray, int], np.ndarray],
    baselines: Iterable[str] = ("seasonal_naive", "seasonal_avg"),
) -> EvalReport:
    """Evaluate a forecaster and baselines over the test region of ``frame``.

    Metrics are computed on the per-variable z-scored scale fitted on the
    train rows; the statistics and geometry are echoed in the report so runs
    are reproducible from the report alone.
    """
    t1, t2, t3 = config.split.resolve(frame.num_rows)
    values = frame.values[:t3]
    train = values[:t1]
    train_mean = train.mean(axis=0)
    train_std = train.std(axis=0)
    train_std = np.where(train_std == 0.0, 1.0, train_std)
    scaled = (values - train_mean) / train_std

    length = config.context_length
    if t2 - length < 0:
        raise WindowError(
            f"test start {t2} leaves no room for a context of {length} rows"
        )
    methods: list = [forecaster]
    for kind in baselines:
        methods.append(SeasonalBaseline(kind, config.period))
    names = [getattr(m, "name", f"method{k}") for k, m in enumerate(methods)]
    if len(set(names)) != len(names):
        raise VisionTSError(f"duplicate method names in benchmark: {names}")

    rows: list[EvalRow] = []
    workers = _threads()
    for horizon in config.horizons:
        starts = np.arange(t2 - length, t3 - length - horizon + 1)
        if starts.size == 0:
            raise WindowError(f"test region too short for horizon {horizon}")
        expected = window_count(t3 - (t2 - length), length, horizon)
        assert starts.size == expected
        for method, name in zip(methods, names):
            def job(var: int):
                return _forecast_variable(method, scaled[:, var], starts, length, horizon, var)

            if workers > 1 and frame.num_variables > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(job, range(frame.num_variables)))
            else:
                results = [job(v) for v in range(frame.num_variables)]
            sq_sum = 0.0
            abs_sum = 0.0
            elements = 0
            for preds, targets in results:
                diff = preds - targets
                sq_sum += float(np.sum(diff * diff))
                abs_sum += float(np.sum(np.abs(diff)))
                elements += diff.size
            rows.append(
                EvalRow(
                    dataset=config.dataset,
                    horizon=horizon,
                    method=name,
                    mse=sq_sum / elements,
                    mae=abs_sum / elements,
                    window_count=int(starts.size) * frame.num_variables,
                )
            )

    aggregates = _aggregate(rows, names)
    metadata = {
        "dataset": config.dataset,
        "context_length": config.context_length,
        "horizons": list(config.horizons),
        "period": config.period,
        "r": config.target_std,
        "c": config.visible_scale,
        "split": [t1, t2, t3],
        "stride": 1,
        "resize_convention": "bilinear-half-pixel-clamped-no-antialias",
        "pixel_targets": _pixel_targets_flag(forecaster),
        "train_mean": [float(v) for v in train_mean],
        "train_std": [float(v) for v in train_std],
    }
    return EvalReport(rows=tuple(rows), aggregates=aggregates, metadata=metadata)


def _pixel_targets_flag(forecaster) -> bool | None:
    reconstructor = getattr(forecaster, "reconstructor", None)
    model = getattr(reconstructor, "model", None)
    manifest = getattr(model, "manifest", None)
    return None if manifest is None else bool(manifest.pixel_targets)


def _aggregate(rows: Sequence[EvalRow], names: Sequence[str]) -> dict:
    by_method: dict[str, list[EvalRow]] = {name: [] for name in names}
    for row in rows:
        by_method[row.method].append(row)
    averages = {
        name: {
            "mse": float(np.mean([r.mse for r in rs])),
            "mae": float(np.mean([r.mae for r in rs])),
        }
        for name, rs in by_method.items()
    }
    aggregates: dict = {"avg_over_horizons": averages}
    if "seasonal_naive" in by_method:
        naive = averages["seasonal_naive"]["mae"]
        if naive > 0:
            aggregates["normalized_mae"] = {
                name: averages[name]["mae"] / naive for name in by_method
            }
    return aggregates


def merge_reports(reports: Sequence[EvalReport], *, naive_method: str = "seasonal_naive") -> dict:
    """Cross-dataset aggregation: normalized MAE per method, geometric mean.

    Each report must contain the naive method; datasets are the reports'
    configured names.
    """
    if not reports:
        raise AggregationError("no reports to merge")
    methods: set[str] = set()
    for report in reports:
        methods.update(row.method for row in report.rows)
    out: dict[str, float] = {}
    for method in sorted(methods):
        per_dataset: dict[str, float] = {}
        per_naive: dict[str, float] = {}
        for report in reports:
            dataset = report.metadata.get("dataset", "?")
            per_dataset[dataset] = report.aggregates["avg_over_horizons"][method]["mae"]
            per_naive[dataset] = report.aggregates["avg_over_horizons"][naive_method]["mae"]
        out[method] = normalized_mae(per_dataset, per_naive)
    return out
