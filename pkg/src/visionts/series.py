"""Time-series data model, CSV ingestion, splits, and sliding windows.

The ingestion contract is intentionally narrow: UTF-8 CSV, comma separated,
one header row, an optional leading ``date`` column, decimal points, and no
thousands separators.  Values are stored as float64 and validated finite at
the boundary; the imaging pipeline narrows to float32 later.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import IngestionError, SplitError, WindowError
from .periodicity import Frequency


@dataclass(frozen=True)
class SeriesFrame:
    """Immutable multivariate series: T rows by M variable columns.

    ``start`` is the row's global offset in the originating frame; splits set
    it so downstream code can reach back across split boundaries for context.
    """

    values: np.ndarray
    frequency: Frequency = field(default_factory=lambda: Frequency("OTHER"))
    variable_names: tuple[str, ...] = ()
    timestamps: tuple[datetime, ...] | None = None
    start: int = 0

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise IngestionError(f"values must be a T x M matrix with T,M >= 1, got shape {values.shape}")
        if not np.isfinite(values).all():
            t, m = map(int, np.argwhere(~np.isfinite(values))[0])
            raise IngestionError("non-finite value", row=t + 1, col=m + 1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        names = tuple(self.variable_names) or tuple(f"var{i}" for i in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise IngestionError(f"{len(names)} variable names for {values.shape[1]} columns")
        object.__setattr__(self, "variable_names", names)
        if self.timestamps is not None:
            stamps = tuple(self.timestamps)
            if len(stamps) != values.shape[0]:
                raise IngestionError(f"{len(stamps)} timestamps for {values.shape[0]} rows")
            _check_timestamps(stamps, self.frequency)
            object.__setattr__(self, "timestamps", stamps)

    @property
    def num_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_variables(self) -> int:
        return int(self.values.shape[1])

    def rows(self, begin: int, end: int, *, keep_offset: bool = True) -> "SeriesFrame":
        """Sub-frame over rows [begin, end), recording the global offset."""
        if not 0 <= begin < end <= self.num_rows:
            raise SplitError(f"row range [{begin}, {end}) outside [0, {self.num_rows}]")
        stamps = self.timestamps[begin:end] if self.timestamps is not None else None
        return SeriesFrame(
            self.values[begin:end],
            frequency=self.frequency,
            variable_names=self.variable_names,
            timestamps=stamps,
            start=self.start + begin if keep_offset else 0,
        )


def _check_timestamps(stamps: tuple[datetime, ...], freq: Frequency) -> None:
    for i in range(1, len(stamps)):
        if stamps[i] <= stamps[i - 1]:
            raise IngestionError("timestamps not strictly increasing", row=i + 1, col=1)
    step = freq.step_seconds
    if step is not None and len(stamps) > 1:
        for i in range(1, len(stamps)):
            delta = (stamps[i] - stamps[i - 1]).total_seconds()
            if delta != step:
                raise IngestionError(
                    f"timestamp spacing {delta:.0f}s does not match frequency {freq} ({step}s)",
                    row=i + 1,
                    col=1,
                )


class WindowPair(NamedTuple):
    """One forecasting instance: L context values immediately before H targets."""

    context: np.ndarray
    target: np.ndarray
    variable_index: int
    origin: int  # global time index of the first target element


@dataclass(frozen=True)
class CsvSchema:
    """Ingestion options.

    ``timestamp_first_column=None`` auto-detects a leading column whose
    header is ``date`` (case-insensitive).
    """

    frequency: Frequency = field(default_factory=lambda: Frequency("OTHER"))
    timestamp_first_column: bool | None = None


def _parse_timestamp(text: str, row: int) -> datetime:
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError as exc:
        raise IngestionError(f"unparseable timestamp {text!r}: {exc}", row=row, col=1) from None


def parse_csv(path: str | Path, schema: CsvSchema | None = None) -> SeriesFrame:
    """Read a wide-layout CSV into a :class:`SeriesFrame`.

    Raises :class:`IngestionError` with 1-based coordinates for the first
    non-numeric or non-finite cell, for ragged rows, and for empty files.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"empty file: {path}") from None
        if not header:
            raise IngestionError(f"empty header row: {path}")
        has_stamp = schema.timestamp_first_column
        if has_stamp is None:
            has_stamp = header[0].strip().lower() == "date"
        names = tuple(h.strip() for h in (header[1:] if has_stamp else header))
        if not names:
            raise IngestionError("no value columns after the timestamp column")

        width = len(header)
        stamps: list[datetime] = []
        rows: list[list[float]] = []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue  # trailing blank line
            if len(record) != width:
                raise IngestionError(
                    f"ragged row: expected {width} cells, got {len(record)}", row=line_no
                )
            cells = record
            if has_stamp:
                stamps.append(_parse_timestamp(cells[0], line_no))
                cells = cells[1:]
            parsed = []
            for j, cell in enumerate(cells):
                try:
                    value = float(cell)
                except ValueError:
                    raise IngestionError(
                        f"non-numeric cell {cell!r}", row=line_no, col=j + (2 if has_stamp else 1)
                    ) from None
                if not math.isfinite(value):
                    raise IngestionError(
                        f"non-finite cell {cell!r}", row=line_no, col=j + (2 if has_stamp else 1)
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise IngestionError(f"no data rows in {path}")
    return SeriesFrame(
        np.asarray(rows, dtype=np.float64),
        frequency=schema.frequency,
        variable_names=names,
        timestamps=tuple(stamps) if has_stamp else None,
    )


def write_csv(frame: SeriesFrame, path: str | Path) -> None:
    """Write a frame back to CSV with full-precision (round-trippable) floats."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if frame.timestamps is not None:
            writer.writerow(("date",) + frame.variable_names)
            for stamp, row in zip(frame.timestamps, frame.values):
                writer.writerow([stamp.isoformat(sep=" ")] + [repr(float(v)) for v in row])
        else:
            writer.writerow(frame.variable_names)
            for row in frame.values:
                writer.writerow([repr(float(v)) for v in row])


class SplitFrames(NamedTuple):
    train: SeriesFrame
    val: SeriesFrame
    test: SeriesFrame


@dataclass(frozen=True)
class SplitSpec:
    """Either fractional ratios spanning the frame or absolute end indices.

    Absolute boundaries (t1, t2, t3) cut [0,t1), [t1,t2), [t2,t3); rows past
    t3 are simply unused, which matches benchmark conventions that evaluate
    on a fixed prefix of the file.
    """

    ratios: tuple[float, float, float] | None = None
    boundaries: tuple[int, int, int] | None = None

    def __post_init__(self) -> None:
        if (self.ratios is None) == (self.boundaries is None):
            raise SplitError("specify exactly one of ratios or boundaries")
        if self.ratios is not None:
            if any(r < 0 for r in self.ratios) or abs(sum(self.ratios) - 1.0) > 1e-9:
                raise SplitError(f"ratios must be non-negative and sum to 1, got {self.ratios}")

    @classmethod
    def from_ratios(cls, train: float, val: float, test: float) -> "SplitSpec":
        return cls(ratios=(train, val, test))

    @classmethod
    def from_boundaries(cls, t1: int, t2: int, t3: int) -> "SplitSpec":
        return cls(boundaries=(t1, t2, t3))

    def resolve(self, num_rows: int) -> tuple[int, int, int]:
        """Concrete (t1, t2, t3) end indices for a frame of ``num_rows``."""
        if self.ratios is not None:
            t1 = int(num_rows * self.ratios[0])
            t2 = t1 + int(num_rows * self.ratios[1])
            t3 = num_rows
        else:
            t1, t2, t3 = self.boundaries  # type: ignore[misc]
        if not 0 < t1 <= t2 <= t3 <= num_rows:
            raise SplitError(f"boundaries {(t1, t2, t3)} out of range for {num_rows} rows")
        return t1, t2, t3


def split(frame: SeriesFrame, spec: SplitSpec) -> SplitFrames:
    """Cut a frame into contiguous train/val/test parts.

    Each part records its global row offset so test windows may later borrow
    context from earlier rows.  Empty middle parts are represented as
    1-row-minimum frames only when non-empty; a zero-length val/test raises.
    """
    t1, t2, t3 = spec.resolve(frame.num_rows)
    if t1 == 0 or t2 == t1 or t3 == t2:
        raise SplitError(f"split {(t1, t2, t3)} produces an empty part")
    return SplitFrames(frame.rows(0, t1), frame.rows(t1, t2), frame.rows(t2, t3))


def window_count(num_rows: int, context: int, horizon: int, stride: int = 1) -> int:
    """Closed-form number of windows per variable."""
    if num_rows < context + horizon:
        return 0
    return (num_rows - context - horizon) // stride + 1


def sliding_windows(
    frame: SeriesFrame, context: int, horizon: int, stride: int = 1
) -> Iterator[WindowPair]:
    """Yield every context/target pair, one variable at a time.

    Windows advance by ``stride`` and are emitted oldest first; the target
    must lie fully inside the frame.  Raises :class:`WindowError` when the
    frame is shorter than one window.
    """
    if context < 1 or horizon < 1 or stride < 1:
        raise WindowError(f"context, horizon, stride must be >= 1, got {(context, horizon, stride)}")
    total = frame.num_rows
    if total < context + horizon:
        raise WindowError(f"need at least {context + horizon} rows, frame has {total}")
    count = window_count(total, context, horizon, stride)
    values = frame.values
    for var in range(frame.num_variables):
        column = values[:, var]
        for k in range(count):
            begin = k * stride
            yield WindowPair(
                context=column[begin : begin + context],
                target=column[begin + context : begin + context + horizon],
                variable_index=var,
                origin=frame.start + begin + context,
            )
