"""Frequency-driven period candidates and validation-based selection.

A sampling frequency maps to a short, preference-ordered list of plausible
seasonal period lengths (e.g. hourly data repeats daily or weekly).  The
final period is either forced by the caller or chosen by evaluating each
candidate on a validation set and keeping the argmin.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import ConfigError, SelectionError

UNITS = ("S", "T", "H", "D", "W", "M", "B", "Q", "OTHER")

# Candidate seasonalities per sampling-frequency unit, in preference order
# (expressed in sampling steps for a multiplier of 1).
_SEASONALITIES: dict[str, tuple[int, ...]] = {
    "S": (3600,),              # one hour of seconds
    "T": (1440, 10080),        # one day / one week of minutes
    "H": (24, 168),            # one day / one week of hours
    "D": (7, 30, 365),         # week / month / year of days
    "W": (52, 4),              # year / month of weeks
    "M": (12, 6, 3),           # year / half-year / quarter of months
    "B": (5,),                 # one week of business days
    "Q": (4, 2),               # year / half-year of quarters
    "OTHER": (),
}

_FREQ_RE = re.compile(r"^(\d*)([A-Za-z]+)$")


@dataclass(frozen=True)
class Frequency:
    """Sampling-frequency tag: unit plus integer multiplier (e.g. 15-minute = 15T)."""

    unit: str
    multiplier: int = 1

    def __post_init__(self) -> None:
        if self.unit not in UNITS:
            raise ConfigError(f"unknown frequency unit {self.unit!r}; expected one of {UNITS}")
        if self.multiplier < 1:
            raise ConfigError(f"frequency multiplier must be >= 1, got {self.multiplier}")
        if self.unit == "OTHER" and self.multiplier != 1:
            raise ConfigError("frequency OTHER carries multiplier 1")

    @classmethod
    def parse(cls, text: str) -> "Frequency":
        """Parse strings like ``"H"``, ``"15T"``, ``"2Q"``, ``"OTHER"``."""
        m = _FREQ_RE.match(text.strip())
        if not m:
            raise ConfigError(f"cannot parse frequency {text!r}")
        count, unit = m.groups()
        return cls(unit.upper(), int(count) if count else 1)

    def __str__(self) -> str:
        return self.unit if self.multiplier == 1 else f"{self.multiplier}{self.unit}"

    @property
    def step_seconds(self) -> int | None:
        """Seconds per sample for fixed-duration units; None for calendar units."""
        per_unit = {"S": 1, "T": 60, "H": 3600, "D": 86400, "W": 604800}
        base = per_unit.get(self.unit)
        return None if base is None else base * self.multiplier


class PeriodSource(enum.Enum):
    FREQUENCY_TABLE = "frequency_table"
    VALIDATION_SELECTED = "validation_selected"
    FORCED = "forced"


@dataclass(frozen=True)
class PeriodChoice:
    """A chosen period length and how it was decided."""

    period: int
    source: PeriodSource

    def __post_init__(self) -> None:
        if self.period < 1:
            raise ConfigError(f"period must be >= 1, got {self.period}")


def candidate_periods(freq: Frequency) -> list[int]:
    """Preference-ordered period candidates for a sampling frequency.

    Each tabulated seasonality is divided by the multiplier and floored,
    clamping to >= 1; candidates that collapse onto an earlier entry are
    dropped, and 1 is always present as the aperiodic fallback.
    """
    periods: list[int] = []
    for season in _SEASONALITIES[freq.unit]:
        p = max(1, season // freq.multiplier)
        if p not in periods:
            periods.append(p)
    if 1 not in periods:
        periods.append(1)
    return periods


def select_period(
    candidates: Sequence[int],
    evaluate: Callable[[int], float],
) -> PeriodChoice:
    """Pick the candidate with minimal validation loss.

    ``evaluate`` maps a period to a loss; candidates whose evaluation raises
    are skipped.  Ties keep the earlier (preferred) candidate.  If every
    candidate fails, raises :class:`SelectionError`.
    """
    if not candidates:
        raise SelectionError("no period candidates supplied")
    best: tuple[float, int] | None = None
    failures: list[str] = []
    for p in candidates:
        try:
            loss = float(evaluate(p))
        except Exception as exc:  # noqa: BLE001 - candidate failure is data, not control flow
            failures.append(f"P={p}: {exc}")
            continue
        if best is None or loss < best[0]:
            best = (loss, p)
    if best is None:
        raise SelectionError("every period candidate failed: " + "; ".join(failures))
    return PeriodChoice(best[1], PeriodSource.VALIDATION_SELECTED)
