"""Raw-series ingestion, gap filling, the difference-standardize transform
and its inverse, and extreme labeling.

All operations are pure: they return new immutable value objects and never
mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import kvtext
from .errors import (
    BoundaryGapError,
    DegenerateSeriesError,
    InvalidInputError,
    UnfillableGapError,
)

HOUR = 3600
DEFAULT_MAX_GAP = 14 * 24  # 14 days of hourly points


@dataclass(frozen=True)
class RawSeries:
    """Hourly sensor series; missing values are NaN.

    Timestamps are epoch seconds, strictly increasing with a constant
    one-hour step.
    """

    sensor_id: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if ts.shape != vals.shape or ts.ndim != 1:
            raise InvalidInputError("timestamps and values must be equal-length 1-D arrays")
        if len(ts) >= 2 and not np.all(np.diff(ts) == HOUR):
            raise InvalidInputError("timestamps must advance in constant 1-hour steps")
        if np.any(np.isinf(vals)):
            raise InvalidInputError("observed values must be finite")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class StandardizedSeries:
    """Standardized first differences plus the parameters to invert them.

    ``anchor`` is the last raw ground-truth value, used to undo the
    differencing when reconstructing raw-scale forecasts.
    """

    values: np.ndarray
    location: float
    scale: float
    anchor: float
    source_id: str = ""

    def __post_init__(self):
        if self.scale <= 0:
            raise DegenerateSeriesError("scale must be positive")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ExtremeLabels:
    epsilon: float
    labels: np.ndarray = field(repr=False)

    @property
    def extreme_fraction(self) -> float:
        return float(np.mean(self.labels)) if len(self.labels) else 0.0


def _gap_runs(missing: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of missing values as half-open [start, stop) spans."""
    runs = []
    idx = np.flatnonzero(missing)
    if len(idx) == 0:
        return runs
    start = idx[0]
    prev = idx[0]
    for i in idx[1:]:
        if i != prev + 1:
            runs.append((start, prev + 1))
            start = i
        prev = i
    runs.append((start, prev + 1))
    return runs


def fill_gaps(series: RawSeries, max_degree: int = 3,
              max_gap: int = DEFAULT_MAX_GAP) -> RawSeries:
    """Fill missing runs by adaptive polynomial interpolation.

    For a gap of length L, the k = ceil(L/2) nearest observed points on each
    side anchor a least-squares polynomial whose degree (1..max_degree) is
    chosen to minimize the residual on those anchors, ties going to the
    lower degree. Observed points are never modified.
    """
    if max_degree < 1:
        raise InvalidInputError("max_degree must be >= 1")
    missing = series.missing
    if not missing.any():
        return series
    values = series.values.copy()
    observed = np.flatnonzero(~missing)
    for start, stop in _gap_runs(missing):
        length = stop - start
        if length > max_gap:
            raise UnfillableGapError(
                f"gap of {length} points at index {start} exceeds maximum {max_gap}")
        k = (length + 1) // 2
        left = observed[observed < start][-k:]
        right = observed[observed >= stop][:k]
        if len(left) < k or len(right) < k:
            raise BoundaryGapError(
                f"gap at index {start} lacks {k} anchor points on each side")
        anchors = np.concatenate([left, right])
        t0 = 0.5 * (start + stop - 1)  # center for conditioning
        ta = anchors - t0
        ya = values[anchors]
        best = None
        for degree in range(1, max_degree + 1):
            if degree >= len(anchors):
                break  # underdetermined; lower degrees already interpolate
            coeffs = np.polyfit(ta, ya, degree)
            resid = float(np.sum((np.polyval(coeffs, ta) - ya) ** 2))
            if best is None or resid < best[0]:
                best = (resid, coeffs)
        tg = np.arange(start, stop) - t0
        values[start:stop] = np.polyval(best[1], tg)
    return RawSeries(series.sensor_id, series.timestamps, values)


def difference_standardize(series: RawSeries,
                           fit_length: int | None = None) -> StandardizedSeries:
    """First-order difference then standardize.

    ``fit_length``, when given, restricts the location/scale fit to the first
    ``fit_length`` raw points (the training portion) while still transforming
    the whole series with those frozen parameters. The scale is the
    population standard deviation so the transform inverts exactly.
    """
    if series.missing.any():
        raise InvalidInputError("series must be gap-filled before standardizing")
    if len(series) < 2:
        raise InvalidInputError("need at least 2 points to difference")
    diffs = np.diff(series.values)
    fit = diffs if fit_length is None else diffs[:max(fit_length - 1, 1)]
    location = float(np.mean(fit))
    scale = float(np.std(fit))
    if scale == 0.0:
        raise DegenerateSeriesError("all first differences identical; cannot standardize")
    return StandardizedSeries(
        values=(diffs - location) / scale,
        location=location,
        scale=scale,
        anchor=float(series.values[-1]),
        source_id=series.sensor_id,
    )


def invert_transform(preds, ref: StandardizedSeries,
                     anchor_override: float | None = None) -> np.ndarray:
    """Map standardized-difference predictions back to the raw scale.

    y_j = anchor + sum_{i<=j} (preds[i] * scale + location); the anchor is
    the last ground-truth raw value before the forecast window.
    """
    preds = np.asarray(preds, dtype=np.float64)
    if not np.all(np.isfinite(preds)):
        raise InvalidInputError("predictions must be finite")
    anchor = ref.anchor if anchor_override is None else float(anchor_override)
    return anchor + np.cumsum(preds * ref.scale + ref.location)


def label_extremes(series: StandardizedSeries, epsilon: float) -> ExtremeLabels:
    """Label points outside the closed interval [-epsilon, epsilon] extreme."""
    if not (epsilon > 0):
        raise InvalidInputError("epsilon must be positive")
    return ExtremeLabels(epsilon=float(epsilon),
                         labels=np.abs(series.values) > epsilon)


# ---------------------------------------------------------------------------
# CSV / metadata interfaces


def _parse_timestamp(text: str) -> int:
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _format_timestamp(epoch: int) -> str:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def read_series_csv(path: str | Path, sensor_id: str | None = None) -> RawSeries:
    """Read a `timestamp,value` CSV; empty value fields are gaps.

    Timestamps must be continuous hourly ISO-8601 instants: a missing row is
    an error, a missing value is a gap.
    """
    path = Path(path)
    timestamps: list[int] = []
    values: list[float] = []
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["timestamp", "value"]:
            raise InvalidInputError(f"{path}: expected header 'timestamp,value'")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            ts_text, _, val_text = line.partition(",")
            timestamps.append(_parse_timestamp(ts_text))
            values.append(float(val_text) if val_text else np.nan)
    return RawSeries(sensor_id or path.stem, np.array(timestamps, dtype=np.int64),
                     np.array(values))


def write_series_csv(path: str | Path, series: RawSeries) -> None:
    with Path(path).open("w") as fh:
        fh.write("timestamp,value\n")
        for ts, val in zip(series.timestamps, series.values):
            text = "" if np.isnan(val) else repr(float(val))
            fh.write(f"{_format_timestamp(int(ts))},{text}\n")


def write_preprocessed(out_dir: str | Path, series: RawSeries,
                       std: StandardizedSeries, labels: ExtremeLabels) -> None:
    """Emit `preprocessed.csv` plus a `transform.meta` sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "preprocessed.csv").open("w") as fh:
        fh.write("timestamp,std_value,is_extreme\n")
        for ts, val, ext in zip(series.timestamps[1:], std.values, labels.labels):
            fh.write(f"{_format_timestamp(int(ts))},{float(val)!r},{int(ext)}\n")
    kvtext.write(out_dir / "transform.meta", transform_meta(std, labels.epsilon))


def transform_meta(std: StandardizedSeries, epsilon: float) -> dict:
    return {
        "source_id": std.source_id,
        "location": std.location,
        "scale": std.scale,
        "epsilon": float(epsilon),
        "anchor": std.anchor,
    }


def read_transform_meta(path: str | Path) -> tuple[dict, float]:
    """Return (kwargs for StandardizedSeries sans values, epsilon)."""
    pairs = kvtext.read(path)
    kwargs = {
        "location": float(pairs["location"]),
        "scale": float(pairs["scale"]),
        "anchor": float(pairs["anchor"]),
        "source_id": pairs.get("source_id", ""),
    }
    return kwargs, float(pairs["epsilon"])
