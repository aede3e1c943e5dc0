"""Holdout split construction and the two-stage stratified training sampler
with oversampling ratio OS.

A window origin ``o`` denotes a sample consuming inputs at indices
``[o, o+h)`` and targets at ``[o+h, o+h+f)``. Splits and sampling are
deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidInputError,
    SplitInfeasibleError,
    StratificationInfeasibleError,
)


@dataclass(frozen=True)
class SplitSpec:
    """Holdout layout: per-set section count and the index ranges (half-open)
    in which sections may be placed."""

    h: int
    f: int
    holdout_sections: int = 24
    val_ranges: tuple[tuple[int, int], ...] = ()
    test_ranges: tuple[tuple[int, int], ...] = ()
    seed: int = 0


@dataclass(frozen=True)
class Split:
    train_mask: np.ndarray = field(repr=False)  # eligibility of window origins
    val_sections: tuple[tuple[int, int], ...]
    test_sections: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class SampleWindow:
    """One training/eval sample: h input rows of (value, indicator, exog...)
    and f target steps with an extreme-label mask."""

    input: np.ndarray
    target: np.ndarray
    target_mask: np.ndarray
    origin_index: int


def _place_sections(ranges, count: int, f: int,
                    rng: np.random.Generator) -> tuple[tuple[int, int], ...]:
    """Randomly place `count` non-overlapping f-length sections inside the
    given ranges, allocating counts proportionally to range capacity."""
    if count == 0:
        return ()
    if not ranges:
        raise SplitInfeasibleError("no ranges declared for holdout sections")
    capacities = [max((stop - start) // f, 0) for start, stop in ranges]
    if sum(capacities) < count:
        raise SplitInfeasibleError(
            f"ranges can host at most {sum(capacities)} non-overlapping "
            f"sections of length {f}, need {count}")
    # distribute: largest capacities first, round-robin remainder
    alloc = [0] * len(ranges)
    order = sorted(range(len(ranges)), key=lambda i: -capacities[i])
    remaining = count
    while remaining:
        progressed = False
        for i in order:
            if remaining and alloc[i] < capacities[i]:
                alloc[i] += 1
                remaining -= 1
                progressed = True
        if not progressed:  # pragma: no cover - guarded by capacity check
            raise SplitInfeasibleError("unable to allocate holdout sections")
    sections = []
    for (start, stop), k in zip(ranges, alloc):
        if k == 0:
            continue
        # choose k non-overlapping starts by spacing k sections in the slack
        slots = (stop - start) - k * f
        offsets = np.sort(rng.choice(slots + 1, size=k, replace=True))
        starts = start + offsets + np.arange(k) * f
        sections.extend((int(s), int(s) + f) for s in starts)
    return tuple(sorted(sections))


def make_split(series_len: int, spec: SplitSpec) -> Split:
    """Build holdout sections and the leakage-free training origin mask.

    Every origin whose h+f window would touch any holdout section is
    excluded from training.
    """
    rng = np.random.default_rng(spec.seed)
    val = _place_sections(spec.val_ranges, spec.holdout_sections, spec.f, rng)
    test = _place_sections(spec.test_ranges, spec.holdout_sections, spec.f, rng)
    window = spec.h + spec.f
    n_origins = series_len - window + 1
    if n_origins < 1:
        raise SplitInfeasibleError(
            f"series of length {series_len} cannot host an h+f={window} window")
    mask = np.ones(n_origins, dtype=bool)
    for start, stop in (*val, *test):
        lo = max(start - window + 1, 0)
        hi = min(stop, n_origins)
        mask[lo:hi] = False
    return Split(train_mask=mask, val_sections=val, test_sections=test)


def draw_samples(series, indicator, exog, labels, h: int, f: int,
                 volume: int, os_ratio: float, seed: int,
                 train_mask: np.ndarray | None = None,
                 with_replacement: bool = True) -> list[SampleWindow]:
    """Two-stage stratified sampler.

    At least ceil(os_ratio * volume) samples have >=1 extreme label inside
    their f-length target section; the remainder is drawn uniformly from all
    eligible windows. OS=0 is exactly plain uniform sampling.
    """
    if volume < 1:
        raise InvalidInputError("volume must be >= 1")
    if not (0.0 <= os_ratio <= 1.0):
        raise InvalidInputError("os_ratio must lie in [0, 1]")
    features = assemble_matrix(series, indicator, exog)
    labels = np.asarray(labels, dtype=bool)
    n = len(series)
    n_origins = n - (h + f) + 1
    if n_origins < 1:
        raise InvalidInputError("series too short for a single h+f window")
    eligible = np.ones(n_origins, dtype=bool)
    if train_mask is not None:
        eligible &= np.asarray(train_mask[:n_origins], dtype=bool)
    origins = np.flatnonzero(eligible)
    if len(origins) == 0:
        raise InvalidInputError("no eligible training windows")
    # windows whose target section [o+h, o+h+f) holds at least one extreme
    extreme_count = np.convolve(labels.astype(np.int64), np.ones(f, dtype=np.int64),
                                mode="valid")  # index i -> extremes in [i, i+f)
    has_extreme = extreme_count[h:h + n_origins] > 0
    extreme_origins = origins[has_extreme[origins]]
    quota = math.ceil(os_ratio * volume)
    if quota > 0 and len(extreme_origins) == 0:
        raise StratificationInfeasibleError(
            "oversampling requested but no extreme-containing window exists")
    rng = np.random.default_rng(seed)
    chosen = []
    if quota > 0:
        chosen.append(rng.choice(extreme_origins, size=quota,
                                 replace=with_replacement))
    if volume - quota > 0:
        chosen.append(rng.choice(origins, size=volume - quota,
                                 replace=with_replacement))
    chosen = np.concatenate(chosen)
    return [make_window(features, labels, int(o), h, f) for o in chosen]


def assemble_matrix(series, indicator, exog) -> np.ndarray:
    """Stack (value, indicator, k exogenous) into an n x (k+2) matrix."""
    series = np.asarray(series, dtype=np.float64)
    indicator = np.asarray(indicator, dtype=np.float64)
    columns = [series, indicator]
    for channel in exog or ():
        columns.append(np.asarray(channel, dtype=np.float64))
    if any(len(c) != len(series) for c in columns):
        raise InvalidInputError("all feature channels must have equal length")
    return np.column_stack(columns)


def make_window(features: np.ndarray, labels: np.ndarray, origin: int,
                h: int, f: int) -> SampleWindow:
    return SampleWindow(
        input=features[origin:origin + h],
        target=features[origin + h:origin + h + f, 0].copy(),
        target_mask=labels[origin + h:origin + h + f].copy(),
        origin_index=origin,
    )


def dump_split_csv(path, split: Split) -> None:
    """Audit dump: `set,start_index` rows for holdout sections."""
    with open(path, "w") as fh:
        fh.write("set,start_index\n")
        for start, _ in split.val_sections:
            fh.write(f"val,{start}\n")
        for start, _ in split.test_sections:
            fh.write(f"test,{start}\n")
