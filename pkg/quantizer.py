"""
Uniform per-feature quantisation of feature tables.

Each feature column gets its own grid of ``levels`` equal bins spanning the
fitted [min, max] range. Values outside the range clamp to the end bins; the
maximum itself falls in the top bin. De-quantisation returns bin centres.
A zero-width range uses a bin width of 1 and maps every value to level 0.
"""

import math
from collections import defaultdict
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from errors import ArgumentError, DataError
from models import FeatureVector, Gesture

DEFAULT_LEVELS = 20


class QuantizerModel(BaseModel):
    """
    Fitted quantisation grid.

    Attributes:
        levels (int): Number of bins per feature
        mins (Tuple[float, ...]): Per-feature minimum (JSON key "min")
        maxs (Tuple[float, ...]): Per-feature maximum (JSON key "max")
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    levels: int = Field(DEFAULT_LEVELS, ge=2, description="Number of quantisation levels")
    mins: Tuple[float, ...] = Field(..., alias="min", description="Per-feature minimum")
    maxs: Tuple[float, ...] = Field(..., alias="max", description="Per-feature maximum")

    @model_validator(mode="after")
    def _check_ranges(self) -> "QuantizerModel":
        if len(self.mins) != len(self.maxs):
            raise ValueError("min and max must have equal length")
        for j, (lo, hi) in enumerate(zip(self.mins, self.maxs)):
            if not lo <= hi:
                raise ValueError(f"feature {j}: min {lo} exceeds max {hi}")
        return self

    @property
    def dimension(self) -> int:
        return len(self.mins)

    def is_degenerate(self, feature_index: int) -> bool:
        return self.mins[feature_index] == self.maxs[feature_index]

    def bin_width(self, feature_index: int) -> float:
        if self.is_degenerate(feature_index):
            return 1.0
        return (self.maxs[feature_index] - self.mins[feature_index]) / self.levels


class QuantizedSeries(BaseModel):
    """
    Level sequence of one feature for one (subject, gesture) pair.

    Attributes:
        feature_index (int): Column of the feature vector
        levels (Tuple[int, ...]): One level per repetition, ascending repetition order
        subject_id (int): Source subject
        gesture_id (Gesture): Source gesture
    """
    model_config = ConfigDict(frozen=True)

    feature_index: int = Field(..., ge=0)
    levels: Tuple[int, ...]
    subject_id: int
    gesture_id: Gesture

    @property
    def key(self) -> Tuple[Gesture, int]:
        return (self.gesture_id, self.feature_index)


def fit(features: Sequence[FeatureVector], levels: int = DEFAULT_LEVELS) -> QuantizerModel:
    """
    Fit column-wise extrema over a feature table.

    Raises:
        ArgumentError: On an empty table or levels < 2
    """
    if not features:
        raise ArgumentError("cannot fit a quantizer on an empty feature table")
    if levels < 2:
        raise ArgumentError(f"levels must be ≥ 2, got {levels}")
    matrix = np.array([f.values for f in features])
    return QuantizerModel(
        levels=levels,
        mins=tuple(matrix.min(axis=0).tolist()),
        maxs=tuple(matrix.max(axis=0).tolist()),
    )


def _check_index(feature_index: int, model: QuantizerModel):
    if not 0 <= feature_index < model.dimension:
        raise ArgumentError(f"feature_index {feature_index} outside [0, {model.dimension})")


def quantize(value: float, feature_index: int, model: QuantizerModel) -> int:
    """
    Level of ``value`` on the grid of one feature.

    Examples:
        With range [0, 10] and 20 levels, 0.74 maps to level 1.
    """
    _check_index(feature_index, model)
    if not math.isfinite(value):
        raise ArgumentError(f"cannot quantize non-finite value {value}")
    if model.is_degenerate(feature_index):
        return 0
    level = math.floor((value - model.mins[feature_index]) / model.bin_width(feature_index))
    return min(max(level, 0), model.levels - 1)


def dequantize(level: int, feature_index: int, model: QuantizerModel) -> float:
    """Bin centre of ``level``: min + (level + 0.5)·w."""
    _check_index(feature_index, model)
    if not 0 <= level < model.levels:
        raise ArgumentError(f"level {level} outside [0, {model.levels - 1}]")
    return model.mins[feature_index] + (level + 0.5) * model.bin_width(feature_index)


def quantize_vector(values: np.ndarray, model: QuantizerModel) -> np.ndarray:
    return np.array([quantize(float(v), j, model) for j, v in enumerate(values)], dtype=np.int64)


def dequantize_vector(levels: Sequence[int], model: QuantizerModel) -> np.ndarray:
    return np.array([dequantize(int(level), j, model) for j, level in enumerate(levels)])


def one_hot(level: int, levels: int) -> np.ndarray:
    """Unit vector e_level of length ``levels``."""
    if not 0 <= level < levels:
        raise ArgumentError(f"level {level} outside [0, {levels - 1}]")
    vector = np.zeros(levels)
    vector[level] = 1.0
    return vector


def to_series(features: Sequence[FeatureVector], model: QuantizerModel) -> List[QuantizedSeries]:
    """
    Turn a feature table into per-feature level sequences over repetitions.

    Returns:
        One series per (subject, gesture, feature_index), sorted by that key,
        levels ordered by ascending repetition_index

    Raises:
        ArgumentError: On an empty table or a dimension mismatch
        DataError: On a duplicate (subject, gesture, repetition)
    """
    if not features:
        raise ArgumentError("cannot build series from an empty feature table")
    groups: Dict[Tuple[int, int], Dict[int, FeatureVector]] = defaultdict(dict)
    for vector in features:
        if vector.dimension != model.dimension:
            raise ArgumentError(f"feature dimension {vector.dimension} does not match quantizer {model.dimension}")
        group = groups[(vector.subject_id, vector.label.gesture_id.class_index)]
        if vector.repetition_index in group:
            raise DataError(
                f"duplicate row for subject {vector.subject_id}, gesture {vector.label.gesture_id.value}, "
                f"repetition {vector.repetition_index}"
            )
        group[vector.repetition_index] = vector

    series: List[QuantizedSeries] = []
    for (subject_id, _), group in sorted(groups.items()):
        ordered = [group[r] for r in sorted(group)]
        gesture = ordered[0].label.gesture_id
        level_matrix = np.array([quantize_vector(v.values, model) for v in ordered])
        for j in range(model.dimension):
            series.append(QuantizedSeries(
                feature_index=j,
                levels=tuple(int(x) for x in level_matrix[:, j]),
                subject_id=subject_id,
                gesture_id=gesture,
            ))
    return series
