"""
Pydantic models for the sEMG gesture data model.

This module defines the shared, immutable records that flow between the
pipeline stages: the gesture vocabulary, raw recordings and segments, feature
vectors, training configuration and reports, and evaluation rows.
"""

import math
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _frozen_array(value, ndim: int) -> np.ndarray:
    """Copy ``value`` into a read-only float64 array of the given rank."""
    array = np.array(value, dtype=np.float64)
    if array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional array, got shape {array.shape}")
    array.setflags(write=False)
    return array


class Gesture(str, Enum):
    """The ten signs of the recording protocol, in class-index order."""

    ONE = "One"
    TWO = "Two"
    THREE = "Three"
    FOUR = "Four"
    FIVE = "Five"
    SORRY = "Sorry"
    BOLD = "Bold"
    CONFIDENT = "Confident"
    KEY = "Key"
    WIN = "Win"

    @property
    def class_index(self) -> int:
        return GESTURES.index(self)

    @property
    def gesture_type(self) -> "GestureType":
        return GestureType.STATIC if self.class_index < 5 else GestureType.DYNAMIC


class GestureType(str, Enum):
    STATIC = "Static"
    DYNAMIC = "Dynamic"

    @property
    def class_index(self) -> int:
        return 0 if self is GestureType.STATIC else 1

    @property
    def gestures(self) -> List[Gesture]:
        return STATIC_GESTURES if self is GestureType.STATIC else DYNAMIC_GESTURES


GESTURES: List[Gesture] = list(Gesture)
STATIC_GESTURES: List[Gesture] = GESTURES[:5]
DYNAMIC_GESTURES: List[Gesture] = GESTURES[5:]


class GestureLabel(BaseModel):
    """
    Class label of one observation.

    Attributes:
        gesture_id (Gesture): One of the ten signs
        gesture_type (GestureType): Static or Dynamic, derived from gesture_id
    """
    model_config = ConfigDict(frozen=True)

    gesture_id: Gesture = Field(..., description="Sign performed")
    gesture_type: GestureType = Field(..., description="Static/Dynamic type of the sign")

    @model_validator(mode="before")
    @classmethod
    def _fill_type(cls, data):
        if isinstance(data, dict) and data.get("gesture_type") is None and "gesture_id" in data:
            data = {**data, "gesture_type": Gesture(data["gesture_id"]).gesture_type}
        return data

    @model_validator(mode="after")
    def _check_type(self) -> "GestureLabel":
        expected = self.gesture_id.gesture_type
        if self.gesture_type is not expected:
            raise ValueError(f"{self.gesture_id.value} is a {expected.value} gesture")
        return self

    @classmethod
    def of(cls, gesture: Gesture) -> "GestureLabel":
        return cls(gesture_id=gesture)


class Recording(BaseModel):
    """
    Raw multichannel sEMG recording of one repetition.

    Attributes:
        subject_id (int): Participant identifier
        gesture_id (Gesture): Sign performed
        samples (np.ndarray): Array of shape (3, n), one row per channel
        sample_rate_hz (float): Sampling frequency
        bit_depth (int): ADC resolution, metadata only
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    subject_id: int = Field(..., ge=0, description="Participant identifier")
    gesture_id: Gesture = Field(..., description="Sign performed")
    samples: np.ndarray = Field(..., description="Per-channel samples, shape (3, n)")
    sample_rate_hz: float = Field(1100.0, gt=0, description="Sampling frequency in Hz")
    bit_depth: int = Field(16, ge=1, description="ADC bit depth")

    @field_validator("samples", mode="before")
    @classmethod
    def _check_samples(cls, value):
        array = _frozen_array(value, 2)
        if array.shape[0] != 3:
            raise ValueError(f"expected 3 channels, got {array.shape[0]}")
        if array.shape[1] < 2:
            raise ValueError("each channel needs at least 2 samples")
        return array

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[1])


class Segment(BaseModel):
    """
    One observation: a single repetition of one gesture by one subject.

    Attributes:
        label (GestureLabel): Gesture and type
        subject_id (int): Participant identifier
        repetition_index (int): Repetition number, starting at 0
        channel_windows (np.ndarray): Array of shape (3, n)
        sample_rate_hz (float): Sampling frequency of the windows
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    label: GestureLabel
    subject_id: int = Field(..., ge=0)
    repetition_index: int = Field(..., ge=0)
    channel_windows: np.ndarray
    sample_rate_hz: float = Field(1100.0, gt=0)

    @field_validator("channel_windows", mode="before")
    @classmethod
    def _check_windows(cls, value):
        array = _frozen_array(value, 2)
        if array.shape[0] != 3:
            raise ValueError(f"expected 3 channel windows, got {array.shape[0]}")
        if array.shape[1] < 2:
            raise ValueError("each window needs at least 2 samples")
        return array

    @property
    def window_length(self) -> int:
        return int(self.channel_windows.shape[1])

    @property
    def sort_key(self):
        return (self.subject_id, self.label.gesture_id.class_index, self.repetition_index)


FEATURE_FAMILIES_HEAD = ["IAV", "MAV", "SD", "RMS", "WL"]
FEATURE_FAMILIES_TAIL = ["Skew", "Mobility", "Kurtosis"]


class FeatureConfig(BaseModel):
    """
    Feature extraction settings.

    Attributes:
        ar_order (int): Order p of the autoregressive model
    """
    model_config = ConfigDict(frozen=True)

    ar_order: int = Field(4, ge=1, description="Order of the AR model")

    @property
    def feature_order(self) -> List[str]:
        ar = [f"AR_{k}" for k in range(1, self.ar_order + 1)]
        return FEATURE_FAMILIES_HEAD + ar + FEATURE_FAMILIES_TAIL

    @property
    def per_channel_dimension(self) -> int:
        return 8 + self.ar_order

    @property
    def dimension(self) -> int:
        return 3 * self.per_channel_dimension


class FeatureVector(BaseModel):
    """
    Classifier input for one repetition.

    Attributes:
        values (np.ndarray): Concatenated per-channel features, length d
        label (GestureLabel): Gesture and type
        subject_id (int): Participant identifier (synthetic subjects included)
        repetition_index (int): Repetition number
        synthetic (bool): True for generator output
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    label: GestureLabel
    subject_id: int = Field(..., ge=0)
    repetition_index: int = Field(..., ge=0)
    synthetic: bool = False

    @field_validator("values", mode="before")
    @classmethod
    def _check_values(cls, value):
        array = _frozen_array(value, 1)
        if not np.all(np.isfinite(array)):
            raise ValueError("feature values must be finite")
        return array

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    @property
    def key(self):
        return (self.subject_id, self.label.gesture_id.class_index, self.repetition_index)


class TrainConfig(BaseModel):
    """
    Dense-network training hyperparameters.

    Attributes:
        iterations (int): Fixed number of full-batch updates
        learning_rate (float): Gradient-descent step size
        l2_lambda (float): Weight-decay strength on non-bias weights
        seed (int): Weight initialisation seed
        tolerance (Optional[float]): Stop early once |ΔJ| falls below it
    """
    model_config = ConfigDict(frozen=True)

    iterations: int = Field(150, ge=1, description="Number of gradient-descent iterations")
    learning_rate: float = Field(0.3, gt=0, description="Step size")
    l2_lambda: float = Field(0.0, ge=0, description="L2 regularisation strength")
    seed: int = Field(0, description="Initialisation seed")
    tolerance: Optional[float] = Field(None, gt=0, description="Optional cost-change stopping threshold")


class SplitConfig(BaseModel):
    """Per-subject stratified train/test split settings."""
    model_config = ConfigDict(frozen=True)

    test_fraction: float = Field(0.3, gt=0, lt=1, description="Fraction of each subject's rows held out")
    seed: int = Field(0, description="Split seed")


class IterationRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    iteration: int = Field(..., ge=1)
    cost: float = Field(..., ge=0)
    train_ca: float = Field(..., ge=0, le=100)
    test_ca: Optional[float] = Field(None, ge=0, le=100)


class TrainingReport(BaseModel):
    """
    Per-iteration trace of one network's training.

    Attributes:
        network (str): Network identity, e.g. "master" or "conventional"
        records (List[IterationRecord]): One entry per iteration, 1..N
        elapsed_seconds (float): Wall time, logged but never written to CSV
    """
    network: str = Field(..., description="Network identity")
    records: List[IterationRecord] = Field(default_factory=list)
    elapsed_seconds: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _check_records(self) -> "TrainingReport":
        for expected, record in enumerate(self.records, start=1):
            if record.iteration != expected:
                raise ValueError(f"iteration indices must be contiguous from 1, got {record.iteration} at {expected}")
            if not math.isfinite(record.cost):
                raise ValueError(f"non-finite cost at iteration {record.iteration}")
        return self

    @property
    def costs(self) -> List[float]:
        return [r.cost for r in self.records]

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]


class Architecture(str, Enum):
    MASTER_SLAVE = "MasterSlave"
    CONVENTIONAL = "Conventional"


class EvaluationRow(BaseModel):
    """
    One cell of the accuracy table.

    Attributes:
        subject_id (int): Evaluated subject
        arch (Architecture): Master-slave or conventional
        with_synthetic (bool): Whether synthetic rows were added to training
        master_ca (Optional[float]): Static/Dynamic accuracy in percent
        slave_ca (Optional[float]): Gesture accuracy of the true-type slave
        end_to_end_ca (float): Full gesture accuracy in percent
    """
    model_config = ConfigDict(frozen=True)

    subject_id: int
    arch: Architecture
    with_synthetic: bool
    master_ca: Optional[float] = Field(None, ge=0, le=100)
    slave_ca: Optional[float] = Field(None, ge=0, le=100)
    end_to_end_ca: float = Field(..., ge=0, le=100)


class SubjectSplit(BaseModel):
    """
    Train/test membership of one subject's real rows.

    Attributes:
        subject_id (int): Subject the split belongs to
        train (List[Tuple[Gesture, int]]): (gesture, repetition) keys used for training
        test (List[Tuple[Gesture, int]]): (gesture, repetition) keys held out
    """
    subject_id: int = Field(..., ge=0)
    train: List[Tuple[Gesture, int]] = Field(default_factory=list)
    test: List[Tuple[Gesture, int]] = Field(default_factory=list)


class SplitManifest(BaseModel):
    """Every subject's split plus the settings that produced it."""

    config: SplitConfig
    subjects: List[SubjectSplit] = Field(default_factory=list)

    def for_subject(self, subject_id: int) -> Optional[SubjectSplit]:
        return next((s for s in self.subjects if s.subject_id == subject_id), None)


class RecordingEntry(BaseModel):
    subject: int = Field(..., ge=0)
    gesture: Gesture
    repetition: int = Field(..., ge=0)
    file: str = Field(..., description="Path relative to the dataset root")


class DatasetManifest(BaseModel):
    """Manifest describing a directory of pre-segmented recordings."""

    sample_rate_hz: float = Field(1100.0, gt=0)
    recordings: List[RecordingEntry] = Field(default_factory=list)
