"""
sEMG recordings: ingestion, persistence, segment statistics and a seeded
synthetic recording generator.

Generated data mimics the recording protocol's shape: three channels, 3 s
windows at 1.1 kHz, ten gestures. Each gesture-channel pair drives white
noise through its own second-order recursive filter and scales it with an
envelope: sustained with a small ripple for Static gestures, a Hann-shaped
burst for Dynamic ones. Static and Dynamic gestures resonate at different
base angles; within a type every gesture departs from that base in its own
parameters (one channel louder, sharper poles, or a higher resonance).
Subjects differ by a fixed gain and a small jitter of the pole angles.
"""

import math
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy.signal import lfilter

import storage
from errors import ArgumentError, DataError, DegenerateInputError, FormatError, IngestionError
from logger_config import get_logger
from models import (
    GESTURES,
    DatasetManifest,
    Gesture,
    GestureLabel,
    GestureType,
    Recording,
    RecordingEntry,
    Segment,
)

logger = get_logger(__name__)

SAMPLE_RATE_HZ = 1100.0
WINDOW_SECONDS = 3.0
MIN_INGESTED_LENGTH = 8
MANIFEST_NAME = "manifest.json"

RIPPLE_DEPTH = 0.05
RIPPLE_HZ = 1.0
BURST_FRACTION = 0.6
BURST_FLOOR = 0.05
REPETITION_GAIN_SPREAD = 0.05
SUBJECT_GAIN_RANGE = (0.8, 1.2)
SUBJECT_ANGLE_JITTER = 0.05

BASE_RADIUS = 0.75
SHARP_RADIUS = 0.9
BASE_ANGLE = {GestureType.STATIC: 1.0, GestureType.DYNAMIC: 1.8}
ANGLE_SHIFT = 0.5
LOUD_CHANNEL_GAIN = 2.2


class SegmentStatistics(BaseModel):
    """Sample count, per-channel mean and per-channel n−1 variance of a segment."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=2)
    mean: Tuple[float, float, float]
    variance: Tuple[float, float, float]


def window_length(sample_rate_hz: float = SAMPLE_RATE_HZ) -> int:
    return int(round(WINDOW_SECONDS * sample_rate_hz))


def _signature(gesture: Gesture) -> int:
    """Position of a gesture within its type, 0..4."""
    return gesture.class_index % 5


def pole_pair(gesture: Gesture, channel: int) -> Tuple[float, float]:
    """
    Base (radius, angle) of the AR(2) pole pair of a gesture-channel pair.

    Signature 3 sharpens the poles on every channel, signature 4 raises the
    resonance on every channel; the others keep the type's base pair.
    """
    radius, angle = BASE_RADIUS, BASE_ANGLE[gesture.gesture_type]
    if _signature(gesture) == 3:
        radius = SHARP_RADIUS
    elif _signature(gesture) == 4:
        angle += ANGLE_SHIFT
    return radius, angle


def channel_amplitude(gesture: Gesture, channel: int) -> float:
    """Signatures 0..2 boost the amplitude of channel 0..2 respectively."""
    return LOUD_CHANNEL_GAIN if _signature(gesture) == channel else 1.0


def _ar2_std(a1: float, a2: float) -> float:
    """Stationary standard deviation of x_n = a1 x_{n−1} + a2 x_{n−2} + e_n, var(e) = 1."""
    variance = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) ** 2 - a1 ** 2))
    return math.sqrt(variance)


def _envelope(gesture_type: GestureType, n: int, sample_rate_hz: float, rng: np.random.Generator) -> np.ndarray:
    if gesture_type is GestureType.STATIC:
        t = np.arange(n) / sample_rate_hz
        phase = rng.uniform(0.0, 2.0 * math.pi)
        return 1.0 + RIPPLE_DEPTH * np.sin(2.0 * math.pi * RIPPLE_HZ * t + phase)
    burst = int(round(BURST_FRACTION * n))
    start = int(rng.integers(int(0.1 * n), n - burst - int(0.1 * n) + 1))
    envelope = np.full(n, BURST_FLOOR)
    envelope[start:start + burst] += (1.0 - BURST_FLOOR) * np.hanning(burst)
    return envelope


def _subject_profile(seed: int, subject_id: int) -> Tuple[float, np.ndarray]:
    rng = np.random.default_rng([seed, subject_id])
    gain = float(rng.uniform(*SUBJECT_GAIN_RANGE))
    jitter = rng.uniform(-SUBJECT_ANGLE_JITTER, SUBJECT_ANGLE_JITTER, size=(len(GESTURES), 3))
    return gain, jitter


def _synthesize_segment(
    seed: int, subject_id: int, gain: float, jitter: np.ndarray, gesture: Gesture, repetition: int, n: int
) -> Segment:
    rng = np.random.default_rng([seed, subject_id, gesture.class_index, repetition])
    windows = np.empty((3, n))
    for channel in range(3):
        radius, angle = pole_pair(gesture, channel)
        angle += jitter[gesture.class_index, channel]
        a1, a2 = 2.0 * radius * math.cos(angle), -radius * radius
        noise = rng.standard_normal(n)
        coloured = lfilter([1.0], [1.0, -a1, -a2], noise) / _ar2_std(a1, a2)
        repetition_gain = 1.0 + rng.uniform(-REPETITION_GAIN_SPREAD, REPETITION_GAIN_SPREAD)
        envelope = _envelope(gesture.gesture_type, n, SAMPLE_RATE_HZ, rng)
        windows[channel] = gain * repetition_gain * channel_amplitude(gesture, channel) * envelope * coloured
    return Segment(
        label=GestureLabel.of(gesture),
        subject_id=subject_id,
        repetition_index=repetition,
        channel_windows=windows,
        sample_rate_hz=SAMPLE_RATE_HZ,
    )


def generate_synthetic_recordings(n_subjects: int, reps_per_gesture: int, seed: int) -> List[Segment]:
    """
    Generate a deterministic synthetic corpus.

    Args:
        n_subjects: Number of subjects (ids 1..n_subjects)
        reps_per_gesture: Repetitions per gesture and subject
        seed: Non-negative generator seed

    Returns:
        n_subjects × 10 × reps_per_gesture segments sorted by
        (subject, gesture, repetition)

    Raises:
        ArgumentError: On non-positive counts or a negative seed

    Examples:
        >>> len(generate_synthetic_recordings(1, 1, 42))
        10
    """
    if n_subjects < 1:
        raise ArgumentError(f"n_subjects must be ≥ 1, got {n_subjects}")
    if reps_per_gesture < 1:
        raise ArgumentError(f"reps_per_gesture must be ≥ 1, got {reps_per_gesture}")
    if seed < 0:
        raise ArgumentError(f"seed must be non-negative, got {seed}")

    n = window_length()
    segments: List[Segment] = []
    for subject_id in range(1, n_subjects + 1):
        gain, jitter = _subject_profile(seed, subject_id)
        for gesture in GESTURES:
            for repetition in range(reps_per_gesture):
                segments.append(_synthesize_segment(seed, subject_id, gain, jitter, gesture, repetition, n))
    logger.info("Synthetic recordings generated", extra={
        "subjects": n_subjects, "reps_per_gesture": reps_per_gesture, "seed": seed, "segments": len(segments)
    })
    return segments


def segment_statistics(segment: Segment) -> SegmentStatistics:
    """
    Sample count, mean and n−1 variance of each channel.

    Examples:
        A channel [1, 2, 3] gives n=3, mean 2.0, variance 1.0.
    """
    windows = segment.channel_windows
    n = windows.shape[1]
    if n < 2:
        raise DegenerateInputError(f"segment statistics need at least 2 samples, got {n}")
    means = windows.sum(axis=1) / n
    centred = windows - means[:, None]
    variances = (centred * centred).sum(axis=1) / (n - 1)
    return SegmentStatistics(n=n, mean=tuple(means.tolist()), variance=tuple(variances.tolist()))


def to_segment(recording: Recording, repetition_index: int) -> Segment:
    """Wrap a pre-segmented recording as one observation."""
    return Segment(
        label=GestureLabel.of(recording.gesture_id),
        subject_id=recording.subject_id,
        repetition_index=repetition_index,
        channel_windows=recording.samples,
        sample_rate_hz=recording.sample_rate_hz,
    )


def _read_manifest(path: Path) -> DatasetManifest:
    if not path.is_file():
        raise IngestionError(f"manifest not found: {path}", path=str(path))
    try:
        return DatasetManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise FormatError(f"invalid manifest {path}: {e.errors()[0]['msg']}") from e


def load_dataset(root_path: Union[str, Path], manifest: Union[str, Path] = MANIFEST_NAME) -> List[Segment]:
    """
    Load every recording listed in a manifest.

    Args:
        root_path: Dataset directory; manifest file paths are relative to it
        manifest: Manifest path, relative to root_path unless absolute

    Returns:
        One Segment per manifest entry, sorted by (subject, gesture, repetition)

    Raises:
        IngestionError: Missing manifest or recording file
        FormatError: Wrong channel columns or too-short window
        ParseError: Non-numeric cell (row number included)
        DataError: Duplicate (subject, gesture, repetition)
    """
    root = Path(root_path)
    manifest_path = Path(manifest) if Path(manifest).is_absolute() else root / manifest
    parsed = _read_manifest(manifest_path)

    seen = set()
    segments: List[Segment] = []
    for entry in parsed.recordings:
        key = (entry.subject, entry.gesture.class_index, entry.repetition)
        if key in seen:
            raise DataError(
                f"duplicate recording for subject {entry.subject}, gesture {entry.gesture.value}, "
                f"repetition {entry.repetition}"
            )
        seen.add(key)
        samples = storage.read_recording_csv(root / entry.file)
        if samples.shape[1] < MIN_INGESTED_LENGTH:
            raise FormatError(
                f"{root / entry.file}: window has {samples.shape[1]} samples, need ≥ {MIN_INGESTED_LENGTH}"
            )
        recording = Recording(
            subject_id=entry.subject,
            gesture_id=entry.gesture,
            samples=samples,
            sample_rate_hz=parsed.sample_rate_hz,
        )
        segments.append(to_segment(recording, entry.repetition))

    segments.sort(key=lambda s: s.sort_key)
    logger.info("Dataset loaded", extra={"root": str(root), "segments": len(segments)})
    return segments


def recording_path(segment: Segment) -> str:
    return f"s{segment.subject_id:02d}/{segment.label.gesture_id.value}_r{segment.repetition_index:02d}.csv"


def save_dataset(segments: List[Segment], out_dir: Union[str, Path], sample_rate_hz: Optional[float] = None) -> Path:
    """
    Persist segments as per-recording CSV files plus a manifest.

    Returns:
        Path of the written manifest
    """
    root = Path(out_dir)
    rates = {s.sample_rate_hz for s in segments}
    if sample_rate_hz is None:
        if len(rates) > 1:
            raise ArgumentError(f"segments mix sample rates {sorted(rates)}")
        sample_rate_hz = rates.pop() if rates else SAMPLE_RATE_HZ

    entries = []
    for segment in sorted(segments, key=lambda s: s.sort_key):
        relative = recording_path(segment)
        storage.write_recording_csv(root / relative, segment.channel_windows)
        entries.append(RecordingEntry(
            subject=segment.subject_id,
            gesture=segment.label.gesture_id,
            repetition=segment.repetition_index,
            file=relative,
        ))
    manifest = DatasetManifest(sample_rate_hz=sample_rate_hz, recordings=entries)
    manifest_path = root / MANIFEST_NAME
    storage.write_json(manifest_path, manifest.model_dump(mode="json"))
    logger.info("Dataset saved", extra={"root": str(root), "segments": len(entries)})
    return manifest_path
