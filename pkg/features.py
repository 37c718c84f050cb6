"""
Time-domain sEMG feature extraction.

Nine feature families are computed per channel and concatenated channel by
channel in the canonical order IAV, MAV, SD, RMS, WL, AR_1..AR_p, Skew,
Mobility, Kurtosis.

Conventions:
- Variances and σ use the n−1 denominator everywhere.
- The expectation in skewness and kurtosis is the 1/n sample mean.
- Mobility is var(diff(x)) / var(x), without a square root.
- AR coefficients are Yule-Walker estimates (biased autocorrelation of the
  mean-removed window, Levinson-Durbin recursion) with prediction
  x̂_n = Σ a_k x_{n−k}.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Tuple

import numpy as np

from errors import ArgumentError, DegenerateInputError
from logger_config import get_logger
from models import FeatureConfig, FeatureVector, Segment

logger = get_logger(__name__)


def _as_signal(x, min_length: int, name: str) -> np.ndarray:
    signal = np.asarray(x, dtype=np.float64)
    if signal.ndim != 1:
        raise ArgumentError(f"{name} expects a 1-D sequence, got shape {signal.shape}")
    if signal.size < min_length:
        raise DegenerateInputError(f"{name} needs at least {min_length} samples, got {signal.size}")
    return signal


def _is_constant(signal: np.ndarray) -> bool:
    return bool(np.ptp(signal) == 0.0)


def iav(x) -> float:
    """Integrated absolute value: Σ|x_i|."""
    signal = _as_signal(x, 1, "iav")
    return float(np.sum(np.abs(signal)))


def mav(x) -> float:
    """Mean absolute value, defined as iav(x) / n."""
    signal = _as_signal(x, 1, "mav")
    return iav(signal) / signal.size


def std_dev(x) -> float:
    """Sample standard deviation with the n−1 denominator."""
    signal = _as_signal(x, 2, "std_dev")
    if _is_constant(signal):
        return 0.0
    centred = signal - np.mean(signal)
    return float(np.sqrt(np.sum(centred * centred) / (signal.size - 1)))


def rms(x) -> float:
    """Root mean square: sqrt(Σx_i² / n)."""
    signal = _as_signal(x, 1, "rms")
    return float(np.sqrt(np.sum(signal * signal) / signal.size))


def waveform_length(x) -> float:
    """Waveform length: Σ|x_{k+1} − x_k|."""
    signal = _as_signal(x, 2, "waveform_length")
    return float(np.sum(np.abs(np.diff(signal))))


def autocorrelation(x, max_lag: int) -> np.ndarray:
    """
    Biased autocorrelation r_0..r_max_lag of the mean-removed sequence.

    r_k = (1/n) Σ_{t=0}^{n−1−k} y_t y_{t+k} with y = x − mean(x).
    """
    signal = _as_signal(x, 1, "autocorrelation")
    if max_lag < 0 or max_lag >= signal.size:
        raise ArgumentError(f"max_lag must lie in [0, {signal.size - 1}], got {max_lag}")
    centred = signal - np.mean(signal)
    n = signal.size
    return np.array([np.dot(centred[: n - k], centred[k:]) / n for k in range(max_lag + 1)])


def levinson_durbin(r, p: int) -> Tuple[np.ndarray, float]:
    """
    Solve the order-p Yule-Walker equations by Levinson-Durbin recursion.

    Args:
        r: Autocorrelations r_0..r_m with m ≥ p
        p: Model order

    Returns:
        (a, error_variance): predictor coefficients a_1..a_p and the final
        prediction-error variance

    Raises:
        DegenerateInputError: If r_0 is zero
        ArgumentError: If p < 1 or fewer than p+1 lags are given

    Examples:
        >>> levinson_durbin([1.0, 0.5], 1)[0]
        array([0.5])
    """
    lags = np.asarray(r, dtype=np.float64)
    if p < 1:
        raise ArgumentError(f"AR order must be ≥ 1, got {p}")
    if lags.size < p + 1:
        raise ArgumentError(f"need {p + 1} autocorrelation lags, got {lags.size}")
    if lags[0] <= 0.0:
        raise DegenerateInputError("zero-energy input (r_0 = 0)")

    a = np.zeros(p)
    error = float(lags[0])
    for i in range(1, p + 1):
        if error <= 0.0:
            # Perfectly predictable at a lower order; higher coefficients stay zero.
            break
        k = (lags[i] - np.dot(a[: i - 1], lags[i - 1 : 0 : -1])) / error
        previous = a[: i - 1].copy()
        a[: i - 1] = previous - k * previous[::-1]
        a[i - 1] = k
        error *= 1.0 - k * k
    return a, max(error, 0.0)


def ar_coefficients(x, p: int) -> np.ndarray:
    """
    Autoregressive coefficients a_1..a_p of a signal window.

    Raises:
        ArgumentError: If p ≥ n
        DegenerateInputError: If the window is constant
    """
    signal = np.asarray(x, dtype=np.float64)
    if p < 1 or p >= signal.size:
        raise ArgumentError(f"AR order {p} requires more than {p} samples, got {signal.size}")
    if _is_constant(signal):
        raise DegenerateInputError("constant input has no autoregressive structure (r_0 = 0)")
    coefficients, _ = levinson_durbin(autocorrelation(signal, p), p)
    return coefficients


def _sigma(signal: np.ndarray, name: str) -> float:
    sigma = std_dev(signal)
    if sigma == 0.0:
        raise DegenerateInputError(f"{name} is undefined for zero standard deviation")
    return sigma


def skewness(x) -> float:
    """Third standardised moment: mean((x−μ)³) / σ³."""
    signal = _as_signal(x, 2, "skewness")
    sigma = _sigma(signal, "skewness")
    centred = signal - np.mean(signal)
    return float(np.mean(centred ** 3) / sigma ** 3)


def kurtosis(x) -> float:
    """Fourth standardised moment: mean((x−μ)⁴) / σ⁴ (not excess)."""
    signal = _as_signal(x, 2, "kurtosis")
    sigma = _sigma(signal, "kurtosis")
    centred = signal - np.mean(signal)
    return float(np.mean(centred ** 4) / sigma ** 4)


def _variance(signal: np.ndarray) -> float:
    if _is_constant(signal):
        return 0.0
    centred = signal - np.mean(signal)
    return float(np.sum(centred * centred) / (signal.size - 1))


def mobility(x) -> float:
    """Ratio var(diff(x)) / var(x)."""
    signal = _as_signal(x, 3, "mobility")
    variance = _variance(signal)
    if variance == 0.0:
        raise DegenerateInputError("mobility is undefined for zero variance")
    return _variance(np.diff(signal)) / variance


def feature_names(config: FeatureConfig) -> List[str]:
    """Descriptive column names ``ch{c}_{feature}`` in vector order."""
    return [f"ch{c}_{name}" for c in range(1, 4) for name in config.feature_order]


def _channel_features(window: np.ndarray, channel: int, p: int) -> List[float]:
    scalar: List[Tuple[str, Callable[[np.ndarray], float]]] = [
        ("IAV", iav), ("MAV", mav), ("SD", std_dev), ("RMS", rms), ("WL", waveform_length),
        ("Skew", skewness), ("Mobility", mobility), ("Kurtosis", kurtosis),
    ]
    computed = {}
    for name, fn in scalar:
        try:
            computed[name] = fn(window)
        except DegenerateInputError as e:
            raise e.with_context(channel, name) from e
    try:
        ar = ar_coefficients(window, p)
    except (DegenerateInputError, ArgumentError) as e:
        raise DegenerateInputError(str(e)).with_context(channel, "AR") from e
    head = [computed[name] for name in ("IAV", "MAV", "SD", "RMS", "WL")]
    tail = [computed[name] for name in ("Skew", "Mobility", "Kurtosis")]
    return head + list(ar) + tail


def extract(segment: Segment, config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """
    Build the feature vector of one segment.

    Args:
        segment: Segment with three channel windows
        config: Feature settings (AR order)

    Returns:
        FeatureVector of length 3·(8+p) with synthetic=False

    Raises:
        DegenerateInputError: Naming the channel and feature that failed
    """
    values: List[float] = []
    for channel, window in enumerate(segment.channel_windows):
        values.extend(_channel_features(window, channel, config.ar_order))
    return FeatureVector(
        values=values,
        label=segment.label,
        subject_id=segment.subject_id,
        repetition_index=segment.repetition_index,
        synthetic=False,
    )


def extract_all(segments: Sequence[Segment], config: FeatureConfig = FeatureConfig(), workers: int = 1) -> List[FeatureVector]:
    """Extract every segment, preserving input order regardless of ``workers``."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vectors = list(pool.map(lambda s: extract(s, config), segments))
    else:
        vectors = [extract(s, config) for s in segments]
    logger.info("Features extracted", extra={"segments": len(segments), "dimension": config.dimension})
    return vectors
