import math

import numpy as np
import pytest
from scipy.linalg import solve_toeplitz

import features
from errors import ArgumentError, DegenerateInputError
from models import FeatureConfig, Gesture, GestureLabel, Segment


def oracle_moments(x):
    n = len(x)
    mu = math.fsum(x) / n
    centred = [v - mu for v in x]
    var = math.fsum(c * c for c in centred) / (n - 1)
    sigma = math.sqrt(var)
    skew = (math.fsum(c ** 3 for c in centred) / n) / sigma ** 3
    kurt = (math.fsum(c ** 4 for c in centred) / n) / sigma ** 4
    return var, skew, kurt


def oracle_var(x):
    return oracle_moments(x)[0]


def oracle_ar(x, p):
    y = np.asarray(x) - math.fsum(x) / len(x)
    n = len(y)
    r = np.array([math.fsum(y[: n - k] * y[k:]) / n for k in range(p + 1)])
    return solve_toeplitz(r[:p], r[1:])


def make_segment(windows):
    return Segment(label=GestureLabel.of(Gesture.KEY), subject_id=3, repetition_index=2, channel_windows=windows)


def test_features_match_two_pass_oracles():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(8, 4097))
        x = rng.standard_normal(n) * rng.uniform(0.1, 3.0) + rng.uniform(-1.0, 1.0)
        values = x.tolist()
        diffs = np.diff(x).tolist()
        var, skew, kurt = oracle_moments(values)
        absolute = math.fsum(abs(v) for v in values)
        assert features.iav(x) == pytest.approx(absolute, rel=1e-10)
        assert features.mav(x) == pytest.approx(absolute / n, rel=1e-10)
        assert features.std_dev(x) == pytest.approx(math.sqrt(var), rel=1e-10)
        assert features.rms(x) == pytest.approx(math.sqrt(math.fsum(v * v for v in values) / n), rel=1e-10)
        assert features.waveform_length(x) == pytest.approx(math.fsum(abs(d) for d in diffs), rel=1e-10)
        assert features.skewness(x) == pytest.approx(skew, rel=1e-10, abs=1e-12)
        assert features.kurtosis(x) == pytest.approx(kurt, rel=1e-10)
        assert features.mobility(x) == pytest.approx(oracle_var(diffs) / var, rel=1e-10)
        np.testing.assert_allclose(features.ar_coefficients(x, 4), oracle_ar(x, 4), rtol=1e-10, atol=1e-12)


def test_iav_examples():
    assert features.iav([0, 0, 0]) == 0
    assert features.iav([1, -2, 3]) == 6
    assert features.iav([-5]) == 5


def test_mav_examples():
    assert features.mav([1, -2, 3]) == 2
    assert features.mav([-4, -4, -4]) == 4
    assert features.mav([0]) == 0


def test_std_dev_examples():
    assert features.std_dev([1, 2, 3]) == 1
    assert features.std_dev([7.1] * 9) == 0
    assert features.std_dev([2, 5]) == pytest.approx(3 / math.sqrt(2))


def test_rms_examples():
    assert features.rms([3, 4]) == pytest.approx(math.sqrt(12.5))
    assert features.rms([0, 0, 0]) == 0
    assert features.rms([-2.5]) == 2.5


def test_waveform_length_examples():
    assert features.waveform_length([1, 3, 2]) == 3
    assert features.waveform_length([4, 4, 4]) == 0
    assert features.waveform_length([0, 1, 2, 3]) == 3


def test_levinson_order_one():
    a, error = features.levinson_durbin([1.0, 0.5], 1)
    assert a[0] == 0.5
    assert error == pytest.approx(0.75)


def test_levinson_matches_toeplitz_solve():
    r = np.array([2.0, 1.2, 0.5, 0.1, -0.05])
    a, _ = features.levinson_durbin(r, 4)
    np.testing.assert_allclose(a, solve_toeplitz(r[:4], r[1:]), rtol=1e-12)


def test_ar_recovers_ar1_coefficient():
    rng = np.random.default_rng(11)
    noise = rng.standard_normal(10_000)
    x = np.zeros_like(noise)
    for t in range(1, len(x)):
        x[t] = 0.5 * x[t - 1] + noise[t]
    assert features.ar_coefficients(x, 1)[0] == pytest.approx(0.5, abs=0.05)


def test_ar_of_white_noise_is_small():
    rng = np.random.default_rng(12)
    a = features.ar_coefficients(rng.standard_normal(10_000), 4)
    assert np.all(np.abs(a) < 0.05)


def test_ar_errors():
    with pytest.raises(DegenerateInputError):
        features.ar_coefficients([3.0] * 10, 2)
    with pytest.raises(ArgumentError):
        features.ar_coefficients([1.0, 2.0, 3.0], 3)


def test_skewness_examples():
    assert features.skewness([-1, 0, 1]) == 0
    assert features.skewness([0, 0, 0, 1]) > 0
    x = np.array([0.3, 1.7, -2.2, 5.0, 0.1])
    assert features.skewness(-x) == pytest.approx(-features.skewness(x))
    with pytest.raises(DegenerateInputError):
        features.skewness([2, 2, 2])


def test_mobility_examples():
    assert features.mobility([0, 1, 2, 3]) == 0
    alternating = [1, -1, 1, -1, 1]
    assert features.mobility(alternating) == pytest.approx(oracle_var([-2, 2, -2, 2]) / oracle_var(alternating))
    x = np.array([0.5, 2.0, -1.0, 4.0, 3.5])
    assert features.mobility(-3.0 * x) == pytest.approx(features.mobility(x))
    with pytest.raises(DegenerateInputError):
        features.mobility([1, 1, 1, 1])


def test_kurtosis_examples():
    assert features.kurtosis([-1, 1, -1, 1]) == pytest.approx(0.5625)
    x = np.array([0.5, 2.0, -1.0, 4.0, 3.5])
    assert features.kurtosis(x + 100.0) == pytest.approx(features.kurtosis(x))
    assert features.kurtosis(x) >= 0


def test_extract_dimension_and_order():
    rng = np.random.default_rng(1)
    segment = make_segment(rng.standard_normal((3, 500)))
    vector = features.extract(segment)
    assert vector.dimension == 36
    assert vector.subject_id == 3 and vector.repetition_index == 2 and not vector.synthetic
    ch2 = segment.channel_windows[1]
    block = vector.values[12:24]
    assert block[0] == features.iav(ch2)
    assert block[4] == features.waveform_length(ch2)
    np.testing.assert_array_equal(block[5:9], features.ar_coefficients(ch2, 4))
    assert block[9] == features.skewness(ch2)
    assert block[10] == features.mobility(ch2)
    assert block[11] == features.kurtosis(ch2)
    assert features.extract(segment, FeatureConfig(ar_order=1)).dimension == 27


def test_extract_zero_channel_names_skewness():
    windows = np.random.default_rng(2).standard_normal((3, 100))
    windows[2] = 0.0
    with pytest.raises(DegenerateInputError) as exc:
        features.extract(make_segment(windows))
    assert exc.value.channel == 2
    assert exc.value.feature == 'Skew'
    assert 'ch3' in str(exc.value)


def test_extract_all_is_order_preserving():
    rng = np.random.default_rng(3)
    segments = [make_segment(rng.standard_normal((3, 64))) for _ in range(6)]
    serial = features.extract_all(segments)
    threaded = features.extract_all(segments, workers=3)
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a.values, b.values)


def test_feature_names():
    names = features.feature_names(FeatureConfig())
    assert len(names) == 36
    assert names[0] == 'ch1_IAV'
    assert names[5:9] == ['ch1_AR_1', 'ch1_AR_2', 'ch1_AR_3', 'ch1_AR_4']
    assert names[-1] == 'ch3_Kurtosis'


@pytest.mark.parametrize('c', [-250.0, -3.7, -1e-3, 0.013, 2.5, 1e4])
def test_amplitude_features_scale_linearly(c):
    x = np.random.default_rng(11).standard_normal(300)
    for f in (features.iav, features.mav, features.std_dev, features.rms, features.waveform_length):
        assert f(c * x) == pytest.approx(abs(c) * f(x), rel=1e-12)


def test_shape_features_ignore_positive_scaling():
    rng = np.random.default_rng(12)
    x = rng.standard_normal(300) + 0.4 * rng.standard_normal(300) ** 2
    for c in rng.uniform(1e-3, 1e3, size=50):
        assert features.skewness(c * x) == pytest.approx(features.skewness(x), rel=1e-10, abs=1e-12)
        assert features.mobility(c * x) == pytest.approx(features.mobility(x), rel=1e-10)
        assert features.kurtosis(c * x) == pytest.approx(features.kurtosis(x), rel=1e-10)
