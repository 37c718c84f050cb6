import numpy as np
import pytest
from pydantic import ValidationError
from scipy.special import softmax

import lstm_augment as la
import quantizer
from errors import ArgumentError, DataError
from models import GESTURES, FeatureVector, Gesture, GestureLabel
from quantizer import QuantizedSeries


def zero_cell(levels=4, hidden=3):
    return la.LstmCell(
        input_weights=np.zeros((4 * hidden, levels)),
        recurrent_weights=np.zeros((4 * hidden, hidden)),
        biases=np.zeros(4 * hidden),
        output_weights=np.zeros((levels, hidden)),
        output_bias=np.zeros(levels),
    )


def series(levels, feature_index=0, subject=1, gesture=Gesture.ONE):
    return QuantizedSeries(feature_index=feature_index, levels=tuple(levels), subject_id=subject, gesture_id=gesture)


def feature_table(subjects=(1, 2), reps=5, dimension=2, seed=0):
    rng = np.random.default_rng(seed)
    return [
        FeatureVector(
            values=rng.normal(loc=g.class_index, size=dimension),
            label=GestureLabel.of(g),
            subject_id=s,
            repetition_index=r,
        )
        for s in subjects for g in GESTURES for r in range(reps)
    ]


def test_zero_parameters_fixed_point():
    cell = zero_cell()
    state, logits = la.lstm_step(cell, quantizer.one_hot(1, 4))
    np.testing.assert_array_equal(state.c, 0.0)
    np.testing.assert_array_equal(state.h, 0.0)
    np.testing.assert_array_equal(logits, 0.0)
    i, f, o, g = la._gates(cell, quantizer.one_hot(1, 4), np.zeros(3))
    assert np.all(i == 0.5) and np.all(f == 0.5) and np.all(o == 0.5) and np.all(g == 0.0)


def test_saturated_gates_keep_memory():
    cell = zero_cell()
    biases = np.zeros(12)
    biases[0:3] = -1e3   # input gate closed
    biases[3:6] = 1e3    # forget gate open
    c = np.array([0.3, -1.2, 2.0])
    cell = cell.with_parameters({'biases': biases}).with_state(la.LstmState(h=np.zeros(3), c=c))
    state, _ = la.lstm_step(cell, quantizer.one_hot(2, 4))
    np.testing.assert_array_equal(state.c, c)


def test_gates_in_open_interval():
    rng = np.random.default_rng(0)
    cell = la.init_cell(6, 5, rng, scale=1.0)
    h = rng.normal(size=5)
    for level in range(6):
        i, f, o, g = la._gates(cell, quantizer.one_hot(level, 6), h)
        for gate in (i, f, o):
            assert np.all((gate > 0) & (gate < 1))
        assert np.all((g > -1) & (g < 1))


def test_step_rejects_wrong_input_length():
    with pytest.raises(ArgumentError):
        la.lstm_step(zero_cell(levels=4), np.ones(3))


def test_reset_state():
    rng = np.random.default_rng(1)
    cell = la.init_cell(4, 3, rng, scale=0.5)
    x = quantizer.one_hot(2, 4)
    fresh_state, fresh_logits = la.lstm_step(cell, x)
    for level in (0, 3, 1):
        state, _ = la.lstm_step(cell, quantizer.one_hot(level, 4))
        cell = cell.with_state(state)
    reset = la.reset_state(cell)
    np.testing.assert_array_equal(reset.state.h, 0.0)
    np.testing.assert_array_equal(reset.state.c, 0.0)
    np.testing.assert_array_equal(la.reset_state(reset).state.h, reset.state.h)
    state, logits = la.lstm_step(reset, x)
    np.testing.assert_array_equal(logits, fresh_logits)
    np.testing.assert_array_equal(state.c, fresh_state.c)


def test_bptt_matches_finite_differences():
    rng = np.random.default_rng(3)
    cell = la.init_cell(4, 3, rng, scale=0.5)
    sequences = np.array([[0, 2, 3]])
    _, grads, count = la.loss_and_gradients(cell, sequences)
    assert count == 2
    step = 1e-5
    for name, value in cell.parameters().items():
        numeric = np.zeros_like(value)
        for index in np.ndindex(value.shape):
            plus, minus = value.copy(), value.copy()
            plus[index] += step
            minus[index] -= step
            loss_plus, _, _ = la.loss_and_gradients(cell.with_parameters({name: plus}), sequences)
            loss_minus, _, _ = la.loss_and_gradients(cell.with_parameters({name: minus}), sequences)
            numeric[index] = (loss_plus - loss_minus) / (2 * step)
        np.testing.assert_allclose(grads[name], numeric, rtol=1e-5, atol=1e-8, err_msg=name)


def test_constant_series_is_learned():
    config = la.GeneratorConfig(hidden_dim=8, epochs=300, learning_rate=0.5, seed=0)
    model = la.train_generator([series([5] * 20)], config, levels=20)
    cell = model.cells[0]
    _, logits = la.lstm_step(cell, quantizer.one_hot(5, 20))
    assert softmax(logits)[5] > 0.9


def test_alternating_series_is_learned():
    config = la.GeneratorConfig(hidden_dim=8, epochs=400, learning_rate=0.5, seed=1, init_scale=0.5)
    data = [series([1, 2] * 10, subject=s) for s in (1, 2)]
    model = la.train_generator(data, config, levels=4)
    _, logits = la.lstm_step(model.cells[0], quantizer.one_hot(1, 4))
    assert int(np.argmax(logits)) == 2


def test_training_loss_decreases():
    rng = np.random.default_rng(5)
    sequences = [tuple(rng.integers(0, 3, size=10)) for _ in range(6)]
    config = la.GeneratorConfig(hidden_dim=6, epochs=60, learning_rate=0.2)
    _, losses = la.train_cell(sequences, 3, config, seed=2)
    assert len(losses) == 61
    assert losses[-1] < losses[0]


@pytest.mark.parametrize('learning_rate', [0.01, 0.05, 0.1])
def test_constant_series_loss_never_increases(learning_rate):
    config = la.GeneratorConfig(hidden_dim=4, epochs=40, learning_rate=learning_rate)
    _, losses = la.train_cell([(3,) * 12, (3,) * 8], 6, config, seed=0)
    assert all(later <= earlier + 1e-9 for earlier, later in zip(losses, losses[1:]))


def test_final_loss_belongs_to_returned_cell():
    sequences = [(0, 1, 2, 1, 0), (2, 2, 1, 0, 1)]
    config = la.GeneratorConfig(hidden_dim=4, epochs=5, learning_rate=0.3)
    cell, losses = la.train_cell(sequences, 3, config, seed=1)
    assert len(losses) == 6
    loss, _, count = la.loss_and_gradients(cell, np.array(sequences))
    assert losses[-1] == pytest.approx(loss / count, rel=1e-12)
    model = la.train_generator([series(s) for s in sequences], config.model_copy(update={'seed': 1}), levels=3)
    assert model.final_losses[0] == pytest.approx(losses[-1], rel=1e-12)


def test_same_seed_same_parameters():
    data = [series([0, 1, 3, 2, 1], feature_index=j) for j in range(3)]
    config = la.GeneratorConfig(hidden_dim=4, epochs=10, seed=7)
    first = la.train_generator(data, config, levels=4)
    second = la.train_generator(data, config.model_copy(update={'workers': 3}), levels=4)
    for j in range(3):
        for name, value in first.cells[j].parameters().items():
            np.testing.assert_array_equal(value, second.cells[j].parameters()[name])


def test_train_generator_rejects_short_series():
    with pytest.raises(DataError):
        la.train_generator([series([3])], la.GeneratorConfig(epochs=1), levels=4)
    with pytest.raises(DataError):
        la.train_generator([series([3, 7])], la.GeneratorConfig(epochs=1), levels=4)


def test_generator_serialised_form():
    training = [series([0, 1, 3, 2, 1], feature_index=j) for j in range(2)]
    model = la.train_generator(training, la.GeneratorConfig(hidden_dim=3, epochs=2), levels=4)
    data = model.model_dump(mode='json')
    assert data['gate_order'] == ['input', 'forget', 'output', 'candidate']
    assert sorted(data['cells']) == ['0', '1']
    assert 'state' not in data['cells']['0']
    restored = la.GeneratorModel.model_validate(data)
    assert restored.levels == 4 and restored.config == model.config
    np.testing.assert_array_equal(restored.cells[1].recurrent_weights, model.cells[1].recurrent_weights)


def test_generate_subject_shape_and_grid():
    table = feature_table()
    grid = quantizer.fit(table)
    model = la.train_generator(quantizer.to_series(table, grid), la.GeneratorConfig(hidden_dim=4, epochs=5), 20)
    rows = la.generate_subject(model, grid, table, new_subject_id=9, length=20, seed=3)
    assert len(rows) == 200
    assert all(r.synthetic and r.subject_id == 9 for r in rows)
    assert [r.label.gesture_id for r in rows[::20]] == GESTURES
    for r in rows:
        for j, v in enumerate(r.values):
            assert grid.mins[j] <= v <= grid.maxs[j]
            assert v == quantizer.dequantize(quantizer.quantize(v, j, grid), j, grid)
    again = la.generate_subject(model, grid, table, new_subject_id=9, length=20, seed=3)
    for a, b in zip(rows, again):
        np.testing.assert_array_equal(a.values, b.values)


def test_generate_subject_argmax_mode():
    table = feature_table(reps=4)
    grid = quantizer.fit(table)
    config = la.GeneratorConfig(hidden_dim=3, epochs=3, sampling='argmax')
    model = la.train_generator(quantizer.to_series(table, grid), config, 20)
    rows = la.generate_subject(model, grid, table, 5, 6, seed=0, gestures=[Gesture.BOLD])
    assert len(rows) == 6
    assert all(r.label.gesture_id is Gesture.BOLD for r in rows)


def test_generate_subject_rejects_unknown_gesture():
    table = [v for v in feature_table(reps=3) if v.label.gesture_id is not Gesture.WIN]
    grid = quantizer.fit(table)
    model = la.train_generator(quantizer.to_series(table, grid), la.GeneratorConfig(hidden_dim=2, epochs=1), 20)
    with pytest.raises(ArgumentError):
        la.generate_subject(model, grid, table, 5, 3, seed=0, gestures=[Gesture.WIN])


def test_augment_features():
    table = feature_table(reps=4)
    config = la.AugmentConfig(synthetic_subjects=2, length=3, seed=4, generator=la.GeneratorConfig(hidden_dim=3, epochs=3))
    synthetic, grid, generator = la.augment_features(table, config)
    assert len(synthetic) == 2 * 10 * 3
    assert {r.subject_id for r in synthetic} == {3, 4}
    assert generator is not None and generator.dimension == 2
    assert grid.dimension == 2

    none, _, missing = la.augment_features(table, config.model_copy(update={'synthetic_subjects': 0}))
    assert none == [] and missing is None


def test_cell_rejects_inconsistent_shapes():
    with pytest.raises(ValidationError):
        la.LstmCell(
            input_weights=np.zeros((12, 4)),
            recurrent_weights=np.zeros((12, 3)),
            biases=np.zeros(8),
            output_weights=np.zeros((4, 3)),
            output_bias=np.zeros(4),
        )
    assert zero_cell().state.h.shape == (3,)


def test_augmenting_twice_never_reuses_subject_ids():
    table = feature_table(reps=4)
    config = la.AugmentConfig(synthetic_subjects=1, length=3, seed=4, generator=la.GeneratorConfig(hidden_dim=3, epochs=2))
    first, _, _ = la.augment_features(table, config)
    second, _, _ = la.augment_features(table + first, config)
    assert {r.subject_id for r in first} == {3}
    assert {r.subject_id for r in second} == {4}
    keys = [r.key for r in table + first + second]
    assert len(keys) == len(set(keys))
    with pytest.raises(ArgumentError):
        la.augment_features(table, config, first_subject_id=2)
