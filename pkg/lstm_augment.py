"""
Synthetic feature generation with per-feature LSTM next-level predictors.

Each feature column owns an independent single-layer LSTM. Its training data
are the quantised level sequences of that feature, one sequence per
(subject, gesture) pair, ordered by repetition. The cell reads the one-hot
level at step t and is trained with cross-entropy on softmax(logits) to
predict the level at t+1, using full-batch gradient descent with
backpropagation through time. State is reset to zero at the start of every
sequence.

A synthetic subject is generated gesture by gesture and feature by feature:
reset the cell, prime it with the first level of a randomly chosen real
sequence of that gesture, then sample ``length`` levels autoregressively and
map them back to bin centres.

Gate order inside the stacked weight matrices is [input, forget, output,
candidate], each block of height H.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator
from scipy.special import expit, logsumexp, softmax

import quantizer as quant
from errors import ArgumentError, DataError
from logger_config import get_logger
from models import GESTURES, FeatureVector, Gesture, GestureLabel
from quantizer import QuantizedSeries, QuantizerModel

logger = get_logger(__name__)

PARAMETER_NAMES = ("input_weights", "recurrent_weights", "biases", "output_weights", "output_bias")
GATE_ORDER = ("input", "forget", "output", "candidate")


class GeneratorConfig(BaseModel):
    """
    LSTM generator hyperparameters.

    Attributes:
        hidden_dim (int): Hidden/cell state size H
        epochs (int): Full-batch gradient steps per feature
        learning_rate (float): Gradient-descent step size
        seed (int): Base seed; feature j uses seed + j
        init_scale (float): Parameters start uniform in [−init_scale, init_scale]
        sampling (str): "sample" draws from softmax, "argmax" takes the mode
        workers (int): Threads used to train features concurrently
    """
    model_config = ConfigDict(frozen=True)

    hidden_dim: int = Field(32, ge=1, description="LSTM hidden size")
    epochs: int = Field(200, ge=1, description="Training epochs per feature")
    learning_rate: float = Field(0.05, gt=0, description="Step size")
    seed: int = Field(0, ge=0, description="Base seed")
    init_scale: float = Field(0.08, gt=0, description="Uniform initialisation bound")
    sampling: Literal["sample", "argmax"] = Field("sample", description="Generation strategy")
    workers: int = Field(1, ge=1, description="Training threads")


class AugmentConfig(BaseModel):
    """Settings of the whole augmentation chain."""
    model_config = ConfigDict(frozen=True)

    levels: int = Field(quant.DEFAULT_LEVELS, ge=2, description="Quantisation levels")
    synthetic_subjects: int = Field(2, ge=0, description="Synthetic subjects to generate")
    length: int = Field(20, ge=1, description="Synthetic repetitions per gesture")
    seed: int = Field(0, ge=0, description="Generation seed; subject k uses seed + k")
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)


class LstmState(BaseModel):
    """Hidden and cell state (h, c), one row per sequence when batched."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    h: np.ndarray
    c: np.ndarray


def _zero_state(hidden_dim: int, batch: Optional[int] = None) -> LstmState:
    shape = (hidden_dim,) if batch is None else (batch, hidden_dim)
    return LstmState(h=np.zeros(shape), c=np.zeros(shape))


class LstmCell(BaseModel):
    """
    Parameters of one gated cell with its output projection, plus its current state.

    Attributes:
        input_weights (np.ndarray): (4H, L), gates stacked in GATE_ORDER
        recurrent_weights (np.ndarray): (4H, H)
        biases (np.ndarray): (4H,)
        output_weights (np.ndarray): (L, H) projection of h onto level logits
        output_bias (np.ndarray): (L,)
        state (LstmState): Current (h, c); zero when omitted, never serialised
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    input_weights: np.ndarray = Field(..., description="Input-to-gate weights")
    recurrent_weights: np.ndarray = Field(..., description="Hidden-to-gate weights")
    biases: np.ndarray = Field(..., description="Gate biases")
    output_weights: np.ndarray = Field(..., description="Hidden-to-logit weights")
    output_bias: np.ndarray = Field(..., description="Logit biases")
    state: LstmState = Field(..., exclude=True, description="Current hidden and cell state")

    @model_validator(mode="before")
    @classmethod
    def _zero_state_by_default(cls, data):
        if isinstance(data, dict) and data.get("state") is None and "recurrent_weights" in data:
            data = {**data, "state": _zero_state(np.shape(data["recurrent_weights"])[1])}
        return data

    @field_validator(*PARAMETER_NAMES, mode="before")
    @classmethod
    def _as_array(cls, value):
        return np.array(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check_shapes(self) -> "LstmCell":
        H, L = self.hidden_dim, self.levels
        expected = {
            "input_weights": (4 * H, L),
            "recurrent_weights": (4 * H, H),
            "biases": (4 * H,),
            "output_weights": (L, H),
            "output_bias": (L,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        return self

    @field_serializer(*PARAMETER_NAMES)
    def _dump_array(self, value: np.ndarray) -> list:
        return value.tolist()

    @property
    def hidden_dim(self) -> int:
        return self.recurrent_weights.shape[1]

    @property
    def levels(self) -> int:
        return self.input_weights.shape[1]

    def parameters(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def with_parameters(self, params: Dict[str, np.ndarray]) -> "LstmCell":
        return self.model_copy(update=params)

    def with_state(self, state: LstmState) -> "LstmCell":
        return self.model_copy(update={"state": state})


def init_cell(levels: int, hidden_dim: int, rng: np.random.Generator, scale: float = 0.08) -> LstmCell:
    """Cell with parameters drawn uniformly from [−scale, scale]."""
    def uniform(*shape):
        return rng.uniform(-scale, scale, size=shape)

    return LstmCell(
        input_weights=uniform(4 * hidden_dim, levels),
        recurrent_weights=uniform(4 * hidden_dim, hidden_dim),
        biases=uniform(4 * hidden_dim),
        output_weights=uniform(levels, hidden_dim),
        output_bias=uniform(levels),
    )


def _gates(cell: LstmCell, x: np.ndarray, h: np.ndarray):
    H = cell.hidden_dim
    z = x @ cell.input_weights.T + h @ cell.recurrent_weights.T + cell.biases
    i = expit(z[..., :H])
    f = expit(z[..., H:2 * H])
    o = expit(z[..., 2 * H:3 * H])
    g = np.tanh(z[..., 3 * H:])
    return i, f, o, g


def lstm_step(cell: LstmCell, x: np.ndarray) -> Tuple[LstmState, np.ndarray]:
    """
    One gated update from the cell's current state.

    Args:
        cell: Cell holding parameters and state (h, c)
        x: One-hot input of length L

    Returns:
        (new state, logits of length L); the cell itself is not modified

    Raises:
        ArgumentError: If x does not have length L
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cell.levels,):
        raise ArgumentError(f"input must have shape ({cell.levels},), got {x.shape}")
    i, f, o, g = _gates(cell, x, cell.state.h)
    c = f * cell.state.c + i * g
    h = o * np.tanh(c)
    logits = cell.output_weights @ h + cell.output_bias
    return LstmState(h=h, c=c), logits


def reset_state(cell: LstmCell) -> LstmCell:
    """Same parameters, h = 0 and c = 0."""
    return cell.with_state(_zero_state(cell.hidden_dim))


def loss_and_gradients(cell: LstmCell, sequences: np.ndarray) -> Tuple[float, Dict[str, np.ndarray], int]:
    """
    Summed next-level cross-entropy of equal-length sequences and its BPTT gradient.

    Every sequence starts from a zero state.

    Args:
        cell: Cell parameters (its state is ignored)
        sequences: Integer levels of shape (B, T), T ≥ 2

    Returns:
        (summed loss, gradient per parameter name, number of predictions)
    """
    sequences = np.asarray(sequences, dtype=np.int64)
    B, T = sequences.shape
    H, L = cell.hidden_dim, cell.levels
    eye = np.eye(L)

    h, c = np.zeros((B, H)), np.zeros((B, H))
    cache = []
    loss = 0.0
    for t in range(T - 1):
        x = eye[sequences[:, t]]
        i, f, o, g = _gates(cell, x, h)
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        logits = h_new @ cell.output_weights.T + cell.output_bias
        targets = sequences[:, t + 1]
        log_norm = logsumexp(logits, axis=1)
        loss += float(np.sum(log_norm - logits[np.arange(B), targets]))
        probs = softmax(logits, axis=1)
        cache.append((x, h, c, i, f, o, g, tanh_c, h_new, probs, targets))
        h, c = h_new, c_new

    grads = {name: np.zeros_like(value) for name, value in cell.parameters().items()}
    dh_next, dc_next = np.zeros((B, H)), np.zeros((B, H))
    for x, h_prev, c_prev, i, f, o, g, tanh_c, h_t, probs, targets in reversed(cache):
        dlogits = probs.copy()
        dlogits[np.arange(B), targets] -= 1.0
        grads["output_weights"] += dlogits.T @ h_t
        grads["output_bias"] += dlogits.sum(axis=0)
        dh = dlogits @ cell.output_weights + dh_next
        do = dh * tanh_c
        dc = dh * o * (1.0 - tanh_c ** 2) + dc_next
        di, dg, df = dc * g, dc * i, dc * c_prev
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g ** 2)], axis=1)
        grads["input_weights"] += dz.T @ x
        grads["recurrent_weights"] += dz.T @ h_prev
        grads["biases"] += dz.sum(axis=0)
        dh_next = dz @ cell.recurrent_weights
        dc_next = dc * f
    return loss, grads, B * (T - 1)


def _group_by_length(sequences: Sequence[Sequence[int]]) -> List[np.ndarray]:
    by_length: Dict[int, List[Sequence[int]]] = {}
    for seq in sequences:
        by_length.setdefault(len(seq), []).append(seq)
    return [np.array(by_length[n], dtype=np.int64) for n in sorted(by_length)]


def _epoch(cell: LstmCell, batches: List[np.ndarray]) -> Tuple[float, Dict[str, np.ndarray]]:
    """Mean loss and mean gradient over every prediction of every batch."""
    total_loss, total_count = 0.0, 0
    total_grads = {name: np.zeros_like(v) for name, v in cell.parameters().items()}
    for batch in batches:
        loss, grads, count = loss_and_gradients(cell, batch)
        total_loss += loss
        total_count += count
        for name in total_grads:
            total_grads[name] += grads[name]
    return total_loss / total_count, {name: g / total_count for name, g in total_grads.items()}


def train_cell(
    sequences: Sequence[Sequence[int]], levels: int, config: GeneratorConfig, seed: int
) -> Tuple[LstmCell, List[float]]:
    """
    Fit one cell to a set of level sequences.

    Returns:
        (trained cell in reset state, mean loss after 0..epochs updates); the
        last entry is the loss of the returned parameters
    """
    rng = np.random.default_rng(seed)
    cell = init_cell(levels, config.hidden_dim, rng, config.init_scale)
    batches = _group_by_length(sequences)
    losses: List[float] = []
    for _ in range(config.epochs):
        loss, grads = _epoch(cell, batches)
        losses.append(loss)
        cell = cell.with_parameters({
            name: value - config.learning_rate * grads[name] for name, value in cell.parameters().items()
        })
    losses.append(_epoch(cell, batches)[0])
    return reset_state(cell), losses


class GeneratorModel(BaseModel):
    """
    One trained cell per feature index, all on the same level grid.

    Attributes:
        levels (int): Size L of the level grid
        gate_order (List[str]): Order of the gate blocks in the stacked weights
        config (GeneratorConfig): Hyperparameters the cells were trained with
        final_losses (Dict[int, float]): Mean training loss of each final cell
        cells (Dict[int, LstmCell]): Trained cell per feature index
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    levels: int = Field(..., ge=2, description="Quantisation levels")
    gate_order: List[str] = Field(default_factory=lambda: list(GATE_ORDER), description="Gate block order")
    config: GeneratorConfig
    final_losses: Dict[int, float] = Field(default_factory=dict, description="Final mean loss per feature")
    cells: Dict[int, LstmCell] = Field(..., description="Cell per feature index")

    @model_validator(mode="after")
    def _check_cells(self) -> "GeneratorModel":
        if self.gate_order != list(GATE_ORDER):
            raise ValueError(f"unsupported gate order {self.gate_order}")
        for j, cell in self.cells.items():
            if cell.levels != self.levels or cell.hidden_dim != self.config.hidden_dim:
                raise ValueError(f"cell {j} does not match levels {self.levels} and hidden_dim {self.config.hidden_dim}")
        return self

    @property
    def hidden_dim(self) -> int:
        return self.config.hidden_dim

    @property
    def dimension(self) -> int:
        return len(self.cells)


def train_generator(series: Sequence[QuantizedSeries], config: GeneratorConfig, levels: int = quant.DEFAULT_LEVELS) -> GeneratorModel:
    """
    Train one cell per feature index.

    Args:
        series: Level sequences from :func:`quantizer.to_series`
        config: Generator hyperparameters
        levels: Size L of the level grid

    Returns:
        GeneratorModel with per-feature cells and final mean losses

    Raises:
        DataError: If a series is shorter than 2 or holds a level outside the grid
    """
    by_feature: Dict[int, List[Tuple[int, ...]]] = {}
    for s in series:
        if len(s.levels) < 2:
            raise DataError(
                f"series for subject {s.subject_id}, gesture {s.gesture_id.value}, feature {s.feature_index} "
                f"has {len(s.levels)} levels; need ≥ 2"
            )
        if min(s.levels) < 0 or max(s.levels) >= levels:
            raise DataError(f"series for feature {s.feature_index} has levels outside [0, {levels - 1}]")
        by_feature.setdefault(s.feature_index, []).append(s.levels)
    if not by_feature:
        raise DataError("no series to train on")

    started = time.time()
    indices = sorted(by_feature)

    def fit_one(j: int) -> Tuple[LstmCell, List[float]]:
        return train_cell(by_feature[j], levels, config, config.seed + j)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(fit_one, indices))
    else:
        results = [fit_one(j) for j in indices]

    cells = {j: cell for j, (cell, _) in zip(indices, results)}
    final_losses = {j: losses[-1] for j, (_, losses) in zip(indices, results)}
    logger.info("Generator trained", extra={
        "features": len(indices),
        "epochs": config.epochs,
        "mean_final_loss": float(np.mean(list(final_losses.values()))),
        "elapsed_seconds": time.time() - started,
    })
    return GeneratorModel(levels=levels, config=config, cells=cells, final_losses=final_losses)


def _next_level(logits: np.ndarray, sampling: str, rng: np.random.Generator) -> int:
    if sampling == "argmax":
        return int(np.argmax(logits))
    cumulative = np.cumsum(softmax(logits))
    u = rng.random() * cumulative[-1]
    return int(min(np.searchsorted(cumulative, u, side="right"), len(cumulative) - 1))


def generate_subject(
    model: GeneratorModel,
    quantizer: QuantizerModel,
    template: Sequence[FeatureVector],
    new_subject_id: int,
    length: int,
    seed: int,
    gestures: Optional[Sequence[Gesture]] = None,
) -> List[FeatureVector]:
    """
    Generate the feature table of one synthetic subject.

    Args:
        model: Trained generator
        quantizer: Grid the generator was trained on
        template: Real feature table supplying priming sequences
        new_subject_id: Subject id of the generated rows
        length: Repetitions per gesture
        seed: Sampling seed
        gestures: Gestures to generate; defaults to every gesture in the template

    Returns:
        len(gestures) × length synthetic FeatureVectors, gesture-major order

    Raises:
        ArgumentError: On a grid mismatch, length < 1 or a gesture missing from the template
    """
    if length < 1:
        raise ArgumentError(f"length must be ≥ 1, got {length}")
    if model.levels != quantizer.levels or model.dimension != quantizer.dimension:
        raise ArgumentError("generator and quantizer grids differ")

    real = [v for v in template if not v.synthetic]
    primers: Dict[Tuple[Gesture, int], List[QuantizedSeries]] = {}
    for s in quant.to_series(real, quantizer):
        primers.setdefault(s.key, []).append(s)
    available = [g for g in GESTURES if (g, 0) in primers]
    requested = list(gestures) if gestures is not None else available
    for gesture in requested:
        if gesture not in available:
            raise ArgumentError(f"gesture {Gesture(gesture).value} has no template series")

    rng = np.random.default_rng(seed)
    eye = np.eye(model.levels)
    vectors: List[FeatureVector] = []
    for gesture in requested:
        level_matrix = np.empty((length, model.dimension), dtype=np.int64)
        for j in range(model.dimension):
            candidates = primers[(gesture, j)]
            level = candidates[int(rng.integers(len(candidates)))].levels[0]
            cell = reset_state(model.cells[j])
            for t in range(length):
                state, logits = lstm_step(cell, eye[level])
                cell = cell.with_state(state)
                level = _next_level(logits, model.config.sampling, rng)
                level_matrix[t, j] = level
        for t in range(length):
            vectors.append(FeatureVector(
                values=quant.dequantize_vector(level_matrix[t], quantizer),
                label=GestureLabel.of(gesture),
                subject_id=new_subject_id,
                repetition_index=t,
                synthetic=True,
            ))
    logger.info("Synthetic subject generated", extra={
        "subject": new_subject_id, "gestures": len(requested), "length": length, "seed": seed
    })
    return vectors


def augment_features(
    rows: Sequence[FeatureVector], config: AugmentConfig, first_subject_id: Optional[int] = None
) -> Tuple[List[FeatureVector], QuantizerModel, Optional[GeneratorModel]]:
    """
    Run the full augmentation chain on the real rows of a feature table.

    Synthetic subject k (0-based) gets id first_subject_id + k and seed
    config.seed + k. The first id defaults to one past the largest subject
    id in ``rows``, synthetic rows included, so re-augmenting an augmented
    table never reuses an id.

    Returns:
        (synthetic rows, fitted quantizer, trained generator or None when no subjects are requested)

    Raises:
        DataError: If ``rows`` holds no real row
    """
    real = [v for v in rows if not v.synthetic]
    if not real:
        raise DataError("augmentation needs at least one real row")
    grid = quant.fit(real, config.levels)
    if config.synthetic_subjects == 0:
        return [], grid, None
    generator = train_generator(quant.to_series(real, grid), config.generator, config.levels)
    first_id = max(v.subject_id for v in rows) + 1 if first_subject_id is None else first_subject_id
    taken = {v.subject_id for v in rows}
    if taken.intersection(range(first_id, first_id + config.synthetic_subjects)):
        raise ArgumentError(f"synthetic subject ids from {first_id} collide with existing subjects")
    synthetic: List[FeatureVector] = []
    for k in range(config.synthetic_subjects):
        synthetic.extend(generate_subject(generator, grid, real, first_id + k, config.length, config.seed + k))
    return synthetic, grid, generator
