"""
Dense sigmoid network trained by full-batch gradient descent.

Layer activations are sigmoids, including the K output units, and the cost
is the one-vs-all cross-entropy

    J = −(1/m) Σ_i Σ_k [y log h + (1 − y) log(1 − h)] + (λ/2) Σ Θ²

with the sum of squares taken over non-bias weights and h clamped into
[1e−12, 1 − 1e−12]. Its gradient per weight matrix is
D = (1/m) Δ + λ Θ (bias column unregularised), where Δ accumulates
δ^(z+1) [1, a^(z)]ᵀ over the examples.

Weight matrix z has shape (s_{z+1}, s_z + 1); column 0 multiplies the bias
unit.
"""

import math
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator
from scipy.special import expit

from errors import ArgumentError, DivergenceError
from logger_config import get_logger
from models import IterationRecord, TrainConfig, TrainingReport

logger = get_logger(__name__)

LOG_CLAMP = 1e-12
HIDDEN_LAYERS = 4
HIDDEN_WIDTH_RATIO = 1.5
INIT_SCHEME = "uniform(-sqrt(6/(fan_in+fan_out)), sqrt(6/(fan_in+fan_out)))"


def sigmoid(x):
    """Logistic function 1 / (1 + e^(−x)), elementwise."""
    return expit(x)


def hidden_width(d: int) -> int:
    """round(1.5·d), halves rounded up."""
    return int(math.floor(HIDDEN_WIDTH_RATIO * d + 0.5))


def topology(d: int, k: int) -> List[int]:
    """Layer sizes [d, h, h, h, h, K] with h = hidden_width(d)."""
    return [d] + [hidden_width(d)] * HIDDEN_LAYERS + [k]


class Network(BaseModel):
    """
    Layered dense-network parameters.

    Attributes:
        layer_sizes (List[int]): Units per layer, input first
        init_seed (Optional[int]): Initialisation seed, if known
        init_scheme (str): Distribution the starting weights were drawn from
        weights (List[np.ndarray]): One (s_{z+1}, s_z + 1) matrix per transition, bias in column 0
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    layer_sizes: List[int] = Field(..., min_length=2, description="Units per layer, input first")
    init_seed: Optional[int] = Field(None, description="Initialisation seed")
    init_scheme: str = Field(INIT_SCHEME, description="Initial weight distribution")
    weights: List[np.ndarray] = Field(..., description="Row-major weight matrix per layer transition")

    @field_validator("weights", mode="before")
    @classmethod
    def _as_matrices(cls, value):
        return [np.array(theta, dtype=np.float64) for theta in value]

    @model_validator(mode="after")
    def _check_shapes(self) -> "Network":
        if len(self.weights) != len(self.layer_sizes) - 1:
            raise ValueError("need one weight matrix per layer transition")
        for z, theta in enumerate(self.weights):
            expected = (self.layer_sizes[z + 1], self.layer_sizes[z] + 1)
            if theta.shape != expected:
                raise ValueError(f"weight matrix {z} has shape {theta.shape}, expected {expected}")
        return self

    @field_serializer("weights")
    def _dump_weights(self, weights: List[np.ndarray]) -> List[list]:
        return [theta.tolist() for theta in weights]

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]


class LabeledMatrix(BaseModel):
    """Inputs (m × d) with one-hot targets (m × K)."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    inputs: np.ndarray = Field(..., description="m × d input rows")
    targets: np.ndarray = Field(..., description="m × K one-hot targets")

    @field_validator("inputs", "targets", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        return np.atleast_2d(np.asarray(value, dtype=np.float64))

    @model_validator(mode="after")
    def _check_targets(self) -> "LabeledMatrix":
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(f"{self.inputs.shape[0]} inputs but {self.targets.shape[0]} targets")
        if not np.allclose(self.targets.sum(axis=1), 1.0):
            raise ValueError("every target row must be one-hot")
        return self

    @property
    def m(self) -> int:
        return self.inputs.shape[0]

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.targets, axis=1)

    @classmethod
    def from_labels(cls, inputs: np.ndarray, labels: Sequence[int], k: int) -> "LabeledMatrix":
        return cls(inputs=inputs, targets=np.eye(k)[np.asarray(labels, dtype=np.int64)])


def init_weights(layer_sizes: Sequence[int], seed: int) -> Network:
    """
    Uniform ±sqrt(6/(fan_in + fan_out)) initialisation.

    Raises:
        ArgumentError: Fewer than 2 layers or a size below 1
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ArgumentError(f"invalid layer sizes {list(layer_sizes)}")
    rng = np.random.default_rng(seed)
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        epsilon = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-epsilon, epsilon, size=(fan_out, fan_in + 1)))
    return Network(layer_sizes=sizes, init_seed=seed, weights=weights)


def _with_bias(a: np.ndarray) -> np.ndarray:
    if a.ndim == 1:
        return np.concatenate(([1.0], a))
    return np.hstack([np.ones((a.shape[0], 1)), a])


def forward(net: Network, inputs: np.ndarray) -> List[np.ndarray]:
    """
    Feed-forward pass.

    Args:
        net: Network
        inputs: One vector of length d or a matrix of m rows

    Returns:
        Activations a^(1)..a^(L) without bias units; the last entry is h_Θ(x)

    Raises:
        ArgumentError: If the input width is not d
    """
    a = np.asarray(inputs, dtype=np.float64)
    if a.shape[-1] != net.input_dim:
        raise ArgumentError(f"input has {a.shape[-1]} features, network expects {net.input_dim}")
    activations = [a]
    for theta in net.weights:
        a = sigmoid(_with_bias(a) @ theta.T)
        activations.append(a)
    return activations


def _cross_entropy(outputs: np.ndarray, targets: np.ndarray) -> float:
    h = np.clip(outputs, LOG_CLAMP, 1.0 - LOG_CLAMP)
    m = targets.shape[0]
    return float(-np.sum(targets * np.log(h) + (1.0 - targets) * np.log(1.0 - h)) / m)


def _penalty(net: Network, l2_lambda: float) -> float:
    if l2_lambda == 0:
        return 0.0
    return 0.5 * l2_lambda * sum(float(np.sum(theta[:, 1:] ** 2)) for theta in net.weights)


def cost(net: Network, data: LabeledMatrix, l2_lambda: float = 0.0) -> float:
    """Clamped one-vs-all cross-entropy plus the L2 penalty."""
    if data.m < 1:
        raise ArgumentError("cost needs at least one example")
    outputs = forward(net, data.inputs)[-1]
    return _cross_entropy(outputs, data.targets) + _penalty(net, l2_lambda)


def output_delta(a_out: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Output-layer error a − y."""
    a_out, y = np.asarray(a_out, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if a_out.shape != y.shape:
        raise ArgumentError(f"output shape {a_out.shape} does not match target shape {y.shape}")
    return a_out - y


def hidden_delta(delta_next: np.ndarray, theta: np.ndarray, a: np.ndarray) -> np.ndarray:
    """
    Back-propagated error (Θ without bias column)ᵀ δ^(z+1) ⊙ a ⊙ (1 − a).

    Works on single vectors or row-stacked batches.
    """
    delta_next, a = np.asarray(delta_next, dtype=np.float64), np.asarray(a, dtype=np.float64)
    if theta.shape[0] != delta_next.shape[-1] or theta.shape[1] - 1 != a.shape[-1]:
        raise ArgumentError(
            f"theta {theta.shape} incompatible with delta {delta_next.shape} and activation {a.shape}"
        )
    return (delta_next @ theta[:, 1:]) * a * (1.0 - a)


def _backprop(net: Network, activations: List[np.ndarray], targets: np.ndarray, l2_lambda: float) -> List[np.ndarray]:
    m = targets.shape[0]
    gradients: List[np.ndarray] = [None] * len(net.weights)
    delta = output_delta(activations[-1], targets)
    for z in range(len(net.weights) - 1, -1, -1):
        accumulated = delta.T @ _with_bias(activations[z])
        gradient = accumulated / m
        gradient[:, 1:] += l2_lambda * net.weights[z][:, 1:]
        gradients[z] = gradient
        if z > 0:
            delta = hidden_delta(delta, net.weights[z], activations[z])
    return gradients


def accumulate_gradients(net: Network, data: LabeledMatrix, l2_lambda: float = 0.0) -> List[np.ndarray]:
    """
    Gradient D of :func:`cost`, one matrix per weight matrix.

    Δ sums δ^(z+1) [1, a^(z)]ᵀ over all m examples; D = Δ/m + λΘ off the
    bias column and D = Δ/m on it.
    """
    if data.m < 1:
        raise ArgumentError("gradients need at least one example")
    return _backprop(net, forward(net, data.inputs), data.targets, l2_lambda)


def accuracy(outputs: np.ndarray, labels: np.ndarray) -> float:
    """Percentage of rows whose argmax equals the label."""
    return 100.0 * float(np.mean(np.argmax(outputs, axis=1) == labels))


def predict(net: Network, inputs: np.ndarray) -> Tuple[int, np.ndarray]:
    """
    Class with the largest output (lowest index on ties) and the output vector.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 1:
        raise ArgumentError(f"predict expects one input vector, got shape {x.shape}")
    outputs = forward(net, x)[-1]
    return int(np.argmax(outputs)), outputs


def train(
    net: Network,
    data: LabeledMatrix,
    config: TrainConfig,
    monitor: Optional[LabeledMatrix] = None,
    name: str = "network",
) -> Tuple[Network, TrainingReport]:
    """
    Full-batch gradient descent for a fixed iteration budget.

    Each iteration applies Θ ← Θ − α·D once and then records the cost and
    training accuracy of the updated network (and monitor accuracy when a
    held-out set is given). With ``config.tolerance`` set, training stops
    after the first iteration whose cost change is below it.

    Args:
        net: Initial network, left untouched
        data: Training set
        config: Iterations, learning rate, λ, tolerance
        monitor: Optional held-out set for test accuracy
        name: Network identity stored in the report

    Returns:
        (trained copy, TrainingReport)

    Raises:
        DivergenceError: When the cost or weights become non-finite
    """
    if data.m < 1:
        raise ArgumentError("training set is empty")
    started = time.time()
    trained = net.model_copy(deep=True)
    activations = forward(trained, data.inputs)
    previous = _cross_entropy(activations[-1], data.targets) + _penalty(trained, config.l2_lambda)
    records: List[IterationRecord] = []

    for iteration in range(1, config.iterations + 1):
        gradients = _backprop(trained, activations, data.targets, config.l2_lambda)
        for theta, gradient in zip(trained.weights, gradients):
            theta -= config.learning_rate * gradient
        activations = forward(trained, data.inputs)
        current = _cross_entropy(activations[-1], data.targets) + _penalty(trained, config.l2_lambda)
        if not math.isfinite(current) or not all(np.all(np.isfinite(t)) for t in trained.weights):
            logger.error("Training diverged", extra={"network": name, "iteration": iteration})
            raise DivergenceError(
                f"network {name}: non-finite cost at iteration {iteration}", iteration=iteration, network=name
            )
        test_ca = None
        if monitor is not None and monitor.m > 0:
            test_ca = accuracy(forward(trained, monitor.inputs)[-1], monitor.labels)
        records.append(IterationRecord(
            iteration=iteration,
            cost=current,
            train_ca=accuracy(activations[-1], data.labels),
            test_ca=test_ca,
        ))
        if config.tolerance is not None and abs(previous - current) < config.tolerance:
            break
        previous = current

    report = TrainingReport(network=name, records=records, elapsed_seconds=time.time() - started)
    logger.info("Network trained", extra={
        "network": name,
        "layer_sizes": trained.layer_sizes,
        "iterations": len(records),
        "final_cost": report.final.cost,
        "final_train_ca": report.final.train_ca,
        "final_test_ca": report.final.test_ca,
    })
    return trained, report
