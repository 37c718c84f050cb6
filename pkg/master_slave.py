"""
Two-stage gesture classifier and the flat 10-class baseline.

The master network decides Static vs Dynamic; the slave of the predicted
type then picks one of its five gestures. Both architectures see the same
standardised inputs: a StandardScaler fitted on the training rows of a cell
is stored with the model and applied before every network.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Annotated, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, TypeAdapter, model_validator
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

import dnn
from dnn import LabeledMatrix, Network
from errors import ArgumentError, DataError
from logger_config import get_logger
from lstm_augment import AugmentConfig, augment_features
from models import (
    DYNAMIC_GESTURES,
    GESTURES,
    STATIC_GESTURES,
    Architecture,
    EvaluationRow,
    FeatureConfig,
    FeatureVector,
    Gesture,
    GestureType,
    SplitConfig,
    SubjectSplit,
    TrainConfig,
    TrainingReport,
)

logger = get_logger(__name__)

MASTER = "master"
SLAVE_STATIC = "slave_static"
SLAVE_DYNAMIC = "slave_dynamic"
CONVENTIONAL = "conventional"
REPORT_SUFFIX = "_report.csv"

# Init seed of each network is TrainConfig.seed plus its offset.
SEED_OFFSETS = {MASTER: 0, SLAVE_STATIC: 1, SLAVE_DYNAMIC: 2, CONVENTIONAL: 3}

SLAVE_GESTURES = {GestureType.STATIC: STATIC_GESTURES, GestureType.DYNAMIC: DYNAMIC_GESTURES}


def infer_feature_config(dimension: int) -> Optional[FeatureConfig]:
    """FeatureConfig whose dimension equals ``dimension``, if one exists."""
    if dimension % 3 or dimension // 3 <= 8:
        return None
    return FeatureConfig(ar_order=dimension // 3 - 8)


def scaler_to_dict(scaler: StandardScaler) -> dict:
    return {
        "mean": scaler.mean_.tolist(),
        "scale": scaler.scale_.tolist(),
        "var": scaler.var_.tolist(),
        "n_samples_seen": int(np.max(scaler.n_samples_seen_)),
    }


def scaler_from_dict(data: dict) -> StandardScaler:
    scaler = StandardScaler()
    scaler.mean_ = np.array(data["mean"], dtype=np.float64)
    scaler.scale_ = np.array(data["scale"], dtype=np.float64)
    scaler.var_ = np.array(data["var"], dtype=np.float64)
    scaler.n_features_in_ = len(scaler.mean_)
    scaler.n_samples_seen_ = int(data["n_samples_seen"])
    return scaler


def _scaler_input(value):
    if not isinstance(value, dict):
        return value
    try:
        return scaler_from_dict(value)
    except (KeyError, TypeError) as e:
        raise ValueError(f"invalid scaler state: {e!r}") from e


FittedScaler = Annotated[StandardScaler, BeforeValidator(_scaler_input), PlainSerializer(scaler_to_dict, return_type=dict)]


def _standardize(scaler: StandardScaler, inputs: np.ndarray) -> np.ndarray:
    return scaler.transform(np.atleast_2d(inputs))


def report_file(name: str) -> str:
    """Report file of a network, relative to its model directory."""
    return f"{name}{REPORT_SUFFIX}"


class MasterSlaveModel(BaseModel):
    """
    Master (K=2) routing to a Static slave and a Dynamic slave (K=5 each).

    Slave output k maps to the k-th gesture of its type in class order.

    Attributes:
        arch (str): Always "MasterSlave"; selects the architecture when loading
        feature_config (Optional[FeatureConfig]): Feature layout the inputs follow
        train_config (Optional[TrainConfig]): Hyperparameters the networks were trained with
        report_files (Dict[str, str]): Training report of each network, relative to the model file
        scaler (StandardScaler): Standardisation fitted on the training rows
        master, slave_static, slave_dynamic (Network): The three networks
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    arch: Literal["MasterSlave"] = Architecture.MASTER_SLAVE.value
    feature_config: Optional[FeatureConfig] = Field(None, description="Feature layout of the inputs")
    train_config: Optional[TrainConfig] = Field(None, description="Training hyperparameters")
    report_files: Dict[str, str] = Field(default_factory=dict, description="Report file per network")
    scaler: FittedScaler = Field(..., description="Input standardisation")
    master: Network
    slave_static: Network
    slave_dynamic: Network

    @model_validator(mode="after")
    def _check_networks(self) -> "MasterSlaveModel":
        dims = {self.master.input_dim, self.slave_static.input_dim, self.slave_dynamic.input_dim}
        if len(dims) != 1:
            raise ValueError(f"master and slaves disagree on input dimension: {sorted(dims)}")
        if self.master.output_dim != 2:
            raise ValueError(f"master needs 2 outputs, has {self.master.output_dim}")
        for name, net in ((SLAVE_STATIC, self.slave_static), (SLAVE_DYNAMIC, self.slave_dynamic)):
            if net.output_dim != 5:
                raise ValueError(f"{name} needs 5 outputs, has {net.output_dim}")
        return self

    @property
    def input_dim(self) -> int:
        return self.master.input_dim

    def slave(self, gesture_type: GestureType) -> Network:
        return self.slave_static if gesture_type is GestureType.STATIC else self.slave_dynamic

    def networks(self) -> Dict[str, Network]:
        return {MASTER: self.master, SLAVE_STATIC: self.slave_static, SLAVE_DYNAMIC: self.slave_dynamic}


class ConventionalModel(BaseModel):
    """Flat 10-class network over the standardised inputs; fields as in MasterSlaveModel."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    arch: Literal["Conventional"] = Architecture.CONVENTIONAL.value
    feature_config: Optional[FeatureConfig] = None
    train_config: Optional[TrainConfig] = None
    report_files: Dict[str, str] = Field(default_factory=dict)
    scaler: FittedScaler
    network: Network

    @model_validator(mode="after")
    def _check_network(self) -> "ConventionalModel":
        if self.network.output_dim != len(GESTURES):
            raise ValueError(f"conventional network needs {len(GESTURES)} outputs, has {self.network.output_dim}")
        return self

    @property
    def input_dim(self) -> int:
        return self.network.input_dim

    def networks(self) -> Dict[str, Network]:
        return {CONVENTIONAL: self.network}


Model = Annotated[Union[MasterSlaveModel, ConventionalModel], Field(discriminator="arch")]
MODEL_ADAPTER: TypeAdapter = TypeAdapter(Model)


class SequentialPrediction(BaseModel):
    """Outcome of routing one input through master and slave."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    gesture_id: Gesture
    master_type: GestureType
    master_outputs: np.ndarray
    slave_outputs: np.ndarray


class RowOutcome(BaseModel):
    """Per-row correctness of each stage for one test vector."""
    model_config = ConfigDict(frozen=True)

    key: Tuple[int, int, int]
    master_correct: bool
    slave_correct: bool
    end_to_end_correct: bool


def _canonical(vectors: Sequence[FeatureVector]) -> List[FeatureVector]:
    return sorted(vectors, key=lambda v: (v.key, v.synthetic))


def _matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    if not vectors:
        raise ArgumentError("no feature vectors given")
    dims = {v.dimension for v in vectors}
    if len(dims) != 1:
        raise ArgumentError(f"feature vectors have mixed dimensions {sorted(dims)}")
    return np.vstack([v.values for v in vectors])


def _check_coverage(vectors: Sequence[FeatureVector], gestures: Sequence[Gesture]):
    present = {v.label.gesture_id for v in vectors}
    for gesture_type in GestureType:
        wanted = [g for g in gestures if g.gesture_type is gesture_type]
        if wanted and not present.intersection(wanted):
            raise DataError(f"training set has no {gesture_type.value} examples")
    for gesture in gestures:
        if gesture not in present:
            raise DataError(f"training set has no examples of gesture {gesture.value}")


def _fit_scaler(vectors: Sequence[FeatureVector]) -> StandardScaler:
    return StandardScaler().fit(_matrix(vectors))


def _master_targets(vectors: Sequence[FeatureVector]) -> List[int]:
    return [v.label.gesture_type.class_index for v in vectors]


def _slave_targets(vectors: Sequence[FeatureVector], gesture_type: GestureType) -> List[int]:
    order = SLAVE_GESTURES[gesture_type]
    return [order.index(v.label.gesture_id) for v in vectors]


def _labeled(scaled: np.ndarray, labels: Sequence[int], k: int) -> LabeledMatrix:
    return LabeledMatrix.from_labels(scaled, labels, k)


def _train_network(
    name: str, d: int, k: int, data: LabeledMatrix, config: TrainConfig, monitor: Optional[LabeledMatrix]
) -> Tuple[Network, TrainingReport]:
    net = dnn.init_weights(dnn.topology(d, k), config.seed + SEED_OFFSETS[name])
    return dnn.train(net, data, config, monitor=monitor, name=name)


def _run_jobs(jobs: Dict[str, tuple], workers: int) -> Dict[str, Tuple[Network, TrainingReport]]:
    names = list(jobs)
    if workers > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(names))) as pool:
            results = list(pool.map(lambda n: _train_network(n, *jobs[n]), names))
    else:
        results = [_train_network(n, *jobs[n]) for n in names]
    return dict(zip(names, results))


def train_master_slave(
    train: Sequence[FeatureVector],
    config: TrainConfig,
    monitor: Optional[Sequence[FeatureVector]] = None,
    feature_config: Optional[FeatureConfig] = None,
    workers: int = 1,
) -> Tuple[MasterSlaveModel, Dict[str, TrainingReport]]:
    """
    Train the master on all rows and each slave on the rows of its type.

    Rows are put in (subject, gesture, repetition) order first, so any
    permutation of ``train`` yields the same model.

    Args:
        train: Training rows covering all ten gestures
        config: Shared training hyperparameters
        monitor: Optional held-out rows; fills the test_ca report column
        feature_config: Stored with the model; inferred from d when omitted
        workers: Threads for training the three networks side by side

    Returns:
        (model, reports keyed by "master", "slave_static", "slave_dynamic")

    Raises:
        DataError: If a gesture type or gesture has no training example
    """
    rows = _canonical(train)
    _check_coverage(rows, GESTURES)
    scaler = _fit_scaler(rows)
    scaled = _standardize(scaler, _matrix(rows))
    d = scaled.shape[1]

    held_out = _canonical(monitor) if monitor else []
    held_scaled = _standardize(scaler, _matrix(held_out)) if held_out else None

    def subset(vectors, matrix, gesture_type):
        mask = np.array([v.label.gesture_type is gesture_type for v in vectors], dtype=bool)
        return [v for v, keep in zip(vectors, mask) if keep], matrix[mask]

    def monitor_for(gesture_type=None):
        if held_scaled is None:
            return None
        if gesture_type is None:
            return _labeled(held_scaled, _master_targets(held_out), 2)
        vectors, matrix = subset(held_out, held_scaled, gesture_type)
        return _labeled(matrix, _slave_targets(vectors, gesture_type), 5) if vectors else None

    jobs = {MASTER: (d, 2, _labeled(scaled, _master_targets(rows), 2), config, monitor_for())}
    for name, gesture_type in ((SLAVE_STATIC, GestureType.STATIC), (SLAVE_DYNAMIC, GestureType.DYNAMIC)):
        vectors, matrix = subset(rows, scaled, gesture_type)
        jobs[name] = (d, 5, _labeled(matrix, _slave_targets(vectors, gesture_type), 5), config, monitor_for(gesture_type))

    trained = _run_jobs(jobs, workers)
    model = MasterSlaveModel(
        feature_config=feature_config or infer_feature_config(d),
        train_config=config,
        report_files={name: report_file(name) for name in trained},
        scaler=scaler,
        master=trained[MASTER][0],
        slave_static=trained[SLAVE_STATIC][0],
        slave_dynamic=trained[SLAVE_DYNAMIC][0],
    )
    return model, {name: report for name, (_, report) in trained.items()}


def train_conventional(
    train: Sequence[FeatureVector],
    config: TrainConfig,
    monitor: Optional[Sequence[FeatureVector]] = None,
    feature_config: Optional[FeatureConfig] = None,
) -> Tuple[ConventionalModel, TrainingReport]:
    """
    Train the single 10-class baseline on the same standardised rows.

    Raises:
        DataError: If a gesture has no training example
    """
    rows = _canonical(train)
    _check_coverage(rows, GESTURES)
    scaler = _fit_scaler(rows)
    scaled = _standardize(scaler, _matrix(rows))
    d = scaled.shape[1]
    targets = [v.label.gesture_id.class_index for v in rows]

    watch = None
    if monitor:
        held_out = _canonical(monitor)
        watch = _labeled(
            _standardize(scaler, _matrix(held_out)),
            [v.label.gesture_id.class_index for v in held_out],
            len(GESTURES),
        )
    net, report = _train_network(CONVENTIONAL, d, len(GESTURES), _labeled(scaled, targets, len(GESTURES)), config, watch)
    model = ConventionalModel(
        feature_config=feature_config or infer_feature_config(d),
        train_config=config,
        report_files={CONVENTIONAL: report_file(CONVENTIONAL)},
        scaler=scaler,
        network=net,
    )
    return model, report


def _check_input(model: Model, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.input_dim:
        raise ArgumentError(f"input has shape {x.shape}, model expects ({model.input_dim},)")
    return x


def predict_sequential(model: MasterSlaveModel, inputs) -> SequentialPrediction:
    """
    Route one raw feature vector through the master and the slave it selects.

    Only the selected slave is evaluated.

    Raises:
        ArgumentError: If the input length is not d
    """
    x = _standardize(model.scaler, _check_input(model, inputs))[0]
    type_index, master_outputs = dnn.predict(model.master, x)
    gesture_type = list(GestureType)[type_index]
    slave_index, slave_outputs = dnn.predict(model.slave(gesture_type), x)
    return SequentialPrediction(
        gesture_id=SLAVE_GESTURES[gesture_type][slave_index],
        master_type=gesture_type,
        master_outputs=master_outputs,
        slave_outputs=slave_outputs,
    )


def predict_conventional(model: ConventionalModel, inputs) -> Tuple[Gesture, np.ndarray]:
    x = _standardize(model.scaler, _check_input(model, inputs))[0]
    index, outputs = dnn.predict(model.network, x)
    return GESTURES[index], outputs


def _check_test_rows(test: Sequence[FeatureVector]):
    if not test:
        raise ArgumentError("test set is empty")
    synthetic = [v.key for v in test if v.synthetic]
    if synthetic:
        raise DataError(f"synthetic rows in test set: {synthetic[:3]}")


def evaluate_rows(model: MasterSlaveModel, test: Sequence[FeatureVector]) -> List[RowOutcome]:
    """
    Stage-wise correctness of every test row.

    The slave outcome always uses the slave of the row's true type.
    """
    _check_test_rows(test)
    outcomes = []
    for vector in test:
        prediction = predict_sequential(model, vector.values)
        true_type = vector.label.gesture_type
        scaled = _standardize(model.scaler, vector.values)[0]
        slave_index, _ = dnn.predict(model.slave(true_type), scaled)
        outcomes.append(RowOutcome(
            key=vector.key,
            master_correct=prediction.master_type is true_type,
            slave_correct=SLAVE_GESTURES[true_type][slave_index] is vector.label.gesture_id,
            end_to_end_correct=prediction.gesture_id is vector.label.gesture_id,
        ))
    return outcomes


def _percent(hits: Sequence[bool]) -> float:
    return 100.0 * sum(hits) / len(hits)


def evaluate(
    model: Model,
    test: Sequence[FeatureVector],
    with_synthetic: bool = False,
    subject_id: Optional[int] = None,
) -> EvaluationRow:
    """
    Test-set accuracies of either architecture.

    Args:
        model: Master-slave or conventional model
        test: Real held-out rows
        with_synthetic: Whether the model was trained with synthetic rows
        subject_id: Row subject; defaults to the first test row's subject

    Returns:
        EvaluationRow; master_ca and slave_ca stay empty for the conventional model

    Raises:
        ArgumentError: On an empty test set
        DataError: If a synthetic row is in the test set
    """
    _check_test_rows(test)
    subject = test[0].subject_id if subject_id is None else subject_id
    if isinstance(model, ConventionalModel):
        hits = [predict_conventional(model, v.values)[0] is v.label.gesture_id for v in test]
        return EvaluationRow(
            subject_id=subject,
            arch=Architecture.CONVENTIONAL,
            with_synthetic=with_synthetic,
            end_to_end_ca=_percent(hits),
        )
    outcomes = evaluate_rows(model, test)
    return EvaluationRow(
        subject_id=subject,
        arch=Architecture.MASTER_SLAVE,
        with_synthetic=with_synthetic,
        master_ca=_percent([o.master_correct for o in outcomes]),
        slave_ca=_percent([o.slave_correct for o in outcomes]),
        end_to_end_ca=_percent([o.end_to_end_correct for o in outcomes]),
    )


def split_subject(
    features: Sequence[FeatureVector], subject_id: int, config: SplitConfig = SplitConfig()
) -> Tuple[List[FeatureVector], List[FeatureVector]]:
    """
    Stratified train/test split of one subject's real rows.

    Returns:
        (train, test), each in (gesture, repetition) order

    Raises:
        DataError: If the subject has no rows or a gesture is too rare to stratify
    """
    rows = _canonical([v for v in features if v.subject_id == subject_id and not v.synthetic])
    if not rows:
        raise DataError(f"subject {subject_id} has no real rows")
    labels = [v.label.gesture_id.class_index for v in rows]
    try:
        train, test = train_test_split(
            rows, test_size=config.test_fraction, random_state=config.seed, stratify=labels
        )
    except ValueError as e:
        raise DataError(f"cannot split subject {subject_id}: {e}") from e
    return _canonical(train), _canonical(test)


def subject_split(subject_id: int, train: Sequence[FeatureVector], test: Sequence[FeatureVector]) -> SubjectSplit:
    """Record a split as (gesture, repetition) keys."""
    def keys(vectors):
        return [(v.label.gesture_id, v.repetition_index) for v in vectors]
    return SubjectSplit(subject_id=subject_id, train=keys(train), test=keys(test))


def apply_split(features: Sequence[FeatureVector], split: SubjectSplit) -> Tuple[List[FeatureVector], List[FeatureVector]]:
    """Recover (train, test) rows of a recorded split from a feature table."""
    real = {(v.label.gesture_id, v.repetition_index): v for v in features
            if v.subject_id == split.subject_id and not v.synthetic}

    def pick(keys):
        missing = [k for k in keys if tuple(k) not in real]
        if missing:
            gesture, repetition = missing[0]
            raise DataError(
                f"subject {split.subject_id}: no row for gesture {Gesture(gesture).value}, repetition {repetition}"
            )
        return _canonical([real[tuple(k)] for k in keys])

    return pick(split.train), pick(split.test)


class CellResult(BaseModel):
    """One trained (arch, with_synthetic) cell of a subject."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    arch: Architecture
    with_synthetic: bool
    model: Union[MasterSlaveModel, ConventionalModel]
    reports: Dict[str, TrainingReport]


class SubjectRun(BaseModel):
    """Split, trained cells and evaluation rows of one subject."""

    subject_id: int
    split: SubjectSplit
    cells: List[CellResult] = Field(default_factory=list)
    rows: List[EvaluationRow] = Field(default_factory=list)


def train_subject(
    features: Sequence[FeatureVector],
    subject_id: int,
    split_config: SplitConfig,
    train_config: TrainConfig,
    synthetic: Sequence[FeatureVector] = (),
    architectures: Sequence[Architecture] = tuple(Architecture),
    synth_states: Sequence[bool] = (False, True),
    workers: int = 1,
) -> SubjectRun:
    """
    Split one subject and train every requested (arch, with_synthetic) cell.

    Cells come out in architecture order, then without/with synthetic rows.
    Synthetic rows only ever join the training side; with-synthetic cells
    are skipped, with a warning, when there are none.
    """
    started = time.time()
    train, test = split_subject(features, subject_id, split_config)
    run = SubjectRun(subject_id=subject_id, split=subject_split(subject_id, train, test))
    skipped = []
    for arch in architectures:
        for with_synthetic in synth_states:
            if with_synthetic and not synthetic:
                skipped.append(f"{arch.value}/with_synthetic")
                continue
            rows = list(train) + list(synthetic) if with_synthetic else list(train)
            if arch is Architecture.MASTER_SLAVE:
                model, reports = train_master_slave(rows, train_config, monitor=test, workers=workers)
            else:
                model, report = train_conventional(rows, train_config, monitor=test)
                reports = {CONVENTIONAL: report}
            run.cells.append(CellResult(arch=arch, with_synthetic=with_synthetic, model=model, reports=reports))
    if skipped:
        logger.warning("No synthetic rows; cells skipped", extra={"subject": subject_id, "skipped_cells": skipped})
    logger.info("Subject trained", extra={
        "subject": subject_id,
        "cells": len(run.cells),
        "train_rows": len(train),
        "test_rows": len(test),
        "synthetic_rows": len(synthetic),
        "elapsed_seconds": time.time() - started,
    })
    return run


def evaluate_subject(run: SubjectRun, features: Sequence[FeatureVector]) -> List[EvaluationRow]:
    _, test = apply_split(features, run.split)
    run.rows = [evaluate(cell.model, test, cell.with_synthetic, run.subject_id) for cell in run.cells]
    return run.rows


def run_experiment(
    features: Sequence[FeatureVector],
    augment_config: AugmentConfig,
    split_config: SplitConfig,
    train_config: TrainConfig,
    subjects: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> Tuple[List[EvaluationRow], List[SubjectRun]]:
    """
    Reproduce the per-subject accuracy table.

    Synthetic rows already present in ``features`` are used as the synthetic
    set of every subject. Otherwise ``augment_config`` generates a separate
    set per subject from that subject's training rows only, so no held-out
    repetition shapes the generator. Every real subject (or the given
    subset) is split, trained and evaluated with and without synthetic rows
    for both architectures.

    Returns:
        (rows ordered by subject, arch, with_synthetic; per-subject runs)
    """
    real = [v for v in features if not v.synthetic]
    given = [v for v in features if v.synthetic]
    ids = sorted({v.subject_id for v in real}) if subjects is None else list(subjects)
    if not ids:
        raise DataError("feature table has no real subjects")
    first_synthetic_id = max(v.subject_id for v in features) + 1
    generate = not given and augment_config.synthetic_subjects > 0

    def one(subject_id: int) -> SubjectRun:
        synthetic = given
        if generate:
            train, _ = split_subject(real, subject_id, split_config)
            synthetic, _, _ = augment_features(train, augment_config, first_subject_id=first_synthetic_id)
        run = train_subject(real, subject_id, split_config, train_config, synthetic=synthetic)
        evaluate_subject(run, real)
        return run

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, ids))
    else:
        runs = [one(s) for s in ids]
    rows = [row for run in runs for row in run.rows]
    logger.info("Experiment finished", extra={"subjects": len(ids), "rows": len(rows), "generated_synthetic": generate})
    return rows, runs


def _delta(after: Optional[float], before: Optional[float]) -> Optional[float]:
    if after is None or before is None:
        return None
    return after - before


def augmentation_deltas(rows: Sequence[EvaluationRow]) -> List[dict]:
    """
    With-minus-without accuracy per (subject, arch).

    Cells lacking either state are skipped. ``decreased`` is set when any
    populated accuracy dropped after adding synthetic rows.
    """
    cells = {(r.subject_id, r.arch, r.with_synthetic): r for r in rows}
    deltas = []
    for before in rows:
        if before.with_synthetic:
            continue
        after = cells.get((before.subject_id, before.arch, True))
        if after is None:
            continue
        entry = {
            "subject": before.subject_id,
            "arch": before.arch.value,
            "master_delta": _delta(after.master_ca, before.master_ca),
            "slave_delta": _delta(after.slave_ca, before.slave_ca),
            "end_to_end_delta": _delta(after.end_to_end_ca, before.end_to_end_ca),
        }
        entry["decreased"] = any(
            entry[k] is not None and entry[k] < 0 for k in ("master_delta", "slave_delta", "end_to_end_delta")
        )
        deltas.append(entry)
    return deltas
