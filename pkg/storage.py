"""
File persistence for pipeline artifacts.

Every writer is deterministic: fixed column and key order, floats written
with ``%.17g`` (exact round trip), no timestamps. Running a stage twice with
the same inputs therefore produces byte-identical files.

Formats:
- Recording CSV: header ``ch1,ch2,ch3``, one row per sample
- Feature table CSV: ``subject,gesture,repetition,synthetic,f1..fd``
- Training report CSV: ``iteration,cost,train_ca,test_ca``
- Evaluation CSV: ``subject,arch,with_synthetic,master_ca,slave_ca,end_to_end_ca``
- Delta CSV: ``subject,arch,master_delta,slave_delta,end_to_end_delta,decreased``
- Everything else (manifests, quantizer, generator, model bundles): JSON,
  UTF-8, indent=2
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from dnn import Network
from errors import FormatError, IngestionError, ParseError
from lstm_augment import GeneratorModel
from master_slave import MODEL_ADAPTER, Model
from models import (
    EvaluationRow,
    FeatureVector,
    Gesture,
    GestureLabel,
    IterationRecord,
    SplitManifest,
    TrainingReport,
)
from quantizer import QuantizerModel

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"
CHANNEL_COLUMNS = ["ch1", "ch2", "ch3"]
FEATURE_META_COLUMNS = ["subject", "gesture", "repetition", "synthetic"]
REPORT_COLUMNS = ["iteration", "cost", "train_ca", "test_ca"]
EVALUATION_COLUMNS = ["subject", "arch", "with_synthetic", "master_ca", "slave_ca", "end_to_end_ca"]
DELTA_COLUMNS = ["subject", "arch", "master_delta", "slave_delta", "end_to_end_delta", "decreased"]


def _prepare(path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


def _require(path: PathLike) -> Path:
    source = Path(path)
    if not source.is_file():
        raise IngestionError(f"file not found: {source}", path=str(source))
    return source


def write_json(path: PathLike, data: Dict[str, Any]) -> Path:
    target = _prepare(path)
    with open(target, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, ensure_ascii=False)
        f.write("\n")
    return target


def read_json(path: PathLike) -> Dict[str, Any]:
    source = _require(path)
    try:
        with open(source, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{source}: invalid JSON ({e.msg} at line {e.lineno})") from e


def _to_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    target = _prepare(path)
    frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    return target


def write_recording_csv(path: PathLike, windows: np.ndarray) -> Path:
    """Write a (3, n) window array as ``ch1,ch2,ch3`` rows."""
    frame = pd.DataFrame({name: windows[i] for i, name in enumerate(CHANNEL_COLUMNS)})
    return _to_csv(frame, path)


def read_recording_csv(path: PathLike) -> np.ndarray:
    """
    Read a recording CSV into a (3, n) array.

    Raises:
        IngestionError: If the file is missing
        FormatError: If the header is not exactly ch1,ch2,ch3
        ParseError: If a cell is not a finite number (1-based data row)
    """
    source = _require(path)
    frame = pd.read_csv(source, dtype=str, keep_default_na=False)
    if list(frame.columns) != CHANNEL_COLUMNS:
        raise FormatError(
            f"{source}: expected 3 channel columns {CHANNEL_COLUMNS}, got {list(frame.columns)}"
        )
    try:
        values = frame.to_numpy(dtype=object).astype(np.float64)
        bad = ~np.isfinite(values)
    except ValueError:
        bad = ~np.isfinite(frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64))
    if bad.any():
        row, column = np.argwhere(bad)[0]
        raise ParseError(
            f"{source}: non-numeric value {frame.iat[row, column]!r} in column "
            f"{CHANNEL_COLUMNS[column]} at row {row + 1}",
            row=int(row + 1),
        )
    return values.T.copy()


def feature_columns(dimension: int) -> List[str]:
    return [f"f{j}" for j in range(1, dimension + 1)]


def write_feature_table(path: PathLike, vectors: Sequence[FeatureVector], dimension: Optional[int] = None) -> Path:
    """Write feature vectors in the given order."""
    if dimension is None:
        dimension = vectors[0].dimension if vectors else 0
    columns = feature_columns(dimension)
    values = np.array([v.values for v in vectors]).reshape(len(vectors), dimension)
    meta = pd.DataFrame({
        "subject": [v.subject_id for v in vectors],
        "gesture": [v.label.gesture_id.value for v in vectors],
        "repetition": [v.repetition_index for v in vectors],
        "synthetic": ["true" if v.synthetic else "false" for v in vectors],
    })
    frame = pd.concat([meta, pd.DataFrame(values, columns=columns)], axis=1)
    return _to_csv(frame, path)


def read_feature_table(path: PathLike) -> List[FeatureVector]:
    """
    Read a feature table written by :func:`write_feature_table`.

    Raises:
        IngestionError: If the file is missing
        FormatError: On an unexpected header
        ParseError: On a non-numeric feature value
    """
    source = _require(path)
    frame = pd.read_csv(source, dtype={"gesture": str, "synthetic": str}, float_precision="round_trip")
    columns = list(frame.columns)
    dimension = len(columns) - len(FEATURE_META_COLUMNS)
    if columns[:4] != FEATURE_META_COLUMNS or columns[4:] != feature_columns(dimension):
        raise FormatError(f"{source}: unexpected feature table header {columns[:6]}...")
    try:
        values = frame[columns[4:]].to_numpy(dtype=np.float64)
    except ValueError as e:
        raise ParseError(f"{source}: non-numeric feature value ({e})") from e

    vectors = []
    for i, row in enumerate(frame.itertuples(index=False)):
        try:
            gesture = Gesture(row.gesture)
        except ValueError as e:
            raise ParseError(f"{source}: unknown gesture {row.gesture!r} at row {i + 1}", row=i + 1) from e
        vectors.append(FeatureVector(
            values=values[i],
            label=GestureLabel.of(gesture),
            subject_id=int(row.subject),
            repetition_index=int(row.repetition),
            synthetic=str(row.synthetic).lower() == "true",
        ))
    return vectors


def write_report(path: PathLike, report: TrainingReport) -> Path:
    frame = pd.DataFrame(
        [[r.iteration, r.cost, r.train_ca, r.test_ca] for r in report.records],
        columns=REPORT_COLUMNS,
    )
    frame = frame.astype({"iteration": "int64", "cost": "float64", "train_ca": "float64", "test_ca": "float64"})
    return _to_csv(frame, path)


def read_report(path: PathLike, network: Optional[str] = None) -> TrainingReport:
    source = _require(path)
    frame = pd.read_csv(source, float_precision="round_trip")
    if list(frame.columns) != REPORT_COLUMNS:
        raise FormatError(f"{source}: expected columns {REPORT_COLUMNS}, got {list(frame.columns)}")
    records = [
        IterationRecord(
            iteration=int(row.iteration),
            cost=float(row.cost),
            train_ca=float(row.train_ca),
            test_ca=None if pd.isna(row.test_ca) else float(row.test_ca),
        )
        for row in frame.itertuples(index=False)
    ]
    return TrainingReport(network=network or source.stem, records=records)


def _percent(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.3f}"


def write_evaluation_table(path: PathLike, rows: Sequence[EvaluationRow]) -> Path:
    frame = pd.DataFrame(
        [[
            r.subject_id,
            r.arch.value,
            "true" if r.with_synthetic else "false",
            _percent(r.master_ca),
            _percent(r.slave_ca),
            _percent(r.end_to_end_ca),
        ] for r in rows],
        columns=EVALUATION_COLUMNS,
    )
    return _to_csv(frame, path)


def save_quantizer(path: PathLike, model: QuantizerModel) -> Path:
    return write_json(path, model.model_dump(by_alias=True))


def load_quantizer(path: PathLike) -> QuantizerModel:
    data = read_json(path)
    try:
        return QuantizerModel.model_validate(data)
    except ValidationError as e:
        raise FormatError(f"{path}: invalid quantizer ({e.errors()[0]['msg']})") from e


def save_generator(path: PathLike, model: GeneratorModel) -> Path:
    return write_json(path, model.model_dump(mode="json"))


def load_generator(path: PathLike) -> GeneratorModel:
    data = read_json(path)
    try:
        return GeneratorModel.model_validate(data)
    except ValidationError as e:
        raise FormatError(f"{path}: invalid generator file ({e.errors()[0]['msg']})") from e


def save_network(path: PathLike, network: Network) -> Path:
    return write_json(path, network.model_dump(mode="json"))


def load_network(path: PathLike) -> Network:
    data = read_json(path)
    try:
        return Network.model_validate(data)
    except ValidationError as e:
        raise FormatError(f"{path}: invalid network file ({e.errors()[0]['msg']})") from e


def save_model(path: PathLike, model: Model) -> Path:
    """Write a master-slave or conventional bundle, scaler included."""
    return write_json(path, model.model_dump(mode="json"))


def load_model(path: PathLike) -> Model:
    data = read_json(path)
    try:
        return MODEL_ADAPTER.validate_python(data)
    except ValidationError as e:
        raise FormatError(f"{path}: invalid model file ({e.errors()[0]['msg']})") from e


def write_split_manifest(path: PathLike, manifest: SplitManifest) -> Path:
    return write_json(path, manifest.model_dump(mode="json"))


def read_split_manifest(path: PathLike) -> SplitManifest:
    data = read_json(path)
    try:
        return SplitManifest.model_validate(data)
    except ValidationError as e:
        raise FormatError(f"{path}: invalid split manifest ({e.errors()[0]['msg']})") from e


def write_delta_table(path: PathLike, deltas: Sequence[Dict[str, Any]]) -> Path:
    """Write per-(subject, arch) accuracy changes from adding synthetic rows."""
    frame = pd.DataFrame(
        [[
            d["subject"],
            d["arch"],
            _percent(d["master_delta"]),
            _percent(d["slave_delta"]),
            _percent(d["end_to_end_delta"]),
            "true" if d["decreased"] else "false",
        ] for d in deltas],
        columns=DELTA_COLUMNS,
    )
    return _to_csv(frame, path)
