import numpy as np
import pytest

import storage
from dnn import init_weights
from errors import FormatError, IngestionError
from models import (
    Architecture,
    EvaluationRow,
    FeatureVector,
    Gesture,
    GestureLabel,
    IterationRecord,
    SplitConfig,
    SplitManifest,
    SubjectSplit,
    TrainingReport,
)
from quantizer import QuantizerModel


def test_feature_table_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    vectors = [
        FeatureVector(values=rng.normal(size=5) * 10.0 ** rng.integers(-8, 8), label=GestureLabel.of(g),
                      subject_id=2, repetition_index=r, synthetic=r == 1)
        for g in (Gesture.ONE, Gesture.WIN) for r in range(3)
    ]
    path = storage.write_feature_table(tmp_path / 'f.csv', vectors)
    restored = storage.read_feature_table(path)
    assert [v.key for v in restored] == [v.key for v in vectors]
    assert [v.synthetic for v in restored] == [v.synthetic for v in vectors]
    for a, b in zip(vectors, restored):
        np.testing.assert_array_equal(a.values, b.values)
    storage.write_feature_table(tmp_path / 'g.csv', restored)
    assert (tmp_path / 'g.csv').read_bytes() == path.read_bytes()


def test_feature_table_rejects_bad_header(tmp_path):
    path = tmp_path / 'f.csv'
    path.write_text('subject,gesture,rep,synthetic,f1\n1,One,0,false,1.0\n')
    with pytest.raises(FormatError):
        storage.read_feature_table(path)
    with pytest.raises(IngestionError):
        storage.read_feature_table(tmp_path / 'missing.csv')


def test_report_round_trip(tmp_path):
    report = TrainingReport(network='slave_static', records=[
        IterationRecord(iteration=1, cost=0.6931471805599453, train_ca=50.0),
        IterationRecord(iteration=2, cost=0.5, train_ca=62.5),
    ])
    path = storage.write_report(tmp_path / 'slave_static_report.csv', report)
    assert path.read_text().splitlines()[0] == 'iteration,cost,train_ca,test_ca'
    restored = storage.read_report(path, network='slave_static')
    assert restored.records == report.records


def test_evaluation_table_format(tmp_path):
    rows = [
        EvaluationRow(subject_id=1, arch=Architecture.MASTER_SLAVE, with_synthetic=False,
                      master_ca=100.0, slave_ca=95.0, end_to_end_ca=95.0),
        EvaluationRow(subject_id=1, arch=Architecture.CONVENTIONAL, with_synthetic=True, end_to_end_ca=88.33333333),
    ]
    path = storage.write_evaluation_table(tmp_path / 'evaluation.csv', rows)
    assert path.read_text().splitlines() == [
        'subject,arch,with_synthetic,master_ca,slave_ca,end_to_end_ca',
        '1,MasterSlave,false,100.000,95.000,95.000',
        '1,Conventional,true,,,88.333',
    ]


def test_delta_table_format(tmp_path):
    deltas = [{'subject': 3, 'arch': 'MasterSlave', 'master_delta': -3.243,
               'slave_delta': 0.0, 'end_to_end_delta': 1.5, 'decreased': True}]
    path = storage.write_delta_table(tmp_path / 'deltas.csv', deltas)
    assert path.read_text().splitlines()[1] == '3,MasterSlave,-3.243,0.000,1.500,true'


def test_quantizer_and_network_files(tmp_path):
    grid = QuantizerModel(levels=20, mins=(0.0, -1.5), maxs=(10.0, 2.25))
    assert storage.load_quantizer(storage.save_quantizer(tmp_path / 'q.json', grid)) == grid

    net = init_weights([3, 4, 2], seed=5)
    restored = storage.load_network(storage.save_network(tmp_path / 'net.json', net))
    for a, b in zip(net.weights, restored.weights):
        np.testing.assert_array_equal(a, b)


def test_invalid_json_files(tmp_path):
    broken = tmp_path / 'model.json'
    broken.write_text('{"arch": ')
    with pytest.raises(FormatError):
        storage.load_model(broken)
    wrong = tmp_path / 'q.json'
    wrong.write_text('{"levels": 1, "min": [0.0], "max": [1.0]}')
    with pytest.raises(FormatError):
        storage.load_quantizer(wrong)


def test_split_manifest_round_trip(tmp_path):
    manifest = SplitManifest(config=SplitConfig(seed=3), subjects=[
        SubjectSplit(subject_id=1, train=[(Gesture.ONE, 0), (Gesture.KEY, 2)], test=[(Gesture.WIN, 1)]),
    ])
    path = storage.write_split_manifest(tmp_path / 'split_manifest.json', manifest)
    restored = storage.read_split_manifest(path)
    assert restored == manifest
    assert restored.for_subject(1).test == [(Gesture.WIN, 1)]
    assert restored.for_subject(2) is None
