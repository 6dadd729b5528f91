import json

import numpy as np
import pandas as pd
import pytest

from fstat_loss.embedding.aggregation import Aggregation
from fstat_loss.embedding.errors import DataError
from fstat_loss.embedding.input.code_table import CodeTable, GoldenCode, read_codes
from fstat_loss.embedding.input.factorial_dataset import FactorialDataset
from fstat_loss.embedding.metrics import evaluate_disentanglement
from fstat_loss.embedding.output.training_log import TrainingLog
from fstat_loss.embedding.synthdata import generate_golden_code


def test_dataset_file_round_trip(tiny_dataset, tmp_path):
    path = str(tmp_path / "dataset.csv")
    tiny_dataset.to_file(path)
    loaded = FactorialDataset.from_file(path)
    assert loaded.spec == tiny_dataset.spec
    np.testing.assert_array_equal(loaded.observations(), tiny_dataset.observations())
    np.testing.assert_array_equal(loaded.factor_matrix(), tiny_dataset.factor_matrix())


def test_dataset_file_kind_is_checked(tmp_path):
    path = str(tmp_path / "golden.csv")
    generate_golden_code("a", points_per_cluster=2).to_file(path)
    with pytest.raises(DataError):
        FactorialDataset.from_file(path)


def test_file_without_header(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("instance,f1,z0,z1\n0,0,0.0,0.0\n")
    with pytest.raises(ValueError):
        read_codes(str(path))


def test_dataset_rejects_out_of_range_values(tiny_spec, tiny_dataset):
    data = tiny_dataset.data
    data.loc[0, "color"] = 3
    with pytest.raises(DataError):
        FactorialDataset(tiny_spec, data)


def test_dataset_rejects_non_finite_observations(tiny_spec, tiny_dataset):
    data = tiny_dataset.data
    data.loc[0, "o0"] = np.inf
    with pytest.raises(DataError):
        FactorialDataset(tiny_spec, data)


def test_dataset_requires_observation_columns(tiny_spec, tiny_dataset):
    with pytest.raises(ValueError):
        FactorialDataset(tiny_spec, tiny_dataset.data.drop(columns=["o7"]))


def test_dataset_rows_are_sorted_by_instance(tiny_spec, tiny_dataset):
    shuffled = tiny_dataset.data.sample(frac=1.0, random_state=0)
    dataset = FactorialDataset(tiny_spec, shuffled)
    assert dataset["instance"].tolist() == list(range(len(tiny_dataset)))
    np.testing.assert_array_equal(dataset.observations(), tiny_dataset.observations())


def test_codes_file_round_trip(tmp_path):
    codes = np.array([[0.1, -2.0, 1.0 / 3.0], [4.0, 5.5, 1e-9]])
    table = CodeTable.from_arrays(codes, [[0, 1], [1, 0]], ["f1", "f2"], metadata={"model": "m.json"})
    path = str(tmp_path / "codes.csv")
    table.to_file(path)
    loaded = read_codes(path)
    assert type(loaded) is CodeTable
    assert loaded.factor_names == ["f1", "f2"]
    assert loaded.metadata == {"model": "m.json"}
    np.testing.assert_array_equal(loaded.codes(), codes)
    np.testing.assert_array_equal(loaded.factor_matrix(), [[0, 1], [1, 0]])


def test_golden_code_file_keeps_expectations(tmp_path):
    path = str(tmp_path / "golden.csv")
    generate_golden_code("f", points_per_cluster=3).to_file(path)
    loaded = read_codes(path)
    assert isinstance(loaded, GoldenCode)
    assert loaded.pattern == "f"
    assert loaded.expected_explicit == {"f1": True, "f2": False}
    assert not loaded.expected_modular
    with open(path) as f:
        header = json.loads(f.readline()[1:])
    assert header["kind"] == "codes" and header["code_dim"] == 2


def test_aggregation_add_replaces_duplicated_index():
    training_log = TrainingLog()
    training_log.add(epoch=1, train_loss=0.5, val_metric=0.75)
    training_log.add(epoch=1, train_loss=0.4, val_metric=0.8)
    assert len(training_log) == 1
    assert training_log["train_loss"].tolist() == [0.4]
    assert np.isnan(training_log["grad_norm"].iloc[0])


def test_aggregation_rejects_non_frames():
    with pytest.raises(TypeError):
        TrainingLog(data=[1, 2])


def test_aggregation_data_is_a_copy():
    training_log = TrainingLog(data=pd.DataFrame({"epoch": [1], "train_loss": [0.5], "val_metric": [0.5]}))
    data = training_log.data
    data.loc[0, "train_loss"] = 9.0
    assert training_log["train_loss"].tolist() == [0.5]
    assert repr(Aggregation()) == "Empty Aggregation"


def test_training_log_outputs(tmp_path):
    training_log = TrainingLog(name="fstat / factor oracle")
    for epoch in range(1, 4):
        training_log.add(
            epoch=epoch, train_loss=1.0 / epoch, val_metric=0.5 + 0.1 * epoch, grad_norm=0.1, min_phi=0.9
        )
    csv = tmp_path / "log.csv"
    training_log.to_csv(str(csv))
    assert pd.read_csv(csv)["epoch"].tolist() == [1, 2, 3]
    training_log.plot(str(tmp_path / "training.html"))
    assert "plotly" in (tmp_path / "training.html").read_text()


def test_report_outputs(tmp_path):
    golden = generate_golden_code("b", points_per_cluster=20)
    report = evaluate_disentanglement(
        golden.codes(), golden.factor_matrix(), golden.factor_names, metadata={"seed": 1}
    )
    path = tmp_path / "report.json"
    report.save(str(path))
    document = json.loads(path.read_text())
    assert document["modularity"]["mean"] == pytest.approx(report.modularity_mean)
    assert document["metadata"] == {"seed": 1}
    assert document["recall_at_1"] is None
    assert len(document["explicitness"]["per_factor_value"]) == 4

    report.mutual_information.to_csv(str(tmp_path / "mi.csv"))
    mi = pd.read_csv(tmp_path / "mi.csv")
    assert list(mi.columns) == ["dimension", "factor", "mi"]
    np.testing.assert_allclose(mi["mi"].to_numpy().reshape(2, 2), report.mutual_information.matrix())
    report.mutual_information.plot(str(tmp_path / "mi.html"))
    assert (tmp_path / "mi.html").exists()


def test_report_without_explicitness_is_strict_json(tmp_path):
    codes = np.array([[0.0], [0.1], [1.0], [1.1]])
    factors = np.full((4, 2), 1)
    report = evaluate_disentanglement(codes, factors, ["fixed", "also_fixed"])
    assert np.isnan(report.explicitness_mean)
    path = tmp_path / "report.json"
    report.save(str(path))

    def reject(constant):
        raise ValueError(constant)

    document = json.loads(path.read_text(), parse_constant=reject)
    assert document["explicitness"]["mean"] is None
    assert document["explicitness"]["per_factor"] == {}
