import numpy as np
import pandas as pd
import pytest

from bisimagg.core.aggregate import BoundReport
from bisimagg.core.generators import gen_figure1
from bisimagg.core.mdp import MetricParams
from bisimagg.core.metrics import fixed_point_metric
from bisimagg.core.partition import Partition
from bisimagg.core.transport import kantorovich
from bisimagg.modules import export
from bisimagg.modules.experiment import COLUMNS, ExperimentRow


def test_distances_keep_labels_and_precision(tmp_path):
    d = np.array([[0.0, 1 / 3], [1 / 3, 0.0]])
    path = export.write_distances(tmp_path / "nested" / "d.csv", d, ["s", "t"])
    back, labels = export.read_distances(path)
    assert labels == ["s", "t"]
    assert np.array_equal(back, d)
    _, labels = export.read_distances(export.write_distances(tmp_path / "plain.csv", d))
    assert labels == ["0", "1"]


def test_metric_sidecar(tmp_path):
    result = fixed_point_metric(gen_figure1(0.3, 0.7, 0.5), MetricParams.default(0.5, delta=0.1))
    meta = export.read_metric_sidecar(export.write_metric_sidecar(tmp_path / "d.json", result))
    assert meta["iterations"] == result.iterations == 4
    assert meta["residual_bound"] == result.residual_bound
    assert len(meta["increments"]) == 4


def test_values_are_read_in_state_order(tmp_path):
    path = tmp_path / "v.csv"
    pd.DataFrame({"state_index": [2, 0, 1], "value": [0.3, 0.1, 0.2]}).to_csv(path, index=False)
    assert export.read_values(path).tolist() == [0.1, 0.2, 0.3]


def test_plan_writes_flow_and_potentials(tmp_path):
    d = np.abs(np.subtract.outer([0.0, 0.5, 1.0], [0.0, 0.5, 1.0]))
    plan = kantorovich(d, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    path = export.write_plan(tmp_path / "plan.csv", plan)
    flow = pd.read_csv(path)
    assert flow.to_dict("records") == [{"source": 0, "target": 2, "mass": 1.0}]
    assert len(pd.read_csv(tmp_path / "plan_potentials.csv")) == 3


def test_partition_file(tmp_path):
    part = Partition.from_blocks([[0, 3], [1], [2]])
    path = export.write_partition(tmp_path / "p.txt", part)
    assert path.read_text() == "0: 0 3\n1: 1\n2: 2\n"
    assert export.read_partition(path, 4) == part


def test_bound_report_summary_line(tmp_path):
    report = BoundReport(
        g=np.array([0.1, 0.0]),
        per_state_bound=np.array([0.5, 0.4]),
        max_bound=0.5,
        naive_bound=0.8,
        true_error=np.array([0.2, 0.0]),
        slack=2e-8,
    )
    path = export.write_bound_report(tmp_path / "b.csv", report)
    assert path.read_text().splitlines()[-1] == "# max_bound=0.5,naive_bound=0.8,slack=2e-08"
    df, summary = export.read_bound_report(path)
    assert df["bound"].tolist() == [0.5, 0.4]
    assert summary == {"max_bound": 0.5, "naive_bound": 0.8, "slack": 2e-08}


def test_bound_report_without_naive_bound(tmp_path):
    report = BoundReport(np.zeros(1), np.zeros(1), 0.0)
    df, summary = export.read_bound_report(export.write_bound_report(tmp_path / "b.csv", report))
    assert summary["naive_bound"] is None
    assert df["true_error"].isna().all()


def test_rows_frame_column_order():
    row = ExperimentRow(0.5, 0.9, "tv", 3, 0.01, 0.2, 0.4, 1.5, 2.0)
    df = export.rows_frame([row], COLUMNS)
    assert list(df.columns) == list(COLUMNS)
    assert df.loc[0, "metric_kind"] == "tv"
    assert df.loc[0, "n_blocks"] == 3


@pytest.mark.parametrize("suffix", ["csv", "xlsx"])
def test_rows_writers(tmp_path, suffix):
    rows = [ExperimentRow(e, 0.5, "fixpoint", 1, 0.0, 0.1, 0.2, 1.0, 1.0) for e in (0.0, 1.0)]
    if suffix == "csv":
        df = pd.read_csv(export.write_rows(tmp_path / "rows.csv", rows, COLUMNS))
    else:
        df = pd.read_excel(export.write_rows_xlsx(tmp_path / "rows.xlsx", rows, COLUMNS), engine="openpyxl")
    assert df["epsilon"].tolist() == [0.0, 1.0]
