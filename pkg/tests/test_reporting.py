"""Report artifacts: delimited output, JSON document and figures."""

import csv
import json

from tsforge.harness import RunRecord
from tsforge.qa.suite import QAItem
from tsforge.query.evaluate import QueryResult
from tsforge.reporting import write_report, write_report_csv

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def mk_item(item_id, tag):
    return QAItem(item_id, f"{item_id}?", None, QueryResult("scalar", 1),
                  "number", 0.0, (tag,))


def fixture():
    suite = [mk_item("i0", "stateless"), mk_item("i1", "stateful"),
             mk_item("i2", "incident")]
    script = {
        "i0": ("correct", "correct"),
        "i1": ("correct", "incorrect"),
        "i2": ("runtime_error", "incorrect"),
    }
    records = [RunRecord(i, t, f"r-{i}-{t}", c, 3.25)
               for i, cats in script.items() for t, c in enumerate(cats)]
    return suite, records


def test_all_four_artifacts_written(tmp_path):
    suite, records = fixture()
    write_report(records, suite, tmp_path)
    names = {p.name for p in tmp_path.iterdir()}
    assert names == {"report.json", "report.csv",
                     "accuracy_by_tag.png", "outcome_grid.png"}


def test_pngs_are_pngs(tmp_path):
    suite, records = fixture()
    write_report(records, suite, tmp_path)
    for name in ("accuracy_by_tag.png", "outcome_grid.png"):
        blob = (tmp_path / name).read_bytes()
        assert blob[:8] == PNG_MAGIC
        assert len(blob) > 1000


def test_csv_shape_and_content(tmp_path):
    suite, records = fixture()
    write_report_csv(records, suite, tmp_path / "report.csv")
    with open(tmp_path / "report.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["item_id", "tag", "trial", "category", "latency_ms"]
    assert len(rows) == 1 + len(records)
    assert rows[1] == ["i0", "stateless", "0", "correct", "3.250"]
    assert rows[5] == ["i2", "incident", "0", "runtime_error", "3.250"]


def test_report_json_structure(tmp_path):
    suite, records = fixture()
    returned = write_report(records, suite, tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc == returned
    assert set(doc) == {"metrics", "per_item", "records"}
    m = doc["metrics"]
    assert set(m) == {"accuracy", "pass_at_k", "k", "self_consistency",
                      "breakdowns"}
    assert m["k"] == 2
    assert m["accuracy"] == 3 / 6
    assert m["pass_at_k"] == 2 / 3
    assert set(m["breakdowns"]) == {"stateless", "stateful", "incident"}
    assert doc["per_item"]["i1"] == {"tag": "stateful",
                                     "categories": ["correct", "incorrect"]}
    assert len(doc["records"]) == 6
    assert doc["records"][0] == {"item_id": "i0", "trial": 0,
                                 "category": "correct", "latency_ms": 3.25,
                                 "raw_response": "r-i0-0"}


def test_delimited_outputs_deterministic(tmp_path):
    suite, records = fixture()
    d1, d2 = tmp_path / "a", tmp_path / "b"
    write_report(records, suite, d1)
    write_report(records, suite, d2)
    assert (d1 / "report.json").read_bytes() == (d2 / "report.json").read_bytes()
    assert (d1 / "report.csv").read_bytes() == (d2 / "report.csv").read_bytes()


def test_report_handles_empty_run(tmp_path):
    write_report([], [], tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["metrics"]["accuracy"] == 0.0
    assert doc["per_item"] == {}
    for name in ("accuracy_by_tag.png", "outcome_grid.png"):
        assert (tmp_path / name).read_bytes()[:8] == PNG_MAGIC


def test_nested_output_dir_created(tmp_path):
    suite, records = fixture()
    target = tmp_path / "deep" / "run7"
    write_report(records, suite, target)
    assert (target / "report.json").exists()
