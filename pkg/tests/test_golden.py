"""Golden-file pins on the store schema and report tables.

The golden values were produced by this package on the reference
platform. Structure, keys and integer cells must match exactly; float
cells are compared to 1e-9 because linear-algebra backends may differ
in the last few ulps. Bit-exact determinism is asserted separately by
running the same plan twice in one session.
"""

import json
from pathlib import Path

import pytest

from proctensor.harness import ExperimentPlan, ResultsStore, report, run_plan

from helpers import assert_csv_close, assert_json_close

DATA = Path(__file__).parent / "data"

GOLDEN_PLAN = dict(name="golden", pool_size=11, basis_size=10, shots=1600,
                   resamples=6, master_seed=5,
                   stages=("characterize", "evaluate"))


def _strip_timestamps(text):
    lines = []
    for line in text.splitlines():
        doc = json.loads(line)
        doc.pop("created_utc", None)
        lines.append(json.dumps(doc, sort_keys=True, separators=(",", ":")))
    return "\n".join(lines)


@pytest.fixture(scope="module")
def golden_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("golden")
    plan = ExperimentPlan(**GOLDEN_PLAN)
    store = ResultsStore(root / "store")
    run_plan(plan, store)
    written = report(plan, store, root / "report")
    return plan, store, written


def test_store_head_matches_golden(golden_run):
    _, store, _ = golden_run
    lines = (store.root / "records.jsonl").read_text().splitlines()
    docs = [json.loads(line) for line in lines]
    evaluation = next(d for d in docs if d["stage"] == "evaluate")
    head = [docs[0], docs[1], evaluation]
    for doc in head:
        doc.pop("created_utc")
    golden = json.loads((DATA / "golden_store_head.json").read_text())
    assert_json_close(head, golden)


@pytest.mark.parametrize("name", ["fidelity_vs_n", "box_stats"])
def test_report_csv_matches_golden(golden_run, name):
    _, _, written = golden_run
    golden = (DATA / f"golden_{name}.csv").read_text()
    assert_csv_close(written[name].read_text(), golden, name)


def test_identical_plans_are_bit_exact(golden_run, tmp_path):
    plan, store, written = golden_run
    other = ResultsStore(tmp_path / "store")
    run_plan(plan, other)
    rewritten = report(plan, other, tmp_path / "report")
    first = _strip_timestamps((store.root / "records.jsonl").read_text())
    second = _strip_timestamps((other.root / "records.jsonl").read_text())
    assert first == second
    for name, path in written.items():
        assert rewritten[name].read_bytes() == path.read_bytes()
