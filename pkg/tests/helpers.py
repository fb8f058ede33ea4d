"""Shared helpers for the test suite."""

import numpy as np

from proctensor.simulator import run_sequence, simulate_experiment
from proctensor.tomography import (enumerate_standard_keys, qst_mle,
                                   standard_sequence)

FLOAT_TOL = 1e-9

ACCEPTANCE_LINES: list[str] = []


def record_verdict(num: int, description: str, ok: bool) -> None:
    """Collect one pass/fail line per acceptance criterion.

    The lines are echoed in a terminal summary section by conftest.py so
    they are visible even when pytest captures test output.
    """
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {description}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def assert_json_close(actual, expected, path="$"):
    """Structural equality with a tolerance on float leaves.

    Golden files pin structure and integer/string values exactly; float
    values may differ across BLAS builds in the last few ulps.
    """
    if isinstance(expected, float) and not isinstance(expected, bool):
        assert isinstance(actual, (int, float)) and not isinstance(
            actual, bool), f"{path}: expected a number, got {actual!r}"
        assert abs(actual - expected) <= FLOAT_TOL * max(1.0, abs(expected)), \
            f"{path}: {actual!r} != {expected!r}"
        return
    if isinstance(expected, dict):
        assert isinstance(actual, dict), f"{path}: expected object"
        assert sorted(actual) == sorted(expected), \
            f"{path}: keys {sorted(actual)} != {sorted(expected)}"
        for key in expected:
            assert_json_close(actual[key], expected[key], f"{path}.{key}")
        return
    if isinstance(expected, list):
        assert isinstance(actual, list), f"{path}: expected array"
        assert len(actual) == len(expected), \
            f"{path}: length {len(actual)} != {len(expected)}"
        for i, (a, e) in enumerate(zip(actual, expected)):
            assert_json_close(a, e, f"{path}[{i}]")
        return
    assert actual == expected, f"{path}: {actual!r} != {expected!r}"


def assert_csv_close(actual_text, expected_text, name=""):
    """Headers and cell layout exact; numeric cells within FLOAT_TOL."""
    actual = actual_text.splitlines()
    expected = expected_text.splitlines()
    assert actual[0] == expected[0], f"{name}: header changed"
    assert len(actual) == len(expected), f"{name}: row count changed"
    for r, (arow, erow) in enumerate(zip(actual[1:], expected[1:]), 1):
        acells, ecells = arow.split(","), erow.split(",")
        assert len(acells) == len(ecells), f"{name} row {r}: column count"
        for c, (a, e) in enumerate(zip(acells, ecells)):
            try:
                ev = float(e)
            except ValueError:
                assert a == e, f"{name} row {r} col {c}: {a!r} != {e!r}"
                continue
            av = float(a)
            assert abs(av - ev) <= FLOAT_TOL * max(1.0, abs(ev)), \
                f"{name} row {r} col {c}: {av!r} != {ev!r}"


def exact_states(model, basis, pool=None):
    pool = pool if pool is not None else basis.size
    out = np.empty((len(basis.preparations), pool, pool, 2, 2), dtype=complex)
    for i in range(len(basis.preparations)):
        for j in range(pool):
            for k in range(pool):
                out[i, j, k] = run_sequence(model, standard_sequence(basis, i, j, k))
    return out


def mle_states(records, pool):
    states = np.empty((4, pool, pool, 2, 2), dtype=complex)
    for key, rec in records.items():
        states[key] = qst_mle(rec)
    return states


def sampled_records(model, basis, shots, master_seed):
    records = {}
    for idx, (i, j, k) in enumerate(
            enumerate_standard_keys(len(basis.preparations), basis.size)):
        records[(i, j, k)] = simulate_experiment(
            model, standard_sequence(basis, i, j, k), shots, master_seed,
            record_index=idx)
    return records
