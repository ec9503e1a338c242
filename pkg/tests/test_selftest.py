import math

import pytest

from geophase.selftest import CRITERIA, CriterionResult, angle_distance, run_selftest


def test_all_criteria_registered():
    assert sorted(CRITERIA) == list(range(1, 11))


@pytest.mark.parametrize("a, b, expected", [(0.1, -0.1, 0.2), (math.pi - 0.1, -math.pi + 0.1, 0.2), (1.0, 1.0, 0.0)])
def test_angle_distance_wraps(a, b, expected):
    assert angle_distance(a, b) == pytest.approx(expected, abs=1e-12)


def test_line_format():
    line = CriterionResult(3, "demo", False, 2e-6, 1e-6, "value 2e-06", 0.5).line()
    assert line.startswith("[FAIL] criterion  3 demo: value 2e-06")


@pytest.mark.parametrize("workers", [1, 3])
def test_order_independent_of_workers(workers):
    results = run_selftest([8, 4, 7], seed=1, workers=workers)
    assert [r.number for r in results] == [4, 7, 8]
    assert all(r.passed for r in results)
