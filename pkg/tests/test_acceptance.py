"""Acceptance gate: every criterion from the verify registry at its pinned
tolerance, one pass/fail line printed per criterion (run with ``-s`` to see
them all).

``snake_analytic_point`` asserts the stated slope target -sqrt(2/pi) although
three independent routes (exact diagonal matrix element, central finite
difference of the band function, and quadrature of |x| against the analytic
harmonic ground-state density) agree on -1/sqrt(pi); the stated constant
mis-evaluates the oracle it names, so that check fails and is expected to
keep failing for any correct solver.  See the companion module test
``test_fiber.py::TestVelocities::test_snake_ground_slope_matches_quadrature_oracle``
for the oracle-value assertion that passes.
"""

import pytest

from umfband.verify import criterion_names, run_all

_RESULTS = {}


def _result(name):
    if name not in _RESULTS:
        _RESULTS[name] = run_all([name])[0]
    return _RESULTS[name]


@pytest.mark.parametrize("name", criterion_names())
def test_criterion(name):
    result = _result(name)
    status = "PASS" if result.passed else ("SOFT-FAIL" if result.soft else "FAIL")
    print(f"{status:9s} {result.name}: {result.details}")
    if result.soft:
        # reported, not gating: the trend is a desk-scale signature only
        return
    assert result.passed, f"{result.name}: {result.details}"
