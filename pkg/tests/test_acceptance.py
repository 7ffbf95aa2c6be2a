"""The nine acceptance criteria, each run at its stated tolerance.

Each test prints one ``PASS``/``FAIL`` line, which is also collected into the
terminal summary.
"""

import pytest

from cutofflab.suite import DEFAULT_TOLERANCES, run_check

from conftest import ACCEPTANCE_LINES

# criterion number -> (check key, wall-clock limit in seconds or None)
CRITERIA = {
    1: ("warping", 1.0),
    2: ("sturm", 30.0),
    3: ("closed_forms", None),
    4: ("cutoffs", None),
    5: ("sharp_gamma", None),
    6: ("li_yau", 60.0),
    7: ("pme", None),
    8: ("fde", 300.0),
    9: ("convergence", None),
}

STATED_TOLERANCES = {
    "warp_flat": 1e-10,
    "warp_sinh": 1e-8,
    "sturm": 1e-8,
    "power": 1e-8,
    "bessel": 1e-6,
    "spread": 4.0,
    "decay": 8.0,
    "sandwich": 1e-9,
    "theta": 1e-10,
    "mass": 1e-8,
    "identical": 1e-10,
    "remaining": 0.5,
}


def test_suite_uses_stated_tolerances():
    for key, value in STATED_TOLERANCES.items():
        assert DEFAULT_TOLERANCES[key] == value


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    key, limit = CRITERIA[number]
    res = run_check(key)
    in_time = limit is None or res.seconds < limit
    ok = res.passed and in_time
    timing = "" if limit is None else f", {res.seconds:.2f} s of {limit:g} s"
    line = f"criterion {number} {'PASS' if ok else 'FAIL'} {key}: margin {res.margin:.3g}{timing} ({res.detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, res.detail
    assert in_time, f"{key} took {res.seconds:.2f} s, limit {limit} s"
