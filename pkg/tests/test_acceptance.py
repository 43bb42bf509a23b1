"""Acceptance campaign at full size: one test and one summary line per criterion.

Set ANTICONC_QUICK=1 for a reduced run (fewer specs, smaller N) while developing.
"""

import os
from dataclasses import replace

import pytest

from anticonc.campaign import CampaignConfig, determinism, run_campaign

from conftest import ACCEPTANCE_LINES

CFG = CampaignConfig()
if os.environ.get("ANTICONC_QUICK"):
    CFG = replace(CFG, n_specs=8, N=100_000, equi_N=50_000, equi_n=(4, 16, 64))


@pytest.fixture(scope="module")
def results():
    first = run_campaign(CFG)
    by_num = {r.name.split()[0]: r for r in first}
    by_num["9"] = determinism(first, run_campaign(CFG))
    for key in sorted(by_num, key=int):
        r = by_num[key]
        print(r.line())
        ACCEPTANCE_LINES.append(r.line())
    return by_num


@pytest.mark.parametrize("num", ["1", "2", "3", "4", "6", "7", "8", "9"])
def test_criterion(results, num):
    r = results[num]
    assert r.passed, r.line()


def test_criterion_5_var_mode_window(results):
    assert results["5"].data["window_fail"] == 0, results["5"].line()


def test_criterion_5_s_concavity(results):
    # Expected to fail: maxima of fields with unequal scales or means can have
    # densities whose box convolution is not (-1/6)-concave; see the README.
    r = results["5"]
    assert r.data["violations"] == 0, r.line()
