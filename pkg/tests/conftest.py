import functools
import re

import numpy as np
import pytest

from hyperdisp import corpus
from hyperdisp.classify import build_zone_report
from hyperdisp.roots import FrequencyGrid, track_field

# Analysis grids per dimension: (radius, nodes per axis).
ANALYSIS_GRIDS = {1: (4.0, 401), 2: (4.0, 41), 3: (3.0, 15)}


@functools.lru_cache(maxsize=None)
def zone_report_for(name, radius=None, count=None, min_radius=None):
    S = corpus.get(name)
    R, c = ANALYSIS_GRIDS[S.dimension]
    field = track_field(S, FrequencyGrid.cube(S.dimension, radius or R, count or c))
    region = None
    if min_radius is not None:
        region = np.linalg.norm(field.xi, axis=-1) >= min_radius - 1e-12
    return S, field, build_zone_report(S, field, region=region)


@pytest.fixture(scope="session")
def reports():
    return zone_report_for


_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = re.match(r"test_criterion_(\d+)", item.name)
    if m is None or not item.fspath.basename == "test_acceptance.py":
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = dict(item.user_properties).get("detail", "")
        if rep.outcome != "passed" and not detail:
            detail = str(rep.longrepr).strip().splitlines()[-1] if rep.longrepr else rep.outcome
        _RESULTS[int(m.group(1))] = (rep.outcome == "passed", item.name, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, name, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
