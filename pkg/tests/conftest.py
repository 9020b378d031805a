import os

import pytest
from hypothesis import settings

from tilingaf import tilingsys as ts
from tilingaf.cli import builtin_text, preprocessed_chair

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def sq():
    return ts.loads_system(builtin_text("sq"), "sq")


@pytest.fixture(scope="session")
def chair():
    return ts.loads_system(builtin_text("chair"), "chair")


@pytest.fixture(scope="session")
def chair4():
    """Collared chair, fourth power: border forcing with period-one corners."""
    return preprocessed_chair()


@pytest.fixture(scope="session")
def chair4_atlas(chair4):
    from tilingaf.affability import build_atlas

    return build_atlas(chair4)


def fresh(name):
    return ts.loads_system(builtin_text(name), name)


@pytest.fixture(scope="session")
def chair4_F(chair4):
    from tilingaf.affability import choose_F

    return choose_F(chair4)


@pytest.fixture(scope="session")
def chair4_flip(chair4, chair4_atlas):
    from tilingaf.affability import verify_border_flip

    return verify_border_flip(chair4, chair4_atlas)


@pytest.fixture(scope="session")
def chair4_cross(chair4, chair4_atlas, chair4_F):
    from tilingaf.affability import cross_relation_check

    return cross_relation_check(chair4, chair4_atlas, chair4_F, 8)


@pytest.fixture(scope="session")
def chair4_disjointness(chair4, chair4_atlas):
    from tilingaf.affability import atlas_disjointness

    return atlas_disjointness(chair4, chair4_atlas)


@pytest.fixture(scope="session")
def sq_recode_table(sq):
    """``(prefix, v) -> recoded prefix`` for every SQ prefix of length at most
    3 and every puncture ``v`` of its placed supertile."""
    from tilingaf import pathspace as ps

    table = {}
    for n in range(1, 4):
        for w in ps.enumerate_paths(sq, n):
            for t in ps.place_path(sq, w).tiles:
                table[(w, t.pos)] = ps.recode_translation(sq, ps.PathSpec(w), t.pos, n).prefix
    return table


ACCEPTANCE = {}


@pytest.fixture
def record():
    def _record(number, ok, detail=""):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}" + (f"  {detail}" if detail else "")
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
