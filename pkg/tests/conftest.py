import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def scene0():
    from topnav.mapbuild.scene import generate_scene

    return generate_scene(0)


@pytest.fixture(scope="session")
def built0(scene0):
    from topnav.mapbuild.pipeline import build_maps

    return build_maps(scene0)


@pytest.fixture(scope="session")
def bundle0(built0):
    return built0[0]


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
