import sys

import pytest

from srgnav.categories import CategorySpace
from srgnav.presets import TINY_SPACE, tiny_config
from srgnav.world import build_scene, generate_scene

# living room | hallway | bedroom, one doorway cell in each dividing wall (row 2)
CORRIDOR_ROWS = [
    "00000#11111#22222",
    "00000#11111#22222",
    "00000011111122222",
    "00000#11111#22222",
    "00000#11111#22222",
]


@pytest.fixture
def corridor_scene():
    return build_scene(
        CORRIDOR_ROWS, ["living room", "hallway", "bedroom"],
        [("sofa", (0, 0)), ("cushion", (4, 1)), ("picture", (0, 8)), ("bed", (2, 15)),
         ("chest of drawers", (4, 16))],
        scene_id="corridor")


# living room | hallway | dining room | kitchen in a row
NARRATIVE_ROWS = [
    "0000#1111#2222#3333",
    "0000011111222223333",
    "0000#1111#2222#3333",
]


@pytest.fixture
def narrative_scene():
    return build_scene(NARRATIVE_ROWS, ["living room", "hallway", "dining room", "kitchen"],
                       [("sofa", (0, 0)), ("table", (0, 11)), ("sink", (2, 18))], scene_id="narrative")


@pytest.fixture(scope="session")
def tiny_scenes():
    cfg = tiny_config()
    return [generate_scene(cfg, 100 + i, f"tiny-{i}") for i in range(6)]


@pytest.fixture
def tiny_space() -> CategorySpace:
    return TINY_SPACE


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(module.RESULTS, key=lambda s: int(s.split("]")[1].split(".")[0])):
            terminalreporter.write_line(line)
