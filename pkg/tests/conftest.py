import numpy as np
import pytest

from vamorph.dataset import augment_dataset, read_manifest
from vamorph.fixture import make_fixture
from vamorph.landmarks import validate_points
from vamorph.va_space import default_template


@pytest.fixture(scope="session")
def fixture_manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture")
    return make_fixture(root)


@pytest.fixture(scope="session")
def augmented(fixture_manifest, tmp_path_factory):
    """The 2-subject fixture expanded over the default template (built once)."""
    out = tmp_path_factory.mktemp("augmented")
    manifest, rejections = augment_dataset(read_manifest(fixture_manifest), default_template(), out)
    return manifest, rejections, out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def face_points(width=128, height=128, seed=0):
    """68 jittered points on a coarse lattice, well inside the frame."""
    g = np.random.default_rng(seed)
    xs, ys = np.meshgrid(np.linspace(20, width - 20, 9), np.linspace(20, height - 20, 8))
    pts = np.column_stack([xs.ravel(), ys.ravel()])[:68]
    pts = pts + g.uniform(-1.5, 1.5, pts.shape)
    return validate_points(pts, width, height)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
