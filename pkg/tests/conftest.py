import numpy as np
import pytest

from tipsynth import kernels
from tipsynth.synthetic import write_corpus
from tipsynth.threat import build_threat_library

BACKENDS = {
    "loops": (kernels.dilate_loops, kernels.erode_loops, kernels.fill_holes_loops, kernels.label_loops, kernels.blend_loops),
    "numpy": (kernels.dilate_numpy, kernels.erode_numpy, kernels.fill_holes_numpy, kernels.label_numpy, kernels.blend_numpy),
}


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Rebind the dispatching kernel names so public functions run on one backend."""
    dilate, erode, fill, label, blend = BACKENDS[request.param]
    monkeypatch.setattr(kernels, "dilate", dilate)
    monkeypatch.setattr(kernels, "erode", erode)
    monkeypatch.setattr(kernels, "fill_holes", fill)
    monkeypatch.setattr(kernels, "label", label)
    monkeypatch.setattr(kernels, "blend", blend)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Toy corpus: 3 bags, 2 signatures per class, plus the cropped signature library."""
    root = tmp_path_factory.mktemp("corpus")
    write_corpus(root, n_bags=3, n_threats=2, seed=7)
    build_threat_library(root / "scans", root / "library")
    return root



def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
