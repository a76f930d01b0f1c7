import numpy as np
import pytest

from skein.model import ChromatinModel, Part

# one-line metric summaries collected by the release-gate tests; shown
# as a block at the end of the run where fd capture cannot eat them
ACCEPTANCE_NOTES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_NOTES:
        terminalreporter.section("acceptance summary")
        for line in ACCEPTANCE_NOTES:
            terminalreporter.write_line(line)


def make_model(n=40, parts=1, seed=0, resolution_bp=5000, scale=1.0):
    """Random-walk model with the requested bin/part layout."""
    rng = np.random.default_rng(seed)
    steps = rng.normal(0, 1, (n, 3))
    steps /= np.linalg.norm(steps, axis=1, keepdims=True)
    pts = np.cumsum(steps * rng.uniform(0.5, 1.5, (n, 1)), axis=0) * scale
    sizes = [n // parts] * parts
    sizes[-1] += n - sum(sizes)
    part_list = []
    first = 0
    for i, size in enumerate(sizes):
        part_list.append(Part(f"chr{i + 1}", first, first + size - 1))
        first += size
    return ChromatinModel(name=f"rw{seed}", bins=pts, parts=tuple(part_list),
                          resolution_bp=resolution_bp)


@pytest.fixture
def helix_model():
    t = np.linspace(0, 4 * np.pi, 60)
    pts = np.c_[np.cos(t), np.sin(t), t * 0.2]
    return ChromatinModel(name="helix", bins=pts,
                          parts=(Part("chrA", 0, 59),), resolution_bp=10_000)


@pytest.fixture
def walk_model():
    return make_model(n=80, parts=2, seed=11)


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def sphere_prim(center, r, bin_id=0):
    from skein.geometry import KIND_SPHERE, ScenePrimitive

    return ScenePrimitive(KIND_SPHERE, np.r_[center, r], bin_id)


def cone_prim(pa, ra, pb, rb, bin_id=0):
    from skein.geometry import KIND_ROUNDED_CONE, ScenePrimitive

    return ScenePrimitive(KIND_ROUNDED_CONE, np.r_[pa, ra, pb, rb], bin_id)


def quad_prim(b0, b1, b2, r, bin_id=0):
    from skein.geometry import KIND_QUAD_SWEPT, ScenePrimitive

    return ScenePrimitive(KIND_QUAD_SWEPT, np.r_[b0, b1, b2, r], bin_id)
