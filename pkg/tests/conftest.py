import numpy as np
import pytest

from mmvpipe import NDImage, write_ndt

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_RESULTS[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS.items():
        tag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{tag}] {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def make_image(shape, axes, seed=0, low=0.0, high=1.0):
    gen = np.random.default_rng(seed)
    data = gen.uniform(low, high, size=shape).astype(np.float32)
    return NDImage(data, axes)


def write_sample(path, shape=(4, 4), axes="YX", seed=0):
    img = make_image(shape, axes, seed=seed)
    write_ndt(img, path)
    return img


def synthetic_stain_image(stain_matrix, max_concentrations, side=64, io=255.0, seed=7):
    """Two-stain H&E-like image with pure-stain pixels pinning the extreme angles.

    Pure concentrations are kept high enough that no pure pixel falls below
    the default OD transparency threshold, and each pure cluster holds ~2%
    of all pixels so the robust percentile angles recover the generating
    vectors exactly. The per-stain 99th percentiles equal
    `max_concentrations` by construction.
    """
    gen = np.random.default_rng(seed)
    n = side * side
    pure = max(2 * n // 100, 8)
    c1 = gen.uniform(0.3, 1.6, size=n)
    c2 = gen.uniform(0.3, 1.0, size=n)
    c1[:pure] = gen.uniform(1.2, 1.6, pure)
    c2[:pure] = 0.0
    c1[pure : 2 * pure] = 0.0
    c2[pure : 2 * pure] = gen.uniform(0.8, 1.0, pure)
    c1 *= max_concentrations[0] / np.percentile(c1, 99)
    c2 *= max_concentrations[1] / np.percentile(c2, 99)
    concentrations = np.stack([c1, c2])
    rgb = io * np.exp(-(np.asarray(stain_matrix) @ concentrations))
    return NDImage(rgb.reshape(3, side, side).astype(np.float32), "CYX"), concentrations
