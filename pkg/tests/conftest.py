import numpy as np
import pytest

from mfpredict.tabular import Categorical, Continuous, Dataset

_CRITERIA = []


@pytest.fixture
def criterion():
    """Record an acceptance criterion outcome; a summary is printed at the end."""

    def record(number, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
        _CRITERIA.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERIA, key=lambda t: t[0]):
        terminalreporter.write_line(line)


def mixed_dataset(seed, n=60, p_cont=3, p_cat=1, levels=3, miss=0.2, link=True):
    """Random mixed-type dataset with MCAR holes.

    With ``link`` the columns share a latent factor so imputation has signal.
    """
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n)
    cols, kinds, names = [], [], []
    for j in range(p_cont):
        cols.append((z if link else 0) + rng.normal(scale=0.5, size=n))
        kinds.append(Continuous())
        names.append(f"x{j}")
    for j in range(p_cat):
        cut = np.quantile(z, np.linspace(0, 1, levels + 1)[1:-1])
        code = np.searchsorted(cut, z + rng.normal(scale=0.3, size=n)) if link else rng.integers(0, levels, n)
        cols.append(code.astype(float))
        kinds.append(Categorical(tuple(f"l{k}" for k in range(levels))))
        names.append(f"c{j}")
    values = np.column_stack(cols)
    mask = rng.random(values.shape) < miss
    # keep every column partly observed
    mask[: 2] = False
    return Dataset(names, kinds, values, mask)


@pytest.fixture
def small_mixed():
    return mixed_dataset(0)
