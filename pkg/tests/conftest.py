import numpy as np
import pytest

from dnlfa import kernels
from dnlfa.model import BiasBank, Hyperparameters, Model, Variant


def random_model(ds, d1=3, d2=2, lam=0.1, seed=0, low=0.1, high=1.0, variant=Variant.EBNL, mask_density=1.0):
    """Model with every state entry uniform on [low, high]; optional random masks."""
    rng = np.random.default_rng(seed)
    hp = Hyperparameters(d1=d1, d2=d2, lam=lam, variant=variant if d2 else Variant.NLFA, e=0.01)
    M, N = ds.num_rows, ds.num_cols
    X = rng.uniform(low, high, (M, d1))
    Y = rng.uniform(low, high, (N, d1))
    biases = None
    if d2:
        I = (rng.random((M, d2)) < mask_density).astype(np.uint8)
        J = (rng.random((N, d2)) < mask_density).astype(np.uint8)
        biases = BiasBank(rng.uniform(low, high, (M, d2)), rng.uniform(low, high, (N, d2)), I, J)
    return Model(hp, X, Y, biases, ds.row_ids, ds.col_ids)


BACKENDS = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, title, ok, detail=""):
    ACCEPTANCE_LINES.append(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
