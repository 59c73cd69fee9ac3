import numpy as np
import pytest

from grsattack import bench, nn

# desk-scale experiment shared by the slow tests and the acceptance suite
DESK = bench.ExperimentConfig()

_ACCEPTANCE_LINES = []


def record(criterion: int, passed: bool, detail: str) -> None:
    _ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion:>2}: {detail}")
    print(_ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


def random_model(rng, dims, activation="relu"):
    specs = [nn.LayerSpec(a, b, activation) for a, b in zip(dims[:-2], dims[1:-1])]
    specs.append(nn.LayerSpec(dims[-2], dims[-1], "identity"))
    model = nn.init_model(specs, int(rng.integers(2**32)))
    for b in model.biases:
        b[:] = rng.normal(scale=0.1, size=b.shape)
    return model


def linear_model(W, b):
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return nn.Classifier([nn.LayerSpec(W.shape[1], W.shape[0], "identity")], [W], [b])


@pytest.fixture(scope="session")
def desk_data():
    return bench.make_dataset(DESK.dataset)


@pytest.fixture(scope="session")
def desk_model(desk_data):
    return bench.fit_model(DESK, desk_data)
