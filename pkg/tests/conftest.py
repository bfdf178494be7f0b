import numpy as np
import pytest

from reluforge.network import Network


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_net(rng, sizes) -> Network:
    """Random network with the given layer sizes (input first, output last)."""
    weights = [rng.standard_normal((b, a)) for a, b in zip(sizes[:-1], sizes[1:])]
    biases = [rng.standard_normal(b) for b in sizes[1:-1]] + [np.zeros(sizes[-1])]
    return Network.from_arrays(weights, biases)


def reference_forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Plain per-sample forward pass, independent of ``evaluate``."""
    out = []
    for row in np.atleast_2d(x):
        h = row
        for layer in net.layers:
            z = layer.weight @ h + layer.bias
            h = np.maximum(z, 0) if layer.relu else z
        out.append(h)
    return np.array(out)


ACCEPTANCE: dict = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Store one criterion outcome for the end-of-run summary."""
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
