from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).resolve().parents[1] / "data" / "mnist5k"


def random_amps(rng, dim, batch=None):
    shape = (dim,) if batch is None else (batch, dim)
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


def kron_oracle(u, target, n):
    """Full matrix of ``u`` on ``target`` by enumerating basis pairs (qubit 0 = LSB)."""
    dim = 1 << n
    m = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            if (i & ~(1 << target)) == (j & ~(1 << target)):
                m[i, j] = u[(i >> target) & 1, (j >> target) & 1]
    return m


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def data_dir():
    if not (DATA_DIR / "train-images-idx3-ubyte.gz").exists():
        pytest.skip("bundled MNIST subset missing")
    return DATA_DIR


def idx_mutations(rng, data: bytes, count: int):
    """Yield ``(kind, payload)`` pairs: strict truncations, trailing junk and byte corruptions."""
    for i in range(count):
        kind = ("truncate", "extend", "corrupt")[i % 3]
        if kind == "truncate":
            yield kind, data[:int(rng.integers(0, len(data)))]
        elif kind == "extend":
            yield kind, data + bytes(rng.integers(0, 256, int(rng.integers(1, 5)), dtype=np.uint8))
        else:
            buf = bytearray(data)
            # bias towards the header, where corruption changes the structure
            pos = int(rng.integers(0, 16)) if rng.random() < 0.7 else int(rng.integers(0, len(buf)))
            pos = min(pos, len(buf) - 1)
            buf[pos] ^= int(rng.integers(1, 256))
            yield kind, bytes(buf)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
