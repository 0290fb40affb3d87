import os
from pathlib import Path

import pytest

from crossbar_bp import mnist_io

MNIST_DIR = Path(os.environ.get(mnist_io.DATA_ENV, "/root/data/mnist"))


def _have_mnist() -> bool:
    try:
        mnist_io.resolve_paths(MNIST_DIR)
    except FileNotFoundError:
        return False
    return True


HAVE_MNIST = _have_mnist()
needs_mnist = pytest.mark.skipif(not HAVE_MNIST, reason=f"MNIST not found in {MNIST_DIR}")


@pytest.fixture(scope="session")
def mnist():
    if not HAVE_MNIST:
        pytest.skip(f"MNIST not found in {MNIST_DIR}")
    return mnist_io.load_mnist(MNIST_DIR)


_CRITERIA: dict = {}


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    _CRITERIA[number] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number} {title}: {'PASS' if ok else 'FAIL'}"
                                    f" | {detail}")
