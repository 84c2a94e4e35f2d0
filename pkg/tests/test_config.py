import errno

import pytest

from modules import config
from modules.errors import (
    FormatError,
    GridMismatchError,
    MeshIOError,
    NotWatertightError,
    PartialDecompositionError,
    ResourceLimitError,
    ValidationError,
    exit_code_for,
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("SPHERECONV_THREADS", "SPHERECONV_PAIR_CAP", "SPHERECONV_SEED"):
        monkeypatch.delenv(name, raising=False)


def test_thread_count(monkeypatch):
    assert config.get_thread_count() >= 1
    monkeypatch.setenv("SPHERECONV_THREADS", "3")
    assert config.get_thread_count() == 3
    monkeypatch.setenv("SPHERECONV_THREADS", "0")
    assert config.get_thread_count() == 1
    monkeypatch.setenv("SPHERECONV_THREADS", "muchos")
    assert config.get_thread_count() == 1


def test_pair_cap(monkeypatch):
    assert config.get_pair_cap() == config.DEFAULT_PAIR_CAP
    monkeypatch.setenv("SPHERECONV_PAIR_CAP", "1e4")
    assert config.get_pair_cap() == 10000
    monkeypatch.setenv("SPHERECONV_PAIR_CAP", "   ")
    assert config.get_pair_cap() == config.DEFAULT_PAIR_CAP
    monkeypatch.setenv("SPHERECONV_PAIR_CAP", "x")
    assert config.get_pair_cap() == config.DEFAULT_PAIR_CAP


def test_seed(monkeypatch):
    assert config.get_default_seed() == 0
    monkeypatch.setenv("SPHERECONV_SEED", "42")
    assert config.get_default_seed() == 42
    monkeypatch.setenv("SPHERECONV_SEED", "4.2")
    assert config.get_default_seed() == 0


@pytest.mark.parametrize("error, code", [
    (ValidationError("x"), 2),
    (GridMismatchError("x"), 2),
    (MeshIOError("x"), 2),
    (FormatError("x"), 2),
    (NotWatertightError("x"), 3),
    (ResourceLimitError("x"), 4),
    (PartialDecompositionError("x"), 4),
    (FileNotFoundError(errno.ENOENT, "x"), 2),
    (RuntimeError("x"), 1),
])
def test_exit_codes(error, code):
    assert exit_code_for(error) == code
