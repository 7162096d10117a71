"""Shared fixtures; the results store points at an in-memory database for every test run."""

import os

os.environ["DATABASE_URL"] = "sqlite://"
os.environ.setdefault("TURBO_WORKERS", "1")

import numpy as np
import pytest

from component.signal_service import IsiChannel, bpsk_modulate


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


@pytest.fixture
def h1():
    return IsiChannel.from_spec("h1")


@pytest.fixture
def h2():
    return IsiChannel.from_spec("h2")


@pytest.fixture
def short_channel():
    """Minimum phase two-tap channel, easy enough to equalize without errors at 20 dB"""
    return IsiChannel([1.0, 0.5], name="short")


@pytest.fixture
def random_frame(rng):
    def make(payload_len: int, guard: int):
        return bpsk_modulate(rng.integers(0, 2, payload_len), guard, guard)
    return make
