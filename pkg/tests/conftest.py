from __future__ import annotations

import os
import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# small alphabets make shared prefixes, collisions and cnode overflow common
SMALL = b"abc"
PRINTABLE = bytes(range(33, 127))


def keys_strategy(alphabet: bytes = SMALL, min_len: int = 1, max_len: int = 8):
    return st.binary(min_size=min_len, max_size=max_len).map(
        lambda b: bytes(alphabet[x % len(alphabet)] for x in b)).filter(bool)


def key_sets(alphabet: bytes = SMALL, min_size: int = 0, max_size: int = 80, max_len: int = 8):
    return st.sets(keys_strategy(alphabet, 1, max_len), min_size=min_size, max_size=max_size)


def rand_keys(n: int, seed: int = 0, alphabet: bytes = PRINTABLE, lo: int = 1, hi: int = 12) -> list[bytes]:
    rng = random.Random(seed)
    out: set[bytes] = set()
    while len(out) < n:
        out.add(bytes(rng.choices(alphabet, k=rng.randint(lo, hi))))
    return sorted(out)


@pytest.fixture
def rng():
    return random.Random(1234)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
