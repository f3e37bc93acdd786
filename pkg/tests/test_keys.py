from __future__ import annotations

import pytest

from lits.keys import MAX_KEY_LEN, InvalidKeyError, as_key, probe_key


def test_str_and_bytes_accepted():
    assert as_key("abc") == b"abc"
    assert as_key(b"abc") == b"abc"
    assert as_key(bytearray(b"x")) == b"x"
    assert as_key(memoryview(b"yz")) == b"yz"


@pytest.mark.parametrize("bad", ["", b"", "é", b"\xc3\xa9", b"a" * (MAX_KEY_LEN + 1)])
def test_invalid_keys_rejected(bad):
    with pytest.raises(InvalidKeyError):
        as_key(bad)
    assert probe_key(bad) is None


def test_max_length_ok():
    assert len(as_key(b"a" * MAX_KEY_LEN)) == MAX_KEY_LEN


def test_wrong_type():
    with pytest.raises(TypeError):
        as_key(5)
