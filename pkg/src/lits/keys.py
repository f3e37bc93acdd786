"""Key validation shared by every structure in the package.

Keys are ASCII byte strings of 1 to 255 bytes. ``str`` keys are accepted at
the public API and encoded once on entry.
"""

from __future__ import annotations

MAX_KEY_LEN = 255


class InvalidKeyError(ValueError):
    """Raised for keys that are empty, too long or contain non-ASCII bytes."""


def as_key(key: bytes | str) -> bytes:
    if type(key) is not bytes:
        if isinstance(key, str):
            if not key.isascii():
                raise InvalidKeyError(f"non-ASCII key {key!r}")
            key = key.encode("ascii")
        elif isinstance(key, (bytearray, memoryview)):
            key = bytes(key)
        else:
            raise TypeError(f"keys must be bytes or str, got {type(key).__name__}")
    n = len(key)
    if n == 0 or n > MAX_KEY_LEN:
        raise InvalidKeyError(f"key length {n} outside [1, {MAX_KEY_LEN}]")
    if not key.isascii():
        raise InvalidKeyError(f"non-ASCII key {key!r}")
    return key


def probe_key(key: bytes | str) -> bytes | None:
    """Coerce a lookup key; returns None when no stored key could match it."""
    if type(key) is not bytes:
        if isinstance(key, str):
            if not key.isascii():
                return None
            key = key.encode("ascii")
        else:
            key = bytes(key)
    if not key or len(key) > MAX_KEY_LEN or not key.isascii():
        return None
    return key
