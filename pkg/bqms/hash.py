"""Content digests for run reports, so two runs of one scenario can be
compared byte for byte."""

import binascii
import hashlib
import json
import math
from typing import Any

import numpy as np

_HASHER_IMPL = hashlib.sha256  # 256 bits
"""Only needs to be well distributed: a digest identifies a report, it does
not authenticate it."""

BUFSIZE = (64 * 1024)  # 64k

VOLATILE_KEYS = ("timestamp", "digest", "elapsed")
"""Report keys left out of the digest because they differ between otherwise
identical runs."""


def to_hex(hash_bytes: bytes) -> str:
    return binascii.hexlify(hash_bytes).decode("ascii")


def plain(value: Any) -> Any:
    """Turns numpy scalars and arrays, complex numbers and tuples into JSON
    values. Complex numbers become `[re, im]` pairs and
    non-finite floats become `null`."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def canonical(report: dict) -> bytes:
    """Sorted-key JSON of `report` without its volatile keys."""
    kept = {k: v for k, v in report.items() if k not in VOLATILE_KEYS}
    return json.dumps(plain(kept), sort_keys=True, separators=(",", ":"),
                      allow_nan=False).encode("utf-8")


def report(value: dict) -> bytes:
    """Returns a digest of a run report."""
    return _HASHER_IMPL(canonical(value)).digest()


def at(path) -> bytes:
    """Digest of the bytes of a file, read BUFSIZE at a time."""
    hasher = _HASHER_IMPL()
    with open(str(path), "rb") as fp:
        while True:
            data = fp.read(BUFSIZE)
            if not data:
                break
            hasher.update(data)
    return hasher.digest()
