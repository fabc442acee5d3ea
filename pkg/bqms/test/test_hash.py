import json

import numpy as np
import bqms as bq

h = bq.hash


def test_plain():
    """numpy values, complex numbers and non-finite floats become JSON values"""
    value = {"a": np.float64(1.5), "b": np.arange(3), "c": 1 + 2j, "d": float("nan"),
             "e": (np.bool_(True), np.int64(4)), 5: np.array([[1j]])}
    out = h.plain(value)
    assert out == {"a": 1.5, "b": [0, 1, 2], "c": [1.0, 2.0], "d": None,
                   "e": [True, 4], "5": [[[0.0, 1.0]]]}
    json.dumps(out, allow_nan=False)


def test_canonical_ignores_volatile_keys():
    """Key order and timestamps do not change the digest"""
    a = {"name": "x", "checks": [1, 2], "timestamp": "2024-01-01"}
    b = {"checks": [1, 2], "name": "x", "timestamp": "2025-06-30", "digest": "00"}
    assert h.canonical(a) == h.canonical(b)
    assert h.report(a) == h.report(b)
    assert h.report(a) != h.report({"name": "y", "checks": [1, 2]})


def test_file_digest(tmp_path):
    """File digests see content only, across read buffer boundaries"""
    p, q = tmp_path / "p", tmp_path / "q"
    p.write_bytes(b"x" * (h.BUFSIZE + 7))
    q.write_bytes(b"x" * (h.BUFSIZE + 7))
    assert h.at(p) == h.at(q)
    assert len(h.to_hex(h.at(p))) == 64
    q.write_bytes(b"x" * (h.BUFSIZE + 8))
    assert h.at(p) != h.at(q)
