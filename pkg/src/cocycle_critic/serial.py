"""JSON encodings shared by every file format of the package."""
from __future__ import annotations

import hashlib
import json
import math

from .riemann import Direction, is_infinite

SCHEMA_VERSION = 1


def enc_complex(z) -> list:
    z = complex(z)
    return [_clean(z.real), _clean(z.imag)]


def dec_complex(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if not isinstance(x, (list, tuple)) or len(x) != 2:
        raise ValueError(f"expected [re, im], got {x!r}")
    z = complex(float(x[0]), float(x[1]))
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError("non-finite complex value")
    return z


def enc_point(z):
    if is_infinite(z):
        return "inf"
    return enc_complex(z)


def dec_point(x):
    if x == "inf":
        return math.inf
    return dec_complex(x)


def enc_direction(d: Direction) -> list:
    return [enc_complex(d.v1), enc_complex(d.v2)]


def dec_direction(x) -> Direction:
    return Direction(dec_complex(x[0]), dec_complex(x[1]))


def _clean(x: float) -> float:
    # -0.0 and 0.0 print differently; keep output canonical
    return 0.0 if x == 0 else float(x)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()[:16]
