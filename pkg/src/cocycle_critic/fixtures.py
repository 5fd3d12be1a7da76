"""Closed-form cocycles used as controls and in the test-suite."""
from __future__ import annotations

import math

from . import riemann as rm
from .cocycle import OrbitSegment


def diagonal(a: complex, b: complex, n_min: int = -60, n_max: int = 60,
             id: str = "diag") -> OrbitSegment:
    """Constant diag(a, b): dominated whenever |a| != |b|."""
    return OrbitSegment.constant(rm.mat(a, 0, 0, b), n_min, n_max, id)


def synthetic_tangency(lam_u: float = 2.0, lam_s: float = 0.3, n_min: int = -40,
                       n_max: int = 40, events=(0,), id: str = "tangency") -> OrbitSegment:
    """diag(lam_u, lam_s) everywhere except an antidiagonal swap at ``events``.

    The swap [[0, s], [s, 0]] with s^2 = lam_u * lam_s keeps |det| constant
    and sends the expanding axis to the contracting one, so e1 at each event
    index is expanded in the past and neutral, then expanded, in the future.
    """
    s = math.sqrt(lam_u * lam_s)
    D = rm.mat(lam_u, 0, 0, lam_s)
    W = rm.mat(0, s, s, 0)
    ev = set(events)
    return OrbitSegment.from_function(lambda i: W if i in ev else D, n_min, n_max, id)


def rotation(theta: float, n_min: int = -60, n_max: int = 60, id: str = "rot") -> OrbitSegment:
    """Constant real rotation; conformal, so nothing is dominated."""
    c, s = math.cos(theta), math.sin(theta)
    return OrbitSegment.constant(rm.mat(c, -s, s, c), n_min, n_max, id)
