"""Sequence lemmas: Pliss hyperbolic times and the polygonal time shift."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RealSeq:
    """Finite window of a real sequence; ``values[0]`` sits at ``offset``."""

    values: tuple
    offset: int = 0

    def __post_init__(self):
        vals = tuple(float(x) for x in self.values)
        if not all(math.isfinite(x) for x in vals):
            raise ValueError("sequence entries must be finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + len(self.values) - 1

    def __getitem__(self, n: int) -> float:
        if not self.lo <= n <= self.hi:
            raise IndexError(f"index {n} outside [{self.lo}, {self.hi}]")
        return self.values[n - self.offset]


@dataclass(frozen=True)
class PlissParams:
    gamma0: float
    gamma1: float
    a_bound: float

    def __post_init__(self):
        if not 0 < self.gamma1 < self.gamma0:
            raise ValueError("need 0 < gamma1 < gamma0")
        if not (self.a_bound > self.gamma0 and self.a_bound >= 1.0 / self.gamma1):
            raise ValueError("need a_bound > gamma0 and a_bound >= 1/gamma1")


def _as_values(seq) -> list[float]:
    if isinstance(seq, RealSeq):
        return list(seq.values)
    return [float(x) for x in seq]


def hyperbolic_times_log(log_a: Sequence[float], log_gamma1: float) -> list[int]:
    """Hyperbolic times from log factors; see :func:`hyperbolic_times`."""
    n = len(log_a)
    if n == 0:
        return []
    # S[s] = sum_{l=1}^{s} (log a_l - log gamma1); k is hyperbolic iff
    # S[k] <= S[s] for every k < s < n
    S = [0.0] * n
    for s in range(1, n):
        S[s] = S[s - 1] + (log_a[s] - log_gamma1)
    out = []
    suffix_min = math.inf
    for k in range(n - 1, -1, -1):
        if S[k] <= suffix_min:
            out.append(k)
        suffix_min = min(suffix_min, S[k])
    out.reverse()
    return out


def hyperbolic_times(seq, gamma1: float) -> list[int]:
    """Indices k in [0, n) such that every partial product
    a_{k+1} ... a_s (k < s < n) is at least gamma1^(s-k).

    Linear time: one backward pass keeping the running minimum of cumulative
    logs.  The last index is always included (its condition is empty).
    """
    vals = _as_values(seq)
    if any(not x > 0 for x in vals):
        raise ValueError("hyperbolic_times needs positive entries")
    if not gamma1 > 0:
        raise ValueError("gamma1 must be positive")
    return hyperbolic_times_log([math.log(x) for x in vals], math.log(gamma1))


def pliss_constants(p: PlissParams) -> tuple[int, float]:
    """(N0, delta0) from the counting argument behind Pliss's lemma.

    delta0 = (log g0 - log g1) / (log a - log g1) and N0 is the least n
    with n * delta0 >= 1.
    """
    lg1 = math.log(p.gamma1)
    delta0 = (math.log(p.gamma0) - lg1) / (math.log(p.a_bound) - lg1)
    N0 = max(1, math.ceil(1.0 / delta0))
    while N0 * delta0 < 1.0:
        N0 += 1
    while N0 > 1 and (N0 - 1) * delta0 >= 1.0:
        N0 -= 1
    return N0, delta0


def shift_to_hyperbolic(series, gamma0: float, gamma1: float, n: int) -> int | None:
    """Shift j after which every partial growth beats gamma1.

    ``series[k]`` is log g(k, xi) for 0 <= k <= n (a list, a RealSeq starting
    at 0, or a LogMultiplierSeries).  With per-step factors
    a_l = g(1, M^l xi), j = k0 + 1 where k0 is the lowest hyperbolic time, so
    that g(i, M^j xi) >= gamma1^i for 0 < i <= n - j.  Returns None when
    g(n, xi) < gamma0^n, since then the statement does not apply.
    """
    if not 0 < gamma1 < gamma0:
        raise ValueError("need 0 < gamma1 < gamma0")
    if hasattr(series, "values") and isinstance(series.values, dict):
        vals = [series.values[k] for k in range(n + 1)]
    elif isinstance(series, RealSeq):
        vals = [series[k] for k in range(n + 1)]
    else:
        vals = [float(series[k]) for k in range(n + 1)]
    if vals[n] < n * math.log(gamma0):
        return None
    log_a = [vals[l + 1] - vals[l] for l in range(n)]
    ht = hyperbolic_times_log(log_a, math.log(gamma1))
    return ht[0] + 1


class LemmaHypothesisError(ValueError):
    def __init__(self, index: int, which: str):
        super().__init__(f"lemma hypotheses fail: ({which}) violated at index {index}")
        self.index = index
        self.which = which


def check_shift_hypotheses(seq: RealSeq, n0: int, n1: int, delta_minus: float,
                           delta_plus: float, tol: float = 0.0) -> None:
    a0, a1 = seq[n0], seq[n1]
    for n in range(seq.lo, n0 + 1):
        if seq[n] - a0 < (n - n0) * delta_minus - tol:
            raise LemmaHypothesisError(n, "a")
    for n in range(n1, seq.hi + 1):
        if seq[n] - a1 < (n - n1) * delta_plus - tol:
            raise LemmaHypothesisError(n, "b")


def shift_is_valid(seq: RealSeq, N: int, delta_minus: float, delta_plus: float,
                   tol: float = 1e-9) -> bool:
    """Whether a_{N-n} - a_N >= -n d- and a_{N+n} - a_N >= n d+ on the window."""
    aN = seq[N]
    scale = tol * (1.0 + abs(aN))
    for x in range(seq.lo, seq.hi + 1):
        d = delta_minus if x <= N else delta_plus
        if seq[x] - aN < (x - N) * d - scale * (1 + abs(x - N)):
            return False
    return True


def tangency_shift(seq: RealSeq, n0: int, n1: int, delta_minus: float, delta_plus: float,
                   tol: float = 0.0) -> int:
    """Time N in [n0, n1] with a_{N-n} - a_N >= -n d- and a_{N+n} - a_N >= n d+.

    Follows the polygon construction: after shifting the sequence by
    min(a_{n0}, a_{n1}), let d- be the intercept of the lowest line of slope
    d- touching the graph over [n0, 0] and d+ the same for slope d+ over
    [0, n1].  If d- <= d+ the answer is the largest touching integer in
    [n0, 0], otherwise the smallest touching integer in [0, n1].

    Outside the window the sequence is taken to continue along the slopes
    d- (left) and d+ (right); the hypotheses then hold there automatically
    and so does the conclusion.
    """
    if not (n0 <= 0 <= n1):
        raise ValueError("need n0 <= 0 <= n1")
    if not (delta_plus <= delta_minus < 0):
        raise ValueError("need delta_plus <= delta_minus < 0")
    if seq.lo > n0 or seq.hi < n1:
        raise ValueError("sequence must cover [n0, n1]")
    check_shift_hypotheses(seq, n0, n1, delta_minus, delta_plus, tol)
    c = min(seq[n0], seq[n1])
    left = [(seq[x] - c - x * delta_minus, x) for x in range(n0, 1)]
    right = [(seq[x] - c - x * delta_plus, x) for x in range(0, n1 + 1)]
    d_minus = min(v for v, _ in left)
    d_plus = min(v for v, _ in right)
    scale = 1.0 + max(abs(v) for v, _ in left + right)
    tie = 1e-12 * scale
    if d_minus <= d_plus + tie:
        return max(x for v, x in left if v <= d_minus + tie)
    return min(x for v, x in right if v <= d_plus + tie)
