"""Linear cocycles over finite orbit windows.

An :class:`OrbitSegment` carries one invertible 2x2 matrix per step of a
base orbit.  Everything asymptotic in the theory ("for all n >= 0") is
evaluated here over a finite horizon ``1 <= n <= N`` with a log-domain slack,
``default_slack(N) = 1e-9 N + 1e-12`` unless the caller passes one.

Products are renormalised at every step and all inequalities are compared
in log form; ``|det A^n|`` underflows after a few hundred steps otherwise.

Index conventions: ``A^n`` at ``i`` is ``A_{i+n-1} ... A_i`` and
``A^-n`` at ``i`` is ``A_{i-n}^-1 ... A_{i-1}^-1``.  The chain rule reads
``g(n + m, xi) = g(n, M^m xi) g(m, xi)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

from . import riemann as rm
from .riemann import Direction, Mat2C

DET_FLOOR = 1e-300
GAP_FALLBACK = 1e-3
GRID_SIZE = 256


class WindowError(ValueError):
    pass


def default_slack(N: int) -> float:
    return 1e-9 * abs(N) + 1e-12


# ---------------------------------------------------------------- data model

@dataclass(frozen=True)
class OrbitSegment:
    """Base orbit window ``n_min .. n_max`` with ``matrices[k]`` acting at
    point ``n_min + k`` (fiber n to fiber n+1)."""

    id: str
    n_min: int
    matrices: tuple
    points: tuple = ()

    def __post_init__(self):
        mats = tuple(rm.mat(*A) for A in self.matrices)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "n_min", int(self.n_min))
        if self.n_min > 0 or self.n_max < 0:
            raise ValueError("orbit window must contain index 0")
        if self.points and len(self.points) != len(mats) + 1:
            raise ValueError("need one point per index: len(points) = len(matrices) + 1")
        for k, A in enumerate(mats):
            if not abs(rm.det(A)) > DET_FLOOR:
                raise ValueError(f"degenerate matrix at index {self.n_min + k}")
        object.__setattr__(self, "points", tuple(self.points))

    @property
    def n_max(self) -> int:
        return self.n_min + len(self.matrices)

    @classmethod
    def constant(cls, A: Mat2C, n_min: int, n_max: int, id: str = "const") -> "OrbitSegment":
        return cls(id, n_min, tuple([A] * (n_max - n_min)))

    @classmethod
    def from_function(cls, fn: Callable[[int], Mat2C], n_min: int, n_max: int,
                      id: str = "orbit") -> "OrbitSegment":
        return cls(id, n_min, tuple(fn(n) for n in range(n_min, n_max)))

    def matrix(self, i: int) -> Mat2C:
        if not self.n_min <= i < self.n_max:
            raise WindowError(f"no matrix at index {i}")
        return self.matrices[i - self.n_min]

    @cached_property
    def _inverses(self) -> tuple:
        return tuple(rm.inverse(A) for A in self.matrices)

    @cached_property
    def _logdets(self) -> tuple:
        return tuple(math.log(abs(rm.det(A))) for A in self.matrices)

    @cached_property
    def _logdet_prefix(self) -> tuple:
        out = [0.0]
        for x in self._logdets:
            out.append(out[-1] + x)
        return tuple(out)

    def step(self, i: int, sign: int) -> tuple[Mat2C, float]:
        """Matrix carrying fiber i to fiber i + sign, with its log|det|."""
        if sign > 0:
            k = i - self.n_min
            return self.matrices[k], self._logdets[k]
        k = i - 1 - self.n_min
        return self._inverses[k], -self._logdets[k]

    def check_window(self, index: int, n: int) -> None:
        lo, hi = min(index, index + n), max(index, index + n)
        if lo < self.n_min or hi > self.n_max:
            raise WindowError(
                f"window out of range: [{lo}, {hi}] not inside [{self.n_min}, {self.n_max}]")

    def has_window(self, index: int, n: int) -> bool:
        return self.n_min <= min(index, index + n) and max(index, index + n) <= self.n_max

    def log_abs_det(self, index: int, n: int) -> float:
        """log|det A^n| at ``index``; exact sum of per-step terms."""
        self.check_window(index, n)
        p = self._logdet_prefix
        a, b = index - self.n_min, index + n - self.n_min
        return p[b] - p[a]

    def reversed(self) -> "OrbitSegment":
        """The inverse cocycle over the time-reversed orbit: index n here is
        index -n of the original."""
        mats = tuple(reversed(self._inverses))
        pts = tuple(reversed(self.points)) if self.points else ()
        return OrbitSegment(self.id + "~rev", -self.n_max, mats, pts)

    def conjugated(self, L: Mat2C, suffix: str = "~H") -> "OrbitSegment":
        """Same cocycle written in the fiber coordinates ``w = L v``."""
        Li = rm.inverse(L)
        mats = tuple(rm.matmul(rm.matmul(L, A), Li) for A in self.matrices)
        return OrbitSegment(self.id + suffix, self.n_min, mats, self.points)


@dataclass(frozen=True)
class Beta:
    """A pair (beta_minus, beta_plus) with 0 < beta_plus <= beta_minus < 1."""

    beta_minus: float
    beta_plus: float

    def __post_init__(self):
        if not (0 < self.beta_plus <= self.beta_minus < 1):
            raise ValueError(f"beta {self.as_tuple()} is outside 0 < b+ <= b- < 1")

    def as_tuple(self) -> tuple[float, float]:
        return (self.beta_minus, self.beta_plus)


@dataclass(frozen=True)
class BlockQuery:
    alpha: float
    gamma: float = 1.0
    sign: int = 1
    horizon: int = 10
    slack: float | None = None
    strict: bool = False

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def tau(self) -> float:
        return default_slack(self.horizon) if self.slack is None else self.slack

    def thresholds(self) -> list[float]:
        lg, la = math.log(self.gamma), math.log(self.alpha)
        return [lg - n * la for n in range(self.horizon + 1)]


@dataclass
class LogMultiplierSeries:
    base_index: int
    direction: Direction
    values: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["n,log_g"]
        for n in sorted(self.values):
            lines.append(f"{n},{self.values[n]!r}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- products

def compose(orbit: OrbitSegment, index: int, n: int) -> tuple[Mat2C, float]:
    """A^n at ``index`` as (unit-Frobenius matrix, log of the removed scale)."""
    orbit.check_window(index, n)
    P = rm.IDENTITY
    log_scale = 0.0
    sign = 1 if n >= 0 else -1
    i = index
    for _ in range(abs(n)):
        A, _ld = orbit.step(i, sign)
        P = rm.matmul(A, P)
        s = rm.frobenius(P)
        P = rm.scale(P, 1.0 / s)
        log_scale += math.log(s)
        i += sign
    return P, log_scale


def _sweep(orbit: OrbitSegment, index: int, v, n: int):
    """Per-step accumulation of log g along ``n`` steps.

    Returns the cumulative values for k = 0..|n| and the final unit vector.
    """
    sign = 1 if n >= 0 else -1
    vals = [0.0]
    v = rm.unit_vec(v)
    i = index
    acc = 0.0
    for _ in range(abs(n)):
        A, ld = orbit.step(i, sign)
        w = rm.matvec(A, v)
        nw = rm.norm(w)
        acc += ld - 2.0 * math.log(nw)
        vals.append(acc)
        v = (w[0] / nw, w[1] / nw)
        i += sign
    return vals, v


def push(orbit: OrbitSegment, index: int, xi, n: int) -> Direction:
    """M^n xi, carried from fiber ``index`` to fiber ``index + n``."""
    orbit.check_window(index, n)
    return Direction.from_vec(_sweep(orbit, index, xi, n)[1])


def log_g(orbit: OrbitSegment, index: int, xi, n: int) -> float:
    """log g(n, xi) = log|det A^n| - 2 log|A^n v| for a unit v in xi."""
    orbit.check_window(index, n)
    return _sweep(orbit, index, xi, n)[0][-1]


def g_series(orbit: OrbitSegment, index: int, xi, n_back: int, n_fwd: int) -> LogMultiplierSeries:
    if n_back < 0 or n_fwd < 0:
        raise ValueError("n_back and n_fwd must be non-negative")
    orbit.check_window(index, -n_back)
    orbit.check_window(index, n_fwd)
    fwd, _ = _sweep(orbit, index, xi, n_fwd)
    back, _ = _sweep(orbit, index, xi, -n_back)
    values = {n: fwd[n] for n in range(n_fwd + 1)}
    for m in range(1, n_back + 1):
        values[-m] = back[m]
    d = xi if isinstance(xi, Direction) else Direction.from_vec(rm.unit_vec(xi))
    return LogMultiplierSeries(index, d, values)


def lyapunov_estimate(orbit: OrbitSegment, index: int, N: int) -> tuple[float, float]:
    """Finite-time exponents (1/N) log sigma_-, (1/N) log sigma_+ of A^N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    P, ls = compose(orbit, index, N)
    s_top, _ = rm.top_singular(P)
    log_top = math.log(s_top) + ls
    ld = orbit.log_abs_det(index, N)
    return (ld - log_top) / N, log_top / N


# ---------------------------------------------------------------- witnesses

@dataclass
class Witness:
    direction: Direction
    series: list            # log g(sign * n, direction) for n = 0..N
    gap: float              # log(sigma_+ / sigma_-) of the horizon iterate
    margin: float = math.nan
    source: str = "singular"


def extremal_witness(orbit: OrbitSegment, index: int, n: int) -> Witness:
    """Least-stretched right singular direction of A^n and its g-series.

    The series is evaluated from the far end: the image of the witness at
    time n is the least left singular direction, and pulling that back is
    the numerically stable direction of propagation (pushing the witness
    forward would amplify rounding by sigma_+ / sigma_- per unit horizon).
    """
    if n == 0:
        raise ValueError("horizon must be nonzero")
    orbit.check_window(index, n)
    P, ls = compose(orbit, index, n)
    s_top, v_top = rm.top_singular(P)
    log_top = math.log(s_top) + ls
    ld = orbit.log_abs_det(index, n)
    gap = 2.0 * log_top - ld
    v_low = rm.perp(v_top)
    u = rm.matvec(P, v_top)
    u_low = rm.perp((u[0] / s_top, u[1] / s_top))
    N = abs(n)
    back, _ = _sweep(orbit, index + n, u_low, -n)
    G = gap  # log g(n, v_low) = 2 log sigma_+ - log|det|
    series = [G + back[N - k] for k in range(N + 1)]
    series[0] = 0.0
    return Witness(Direction.from_vec(v_low), series, gap)


def _margin(series: Sequence[float], thresholds: Sequence[float]) -> float:
    return min(series[k] - thresholds[k] for k in range(1, len(thresholds)))


def _passes(margin: float, tau: float, strict: bool) -> bool:
    return margin > tau if strict else margin >= -tau


def _golden(f, lo: float, hi: float, iters: int = 40):
    r = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _line_max(f, base: Direction, w, iters: int = 40):
    """Maximise f over the projective line through ``base`` spanned with w."""
    u = base.rep

    def at(t):
        return Direction(math.cos(t) * u[0] + math.sin(t) * w[0],
                         math.cos(t) * u[1] + math.sin(t) * w[1])

    t, val = _golden(lambda t: f(at(t)), -math.pi / 2, math.pi / 2, iters)
    return at(t), val


def refine(f, start: Direction, partner: Direction | None = None,
           passes: int = 1, iters: int = 40) -> tuple[Direction, float]:
    """Golden-section refinement of a direction maximising f.

    One pass searches the line through ``start`` towards ``partner`` (or the
    two orthogonal lines through ``start`` when no partner is given); further
    passes alternate the two orthogonal lines through the current best.
    """
    best, best_val = start, f(start)
    for p in range(passes):
        if p == 0 and partner is not None:
            u, v = best.rep, partner.rep
            ip = rm.inner(u, v)
            w = (v[0] - ip * u[0], v[1] - ip * u[1])
            nw = rm.norm(w)
            lines = [(w[0] / nw, w[1] / nw)] if nw > 1e-15 else [rm.perp(u)]
        else:
            q = rm.perp(best.rep)
            lines = [q, (1j * q[0], 1j * q[1])]
        for w in lines:
            cand, val = _line_max(f, best, w, iters)
            if val > best_val:
                best, best_val = cand, val
    return best, best_val


_GRID_CACHE: dict = {}


def direction_grid(n: int = GRID_SIZE) -> list[Direction]:
    if n not in _GRID_CACHE:
        _GRID_CACHE[n] = rm.fibonacci_directions(n)
    return _GRID_CACHE[n]


def search_witness(orbit: OrbitSegment, index: int, sign: int, N: int,
                   thresholds: Sequence[float], tau: float, strict: bool = False,
                   grid: bool = True) -> Witness:
    """Best witness for ``log g(sign n, xi) >= thresholds[n]``, 1 <= n <= N.

    The singular candidate is tried first.  When the horizon iterate is
    nearly conformal (gap below ``GAP_FALLBACK``) the singular direction is
    meaningless and a Fibonacci grid plus one golden-section pass is used.
    The returned witness always carries its margin; callers decide.
    """
    w = extremal_witness(orbit, index, sign * N)
    w.margin = _margin(w.series, thresholds)
    if _passes(w.margin, tau, strict) or not grid or w.gap >= GAP_FALLBACK:
        return w

    def score(d: Direction) -> float:
        return _margin(_sweep(orbit, index, d.rep, sign * N)[0], thresholds)

    scored = sorted(((score(d), k, d) for k, d in enumerate(direction_grid())),
                    key=lambda t: (-t[0], t[1]))
    best_val, _, best = scored[0]
    partner = scored[1][2]
    ref, ref_val = refine(score, best, partner, passes=1)
    if ref_val > best_val:
        best, best_val, src = ref, ref_val, "refined"
    else:
        src = "grid"
    if best_val > w.margin:
        series = _sweep(orbit, index, best.rep, sign * N)[0]
        return Witness(best, series, w.gap, best_val, src)
    return w


# ---------------------------------------------------------------- queries

def block_membership(orbit: OrbitSegment, index: int, q: BlockQuery) -> Direction | None:
    """Witness that ``index`` lies in the block gamma H^sign(alpha), or None."""
    w = block_witness(orbit, index, q)
    return w.direction if _passes(w.margin, q.tau, q.strict) else None


def block_witness(orbit: OrbitSegment, index: int, q: BlockQuery) -> Witness:
    orbit.check_window(index, q.sign * q.horizon)
    return search_witness(orbit, index, q.sign, q.horizon, q.thresholds(), q.tau, q.strict)


def _orbit_list(orbit_set) -> list:
    if isinstance(orbit_set, OrbitSegment):
        return [orbit_set]
    return list(orbit_set)


def fit_dissipation(orbit_set) -> float:
    """Smallest b with |det A^n| <= b^n (C = 1) over every window."""
    best = -math.inf
    for orb in _orbit_list(orbit_set):
        p = orb._logdet_prefix
        L = len(orb.matrices)
        for a in range(L):
            for b in range(a + 1, L + 1):
                best = max(best, (p[b] - p[a]) / (b - a))
    return math.exp(best)


def dissipation_check(orbit_set, b: float, C: float = 1.0,
                      slack: float | None = None) -> tuple[bool, float]:
    """Check log|det A^n| <= log C + n log b over every start and length.

    Returns (ok, worst margin); margin is ``log C + n log b - log|det A^n|``.
    """
    if not 0 < b < 1:
        raise ValueError("b must lie in (0, 1)")
    if C <= 0:
        raise ValueError("C must be positive")
    lb, lc = math.log(b), math.log(C)
    worst = math.inf
    longest = 1
    for orb in _orbit_list(orbit_set):
        p = orb._logdet_prefix
        L = len(orb.matrices)
        longest = max(longest, L)
        for a in range(L):
            for n in range(1, L - a + 1):
                worst = min(worst, lc + n * lb - (p[a + n] - p[a]))
    tau = default_slack(longest) if slack is None else slack
    if worst == math.inf:
        worst = 0.0
    return worst >= -tau, worst


@dataclass
class SectionResult:
    ok: bool
    worst_index: int | None
    worst_log_g: float
    max_image_radius: float | None = None


def contractive_section_test(orbit_set, section, k: int, eta: float,
                             radius: float | None = None, inv_tol: float = 1e-6) -> SectionResult:
    """Check log g(k, sigma(z)) < log eta for an invariant section sigma.

    ``section`` maps an index to a Direction (a dict or a callable); the same
    map is used for every orbit.  With ``radius`` the disc variant is also
    evaluated: 32 boundary points of the spherical disc of that radius are
    pushed k steps and the largest distance to the image centre is reported.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    get = section if callable(section) else section.get
    worst_val, worst_idx, worst_rad = -math.inf, None, None
    log_eta = math.log(eta)
    for orb in _orbit_list(orbit_set):
        for i in range(orb.n_min, orb.n_max):
            s0, s1 = get(i), get(i + 1)
            if s0 is None or s1 is None:
                continue
            if rm.spherical_distance(push(orb, i, s0, 1), s1) > inv_tol:
                raise ValueError("section not invariant")
        for i in range(orb.n_min, orb.n_max - k + 1):
            s0 = get(i)
            if s0 is None:
                continue
            val = log_g(orb, i, s0, k)
            if val > worst_val:
                worst_val, worst_idx = val, i
            if radius is not None:
                U = rm.isometry_to_zero(s0)
                Ui = rm.adjoint(U)
                rr = math.tan(radius / 2)
                target = push(orb, i, s0, k)
                for j in range(32):
                    w = rr * complex(math.cos(2 * math.pi * j / 32), math.sin(2 * math.pi * j / 32))
                    p = rm.mobius_apply(Ui, w)
                    d = rm.spherical_distance(push(orb, i, p, k), target)
                    worst_rad = d if worst_rad is None else max(worst_rad, d)
    ok = worst_idx is not None and worst_val < log_eta
    if radius is not None and worst_rad is not None:
        ok = ok and worst_rad < radius
    return SectionResult(ok, worst_idx, worst_val, worst_rad)


# ---------------------------------------------------------------- certificates

@dataclass
class CertificateEntry:
    orbit_id: str
    index: int
    direction: Direction
    margin: float


@dataclass
class DominationCertificate:
    lam: float
    C: float
    horizon: int
    slack: float
    per_point: list
    passed: bool

    @property
    def min_margin(self) -> float:
        return min((e.margin for e in self.per_point), default=math.nan)

    def to_json(self) -> dict:
        from .serial import enc_direction
        return {
            "lambda": self.lam, "C": self.C, "horizon": self.horizon,
            "slack": self.slack, "pass": self.passed,
            "min_margin": None if not self.per_point else self.min_margin,
            "per_point": [
                {"orbit": e.orbit_id, "index": e.index,
                 "direction": enc_direction(e.direction), "margin": e.margin}
                for e in self.per_point
            ],
        }


def _pmap(fn, items, threads: int):
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def domination_certificate(orbit_set, N: int, lam: float, C: float = 1.0,
                           slack: float | None = None, indices: Iterable[int] | None = None,
                           threads: int = 1) -> DominationCertificate:
    """Test ``g(n, tau_z) >= C lam^n`` for 1 <= n <= N at every start index.

    The witness at each start is the direction maximising growth over the
    horizon (least-stretched singular direction of A^N), with the grid
    fallback when A^N is nearly conformal.  Reduction is in input order, so
    the result does not depend on ``threads``.
    """
    if lam <= 1 or C <= 0:
        raise ValueError("need lam > 1 and C > 0")
    tau = default_slack(N) if slack is None else slack
    thr = [math.log(C) + n * math.log(lam) for n in range(N + 1)]
    jobs = []
    for orb in _orbit_list(orbit_set):
        idx = range(orb.n_min, orb.n_max - N + 1) if indices is None else indices
        jobs.extend((orb, i) for i in idx if orb.has_window(i, N))

    def run(job):
        orb, i = job
        w = search_witness(orb, i, 1, N, thr, tau)
        return CertificateEntry(orb.id, i, w.direction, w.margin)

    entries = _pmap(run, jobs, threads)
    ok = bool(entries) and all(e.margin >= -tau for e in entries)
    return DominationCertificate(lam, C, N, tau, entries, ok)


@dataclass
class CriteriaResult:
    ok: bool
    witnesses: list         # (orbit_id, index, direction, worst margin)


def _base_indices(orb: OrbitSegment, indices):
    return (0,) if indices is None else tuple(indices)


def criteria_domination_check(orbit_set, k0: int, m0: int, beta: float,
                              horizon: int = 20, slack: float | None = None,
                              indices: Iterable[int] | None = None) -> CriteriaResult:
    """Hypothesis tester for the domination criterion.

    At each sampled point (index 0 of every orbit unless ``indices`` says
    otherwise) xi_z is the past-expanded singular direction, and we require
    ``log g(k0, M^m xi_z) <= -k0 log beta`` for every m0 < m with
    ``m + k0`` inside the window.  A positive answer at finite horizon is
    evidence, not proof; the converse is not claimed.
    """
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    tau = default_slack(k0) if slack is None else slack
    bound = -k0 * math.log(beta)
    ok = True
    wit = []
    for orb in _orbit_list(orbit_set):
        for i in _base_indices(orb, indices):
            h = min(horizon, i - orb.n_min)
            span = orb.n_max - i
            if h < 1 or span < m0 + 1 + k0:
                raise WindowError("window too short for the criterion")
            xi = extremal_witness(orb, i, -h).direction
            vals, _ = _sweep(orb, i, xi.rep, span)
            worst = min(bound - (vals[m + k0] - vals[m]) for m in range(m0 + 1, span - k0 + 1))
            wit.append((orb.id, i, xi, worst))
            if worst < -tau:
                ok = False
    return CriteriaResult(ok, wit)


def property_P_witness(orbit_set, beta0: float, k: int, m_min: int = 1,
                       indices: Iterable[int] | None = None, slack: float | None = None):
    """First (orbit_id, index, direction, m_k) exhibiting property P(beta0).

    Needs ``g(-n, xi) >= beta0^-n`` for 1 <= n <= k and
    ``g(k, M^m xi) >= 1`` for some ``m_min <= m <= n_max - k``.  Points are
    scanned in input order (index 0 of each orbit by default), candidates
    are the past-singular direction then the direction grid.
    """
    if not 0 < beta0 < 1:
        raise ValueError("beta0 must lie in (0, 1)")
    tau = default_slack(k) if slack is None else slack
    thr = [-n * math.log(beta0) for n in range(k + 1)]
    for orb in _orbit_list(orbit_set):
        for i in _base_indices(orb, indices):
            if not orb.has_window(i, -k) or i + m_min + k > orb.n_max:
                continue
            w = extremal_witness(orb, i, -k)
            cands = [(w.direction, w.series)]
            if w.gap < GAP_FALLBACK:
                cands += [(d, _sweep(orb, i, d.rep, -k)[0]) for d in direction_grid()]
            for d, back in cands:
                if _margin(back, thr) < -tau:
                    continue
                span = orb.n_max - i
                vals, _ = _sweep(orb, i, d.rep, span)
                for m in range(m_min, span - k + 1):
                    if vals[m + k] - vals[m] >= -tau:
                        return (orb.id, i, d, m)
    return None
