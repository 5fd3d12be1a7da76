"""Critical points of a cocycle at finite horizon.

A direction xi at index i is beta-critical at the times (n-, n+) when

    g(-n, M^{n-} xi) >= beta_-^{-n}   and   g(n, M^{n+} xi) >= beta_+^{n}

for 1 <= n <= K: expanded in the past, never crushed in the future.  The
backward condition is the selective one, so candidates come from the
past-expanded singular direction (unique when the gap is large).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import cocycle as cc
from . import pliss
from . import riemann as rm
from .cocycle import Beta, BlockQuery, OrbitSegment, WindowError, default_slack
from .riemann import Direction


def beta_leq(alpha: Beta, beta: Beta) -> bool:
    """True when beta >= alpha in the order of Delta: beta_+ <= alpha_+ and
    beta_- >= alpha_-.  Larger beta means a stricter critical condition
    is *weaker*, so Crit(beta) is contained in Crit(alpha)."""
    return beta.beta_plus <= alpha.beta_plus and beta.beta_minus >= alpha.beta_minus


@dataclass
class CriticalReport:
    orbit_id: str
    index: int
    direction: Direction
    beta: Beta
    times: tuple
    horizon: int
    min_margin_back: float
    min_margin_fwd: float
    slack: float
    inverse: bool = False

    def to_json(self) -> dict:
        from .serial import enc_direction
        return {
            "orbit": self.orbit_id, "index": self.index,
            "direction": enc_direction(self.direction),
            "beta": [self.beta.beta_minus, self.beta.beta_plus],
            "times": list(self.times), "K": self.horizon,
            "margin_back": self.min_margin_back, "margin_fwd": self.min_margin_fwd,
            "slack": self.slack, "inverse": self.inverse,
        }


def _margins(back: list, fwd: list, beta: Beta, K: int) -> tuple[float, float]:
    lm, lp = math.log(beta.beta_minus), math.log(beta.beta_plus)
    mb = min((back[n] + n * lm for n in range(1, K + 1)), default=math.inf)
    mf = min((fwd[n] - n * lp for n in range(1, K + 1)), default=math.inf)
    return mb, mf


def is_critical_at_times(orbit: OrbitSegment, index: int, beta: Beta, times: tuple,
                         K: int, xi, slack: float | None = None) -> tuple[bool, tuple]:
    """Check the two critical inequalities for xi at ``index`` and the given
    times.  Returns (passed, (margin_back, margin_fwd)) in log form."""
    n_minus, n_plus = times
    if n_minus > 0 or n_plus < 0:
        raise ValueError("times must satisfy n- <= 0 <= n+")
    if not (orbit.has_window(index, n_minus - K) and orbit.has_window(index, n_plus + K)):
        raise WindowError("window too short for the critical check")
    tau = default_slack(K) if slack is None else slack
    d_minus = cc.push(orbit, index, xi, n_minus)
    d_plus = cc.push(orbit, index, xi, n_plus)
    back, _ = cc._sweep(orbit, index + n_minus, d_minus.rep, -K)
    fwd, _ = cc._sweep(orbit, index + n_plus, d_plus.rep, K)
    mb, mf = _margins(back, fwd, beta, K)
    return (mb >= -tau and mf >= -tau), (mb, mf)


@dataclass
class _Candidate:
    direction: Direction
    back: list
    fwd: list


def critical_candidates(orbit: OrbitSegment, index: int, K: int) -> list:
    """Past-expanded singular direction first; the direction grid as well
    when A^-K is too close to conformal for that direction to mean much.

    The backward series of the singular candidate is evaluated from the
    anchored end (stable); forward series are plain sweeps, which are
    stable for a past-expanded direction.
    """
    if not (orbit.has_window(index, -K) and orbit.has_window(index, K)):
        raise WindowError("window too short: detection needs [index-K, index+K]")
    w = cc.extremal_witness(orbit, index, -K)
    fwd, _ = cc._sweep(orbit, index, w.direction.rep, K)
    out = [_Candidate(w.direction, w.series, fwd)]
    if w.gap < cc.GAP_FALLBACK:
        for d in cc.direction_grid():
            back, _ = cc._sweep(orbit, index, d.rep, -K)
            fwd, _ = cc._sweep(orbit, index, d.rep, K)
            out.append(_Candidate(d, back, fwd))
    return out


def _first_passing(cands, beta: Beta, K: int, tau: float):
    for c in cands:
        mb, mf = _margins(c.back, c.fwd, beta, K)
        if mb >= -tau and mf >= -tau:
            return c, mb, mf
    return None


def detect_critical(orbit: OrbitSegment, index: int, beta: Beta, K: int,
                    slack: float | None = None, candidates=None) -> CriticalReport | None:
    """Report a beta-critical point at ``index`` (times (0, 0)) or None."""
    if K < 1:
        raise ValueError("K must be >= 1")
    tau = default_slack(K) if slack is None else slack
    cands = critical_candidates(orbit, index, K) if candidates is None else candidates
    hit = _first_passing(cands, beta, K, tau)
    if hit is None:
        return None
    c, mb, mf = hit
    return CriticalReport(orbit.id, index, c.direction, beta, (0, 0), K, mb, mf, tau)


def scan_point(orbit: OrbitSegment, index: int, betas, K: int,
               slack: float | None = None) -> list:
    """For each beta: (beta, report or None, (margin_back, margin_fwd)).

    The candidates are computed once.  A failing beta reports the margins
    of the candidate that comes closest, i.e. maximises min(back, fwd).
    """
    tau = default_slack(K) if slack is None else slack
    cands = critical_candidates(orbit, index, K)
    out = []
    for beta in betas:
        rep = detect_critical(orbit, index, beta, K, tau, candidates=cands)
        if rep is not None:
            out.append((beta, rep, (rep.min_margin_back, rep.min_margin_fwd)))
            continue
        best = max((_margins(c.back, c.fwd, beta, K) for c in cands), key=min)
        out.append((beta, None, best))
    return out


def detect_critical_value(orbit: OrbitSegment, index: int, beta: Beta, K: int,
                          slack: float | None = None) -> CriticalReport | None:
    """Critical point of the inverse cocycle at ``index`` (a critical value)."""
    rev = orbit.reversed()
    rep = detect_critical(rev, -index, beta, K, slack)
    if rep is None:
        return None
    return replace(rep, orbit_id=orbit.id, index=index, inverse=True)


def distinguished_critical(orbit: OrbitSegment, beta: Beta, K: int,
                           b: float | None = None, slack: float | None = None) -> int | None:
    """Largest index of the window carrying a beta-critical point.

    ``b`` defaults to the dissipation bound fitted on the orbit itself; the
    search requires beta_+ > b.
    """
    if b is None:
        b = cc.fit_dissipation(orbit)
    if not beta.beta_plus > b:
        raise ValueError(f"need beta_+ > b (b = {b:.6g})")
    for i in range(orbit.n_max - K, orbit.n_min + K - 1, -1):
        if detect_critical(orbit, i, beta, K, slack) is not None:
            return i
    return None


def normalize_time(orbit: OrbitSegment, report: CriticalReport,
                   slack: float | None = None) -> CriticalReport:
    """Move a critical point at times (n-, n+) to one at times (0, 0).

    Uses the tangency shift on a_n = log g(n, xi) with slopes log beta_+-;
    the result sits at ``index + N`` with N in [n-, n+].
    """
    n_minus, n_plus = report.times
    if (n_minus, n_plus) == (0, 0):
        return report
    K = report.horizon
    tau = default_slack(K) if slack is None else slack
    i = report.index
    lo, hi = n_minus - K, n_plus + K
    if not (orbit.has_window(i, lo) and orbit.has_window(i, hi)):
        raise WindowError("window too short for time normalisation")
    fwd, _ = cc._sweep(orbit, i, report.direction.rep, hi)
    back, _ = cc._sweep(orbit, i, report.direction.rep, lo)
    vals = [back[-n] for n in range(lo, 0)] + fwd
    seq = pliss.RealSeq(vals, lo)
    dm, dp = math.log(report.beta.beta_minus), math.log(report.beta.beta_plus)
    try:
        N = pliss.tangency_shift(seq, n_minus, n_plus, dm, dp, tol=tau)
    except pliss.LemmaHypothesisError as exc:
        ok, margins = is_critical_at_times(orbit, i, report.beta, report.times, K,
                                           report.direction, tau)
        raise ValueError(f"{exc}; margins (back, fwd) = {margins}") from exc
    xi = cc.push(orbit, i, report.direction, N)
    ok, (mb, mf) = is_critical_at_times(orbit, i + N, report.beta, (0, 0), K, xi, tau)
    if not ok:
        raise ValueError(f"shifted point fails the critical check: margins {(mb, mf)}")
    return CriticalReport(report.orbit_id, i + N, xi, report.beta, (0, 0), K, mb, mf, tau,
                          report.inverse)


@dataclass
class CriticalPair:
    crit: CriticalReport
    value_index: int
    value_direction: Direction
    approach_times: list
    approach_distance: float
    finite_horizon: bool = True


def critical_pair_search(orbit: OrbitSegment, crit: CriticalReport, L: int,
                         eps: float = 1e-3, slack: float | None = None) -> CriticalPair | None:
    """Look for a critical value approached by the pushed critical direction.

    For l = 1..L the direction M^l xi is compared with the critical value
    direction (if any) at ``index + l``.  A single approach closer than eps
    is accepted and flagged as a finite-horizon pair.
    """
    hits = []
    K = crit.horizon
    for l in range(1, L + 1):
        j = crit.index + l
        if not (orbit.has_window(crit.index, l) and orbit.has_window(j, -K)
                and orbit.has_window(j, K)):
            break
        val = detect_critical_value(orbit, j, crit.beta, K, slack)
        if val is None:
            continue
        pushed = cc.push(orbit, crit.index, crit.direction, l)
        dist = rm.spherical_distance(pushed, val.direction)
        if dist < eps or dist == 0:
            hits.append((dist, l, val))
    if not hits:
        return None
    best = min(hits, key=lambda h: (h[0], h[1]))
    return CriticalPair(crit, best[2].index, best[2].direction,
                        [l for _, l, _ in hits], best[0])


@dataclass
class BlockRelation:
    ok: bool
    part_a: bool
    part_b: bool
    degenerate: bool = False
    notes: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def block_relation_check(orbit: OrbitSegment, report: CriticalReport,
                         beta: Beta | None = None, slack: float | None = None) -> BlockRelation:
    """Cross-check a critical report against the domination blocks.

    (a) index + n- lies in H^-(beta_-);
    (b) for m = 1..K no direction at index + n+ + m passes the strict
        H°^-(beta_+) query.  The query horizon reaches back past the
        critical time by K steps, which is where the proof finds the
        failing n.
    """
    beta = report.beta if beta is None else beta
    K = report.horizon
    n_minus, n_plus = report.times
    if K == 0:
        return BlockRelation(True, True, True, degenerate=True, notes=["K = 0: vacuous"])
    i = report.index
    qa = BlockQuery(beta.beta_minus, 1.0, -1, K, slack)
    part_a = cc.block_membership(orbit, i + n_minus, qa) is not None
    part_b = True
    notes = []
    for m in range(1, K + 1):
        j = i + n_plus + m
        if j > orbit.n_max:
            notes.append(f"index {j} outside window")
            break
        h = min(n_plus + m - n_minus + K, j - orbit.n_min)
        if h < n_plus + m - n_minus + K:
            notes.append(f"horizon clipped at index {j}")
        if h < 1:
            continue
        qb = BlockQuery(beta.beta_plus, 1.0, -1, h, slack, strict=True)
        if cc.block_membership(orbit, j, qb) is not None:
            part_b = False
            notes.append(f"strict block witness at index {j}")
            break
    return BlockRelation(part_a and part_b, part_a, part_b, False, notes)


@dataclass
class RegularityDiagnostic:
    conflict: bool
    flag: str | None
    lyapunov: tuple
    forward_rate: float


def regularity_conflict_check(orbit: OrbitSegment, report: CriticalReport, N: int,
                              tol: float = 1e-6) -> RegularityDiagnostic:
    """Finite-N sign that the critical point cannot be Lyapunov regular.

    At a regular point only the top Oseledets direction can be expanded in
    the past, and its forward g-rate is lambda_- - lambda_+.  A critical
    direction keeps a forward rate of at least log beta_+, so a conflict is
    reported when lambda_- - lambda_+ < log beta_+ while the observed rate of
    the critical direction is at least log beta_+.  Diagnostic only.
    """
    if N < 2:
        return RegularityDiagnostic(False, "horizon too short", (math.nan, math.nan), math.nan)
    i = report.index
    if not orbit.has_window(i, N):
        return RegularityDiagnostic(False, "window too short", (math.nan, math.nan), math.nan)
    lam = cc.lyapunov_estimate(orbit, i, N)
    rate = cc.log_g(orbit, i, report.direction, N) / N
    lp = math.log(report.beta.beta_plus)
    conflict = (lam[0] - lam[1] < lp - tol) and (rate >= lp - tol)
    return RegularityDiagnostic(conflict, None, lam, rate)


def change_of_metric_order(H: rm.HermitianForm, beta: Beta) -> int:
    """N = max(|floor(a0 / d-)|, |ceil(-a0 / d+)|) with a0 = 2 log alpha."""
    a0 = 2.0 * math.log(H.alpha())
    dm, dp = math.log(beta.beta_minus), math.log(beta.beta_plus)
    return max(abs(math.floor(a0 / dm)), abs(math.ceil(-a0 / dp)))


def redetect_in_metric(orbit: OrbitSegment, report: CriticalReport, H: rm.HermitianForm,
                       slack: float | None = None) -> tuple[CriticalReport, int]:
    """Carry a critical point to the metric H.

    In H coordinates the direction is critical at some times (n-, n+) with
    |n+-| bounded by :func:`change_of_metric_order`; those times are found by
    scanning and then normalised to (0, 0).  Returns the report in H
    coordinates and the order bound.
    """
    Nb = change_of_metric_order(H, report.beta)
    L = H.factor()
    orb_h = orbit.conjugated(L)
    xi = Direction.from_vec(rm.matvec(L, report.direction.rep))
    K = report.horizon
    best = None
    for span in range(0, Nb + 1):
        for n_minus in range(-span, 1):
            n_plus = span + n_minus
            times = (n_minus, n_plus)
            if not (orb_h.has_window(report.index, n_minus - K)
                    and orb_h.has_window(report.index, n_plus + K)):
                continue
            ok, (mb, mf) = is_critical_at_times(orb_h, report.index, report.beta, times,
                                                K, xi, slack)
            if ok:
                best = CriticalReport(orb_h.id, report.index, xi, report.beta, times, K,
                                      mb, mf, default_slack(K) if slack is None else slack)
                break
        if best is not None:
            break
    if best is None:
        raise ValueError("no times within the change-of-metric order bound")
    return normalize_time(orb_h, best, slack), Nb
