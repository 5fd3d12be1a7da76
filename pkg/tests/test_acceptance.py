"""Acceptance criteria, each at its stated tolerance and sample size."""
import math
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from cocycle_critic import cli
from cocycle_critic import cocycle as cc
from cocycle_critic import critical as cr
from cocycle_critic import fixtures as fx
from cocycle_critic import henon as hn
from cocycle_critic import pliss
from cocycle_critic import riemann as rm
from cocycle_critic.cocycle import Beta
from cocycle_critic.pliss import PlissParams, RealSeq
from cocycle_critic.riemann import E1, HermitianForm

from conftest import rand_matrix, rand_point, rand_su2
from test_pliss import brute_hyperbolic_times, random_shift_instance

GOLDEN = Path(__file__).parent / "golden" / "horseshoe"
HORSESHOE_ARGS = ["--K", "30", "--N", "30", "--grid-n", "200", "--iters", "60"]
GRID_LISTED = [Beta(0.9, 0.7), Beta(0.95, 0.65), Beta(0.8, 0.7)]


def rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def test_multiplier_algebra(verdict):
    rng = np.random.default_rng(2024)
    worst = {"chain": 0.0, "su2": 0.0, "sine": 0.0}
    for _ in range(10_000):
        A, B = rand_matrix(rng), rand_matrix(rng)
        z = rand_point(rng)
        lhs = rm.multiplier_norm(rm.matmul(B, A), z)
        rhs = rm.multiplier_norm(B, rm.mobius_apply(A, z)) * rm.multiplier_norm(A, z)
        worst["chain"] = max(worst["chain"], rel_err(lhs, rhs))

        U, V = rand_su2(rng), rand_su2(rng)
        lhs = rm.multiplier_norm(rm.matmul(V, rm.matmul(A, U)), rm.mobius_apply(rm.inverse(U), z))
        worst["su2"] = max(worst["su2"], rel_err(lhs, rm.multiplier_norm(A, z)))

        u1, u2 = rm.unit_vec(z), rm.unit_vec(rand_point(rng))
        lhs = rm.multiplier_norm(A, u1[0] / u1[1] if u1[1] else math.inf) * \
            rm.multiplier_norm(A, u2[0] / u2[1] if u2[1] else math.inf)
        rhs = (rm.sin_angle(rm.matvec(A, u1), rm.matvec(A, u2)) / rm.sin_angle(u1, u2)) ** 2
        worst["sine"] = max(worst["sine"], rel_err(lhs, rhs))
    ok = all(v <= 1e-8 for v in worst.values())
    verdict(1, ok, "worst relative errors " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))


def test_saddle_rates(verdict):
    hmap = hn.HenonMap.quadratic(-6, 0.1)
    pts = hn.newton_periodic(hmap, 1)
    saddles = [p for p in pts if p.is_saddle]
    rows_ok = eig_ok = True
    worst = 0.0
    for p in saddles:
        ls, lu = p.eigenvalues
        eig_ok &= abs(ls * lu - 0.1) <= 1e-9
        for r in hn.saddle_rate_check(hmap, p, 20):
            # recompute the expectation from the eigenvalue moduli here
            eb = r.n * math.log(abs(lu) ** 2 / 0.1)
            ef = r.n * math.log(abs(lu) / abs(ls))
            db = abs(r.back_observed - eb) / (r.n * abs(eb / r.n))
            df = abs(r.fwd_observed - ef) / (r.n * abs(ef / r.n))
            worst = max(worst, db, df)
            rows_ok &= r.ok and db <= 1e-8 and df <= 1e-8
    ok = len(saddles) == 2 and rows_ok and eig_ok
    verdict(2, ok, f"{len(saddles)} fixed saddles, n <= 20, worst rate error / n = {worst:.1e}")


def test_pliss_oracle(verdict):
    rng = np.random.default_rng(77)
    mismatches = 0
    cor_checked = cor_fail = 0
    g0, g1 = 1.2, 1.02
    for _ in range(10_000):
        n = int(rng.integers(1, 65))
        a = np.exp(rng.normal(0.15, 0.8, n))
        gamma1 = float(np.exp(rng.normal(0, 0.3)))
        fast = set(pliss.hyperbolic_times(list(a), gamma1))
        if fast != brute_hyperbolic_times(list(a), gamma1):
            mismatches += 1
        # shift j applied to the same factors read as a g-series
        logs = np.concatenate([[0.0], np.cumsum(np.log(a))])
        j = pliss.shift_to_hyperbolic(list(logs), g0, g1, n)
        if j is None:
            continue
        top = max(float(a.max()), g0 * (1 + 1e-12), 1 / g1)
        _, d0 = pliss.pliss_constants(PlissParams(g0, g1, top))
        cor_checked += 1
        if not n - j > n * d0 - 1:
            cor_fail += 1
    ok = mismatches == 0 and cor_fail == 0 and cor_checked > 1000
    verdict(3, ok, f"10000 sequences, {mismatches} set mismatches; "
                   f"shift bound failed {cor_fail} of {cor_checked}")


def _conclusion_holds(seq: RealSeq, N: int, dm: float, dp: float) -> bool:
    aN = seq[N]
    tol = 1e-9 * (1.0 + abs(aN))
    for n in range(0, N - seq.lo + 1):
        if seq[N - n] - aN < -n * dm - tol * (1 + n):
            return False
    for n in range(0, seq.hi - N + 1):
        if seq[N + n] - aN < n * dp - tol * (1 + n):
            return False
    return True


def test_tangency_shift(verdict):
    rng = np.random.default_rng(4)
    failures = 0
    for _ in range(10_000):
        seq, n0, n1, dm, dp = random_shift_instance(rng)
        N = pliss.tangency_shift(seq, n0, n1, dm, dp)
        valid = [M for M in range(n0, n1 + 1) if _conclusion_holds(seq, M, dm, dp)]
        if not (n0 <= N <= n1 and _conclusion_holds(seq, N, dm, dp) and N in valid):
            failures += 1
    verdict(4, failures == 0, f"10000 instances, {failures} failures")


def test_theorem_a_controls(verdict):
    # (i) dominated constant cocycle; beta_+ grid avoids the sink band (0.08, 0.125]
    diag = fx.diagonal(0.8, 0.1, -40, 40)
    cert_i = cc.domination_certificate(diag, 20, 4.0, 1.0)
    grid = [Beta(m, p) for m in (0.8, 0.85, 0.9, 0.95, 0.99) for p in (0.15, 0.3, 0.45, 0.6, 0.75)
            if p < m]
    hits_i = sum(cr.detect_critical(diag, 0, beta, 20) is not None for beta in grid)
    part_i = cert_i.passed and hits_i == 0

    # (ii) synthetic tangency
    tan = fx.synthetic_tangency()
    cert_ii = cc.domination_certificate(tan, 20, 4.0, 1.0)
    K = 10
    found = []
    for beta in GRID_LISTED:
        idx = [i for i in range(tan.n_min + K, tan.n_max - K + 1)
               if cr.detect_critical(tan, i, beta, K) is not None]
        rep = cr.detect_critical(tan, 0, beta, K)
        found.append(idx == [0] and rep is not None and rep.direction == E1)
    rep = cr.detect_critical(tan, 0, GRID_LISTED[0], K)
    forged = cr.CriticalReport(tan.id, -2, cc.push(tan, 0, E1, -2), GRID_LISTED[0], (0, 2), K,
                               0.0, 0.0, cc.default_slack(K))
    norm = cr.normalize_time(tan, forged)
    block = cr.block_relation_check(tan, rep)
    pair = cr.critical_pair_search(tan, rep, 5)
    part_ii = (not cert_ii.passed and all(found) and norm.index == 0 and norm.times == (0, 0)
               and bool(block) and pair is not None)
    verdict(5, part_i and part_ii,
            f"(i) cert {cert_i.passed}, {hits_i} critical on {len(grid)} beta; "
            f"(ii) cert {cert_ii.passed}, index 0 / e1 on {sum(found)} of 3 beta, "
            f"normalize -> {norm.index}, block {bool(block)}, pair {pair is not None}")


def _horseshoe_run(out: Path, threads: int) -> tuple[list, float]:
    out.mkdir(parents=True, exist_ok=True)
    shutil.copy(GOLDEN / "map.json", out / "map.json")
    t0 = time.perf_counter()
    codes = [cli.main([cmd, "--map", str(out / "map.json"), *HORSESHOE_ARGS,
                       "--threads", str(threads), "--out", str(out)])
             for cmd in ("check-domination", "detect-critical")]
    return codes, time.perf_counter() - t0


@pytest.fixture(scope="module")
def horseshoe_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("horseshoe")
    return {t: (base / f"t{t}", *_horseshoe_run(base / f"t{t}", t)) for t in (4, 1, 8)}


OUTPUTS = ("certificate.json", "critical.json", "critical_summary.csv")


def test_horseshoe_run(verdict, horseshoe_runs):
    import json
    out, codes, secs = horseshoe_runs[4]
    golden = all((out / f).read_bytes() == (GOLDEN / f).read_bytes() for f in OUTPUTS)
    summary = json.loads((out / "critical.json").read_text())["summary"]
    ok = codes == [0, 0] and summary["critical_points"] == 0 and golden and secs <= 60
    verdict(6, ok, f"exit codes {codes}, {summary['points']} points, "
                   f"{summary['critical_points']} critical, golden match {golden}, {secs:.1f} s")


def test_determinism(verdict, horseshoe_runs):
    outs = {t: {f: (d / f).read_bytes() for f in OUTPUTS} for t, (d, _, _) in horseshoe_runs.items()}
    ok = outs[1] == outs[8] == outs[4]
    verdict(7, ok, "threads 1, 4 and 8 give byte-identical outputs" if ok else "outputs differ")


def test_change_of_metric(verdict):
    H = HermitianForm.diag(4, 1)
    alpha = H.alpha()
    rng = np.random.default_rng(8)
    lo, hi = math.inf, 0.0
    for _ in range(10_000):
        A, z = rand_matrix(rng), rand_point(rng)
        r = rm.multiplier_norm_in_metric(A, z, H) / rm.multiplier_norm(A, z)
        lo, hi = min(lo, r), max(hi, r)
    tol = 1e-12
    ratio_ok = alpha == pytest.approx(2.0) and lo >= alpha ** -2 - tol and hi <= alpha ** 2 + tol

    tan = fx.synthetic_tangency()
    beta = GRID_LISTED[0]
    rep = cr.detect_critical(tan, 0, beta, 10)
    moved, N = cr.redetect_in_metric(tan, rep, H)
    a0 = 2 * math.log(alpha)
    N_formula = max(abs(math.floor(a0 / math.log(beta.beta_minus))),
                    abs(math.ceil(-a0 / math.log(beta.beta_plus))))
    redetect_ok = moved is not None and N == N_formula and abs(moved.index - rep.index) <= N
    verdict(8, ratio_ok and redetect_ok,
            f"ratio range [{lo:.4f}, {hi:.4f}] within [{alpha ** -2:.2f}, {alpha ** 2:.2f}]; "
            f"re-detected at shift {abs(moved.index - rep.index) if moved else None} <= N = {N}")
