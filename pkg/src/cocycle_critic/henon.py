"""Complex Hénon maps f(x, y) = (y, p(y) - b x) and their derivative cocycles.

Orbits of a horseshoe cannot be followed in floating point for long: each
step multiplies rounding error by the expansion rate.  Sampling and orbit
construction therefore refine a seed into a genuine nearby orbit by solving
the second-order recurrence

    y[k+1] + b * y[k-1] = p(y[k])

as a boundary value problem (the orbit is z_k = (y[k-1], y[k])).  Each sweep
solves every equation for its middle unknown by one Newton step; in the
expanding regime this is a contraction, and it is vectorised over seeds.
"""
from __future__ import annotations

import cmath
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import riemann as rm
from .cocycle import OrbitSegment
from .riemann import Direction, Mat2C

Point = tuple  # (complex, complex)

CHUNK = 2048
SWEEPS = 200


@dataclass(frozen=True)
class HenonMap:
    """``poly`` holds the coefficients of p in ascending order: p(y) = sum poly[k] y^k."""

    poly: tuple
    b: complex

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.poly)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        if len(coeffs) < 3:
            raise ValueError("p must have degree >= 2")
        if complex(self.b) == 0:
            raise ValueError("b must be nonzero")
        object.__setattr__(self, "poly", coeffs)
        object.__setattr__(self, "b", complex(self.b))

    @classmethod
    def quadratic(cls, c: complex, b: complex) -> "HenonMap":
        return cls((c, 0, 1), b)

    @property
    def degree(self) -> int:
        return len(self.poly) - 1

    def p(self, y):
        acc = 0j
        for c in reversed(self.poly):
            acc = acc * y + c
        return acc

    def dp(self, y):
        acc = 0j
        for k in range(len(self.poly) - 1, 0, -1):
            acc = acc * y + k * self.poly[k]
        return acc

    def _p_np(self, y: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(y)
        for c in reversed(self.poly):
            acc = acc * y + c
        return acc

    def _dp_np(self, y: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(y)
        for k in range(len(self.poly) - 1, 0, -1):
            acc = acc * y + k * self.poly[k]
        return acc

    def to_json(self) -> dict:
        from .serial import enc_complex
        return {"poly": [enc_complex(c) for c in self.poly], "b": enc_complex(self.b)}

    @classmethod
    def from_json(cls, obj: dict) -> "HenonMap":
        from .serial import dec_complex
        if not isinstance(obj, dict) or "poly" not in obj or "b" not in obj:
            raise ValueError("map spec needs 'poly' and 'b'")
        return cls(tuple(dec_complex(c) for c in obj["poly"]), dec_complex(obj["b"]))


def eval(hmap: HenonMap, z: Point) -> Point:  # noqa: A001 - mirrors the maths
    x, y = z
    return (complex(y), hmap.p(y) - hmap.b * x)


def inverse(hmap: HenonMap, z: Point) -> Point:
    x, y = z
    return ((hmap.p(x) - y) / hmap.b, complex(x))


def jacobian(hmap: HenonMap, z: Point) -> Mat2C:
    return rm.mat(0, 1, -hmap.b, hmap.dp(z[1]))


def _escapes(hmap: HenonMap, z: Point, step, bound: float, iters: int) -> bool:
    for _ in range(iters):
        z = step(hmap, z)
        if not (abs(z[0]) < bound and abs(z[1]) < bound):
            return True
    return False


def validate_escape_radius(hmap: HenonMap, R: float, n: int = 10_000, iters: int = 100,
                           seed: int = 0) -> bool:
    """Every sampled point with |z|_inf = 1.01 R escapes under f or under f^-1.

    Outside the bidisk the plane splits into a region pushed out by f and
    one pushed out by f^-1, and a ring meets both; asking for both escapes
    at once would reject correct radii.
    """
    rng = np.random.default_rng(seed)
    r = 1.01 * R
    big = 1e8 * max(1.0, R)
    phase = rng.uniform(0, 2 * math.pi, n)
    rad = r * np.sqrt(rng.uniform(0, 1, n))
    phase2 = rng.uniform(0, 2 * math.pi, n)
    which = rng.integers(0, 2, n)
    for k in range(n):
        a = complex(r * math.cos(phase[k]), r * math.sin(phase[k]))
        o = complex(rad[k] * math.cos(phase2[k]), rad[k] * math.sin(phase2[k]))
        z = (a, o) if which[k] == 0 else (o, a)
        if not (_escapes(hmap, z, eval, big, iters) or _escapes(hmap, z, inverse, big, iters)):
            return False
    return True


def escape_radius(hmap: HenonMap, fallback: float | None = None, validate: bool = True) -> float:
    """Radius R outside of which orbits escape (forward or backward).

    Closed form for p(y) = y^2 + c; a coefficient bound otherwise.  The value
    is checked by ring sampling; on failure ``fallback`` is returned if given.
    """
    pc = hmap.poly
    ab = abs(hmap.b)
    if len(pc) == 3 and pc[1] == 0 and pc[2] == 1:
        R = (1 + ab + math.sqrt((1 + ab) ** 2 + 4 * abs(pc[0]))) / 2
    else:
        lead = abs(pc[-1])
        R = 1 + ab + max(1.0, sum(abs(c) for c in pc) / lead)
    if validate and not validate_escape_radius(hmap, R):
        if fallback is not None:
            return float(fallback)
        raise ValueError(f"escape radius {R:.6g} failed ring validation; supply R manually")
    return R


# ---------------------------------------------------------------- shadowing

def _initial_guess(hmap: HenonMap, seeds: np.ndarray, n: int, bound: float) -> np.ndarray:
    """Rows of y[-n-2 .. n+1] by plain iteration of each seed; stretches
    after the iterate leaves the ``bound`` are filled with the seed's y."""
    S = len(seeds)
    out = np.empty((S, 2 * n + 4), dtype=complex)
    x0, y0 = seeds[:, 0].astype(complex), seeds[:, 1].astype(complex)
    out[:, n + 1], out[:, n + 2] = x0, y0
    b2 = bound * bound
    with np.errstate(all="ignore"):
        x, y, ok = x0.copy(), y0.copy(), np.ones(S, dtype=bool)
        for col in range(n + 3, 2 * n + 4):
            x, y = y, hmap._p_np(y) - hmap.b * x
            ok &= (y.real ** 2 + y.imag ** 2) <= b2
            out[:, col] = np.where(ok, y, y0)
        x, y, ok = x0.copy(), y0.copy(), np.ones(S, dtype=bool)
        for col in range(n, -1, -1):
            x, y = (hmap._p_np(x) - y) / hmap.b, x
            ok &= (x.real ** 2 + x.imag ** 2) <= b2
            out[:, col] = np.where(ok, x, y0)
    return out


def shadow_refine(hmap: HenonMap, Y: np.ndarray, tol: float = 1e-13,
                  sweeps: int = SWEEPS, blowup: float = 1e6) -> tuple[np.ndarray, np.ndarray]:
    """Relax rows of y-values onto exact orbits with fixed endpoints.

    Returns (refined rows, converged mask).  Each row is frozen as soon as it
    converges or blows up, so a row's result does not depend on the others.
    """
    Y = Y.copy()
    S = Y.shape[0]
    active = np.ones(S, dtype=bool)
    done = np.zeros(S, dtype=bool)
    b = hmap.b
    for _ in range(sweeps):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        Ya = Y[idx]
        mid = Ya[:, 1:-1]
        w = Ya[:, 2:] + b * Ya[:, :-2]
        r = hmap._p_np(mid) - w
        d = hmap._dp_np(mid)
        res = (r.real ** 2 + r.imag ** 2).max(axis=1)
        scale = 1.0 + (mid.real ** 2 + mid.imag ** 2).max(axis=1)
        conv = res <= (tol * tol) * scale * scale
        dd = d.real ** 2 + d.imag ** 2
        bad = (dd.min(axis=1) < 1e-24) | (scale > blowup * blowup) | ~np.isfinite(res)
        step = ~(conv | bad)
        upd = idx[step]
        Y[upd, 1:-1] = mid[step] - r[step] / d[step]
        done[idx[conv]] = True
        active[idx[conv | bad]] = False
    return Y, done


def _chunks(n: int, size: int = CHUNK):
    return [(a, min(n, a + size)) for a in range(0, n, size)]


def _run_chunks(fn, n: int, threads: int) -> list:
    parts = _chunks(n)
    if threads <= 1 or len(parts) < 2:
        return [fn(a, b) for a, b in parts]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda ab: fn(*ab), parts))


def sample_julia(hmap: HenonMap, R: float, grid_n: int, iters: int,
                 threads: int = 1) -> list:
    """Points near the real slice of J whose orbits stay within 2R for
    ``iters`` steps both ways.

    Seeds form a ``grid_n`` x ``grid_n`` grid on [-R, R]^2 (row i is x_i,
    column j is y_j).  Each seed is relaxed onto a true orbit over
    [-iters, iters]; it is kept when the relaxation converges, the whole
    orbit stays within 2R, and the orbit point lands within two grid
    spacings of the seed.  Returned points are the refined ones,
    deduplicated, in row-major order of first occurrence.
    """
    if grid_n < 1 or iters < 0:
        raise ValueError("need grid_n >= 1 and iters >= 0")
    ax = np.linspace(-R, R, grid_n) if grid_n > 1 else np.zeros(1)
    X, Yg = np.meshgrid(ax, ax, indexing="ij")
    seeds = np.stack([X.ravel(), Yg.ravel()], axis=1).astype(complex)
    if iters == 0:
        return [(complex(x), complex(y)) for x, y in seeds]
    h = 2 * R / (grid_n - 1) if grid_n > 1 else R
    bound = 2 * R

    def work(a: int, b: int):
        S = seeds[a:b]
        Y0 = _initial_guess(hmap, S, iters, bound)
        Y, ok = shadow_refine(hmap, Y0)
        # z_0 = (y[-1], y[0]) sits at columns iters + 1, iters + 2
        z0 = Y[:, iters + 1: iters + 3]
        dz = np.abs(z0 - S).max(axis=1)
        inside = (Y.real ** 2 + Y.imag ** 2).max(axis=1) <= bound * bound
        keep = ok & inside & (dz <= 2 * h)
        return z0[keep]

    found = [p for part in _run_chunks(work, len(seeds), threads) for p in part]
    out: list = []
    kept = np.empty((0, 2), dtype=complex)
    for p in found:
        if len(kept) and np.abs(kept - p).max(axis=1).min() <= 1e-9 * (1 + R):
            continue
        kept = np.vstack([kept, p[None, :]])
        out.append((complex(p[0]), complex(p[1])))
    if not out:
        warnings.warn("sample_julia found no bounded orbits at this resolution")
    return out


def _direct_orbit(hmap: HenonMap, z0: Point, n_back: int, n_fwd: int, bound: float):
    pts = {0: (complex(z0[0]), complex(z0[1]))}
    z = pts[0]
    for k in range(1, n_fwd + 1):
        z = eval(hmap, z)
        if not (abs(z[0]) <= bound and abs(z[1]) <= bound):
            return None
        pts[k] = z
    z = pts[0]
    for k in range(1, n_back + 1):
        z = inverse(hmap, z)
        if not (abs(z[0]) <= bound and abs(z[1]) <= bound):
            return None
        pts[-k] = z
    return [pts[k] for k in range(-n_back, n_fwd + 1)]


def orbit_segment(hmap: HenonMap, z0: Point, n_back: int, n_fwd: int,
                  R: float | None = None, id: str | None = None,
                  tol: float = 1e-9) -> OrbitSegment:
    """Derivative cocycle along the orbit of z0 over [-n_back, n_fwd].

    Plain iteration is used when it stays inside 2R.  Otherwise the orbit is
    relaxed with some margin on both sides; the relaxed base point must agree
    with z0 to ``tol`` (relative), or the orbit is declared escaping.
    """
    if n_back < 0 or n_fwd < 0:
        raise ValueError("n_back and n_fwd must be non-negative")
    if R is None:
        R = escape_radius(hmap, validate=False)
    bound = 2 * R
    pts = _direct_orbit(hmap, z0, n_back, n_fwd, bound)
    if pts is None:
        m = 20
        n = max(n_back, n_fwd) + m
        Y0 = _initial_guess(hmap, np.array([z0], dtype=complex), n, bound)
        Y, ok = shadow_refine(hmap, Y0)
        y = Y[0]
        z = (complex(y[n + 1]), complex(y[n + 2]))
        scale = 1 + max(abs(z0[0]), abs(z0[1]))
        err = max(abs(z[0] - z0[0]), abs(z[1] - z0[1]))
        if not ok[0] or err > tol * scale:
            raise ValueError("orbit escapes window bound")
        # z_k = (y[k-1], y[k]); y[k] is at column k + n + 2
        pts = [(complex(y[k + n + 1]), complex(y[k + n + 2])) for k in range(-n_back, n_fwd + 1)]
        if any(max(abs(a), abs(c)) > bound for a, c in pts):
            raise ValueError("orbit escapes window bound")
    mats = tuple(jacobian(hmap, p) for p in pts[:-1])
    name = id if id is not None else f"henon:{z0[0].real:.6g},{z0[1].real:.6g}"
    return OrbitSegment(name, -n_back, mats, tuple(pts))


# ---------------------------------------------------------------- periodic points

@dataclass
class PeriodicPoint:
    point: Point
    period: int
    eigenvalues: tuple
    eig_dirs: tuple
    residual: float

    @property
    def is_saddle(self) -> bool:
        ls, lu = self.eigenvalues
        return abs(ls) < 1 < abs(lu)

    @property
    def is_sink(self) -> bool:
        return abs(self.eigenvalues[1]) < 1


def iterate(hmap: HenonMap, z: Point, n: int) -> tuple[Point, Mat2C]:
    """f^n(z) and Df^n(z)."""
    D = rm.IDENTITY
    for _ in range(n):
        D = rm.matmul(jacobian(hmap, z), D)
        z = eval(hmap, z)
    return z, D


def _eigvec(M: Mat2C, lam: complex) -> Direction:
    a, b, c, d = M
    u = (b, lam - a)
    v = (lam - d, c)
    w = u if abs(u[0]) ** 2 + abs(u[1]) ** 2 >= abs(v[0]) ** 2 + abs(v[1]) ** 2 else v
    return Direction.from_vec(w)


def eigen_data(M: Mat2C) -> tuple[tuple, tuple]:
    """Eigenvalues sorted by modulus (small first) and their directions."""
    a, b, c, d = M
    tr, det = a + d, a * d - b * c
    disc = cmath.sqrt(tr * tr - 4 * det)
    l1 = (tr + disc) / 2 if abs(tr + disc) >= abs(tr - disc) else (tr - disc) / 2
    l2 = det / l1 if l1 != 0 else (tr - l1)
    ls, lu = (l2, l1) if abs(l2) <= abs(l1) else (l1, l2)
    return (ls, lu), (_eigvec(M, ls), _eigvec(M, lu))


def _newton(hmap: HenonMap, z: Point, period: int, tol: float, maxit: int = 100):
    def resid(z):
        w, D = iterate(hmap, z, period)
        F = (w[0] - z[0], w[1] - z[1])
        return F, D, max(abs(F[0]), abs(F[1]))

    F, D, r = resid(z)
    for _ in range(maxit):
        if not math.isfinite(r):
            return None
        if r <= tol * (1 + max(abs(z[0]), abs(z[1]))):
            return z, r
        J = (D[0] - 1, D[1], D[2], D[3] - 1)
        try:
            step = rm.matvec(rm.inverse(J), F)
        except rm.SingularMatrixError:
            return None
        t = 1.0
        for _ in range(30):
            zn = (z[0] - t * step[0], z[1] - t * step[1])
            Fn, Dn, rn = resid(zn)
            if math.isfinite(rn) and rn < r:
                break
            t *= 0.5
        else:
            return None
        z, F, D, r = zn, Fn, Dn, rn
    return (z, r) if r <= 1e-9 else None


def default_seeds(hmap: HenonMap, period: int, n: int = 32) -> list:
    R = escape_radius(hmap, validate=False)
    ax = np.linspace(-2 * R, 2 * R, n)
    seeds = [(complex(u, v), complex(u, v)) for u in ax for v in ax]
    if period > 1:
        seeds += [(complex(u), complex(v)) for u in ax for v in ax]
    return seeds


def _snap(w: complex) -> complex:
    # roots reached from complex seeds carry ~1e-22 imaginary dust
    return complex(w.real, 0.0) if abs(w.imag) <= 1e-14 * (1 + abs(w.real)) else w


def newton_periodic(hmap: HenonMap, period: int, seeds=None, tol: float = 1e-13,
                    threads: int = 1) -> list:
    """Periodic points of the given period found by Newton from grid seeds.

    Default seeds: a 32 x 32 complex grid on the diagonal x = y (where fixed
    points live) and, for period > 1, a 32 x 32 real grid as well.
    Duplicates within 1e-7 are merged; output is sorted by coordinates.
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    seeds = default_seeds(hmap, period) if seeds is None else list(seeds)
    run = lambda s: _newton(hmap, (complex(s[0]), complex(s[1])), period, tol)
    if threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    found: list = []
    for res in results:
        if res is None:
            continue
        z, r = res
        if any(max(abs(z[0] - q[0]), abs(z[1] - q[1])) <= 1e-7 for q, _ in found):
            continue
        found.append((z, r))
    out = []
    for z, r in found:
        z = (_snap(z[0]), _snap(z[1]))
        _, D = iterate(hmap, z, period)
        vals, dirs = eigen_data(D)
        out.append(PeriodicPoint(z, period, vals, dirs, r))
    out.sort(key=lambda p: (round(p.point[0].real, 9), round(p.point[0].imag, 9),
                            round(p.point[1].real, 9), round(p.point[1].imag, 9)))
    return out


def periodic_orbit_segment(hmap: HenonMap, pp: PeriodicPoint, n_back: int, n_fwd: int) -> OrbitSegment:
    """Cocycle over the periodic orbit, repeated; points use the exact cycle."""
    cycle = [pp.point]
    for _ in range(pp.period - 1):
        cycle.append(eval(hmap, cycle[-1]))
    pts = tuple(cycle[k % pp.period] for k in range(-n_back, n_fwd + 1))
    mats = tuple(jacobian(hmap, p) for p in pts[:-1])
    return OrbitSegment(f"periodic{pp.period}", -n_back, mats, pts)


@dataclass
class SaddleRateRow:
    n: int
    back_observed: float
    back_expected: float
    fwd_observed: float
    fwd_expected: float
    ok: bool


def saddle_rate_check(hmap: HenonMap, pp: PeriodicPoint, n_max: int,
                      rtol: float = 1e-8) -> list:
    """Compare log g(-n, E^u) and log g(n, E^s) with the eigenvalue formulas.

    n counts periods.  Each value is computed by pushing the invariant
    direction the stable way (E^u forward, E^s backward) and inverting via
    the chain rule g(m, M^-m xi) g(-m, xi) = 1.
    """
    if not pp.is_saddle:
        raise ValueError("not a saddle")
    if n_max <= 0:
        return []
    p = pp.period
    orb = periodic_orbit_segment(hmap, pp, n_max * p, n_max * p)
    from .cocycle import log_g
    ls, lu = pp.eigenvalues
    Es, Eu = pp.eig_dirs
    rate_back = 2 * math.log(abs(lu)) - p * math.log(abs(hmap.b))
    rate_fwd = math.log(abs(lu)) - math.log(abs(ls))
    rows = []
    for n in range(1, n_max + 1):
        m = n * p
        back = -log_g(orb, -m, Eu, m)
        fwd = -log_g(orb, m, Es, -m)
        eb, ef = n * rate_back, n * rate_fwd
        ok = (abs(back - eb) <= rtol * n * max(1.0, abs(rate_back))
              and abs(fwd - ef) <= rtol * n * max(1.0, abs(rate_fwd)))
        rows.append(SaddleRateRow(n, back, eb, fwd, ef, ok))
    return rows
