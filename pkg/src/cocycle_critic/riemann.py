"""Projective geometry of C^2: Mobius actions, the spherical metric and
multiplier norms of 2x2 complex matrices.

Conventions used everywhere in the package:

* a matrix is a 4-tuple ``(a, b, c, d)`` of Python complex numbers, row major;
* a vector is a pair ``(v1, v2)``;
* chart coordinate of the line ``[v1 : v2]`` is ``z = v1 / v2``, so ``[1 : 0]``
  is the point at infinity and ``[0 : 1]`` is zero.

Everything here is plain complex arithmetic.  For 2x2 work this is faster
than numpy and the results do not depend on array layout, which keeps batch
runs bit-reproducible.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Union

Mat2C = tuple  # (a, b, c, d)
Vec2C = tuple  # (v1, v2)

INF = math.inf
EQ_TOL = 1e-9

IDENTITY: Mat2C = (1 + 0j, 0j, 0j, 1 + 0j)


class SingularMatrixError(ValueError):
    pass


# ---------------------------------------------------------------- algebra

def mat(a, b, c, d) -> Mat2C:
    return (complex(a), complex(b), complex(c), complex(d))


def det(A: Mat2C) -> complex:
    return A[0] * A[3] - A[1] * A[2]


def matmul(A: Mat2C, B: Mat2C) -> Mat2C:
    a, b, c, d = A
    e, f, g, h = B
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def matvec(A: Mat2C, v: Vec2C) -> Vec2C:
    return (A[0] * v[0] + A[1] * v[1], A[2] * v[0] + A[3] * v[1])


def inverse(A: Mat2C) -> Mat2C:
    dt = det(A)
    if dt == 0:
        raise SingularMatrixError("non-invertible fiber map")
    a, b, c, d = A
    return (d / dt, -b / dt, -c / dt, a / dt)


def adjoint(A: Mat2C) -> Mat2C:
    a, b, c, d = A
    return (a.conjugate(), c.conjugate(), b.conjugate(), d.conjugate())


def scale(A: Mat2C, s) -> Mat2C:
    return (A[0] * s, A[1] * s, A[2] * s, A[3] * s)


def frobenius(A: Mat2C) -> float:
    return math.sqrt(sum(abs(x) ** 2 for x in A))


def norm(v: Vec2C) -> float:
    return math.hypot(abs(v[0]), abs(v[1]))


def inner(u: Vec2C, v: Vec2C) -> complex:
    """Hermitian product, conjugate-linear in the first slot."""
    return u[0].conjugate() * v[0] + u[1].conjugate() * v[1]


def wedge(u: Vec2C, v: Vec2C) -> complex:
    return u[0] * v[1] - u[1] * v[0]


def perp(v: Vec2C) -> Vec2C:
    """Hermitian-orthogonal companion with the same norm."""
    return (-v[1].conjugate(), v[0].conjugate())


def is_special_unitary(U: Mat2C, tol: float = 1e-12) -> bool:
    P = matmul(U, adjoint(U))
    off = max(abs(P[0] - 1), abs(P[1]), abs(P[2]), abs(P[3] - 1))
    return off <= tol and abs(det(U) - 1) <= tol


def top_singular(A: Mat2C) -> tuple[float, Vec2C]:
    """Largest singular value of A and a unit right singular vector for it.

    The vector comes from the dominant eigenvector of A*A, which stays
    accurate however small the second singular value is.  The smaller
    singular value should be recovered as |det A| / sigma by the caller,
    ideally from a separately tracked log-determinant.
    """
    a, b, c, d = A
    p = abs(a) ** 2 + abs(c) ** 2
    r = abs(b) ** 2 + abs(d) ** 2
    q = a.conjugate() * b + c.conjugate() * d
    half = 0.5 * (p - r)
    mu = 0.5 * (p + r) + math.hypot(half, abs(q))
    if mu <= 0:
        return 0.0, (1 + 0j, 0j)
    v1 = (q, complex(mu - p))
    v2 = (complex(mu - r), q.conjugate())
    v = v1 if norm(v1) >= norm(v2) else v2
    nv = norm(v)
    if nv == 0:
        # A*A is a multiple of the identity: every direction is extremal
        v = (1 + 0j, 0j)
    else:
        v = (v[0] / nv, v[1] / nv)
    return math.sqrt(mu), v


# ---------------------------------------------------------------- points

def _canon(v1: complex, v2: complex) -> tuple[complex, complex]:
    n = math.hypot(abs(v1), abs(v2))
    if n == 0 or not math.isfinite(n):
        raise ValueError("zero or non-finite vector has no direction")
    v1, v2 = v1 / n, v2 / n
    first = abs(v1) >= abs(v2)
    big = v1 if first else v2
    ph = abs(big) / big
    # the large component is set to its modulus outright (the product can
    # leave 1e-17 of imaginary dust); adding zero clears negative zeros
    if first:
        return complex(abs(v1), 0.0), v2 * ph + 0j
    return v1 * ph + 0j, complex(abs(v2), 0.0)


@dataclass(frozen=True, eq=False)
class Direction:
    """A complex line in C^2, stored as a unit vector with fixed phase.

    The component of largest modulus is made real and non-negative (ties go
    to the first component).  Equality is projective, up to ``EQ_TOL`` in
    the spherical metric.
    """

    v1: complex
    v2: complex

    def __post_init__(self):
        c1, c2 = _canon(complex(self.v1), complex(self.v2))
        object.__setattr__(self, "v1", c1)
        object.__setattr__(self, "v2", c2)

    @property
    def rep(self) -> Vec2C:
        return (self.v1, self.v2)

    @classmethod
    def from_vec(cls, v) -> "Direction":
        return cls(v[0], v[1])

    @classmethod
    def from_chart(cls, z) -> "Direction":
        if is_infinite(z):
            return cls(1, 0)
        return cls(complex(z), 1)

    def chart(self):
        if self.v2 == 0:
            return INF
        return self.v1 / self.v2

    def __eq__(self, other):
        if not isinstance(other, Direction):
            return NotImplemented
        return spherical_distance(self, other) <= EQ_TOL

    __hash__ = None

    def __repr__(self):
        return f"Direction({self.v1:.12g}, {self.v2:.12g})"


E1 = Direction(1, 0)
E2 = Direction(0, 1)

SpherePoint = Union[complex, float]


def is_infinite(z) -> bool:
    if isinstance(z, Direction):
        return z.v2 == 0
    return cmath.isinf(complex(z)) if not isinstance(z, float) else math.isinf(z)


def unit_vec(x) -> Vec2C:
    """Unit representative for a Direction, chart value or raw vector."""
    if isinstance(x, Direction):
        return x.rep
    if isinstance(x, tuple):
        n = norm(x)
        if n == 0:
            raise ValueError("zero vector has no direction")
        return (complex(x[0]) / n, complex(x[1]) / n)
    if is_infinite(x):
        return (1 + 0j, 0j)
    z = complex(x)
    n = math.hypot(abs(z), 1.0)
    return (z / n, 1 / n)


def to_chart(v: Vec2C):
    if v[1] == 0:
        return INF
    return v[0] / v[1]


# ---------------------------------------------------------------- operations

def mobius_apply(A: Mat2C, z):
    """Image of the chart point z under the projective action of A."""
    if det(A) == 0:
        raise SingularMatrixError("non-invertible fiber map")
    return to_chart(matvec(A, unit_vec(z)))


def multiplier_norm(A: Mat2C, z) -> float:
    """Spherical derivative of the Mobius map of A at z: |det A| / |A v|^2."""
    dt = abs(det(A))
    if dt == 0:
        raise SingularMatrixError("non-invertible fiber map")
    w = matvec(A, unit_vec(z))
    return dt / (abs(w[0]) ** 2 + abs(w[1]) ** 2)


def log_multiplier_norm(A: Mat2C, z) -> float:
    dt = abs(det(A))
    if dt == 0:
        raise SingularMatrixError("non-invertible fiber map")
    w = matvec(A, unit_vec(z))
    return math.log(dt) - 2.0 * math.log(norm(w))


def spherical_distance(z1, z2) -> float:
    """Twice the Fubini-Study angle, so antipodes sit at distance pi.

    Evaluated as ``2 atan2(|u ^ v|, |<u, v>|)``, which equals
    ``2 arccos |<u, v>|`` for unit vectors but keeps full precision when the
    two points are close.
    """
    u = unit_vec(z1)
    v = unit_vec(z2)
    return 2.0 * math.atan2(abs(wedge(u, v)), abs(inner(u, v)))


def sin_angle(u: Vec2C, v: Vec2C) -> float:
    nu, nv = norm(u), norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("sin_angle needs nonzero vectors")
    return min(1.0, abs(wedge(u, v)) / (nu * nv))


def antipode(z):
    if is_infinite(z):
        return 0j
    z = complex(z)
    if z == 0:
        return INF
    return -1 / z.conjugate()


def isometry_to_zero(xi) -> Mat2C:
    """SU(2) matrix whose Mobius map sends xi to 0.

    With a unit representative v the rows are (v2, -v1) and conj(v), so the
    first row kills v and the second returns |v|^2 = 1.
    """
    v1, v2 = unit_vec(xi)
    return (v2, -v1, v1.conjugate(), v2.conjugate())


# ---------------------------------------------------------------- other metrics

@dataclass(frozen=True)
class HermitianForm:
    h11: float
    h12: complex
    h22: float

    def __post_init__(self):
        object.__setattr__(self, "h11", float(self.h11))
        object.__setattr__(self, "h12", complex(self.h12))
        object.__setattr__(self, "h22", float(self.h22))
        if not (self.h11 > 0 and self.h22 > 0
                and self.h11 * self.h22 - abs(self.h12) ** 2 > 0):
            raise ValueError("hermitian form is not positive definite")

    @classmethod
    def standard(cls) -> "HermitianForm":
        return cls(1.0, 0j, 1.0)

    @classmethod
    def diag(cls, a, b) -> "HermitianForm":
        return cls(a, 0j, b)

    def factor(self) -> Mat2C:
        """Upper triangular L with L* L equal to the form."""
        l11 = math.sqrt(self.h11)
        l12 = self.h12 / l11
        l22 = math.sqrt(self.h22 - abs(l12) ** 2)
        return (complex(l11), l12, 0j, complex(l22))

    def eigenvalues(self) -> tuple[float, float]:
        m = 0.5 * (self.h11 + self.h22)
        r = math.hypot(0.5 * (self.h11 - self.h22), abs(self.h12))
        return m - r, m + r

    def alpha(self) -> float:
        """Bound alpha with alpha^-2 <= g_H / g <= alpha^2 for every map."""
        lo, hi = self.eigenvalues()
        return math.sqrt(hi / lo)

    def sqnorm(self, v: Vec2C) -> float:
        return (self.h11 * abs(v[0]) ** 2 + self.h22 * abs(v[1]) ** 2
                + 2.0 * (self.h12 * v[0].conjugate() * v[1]).real)


def conjugate_by(A: Mat2C, L: Mat2C) -> Mat2C:
    return matmul(matmul(L, A), inverse(L))


def multiplier_norm_in_metric(A: Mat2C, z, H: HermitianForm) -> float:
    """Multiplier norm measured with the spherical metric induced by H.

    Written in the coordinates that make H standard this is the ordinary
    multiplier norm of ``L A L^-1`` at ``L v``, that is
    ``|det A| |v|_H^2 / |A v|_H^2``.
    """
    if not isinstance(H, HermitianForm):
        raise TypeError("H must be a HermitianForm")
    dt = abs(det(A))
    if dt == 0:
        raise SingularMatrixError("non-invertible fiber map")
    v = unit_vec(z)
    L = H.factor()
    lv = matvec(L, v)
    lav = matvec(L, matvec(A, v))
    return dt * (abs(lv[0]) ** 2 + abs(lv[1]) ** 2) / (abs(lav[0]) ** 2 + abs(lav[1]) ** 2)


# ---------------------------------------------------------------- sampling

def fibonacci_directions(n: int = 256) -> list[Direction]:
    """Nearly uniform directions: a Fibonacci lattice on S^2 pulled back by
    the Hopf map, so spherical distances here match the round sphere."""
    out = []
    offset = 2.0 / n
    increment = math.pi * (3.0 - math.sqrt(5.0))
    for i in range(n):
        zc = i * offset - 1 + offset / 2
        phi = (i % n) * increment
        a = math.sqrt(max(0.0, (1 + zc) / 2))
        b = math.sqrt(max(0.0, (1 - zc) / 2))
        out.append(Direction(a * cmath.exp(1j * phi), b))
    return out


def geodesic_point(d1: Direction, d2: Direction, t: float) -> Direction:
    """Point at parameter t in [0, 1] on the shortest arc from d1 to d2."""
    u = d1.rep
    v = d2.rep
    ip = inner(u, v)
    if abs(ip) > 0:
        v = (v[0] * (abs(ip) / ip), v[1] * (abs(ip) / ip))
    w = (v[0] - inner(u, v) * u[0], v[1] - inner(u, v) * u[1])
    nw = norm(w)
    if nw == 0:
        return d1
    w = (w[0] / nw, w[1] / nw)
    theta = math.atan2(nw, abs(inner(u, v))) * t
    return Direction(math.cos(theta) * u[0] + math.sin(theta) * w[0],
                     math.cos(theta) * u[1] + math.sin(theta) * w[1])
