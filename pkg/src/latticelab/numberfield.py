"""Exact arithmetic in the totally real cubic field k = Q[x]/(x^3+x^2-2x-1).

This is the degree-7 real cyclotomic subfield: the roots of
``f(x) = x^3 + x^2 - 2x - 1`` are 2cos(2pi/7), 2cos(4pi/7), 2cos(6pi/7),
the discriminant is 49 and the ring of integers is Z[theta].  The Galois
group is cyclic of order 3, generated by ``theta -> theta^2 - 2``.

Elements are coefficient triples ``c0 + c1 theta + c2 theta^2`` over
``fractions.Fraction`` (arbitrary precision; this is the "big rational" of
the package).  The three real embeddings are tabulated once at ~80 decimal
digits by exact rational Newton refinement, which keeps every sign and
threshold test used by the lattice search decisively below the working
tolerances.

Vectorized companions (``mul_vec`` etc.) operate on int64 ``(...,3)``
coefficient arrays and are exact as long as intermediates stay below 2^63;
the lattice module asserts explicit coefficient bounds before using them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "FPOLY",
    "CubicNum",
    "nf_add",
    "nf_mul",
    "nf_neg",
    "nf_inv",
    "galois_sigma",
    "sigma_permutation",
    "EmbeddingTable",
    "default_table",
    "embed",
    "embed_hp",
    "coeff_box",
    "mul_vec",
    "sigma_vec",
    "embed_vec",
]

# minimal polynomial x^3 + x^2 - 2x - 1, monic, coefficients low to high
FPOLY = (-1, -2, 1, 1)

# reduction: theta^3 = 1 + 2 theta - theta^2, theta^4 = -1 - theta + 3 theta^2
_T3 = (Fraction(1), Fraction(2), Fraction(-1))
_T4 = (Fraction(-1), Fraction(-1), Fraction(3))

# sigma(theta) = theta^2 - 2 as a linear map on coefficient triples
# (found by the exhaustive root-map search in the tests)
_SIGMA = ((1, -2, 3), (0, 0, -1), (0, 1, -1))


def _coerce(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    raise TypeError(f"coefficients must be integers or Fractions, got {type(v)}")


@dataclass(frozen=True)
class CubicNum:
    """c0 + c1*theta + c2*theta^2 with exact rational coefficients."""

    c0: Fraction
    c1: Fraction
    c2: Fraction

    def __post_init__(self):
        object.__setattr__(self, "c0", _coerce(self.c0))
        object.__setattr__(self, "c1", _coerce(self.c1))
        object.__setattr__(self, "c2", _coerce(self.c2))

    # -- constructors --

    @staticmethod
    def from_int(n) -> "CubicNum":
        return CubicNum(Fraction(n), Fraction(0), Fraction(0))

    @staticmethod
    def theta() -> "CubicNum":
        return CubicNum(Fraction(0), Fraction(1), Fraction(0))

    @property
    def coeffs(self):
        return (self.c0, self.c1, self.c2)

    # -- predicates --

    def is_zero(self) -> bool:
        return self.c0 == 0 and self.c1 == 0 and self.c2 == 0

    def is_rational(self) -> bool:
        return self.c1 == 0 and self.c2 == 0

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.coeffs)

    # -- ring operations --

    def __add__(self, other):
        other = _as_cubic(other)
        return CubicNum(self.c0 + other.c0, self.c1 + other.c1, self.c2 + other.c2)

    __radd__ = __add__

    def __neg__(self):
        return CubicNum(-self.c0, -self.c1, -self.c2)

    def __sub__(self, other):
        return self + (-_as_cubic(other))

    def __rsub__(self, other):
        return _as_cubic(other) + (-self)

    def __mul__(self, other):
        other = _as_cubic(other)
        a0, a1, a2 = self.coeffs
        b0, b1, b2 = other.coeffs
        # raw convolution then reduction by theta^3, theta^4
        d0 = a0 * b0
        d1 = a0 * b1 + a1 * b0
        d2 = a0 * b2 + a1 * b1 + a2 * b0
        d3 = a1 * b2 + a2 * b1
        d4 = a2 * b2
        return CubicNum(
            d0 + d3 * _T3[0] + d4 * _T4[0],
            d1 + d3 * _T3[1] + d4 * _T4[1],
            d2 + d3 * _T3[2] + d4 * _T4[2],
        )

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            return nf_inv(self) ** (-n)
        out = CubicNum.from_int(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __truediv__(self, other):
        return self * nf_inv(_as_cubic(other))

    def __repr__(self):
        return f"CubicNum({self.c0}, {self.c1}, {self.c2})"


def _as_cubic(v) -> CubicNum:
    if isinstance(v, CubicNum):
        return v
    if isinstance(v, (int, np.integer, Fraction)):
        return CubicNum(_coerce(v), Fraction(0), Fraction(0))
    raise TypeError(f"cannot interpret {type(v)} as a field element")


# spec-named surface, thin over the dunders
def nf_add(x: CubicNum, y: CubicNum) -> CubicNum:
    return x + y


def nf_mul(x: CubicNum, y: CubicNum) -> CubicNum:
    return x * y


def nf_neg(x: CubicNum) -> CubicNum:
    return -x


def nf_inv(x: CubicNum) -> CubicNum:
    """Field inverse by the extended Euclidean algorithm in Q[x] mod f."""
    if x.is_zero():
        raise ZeroDivisionError("inverse of zero field element")
    # work with polynomial coefficient lists, low degree first
    f = [Fraction(c) for c in FPOLY]
    a = [Fraction(c) for c in x.coeffs]

    def deg(p):
        d = len(p) - 1
        while d >= 0 and p[d] == 0:
            d -= 1
        return d

    def divmod_poly(num, den):
        num = num[:]
        dd = deg(den)
        q = [Fraction(0)] * (max(deg(num) - dd, 0) + 1)
        while deg(num) >= dd:
            dn = deg(num)
            coef = num[dn] / den[dd]
            q[dn - dd] = coef
            for i in range(dd + 1):
                num[dn - dd + i] -= coef * den[i]
        return q, num

    # extended euclid: s*a + t*f = gcd
    r0, r1 = f, a
    s0, s1 = [Fraction(0)], [Fraction(1)]
    while deg(r1) > 0:
        q, r = divmod_poly(r0, r1)
        # s_new = s0 - q*s1
        s_new = s0[:]
        prod = [Fraction(0)] * (deg(q) + deg(s1) + 2)
        for i, qi in enumerate(q):
            if qi == 0:
                continue
            for j, sj in enumerate(s1):
                prod[i + j] += qi * sj
        ln = max(len(s_new), len(prod))
        s_new = [
            (s_new[i] if i < len(s_new) else Fraction(0))
            - (prod[i] if i < len(prod) else Fraction(0))
            for i in range(ln)
        ]
        r0, r1 = r1, r
        s0, s1 = s1, s_new
    if deg(r1) != 0:
        raise ZeroDivisionError("element not invertible (should not happen: f irreducible)")
    c = r1[0]
    out = [si / c for si in s1] + [Fraction(0)] * 3
    return CubicNum(out[0], out[1], out[2])


def galois_sigma(x: CubicNum) -> CubicNum:
    """The order-3 Galois generator, theta -> theta^2 - 2."""
    c = x.coeffs
    return CubicNum(
        sum(Fraction(_SIGMA[0][j]) * c[j] for j in range(3)),
        sum(Fraction(_SIGMA[1][j]) * c[j] for j in range(3)),
        sum(Fraction(_SIGMA[2][j]) * c[j] for j in range(3)),
    )


def sigma_permutation():
    """pi with embed(sigma x, j) = embed(x, pi(j)); here pi = (1 2 3)."""
    return {1: 2, 2: 3, 3: 1}


# ---------------------------------------------------------------------------
# embeddings


def _poly_f(x: Fraction) -> Fraction:
    return ((x + 1) * x - 2) * x - 1


def _poly_fprime(x: Fraction) -> Fraction:
    return (3 * x + 2) * x - 2


def _newton_root(seed: float, digits=80) -> Fraction:
    """Exact rational Newton refinement of a double seed.

    Each step doubles the digit count; iterates are rounded to a 10^-(digits+10)
    grid to keep numerator/denominator sizes bounded.
    """
    grid = 10 ** (digits + 10)
    x = Fraction(seed).limit_denominator(10**15)
    for _ in range(12):
        fx = _poly_f(x)
        if abs(fx) < Fraction(1, 10 ** (digits + 5)):
            break
        x = x - fx / _poly_fprime(x)
        x = Fraction(round(x * grid), grid)
    assert abs(_poly_f(x)) < Fraction(1, 10**digits), "Newton refinement failed"
    return x


class EmbeddingTable:
    """The three real roots of f in descending order, at high precision.

    theta_1 ~ 1.2470, theta_2 ~ -0.4450, theta_3 ~ -1.8019; the induced
    Galois permutation is embed(sigma x, j) = embed(x, j mod 3 + 1).
    """

    def __init__(self, digits=80):
        seeds = sorted(np.roots([1.0, 1.0, -2.0, -1.0]).real, reverse=True)
        self.roots_exact = tuple(_newton_root(s, digits) for s in seeds)
        self.roots = np.array([float(r) for r in self.roots_exact])
        if not (self.roots[0] > self.roots[1] > self.roots[2]):
            raise AssertionError("root ordering broken")
        v = np.vander(self.roots, 3, increasing=True)
        self.vander = v
        self.vander_inv = np.linalg.inv(v)

    def powers(self, j: int):
        """(1, theta_j, theta_j^2) as exact Fractions, 1-based j."""
        r = self.roots_exact[j - 1]
        return (Fraction(1), r, r * r)


@lru_cache(maxsize=None)
def default_table() -> EmbeddingTable:
    return EmbeddingTable()


def embed(x: CubicNum, j: int, table: EmbeddingTable | None = None) -> float:
    """The j-th real embedding (j = 1, 2, 3, descending root order)."""
    table = table or default_table()
    r = table.roots[j - 1]
    return float(x.c0) + float(x.c1) * r + float(x.c2) * r * r


def embed_hp(x: CubicNum, j: int, table: EmbeddingTable | None = None) -> Fraction:
    """High-precision rational surrogate of embed(x, j); error ~ 1e-75 * |coeffs|."""
    table = table or default_table()
    p = table.powers(j)
    return x.c0 * p[0] + x.c1 * p[1] + x.c2 * p[2]


def embed_all(x: CubicNum, table: EmbeddingTable | None = None):
    table = table or default_table()
    r = table.roots
    return float(x.c0) + float(x.c1) * r + float(x.c2) * r * r


def coeff_box(bounds, table: EmbeddingTable | None = None):
    """Iterate over all integral x with |embed(x, j)| <= bounds[j] for each j.

    The integer search box on (c0, c1, c2) comes from the inverse Vandermonde
    of the roots; each candidate is then filtered by the high-precision
    embedding test (decisive at the 1e-60 scale, far below any threshold
    used by callers).
    """
    table = table or default_table()
    b = np.asarray(bounds, dtype=float)
    if np.any(b < 0):
        raise ValueError("bounds must be nonnegative")
    limept = np.abs(table.vander_inv) @ b
    lim = np.floor(limept + 1e-9).astype(int)
    fb = [Fraction(x) for x in np.asarray(bounds).tolist()]
    for c2 in range(-lim[2], lim[2] + 1):
        for c1 in range(-lim[1], lim[1] + 1):
            # c0 range from the three embedding intervals
            lo, hi = -limept[0] - 1, limept[0] + 1
            for j in range(3):
                r = table.roots[j]
                mid = c1 * r + c2 * r * r
                lo = max(lo, -b[j] - mid)
                hi = min(hi, b[j] - mid)
            if lo > hi + 1e-9:
                continue
            for c0 in range(int(np.ceil(lo - 1e-9)), int(np.floor(hi + 1e-9)) + 1):
                x = CubicNum(Fraction(c0), Fraction(c1), Fraction(c2))
                if all(abs(embed_hp(x, j + 1, table)) <= fb[j] for j in range(3)):
                    yield x


# ---------------------------------------------------------------------------
# vectorized int64 coefficient arithmetic (exact below 2^63, asserted by callers)

_T3_INT = np.array([1, 2, -1], dtype=np.int64)
_T4_INT = np.array([-1, -1, 3], dtype=np.int64)
_SIGMA_INT = np.array(_SIGMA, dtype=np.int64)


def mul_vec(a, b):
    """Product of coefficient arrays (...,3) x (...,3) -> (...,3), int64 exact."""
    a = np.asarray(a)
    b = np.asarray(b)
    d0 = a[..., 0] * b[..., 0]
    d1 = a[..., 0] * b[..., 1] + a[..., 1] * b[..., 0]
    d2 = a[..., 0] * b[..., 2] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 0]
    d3 = a[..., 1] * b[..., 2] + a[..., 2] * b[..., 1]
    d4 = a[..., 2] * b[..., 2]
    out = np.empty(np.broadcast(d0, d3).shape + (3,), dtype=a.dtype)
    for i in range(3):
        out[..., i] = (i == 0) * d0 + (i == 1) * d1 + (i == 2) * d2
        out[..., i] += d3 * _T3_INT[i] + d4 * _T4_INT[i]
    return out


def sigma_vec(a):
    """Galois sigma on coefficient arrays."""
    return np.einsum("ij,...j->...i", _SIGMA_INT, np.asarray(a))


def embed_vec(a, table: EmbeddingTable | None = None):
    """Float embeddings of a coefficient array (...,3) -> (...,3) [j = 1..3]."""
    table = table or default_table()
    r = table.roots
    a = np.asarray(a, dtype=float)
    return a[..., 0:1] + a[..., 1:2] * r + a[..., 2:3] * (r * r)


# plain-tuple arithmetic over python ints: no overflow, no Fraction overhead;
# used by the lattice search where intermediates exceed the int64 budget

def imul(u, v):
    d0 = u[0] * v[0]
    d1 = u[0] * v[1] + u[1] * v[0]
    d2 = u[0] * v[2] + u[1] * v[1] + u[2] * v[0]
    d3 = u[1] * v[2] + u[2] * v[1]
    d4 = u[2] * v[2]
    return (d0 + d3 - d4, d1 + 2 * d3 - d4, d2 - d3 + 3 * d4)


def iadd(u, v):
    return (u[0] + v[0], u[1] + v[1], u[2] + v[2])


def isub(u, v):
    return (u[0] - v[0], u[1] - v[1], u[2] - v[2])


def iscale(k, u):
    return (k * u[0], k * u[1], k * u[2])


def iembed(u, table: EmbeddingTable | None = None):
    table = table or default_table()
    r = table.roots
    return float(u[0]) + float(u[1]) * r + float(u[2]) * (r * r)


def idiv_exact(u, v):
    """u / v when the quotient is integral, else None."""
    q = CubicNum(Fraction(u[0]), Fraction(u[1]), Fraction(u[2])) * nf_inv(
        CubicNum(Fraction(v[0]), Fraction(v[1]), Fraction(v[2]))
    )
    if not q.is_integral():
        return None
    return (int(q.c0), int(q.c1), int(q.c2))
