"""Arithmetic subgroups of the orthogonal group of Q = 2x0^2 - 3x1^2 - x2^2.

Two groups are enumerated, both with fully exact membership decisions:

* ``enumerate_gamma0``  -- integer matrices: the cocompact arithmetic
  Fuchsian group acting on the hyperbolic plane;
* ``enumerate_gamma``   -- matrices over the cubic ring Z[theta]; the three
  real embeddings give an irreducible lattice in the triple product group.

The search is column by column.  The group norm of an element is arccosh
of its (0,0) entry, so a height bound constrains only that entry; row and
column Gram relations then give explicit per-entry windows:

    column 0: 2 a^2 - 3 b^2 - c^2 = 2 with a = m00 in [1, cosh h];
    row 0:    m01^2 <= 3 (a^2 - 1) / 2 (from m S^-1 m^T = S^-1);
    column 1: 2 m01^2 - 3 m11^2 - m21^2 = -3 plus S-orthogonality to
              column 0, which pins the remaining entry linearly.

Given the first two columns the third is forced: with w the Euclidean
cross product of the columns, c3 = -S^{-1} w, which also forces det = 1.
A candidate survives only if c3 is integral.

Intermediate arithmetic runs vectorized over int64 coefficient arrays;
explicit magnitude assertions keep every product far below 2^63, so the
decisions are exact integer arithmetic throughout (no floating point in
any membership decision).

Coset reduction for the triple lattice: the key of gamma is the exact pair
(gamma * adj(gamma^{sigma^2}), gamma^sigma * adj(gamma^{sigma^2})); two
elements share a key exactly when they differ by a right factor fixed by
the Galois action, i.e. an element of the diagonal copy of the plane group.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import hypgeom as hg
from . import numberfield as nf
from .hypgeom import LorentzForm, HPoint

__all__ = [
    "ResourceLimitError",
    "LatticeElement",
    "CosetKey",
    "DirichletDomain",
    "identity_element",
    "enumerate_gamma0",
    "enumerate_gamma",
    "enumerate_gamma_ball",
    "stabilizer_of_origin",
    "coset_reduce",
    "triple_points",
    "dirichlet_domain",
    "perturbed_center",
    "save_elements",
    "load_elements",
]

S_DIAG = np.array([2, -3, -1], dtype=np.int64)
# heights above this would push first-column searches past the int64 budget
MAX_COSH_HEIGHT = 5.0e6
_MAX_COEFF = 1 << 18  # per-entry coefficient budget keeping int64 products exact


class ResourceLimitError(RuntimeError):
    pass


def _check_height(height):
    if np.cosh(height) > MAX_COSH_HEIGHT:
        raise ResourceLimitError(
            f"height {height} needs first-column entries up to cosh(h) ~ {np.cosh(height):.3g}; "
            f"the configured budget is {MAX_COSH_HEIGHT:.3g}"
        )


def _assert_coeff_budget(arr):
    if arr.size and np.max(np.abs(arr)) >= _MAX_COEFF:
        raise ResourceLimitError(
            f"coefficients reached {np.max(np.abs(arr))}, beyond the exact "
            f"int64 budget {_MAX_COEFF}"
        )


# ---------------------------------------------------------------------------
# elements


@dataclass(frozen=True)
class LatticeElement:
    """Group element with exact entries and cached per-embedding norms.

    ring "Z":  mat is a (3,3) int64 matrix of integers.
    ring "Ok": mat is a (3,3,3) int64 array of cubic-integer coefficient
    triples (entry, then coefficients of 1, theta, theta^2).
    """

    ring: str
    mat: np.ndarray
    norms: tuple = field(default=None, compare=False)

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.mat, dtype=np.int64))
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)
        if self.norms is None:
            ns = tuple(float(np.arccosh(max(e, 1.0))) for e in self._entry00_embeddings())
            object.__setattr__(self, "norms", ns)

    def _entry00_embeddings(self):
        if self.ring == "Z":
            return [float(self.mat[0, 0])]
        return [float(v) for v in nf.embed_vec(self.mat[0, 0])]

    def key(self):
        return (self.ring, self.mat.tobytes())

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, LatticeElement) and self.key() == other.key()

    # -- exact algebra --

    def matmul(self, other: "LatticeElement") -> "LatticeElement":
        if self.ring != other.ring:
            raise ValueError("mixed rings")
        if self.ring == "Z":
            return LatticeElement("Z", self.mat @ other.mat)
        a, b = self.mat, other.mat
        out = np.zeros((3, 3, 3), dtype=np.int64)
        for i in range(3):
            for j in range(3):
                acc = np.zeros(3, dtype=np.int64)
                for k in range(3):
                    acc = acc + nf.mul_vec(a[i, k], b[k, j])
                out[i, j] = acc
        return LatticeElement(self.ring, out)

    def adjugate(self) -> "LatticeElement":
        """Exact inverse (det = 1, so the adjugate is the inverse)."""
        m = self.mat
        idx = [(1, 2), (0, 2), (0, 1)]
        if self.ring == "Z":
            cof = np.empty((3, 3), dtype=np.int64)
            for i in range(3):
                for j in range(3):
                    r, c = idx[i], idx[j]
                    cof[j, i] = (-1) ** (i + j) * (
                        m[r[0], c[0]] * m[r[1], c[1]] - m[r[0], c[1]] * m[r[1], c[0]]
                    )
            return LatticeElement("Z", cof)
        cof = np.zeros((3, 3, 3), dtype=np.int64)
        for i in range(3):
            for j in range(3):
                r, c = idx[i], idx[j]
                det2 = nf.mul_vec(m[r[0], c[0]], m[r[1], c[1]]) - nf.mul_vec(
                    m[r[0], c[1]], m[r[1], c[0]]
                )
                cof[j, i] = (-1) ** (i + j) * det2
        return LatticeElement("Ok", cof)

    inv = adjugate

    def sigma(self) -> "LatticeElement":
        """Entrywise Galois conjugate."""
        if self.ring == "Z":
            return self
        return LatticeElement("Ok", nf.sigma_vec(self.mat))

    def is_sigma_fixed(self) -> bool:
        if self.ring == "Z":
            return True
        return bool(np.all(self.mat[..., 1:] == 0))

    # -- float realizations --

    def embed_matrix(self, j: int = 1) -> np.ndarray:
        if self.ring == "Z":
            return self.mat.astype(float)
        return nf.embed_vec(self.mat)[..., j - 1]

    def group_element(self, form: LorentzForm, j: int = 1) -> hg.GroupElement:
        return hg.GroupElement(form, self.embed_matrix(j), exact_m=self.mat)

    def group_norm(self, j: int = 1) -> float:
        return self.norms[j - 1]

    def first_column(self):
        return tuple(np.ravel(self.mat[:, 0]).tolist())


def identity_element(ring="Z") -> LatticeElement:
    if ring == "Z":
        return LatticeElement("Z", np.eye(3, dtype=np.int64))
    m = np.zeros((3, 3, 3), dtype=np.int64)
    for i in range(3):
        m[i, i, 0] = 1
    return LatticeElement("Ok", m)


def verify_exact(elem: LatticeElement) -> bool:
    """m^T S m = S in exact integer arithmetic."""
    m = elem.mat
    _assert_coeff_budget(m)
    if elem.ring == "Z":
        g = (m.T * S_DIAG) @ m
        return bool(np.all(g == np.diag(S_DIAG)))
    for i in range(3):
        for j in range(i, 3):
            acc = np.zeros(3, dtype=np.int64)
            for k in range(3):
                acc = acc + S_DIAG[k] * nf.mul_vec(m[k, i], m[k, j])
            want = np.array([S_DIAG[i] if i == j else 0, 0, 0], dtype=np.int64)
            if not np.all(acc == want):
                return False
    return True


# ---------------------------------------------------------------------------
# integer enumeration (the plane group)


def _first_columns_z(amax: int):
    """All integer (a, b, c) with 2a^2 - 3b^2 - c^2 = 2, 1 <= a <= amax."""
    cols = []
    for a in range(1, amax + 1):
        rhs = 2 * a * a - 2
        bmax = int(np.floor(np.sqrt(rhs / 3.0) + 1e-9))
        b = np.arange(-bmax, bmax + 1, dtype=np.int64)
        c2 = rhs - 3 * b * b
        c = np.rint(np.sqrt(np.maximum(c2, 0))).astype(np.int64)
        ok = c * c == c2
        for bb, cc in zip(b[ok], c[ok]):
            cols.append((a, int(bb), int(cc)))
            if cc != 0:
                cols.append((a, int(bb), -int(cc)))
    return cols


def _complete_z(c1, c2):
    """Third column from the first two: c3 = -S^{-1}(c1 x c2); None unless
    integral.  The Gram identity makes Q(c3) = -1 and det = +1 automatic."""
    w = np.cross(c1, c2)
    if w[0] % 2 != 0 or w[1] % 3 != 0:
        return None
    return np.array([-w[0] // 2, w[1] // 3, w[2]], dtype=np.int64)


def enumerate_gamma0(height: float):
    """All gamma in SO_e(Q)(Z) with group norm <= height.

    Exact integer arithmetic end to end; raises ResourceLimitError when
    cosh(height) exceeds the configured entry budget.
    """
    if height < 0:
        raise ValueError("height must be nonnegative")
    _check_height(height)
    amax = int(np.floor(np.cosh(height) + 1e-12))
    out = []
    for a, b, c in _first_columns_z(amax):
        c1 = np.array([a, b, c], dtype=np.int64)
        # anisotropy: the quadric has no nonzero rational zeros, asserted
        # on everything the search touches
        assert 2 * a * a - 3 * b * b - c * c != 0
        for col2 in _second_columns_z(a, b, c):
            c3 = _complete_z(c1, col2)
            if c3 is None:
                continue
            elem = LatticeElement("Z", np.stack([c1, col2, c3], axis=1))
            assert verify_exact(elem)
            out.append(elem)
    return out


def _second_columns_z(a, b, c):
    """Second columns (d, e, f): 2d^2 - 3e^2 - f^2 = -3 and 2ad = 3be + cf,
    with d^2 <= 3(a^2 - 1)/2 from the row relation.

    Substituting f = (2ad - 3be)/c turns the quadratic into
    (3c^2 + 9b^2) e^2 - 12abd e + (4a^2 d^2 - (3 + 2d^2) c^2) = 0,
    solved per d through its discriminant.  Floats locate the candidate
    roots (well inside the 0.5 rounding margin); every candidate is then
    verified in exact small-integer arithmetic.
    """
    dmax = int(np.floor(np.sqrt(1.5 * max(a * a - 1, 0)) + 1e-9))
    d = np.arange(-dmax, dmax + 1, dtype=np.int64)
    cand = []
    if c != 0:
        kk = 3 * c * c + 9 * b * b
        p_coef = 144.0 * (a * b) ** 2 - 16.0 * kk * a * a + 8.0 * kk * c * c
        disc = p_coef * d.astype(float) ** 2 + 12.0 * kk * c * c
        okd = disc >= 0
        s = np.sqrt(np.maximum(disc, 0.0))
        for sign in (1.0, -1.0):
            e = np.rint((12.0 * a * b * d + sign * s) / (2.0 * kk)).astype(np.int64)
            num = 2 * a * d - 3 * b * e
            ok = okd & (num % c == 0)
            f = np.where(ok, num // np.int64(c), np.int64(0))
            ok &= 2 * d * d - 3 * e * e - f * f == -3
            ok &= 2 * a * d - 3 * b * e - c * f == 0
            cand.append(np.stack([d[ok], e[ok], f[ok]], axis=-1))
        cand = np.unique(np.concatenate(cand), axis=0)
    elif b != 0:
        num = 2 * a * d  # 3be = 2ad
        ok = num % (3 * b) == 0
        e = np.where(ok, num // np.int64(3 * b), np.int64(0))
        f2 = 3 + 2 * d * d - 3 * e * e
        f = np.rint(np.sqrt(np.maximum(f2, 0))).astype(np.int64)
        okf = ok & (f * f == f2)
        cand = np.stack([d[okf], e[okf], f[okf]], axis=-1)
        extra = cand[cand[:, 2] != 0] * np.array([1, 1, -1], dtype=np.int64)
        cand = np.concatenate([cand, extra])
    else:
        # a = 1: first column is e0, second column solves 3e^2 + f^2 = 3
        cand = np.array([[0, 1, 0], [0, -1, 0]], dtype=np.int64)
    return cand


def stabilizer_of_origin():
    """Gamma_0 intersect K: the identity and the half-turn about o."""
    return enumerate_gamma0(0.0)


# ---------------------------------------------------------------------------
# cubic-integer enumeration (the triple lattice)


def _elem_range_box(lo_b, hi_b):
    """Integer coefficient triples x with lo_b[j] <= embed_j(x) <= hi_b[j].

    Iterates (c1, c2) windows from the inverse Vandermonde and solves the
    c0 interval from the three embeddings (the c0 coefficient of every
    embedding is +1, so each condition is an interval in c0).  Floats only
    trim the windows; survivors face the callers' exact relations.
    """
    tab = nf.default_table()
    lo_b = np.asarray(lo_b, dtype=float)
    hi_b = np.asarray(hi_b, dtype=float)
    lim = np.abs(tab.vander_inv) @ np.maximum(np.abs(lo_b), np.abs(hi_b))
    r = tab.roots
    c1s = np.arange(-int(lim[1]) - 1, int(lim[1]) + 2, dtype=np.int64)
    c2s = np.arange(-int(lim[2]) - 1, int(lim[2]) + 2, dtype=np.int64)
    cc1, cc2 = [a.ravel() for a in np.meshgrid(c1s, c2s, indexing="ij")]
    mid = cc1[:, None] * r[None, :] + cc2[:, None] * (r * r)[None, :]
    lo = np.max(lo_b[None, :] - mid, axis=1)
    hi = np.min(hi_b[None, :] - mid, axis=1)
    keep = lo <= hi + 1e-9
    cc1, cc2, lo, hi = cc1[keep], cc2[keep], lo[keep], hi[keep]
    lo_i = np.ceil(lo - 1e-9).astype(np.int64)
    hi_i = np.floor(hi + 1e-9).astype(np.int64)
    counts = np.maximum(hi_i - lo_i + 1, 0)
    out = np.empty((int(counts.sum()), 3), dtype=np.int64)
    pos = 0
    for c1v, c2v, l, n in zip(cc1, cc2, lo_i, counts):
        if n <= 0:
            continue
        out[pos : pos + n, 0] = np.arange(l, l + n)
        out[pos : pos + n, 1] = c1v
        out[pos : pos + n, 2] = c2v
        pos += n
    return out[:pos]


def _elem_range(bounds):
    """Symmetric window |embed_j(x)| <= bounds[j]."""
    b = np.asarray(bounds, dtype=float)
    return _elem_range_box(-b, b)


def _sqrt_in_ok(vals):
    """Batch square roots in the ring for totally nonnegative triples.

    Per-embedding float square roots are recombined through the inverse
    Vandermonde with all sign choices, rounded to integers and verified
    exactly.  Returns (found mask, roots).
    """
    tab = nf.default_table()
    emb = np.maximum(nf.embed_vec(vals), 0.0)
    s = np.sqrt(emb)
    roots = np.zeros_like(vals)
    ok = np.zeros(len(vals), dtype=bool)
    for signs in ((1, 1, 1), (1, -1, 1), (1, 1, -1), (1, -1, -1)):
        todo = ~ok
        if not todo.any():
            break
        cand = np.rint((s[todo] * np.array(signs)) @ tab.vander_inv.T).astype(np.int64)
        hit = np.all(nf.mul_vec(cand, cand) == vals[todo], axis=-1)
        idx = np.flatnonzero(todo)[hit]
        roots[idx] = cand[hit]
        ok[idx] = True
    return ok, roots


def _first_columns_ok(a_list):
    """First columns over the ring: for each a, all (b, c) with
    2a^2 - 3b^2 - c^2 = 2 inside the per-embedding windows forced by a."""
    cols = []
    for a in a_list:
        a = np.asarray(a, dtype=np.int64)
        ea = nf.embed_vec(a)
        rhs = 2 * nf.mul_vec(a, a)
        rhs[0] -= 2
        bs = _elem_range(np.sqrt(np.maximum((2 * ea * ea - 2) / 3.0, 0.0)) + 1e-9)
        if len(bs) == 0:
            continue
        _assert_coeff_budget(bs)
        c2 = rhs[None, :] - 3 * nf.mul_vec(bs, bs)
        keep = np.all(nf.embed_vec(c2) >= -1e-6, axis=1)
        bs, c2 = bs[keep], c2[keep]
        if len(bs) == 0:
            continue
        ok, roots = _sqrt_in_ok(c2)
        for b_row, c_row in zip(bs[ok], roots[ok]):
            cols.append((a, b_row.copy(), c_row.copy()))
            if np.any(c_row != 0):
                cols.append((a, b_row.copy(), -c_row))
    return cols


_SIGN_COMBOS = ((1, 1, 1), (1, -1, 1), (1, 1, -1), (1, -1, -1))


def _second_columns_ok(a, b, c):
    """Second columns (d, e, f): 2d^2 - 3e^2 - f^2 = -3 and 2ad = 3be + cf,
    with d in the per-embedding window d^2 <= 3(a^2 - 1)/2.

    Same discriminant reduction as the integer case, but over the ring:
    K e^2 - 12ab d e + (4a^2 d^2 - (3 + 2d^2) c^2) = 0 with K = 3c^2+9b^2.
    The discriminant and all verifications run in plain python integers
    (coefficients exceed the int64 budget); candidate square roots come
    from per-embedding float roots recombined through the inverse
    Vandermonde, a margin of ~1e-5 against the 0.5 rounding threshold.
    """
    tab = nf.default_table()
    ea = nf.embed_vec(a)
    ds = _elem_range(np.sqrt(np.maximum(1.5 * (ea * ea - 1.0), 0.0)) + 1e-9)
    if len(ds) == 0:
        return []
    _assert_coeff_budget(ds)
    out = []
    at = tuple(int(x) for x in a)
    bt = tuple(int(x) for x in b)
    ct = tuple(int(x) for x in c)
    if any(ct):
        csq = nf.imul(ct, ct)
        kk = nf.iadd(nf.iscale(3, csq), nf.iscale(9, nf.imul(bt, bt)))
        ab = nf.imul(at, bt)
        # P = 144 (ab)^2 - 16 K a^2 + 8 K c^2, Q = 12 K c^2
        p_t = nf.isub(
            nf.iscale(144, nf.imul(ab, ab)),
            nf.isub(nf.iscale(16, nf.imul(kk, nf.imul(at, at))), nf.iscale(8, nf.imul(kk, csq))),
        )
        q_t = nf.iscale(12, nf.imul(kk, csq))
        p_j = nf.iembed(p_t)
        q_j = nf.iembed(q_t)
        two_k = nf.iscale(2, kk)
        d_j = nf.embed_vec(ds)
        disc_j = p_j[None, :] * d_j * d_j + q_j[None, :]
        # a solution needs a ring square root of the discriminant, hence
        # nonnegativity in every embedding; this kills most candidates
        feas = np.all(disc_j >= -1e-6, axis=1)
        ds, disc_j = ds[feas], np.maximum(disc_j[feas], 0.0)
        if len(ds) == 0:
            return out
        sroot = np.sqrt(disc_j)
        cols_seen = set()
        hit_rows = {}
        for signs in _SIGN_COMBOS:
            cand = np.rint((sroot * np.asarray(signs)) @ tab.vander_inv.T)
            sj = cand @ tab.vander.T  # float embeddings of the rounded root
            close = np.max(np.abs(sj * sj - disc_j), axis=1) <= 1e-8 * (
                1.0 + np.max(np.abs(disc_j), axis=1)
            )
            for row in np.flatnonzero(close):
                hit_rows.setdefault(row, set()).add(tuple(int(x) for x in cand[row]))
        for row, scands in hit_rows.items():
            dt = tuple(int(x) for x in ds[row])
            d_exact = nf.iadd(nf.imul(p_t, nf.imul(dt, dt)), q_t)
            for st in scands:
                if nf.imul(st, st) != d_exact:
                    continue
                for pm in (1, -1):
                    num = nf.iadd(nf.iscale(12, nf.imul(ab, dt)), nf.iscale(pm, st))
                    et = nf.idiv_exact(num, two_k)
                    if et is None:
                        continue
                    fnum = nf.isub(nf.iscale(2, nf.imul(at, dt)), nf.iscale(3, nf.imul(bt, et)))
                    ft = nf.idiv_exact(fnum, ct)
                    if ft is None:
                        continue
                    qd = nf.isub(
                        nf.iscale(2, nf.imul(dt, dt)),
                        nf.iadd(nf.iscale(3, nf.imul(et, et)), nf.imul(ft, ft)),
                    )
                    if qd != (-3, 0, 0):
                        continue
                    key = (dt, et, ft)
                    if key in cols_seen:
                        continue
                    cols_seen.add(key)
                    out.append(np.array([dt, et, ft], dtype=np.int64))
                if st == (0, 0, 0):
                    break
    elif any(bt):
        b3inv = nf.nf_inv(nf.CubicNum(*[3 * x for x in bt]))
        for row in range(len(ds)):
            dt = tuple(int(x) for x in ds[row])
            e_el = nf.CubicNum(*nf.iscale(2, nf.imul(at, dt))) * b3inv
            if not e_el.is_integral():
                continue
            et = (int(e_el.c0), int(e_el.c1), int(e_el.c2))
            f2 = nf.isub(nf.iscale(2, nf.imul(dt, dt)), nf.iscale(3, nf.imul(et, et)))
            f2 = nf.iadd(f2, (3, 0, 0))
            if np.any(nf.iembed(f2) < -1e-6):
                continue
            ok, root = _sqrt_in_ok(np.array([f2], dtype=np.int64))
            if ok[0]:
                out.append(np.array([dt, et, tuple(root[0])], dtype=np.int64))
                if np.any(root[0] != 0):
                    out.append(np.array([dt, et, tuple(-root[0])], dtype=np.int64))
    else:
        # first column is e0 (a = 1): second column (0, +-1, 0)
        one = np.array([1, 0, 0], dtype=np.int64)
        zero = np.zeros(3, dtype=np.int64)
        out.append(np.stack([zero, one, zero]))
        out.append(np.stack([zero, -one, zero]))
    return out


def _complete_ok(c1, c2):
    """Third column over the ring: c3 = -S^{-1}(c1 x c2), or None."""
    w = np.empty((3, 3), dtype=np.int64)
    w[0] = nf.mul_vec(c1[1], c2[2]) - nf.mul_vec(c1[2], c2[1])
    w[1] = nf.mul_vec(c1[2], c2[0]) - nf.mul_vec(c1[0], c2[2])
    w[2] = nf.mul_vec(c1[0], c2[1]) - nf.mul_vec(c1[1], c2[0])
    if np.any(w[0] % 2 != 0) or np.any(w[1] % 3 != 0):
        return None
    return np.stack([-w[0] // 2, w[1] // 3, w[2]])


def _assemble_ok(cols1, norm_filter):
    out = []
    for a, b, c in cols1:
        c1 = np.stack([np.asarray(a, dtype=np.int64), b, c])
        for c2 in _second_columns_ok(a, b, c):
            c3 = _complete_ok(c1, c2)
            if c3 is None:
                continue
            m = np.stack([c1, c2, c3], axis=1)
            # identity component in every embedding: positive (0,0) entry
            if np.any(nf.embed_vec(m[0, 0]) < 0.999):
                continue
            elem = LatticeElement("Ok", m)
            if not norm_filter(elem):
                continue
            assert verify_exact(elem)
            out.append(elem)
    return out


def enumerate_gamma(heights):
    """All gamma over the cubic ring with embedding norms <= heights[j]."""
    heights = tuple(float(h) for h in heights)
    if any(h < 0 for h in heights):
        raise ValueError("heights must be nonnegative")
    for h in heights:
        _check_height(h)
    ch = np.cosh(heights)
    a_all = _elem_range_box(np.ones(3) - 1e-12, ch + 1e-12)

    def norm_filter(elem):
        return all(n <= h + 1e-12 for n, h in zip(elem.norms, heights))

    return _assemble_ok(_first_columns_ok(list(a_all)), norm_filter)


def enumerate_gamma_ball(radius, slack):
    """All gamma with sum_j norm_j(gamma)^2 <= (radius + slack)^2.

    This ellipsoid is a certified-complete search set for coset counting in
    the triple-space ball of the given radius whenever ``slack`` is at
    least sqrt(3) times the covering radius of the plane-group orbit of the
    origin: the Karcher minimizer of an in-ball coset can be matched by a
    nearby orbit point reached through a sigma-fixed right factor.
    """
    reff = float(radius) + float(slack)
    _check_height(reff)
    a_all = _elem_range_box(np.ones(3) - 1e-12, np.full(3, np.cosh(reff)) + 1e-12)
    ea = nf.embed_vec(a_all)
    nrm2 = np.square(np.arccosh(np.maximum(ea, 1.0))).sum(axis=1)
    a_all = a_all[nrm2 <= reff * reff + 1e-9]

    def norm_filter(elem):
        return sum(n * n for n in elem.norms) <= reff * reff + 1e-9

    return _assemble_ok(_first_columns_ok(list(a_all)), norm_filter)


# ---------------------------------------------------------------------------
# cosets


@dataclass(frozen=True)
class CosetKey:
    """Exact canonical label of a coset modulo the sigma-fixed subgroup."""

    u: bytes
    v: bytes


def coset_reduce(gamma: LatticeElement) -> CosetKey:
    """Key (gamma adj(gamma^{sigma^2}), gamma^sigma adj(gamma^{sigma^2})).

    Right multiplication by a sigma-fixed element cancels; conversely equal
    keys force gamma1^{-1} gamma2 to be sigma-fixed, hence integral, hence
    in the diagonal plane group (all embeddings stay in the identity
    component for enumerated elements).
    """
    if gamma.ring != "Ok":
        raise ValueError("coset reduction applies to cubic-ring elements")
    s1 = gamma.sigma()
    w = s1.sigma().adjugate()
    return CosetKey(gamma.matmul(w).mat.tobytes(), s1.matmul(w).mat.tobytes())


def triple_points(gamma: LatticeElement, form: LorentzForm):
    """The three plane points of the coset: p_j = embed_j(gamma)^{-1} o."""
    ginv = gamma.adjugate()
    return [form.point(ginv.embed_matrix(j) @ form.basepoint) for j in (1, 2, 3)]


# ---------------------------------------------------------------------------
# Dirichlet domains


@dataclass
class DirichletDomain:
    """Voronoi cell of the center's orbit, as a hyperbolic polygon.

    ``area`` is the Gauss-Bonnet area of the cell; when the center has a
    nontrivial stabilizer the cell covers ``stabilizer_order`` fundamental
    domains, and ``covolume`` divides that out.
    """

    center: HPoint
    vertices: list
    pairings: list
    area: float
    certified: bool
    circumradius: float
    stabilizer_order: int

    @property
    def covolume(self):
        return self.area / self.stabilizer_order


def _klein_inv(form, u):
    u = np.asarray(u, dtype=float)
    y = np.concatenate([np.ones(u.shape[:-1] + (1,)), u], axis=-1)
    x = np.einsum("ij,...j->...i", np.linalg.inv(form.to_standard), y)
    q = form.quad(x)
    return x * np.sqrt(form.q0 / np.maximum(q, 1e-300))[..., None]


def _clip_halfplane(poly, a, b, c):
    """Sutherland-Hodgman clip of a polygon by a*u0 + b*u1 + c >= 0."""
    if len(poly) == 0:
        return poly
    out = []
    vals = [a * p[0] + b * p[1] + c for p in poly]
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        pi, pj = poly[i], poly[j]
        vi, vj = vals[i], vals[j]
        if vi >= 0:
            out.append(pi)
        if (vi >= 0) != (vj >= 0):
            t = vi / (vi - vj)
            out.append((pi[0] + t * (pj[0] - pi[0]), pi[1] + t * (pj[1] - pi[1])))
    return out


def dirichlet_domain(elements, center: HPoint = None, form: LorentzForm = None):
    """Voronoi cell of the center's orbit under the given elements.

    Half-planes d(x, center) <= d(x, gamma center) are intersected in the
    Klein disk, where geodesics are straight chords.  Orbit points equal to
    the center are skipped (exact test on integer matrices), so at a
    stabilized center the cell is the orbit cell; ``covolume`` divides by
    the stabilizer order.

    Certification: a bisector of an orbit point further than twice the
    circumradius from the center cannot cut the cell, so the polygon is
    final once the element set exhausts norms up to
    2*circumradius + 2*d(center, o).  The flag records exactly that test.
    """
    form = form or LorentzForm.paper_form()
    center = center or form.origin
    elements = list(elements)
    if not elements:
        raise ValueError("need at least one element")

    cx = center.x
    scale = max(1.0, float(np.max(np.abs(cx))))
    orbit = {}
    stab = 0
    max_norm = 0.0
    for el in elements:
        y = el.embed_matrix(1) @ cx
        max_norm = max(max_norm, el.group_norm(1))
        if np.max(np.abs(y - cx)) < 1e-9 * scale:
            stab += 1
            continue
        orbit[tuple(np.round(y, 9))] = (y, el)
    stab = max(stab, 1)

    tmat = form.to_standard
    tinv = np.linalg.inv(tmat)
    poly = [(-1.01, -1.01), (1.01, -1.01), (1.01, 1.01), (-1.01, 1.01)]
    for y, _el in orbit.values():
        # closer to the center than to y: B(x, center) <= B(x, y), since
        # cosh of the distance grows with the pairing
        w = tinv.T @ (form.gram @ (y - cx))  # covector in standard coords
        poly = _clip_halfplane(poly, w[1], w[2], w[0])
    if len(poly) < 3:
        raise hg.GeometryError("domain degenerated to an empty polygon")
    # merge duplicate vertices produced by concurrent bisectors
    cleaned = []
    for p in poly:
        if not cleaned or abs(p[0] - cleaned[-1][0]) + abs(p[1] - cleaned[-1][1]) > 1e-12:
            cleaned.append(p)
    if len(cleaned) > 1 and abs(cleaned[0][0] - cleaned[-1][0]) + abs(
        cleaned[0][1] - cleaned[-1][1]
    ) <= 1e-12:
        cleaned.pop()
    poly_arr = np.array(cleaned)
    bounded = bool(np.all(np.linalg.norm(poly_arr, axis=1) < 1.0 - 1e-9))

    verts, area, circum, certified, pairings = [], float("inf"), float("inf"), False, []
    if bounded:
        verts = [form.point(v) for v in _klein_inv(form, poly_arr)]
        n = len(verts)
        angles = 0.0
        for i in range(n):
            v = verts[i]
            w1 = hg.log_batch(form, v.x[None, :], verts[(i - 1) % n].x[None, :])[0]
            w2 = hg.log_batch(form, v.x[None, :], verts[(i + 1) % n].x[None, :])[0]
            g11 = -form.pair(w1, w1) / form.q0
            g22 = -form.pair(w2, w2) / form.q0
            g12 = -form.pair(w1, w2) / form.q0
            angles += float(np.arccos(np.clip(g12 / np.sqrt(g11 * g22), -1.0, 1.0)))
        area = (n - 2) * np.pi - angles
        circum = max(hg.distance(center, v) for v in verts)
        certified = max_norm >= 2.0 * circum + 2.0 * hg.distance(center, form.origin) - 1e-9
        # pairing element per edge: orbit point whose bisector holds the midpoint
        for i in range(n):
            mid = hg.midpoint(verts[i], verts[(i + 1) % n])
            best, bestval = None, np.inf
            for y, el in orbit.values():
                dev = abs(form.pair(mid.x, cx - y))
                if dev < bestval:
                    bestval, best = dev, el
            pairings.append(best)

    return DirichletDomain(
        center=center,
        vertices=verts,
        pairings=pairings,
        area=float(area),
        certified=certified,
        circumradius=float(circum),
        stabilizer_order=stab,
    )


def perturbed_center(form: LorentzForm = None, max_den=40):
    """A rational point on the quadric near the origin; used to build the
    trivial-stabilizer Dirichlet domain for the covolume cross-check."""
    form = form or LorentzForm.paper_form()
    best = None
    for den in range(2, max_den + 1):
        for a in range(den + 1, 2 * den):
            for b in range(0, den):
                c2 = 2 * a * a - 3 * b * b - 2 * den * den
                if c2 < 0:
                    continue
                c = math.isqrt(c2)
                if c * c != c2 or (b == 0 and c == 0):
                    continue
                xf = np.array([a / den, b / den, c / den])
                pt = form.point(xf)
                dist = hg.distance(form.origin, pt)
                if best is None or dist < best[0]:
                    best = (dist, pt)
    if best is None:
        raise hg.GeometryError("no rational perturbation found")
    return best[1]


# ---------------------------------------------------------------------------
# element store


def save_elements(path, elements, meta):
    """Newline-delimited exact store with a versioned JSON header; float
    norms are written with repr so reload reproduces them bit for bit."""
    with open(path, "w") as fh:
        header = {
            "version": 1,
            "form": "2x0^2-3x1^2-x2^2",
            "field": "x^3+x^2-2x-1",
            **meta,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for el in elements:
            rec = {
                "ring": el.ring,
                "mat": np.asarray(el.mat).ravel().tolist(),
                "norms": [repr(x) for x in el.norms],
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_elements(path):
    with open(path) as fh:
        header = json.loads(fh.readline())
        out = []
        for line in fh:
            rec = json.loads(line)
            shape = (3, 3) if rec["ring"] == "Z" else (3, 3, 3)
            mat = np.array(rec["mat"], dtype=np.int64).reshape(shape)
            out.append(LatticeElement(rec["ring"], mat, tuple(float(x) for x in rec["norms"])))
    return header, out
