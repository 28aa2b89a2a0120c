"""Lorentzian linear algebra and hyperbolic-plane geometry for SO_e(1,2).

Everything is built around a fixed symmetric bilinear form of signature
(1,2).  Two forms are built in:

* ``LorentzForm.paper_form()``  -- gram = diag(2,-3,-1), the anisotropic
  integral form whose integer points give a cocompact arithmetic group;
* ``LorentzForm.standard_form()`` -- gram = diag(1,-1,-1).

The congruence transport between them is the diagonal scaling
diag(sqrt 2, sqrt 3, 1); it is exact as an algebraic matrix (entries are
square roots of integers) and is stored in floating point.  No membership
decision ever uses the transport: exact arithmetic stays in the original
form.

Normalization: the group norm of the one-parameter boost ``a_t`` equals
``|t|`` and coincides with hyperbolic distance in curvature -1 units, so
areas grow like ``2*pi*(cosh R - 1)``.

Scalar operations act on small wrapper types (:class:`HPoint`,
:class:`TangentVector`, :class:`GroupElement`).  The ``*_batch`` functions
are the vectorized cores used by the Monte Carlo modules; they operate on
raw ``(...,3)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "GeometryError",
    "InvariantViolation",
    "ConvergenceError",
    "LorentzForm",
    "HPoint",
    "TangentVector",
    "GroupElement",
    "distance",
    "group_norm",
    "iwasawa_a",
    "iwasawa_nak",
    "exp_map",
    "log_map",
    "midpoint",
    "frechet_mean",
    "frechet_mean_batch",
    "transvection_to_origin",
]


class GeometryError(ValueError):
    """Numerical degeneracy: a point left the model surface."""


class InvariantViolation(ValueError):
    """A constructed object fails its defining relations."""


class ConvergenceError(RuntimeError):
    """Iteration limit reached.  Carries the best iterate found so far."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


# ---------------------------------------------------------------------------
# forms


class LorentzForm:
    """A signature-(1,2) bilinear form with a distinguished positive axis.

    Parameters
    ----------
    gram : (3,3) array_like
        Symmetric matrix of the form, one positive and two negative
        eigenvalues.
    basepoint : (3,) array_like
        Vector with positive square; its sheet of the quadric
        ``Q(x) = Q(basepoint)`` models the hyperbolic plane.
    """

    def __init__(self, gram, basepoint):
        gram = np.asarray(gram, dtype=float)
        basepoint = np.asarray(basepoint, dtype=float)
        if gram.shape != (3, 3) or not np.allclose(gram, gram.T):
            raise InvariantViolation("gram must be a symmetric 3x3 matrix")
        eigs = np.linalg.eigvalsh(gram)
        if not (eigs[0] < 0 and eigs[1] < 0 and eigs[2] > 0):
            raise InvariantViolation(f"gram must have signature (1,2), eigenvalues {eigs}")
        self.gram = gram
        self.basepoint = basepoint
        self.q0 = float(basepoint @ gram @ basepoint)
        if self.q0 <= 0:
            raise InvariantViolation("basepoint must have positive square")
        self._gram_inv = np.linalg.inv(gram)

    # -- constructors -------------------------------------------------

    @staticmethod
    @lru_cache(maxsize=None)
    def paper_form() -> "LorentzForm":
        """gram = diag(2,-3,-1): Q(x) = 2 x0^2 - 3 x1^2 - x2^2, q0 = 2."""
        return LorentzForm(np.diag([2.0, -3.0, -1.0]), np.array([1.0, 0, 0]))

    @staticmethod
    @lru_cache(maxsize=None)
    def standard_form() -> "LorentzForm":
        """gram = diag(1,-1,-1), q0 = 1."""
        return LorentzForm(np.diag([1.0, -1.0, -1.0]), np.array([1.0, 0, 0]))

    # -- raw bilinear algebra ------------------------------------------

    def pair(self, x, y):
        """B(x, y) = x^T gram y, broadcasting over leading axes."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.gram, y)

    def quad(self, x):
        return self.pair(x, x)

    # -- transport to the standard form --------------------------------

    @property
    def to_standard(self):
        """Matrix T with Q_std(T x) = Q(x).

        For diagonal grams this is diag(sqrt|g00|, sqrt|g11|, sqrt|g22|);
        in general a congruence computed from the eigendecomposition.
        Exact as an algebraic matrix, float in storage.
        """
        if not hasattr(self, "_to_std"):
            if np.count_nonzero(self.gram - np.diag(np.diagonal(self.gram))) == 0:
                self._to_std = np.diag(np.sqrt(np.abs(np.diagonal(self.gram))))
            else:
                w, u = np.linalg.eigh(self.gram)
                # order eigenvalues (+,-,-) to match diag(1,-1,-1)
                order = np.argsort(w)[::-1]
                w, u = w[order], u[:, order]
                self._to_std = np.diag(np.sqrt(np.abs(w))) @ u.T
        return self._to_std

    # -- model points ---------------------------------------------------

    @property
    def origin(self) -> "HPoint":
        return HPoint(self, self.basepoint.copy())

    def point(self, x) -> "HPoint":
        return HPoint(self, np.asarray(x, dtype=float))

    def project(self, x) -> "HPoint":
        """Rescale x onto the sheet Q = q0 (x must have positive square)."""
        x = np.asarray(x, dtype=float)
        q = self.quad(x)
        if q <= 0:
            raise GeometryError("cannot project a vector with nonpositive square")
        x = x * np.sqrt(self.q0 / q)
        if self.pair(x, self.basepoint) < 0:
            x = -x
        return HPoint(self, x)

    # -- distinguished subgroups (floats, via transport) -----------------

    def _conj_from_std(self, m_std):
        t = self.to_standard
        return np.linalg.solve(t, m_std @ t)

    def boost(self, t: float) -> "GroupElement":
        """a_t: group norm |t|, translation by distance |t| along the axis."""
        c, s = np.cosh(t), np.sinh(t)
        m = np.array([[c, s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return GroupElement(self, self._conj_from_std(m))

    def rotation(self, phi: float) -> "GroupElement":
        """k_phi: stabilizer of the origin, rotation by phi."""
        c, s = np.cos(phi), np.sin(phi)
        m = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
        return GroupElement(self, self._conj_from_std(m))

    def unipotent(self, u: float) -> "GroupElement":
        """n_u in the horospherical subgroup fixing the null covector."""
        n0 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 1.0, 0.0]])
        m = np.eye(3) + u * n0 + 0.5 * u * u * (n0 @ n0)
        return GroupElement(self, self._conj_from_std(m))

    @property
    def null_vector(self):
        """Future null vector xi with B(o, xi) > 0, Iwasawa reference."""
        if not hasattr(self, "_null"):
            self._null = np.linalg.solve(self.to_standard, np.array([1.0, -1.0, 0.0]))
        return self._null

    # -- validation ------------------------------------------------------

    def is_orthogonal(self, m, tol=1e-10):
        r = m.T @ self.gram @ m - self.gram
        return np.max(np.abs(r)) <= tol * np.max(np.abs(self.gram))

    def group_element(self, m, exact_m=None) -> "GroupElement":
        return GroupElement(self, np.asarray(m, dtype=float), exact_m)

    # -- random sampling ---------------------------------------------------

    def random_group_element(self, rng, scale=1.0) -> "GroupElement":
        """k exp(X) k' with boost length ~ scale * |normal|."""
        g = (
            self.rotation(rng.uniform(0, 2 * np.pi)).m
            @ self.boost(scale * abs(rng.standard_normal())).m
            @ self.rotation(rng.uniform(0, 2 * np.pi)).m
        )
        return GroupElement(self, g)

    def random_points(self, rng, rmax, size):
        """Points uniform w.r.t. hyperbolic area in the disk of radius rmax."""
        r = np.arccosh(1.0 + rng.uniform(0, 1, size) * (np.cosh(rmax) - 1.0))
        phi = rng.uniform(0, 2 * np.pi, size)
        return _polar_batch(self, r, phi)

    def __repr__(self):
        return f"LorentzForm(diag={np.diagonal(self.gram)}, q0={self.q0})"


# ---------------------------------------------------------------------------
# typed wrappers


@dataclass(frozen=True)
class HPoint:
    """Point on the upper sheet of the hyperboloid Q(x) = q0."""

    form: LorentzForm
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        q = self.form.quad(self.x)
        if abs(q - self.form.q0) > 1e-12 * max(1.0, abs(self.form.q0), abs(q)):
            # small float drift is repaired, larger errors are rejected
            if q <= 0 or abs(q - self.form.q0) > 1e-6 * abs(self.form.q0):
                raise InvariantViolation(f"point off the quadric: Q(x) = {q}, q0 = {self.form.q0}")
            object.__setattr__(self, "x", self.x * np.sqrt(self.form.q0 / q))
        if self.form.pair(self.x, self.form.basepoint) <= 0:
            raise InvariantViolation("point on the lower sheet")

    def __eq__(self, other):
        return self.form is other.form and np.array_equal(self.x, other.x)


@dataclass(frozen=True)
class TangentVector:
    """Vector v at basept with B(v, basept.x) = 0; |v|^2 = -Q(v)/q0."""

    basept: HPoint
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        form = self.basept.form
        b = form.pair(self.v, self.basept.x)
        scale = max(1.0, float(np.max(np.abs(self.v))))
        if abs(b) > 1e-9 * scale * max(1.0, abs(form.q0)):
            raise InvariantViolation(f"not tangent: B(v, x) = {b}")

    @property
    def norm(self) -> float:
        q = -self.basept.form.quad(self.v) / self.basept.form.q0
        return float(np.sqrt(max(q, 0.0)))


@dataclass
class GroupElement:
    """Element of SO_e(Q): m^T gram m = gram, det 1, upper sheet preserved.

    ``exact_m`` optionally carries the exact matrix (integers, Fractions, or
    cubic-integer coefficient triples) that produced ``m``; exactness is the
    caller's claim, validation here is on the float matrix.
    """

    form: LorentzForm
    m: np.ndarray
    exact_m: object = None
    tol: float = field(default=1e-10, repr=False)

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        if not self.form.is_orthogonal(self.m, self.tol):
            raise InvariantViolation("matrix does not preserve the form")
        if abs(np.linalg.det(self.m) - 1.0) > 1e-9:
            raise InvariantViolation("det != 1")
        if self.form.pair(self.m @ self.form.basepoint, self.form.basepoint) <= 0:
            raise InvariantViolation("not in the identity component")

    @property
    def is_exact(self) -> bool:
        return self.exact_m is not None

    def __matmul__(self, other):
        if isinstance(other, GroupElement):
            return GroupElement(self.form, self.m @ other.m)
        if isinstance(other, HPoint):
            return HPoint(self.form, self.m @ other.x)
        raise TypeError(f"cannot act on {type(other)}")

    def inv(self) -> "GroupElement":
        # g^-1 = gram^-1 g^T gram, cheaper and stabler than a solve
        return GroupElement(self.form, self.form._gram_inv @ self.m.T @ self.form.gram)

    def apply(self, p: HPoint) -> HPoint:
        return HPoint(self.form, self.m @ p.x)


# ---------------------------------------------------------------------------
# vectorized cores (raw arrays, shared by the Monte Carlo modules)


def _polar_batch(form, r, phi):
    """Points at hyperbolic distance r, direction phi, from the origin."""
    t = form.to_standard
    y = np.stack(
        [np.cosh(r), np.sinh(r) * np.cos(phi), np.sinh(r) * np.sin(phi)], axis=-1
    ) * np.sqrt(form.q0)
    return np.einsum("ij,...j->...i", np.linalg.inv(t), y)


def dist_batch(form, x, y, clamp=True):
    c = form.pair(x, y) / form.q0
    if clamp:
        c = np.maximum(c, 1.0)
    return np.arccosh(c)


def exp_batch(form, x, v):
    """Riemannian exponential; x, v are (...,3) with B(x,v)=0.

    With n the metric norm of v, the geodesic is cosh(n) x + sinh(n) v/n;
    sinh(n)/n is continued through n = 0 by its series.
    """
    q0 = form.q0
    n2 = np.maximum(-form.quad(v) / q0, 0.0)
    n = np.sqrt(n2)
    nsafe = np.where(n > 1e-8, n, 1.0)
    sinhc = np.where(n > 1e-8, np.sinh(nsafe) / nsafe, 1.0 + n2 / 6.0)
    y = np.cosh(n)[..., None] * x + sinhc[..., None] * v
    # renormalize against drift
    q = form.quad(y)
    return y * np.sqrt(q0 / q)[..., None]


def log_batch(form, x, y):
    """Riemannian logarithm log_x(y); returns (...,3) tangent vectors."""
    q0 = form.q0
    c = np.maximum(form.pair(x, y) / q0, 1.0)
    d = np.arccosh(c)
    w = y - c[..., None] * x
    wn2 = np.maximum(-form.quad(w) / q0, 0.0)
    wn = np.sqrt(wn2)
    scale = np.where(wn > 1e-16, d / np.where(wn > 1e-16, wn, 1.0), 0.0)
    return scale[..., None] * w


def _tangent_frame(form, q):
    """Orthonormal tangent basis (e1, e2) at each q, metric -B/q0."""
    q0 = form.q0
    tinv = np.linalg.inv(form.to_standard)
    v1 = np.broadcast_to(tinv[:, 1], q.shape)
    v2 = np.broadcast_to(tinv[:, 2], q.shape)

    def project(w):
        return w - (form.pair(w, q) / q0)[..., None] * q

    def gmet(a, b):
        return -form.pair(a, b) / q0

    e1 = project(v1)
    e1 = e1 / np.sqrt(gmet(e1, e1))[..., None]
    e2 = project(v2)
    e2 = e2 - gmet(e2, e1)[..., None] * e1
    e2 = e2 / np.sqrt(gmet(e2, e2))[..., None]
    return e1, e2


def frechet_mean_batch(form, pts, weights=None, tol=1e-12, max_iter=200):
    """Karcher means of point families, vectorized over the leading axis.

    Parameters
    ----------
    pts : (N, k, 3) array
        N families of k points each, rows on the upper sheet.
    weights : (k,) array, optional

    Returns
    -------
    mean : (N, 3), value : (N,), grad_norm : (N,), converged : (N,) bool

    Damped Newton iteration on the 2-dimensional tangent space; the
    objective is strictly convex (nonpositive curvature), so the Hessian
    is positive definite and the step is well defined everywhere.
    Unconverged rows are masked out of later rounds.
    """
    pts = np.asarray(pts, dtype=float)
    n, k, _ = pts.shape
    q0 = form.q0
    if weights is None:
        w = np.full(k, 1.0)
    else:
        w = np.asarray(weights, dtype=float) * k / np.sum(weights)

    q = pts.sum(axis=1)
    q = q * np.sqrt(q0 / form.quad(q))[..., None]

    def objective(qc, p):
        d = dist_batch(form, qc[:, None, :], p)
        return (w * d**2).sum(axis=1)

    val = objective(q, pts)
    grad = np.full(n, np.inf)
    active = np.ones(n, dtype=bool)
    stall = np.zeros(n, dtype=np.int8)
    best_grad = np.full(n, np.inf)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        qa, pa = q[idx], pts[idx]
        logs = log_batch(form, qa[:, None, :], pa)  # (m, k, 3)
        gvec = 2.0 * (w[None, :, None] * logs).sum(axis=1)
        gn = np.sqrt(np.maximum(-form.quad(gvec) / q0, 0.0))
        grad[idx] = gn
        # rounding floor: the gradient of nearly coincident configurations
        # cannot be resolved below ~sqrt(eps); stop once it stops improving
        improved = gn < 0.9 * best_grad[idx]
        stall[idx] = np.where(improved, 0, stall[idx] + 1)
        best_grad[idx] = np.minimum(best_grad[idx], gn)
        done = (gn <= tol) | (stall[idx] >= 8)
        active[idx[done]] = False
        keep = ~done
        idx = idx[keep]
        if idx.size == 0:
            continue
        qa, pa, logs, gvec = qa[keep], pa[keep], logs[keep], gvec[keep]

        # Hessian of sum w_i d(p_i, .)^2 in an orthonormal tangent frame:
        # radial eigenvalue 2, tangential 2 d coth d per point.
        e1, e2 = _tangent_frame(form, qa)
        d = np.sqrt(np.maximum(-form.quad(logs) / q0, 0.0))  # (m, k)
        dcoth = np.where(d > 1e-12, d / np.tanh(np.where(d > 1e-12, d, 1.0)), 1.0)
        c_tan = 2.0 * dcoth
        dsafe = np.where(d > 1e-12, d, 1.0)
        a = -form.pair(logs, e1[:, None, :]) / q0 / dsafe
        b = -form.pair(logs, e2[:, None, :]) / q0 / dsafe
        a = np.where(d > 1e-12, a, 0.0)
        b = np.where(d > 1e-12, b, 0.0)
        coef = w[None, :] * (2.0 - c_tan)
        h11 = (w[None, :] * c_tan + coef * a * a).sum(axis=1)
        h22 = (w[None, :] * c_tan + coef * b * b).sum(axis=1)
        h12 = (coef * a * b).sum(axis=1)
        g1 = -form.pair(gvec, e1) / q0
        g2 = -form.pair(gvec, e2) / q0
        det = h11 * h22 - h12 * h12
        s1 = (h22 * g1 - h12 * g2) / det
        s2 = (h11 * g2 - h12 * g1) / det
        step_vec = s1[:, None] * e1 + s2[:, None] * e2

        # backtracking on the (rare) rows where Newton overshoots; accept
        # non-ascent within rounding (the step still contracts the gradient)
        scale = np.ones(len(idx))
        remaining = np.arange(len(idx))
        for _bt in range(25):
            q_try = exp_batch(form, qa[remaining], scale[remaining, None] * step_vec[remaining])
            v_try = objective(q_try, pa[remaining])
            vcur = val[idx[remaining]]
            ok = v_try <= vcur + 1e-14 * (1.0 + np.abs(vcur))
            good = remaining[ok]
            q[idx[good]] = q_try[ok]
            val[idx[good]] = v_try[ok]
            remaining = remaining[~ok]
            if remaining.size == 0:
                break
            scale[remaining] *= 0.5
        else:
            # no acceptable step at tiny scale: at the optimum to rounding
            active[idx[remaining]] = False
    return q, val, grad, ~active


def frechet_lower_upper(form, pts, weights=None):
    """Cheap certified bounds on the Karcher value of each point family.

    lower: max(sum of squared pairwise distances / 4, max pair d^2/2)
    upper: best objective value among the input points themselves.
    Both follow from the triangle inequality and convexity; used to decide
    ball membership without running the solver.
    """
    pts = np.asarray(pts, dtype=float)
    n, k, _ = pts.shape
    if weights is not None:
        raise NotImplementedError("bounds are implemented for equal weights")
    dsq = np.zeros(n)
    low_pair = np.zeros(n)
    for i in range(k):
        for j in range(i + 1, k):
            dij2 = dist_batch(form, pts[:, i, :], pts[:, j, :]) ** 2
            dsq += dij2
            low_pair = np.maximum(low_pair, dij2 / 2.0)
    lower = np.maximum(dsq / 4.0, low_pair)
    upper = np.full(n, np.inf)
    for c in range(k):
        obj = (dist_batch(form, pts[:, c, :][:, None, :], pts) ** 2).sum(axis=1)
        upper = np.minimum(upper, obj)
    return lower, upper


# ---------------------------------------------------------------------------
# scalar operations


def distance(x: HPoint, y: HPoint) -> float:
    """Hyperbolic distance arccosh(B(x,y)/q0), curvature -1 units."""
    if x.form is not y.form:
        raise GeometryError("points belong to different forms")
    c = x.form.pair(x.x, y.x) / x.form.q0
    if c < 1.0 - 1e-9:
        raise GeometryError(f"degenerate pairing {c}: points off the sheet")
    return float(np.arccosh(max(c, 1.0)))


def group_norm(g: GroupElement) -> float:
    """|X| in the Cartan decomposition g = k exp(X); equals d(o, g o)."""
    o = g.form.basepoint
    c = g.form.pair(g.m @ o, o) / g.form.q0
    if c < 1.0 - 1e-9:
        raise InvariantViolation(f"invalid group element, pairing {c}")
    return float(np.arccosh(max(c, 1.0)))


def iwasawa_a(g: GroupElement) -> float:
    """Middle-projection parameter t with g = n a_t k."""
    form = g.form
    xi = form.null_vector
    o = form.basepoint
    num = form.pair(g.m @ o, xi)
    den = form.pair(o, xi)
    if num <= 0:
        raise InvariantViolation("nonpositive horospherical pairing")
    return float(np.log(num / den))


def iwasawa_nak(g: GroupElement):
    """Full decomposition g = n a_t k; returns (n, a, k, t)."""
    form = g.form
    t = iwasawa_a(g)
    # solve the horocyclic coordinate from the standard-form expression
    ts = form.to_standard
    y = ts @ (g.m @ form.basepoint) / np.sqrt(form.q0)
    u = y[2] * np.exp(-t)
    n = form.unipotent(u)
    a = form.boost(t)
    k = GroupElement(form, a.inv().m @ n.inv().m @ g.m)
    return n, a, k, t


def exp_map(base: HPoint, v: TangentVector) -> HPoint:
    if v.basept is not base and not np.array_equal(v.basept.x, base.x):
        raise GeometryError("tangent vector not based at the given point")
    y = exp_batch(base.form, base.x[None, :], v.v[None, :])[0]
    return HPoint(base.form, y)


def log_map(base: HPoint, target: HPoint) -> TangentVector:
    w = log_batch(base.form, base.x[None, :], target.x[None, :])[0]
    return TangentVector(base, w)


def midpoint(x: HPoint, y: HPoint) -> HPoint:
    w = log_batch(x.form, x.x[None, :], y.x[None, :])[0]
    return HPoint(x.form, exp_batch(x.form, x.x[None, :], 0.5 * w[None, :])[0])


def frechet_mean(points, tol=1e-12, max_iter=200):
    """Minimizer of F(q) = sum_i d(p_i, q)^2 over the hyperbolic plane.

    Returns ``(mean, value)``; unique by strict convexity in nonpositive
    curvature.  Raises :class:`ConvergenceError` (carrying the best iterate)
    if the gradient norm has not reached ``tol`` after ``max_iter`` rounds.
    """
    if not 1 <= len(points) <= 16:
        raise ValueError("frechet_mean expects between 1 and 16 points")
    if tol <= 0:
        raise ValueError("tol must be positive")
    form = points[0].form
    pts = np.stack([p.x for p in points])[None, :, :]
    q, val, grad, ok = frechet_mean_batch(form, pts, tol=tol, max_iter=max_iter)
    mean = HPoint(form, q[0])
    if not ok[0]:
        raise ConvergenceError(
            f"Karcher iteration did not reach tol={tol} (grad={grad[0]:.3e})",
            best=(mean, float(val[0])),
        )
    return mean, float(val[0])


def transvection_to_origin(x: HPoint) -> GroupElement:
    """The hyperbolic translation along the geodesic [x, o] taking x to o."""
    form = x.form
    o = form.basepoint
    d = distance(form.origin, x)
    if d < 1e-15:
        return GroupElement(form, np.eye(3))
    w = log_batch(form, o[None, :], x.x[None, :])[0]
    u = w / np.sqrt(max(-form.quad(w) / form.q0, 1e-300))
    # generator M with M o = u, M u = o, M^3 = M
    go = form.gram @ o
    gu = form.gram @ u
    m_gen = (np.outer(u, go) - np.outer(o, gu)) / form.q0
    m = np.eye(3) + np.sinh(-d) * m_gen + (np.cosh(d) - 1.0) * (m_gen @ m_gen)
    return GroupElement(form, m)
