"""Geometry under an SPD-matrix metric.

Inner products and norms of the form <u, v> = u' S^{-1} v for an SPD
covariance S, projections onto linear subspaces and polyhedral cones,
Moreau decompositions, polar-cone membership, and the open-ball
acceptance regions built from those projections.

All types are immutable after construction and every operation is a pure
function of its inputs, so everything here is safe to share across threads.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, null_space

from .errors import (
    CapabilityError,
    ContractViolationError,
    NotPositiveDefiniteError,
    NumericError,
    SingularMatrixError,
)

#: Scale for "this coordinate/constraint is active" decisions. A value x is
#: treated as zero when |x| <= ZERO_TOL * (1 + norm(point)).
ZERO_TOL = 1e-10

_SYMMETRY_RTOL = 1e-10
_RANK_RTOL = 1e-10
_DYKSTRA_MAX_SWEEPS = 10_000
_DYKSTRA_TOL = 1e-10
_EXACT_MAX_ROWS = 16


def _as_vector(x, dim=None, name="x"):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ContractViolationError(f"{name} must be a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ContractViolationError(f"{name} has length {v.shape[0]}, expected {dim}")
    return v


def _activity_tol(x):
    return ZERO_TOL * (1.0 + float(np.linalg.norm(x)))


@dataclass(frozen=True)
class Metric:
    """An SPD matrix with a cached Cholesky factorization.

    Defines the inner product <u, v> = u' sigma^{-1} v and the associated
    norm. The factorization is computed once at construction; a matrix that
    is not symmetric positive definite is rejected outright rather than
    repaired, because silent regularization would corrupt every p-value
    computed downstream.
    """

    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ContractViolationError(f"sigma must be square, got shape {sigma.shape}")
        scale = np.linalg.norm(sigma)
        if scale == 0 or np.linalg.norm(sigma - sigma.T) > _SYMMETRY_RTOL * scale:
            raise ContractViolationError("sigma is not symmetric within tolerance 1e-10")
        sigma = 0.5 * (sigma + sigma.T)
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        try:
            factor = cho_factor(sigma, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(f"sigma is not positive definite: {exc}") from exc
        object.__setattr__(self, "_factor", factor)
        object.__setattr__(self, "_chol_lower", np.tril(factor[0]))

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    @property
    def chol_lower(self) -> np.ndarray:
        """Lower-triangular L with sigma = L L'."""
        return self._chol_lower

    def solve(self, v):
        """Return sigma^{-1} v through the cached factorization."""
        return cho_solve(self._factor, np.asarray(v, dtype=float))

    def inverse(self) -> np.ndarray:
        """Dense sigma^{-1}, obtained by solving against the identity."""
        return self.solve(np.eye(self.dim))

    def inner(self, u, v) -> float:
        u = _as_vector(u, self.dim, "u")
        v = _as_vector(v, self.dim, "v")
        return float(u @ self.solve(v))

    def norm_sq(self, u) -> float:
        u = _as_vector(u, self.dim, "u")
        return float(u @ self.solve(u))

    def norm(self, u) -> float:
        return float(np.sqrt(max(self.norm_sq(u), 0.0)))


def inner(u, v, metric: Metric) -> float:
    """Metric inner product u' sigma^{-1} v."""
    return metric.inner(u, v)


@dataclass(frozen=True)
class ConeSpec:
    """A closed convex cone: polyhedral {theta : R theta >= 0} or a named order.

    Named orders (simple, tree, umbrella) compile to an equivalent
    restriction matrix so a single projection code path serves all
    variants.
    """

    kind: str
    restriction: np.ndarray | None = None
    dim: int | None = None
    peak: int | None = None

    _KINDS = ("polyhedral", "orthant", "simple", "tree", "umbrella")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ContractViolationError(f"unknown cone kind {self.kind!r}")
        if self.kind == "polyhedral":
            r = np.asarray(self.restriction, dtype=float)
            if r.ndim != 2:
                raise ContractViolationError("restriction must be a p x m matrix")
            p, m = r.shape
            if p > m:
                raise ContractViolationError(f"restriction has {p} rows > {m} columns")
            sv = np.linalg.svd(r, compute_uv=False)
            if sv[-1] <= _RANK_RTOL * sv[0]:
                raise ContractViolationError("restriction matrix is not of full row rank")
            r = r.copy()
            r.setflags(write=False)
            object.__setattr__(self, "restriction", r)
        else:
            if self.dim is None or int(self.dim) < 1:
                raise ContractViolationError("named cones need a positive dimension")
            object.__setattr__(self, "dim", int(self.dim))
            if self.kind == "umbrella":
                if self.peak is None or not 0 <= int(self.peak) < self.dim:
                    raise ContractViolationError(
                        f"umbrella peak {self.peak} outside 0..{self.dim - 1}"
                    )
                object.__setattr__(self, "peak", int(self.peak))
            if self.kind in ("simple", "tree", "umbrella") and self.dim < 2:
                raise ContractViolationError(f"{self.kind} order needs dimension >= 2")

    @classmethod
    def polyhedral(cls, restriction) -> "ConeSpec":
        return cls(kind="polyhedral", restriction=restriction)

    @classmethod
    def orthant(cls, dim: int) -> "ConeSpec":
        return cls(kind="orthant", dim=dim)

    @classmethod
    def simple_order(cls, dim: int) -> "ConeSpec":
        """Nondecreasing means: theta_1 <= ... <= theta_K."""
        return cls(kind="simple", dim=dim)

    @classmethod
    def tree_order(cls, dim: int) -> "ConeSpec":
        """Control smallest: theta_1 <= theta_i for i >= 2."""
        return cls(kind="tree", dim=dim)

    @classmethod
    def umbrella_order(cls, dim: int, peak: int) -> "ConeSpec":
        """Up to the 0-based peak index, then down."""
        return cls(kind="umbrella", dim=dim, peak=peak)

    @property
    def ambient_dim(self) -> int:
        if self.kind == "polyhedral":
            return self.restriction.shape[1]
        return self.dim

    @property
    def n_restrictions(self) -> int:
        return self.as_polyhedral().shape[0]

    def as_polyhedral(self) -> np.ndarray:
        """The p x m matrix R with cone = {theta : R theta >= 0}."""
        if self.kind == "polyhedral":
            return self.restriction
        k = self.dim
        if self.kind == "orthant":
            return np.eye(k)
        rows = []
        if self.kind == "simple":
            for i in range(k - 1):
                rows.append(_diff_row(k, i + 1, i))
        elif self.kind == "tree":
            for i in range(1, k):
                rows.append(_diff_row(k, i, 0))
        else:  # umbrella
            for i in range(self.peak):
                rows.append(_diff_row(k, i + 1, i))
            for i in range(self.peak, k - 1):
                rows.append(_diff_row(k, i, i + 1))
        return np.array(rows)


def _diff_row(k, plus, minus):
    row = np.zeros(k)
    row[plus] = 1.0
    row[minus] = -1.0
    return row


@dataclass(frozen=True)
class LinearSubspace:
    """A linear subspace, stored as a constraint matrix and a spanning basis.

    Exactly one representation is supplied; the other is derived through an
    SVD null-space computation, so A b = 0 holds for every basis column and
    dim(L) + rank(A) equals the ambient dimension by construction.
    """

    constraint: np.ndarray
    basis: np.ndarray

    @classmethod
    def from_constraint(cls, a) -> "LinearSubspace":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2:
            raise ContractViolationError("constraint must be a q x m matrix")
        b = null_space(a)
        return cls._build(a, b)

    @classmethod
    def from_basis(cls, b) -> "LinearSubspace":
        b = np.asarray(b, dtype=float)
        if b.ndim != 2:
            raise ContractViolationError("basis must be an m x d matrix of columns")
        if b.shape[1] == 0:
            return cls.zero(b.shape[0])
        a = null_space(b.T).T
        if a.shape[0] == 0:
            a = np.zeros((0, b.shape[0]))
        return cls._build(a, b)

    @classmethod
    def zero(cls, m: int) -> "LinearSubspace":
        """The trivial subspace {0} of dimension m."""
        return cls._build(np.eye(m), np.zeros((m, 0)))

    @classmethod
    def span_of_ones(cls, m: int) -> "LinearSubspace":
        """The diagonal span{(1, ..., 1)}, the equal-means null space."""
        return cls.from_basis(np.ones((m, 1)))

    @classmethod
    def _build(cls, a, b) -> "LinearSubspace":
        a = np.asarray(a, dtype=float).copy()
        b = np.asarray(b, dtype=float).copy()
        if a.shape[1] != b.shape[0]:
            raise ContractViolationError("constraint and basis dimensions disagree")
        if b.size and np.max(np.abs(a @ b)) > 1e-10 * (1.0 + np.abs(a).max()):
            raise ContractViolationError("constraint does not annihilate basis")
        a.setflags(write=False)
        b.setflags(write=False)
        return cls(constraint=a, basis=b)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def contains(self, x, tol=1e-8) -> bool:
        x = _as_vector(x, self.ambient_dim)
        if self.constraint.shape[0] == 0:
            return True
        return bool(np.max(np.abs(self.constraint @ x)) <= tol * (1.0 + np.linalg.norm(x)))


def project_subspace(x, sub: LinearSubspace, metric: Metric) -> np.ndarray:
    """Metric projection of x onto the subspace.

    The residual x - proj is metric-orthogonal to every basis vector.
    """
    x = _as_vector(x, metric.dim)
    if sub.ambient_dim != metric.dim:
        raise ContractViolationError("subspace and metric dimensions disagree")
    b = sub.basis
    if b.shape[1] == 0:
        return np.zeros_like(x)
    minv_b = metric.solve(b)
    gram = b.T @ minv_b
    coef = np.linalg.solve(gram, minv_b.T @ x)
    return b @ coef


def project_cone(x, cone: ConeSpec, metric: Metric, method: str = "exact") -> np.ndarray:
    """Metric projection of x onto the polyhedral cone {theta : R theta >= 0}.

    The default path enumerates all active-set candidates, solving each
    equality-constrained problem exactly and returning the feasible
    candidate of least distance, which is the unique KKT point. That path
    supports at most 16 restriction rows; pass method="dykstra" (or "auto")
    to fall back to cyclic Dykstra projections for larger systems.

    Parameters
    ----------
    x : array_like
        Point to project.
    cone : ConeSpec
        Target cone; named orders are compiled to restriction matrices.
    metric : Metric
        SPD matrix defining the geometry.
    method : {"exact", "dykstra", "auto"}
    """
    x = _as_vector(x, metric.dim)
    r = cone.as_polyhedral()
    if r.shape[1] != metric.dim:
        raise ContractViolationError(
            f"cone lives in dimension {r.shape[1]}, metric in {metric.dim}"
        )
    if method not in ("exact", "dykstra", "auto"):
        raise ContractViolationError(f"unknown method {method!r}")
    p = r.shape[0]
    if method == "dykstra" or (method == "auto" and p > _EXACT_MAX_ROWS):
        return _dykstra_cone(x, r, metric)
    if p > _EXACT_MAX_ROWS:
        raise CapabilityError(
            f"exact enumeration supports at most {_EXACT_MAX_ROWS} restriction rows "
            f"(got {p}); use method='dykstra'"
        )
    return _enumerate_cone(x, r, metric)


def _enumerate_cone(x, r, metric):
    p = r.shape[0]
    tol = _activity_tol(x)
    if np.all(r @ x >= -tol):
        return x.copy()
    sigma_rt = metric.sigma @ r.T  # columns sigma r_i
    best = None
    best_obj = np.inf
    for size in range(1, p + 1):
        for active in itertools.combinations(range(p), size):
            idx = list(active)
            gram = r[idx] @ sigma_rt[:, idx]
            rhs = r[idx] @ x
            try:
                z = np.linalg.solve(gram, rhs)
            except np.linalg.LinAlgError:
                warnings.warn(
                    "rank-deficient active set encountered; using pseudo-solve",
                    RuntimeWarning,
                    stacklevel=3,
                )
                z = np.linalg.lstsq(gram, rhs, rcond=None)[0]
            cand = x - sigma_rt[:, idx] @ z
            if np.all(r @ cand >= -tol):
                obj = metric.norm_sq(x - cand)
                if obj < best_obj:
                    best_obj, best = obj, cand
    if best is None:
        raise NumericError("no feasible active-set candidate found")
    return best


def _dykstra_cone(x, r, metric):
    p = r.shape[0]
    sigma_rt = metric.sigma @ r.T
    denom = np.einsum("ij,ji->i", r, sigma_rt)  # r_i' sigma r_i
    if np.any(denom <= 0):
        raise NumericError("degenerate restriction row in Dykstra sweep")
    cur = x.copy()
    corrections = np.zeros((p, x.shape[0]))
    tol = _DYKSTRA_TOL * (1.0 + np.linalg.norm(x))
    for _ in range(_DYKSTRA_MAX_SWEEPS):
        prev = cur.copy()
        for i in range(p):
            y = cur + corrections[i]
            viol = r[i] @ y
            if viol < 0:
                proj = y - sigma_rt[:, i] * (viol / denom[i])
            else:
                proj = y
            corrections[i] = y - proj
            cur = proj
        if metric.norm(cur - prev) < tol:
            return cur
    raise NumericError(
        f"Dykstra projections did not converge within {_DYKSTRA_MAX_SWEEPS} sweeps"
    )


def polar_complement(x, cone: ConeSpec, metric: Metric, method: str = "exact") -> np.ndarray:
    """Residual x - proj(x | cone), i.e. the projection onto the polar cone."""
    return _as_vector(x, metric.dim) - project_cone(x, cone, metric, method=method)


def in_polar_orthant(theta, restriction, metric: Metric) -> bool:
    """Membership of theta in the polar of {R theta >= 0}.

    Checks that every component of theta' R' (R sigma R')^{-1} is
    nonpositive (tolerance 1e-10), which characterizes the region where the
    order-restricted distance test has no asymptotic power.
    """
    theta = _as_vector(theta, metric.dim)
    r = np.asarray(restriction, dtype=float)
    if r.ndim != 2 or r.shape[1] != metric.dim:
        raise ContractViolationError("restriction must be p x m with m = metric.dim")
    gram = r @ metric.sigma @ r.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularMatrixError(
            f"R sigma R' is singular or near-singular (condition number {cond:.3e})"
        )
    v = np.linalg.solve(gram, r @ theta)
    return bool(np.all(v <= ZERO_TOL))


def acceptance_member_type_a(s, sub: LinearSubspace, cone: ConeSpec, c, n, metric: Metric) -> bool:
    """Membership of s in the type A acceptance region at critical value c.

    The region is the polar of (cone intersect L-perp) fattened by an open
    metric ball of squared radius c/n; membership is evaluated through
    projections as dist^2(s, L) - dist^2(s, cone) < c/n, never by forming
    the fattened set itself. The ball is open, so boundary points are out.
    """
    if c < 0:
        raise ContractViolationError("critical value must be nonnegative")
    s = _as_vector(s, metric.dim)
    d_sub = metric.norm_sq(s - project_subspace(s, sub, metric))
    d_cone = metric.norm_sq(s - project_cone(s, cone, metric))
    val = max(d_sub - d_cone, 0.0)
    return bool(val < c / n)


def acceptance_member_type_b(s, cone: ConeSpec, c, n, metric: Metric) -> bool:
    """Membership of s in the type B acceptance region: dist^2(s, cone) < c/n."""
    if c < 0:
        raise ContractViolationError("critical value must be nonnegative")
    s = _as_vector(s, metric.dim)
    val = metric.norm_sq(s - project_cone(s, cone, metric))
    return bool(val < c / n)


def face_dimension(x, metric: Metric | None = None) -> int:
    """Dimension of the orthant face containing a projection result.

    Counts coordinates strictly above the activity tolerance
    1e-10 * (1 + ||x||). The metric argument is accepted for interface
    symmetry with the projection routines; the count is metric-free.
    """
    x = np.asarray(x, dtype=float)
    return int(np.sum(x > _activity_tol(x)))


def project_orthant_batch(points, metric: Metric) -> np.ndarray:
    """Metric projection of each row of points onto the nonnegative orthant.

    Vectorized active-set enumeration over all coordinate supports; for each
    row the feasible candidate of least metric distance is selected. Used by
    the Monte Carlo weight estimator and the power harness, where millions
    of low-dimensional projections are needed.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ContractViolationError("points must be an (n, p) array")
    n, p = pts.shape
    if p != metric.dim:
        raise ContractViolationError("points and metric dimensions disagree")
    if p > _EXACT_MAX_ROWS:
        raise CapabilityError(f"batch projection supports p <= {_EXACT_MAX_ROWS}")
    minv = metric.inverse()
    tol = ZERO_TOL * (1.0 + np.linalg.norm(pts, axis=1))
    best_obj = np.full(n, np.inf)
    best = np.zeros_like(pts)
    for size in range(p + 1):
        for support in itertools.combinations(range(p), size):
            sup = list(support)
            comp = [i for i in range(p) if i not in support]
            theta = np.zeros_like(pts)
            if sup and comp:
                gain = np.linalg.solve(minv[np.ix_(sup, sup)], minv[np.ix_(sup, comp)])
                theta[:, sup] = pts[:, sup] + pts[:, comp] @ gain.T
            elif sup:
                theta[:, sup] = pts[:, sup]
            feasible = np.all(theta >= -tol[:, None], axis=1)
            if not feasible.any():
                continue
            diff = pts - theta
            obj = np.einsum("ni,ij,nj->n", diff, minv, diff)
            take = feasible & (obj < best_obj)
            best_obj[take] = obj[take]
            best[take] = theta[take]
    if not np.all(np.isfinite(best_obj)):
        raise NumericError("batch projection found rows with no feasible candidate")
    return best


def face_dimension_batch(points) -> np.ndarray:
    """Vectorized face_dimension over rows."""
    pts = np.asarray(points, dtype=float)
    tol = ZERO_TOL * (1.0 + np.linalg.norm(pts, axis=1))
    return (pts > tol[:, None]).sum(axis=1)
