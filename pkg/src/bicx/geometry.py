"""Gram matrices of explored directions and the linear algebra around them."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import PreconditionError

UNIT_TOL = 1e-9
SYM_TOL = 1e-9
ELL_TOL = 1e-12
SPAN_TOL = 1e-6


def as_unit(a, tol: float = UNIT_TOL) -> np.ndarray:
    """Return ``a`` as a float vector after checking it has unit norm."""
    a = np.asarray(a, dtype=float).ravel()
    nrm = np.linalg.norm(a)
    if abs(nrm - 1.0) > tol:
        raise PreconditionError(f"expected a unit vector, got norm {nrm:.3g}")
    return a


def normalize(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    nrm = np.linalg.norm(a)
    if nrm == 0.0:
        raise PreconditionError("cannot normalize the zero vector")
    return a / nrm


@dataclass(frozen=True)
class GramState:
    """Sum of outer products of explored directions plus a cached eigenbasis.

    ``eigvals`` are sorted in decreasing order and ``eigvecs[:, i]`` pairs
    with ``eigvals[i]``. ``dirty`` is set whenever ``m`` changed after the
    cached decomposition was computed.
    """

    m: np.ndarray
    eigvals: np.ndarray | None = None
    eigvecs: np.ndarray | None = None
    dirty: bool = True

    @classmethod
    def zeros(cls, d: int) -> "GramState":
        return cls(m=np.zeros((d, d)))

    @classmethod
    def from_vectors(cls, vs) -> "GramState":
        vs = np.atleast_2d(np.asarray(vs, dtype=float))
        return cls(m=vs.T @ vs)

    @property
    def d(self) -> int:
        return self.m.shape[0]


def gram_update(g: GramState, a, weight: float = 1.0) -> GramState:
    """Return ``g`` with ``weight * a a^T`` added; ``a`` must be a unit vector."""
    a = as_unit(a)
    if a.shape[0] != g.d:
        raise PreconditionError(f"dimension mismatch: {a.shape[0]} vs {g.d}")
    return GramState(m=g.m + weight * np.outer(a, a))


def _canonical_signs(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for i in range(vecs.shape[1]):
        col = vecs[:, i]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            vecs[:, i] = -col
    return vecs


def eigendecompose(g: GramState) -> GramState:
    """Eigen-decomposition with values descending and deterministic signs.

    Each eigenvector is flipped so its first coordinate with magnitude above
    1e-12 is positive.
    """
    if not g.dirty and g.eigvals is not None:
        return g
    m = g.m
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.T).max(initial=0.0) > SYM_TOL * scale:
        raise PreconditionError("Gram matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    order = np.argsort(vals)[::-1]
    return replace(g, eigvals=vals[order], eigvecs=_canonical_signs(vecs[:, order]), dirty=False)


def ell_index(eigvals, lam: float, tol: float = ELL_TOL) -> int:
    """Number of eigenvalues (descending) at least ``lam - tol``."""
    return int(np.count_nonzero(np.asarray(eigvals) >= lam - tol))


def min_eig(m) -> float:
    return float(np.linalg.eigvalsh(np.asarray(m, dtype=float))[0])


def project_complement(u, basis) -> np.ndarray:
    """Project ``u`` onto the orthogonal complement of the columns of ``basis``.

    ``basis`` is d x k with orthonormal columns (k may be 0).
    """
    u = np.asarray(u, dtype=float)
    basis = np.asarray(basis, dtype=float).reshape(u.shape[0], -1)
    if basis.shape[1] == 0:
        return u.copy()
    return u - basis @ (basis.T @ u)


def combo_coefficients(u, v, g: GramState, ell: int, eps: float) -> np.ndarray:
    """Coefficients expressing ``u`` as a combination of the rows of ``v``.

    ``u`` must lie in the span of the top ``ell`` eigenvectors of the Gram
    matrix of ``v`` and ``lambda_ell >= eps``. Returns ``c`` with
    ``c_i = sum_{k<ell} <u, w_k><v_i, w_k> / lambda_k``, so
    ``sum_i c_i v_i = u`` and ``sum c_i^2 <= |u|^2 / eps``.
    """
    u = np.asarray(u, dtype=float)
    v = np.atleast_2d(np.asarray(v, dtype=float))
    g = eigendecompose(g)
    if ell < 0 or ell > g.d:
        raise PreconditionError(f"ell={ell} out of range")
    if ell == 0:
        if np.linalg.norm(u) > SPAN_TOL:
            raise PreconditionError("u is not in the (empty) span")
        return np.zeros(v.shape[0])
    if g.eigvals[ell - 1] < eps:
        raise PreconditionError(
            f"lambda_ell={g.eigvals[ell - 1]:.3g} is below eps={eps:.3g}"
        )
    w = g.eigvecs[:, :ell]
    if np.linalg.norm(project_complement(u, w)) > SPAN_TOL:
        raise PreconditionError("u is not in the span of the top-ell eigenvectors")
    return v @ (w @ ((w.T @ u) / g.eigvals[:ell]))


@dataclass(frozen=True)
class TailGainReport:
    holds: bool
    lhs: float
    rhs: float
    ell: int
    threshold: float


def rank_one_tail_gain_check(v, u, eps: float, threshold: float | None = None) -> TailGainReport:
    """Check that adding ``u u^T`` raises the eigenvalue tail by ``eps / 2``.

    ``v`` holds the current unit directions (rows). With ``S`` the span of the
    eigenvectors whose eigenvalue is at least ``eps``, the precondition is
    ``|P_{S^perp} u|^2 >= eps`` and ``|u| <= 1``. ``ell`` is the largest index
    with ``lambda_ell >= threshold``, by default ``200 d^3 / eps^2``. The
    check compares ``sum_{i>ell} lambda'_i`` (lhs) with
    ``eps/2 + sum_{i>ell} lambda_i`` (rhs).

    Passing a smaller ``threshold`` gives an exploratory variant that is not
    covered by the guarantee.
    """
    u = np.asarray(u, dtype=float)
    d = u.shape[0]
    v = np.asarray(v, dtype=float).reshape(-1, d)
    if not 0 < eps:
        raise PreconditionError("eps must be positive")
    if np.linalg.norm(u) > 1 + UNIT_TOL:
        raise PreconditionError("u must have norm at most 1")
    g = eigendecompose(GramState(m=v.T @ v))
    s = g.eigvecs[:, : ell_index(g.eigvals, eps)]
    if np.linalg.norm(project_complement(u, s)) ** 2 < eps:
        raise PreconditionError("|P_{S^perp} u|^2 is below eps")
    if threshold is None:
        threshold = 200.0 * d**3 / eps**2
    ell = ell_index(g.eigvals, threshold)
    new_vals = np.sort(np.linalg.eigvalsh(g.m + np.outer(u, u)))[::-1]
    lhs = float(new_vals[ell:].sum())
    rhs = float(eps / 2 + g.eigvals[ell:].sum())
    return TailGainReport(holds=lhs >= rhs - 1e-12 * max(1.0, abs(rhs)), lhs=lhs, rhs=rhs, ell=ell, threshold=threshold)
