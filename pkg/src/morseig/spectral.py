"""Dense self-adjoint eigensolves, eigenvalue clusters and first-order perturbation data."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .polyalg import Field

SYM_TOL = 1e-12
ISOMETRY_TOL = 1e-8
RANK_TOL = 1e-8
DEFAULT_CLUSTER_TOL = 1e-6


def self_adjoint(A, tol: float = SYM_TOL) -> np.ndarray:
    """Validate and symmetrize a (stack of) self-adjoint matrices."""
    A = np.asarray(A)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    AH = np.conj(np.swapaxes(A, -1, -2))
    scale = 1.0 + np.linalg.norm(A, axis=(-2, -1))
    err = np.linalg.norm(A - AH, axis=(-2, -1))
    if np.any(err > tol * scale):
        raise ValueError(f"matrix is not self-adjoint (deviation {np.max(err):.3e})")
    out = 0.5 * (A + AH)
    if np.iscomplexobj(out) and not np.any(out.imag):
        out = out.real
    return out


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns


def eig_sorted(A) -> SpectralData:
    """Ascending eigenvalues with orthonormal eigenvectors.

    Backed by LAPACK's ``heevd``/``syevd``; a failure to converge surfaces as
    ``numpy.linalg.LinAlgError``.
    """
    A = self_adjoint(A)
    w, V = np.linalg.eigh(A)
    return SpectralData(w, V)


@dataclass(frozen=True)
class EigenCluster:
    """Group of (numerically) equal eigenvalues containing branch ``k``.

    Indices ``k``, ``lo``, ``hi`` are 1-based, as in the ordering
    lambda_1 <= ... <= lambda_n.
    """

    k: int
    lo: int
    hi: int
    value: float
    isometry: np.ndarray

    @property
    def nu(self) -> int:
        return self.hi - self.lo + 1

    @property
    def rel_index(self) -> int:
        return self.hi - self.k + 1


def orthonormalize(U: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(U)
    # fix signs so that the result is deterministic and close to U
    d = np.diag(R)
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1), 1)
    return Q * phase[np.newaxis, :]


def cluster_window(eigenvalues: np.ndarray, k: int, tol: float = DEFAULT_CLUSTER_TOL) -> tuple[int, int]:
    w = np.asarray(eigenvalues)
    n = len(w)
    if not 1 <= k <= n:
        raise ValueError(f"branch index k={k} outside 1..{n}")
    if tol <= 0:
        raise ValueError("cluster tolerance must be positive")
    gap = tol * (1.0 + np.max(np.abs(w)))
    lo = hi = k - 1
    while lo > 0 and w[lo] - w[lo - 1] <= gap:
        lo -= 1
    while hi < n - 1 and w[hi + 1] - w[hi] <= gap:
        hi += 1
    return lo + 1, hi + 1


def cluster_at(s: SpectralData, k: int, tol: float = DEFAULT_CLUSTER_TOL) -> EigenCluster:
    lo, hi = cluster_window(s.eigenvalues, k, tol)
    U = orthonormalize(s.eigenvectors[:, lo - 1:hi])
    value = float(np.mean(s.eigenvalues[lo - 1:hi]))
    return EigenCluster(k=k, lo=lo, hi=hi, value=value, isometry=U)


def compress(X, U) -> np.ndarray:
    """Compression ``U* X U`` of ``X`` (or a stack of matrices) to Ran U."""
    U = np.asarray(U)
    nu = U.shape[1]
    gram = np.conj(U.T) @ U
    if np.linalg.norm(gram - np.eye(nu)) > ISOMETRY_TOL:
        raise ValueError("U is not an isometry")
    X = np.asarray(X)
    C = np.conj(U.T) @ X @ U
    return 0.5 * (C + np.conj(np.swapaxes(C, -1, -2)))


# -- Sym_nu as a real inner-product space ------------------------------------


@lru_cache(maxsize=None)
def _sym_basis(nu: int, field: Field) -> np.ndarray:
    dtype = complex if field is Field.COMPLEX else float
    basis = []
    for i in range(nu):
        E = np.zeros((nu, nu), dtype=dtype)
        E[i, i] = 1.0
        basis.append(E)
    r2 = 1.0 / np.sqrt(2.0)
    for i in range(nu):
        for j in range(i + 1, nu):
            E = np.zeros((nu, nu), dtype=dtype)
            E[i, j] = E[j, i] = r2
            basis.append(E)
            if field is Field.COMPLEX:
                F = np.zeros((nu, nu), dtype=dtype)
                F[i, j] = -1j * r2
                F[j, i] = 1j * r2
                basis.append(F)
    out = np.array(basis)
    out.setflags(write=False)
    return out


def sym_basis(nu: int, field: Field | str) -> np.ndarray:
    """Frobenius-orthonormal basis of Sym_nu(F) viewed as a real vector space."""
    return _sym_basis(nu, Field.parse(field))


def sym_coords(X, field: Field | str) -> np.ndarray:
    """Real coordinates ``Re Tr(B_a X)`` of (a stack of) self-adjoint matrices."""
    B = sym_basis(np.shape(X)[-1], field)
    return np.real(np.einsum("aij,...ji->...a", B, X))


def from_sym_coords(c, nu: int, field: Field | str) -> np.ndarray:
    B = sym_basis(nu, field)
    return np.einsum("...a,aij->...ij", np.asarray(c, dtype=float), B)


@lru_cache(maxsize=None)
def _traceless_frame(nu: int, field: Field) -> np.ndarray:
    # rows: orthonormal basis (in sym coords) of the complement of the identity
    D = len(_sym_basis(nu, field))
    ident = sym_coords(np.eye(nu), field)
    ident = ident / np.linalg.norm(ident)
    P = np.eye(D) - np.outer(ident, ident)
    U, s, _ = np.linalg.svd(P)
    frame = U[:, : D - 1].T
    frame.setflags(write=False)
    return frame


def traceless_coords(X, field: Field | str) -> np.ndarray:
    """Coordinates of the traceless part of X in an orthonormal frame (s(nu) reals)."""
    field = Field.parse(field)
    nu = np.shape(X)[-1]
    return sym_coords(X, field) @ _traceless_frame(nu, field).T


# -- families: differentials and the compressed operator ------------------------


def differential(fam, x) -> np.ndarray:
    """Matrices dF(x) e_j for the coordinate directions, shape (d, n, n).

    Uses the family's analytic differential when it has one; otherwise a
    fourth-order central difference with step ``max(1e-5, 1e-4 * (1 + |x|))``.
    """
    x = np.asarray(x, dtype=float)
    if fam.jacobian is not None:
        return self_adjoint(fam.jacobian(x), tol=1e-10)
    return fd_differential(fam, x)


def fd_differential(fam, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    h = max(1e-5, 1e-4 * (1.0 + np.linalg.norm(x)))
    E = np.eye(d) * h
    pts = np.concatenate([x + 2 * E, x + E, x - E, x - 2 * E])
    F = fam.evaluate(pts)
    F2, F1, Fm1, Fm2 = F[:d], F[d:2 * d], F[2 * d:3 * d], F[3 * d:]
    D = (-F2 + 8 * F1 - 8 * Fm1 + Fm2) / (12 * h)
    return 0.5 * (D + np.conj(np.swapaxes(D, -1, -2)))


@dataclass(frozen=True)
class HOperator:
    """Images of the coordinate directions under v -> U*(dF(x) v)U.

    Only quantities invariant under U -> U W (W unitary) are meaningful.
    """

    images: np.ndarray  # (d, nu, nu)
    field: Field

    @property
    def d(self) -> int:
        return self.images.shape[0]

    @property
    def nu(self) -> int:
        return self.images.shape[1]

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.einsum("j,jab->ab", v, self.images)

    def matrix(self) -> np.ndarray:
        """Real matrix of the linear map R^d -> Sym_nu in orthonormal coordinates."""
        return sym_coords(self.images, self.field).T


def h_operator(fam, x, c: EigenCluster) -> HOperator:
    dF = differential(fam, x)
    return HOperator(compress(dF, c.isometry), fam.field)


def complement_basis(h: HOperator, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of (Ran H)^perp in Sym_nu, shape (m, nu, nu)."""
    A = h.matrix()
    D = A.shape[0]
    if A.size == 0:
        U = np.eye(D)
        return from_sym_coords(U.T, h.nu, h.field)
    U, s, _ = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    perp = U[:, rank:].T
    return from_sym_coords(perp, h.nu, h.field)


def h_rank(h: HOperator, rank_tol: float = RANK_TOL) -> int:
    s = np.linalg.svd(h.matrix(), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def hf_slopes(fam, x, v, c: EigenCluster) -> np.ndarray:
    """First-order slopes of the nu branches splitting from lambda_k along v."""
    v = np.asarray(v, dtype=float)
    if not np.linalg.norm(v) > 0:
        raise ValueError("direction must be nonzero")
    h = h_operator(fam, x, c)
    return np.linalg.eigvalsh(h.apply(v))


def _richardson(D, h: float, powers, levels: int = 3) -> float | np.ndarray:
    """Extrapolate D(h) -> D(0) assuming an error expansion in the given powers of h."""
    table = [D(h / 2 ** j) for j in range(levels)]
    for p in powers[: levels - 1]:
        f = 2.0 ** p
        table = [(f * table[j + 1] - table[j]) / (f - 1) for j in range(len(table) - 1)]
    return table[0]


def secant_slopes(fam, x, v, c: EigenCluster, h: float | None = None) -> np.ndarray:
    """Richardson-extrapolated finite-difference slopes of branches lo..hi along v.

    Central differences for a simple eigenvalue, one-sided ones for a
    cluster (whose branches are only one-sided differentiable).  The base
    step shrinks with the gap to the rest of the spectrum.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    w = eig_sorted(fam.evaluate(x)).eigenvalues
    lo, hi = c.lo - 1, c.hi
    gaps = [w[lo] - w[lo - 1]] if lo > 0 else []
    gaps += [w[hi] - w[hi - 1]] if hi < len(w) else []
    rate = np.linalg.norm(np.einsum("j,jab->ab", v, differential(fam, x)), 2) + 1e-300
    if h is None:
        h = 1e-2 if not gaps else min(1e-2, 0.1 * min(gaps) / rate)

    def lam(t):
        return np.linalg.eigvalsh(fam.evaluate(x + t * v))[lo:hi]

    base = w[lo:hi]
    if c.nu == 1:
        return _richardson(lambda t: (lam(t) - lam(-t)) / (2 * t), h, (2, 4, 6))
    return _richardson(lambda t: (lam(t) - base) / t, h, (1, 2, 3), levels=4)
