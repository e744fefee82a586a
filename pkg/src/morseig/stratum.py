"""Numerics on the constant multiplicity stratum S of an eigenvalue cluster.

S is located as the zero set of the traceless part of the family compressed
to the total eigenprojector of a fixed window of branches ``lo..hi``.  The
compression basis is continued from a reference isometry by polar
decomposition, which fixes the U(nu) gauge between nearby points.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles

from .polyalg import s_codim
from .spectral import (
    DEFAULT_CLUSTER_TOL,
    RANK_TOL,
    cluster_window,
    compress,
    differential,
    eig_sorted,
    traceless_coords,
)

TWO_PI = 2.0 * np.pi
MAX_GN_ITER = 50


class StratumError(RuntimeError):
    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass
class StratumPoint:
    x: np.ndarray
    lo: int
    hi: int
    isometry: np.ndarray
    residual_norm: float
    iterations: int = 0

    @property
    def nu(self) -> int:
        return self.hi - self.lo + 1


@dataclass
class StratumChart:
    base_point: np.ndarray
    tangent_basis: np.ndarray  # (d, m), orthonormal columns
    residual_norm: float
    hessian: np.ndarray
    hessian_eigs: np.ndarray
    mu: int
    nondegenerate: bool

    @property
    def tangent_dim(self) -> int:
        return self.tangent_basis.shape[1]


def residual_tolerance(F) -> float:
    return 1e-10 * (1.0 + np.linalg.norm(F))


def best_window(eigenvalues, k: int, nu: int) -> int:
    """Start index (1-based) of the length-``nu`` window containing k with the smallest spread."""
    w = np.asarray(eigenvalues)
    n = len(w)
    if not 1 <= nu <= n:
        raise ValueError(f"multiplicity {nu} impossible for n={n}")
    best, best_lo = np.inf, None
    for lo in range(max(1, k - nu + 1), min(k, n - nu + 1) + 1):
        spread = w[lo + nu - 2] - w[lo - 1]
        if spread < best:
            best, best_lo = spread, lo
    return best_lo


def continued_isometry(fam, x, lo: int, hi: int, U_ref):
    """Basis of the total eigenprojector of branches lo..hi closest to ``U_ref``.

    Returns ``(U, F, eigenvalues)``.
    """
    F = fam.evaluate(x)
    s = eig_sorted(F)
    w = s.eigenvalues
    spread = w[hi - 1] - w[lo - 1]
    outside = []
    if lo > 1:
        outside.append(w[lo - 1] - w[lo - 2])
    if hi < len(w):
        outside.append(w[hi] - w[hi - 1])
    if outside and min(outside) <= spread:
        raise StratumError("an outside eigenvalue entered the isolation annulus of the cluster")
    V = s.eigenvectors[:, lo - 1:hi]
    M = np.conj(V.T) @ U_ref
    A, sv, BH = np.linalg.svd(M)
    if sv[-1] < 1e-6:
        raise StratumError("reference isometry is nearly orthogonal to the cluster eigenspace")
    U = V @ (A @ BH)
    return U, F, w


def stratum_residual(fam, x, k: int, U_ref, lo: int | None = None) -> np.ndarray:
    """Traceless part of the compressed family, s(nu) real components.

    Vanishes exactly where branches lo..hi coincide.
    """
    x = np.asarray(x, dtype=float)
    nu = U_ref.shape[1]
    if lo is None:
        lo = best_window(eig_sorted(fam.evaluate(x)).eigenvalues, k, nu)
    U, F, _ = continued_isometry(fam, x, lo, lo + nu - 1, U_ref)
    return traceless_coords(compress(F, U), fam.field)


def _residual_jacobian(fam, x, lo, hi, U_ref):
    U, F, w = continued_isometry(fam, x, lo, hi, U_ref)
    r = traceless_coords(compress(F, U), fam.field)
    if hi == lo:
        return r, np.zeros((0, len(x))), U, F
    # exact on S; on nearby points it differs by a commutator with the residual
    J = traceless_coords(compress(differential(fam, x), U), fam.field).T
    return r, J, U, F


def _initial_frame(fam, x0, k, nu, lo, U_ref):
    s = eig_sorted(fam.evaluate(x0))
    if lo is None:
        lo = best_window(s.eigenvalues, k, nu)
    if U_ref is None:
        U_ref = s.eigenvectors[:, lo - 1:lo + nu - 1]
    return lo, U_ref


def project_to_stratum(fam, x0, k: int, nu: int | None = None, *, lo: int | None = None, U_ref=None,
                       tol: float | None = None, max_iter: int = MAX_GN_ITER, max_step: float = 0.5,
                       cluster_tol: float = DEFAULT_CLUSTER_TOL) -> StratumPoint:
    """Gauss-Newton projection onto the stratum where branches lo..lo+nu-1 coincide."""
    x = np.array(x0, dtype=float)
    if nu is None:
        clo, chi = cluster_window(eig_sorted(fam.evaluate(x)).eigenvalues, k, cluster_tol)
        nu = chi - clo + 1
        lo = clo if lo is None else lo
    lo, U = _initial_frame(fam, x, k, nu, lo, U_ref)
    hi = lo + nu - 1
    if not lo <= k <= hi:
        raise ValueError("window must contain k")
    if nu == 1:
        U, F, _ = continued_isometry(fam, x, lo, hi, U)
        return StratumPoint(x, lo, hi, U, 0.0, 0)
    rnorm = np.inf
    for it in range(max_iter + 1):
        r, J, U, F = _residual_jacobian(fam, x, lo, hi, U)
        rnorm = float(np.linalg.norm(r))
        thr = residual_tolerance(F) if tol is None else tol
        if rnorm <= thr:
            return StratumPoint(x, lo, hi, U, rnorm, it)
        if it == max_iter:
            break
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        sn = np.linalg.norm(step)
        if not np.isfinite(sn):
            break
        if sn > max_step:
            step *= max_step / sn
        x = x + step
    raise StratumError(f"projection did not converge (residual {rnorm:.3e})", max_iter, rnorm)


def stratum_jacobian(fam, p: StratumPoint) -> np.ndarray:
    _, J, _, _ = _residual_jacobian(fam, p.x, p.lo, p.hi, p.isometry)
    return J


def tangent_basis(fam, p: StratumPoint, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of T_x S; raises at non-transverse points."""
    d = len(p.x)
    s = s_codim(p.nu, fam.field)
    if p.nu == 1:
        return np.eye(d)
    if s > d:
        raise StratumError(f"stratum codimension s={s} exceeds parameter dimension d={d}")
    J = stratum_jacobian(fam, p)
    _, sv, Vh = np.linalg.svd(J, full_matrices=True)
    if sv.size < s or sv[0] == 0 or sv[s - 1] <= rank_tol * sv[0]:
        raise StratumError("stratum Jacobian is rank deficient (non-transverse point)")
    return Vh[s:].T.copy()


def kernel_basis(h, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of Ker H."""
    A = h.matrix()
    _, sv, Vh = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(sv > rank_tol * sv[0])) if sv.size and sv[0] > 0 else 0
    return Vh[rank:].T.copy()


def kernel_tangent_angle(fam, p: StratumPoint, h) -> float:
    """Largest principal angle between Ker H and T_x S (pi/2 if dimensions differ)."""
    T = tangent_basis(fam, p)
    K = kernel_basis(h)
    if T.shape[1] != K.shape[1]:
        return float(np.pi / 2)
    if T.shape[1] == 0:
        return 0.0
    return float(np.max(subspace_angles(T, K)))


def cluster_mean(fam, x, lo, hi) -> float:
    w = np.linalg.eigvalsh(fam.evaluate(x))
    return float(np.mean(w[lo - 1:hi]))


def _retracted_value(fam, p: StratumPoint, T, y, k):
    if p.nu == 1:
        return cluster_mean(fam, p.x + T @ y, p.lo, p.hi)
    q = project_to_stratum(fam, p.x + T @ y, k, p.nu, lo=p.lo, U_ref=p.isometry,
                           tol=1e-13 * (1 + np.linalg.norm(fam.evaluate(p.x))))
    return cluster_mean(fam, q.x, p.lo, p.hi)


def _second_differences(f, m, h):
    f0 = f(np.zeros(m))
    H = np.zeros((m, m))
    E = np.eye(m) * h
    for a in range(m):
        H[a, a] = (f(E[a]) - 2 * f0 + f(-E[a])) / h ** 2
        for b in range(a + 1, m):
            H[a, b] = H[b, a] = (f(E[a] + E[b]) - f(E[a] - E[b]) - f(-E[a] + E[b]) + f(-E[a] - E[b])) / (4 * h ** 2)
    return H


def restricted_hessian(fam, p: StratumPoint, k: int, tau_hess_rel: float = 1e-6,
                       T=None) -> StratumChart:
    """Hessian of lambda_k restricted to S, in tangent coordinates.

    Second differences along projected tangent steps, h = 1e-3 (1 + |x|),
    with one Richardson halving.
    """
    if T is None:
        T = tangent_basis(fam, p)
    m = T.shape[1]
    if m == 0:
        return StratumChart(p.x, T, p.residual_norm, np.zeros((0, 0)), np.zeros(0), 0, True)
    h = 1e-3 * (1.0 + np.linalg.norm(p.x))

    def f(y):
        return _retracted_value(fam, p, T, y, k)

    H1 = _second_differences(f, m, h)
    H2 = _second_differences(f, m, h / 2)
    H = (4 * H2 - H1) / 3
    H = 0.5 * (H + H.T)
    eigs = np.linalg.eigvalsh(H)
    tau = tau_hess_rel * (1.0 + np.linalg.norm(H, 2))
    mu = int(np.sum(eigs < -tau))
    nondeg = bool(np.all(np.abs(eigs) > tau))
    return StratumChart(p.x, T, p.residual_norm, H, eigs, mu, nondeg)


# -- critical points of lambda_k on S ---------------------------------------------


def stratum_gradient(fam, p: StratumPoint, T=None) -> np.ndarray:
    """Gradient of lambda_k|S in the coordinates of the tangent basis T."""
    if T is None:
        T = tangent_basis(fam, p)
    dF = differential(fam, p.x)
    C = compress(dF, p.isometry)
    grad = np.real(np.trace(C, axis1=-2, axis2=-1)) / p.nu
    return T.T @ grad


def polish_on_stratum(fam, p: StratumPoint, k: int, grad_tol: float = 1e-10, max_iter: int = 30,
                      max_step: float = 0.25) -> tuple[StratumPoint, float]:
    """Newton iteration for a critical point of lambda_k|S starting at p.

    Returns the final point and its tangential gradient norm.
    """
    h = 1e-5
    for _ in range(max_iter):
        T = tangent_basis(fam, p)
        m = T.shape[1]
        if m == 0:
            return p, 0.0
        g = stratum_gradient(fam, p, T)
        gnorm = float(np.linalg.norm(g))
        scale = 1.0 + np.linalg.norm(fam.evaluate(p.x))
        if gnorm <= grad_tol * scale:
            return p, gnorm
        H = np.zeros((m, m))
        for a in range(m):
            cols = []
            for sgn in (1, -1):
                q = _move(fam, p, T[:, a] * sgn * h, k)
                Tq = tangent_basis(fam, q)
                gq = Tq @ stratum_gradient(fam, q, Tq)
                cols.append(T.T @ gq)
            H[:, a] = (cols[0] - cols[1]) / (2 * h)
        H = 0.5 * (H + H.T)
        y = np.linalg.lstsq(H, -g, rcond=None)[0]
        yn = np.linalg.norm(y)
        if yn > max_step:
            y *= max_step / yn
        p = _move(fam, p, T @ y, k)
    T = tangent_basis(fam, p)
    return p, float(np.linalg.norm(stratum_gradient(fam, p, T)))


def _move(fam, p: StratumPoint, dx, k) -> StratumPoint:
    if p.nu == 1:
        x = p.x + dx
        w = eig_sorted(fam.evaluate(x))
        return StratumPoint(x, p.lo, p.hi, w.eigenvectors[:, p.lo - 1:p.hi], 0.0)
    return project_to_stratum(fam, p.x + dx, k, p.nu, lo=p.lo, U_ref=p.isometry)


# -- curve tracing ---------------------------------------------------------------


def torus_delta(a, b) -> np.ndarray:
    """Shortest displacement from b to a on the 2 pi periodic torus."""
    return (np.asarray(a) - np.asarray(b) + np.pi) % TWO_PI - np.pi


@dataclass
class Trace:
    points: np.ndarray  # (m, d), unwrapped coordinates
    closed: bool
    flagged: list[int] = field(default_factory=list)
    message: str = ""

    @property
    def length(self) -> float:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum()
        if self.closed and len(self.points) > 1:
            seg += np.linalg.norm(self.closing_segment())
        return float(seg)

    def closing_segment(self) -> np.ndarray:
        return torus_delta(self.points[0], self.points[-1])

    def to_csv(self) -> str:
        d = self.points.shape[1]
        lines = [",".join(f"x{j + 1}" for j in range(d))]
        lines += [",".join(f"{v:.12g}" for v in row) for row in self.points]
        return "\n".join(lines) + "\n"


def trace_stratum(fam, p: StratumPoint, k: int, step: float, max_steps: int = 10000,
                  direction=None, rank_tol: float = RANK_TOL) -> Trace:
    """Predictor-corrector continuation of a one-dimensional stratum."""
    d = len(p.x)
    if d - s_codim(p.nu, fam.field) != 1:
        raise ValueError("tracing requires a one-dimensional stratum (d - s(nu) = 1)")
    T = tangent_basis(fam, p)[:, 0]
    if direction is not None:
        if np.dot(T, direction) < 0:
            T = -T
    elif T[np.argmax(np.abs(T))] < 0:
        T = -T
    start = p.x.copy()
    pts = [start]
    cur = p
    flagged: list[int] = []
    for it in range(max_steps):
        try:
            nxt = project_to_stratum(fam, cur.x + step * T, k, cur.nu, lo=cur.lo, U_ref=cur.isometry)
            Tn = tangent_basis(fam, nxt, rank_tol)[:, 0]
        except StratumError as exc:
            return Trace(np.array(pts), False, flagged, f"stopped: {exc}")
        if np.dot(Tn, T) < 0:
            Tn = -Tn
        J = stratum_jacobian(fam, nxt)
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] <= 1e3 * rank_tol * sv[0]:
            flagged.append(len(pts))
        dist = np.linalg.norm(torus_delta(nxt.x, start)) if fam.is_torus else np.linalg.norm(nxt.x - start)
        if len(pts) >= 3 and dist < step / 2:
            return Trace(np.array(pts), True, flagged, "closed")
        pts.append(nxt.x.copy())
        cur, T = nxt, Tn
    return Trace(np.array(pts), False, flagged, "max_steps reached")


# -- extremum criterion --------------------------------------------------------------


class Extremum(enum.Enum):
    MAX = "Max"
    MIN = "Min"
    NEITHER = "Neither"


def extremum_classify(nu: int, rel_index: int, mu: int, tangent_dim: int) -> Extremum:
    if rel_index == nu and mu == tangent_dim:
        return Extremum.MAX
    if rel_index == 1 and mu == 0:
        return Extremum.MIN
    return Extremum.NEITHER
