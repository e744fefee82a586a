"""Pointwise verdicts for an ordered eigenvalue: regular, critical, borderline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .polyalg import Field, IntPoly, nonsmooth_contribution, s_codim, sym_dim, z2_contribution
from .spectral import (
    DEFAULT_CLUSTER_TOL,
    RANK_TOL,
    HOperator,
    cluster_at,
    complement_basis,
    eig_sorted,
    h_operator,
    h_rank,
    from_sym_coords,
    sym_coords,
)
from .stratum import (
    Extremum,
    StratumError,
    StratumPoint,
    extremum_classify,
    project_to_stratum,
    residual_tolerance,
    restricted_hessian,
    stratum_residual,
    tangent_basis,
)

TAU_DEF = 1e-7
TAU_HESS_REL = 1e-6


# -- definiteness in a span ------------------------------------------------------


@dataclass(frozen=True)
class DefiniteSearch:
    found: bool
    coeffs: np.ndarray
    margin: float


def _lambda_min_batch(B, C):
    M = np.einsum("sj,jab->sab", C, B)
    w, V = np.linalg.eigh(M)
    return w[:, 0], V[:, :, 0]


def definite_in_span(basis, seed: int = 0, tau: float = TAU_DEF, n_iter: int = 500,
                     n_starts: int | None = None) -> DefiniteSearch:
    """Maximize lambda_min(sum_j c_j B_j) over unit vectors c.

    Multi-start projected subgradient ascent on the sphere, batched over the
    starts, with geometrically shrinking normalized steps; the subgradient of
    lambda_min is ``Re u* B_j u`` for a bottom eigenvector u.  The best start
    is then polished by Nelder-Mead.  ``found`` iff the best margin exceeds
    ``tau``.
    """
    B = np.asarray(basis)
    m = B.shape[0]
    if m == 0:
        return DefiniteSearch(False, np.zeros(0), -np.inf)
    rng = np.random.default_rng(seed)
    S = n_starts if n_starts is not None else 8 * m
    C = rng.standard_normal((S, m))
    C = np.concatenate([C, np.eye(m), -np.eye(m)])
    C /= np.linalg.norm(C, axis=1, keepdims=True)
    best_val, u = _lambda_min_batch(B, C)
    best_c = C.copy()
    eta = 0.5
    for _ in range(n_iter):
        val, u = _lambda_min_batch(B, C)
        better = val > best_val
        best_val = np.where(better, val, best_val)
        best_c[better] = C[better]
        g = np.real(np.einsum("sa,jab,sb->sj", np.conj(u), B, u))
        g -= np.sum(g * C, axis=1, keepdims=True) * C
        gn = np.linalg.norm(g, axis=1, keepdims=True)
        g = np.divide(g, gn, out=np.zeros_like(g), where=gn > 0)
        C = C + eta * g
        C /= np.linalg.norm(C, axis=1, keepdims=True)
        eta *= 0.985
    val, _ = _lambda_min_batch(B, C)
    better = val > best_val
    best_val = np.where(better, val, best_val)
    best_c[better] = C[better]
    i = int(np.argmax(best_val))
    c, margin = best_c[i], float(best_val[i])
    if m > 1:
        c, margin = _polish(B, c, margin)
    return DefiniteSearch(margin > tau, c, margin)


def _polish(B, c0, v0):
    def neg(c):
        n = np.linalg.norm(c)
        if n == 0:
            return np.inf
        return -np.linalg.eigvalsh(np.einsum("j,jab->ab", c / n, B))[0]

    res = minimize(neg, c0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400 * len(c0)})
    if -res.fun > v0:
        c = res.x / np.linalg.norm(res.x)
        return c, float(-neg(c))
    return c0, v0


# -- conditions at a point ---------------------------------------------------------


@dataclass(frozen=True)
class RegularCheck:
    certified: bool
    witness: Optional[np.ndarray]
    margin: float


def range_frame(h: HOperator, rank_tol: float = RANK_TOL):
    """Frobenius-orthonormal basis of Ran H plus the map back to directions.

    Returns ``(basis, pinv)`` with ``H(pinv @ c) = sum_a c_a basis[a]``.
    """
    A = h.matrix()
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    basis = from_sym_coords(U[:, :r].T, h.nu, h.field)
    pinv = Vt[:r].T / s[:r]
    return basis, pinv


def check_regular(h: HOperator, seed: int = 0, tau: float = TAU_DEF) -> RegularCheck:
    """Certify that Ran H contains a definite matrix; the witness v has H(v) > 0.

    The search runs over unit-Frobenius matrices of Ran H, so kernel
    directions of H cannot pin the margin at zero.
    """
    if h.nu == 1:
        g = h.images[:, 0, 0].real
        gn = float(np.linalg.norm(g))
        v = g / gn if gn > 0 else np.zeros_like(g)
        return RegularCheck(gn > tau, v if gn > tau else None, gn)
    basis, pinv = range_frame(h)
    if len(basis) == 0:
        return RegularCheck(False, None, 0.0)
    res = definite_in_span(basis, seed=seed, tau=tau)
    if not res.found:
        return RegularCheck(False, None, res.margin)
    v = pinv @ res.coeffs
    return RegularCheck(True, v / np.linalg.norm(v), res.margin)


@dataclass(frozen=True)
class ConditionN:
    holds: bool
    B: Optional[np.ndarray]
    reason: str = ""
    margin: float = float("nan")


def check_condition_N(h: HOperator, tau: float = TAU_DEF) -> ConditionN:
    """(Ran H)^perp is one-dimensional and spanned by a positive definite matrix."""
    comp = complement_basis(h)
    if len(comp) != 1:
        return ConditionN(False, None, "ComplementDimNot1")
    B = comp[0]
    if np.real(np.trace(B)) < 0:
        B = -B
    w = np.linalg.eigvalsh(B)
    margin = float(w[0] / np.linalg.norm(B))
    if margin > tau:
        return ConditionN(True, B, "", margin)
    return ConditionN(False, B, "ComplementNotDefinite", margin)


def check_transversality(h: HOperator, field: Field | str | None = None, rank_tol: float = RANK_TOL) -> bool:
    fld = h.field if field is None else Field.parse(field)
    nu = h.nu
    A = np.concatenate([sym_coords(np.eye(nu), fld)[None, :], sym_coords(h.images, fld)], axis=0)
    s = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(s > rank_tol * s[0]))
    return rank == sym_dim(nu, fld)


def clarke_bound(h: HOperator, v) -> float:
    """Upper bound lambda_max(H v) for the Clarke directional derivative."""
    v = np.asarray(v, dtype=float)
    if not np.linalg.norm(v) > 0:
        raise ValueError("direction must be nonzero")
    return float(np.linalg.eigvalsh(h.apply(v))[-1])


# -- verdicts ---------------------------------------------------------------------


@dataclass
class Classification:
    verdict: str  # Regular | SmoothCritical | NonDegenerateCritical | Borderline | NotCovered
    x: np.ndarray
    k: int
    value: float
    nu: int
    rel_index: int
    mu: Optional[int] = None
    nondegenerate: Optional[bool] = None
    contribution: Optional[IntPoly] = None
    z2_poly: Optional[IntPoly] = None
    extremum: Optional[str] = None
    witness: Optional[np.ndarray] = None
    complement_matrix: Optional[np.ndarray] = None
    reason: str = ""
    tangent_dim: Optional[int] = None
    lo: int = 0
    hi: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_critical(self) -> bool:
        return self.verdict in ("SmoothCritical", "NonDegenerateCritical")

    @property
    def morse_term(self) -> IntPoly:
        """Contribution of this point to the Morse polynomial (zero for non-critical verdicts)."""
        if self.verdict == "NonDegenerateCritical":
            return self.contribution
        if self.verdict == "SmoothCritical" and self.nondegenerate:
            return IntPoly.monomial(self.mu)
        return IntPoly()

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "x": [float(v) for v in self.x],
            "k": self.k,
            "value": float(self.value),
            "nu": self.nu,
            "i": self.rel_index,
            "mu": self.mu,
            "contribution": None if self.contribution is None else self.contribution.to_list(),
            "z2": None if self.z2_poly is None else self.z2_poly.to_list(),
            "margins": {key: float(v) for key, v in self.diagnostics.items()
                        if "margin" in key or "eig" in key},
            "rank": self.diagnostics.get("rank"),
            "complement_dim": self.diagnostics.get("complement_dim"),
        }
        if self.nondegenerate is not None:
            out["nondegenerate"] = self.nondegenerate
        if self.extremum is not None:
            out["extremum"] = self.extremum
        if self.witness is not None:
            out["witness"] = [float(v) for v in self.witness]
        if self.complement_matrix is not None:
            B = np.asarray(self.complement_matrix)
            out["complement_matrix"] = {"re": B.real.tolist(), "im": np.imag(B).tolist()}
        if self.reason:
            out["reason"] = self.reason
        if self.tangent_dim is not None:
            out["tangent_dim"] = self.tangent_dim
        return out


@dataclass
class ClassifyOptions:
    cluster_tol: float = DEFAULT_CLUSTER_TOL
    tau_def: float = TAU_DEF
    tau_hess_rel: float = TAU_HESS_REL
    seed: int = 0


def classify_point(fam, x, k: int, opts: ClassifyOptions | None = None) -> Classification:
    """Decide what kind of point x is for the ordered eigenvalue lambda_k."""
    opts = opts or ClassifyOptions()
    x = np.asarray(x, dtype=float)
    d = len(x)
    F = fam.evaluate(x)
    s = eig_sorted(F)
    c = cluster_at(s, k, opts.cluster_tol)
    nu, i = c.nu, c.rel_index
    point = StratumPoint(x, c.lo, c.hi, c.isometry, 0.0)
    if nu > 1:
        U_ref = c.isometry
        r = np.linalg.norm(stratum_residual(fam, x, k, U_ref, lo=c.lo))
        if r > residual_tolerance(F):
            try:
                point = project_to_stratum(fam, x, k, nu, lo=c.lo, U_ref=U_ref)
            except StratumError as exc:
                return Classification("NotCovered", x, k, c.value, nu, i, reason=f"stratum projection failed: {exc}",
                                      lo=c.lo, hi=c.hi)
            x = point.x
            s = eig_sorted(fam.evaluate(x))
            c = cluster_at(s, k, opts.cluster_tol)
            if c.nu != nu:
                return Classification("NotCovered", x, k, c.value, nu, i, lo=c.lo, hi=c.hi,
                                      reason="multiplicity changed during stratum projection")
            point = StratumPoint(x, c.lo, c.hi, c.isometry, float(r))
    value = float(s.eigenvalues[k - 1])
    h = h_operator(fam, x, c)
    rank = h_rank(h)
    base = dict(x=x, k=k, value=value, nu=nu, rel_index=i, lo=c.lo, hi=c.hi)
    diag: dict = {"rank": rank, "complement_dim": sym_dim(nu, fam.field) - rank}

    reg = check_regular(h, seed=opts.seed, tau=opts.tau_def)
    diag["definite_margin"] = reg.margin
    if reg.certified:
        return Classification("Regular", witness=reg.witness, diagnostics=diag, **base)

    if nu == 1:
        try:
            chart = restricted_hessian(fam, point, k, opts.tau_hess_rel, T=np.eye(d))
        except StratumError as exc:
            return Classification("NotCovered", reason=str(exc), diagnostics=diag, **base)
        diag["hessian_min_abs_eig"] = float(np.min(np.abs(chart.hessian_eigs)))
        return Classification("SmoothCritical", mu=chart.mu, nondegenerate=chart.nondegenerate,
                              tangent_dim=d, diagnostics=diag, **base)

    cond = check_condition_N(h, tau=opts.tau_def)
    if np.isfinite(cond.margin):
        diag["condition_N_margin"] = cond.margin
    if abs(reg.margin) <= opts.tau_def:
        return Classification("Borderline", complement_matrix=_complement_matrix(h, cond),
                              reason="inconclusive definiteness margin", diagnostics=diag, **base)

    if cond.holds and check_transversality(h):
        try:
            chart = restricted_hessian(fam, point, k, opts.tau_hess_rel)
        except StratumError as exc:
            return Classification("NotCovered", reason=f"stratum chart failed: {exc}", diagnostics=diag, **base)
        if not chart.nondegenerate:
            return Classification("NotCovered", mu=chart.mu, nondegenerate=False, tangent_dim=chart.tangent_dim,
                                  reason="degenerate critical point of the restriction to the stratum",
                                  diagnostics=diag, **base)
        mu = chart.mu
        contrib = nonsmooth_contribution(nu, i, fam.field).shift(mu)
        if fam.field is Field.REAL:
            z2 = z2_contribution(nu, i, mu)
        else:
            z2 = contrib  # complex Grassmannians have torsion-free homology
        ext = extremum_classify(nu, i, mu, chart.tangent_dim)
        return Classification("NonDegenerateCritical", mu=mu, nondegenerate=True, contribution=contrib, z2_poly=z2,
                              extremum=ext.value, tangent_dim=chart.tangent_dim, complement_matrix=cond.B,
                              diagnostics=diag, **base)

    if d < s_codim(nu, fam.field):
        return Classification("NotCovered", reason=f"excessive multiplicity: d={d} < s(nu)={s_codim(nu, fam.field)}",
                              diagnostics=diag, **base)
    return Classification("Borderline", complement_matrix=_complement_matrix(h, cond),
                          reason=cond.reason or "non-transverse", diagnostics=diag, **base)


def _complement_matrix(h: HOperator, cond: ConditionN):
    if cond.B is not None:
        return cond.B
    comp = complement_basis(h)
    if not len(comp):
        return None
    B = comp[0]
    return -B if np.real(np.trace(B)) < 0 else B


def classify_many(fam, X, k: int, opts: ClassifyOptions | None = None) -> list[Classification]:
    return [classify_point(fam, x, k, opts) for x in np.atleast_2d(X)]
