"""Global critical-point scans of ordered eigenvalues on tori, Morse bookkeeping and bounds."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .classify import Classification, ClassifyOptions, classify_point
from .polyalg import (
    IntPoly,
    MorseDivision,
    dominates,
    morse_division,
    nonsmooth_contribution,
    sum_polys,
    torus_poincare,
)
from .spectral import DEFAULT_CLUSTER_TOL, cluster_window, differential, eig_sorted
from .stratum import (
    TWO_PI,
    StratumError,
    polish_on_stratum,
    project_to_stratum,
    restricted_hessian,
    tangent_basis,
    torus_delta,
)

SMOOTH_ACCEPT = 1e-7
GAP_ACCEPT = 1e-9


@dataclass
class ScanOptions:
    classify: ClassifyOptions = field(default_factory=ClassifyOptions)
    manifold_poincare: Optional[IntPoly] = None
    newton_iter: int = 40
    stratum_iter: int = 30
    gap_factor: float = 1.5


# -- grid sampling -------------------------------------------------------------------


@dataclass
class GridSample:
    """Sorted eigenvalues of a family on a uniform torus grid; shared across branches."""

    N: int
    d: int
    eigenvalues: np.ndarray  # shape (N,)*d + (n,)

    @property
    def spacing(self) -> float:
        return TWO_PI / self.N

    def points(self, idx) -> np.ndarray:
        return np.asarray(idx, dtype=float) * self.spacing


def sample_grid(fam, N: int) -> GridSample:
    if N < 8:
        raise ValueError("grid_per_dim must be >= 8")
    axes = np.arange(N) * (TWO_PI / N)
    X = np.stack(np.meshgrid(*([axes] * fam.d), indexing="ij"), axis=-1)
    F = fam.evaluate(X.reshape(-1, fam.d))
    w = np.linalg.eigvalsh(F)
    return GridSample(N, fam.d, w.reshape((N,) * fam.d + (fam.n,)))


def _neighbour_offsets(d):
    return [o for o in itertools.product((-1, 0, 1), repeat=d) if any(o)]


def _local_minima(f: np.ndarray) -> np.ndarray:
    """Indices of periodic-grid local minima (non-strict) of f."""
    mask = np.ones(f.shape, dtype=bool)
    for off in _neighbour_offsets(f.ndim):
        mask &= f <= np.roll(f, shift=off, axis=tuple(range(f.ndim)))
    return np.argwhere(mask)


def _grid_gradient(lam: np.ndarray, h: float) -> np.ndarray:
    axes = range(lam.ndim)
    return np.stack([(np.roll(lam, -1, axis=a) - np.roll(lam, 1, axis=a)) / (2 * h) for a in axes], axis=-1)


# -- smooth critical points ----------------------------------------------------------


def smooth_gradient(fam, x, k: int) -> np.ndarray:
    """Gradient of a simple eigenvalue branch via the eigenvector formula."""
    s = eig_sorted(fam.evaluate(x))
    v = s.eigenvectors[:, k - 1]
    dF = differential(fam, x)
    return np.real(np.einsum("a,jab,b->j", np.conj(v), dF, v))


def _is_simple(fam, x, k, tol) -> bool:
    lo, hi = cluster_window(eig_sorted(fam.evaluate(x)).eigenvalues, k, tol)
    return lo == hi


def newton_smooth(fam, x0, k: int, max_iter: int = 40, max_step: float = 0.5,
                  cluster_tol: float = DEFAULT_CLUSTER_TOL) -> tuple[np.ndarray, float]:
    """Newton iteration on the gradient of lambda_k; returns (point, gradient norm)."""
    x = np.array(x0, dtype=float)
    d = len(x)
    h = 1e-6 * (1.0 + np.linalg.norm(x))
    g = smooth_gradient(fam, x, k)
    for _ in range(max_iter):
        if not _is_simple(fam, x, k, cluster_tol):
            return x, np.inf
        gn = float(np.linalg.norm(g))
        if gn <= 1e-12 * (1.0 + np.linalg.norm(fam.evaluate(x))):
            break
        H = np.empty((d, d))
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            H[:, j] = (smooth_gradient(fam, x + e, k) - smooth_gradient(fam, x - e, k)) / (2 * h)
        H = 0.5 * (H + H.T)
        step = np.linalg.lstsq(H, -g, rcond=None)[0]
        sn = np.linalg.norm(step)
        if not np.isfinite(sn):
            return x, np.inf
        if sn > max_step:
            step *= max_step / sn
        x = x + step
        g = smooth_gradient(fam, x, k)
    if not _is_simple(fam, x, k, cluster_tol):
        return x, np.inf
    return x, float(np.linalg.norm(g))


def fd_gradient_norm(fam, x, k: int, h: float = 1e-5) -> float:
    """Central-difference gradient norm of lambda_k at x."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    E = np.eye(d) * h
    lam = np.linalg.eigvalsh(fam.evaluate(np.concatenate([x + E, x - E])))[:, k - 1]
    return float(np.linalg.norm((lam[:d] - lam[d:]) / (2 * h)))


# -- reports ----------------------------------------------------------------------------


@dataclass
class CriticalPointReport:
    location: np.ndarray
    value: float
    classification: Classification
    basin: int
    kind: str  # "smooth" or "stratum" seed
    residual: float

    def to_dict(self) -> dict:
        out = {"location": [float(v) for v in self.location], "value": float(self.value), "basin": self.basin,
               "seed": self.kind, "residual": float(self.residual)}
        out.update({"classification": self.classification.to_dict()})
        return out


@dataclass
class StratumCritical:
    """Critical point of lambda_k restricted to a stratum S(k, J), J = lo..hi."""

    location: np.ndarray
    lo: int
    hi: int
    rel_index: int
    mu: Optional[int]
    nondegenerate: bool
    tangent_dim: int
    topologically_critical: bool


@dataclass
class MorseReport:
    k: int
    n: int
    d: int
    field: str
    reports: list
    p_morse: IntPoly
    p_manifold: IntPoly
    division: MorseDivision
    inconclusive: bool
    notes: list = field(default_factory=list)
    stratum_data: list = field(default_factory=list)
    global_max: float = float("nan")
    global_min: float = float("nan")
    grid: int = 0

    @property
    def c_mu(self) -> dict:
        out: dict = {}
        for r in self.reports:
            c = r.classification
            if c.verdict == "SmoothCritical" and c.nondegenerate:
                out[c.mu] = out.get(c.mu, 0) + 1
        return dict(sorted(out.items()))

    def c(self, mu: int) -> int:
        return self.c_mu.get(mu, 0)

    @property
    def d_mu(self) -> dict:
        out: dict = {}
        for r in self.reports:
            c = r.classification
            if c.verdict == "NonDegenerateCritical":
                out[c.mu] = out.get(c.mu, IntPoly()) + c.contribution
        return dict(sorted(out.items()))

    def counts(self) -> dict:
        out: dict = {}
        for r in self.reports:
            out[r.classification.verdict] = out.get(r.classification.verdict, 0) + 1
        return out

    @property
    def passed(self) -> bool:
        return self.division.satisfied

    @property
    def exit_code(self) -> int:
        if not self.division.satisfied:
            return 2
        return 3 if self.inconclusive else 0

    def to_dict(self) -> dict:
        div = {"satisfied": self.division.satisfied}
        if self.division.satisfied:
            div["remainder"] = self.division.remainder.to_list()
        else:
            div["offending_degree"] = self.division.offending_degree
        return {
            "k": self.k,
            "n": self.n,
            "d": self.d,
            "field": self.field,
            "grid": self.grid,
            "p_morse": self.p_morse.to_list(),
            "p_morse_str": str(self.p_morse),
            "p_manifold": self.p_manifold.to_list(),
            "division": div,
            "inconclusive": self.inconclusive,
            "notes": list(self.notes),
            "c_mu": {str(m): c for m, c in self.c_mu.items()},
            "d_mu": {str(m): p.to_list() for m, p in self.d_mu.items()},
            "global_max": self.global_max,
            "global_min": self.global_min,
            "critical_points": [r.to_dict() for r in self.reports],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


# -- scan --------------------------------------------------------------------------------


@dataclass
class _Candidate:
    x: np.ndarray
    kind: str
    residual: float
    basin: int
    lo: int = 0
    hi: int = 0


def _wrap(x) -> np.ndarray:
    y = np.mod(np.asarray(x, dtype=float), TWO_PI)
    y[np.isclose(y, TWO_PI, rtol=0, atol=1e-12)] = 0.0
    return y


def _dedupe(cands: list, radius: float) -> list:
    cands = sorted(cands, key=lambda c: tuple(np.round(c.x, 9)))
    kept: list = []
    for c in cands:
        for j, o in enumerate(kept):
            if np.linalg.norm(torus_delta(c.x, o.x)) < radius:
                if c.residual < o.residual:
                    kept[j] = c
                break
        else:
            kept.append(c)
    return sorted(kept, key=lambda c: tuple(np.round(c.x, 9)))


def _smooth_candidates(fam, lam, grid: GridSample, k, opts) -> list:
    gradn = np.linalg.norm(_grid_gradient(lam, grid.spacing), axis=-1)
    out = []
    tol = opts.classify.cluster_tol
    for idx in _local_minima(gradn):
        x0 = grid.points(idx)
        x, gn = newton_smooth(fam, x0, k, opts.newton_iter, max_step=grid.spacing, cluster_tol=tol)
        if gn <= SMOOTH_ACCEPT and np.linalg.norm(torus_delta(x, x0)) < 2 * grid.spacing * np.sqrt(grid.d):
            basin = int(np.ravel_multi_index(tuple(idx), lam.shape))
            out.append(_Candidate(_wrap(x), "smooth", gn, basin))
    return out


def _gap_field(w: np.ndarray, k: int):
    n = w.shape[-1]
    lam = w[..., k - 1]
    below = lam - w[..., k - 2] if k > 1 else np.full(lam.shape, np.inf)
    above = w[..., k] - lam if k < n else np.full(lam.shape, np.inf)
    return below, above


def _stratum_candidates(fam, grid: GridSample, k, opts) -> list:
    below, above = _gap_field(grid.eigenvalues, k)
    gap = np.minimum(below, above)
    if not np.any(np.isfinite(gap)):
        return []
    lips = 0.0
    for a in range(grid.d):
        diff = np.abs(np.roll(gap, -1, axis=a) - gap)
        lips = max(lips, float(np.max(diff[np.isfinite(diff)], initial=0.0)) / grid.spacing)
    thr = opts.gap_factor * np.sqrt(grid.d) * grid.spacing * lips
    out = []
    for idx in _local_minima(gap):
        t = tuple(idx)
        if not gap[t] < thr:
            continue
        lo = k - 1 if below[t] <= above[t] else k
        x0 = grid.points(idx)
        try:
            p = project_to_stratum(fam, x0, k, 2, lo=lo)
            p, gn = polish_on_stratum(fam, p, k, max_iter=opts.stratum_iter, max_step=grid.spacing)
        except (StratumError, ValueError, np.linalg.LinAlgError):
            continue
        if gn > SMOOTH_ACCEPT:
            continue
        w = np.linalg.eigvalsh(fam.evaluate(p.x))
        if w[p.hi - 1] - w[p.lo - 1] > GAP_ACCEPT * (1.0 + np.max(np.abs(w))):
            continue
        basin = int(np.ravel_multi_index(t, gap.shape))
        out.append(_Candidate(_wrap(p.x), "stratum", p.residual_norm + gn, basin, p.lo, p.hi))
    return out


def _stratum_record(fam, cand: _Candidate, cls: Classification, k: int, opts) -> StratumCritical:
    topo = cls.verdict == "NonDegenerateCritical"
    if topo:
        return StratumCritical(cand.x, cls.lo, cls.hi, cls.rel_index, cls.mu, True, cls.tangent_dim, True)
    lo, hi = cand.lo, cand.hi
    try:
        p = project_to_stratum(fam, cand.x, k, hi - lo + 1, lo=lo)
        T = tangent_basis(fam, p)
        chart = restricted_hessian(fam, p, k, opts.classify.tau_hess_rel, T=T)
        return StratumCritical(cand.x, lo, hi, hi - k + 1, chart.mu, chart.nondegenerate, T.shape[1], False)
    except (StratumError, ValueError):
        return StratumCritical(cand.x, lo, hi, hi - k + 1, None, False, -1, False)


def scan(fam, k: int, grid_per_dim: int = 32, opts: ScanOptions | None = None,
         grid: GridSample | None = None) -> MorseReport:
    """Locate and classify the critical points of lambda_k on the torus."""
    opts = opts or ScanOptions()
    if not fam.is_torus:
        raise ValueError("scan requires a torus family")
    if not 1 <= k <= fam.n:
        raise ValueError(f"branch index k={k} outside 1..{fam.n}")
    if grid is None or grid.N != grid_per_dim:
        grid = sample_grid(fam, grid_per_dim)
    p_manifold = opts.manifold_poincare if opts.manifold_poincare is not None else torus_poincare(fam.d)
    lam = grid.eigenvalues[..., k - 1]
    notes: list[str] = []
    inconclusive = False
    reports: list[CriticalPointReport] = []
    stratum_data: list[StratumCritical] = []

    spread = float(np.max(lam) - np.min(lam))
    if spread <= 1e-12 * (1.0 + float(np.max(np.abs(lam)))):
        notes.append("branch is constant on the grid: every point is a degenerate critical point")
        inconclusive = True
        cands: list = []
    else:
        cands = _smooth_candidates(fam, lam, grid, k, opts) + _stratum_candidates(fam, grid, k, opts)
    cands = _dedupe(cands, TWO_PI / (4 * grid_per_dim))

    for c in cands:
        cls = classify_point(fam, c.x, k, opts.classify)
        if c.kind == "stratum":
            stratum_data.append(_stratum_record(fam, c, cls, k, opts))
        if cls.verdict == "Regular":
            continue
        if cls.verdict in ("Borderline", "NotCovered") or (cls.verdict == "SmoothCritical" and not cls.nondegenerate):
            inconclusive = True
            notes.append(f"{cls.verdict} point at {np.round(c.x, 6).tolist()}: {cls.reason or 'degenerate Hessian'}")
        value = float(np.linalg.eigvalsh(fam.evaluate(c.x))[k - 1])
        reports.append(CriticalPointReport(c.x, value, cls, c.basin, c.kind, c.residual))

    p_morse = sum_polys(r.classification.morse_term for r in reports)
    values = [r.value for r in reports]
    return MorseReport(
        k=k, n=fam.n, d=fam.d, field=fam.field.value, reports=reports, p_morse=p_morse, p_manifold=p_manifold,
        division=morse_division(p_morse, p_manifold), inconclusive=inconclusive, notes=notes,
        stratum_data=stratum_data,
        global_max=float(max([np.max(lam)] + values)), global_min=float(min([np.min(lam)] + values)),
        grid=grid_per_dim,
    )


def scan_all(fam, grid_per_dim: int = 32, opts: ScanOptions | None = None, ks=None) -> dict:
    """Scans of several branches sharing one grid eigendecomposition."""
    grid = sample_grid(fam, grid_per_dim)
    ks = range(1, fam.n + 1) if ks is None else ks
    return {k: scan(fam, k, grid_per_dim, opts, grid=grid) for k in ks}


# -- corollary checks -------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: int
    rhs: int

    @property
    def passed(self) -> bool:
        return self.lhs >= self.rhs

    def to_dict(self) -> dict:
        return {"bound": self.name, "lhs": self.lhs, "rhs": self.rhs, "pass": self.passed}


def van_hove_table(reports: dict, d: int, p_manifold: IntPoly | None = None) -> list[BoundCheck]:
    """Lower bounds on smooth critical-point counts c_mu(k) on 2- and 3-dimensional manifolds.

    The right-hand sides are Betti-number combinations; for tori they are the
    familiar constants 2 (d=2) and 3, 4, 3 (d=3).
    """
    if d not in (2, 3):
        raise ValueError("van Hove bounds are defined for d = 2 or 3 only")
    pm = p_manifold if p_manifold is not None else torus_poincare(d)
    b = list(pm.coeffs) + [0] * (d + 1)
    n = max(reports)
    missing = [k for k in range(1, n + 1) if k not in reports]
    if missing:
        raise ValueError(f"reports missing for branches {missing}")
    rows = []
    if d == 2:
        for k in range(1, n + 1):
            rows.append(BoundCheck(f"c1({k}) >= {b[1]}", reports[k].c(1), b[1]))
        return rows
    rows.append(BoundCheck(f"c1(1) >= {b[1]}", reports[1].c(1), b[1]))
    mid = b[1] + b[2] - b[0] - b[3]
    for k in range(2, n + 1):
        rows.append(BoundCheck(f"c1({k}) + c2({k - 1}) >= {mid}", reports[k].c(1) + reports[k - 1].c(2), mid))
    rows.append(BoundCheck(f"c2({n}) >= {b[2]}", reports[n].c(2), b[2]))
    return rows


@dataclass(frozen=True)
class SeparationCheck:
    lower: int
    upper: int
    max_lower: float
    max_upper: float
    min_lower: float
    min_upper: float
    margin: float = 1e-9

    @property
    def passed(self) -> bool:
        return (self.max_upper - self.max_lower > self.margin) and (self.min_upper - self.min_lower > self.margin)


def minmax_separation(reports: dict, margin: float = 1e-9) -> list[SeparationCheck]:
    """Strict separation of global maxima and minima of adjacent branches."""
    ks = sorted(reports)
    out = []
    for a, b in zip(ks, ks[1:]):
        if b != a + 1:
            continue
        ra, rb = reports[a], reports[b]
        out.append(SeparationCheck(a, b, ra.global_max, rb.global_max, ra.global_min, rb.global_min, margin))
    return out


@dataclass(frozen=True)
class ConseqResult:
    passed: Optional[bool]
    left: Optional[IntPoly]
    p_morse: IntPoly
    p_manifold: IntPoly
    notice: str = ""

    @property
    def skipped(self) -> bool:
        return self.passed is None


def conseq_check(report: MorseReport) -> ConseqResult:
    """Left-hand sum over consecutive index windows J containing k, compared with p_morse and P_M.

    Each stratum S(k, J) contributes its smooth Morse polynomial times the
    nonsmooth contribution of k inside J; the simple stratum J = {k}
    contributes the smooth critical points of lambda_k.
    """
    def skip(msg):
        return ConseqResult(None, None, report.p_morse, report.p_manifold, msg)

    smooth = []
    for r in report.reports:
        c = r.classification
        if c.verdict == "SmoothCritical":
            if not c.nondegenerate:
                return skip("degenerate smooth critical point")
            smooth.append(IntPoly.monomial(c.mu))
        elif c.verdict != "NonDegenerateCritical":
            return skip(f"{c.verdict} point present")
    terms = list(smooth)
    for s in report.stratum_data:
        if s.tangent_dim > 1:
            return skip("stratum of dimension > 1")
        if s.mu is None or not s.nondegenerate:
            return skip("incomplete stratum Morse data")
        nu = s.hi - s.lo + 1
        terms.append(nonsmooth_contribution(nu, s.rel_index, report.field).shift(s.mu))
    left = sum_polys(terms)
    ok = dominates(left, report.p_morse) and dominates(report.p_morse, report.p_manifold)
    return ConseqResult(ok, left, report.p_morse, report.p_manifold)


# -- outputs ------------------------------------------------------------------------------------


def contour_csv(fam, k: int, grid_per_dim: int) -> str:
    """Rows ``x1,x2,lambda_k`` over a uniform grid of a two-parameter family."""
    if fam.d != 2:
        raise ValueError("contour output needs a two-parameter family")
    if fam.is_torus:
        axis = np.arange(grid_per_dim) * (TWO_PI / grid_per_dim)
    else:
        axis = np.linspace(-1.0, 1.0, grid_per_dim)
    X = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    lam = np.linalg.eigvalsh(fam.evaluate(X))[:, k - 1]
    lines = ["x1,x2,lambda_k"] + [f"{a:.12g},{b:.12g},{v:.12g}" for (a, b), v in zip(X, lam)]
    return "\n".join(lines) + "\n"
