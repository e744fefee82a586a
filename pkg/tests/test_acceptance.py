"""Acceptance criteria, each run at its stated tolerance and time budget.

Every test prints one ``[acceptance] <id> PASS|FAIL: <details>`` line.
"""

import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from morseig.classify import TAU_DEF, ClassifyOptions, check_condition_N, classify_point, definite_in_span
from morseig.families import GRAPHENE_DIRAC_POINTS, MatrixFamily, builtin, constant_family, random_family
from morseig.pipeline import conseq_check, scan, scan_all, van_hove_table
from morseig.polyalg import Field, emit_table, nonsmooth_contribution, parse_table, qbinom, s_codim
from morseig.polyalg import twisted_poincare, z2_contribution
from morseig.spectral import cluster_at, eig_sorted, h_operator, hf_slopes, secant_slopes
from morseig.stratum import kernel_tangent_angle, project_to_stratum, trace_stratum

from oracles import TABLE_REAL, poly_from_str, random_orthogonal, sphere_sweep_margin

_BUDGET_7 = {"elapsed": 0.0}


@pytest.fixture
def report(capsys):
    def emit(cid, ok, details):
        with capsys.disabled():
            print(f"\n[acceptance] {cid} {'PASS' if ok else 'FAIL'}: {details}")
        assert ok, details

    return emit


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# -- 1 -------------------------------------------------------------------------------------


def test_criterion_1_table(report):
    with Timer() as t:
        table = parse_table(emit_table(8, "real"))
    cells = [(nu, i) for nu in range(1, 9) for i in range(1, nu + 1)]
    mismatches = [(nu, i) for nu, i in cells
                  if table[nu - 1][i - 1].to_list() != poly_from_str(TABLE_REAL[nu - 1][i - 1])]
    zeros = sum(1 for nu, i in cells if table[nu - 1][i - 1].is_zero())
    ok = len(cells) == 36 and not mismatches and t.elapsed < 1.0
    report("1", ok, f"{len(cells)} cells, {len(mismatches)} mismatches, {zeros} zero cells, {t.elapsed:.3f}s")


# -- 2 -------------------------------------------------------------------------------------


def test_criterion_2_worked_examples(report):
    with Timer() as t:
        f1, f2, fb = builtin("cone-symmetric"), builtin("cone-tilted"), builtin("borderline")
        c11, c12 = classify_point(f1, [0, 0], 1), classify_point(f1, [0, 0], 2)
        c2 = [classify_point(f2, [0, 0], k) for k in (1, 2)]
        cb = [classify_point(fb, [0, 0], k) for k in (1, 2)]
    checks = {
        "F1 k=1 t^2 Max": c11.verdict == "NonDegenerateCritical" and str(c11.contribution) == "t^2"
        and c11.extremum == "Max" and np.linalg.eigvalsh(c11.complement_matrix)[0] > 0,
        "F1 k=2 1 Min": c12.verdict == "NonDegenerateCritical" and str(c12.contribution) == "1"
        and c12.extremum == "Min",
        "F2 Regular": all(c.verdict == "Regular" for c in c2),
        "F2 witness": all(
            np.linalg.eigvalsh(h_operator(f2, np.zeros(2), cluster_at(eig_sorted(f2([0, 0])), c.k)).apply(
                c.witness))[0] > 0 for c in c2),
        "borderline": all(c.verdict == "Borderline" and c.complement_matrix is not None for c in cb),
    }
    failed = [k for k, v in checks.items() if not v]
    ok = not failed and t.elapsed < 1.0
    report("2", ok, f"checks {len(checks) - len(failed)}/{len(checks)} {failed or ''} in {t.elapsed:.3f}s")


# -- 3 -------------------------------------------------------------------------------------


def test_criterion_3_hellmann_feynman(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    with Timer() as t:
        for trial in range(200):
            d = int(rng.integers(1, 4))
            n = int(rng.integers(1, 7))
            fld = Field.REAL if trial % 2 == 0 else Field.COMPLEX
            fam = random_family(10_000 + trial, d, n, fld)
            x = rng.uniform(0, 2 * np.pi, d)
            v = rng.standard_normal(d)
            k = int(rng.integers(1, n + 1))
            c = cluster_at(eig_sorted(fam(x)), k)
            a = hf_slopes(fam, x, v, c)
            b = secant_slopes(fam, x, v, c)
            worst = max(worst, float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(a))), 1e-12)))
    ok = worst <= 1e-5 and t.elapsed < 30
    report("3", ok, f"200 families, max relative slope error {worst:.2e} (tol 1e-5), {t.elapsed:.2f}s")


# -- 4 -------------------------------------------------------------------------------------


def test_criterion_4_torus_t2(report):
    with Timer() as t:
        r = scan(builtin("real2band-t2"), 1, 32)
    smooth = [c.classification for c in r.reports if c.classification.verdict == "SmoothCritical"]
    nonsmooth = [c.classification for c in r.reports if c.classification.verdict == "NonDegenerateCritical"]
    minima = sum(1 for c in smooth if c.mu == 0)
    saddles = sum(1 for c in smooth if c.mu == 1)
    ok = (minima == 4 and saddles == 8 and len(smooth) == 12 and len(nonsmooth) == 4
          and all(str(c.contribution) == "t^2" for c in nonsmooth)
          and str(r.p_morse) == "4+8t+4t^2" and r.division.satisfied and str(r.division.remainder) == "3+3t"
          and r.c(1) >= 2 and not r.inconclusive and t.elapsed < 60)
    report("4", ok, f"minima {minima}, saddles {saddles}, nonsmooth {len(nonsmooth)}, p={r.p_morse}, "
                    f"{r.division}, c1(1)={r.c(1)}, {t.elapsed:.2f}s")


# -- 5 -------------------------------------------------------------------------------------


def test_criterion_5_torus_t3(report):
    with Timer() as t:
        reports = scan_all(builtin("weyl-t3"), 24)
        bounds = van_hove_table(reports, 3)
    r1 = reports[1]
    nodes = [c.classification for c in r1.reports if c.classification.verdict == "NonDegenerateCritical"]
    ok = (str(r1.p_morse) == "8+24t+24t^2+8t^3" and str(r1.division.remainder) == "7+14t+7t^2"
          and len(nodes) == 8 and all(str(c.contribution) == "t^3" for c in nodes)
          and all(b.passed for b in bounds) and len(bounds) == 3
          and not any(r.inconclusive for r in reports.values()) and t.elapsed < 300)
    report("5", ok, f"p1={r1.p_morse}, {r1.division}, p2={reports[2].p_morse}, "
                    f"bounds {[(b.name, b.lhs) for b in bounds]}, {t.elapsed:.2f}s")


# -- 6 -------------------------------------------------------------------------------------


def test_criterion_6_negative_cases(report):
    g = builtin("graphene-t2")
    dirac = [classify_point(g, x, k).verdict for x in GRAPHENE_DIRAC_POINTS for k in (1, 2)]
    cubic = MatrixFamily(1, 1, Field.REAL, "chart", lambda x: (np.asarray(x)[..., 0] ** 3)[..., None, None])
    cub = classify_point(cubic, [0.0], 1)
    const_verdicts = []
    for A in (np.diag([-1.0, 0.5, 2.0]), np.eye(2), np.array([[1.0, 1j], [-1j, 1.0]])):
        fam = constant_family(A)
        for k in range(1, fam.n + 1):
            r = scan(fam, k, 8)
            const_verdicts += [c.classification.verdict for c in r.reports]
            const_verdicts.append(classify_point(fam, [0.4, 1.1], k).verdict)
            assert r.inconclusive or not r.division.satisfied
    ok = (all(v == "NotCovered" for v in dirac) and cub.verdict != "NonDegenerateCritical"
          and "NonDegenerateCritical" not in const_verdicts)
    report("6", ok, f"Dirac points {dirac}; cubic {cub.verdict} (nondegenerate={cub.nondegenerate}); "
                    f"constant-family verdicts {sorted(set(const_verdicts))}")


# -- 7 -------------------------------------------------------------------------------------


def _timed7(fn):
    t0 = time.perf_counter()
    try:
        return fn()
    finally:
        _BUDGET_7["elapsed"] += time.perf_counter() - t0


def test_criterion_7a_qbinom(report):
    def run():
        bad = []
        for n in range(13):
            for k in range(n + 1):
                p = qbinom(n, k)
                if not (p == qbinom(n, n - k) and p(1) == int(np.round(np.prod(
                        [(n - j) / (j + 1) for j in range(k)]))) and p.coeffs == p.coeffs[::-1]):
                    bad.append((n, k))
                if n and 0 < k < n and qbinom(n, k) != qbinom(n - 1, k) + qbinom(n - 1, k - 1).shift(n - k):
                    bad.append((n, k, "dual Pascal"))
        return bad

    bad = _timed7(run)
    report("7a", not bad, f"q-binomial symmetry, t=1 evaluation and dual Pascal identity for n<=12: {bad or 'ok'}")


def test_criterion_7b_nonnegativity(report):
    def run():
        bad = []
        for n in range(1, 10):
            for k in range(n + 1):
                if not twisted_poincare(k, n).nonnegative():
                    bad.append(("twisted", k, n))
        for fld in ("real", "complex"):
            for row in parse_table(emit_table(8, fld)):
                bad += [("table", fld, str(p)) for p in row if not p.nonnegative()]
        return bad

    bad = _timed7(run)
    report("7b", not bad, f"all emitted polynomials nonnegative (twisted k<=n<=9, both tables): {bad or 'ok'}")


def test_criterion_7c_boundary_contributions(report):
    def run():
        return [(nu, f) for f in ("real", "complex") for nu in range(1, 9)
                if nonsmooth_contribution(nu, 1, f).to_list() != [1]
                or nonsmooth_contribution(nu, nu, f).to_list() != [0] * s_codim(nu, f) + [1]]

    bad = _timed7(run)
    report("7c", not bad, f"T_nu^1 = 1 and T_nu^nu = t^s(nu) for nu<=8, both fields: {bad or 'ok'}")


def test_criterion_7d_z2(report):
    def run():
        return [(nu, i, mu) for nu in range(1, 9) for i in range(1, nu + 1) for mu in range(4)
                if z2_contribution(nu, i, mu).is_zero()]

    bad = _timed7(run)
    report("7d", not bad, f"z2 contribution nonzero for 1<=i<=nu<=8: {bad or 'ok'}")


_INVARIANCE_CASES = [
    ("cone-symmetric", [0.0, 0.0], 1), ("cone-symmetric", [0.0, 0.0], 2), ("cone-tilted", [0.0, 0.0], 1),
    ("borderline", [0.0, 0.0], 2), ("real2band-t2", [np.pi, 0.0], 1), ("real2band-t2", [np.pi / 2, 0.0], 1),
    ("real2band-t2", [np.pi / 2, np.pi / 2], 2), ("weyl-t3", [0.0, np.pi, 0.0], 1), ("weyl-t3", [0.0, 0.0, 0.0], 2),
    ("nodal-ring-t3", [0.0, 0.0, np.pi], 1), ("graphene-t2", list(GRAPHENE_DIRAC_POINTS[0]), 1),
]


def _signature(c):
    return (c.verdict, c.nu, c.rel_index, c.mu, str(c.morse_term), str(c.z2_poly))


def test_criterion_7e_invariance(report):
    rng = np.random.default_rng(77)
    refs = {}
    for name, x, k in _INVARIANCE_CASES:
        refs[(name, k, tuple(x))] = _signature(classify_point(builtin(name), x, k))

    def run():
        bad = []
        for kind in ("conjugation", "shift", "scaling"):
            for trial in range(100):
                name, x, k = _INVARIANCE_CASES[trial % len(_INVARIANCE_CASES)]
                fam = builtin(name)
                if kind == "conjugation":
                    other = fam.conjugated(random_orthogonal(rng, fam.n, fam.field is Field.COMPLEX))
                elif kind == "shift":
                    other = fam.shifted(float(rng.uniform(-5, 5)))
                else:
                    other = fam.scaled(float(rng.uniform(0.2, 5)))
                sig = _signature(classify_point(other, x, k, ClassifyOptions(seed=trial)))
                if sig != refs[(name, k, tuple(x))]:
                    bad.append((kind, name, k, sig))
        return bad

    bad = _timed7(run)
    report("7e", not bad, f"300 transformed classifications, {len(bad)} disagreements {bad[:3] or ''}")


def test_criterion_7f_definiteness_oracle(report):
    rng = np.random.default_rng(5)

    def run():
        compared = disagreements = skipped = 0
        for trial in range(500):
            nu = 2 + trial % 2
            m = 2 + (trial // 2) % 2
            complex_ = trial % 5 == 0
            B = []
            for _ in range(m):
                A = rng.standard_normal((nu, nu))
                if complex_:
                    A = A + 1j * rng.standard_normal((nu, nu))
                B.append(A + np.conj(A.T))
            oracle = sphere_sweep_margin(B)
            if abs(oracle) <= 10 * TAU_DEF:
                skipped += 1
                continue
            compared += 1
            if definite_in_span(B, seed=trial).found != (oracle > 0):
                disagreements += 1
        return compared, disagreements, skipped

    compared, disagreements, skipped = _timed7(run)
    report("7f", disagreements == 0, f"{compared} subspaces compared, {disagreements} disagreements, "
                                     f"{skipped} inside the oracle margin band")


def _n_points():
    pts = [("cone-symmetric", np.zeros(2), 1), ("cone-symmetric", np.zeros(2), 2)]
    pts += [("real2band-t2", np.array([a, b]), k) for a in (0, np.pi) for b in (0, np.pi) for k in (1, 2)]
    pts += [("weyl-t3", np.array([a, b, c]), 1) for a in (0, np.pi) for b in (0, np.pi) for c in (0, np.pi)]
    for a in (0, np.pi):
        for b in (0, np.pi):
            for s in np.linspace(0, 2 * np.pi, 8, endpoint=False):
                pts += [("nodal-ring-t3", np.array([a + 0.1 * np.sin(s), b, s]), k) for k in (1, 2)]
    return pts


def test_criterion_7g_kernel_tangent(report):
    def run():
        worst, count = 0.0, 0
        for name, x, k in _n_points():
            fam = builtin(name)
            p = project_to_stratum(fam, x, k, 2)
            h = h_operator(fam, p.x, cluster_at(eig_sorted(fam(p.x)), k))
            if not check_condition_N(h).holds:
                continue  # e.g. ring points where the identity direction is hit
            worst = max(worst, kernel_tangent_angle(fam, p, h))
            count += 1
        return worst, count

    worst, count = _timed7(run)
    # 2 cone + 8 real2band + 8 Weyl + 4 rings x 2 extremal points x 2 branches
    ok = worst <= 1e-6 and count == 34
    report("7g", ok, f"{count} condition-(N) points, max angle(Ker H, T S) = {worst:.2e}")


def test_criterion_7_total_runtime(report):
    el = _BUDGET_7["elapsed"]
    report("7", el < 180, f"property suites 7a-7g total runtime {el:.1f}s (budget 180s)")


# -- 8 -------------------------------------------------------------------------------------


def _curve_distance(y):
    def f(s):
        return (y[0] - 0.1 * np.sin(s)) ** 2 + y[1] ** 2 + (y[2] - s) ** 2

    res = minimize_scalar(f, bounds=(y[2] - 0.3, y[2] + 0.3), method="bounded", options={"xatol": 1e-12})
    return float(np.sqrt(res.fun))


def _polyline_deviation(points):
    pts = np.vstack([points, points[:1] + np.array([0.0, 0.0, 2 * np.pi])])
    worst = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        for t in np.linspace(0, 1, 9):
            worst = max(worst, _curve_distance(a + t * (b - a)))
    return worst


def test_criterion_8_trace(report):
    fam = builtin("nodal-ring-t3")
    p = project_to_stratum(fam, np.zeros(3), 1, 2)
    coarse = trace_stratum(fam, p, 1, 0.2)
    fine = trace_stratum(fam, p, 1, 0.1)
    dev_c, dev_f = _polyline_deviation(coarse.points), _polyline_deviation(fine.points)
    ratio = dev_f / dev_c
    rel = abs(fine.length - 2 * np.pi) / (2 * np.pi)
    ok = coarse.closed and fine.closed and rel < 0.01 and ratio <= 0.5
    report("8", ok, f"closed trace length {fine.length:.5f} (rel. to 2pi {rel:.2e}); max deviation "
                    f"{dev_c:.2e} -> {dev_f:.2e} on halving the step (ratio {ratio:.3f})")
