import json

import numpy as np
import pytest

from morseig.families import MatrixFamily, builtin, constant_family
from morseig.pipeline import (
    GAP_ACCEPT,
    SMOOTH_ACCEPT,
    ScanOptions,
    conseq_check,
    contour_csv,
    fd_gradient_norm,
    minmax_separation,
    scan,
    scan_all,
    van_hove_table,
)
from morseig.polyalg import Field, IntPoly, torus_poincare
from morseig.stratum import torus_delta

from oracles import real2band_bands


def scalar_band():
    return MatrixFamily(2, 1, Field.REAL, "torus",
                        lambda x: (np.cos(x[..., 0]) + np.cos(x[..., 1]))[..., None, None], name="scalar")


def stacked_three_band():
    """Scalar band well below the real2band pair; only two-fold crossings occur."""
    base = builtin("real2band-t2")

    def ev(x):
        x = np.asarray(x)
        out = np.zeros(x.shape[:-1] + (3, 3))
        out[..., 0, 0] = -2.0 + 0.1 * (np.cos(x[..., 0]) + np.cos(x[..., 1]))
        out[..., 1:, 1:] = base(x)
        return out

    return MatrixFamily(2, 3, Field.REAL, "torus", ev, name="stacked")


@pytest.fixture(scope="module")
def real2band():
    return scan_all(builtin("real2band-t2"), 32)


def test_real2band_counts(real2band):
    r = real2band[1]
    verdicts = [c.classification.verdict for c in r.reports]
    assert verdicts.count("NonDegenerateCritical") == 4
    assert r.c_mu == {0: 4, 1: 8}
    assert str(r.p_morse) == "4+8t+4t^2"
    assert r.division.satisfied and str(r.division.remainder) == "3+3t"
    assert not r.inconclusive and r.exit_code == 0
    assert {m: str(p) for m, p in r.d_mu.items()} == {0: "4t^2"}


def test_report_invariants(real2band):
    fam = builtin("real2band-t2")
    for r in real2band.values():
        locs = np.array([c.location for c in r.reports])
        for i in range(len(locs)):
            for j in range(i):
                assert np.linalg.norm(torus_delta(locs[i], locs[j])) > 2 * np.pi / (4 * 32)
        for c in r.reports:
            assert abs(c.value - real2band_bands(c.location)[r.k - 1]) <= 1e-8
            if c.classification.verdict == "SmoothCritical":
                assert fd_gradient_norm(fam, c.location, r.k) <= SMOOTH_ACCEPT
            else:
                w = np.linalg.eigvalsh(fam(c.location))
                assert w[1] - w[0] <= GAP_ACCEPT
        # P(1) - P_M(1) = 2 R(1)
        assert r.p_morse(1) - r.p_manifold(1) == 2 * r.division.remainder(1)


def test_bounds_and_separation(real2band):
    checks = van_hove_table(real2band, 2)
    assert [(b.lhs, b.rhs, b.passed) for b in checks] == [(8, 2, True), (8, 2, True)]
    (sep,) = minmax_separation(real2band)
    assert sep.passed
    assert sep.max_lower == pytest.approx(0.0, abs=1e-12) and sep.max_upper == pytest.approx(np.sqrt(2))


def test_conseq_equality_on_real2band(real2band):
    res = conseq_check(real2band[1])
    assert res.passed and res.left == real2band[1].p_morse


def test_grid_doubling_is_stable(real2band):
    fine = scan(builtin("real2band-t2"), 1, 64)
    coarse = real2band[1]
    assert fine.p_morse == coarse.p_morse
    assert [c.classification.verdict for c in fine.reports] == [c.classification.verdict for c in coarse.reports]


def test_scan_is_deterministic():
    fam = builtin("real2band-t2")
    assert scan(fam, 2, 16).to_json() == scan(fam, 2, 16).to_json()


def test_report_json_schema(real2band):
    d = json.loads(real2band[1].to_json())
    assert d["p_morse"] == [4, 8, 4]
    assert d["division"] == {"satisfied": True, "remainder": [3, 3]}
    assert d["c_mu"] == {"0": 4, "1": 8}
    assert len(d["critical_points"]) == 16


def test_constant_family_is_flagged():
    r = scan(constant_family(np.diag([0.0, 1.0])), 1, 16)
    assert r.reports == [] and r.inconclusive
    assert not r.division.satisfied and r.exit_code == 2
    r = scan(constant_family(np.eye(2)), 2, 16)
    assert not any(c.classification.verdict == "NonDegenerateCritical" for c in r.reports)


def test_single_band_reduces_to_classical_morse():
    reports = scan_all(scalar_band(), 16)
    r = reports[1]
    assert str(r.p_morse) == "1+2t+t^2" and r.division.remainder == IntPoly()
    res = conseq_check(r)
    assert res.passed and res.left == r.p_morse
    assert minmax_separation(reports) == []


def test_three_band_nested_conseq():
    reports = scan_all(stacked_three_band(), 32)
    r2 = reports[2]
    assert str(r2.p_morse) == "4+8t+4t^2"
    res = conseq_check(r2)
    assert res.passed
    assert res.left == r2.p_morse
    assert all(s.lo == 2 and s.hi == 3 for s in r2.stratum_data)
    assert all(s.passed for s in minmax_separation(reports))


def test_nodal_ring_conseq_uses_one_dimensional_strata():
    r = scan(builtin("nodal-ring-t3"), 1, 16)
    assert not r.inconclusive
    assert {s.tangent_dim for s in r.stratum_data} == {1}
    res = conseq_check(r)
    assert res.passed


def test_custom_manifold_polynomial():
    opts = ScanOptions(manifold_poincare=IntPoly((1, 2, 1, 5)))
    r = scan(builtin("real2band-t2"), 1, 16, opts)
    assert not r.division.satisfied and r.exit_code == 2


def test_preconditions():
    with pytest.raises(ValueError):
        scan(builtin("cone-symmetric"), 1, 16)
    with pytest.raises(ValueError):
        scan(builtin("real2band-t2"), 1, 4)
    with pytest.raises(ValueError):
        scan(builtin("real2band-t2"), 3, 16)
    with pytest.raises(ValueError):
        van_hove_table({1: None}, 4)
    r = scan(builtin("real2band-t2"), 2, 16)
    with pytest.raises(ValueError):
        van_hove_table({2: r}, 2)


def test_contour_csv():
    text = contour_csv(builtin("real2band-t2"), 1, 8)
    lines = text.splitlines()
    assert lines[0] == "x1,x2,lambda_k" and len(lines) == 65
    with pytest.raises(ValueError):
        contour_csv(builtin("weyl-t3"), 1, 8)


def test_torus_poincare_default():
    assert scan(scalar_band(), 1, 16).p_manifold == torus_poincare(2)
