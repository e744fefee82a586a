import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from morseig.families import builtin, random_family
from morseig.polyalg import Field, s_codim, sym_dim
from morseig.spectral import (
    EigenCluster,
    cluster_at,
    cluster_window,
    complement_basis,
    compress,
    differential,
    eig_sorted,
    fd_differential,
    from_sym_coords,
    h_operator,
    h_rank,
    hf_slopes,
    secant_slopes,
    self_adjoint,
    sym_basis,
    sym_coords,
    traceless_coords,
)

from oracles import mp_eigvals


def random_sa(rng, n, complex_=False):
    A = rng.standard_normal((n, n))
    if complex_:
        A = A + 1j * rng.standard_normal((n, n))
    return A + np.conj(A.T)


@pytest.mark.parametrize("seed", range(12))
def test_eigenvalues_match_extended_precision(seed):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 6
    A = random_sa(rng, n, complex_=seed % 2 == 1)
    s = eig_sorted(A)
    assert np.all(np.diff(s.eigenvalues) >= 0)
    np.testing.assert_allclose(s.eigenvalues, mp_eigvals(A), atol=1e-12 * (1 + np.abs(A).max()))
    V = s.eigenvectors
    np.testing.assert_allclose(np.conj(V.T) @ V, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(A @ V, V * s.eigenvalues, atol=1e-11)


def test_self_adjoint_validation():
    with pytest.raises(ValueError):
        self_adjoint(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        self_adjoint(np.zeros((2, 3)))
    out = self_adjoint(np.array([[1.0, 2.0], [2.0, 3.0]], dtype=complex))
    assert not np.iscomplexobj(out)


def test_cluster_window():
    w = np.array([-1.0, 0.0, 0.0, 1e-9, 2.0])
    assert cluster_window(w, 2) == (2, 4)
    assert cluster_window(w, 4) == (2, 4)
    assert cluster_window(w, 1) == (1, 1)
    with pytest.raises(ValueError):
        cluster_window(w, 6)
    with pytest.raises(ValueError):
        cluster_window(w, 1, tol=0.0)


def test_cluster_relative_index():
    A = np.diag([0.0, 1.0, 1.0, 1.0, 3.0])
    c = cluster_at(eig_sorted(A), 3)
    assert (c.lo, c.hi, c.nu, c.rel_index) == (2, 4, 3, 2)
    np.testing.assert_allclose(c.isometry.T @ c.isometry, np.eye(3), atol=1e-12)


def test_compress_requires_isometry():
    with pytest.raises(ValueError):
        compress(np.eye(2), np.array([[2.0], [0.0]]))
    U = np.array([[1.0], [0.0]])
    assert compress(np.diag([5.0, 7.0]), U)[0, 0] == 5.0


@pytest.mark.parametrize("field", ["real", "complex"])
@pytest.mark.parametrize("nu", [1, 2, 3, 4])
def test_sym_basis_is_orthonormal(field, nu):
    B = sym_basis(nu, field)
    assert len(B) == sym_dim(nu, field)
    G = np.real(np.einsum("aij,bji->ab", B, B))
    np.testing.assert_allclose(G, np.eye(len(B)), atol=1e-14)
    for M in B:
        np.testing.assert_allclose(M, np.conj(M.T))


@given(st.integers(1, 4), st.booleans(), st.integers(0, 2 ** 31))
def test_sym_coords_round_trip(nu, complex_, seed):
    rng = np.random.default_rng(seed)
    fld = Field.COMPLEX if complex_ else Field.REAL
    X = random_sa(rng, nu, complex_)
    c = sym_coords(X, fld)
    np.testing.assert_allclose(from_sym_coords(c, nu, fld), X, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(c), np.linalg.norm(X), rtol=1e-12)
    t = traceless_coords(X, fld)
    assert t.shape == (s_codim(nu, fld),)
    assert np.allclose(traceless_coords(np.eye(nu) * 3.0, fld), 0)


@pytest.mark.parametrize("name", ["cone-symmetric", "borderline", "real2band-t2", "weyl-t3", "nodal-ring-t3",
                                  "graphene-t2", "sym2-identity"])
def test_analytic_differentials_match_finite_differences(name):
    fam = builtin(name)
    x = np.linspace(0.3, 1.1, fam.d)
    np.testing.assert_allclose(differential(fam, x), fd_differential(fam, x), atol=1e-8)


def test_h_operator_of_first_cone():
    fam = builtin("cone-symmetric")
    c = cluster_at(eig_sorted(fam([0.0, 0.0])), 1)
    h = h_operator(fam, [0.0, 0.0], c)
    assert h_rank(h) == 2
    comp = complement_basis(h)
    assert comp.shape == (1, 2, 2)
    B = comp[0] * np.sign(np.trace(comp[0]))
    np.testing.assert_allclose(B, np.eye(2) / np.sqrt(2), atol=1e-12)
    # slopes along (1, 0) are the eigenvalues of sigma_z
    np.testing.assert_allclose(hf_slopes(fam, [0, 0], [1.0, 0.0], c), [-1.0, 1.0], atol=1e-12)
    with pytest.raises(ValueError):
        hf_slopes(fam, [0, 0], [0.0, 0.0], c)


@pytest.mark.parametrize("seed", range(20))
def test_hf_slopes_match_secants(seed):
    rng = np.random.default_rng(100 + seed)
    fam = random_family(seed, 1 + seed % 3, 1 + seed % 5, "complex" if seed % 2 else "real")
    x = rng.uniform(0, 2 * np.pi, fam.d)
    v = rng.standard_normal(fam.d)
    k = 1 + seed % fam.n
    c = cluster_at(eig_sorted(fam(x)), k)
    a = hf_slopes(fam, x, v, c)
    b = secant_slopes(fam, x, v, c)
    assert np.max(np.abs(a - b)) <= 1e-5 * max(np.max(np.abs(a)), 1e-12)


def test_hf_slopes_at_weyl_node():
    fam = builtin("weyl-t3")
    x = np.zeros(3)
    v = np.array([1.0, -2.0, 0.5])
    c = cluster_at(eig_sorted(fam(x)), 2)
    assert isinstance(c, EigenCluster) and c.nu == 2
    np.testing.assert_allclose(hf_slopes(fam, x, v, c), [-np.linalg.norm(v), np.linalg.norm(v)], atol=1e-12)
    np.testing.assert_allclose(secant_slopes(fam, x, v, c), hf_slopes(fam, x, v, c), rtol=1e-6)
