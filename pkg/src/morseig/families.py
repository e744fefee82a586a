"""Parametric families of self-adjoint matrices.

All evaluators are vectorized: ``evaluate`` takes points of shape ``(..., d)``
and returns matrices of shape ``(..., n, n)``; ``jacobian`` takes a single
point and returns the ``d`` partial derivatives, shape ``(d, n, n)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import jsonschema
import numpy as np

from .polyalg import Field

TWO_PI = 2.0 * np.pi

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=float)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=float)
ID2 = np.eye(2)


@dataclass(frozen=True)
class MatrixFamily:
    """Smooth map from a d-dimensional torus or chart into Sym_n(F)."""

    d: int
    n: int
    field: Field
    domain: str  # "torus" or "chart"
    evaluate_fn: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "family"

    def __post_init__(self):
        if self.domain not in ("torus", "chart"):
            raise ValueError(f"unknown domain {self.domain!r}")
        object.__setattr__(self, "field", Field.parse(self.field))

    @property
    def is_torus(self) -> bool:
        return self.domain == "torus"

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}, got shape {x.shape}")
        A = np.asarray(self.evaluate_fn(x))
        if self.field is Field.REAL and np.iscomplexobj(A):
            A = A.real
        return A

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)

    @property
    def jacobian(self):
        if self.jacobian_fn is None:
            return None
        return self._jacobian

    def _jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        J = np.asarray(self.jacobian_fn(x))
        if self.field is Field.REAL and np.iscomplexobj(J):
            J = J.real
        return J

    def jacobian_batch(self, X) -> np.ndarray:
        """Differentials at many points, shape ``(N, d, n, n)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.jacobian_fn is not None:
            return np.array([self._jacobian(x) for x in X])
        from .spectral import fd_differential

        return np.array([fd_differential(self, x) for x in X])

    def shifted(self, c: float) -> "MatrixFamily":
        """Family x -> F(x) + c I."""
        I = np.eye(self.n)
        return MatrixFamily(self.d, self.n, self.field, self.domain,
                            lambda x: self.evaluate(x) + c * I, self.jacobian_fn, f"{self.name}+{c}I")

    def scaled(self, a: float) -> "MatrixFamily":
        jac = None if self.jacobian_fn is None else (lambda x: a * self._jacobian(x))
        return MatrixFamily(self.d, self.n, self.field, self.domain,
                            lambda x: a * self.evaluate(x), jac, f"{a}*{self.name}")

    def conjugated(self, W) -> "MatrixFamily":
        """Family x -> W* F(x) W for a unitary (orthogonal) W."""
        W = np.asarray(W)
        WH = np.conj(W.T)
        jac = None if self.jacobian_fn is None else (lambda x: WH @ self._jacobian(x) @ W)
        return MatrixFamily(self.d, self.n, self.field, self.domain,
                            lambda x: WH @ self.evaluate(x) @ W, jac, f"W*{self.name}W")


def constant_family(A, d: int = 2, domain: str = "torus", field: Field | str | None = None) -> MatrixFamily:
    A = np.asarray(A)
    n = A.shape[0]
    fld = Field.parse(field) if field is not None else (Field.COMPLEX if np.iscomplexobj(A) else Field.REAL)
    return MatrixFamily(
        d, n, fld, domain,
        lambda x: np.broadcast_to(A, np.shape(x)[:-1] + (n, n)).copy(),
        lambda x: np.zeros((d, n, n), dtype=A.dtype),
        "constant",
    )


# -- built-in families -----------------------------------------------------


def _pauli_combo(coeffs, mats):
    return sum(c[..., None, None] * m for c, m in zip(coeffs, mats))


def _cone_symmetric():
    def ev(x):
        return _pauli_combo([x[..., 0], x[..., 1]], [SIGMA_Z, SIGMA_X])

    return MatrixFamily(2, 2, Field.REAL, "chart", ev, lambda x: np.array([SIGMA_Z, SIGMA_X]), "cone-symmetric")


def _cone_tilted():
    D = np.diag([1.0, 2.0])

    def ev(x):
        return _pauli_combo([x[..., 0], x[..., 1]], [D, SIGMA_X])

    return MatrixFamily(2, 2, Field.REAL, "chart", ev, lambda x: np.array([D, SIGMA_X]), "cone-tilted")


def _borderline():
    def ev(x):
        x1, x2 = x[..., 0], x[..., 1]
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = x1
        out[..., 0, 1] = out[..., 1, 0] = x2
        out[..., 1, 1] = x1 * x2 + x1 ** 2
        return out

    def jac(x):
        x1, x2 = x
        return np.array([[[1.0, 0.0], [0.0, x2 + 2 * x1]], [[0.0, 1.0], [1.0, x1]]])

    return MatrixFamily(2, 2, Field.REAL, "chart", ev, jac, "borderline")


def _real2band():
    def ev(x):
        return _pauli_combo([np.sin(x[..., 0]), np.sin(x[..., 1])], [SIGMA_Z, SIGMA_X])

    def jac(x):
        return np.array([np.cos(x[0]) * SIGMA_Z, np.cos(x[1]) * SIGMA_X])

    return MatrixFamily(2, 2, Field.REAL, "torus", ev, jac, "real2band-t2")


def _weyl():
    mats = [SIGMA_X.astype(complex), SIGMA_Y, SIGMA_Z.astype(complex)]

    def ev(x):
        return _pauli_combo([np.sin(x[..., j]) for j in range(3)], mats)

    def jac(x):
        return np.array([np.cos(x[j]) * mats[j] for j in range(3)])

    return MatrixFamily(3, 2, Field.COMPLEX, "torus", ev, jac, "weyl-t3")


NODAL_RING_WOBBLE = 0.1
NODAL_RING_SHIFT = 0.3


def nodal_ring_curve(s) -> np.ndarray:
    """Analytic nodal line of ``nodal-ring-t3`` through the origin, parametrized by x3."""
    s = np.asarray(s, dtype=float)
    return np.stack([NODAL_RING_WOBBLE * np.sin(s), np.zeros_like(s), s], axis=-1)


def _nodal_ring():
    a, c = NODAL_RING_WOBBLE, NODAL_RING_SHIFT

    def ev(x):
        u = x[..., 0] - a * np.sin(x[..., 2])
        return _pauli_combo([np.sin(u), np.sin(x[..., 1]), c * np.cos(x[..., 2])], [SIGMA_Z, SIGMA_X, ID2])

    def jac(x):
        u = x[0] - a * np.sin(x[2])
        cu = np.cos(u)
        return np.array([
            cu * SIGMA_Z,
            np.cos(x[1]) * SIGMA_X,
            -a * np.cos(x[2]) * cu * SIGMA_Z - c * np.sin(x[2]) * ID2,
        ])

    return MatrixFamily(3, 2, Field.REAL, "torus", ev, jac, "nodal-ring-t3")


def _graphene():
    def ev(x):
        f = 1 + np.exp(1j * x[..., 0]) + np.exp(1j * x[..., 1])
        out = np.zeros(x.shape[:-1] + (2, 2), dtype=complex)
        out[..., 0, 1] = f
        out[..., 1, 0] = np.conj(f)
        return out

    def jac(x):
        out = np.zeros((2, 2, 2), dtype=complex)
        for j in range(2):
            g = 1j * np.exp(1j * x[j])
            out[j, 0, 1] = g
            out[j, 1, 0] = np.conj(g)
        return out

    return MatrixFamily(2, 2, Field.COMPLEX, "torus", ev, jac, "graphene-t2")


def _sym2_identity():
    def ev(x):
        return _pauli_combo([x[..., 0], x[..., 1], x[..., 2]], [ID2, SIGMA_Z, SIGMA_X])

    return MatrixFamily(3, 2, Field.REAL, "chart", ev, lambda x: np.array([ID2, SIGMA_Z, SIGMA_X]), "sym2-identity")


BUILTINS = {
    "cone-symmetric": _cone_symmetric,
    "cone-tilted": _cone_tilted,
    "borderline": _borderline,
    "real2band-t2": _real2band,
    "weyl-t3": _weyl,
    "nodal-ring-t3": _nodal_ring,
    "graphene-t2": _graphene,
    "sym2-identity": _sym2_identity,
}

GRAPHENE_DIRAC_POINTS = np.array([[2 * np.pi / 3, 4 * np.pi / 3], [4 * np.pi / 3, 2 * np.pi / 3]])


def builtin(name: str) -> MatrixFamily:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown builtin family {name!r}; choose from {sorted(BUILTINS)}") from None


# -- trigonometric-polynomial families ----------------------------------------


@dataclass
class TrigTerm:
    harmonic: tuple[int, ...]
    coeff: np.ndarray  # complex n x n; contributes C e^{i m.x} + C^H e^{-i m.x}


@dataclass
class TrigPolySpec:
    """F(x) = constant + sum_m (C_m e^{i m.x} + C_m^H e^{-i m.x}).

    Each harmonic is stored once; its Hermitian conjugate partner is implied,
    so every spec describes a self-adjoint family.  For ``field="real"`` the
    coefficients must be (complex) symmetric, which makes F(x) real.
    """

    d: int
    n: int
    field: Field
    domain: str = "torus"
    terms: list[TrigTerm] = field(default_factory=list)
    constant: Optional[np.ndarray] = None

    def __post_init__(self):
        self.field = Field.parse(self.field)
        if self.constant is None:
            self.constant = np.zeros((self.n, self.n))
        self.constant = np.asarray(self.constant)
        if self.constant.shape != (self.n, self.n):
            raise ValueError("constant term has wrong shape")
        if np.linalg.norm(self.constant - np.conj(self.constant.T)) > 1e-12 * (1 + np.linalg.norm(self.constant)):
            raise ValueError("constant term is not self-adjoint")
        if self.field is Field.REAL and np.any(np.abs(np.imag(self.constant)) > 0):
            raise ValueError("field mismatch: complex constant term in a real family")
        for t in self.terms:
            t.coeff = np.asarray(t.coeff, dtype=complex)
            t.harmonic = tuple(int(m) for m in t.harmonic)
            if t.coeff.shape != (self.n, self.n) or len(t.harmonic) != self.d:
                raise ValueError("term has wrong shape")
            if self.field is Field.REAL and np.linalg.norm(t.coeff - t.coeff.T) > 1e-12 * (1 + np.linalg.norm(t.coeff)):
                raise ValueError("field mismatch: real families need symmetric coefficients")


def from_spec(spec: TrigPolySpec) -> MatrixFamily:
    if not spec.terms:
        M = np.zeros((0, spec.d), dtype=float)
        C = np.zeros((0, spec.n, spec.n), dtype=complex)
    else:
        M = np.array([t.harmonic for t in spec.terms], dtype=float)
        C = np.array([t.coeff for t in spec.terms])
    CH = np.conj(np.swapaxes(C, -1, -2))
    const = spec.constant
    real = spec.field is Field.REAL

    def ev(x):
        phase = np.exp(1j * (x @ M.T))  # (..., T)
        A = np.einsum("...t,tij->...ij", phase, C) + np.einsum("...t,tij->...ij", np.conj(phase), CH)
        A = A + const
        return A.real if real else A

    def jac(x):
        phase = np.exp(1j * (M @ x))  # (T,)
        out = 1j * (np.einsum("tj,t,tab->jab", M, phase, C) - np.einsum("tj,t,tab->jab", M, np.conj(phase), CH))
        return out.real if real else out

    return MatrixFamily(spec.d, spec.n, spec.field, spec.domain, ev, jac, "trigpoly")


def random_family(seed: int, d: int, n: int, field: Field | str = "real", max_harmonic: int = 1,
                  amplitude: float = 1.0) -> MatrixFamily:
    """Random trigonometric-polynomial family with i.i.d. uniform coefficients."""
    if max_harmonic < 1:
        raise ValueError("max_harmonic must be >= 1")
    spec = random_spec(seed, d, n, field, max_harmonic, amplitude)
    fam = from_spec(spec)
    return MatrixFamily(fam.d, fam.n, fam.field, fam.domain, fam.evaluate_fn, fam.jacobian_fn,
                        f"random(seed={seed})")


def _one_sided_harmonics(d: int, H: int) -> list[tuple[int, ...]]:
    import itertools

    out = []
    for m in itertools.product(range(-H, H + 1), repeat=d):
        nz = [c for c in m if c != 0]
        if nz and nz[0] > 0:
            out.append(m)
    return out


def random_spec(seed: int, d: int, n: int, field: Field | str = "real", max_harmonic: int = 1,
                amplitude: float = 1.0) -> TrigPolySpec:
    field = Field.parse(field)
    rng = np.random.default_rng(seed)

    def draw():
        A = rng.uniform(-amplitude, amplitude, (n, n))
        if field is Field.COMPLEX:
            B = rng.uniform(-amplitude, amplitude, (n, n))
            return A + 1j * B
        B = rng.uniform(-amplitude, amplitude, (n, n))
        return 0.5 * (A + A.T) + 0.5j * (B + B.T)

    const = draw()
    const = 0.5 * (const + np.conj(const.T))
    if field is Field.REAL:
        const = const.real
    terms = [TrigTerm(m, 0.5 * draw()) for m in _one_sided_harmonics(d, max_harmonic)]
    return TrigPolySpec(d, n, field, "torus", terms, const)


# -- JSON ingestion --------------------------------------------------------------

_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_CMATRIX = {
    "type": "object",
    "properties": {"re": _MATRIX, "im": _MATRIX},
    "required": ["re"],
    "additionalProperties": False,
}

FAMILY_SCHEMA = {
    "type": "object",
    "properties": {
        "d": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "field": {"enum": ["real", "complex"]},
        "domain": {"enum": ["torus", "chart"]},
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "m": {"type": "array", "items": {"type": "integer"}},
                    "re": _MATRIX,
                    "im": _MATRIX,
                },
                "required": ["m", "re"],
                "additionalProperties": False,
            },
        },
        "constant": _CMATRIX,
    },
    "required": ["d", "n", "field"],
    "additionalProperties": False,
}


def _cmatrix(obj, n):
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros((n, n))), dtype=float)
    if re.shape != (n, n) or im.shape != (n, n):
        raise ValueError(f"matrix must be {n}x{n}")
    return re + 1j * im


def spec_from_dict(data: dict) -> TrigPolySpec:
    jsonschema.validate(data, FAMILY_SCHEMA)
    n = data["n"]
    field_ = Field.parse(data["field"])
    terms = [TrigTerm(tuple(t["m"]), _cmatrix(t, n)) for t in data.get("terms", [])]
    const = _cmatrix(data["constant"], n) if "constant" in data else np.zeros((n, n))
    if field_ is Field.REAL:
        if np.any(const.imag != 0):
            raise ValueError("field mismatch: complex constant term in a real family")
        const = const.real
    return TrigPolySpec(data["d"], n, field_, data.get("domain", "torus"), terms, const)


def spec_to_dict(spec: TrigPolySpec) -> dict:
    def cm(A):
        A = np.asarray(A, dtype=complex)
        return {"re": A.real.tolist(), "im": A.imag.tolist()}

    return {
        "d": spec.d,
        "n": spec.n,
        "field": spec.field.value,
        "domain": spec.domain,
        "terms": [{"m": list(t.harmonic), **cm(t.coeff)} for t in spec.terms],
        "constant": cm(spec.constant),
    }


def load_spec(path: str | Path) -> TrigPolySpec:
    return spec_from_dict(json.loads(Path(path).read_text()))


def save_spec(spec: TrigPolySpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2))


def resolve_family(name_or_path: str) -> MatrixFamily:
    """Builtin name, or path to a JSON family spec."""
    if name_or_path in BUILTINS:
        return builtin(name_or_path)
    p = Path(name_or_path)
    if p.suffix == ".json" or p.exists():
        fam = from_spec(load_spec(p))
        return MatrixFamily(fam.d, fam.n, fam.field, fam.domain, fam.evaluate_fn, fam.jacobian_fn, p.stem)
    raise ValueError(f"unknown family {name_or_path!r}")
