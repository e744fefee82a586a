"""Exact integer polynomials and the closed-form Morse/Poincare polynomials.

Polynomials are in a single variable ``t`` with arbitrary-precision integer
coefficients (plain Python ints), stored lowest degree first.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable


class Field(enum.Enum):
    REAL = "real"
    COMPLEX = "complex"

    @classmethod
    def parse(cls, value: "Field | str") -> "Field":
        if isinstance(value, Field):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown field {value!r}; expected 'real' or 'complex'") from None


@dataclass(frozen=True)
class IntPoly:
    """Polynomial with integer coefficients; ``coeffs[j]`` multiplies ``t**j``.

    The zero polynomial has an empty coefficient tuple and ``degree == -1``
    (used as the "minus infinity" sentinel).
    """

    coeffs: tuple[int, ...] = ()

    def __post_init__(self):
        cs = [int(c) for c in self.coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    @classmethod
    def monomial(cls, power: int, coeff: int = 1) -> "IntPoly":
        if power < 0:
            raise ValueError("negative exponent")
        return cls((0,) * power + (coeff,))

    @classmethod
    def one(cls) -> "IntPoly":
        return cls((1,))

    @classmethod
    def zero(cls) -> "IntPoly":
        return cls(())

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, j: int) -> int:
        return self.coeffs[j] if 0 <= j < len(self.coeffs) else 0

    def __add__(self, other: "IntPoly") -> "IntPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        return IntPoly(tuple(self.coeff(j) + other.coeff(j) for j in range(n)))

    def __neg__(self) -> "IntPoly":
        return IntPoly(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "IntPoly") -> "IntPoly":
        return self + (-other)

    def __mul__(self, other: "IntPoly | int") -> "IntPoly":
        if isinstance(other, int):
            return IntPoly(tuple(other * c for c in self.coeffs))
        if self.is_zero() or other.is_zero():
            return IntPoly()
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return IntPoly(tuple(out))

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "IntPoly":
        if e < 0:
            raise ValueError("negative power")
        out = IntPoly.one()
        for _ in range(e):
            out = out * self
        return out

    def shift(self, m: int) -> "IntPoly":
        """Multiply by ``t**m``."""
        if self.is_zero():
            return self
        return IntPoly((0,) * m + self.coeffs)

    def scale_exponent(self, m: int) -> "IntPoly":
        """Substitute ``t -> t**m``."""
        if m < 1:
            raise ValueError("scale_exponent requires m >= 1")
        if self.is_zero():
            return self
        out = [0] * (m * self.degree + 1)
        for j, c in enumerate(self.coeffs):
            out[m * j] = c
        return IntPoly(tuple(out))

    def __call__(self, t):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return acc

    def divmod_exact(self, divisor: "IntPoly") -> "IntPoly":
        """Exact quotient by a monic-leading divisor; raises if not divisible."""
        if divisor.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        lead = divisor.coeffs[-1]
        rem = list(self.coeffs)
        dq = len(rem) - len(divisor.coeffs)
        if dq < 0:
            if rem:
                raise ArithmeticError("polynomial not exactly divisible")
            return IntPoly()
        quot = [0] * (dq + 1)
        for j in range(dq, -1, -1):
            c, r = divmod(rem[j + len(divisor.coeffs) - 1], lead)
            if r:
                raise ArithmeticError("polynomial not exactly divisible over the integers")
            quot[j] = c
            for i, b in enumerate(divisor.coeffs):
                rem[i + j] -= c * b
        if any(rem):
            raise ArithmeticError("polynomial not exactly divisible")
        return IntPoly(tuple(quot))

    def nonnegative(self) -> bool:
        return all(c >= 0 for c in self.coeffs)

    def to_list(self) -> list[int]:
        return list(self.coeffs)

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        parts = []
        for j, c in enumerate(self.coeffs):
            if c == 0:
                continue
            if j == 0:
                body = str(abs(c))
            else:
                mono = "t" if j == 1 else f"t^{j}"
                body = mono if abs(c) == 1 else f"{abs(c)}{mono}"
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        first_sign, first_body = parts[0]
        text = ("-" if first_sign == "-" else "") + first_body
        for sign, body in parts[1:]:
            text += sign + body
        return text

    def __repr__(self) -> str:
        return f"IntPoly({str(self)!r})"

    @classmethod
    def parse(cls, text: str) -> "IntPoly":
        """Inverse of ``str``: parses strings such as ``"3+2t-t^4"``."""
        s = text.replace(" ", "")
        if s in ("", "0"):
            return cls()
        terms: dict[int, int] = {}
        i = 0
        while i < len(s):
            sign = 1
            if s[i] in "+-":
                sign = -1 if s[i] == "-" else 1
                i += 1
            j = i
            while j < len(s) and s[j].isdigit():
                j += 1
            coeff = int(s[i:j]) if j > i else 1
            power = 0
            if j < len(s) and s[j] == "t":
                j += 1
                power = 1
                if j < len(s) and s[j] == "^":
                    k = j + 1
                    while k < len(s) and s[k].isdigit():
                        k += 1
                    power = int(s[j + 1:k])
                    j = k
            elif j == i:
                raise ValueError(f"cannot parse polynomial {text!r}")
            terms[power] = terms.get(power, 0) + sign * coeff
            i = j
        deg = max(terms)
        return cls(tuple(terms.get(p, 0) for p in range(deg + 1)))


ONE = IntPoly.one()
ZERO = IntPoly.zero()
T = IntPoly.monomial(1)


def add(p: IntPoly, q: IntPoly) -> IntPoly:
    return p + q


def mul(p: IntPoly, q: IntPoly) -> IntPoly:
    return p * q


def scale_exponent(p: IntPoly, m: int) -> IntPoly:
    return p.scale_exponent(m)


@lru_cache(maxsize=None)
def qbinom(n: int, k: int) -> IntPoly:
    """Gaussian binomial coefficient via ``[n,k] = [n-1,k-1] + q^k [n-1,k]``."""
    if n < 0 or k < 0 or k > n:
        return ZERO
    if k == 0 or k == n:
        return ONE
    return qbinom(n - 1, k - 1) + qbinom(n - 1, k).shift(k)


def _qbinom_half(n2: int, k2: int, m: int) -> IntPoly:
    # binomials whose arguments are written as halves in the closed forms
    if n2 % 2 or k2 % 2:
        raise ValueError("non-integral q-binomial argument")
    return qbinom(n2 // 2, k2 // 2).scale_exponent(m)


def s_codim(i: int, field: Field | str) -> int:
    """Real dimension of Sym_i(F) minus one."""
    field = Field.parse(field)
    if i < 1:
        raise ValueError("s_codim requires i >= 1")
    if field is Field.REAL:
        return i * (i + 1) // 2 - 1
    return i * i - 1


def sym_dim(nu: int, field: Field | str) -> int:
    return s_codim(nu, field) + 1


def poincare_grassmannian(k: int, n: int, field: Field | str, oriented: bool = False) -> IntPoly:
    """Poincare polynomial (rational Betti numbers) of Gr_F(k, n).

    With ``oriented=True`` (real field only) the oriented Grassmannian is used.
    ``Gr(0, n)`` and ``Gr(n, n)`` are points, oriented or not.
    """
    field = Field.parse(field)
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    if oriented and field is Field.COMPLEX:
        raise ValueError("oriented Grassmannians are only defined over the reals")
    if k == 0 or k == n:
        return ONE
    if field is Field.COMPLEX:
        return qbinom(n, k).scale_exponent(2)
    if not oriented:
        if (k * (n - k)) % 2 == 0:
            return qbinom(n // 2, k // 2).scale_exponent(4)
        # k and n - k odd, so n even
        return (ONE + IntPoly.monomial(n - 1)) * _qbinom_half(n - 2, k - 1, 4)
    if k % 2 == 0 and n % 2 == 1:
        k = n - k
    if k % 2 == 1 and n % 2 == 1:
        return (ONE + IntPoly.monomial(n - k)) * _qbinom_half(n - 1, k - 1, 4)
    if k % 2 == 1:
        return (ONE + IntPoly.monomial(n - 1)) * _qbinom_half(n - 2, k - 1, 4)
    num = (ONE + IntPoly.monomial(k)) * (ONE + IntPoly.monomial(n - k)) * _qbinom_half(n, k, 4)
    return num.divmod_exact(ONE + IntPoly.monomial(n))


def twisted_poincare(k: int, n: int) -> IntPoly:
    """Betti polynomial of Gr_R(k, n) with orientation-twisted coefficients."""
    diff = poincare_grassmannian(k, n, Field.REAL, oriented=True) - poincare_grassmannian(
        k, n, Field.REAL, oriented=False
    )
    if not diff.nonnegative():
        raise AssertionError(f"negative twisted Betti number for Gr({k},{n}): {diff}")
    return diff


def nonsmooth_contribution(nu: int, i: int, field: Field | str) -> IntPoly:
    """Family-independent Morse contribution of a point with multiplicity ``nu``
    and relative index ``i`` (the smooth index is factored out)."""
    field = Field.parse(field)
    if nu < 1 or i < 1 or i > nu:
        raise ValueError(f"need 1 <= i <= nu, got nu={nu}, i={i}")
    s = s_codim(i, field)
    if field is Field.COMPLEX:
        return qbinom(nu - 1, i - 1).scale_exponent(2).shift(s)
    if i % 2 == 1:
        return qbinom((nu - 1) // 2, (i - 1) // 2).scale_exponent(4).shift(s)
    if nu % 2 == 1:
        return ZERO
    return qbinom(nu // 2 - 1, i // 2 - 1).scale_exponent(4).shift(s + nu - i)


def z2_contribution(nu: int, i: int, mu: int) -> IntPoly:
    """Z_2 Betti polynomial of the local Morse data at a real critical point."""
    if nu < 1 or i < 1 or i > nu:
        raise ValueError(f"need 1 <= i <= nu, got nu={nu}, i={i}")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return qbinom(nu - 1, i - 1).shift(mu + s_codim(i, Field.REAL))


def torus_poincare(d: int) -> IntPoly:
    if d < 1:
        raise ValueError("torus dimension must be >= 1")
    return (ONE + T) ** d


@dataclass(frozen=True)
class MorseDivision:
    """Outcome of checking ``P_morse - P_M = (1 + t) R`` with ``R >= 0``."""

    satisfied: bool
    remainder: IntPoly | None = None
    offending_degree: int | None = None

    def __str__(self) -> str:
        if self.satisfied:
            return f"Satisfied({self.remainder})"
        return f"Violated(degree {self.offending_degree})"


def morse_division(p_morse: IntPoly, p_manifold: IntPoly) -> MorseDivision:
    diff = p_morse - p_manifold
    if diff.is_zero():
        return MorseDivision(True, ZERO)
    a = diff.coeffs
    q: list[int] = []
    prev = 0
    for j in range(len(a) - 1):
        qj = a[j] - prev
        if qj < 0:
            return MorseDivision(False, offending_degree=j)
        q.append(qj)
        prev = qj
    if a[-1] != prev:
        return MorseDivision(False, offending_degree=len(a) - 1)
    return MorseDivision(True, IntPoly(tuple(q)))


def dominates(p: IntPoly, q: IntPoly) -> bool:
    """Coefficientwise ``p >= q``."""
    return (p - q).nonnegative()


def contribution_table(max_nu: int, field: Field | str) -> list[list[IntPoly]]:
    if max_nu < 1:
        raise ValueError("max_nu must be >= 1")
    return [[nonsmooth_contribution(nu, i, field) for i in range(1, nu + 1)] for nu in range(1, max_nu + 1)]


def emit_table(max_nu: int, field: Field | str, fmt: str = "md") -> str:
    """Render the table of nonsmooth contributions as markdown or CSV."""
    rows = contribution_table(max_nu, field)
    if fmt == "csv":
        lines = ["nu," + ",".join(f"i={i}" for i in range(1, max_nu + 1))]
        for nu, row in enumerate(rows, start=1):
            cells = [str(p) for p in row] + [""] * (max_nu - nu)
            lines.append(f"{nu}," + ",".join(cells))
        return "\n".join(lines) + "\n"
    if fmt != "md":
        raise ValueError(f"unknown table format {fmt!r}")
    header = "| nu \\ i | " + " | ".join(str(i) for i in range(1, max_nu + 1)) + " |"
    sep = "|" + "---|" * (max_nu + 1)
    lines = [header, sep]
    for nu, row in enumerate(rows, start=1):
        cells = [str(p) for p in row] + [""] * (max_nu - nu)
        lines.append(f"| {nu} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def parse_table(text: str, fmt: str = "md") -> list[list[IntPoly]]:
    """Read back a table written by :func:`emit_table`."""
    out = []
    for line in text.strip().splitlines()[(1 if fmt == "csv" else 2):]:
        if fmt == "csv":
            cells = line.split(",")[1:]
        else:
            cells = [c.strip() for c in line.strip().strip("|").split("|")][1:]
        out.append([IntPoly.parse(c) for c in cells if c.strip() != ""])
    return out


def sum_polys(polys: Iterable[IntPoly]) -> IntPoly:
    acc = ZERO
    for p in polys:
        acc = acc + p
    return acc
