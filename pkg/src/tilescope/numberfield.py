"""Exact coordinate arithmetic and algebraic-number classification.

Everything downstream (digit sets, tile shifts, return vectors, candidate
dynamical eigenvalues) is a rational combination of a small declared set of
real numbers, the coordinate basis.  Keeping coordinates in that form makes
point dedup, translation matching and module computations exact rational
linear algebra instead of float comparisons.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import mpmath
import numpy as np

F0 = Fraction(0)
F1 = Fraction(1)

#: tuple of Fractions over the basis symbols; length = number of symbols
Scalar = tuple


class NumberFieldError(ValueError):
    """Bad algebraic input: non-monic/reducible polynomial, bad isolation."""


class ProductTableError(NumberFieldError):
    """A basis product needed by an operation is not declared."""


class UndecidedError(NumberFieldError):
    """A conjugate sits too close to the unit circle to classify safely."""


# --------------------------------------------------------------------------
# minimal polynomials and algebraic scalars
# --------------------------------------------------------------------------


def _divisors(n: int) -> list[int]:
    n = abs(n)
    out = []
    for k in range(1, int(math.isqrt(n)) + 1):
        if n % k == 0:
            out.append(k)
            if k != n // k:
                out.append(n // k)
    return sorted(out)


def _poly_eval_int(coeffs: Sequence[int], x: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _poly_divmod(num: Sequence[Fraction], den: Sequence[Fraction]):
    """Division of polynomials given constant-to-leading; returns (quot, rem)."""
    num = list(num)
    den = list(den)
    while den and den[-1] == 0:
        den.pop()
    if not den:
        raise ZeroDivisionError("polynomial division by zero")
    quot = [F0] * max(len(num) - len(den) + 1, 0)
    rem = [Fraction(c) for c in num]
    for i in range(len(quot) - 1, -1, -1):
        if len(rem) < len(den) + i:
            continue
        q = rem[len(den) + i - 1] / den[-1]
        quot[i] = q
        for j, d in enumerate(den):
            rem[i + j] -= q * d
        while rem and rem[-1] == 0:
            rem.pop()
    return quot, rem


def _has_integer_factor(coeffs: Sequence[int], degree: int, budget: int = 50000) -> bool:
    """Kronecker trial factorization: look for a monic integer factor of the
    given degree.  Only meaningful after the rational-root test has run."""
    pts = list(range(-(degree // 2), degree - (degree // 2) + 1))  # degree+1 points
    values = [_poly_eval_int(coeffs, x) for x in pts]
    if any(v == 0 for v in values):
        return True
    choice_lists = []
    for v in values:
        divs = _divisors(v)
        choice_lists.append([d for base in divs for d in (base, -base)])
    total = 1
    for lst in choice_lists:
        total *= len(lst)
        if total > budget:
            raise NumberFieldError(
                "irreducibility check exceeded its search budget "
                f"(degree {len(coeffs) - 1}, coefficient size too large)"
            )
    for combo in itertools.product(*choice_lists):
        # Lagrange interpolation through (pts, combo)
        cand = [F0] * (degree + 1)
        for i, (xi, yi) in enumerate(zip(pts, combo)):
            term = [Fraction(yi)]
            for j, xj in enumerate(pts):
                if j == i:
                    continue
                # term *= (x - xj) / (xi - xj)
                scale = Fraction(1, xi - xj)
                new = [F0] * (len(term) + 1)
                for k, c in enumerate(term):
                    new[k] += -xj * c * scale
                    new[k + 1] += c * scale
                term = new
            for k, c in enumerate(term):
                cand[k] += c
        if cand[degree] == 0:
            continue
        if any(c.denominator != 1 for c in cand):
            continue
        if abs(cand[degree]) != 1:
            continue
        _, rem = _poly_divmod([Fraction(c) for c in coeffs], cand)
        if not rem:
            return True
    return False


@dataclass(frozen=True)
class MinimalPolynomial:
    """Monic integer polynomial, irreducible over the rationals.

    Coefficients are stored constant-to-leading.
    """

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(int(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) < 2:
            raise NumberFieldError("minimal polynomial must have degree >= 1")
        if coeffs[-1] != 1:
            raise NumberFieldError(f"polynomial is not monic: leading {coeffs[-1]}")
        self._check_irreducible()

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def _check_irreducible(self):
        coeffs = self.coefficients
        deg = self.degree
        if deg == 1:
            return
        if deg > 8:
            raise NumberFieldError("polynomials above degree 8 are out of scope")
        if coeffs[0] == 0:
            raise NumberFieldError("reducible: x divides the polynomial")
        # rational roots of a monic integer polynomial are integer divisors
        # of the constant term
        for d in _divisors(coeffs[0]):
            for r in (d, -d):
                if _poly_eval_int(coeffs, r) == 0:
                    raise NumberFieldError(f"reducible: integer root {r}")
        for k in range(2, deg // 2 + 1):
            if _has_integer_factor(coeffs, k):
                raise NumberFieldError(f"reducible: degree-{k} integer factor found")

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def derivative(self, x):
        acc = 0
        n = self.degree
        for i in range(n, 0, -1):
            acc = acc * x + i * self.coefficients[i]
        return acc

    def __str__(self):
        return " + ".join(
            f"{c}*x^{i}" for i, c in enumerate(self.coefficients) if c
        )


def conjugates(p: MinimalPolynomial, dps: int = 40) -> list[complex]:
    """All deg(p) complex roots of a monic irreducible integer polynomial.

    Roots come from mpmath's simultaneous solver with extra working precision,
    so each is accurate well below 1e-12 for the degree <= 8 inputs in scope.
    """
    with mpmath.workdps(dps):
        roots = mpmath.polyroots(
            [mpmath.mpf(c) for c in reversed(p.coefficients)],
            maxsteps=200,
            extraprec=120,
        )
        return [complex(r) for r in roots]


def _conjugates_mp(p: MinimalPolynomial, dps: int):
    with mpmath.workdps(dps):
        return mpmath.polyroots(
            [mpmath.mpf(c) for c in reversed(p.coefficients)],
            maxsteps=300,
            extraprec=2 * dps,
        )


@dataclass(frozen=True)
class AlgebraicScalar:
    """A single root of a minimal polynomial, pinned by an isolation disk."""

    minpoly: MinimalPolynomial
    approx: complex
    isolation_radius: float

    def __post_init__(self):
        object.__setattr__(self, "approx", complex(self.approx))
        if self.isolation_radius <= 0:
            raise NumberFieldError("isolation radius must be positive")
        roots = conjugates(self.minpoly)
        inside = [r for r in roots if abs(r - self.approx) < self.isolation_radius]
        if len(inside) != 1:
            raise NumberFieldError(
                f"isolation disk around {self.approx} contains {len(inside)} roots "
                f"of {self.minpoly}, expected exactly 1"
            )
        object.__setattr__(self, "_root", inside[0])

    @property
    def root(self) -> complex:
        return self._root  # type: ignore[attr-defined]

    @property
    def is_real(self) -> bool:
        return abs(self.root.imag) < 1e-15

    def value_mp(self, dps: int = 30):
        """Refine the isolated root to `dps` decimal digits (Newton)."""
        with mpmath.workdps(dps + 10):
            x = mpmath.mpc(self.root)
            for _ in range(120):
                fx = self.minpoly(x)
                dfx = self.minpoly.derivative(x)
                step = fx / dfx
                x = x - step
                if abs(step) < mpmath.mpf(10) ** (-(dps + 5)):
                    break
            if abs(mpmath.im(x)) < mpmath.mpf(10) ** (-(dps)):
                return mpmath.re(x)
            return x

    def same_root(self, other: "AlgebraicScalar") -> bool:
        return (
            self.minpoly.coefficients == other.minpoly.coefficients
            and abs(self.root - other.root) < 1e-9
        )

    def matches(self, value: complex) -> bool:
        return abs(value - self.root) < self.isolation_radius

    def __str__(self):
        if self.is_real:
            return f"{self.root.real:.6f}"
        return f"{self.root:.6f}"


def rational_scalar_value(q: Union[int, Fraction]) -> AlgebraicScalar:
    """Wrap an integer as a degree-1 AlgebraicScalar (root of x - q)."""
    q = Fraction(q)
    if q.denominator != 1:
        raise NumberFieldError("only integers embed as algebraic integers")
    n = q.numerator
    return AlgebraicScalar(MinimalPolynomial((-n, 1)), complex(n), 0.5)


# --------------------------------------------------------------------------
# Pisot classification
# --------------------------------------------------------------------------

#: conjugates with modulus inside this band around 1 refuse classification
UNIT_CIRCLE_BAND = 1e-9


@dataclass(frozen=True)
class PisotVerdict:
    is_pisot: bool
    margin: float


def _guard_unit_circle(modulus: float):
    if abs(modulus - 1.0) < UNIT_CIRCLE_BAND:
        raise UndecidedError(
            f"conjugate modulus {modulus!r} is within {UNIT_CIRCLE_BAND} of the "
            "unit circle; refusing to classify"
        )


def is_pisot(theta: AlgebraicScalar) -> PisotVerdict:
    """Pisot test for a real algebraic integer larger than 1.

    Pisot iff every other conjugate lies strictly inside the unit disk;
    the margin is 1 minus the largest other-conjugate modulus (1.0 when the
    polynomial is linear, negative when the verdict is NotPisot).
    """
    if not theta.is_real or theta.root.real <= 1.0:
        raise NumberFieldError(
            f"is_pisot requires a real scalar > 1, got {theta.approx}"
        )
    others = _other_conjugates(theta)
    if not others:
        return PisotVerdict(True, 1.0)
    worst = max(abs(c) for c in others)
    _guard_unit_circle(worst)
    return PisotVerdict(worst < 1.0, 1.0 - worst)


def _other_conjugates(theta: AlgebraicScalar) -> list[complex]:
    roots = conjugates(theta.minpoly)
    roots.sort(key=lambda r: abs(r - theta.root))
    if not theta.matches(roots[0]):
        raise NumberFieldError("isolated root drifted outside its disk")
    return roots[1:]


def is_pisot_family(thetas: Sequence[AlgebraicScalar]) -> bool:
    """True iff each member's Galois conjugates of modulus >= 1 all belong
    to the set (membership by minimal polynomial and isolation disk)."""
    if not thetas:
        raise NumberFieldError("empty set has no Pisot-family verdict")
    for theta in thetas:
        for conj in _large_conjugates(theta):
            if not _member(conj, theta.minpoly, thetas):
                return False
    return True


def is_totally_non_pisot(thetas: Sequence[AlgebraicScalar]) -> bool:
    """True iff no subset is a Pisot family.

    The minimal conjugate-closed-above-modulus-1 set containing theta is
    exactly theta's set of large conjugates, so it suffices to check that
    for every member some large conjugate is missing from the set.
    """
    if not thetas:
        raise NumberFieldError("empty set has no verdict")
    for theta in thetas:
        if all(
            _member(conj, theta.minpoly, thetas) for conj in _large_conjugates(theta)
        ):
            return False
    return True


def _large_conjugates(theta: AlgebraicScalar) -> list[complex]:
    out = []
    for c in conjugates(theta.minpoly):
        _guard_unit_circle(abs(c))
        if abs(c) > 1.0:
            out.append(c)
    return out


def _member(value: complex, minpoly: MinimalPolynomial, thetas) -> bool:
    hits = [
        t
        for t in thetas
        if t.minpoly.coefficients == minpoly.coefficients and t.matches(value)
    ]
    if len(hits) > 1 and not all(h.same_root(hits[0]) for h in hits):
        raise UndecidedError(
            f"two distinct declared scalars both isolate {value}; "
            "tighten the isolation radii"
        )
    return bool(hits)


# --------------------------------------------------------------------------
# free symbols, coordinate bases
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineSqrtWitness:
    """Numeric stand-in p + q*sqrt(r) for a declared free symbol."""

    p: Fraction
    q: Fraction
    r: int

    def value_mp(self, dps: int = 30):
        with mpmath.workdps(dps + 5):
            return mpmath.mpf(self.p.numerator) / self.p.denominator + (
                mpmath.mpf(self.q.numerator) / self.q.denominator
            ) * mpmath.sqrt(self.r)

    def __str__(self):
        return f"{self.p}+{self.q}*sqrt({self.r})"


@dataclass(frozen=True)
class DecimalWitness:
    text: str

    def value_mp(self, dps: int = 30):
        if dps > len(self.text):
            dps = len(self.text)
        with mpmath.workdps(dps + 5):
            return mpmath.mpf(self.text)

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class ProductWitness:
    """Value of a symbol defined as the product of two earlier symbols."""

    left: str
    right: str

    def __str__(self):
        return f"{self.left}*{self.right}"


@dataclass(frozen=True)
class BasisSymbol:
    name: str
    algebraic: Optional[AlgebraicScalar] = None
    witness: object = None  # AffineSqrtWitness | DecimalWitness | ProductWitness

    @property
    def is_unit(self) -> bool:
        return self.name == "1"

    @property
    def is_free(self) -> bool:
        return self.witness is not None and self.algebraic is None


class CoordinateBasis:
    """Ordered real values beta_1..beta_s with beta_1 = 1 and a partial
    product table expressing beta_i*beta_j back in the basis."""

    def __init__(self, symbols: Sequence[BasisSymbol], products: dict | None = None):
        symbols = tuple(symbols)
        if not symbols or not symbols[0].is_unit:
            raise NumberFieldError("first basis symbol must be the unit '1'")
        names = [s.name for s in symbols]
        if len(set(names)) != len(names):
            raise NumberFieldError("duplicate basis symbol names")
        for s in symbols[1:]:
            if s.algebraic is None and s.witness is None:
                raise NumberFieldError(
                    f"symbol {s.name!r} needs algebraic data or a numeric witness"
                )
            if s.algebraic is not None and s.algebraic.minpoly.degree < 2:
                raise NumberFieldError(
                    f"symbol {s.name!r} is rational; fold it into coefficients"
                )
        self.symbols = symbols
        self.names = tuple(names)
        self._index = {n: i for i, n in enumerate(names)}
        self.size = len(symbols)
        table = {}
        for key, scal in (products or {}).items():
            i, j = key
            if isinstance(i, str):
                i = self._index[i]
            if isinstance(j, str):
                j = self._index[j]
            i, j = min(i, j), max(i, j)
            table[(i, j)] = self._coerce_scalar(scal)
        self.products = table
        self._float_cache = None
        self._mp_cache = {}
        self._check_product_identities()

    # -- numeric evaluation -------------------------------------------------

    def _symbol_value_mp(self, idx: int, dps: int):
        sym = self.symbols[idx]
        if sym.is_unit:
            return mpmath.mpf(1)
        if sym.algebraic is not None:
            return sym.algebraic.value_mp(dps)
        w = sym.witness
        if isinstance(w, ProductWitness):
            return self._symbol_value_mp(self._index[w.left], dps) * self._symbol_value_mp(
                self._index[w.right], dps
            )
        return w.value_mp(dps)

    def values_mp(self, dps: int = 30):
        if dps not in self._mp_cache:
            with mpmath.workdps(dps + 5):
                self._mp_cache[dps] = [
                    self._symbol_value_mp(i, dps) for i in range(self.size)
                ]
        return self._mp_cache[dps]

    @property
    def float_values(self) -> np.ndarray:
        if self._float_cache is None:
            self._float_cache = np.array(
                [float(v) for v in self.values_mp(30)], dtype=float
            )
        return self._float_cache

    def _check_product_identities(self):
        vals = self.values_mp(30)
        for (i, j), scal in self.products.items():
            lhs = vals[i] * vals[j]
            rhs = sum(
                (mpmath.mpf(c.numerator) / c.denominator) * vals[k]
                for k, c in enumerate(scal)
            )
            if abs(lhs - rhs) > 1e-12 * max(1.0, abs(lhs)):
                raise NumberFieldError(
                    f"product table identity {self.names[i]}*{self.names[j]} "
                    f"fails numerically: {float(lhs)} vs {float(rhs)}"
                )

    # -- scalar helpers ------------------------------------------------------

    def _coerce_scalar(self, obj) -> Scalar:
        if isinstance(obj, tuple) and len(obj) == self.size:
            return tuple(Fraction(c) for c in obj)
        if isinstance(obj, dict):
            out = [F0] * self.size
            for name, c in obj.items():
                out[self._index[name]] = Fraction(c)
            return tuple(out)
        raise NumberFieldError(f"cannot coerce {obj!r} to a basis scalar")

    def index(self, name: str) -> int:
        return self._index[name]

    def zero_scalar(self) -> Scalar:
        return (F0,) * self.size

    def rational(self, q) -> Scalar:
        return (Fraction(q),) + (F0,) * (self.size - 1)

    def unit_scalar(self, idx: int, coeff=F1) -> Scalar:
        out = [F0] * self.size
        out[idx] = Fraction(coeff)
        return tuple(out)

    def scalar_from_map(self, mapping: dict) -> Scalar:
        return self._coerce_scalar(mapping)

    def add(self, u: Scalar, v: Scalar) -> Scalar:
        return tuple(a + b for a, b in zip(u, v))

    def neg(self, u: Scalar) -> Scalar:
        return tuple(-a for a in u)

    def scale(self, u: Scalar, q) -> Scalar:
        q = Fraction(q)
        return tuple(a * q for a in u)

    def multiply(self, u: Scalar, v: Scalar) -> Scalar:
        """Product of two scalars through the declared product table."""
        out = [F0] * self.size
        for i, a in enumerate(u):
            if a == 0:
                continue
            for j, b in enumerate(v):
                if b == 0:
                    continue
                c = a * b
                if i == 0:
                    out[j] += c
                elif j == 0:
                    out[i] += c
                else:
                    key = (min(i, j), max(i, j))
                    prod = self.products.get(key)
                    if prod is None:
                        raise ProductTableError(
                            f"product {self.names[i]}*{self.names[j]} is not in "
                            "the declared product table"
                        )
                    for k, pc in enumerate(prod):
                        out[k] += c * pc
        return tuple(out)

    def eval_scalar(self, u: Scalar) -> float:
        return float(np.dot([float(c) for c in u], self.float_values))

    def eval_scalar_mp(self, u: Scalar, dps: int = 30):
        vals = self.values_mp(dps)
        with mpmath.workdps(dps + 5):
            return sum(
                (mpmath.mpf(c.numerator) / c.denominator) * vals[k]
                for k, c in enumerate(u)
            )

    def is_rational(self, u: Scalar) -> bool:
        return all(c == 0 for c in u[1:])

    def scalar_str(self, u: Scalar) -> str:
        parts = []
        for name, c in zip(self.names, u):
            if c == 0:
                continue
            if name == "1":
                parts.append(str(c))
            elif c == 1:
                parts.append(name)
            elif c == -1:
                parts.append(f"-{name}")
            else:
                parts.append(f"{c}*{name}")
        return " + ".join(parts).replace("+ -", "- ") if parts else "0"

    def __eq__(self, other):
        return isinstance(other, CoordinateBasis) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"CoordinateBasis({', '.join(self.names)})"


# --------------------------------------------------------------------------
# symbolic vectors
# --------------------------------------------------------------------------


class SymbolicVector:
    """Point of R^d whose coordinates are rational combinations of the basis.

    Equality and hashing use the exact coefficient matrix only; two vectors
    are the same point iff their coefficients agree.
    """

    __slots__ = ("basis", "coeffs", "_hash", "_float")

    def __init__(self, basis: CoordinateBasis, coeffs):
        self.basis = basis
        self.coeffs = tuple(
            tuple(Fraction(c) for c in row) for row in coeffs
        )
        for row in self.coeffs:
            if len(row) != basis.size:
                raise NumberFieldError("coefficient row does not match basis size")
        self._hash = None
        self._float = None

    @classmethod
    def zero(cls, basis: CoordinateBasis, dim: int) -> "SymbolicVector":
        return cls(basis, ((F0,) * basis.size,) * dim)

    @classmethod
    def from_rationals(cls, basis: CoordinateBasis, values) -> "SymbolicVector":
        return cls(basis, tuple(basis.rational(v) for v in values))

    @classmethod
    def from_scalars(cls, basis: CoordinateBasis, scalars) -> "SymbolicVector":
        return cls(basis, tuple(scalars))

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    def __add__(self, other: "SymbolicVector") -> "SymbolicVector":
        return SymbolicVector(
            self.basis,
            tuple(
                tuple(a + b for a, b in zip(r1, r2))
                for r1, r2 in zip(self.coeffs, other.coeffs)
            ),
        )

    def __sub__(self, other: "SymbolicVector") -> "SymbolicVector":
        return SymbolicVector(
            self.basis,
            tuple(
                tuple(a - b for a, b in zip(r1, r2))
                for r1, r2 in zip(self.coeffs, other.coeffs)
            ),
        )

    def __neg__(self) -> "SymbolicVector":
        return SymbolicVector(
            self.basis, tuple(tuple(-a for a in row) for row in self.coeffs)
        )

    def scale(self, q) -> "SymbolicVector":
        q = Fraction(q)
        return SymbolicVector(
            self.basis, tuple(tuple(a * q for a in row) for row in self.coeffs)
        )

    def is_zero(self) -> bool:
        return all(c == 0 for row in self.coeffs for c in row)

    def evaluate(self) -> np.ndarray:
        if self._float is None:
            vals = self.basis.float_values
            self._float = np.array(
                [
                    sum(float(c) * vals[k] for k, c in enumerate(row) if c)
                    for row in self.coeffs
                ],
                dtype=float,
            )
        return self._float

    def evaluate_mp(self, dps: int = 30):
        return [self.basis.eval_scalar_mp(row, dps) for row in self.coeffs]

    def flatten(self) -> list[Fraction]:
        return [c for row in self.coeffs for c in row]

    def key(self):
        return self.coeffs

    def __eq__(self, other):
        return isinstance(other, SymbolicVector) and self.coeffs == other.coeffs

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.coeffs)
        return self._hash

    def __repr__(self):
        coords = ", ".join(self.basis.scalar_str(row) for row in self.coeffs)
        return f"({coords})"


# --------------------------------------------------------------------------
# the linear action of an expansion on coefficient space
# --------------------------------------------------------------------------


def q_action_matrix(basis: CoordinateBasis, entries) -> list[list[Fraction]]:
    """Rational matrix realizing v -> Q v on flattened coefficient space.

    `entries` is the d x d array of exact scalars of the expansion.  Requires
    every product (entry of Q) * (basis symbol) to resolve through the product
    table; a missing product raises ProductTableError naming it.
    """
    d = len(entries)
    s = basis.size
    n = d * s
    M = [[F0] * n for _ in range(n)]
    for i in range(d):
        for j in range(d):
            qij = entries[i][j]
            if all(c == 0 for c in qij):
                continue
            for l in range(s):
                col = basis.multiply(qij, basis.unit_scalar(l))
                for m in range(s):
                    if col[m]:
                        M[i * s + m][j * s + l] = col[m]
    return M


def apply_action(M, v: SymbolicVector) -> SymbolicVector:
    flat = v.flatten()
    s = v.basis.size
    out = []
    for row in M:
        out.append(sum(c * x for c, x in zip(row, flat) if c))
    coeffs = [tuple(out[i : i + s]) for i in range(0, len(out), s)]
    return SymbolicVector(v.basis, coeffs)


def scalar_matmul(basis: CoordinateBasis, A, B):
    """Product of two matrices with exact-scalar entries."""
    n, k, m = len(A), len(B), len(B[0])
    out = [[basis.zero_scalar() for _ in range(m)] for _ in range(n)]
    for i in range(n):
        for j in range(m):
            acc = basis.zero_scalar()
            for t in range(k):
                acc = basis.add(acc, basis.multiply(A[i][t], B[t][j]))
            out[i][j] = acc
    return out


# --------------------------------------------------------------------------
# exact rational / integer linear algebra
# --------------------------------------------------------------------------


def frac_identity(n: int):
    return [[F1 if i == j else F0 for j in range(n)] for i in range(n)]


def frac_matmul(A, B):
    n, k, m = len(A), len(B), len(B[0])
    out = [[F0] * m for _ in range(n)]
    for i in range(n):
        Ai = A[i]
        for t in range(k):
            a = Ai[t]
            if a == 0:
                continue
            Bt = B[t]
            row = out[i]
            for j in range(m):
                if Bt[j]:
                    row[j] += a * Bt[j]
    return out


def frac_matvec(A, v):
    return [sum(c * x for c, x in zip(row, v) if c) for row in A]


def frac_solve(A, b) -> Optional[list[Fraction]]:
    """Solve A x = b exactly; None when singular or inconsistent."""
    n = len(A)
    m = len(A[0])
    aug = [[Fraction(A[i][j]) for j in range(m)] + [Fraction(b[i])] for i in range(n)]
    pivots = []
    r = 0
    for c in range(m):
        pivot = next((i for i in range(r, n) if aug[i][c] != 0), None)
        if pivot is None:
            continue
        aug[r], aug[pivot] = aug[pivot], aug[r]
        pv = aug[r][c]
        aug[r] = [x / pv for x in aug[r]]
        for i in range(n):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
        if r == n:
            break
    for i in range(r, n):
        if aug[i][m] != 0:
            return None  # inconsistent
    if len(pivots) < m:
        return None  # underdetermined; callers in scope need unique solutions
    x = [F0] * m
    for i, c in enumerate(pivots):
        x[c] = aug[i][m]
    return x


def frac_rank(rows) -> int:
    mat = [list(map(Fraction, r)) for r in rows]
    if not mat:
        return 0
    m = len(mat[0])
    rank = 0
    for c in range(m):
        pivot = next((i for i in range(rank, len(mat)) if mat[i][c] != 0), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        pv = mat[rank][c]
        mat[rank] = [x / pv for x in mat[rank]]
        for i in range(len(mat)):
            if i != rank and mat[i][c] != 0:
                f = mat[i][c]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[rank])]
        rank += 1
    return rank


def lattice_hnf(rows) -> list[list[int]]:
    """Row-style Hermite normal form basis of the integer row lattice."""
    mat = [list(map(int, r)) for r in rows if any(r)]
    if not mat:
        return []
    m = len(mat[0])
    basis = []
    work = mat
    col = 0
    while col < m and work:
        nz = [r for r in work if r[col] != 0]
        rest = [r for r in work if r[col] == 0]
        if not nz:
            col += 1
            continue
        # gcd-reduce all rows with a nonzero entry in this column
        while len(nz) > 1:
            nz.sort(key=lambda r: abs(r[col]))
            base = nz[0]
            out = [base]
            for r in nz[1:]:
                q = r[col] // base[col]
                red = [a - q * b for a, b in zip(r, base)]
                if red[col] != 0:
                    out.append(red)
                elif any(red):
                    rest.append(red)
            if len(out) == 1:
                break
            nz = out
        pivot_row = nz[0]
        if pivot_row[col] < 0:
            pivot_row = [-a for a in pivot_row]
        basis.append(pivot_row)
        work = rest
        col += 1
    # reduce entries above each pivot
    basis.sort(key=lambda r: next(i for i, a in enumerate(r) if a))
    for i in range(len(basis)):
        pc = next(k for k, a in enumerate(basis[i]) if a)
        for j in range(i):
            q = basis[j][pc] // basis[i][pc]
            if q:
                basis[j] = [a - q * b for a, b in zip(basis[j], basis[i])]
    return basis


def in_lattice(hnf_rows, vec) -> bool:
    """Membership of an integer vector in the lattice spanned by HNF rows."""
    v = list(map(int, vec))
    for row in hnf_rows:
        pc = next(k for k, a in enumerate(row) if a)
        if v[pc] % row[pc] != 0:
            return False
        q = v[pc] // row[pc]
        if q:
            v = [a - q * b for a, b in zip(v, row)]
    return not any(v)


# --------------------------------------------------------------------------
# arithmetic in Q(theta) for a single algebraic generator
# --------------------------------------------------------------------------


def field_mul(minpoly: MinimalPolynomial, u, v):
    """Multiply two elements of Q(theta) written in the power basis."""
    deg = minpoly.degree
    raw = [F0] * (2 * deg - 1)
    for i, a in enumerate(u):
        if a == 0:
            continue
        for j, b in enumerate(v):
            raw[i + j] += a * b
    for k in range(len(raw) - 1, deg - 1, -1):
        c = raw[k]
        if c == 0:
            continue
        raw[k] = F0
        for i in range(deg):
            raw[k - deg + i] -= c * minpoly.coefficients[i]
    return tuple(raw[:deg])


def field_inv(minpoly: MinimalPolynomial, u):
    """Inverse in Q(theta) via the extended Euclidean algorithm."""
    deg = minpoly.degree
    if all(c == 0 for c in u):
        raise ZeroDivisionError("zero has no inverse")
    r0 = [Fraction(c) for c in minpoly.coefficients]
    r1 = list(u) + [F0] * (deg + 1 - len(u))
    s0, s1 = [F0] * (deg + 1), [F1] + [F0] * deg

    def trim(p):
        p = list(p)
        while p and p[-1] == 0:
            p.pop()
        return p

    r0, r1 = trim(r0), trim(r1)
    while True:
        if not r1:
            raise NumberFieldError("element not invertible (should not happen)")
        if len(r1) == 1:
            inv = [c / r1[0] for c in s1]
            return tuple((inv + [F0] * deg)[:deg])
        q, rem = _poly_divmod(r0, r1)
        s_next = [F0] * (deg + 1)
        for i, c in enumerate(s0):
            s_next[i] += c
        for i, qc in enumerate(q):
            for j, sc in enumerate(s1):
                if i + j <= deg:
                    s_next[i + j] -= qc * sc
        r0, s0 = r1, s1
        r1, s1 = trim(rem), s_next
