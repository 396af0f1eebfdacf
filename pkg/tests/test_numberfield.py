import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tilescope import numberfield as nf

X2_X_3 = nf.MinimalPolynomial((-3, -1, 1))  # x^2 - x - 3
GOLDEN = nf.MinimalPolynomial((-1, -1, 1))  # x^2 - x - 1
LINEAR3 = nf.MinimalPolynomial((-3, 1))  # x - 3


def test_conjugates_quadratic():
    roots = sorted(nf.conjugates(X2_X_3), key=lambda r: r.real)
    expect = [(1 - math.sqrt(13)) / 2, (1 + math.sqrt(13)) / 2]
    for r, e in zip(roots, expect):
        assert abs(r - e) < 1e-12


def test_conjugates_linear_and_golden():
    assert abs(nf.conjugates(LINEAR3)[0] - 3.0) < 1e-12
    roots = sorted(nf.conjugates(GOLDEN), key=lambda r: r.real)
    tau = (1 + math.sqrt(5)) / 2
    assert abs(roots[1] - tau) < 1e-12
    assert abs(roots[0] - (1 - tau)) < 1e-12


@pytest.mark.parametrize(
    "coeffs",
    [(-3, -1, 1), (-1, -1, 1), (-3, 1), (1, 0, 0, 0, 1), (-2, 0, 1), (3, 3, 0, 1)],
)
def test_root_product_reconstructs_polynomial(coeffs):
    p = nf.MinimalPolynomial(coeffs)
    roots = nf.conjugates(p)
    assert len(roots) == p.degree
    rebuilt = np.poly(roots)[::-1]  # constant-to-leading
    for got, want in zip(rebuilt, coeffs):
        assert abs(got - want) < 1e-8
    # closed under conjugation
    for r in roots:
        assert any(abs(r.conjugate() - s) < 1e-9 for s in roots)


@pytest.mark.parametrize(
    "coeffs,msg",
    [((-1, 0, 1), "root"), ((0, 1, 1), "x divides"), ((-4, 0, 1), "root"),
     ((-1, 0, 0, 0, 2), "monic"), ((4, 0, 3, 0, 1), "factor")],
)
def test_reducible_or_nonmonic_rejected(coeffs, msg):
    # x^4 + 3x^2 + 4 = (x^2 - x + 2)(x^2 + x + 2) has no rational root
    with pytest.raises(nf.NumberFieldError, match=msg):
        nf.MinimalPolynomial(coeffs)


@pytest.fixture(scope="module")
def b_scalar():
    return nf.AlgebraicScalar(X2_X_3, 2.302776, 0.5)


@pytest.fixture(scope="module")
def tau_scalar():
    return nf.AlgebraicScalar(GOLDEN, 1.618, 0.3)


def test_is_pisot(tau_scalar, b_scalar):
    v = nf.is_pisot(tau_scalar)
    assert v.is_pisot and abs(v.margin - (2 - (1 + math.sqrt(5)) / 2)) < 1e-9
    v = nf.is_pisot(b_scalar)
    assert not v.is_pisot and v.margin < 0
    v = nf.is_pisot(nf.rational_scalar_value(3))
    assert v.is_pisot and v.margin == 1.0


def test_is_pisot_precondition(tau_scalar):
    small = nf.AlgebraicScalar(GOLDEN, -0.618, 0.3)
    with pytest.raises(nf.NumberFieldError):
        nf.is_pisot(small)


def test_pisot_family(tau_scalar, b_scalar):
    assert nf.is_pisot_family([tau_scalar])
    assert not nf.is_pisot_family([b_scalar])
    conj = nf.AlgebraicScalar(X2_X_3, -1.302776, 0.4)
    assert nf.is_pisot_family([b_scalar, conj])


def test_totally_non_pisot(tau_scalar, b_scalar):
    assert nf.is_totally_non_pisot([b_scalar])
    assert not nf.is_totally_non_pisot([tau_scalar])
    assert not nf.is_totally_non_pisot([nf.rational_scalar_value(3), tau_scalar])


def test_family_matches_single_pisot(tau_scalar):
    assert nf.is_pisot_family([tau_scalar]) == nf.is_pisot(tau_scalar).is_pisot


# ---------------------------------------------------------------------------
# bases and vectors
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def tau_basis(tau_scalar):
    return nf.CoordinateBasis(
        [nf.BasisSymbol("1"), nf.BasisSymbol("tau", algebraic=tau_scalar)],
        {("tau", "tau"): {"1": 1, "tau": 1}},
    )


def test_basis_requires_unit_first(tau_scalar):
    with pytest.raises(nf.NumberFieldError):
        nf.CoordinateBasis([nf.BasisSymbol("tau", algebraic=tau_scalar)])


def test_bad_product_table_rejected(tau_scalar):
    with pytest.raises(nf.NumberFieldError, match="identity"):
        nf.CoordinateBasis(
            [nf.BasisSymbol("1"), nf.BasisSymbol("tau", algebraic=tau_scalar)],
            {("tau", "tau"): {"1": 2, "tau": 1}},
        )


def test_missing_product_named():
    basis = nf.CoordinateBasis(
        [
            nf.BasisSymbol("1"),
            nf.BasisSymbol("a", witness=nf.AffineSqrtWitness(F(2), F(-1), 2)),
        ]
    )
    a = basis.scalar_from_map({"a": 1})
    with pytest.raises(nf.ProductTableError, match="a\\*a"):
        basis.multiply(a, a)


def test_q_action_trivial_basis():
    basis = nf.CoordinateBasis([nf.BasisSymbol("1")])
    entries = [[basis.rational(3), basis.rational(0)],
               [basis.rational(0), basis.rational(3)]]
    M = nf.q_action_matrix(basis, entries)
    assert len(M) == 2  # (d*s) with s=1
    assert M[0][0] == 3 and M[1][1] == 3 and M[0][1] == 0


def test_q_action_golden_block(tau_basis):
    zero = tau_basis.zero_scalar()
    entries = [
        [tau_basis.rational(3), zero],
        [zero, tau_basis.scalar_from_map({"tau": 1})],
    ]
    M = nf.q_action_matrix(tau_basis, entries)
    # y-coordinate block is the companion action tau*(p + q tau) = q + (p+q) tau
    assert [row[2:] for row in M[2:]] == [[F(0), F(1)], [F(1), F(1)]]
    v = nf.SymbolicVector(tau_basis, [(F(1), F(0)), (F(1), F(1))])
    qv = nf.apply_action(M, v)
    assert qv.coeffs == ((F(3), F(0)), (F(1), F(2)))  # (3, tau*(1+tau)=1+2tau)


def test_q_action_b_block():
    b = nf.AlgebraicScalar(X2_X_3, 2.302776, 0.5)
    basis = nf.CoordinateBasis(
        [nf.BasisSymbol("1"), nf.BasisSymbol("b", algebraic=b)],
        {("b", "b"): {"1": 3, "b": 1}},
    )
    bb = basis.scalar_from_map({"b": 1})
    zero = basis.zero_scalar()
    M = nf.q_action_matrix(basis, [[bb, zero], [zero, bb]])
    # b*(p + q b) = 3q + (p+q) b on each coordinate
    assert M[0][:2] == [F(0), F(3)] and M[1][:2] == [F(1), F(1)]


def test_q_action_composes_exactly(tau_basis):
    zero = tau_basis.zero_scalar()
    entries = [
        [tau_basis.rational(3), zero],
        [zero, tau_basis.scalar_from_map({"tau": 1})],
    ]
    M = nf.q_action_matrix(tau_basis, entries)
    M2 = nf.frac_matmul(M, M)
    sq = nf.scalar_matmul(tau_basis, entries, entries)
    assert M2 == nf.q_action_matrix(tau_basis, sq)


small_fracs = st.fractions(
    min_value=-10, max_value=10, max_denominator=8
)


@given(st.lists(small_fracs, min_size=4, max_size=4),
       st.lists(small_fracs, min_size=4, max_size=4))
@settings(max_examples=200, deadline=None)
def test_vector_arithmetic_exact(u_coeffs, v_coeffs):
    basis = nf.CoordinateBasis(
        [
            nf.BasisSymbol("1"),
            nf.BasisSymbol("a", witness=nf.AffineSqrtWitness(F(2), F(-1), 2)),
        ]
    )
    u = nf.SymbolicVector(basis, [u_coeffs[:2], u_coeffs[2:]])
    v = nf.SymbolicVector(basis, [v_coeffs[:2], v_coeffs[2:]])
    assert (u + v) - v == u
    assert (u - v) + v == u
    assert u + v == v + u
    assert (-u).scale(-1) == u


def test_vector_equality_is_exact(tau_basis):
    u = nf.SymbolicVector(tau_basis, [(F(1), F(0))])
    v = nf.SymbolicVector(tau_basis, [(F(1), F(0))])
    w = nf.SymbolicVector(tau_basis, [(F(1), F(1, 10**9))])
    assert u == v and hash(u) == hash(v)
    assert u != w


# ---------------------------------------------------------------------------
# rational linear algebra
# ---------------------------------------------------------------------------


def test_frac_solve_roundtrip():
    A = [[F(2), F(1)], [F(1), F(-1)]]
    x = [F(3), F(5)]
    b = nf.frac_matvec(A, x)
    assert nf.frac_solve(A, b) == x
    singular = [[F(1), F(2)], [F(2), F(4)]]
    assert nf.frac_solve(singular, [F(1), F(1)]) is None


def test_frac_rank():
    assert nf.frac_rank([[1, 0], [0, 1], [1, 1]]) == 2
    assert nf.frac_rank([[1, 2], [2, 4]]) == 1
    assert nf.frac_rank([]) == 0


def test_hnf_membership():
    rows = nf.lattice_hnf([[2, 0], [0, 3]])
    assert nf.in_lattice(rows, [4, 3])
    assert not nf.in_lattice(rows, [1, 0])
    assert not nf.in_lattice(rows, [0, 2])
    full = nf.lattice_hnf([[2, 0], [0, 3], [1, 1]])
    assert nf.in_lattice(full, [1, 0]) and nf.in_lattice(full, [0, 1])


def test_field_inverse():
    inv_tau = nf.field_inv(GOLDEN, (F(0), F(1)))
    assert inv_tau == (F(-1), F(1))  # 1/tau = tau - 1
    inv_b = nf.field_inv(X2_X_3, (F(0), F(1)))
    assert nf.field_mul(X2_X_3, (F(0), F(1)), inv_b) == (F(1), F(0))


def test_algebraic_scalar_isolation():
    with pytest.raises(nf.NumberFieldError, match="roots"):
        nf.AlgebraicScalar(X2_X_3, 0.5, 5.0)  # disk holds both roots
    with pytest.raises(nf.NumberFieldError, match="roots"):
        nf.AlgebraicScalar(X2_X_3, 10.0, 0.1)  # disk holds none


def test_high_precision_refinement():
    tau = nf.AlgebraicScalar(GOLDEN, 1.618, 0.3)
    val = tau.value_mp(60)
    import mpmath

    with mpmath.workdps(70):
        err = abs(val * val - val - 1)
        assert err < mpmath.mpf(10) ** -55


@given(
    st.lists(st.integers(-6, 6), min_size=2, max_size=2).filter(lambda v: any(v)),
)
@settings(max_examples=100, deadline=None)
def test_field_inverse_property(coeffs):
    u = (F(coeffs[0]), F(coeffs[1]))
    inv = nf.field_inv(GOLDEN, u)
    assert nf.field_mul(GOLDEN, u, inv) == (F(1), F(0))


@given(
    st.lists(
        st.lists(st.integers(-9, 9), min_size=3, max_size=3),
        min_size=2,
        max_size=4,
    ),
    st.lists(st.integers(-4, 4), min_size=4, max_size=4),
)
@settings(max_examples=150, deadline=None)
def test_hnf_membership_property(rows, combo):
    hnf = nf.lattice_hnf(rows)
    # integer combinations of the generators always belong to the lattice
    vec = [0, 0, 0]
    for c, row in zip(combo, rows):
        for k in range(3):
            vec[k] += c * row[k]
    assert nf.in_lattice(hnf, vec) or not hnf
    # the HNF rows themselves belong
    for row in hnf:
        assert nf.in_lattice(hnf, row)
