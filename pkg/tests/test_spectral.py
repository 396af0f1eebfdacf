import math
from fractions import Fraction as F

import numpy as np
import pytest

from tilescope import analysis as ana
from tilescope import cli
from tilescope import geometry as geo
from tilescope import spectral as spc
from tilescope import substitution as sub
from tilescope.geometry import Window

TAU = (1 + 5**0.5) / 2


def vec(system, *coords):
    return cli.parse_vector(system.basis, [str(c) for c in coords])


# ---------------------------------------------------------------------------
# separation and grids
# ---------------------------------------------------------------------------


def test_separation_unit_lattice(square):
    sample = sub.patch_to_kset(square, sub.seed_patch(square, 3))
    sep = spc.separation_constant(sample)
    assert sep.eta == pytest.approx(1.0)
    assert sep.m0 == 2  # 2^-2 = 0.25 < 0.5


def test_separation_fibonacci(fibonacci):
    sample = sub.patch_to_kset(fibonacci, sub.seed_patch(fibonacci, 6))
    sep = spc.separation_constant(sample)
    assert sep.eta == pytest.approx(1.0, abs=1e-9)


def test_separation_kenyon_scan(kenyon):
    sample = sub.patch_to_kset(kenyon, sub.seed_patch(kenyon, 2))
    sep = spc.separation_constant(sample)
    assert sep.eta == pytest.approx(1.0, abs=1e-9)


def test_coincident_points_rejected():
    # a degenerate basis can make exactly-distinct coefficient vectors
    # evaluate to the same point; the separation scan must refuse
    from tilescope import numberfield as nf
    from tilescope.numberfield import SymbolicVector

    basis = nf.CoordinateBasis(
        [nf.BasisSymbol("1"), nf.BasisSymbol("w", witness=nf.DecimalWitness("0.5"))]
    )
    p = SymbolicVector(basis, [(F(1, 2), F(0))])
    q = SymbolicVector(basis, [(F(0), F(1))])  # same value, different coeffs
    far = SymbolicVector.from_rationals(basis, [40])
    cluster = sub.KSetCluster([[p, q, far]])
    with pytest.raises(spc.SpectralError, match="duplicate|separation"):
        spc.separation_constant(cluster)


def test_grid_below_m0_rejected(square):
    sample = sub.patch_to_kset(square, sub.seed_patch(square, 3))
    with pytest.raises(spc.SpectralError, match="m0"):
        spc.make_grid(sample, 1)


# ---------------------------------------------------------------------------
# cylinder census
# ---------------------------------------------------------------------------


def test_sparse_sample_saturates_wiggle(square):
    # one isolated point per window: full-cube wiggle, the rest is empty measure
    from tilescope.numberfield import SymbolicVector

    basis = square.basis
    pts = [
        SymbolicVector.from_rationals(basis, [16 * i, 16 * j])
        for i in range(4)
        for j in range(4)
    ]
    sample = sub.KSetCluster([pts])
    grid = spc.GridSpec(m=2, eta=16.0, m0=1, dim=2)
    census = spc.build_cylinders(sample, grid, Window((8, 8), (40, 40)))
    saturated = [
        c for c in census.classes if c.size == 1
    ]
    assert saturated
    side = grid.side
    for c in saturated:
        assert c.wiggle_volume == pytest.approx(side**2, rel=1e-9)
    assert census.empty_measure > 0.5
    assert census.total == pytest.approx(1.0, abs=1e-9)


def test_two_point_cluster_wiggle_strictly_smaller(fibonacci):
    sample = sub.patch_to_kset(fibonacci, sub.seed_patch(fibonacci, 8))
    grid = spc.make_grid(sample, 2)
    census = spc.build_cylinders(sample, grid, Window((4.0,), (30.0,)))
    multi = [c for c in census.classes if c.size >= 2]
    assert multi
    for c in multi:
        # offsets differ (tau is irrational), so the box intersection is strict
        assert c.wiggle_volume < grid.side - 1e-12


def test_wiggle_bound_and_partition_fibonacci(fibonacci):
    sample = sub.patch_to_kset(fibonacci, sub.seed_patch(fibonacci, 8))
    grid = spc.make_grid(sample, 2)
    census = spc.build_cylinders(sample, grid, Window((4.0,), (36.0,)))
    bound = grid.side**grid.dim
    for c in census.classes:
        assert c.wiggle_volume <= bound + 1e-12
    part = spc.partition_check(census)
    assert 0.95 <= part.total <= 1.0 + 1e-9
    assert part.passed


def test_wiggle_bound_and_partition_kenyon(kenyon):
    sample = sub.patch_to_kset(kenyon, sub.seed_patch(kenyon, 4))
    grid = spc.make_grid(sample, 2)
    census = spc.build_cylinders(sample, grid, Window((0, 0), (9, 9)))
    bound = grid.side**grid.dim
    for c in census.classes:
        assert c.wiggle_volume <= bound + 1e-12
    part = spc.partition_check(census)
    assert 0.95 <= part.total <= 1.0 + 1e-9


def test_census_requires_coverage(kenyon):
    sample = sub.patch_to_kset(kenyon, sub.seed_patch(kenyon, 2))
    grid = spc.make_grid(sample, 2)
    with pytest.raises(spc.SpectralError, match="cover"):
        spc.build_cylinders(sample, grid, Window((0, 0), (60, 60)))


def test_cylinder_measure_formula():
    cls = spc.CylinderClass(
        index=0, pattern=(), rep_diffs=(), denom=1, colours=(), size=1,
        wiggle_extents=(0.25,), wiggle_volume=0.25,
    )
    got = spc.cylinder_measure(cls, TAU / (TAU + 2))
    assert got == pytest.approx(0.25 * 0.4472135955, rel=1e-6)
    with pytest.raises(spc.SpectralError):
        spc.cylinder_measure(cls, -0.1)


# ---------------------------------------------------------------------------
# birkhoff averages
# ---------------------------------------------------------------------------


def test_birkhoff_spread_shrinks_fibonacci(fibonacci):
    sample = sub.patch_to_kset(fibonacci, sub.seed_patch(fibonacci, 9))
    grid = spc.make_grid(sample, 2)
    census = spc.build_cylinders(sample, grid, Window((4.0,), (68.0,)))
    best = max(census.classes, key=lambda c: c.measure)
    windows = [Window((8.0,), (8.0 + L,)) for L in (4, 8, 16, 32, 48)]
    curve = spc.birkhoff_cylinder_estimate(census, best.pattern, windows)
    assert curve.spread[-1] < curve.spread[0]
    assert curve.tail_sums[-1] == 0.0  # k0 = all classes leaves nothing


def test_birkhoff_lattice_constant(square):
    sample = sub.patch_to_kset(square, sub.seed_patch(square, 4))
    grid = spc.make_grid(sample, 2)
    census = spc.build_cylinders(sample, grid, Window((4, 4), (12, 12)))
    best = max(census.classes, key=lambda c: c.measure)
    windows = [Window((5, 5), (5 + L, 5 + L)) for L in (1, 2, 3)]
    curve = spc.birkhoff_cylinder_estimate(census, best.pattern, windows)
    # integer-period structure: averages repeat exactly at integer sizes
    for per_h in curve.averages:
        assert max(per_h) - min(per_h) < 0.35
    assert curve.spread[-1] <= curve.spread[0] + 1e-9


def test_birkhoff_window_must_fit(square):
    sample = sub.patch_to_kset(square, sub.seed_patch(square, 4))
    grid = spc.make_grid(sample, 2)
    census = spc.build_cylinders(sample, grid, Window((4, 4), (12, 12)))
    best = census.classes[0]
    with pytest.raises(spc.SpectralError, match="census"):
        spc.birkhoff_cylinder_estimate(
            census, best.pattern, [Window((4, 4), (40, 40))]
        )


# ---------------------------------------------------------------------------
# non-mixing overlap bound
# ---------------------------------------------------------------------------


def test_kenyon_mixing_bound(ws_kenyon):
    ws = ws_kenyon
    rep = spc.mixing_overlap_bound(
        ws.system, vec(ws.system, "0", "1"), ws.volumes().volumes,
        ws.tile_freqs(), n_max=3,
    )
    assert rep.k0 == 1
    assert rep.delta == pytest.approx(1 / 36, rel=1e-9)
    assert rep.passed
    assert rep.curve[-1][3] > 2 * rep.delta


def test_fibonacci_mixing_bound(ws_fibonacci):
    ws = ws_fibonacci
    rep = spc.mixing_overlap_bound(
        ws.system, vec(ws.system, "tau"), ws.volumes().volumes,
        ws.tile_freqs(), n_max=3,
    )
    assert rep.k0 is not None and rep.k0 <= 4
    expected = 0.25 * ws.tile_freqs()[rep.ell] * ws.volumes().volumes[rep.ell] \
        * ws.system.Q.det_abs ** (-rep.k0)
    assert rep.delta == pytest.approx(expected, rel=1e-12)
    assert rep.passed


def test_mixing_rejects_non_return_vector(ws_kenyon):
    ws = ws_kenyon
    with pytest.raises(spc.SpectralError, match="legal"):
        spc.mixing_overlap_bound(
            ws.system, vec(ws.system, "1/2", "0"), ws.volumes().volumes,
            ws.tile_freqs(), n_max=1, k0_max=3,
        )


# ---------------------------------------------------------------------------
# eigenvalue residues and verdicts
# ---------------------------------------------------------------------------


def test_modified_exact_pass(ws_modified):
    ws = ws_modified
    alpha = vec(ws.system, "tau-1", "0")
    seq = spc.eigenvalue_residues(ws.system, alpha, ws.xi(), 30)
    assert len(seq.entries) == 30
    assert all(e.exact_zero for e in seq.entries)
    verdict = spc.eigenvalue_test(ws.system, alpha, ws.xi(), [], N=30)
    assert verdict.status == "ExactPass" and verdict.period_ok


def test_kenyon_third_exact_pass(ws_kenyon):
    ws = ws_kenyon
    alpha = vec(ws.system, "1/3", "0")
    seq = spc.eigenvalue_residues(ws.system, alpha, ws.xi(), 30)
    assert all(e.exact_zero for e in seq.entries)
    verdict = spc.eigenvalue_test(ws.system, alpha, ws.xi(), [], N=30)
    assert verdict.status == "ExactPass"


def test_kenyon_irrational_alpha_fails(ws_kenyon):
    ws = ws_kenyon
    alpha = vec(ws.system, "0", "0.37")
    verdict = spc.eigenvalue_test(ws.system, alpha, ws.xi(), [], N=40)
    assert verdict.status == "Fail"
    values = [e.value for e in verdict.residues.entries]
    assert max(values[-10:]) > 0.01  # residues do not decay
    # the lattice period in the y direction also rules beta out
    period = vec(ws.system, "0", "1")
    verdict2 = spc.eigenvalue_test(ws.system, alpha, ws.xi(), [period], N=10)
    assert not verdict2.period_ok


def test_zero_alpha_trivial(ws_kenyon):
    ws = ws_kenyon
    verdict = spc.eigenvalue_test(
        ws.system, vec(ws.system, "0", "0"), ws.xi(), [], N=5
    )
    assert verdict.status == "ExactPass"


def test_fibonacci_numeric_pass(ws_fibonacci):
    ws = ws_fibonacci
    alpha = vec(ws.system, "tau-1")
    verdict = spc.eigenvalue_test(ws.system, alpha, ws.xi(), [], N=25)
    assert verdict.status == "NumericPass"
    assert verdict.rho == pytest.approx(1 / TAU, rel=0.05)


def test_residue_truncation_notice(ws_kenyon):
    ws = ws_kenyon
    alpha = vec(ws.system, "0", "1")
    seq = spc.eigenvalue_residues(ws.system, alpha, ws.xi(), 200, prec_bits=96)
    assert seq.truncated_at is not None
    assert "bits" in seq.notice


def test_exactness_consistent_with_floats(ws_modified):
    # re-evaluating the exact-zero pairings in floats stays at float noise
    ws = ws_modified
    alpha = vec(ws.system, "tau-1", "0")
    basis = ws.system.basis
    z = vec(ws.system, "tau", "0")
    for n in range(1, 10):
        qnz = ws.system.Q.apply(z, n)
        inner = basis.zero_scalar()
        for i in range(2):
            inner = basis.add(inner, basis.multiply(qnz.coeffs[i], alpha.coeffs[i]))
        val = basis.eval_scalar(inner)
        assert abs(val - round(val)) < 1e-6 * max(1.0, abs(val))


# ---------------------------------------------------------------------------
# Pisot verdicts
# ---------------------------------------------------------------------------


def test_pisot_family_of_alpha_modified(ws_modified):
    ws = ws_modified
    rep = spc.pisot_family_of_alpha(ws.system, vec(ws.system, "tau-1", "0"))
    assert rep.family
    names = [ws.system.Q.eigenvalues[i].value.root.real for i in rep.theta_indices]
    assert names == [pytest.approx(3.0)]


def test_pisot_family_of_alpha_fr(ws_fr):
    ws = ws_fr
    rep = spc.pisot_family_of_alpha(ws.system, vec(ws.system, "1", "1"))
    assert not rep.family
    assert len(rep.theta_indices) == 1


def test_pisot_family_of_alpha_zero(ws_kenyon):
    rep = spc.pisot_family_of_alpha(
        ws_kenyon.system, vec(ws_kenyon.system, "0", "0")
    )
    assert rep.theta_indices == () and rep.family


def test_pisot_classification(fr, kenyon, fibonacci):
    rep = spc.pisot_classification(fr)
    assert rep.entries[0][1] is False  # b is not Pisot
    assert not rep.family and rep.totally_non_pisot
    rep = spc.pisot_classification(kenyon)
    assert rep.entries[0][1] is True and rep.family and not rep.totally_non_pisot
    rep = spc.pisot_classification(fibonacci)
    assert rep.family and not rep.totally_non_pisot


# ---------------------------------------------------------------------------
# candidates and final verdicts
# ---------------------------------------------------------------------------


def test_candidate_generation_modified(ws_modified):
    cands = ws_modified.alpha_candidates()
    keys = {v.key() for v, _ in cands}
    assert vec(ws_modified.system, "tau-1", "0").key() in keys


def test_weak_mixing_fr(ws_fr):
    ws = ws_fr
    results = [v for v, _ in ws.eigen_results()]
    rep = spc.weak_mixing_verdict(ws.system, ws.pisot(), results)
    assert rep.verdict == "WEAKLY_MIXING"
    assert not rep.passing


def test_weak_mixing_kenyon(ws_kenyon):
    ws = ws_kenyon
    results = [v for v, _ in ws.eigen_results()]
    rep = spc.weak_mixing_verdict(ws.system, ws.pisot(), results)
    assert rep.verdict == "NOT_WEAKLY_MIXING"
    # every certified eigenvalue lies on the first axis
    for v, _ in ws.eigen_results():
        if v.passed and not v.alpha.is_zero():
            assert all(c == 0 for c in v.alpha.coeffs[1])


def test_weak_mixing_modified(ws_modified):
    ws = ws_modified
    results = [v for v, _ in ws.eigen_results()]
    rep = spc.weak_mixing_verdict(ws.system, ws.pisot(), results)
    assert rep.verdict == "NOT_WEAKLY_MIXING"


def test_rep_cluster_materializes(fibonacci):
    sample = sub.patch_to_kset(fibonacci, sub.seed_patch(fibonacci, 8))
    grid = spc.make_grid(sample, 2)
    census = spc.build_cylinders(sample, grid, Window((4.0,), (20.0,)))
    cls = max(census.classes, key=lambda c: c.size)
    rep = cls.rep_cluster(fibonacci.basis, fibonacci.kappa, fibonacci.dim)
    assert rep.size() == cls.size
    # anchored at its first point, which sits at the origin
    assert any(p.is_zero() for _, p in rep.supp())
