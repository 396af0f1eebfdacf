"""Acceptance suite: each test implements one release criterion at its
stated tolerance and prints one PASS line.  Run with -s to see the lines.
"""

import math
import time
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
B = (1 + 13**0.5) / 2


def report(name, detail):
    print(f"ACCEPT {name}: PASS ({detail})")


def vec(system, *coords):
    return cli.parse_vector(system.basis, [str(c) for c in coords])


def test_criterion_01_pf_identity(all_systems):
    t0 = time.time()
    for name, system in all_systems.items():
        rep = sub.validate_system(system)
        assert rep.pf_relative_error < 1e-8, name
    fr_pf = sub.validate_system(all_systems["frank_robinson"]).pf_eigenvalue
    mod_pf = sub.validate_system(all_systems["kenyon_modified"]).pf_eigenvalue
    assert fr_pf == pytest.approx(B + 3, abs=1e-6)
    assert fr_pf == pytest.approx(5.3027756, abs=1e-6)
    assert mod_pf == pytest.approx(3 * TAU, abs=1e-6)
    assert mod_pf == pytest.approx(4.8541020, abs=1e-6)
    dt = time.time() - t0
    assert dt < 1.0
    report("1 PF identity", f"5 systems, rel err < 1e-8, {dt:.2f}s")


def test_criterion_02_volumes(fr, kenyon):
    t0 = time.time()
    fr_sol = geo.solve_adjoint_ifs(fr, 1 / 256, iters=12)
    got = np.array([m.volume for m in fr_sol.masks])
    expect = np.array([B * B, B, B, 1.0])
    rel = np.abs(got / got[-1] - expect) / expect
    assert rel.max() < 0.03, rel
    ken_sol = geo.solve_adjoint_ifs(kenyon, 1 / 64, iters=20)
    area = ken_sol.masks[0].volume
    assert abs(area - 1.0) <= 0.05
    dt = time.time() - t0
    assert dt < 30.0
    report(
        "2 raster volumes",
        f"FR ratios within {rel.max():.3%}, attractor area {area:.4f}, {dt:.1f}s",
    )


def test_criterion_03_counting_identity(all_systems):
    t0 = time.time()
    checked = 0
    for name, system in all_systems.items():
        for j in range(system.kappa):
            patch = sub.Patch([system.prototile_tile(j)])
            for k in range(1, 6):
                patch = sub.substitute(system, patch, 1)
                expect = np.linalg.matrix_power(system.S, k)[:, j]
                assert (patch.type_counts(system.kappa) == expect).all(), (
                    name, j, k,
                )
                checked += 1
    dt = time.time() - t0
    assert dt < 10.0
    report("3 counting identity", f"{checked} supertiles exact, {dt:.1f}s")


def test_criterion_04_metric_axioms():
    t0 = time.time()
    rng = np.random.default_rng(20240802)
    violations = 0
    n_triples = 10_000

    def random_set():
        kind = rng.integers(0, 3)
        n1 = int(rng.integers(2, 7))
        n2 = int(rng.integers(1, 5))
        base = rng.uniform(-6, 6, size=(n1 + n2, 2))
        return [base[:n1], base[n1:]]

    def perturb(sets):
        out = []
        for arr in sets:
            pts = arr + rng.normal(0, rng.uniform(0.001, 0.5), size=arr.shape)
            if len(pts) > 1 and rng.random() < 0.3:
                pts = pts[1:]
            out.append(pts)
        return out

    for _ in range(n_triples):
        a = random_set()
        b = perturb(a) if rng.random() < 0.7 else random_set()
        c = perturb(b) if rng.random() < 0.7 else random_set()
        dab = geo.rubber_metric(a, b)
        dba = geo.rubber_metric(b, a)
        dbc = geo.rubber_metric(b, c)
        dac = geo.rubber_metric(a, c)
        if abs(dab - dba) > 1e-9:
            violations += 1
        if dac > dab + dbc + 1e-9:
            violations += 1
    dt = time.time() - t0
    assert violations == 0
    assert dt < 30.0
    report("4 metric axioms", f"{n_triples} triples, 0 violations, {dt:.1f}s")


def test_criterion_05_cylinders(fibonacci, kenyon):
    t0 = time.time()
    results = []
    for system, level, region in (
        (fibonacci, 8, Window((4.0,), (36.0,))),
        (kenyon, 4, Window((0.0, 0.0), (9.0, 9.0))),
    ):
        sample = sub.patch_to_kset(system, sub.seed_patch(system, level))
        grid = spc.make_grid(sample, 2)
        census = spc.build_cylinders(sample, grid, region)
        bound = grid.side**grid.dim
        for c in census.classes:
            assert c.wiggle_volume <= bound + 1e-12
            for e in c.wiggle_extents:
                assert e <= grid.side + 1e-12
        part = spc.partition_check(census)
        assert 0.95 <= part.total <= 1.0 + 1e-9, (system.name, part.total)
        results.append((system.name, len(census.classes), part.total))
    dt = time.time() - t0
    assert dt < 60.0
    report(
        "5 cylinder bound and partition",
        "; ".join(f"{n}: {k} classes, total {t:.6f}" for n, k, t in results)
        + f", {dt:.1f}s",
    )


def test_criterion_06_mixing_bound(ws_kenyon):
    t0 = time.time()
    ws = ws_kenyon
    rep = spc.mixing_overlap_bound(
        ws.system, vec(ws.system, "0", "1"), ws.volumes().volumes,
        ws.tile_freqs(), n_max=3,
    )
    assert rep.delta == pytest.approx(1 / 36, rel=1e-9)
    assert rep.curve[-1][3] > 2 * rep.delta
    dt = time.time() - t0
    assert dt < 60.0
    report(
        "6 non-mixing bound",
        f"delta = 1/36, deepest overlap ratio {rep.curve[-1][3]:.3f} > 2 delta, {dt:.1f}s",
    )


def test_criterion_07_eigenvalue_verdicts(ws_modified, ws_kenyon):
    t0 = time.time()
    mod = ws_modified
    alpha = vec(mod.system, "tau-1", "0")
    seq = spc.eigenvalue_residues(mod.system, alpha, mod.xi(), 30)
    assert len(seq.entries) == 30
    assert all(e.exact_zero and e.method == "exact" for e in seq.entries)
    verdict = spc.eigenvalue_test(mod.system, alpha, mod.xi(), [], N=30)
    assert verdict.status == "ExactPass"

    ken = ws_kenyon
    third = vec(ken.system, "1/3", "0")
    seq = spc.eigenvalue_residues(ken.system, third, ken.xi(), 30)
    assert all(e.exact_zero for e in seq.entries)  # n >= 1 throughout
    assert spc.eigenvalue_test(ken.system, third, ken.xi(), [], N=30).status == "ExactPass"

    beta = vec(ken.system, "0", "0.37")
    verdict = spc.eigenvalue_test(
        ken.system, beta, ken.xi(), [], N=40, prec_bits=128
    )
    assert verdict.status == "Fail"
    tail = [e.value for e in verdict.residues.entries[-10:]]
    assert max(tail) > 0.01  # no decay at 128-bit precision
    dt = time.time() - t0
    assert dt < 10.0
    report(
        "7 eigenvalue verdicts",
        f"ExactPass x2, Fail with residue {max(tail):.3f} at n<=40, {dt:.1f}s",
    )


def test_criterion_08_frank_robinson_pipeline(ws_fr):
    t0 = time.time()
    ws = ws_fr
    rigidity = ws.rigidity()
    assert rigidity.status == "rigid"
    witness = {w.key() for w in rigidity.witness}
    assert witness == {
        vec(ws.system, "1", "0").key(), vec(ws.system, "0", "1").key(),
    }
    pisot = ws.pisot()
    assert pisot.entries[0][1] is False  # b is not Pisot
    assert pisot.totally_non_pisot
    flc = ws.flc()
    assert flc.verdict == "ILC_evidence"
    wm = spc.weak_mixing_verdict(
        ws.system, pisot, [v for v, _ in ws.eigen_results()],
        flc_verdict=flc.verdict, rigidity_status=rigidity.status,
    )
    assert wm.verdict == "WEAKLY_MIXING"
    dt = time.time() - t0
    assert dt < 120.0
    report(
        "8 Frank-Robinson pipeline",
        f"rigid witness (1,0),(0,1); Pisot(b)=no; totally-non-Pisot; "
        f"WEAKLY_MIXING; ILC evidence; {dt:.1f}s",
    )


def test_criterion_09_kenyon_pipeline(ws_kenyon):
    t0 = time.time()
    ws = ws_kenyon
    rigidity = ws.rigidity()
    assert rigidity.status == "not_rigid"
    assert rigidity.qdim == 3 and rigidity.bound == 2
    periods = ws.periods()
    period_keys = {c.vector.key() for c in periods}
    assert vec(ws.system, "0", "1").key() in period_keys
    results = [v for v, _ in ws.eigen_results()]
    passing = [v for v in results if v.passed and not v.alpha.is_zero()]
    assert passing
    for v in passing:
        assert all(c == 0 for c in v.alpha.coeffs[1])  # alpha_2 = 0
    wm = spc.weak_mixing_verdict(
        ws.system, ws.pisot(), results,
        flc_verdict=ws.flc().verdict, rigidity_status=rigidity.status,
    )
    assert wm.verdict == "NOT_WEAKLY_MIXING"
    dt = time.time() - t0
    assert dt < 120.0
    report(
        "9 Kenyon pipeline",
        f"not rigid (qdim 3 > 2); period (0,1); NOT_WEAKLY_MIXING; "
        f"{len(passing)} passing alphas all on axis 1; {dt:.1f}s",
    )


def test_criterion_10_fibonacci_frequencies(ws_fibonacci):
    t0 = time.time()
    ws = ws_fibonacci
    vols = ws.volumes().volumes
    freqs = ws.tile_freqs()
    assert freqs[0] == pytest.approx(TAU / (TAU + 2), abs=1e-3)
    assert freqs[1] == pytest.approx(1 / (TAU + 2), abs=1e-3)
    assert float(np.dot(freqs, np.asarray(vols))) == pytest.approx(1.0, abs=1e-6)
    est = ana.patch_frequency(
        ws.system, sub.Patch([ws.system.prototile_tile(0)]), 8, vols
    )
    assert est.value == pytest.approx(0.44721, abs=1e-3)
    dt = time.time() - t0
    assert dt < 10.0
    report(
        "10 frequency normalization",
        f"freqs ({freqs[0]:.5f}, {freqs[1]:.5f}) vs (0.44721, 0.27639), "
        f"curve {est.value:.5f}, {dt:.1f}s",
    )


def test_criterion_11_count_volume_bound(all_systems):
    # exercise windowed counts on every system, then require a clean audit
    for name, system in all_systems.items():
        universe = sub.supertile_patch(system, 0, 3)
        anchors = universe.anchors_float()
        lo = anchors.min(axis=0)
        hi = anchors.max(axis=0)
        window = Window(tuple(lo - 0.5), tuple(hi + 0.5))
        vmin = 1.0 if system.kappa == 1 else float(
            np.min(geo.prototile_volumes(system).volumes)
        )
        for i in range(system.kappa):
            ana.patch_count(
                sub.Patch([system.prototile_tile(i)]), window, universe,
                vmin=vmin,
                universe_extent=window,
            )
    assert ana.COUNT_AUDIT, "no audited counts were recorded"
    bad = [r for r in ana.COUNT_AUDIT if not r.satisfied]
    assert not bad
    report(
        "11 count volume bound",
        f"{len(ana.COUNT_AUDIT)} audited counts, 0 violations",
    )
