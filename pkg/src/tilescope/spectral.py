"""Dyadic cylinder machinery, cylinder measures, the non-mixing overlap
bound, and dynamical-eigenvalue testing with Pisot verdicts.

Cylinder classes are harvested by sliding the sampling window over a large
exact point sample: the window content changes only when some point crosses
a dyadic grid line, so probing the midpoint of every event cell enumerates
the translation classes together with their exact wiggle boxes.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import mpmath
import numpy as np

from .analysis import integer_coordinates, patch_count
from .geometry import Window
from .numberfield import (
    AlgebraicScalar,
    SymbolicVector,
    UndecidedError,
    field_inv,
    is_pisot,
    is_pisot_family,
    is_totally_non_pisot,
)
from .substitution import (
    KSetCluster,
    Patch,
    SubstitutionSystem,
    supertile_patch,
)

PRECISION_ENV = "TILESCOPE_PRECISION_BITS"
DEFAULT_PRECISION_BITS = 128


def precision_bits() -> int:
    try:
        return int(os.environ.get(PRECISION_ENV, DEFAULT_PRECISION_BITS))
    except ValueError:
        return DEFAULT_PRECISION_BITS


class SpectralError(ValueError):
    pass


# --------------------------------------------------------------------------
# separation and grids
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparationReport:
    eta: float
    m0: int


def separation_constant(sample: KSetCluster) -> SeparationReport:
    """eta = minimal pairwise distance of the support; m0 = least m with
    2^-m < eta/2, so that dyadic cubes of side 2^-m hold at most one point."""
    pts = []
    vecs = []
    for _, p in sample.supp():
        pts.append(p.evaluate())
        vecs.append(p)
    if not pts:
        raise SpectralError("empty sample has no separation constant")
    if len(pts) == 1:
        raise SpectralError("separation constant needs at least two points")
    pts = np.asarray(pts)
    from scipy.spatial import cKDTree

    tree = cKDTree(pts)
    dists, idx = tree.query(pts, k=2)
    nearest = dists[:, 1]
    eta = float(nearest.min())
    if eta < 1e-12:
        i = int(np.argmin(nearest))
        j = int(idx[i, 1])
        if vecs[i] == vecs[j]:
            raise SpectralError(f"duplicate point in sample: {vecs[i]}")
    m0 = 1
    while 2.0 ** (-m0) >= eta / 2.0:
        m0 += 1
        if m0 > 60:
            raise SpectralError("separation constant too small for a dyadic grid")
    return SeparationReport(eta=eta, m0=m0)


@dataclass(frozen=True)
class GridSpec:
    m: int
    eta: float
    m0: int
    dim: int

    def __post_init__(self):
        if self.m < self.m0:
            raise SpectralError(
                f"grid exponent m={self.m} is below m0={self.m0} "
                f"(eta={self.eta}); cubes could hold two points"
            )

    @property
    def side(self) -> float:
        return 2.0 ** (-self.m)

    @property
    def window(self) -> Window:
        r = float(2**self.m)
        return Window((-r,) * self.dim, (r,) * self.dim)


def make_grid(sample: KSetCluster, m: int) -> GridSpec:
    sep = separation_constant(sample)
    dim = next(p for _, p in sample.supp()).dim
    return GridSpec(m=m, eta=sep.eta, m0=sep.m0, dim=dim)


# --------------------------------------------------------------------------
# cylinder census
# --------------------------------------------------------------------------


@dataclass
class CylinderClass:
    """A window cluster up to translation with its dyadic cube pattern and
    the maximal wiggle box keeping every point inside its cube."""

    index: int
    pattern: tuple  # sorted ((cube ints...), colour) pairs; the alpha label
    rep_diffs: tuple  # integer coefficient diffs relative to the first point
    denom: int  # common denominator of the integer coefficients
    colours: tuple  # colour of each rep point, in diff order
    size: int
    wiggle_extents: tuple
    wiggle_volume: float
    measure: float = 0.0  # clipped cell volume per unit region volume
    instances: int = 0

    @property
    def freq(self) -> float:
        """Census estimate of the cluster frequency per unit volume."""
        if self.wiggle_volume <= 0:
            return 0.0
        return self.measure / self.wiggle_volume

    def rep_cluster(self, basis, kappa: int, dim: int) -> KSetCluster:
        """The class representative, anchored at its first point."""
        s = basis.size
        pts = [[] for _ in range(kappa)]
        for colour, row in zip(self.colours, self.rep_diffs):
            coeffs = [
                tuple(Fraction(c, self.denom) for c in row[k * s : (k + 1) * s])
                for k in range(dim)
            ]
            pts[colour].append(SymbolicVector(basis, coeffs))
        return KSetCluster(pts)


@dataclass(frozen=True)
class CylinderCensus:
    grid: GridSpec
    region: Window
    classes: tuple
    empty_measure: float
    total: float
    cells: tuple  # (class index or -1 for empty, lo tuple, hi tuple)

    def per_alpha(self) -> dict:
        groups = {}
        for cls in self.classes:
            groups.setdefault(cls.pattern, []).append(cls)
        return groups


def _axis_breakpoints(coords, side: float, lo: float, hi: float) -> np.ndarray:
    """Sorted event translations {p - k*side} in [lo, hi], plus endpoints."""
    vals = []
    for p in coords:
        kmin = math.ceil((p - hi) / side)
        kmax = math.floor((p - lo) / side)
        if kmax >= kmin:
            ks = np.arange(kmin, kmax + 1)
            vals.append(p - ks * side)
    inner = np.array([])
    if vals:
        v = np.concatenate(vals)
        v = v[(v > lo + 1e-12) & (v < hi - 1e-12)]
        if v.size:
            quant = np.unique(np.round(v / (side * 1e-9)).astype(np.int64))
            inner = quant * (side * 1e-9)
    return np.concatenate([[lo], inner, [hi]])


def build_cylinders(
    sample: KSetCluster,
    grid: GridSpec,
    region: Window,
    max_cells: int = 400_000,
) -> CylinderCensus:
    """Enumerate the cylinder classes seen by sliding the grid window over
    the probe region, with exact wiggle boxes and a measure census.

    The window content of the shifted sample changes only at translations
    where some point crosses a grid line, so the event cells (products of
    consecutive per-axis breakpoints) partition the probe region into
    constant-content pieces.  Each class accumulates the event-cell volume
    of its instances, which makes the census totals a genuine partition of
    the region: the sum can never exceed 1 beyond float noise, and the
    deficit is exactly the mass the finite census could not attribute."""
    if region.dim != grid.dim:
        raise SpectralError("region dimension does not match the grid")
    side = grid.side
    win = grid.window
    d = grid.dim
    needed = Window(
        tuple(r + w for r, w in zip(region.lo, win.lo)),
        tuple(r + w for r, w in zip(region.hi, win.hi)),
    )
    pts_all, colours_all, vecs_all = [], [], []
    for ci, p in sample.supp():
        pts_all.append(p.evaluate())
        colours_all.append(ci)
        vecs_all.append(p)
    if not pts_all:
        raise SpectralError("empty sample")
    pts_all = np.asarray(pts_all)
    bbox_lo = pts_all.min(axis=0)
    bbox_hi = pts_all.max(axis=0)
    slack = max(grid.eta * 1.001, side)
    if not all(
        bl <= nl + slack and bh >= nh - slack
        for bl, nl, bh, nh in zip(bbox_lo, needed.lo, bbox_hi, needed.hi)
    ):
        raise SpectralError(
            f"sample box {tuple(bbox_lo)}..{tuple(bbox_hi)} does not cover "
            f"the probed windows {needed.lo}..{needed.hi}; enlarge the sample"
        )
    keep = np.all(
        (pts_all >= np.array(needed.lo) - side)
        & (pts_all <= np.array(needed.hi) + side),
        axis=1,
    )
    pts = pts_all[keep]
    colours = np.array(colours_all)[keep]
    vecs = [v for v, k in zip(vecs_all, keep) if k]
    ints, denom = integer_coordinates(vecs)

    axes = [
        _axis_breakpoints(np.unique(pts[:, ax]), side, region.lo[ax], region.hi[ax])
        for ax in range(d)
    ]
    n_cells = 1
    for b in axes:
        n_cells *= len(b) - 1
    if n_cells > max_cells:
        raise SpectralError(
            f"census would probe {n_cells} event cells (cap {max_cells}); "
            "shrink the probe region"
        )

    win_lo = np.array(win.lo)
    win_hi = np.array(win.hi)
    reg_lo = np.array(region.lo)
    reg_hi = np.array(region.hi)
    classes: dict = {}
    class_list: list = []
    seen_instances = set()
    cells_out = []
    empty_measure = 0.0
    total = 0.0
    region_vol = region.volume

    mids = [0.5 * (b[:-1] + b[1:]) for b in axes]
    grids = np.meshgrid(*mids, indexing="ij")
    probes = np.stack([g.ravel() for g in grids], axis=1)
    lo_grids = np.meshgrid(*[b[:-1] for b in axes], indexing="ij")
    hi_grids = np.meshgrid(*[b[1:] for b in axes], indexing="ij")
    event_lo = np.stack([g.ravel() for g in lo_grids], axis=1)
    event_hi = np.stack([g.ravel() for g in hi_grids], axis=1)

    for t, cell_lo, cell_hi in zip(probes, event_lo, event_hi):
        vol = _clipped_volume(cell_lo, cell_hi, reg_lo, reg_hi)
        inside = np.all((pts >= t + win_lo) & (pts < t + win_hi), axis=1)
        idxs = np.nonzero(inside)[0]
        if len(idxs) == 0:
            # empty window pattern: the event cell itself is the wiggle room
            empty_measure += vol / region_vol
            total += vol / region_vol
            cells_out.append((-1, tuple(cell_lo), tuple(cell_hi)))
            continue
        cubes = np.floor((pts[idxs] - t) / side).astype(np.int64)
        order = np.lexsort(
            tuple(ints[idxs].T[::-1]) + (colours[idxs],)
        )
        idxs = idxs[order]
        cubes = cubes[order]
        pattern = tuple(
            sorted(
                (tuple(int(c) for c in cube), int(colours[i]))
                for cube, i in zip(cubes, idxs)
            )
        )
        cube_only = {cube for cube, _ in pattern}
        if len(cube_only) != len(pattern):
            raise SpectralError(
                "two sample points share one grid cube; the grid is too "
                "coarse for this sample (increase m)"
            )
        base = ints[idxs[0]]
        diffs = tuple(tuple(int(x) for x in (ints[i] - base)) for i in idxs)
        class_key = (pattern, diffs)
        inst_key = (class_key, tuple(int(x) for x in base))
        if class_key not in classes:
            # maximal wiggle box: intersection over points of (cube - point)
            wiggle_lo = np.max(pts[idxs] - (cubes + 1) * side, axis=0)
            wiggle_hi = np.min(pts[idxs] - cubes * side, axis=0)
            extents = tuple(float(b - a) for a, b in zip(wiggle_lo, wiggle_hi))
            wvol = 1.0
            for e in extents:
                wvol *= max(e, 0.0)
            cls = CylinderClass(
                index=len(class_list),
                pattern=pattern,
                rep_diffs=diffs,
                denom=denom,
                colours=tuple(int(colours[i]) for i in idxs),
                size=len(idxs),
                wiggle_extents=extents,
                wiggle_volume=wvol,
            )
            classes[class_key] = cls
            class_list.append(cls)
        cls = classes[class_key]
        if inst_key not in seen_instances:
            seen_instances.add(inst_key)
            cls.instances += 1
        cls.measure += vol / region_vol
        total += vol / region_vol
        cells_out.append((cls.index, tuple(cell_lo), tuple(cell_hi)))

    return CylinderCensus(
        grid=grid,
        region=region,
        classes=tuple(class_list),
        empty_measure=empty_measure,
        total=total,
        cells=tuple(cells_out),
    )


def _clipped_volume(lo, hi, reg_lo, reg_hi) -> float:
    v = 1.0
    for a, b, ra, rb in zip(lo, hi, reg_lo, reg_hi):
        v *= max(0.0, min(b, rb) - max(a, ra))
    return v


def cylinder_measure(cls: CylinderClass, freq: float) -> float:
    """Measure of the cylinder: wiggle volume times cluster frequency."""
    if freq < 0:
        raise SpectralError("frequencies cannot be negative")
    return cls.wiggle_volume * freq


@dataclass(frozen=True)
class PartitionReport:
    total: float
    per_alpha: tuple  # (pattern size, measure) summaries
    empty_measure: float
    n_classes: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return (
            1.0 - self.tolerance <= self.total <= 1.0 + 1e-9
        )


def partition_check(census: CylinderCensus, tolerance: float = 0.05) -> PartitionReport:
    """Sum of Vol(wiggle) * freq over all classes and patterns: the deficit
    from 1 is the mass the census could not attribute (limit-admitted
    configurations carry none in exact arithmetic)."""
    per_alpha = []
    for pattern, group in sorted(
        census.per_alpha().items(), key=lambda kv: (len(kv[0]), kv[0])
    ):
        per_alpha.append((len(pattern), sum(c.measure for c in group)))
    return PartitionReport(
        total=census.total,
        per_alpha=tuple(per_alpha),
        empty_measure=census.empty_measure,
        n_classes=len(census.classes),
        tolerance=tolerance,
    )


# --------------------------------------------------------------------------
# Birkhoff-style cylinder averages
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BirkhoffCurve:
    alpha_pattern: tuple
    volumes: tuple  # Vol(F_n)
    averages: tuple  # per n: tuple over probe offsets h
    spread: tuple  # per n: max-min over h
    tail_sums: tuple  # per k0 in the grid: sup_h tail average at largest n
    tail_grid: tuple


def birkhoff_cylinder_estimate(
    census: CylinderCensus,
    alpha_pattern: tuple,
    windows: Sequence[Window],
    n_offsets: int = 32,
    seed: int = 20240801,
    tail_grid: Optional[Sequence[int]] = None,
) -> BirkhoffCurve:
    """Window averages of the cylinder indicator over growing boxes F_n and
    a fixed pseudo-random probe set of offsets h; the shrinking spread over
    h is the uniformity evidence, and the k0-tail sums show how much mass
    lives beyond the first k0 classes."""
    rng = np.random.default_rng(seed)
    # offsets sample a fixed fundamental cell of a few separation lengths,
    # wide enough to move instances across the window rims
    cell = 4.0 * max(census.grid.eta, census.grid.side)
    offsets = rng.uniform(0.0, cell, size=(n_offsets, census.grid.dim))
    group = [c for c in census.classes if c.pattern == alpha_pattern]
    if not group:
        raise SpectralError("no census class carries the requested pattern")
    group_idx = {c.index for c in group}
    cells = [
        (ci, np.array(lo), np.array(hi)) for ci, lo, hi in census.cells if ci in group_idx
    ]
    averages = []
    spreads = []
    for w in windows:
        per_h = []
        for h in offsets:
            lo = np.array(w.lo) + h
            hi = np.array(w.hi) + h
            if not all(
                rl <= a and b <= rh + 1e-9
                for rl, rh, a, b in zip(census.region.lo, census.region.hi, lo, hi)
            ):
                raise SpectralError(
                    f"window {w} shifted by {h} leaves the census region; "
                    "use a larger census"
                )
            j = sum(_clipped_volume(clo, chi, lo, hi) for _, clo, chi in cells)
            per_h.append(j / w.volume)
        averages.append(tuple(per_h))
        spreads.append(float(max(per_h) - min(per_h)))
    if tail_grid is None:
        tail_grid = [0, len(group) // 2, len(group)]
    tail_sums = []
    order = sorted(group, key=lambda c: -c.measure)
    wlast = windows[-1]
    for k0 in tail_grid:
        tail = order[k0:]
        tail_idx = {c.index for c in tail}
        worst = 0.0
        for h in offsets:
            lo = np.array(wlast.lo) + h
            hi = np.array(wlast.hi) + h
            j = sum(
                _clipped_volume(clo, chi, lo, hi)
                for ci, clo, chi in cells
                if ci in tail_idx
            )
            worst = max(worst, j / wlast.volume)
        tail_sums.append(worst)
    return BirkhoffCurve(
        alpha_pattern=alpha_pattern,
        volumes=tuple(w.volume for w in windows),
        averages=tuple(averages),
        spread=tuple(spreads),
        tail_sums=tuple(tail_sums),
        tail_grid=tuple(tail_grid),
    )


# --------------------------------------------------------------------------
# non-mixing overlap bound
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MixingReport:
    z: SymbolicVector
    k0: int
    ell: int
    delta: float
    curve: tuple  # (n, pair count, single count, ratio)
    passed: bool


def mixing_overlap_bound(
    sys: SubstitutionSystem,
    z: SymbolicVector,
    volumes: Sequence[float],
    tile_freqs: Sequence[float],
    n_max: int = 3,
    k0_max: int = 8,
) -> MixingReport:
    """Overlap lower bound delta = (1/4) r_l Vol(A_l) |det Q|^-k0 for a legal
    return vector z, with the empirical overlap-frequency curve
    freq(P and Q^n z + P) / freq(P) for P a single type-l tile.

    The bound certifies non-mixing: correlations along Q^n z stay above
    2*delta instead of decaying to freq(P)^2."""
    sys.require_primitive("mixing_overlap_bound")
    k0 = None
    ell = None
    for k in range(k0_max + 1):
        for i in range(sys.kappa):
            patch = supertile_patch(sys, i, k)
            for t in patch:
                if patch.has(t.type, t.shift + z):
                    k0 = k
                    ell = t.type
                    break
            if k0 is not None:
                break
        if k0 is not None:
            break
    if k0 is None:
        raise SpectralError(
            f"return vector {z} is not witnessed legal within {k0_max} "
            "substitution rounds"
        )
    det = sys.Q.det_abs
    delta = 0.25 * tile_freqs[ell] * volumes[ell] * det ** (-k0)
    curve = []
    base = sys.prototile_tile(0).shift  # zero vector
    for n in range(n_max + 1):
        qnz = sys.Q.apply(z, n) if n else z
        depth = n + k0 + 1
        universe = supertile_patch(sys, 0, depth)
        pair = Patch(
            [
                sys.prototile_tile(ell),
                sys.prototile_tile(ell)._replace(shift=qnz),
            ]
        )
        single = Patch([sys.prototile_tile(ell)])
        c_pair = patch_count(pair, None, universe)
        c_single = patch_count(single, None, universe)
        ratio = c_pair / c_single if c_single else 0.0
        curve.append((n, c_pair, c_single, ratio))
    passed = curve[-1][3] > 2 * delta
    return MixingReport(
        z=z, k0=k0, ell=ell, delta=delta, curve=tuple(curve), passed=passed
    )


# --------------------------------------------------------------------------
# eigenvalue residues and tests
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidueEntry:
    n: int
    value: float
    exact_zero: bool
    method: str  # 'exact' | 'float'


@dataclass(frozen=True)
class ResidueSequence:
    alpha: SymbolicVector
    entries: tuple
    truncated_at: Optional[int]
    notice: Optional[str]


def _scalar_residue(basis, scalar, dps) -> tuple:
    """Distance of an exact scalar's value to the nearest integer.

    Rational scalars reduce exactly; anything else is evaluated in
    high-precision floats."""
    if basis.is_rational(scalar):
        q = scalar[0]
        frac = q - round(q)
        return abs(float(frac)), frac == 0, "exact"
    with mpmath.workdps(dps):
        val = basis.eval_scalar_mp(scalar, dps)
        res = abs(val - mpmath.nint(val))
        return float(res), False, "float"


def eigenvalue_residues(
    sys: SubstitutionSystem,
    alpha: SymbolicVector,
    xi,
    N: int,
    prec_bits: Optional[int] = None,
) -> ResidueSequence:
    """s_n = max over return vectors z of dist(<Q^n z, alpha>, Z), exact when
    the pairing reduces to a rational, else in high-precision floats.

    Residues start at n = 1 (the eigenvalue criterion is a limit statement).
    When the working precision cannot absorb the |Q|^n amplification the
    sequence is truncated with a notice."""
    if N < 1:
        raise SpectralError("need N >= 1")
    bits = prec_bits if prec_bits is not None else precision_bits()
    dps = max(int(bits * 0.30103), 25)
    basis = sys.basis
    vectors = list(xi.vectors) if hasattr(xi, "vectors") else list(xi)
    if not vectors:
        raise SpectralError("eigenvalue residues need return vectors")
    opnorm = float(np.linalg.norm(sys.Q.numeric, 2))
    entries = []
    truncated_at = None
    notice = None
    current = list(vectors)
    for n in range(1, N + 1):
        needed_bits = n * math.log2(max(opnorm, 1.0 + 1e-9)) + 40
        if needed_bits > bits:
            truncated_at = n
            notice = (
                f"residues truncated at n={n}: would need ~{int(needed_bits)} "
                f"bits, budget is {bits} ({PRECISION_ENV})"
            )
            break
        current = [sys.Q.apply(v) for v in current]
        worst = 0.0
        all_exact_zero = True
        methods = set()
        for v in current:
            inner = basis.zero_scalar()
            for i in range(sys.dim):
                inner = basis.add(
                    inner, basis.multiply(v.coeffs[i], alpha.coeffs[i])
                )
            val, is_zero, method = _scalar_residue(basis, inner, dps)
            methods.add(method)
            if not (method == "exact" and is_zero):
                all_exact_zero = False
            worst = max(worst, val)
        entries.append(
            ResidueEntry(
                n=n,
                value=worst,
                exact_zero=all_exact_zero,
                method="exact" if methods == {"exact"} else "float",
            )
        )
    return ResidueSequence(
        alpha=alpha, entries=tuple(entries), truncated_at=truncated_at, notice=notice
    )


@dataclass(frozen=True)
class EigenvalueVerdict:
    alpha: SymbolicVector
    status: str  # 'ExactPass' | 'NumericPass' | 'Fail'
    rho: Optional[float]
    fit_residual: Optional[float]
    fail_n: Optional[int]
    fail_residue: Optional[float]
    period_ok: bool
    residues: ResidueSequence

    @property
    def passed(self) -> bool:
        return self.status in ("ExactPass", "NumericPass") and self.period_ok


def eigenvalue_test(
    sys: SubstitutionSystem,
    alpha: SymbolicVector,
    xi,
    periods: Sequence[SymbolicVector] = (),
    N: int = 30,
    prec_bits: Optional[int] = None,
) -> EigenvalueVerdict:
    """ExactPass when every residue vanishes exactly; NumericPass when the
    tail residues fit a geometric decay (slope < 0, log-residual < 0.5);
    Fail otherwise, reporting the worst tail point.  period_ok requires
    <g, alpha> to be an exact integer for every detected period g."""
    seq = eigenvalue_residues(sys, alpha, xi, N, prec_bits)
    basis = sys.basis
    period_ok = True
    for g in periods:
        inner = basis.zero_scalar()
        for i in range(sys.dim):
            inner = basis.add(inner, basis.multiply(g.coeffs[i], alpha.coeffs[i]))
        if not (basis.is_rational(inner) and inner[0].denominator == 1):
            period_ok = False
    entries = seq.entries
    if not entries:
        return EigenvalueVerdict(
            alpha=alpha, status="Fail", rho=None, fit_residual=None,
            fail_n=None, fail_residue=None, period_ok=period_ok, residues=seq,
        )
    if all(e.exact_zero for e in entries):
        return EigenvalueVerdict(
            alpha=alpha, status="ExactPass", rho=None, fit_residual=None,
            fail_n=None, fail_residue=None, period_ok=period_ok, residues=seq,
        )
    # geometric-decay fit on the second half (transients excluded); the fit
    # must show genuine decay (at least a halving across the window), or a
    # flat noise sequence would sneak through with rho marginally below 1
    tail = [e for e in entries if e.n >= entries[-1].n / 2]
    xs = np.array([e.n for e in tail if e.value > 0], dtype=float)
    ys = np.array([math.log(e.value) for e in tail if e.value > 0])
    if len(xs) >= 2:
        slope, intercept = np.polyfit(xs, ys, 1)
        resid = float(np.sqrt(np.mean((ys - (slope * xs + intercept)) ** 2)))
        span = xs[-1] - xs[0]
        if slope < 0 and resid < 0.5 and slope * span < math.log(0.5):
            return EigenvalueVerdict(
                alpha=alpha, status="NumericPass", rho=float(math.exp(slope)),
                fit_residual=resid, fail_n=None, fail_residue=None,
                period_ok=period_ok, residues=seq,
            )
    elif not xs.size:
        # tail is exactly zero but earlier entries were not: treat as decay
        return EigenvalueVerdict(
            alpha=alpha, status="ExactPass", rho=None, fit_residual=None,
            fail_n=None, fail_residue=None, period_ok=period_ok, residues=seq,
        )
    worst = max(tail, key=lambda e: e.value)
    return EigenvalueVerdict(
        alpha=alpha, status="Fail", rho=None, fit_residual=None,
        fail_n=worst.n, fail_residue=worst.value, period_ok=period_ok,
        residues=seq,
    )


# --------------------------------------------------------------------------
# Pisot verdicts for candidate eigenvalues and the expansion
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaPisotReport:
    alpha: SymbolicVector
    theta_indices: tuple  # positions into sys.Q.eigenvalues
    family: bool
    undecided: bool


def pisot_family_of_alpha(sys: SubstitutionSystem, alpha: SymbolicVector) -> AlphaPisotReport:
    """Eigenvalues of Q whose eigenvectors pair nontrivially with alpha, and
    whether that subset is a Pisot family.

    For a diagonal expansion the pairing is the exact alpha coordinate; for
    general diagonalizable Q it is numeric with an undecided flag near
    zero."""
    sys.Q.require_eigen_data("pisot_family_of_alpha")
    undecided = False
    chosen = []
    if sys.Q.is_diagonal:
        # eigenvector of coordinate i is e_i; pairing = alpha coordinate i
        diag = [sys.Q.entries[i][i] for i in range(sys.dim)]
        for idx, ev in enumerate(sys.Q.eigenvalues):
            hit = False
            for i in range(sys.dim):
                scal = diag[i]
                if _scalar_matches_eigen(sys, scal, ev.value):
                    if any(c != 0 for c in alpha.coeffs[i]):
                        hit = True
            if hit:
                chosen.append(idx)
    else:
        vals, vecs = np.linalg.eig(sys.Q.numeric)
        af = alpha.evaluate()
        for idx, ev in enumerate(sys.Q.eigenvalues):
            hit = False
            for k in range(len(vals)):
                if abs(vals[k] - ev.value.root) < 1e-8:
                    pairing = abs(np.vdot(vecs[:, k], af))
                    if pairing >= 1e-9:
                        hit = True
                    elif pairing > 0:
                        undecided = True
            if hit:
                chosen.append(idx)
    thetas = [sys.Q.eigenvalues[i].value for i in chosen]
    family = is_pisot_family(thetas) if thetas else True
    return AlphaPisotReport(
        alpha=alpha, theta_indices=tuple(chosen), family=family, undecided=undecided
    )


def _scalar_matches_eigen(sys, scal, eigen: AlgebraicScalar) -> bool:
    val = sys.basis.eval_scalar(scal)
    return abs(val - eigen.root.real) < 1e-9 and abs(eigen.root.imag) < 1e-9


@dataclass(frozen=True)
class PisotClassification:
    entries: tuple  # (eigenvalue str, is_pisot or None, margin or None)
    family: bool
    totally_non_pisot: bool
    undecided: bool


def pisot_classification(sys: SubstitutionSystem) -> PisotClassification:
    """Pisot status of each declared expansion eigenvalue plus the family and
    totally-non-Pisot verdicts of the whole eigenvalue set."""
    sys.Q.require_eigen_data("pisot_classification")
    thetas = [e.value for e in sys.Q.eigenvalues]
    dedup = []
    for t in thetas:
        if not any(t.same_root(u) for u in dedup):
            dedup.append(t)
    entries = []
    undecided = False
    for t in dedup:
        verdict = None
        margin = None
        if t.is_real and t.root.real > 1.0:
            try:
                pv = is_pisot(t)
                verdict, margin = pv.is_pisot, pv.margin
            except UndecidedError:
                undecided = True
        entries.append((str(t), verdict, margin))
    try:
        family = is_pisot_family(dedup)
        tnp = is_totally_non_pisot(dedup)
    except UndecidedError:
        undecided = True
        family = False
        tnp = False
    return PisotClassification(
        entries=tuple(entries), family=family, totally_non_pisot=tnp,
        undecided=undecided,
    )


# --------------------------------------------------------------------------
# candidate eigenvalues
# --------------------------------------------------------------------------


def default_alpha_candidates(sys: SubstitutionSystem, declared=()):
    """Candidate vectors for the eigenvalue criterion: declared ones, axis
    duals (e_i and e_i/lambda_i for integer axis eigenvalues), and the
    field inverse of a single algebraic generator of an axis digit set."""
    basis = sys.basis
    out = []
    seen = set()

    def push(vec, tag):
        if vec.is_zero():
            return
        if vec.key() in seen:
            return
        seen.add(vec.key())
        out.append((vec, tag))

    for v in declared:
        push(v, "declared")
    if sys.Q.is_diagonal:
        for i in range(sys.dim):
            lam = sys.Q.entries[i][i]
            e_i = SymbolicVector.from_rationals(
                basis, [1 if k == i else 0 for k in range(sys.dim)]
            )
            push(e_i, "axis")
            if basis.is_rational(lam) and lam[0].denominator == 1 and lam[0] != 0:
                push(e_i.scale(Fraction(1, lam[0].numerator)), "axis")
            # single-symbol generator of the axis digit coordinates
            support = set()
            rationals_only = True
            for ii in range(sys.kappa):
                for jj in range(sys.kappa):
                    for d_vec in sys.digits[ii, jj]:
                        row = d_vec.coeffs[i]
                        for k, c in enumerate(row):
                            if c != 0 and k > 0:
                                support.add(k)
                            if c != 0 and k == 0:
                                rationals_only = rationals_only and False
            if len(support) == 1 and rationals_only:
                k = support.pop()
                sym = basis.symbols[k]
                if sym.algebraic is not None and sym.algebraic.minpoly.degree == 2:
                    inv = field_inv(sym.algebraic.minpoly, (Fraction(0), Fraction(1)))
                    scal = (inv[0],) + tuple(
                        inv[1] if kk == k else Fraction(0)
                        for kk in range(1, basis.size)
                    )
                    coeffs = [
                        scal if kk == i else basis.zero_scalar()
                        for kk in range(sys.dim)
                    ]
                    push(SymbolicVector(basis, coeffs), "generator-inverse")
    return out


# --------------------------------------------------------------------------
# final verdict assembly
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WeakMixingReport:
    verdict: str  # 'WEAKLY_MIXING' | 'NOT_WEAKLY_MIXING' | 'INCONCLUSIVE'
    reason: str
    passing: tuple  # alpha strings that certified eigenvalues
    warnings: tuple


def weak_mixing_verdict(
    sys: SubstitutionSystem,
    pisot: PisotClassification,
    eigen_results: Sequence[EigenvalueVerdict],
    flc_verdict: Optional[str] = None,
    rigidity_status: Optional[str] = None,
) -> WeakMixingReport:
    """Totally non-Pisot expansion eigenvalues force weak mixing; a passing
    nonzero candidate eigenvalue refutes it; otherwise inconclusive.
    Cross-checks flag internal inconsistencies with the structure verdicts."""
    passing = [r for r in eigen_results if r.passed and not r.alpha.is_zero()]
    warnings = []
    if pisot.totally_non_pisot:
        verdict = "WEAKLY_MIXING"
        reason = "the expansion eigenvalue set is totally non-Pisot"
        if passing:
            warnings.append(
                "internal inconsistency: weakly mixing by the Pisot test, "
                "yet candidate eigenvalues passed: "
                + ", ".join(repr(r.alpha) for r in passing)
            )
    elif passing:
        verdict = "NOT_WEAKLY_MIXING"
        reason = "nontrivial dynamical eigenvalue certified: " + ", ".join(
            f"{r.alpha!r} ({r.status})" for r in passing
        )
    else:
        verdict = "INCONCLUSIVE"
        reason = (
            "no candidate eigenvalue passed and the expansion eigenvalues "
            "are not totally non-Pisot"
        )
    if passing:
        span = np.vstack([r.alpha.evaluate() for r in passing])
        if np.linalg.matrix_rank(span, tol=1e-9) >= sys.dim:
            if flc_verdict == "ILC_evidence" or rigidity_status == "not_rigid":
                warnings.append(
                    "full-rank passing eigenvalue family alongside "
                    f"{'ILC evidence' if flc_verdict == 'ILC_evidence' else ''}"
                    f"{' and ' if flc_verdict == 'ILC_evidence' and rigidity_status == 'not_rigid' else ''}"
                    f"{'a NotRigid verdict' if rigidity_status == 'not_rigid' else ''}"
                    ": relatively dense eigenvalues require the Meyer "
                    "property and rigidity, flagging as inconsistent"
                )
    return WeakMixingReport(
        verdict=verdict,
        reason=reason,
        passing=tuple(repr(r.alpha) for r in passing),
        warnings=tuple(warnings),
    )
