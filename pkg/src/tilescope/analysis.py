"""Patch statistics and structure verdicts: exact pattern counting,
frequencies, return vectors, local-complexity and Meyer heuristics, period
detection, and the rigidity check on the return-vector module.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .geometry import Window
from .numberfield import (
    SymbolicVector,
    frac_rank,
    in_lattice,
    lattice_hnf,
)
from .substitution import (
    KSetCluster,
    LegalityVerdict,
    Patch,
    SubstitutionSystem,
    Tile,
    is_legal,
    patch_to_kset,
    pf_eigen,
    seed_patch,
    substitute,
    supertile_patch,
)


class AnalysisError(ValueError):
    pass


# --------------------------------------------------------------------------
# exact pattern counting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CountRecord:
    count: int
    window_volume: float
    vmin: float

    @property
    def satisfied(self) -> bool:
        return self.count * self.vmin <= self.window_volume * (1.0 + 1e-9)


#: every windowed count with a known minimal prototile volume lands here,
#: so the volume bound can be asserted globally over a whole run
COUNT_AUDIT: list = []


def patch_count(
    pattern: Patch,
    window: Optional[Window],
    universe: Patch,
    tile_bboxes: Optional[Sequence[Window]] = None,
    vmin: Optional[float] = None,
    universe_extent: Optional[Window] = None,
) -> int:
    """Number of exact translates of `pattern` inside `universe`.

    A translate counts when all its tiles are present (exact shift match)
    and, with a window, its support sits inside the window (tile supports
    are taken as anchor + prototile bounding box when bboxes are supplied,
    anchors alone otherwise).

    When both a window and the universe's covered extent are given, the
    extent must contain the window; otherwise instances near the rim could
    be silently missing.  Counts with a window and vmin are audited against
    count * vmin <= Vol(window)."""
    if len(pattern) == 0:
        raise AnalysisError("cannot count the empty patch")
    if window is not None and universe_extent is not None:
        needed = window
        if not all(
            a <= b and c >= d
            for a, b, c, d in zip(
                universe_extent.lo, needed.lo, universe_extent.hi, needed.hi
            )
        ):
            raise AnalysisError(
                f"universe covers {universe_extent} but the count window "
                f"{window} requires it; enlarge the universe patch"
            )
    ref = pattern.tiles[0]
    rest = pattern.tiles[1:]
    count = 0
    for cand in universe.tiles_of_type(ref.type):
        g = cand.shift - ref.shift
        if not all(universe.has(t.type, t.shift + g) for t in rest):
            continue
        if window is not None and not _supports_inside(pattern, g, window, tile_bboxes):
            continue
        count += 1
    if window is not None and vmin is not None:
        record = CountRecord(count, window.volume, vmin)
        COUNT_AUDIT.append(record)
        if not record.satisfied:
            raise AnalysisError(
                f"count {count} violates the volume bound "
                f"{count} * {vmin} > {window.volume}"
            )
    return count


def _supports_inside(pattern, g, window, tile_bboxes) -> bool:
    gf = g.evaluate()
    for t in pattern.tiles:
        anchor = t.shift.evaluate() + gf
        if tile_bboxes is None:
            if not window.contains(anchor):
                return False
        else:
            bb = tile_bboxes[t.type]
            lo = anchor + np.array(bb.lo)
            hi = anchor + np.array(bb.hi)
            if not all(
                wl <= a and b <= wh + 1e-12
                for wl, wh, a, b in zip(window.lo, window.hi, lo, hi)
            ):
                return False
    return True


# --------------------------------------------------------------------------
# frequencies
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyEstimate:
    pattern_size: int
    curve: tuple  # (level, count, region_volume, ratio) per base type chained
    value: float
    error: float
    type_independence_gap: Optional[float]
    legality: LegalityVerdict

    @property
    def cauchy_decreasing(self) -> bool:
        by_type = {}
        for level, count, vol, ratio, base in self.curve:
            by_type.setdefault(base, []).append(ratio)
        for ratios in by_type.values():
            diffs = [abs(b - a) for a, b in zip(ratios, ratios[1:])]
            if len(diffs) >= 2 and not all(
                b <= a + 1e-12 for a, b in zip(diffs, diffs[1:])
            ):
                return False
        return True


def spectral_gap_factor(S: np.ndarray) -> float:
    """PF convergence factor lambda1/(lambda1 - |lambda2|) used to scale the
    last-difference error estimate; falls back to 1 when no gap is visible."""
    vals = sorted(np.abs(np.linalg.eigvals(S.astype(float))), reverse=True)
    if len(vals) < 2 or vals[0] - vals[1] < 1e-12:
        return 1.0
    return float(vals[0] / (vals[0] - vals[1]))


def patch_frequency(
    sys: SubstitutionSystem,
    pattern: Patch,
    n_levels: int,
    volumes: Sequence[float],
    base_types: Optional[Sequence[int]] = None,
    legality_k: Optional[int] = None,
) -> FrequencyEstimate:
    """Frequency per unit volume from supertile count curves.

    Counts exact translates of the pattern inside omega^n(T_i) and divides
    by |det Q|^n Vol(A_i); the limit exists for legal patterns and is
    type-independent, which is checked across two base types.  Patterns that
    are not provably legal go through the same counting (their curves sit at
    or collapse to zero)."""
    sys.require_primitive("patch_frequency")
    det = sys.Q.det_abs
    if base_types is None:
        base_types = [0, int(np.argmin(volumes))]
    base_types = sorted(set(base_types))
    legality = is_legal(
        sys, patch_to_kset(sys, pattern), legality_k if legality_k else n_levels + 2
    )
    curve = []
    finals = {}
    prev_by_type = {}
    for base in base_types:
        for n in range(1, n_levels + 1):
            universe = supertile_patch(sys, base, n)
            count = patch_count(pattern, None, universe)
            vol = det**n * volumes[base]
            ratio = count / vol
            curve.append((n, count, vol, ratio, base))
            prev_by_type.setdefault(base, []).append(ratio)
        finals[base] = prev_by_type[base][-1]
    first = base_types[0]
    ratios = prev_by_type[first]
    if len(ratios) >= 2:
        error = abs(ratios[-1] - ratios[-2]) * spectral_gap_factor(sys.S)
    else:
        error = float("inf")
    gap = None
    if len(base_types) >= 2:
        gap = abs(finals[base_types[0]] - finals[base_types[1]])
    return FrequencyEstimate(
        pattern_size=len(pattern),
        curve=tuple(curve),
        value=ratios[-1],
        error=error,
        type_independence_gap=gap,
        legality=legality,
    )


def tile_frequencies(sys: SubstitutionSystem, volumes: Sequence[float]) -> np.ndarray:
    """Right PF eigenvector of S normalized so sum r_i Vol(A_i) = 1."""
    sys.require_primitive("tile_frequencies")
    if volumes is None:
        raise AnalysisError("tile frequencies need prototile volumes")
    _, right, _ = pf_eigen(sys.S)
    right = np.abs(right)
    return right / float(np.dot(right, np.asarray(volumes, dtype=float)))


class FrequencyTable:
    """Named patch-frequency estimates with the density normalization check."""

    def __init__(self):
        self.entries = {}

    def add(self, name: str, estimate: FrequencyEstimate):
        self.entries[name] = estimate

    def density_check(self, tile_freqs, volumes, tol: float = 1e-6) -> bool:
        total = float(np.dot(tile_freqs, np.asarray(volumes, dtype=float)))
        return abs(total - 1.0) <= tol


# --------------------------------------------------------------------------
# integer coordinates (fast exact dedup for pair scans)
# --------------------------------------------------------------------------


def integer_coordinates(vectors: Sequence[SymbolicVector]):
    """Flattened coefficients scaled to integers by the common denominator.

    Returns (int64 array of shape (n, d*s), lcm denominator)."""
    denom = 1
    for v in vectors:
        for row in v.coeffs:
            for c in row:
                if c.denominator != 1:
                    denom = denom * c.denominator // np.gcd(denom, c.denominator)
    n = len(vectors)
    if n == 0:
        return np.zeros((0, 0), dtype=np.int64), denom
    width = len(vectors[0].coeffs) * len(vectors[0].coeffs[0])
    out = np.empty((n, width), dtype=np.int64)
    for k, v in enumerate(vectors):
        out[k] = [int(c * denom) for row in v.coeffs for c in row]
    return out, denom


def _pairs_within(anchors: np.ndarray, radius: float):
    """Index pairs (i, j), i != j, with |anchor_i - anchor_j| <= radius."""
    from scipy.spatial import cKDTree

    tree = cKDTree(anchors)
    return tree.query_pairs(radius, output_type="ndarray")


# --------------------------------------------------------------------------
# return vectors
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ReturnVectorSet:
    vectors: tuple  # SymbolicVector, zero excluded, closed under negation
    witness: dict  # coeff key -> (level, type)
    legal_only: bool

    def __len__(self):
        return len(self.vectors)

    def key_set(self):
        return {v.key() for v in self.vectors}


def return_vectors(sys: SubstitutionSystem, level: int, radius: float) -> ReturnVectorSet:
    """Exact displacements between same-type tiles within `radius` inside
    the level-`level` supertiles (all prototypes), deduplicated exactly.

    Harvested inside omega^level(T_j), so every vector is witnessed by a
    legal patch."""
    if level < 1:
        raise AnalysisError("return vectors need level >= 1")
    found = {}
    for j in range(sys.kappa):
        patch = supertile_patch(sys, j, level)
        for ti in range(sys.kappa):
            tiles = patch.tiles_of_type(ti)
            if len(tiles) < 2:
                continue
            anchors = np.vstack([t.shift.evaluate() for t in tiles])
            ints, denom = integer_coordinates([t.shift for t in tiles])
            pairs = _pairs_within(anchors, radius)
            if not len(pairs):
                continue
            diffs = ints[pairs[:, 0]] - ints[pairs[:, 1]]
            diffs = np.unique(np.vstack([diffs, -diffs]), axis=0)
            basis = sys.basis
            s = basis.size
            for row in diffs:
                if not row.any():
                    continue
                coeffs = tuple(
                    tuple(Fraction(int(c), denom) for c in row[k * s : (k + 1) * s])
                    for k in range(sys.dim)
                )
                if coeffs not in found:
                    found[coeffs] = (
                        SymbolicVector(basis, coeffs),
                        (level, j),
                    )
    vectors = tuple(v for v, _ in sorted(found.values(), key=lambda t: t[0].key()))
    witness = {k: w for k, (v, w) in found.items()}
    return ReturnVectorSet(vectors=vectors, witness=witness, legal_only=True)


# --------------------------------------------------------------------------
# FLC / ILC scan
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FlcReport:
    verdict: str  # 'FLC_evidence' | 'ILC_evidence' | 'UNDETERMINED'
    counts: tuple
    min_gaps: tuple
    epsilon: float
    note: str


def flc_scan(
    sys: SubstitutionSystem,
    levels: int,
    radius: float,
    eps: float = 1e-6,
) -> FlcReport:
    """Count distinct two-tile configurations (type pair + exact displacement)
    within `radius` in the growing fixed-point patch.

    Evidence labels, never proof: FLC when the counts stabilize over two
    consecutive levels; ILC when they grow at every level and the distinct
    displacements accumulate (two of them within eps numerically while
    exactly distinct, or the minimal gap strictly shrinking level over
    level)."""
    if levels < 3:
        raise AnalysisError("flc scan needs at least 3 levels")
    counts = []
    min_gaps = []
    for n in range(1, levels + 1):
        patch = seed_patch(sys, n)
        configs = {}
        tiles = patch.tiles
        anchors = patch.anchors_float()
        ints, denom = integer_coordinates([t.shift for t in tiles])
        types = np.array([t.type for t in tiles])
        pairs = _pairs_within(anchors, radius)
        gap = float("inf")
        if len(pairs):
            ta = types[pairs[:, 0]]
            tb = types[pairs[:, 1]]
            swap = ta > tb
            pa = np.where(swap, pairs[:, 1], pairs[:, 0])
            pb = np.where(swap, pairs[:, 0], pairs[:, 1])
            ta, tb = np.minimum(ta, tb), np.maximum(ta, tb)
            diffs = ints[pb] - ints[pa]
            same = ta == tb
            # canonical sign for same-type pairs: lexicographically positive
            nz = diffs != 0
            first = np.argmax(nz, axis=1)
            lead = diffs[np.arange(len(diffs)), first]
            flip = same & (lead < 0)
            diffs[flip] = -diffs[flip]
            keyed = np.column_stack([ta, tb, diffs])
            uniq = np.unique(keyed, axis=0)
            for (a, b) in {(int(x), int(y)) for x, y in uniq[:, :2]}:
                rows = uniq[(uniq[:, 0] == a) & (uniq[:, 1] == b)][:, 2:]
                g = _min_float_gap(sys, rows, denom)
                gap = min(gap, g)
            counts.append(len(uniq))
        else:
            counts.append(0)
        min_gaps.append(gap)
    growing = all(b > a for a, b in zip(counts, counts[1:]))
    stabilized = counts[-1] == counts[-2]
    finite_gaps = [g for g in min_gaps if np.isfinite(g)]
    shrinking = len(finite_gaps) >= 2 and (
        all(b < a for a, b in zip(finite_gaps[-3:], finite_gaps[-2:]))
        or finite_gaps[-1] < 0.5 * finite_gaps[0]
    )
    verdict = "UNDETERMINED"
    note = ""
    if stabilized:
        verdict = "FLC_evidence"
        note = f"configuration count stable at {counts[-1]} over two levels"
    elif growing and (min_gaps[-1] < eps or shrinking):
        verdict = "ILC_evidence"
        if min_gaps[-1] < eps:
            note = (
                f"distinct displacements within {eps} of each other "
                f"(gap {min_gaps[-1]:.3e})"
            )
        else:
            note = (
                "configuration count grows every level and the minimal "
                f"displacement gap accumulates ({finite_gaps[0]:.3e} -> "
                f"{finite_gaps[-1]:.3e})"
            )
    elif growing:
        verdict = "UNDETERMINED"
        note = "counts grow every level without an accumulation witness"
    return FlcReport(
        verdict=verdict,
        counts=tuple(counts),
        min_gaps=tuple(min_gaps),
        epsilon=eps,
        note=note,
    )


def _lex_negative(row) -> bool:
    for x in row:
        if x > 0:
            return False
        if x < 0:
            return True
    return False


def _min_float_gap(sys, int_rows: np.ndarray, denom: int) -> float:
    """Minimal euclidean gap between distinct exact displacement vectors."""
    if len(int_rows) < 2:
        return float("inf")
    s = sys.basis.size
    floats = (
        int_rows.reshape(len(int_rows), sys.dim, s) @ sys.basis.float_values
    ) / denom
    best = float("inf")
    block = 512
    for i in range(0, len(floats), block):
        chunk = floats[i : i + block]
        d2 = ((chunk[:, None, :] - floats[None, :, :]) ** 2).sum(axis=2)
        d2[d2 < 1e-24] = np.inf  # same vector (rows are unique, safety only)
        ii, jj = np.unravel_index(np.argmin(d2), d2.shape)
        if np.isfinite(d2[ii, jj]):
            best = min(best, float(np.sqrt(d2[ii, jj])))
    return best


# --------------------------------------------------------------------------
# periods
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PeriodCandidate:
    vector: SymbolicVector
    matches: int
    window: Window


def detect_periods(
    sys: SubstitutionSystem,
    level: int,
    window: Window,
    min_matches: int = 5,
) -> list:
    """Exact translation candidates t with (patch in W) + t = patch in (W + t).

    Candidates are return vectors of the fixed-point patch (a period of the
    fixed point must be a return vector); each is verified by restricted
    exact matching over the window."""
    patch = seed_patch(sys, level)
    anchors = patch.anchors_float()
    covered = Window(tuple(anchors.min(axis=0)), tuple(anchors.max(axis=0) + 1e-9))
    margin = sys.max_digit_norm()
    safe = covered.erode(margin) or covered
    radius = max(b - a for a, b in zip(window.lo, window.hi))
    rvs = return_vectors(sys, min(level, 2), radius / 2)
    out = []
    seen = set()
    for t in rvs.vectors:
        key = t.key()
        if key in seen:
            continue
        seen.add(key)
        seen.add((-t).key())
        if _lex_negative([c for row in t.coeffs for c in row]):
            t = -t
        tf = t.evaluate()
        # only tiles whose translate stays inside the generated region count
        domain = safe.intersect(
            Window(tuple(a - x for a, x in zip(safe.lo, tf)), tuple(b - x for b, x in zip(safe.hi, tf)))
        )
        if domain is None:
            continue
        domain = domain.intersect(window)
        if domain is None:
            continue
        matches = 0
        ok = True
        for tile in patch:
            anchor = tile.shift.evaluate()
            if not domain.contains(anchor):
                continue
            if patch.has(tile.type, tile.shift + t):
                matches += 1
            else:
                ok = False
                break
        if ok and matches >= min_matches:
            out.append(PeriodCandidate(vector=t, matches=matches, window=domain))
    out.sort(key=lambda c: float(np.linalg.norm(c.vector.evaluate())))
    return out


# --------------------------------------------------------------------------
# Meyer scan
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MeyerScan:
    min_gap: float
    n_vectors: int


def meyer_scan(xi: ReturnVectorSet, window: Window, max_points: int = 300) -> MeyerScan:
    """Minimal pairwise gap among distinct vectors of (Xi - Xi) inside the
    window; a gap bounded away from zero across growing samples is evidence
    toward the Meyer property, decay is evidence against."""
    if not xi.vectors:
        raise AnalysisError("meyer scan needs a nonempty return-vector set")
    kept = [v for v in xi.vectors if window.contains(v.evaluate())]
    if len(kept) < 2:
        return MeyerScan(min_gap=float("inf"), n_vectors=len(kept))
    kept.sort(key=lambda v: float(np.linalg.norm(v.evaluate())))
    kept = kept[:max_points]
    ints, denom = integer_coordinates(kept)
    n = len(ints)
    ii, jj = np.triu_indices(n, 1)
    diff_ints = np.unique(
        np.vstack([ints[ii] - ints[jj], ints, np.zeros((1, ints.shape[1]), dtype=np.int64)]),
        axis=0,
    )
    s = len(xi.vectors[0].coeffs[0])
    dim = len(xi.vectors[0].coeffs)
    basis = xi.vectors[0].basis
    floats = (diff_ints.reshape(len(diff_ints), dim, s) @ basis.float_values) / denom
    from scipy.spatial import cKDTree

    tree = cKDTree(floats)
    dists, _ = tree.query(floats, k=2)
    gap = float(dists[:, 1].min())
    return MeyerScan(min_gap=gap, n_vectors=len(kept))


# --------------------------------------------------------------------------
# rigidity
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RigidityVerdict:
    status: str  # 'rigid' | 'not_rigid' | 'inapplicable'
    qdim: int
    bound: Optional[int]
    witness: Optional[tuple]
    excess: Optional[int]
    reason: Optional[str]
    heuristic_generators: Optional[tuple]


def _zq_lattice_rows(sys: SubstitutionSystem, vectors, max_rounds=None):
    """Integer HNF rows (with the common denominator) of the smallest
    Q-stable lattice containing the vectors' coefficient rows."""
    rows = [v.flatten() for v in vectors]
    width = sys.dim * sys.basis.size
    if max_rounds is None:
        max_rounds = 2 * width
    denom = 1
    for r in rows:
        for c in r:
            denom = denom * c.denominator // np.gcd(denom, c.denominator)
    action = sys.Q.action
    current = [[c * denom for c in r] for r in rows]
    hnf = None
    for _ in range(max_rounds):
        ints = []
        local = 1
        for r in current:
            for c in r:
                local = local * c.denominator // np.gcd(local, c.denominator)
        denom *= local
        ints = [[int(c * local) for c in r] for r in current]
        new_hnf = lattice_hnf(ints)
        if hnf is not None and new_hnf == hnf:
            break
        hnf = new_hnf
        fracs = [[Fraction(c) for c in r] for r in hnf]
        grown = list(fracs)
        for r in fracs:
            grown.append(
                [sum(action[i][k] * r[k] for k in range(width)) for i in range(width)]
            )
        current = grown
    return hnf, denom


def _in_zq_module(hnf_rows, denom: int, vector: SymbolicVector) -> bool:
    flat = vector.flatten()
    scaled = []
    for c in flat:
        q = c * denom
        if q.denominator != 1:
            return False
        scaled.append(int(q))
    return in_lattice(hnf_rows, scaled)


def rigidity_check(sys: SubstitutionSystem, xi: ReturnVectorSet) -> RigidityVerdict:
    """Rigidity of the return-vector module.

    Applicable when the declared expansion eigenvalues are algebraic
    conjugates (one shared minimal polynomial) with equal multiplicity.
    The rational dimension of the Q-stable span of the return vectors is
    compared against d * deg; excess dimension certifies NotRigid, while
    Rigid requires an explicit generating family x_1..x_d with every return
    vector inside Z[Q]x_1 + ... + Z[Q]x_d, found by Hermite reduction on the
    coefficient lattice."""
    sys.Q.require_eigen_data("rigidity_check")
    gens = list(xi.vectors)
    if not gens:
        raise AnalysisError("rigidity check needs return vectors")
    # canonical half of the +- pairs, smallest first for stable witnesses
    half = {}
    for v in gens:
        k = v.key()
        nk = (-v).key()
        if nk not in half:
            half[k] = v
    gens = sorted(half.values(), key=lambda v: float(np.linalg.norm(v.evaluate())))

    hnf, denom = _zq_lattice_rows(sys, gens)
    qdim = len(hnf)

    minpolys = {e.value.minpoly.coefficients for e in sys.Q.eigenvalues}
    mults = {e.multiplicity for e in sys.Q.eigenvalues}
    applicable = len(minpolys) == 1 and len(mults) == 1
    if not applicable:
        reduced = _greedy_generators(sys, gens)
        return RigidityVerdict(
            status="inapplicable",
            qdim=qdim,
            bound=None,
            witness=None,
            excess=None,
            reason=(
                "expansion eigenvalues are not algebraic conjugates of equal "
                "multiplicity; reporting the heuristic module generator count"
            ),
            heuristic_generators=tuple(reduced),
        )

    deg = len(next(iter(minpolys))) - 1
    bound = sys.dim * deg
    if qdim > bound:
        return RigidityVerdict(
            status="not_rigid",
            qdim=qdim,
            bound=bound,
            witness=None,
            excess=qdim - bound,
            reason=None,
            heuristic_generators=None,
        )

    for family in _witness_candidates(sys, hnf, denom):
        fam_hnf, fam_denom = _zq_lattice_rows(sys, family)
        if all(_in_zq_module(fam_hnf, fam_denom, g) for g in gens):
            return RigidityVerdict(
                status="rigid",
                qdim=qdim,
                bound=bound,
                witness=tuple(family),
                excess=None,
                reason=None,
                heuristic_generators=None,
            )
    return RigidityVerdict(
        status="inapplicable",
        qdim=qdim,
        bound=bound,
        witness=None,
        excess=None,
        reason=(
            "dimension bound holds but no generating family was found by "
            "lattice reduction; the dimension test alone cannot certify Rigid"
        ),
        heuristic_generators=tuple(_greedy_generators(sys, gens)),
    )


def _witness_candidates(sys: SubstitutionSystem, hnf, denom):
    """Candidate generating families: the standard basis first, then size-d
    subsets of the reduced lattice rows."""
    import itertools

    basis = sys.basis
    d = sys.dim
    std = tuple(
        SymbolicVector.from_rationals(
            basis, [1 if i == k else 0 for i in range(d)]
        )
        for k in range(d)
    )
    yield std
    rows = [
        SymbolicVector(
            basis,
            [
                tuple(Fraction(c, denom) for c in row[k * basis.size : (k + 1) * basis.size])
                for k in range(d)
            ],
        )
        for row in hnf
    ]
    for combo in itertools.islice(itertools.combinations(rows, d), 64):
        yield combo


def _greedy_generators(sys: SubstitutionSystem, gens):
    """Greedy minimal Z[Q]-generating sublist of the return-vector sample."""
    kept = []
    for g in gens:
        if not kept:
            kept.append(g)
            continue
        hnf, denom = _zq_lattice_rows(sys, kept)
        if not _in_zq_module(hnf, denom, g):
            kept.append(g)
    return kept
