"""Substitution systems: expansion maps, digit sets, patch and k-set iteration,
legality and supertile bookkeeping.

Conventions: a tile is (type, shift) with the prototile anchored at the
origin; one substitution step sends tile (j, s) to the tiles
(i, u + Q s) over all digits u in D[i][j].  Type indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .numberfield import (
    AlgebraicScalar,
    CoordinateBasis,
    NumberFieldError,
    SymbolicVector,
    apply_action,
    frac_identity,
    frac_matmul,
    frac_solve,
    q_action_matrix,
    scalar_matmul,
)


class SubstitutionError(ValueError):
    pass


@dataclass(frozen=True)
class DeclaredEigenvalue:
    value: AlgebraicScalar
    multiplicity: int = 1


class ExpansionMap:
    """Expansive linear map with exact entries over a coordinate basis.

    Eigenvalues may be declared as algebraic data (required by the spectral
    and rigidity operations); without a declaration the map still supports
    patch generation, and expansivity is checked numerically."""

    def __init__(
        self,
        basis: CoordinateBasis,
        entries,
        eigenvalues: Optional[Sequence[DeclaredEigenvalue]] = None,
    ):
        self.basis = basis
        self.entries = tuple(tuple(basis._coerce_scalar(e) if not isinstance(e, tuple) else e for e in row) for row in entries)
        self.dim = len(self.entries)
        for row in self.entries:
            if len(row) != self.dim:
                raise SubstitutionError("expansion matrix must be square")
        self.eigenvalues = tuple(eigenvalues) if eigenvalues is not None else None
        self.numeric = np.array(
            [[basis.eval_scalar(e) for e in row] for row in self.entries], dtype=float
        )
        self._action = None
        self._action_powers = {}
        self._validate()

    @property
    def has_eigen_data(self) -> bool:
        return self.eigenvalues is not None

    def require_eigen_data(self, operation: str):
        if self.eigenvalues is None:
            raise SubstitutionError(
                f"{operation} needs declared algebraic eigenvalues; this "
                "expansion was loaded for generation only"
            )

    def _validate(self):
        actual = sorted(np.linalg.eigvals(self.numeric), key=lambda z: (z.real, z.imag))
        if self.eigenvalues is None:
            if any(abs(a) <= 1.0 + 1e-12 for a in actual):
                raise SubstitutionError(
                    "numeric eigenvalues have modulus <= 1; the expansion "
                    "must be expansive"
                )
            return
        if sum(e.multiplicity for e in self.eigenvalues) != self.dim:
            raise SubstitutionError("eigenvalue multiplicities must sum to dim")
        for e in self.eigenvalues:
            if abs(e.value.root) <= 1.0:
                raise SubstitutionError(
                    f"declared eigenvalue {e.value} has modulus <= 1; "
                    "the expansion must be expansive"
                )
        declared = []
        for e in self.eigenvalues:
            declared.extend([e.value.root] * e.multiplicity)
        declared = sorted(declared, key=lambda z: (z.real, z.imag))
        for d, a in zip(declared, actual):
            if abs(d - a) > 1e-8 * max(1.0, abs(a)):
                raise SubstitutionError(
                    f"declared eigenvalue {d} does not match numeric {a}"
                )

    @property
    def action(self):
        if self._action is None:
            self._action = q_action_matrix(self.basis, self.entries)
        return self._action

    def action_power(self, k: int):
        if k not in self._action_powers:
            if k == 0:
                self._action_powers[0] = frac_identity(self.dim * self.basis.size)
            else:
                self._action_powers[k] = frac_matmul(self.action_power(k - 1), self.action)
        return self._action_powers[k]

    def apply(self, v: SymbolicVector, k: int = 1) -> SymbolicVector:
        if k == 1:
            return apply_action(self.action, v)
        return apply_action(self.action_power(k), v)

    def power_entries(self, k: int):
        out = [[self.basis.rational(1) if i == j else self.basis.zero_scalar() for j in range(self.dim)] for i in range(self.dim)]
        for _ in range(k):
            out = scalar_matmul(self.basis, self.entries, out)
        return out

    @property
    def det_abs(self) -> float:
        return abs(float(np.linalg.det(self.numeric)))

    @property
    def min_singular_value(self) -> float:
        return float(np.linalg.svd(self.numeric, compute_uv=False)[-1])

    @property
    def is_diagonal(self) -> bool:
        return all(
            all(c == 0 for c in self.entries[i][j])
            for i in range(self.dim)
            for j in range(self.dim)
            if i != j
        )

    def __repr__(self):
        rows = "; ".join(
            ", ".join(self.basis.scalar_str(e) for e in row) for row in self.entries
        )
        return f"ExpansionMap[{rows}]"


class DigitSetMatrix:
    """kappa x kappa array of finite digit sets; entry (i, j) holds the
    translations of the type-i children of a type-j tile."""

    def __init__(self, kappa: int, entries):
        self.kappa = kappa
        self.entries = tuple(
            tuple(tuple(cell) for cell in row) for row in entries
        )
        if len(self.entries) != kappa or any(len(r) != kappa for r in self.entries):
            raise SubstitutionError("digit matrix must be kappa x kappa")
        for i, row in enumerate(self.entries):
            for j, cell in enumerate(row):
                if len(set(v.key() for v in cell)) != len(cell):
                    raise SubstitutionError(
                        f"duplicate digit in D[{i}][{j}]"
                    )

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def counts(self) -> np.ndarray:
        return np.array(
            [[len(cell) for cell in row] for row in self.entries], dtype=np.int64
        )


class Tile(NamedTuple):
    type: int
    shift: SymbolicVector

    def translate(self, v: SymbolicVector) -> "Tile":
        return Tile(self.type, self.shift + v)


class Patch:
    """Finite set of placed tiles with exact dedup and fast float lookups."""

    def __init__(self, tiles):
        seen = {}
        for t in tiles:
            seen[(t.type, t.shift.key())] = t
        ordered = sorted(seen.values(), key=lambda t: (t.type, t.shift.key()))
        self.tiles = tuple(ordered)
        self._index = {(t.type, t.shift.key()): t for t in self.tiles}
        self._anchors = None

    def __len__(self):
        return len(self.tiles)

    def __iter__(self):
        return iter(self.tiles)

    def __contains__(self, tile: Tile) -> bool:
        return (tile.type, tile.shift.key()) in self._index

    def __eq__(self, other):
        return isinstance(other, Patch) and set(self._index) == set(other._index)

    def has(self, type_index: int, shift: SymbolicVector) -> bool:
        return (type_index, shift.key()) in self._index

    def translate(self, v: SymbolicVector) -> "Patch":
        return Patch(Tile(t.type, t.shift + v) for t in self.tiles)

    def type_counts(self, kappa: int) -> np.ndarray:
        out = np.zeros(kappa, dtype=np.int64)
        for t in self.tiles:
            out[t.type] += 1
        return out

    def anchors_float(self) -> np.ndarray:
        if self._anchors is None:
            if self.tiles:
                self._anchors = np.vstack([t.shift.evaluate() for t in self.tiles])
            else:
                self._anchors = np.zeros((0, 0))
        return self._anchors

    def tiles_of_type(self, type_index: int):
        return [t for t in self.tiles if t.type == type_index]

    def __repr__(self):
        return f"Patch({len(self.tiles)} tiles)"


class KSetCluster:
    """Coloured point cluster: one finite exact point list per colour."""

    def __init__(self, colours):
        cleaned = []
        seen_support = {}
        for pts in colours:
            bycol = {}
            for p in pts:
                bycol[p.key()] = p
            ordered = tuple(sorted(bycol.values(), key=lambda p: p.key()))
            cleaned.append(ordered)
        self.colours = tuple(cleaned)
        for ci, pts in enumerate(self.colours):
            for p in pts:
                prev = seen_support.get(p.key())
                if prev is not None and prev != ci:
                    raise SubstitutionError(
                        "k-set projection is not 1-to-1: point "
                        f"{p} occurs with colours {prev} and {ci}"
                    )
                seen_support[p.key()] = ci

    @classmethod
    def singleton(cls, basis: CoordinateBasis, kappa: int, colour: int, point=None, dim=None):
        pts = [[] for _ in range(kappa)]
        if point is None:
            point = SymbolicVector.zero(basis, dim)
        pts[colour] = [point]
        return cls(pts)

    @property
    def kappa(self) -> int:
        return len(self.colours)

    def size(self) -> int:
        return sum(len(p) for p in self.colours)

    def is_empty(self) -> bool:
        return self.size() == 0

    def supp(self):
        for ci, pts in enumerate(self.colours):
            for p in pts:
                yield ci, p

    def float_arrays(self) -> list[np.ndarray]:
        out = []
        for pts in self.colours:
            if pts:
                out.append(np.vstack([p.evaluate() for p in pts]))
            else:
                out.append(np.zeros((0, 0)))
        return out

    def translate(self, v: SymbolicVector) -> "KSetCluster":
        return KSetCluster([[p + v for p in pts] for pts in self.colours])

    def point_index(self):
        return [{p.key() for p in pts} for pts in self.colours]

    def __eq__(self, other):
        return (
            isinstance(other, KSetCluster)
            and self.point_index() == other.point_index()
        )

    def __repr__(self):
        sizes = ",".join(str(len(p)) for p in self.colours)
        return f"KSetCluster(sizes=[{sizes}])"


class SubstitutionSystem:
    """Prototile labels, expansion map and digit-set matrix, with the derived
    substitution matrix S(i,j) = #D[i][j]."""

    def __init__(
        self,
        name: str,
        basis: CoordinateBasis,
        expansion: ExpansionMap,
        digits: DigitSetMatrix,
        labels: Optional[Sequence[str]] = None,
        anchors: Optional[Sequence[SymbolicVector]] = None,
    ):
        self.name = name
        self.basis = basis
        self.Q = expansion
        self.digits = digits
        self.kappa = digits.kappa
        self.dim = expansion.dim
        self.labels = tuple(labels) if labels else tuple(
            f"T{i}" for i in range(self.kappa)
        )
        if len(self.labels) != self.kappa:
            raise SubstitutionError("need one label per prototile")
        self.anchors = tuple(anchors) if anchors else tuple(
            SymbolicVector.zero(basis, self.dim) for _ in range(self.kappa)
        )
        self.S = digits.counts()
        self.primitivity_exponent = _primitivity_exponent(self.S)
        self._seed_cache = None
        self._supertile_cache = {}

    @property
    def primitive(self) -> bool:
        return self.primitivity_exponent is not None

    def require_primitive(self, operation: str):
        if not self.primitive:
            raise SubstitutionError(
                f"{operation} requires a primitive substitution matrix; "
                f"{self.name} is not primitive"
            )

    def prototile_tile(self, j: int) -> Tile:
        return Tile(j, SymbolicVector.zero(self.basis, self.dim))

    def set_seed(self, tile: Tile, period: int = 1):
        """Supply a fixed-point seed manually (for systems where the
        automatic search gives up); the seed must satisfy
        tile in omega^period({tile})."""
        check = substitute(self, Patch([tile]), period)
        if tile not in check:
            raise SubstitutionError(
                "supplied seed is not contained in its own substitution image"
            )
        self._seed_cache = (tile, period, {0: Patch([tile])})

    def max_digit_norm(self) -> float:
        worst = 0.0
        for row in self.digits.entries:
            for cell in row:
                for v in cell:
                    worst = max(worst, float(np.linalg.norm(v.evaluate())))
        return worst

    def __repr__(self):
        return f"SubstitutionSystem({self.name}, kappa={self.kappa}, d={self.dim})"


def _primitivity_exponent(S: np.ndarray) -> Optional[int]:
    kappa = S.shape[0]
    power = np.identity(kappa, dtype=object)
    Sobj = S.astype(object)
    for ell in range(1, kappa * kappa + 1):
        power = power @ Sobj
        if (np.array(power, dtype=object) > 0).all():
            return ell
    return None


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    expansive: bool
    primitivity_exponent: Optional[int]
    pf_eigenvalue: float
    det_abs: float
    pf_relative_error: float
    warnings: tuple

    @property
    def ok(self) -> bool:
        return self.expansive


def pf_eigen(S: np.ndarray):
    """Perron-Frobenius eigenvalue and positive right/left eigenvectors."""
    vals, vecs = np.linalg.eig(S.astype(float))
    idx = int(np.argmax(np.abs(vals)))
    lam = float(vals[idx].real)
    right = np.abs(vecs[:, idx].real)
    lvals, lvecs = np.linalg.eig(S.T.astype(float))
    lidx = int(np.argmax(np.abs(lvals)))
    left = np.abs(lvecs[:, lidx].real)
    return lam, right, left


def validate_system(sys: SubstitutionSystem) -> ValidationReport:
    """Expansivity, primitivity, and the Perron-Frobenius identity
    PF(S) = |det Q| that every genuine substitution datum satisfies."""
    warnings = []
    lam, _, _ = pf_eigen(sys.S)
    det = sys.Q.det_abs
    rel = abs(lam - det) / det
    if rel > 1e-8:
        warnings.append(
            f"PF(S) = {lam!r} does not match |det Q| = {det!r} "
            f"(relative error {rel:.2e}); input is not a substitution "
            "Delone-set datum"
        )
    if not sys.primitive:
        warnings.append(
            "substitution matrix is not primitive; frequency and spectral "
            "operations are disabled"
        )
    return ValidationReport(
        expansive=True,  # ExpansionMap construction already enforces this
        primitivity_exponent=sys.primitivity_exponent,
        pf_eigenvalue=lam,
        det_abs=det,
        pf_relative_error=rel,
        warnings=tuple(warnings),
    )


# --------------------------------------------------------------------------
# substitution of patches and k-sets
# --------------------------------------------------------------------------


#: per-coefficient bit budget for exact substitution arithmetic
SUBSTITUTE_BIT_BUDGET = 16384


def substitute(
    sys: SubstitutionSystem,
    patch: Patch,
    k: int = 1,
    window=None,
) -> Patch:
    """Apply the tile substitution k times, exactly.

    With a window, tiles whose anchor leaves the window inflated by the
    digit reach are discarded after every step (memory control; the kept
    region is window-complete).  Coefficients growing past the bit budget
    abort with advice rather than grinding on."""
    if k < 0:
        raise SubstitutionError("k must be >= 0")
    tiles = list(patch)
    margin = None
    if window is not None:
        shrink = 1.0 / sys.Q.min_singular_value
        margin = sys.max_digit_norm() / max(1.0 - shrink, 1e-9)
    for _ in range(k):
        if tiles:
            probe = tiles[0].shift.coeffs
            bits = max(
                max(c.numerator.bit_length(), c.denominator.bit_length())
                for row in probe
                for c in row
            )
            if bits > SUBSTITUTE_BIT_BUDGET:
                raise SubstitutionError(
                    f"rational coefficients exceeded {SUBSTITUTE_BIT_BUDGET} "
                    "bits; render such depths from float anchors instead"
                )
        out = {}
        for t in tiles:
            qs = sys.Q.apply(t.shift)
            for i in range(sys.kappa):
                for u in sys.digits[i, t.type]:
                    nt = Tile(i, u + qs)
                    out[(i, nt.shift.key())] = nt
        tiles = list(out.values())
        if window is not None:
            tiles = [
                t
                for t in tiles
                if window.contains(t.shift.evaluate(), margin)
            ]
    return Patch(tiles)


def substitute_with_lineage(sys: SubstitutionSystem, patch: Patch, k: int):
    """Like substitute, but returns per-level tile lists plus parent indexes.

    levels[0] is the input; parents[t][n] is the index in levels[t-1] of the
    tile whose substitution produced levels[t][n]."""
    levels = [list(patch)]
    parents = [None]
    for _ in range(k):
        cur = levels[-1]
        nxt = []
        par = []
        seen = {}
        for pi, t in enumerate(cur):
            qs = sys.Q.apply(t.shift)
            for i in range(sys.kappa):
                for u in sys.digits[i, t.type]:
                    nt = Tile(i, u + qs)
                    key = (i, nt.shift.key())
                    if key in seen:
                        continue
                    seen[key] = len(nxt)
                    nxt.append(nt)
                    par.append(pi)
        levels.append(nxt)
        parents.append(par)
    return levels, parents


#: supertile patches above this tile count are not cached
SUPERTILE_CACHE_LIMIT = 1_200_000


def supertile_patch(sys: SubstitutionSystem, type_index: int, k: int) -> Patch:
    """omega^k(T_j), cached on the system (these are rebuilt all over)."""
    key = (type_index, k)
    if key not in sys._supertile_cache:
        if k == 0:
            patch = Patch([sys.prototile_tile(type_index)])
        else:
            patch = substitute(sys, supertile_patch(sys, type_index, k - 1), 1)
        if len(patch) <= SUPERTILE_CACHE_LIMIT:
            sys._supertile_cache[key] = patch
        else:
            return patch
    return sys._supertile_cache[key]


def kset_substitute(sys: SubstitutionSystem, cluster: KSetCluster, k: int = 1) -> KSetCluster:
    """Apply the k-set substitution Phi, colour i collecting Q.(colour j) + D[i][j]."""
    if k < 0:
        raise SubstitutionError("k must be >= 0")
    cur = cluster
    for _ in range(k):
        colours = [dict() for _ in range(sys.kappa)]
        for j, pts in enumerate(cur.colours):
            for p in pts:
                qp = sys.Q.apply(p)
                for i in range(sys.kappa):
                    for u in sys.digits[i, j]:
                        np_ = qp + u
                        colours[i][np_.key()] = np_
        cur = KSetCluster([list(c.values()) for c in colours])
    return cur


def patch_to_kset(sys: SubstitutionSystem, patch: Patch) -> KSetCluster:
    colours = [[] for _ in range(sys.kappa)]
    for t in patch:
        colours[t.type].append(t.shift)
    return KSetCluster(colours)


def kset_to_patch(cluster: KSetCluster) -> Patch:
    return Patch(
        Tile(ci, p) for ci, pts in enumerate(cluster.colours) for p in pts
    )


# --------------------------------------------------------------------------
# fixed points, generating sets
# --------------------------------------------------------------------------


def fixed_point_seed(sys: SubstitutionSystem, n_max: int = 6):
    """Find a tile T_j - x and N >= 1 with T_j - x in omega^N(T_j - x).

    The shift solves (Q^N - I) x = u exactly for a type-j digit path u of
    omega^N(T_j); iterating omega^N on the seed gives the nested patch
    sequence converging to a fixed point of omega^N.
    Digits u = 0 are preferred, then small numeric norm, then small N."""
    sys.require_primitive("fixed_point_seed")
    n = sys.dim * sys.basis.size
    patches = [substitute(sys, Patch([sys.prototile_tile(j)]), 1) for j in range(sys.kappa)]
    for N in range(1, n_max + 1):
        A = sys.Q.action_power(N)
        AmI = [[A[r][c] - (1 if r == c else 0) for c in range(n)] for r in range(n)]
        for j in range(sys.kappa):
            candidates = patches[j].tiles_of_type(j)
            candidates.sort(
                key=lambda t: (not t.shift.is_zero(), float(np.linalg.norm(t.shift.evaluate())))
            )
            for cand in candidates:
                sol = frac_solve(AmI, cand.shift.flatten())
                if sol is None:
                    continue
                s = sys.basis.size
                coeffs = [tuple(sol[i : i + s]) for i in range(0, n, s)]
                x = SymbolicVector(sys.basis, coeffs)
                seed = Tile(j, -x)
                check = substitute(sys, Patch([seed]), N)
                if seed in check:
                    return seed, N
        if N < n_max:
            patches = [substitute(sys, p, 1) for p in patches]
    raise SubstitutionError(
        f"no fixed-point seed found up to N = {n_max}; supply a seed manually"
    )


def seed_patch(sys: SubstitutionSystem, level: int, window=None) -> Patch:
    """Patch omega^(N*level-ish) grown from the canonical seed.

    `level` counts applications of omega^N where (seed, N) comes from
    fixed_point_seed; results are cached on the system object."""
    if sys._seed_cache is None:
        seed, N = fixed_point_seed(sys)
        sys._seed_cache = (seed, N, {0: Patch([seed])})
    seed, N, cache = sys._seed_cache
    if level not in cache:
        prev = seed_patch(sys, level - 1)
        cache[level] = substitute(sys, prev, N, window=window)
    return cache[level]


def generating_set(sys: SubstitutionSystem) -> KSetCluster:
    """A cluster G with Phi^(n-1)(G) contained in Phi^n(G) for all n >= 1."""
    seed, N = fixed_point_seed(sys)
    g0 = KSetCluster.singleton(
        sys.basis, sys.kappa, seed.type, seed.shift, dim=sys.dim
    )
    if N == 1:
        return g0
    # G = union of Phi^r(G0), r < N, turns a period-N seed into a genuine
    # generating set: G0 in Phi^N(G0) gives G in Phi(G)
    colours = [dict() for _ in range(sys.kappa)]
    cur = g0
    for _ in range(N):
        for ci, pts in enumerate(cur.colours):
            for p in pts:
                colours[ci][p.key()] = p
        cur = kset_substitute(sys, cur, 1)
    return KSetCluster([list(c.values()) for c in colours])


# --------------------------------------------------------------------------
# legality / special rank
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LegalityVerdict:
    legal: bool
    k: Optional[int]
    colour: Optional[int]
    k_max: int

    def __bool__(self):
        return self.legal


def _match_cluster_in(cluster: KSetCluster, target_index, target_points) -> bool:
    ref_colour = next(
        (ci for ci, pts in enumerate(cluster.colours) if pts), None
    )
    if ref_colour is None:
        return True
    ref = cluster.colours[ref_colour][0]
    for w in target_points[ref_colour]:
        t = w - ref
        ok = True
        for ci, pts in enumerate(cluster.colours):
            for p in pts:
                if (p + t).key() not in target_index[ci]:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return True
    return False


def is_legal(sys: SubstitutionSystem, cluster: KSetCluster, k_max: int = 6) -> LegalityVerdict:
    """Semi-decision: legal iff a translate occurs inside Phi^k of a
    one-point colour-j cluster for some k <= k_max."""
    if cluster.is_empty():
        return LegalityVerdict(True, 0, None, k_max)
    singles = [
        KSetCluster.singleton(sys.basis, sys.kappa, j, dim=sys.dim)
        for j in range(sys.kappa)
    ]
    for k in range(k_max + 1):
        for j in range(sys.kappa):
            target = singles[j]
            index = target.point_index()
            points = target.colours
            if _match_cluster_in(cluster, index, points):
                return LegalityVerdict(True, k, j, k_max)
        if k < k_max:
            singles = [kset_substitute(sys, c, 1) for c in singles]
    return LegalityVerdict(False, None, None, k_max)


@dataclass(frozen=True)
class SpecialRank:
    rank: Optional[int]  # None encodes Infinity(k_max)
    k_max: int
    type_index: Optional[int]


def special_rank(sys: SubstitutionSystem, patch: Patch, k_max: int = 6) -> SpecialRank:
    """Minimal k with the patch a translate of a sub-patch of omega^k(T_j)."""
    if len(patch) == 0:
        return SpecialRank(0, k_max, None)
    supers = [Patch([sys.prototile_tile(j)]) for j in range(sys.kappa)]
    ref = patch.tiles[0]
    for k in range(k_max + 1):
        for j in range(sys.kappa):
            target = supers[j]
            for cand in target.tiles_of_type(ref.type):
                t = cand.shift - ref.shift
                if all(target.has(p.type, p.shift + t) for p in patch.tiles):
                    return SpecialRank(k, k_max, j)
        if k < k_max:
            supers = [substitute(sys, p, 1) for p in supers]
    return SpecialRank(None, k_max, None)


# --------------------------------------------------------------------------
# supertile assignment
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SupertileAssignment:
    level: int
    order: int
    assignment: dict
    supertiles: tuple


def supertile_assign(sys: SubstitutionSystem, patch: Patch, k: int, t_max: int = 9) -> SupertileAssignment:
    """Label each tile of a canonical fixed-point patch by the order-k
    supertile containing it.

    The patch must be a sub-patch of some omega^t image of the canonical
    seed; the supertile index of a tile is the index of its level-(t-k)
    ancestor in the regenerated lineage."""
    if k < 0:
        raise SubstitutionError("supertile order must be >= 0")
    seed, N = (
        sys._seed_cache[:2] if sys._seed_cache else fixed_point_seed(sys)
    )
    if N != 1:
        raise SubstitutionError(
            "supertile bookkeeping is implemented for period-1 seeds only"
        )
    levels, parents = substitute_with_lineage(sys, Patch([seed]), 0)
    for t in range(0, t_max + 1):
        if t > 0:
            levels, parents = substitute_with_lineage(sys, Patch([seed]), t)
        index = {(tile.type, tile.shift.key()): n for n, tile in enumerate(levels[-1])}
        if all((tile.type, tile.shift.key()) in index for tile in patch):
            if k > t:
                raise SubstitutionError(f"order {k} exceeds patch level {t}")
            assignment = {}
            for tile in patch:
                n = index[(tile.type, tile.shift.key())]
                lvl = t
                while lvl > t - k:
                    n = parents[lvl][n]
                    lvl -= 1
                assignment[tile] = n
            return SupertileAssignment(
                level=t,
                order=k,
                assignment=assignment,
                supertiles=tuple(levels[t - k]),
            )
        if len(levels[-1]) > 4 * max(len(patch), 1) and t >= 2:
            break
    raise SubstitutionError(
        "patch is not traceable to the canonical fixed point"
    )


# --------------------------------------------------------------------------
# patch serialization (line-oriented text)
# --------------------------------------------------------------------------


def patch_to_text(sys: SubstitutionSystem, patch: Patch) -> str:
    """Line format: type index, one exact coefficient tuple per coordinate,
    then float evaluations after '|'.  The exact fields round-trip bit-exactly."""
    lines = [
        f"# tilescope patch v1 system={sys.name} dim={sys.dim} "
        f"basis={','.join(sys.basis.names)}"
    ]
    for t in patch:
        rows = " ".join(
            ",".join(str(c) for c in row) for row in t.shift.coeffs
        )
        floats = " ".join(f"{x:.12g}" for x in t.shift.evaluate())
        lines.append(f"{t.type} {rows} | {floats}")
    return "\n".join(lines) + "\n"


def patch_from_text(text: str, basis: CoordinateBasis) -> Patch:
    tiles = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        exact = line.split("|")[0].split()
        type_index = int(exact[0])
        coeffs = [
            tuple(Fraction(c) for c in row.split(",")) for row in exact[1:]
        ]
        tiles.append(Tile(type_index, SymbolicVector(basis, coeffs)))
    return Patch(tiles)
