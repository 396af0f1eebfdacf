"""Prototile supports and raster geometry.

Prototile supports are the unique compact solution of the adjoint set
equations Q A_j = union_i (D_ij + A_i); since those attractors can have
fractal boundary, everything here works on rasters (occupied grid cells at a
chosen resolution) and every volume claim carries a cell-count error bar.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .substitution import Patch, SubstitutionSystem, seed_patch


class GeometryError(ValueError):
    pass


# --------------------------------------------------------------------------
# windows (axis-aligned half-open boxes)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(x) for x in self.lo))
        object.__setattr__(self, "hi", tuple(float(x) for x in self.hi))
        if len(self.lo) != len(self.hi):
            raise GeometryError("lo/hi dimension mismatch")
        if not all(a < b for a, b in zip(self.lo, self.hi)):
            raise GeometryError(f"degenerate window {self.lo}..{self.hi}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        v = 1.0
        for a, b in zip(self.lo, self.hi):
            v *= b - a
        return v

    @property
    def sides(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def contains(self, point, margin: float = 0.0) -> bool:
        return all(
            a - margin <= x < b + margin
            for a, b, x in zip(self.lo, self.hi, point)
        )

    def dilate(self, r: float) -> "Window":
        if r < 0:
            raise GeometryError("radius must be >= 0")
        return Window(
            tuple(a - r for a in self.lo), tuple(b + r for b in self.hi)
        )

    def erode(self, r: float) -> Optional["Window"]:
        if r < 0:
            raise GeometryError("radius must be >= 0")
        lo = tuple(a + r for a in self.lo)
        hi = tuple(b - r for b in self.hi)
        if not all(a < b for a, b in zip(lo, hi)):
            return None
        return Window(lo, hi)

    def intersect(self, other: "Window") -> Optional["Window"]:
        lo = tuple(max(a, c) for a, c in zip(self.lo, other.lo))
        hi = tuple(min(b, d) for b, d in zip(self.hi, other.hi))
        if not all(a < b for a, b in zip(lo, hi)):
            return None
        return Window(lo, hi)


def erode_dilate(region, r: float, op: str):
    """F^{+r} (op='dilate') or F^{-r} (op='erode') for windows and masks."""
    if r < 0:
        raise GeometryError("radius must be >= 0")
    if op not in ("dilate", "erode"):
        raise GeometryError(f"unknown morphology op {op!r}")
    if isinstance(region, Window):
        return region.dilate(r) if op == "dilate" else region.erode(r)
    if isinstance(region, RegionMask):
        return region.dilate(r) if op == "dilate" else region.erode(r)
    raise GeometryError(f"unsupported region type {type(region)!r}")


def vanhove_ratio(region, r: float) -> float:
    """Vol((boundary F)^{+r}) / Vol(F); closed form for boxes."""
    if r < 0:
        raise GeometryError("radius must be >= 0")
    if isinstance(region, Window):
        outer = 1.0
        inner = 1.0
        for side in region.sides:
            outer *= side + 2 * r
            inner *= max(side - 2 * r, 0.0)
        return (outer - inner) / region.volume
    if isinstance(region, RegionMask):
        if not region.cells:
            raise GeometryError("empty mask has no van Hove ratio")
        steps = max(int(np.ceil(r / region.h)), 0)
        band = region.boundary_mask().dilate_cells(steps)
        return band.volume / region.volume
    raise GeometryError(f"unsupported region type {type(region)!r}")


# --------------------------------------------------------------------------
# raster masks
# --------------------------------------------------------------------------


def _ball_offsets(dim: int, steps: int) -> np.ndarray:
    if steps == 0:
        return np.zeros((1, dim), dtype=np.int64)
    rng = np.arange(-steps, steps + 1)
    grids = np.meshgrid(*([rng] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    keep = (pts * pts).sum(axis=1) <= steps * steps
    return pts[keep]


def _pack_rows(rows: np.ndarray, lo: np.ndarray, span: np.ndarray) -> np.ndarray:
    """Encode integer rows within [lo, lo+span) as single int64 keys, so row
    dedup and membership run on sorted 1-d arrays."""
    key = np.zeros(len(rows), dtype=np.int64)
    for c in range(rows.shape[1]):
        key = key * span[c] + (rows[:, c] - lo[c])
    return key


def _unpack_keys(keys: np.ndarray, lo: np.ndarray, span: np.ndarray, dim: int) -> np.ndarray:
    out = np.empty((len(keys), dim), dtype=np.int64)
    rem = keys.copy()
    for c in range(dim - 1, -1, -1):
        out[:, c] = rem % span[c] + lo[c]
        rem //= span[c]
    return out


def unique_rows(rows: np.ndarray) -> np.ndarray:
    """Unique integer rows (packed-key sort; much faster than axis unique)."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0 or len(rows) == 1:
        return rows
    lo = rows.min(axis=0)
    span = rows.max(axis=0) - lo + 1
    if np.prod(span.astype(float)) > 2**62:
        return np.unique(rows, axis=0)
    keys = np.unique(_pack_rows(rows, lo, span))
    return _unpack_keys(keys, lo, span, rows.shape[1])


class RegionMask:
    """Occupied cells of a cubic grid with cell side h.

    The cell of a point x is floor((x - origin)/h); volume is #cells * h^d.
    Set algebra requires equal resolution and origin.
    """

    def __init__(self, h: float, cells, origin=None, dim: Optional[int] = None, _presorted=False):
        if h <= 0:
            raise GeometryError("resolution must be positive")
        self.h = float(h)
        if isinstance(cells, np.ndarray) and _presorted:
            arr = cells.astype(np.int64, copy=False)
        else:
            arr = np.asarray(list(cells), dtype=np.int64)
            if arr.size:
                arr = unique_rows(arr.reshape(len(arr), -1))
        if arr.size == 0:
            if dim is None:
                raise GeometryError("empty mask needs an explicit dimension")
            arr = arr.reshape(0, dim)
        self.cells_array = arr
        self.dim = arr.shape[1]
        self.origin = (
            np.zeros(self.dim) if origin is None else np.asarray(origin, dtype=float)
        )
        self._cells_frozen = None

    @property
    def cells(self) -> frozenset:
        if self._cells_frozen is None:
            self._cells_frozen = frozenset(map(tuple, self.cells_array))
        return self._cells_frozen

    @classmethod
    def from_points(cls, points: np.ndarray, h: float, origin=None, dim=None):
        points = np.asarray(points, dtype=float)
        if points.size == 0:
            return cls(h, [], origin=origin, dim=dim)
        o = 0.0 if origin is None else np.asarray(origin)
        idx = np.floor((points - o) / h).astype(np.int64)
        return cls(h, unique_rows(idx), origin=origin, _presorted=True)

    def __len__(self):
        return len(self.cells_array)

    @property
    def volume(self) -> float:
        return len(self.cells_array) * self.h ** self.dim

    def centers(self) -> np.ndarray:
        return (self.cells_array + 0.5) * self.h + self.origin

    def bbox(self) -> Window:
        lo = self.cells_array.min(axis=0) * self.h + self.origin
        hi = (self.cells_array.max(axis=0) + 1) * self.h + self.origin
        return Window(tuple(lo), tuple(hi))

    def _compatible(self, other: "RegionMask"):
        if abs(self.h - other.h) > 1e-15 or not np.allclose(
            self.origin, other.origin
        ):
            raise GeometryError("masks live on different grids")

    def _common_keys(self, other: "RegionMask"):
        both = (
            np.vstack([self.cells_array, other.cells_array])
            if len(other.cells_array)
            else self.cells_array
        )
        if not len(both):
            z = np.zeros(0, dtype=np.int64)
            return z, z, None, None
        lo = both.min(axis=0)
        span = both.max(axis=0) - lo + 1
        ka = np.sort(_pack_rows(self.cells_array, lo, span)) if len(self.cells_array) else np.zeros(0, dtype=np.int64)
        kb = np.sort(_pack_rows(other.cells_array, lo, span)) if len(other.cells_array) else np.zeros(0, dtype=np.int64)
        return ka, kb, lo, span

    def _from_keys(self, keys, lo, span) -> "RegionMask":
        cells = (
            _unpack_keys(keys, lo, span, self.dim)
            if len(keys)
            else np.zeros((0, self.dim), dtype=np.int64)
        )
        return RegionMask(self.h, cells, self.origin, dim=self.dim, _presorted=True)

    def union(self, other: "RegionMask") -> "RegionMask":
        self._compatible(other)
        ka, kb, lo, span = self._common_keys(other)
        return self._from_keys(np.union1d(ka, kb), lo, span)

    def intersection(self, other: "RegionMask") -> "RegionMask":
        self._compatible(other)
        ka, kb, lo, span = self._common_keys(other)
        return self._from_keys(np.intersect1d(ka, kb), lo, span)

    def difference(self, other: "RegionMask") -> "RegionMask":
        self._compatible(other)
        ka, kb, lo, span = self._common_keys(other)
        return self._from_keys(np.setdiff1d(ka, kb), lo, span)

    def symmetric_difference_count(self, other: "RegionMask") -> int:
        self._compatible(other)
        ka, kb, _, _ = self._common_keys(other)
        return len(np.setxor1d(ka, kb))

    def boundary_cells_array(self) -> np.ndarray:
        """Occupied cells with at least one unoccupied face neighbour."""
        arr = self.cells_array
        if not len(arr):
            return arr
        lo = arr.min(axis=0) - 2
        span = arr.max(axis=0) - lo + 4
        keys = np.sort(_pack_rows(arr, lo, span))
        on_boundary = np.zeros(len(arr), dtype=bool)
        for axis in range(self.dim):
            for step in (-1, 1):
                nb = arr.copy()
                nb[:, axis] += step
                nb_keys = _pack_rows(nb, lo, span)
                pos = np.searchsorted(keys, nb_keys)
                pos = np.clip(pos, 0, len(keys) - 1)
                missing = keys[pos] != nb_keys
                on_boundary |= missing
        return arr[on_boundary]

    def boundary_cells(self) -> frozenset:
        return frozenset(map(tuple, self.boundary_cells_array()))

    def boundary_mask(self) -> "RegionMask":
        return RegionMask(
            self.h, self.boundary_cells_array(), self.origin, dim=self.dim, _presorted=True
        )

    def boundary_volume(self) -> float:
        return len(self.boundary_cells_array()) * self.h ** self.dim

    def dilate_cells(self, steps: int) -> "RegionMask":
        if steps == 0 or not len(self.cells_array):
            return self
        offs = _ball_offsets(self.dim, steps)
        grown = (self.cells_array[:, None, :] + offs[None, :, :]).reshape(-1, self.dim)
        return RegionMask(self.h, unique_rows(grown), self.origin, dim=self.dim, _presorted=True)

    def dilate(self, r: float) -> "RegionMask":
        return self.dilate_cells(int(np.ceil(r / self.h)))

    def erode(self, r: float) -> "RegionMask":
        steps = int(np.ceil(r / self.h))
        if steps == 0 or not len(self.cells_array):
            return self
        offs = _ball_offsets(self.dim, steps)
        arr = self.cells_array
        lo = arr.min(axis=0) - steps - 1
        span = arr.max(axis=0) - lo + 2 * steps + 2
        keys = np.sort(_pack_rows(arr, lo, span))
        keep = np.ones(len(arr), dtype=bool)
        for off in offs:
            nb_keys = _pack_rows(arr + off, lo, span)
            pos = np.clip(np.searchsorted(keys, nb_keys), 0, len(keys) - 1)
            keep &= keys[pos] == nb_keys
        return RegionMask(self.h, arr[keep], self.origin, dim=self.dim, _presorted=True)

    def contains_cell_of(self, point) -> bool:
        idx = tuple(np.floor((np.asarray(point) - self.origin) / self.h).astype(int))
        return idx in self.cells

    def __repr__(self):
        return f"RegionMask(h={self.h}, cells={len(self.cells_array)}, dim={self.dim})"


# --------------------------------------------------------------------------
# adjoint IFS solution
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IfsSolution:
    masks: tuple
    iterations: int
    step_cells: tuple  # symmetric-difference cell counts per round
    converged: bool
    claimed_accuracy: float


def solve_adjoint_ifs(
    sys: SubstitutionSystem,
    h: float,
    iters: Optional[int] = None,
    max_iters: int = 80,
) -> IfsSolution:
    """Iterate A_j <- Q^-1 union_i (D_ij + A_i) and rasterize at resolution h.

    The contractions are first burned in from the anchor points until the
    sample clouds sit within a fraction of a cell of the attractor (the seed
    balls shrink at rate 1/c per round, c the smallest singular value of Q);
    cells visited after burn-in are then accumulated until the masks stop
    growing.  Sampling from on-attractor points keeps the raster at 'cells
    meeting the attractor' instead of inflating it by a cell ring.

    `iters` caps the accumulation rounds; the default runs to stability or
    max_iters.  Claimed accuracy is seed-radius * c^-burnin + h*sqrt(d)."""
    numeric_q = sys.Q.numeric
    try:
        qinv = np.linalg.inv(numeric_q)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("expansion matrix is numerically singular") from exc
    cmin = sys.Q.min_singular_value
    if cmin <= 1.0:
        raise GeometryError("expansion must have singular values > 1")
    d = sys.dim
    # every attractor point is within `reach` of its type's anchor
    reach = sys.max_digit_norm() / (cmin - 1.0)
    r0 = max(reach, h)
    h_fine = h if cmin >= 2.0 else h / 2.0
    burn = int(np.ceil(np.log(max(r0 / (0.25 * h), 2.0)) / np.log(cmin)))
    burn = max(3, min(burn, 60))
    digit_floats = [
        [np.array([v.evaluate() for v in sys.digits[i, j]]) for j in range(sys.kappa)]
        for i in range(sys.kappa)
    ]
    anchor_arr = np.vstack([a.evaluate() for a in sys.anchors])
    # fixed pack bounds: every iterate stays within r0 + h of some anchor
    pad = r0 + 2 * h
    box_lo = np.floor((anchor_arr.min(axis=0) - pad) / h_fine).astype(np.int64) - 2
    box_hi = np.ceil((anchor_arr.max(axis=0) + pad) / h_fine).astype(np.int64) + 2
    span_fine = box_hi - box_lo + 1
    coarse_factor = max(int(round(h / h_fine)), 1)
    lo_coarse = box_lo // coarse_factor - 2
    span_coarse = box_hi // coarse_factor - lo_coarse + 3

    points = [a.evaluate().reshape(1, d) for a in sys.anchors]
    accum = [np.zeros(0, dtype=np.int64) for _ in range(sys.kappa)]
    steps = []
    converged = False
    rounds_cap = burn + (iters if iters is not None else max_iters)
    done_accum = 0
    for rnd in range(rounds_cap):
        new_points = []
        for j in range(sys.kappa):
            chunks = []
            for i in range(sys.kappa):
                if not len(digit_floats[i][j]) or points[i].size == 0:
                    continue
                for u in digit_floats[i][j]:
                    chunks.append((points[i] + u) @ qinv.T)
            if chunks:
                pts = np.concatenate(chunks, axis=0)
                idx = np.floor(pts / h_fine).astype(np.int64)
                keys = np.unique(_pack_rows(idx, box_lo, span_fine))
                cells = _unpack_keys(keys, box_lo, span_fine, d)
                new_points.append((cells + 0.5) * h_fine)
            else:
                new_points.append(np.zeros((0, d)))
        points = new_points
        if rnd < burn:
            continue
        grew = 0
        for j in range(sys.kappa):
            if points[j].size == 0:
                continue
            coarse = np.floor(points[j] / h).astype(np.int64)
            keys = np.unique(_pack_rows(coarse, lo_coarse, span_coarse))
            before = len(accum[j])
            accum[j] = np.union1d(accum[j], keys)
            grew += len(accum[j]) - before
        steps.append(grew)
        done_accum += 1
        if iters is None and len(steps) >= 2 and steps[-1] == 0 and steps[-2] == 0:
            converged = True
            break
    if steps and steps[-1] == 0:
        converged = True
    masks = tuple(
        RegionMask(
            h,
            _unpack_keys(accum[j], lo_coarse, span_coarse, d)
            if len(accum[j])
            else np.zeros((0, d), dtype=np.int64),
            dim=d,
            _presorted=True,
        )
        for j in range(sys.kappa)
    )
    accuracy = r0 * cmin ** (-burn) + h * np.sqrt(d)
    return IfsSolution(
        masks=masks,
        iterations=done_accum,
        step_cells=tuple(steps),
        converged=converged,
        claimed_accuracy=float(accuracy),
    )


# --------------------------------------------------------------------------
# volumes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class VolumeReport:
    volumes: tuple
    pf_eigenvalue: float
    det_abs: float
    ratio_disagreement: Optional[float]
    scale_source: str


def prototile_volumes(sys: SubstitutionSystem, masks=None) -> VolumeReport:
    """Prototile volumes as the left Perron-Frobenius eigenvector of S.

    The eigenvector fixes the ratios; the absolute scale comes from the
    rasterized mask of the first prototile when masks are supplied (with the
    relative disagreement between eigenvector and mask ratios reported),
    otherwise the smallest prototile is normalized to volume 1."""
    sys.require_primitive("prototile_volumes")
    from .substitution import pf_eigen

    lam, _, left = pf_eigen(sys.S)
    det = sys.Q.det_abs
    if abs(lam - det) / det > 1e-6:
        raise GeometryError(
            f"PF eigenvalue {lam} is inconsistent with |det Q| = {det}"
        )
    left = np.abs(left)
    if masks is not None:
        mask_vols = np.array([m.volume for m in masks], dtype=float)
        if mask_vols[0] <= 0:
            raise GeometryError("first prototile mask is empty")
        scaled = left * (mask_vols[0] / left[0])
        disagreement = float(
            np.max(np.abs(scaled - mask_vols) / np.maximum(mask_vols, 1e-300))
        )
        return VolumeReport(
            volumes=tuple(scaled),
            pf_eigenvalue=lam,
            det_abs=det,
            ratio_disagreement=disagreement,
            scale_source="raster",
        )
    scaled = left / left.min()
    return VolumeReport(
        volumes=tuple(scaled),
        pf_eigenvalue=lam,
        det_abs=det,
        ratio_disagreement=None,
        scale_source="eigenvector",
    )


@dataclass(frozen=True)
class BoundaryScan:
    boundary_volumes: tuple  # per prototile, per resolution
    resolutions: tuple
    strictly_decreasing: bool


def boundary_scan(mask_lists: Sequence[Sequence[RegionMask]]) -> BoundaryScan:
    """Boundary-cell volume across nested refinements h, h/2, h/4, ...

    A strictly decreasing sequence for every prototile is raster evidence of
    measure-zero boundary; this is diagnostic, never a hard gate."""
    if len(mask_lists) < 3:
        raise GeometryError("boundary scan needs at least three resolutions")
    resolutions = tuple(ml[0].h for ml in mask_lists)
    for a, b in zip(resolutions, resolutions[1:]):
        if not b < a:
            raise GeometryError("resolutions must strictly refine")
    kappa = len(mask_lists[0])
    per_tile = []
    decreasing = True
    for j in range(kappa):
        seq = tuple(float(ml[j].boundary_volume()) for ml in mask_lists)
        per_tile.append(seq)
        if not all(b < a for a, b in zip(seq, seq[1:])):
            decreasing = False
    return BoundaryScan(
        boundary_volumes=tuple(per_tile),
        resolutions=resolutions,
        strictly_decreasing=decreasing,
    )


# --------------------------------------------------------------------------
# representability diagnostic
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RepresentabilityReport:
    overlap_fraction: float
    gap_fraction: float
    tolerance: float
    level: int
    window: Window

    @property
    def passed(self) -> bool:
        return (
            self.overlap_fraction <= self.tolerance
            and self.gap_fraction <= self.tolerance
        )


def representability_check(
    sys: SubstitutionSystem,
    masks: Sequence[RegionMask],
    level: int,
    window: Window,
    tolerance: float = 0.02,
    patch: Optional[Patch] = None,
) -> RepresentabilityReport:
    """Rasterize the level-k patch of the canonical fixed point over a window
    and measure doubly-covered and uncovered volume fractions."""
    h = masks[0].h
    if any(abs(m.h - h) > 1e-15 for m in masks):
        raise GeometryError("prototile masks must share one resolution")
    diam = max(max(m.bbox().sides) for m in masks)
    if patch is None:
        patch = seed_patch(sys, level)
    lo_idx = np.floor(np.array(window.lo) / h).astype(np.int64)
    hi_idx = np.ceil(np.array(window.hi) / h).astype(np.int64)
    shape = tuple((hi_idx - lo_idx).tolist())
    coverage = np.zeros(shape, dtype=np.int32)
    for tile in patch:
        anchor = tile.shift.evaluate()
        if not window.contains(anchor, margin=diam + h):
            continue
        cells = masks[tile.type].cells_array + np.round(anchor / h).astype(np.int64)
        rel = cells - lo_idx
        keep = np.all((rel >= 0) & (rel < np.array(shape)), axis=1)
        rel = rel[keep]
        if rel.size:
            np.add.at(coverage, tuple(rel.T), 1)
    ncells = coverage.size
    overlap = float((coverage >= 2).sum()) / ncells
    gap = float((coverage == 0).sum()) / ncells
    return RepresentabilityReport(
        overlap_fraction=overlap,
        gap_fraction=gap,
        tolerance=tolerance,
        level=level,
        window=window,
    )


def set_equation_residual(
    sys: SubstitutionSystem, solutions: Sequence[IfsSolution]
) -> list[float]:
    """Volume of the symmetric difference between Q(A_j) and
    union_i (D_ij + A_i), per resolution (should shrink as h does)."""
    out = []
    for sol in solutions:
        masks = sol.masks
        h = masks[0].h
        total = 0.0
        for j in range(sys.kappa):
            lhs_pts = masks[j].centers() @ sys.Q.numeric.T
            lhs = RegionMask.from_points(lhs_pts, h, dim=sys.dim)
            chunks = []
            for i in range(sys.kappa):
                digs = sys.digits[i, j]
                if not digs:
                    continue
                centers = masks[i].centers()
                for u in digs:
                    chunks.append(centers + u.evaluate())
            rhs = RegionMask.from_points(
                np.concatenate(chunks, axis=0), h, dim=sys.dim
            )
            # compare against a 1-cell tolerance band to ignore pure raster noise
            band = lhs.dilate_cells(1)
            outside = rhs.difference(band)
            band2 = rhs.dilate_cells(1)
            missing = lhs.difference(band2)
            total += outside.volume + missing.volume
        out.append(total)
    return out


# --------------------------------------------------------------------------
# local rubber metric
# --------------------------------------------------------------------------

METRIC_CAP = 2.0 ** -0.5


def _colour_arrays(obj) -> list[np.ndarray]:
    if hasattr(obj, "float_arrays"):
        return obj.float_arrays()
    out = []
    for a in obj:
        arr = np.asarray(a, dtype=float)
        out.append(arr.reshape(len(arr), -1) if arr.size else arr.reshape(0, 0))
    return out


def rubber_metric(first, second, tol: float = 1e-9, cap: float = METRIC_CAP) -> float:
    """Local rubber distance between finite coloured point sets.

    d = min(cap, inf{eps : each set's points within the 1/eps ball of the
    origin are eps-shadowed by the other set, colour-respecting}), computed
    by bisection on eps to absolute tolerance `tol`."""
    A = _colour_arrays(first)
    B = _colour_arrays(second)
    if len(A) != len(B):
        raise GeometryError("point sets declare different colour counts")
    sizes_a = sum(len(a) for a in A)
    sizes_b = sum(len(b) for b in B)
    if sizes_a == 0 and sizes_b == 0:
        return 0.0
    if sizes_a == 0 or sizes_b == 0:
        warnings.warn("rubber metric on an empty set returns the cap")
        return cap

    constraints = []  # (norms, min distances to the other set)
    identical = True
    for X, Y in zip(A, B):
        for P, Q in ((X, Y), (Y, X)):
            if len(P) == 0:
                continue
            norms = np.linalg.norm(P, axis=1)
            if len(Q) == 0:
                mind = np.full(len(P), np.inf)
            else:
                diff = P[:, None, :] - Q[None, :, :]
                mind = np.sqrt((diff * diff).sum(axis=2)).min(axis=1)
            constraints.append((norms, mind))
            if mind.max(initial=0.0) > 0:
                identical = False
    if identical:
        return 0.0

    def ok(eps: float) -> bool:
        reach = 1.0 / eps
        for norms, mind in constraints:
            if np.any((norms <= reach) & (mind > eps)):
                return False
        return True

    if not ok(cap):
        return cap
    lo, hi = 0.0, cap
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------------------------------------------------------
# exports
# --------------------------------------------------------------------------


def mask_to_pgm(mask: RegionMask) -> bytes:
    """Binary PGM (P5), one byte per cell over the mask bounding box."""
    if mask.dim != 2:
        raise GeometryError("PGM export is 2-d only")
    lo = mask.cells_array.min(axis=0)
    hi = mask.cells_array.max(axis=0)
    w, hgt = (hi - lo + 1).tolist()
    img = np.full((hgt, w), 255, dtype=np.uint8)
    rel = mask.cells_array - lo
    img[hgt - 1 - rel[:, 1], rel[:, 0]] = 0
    header = f"P5\n{w} {hgt}\n255\n".encode()
    return header + img.tobytes()


def _row_runs(cells: np.ndarray):
    order = np.lexsort((cells[:, 0], cells[:, 1]))
    cells = cells[order]
    runs = []
    i = 0
    while i < len(cells):
        x, y = cells[i]
        j = i
        while j + 1 < len(cells) and cells[j + 1][1] == y and cells[j + 1][0] == cells[j][0] + 1:
            j += 1
        runs.append((int(x), int(y), int(cells[j][0] - x + 1)))
        i = j + 1
    return runs


SVG_PALETTE = (
    "#4c72b0",
    "#dd8452",
    "#55a868",
    "#c44e52",
    "#8172b3",
    "#937860",
    "#da8bc3",
    "#8c8c8c",
)


def mask_to_svg(mask: RegionMask, colour: str = SVG_PALETTE[0]) -> str:
    if mask.dim != 2:
        raise GeometryError("SVG export is 2-d only")
    return patches_to_svg([(mask.cells_array, colour)], mask.h)


def patches_to_svg(cell_groups, h: float) -> str:
    """cell_groups: iterable of (cell index array, colour)."""
    all_cells = np.concatenate([g[0] for g in cell_groups if len(g[0])], axis=0)
    lo = all_cells.min(axis=0)
    hi = all_cells.max(axis=0) + 1
    width, height = (hi - lo).tolist()
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{min(width, 1024)}" height="{min(height, 1024)}">'
    ]
    for cells, colour in cell_groups:
        if not len(cells):
            continue
        parts.append(f'<g fill="{colour}">')
        for x, y, run in _row_runs(np.asarray(cells)):
            parts.append(
                f'<rect x="{x - lo[0]}" y="{hi[1] - 1 - y}" width="{run}" height="1"/>'
            )
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts)


def patch_svg(sys: SubstitutionSystem, patch: Patch, masks: Sequence[RegionMask]) -> str:
    """Render a patch: each tile is its prototile raster shifted to the tile
    anchor, coloured by type from a fixed palette."""
    h = masks[0].h
    groups = []
    for tile in patch:
        shift = np.round(tile.shift.evaluate() / h).astype(np.int64)
        groups.append(
            (masks[tile.type].cells_array + shift, SVG_PALETTE[tile.type % len(SVG_PALETTE)])
        )
    return patches_to_svg(groups, h)
