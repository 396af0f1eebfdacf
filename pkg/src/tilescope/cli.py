"""Command-line surface: JSON system configs, command dispatch, rendering,
and report assembly.

Exit codes: 0 success, 2 config/schema problem, 3 math validation failure,
4 runtime failure.  Reports are deterministic JSON (sorted keys, fixed
seeds); curves go to CSV and graphics to SVG/PGM under the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys as _sys
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, geometry, spectral, substitution
from .geometry import Window
from .numberfield import (
    AffineSqrtWitness,
    AlgebraicScalar,
    BasisSymbol,
    CoordinateBasis,
    DecimalWitness,
    MinimalPolynomial,
    NumberFieldError,
    ProductWitness,
    SymbolicVector,
)
from .substitution import (
    DeclaredEigenvalue,
    DigitSetMatrix,
    ExpansionMap,
    Patch,
    SubstitutionError,
    SubstitutionSystem,
    Tile,
    patch_from_text,
    patch_to_kset,
    patch_to_text,
    seed_patch,
    substitute,
    validate_system,
)

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_MATH = 3
EXIT_RUNTIME = 4

BUILTIN_NAMES = (
    "frank_robinson",
    "kenyon",
    "kenyon_modified",
    "fibonacci_1d",
    "square_lattice",
)


class ConfigError(Exception):
    """Schema-level problem; carries a JSON-pointer-ish location."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer}: {message}" if pointer else message)
        self.pointer = pointer


class MathValidationError(Exception):
    pass


# --------------------------------------------------------------------------
# scalar expressions
# --------------------------------------------------------------------------

_TERM_RE = re.compile(
    r"^([+-]?)(\d+(?:\.\d+)?(?:/\d+)?)?\*?([A-Za-z_][A-Za-z0-9_]*)?$"
)


def parse_scalar(basis: CoordinateBasis, text: str, pointer: str = ""):
    """Parse expressions like '2', '1/3', '0.37', 'b+2', '2tau', 'tau-1'
    into an exact scalar over the basis (decimals become exact fractions)."""
    s = str(text).replace(" ", "")
    if not s:
        raise ConfigError("empty scalar expression", pointer)
    out = [Fraction(0)] * basis.size
    for term in re.findall(r"[+-]?[^+-]+", s):
        m = _TERM_RE.match(term)
        if not m or (m.group(2) is None and m.group(3) is None):
            raise ConfigError(f"cannot parse term {term!r}", pointer)
        sign = -1 if m.group(1) == "-" else 1
        try:
            coeff = Fraction(m.group(2)) if m.group(2) else Fraction(1)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad coefficient in {term!r}: {exc}", pointer)
        name = m.group(3)
        if name is None:
            idx = 0
        else:
            try:
                idx = basis.index(name)
            except KeyError:
                raise ConfigError(f"undeclared symbol {name!r}", pointer)
        out[idx] += sign * coeff
    return tuple(out)


def parse_vector(basis: CoordinateBasis, parts, pointer: str = "") -> SymbolicVector:
    return SymbolicVector.from_scalars(
        basis, [parse_scalar(basis, p, pointer) for p in parts]
    )


# --------------------------------------------------------------------------
# config loading
# --------------------------------------------------------------------------


def _witness_from_json(obj, pointer):
    form = obj.get("form")
    if form == "affine_sqrt":
        return AffineSqrtWitness(
            Fraction(obj["p"]), Fraction(obj["q"]), int(obj["r"])
        )
    if form == "decimal":
        return DecimalWitness(str(obj["text"]))
    if form == "product":
        return ProductWitness(str(obj["left"]), str(obj["right"]))
    raise ConfigError(f"unknown witness form {form!r}", pointer)


def _basis_from_json(node, pointer="/basis") -> CoordinateBasis:
    symbols = []
    for i, sym in enumerate(node.get("symbols", [])):
        p = f"{pointer}/symbols/{i}"
        name = sym.get("name")
        if not name:
            raise ConfigError("symbol needs a name", p)
        if name == "1":
            symbols.append(BasisSymbol("1"))
            continue
        kind = sym.get("kind")
        if kind == "algebraic":
            try:
                scal = AlgebraicScalar(
                    MinimalPolynomial(tuple(sym["minpoly"])),
                    complex(sym["approx"][0], sym["approx"][1]),
                    float(sym["isolation_radius"]),
                )
            except NumberFieldError as exc:
                raise MathValidationError(f"{p}: {exc}")
            symbols.append(BasisSymbol(name, algebraic=scal))
        elif kind == "free":
            symbols.append(
                BasisSymbol(name, witness=_witness_from_json(sym.get("witness", {}), p))
            )
        else:
            raise ConfigError(f"unknown symbol kind {kind!r}", p)
    names = [s.name for s in symbols]
    products = {}
    for key, val in node.get("products", {}).items():
        p = f"{pointer}/products/{key}"
        try:
            left, right = key.split(",")
            i, j = names.index(left), names.index(right)
        except ValueError:
            raise ConfigError(f"bad product key {key!r}", p)
        for n in val:
            if n not in names:
                raise ConfigError(f"undeclared symbol {n!r} in product", p)
        products[(i, j)] = {n: Fraction(c) for n, c in val.items()}
    try:
        return CoordinateBasis(symbols, products)
    except NumberFieldError as exc:
        raise MathValidationError(f"{pointer}: {exc}")


def _expansion_from_json(node, basis, dim, pointer="/expansion") -> ExpansionMap:
    entries = node.get("entries")
    if not entries or len(entries) != dim or any(len(r) != dim for r in entries):
        raise ConfigError(f"expansion entries must be {dim}x{dim}", pointer)
    parsed = [
        [parse_scalar(basis, e, f"{pointer}/entries/{i}/{j}") for j, e in enumerate(row)]
        for i, row in enumerate(entries)
    ]
    eigen = []
    for k, ev in enumerate(node.get("eigenvalues") or []):
        p = f"{pointer}/eigenvalues/{k}"
        try:
            scal = AlgebraicScalar(
                MinimalPolynomial(tuple(ev["minpoly"])),
                complex(ev["approx"][0], ev["approx"][1]),
                float(ev.get("isolation_radius", 0.5)),
            )
        except NumberFieldError as exc:
            raise MathValidationError(f"{p}: {exc}")
        eigen.append(DeclaredEigenvalue(scal, int(ev.get("multiplicity", 1))))
    try:
        # an absent declaration loads the system for generation only
        return ExpansionMap(basis, parsed, eigen if eigen else None)
    except (SubstitutionError, NumberFieldError) as exc:
        raise MathValidationError(f"{pointer}: {exc}")


class LoadedSystem:
    def __init__(self, system: SubstitutionSystem, options: dict, raw: dict, path):
        self.system = system
        self.options = options
        self.raw = raw
        self.path = path


def load_config(path) -> LoadedSystem:
    """Load and validate a system config; schema violations raise
    ConfigError, mathematical inconsistencies raise MathValidationError."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {version!r} (supported: {SCHEMA_VERSION})",
            "/schema_version",
        )
    name = raw.get("name") or path.stem
    dim = raw.get("dimension")
    if not isinstance(dim, int) or dim < 1:
        raise ConfigError("dimension must be a positive integer", "/dimension")
    basis = _basis_from_json(raw.get("basis", {}))
    expansion = _expansion_from_json(raw.get("expansion", {}), basis, dim)
    labels = raw.get("prototiles")
    if not labels or not isinstance(labels, list):
        raise ConfigError("prototiles must be a nonempty list", "/prototiles")
    kappa = len(labels)
    cells = [[[] for _ in range(kappa)] for _ in range(kappa)]
    for key, vecs in raw.get("digits", {}).items():
        p = f"/digits/{key}"
        try:
            i, j = (int(x) for x in key.split(","))
        except ValueError:
            raise ConfigError(f"bad digit key {key!r} (want 'i,j')", p)
        if not (0 <= i < kappa and 0 <= j < kappa):
            raise ConfigError(f"digit key {key!r} out of range", p)
        for t, vec in enumerate(vecs):
            if len(vec) != dim:
                raise ConfigError(f"digit {t} has {len(vec)} coords, want {dim}", p)
            cells[i][j].append(parse_vector(basis, vec, f"{p}/{t}"))
    try:
        digits = DigitSetMatrix(kappa, cells)
        system = SubstitutionSystem(
            name, basis, expansion, digits, labels=labels
        )
        validate_system(system)
    except (SubstitutionError, NumberFieldError) as exc:
        raise MathValidationError(str(exc))
    options = dict(raw.get("analysis", {}))
    return LoadedSystem(system, options, raw, path)


def builtin_config_path(name: str) -> Path:
    ref = resources.files("tilescope").joinpath(f"configs/{name}.json")
    with resources.as_file(ref) as p:
        return Path(p)


def load_builtin(name: str) -> LoadedSystem:
    if name not in BUILTIN_NAMES:
        raise ConfigError(f"unknown builtin system {name!r}; have {BUILTIN_NAMES}")
    return load_config(builtin_config_path(name))


# --------------------------------------------------------------------------
# workspace: cached pipeline artifacts per loaded system
# --------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def tag(value, method: str):
    """Report numbers carry how they were obtained."""
    return {"value": _jsonable(value), "method": method}


class Workspace:
    def __init__(self, loaded: LoadedSystem):
        self.loaded = loaded
        self.system = loaded.system
        self.options = loaded.options
        self._cache = {}

    def opt(self, key, default=None):
        return self.options.get(key, default)

    def ifs(self, resolution=None, iters=None) -> geometry.IfsSolution:
        h = resolution or self.opt("resolution", 1 / 64)
        it = iters if iters is not None else self.opt("ifs_iterations")
        key = ("ifs", h, it)
        if key not in self._cache:
            self._cache[key] = geometry.solve_adjoint_ifs(self.system, h, iters=it)
        return self._cache[key]

    def volumes(self) -> geometry.VolumeReport:
        if "volumes" not in self._cache:
            self._cache["volumes"] = geometry.prototile_volumes(
                self.system, self.ifs().masks
            )
        return self._cache["volumes"]

    def tile_freqs(self):
        if "tile_freqs" not in self._cache:
            self._cache["tile_freqs"] = analysis.tile_frequencies(
                self.system, self.volumes().volumes
            )
        return self._cache["tile_freqs"]

    def xi(self, level=None, radius=None) -> analysis.ReturnVectorSet:
        lv = level or min(int(self.opt("levels", 4)), 3)
        rad = radius or float(self.opt("radius", 3.0))
        key = ("xi", lv, rad)
        if key not in self._cache:
            self._cache[key] = analysis.return_vectors(self.system, lv, rad)
        return self._cache[key]

    def periods(self):
        if "periods" not in self._cache:
            w = float(self.opt("period_window", 4.0))
            lv = int(self.opt("period_level", 3))
            window = Window((-w,) * self.system.dim, (w,) * self.system.dim)
            self._cache["periods"] = analysis.detect_periods(self.system, lv, window)
        return self._cache["periods"]

    def census(self, m=None, level=None, region=None) -> spectral.CylinderCensus:
        m = m or int(self.opt("m", 2))
        level = level or int(self.opt("census_level", 4))
        key = ("census", m, level, str(region))
        if key not in self._cache:
            sample = patch_to_kset(self.system, seed_patch(self.system, level))
            grid = spectral.make_grid(sample, m)
            if region is None:
                spec_region = self.opt("census_region")
                if spec_region is None:
                    raise ConfigError("config lacks analysis.census_region")
                region = Window(
                    tuple(r[0] for r in spec_region),
                    tuple(r[1] for r in spec_region),
                )
            self._cache[key] = spectral.build_cylinders(sample, grid, region)
        return self._cache[key]

    def alpha_candidates(self):
        declared = [
            parse_vector(self.system.basis, parts, "/analysis/alphas")
            for parts in self.opt("alphas", [])
        ]
        return spectral.default_alpha_candidates(self.system, declared)

    def eigen_results(self, nmax=None):
        nmax = nmax or int(self.opt("nmax", 30))
        key = ("eigen", nmax)
        if key not in self._cache:
            period_vecs = [c.vector for c in self.periods()]
            out = []
            for alpha, provenance in self.alpha_candidates():
                verdict = spectral.eigenvalue_test(
                    self.system, alpha, self.xi(), period_vecs, N=nmax
                )
                out.append((verdict, provenance))
            self._cache[key] = out
        return self._cache[key]

    def flc(self):
        if "flc" not in self._cache:
            self._cache["flc"] = analysis.flc_scan(
                self.system,
                int(self.opt("levels", 5)),
                float(self.opt("radius", 3.0)),
            )
        return self._cache["flc"]

    def rigidity(self):
        if "rigidity" not in self._cache:
            self._cache["rigidity"] = analysis.rigidity_check(self.system, self.xi())
        return self._cache["rigidity"]

    def pisot(self):
        if "pisot" not in self._cache:
            self._cache["pisot"] = spectral.pisot_classification(self.system)
        return self._cache["pisot"]


# --------------------------------------------------------------------------
# command blocks
# --------------------------------------------------------------------------


def _vec_str(v: SymbolicVector) -> str:
    return repr(v)


def block_validate(ws: Workspace) -> dict:
    rep = validate_system(ws.system)
    return {
        "expansive": rep.expansive,
        "primitivity_exponent": rep.primitivity_exponent,
        "pf_eigenvalue": tag(rep.pf_eigenvalue, "float"),
        "det_abs": tag(rep.det_abs, "float"),
        "pf_relative_error": tag(rep.pf_relative_error, "float"),
        "warnings": list(rep.warnings),
    }


def block_prototiles(ws: Workspace, resolution=None, iters=None, out_dir=None) -> dict:
    sol = ws.ifs(resolution, iters)
    vols = geometry.prototile_volumes(ws.system, sol.masks)
    ws._cache["volumes"] = vols
    block = {
        "resolution": sol.masks[0].h,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "claimed_accuracy": tag(sol.claimed_accuracy, "raster"),
        "volumes": [tag(v, "raster") for v in vols.volumes],
        "eigenvector_vs_mask_disagreement": tag(vols.ratio_disagreement, "raster"),
        "pf_eigenvalue": tag(vols.pf_eigenvalue, "float"),
    }
    if out_dir is not None and ws.system.dim == 2:
        for j, mask in enumerate(sol.masks):
            stem = f"{ws.system.name}_prototile{j}_h{mask.h:g}"
            write_atomic(out_dir / f"{stem}.pgm", geometry.mask_to_pgm(mask))
            write_atomic(
                out_dir / f"{stem}.svg",
                geometry.mask_to_svg(
                    mask, geometry.SVG_PALETTE[j % len(geometry.SVG_PALETTE)]
                ).encode(),
            )
        block["artifacts"] = sorted(
            p.name for p in out_dir.glob(f"{ws.system.name}_prototile*")
        )
    return block


def block_freq(ws: Workspace, tile: int = 0, patch: Optional[Patch] = None,
               levels=None, out_dir=None) -> dict:
    levels = levels or int(ws.opt("freq_levels", 4))
    target = patch if patch is not None else Patch([ws.system.prototile_tile(tile)])
    est = analysis.patch_frequency(
        ws.system, target, levels, ws.volumes().volumes
    )
    freqs = ws.tile_freqs()
    vols = ws.volumes().volumes
    table = analysis.FrequencyTable()
    table.add("pattern", est)
    block = {
        "pattern_tiles": len(target),
        "estimate": tag(est.value, "fit"),
        "error_estimate": tag(est.error, "fit"),
        "type_independence_gap": tag(est.type_independence_gap, "fit"),
        "legal": bool(est.legality),
        "legality_k": est.legality.k,
        "cauchy_decreasing": est.cauchy_decreasing,
        "tile_frequencies": [tag(float(f), "float") for f in freqs],
        "density_normalization": tag(
            float(np.dot(freqs, np.asarray(vols))), "float"
        ),
        "density_check": table.density_check(freqs, vols),
    }
    if out_dir is not None:
        lines = ["level,count,volume,ratio,base_type"]
        for level, count, vol, ratio, base in est.curve:
            lines.append(f"{level},{count},{vol!r},{ratio!r},{base}")
        path = out_dir / f"{ws.system.name}_freq_curve.csv"
        write_atomic(path, ("\n".join(lines) + "\n").encode())
        block["curve_csv"] = path.name
    return block


def block_flc(ws: Workspace, levels=None, radius=None, out_dir=None) -> dict:
    if levels or radius:
        rep = analysis.flc_scan(
            ws.system,
            levels or int(ws.opt("levels", 5)),
            radius or float(ws.opt("radius", 3.0)),
        )
    else:
        rep = ws.flc()
    block = {
        "verdict": rep.verdict,
        "config_counts": list(rep.counts),
        "min_gaps": [g if np.isfinite(g) else None for g in rep.min_gaps],
        "note": rep.note,
    }
    if out_dir is not None:
        lines = ["level,configurations,min_gap"]
        for i, (c, g) in enumerate(zip(rep.counts, rep.min_gaps), start=1):
            lines.append(f"{i},{c},{g!r}")
        path = out_dir / f"{ws.system.name}_flc_curve.csv"
        write_atomic(path, ("\n".join(lines) + "\n").encode())
        block["curve_csv"] = path.name
    return block


def block_periods(ws: Workspace) -> dict:
    cands = ws.periods()
    return {
        "candidates": [
            {"vector": _vec_str(c.vector), "matches": c.matches}
            for c in cands
        ]
    }


def block_rigidity(ws: Workspace) -> dict:
    verdict = ws.rigidity()
    out = {
        "status": verdict.status,
        "qdim": verdict.qdim,
        "bound": verdict.bound,
    }
    if verdict.witness:
        out["witness"] = [_vec_str(v) for v in verdict.witness]
    if verdict.excess is not None:
        out["dimension_excess"] = verdict.excess
    if verdict.reason:
        out["reason"] = verdict.reason
    if verdict.heuristic_generators:
        out["heuristic_generators"] = [
            _vec_str(v) for v in verdict.heuristic_generators
        ]
    return out


def block_pisot(ws: Workspace) -> dict:
    rep = ws.pisot()
    return {
        "eigenvalues": [
            {
                "value": name,
                "pisot": verdict,
                "margin": tag(margin, "float") if margin is not None else None,
            }
            for name, verdict, margin in rep.entries
        ],
        "pisot_family": rep.family,
        "totally_non_pisot": rep.totally_non_pisot,
        "undecided": rep.undecided,
    }


def block_eigentest(ws: Workspace, alphas=None, nmax=None, out_dir=None) -> dict:
    nmax = nmax or int(ws.opt("nmax", 30))
    period_vecs = [c.vector for c in ws.periods()]
    if alphas is None:
        results = ws.eigen_results(nmax)
    else:
        results = [
            (
                spectral.eigenvalue_test(
                    ws.system, a, ws.xi(), period_vecs, N=nmax
                ),
                "cli",
            )
            for a in alphas
        ]
    entries = []
    for verdict, provenance in results:
        entry = {
            "alpha": _vec_str(verdict.alpha),
            "provenance": provenance,
            "status": verdict.status,
            "period_ok": verdict.period_ok,
        }
        if verdict.rho is not None:
            entry["rho"] = tag(verdict.rho, "fit")
        if verdict.fail_n is not None:
            entry["fail_n"] = verdict.fail_n
            entry["fail_residue"] = tag(verdict.fail_residue, "float")
        if verdict.residues.notice:
            entry["notice"] = verdict.residues.notice
        fam = spectral.pisot_family_of_alpha(ws.system, verdict.alpha)
        entry["pisot_family_of_alpha"] = fam.family
        entries.append(entry)
        if out_dir is not None:
            lines = ["n,residue,exact_zero,method"]
            for e in verdict.residues.entries:
                lines.append(f"{e.n},{e.value!r},{int(e.exact_zero)},{e.method}")
            safe = re.sub(r"[^A-Za-z0-9_.-]", "_", _vec_str(verdict.alpha))
            path = out_dir / f"{ws.system.name}_residues_{safe}.csv"
            write_atomic(path, ("\n".join(lines) + "\n").encode())
    return {"nmax": nmax, "results": entries}


def block_cylinders(ws: Workspace, m=None, level=None, region=None) -> dict:
    census = ws.census(m, level, region)
    part = spectral.partition_check(census)
    wiggle_ok = all(
        c.wiggle_volume <= census.grid.side ** census.grid.dim + 1e-12
        for c in census.classes
    )
    return {
        "m": census.grid.m,
        "m0": census.grid.m0,
        "eta": tag(census.grid.eta, "float"),
        "classes": len(census.classes),
        "wiggle_bound_ok": wiggle_ok,
        "partition_total": tag(part.total, "float"),
        "empty_measure": tag(part.empty_measure, "float"),
        "partition_pass": part.passed,
    }


def block_mixing(ws: Workspace, z: Optional[SymbolicVector] = None, nmax=3,
                 out_dir=None) -> dict:
    if z is None:
        z = parse_vector(
            ws.system.basis, ws.opt("mixing_z"), "/analysis/mixing_z"
        )
    rep = spectral.mixing_overlap_bound(
        ws.system, z, ws.volumes().volumes, ws.tile_freqs(), n_max=nmax
    )
    block = {
        "z": _vec_str(rep.z),
        "k0": rep.k0,
        "witness_type": rep.ell,
        "delta": tag(rep.delta, "float"),
        "curve": [
            {"n": n, "pairs": p, "singles": s, "ratio": tag(r, "float")}
            for n, p, s, r in rep.curve
        ],
        "exceeds_2delta": rep.passed,
    }
    if out_dir is not None:
        lines = ["n,pairs,singles,ratio"]
        for n, p, s, r in rep.curve:
            lines.append(f"{n},{p},{s},{r!r}")
        path = out_dir / f"{ws.system.name}_mixing_curve.csv"
        write_atomic(path, ("\n".join(lines) + "\n").encode())
        block["curve_csv"] = path.name
    return block


def block_weak_mixing(ws: Workspace) -> dict:
    results = [v for v, _ in ws.eigen_results()]
    rep = spectral.weak_mixing_verdict(
        ws.system,
        ws.pisot(),
        results,
        flc_verdict=ws.flc().verdict,
        rigidity_status=ws.rigidity().status,
    )
    return {
        "verdict": rep.verdict,
        "reason": rep.reason,
        "passing_alphas": list(rep.passing),
        "warnings": list(rep.warnings),
    }


# --------------------------------------------------------------------------
# file helpers
# --------------------------------------------------------------------------


def write_atomic(path: Path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def dump_report(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2, default=str)


# --------------------------------------------------------------------------
# main
# --------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tilescope",
        description="analysis pipeline for tile-substitution systems",
    )
    ap.add_argument("--out-dir", default="out", help="artifact directory")
    sub = ap.add_subparsers(dest="command", required=True)

    def cfg(p):
        p.add_argument("config", help="config path or builtin name")
        return p

    cfg(sub.add_parser("validate", help="load and validate a system"))
    g = cfg(sub.add_parser("generate", help="generate a patch"))
    g.add_argument("--level", type=int, default=1)
    g.add_argument("--window", help="lo,hi[,lo,hi...] clip box")
    g.add_argument("--out", help="patch output file")
    r = cfg(sub.add_parser("render", help="render a patch to SVG"))
    r.add_argument("--svg", action="store_true", default=True,
                   help="emit SVG (the only supported format)")
    r.add_argument("--level", type=int, default=2)
    r.add_argument("--resolution", type=float)
    p = cfg(sub.add_parser("prototiles", help="solve prototile supports"))
    p.add_argument("--resolution", type=float)
    p.add_argument("--iters", type=int)
    f = cfg(sub.add_parser("freq", help="patch frequency estimates"))
    f.add_argument("--tile", type=int, default=0)
    f.add_argument("--patch-file")
    f.add_argument("--levels", type=int)
    fl = cfg(sub.add_parser("flc", help="local-complexity scan"))
    fl.add_argument("--levels", type=int)
    fl.add_argument("--radius", type=float)
    cfg(sub.add_parser("rigidity", help="rigidity of the return-vector module"))
    cfg(sub.add_parser("pisot", help="Pisot classification of the expansion"))
    e = cfg(sub.add_parser("eigentest", help="test candidate eigenvalues"))
    e.add_argument("--alpha", action="append", help="comma-separated coordinates")
    e.add_argument("--nmax", type=int)
    c = cfg(sub.add_parser("cylinders", help="cylinder census and partition"))
    c.add_argument("--m", type=int)
    c.add_argument("--level", type=int)
    mx = cfg(sub.add_parser("mixing", help="non-mixing overlap bound"))
    mx.add_argument("--z", help="comma-separated return vector")
    mx.add_argument("--nmax", type=int, default=3)
    mt = cfg(sub.add_parser("metric", help="local rubber metric of two patch files"))
    mt.add_argument("--a", required=True)
    mt.add_argument("--b", required=True)
    rp = cfg(sub.add_parser("report", help="full pipeline report"))
    rp.add_argument("--all", action="store_true")
    rp.add_argument("--out", help="report output file")
    return ap


def _resolve_config(arg: str) -> LoadedSystem:
    path = Path(arg)
    if path.exists():
        return load_config(path)
    if arg in BUILTIN_NAMES:
        return load_builtin(arg)
    raise ConfigError(f"no such config file or builtin system: {arg}")


def run_command(args, out_dir: Path):
    loaded = _resolve_config(args.config)
    ws = Workspace(loaded)
    name = ws.system.name
    report = {
        "schema_version": SCHEMA_VERSION,
        "system": name,
        "command": args.command,
        "blocks": {},
    }
    blocks = report["blocks"]
    failed = False

    def guard(key, fn):
        nonlocal failed
        try:
            blocks[key] = fn()
        except Exception as exc:  # partial reports mark failed blocks
            blocks[key] = {"failed": True, "error": f"{type(exc).__name__}: {exc}"}
            failed = True

    if args.command == "validate":
        blocks["validate"] = block_validate(ws)
    elif args.command == "generate":
        window = None
        if args.window:
            vals = [float(x) for x in args.window.split(",")]
            los, his = vals[0::2], vals[1::2]
            window = Window(tuple(los), tuple(his))
        patch = seed_patch(ws.system, 0)
        if args.level:
            patch = substitute(ws.system, patch, args.level, window=window)
        text = patch_to_text(ws.system, patch)
        out = Path(args.out) if args.out else out_dir / f"{name}_patch_L{args.level}.txt"
        write_atomic(out, text.encode())
        blocks["generate"] = {
            "level": args.level,
            "tiles": len(patch),
            "type_counts": [int(x) for x in patch.type_counts(ws.system.kappa)],
            "patch_file": str(out),
        }
    elif args.command == "render":
        sol = ws.ifs(args.resolution)
        patch = seed_patch(ws.system, args.level)
        svg = geometry.patch_svg(ws.system, patch, sol.masks)
        out = out_dir / f"{name}_patch_L{args.level}.svg"
        write_atomic(out, svg.encode())
        blocks["render"] = {"level": args.level, "tiles": len(patch), "svg": str(out)}
    elif args.command == "prototiles":
        blocks["prototiles"] = block_prototiles(
            ws, args.resolution, args.iters, out_dir
        )
    elif args.command == "freq":
        patch = None
        if args.patch_file:
            patch = patch_from_text(Path(args.patch_file).read_text(), ws.system.basis)
        blocks["freq"] = block_freq(ws, args.tile, patch, args.levels, out_dir)
    elif args.command == "flc":
        blocks["flc"] = block_flc(ws, args.levels, args.radius, out_dir)
    elif args.command == "rigidity":
        blocks["rigidity"] = block_rigidity(ws)
    elif args.command == "pisot":
        blocks["pisot"] = block_pisot(ws)
    elif args.command == "eigentest":
        alphas = None
        if args.alpha:
            alphas = [
                parse_vector(ws.system.basis, a.split(","), "--alpha")
                for a in args.alpha
            ]
        blocks["eigentest"] = block_eigentest(ws, alphas, args.nmax, out_dir)
    elif args.command == "cylinders":
        blocks["cylinders"] = block_cylinders(ws, args.m, args.level)
    elif args.command == "mixing":
        z = None
        if args.z:
            z = parse_vector(ws.system.basis, args.z.split(","), "--z")
        blocks["mixing"] = block_mixing(ws, z, args.nmax, out_dir)
    elif args.command == "metric":
        pa = patch_from_text(Path(args.a).read_text(), ws.system.basis)
        pb = patch_from_text(Path(args.b).read_text(), ws.system.basis)
        dist = geometry.rubber_metric(
            patch_to_kset(ws.system, pa), patch_to_kset(ws.system, pb)
        )
        blocks["metric"] = {"distance": tag(dist, "float")}
    elif args.command == "report":
        guard("validate", lambda: block_validate(ws))
        guard("prototiles", lambda: block_prototiles(ws, out_dir=out_dir))
        guard("freq", lambda: block_freq(ws, out_dir=out_dir))
        guard("flc", lambda: block_flc(ws))
        guard("periods", lambda: block_periods(ws))
        guard("rigidity", lambda: block_rigidity(ws))
        guard("pisot", lambda: block_pisot(ws))
        guard("eigentest", lambda: block_eigentest(ws, out_dir=out_dir))
        guard("mixing", lambda: block_mixing(ws, out_dir=out_dir))
        guard("cylinders", lambda: block_cylinders(ws))
        guard("weak_mixing", lambda: block_weak_mixing(ws))
    out_path = None
    if args.command == "report":
        out_path = Path(args.out) if args.out else out_dir / f"{name}_report.json"
    else:
        out_path = out_dir / f"{name}_{args.command}.json"
    write_atomic(out_path, dump_report(report).encode())
    return report, (EXIT_RUNTIME if failed else EXIT_OK)


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    out_dir = Path(args.out_dir)
    try:
        report, code = run_command(args, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_SCHEMA
    except MathValidationError as exc:
        print(f"math validation error: {exc}", file=_sys.stderr)
        return EXIT_MATH
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return EXIT_RUNTIME
    print(dump_report(report))
    return code


if __name__ == "__main__":
    _sys.exit(main())
