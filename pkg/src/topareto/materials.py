"""Material screening, approximate stiffness-to-mass indices, and selection.

Candidates are first cut down to the modulus-density Pareto front, then to
materials at least as dense as the one with the best rho/E ratio (denser
front materials are stiffer, run at lower volume fractions, and use
material more efficiently there). The survivors are ranked by the index
``rho * f_inv(t E delta_max / F)``: the density of a fictitious material
that would fill the whole design space at equal part mass. Near-ties can
be re-scored by re-anchoring the front model at the candidate's own
operating volume fraction.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .cache import RunCache
from .errors import (FitInfeasibleError, InfeasibleProblemError,
                     InfeasibleStiffnessError, InvalidArgumentError,
                     ParseError, ValidationError)
from .fem2d import ProblemSpec
from .metamodel import MetaModel, fit, inverse
from .pareto import run_optimizations
from .simp import OptimizerConfig

DEFAULT_TIE_TOL = 0.02


@dataclass(frozen=True)
class Material:
    """Isotropic candidate: Young's modulus in Pa, density in kg/m^3."""

    name: str
    e: float
    rho: float

    def __post_init__(self):
        if not self.name:
            raise InvalidArgumentError("material needs a name")
        if self.e <= 0 or self.rho <= 0:
            raise ValidationError(f"{self.name}: modulus and density must be positive")


@dataclass(frozen=True)
class LoadCase:
    """Physical requirement: force, allowed deflection, part dimensions (SI)."""

    force: float
    delta_max: float
    thickness: float
    length: float
    height: float

    def __post_init__(self):
        for nm in ("force", "delta_max", "thickness", "length", "height"):
            if getattr(self, nm) <= 0:
                raise InvalidArgumentError(f"{nm} must be positive")

    def required_compliance(self, mat: Material) -> float:
        """Dimensionless front value the material must reach: t E delta / F."""
        return self.thickness * mat.e * self.delta_max / self.force


@dataclass
class SelectionReport:
    """Full decision trail of one material selection."""

    kept_after_pareto: list[str]
    kept_after_density: list[str]
    indices: list[tuple[str, float, float]]  # (name, f4, vf)
    winner: Material
    winner_vf: float
    winner_mass: float
    near_ties: list[str]
    trail: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "kept_after_pareto": self.kept_after_pareto,
            "kept_after_density": self.kept_after_density,
            "indices": [{"name": n, "f4": f4, "vf": vf} for n, f4, vf in self.indices],
            "winner": {"name": self.winner.name, "E_Pa": self.winner.e,
                       "rho_kgm3": self.winner.rho},
            "winner_vf": self.winner_vf,
            "winner_mass_kg": self.winner_mass,
            "near_ties": self.near_ties,
            "trail": self.trail,
        }, sort_keys=True, indent=2)

    def to_text(self) -> str:
        lines = list(self.trail)
        lines.append(f"winner: {self.winner.name} "
                     f"(vf={self.winner_vf:.6g}, mass={self.winner_mass:.6g} kg)")
        return "\n".join(lines) + "\n"


def load_materials(path) -> list[Material]:
    """Read a material CSV with header ``name,E_GPa,rho_kgm3`` (SI on load)."""
    text = Path(path).read_text()
    if not text.strip():
        return []
    rows = list(csv.reader(io.StringIO(text)))
    header = [h.strip() for h in rows[0]]
    if header != ["name", "E_GPa", "rho_kgm3"]:
        raise ParseError(f"expected header name,E_GPa,rho_kgm3, got {rows[0]}", line=1)
    mats: list[Material] = []
    seen = set()
    for ln, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 columns, got {len(row)}", line=ln)
        name = row[0].strip()
        if not name:
            raise ParseError("empty material name", line=ln)
        try:
            e_gpa = float(row[1])
            rho = float(row[2])
        except ValueError as exc:
            raise ParseError(f"bad number in row for {name!r}: {exc}", line=ln) from exc
        if e_gpa <= 0 or rho <= 0:
            raise ValidationError(
                f"line {ln}: {name!r} needs positive modulus and density")
        if name in seen:
            raise ValidationError(f"line {ln}: duplicate material {name!r}")
        seen.add(name)
        mats.append(Material(name, e_gpa * 1e9, rho))
    return mats


def screen_pareto(mats: list[Material]) -> list[Material]:
    """Keep only materials on the modulus-density Pareto front.

    A candidate is dropped when some other material is at least as stiff
    and at least as light with one strict inequality; exact ties on both
    axes keep both.
    """
    if not mats:
        raise InvalidArgumentError("material list must be nonempty")
    kept = []
    for m in mats:
        dominated = any(
            o.e >= m.e and o.rho <= m.rho and (o.e > m.e or o.rho < m.rho)
            for o in mats)
        if not dominated:
            kept.append(m)
    return kept


def screen_density(mats: list[Material]) -> list[Material]:
    """Keep materials at least as dense as the best-rho/E one.

    Ties on the ratio break toward lower density, which keeps more
    candidates and never discards a potential optimum.
    """
    if not mats:
        raise InvalidArgumentError("material list must be nonempty")
    ref = min(mats, key=lambda m: (m.rho / m.e, m.rho))
    return [m for m in mats if m.rho >= ref.rho]


def ashby_index(mat: Material, m: MetaModel, lc: LoadCase) -> tuple[float, float]:
    """Approximate selection index ``(vf * rho, vf)`` for one material."""
    x_req = lc.required_compliance(mat)
    try:
        vf = inverse(m, x_req)
    except InfeasibleStiffnessError as exc:
        raise InfeasibleStiffnessError(f"{mat.name}: {exc}") from exc
    return vf * mat.rho, vf


def _default_optimize_fn(cfg: OptimizerConfig, cache: RunCache | None,
                         workers: int):
    def run(problem: ProblemSpec, vf: float, _cfg=None) -> float:
        res = run_optimizations(problem, [{"vf": vf, "init_kind": "uniform"}],
                                cfg, cache, workers)[0]
        return res.compliance_p1
    return run


def refine_vf(mat: Material, problem: ProblemSpec, lc: LoadCase, m0: MetaModel,
              cfg: OptimizerConfig | None = None, optimize_fn=None,
              cache: RunCache | None = None, workers: int = 1
              ) -> tuple[float, float, MetaModel]:
    """Re-anchor the model at the material's own operating point.

    Runs one optimization at the first-guess volume fraction, refits with
    that anchor in place of the default one, and inverts again. Falls back
    to the original model when the refit anchor ratio leaves the feasible
    band.
    """
    cfg = cfg or OptimizerConfig()
    x_req = lc.required_compliance(mat)
    vf0 = inverse(m0, x_req)
    c_full = m0.fit_points[1][1]
    m1 = m0
    if vf0 < 1.0 - 1e-9:
        if optimize_fn is None:
            optimize_fn = _default_optimize_fn(cfg, cache, workers)
        norm = problem.with_unit_load() if problem is not None else None
        c0 = float(optimize_fn(norm, vf0, cfg))
        try:
            m1 = fit((vf0, c0), c_full, m0.problem_name)
        except FitInfeasibleError:
            m1 = m0
    vf1 = inverse(m1, x_req)
    mass = lc.length * lc.height * lc.thickness * vf1 * mat.rho
    return vf1, mass, m1


def select(mats: list[Material], m: MetaModel, lc: LoadCase,
           tie_tol: float = DEFAULT_TIE_TOL, problem: ProblemSpec | None = None,
           cfg: OptimizerConfig | None = None, optimize_fn=None,
           cache: RunCache | None = None, workers: int = 1) -> SelectionReport:
    """Screen, rank by index, and pick the minimum-mass material.

    When the runner-up index is within ``tie_tol`` relative of the best and
    a problem is supplied, the tied candidates are re-scored by
    :func:`refine_vf` and the lower final mass wins.
    """
    if not mats:
        raise InvalidArgumentError("material list must be nonempty")
    trail = [f"candidates: {', '.join(mt.name for mt in mats)}"]

    kept1 = screen_pareto(mats)
    for mt in mats:
        if mt not in kept1:
            trail.append(f"pareto screen removed {mt.name} (stiffer and lighter "
                         f"alternative exists)")
    kept2 = screen_density(kept1)
    ref = min(kept1, key=lambda x: (x.rho / x.e, x.rho))
    for mt in kept1:
        if mt not in kept2:
            trail.append(f"density screen removed {mt.name} "
                         f"(rho {mt.rho:g} below {ref.name} rho {ref.rho:g})")
    trail.append(f"density screen reference: {ref.name} "
                 f"(lowest rho/E = {ref.rho / ref.e:.4g})")

    indices: list[tuple[str, float, float]] = []
    scored: list[tuple[Material, float, float]] = []
    for mt in kept2:
        try:
            f4, vf = ashby_index(mt, m, lc)
        except InfeasibleStiffnessError:
            trail.append(f"{mt.name}: infeasible (full design too compliant)")
            continue
        indices.append((mt.name, f4, vf))
        scored.append((mt, f4, vf))
        trail.append(f"{mt.name}: index {f4:.6g} kg/m^3 at vf {vf:.6g}")
    if not scored:
        raise InfeasibleProblemError(
            "no screened material can satisfy the stiffness constraint")

    scored.sort(key=lambda t: (t[1], t[0].name))
    best, best_f4, best_vf = scored[0]
    near = [mt for mt, f4, _ in scored[1:] if f4 <= best_f4 * (1.0 + tie_tol)]
    winner, winner_vf = best, best_vf
    winner_mass = lc.length * lc.height * lc.thickness * winner_vf * winner.rho

    if near:
        trail.append(f"near-tie within {tie_tol:.0%}: "
                     f"{', '.join(mt.name for mt in near)}")
        if problem is not None or optimize_fn is not None:
            rescored = []
            for mt in [best] + near:
                vf1, mass1, m1 = refine_vf(mt, problem, lc, m, cfg,
                                           optimize_fn, cache, workers)
                if m1 is m:
                    trail.append(f"{mt.name}: refit anchor ratio out of band, "
                                 f"kept original model")
                rescored.append((mass1, mt.name, mt, vf1))
                trail.append(f"{mt.name}: re-scored mass {mass1:.6g} kg "
                             f"at vf {vf1:.6g}")
            rescored.sort(key=lambda t: (t[0], t[1]))
            winner_mass, _, winner, winner_vf = rescored[0]
            trail.append(f"tie resolved by re-scored mass: {winner.name}")
        else:
            trail.append("no problem supplied; tie left to the raw index")

    return SelectionReport(
        kept_after_pareto=[mt.name for mt in kept1],
        kept_after_density=[mt.name for mt in kept2],
        indices=indices,
        winner=winner,
        winner_vf=winner_vf,
        winner_mass=winner_mass,
        near_ties=[mt.name for mt in near],
        trail=trail,
    )
