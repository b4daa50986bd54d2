"""SIMP compliance minimization at a fixed volume fraction.

Optimality-criteria update with move limits and a bisected volume
multiplier, cone density/sensitivity filtering, and a penalization-1
re-evaluation of the final design. The update scheme and defaults follow
the classic 88-line layout: move limit 0.2, damping 0.5, penalization 3.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse

from .errors import InvalidArgumentError, SolverError
from .fem2d import (E_MIN_DEFAULT, DensityField, Grid, ProblemSpec, kernel_for,
                    simp_modulus)

INITIAL_DESIGN_KINDS = (
    "uniform",
    "vstripes2",
    "vstripes4",
    "hstripes2",
    "hstripes4",
    "diag_sum",
    "diag_diff",
    "disc",
    "ring",
    "noise",
    "previous",
)

_NOISE_SEED = 130904


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for one compliance minimization.

    ``rmin=None`` resolves per grid as ``3 * nelx / 200`` clamped to at
    least 1.2, mimicking the relative filter size of a 200-wide reference
    grid on smaller ones.
    """

    penal: float = 3.0
    rmin: float | None = None
    filter_kind: str = "density"
    max_iters: int = 300
    move_limit: float = 0.2
    change_tol: float = 0.01
    eta: float = 0.5
    e_min: float = E_MIN_DEFAULT
    solve_method: str = "auto"

    def __post_init__(self):
        if self.penal < 1:
            raise InvalidArgumentError("penal must be >= 1")
        if self.rmin is not None and self.rmin < 1:
            raise InvalidArgumentError("rmin must be >= 1")
        if not 0 < self.move_limit <= 1:
            raise InvalidArgumentError("move_limit must lie in (0, 1]")
        if not 0 < self.eta <= 1:
            raise InvalidArgumentError("eta must lie in (0, 1]")
        if self.filter_kind not in ("density", "sensitivity"):
            raise InvalidArgumentError(f"unknown filter kind {self.filter_kind!r}")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")

    def resolve_rmin(self, grid: Grid) -> float:
        if self.rmin is not None:
            return self.rmin
        return max(1.2, 3.0 * grid.nelx / 200.0)

    def digest(self) -> str:
        doc = {
            "penal": self.penal, "rmin": self.rmin, "filter_kind": self.filter_kind,
            "max_iters": self.max_iters, "move_limit": self.move_limit,
            "change_tol": self.change_tol, "eta": self.eta, "e_min": self.e_min,
            "solve_method": self.solve_method,
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class DesignResult:
    """Outcome of one optimization run."""

    densities: DensityField
    compliance_p: float
    compliance_p1: float
    vf: float
    iterations: int
    converged: bool
    descent_violations: int = 0

    def summary(self) -> dict:
        return {
            "compliance_p": self.compliance_p,
            "compliance_p1": self.compliance_p1,
            "vf": self.vf,
            "iterations": self.iterations,
            "converged": self.converged,
            "descent_violations": self.descent_violations,
        }


def filter_build(grid: Grid, rmin: float) -> scipy.sparse.csr_matrix:
    """Row-normalized cone filter: w_ij = max(0, rmin - dist(i, j))."""
    if rmin < 1:
        raise InvalidArgumentError("rmin must be >= 1")
    return _filter_cached(grid, float(rmin))


@lru_cache(maxsize=64)
def _filter_cached(grid: Grid, rmin: float) -> scipy.sparse.csr_matrix:
    nelx, nely, nel = grid.nelx, grid.nely, grid.nel
    reach = int(np.ceil(rmin)) - 1
    ex = np.arange(nelx)
    ey = np.arange(nely)
    exg, eyg = np.meshgrid(ex, ey, indexing="ij")
    ids = (exg * nely + eyg).ravel()
    rows, cols, vals = [], [], []
    for dx in range(-reach, reach + 1):
        for dy in range(-reach, reach + 1):
            w = rmin - np.hypot(dx, dy)
            if w <= 0:
                continue
            src_x = exg + dx
            src_y = eyg + dy
            ok = ((src_x >= 0) & (src_x < nelx) & (src_y >= 0) & (src_y < nely)).ravel()
            rows.append(ids[ok])
            cols.append((src_x * nely + src_y).ravel()[ok])
            vals.append(np.full(ok.sum(), w))
    h = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nel, nel)).tocsr()
    rowsum = np.asarray(h.sum(axis=1)).ravel()
    inv = scipy.sparse.diags(1.0 / rowsum)
    return (inv @ h).tocsr()


def initial_design(kind: str, target_vf: float, grid: Grid) -> DensityField:
    """One of the eleven starting fields, volume-rescaled to ``target_vf``.

    Base patterns live in [0,1]; a global shift clamped to [0,1] is bisected
    until the mean density matches the target within 1e-6. ``previous`` is a
    placeholder kind that degenerates to uniform when no earlier design is
    supplied by the caller.
    """
    if kind not in INITIAL_DESIGN_KINDS:
        raise InvalidArgumentError(f"unknown initial design kind {kind!r}")
    if not 0 < target_vf <= 1:
        raise InvalidArgumentError("target_vf must lie in (0, 1]")
    base = _base_pattern(kind, grid)
    return DensityField(rescale_to_volume(base, target_vf))


def _base_pattern(kind: str, grid: Grid) -> np.ndarray:
    nelx, nely = grid.nelx, grid.nely
    ex, ey = np.meshgrid(np.arange(nelx), np.arange(nely), indexing="ij")
    x = (ex.ravel() + 0.5) / nelx
    y = (ey.ravel() + 0.5) / nely
    if kind in ("uniform", "previous"):
        return np.full(grid.nel, 0.5)
    if kind == "vstripes2":
        return 0.5 * (1 + np.cos(2 * np.pi * 2 * x))
    if kind == "vstripes4":
        return 0.5 * (1 + np.cos(2 * np.pi * 4 * x))
    if kind == "hstripes2":
        return 0.5 * (1 + np.cos(2 * np.pi * 2 * y))
    if kind == "hstripes4":
        return 0.5 * (1 + np.cos(2 * np.pi * 4 * y))
    if kind == "diag_sum":
        return 0.5 * (1 + np.cos(2 * np.pi * 1.5 * (x + y)))
    if kind == "diag_diff":
        return 0.5 * (1 + np.cos(2 * np.pi * 1.5 * (x - y)))
    if kind == "disc":
        d = np.hypot(x - 0.5, y - 0.5)
        return np.clip(2.5 * (0.45 - d), 0.0, 1.0)
    if kind == "ring":
        d = np.hypot(x - 0.5, y - 0.5)
        return np.exp(-((d - 0.33) / 0.12) ** 2)
    if kind == "noise":
        rng = np.random.default_rng(_NOISE_SEED)
        raw = rng.random(grid.nel)
        w = filter_build(grid, 1.0 + min(nelx, nely) / 8.0)
        return np.asarray(w @ (w @ raw))
    raise InvalidArgumentError(f"unknown initial design kind {kind!r}")


def rescale_to_volume(base: np.ndarray, target_vf: float, tol: float = 1e-7) -> np.ndarray:
    """Shift-and-clamp ``base`` so the mean density hits ``target_vf``."""
    lo, hi = -1.0, 1.0
    out = np.clip(base, 0.0, 1.0)
    if abs(out.mean() - target_vf) <= tol:
        return out
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        out = np.clip(base + mid, 0.0, 1.0)
        m = out.mean()
        if abs(m - target_vf) <= tol:
            return out
        if m < target_vf:
            lo = mid
        else:
            hi = mid
    raise InvalidArgumentError("volume rescaling did not converge")


def optimize(problem: ProblemSpec, target_vf: float, cfg: OptimizerConfig,
             init: DensityField | None = None) -> DesignResult:
    """Minimize compliance at a fixed volume fraction from a given start.

    Deterministic: identical inputs give bit-identical density fields. The
    result carries the compliance at the optimization penalization and the
    penalization-1 re-evaluation of the same final field.
    """
    if not 0 < target_vf <= 1:
        raise InvalidArgumentError("target_vf must lie in (0, 1]")
    grid = problem.grid
    if init is None:
        init = initial_design("uniform", target_vf, grid)
    if init.values.size != grid.nel:
        raise InvalidArgumentError("initial design does not match grid")

    kern = kernel_for(problem)
    f = problem.load_vector()
    rmin = cfg.resolve_rmin(grid)
    w = filter_build(grid, rmin)
    w_t = w.T.tocsr()
    col_mean = np.asarray(w.sum(axis=0)).ravel() / grid.nel
    dv = np.full(grid.nel, 1.0 / grid.nel)
    dv_t = np.asarray(w_t @ dv) if cfg.filter_kind == "density" else dv

    x = init.values.copy()
    x_phys = np.asarray(w @ x) if cfg.filter_kind == "density" else x.copy()

    iterations = 0
    converged = False
    violations = 0
    c_prev = None
    u = None
    for it in range(1, cfg.max_iters + 1):
        iterations = it
        emod = simp_modulus(x_phys, cfg.penal, cfg.e_min)
        try:
            u = kern.solve(emod, f, method=cfg.solve_method, x0=u)
        except SolverError as exc:
            raise SolverError(f"optimize failed at iteration {it}: {exc}",
                              iterations=it, residual=exc.residual) from exc
        ce = kern.element_energies(u)
        c = float(emod @ ce)
        if c_prev is not None and c > c_prev * (1.0 + 1e-9):
            violations += 1
        c_prev = c

        dc = -cfg.penal * (1.0 - cfg.e_min) * x_phys ** (cfg.penal - 1.0) * ce
        if cfg.filter_kind == "sensitivity":
            dc_f = np.asarray(w @ (x * dc)) / np.maximum(1e-3, x)
        else:
            dc_f = np.asarray(w_t @ dc)

        x_new = _oc_update(x, dc_f, dv_t, target_vf, cfg,
                           col_mean if cfg.filter_kind == "density" else None)
        change = float(np.max(np.abs(x_new - x)))
        x = x_new
        x_phys = np.asarray(w @ x) if cfg.filter_kind == "density" else x.copy()
        if change < cfg.change_tol:
            converged = True
            break

    x_phys = np.clip(x_phys, 0.0, 1.0)
    achieved = float(x_phys.mean())
    if abs(achieved - target_vf) > 5e-5:
        # zero-sensitivity regions (dying disconnected islands) can leave
        # the last OC step short of the volume target: the move limit caps
        # how much the live elements can absorb in one update. Project the
        # design back onto the constraint.
        x = _project_volume(x, target_vf,
                            col_mean if cfg.filter_kind == "density" else None)
        x_phys = np.asarray(w @ x) if cfg.filter_kind == "density" else x.copy()
        x_phys = np.clip(x_phys, 0.0, 1.0)
        achieved = float(x_phys.mean())
    if abs(achieved - target_vf) > 1e-4:
        raise SolverError(
            f"volume constraint missed: got {achieved:.6f}, want {target_vf:.6f}")

    emod = simp_modulus(x_phys, cfg.penal, cfg.e_min)
    u = kern.solve(emod, f, method=cfg.solve_method, x0=u)
    compliance_p = float(f @ u)
    densities = DensityField(x_phys)
    compliance_p1 = evaluate_p1(problem, densities, cfg)
    return DesignResult(densities, compliance_p, compliance_p1, achieved,
                        iterations, converged, violations)


def _oc_update(x, dc, dv, target_vf, cfg, col_mean):
    """Optimality-criteria step; bisects the volume multiplier on [1e-9, 1e9].

    ``col_mean`` (density filter only) lets the bisection evaluate the mean
    of the filtered field as a dot product instead of a filter apply.
    """
    ratio = np.maximum(0.0, -dc / dv)
    move = cfg.move_limit
    lower = np.maximum(0.0, x - move)
    upper = np.minimum(1.0, x + move)

    def step(lm):
        x_new = np.clip(x * (ratio / lm) ** cfg.eta, lower, upper)
        mean = float(col_mean @ x_new) if col_mean is not None else float(x_new.mean())
        return x_new, mean

    l1, l2 = 1e-9, 1e9
    # badly scaled sensitivities (disconnected starts) can push the root
    # outside the standard bracket; extend only when provably needed
    for _ in range(40):
        if step(l2)[1] <= target_vf:
            break
        l1, l2 = l2, l2 * 100.0
    for _ in range(40):
        if step(l1)[1] >= target_vf:
            break
        l1, l2 = l1 / 100.0, l1

    x_new = x
    for _ in range(200):
        lmid = 0.5 * (l1 + l2)
        x_new, mean = step(lmid)
        if abs(mean - target_vf) <= 1e-6:
            break
        if mean > target_vf:
            l1 = lmid
        else:
            l2 = lmid
        if (l2 - l1) / (l1 + l2) < 1e-14:
            break
    return x_new


def _project_volume(x, target_vf, weights, tol=1e-7):
    """Shift-and-clamp the design so its (weighted) mean hits the target."""
    def mean_at(c):
        v = np.clip(x + c, 0.0, 1.0)
        return (float(weights @ v) if weights is not None
                else float(v.mean())), v

    lo, hi = -1.0, 1.0
    out = x
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        m, out = mean_at(mid)
        if abs(m - target_vf) <= tol:
            return out
        if m < target_vf:
            lo = mid
        else:
            hi = mid
    return out


def evaluate_p1(problem: ProblemSpec, densities: DensityField,
                cfg: OptimizerConfig | None = None) -> float:
    """Compliance of a field with linear (penalization 1) moduli."""
    cfg = cfg or OptimizerConfig()
    kern = kernel_for(problem)
    f = problem.load_vector()
    emod = simp_modulus(densities.values, 1.0, cfg.e_min)
    u = kern.solve(emod, f, method=cfg.solve_method)
    return float(f @ u)
