"""Plane-stress FEM core on a regular grid of bilinear quadrilaterals.

Conventions (fixed, used everywhere):

* Nodes live on an ``(nelx+1) x (nely+1)`` lattice. Column ``ix`` runs left
  to right, row ``iy`` runs top to bottom. Node id = ``ix*(nely+1) + iy``
  (column-major). Node ``n`` owns DOFs ``2n`` (x) and ``2n+1`` (y).
* Elements are unit squares. Element id = ``ex*nely + ey`` (column-major).
  The local corner order is bottom-left, bottom-right, top-right, top-left,
  which is counterclockwise in a y-up frame.
* The model is dimensionless: unit Young's modulus, unit thickness, unit
  element size. Plane-stress stiffness of a point-loaded model is invariant
  under in-plane scaling, so compliances depend only on the grid aspect
  ratio and the load/support layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import InvalidArgumentError, SolverError

DENSE_DOF_LIMIT = 2000
PCG_TOL = 1e-8
E_MIN_DEFAULT = 1e-9


@dataclass(frozen=True)
class Grid:
    """Regular rectangular design grid."""

    nelx: int
    nely: int

    def __post_init__(self):
        if self.nelx < 1 or self.nely < 1:
            raise InvalidArgumentError("grid needs nelx >= 1 and nely >= 1")

    @property
    def nel(self) -> int:
        return self.nelx * self.nely

    @property
    def nnodes(self) -> int:
        return (self.nelx + 1) * (self.nely + 1)

    @property
    def ndof(self) -> int:
        return 2 * self.nnodes

    def node_id(self, ix: int, iy: int) -> int:
        if not (0 <= ix <= self.nelx and 0 <= iy <= self.nely):
            raise InvalidArgumentError(f"node ({ix},{iy}) outside grid")
        return ix * (self.nely + 1) + iy

    def node_coords(self, node: int) -> tuple[int, int]:
        return divmod(node, self.nely + 1)

    def element_id(self, ex: int, ey: int) -> int:
        if not (0 <= ex < self.nelx and 0 <= ey < self.nely):
            raise InvalidArgumentError(f"element ({ex},{ey}) outside grid")
        return ex * self.nely + ey

    def element_coords(self, el: int) -> tuple[int, int]:
        return divmod(el, self.nely)

    def element_dofs(self, el: int) -> np.ndarray:
        """Eight global DOF indices of one element, local corner order."""
        ex, ey = self.element_coords(el)
        n_bl = ex * (self.nely + 1) + ey + 1
        n_br = (ex + 1) * (self.nely + 1) + ey + 1
        n_tr = n_br - 1
        n_tl = n_bl - 1
        out = np.empty(8, dtype=np.int64)
        for k, n in enumerate((n_bl, n_br, n_tr, n_tl)):
            out[2 * k] = 2 * n
            out[2 * k + 1] = 2 * n + 1
        return out


@dataclass(frozen=True)
class ProblemSpec:
    """A discretized design domain with loads, supports and physical size.

    ``length``/``height``/``thickness`` describe the physical part the
    modeled domain stands for; they do not enter the dimensionless FEM.
    ``symmetry_factor`` is the volume multiplier mapping the modeled domain
    to the physical part (2 for a half-symmetric model).
    """

    grid: Grid
    loads: tuple[tuple[int, float], ...]
    fixed_dofs: frozenset[int]
    name: str = "problem"
    length: float = 1.0
    height: float = 1.0
    thickness: float = 1.0
    symmetry_factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "loads", tuple((int(d), float(m)) for d, m in self.loads))
        object.__setattr__(self, "fixed_dofs", frozenset(int(d) for d in self.fixed_dofs))
        if not self.loads:
            raise InvalidArgumentError("loads must be nonempty")
        ndof = self.grid.ndof
        for dof, _ in self.loads:
            if not 0 <= dof < ndof:
                raise InvalidArgumentError(f"load DOF {dof} out of range (ndof={ndof})")
        for dof in self.fixed_dofs:
            if not 0 <= dof < ndof:
                raise InvalidArgumentError(f"fixed DOF {dof} out of range (ndof={ndof})")
        if self.symmetry_factor <= 0:
            raise InvalidArgumentError("symmetry_factor must be positive")
        for nm, v in (("length", self.length), ("height", self.height), ("thickness", self.thickness)):
            if v <= 0:
                raise InvalidArgumentError(f"{nm} must be positive")

    def load_vector(self) -> np.ndarray:
        f = np.zeros(self.grid.ndof)
        for dof, mag in self.loads:
            f[dof] += mag
        return f

    def with_unit_load(self) -> "ProblemSpec":
        """Same problem with the load pattern rescaled to unit 2-norm."""
        norm = float(np.linalg.norm(self.load_vector()))
        if norm == 0:
            raise InvalidArgumentError("load vector has zero norm")
        if norm == 1.0:
            return self
        loads = tuple((d, m / norm) for d, m in self.loads)
        return ProblemSpec(self.grid, loads, self.fixed_dofs, self.name,
                           self.length, self.height, self.thickness, self.symmetry_factor)

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "nelx": self.grid.nelx,
            "nely": self.grid.nely,
            "loads": [[d, m] for d, m in self.loads],
            "fixed_dofs": sorted(self.fixed_dofs),
            "L": self.length,
            "h": self.height,
            "t": self.thickness,
            "symmetry_factor": self.symmetry_factor,
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ProblemSpec":
        doc = json.loads(text)
        return ProblemSpec(
            grid=Grid(int(doc["nelx"]), int(doc["nely"])),
            loads=tuple((int(d), float(m)) for d, m in doc["loads"]),
            fixed_dofs=frozenset(int(d) for d in doc["fixed_dofs"]),
            name=str(doc.get("name", "problem")),
            length=float(doc.get("L", 1.0)),
            height=float(doc.get("h", 1.0)),
            thickness=float(doc.get("t", 1.0)),
            symmetry_factor=float(doc.get("symmetry_factor", 1.0)),
        )


@dataclass(frozen=True)
class DensityField:
    """Per-element densities in [0,1], column-major element order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if v.ndim != 1:
            raise InvalidArgumentError("density values must be a flat array")
        if v.size == 0 or np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
            raise InvalidArgumentError("densities must lie in [0,1]")
        v = np.clip(v, 0.0, 1.0)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def volume_fraction(self) -> float:
        return float(self.values.mean())

    def as_grid(self, grid: Grid) -> np.ndarray:
        """Row-major (nely, nelx) image of the field."""
        if self.values.size != grid.nel:
            raise InvalidArgumentError("field size does not match grid")
        return self.values.reshape(grid.nelx, grid.nely).T


def element_stiffness(nu: float) -> np.ndarray:
    """8x8 stiffness of a unit bilinear square, unit modulus and thickness.

    Closed-form integration of the plane-stress bilinear quad; local corner
    order matches :meth:`Grid.element_dofs`.
    """
    if not -1.0 < nu < 0.5:
        raise InvalidArgumentError(f"Poisson ratio {nu} outside (-1, 0.5)")
    a11 = np.array([[12, 3, -6, -3], [3, 12, 3, 0], [-6, 3, 12, -3], [-3, 0, -3, 12]], dtype=float)
    a12 = np.array([[-6, -3, 0, 3], [-3, -6, -3, -6], [0, -3, -6, 3], [3, -6, 3, -6]], dtype=float)
    b11 = np.array([[-4, 3, -2, 9], [3, -4, -9, 4], [-2, -9, -4, -3], [9, 4, -3, -4]], dtype=float)
    b12 = np.array([[2, -3, 4, -9], [-3, 2, 9, -2], [4, 9, 2, 3], [-9, -2, 3, 2]], dtype=float)
    ka = np.block([[a11, a12], [a12.T, a11]])
    kb = np.block([[b11, b12], [b12.T, b11]])
    return (ka + nu * kb) / (24.0 * (1.0 - nu * nu))


def simp_modulus(values: np.ndarray, penal: float, e_min: float = E_MIN_DEFAULT) -> np.ndarray:
    """Per-element modulus ``e_min + rho^p * (1 - e_min)`` (modified SIMP)."""
    if penal < 1:
        raise InvalidArgumentError("penal must be >= 1")
    if not 0 < e_min < 1:
        raise InvalidArgumentError("e_min must lie in (0, 1)")
    return e_min + np.asarray(values, dtype=float) ** penal * (1.0 - e_min)


class GridKernel:
    """Precomputed index machinery for one (grid, fixed_dofs, nu) triple.

    Carries the element DOF table, scatter indices for sparse and banded
    assembly, and the constrained load/free masks. All solver paths share it.
    """

    def __init__(self, grid: Grid, fixed_dofs: frozenset[int], nu: float = 0.3):
        self.grid = grid
        self.nu = nu
        self.ke = element_stiffness(nu)
        ndof = grid.ndof
        self.ndof = ndof

        edof = np.empty((grid.nel, 8), dtype=np.int64)
        for el in range(grid.nel):
            edof[el] = grid.element_dofs(el)
        self.edof = edof

        self.fixed = np.zeros(ndof, dtype=bool)
        self.fixed[list(fixed_dofs)] = True
        self.free = ~self.fixed
        self.n_fixed = int(self.fixed.sum())

        # scatter indices for COO assembly
        self.i_idx = np.repeat(edof, 8, axis=1).ravel()
        self.j_idx = np.tile(edof, (1, 8)).ravel()

        # banded (lower) assembly of the constrained system: drop entries in
        # fixed rows/cols, keep i >= j, add unit diagonal at fixed DOFs
        self.bandwidth = int(np.max(edof.max(axis=1) - edof.min(axis=1)))
        keep = (self.i_idx >= self.j_idx) & ~self.fixed[self.i_idx] & ~self.fixed[self.j_idx]
        self._band_keep = keep.reshape(grid.nel, 64)
        self._band_pos = ((self.i_idx - self.j_idx) * ndof + self.j_idx)[keep]
        self._band_shape = (self.bandwidth + 1, ndof)
        self._ke_flat = self.ke.ravel()

    def assemble_banded(self, emod: np.ndarray) -> np.ndarray:
        """Constrained stiffness in scipy lower-banded storage."""
        vals = (emod[:, None] * self._ke_flat[None, :])[self._band_keep]
        ab = np.bincount(self._band_pos, weights=vals,
                         minlength=self._band_shape[0] * self._band_shape[1])
        ab = ab.reshape(self._band_shape)
        ab[0, self.fixed] = 1.0
        return ab

    def assemble_csr(self, emod: np.ndarray) -> scipy.sparse.csr_matrix:
        """Unconstrained global stiffness as CSR."""
        data = (emod[:, None] * self._ke_flat[None, :]).ravel()
        k = scipy.sparse.coo_matrix((data, (self.i_idx, self.j_idx)),
                                    shape=(self.ndof, self.ndof))
        return k.tocsr()

    def apply_constrained(self, emod: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Matrix-free product of the constrained stiffness with ``u``."""
        uc = np.where(self.fixed, 0.0, u)
        q = (uc[self.edof] @ self.ke) * emod[:, None]
        out = np.bincount(self.edof.ravel(), weights=q.ravel(), minlength=self.ndof)
        out[self.fixed] = u[self.fixed]
        return out

    def element_energies(self, u: np.ndarray) -> np.ndarray:
        """Per-element ``u_e^T KE u_e`` at unit modulus.

        Clamped at zero: the form is positive semi-definite, but float
        cancellation at extreme displacement scales (disconnected regions)
        can leave noise of either sign.
        """
        ue = u[self.edof]
        return np.maximum(np.einsum("ij,jk,ik->i", ue, self.ke, ue), 0.0)

    def constrained_rhs(self, f: np.ndarray) -> np.ndarray:
        out = f.copy()
        out[self.fixed] = 0.0
        return out

    def factorize(self, emod: np.ndarray, method: str):
        """Cholesky-factor the constrained stiffness; returns a solve closure."""
        if method == "banded":
            ab = self.assemble_banded(emod)
            try:
                cb = scipy.linalg.cholesky_banded(ab, lower=True, check_finite=False)
            except scipy.linalg.LinAlgError as exc:
                raise SolverError(f"banded Cholesky failed: {exc}") from exc
            return lambda rhs: scipy.linalg.cho_solve_banded((cb, True), rhs,
                                                             check_finite=False)
        if method == "dense":
            data = (emod[:, None] * self._ke_flat[None, :]).ravel()
            kd = scipy.sparse.coo_matrix((data, (self.i_idx, self.j_idx)),
                                         shape=(self.ndof, self.ndof)).toarray()
            kd[self.fixed, :] = 0.0
            kd[:, self.fixed] = 0.0
            kd[self.fixed, self.fixed] = 1.0
            try:
                fac = scipy.linalg.cho_factor(kd, lower=True, check_finite=False)
            except scipy.linalg.LinAlgError as exc:
                raise SolverError(f"dense Cholesky failed: {exc}") from exc
            return lambda rhs: scipy.linalg.cho_solve(fac, rhs, check_finite=False)
        raise InvalidArgumentError(f"unknown solve method {method!r}")

    def solve(self, emod: np.ndarray, f: np.ndarray, method: str = "auto",
              x0: np.ndarray | None = None) -> np.ndarray:
        """Solve the constrained system for one modulus field.

        ``auto`` uses a dense direct solve below ``DENSE_DOF_LIMIT`` DOFs and
        banded Cholesky above it; ``pcg`` runs matrix-free Jacobi-PCG with a
        ``10 * ndof`` iteration cap. Direct paths apply iterative refinement
        so the residual contract holds even at extreme stiffness contrast.
        """
        fc = self.constrained_rhs(f)
        fnorm = float(np.linalg.norm(fc))
        if fnorm == 0.0:
            return np.zeros(self.ndof)
        if method == "auto":
            method = "dense" if self.ndof < DENSE_DOF_LIMIT else "banded"

        if method == "pcg":
            u = self._solve_pcg(emod, fc, fnorm, x0)
        else:
            solve_rhs = self.factorize(emod, method)
            u = solve_rhs(fc)
            for _ in range(4):
                r = fc - self.apply_constrained(emod, u)
                r[self.fixed] = 0.0
                if float(np.linalg.norm(r)) <= PCG_TOL * fnorm:
                    break
                u = u + solve_rhs(r)

        resid = float(np.linalg.norm((fc - self.apply_constrained(emod, u))[self.free]))
        if not np.isfinite(resid) or resid > self._resid_limit(emod, u, fnorm):
            raise SolverError("linear solve residual too large",
                              iterations=None, residual=resid)
        u[self.fixed] = 0.0
        return u

    def _resid_limit(self, emod, u, fnorm):
        """Acceptance threshold: 1e-8 relative to F, widened to the normwise
        backward-error scale when the solution dwarfs the load (extreme
        stiffness contrast), where a smaller residual is not representable."""
        dmax = float(np.max(self.stiffness_diagonal(emod)))
        return 10 * PCG_TOL * max(fnorm, 1e-7 * dmax * float(np.linalg.norm(u)))

    def stiffness_diagonal(self, emod: np.ndarray) -> np.ndarray:
        diag = np.bincount(self.edof.ravel(),
                           weights=(emod[:, None] * np.diag(self.ke)[None, :]).ravel(),
                           minlength=self.ndof)
        diag[self.fixed] = 1.0
        return diag

    def _solve_pcg(self, emod, fc, fnorm, x0):
        ndof = self.ndof
        diag = self.stiffness_diagonal(emod)
        dmax = float(diag.max())
        inv_diag = 1.0 / diag
        x = np.zeros(ndof) if x0 is None else np.where(self.fixed, 0.0, x0)
        r = fc - self.apply_constrained(emod, x)
        z = inv_diag * r
        p = z.copy()
        rz = float(r @ z)
        maxiter = 10 * ndof
        for it in range(1, maxiter + 1):
            ap = self.apply_constrained(emod, p)
            alpha = rz / float(p @ ap)
            x += alpha * p
            r -= alpha * ap
            rnorm = float(np.linalg.norm(r))
            if rnorm <= PCG_TOL * max(fnorm, 1e-7 * dmax * float(np.linalg.norm(x))):
                return x
            z = inv_diag * r
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise SolverError("PCG did not converge", iterations=maxiter,
                          residual=float(np.linalg.norm(r)))


@lru_cache(maxsize=32)
def _kernel_cached(grid: Grid, fixed_dofs: frozenset, nu: float) -> GridKernel:
    return GridKernel(grid, fixed_dofs, nu)


def kernel_for(problem: ProblemSpec, nu: float = 0.3) -> GridKernel:
    return _kernel_cached(problem.grid, problem.fixed_dofs, nu)


def assemble(problem: ProblemSpec, densities: DensityField, penal: float,
             e_min: float = E_MIN_DEFAULT, nu: float = 0.3) -> scipy.sparse.csr_matrix:
    """Global stiffness for a density field under penalized moduli."""
    if densities.values.size != problem.grid.nel:
        raise InvalidArgumentError("density field does not match problem grid")
    kern = kernel_for(problem, nu)
    return kern.assemble_csr(simp_modulus(densities.values, penal, e_min))


def solve(problem: ProblemSpec, k: scipy.sparse.csr_matrix, method: str = "auto",
          x0: np.ndarray | None = None) -> np.ndarray:
    """Displacements under the problem loads for an assembled stiffness.

    Fixed DOFs are constrained by zeroing their rows/columns and placing a
    unit diagonal; the returned vector is exactly zero there. The residual
    on free DOFs is verified against ``1e-8 * ||F||``.
    """
    ndof = problem.grid.ndof
    if k.shape != (ndof, ndof):
        raise InvalidArgumentError("stiffness matrix does not match problem")
    kern = kernel_for(problem)
    f = problem.load_vector()
    fc = kern.constrained_rhs(f)
    fnorm = float(np.linalg.norm(fc))
    if fnorm == 0.0:
        return np.zeros(ndof)
    if method == "auto":
        method = "dense" if ndof < DENSE_DOF_LIMIT else "banded"

    free = kern.free
    mask = scipy.sparse.diags(free.astype(float))
    kc = (mask @ k @ mask).tocsr()
    kc = kc + scipy.sparse.diags(kern.fixed.astype(float))

    if method in ("dense", "banded"):
        if method == "dense":
            try:
                fac = scipy.linalg.cho_factor(kc.toarray(), lower=True,
                                              check_finite=False)
            except scipy.linalg.LinAlgError as exc:
                raise SolverError(f"dense Cholesky failed: {exc}") from exc
            solve_rhs = lambda rhs: scipy.linalg.cho_solve(fac, rhs,
                                                           check_finite=False)
        else:
            coo = kc.tocoo()
            sel = coo.row >= coo.col
            bw = int((coo.row[sel] - coo.col[sel]).max()) if sel.any() else 0
            pos = (coo.row[sel] - coo.col[sel]) * ndof + coo.col[sel]
            ab = np.bincount(pos, weights=coo.data[sel], minlength=(bw + 1) * ndof)
            try:
                cb = scipy.linalg.cholesky_banded(ab.reshape(bw + 1, ndof),
                                                  lower=True, check_finite=False)
            except scipy.linalg.LinAlgError as exc:
                raise SolverError(f"banded Cholesky failed: {exc}") from exc
            solve_rhs = lambda rhs: scipy.linalg.cho_solve_banded(
                (cb, True), rhs, check_finite=False)
        u = solve_rhs(fc)
        for _ in range(4):
            r = fc - kc @ u
            r[kern.fixed] = 0.0
            if float(np.linalg.norm(r)) <= PCG_TOL * fnorm:
                break
            u = u + solve_rhs(r)
    elif method == "pcg":
        diag = kc.diagonal()
        if np.any(diag <= 0):
            raise SolverError("non-positive diagonal in constrained stiffness")
        dmax = float(diag.max())
        inv_diag = 1.0 / diag
        x = np.zeros(ndof) if x0 is None else np.where(kern.fixed, 0.0, x0)
        r = fc - kc @ x
        z = inv_diag * r
        p = z.copy()
        rz = float(r @ z)
        maxiter = 10 * ndof
        u = None
        for it in range(1, maxiter + 1):
            ap = kc @ p
            alpha = rz / float(p @ ap)
            x += alpha * p
            r -= alpha * ap
            if float(np.linalg.norm(r)) <= \
                    PCG_TOL * max(fnorm, 1e-7 * dmax * float(np.linalg.norm(x))):
                u = x
                break
            z = inv_diag * r
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        if u is None:
            raise SolverError("PCG did not converge", iterations=maxiter,
                              residual=float(np.linalg.norm(r)))
    else:
        raise InvalidArgumentError(f"unknown solve method {method!r}")

    resid = float(np.linalg.norm((fc - kc @ u)[free]))
    dmax = float(kc.diagonal().max())
    limit = 10 * PCG_TOL * max(fnorm, 1e-7 * dmax * float(np.linalg.norm(u)))
    if not np.isfinite(resid) or resid > limit:
        raise SolverError("linear solve residual too large", residual=resid)
    u[kern.fixed] = 0.0
    return u


def compliance(u: np.ndarray, f: np.ndarray) -> float:
    """External work ``sum F_i U_i`` (equals U^T K U at the solution)."""
    return float(np.dot(f, u))


# ---------------------------------------------------------------------------
# presets

def preset(name: str, nelx: int | None = None, nely: int | None = None) -> ProblemSpec:
    """Built-in benchmark problems on desk-scale grids.

    ``mbb``      half MBB beam (60x20): symmetry plane on the left edge
                 (x fixed), roller under the bottom-right corner, unit
                 downward load at the top-left corner; symmetry_factor 2.
    ``bridge``   deck bridge (60x20): pin at bottom-left, roller at
                 bottom-right, unit total load spread over the bottom edge.
    ``complex``  cantilever with two offset loads (60x30): left edge fully
                 clamped, loads at the bottom-right corner and mid-top.

    The layouts are this package's own; they are documented here rather
    than copied from any external mesh.
    """
    key = name.lower()
    if key == "mbb":
        nx, ny = nelx or 60, nely or 20
        g = Grid(nx, ny)
        fixed = {2 * g.node_id(0, iy) for iy in range(ny + 1)}
        fixed.add(2 * g.node_id(nx, ny) + 1)
        loads = ((2 * g.node_id(0, 0) + 1, -1.0),)
        return ProblemSpec(g, loads, frozenset(fixed), name="mbb",
                           length=nx / ny, height=1.0, thickness=1.0,
                           symmetry_factor=2.0)
    if key == "bridge":
        nx, ny = nelx or 60, nely or 20
        g = Grid(nx, ny)
        fixed = {2 * g.node_id(0, ny), 2 * g.node_id(0, ny) + 1,
                 2 * g.node_id(nx, ny) + 1}
        mag = -1.0 / np.sqrt(nx + 1.0)
        loads = tuple((2 * g.node_id(ix, ny) + 1, mag) for ix in range(nx + 1))
        return ProblemSpec(g, loads, frozenset(fixed), name="bridge",
                           length=nx / ny, height=1.0, thickness=1.0,
                           symmetry_factor=1.0)
    if key == "complex":
        nx, ny = nelx or 60, nely or 30
        g = Grid(nx, ny)
        fixed = set()
        for iy in range(ny + 1):
            fixed.add(2 * g.node_id(0, iy))
            fixed.add(2 * g.node_id(0, iy) + 1)
        loads = ((2 * g.node_id(nx, ny) + 1, -0.8),
                 (2 * g.node_id(nx // 2, 0) + 1, -0.6))
        return ProblemSpec(g, loads, frozenset(fixed), name="complex",
                           length=nx / ny, height=1.0, thickness=1.0,
                           symmetry_factor=1.0)
    raise InvalidArgumentError(f"unknown preset {name!r}")
