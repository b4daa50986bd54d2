"""Efficiency ratio of a compliance-volume front.

The efficiency ratio of a front C(v) is ``-v * C'(v) / C(v)``: the marginal
stiffening efficiency of added material relative to the mean efficiency of
the material already placed. It equals the negated log-log slope of the
front, so it is computed here with central differences in log-log space,
where power-law fronts ``C = A v^-n`` are differentiated exactly.

Closed-form constant-ratio components (tension rod, square-section
cantilever beam, bending plate) are provided for validation: their fronts
are exact power laws with exponents 1, 2 and 3.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, ParseError
from .pareto import DEFAULT_SIGMA, FrontPoint, ParetoFront, envelope, smooth

ER_LOWER_BOUND = -0.02
ER_UPPER_BOUND = 1.02


@dataclass(frozen=True)
class ErSeries:
    """Sampled efficiency ratio; ``source`` is ``raw`` or ``filtered``."""

    points: tuple[tuple[float, float], ...]
    source: str = "raw"

    def __post_init__(self):
        pts = tuple((float(v), float(n)) for v, n in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise InvalidArgumentError("series must be nonempty")
        vfs = [v for v, _ in pts]
        if any(b <= a for a, b in zip(vfs, vfs[1:])):
            raise InvalidArgumentError("vf must be strictly increasing")
        if self.source not in ("raw", "filtered"):
            raise InvalidArgumentError(f"unknown source {self.source!r}")

    def vfs(self) -> np.ndarray:
        return np.array([v for v, _ in self.points])

    def values(self) -> np.ndarray:
        return np.array([n for _, n in self.points])

    def bounds_violations(self, lo: float = ER_LOWER_BOUND,
                          hi: float = ER_UPPER_BOUND) -> list[int]:
        """Indices where the ratio leaves the theoretical band (with slack)."""
        return [i for i, (_, n) in enumerate(self.points) if n < lo or n > hi]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["vf", "n"])
        for v, n in self.points:
            w.writerow([repr(v), repr(n)])
        return out.getvalue()

    @staticmethod
    def from_csv(text: str, source: str = "raw") -> "ErSeries":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["vf", "n"]:
            raise ParseError("expected header vf,n", line=1)
        pts = []
        for ln, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                pts.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError) as exc:
                raise ParseError(f"bad row: {exc}", line=ln) from exc
        return ErSeries(tuple(pts), source)


def _loglog_slope(v: np.ndarray, c: np.ndarray) -> np.ndarray:
    """d(ln c)/d(ln v) with 3-point nonuniform central differences.

    One-sided two-point differences at the ends. Exact for power laws on
    any grid since ln c is then linear in ln v.
    """
    t = np.log(v)
    z = np.log(c)
    n = len(t)
    out = np.empty(n)
    out[0] = (z[1] - z[0]) / (t[1] - t[0])
    out[-1] = (z[-1] - z[-2]) / (t[-1] - t[-2])
    if n > 2:
        h1 = t[1:-1] - t[:-2]
        h2 = t[2:] - t[1:-1]
        out[1:-1] = (-h2 / (h1 * (h1 + h2)) * z[:-2]
                     + (h2 - h1) / (h1 * h2) * z[1:-1]
                     + h1 / (h2 * (h1 + h2)) * z[2:])
    return out


def compute_er(front: ParetoFront) -> ErSeries:
    """Raw efficiency ratio ``-v C'/C`` of a front."""
    if len(front) < 3:
        raise InvalidArgumentError("need at least 3 front points")
    v = front.vfs()
    if np.any(np.diff(v) <= 0):
        raise InvalidArgumentError("front has duplicate volume fractions")
    n = -_loglog_slope(v, front.cs())
    return ErSeries(tuple(zip(v, n)), source="raw")


def filter_er(front: ParetoFront, sigma: float = DEFAULT_SIGMA) -> ErSeries:
    """Two-step filtered efficiency ratio.

    Step one forces the front monotone with the running-minimum envelope;
    step two Gaussian-averages the resulting ratio series (the derivative
    of a raw front is far too noisy to use directly).
    """
    raw = compute_er(envelope(front))
    ns = smooth(raw.vfs(), raw.values(), sigma)
    return ErSeries(tuple(zip(raw.vfs(), ns)), source="filtered")


# ---------------------------------------------------------------------------
# constant-ratio analytic components

VALID_KINDS = ("rod", "beam", "plate")


@dataclass(frozen=True)
class AnalyticComponent:
    """Tension rod, square-section cantilever beam, or bending plate.

    ``section`` is the design-space cross-section area (rod/beam),
    ``h_ds`` the design-space plate thickness, ``width`` the plate width.
    """

    kind: str
    e: float = 1.0
    length: float = 1.0
    section: float = 1.0
    h_ds: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise InvalidArgumentError(f"unknown component kind {self.kind!r}")
        for nm in ("e", "length", "section", "h_ds", "width"):
            if getattr(self, nm) <= 0:
                raise InvalidArgumentError(f"{nm} must be positive")


def analytic_stiffness(comp: AnalyticComponent, vf: float) -> float:
    """Apparent tip stiffness of the component at a volume fraction."""
    if not 0 < vf <= 1:
        raise InvalidArgumentError("vf must lie in (0, 1]")
    if comp.kind == "rod":
        return comp.e * vf * comp.section / comp.length
    if comp.kind == "beam":
        return comp.e * vf**2 * comp.section**2 / (4 * comp.length**3)
    return comp.e * comp.width * vf**3 * comp.h_ds**3 / (4 * comp.length**3)


def analytic_er(comp: AnalyticComponent) -> float:
    """Constant efficiency ratio of the component (1, 2 or 3)."""
    return {"rod": 1.0, "beam": 2.0, "plate": 3.0}[comp.kind]


def analytic_front(comp: AnalyticComponent, vf_grid) -> ParetoFront:
    """Compliance front (inverse stiffness) sampled on a vf grid."""
    pts = tuple(FrontPoint(float(v), 1.0 / analytic_stiffness(comp, float(v)),
                           f"analytic:{comp.kind}") for v in vf_grid)
    return ParetoFront(pts, f"analytic-{comp.kind}")
