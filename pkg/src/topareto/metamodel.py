"""Two-parameter closed-form model of a compliance-volume front.

The family ``f(x) = a * (1/x + b * x^(1/b))`` with ``a, b > 0`` is strictly
decreasing on (0, 1], its efficiency ratio runs from 1 at x -> 0+ to 0 at
x = 1, and it is pinned down by two front samples: the full-density
compliance (one plain FEM solve) and one optimized anchor, by default at a
volume fraction of 0.1. Inversion is by bisection; the model is monotone,
so brackets are guaranteed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cache import RunCache
from .errors import (FitFailureError, FitInfeasibleError,
                     InfeasibleStiffnessError, InvalidArgumentError)
from .fem2d import ProblemSpec, kernel_for, simp_modulus
from .pareto import multistart_states
from .simp import OptimizerConfig

DEFAULT_ANCHOR_VF = 0.1


@dataclass(frozen=True)
class MetaModel:
    """Fitted constants plus the two anchors that produced them."""

    a: float
    b: float
    fit_points: tuple[tuple[float, float], tuple[float, float]]
    problem_name: str = ""

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise InvalidArgumentError("model constants must be positive")
        fp = tuple((float(x), float(c)) for x, c in self.fit_points)
        object.__setattr__(self, "fit_points", fp)

    def to_json(self) -> str:
        return json.dumps({
            "a": self.a, "b": self.b,
            "fit_points": [list(p) for p in self.fit_points],
            "problem_name": self.problem_name,
        }, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "MetaModel":
        doc = json.loads(text)
        return MetaModel(float(doc["a"]), float(doc["b"]),
                         tuple(tuple(p) for p in doc["fit_points"]),
                         str(doc.get("problem_name", "")))


def eval_front(m: MetaModel, x: float) -> float:
    """Model compliance at a volume fraction."""
    if not 0 < x <= 1:
        raise InvalidArgumentError("x must lie in (0, 1]")
    return m.a * (1.0 / x + m.b * x ** (1.0 / m.b))


def eval_er(m: MetaModel, x: float) -> float:
    """Model efficiency ratio ``-x f'(x) / f(x)`` in closed form."""
    if not 0 < x <= 1:
        raise InvalidArgumentError("x must lie in (0, 1]")
    xp = x ** (1.0 / m.b + 1.0)
    return (1.0 - xp) / (1.0 + m.b * xp)


def _anchor_ratio(b: float, x1: float) -> float:
    return (1.0 / x1 + b * x1 ** (1.0 / b)) / (1.0 + b)


def fit(point_low: tuple[float, float], c_full: float,
        problem_name: str = "") -> MetaModel:
    """Fit the model through a low-vf anchor and the full-density compliance.

    The anchor ratio ``c1 / c_full`` must lie in (1, 1/x1): 1 is the flat
    limit (b -> inf) and 1/x1 the pure-1/x limit (b -> 0). The exponent is
    bisected on [1e-6, 1e4]; both anchors are then reproduced to 1e-9
    relative by construction.
    """
    x1, c1 = float(point_low[0]), float(point_low[1])
    if not 0 < x1 < 1:
        raise InvalidArgumentError("anchor volume fraction must lie in (0, 1)")
    if not c1 > c_full > 0:
        raise FitInfeasibleError(
            f"anchors must satisfy c1 > c_full > 0, got c1={c1}, c_full={c_full}")
    r = c1 / c_full
    if not 1.0 < r < 1.0 / x1:
        raise FitInfeasibleError(
            f"anchor ratio {r:.6g} outside (1, {1.0 / x1:.6g}); the model family "
            f"only spans fronts between flat and 1/x")
    lo, hi = 1e-6, 1e4
    flo = _anchor_ratio(lo, x1) - r
    fhi = _anchor_ratio(hi, x1) - r
    if flo < 0 or fhi > 0:
        raise FitFailureError(
            f"no sign change on the exponent bracket for ratio {r:.6g}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _anchor_ratio(mid, x1) > r:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    b = 0.5 * (lo + hi)
    a = c_full / (1.0 + b)
    m = MetaModel(a, b, ((x1, c1), (1.0, c_full)), problem_name)
    if abs(eval_front(m, 1.0) - c_full) > 1e-9 * c_full or \
            abs(eval_front(m, x1) - c1) > 1e-9 * c1:
        raise FitFailureError("anchor residuals exceed 1e-9 relative")
    return m


def inverse(m: MetaModel, c_req: float) -> float:
    """Volume fraction whose model compliance equals ``c_req``.

    Bisection on the strictly decreasing model to an absolute x-tolerance
    of 1e-10. Requirements stiffer than the full design are infeasible.
    """
    c_min = eval_front(m, 1.0)
    if c_req < c_min * (1.0 - 1e-12):
        raise InfeasibleStiffnessError(
            f"required compliance {c_req:.6g} below full-density value "
            f"{c_min:.6g}: even the full design is too compliant")
    if c_req <= c_min:
        return 1.0
    lo = 1.0
    for _ in range(4000):
        lo *= 0.5
        if eval_front(m, lo) >= c_req:
            break
    else:
        raise FitFailureError("could not bracket the inverse")
    hi = 1.0
    # absolute 1e-10 plus relative refinement so eval round-trips at tiny x
    while hi - lo > max(1e-15, min(1e-10, 1e-9 * lo)):
        mid = 0.5 * (lo + hi)
        if eval_front(m, mid) > c_req:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def full_density_compliance(problem: ProblemSpec,
                            cfg: OptimizerConfig | None = None) -> float:
    """Normalized compliance of the all-ones design (one plain solve)."""
    cfg = cfg or OptimizerConfig()
    norm = problem.with_unit_load()
    kern = kernel_for(norm)
    f = norm.load_vector()
    emod = simp_modulus(np.ones(norm.grid.nel), 1.0, cfg.e_min)
    u = kern.solve(emod, f, method=cfg.solve_method)
    return float(f @ u)


def fit_problem(problem: ProblemSpec, cfg: OptimizerConfig | None = None,
                anchor_vf: float = DEFAULT_ANCHOR_VF,
                cache: RunCache | None = None, workers: int = 1) -> MetaModel:
    """Fit the model for a problem from one multi-start anchor optimization.

    The anchor at ``anchor_vf`` controls the whole model, so all eleven
    initial designs are run there and the best penalization-1 compliance is
    kept; the second point is the direct full-density solve.
    """
    cfg = cfg or OptimizerConfig()
    c_full = full_density_compliance(problem, cfg)
    front, _ = multistart_states(problem, [anchor_vf], cfg, cache, workers)
    c1 = front.points[0].c
    return fit((anchor_vf, c1), c_full, problem.name)
