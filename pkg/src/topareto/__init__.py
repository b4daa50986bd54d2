"""Compliance-volume Pareto fronts, efficiency-ratio analysis and
stiffness-driven material selection for 2D topology optimization."""

from .cache import RunCache
from .er import (AnalyticComponent, ErSeries, analytic_er, analytic_front,
                 analytic_stiffness, compute_er, filter_er)
from .fem2d import (DensityField, Grid, ProblemSpec, assemble, compliance,
                    element_stiffness, preset, solve)
from .materials import (LoadCase, Material, SelectionReport, ashby_index,
                        load_materials, refine_vf, screen_density,
                        screen_pareto, select)
from .metamodel import (MetaModel, eval_er, eval_front, fit, fit_problem,
                        full_density_compliance, inverse)
from .pareto import (FrontPoint, ParetoFront, SignificantPoints,
                     baseline_sweep, default_vf_grid, detect_significant,
                     envelope, multistart_sweep, refine, smooth)
from .simp import (INITIAL_DESIGN_KINDS, DesignResult, OptimizerConfig,
                   evaluate_p1, filter_build, initial_design, optimize)

__version__ = "0.1.0"

__all__ = [
    "AnalyticComponent", "DensityField", "DesignResult", "ErSeries",
    "FrontPoint", "Grid", "INITIAL_DESIGN_KINDS", "LoadCase", "Material",
    "MetaModel", "OptimizerConfig", "ParetoFront", "ProblemSpec", "RunCache",
    "SelectionReport", "SignificantPoints", "analytic_er", "analytic_front",
    "analytic_stiffness", "ashby_index", "assemble", "baseline_sweep",
    "compliance", "compute_er", "default_vf_grid", "detect_significant",
    "element_stiffness", "envelope", "eval_er", "eval_front", "evaluate_p1",
    "filter_build", "filter_er", "fit", "fit_problem",
    "full_density_compliance", "initial_design", "inverse", "load_materials",
    "multistart_sweep", "optimize", "preset", "refine", "refine_vf",
    "screen_density", "screen_pareto", "select", "smooth", "solve",
]
