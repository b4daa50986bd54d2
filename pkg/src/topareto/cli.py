"""Command-line pipeline: optimize | pareto | er | fit | select.

Configuration comes from an optional JSON file plus flag overrides (flags
win). All artifacts are plain CSV/JSON/SVG written under the output
directory; sweep results are cached under the cache directory (or the
``TOPARETO_CACHE`` environment variable) so repeated runs are no-ops on
finished computations.

Exit codes: 0 ok, 2 invalid input, 3 infeasible problem, 4 solver or
internal failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import er as er_mod
from . import materials as mat_mod
from . import metamodel as mm_mod
from . import pareto as pareto_mod
from . import svgplot
from .cache import RunCache
from .errors import (InfeasibleProblemError, InfeasibleStiffnessError,
                     InvalidArgumentError, ParseError, SolverError,
                     SweepFailureError, ToparetoError, ValidationError)
from .fem2d import ProblemSpec, preset
from .simp import OptimizerConfig

CACHE_ENV = "TOPARETO_CACHE"


@dataclass
class RunConfig:
    problem: ProblemSpec
    optimizer: OptimizerConfig
    vf_grid: list[float]
    out_dir: Path
    cache_dir: Path | None
    seed: int = 0
    workers: int = 1
    rounds: int = 3
    min_threshold: float = pareto_mod.DEFAULT_MIN_THRESHOLD
    drop_threshold: float = pareto_mod.DEFAULT_DROP_THRESHOLD
    sigma: float = pareto_mod.DEFAULT_SIGMA
    anchor_vf: float = mm_mod.DEFAULT_ANCHOR_VF
    tie_tol: float = mat_mod.DEFAULT_TIE_TOL

    def cache(self) -> RunCache:
        return RunCache(self.cache_dir)


def _load_config(args) -> RunConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read config {args.config}: {exc}") from exc

    prob_spec = doc.get("problem", "mbb")
    nelx = getattr(args, "nelx", None) or doc.get("nelx")
    nely = getattr(args, "nely", None) or doc.get("nely")
    if getattr(args, "preset", None):
        prob_spec = args.preset
    if isinstance(prob_spec, str):
        problem = preset(prob_spec, nelx, nely)
    else:
        problem = ProblemSpec.from_json(json.dumps(prob_spec))

    opt_doc = dict(doc.get("optimizer", {}))
    if getattr(args, "penal", None) is not None:
        opt_doc["penal"] = args.penal
    if getattr(args, "rmin", None) is not None:
        opt_doc["rmin"] = args.rmin
    if getattr(args, "filter_kind", None):
        opt_doc["filter_kind"] = args.filter_kind
    try:
        optimizer = OptimizerConfig(**opt_doc)
    except TypeError as exc:
        raise ParseError(f"bad optimizer config: {exc}") from exc

    sweep = doc.get("sweep", {})
    if "points" in sweep:
        vf_grid = [float(v) for v in sweep["points"]]
    else:
        vf_grid = pareto_mod.default_vf_grid(
            int(sweep.get("count", 50)),
            float(sweep.get("lo", 0.02)),
            float(sweep.get("hi", 1.0)))

    out_dir = Path(getattr(args, "out", None) or doc.get("out_dir", "out"))
    cache_dir = getattr(args, "cache", None) or os.environ.get(CACHE_ENV) \
        or doc.get("cache_dir")
    workers = getattr(args, "workers", None) or int(doc.get("workers", 1))
    return RunConfig(
        problem=problem,
        optimizer=optimizer,
        vf_grid=vf_grid,
        out_dir=out_dir,
        cache_dir=Path(cache_dir) if cache_dir else None,
        seed=int(doc.get("seed", 0)),
        workers=int(workers),
        rounds=int(doc.get("rounds", 3)),
        min_threshold=float(doc.get("min_threshold", pareto_mod.DEFAULT_MIN_THRESHOLD)),
        drop_threshold=float(doc.get("drop_threshold", pareto_mod.DEFAULT_DROP_THRESHOLD)),
        sigma=float(doc.get("sigma", pareto_mod.DEFAULT_SIGMA)),
        anchor_vf=float(doc.get("anchor_vf", mm_mod.DEFAULT_ANCHOR_VF)),
        tie_tol=float(doc.get("tie_tol", mat_mod.DEFAULT_TIE_TOL)),
    )


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _front_svg(front, title: str) -> str:
    return svgplot.chart([("front", front.vfs(), front.cs())],
                         xlabel="volume fraction", ylabel="normalized compliance",
                         title=title, logy=True)


def cmd_optimize(args) -> int:
    cfg = _load_config(args)
    from .pareto import run_optimizations

    norm = cfg.problem.with_unit_load()
    res = run_optimizations(norm, [{"vf": args.vf, "init_kind": "uniform"}],
                            cfg.optimizer, cfg.cache(), cfg.workers)[0]
    out = cfg.out_dir
    grid = cfg.problem.grid
    img = res.densities.as_grid(grid)
    csv_text = "\n".join(",".join(repr(v) for v in row) for row in img) + "\n"
    _write(out / "densities.csv", csv_text)
    _write(out / "design.svg", svgplot.density_raster(res.densities.values, grid))
    _write(out / "summary.json", json.dumps(
        {"problem": cfg.problem.name, "vf": args.vf, **res.summary()},
        sort_keys=True, indent=2) + "\n")
    print(f"optimize {cfg.problem.name} vf={args.vf:g}: "
          f"compliance_p={res.compliance_p:.6g} compliance_p1={res.compliance_p1:.6g} "
          f"iterations={res.iterations}")
    return 0


def cmd_pareto(args) -> int:
    cfg = _load_config(args)
    cache = cfg.cache()
    out = cfg.out_dir
    strategy = args.strategy

    base = pareto_mod.baseline_sweep(cfg.problem, cfg.vf_grid, cfg.optimizer,
                                     cache, cfg.workers)
    front = base
    if strategy in ("multistart", "refine"):
        front, states = pareto_mod.multistart_states(cfg.problem, cfg.vf_grid,
                                                     cfg.optimizer, cache, cfg.workers)
    if strategy == "refine":
        front = pareto_mod.refine(cfg.problem, front, states, cfg.rounds,
                                  cfg.optimizer, cache, cfg.workers,
                                  cfg.min_threshold, cfg.drop_threshold)
    _write(out / f"front_{strategy}.csv", front.to_csv())
    _write(out / f"front_{strategy}.svg",
           _front_svg(front, f"{cfg.problem.name} front ({strategy})"))
    print(f"pareto {cfg.problem.name} strategy={strategy}: "
          f"{len(front)} points -> {out / f'front_{strategy}.csv'}")
    return 0


def cmd_er(args) -> int:
    cfg = _load_config(args)
    try:
        text = Path(args.front).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read front file {args.front}: {exc}") from exc
    front = pareto_mod.ParetoFront.from_csv(text, cfg.problem.name)
    raw = er_mod.compute_er(front)
    filt = er_mod.filter_er(front, cfg.sigma)
    out = cfg.out_dir
    _write(out / "er_raw.csv", raw.to_csv())
    _write(out / "er_filtered.csv", filt.to_csv())
    _write(out / "er.svg", svgplot.chart(
        [("raw", raw.vfs(), raw.values()),
         ("filtered", filt.vfs(), filt.values())],
        xlabel="volume fraction", ylabel="efficiency ratio",
        title=f"{cfg.problem.name} efficiency ratio"))
    for i in filt.bounds_violations():
        vf, n = filt.points[i]
        print(f"warning: filtered ratio {n:.4f} at vf={vf:.4g} outside "
              f"[{er_mod.ER_LOWER_BOUND}, {er_mod.ER_UPPER_BOUND}]")
    print(f"er: wrote {out / 'er_raw.csv'} and {out / 'er_filtered.csv'}")
    return 0


def cmd_fit(args) -> int:
    cfg = _load_config(args)
    model = mm_mod.fit_problem(cfg.problem, cfg.optimizer, cfg.anchor_vf,
                               cfg.cache(), cfg.workers)
    out = cfg.out_dir
    _write(out / "metamodel.json", model.to_json() + "\n")

    refined_path = out / "front_refine.csv"
    series = [("model", np.linspace(0.02, 1.0, 200),
               [mm_mod.eval_front(model, float(x)) for x in np.linspace(0.02, 1.0, 200)]),
              ("anchors", [p[0] for p in model.fit_points],
               [p[1] for p in model.fit_points])]
    if refined_path.exists():
        front = pareto_mod.ParetoFront.from_csv(refined_path.read_text())
        series.insert(0, ("refined front", front.vfs(), front.cs()))
        rows = ["vf,front,model,rel_error"]
        for p in front.points:
            mv = mm_mod.eval_front(model, p.vf)
            rows.append(f"{p.vf!r},{p.c!r},{mv!r},{(mv - p.c) / p.c!r}")
        _write(out / "fit_error.csv", "\n".join(rows) + "\n")
    else:
        print(f"notice: no refined front at {refined_path}, error profile skipped")
    _write(out / "fit_overlay.svg", svgplot.chart(
        series, xlabel="volume fraction", ylabel="normalized compliance",
        title=f"{cfg.problem.name} meta-model", logy=True))
    print(f"fit: a={model.a:.6g} b={model.b:.6g} -> {out / 'metamodel.json'}")
    return 0


def cmd_select(args) -> int:
    cfg = _load_config(args)
    mats = mat_mod.load_materials(args.materials)
    if not mats:
        raise ValidationError(f"no materials in {args.materials}")
    lc = mat_mod.LoadCase(force=args.force, delta_max=args.delta_max,
                          thickness=args.thickness, length=args.length,
                          height=args.height)
    out = cfg.out_dir
    model_path = out / "metamodel.json"
    if model_path.exists():
        model = mm_mod.MetaModel.from_json(model_path.read_text())
    else:
        model = mm_mod.fit_problem(cfg.problem, cfg.optimizer, cfg.anchor_vf,
                                   cfg.cache(), cfg.workers)
        _write(model_path, model.to_json() + "\n")

    report = mat_mod.select(mats, model, lc, cfg.tie_tol, problem=cfg.problem,
                            cfg=cfg.optimizer, cache=cfg.cache(), workers=cfg.workers)
    _write(out / "selection.json", report.to_json() + "\n")
    kept1 = [m for m in mats if m.name in report.kept_after_pareto]
    kept2 = [m for m in mats if m.name in report.kept_after_density]
    removed = [m for m in mats if m.name not in report.kept_after_density]
    _write(out / "ashby.svg", svgplot.ashby_chart(
        [("screened out", removed), ("pareto front", kept1), ("kept", kept2)]))
    sys.stdout.write(report.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topareto", description=__doc__)
    p.add_argument("--config", help="JSON config file")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--preset", help="problem preset: mbb, bridge, complex")
        sp.add_argument("--nelx", type=int)
        sp.add_argument("--nely", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--cache", help="cache directory")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--penal", type=float)
        sp.add_argument("--rmin", type=float)
        sp.add_argument("--filter-kind", dest="filter_kind",
                        choices=["density", "sensitivity"])

    sp = sub.add_parser("optimize", help="one compliance minimization")
    common(sp)
    sp.add_argument("--vf", type=float, required=True)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("pareto", help="build a compliance-volume front")
    common(sp)
    sp.add_argument("--strategy", choices=["baseline", "multistart", "refine"],
                    default="refine")
    sp.set_defaults(func=cmd_pareto)

    sp = sub.add_parser("er", help="efficiency ratio of a front CSV")
    common(sp)
    sp.add_argument("--front", required=True, help="front CSV path")
    sp.set_defaults(func=cmd_er)

    sp = sub.add_parser("fit", help="fit the front meta-model")
    common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("select", help="pick the minimum-mass material")
    common(sp)
    sp.add_argument("--materials", required=True, help="materials CSV path")
    sp.add_argument("--force", type=float, required=True, help="load F in N")
    sp.add_argument("--delta-max", dest="delta_max", type=float, required=True,
                    help="deflection limit in m")
    sp.add_argument("--thickness", type=float, required=True, help="t in m")
    sp.add_argument("--length", type=float, required=True, help="L in m")
    sp.add_argument("--height", type=float, required=True, help="h in m")
    sp.set_defaults(func=cmd_select)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidArgumentError, ParseError, ValidationError) as exc:
        line = f" (line {exc.line})" if isinstance(exc, ParseError) and exc.line else ""
        print(f"error: invalid input{line}: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleStiffnessError, InfeasibleProblemError) as exc:
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return 3
    except (SolverError, SweepFailureError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return 4
    except ToparetoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
