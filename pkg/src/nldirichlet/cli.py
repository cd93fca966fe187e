"""Command-line front end.

Exit codes: 0 when every scientific check passes, 1 when a check fails,
2 on configuration, IO or runtime errors.
"""
import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from . import __version__
from .bc1d import METHODS, OperatorSpec, check_assumptions
from .errors import NonlocalError

RATE_WINDOWS = {"nonlocal_gradient": (1.8, 2.3), "morris": (1.8, 2.3),
                "constant_extension": (0.8, 1.3), "zhang_shi": None}
COMMANDS = ("check-kernel", "certify", "convergence", "truncation", "compare", "case2d")


@dataclass
class RunConfig:
    command: str
    kernel: str = "constant"
    methods: tuple = ("nonlocal_gradient",)
    deltas: tuple = (0.1, 0.05, 0.025, 0.0125)
    grid_rule: str = "resolved"
    m: int = 8
    case: str = "quadratic"
    out: str = "out"
    dump_matrix: Optional[str] = None
    window: Optional[tuple] = None
    n: Optional[int] = None
    eps_ratio: float = 1.0 / 3.0
    moment_correction: bool = True
    stability: bool = False

    def canonical(self):
        d = asdict(self)
        for k in ("methods", "deltas", "window"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    def to_json(self):
        return json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        d = dict(d)
        for k in ("methods", "deltas", "window"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _names(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser():
    parser = argparse.ArgumentParser(prog="nldirichlet",
                                     description="Nonlocal Dirichlet problems on the unit interval.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
        p.add_argument("--kernel", help="constant, linear or a .kern table")
        p.add_argument("--delta", "--deltas", dest="deltas", type=_floats,
                       help="comma-separated horizons")
        p.add_argument("--method", "--methods", dest="methods", type=_names)
        p.add_argument("--grid-rule", choices=("coupled", "resolved"))
        p.add_argument("--m", type=int, help="cells per horizon for the coupled rule")
        p.add_argument("--case")
        p.add_argument("--out")
        p.add_argument("--dump-matrix")
        p.add_argument("--window", type=_floats, help="LO,HI accepted fitted-rate window")
        p.add_argument("--n", type=int, help="number of cells (certify)")
        p.add_argument("--eps-ratio", type=float, help="epsilon / delta for case2d")
        p.add_argument("--raw-quadrature", action="store_true",
                       help="plain trapezoid without second-moment correction")
        p.add_argument("--stability", action="store_true", help="also run the stability survey")
    return parser


def resolve_config(args):
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    base["command"] = args.command
    for key in ("kernel", "deltas", "methods", "grid_rule", "m", "case", "out", "dump_matrix",
                "window", "n", "eps_ratio"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    if args.raw_quadrature:
        base["moment_correction"] = False
    if args.stability:
        base["stability"] = True
    if args.command == "check-kernel" and args.deltas is None and "deltas" not in base:
        base["deltas"] = (0.1,)
    cfg = RunConfig.from_dict(base)
    if cfg.window is not None and len(cfg.window) != 2:
        raise ValueError("--window expects LO,HI")
    for meth in cfg.methods:
        if meth not in METHODS:
            raise ValueError(f"unknown method {meth!r}")
    return cfg


def _kernel(cfg):
    from .kernel import kernel_from_name

    return kernel_from_name(cfg.kernel)


def _out_dir(cfg):
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_check_kernel(cfg):
    from .kernel import ScaledKernel

    prof = _kernel(cfg)
    scaled = [ScaledKernel(prof, d) for d in cfg.deltas]
    ok = all(prof.sample_checks().values())
    print(f"kernel {prof.name}: second moment {prof.second_moment:.12g}")
    for key, val in prof.sample_checks().items():
        print(f"  {key:<14} {val}")
    for d, kern in zip(cfg.deltas, scaled):
        rep = check_assumptions(OperatorSpec(kern))
        print(f"delta={d:g}")
        print(f"  A1   {'holds' if rep.A1 else 'FAILS'}")
        for name in ("A2", "A2s", "A3"):
            m = rep.margins[name]
            print(f"  {name:<4} {'holds' if getattr(rep, name) else 'FAILS'}  "
                  f"min_margin={m['min_margin']:.3e} at x={m['x']:.4f}")
        ok = ok and rep.all_hold
    return 0 if ok else 1


def cmd_certify(cfg):
    from .discrete1d import (Grid1D, assemble, certify_inverse_positivity, stability_survey,
                             write_matrix_market)
    from .kernel import ScaledKernel
    from .study import write_json

    prof = _kernel(cfg)
    method = cfg.methods[0]
    records, ok = [], True
    for d in cfg.deltas:
        grid = Grid1D.for_delta(d, cfg.n) if cfg.n else Grid1D.from_rule(d, "coupled", cfg.m)
        spec = OperatorSpec(ScaledKernel(prof, grid.delta), method)
        sys_ = assemble(spec, grid, cfg.moment_correction)
        if cfg.dump_matrix:
            write_matrix_market(sys_, cfg.dump_matrix)
        rep = certify_inverse_positivity(sys_)
        print(f"delta={d:g} n_cells={grid.n_cells} inverse_nonneg={rep.is_inverse_nonneg} "
              f"min_entry={rep.min_entry:.3e}")
        records.append({"delta": d, "n_cells": grid.n_cells, **asdict(rep)})
        ok = ok and rep.is_inverse_nonneg
    payload = {"certificates": records}
    if cfg.stability:
        table = stability_survey(prof, cfg.deltas, cfg.grid_rule, cfg.m, cfg.moment_correction)
        for r in table.rows:
            print(f"delta={r.delta:g} sigma_min={r.sigma_min:.4e} lambda_min={r.lambda_min_sym:.4e}")
        print(f"uniform={table.uniform} positive={table.positive}")
        payload["stability"] = {"rows": [asdict(r) for r in table.rows], "uniform": table.uniform,
                                "positive": table.positive}
        ok = ok and table.uniform and table.positive
    write_json(payload, _out_dir(cfg) / "certify.json", cfg.canonical())
    return 0 if ok else 1


def _in_window(rate, window):
    return window is None or (rate is not None and window[0] <= rate <= window[1])


def cmd_convergence(cfg):
    from .study import get_case, run_convergence, write_json, write_study_csv, write_study_svg

    prof, case = _kernel(cfg), get_case(cfg.case)
    results, ok = [], True
    for method in cfg.methods:
        r = run_convergence(case, prof, method, cfg.deltas, cfg.grid_rule, cfg.m,
                            cfg.moment_correction)
        window = cfg.window if cfg.window is not None else RATE_WINDOWS[method]
        passed = _in_window(r.fitted_rate_Linf, window) if len(cfg.deltas) > 1 else True
        rate = "n/a" if r.fitted_rate_Linf is None else f"{r.fitted_rate_Linf:.3f}"
        print(f"{method}: rate_Linf={rate} window={window} {'PASS' if passed else 'FAIL'}")
        results.append(r)
        ok = ok and passed
    out = _out_dir(cfg)
    conf = cfg.canonical()
    write_study_csv(results, out / "study.csv", conf)
    write_json([r.to_dict() for r in results], out / "study.json", conf)
    write_study_svg(results, out / "study.svg", conf)
    return 0 if ok else 1


def cmd_truncation(cfg):
    import csv

    from .study import get_case, header_line, truncation_survey, write_json

    prof, case = _kernel(cfg), get_case(cfg.case)
    ok, tables = True, []
    for method in cfg.methods:
        t = truncation_survey(case, prof, cfg.deltas, method, cfg.grid_rule, cfg.m)
        exact = all(r.interior_max <= 1e-9 for r in t.rows)
        passed = (exact or (t.interior_slope is not None and t.interior_slope >= 1.9))
        if method != "zhang_shi":
            passed = passed and t.ratio_bounded()
        for r in t.rows:
            print(f"{method} delta={r.delta:g} interior={r.interior_max:.3e} "
                  f"layer={r.layer_max:.3e} ratio={r.layer_ratio_max:.3f}")
        print(f"{method}: interior_slope={t.interior_slope} {'PASS' if passed else 'FAIL'}")
        tables.append(t)
        ok = ok and passed
    out, conf = _out_dir(cfg), cfg.canonical()
    with open(out / "truncation.csv", "w", newline="") as fh:
        fh.write(header_line(conf))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("method", "delta", "interior_max", "layer_max", "layer_ratio_max"))
        for t in tables:
            for r in t.rows:
                w.writerow((t.method, repr(r.delta), repr(r.interior_max), repr(r.layer_max),
                            repr(r.layer_ratio_max)))
    write_json([t.to_dict() for t in tables], out / "truncation.json", conf)
    return 0 if ok else 1


def cmd_compare(cfg):
    from .study import compare_methods, get_case, write_json, write_study_csv, write_study_svg

    prof, case = _kernel(cfg), get_case(cfg.case)
    methods = cfg.methods if len(cfg.methods) > 1 else METHODS
    rep = compare_methods(case, prof, cfg.deltas, methods, cfg.grid_rule, cfg.m)
    ok = True
    for method, r in rep.results.items():
        window = RATE_WINDOWS[method]
        passed = _in_window(r.fitted_rate_Linf, window)
        ok = ok and passed
        print(f"{method}: rate_Linf={r.fitted_rate_Linf} interior_truncation_slope="
              f"{rep.interior_slopes.get(method)} {'PASS' if passed else 'FAIL'}")
    for method, msg in rep.failures.items():
        print(f"{method}: failed ({msg})")
    print("ordering by rate:", ", ".join(rep.ordering))
    out, conf = _out_dir(cfg), cfg.canonical()
    results = list(rep.results.values())
    write_study_csv(results, out / "compare.csv", conf)
    write_json(rep.to_dict(), out / "compare.json", conf)
    write_study_svg(results, out / "compare.svg", conf)
    return 0 if ok else 1


def cmd_case2d(cfg):
    from .disk2d import case_study, write_case2d_csv
    from .study import write_json

    table = case_study(cfg.deltas, cfg.eps_ratio)
    for r in table.rows:
        ratio = "" if r["paren_ratio"] is None else f"{r['paren_ratio']:.4f}"
        print(f"delta={r['delta']:g} paren={r['paren_integral']:.5e} ratio={ratio} "
              f"T={r['morris_T_estimate']:.4e}")
    print(f"paren order={table.paren_order} T order={table.T_order}")
    out, conf = _out_dir(cfg), cfg.canonical()
    write_case2d_csv(table, out / "case2d.csv", conf)
    write_json({"rows": table.rows, "paren_order": table.paren_order, "T_order": table.T_order},
               out / "case2d.json", conf)
    ok = True
    if table.paren_order is not None:
        ok = abs(table.paren_order - 3.0) <= 0.1 and abs(table.T_order + 1.0) <= 0.15
    return 0 if ok else 1


HANDLERS = {"check-kernel": cmd_check_kernel, "certify": cmd_certify,
            "convergence": cmd_convergence, "truncation": cmd_truncation,
            "compare": cmd_compare, "case2d": cmd_case2d}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = resolve_config(args)
        return HANDLERS[cfg.command](cfg)
    except (NonlocalError, ArithmeticError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
