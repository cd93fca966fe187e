"""Manufactured-solution convergence studies, truncation surveys and rate fits."""
import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import __version__
from .bc1d import METHODS, OperatorSpec, b_delta, truncation_error
from .discrete1d import Grid1D, assemble, load_vector, solve
from .errors import DegenerateFit, InvalidConfig, NonlocalError
from .kernel import ScaledKernel

DEFAULT_DELTAS = (0.1, 0.05, 0.025, 0.0125)


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact local solution ``u0`` with ``f = -u0''`` on (0, 1)."""

    name: str
    u0: Callable = field(compare=False)
    f: Callable = field(compare=False)
    smoothness: str = "C-infinity"

    @property
    def boundary(self):
        return float(self.u0(0.0)), float(self.u0(1.0))

    def lap(self, x):
        return -np.asarray(self.f(x), dtype=float)

    def residual_check(self, n=100, tol=1e-9):
        """Max of ``|-u0'' - f|`` at ``n`` points by a fourth-order difference."""
        x = np.linspace(0.05, 0.95, n)
        h = 2e-3
        u = self.u0
        d2 = (-u(x - 2 * h) + 16 * u(x - h) - 30 * u(x) + 16 * u(x + h) - u(x + 2 * h)) / (12 * h * h)
        res = np.abs(-d2 - self.f(x)) / np.maximum(1.0, np.abs(self.f(x)))
        return float(res.max()), bool(res.max() <= tol)


def _const(c):
    return lambda x: np.full_like(np.asarray(x, dtype=float), c)


CASES = {
    "quadratic": ManufacturedCase("quadratic", lambda x: x * (1 - x), _const(2.0)),
    "sine": ManufacturedCase("sine", lambda x: np.sin(np.pi * x),
                             lambda x: np.pi**2 * np.sin(np.pi * x)),
    "asymmetric": ManufacturedCase("asymmetric", lambda x: np.sin(np.pi * x) + x * (1 - x) ** 2,
                                   lambda x: np.pi**2 * np.sin(np.pi * x) + 4 - 6 * x),
    "quadratic_half": ManufacturedCase("quadratic_half", lambda x: 0.5 * x * (1 - x), _const(1.0)),
    "shifted": ManufacturedCase("shifted", lambda x: x * (1 - x) + 1 + x, _const(2.0)),
    "zero": ManufacturedCase("zero", _const(0.0), _const(0.0)),
}


def get_case(name):
    try:
        return CASES[name]
    except KeyError:
        raise InvalidConfig(f"unknown case {name!r}; choose from {sorted(CASES)}") from None


def fit_rate(deltas, errors):
    """Least-squares slope of ``log(error)`` against ``log(delta)``."""
    d = np.asarray(deltas, dtype=float)
    e = np.asarray(errors, dtype=float)
    if d.shape != e.shape or d.size < 2:
        raise DegenerateFit("need at least two (delta, error) pairs")
    if np.any(e <= 0.0) or np.any(d <= 0.0):
        raise DegenerateFit("errors and deltas must be strictly positive")
    if np.ptp(np.log(d)) == 0.0:
        raise DegenerateFit("all deltas coincide")
    return float(np.polyfit(np.log(d), np.log(e), 1)[0])


def running_rates(deltas, errors):
    out = [None]
    for k in range(1, len(deltas)):
        out.append(math.log(errors[k] / errors[k - 1]) / math.log(deltas[k] / deltas[k - 1]))
    return out


@dataclass
class StudyResult:
    method: str
    kernel: str
    case: str
    grid_rule: str
    m: int
    moment_correction: bool
    delta_list: list
    h_list: list
    error_Linf: list
    error_L2: list
    fitted_rate_Linf: Optional[float]
    fitted_rate_L2: Optional[float]
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("wall_time")
        return d


def discrete_solution(case, kernel, method, delta, grid_rule="resolved", m=8, moment_correction=True):
    grid = Grid1D.from_rule(delta, grid_rule, m)
    spec = OperatorSpec(ScaledKernel(kernel, grid.delta), method).with_data(*case.boundary)
    sys = assemble(spec, grid, moment_correction)
    return grid, solve(sys, load_vector(sys, case.f))


def run_convergence(case, kernel, method="nonlocal_gradient", delta_list=DEFAULT_DELTAS,
                    grid_rule="resolved", m=8, moment_correction=True):
    """Assemble, solve and compare with ``u0`` at the nodes for each horizon."""
    if not len(delta_list):
        raise InvalidConfig("empty delta list")
    start = time.perf_counter()
    hs, linf, l2 = [], [], []
    for d in delta_list:
        grid, u = discrete_solution(case, kernel, method, d, grid_rule, m, moment_correction)
        err = u - case.u0(grid.nodes)
        hs.append(grid.h)
        linf.append(float(np.abs(err).max()))
        l2.append(float(np.sqrt(grid.h * np.sum(err * err))))
    rate_inf = rate_2 = None
    if len(delta_list) >= 2:
        rate_inf, rate_2 = fit_rate(delta_list, linf), fit_rate(delta_list, l2)
    return StudyResult(method, kernel.name, case.name, grid_rule, m, moment_correction,
                       [float(d) for d in delta_list], hs, linf, l2, rate_inf, rate_2,
                       time.perf_counter() - start)


@dataclass
class TruncationRow:
    delta: float
    interior_max: float
    layer_max: float
    layer_ratio_max: float


@dataclass
class TruncationTable:
    case: str
    kernel: str
    method: str
    rows: list
    interior_slope: Optional[float]

    def ratio_bounded(self, factor=2.0):
        """Layer ratios at smaller horizons stay within ``factor`` of the first one."""
        ref = self.rows[0].layer_ratio_max
        return all(r.layer_ratio_max <= factor * ref for r in self.rows[1:])

    def to_dict(self):
        return asdict(self)


def _survey_points(grid, width, interior_points):
    x = grid.nodes
    dist = np.minimum(x, 1.0 - x)
    layer = x[dist < width - 1e-12]
    inner = x[dist >= width - 1e-12]
    if interior_points and inner.size > interior_points:
        inner = inner[:: math.ceil(inner.size / interior_points)]
    return layer, inner


def truncation_survey(case, kernel, delta_list=DEFAULT_DELTAS, method="nonlocal_gradient",
                      grid_rule="coupled", m=8, interior_points=200):
    """Truncation of ``u0`` at grid nodes, split into layer and interior.

    The layer ratio divides by ``delta^3 b_delta(x) + delta^2`` with the
    extrapolation coefficient of the same kernel.
    """
    if not len(delta_list):
        raise InvalidConfig("empty delta list")
    rows = []
    for d in delta_list:
        grid = Grid1D.from_rule(d, grid_rule, m)
        spec = OperatorSpec(ScaledKernel(kernel, grid.delta), method).with_data(*case.boundary)
        width = 2.0 * d if method == "zhang_shi" else d
        layer, inner = _survey_points(grid, width, interior_points)
        t_in = np.array([truncation_error(spec, case.u0, case.lap, x) for x in inner])
        t_lay = np.array([truncation_error(spec, case.u0, case.lap, x) for x in layer])
        gspec = OperatorSpec(spec.kernel)
        scale = np.array([d**3 * b_delta(gspec, x) + d * d for x in layer])
        rows.append(TruncationRow(d, float(np.abs(t_in).max()), float(np.abs(t_lay).max()),
                                  float((np.abs(t_lay) / scale).max())))
    slope = None
    if len(rows) >= 2 and all(r.interior_max > 0 for r in rows):
        slope = fit_rate([r.delta for r in rows], [r.interior_max for r in rows])
    return TruncationTable(case.name, kernel.name, method, rows, slope)


@dataclass
class ComparisonReport:
    case: str
    kernel: str
    results: dict
    failures: dict
    interior_slopes: dict
    ordering: list

    def to_dict(self):
        return {"case": self.case, "kernel": self.kernel,
                "results": {k: v.to_dict() for k, v in self.results.items()},
                "failures": self.failures, "interior_slopes": self.interior_slopes,
                "ordering": self.ordering}


def compare_methods(case, kernel, delta_list=DEFAULT_DELTAS, methods=METHODS,
                    grid_rule="resolved", m=8, interior_points=32):
    """Run every method on shared grids; one method failing does not stop the rest."""
    if not len(delta_list):
        raise InvalidConfig("empty delta list")
    results, failures, slopes = {}, {}, {}
    for method in methods:
        try:
            slopes[method] = truncation_survey(case, kernel, delta_list[:3], method, "coupled", m,
                                               interior_points).interior_slope
        except NonlocalError as exc:
            failures[f"{method}:truncation"] = f"{type(exc).__name__}: {exc}"
        try:
            results[method] = run_convergence(case, kernel, method, delta_list, grid_rule, m)
        except (NonlocalError, ArithmeticError) as exc:
            failures[method] = f"{type(exc).__name__}: {exc}"
    rated = [(r.fitted_rate_Linf, k) for k, r in results.items() if r.fitted_rate_Linf is not None]
    ordering = [k for _, k in sorted(rated)]
    return ComparisonReport(case.name, kernel.name, results, failures, slopes, ordering)


CSV_COLUMNS = ("method", "kernel", "delta", "h", "err_linf", "err_l2", "rate_running")


def _fmt(v):
    return "" if v is None else repr(float(v))


def header_line(config):
    return f"# nldirichlet {__version__} config={json.dumps(config or {}, sort_keys=True)}\n"


def write_study_csv(results, path, config=None):
    with open(path, "w", newline="") as fh:
        fh.write(header_line(config))
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_COLUMNS)
        for r in results:
            rates = running_rates(r.delta_list, r.error_Linf)
            for d, h, ei, e2, rr in zip(r.delta_list, r.h_list, r.error_Linf, r.error_L2, rates):
                out.writerow([r.method, r.kernel, _fmt(d), _fmt(h), _fmt(ei), _fmt(e2), _fmt(rr)])


def write_json(payload, path, config=None):
    doc = {"version": __version__, "config": config or {}, "results": payload}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def write_study_svg(results, path, config=None, width=480, height=360):
    """Log-log plot of max-norm error against delta."""
    pts = [(d, e) for r in results for d, e in zip(r.delta_list, r.error_Linf) if e > 0]
    if not pts:
        return
    lx = np.log10([p[0] for p in pts])
    ly = np.log10([p[1] for p in pts])
    x0, x1 = lx.min() - 0.1, lx.max() + 0.1
    y0, y1 = ly.min() - 0.2, ly.max() + 0.2
    pad = 50

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f"<desc>{header_line(config).strip()[2:]}</desc>",
             f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
             'fill="none" stroke="black"/>',
             f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle">log10 delta</text>',
             f'<text x="14" y="{height / 2:.1f}" transform="rotate(-90 14 {height / 2:.1f})" '
             'text-anchor="middle">log10 max error</text>']
    for k, r in enumerate(results):
        color = _COLORS[k % len(_COLORS)]
        xy = [(sx(math.log10(d)), sy(math.log10(e))) for d, e in zip(r.delta_list, r.error_Linf)
              if e > 0]
        path_d = " ".join(f"{a:.2f},{b:.2f}" for a, b in xy)
        lines.append(f'<polyline points="{path_d}" fill="none" stroke="{color}"/>')
        if r.fitted_rate_Linf is not None and len(xy) > 1:
            ld = np.log10(r.delta_list)
            le = np.log10(r.error_Linf)
            slope, icpt = np.polyfit(ld, le, 1)
            a, b = ld.min(), ld.max()
            lines.append(f'<line x1="{sx(a):.2f}" y1="{sy(slope * a + icpt):.2f}" '
                         f'x2="{sx(b):.2f}" y2="{sy(slope * b + icpt):.2f}" stroke="{color}" '
                         'stroke-dasharray="4 3"/>')
        lines += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{color}"/>' for a, b in xy]
        lines.append(f'<text x="{pad + 8}" y="{pad + 16 + 14 * k}" fill="{color}">{r.method} '
                     f'({_fmt(r.fitted_rate_Linf)[:5] or "n/a"})</text>')
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
