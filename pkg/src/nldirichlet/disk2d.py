"""Layer geometry around the unit disk hole of the punctured periodic square.

Points ``x`` with ``1 < |x| < 1 + delta`` see part of the excluded disk
``U`` inside ``B_delta(x)``; the intersection is a two-circle lens.  The
constant kernel is ``16 / delta^4`` on ``|z| < delta``.
"""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirection, InvalidConfig, OutOfDomain, OutsideLayer
from .quadrature import adaptive_gauss

QUAD_TOL = 1e-14
_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def kernel_constant(delta):
    return 16.0 / delta**4


def kernel_second_moment(delta, by="closed_form"):
    """``int_{B_delta} (16/delta^4) |z|^2 dz``; equals ``8 pi`` for every delta."""
    if by == "closed_form":
        return kernel_constant(delta) * math.pi * delta**4 / 2.0
    radial = adaptive_gauss(lambda r: r**3, 0.0, delta, tol=1e-16)
    return kernel_constant(delta) * 2.0 * math.pi * radial


@dataclass(frozen=True)
class TruncatedBall:
    """``B_delta(center)`` and its lens ``B_delta(center) cap U``."""

    center: tuple
    radius: float
    lens_area: float
    lens_first_moment: tuple
    computed_by: str

    @property
    def distance(self):
        return math.hypot(*self.center)

    @property
    def empty(self):
        return self.lens_area == 0.0

    @property
    def retained_area(self):
        return math.pi * self.radius**2 - self.lens_area


def _check_center(center, delta):
    c = np.asarray(center, dtype=float)
    if c.shape != (2,):
        raise InvalidConfig("center must be a 2-vector")
    if not 0.0 < delta < 1.0:
        raise InvalidConfig(f"delta must lie in (0, 1), got {delta}")
    d = float(np.hypot(*c))
    if d <= 1.0:
        raise OutOfDomain(f"|x| = {d} lies in the excluded disk")
    return c, d


def _lens_closed(d, r):
    """Area and axial first moment of ``B_r((d, 0)) cap B_1(0)`` for ``1 < d < 1 + r``."""
    a = (d * d - r * r + 1.0) / (2.0 * d)
    # part of the unit disk beyond the radical line
    big_area = math.acos(a) - a * math.sqrt(1.0 - a * a)
    big_mom = 2.0 / 3.0 * (1.0 - a * a) ** 1.5
    # part of the small disk on the origin side of the radical line
    hh = d - a
    cap = r * r - hh * hh
    small_area = r * r * math.acos(hh / r) - hh * math.sqrt(cap)
    small_mom = d * small_area - 2.0 / 3.0 * cap**1.5
    return big_area + small_area, big_mom + small_mom


def _ray_span(d, delta, theta):
    """Radial interval of the lens along direction ``theta`` from ``(d, 0)``."""
    p = d * math.cos(theta)
    disc = p * p - (d * d - 1.0)
    if disc <= 0.0:
        return None
    root = math.sqrt(disc)
    lo, hi = -p - root, min(-p + root, delta)
    lo = max(lo, 0.0)
    if hi <= lo:
        return None
    return lo, hi


def _angle_breaks(d, delta):
    out = []
    c1 = -math.sqrt(d * d - 1.0) / d
    c2 = (1.0 - d * d - delta * delta) / (2.0 * delta * d)
    for c in (c1, c2):
        if -1.0 < c < 1.0:
            t = math.acos(c)
            out += [t, 2.0 * math.pi - t]
    return sorted(out)


def _polar(d, delta, radial, tol=QUAD_TOL):
    """``int_0^{2 pi} radial(theta, lo, hi) dtheta`` over the lens spans."""

    def g(theta):
        theta = np.atleast_1d(theta)
        out = np.zeros(theta.shape)
        for k, t in enumerate(theta):
            span = _ray_span(d, delta, t)
            if span is not None:
                out[k] = radial(t, *span)
        return out

    return adaptive_gauss(g, 0.0, 2.0 * math.pi, tol=tol, rtol=1e-15,
                          breakpoints=_angle_breaks(d, delta))


def lens_geometry(center, delta, by="closed_form"):
    """Area and first moment of ``B_delta(center) cap U``.

    ``by="quadrature"`` integrates in polar coordinates about the center,
    independently of the two-circle formulas.  An empty lens gives zeros.
    """
    c, d = _check_center(center, delta)
    if d >= 1.0 + delta:
        return TruncatedBall(tuple(float(v) for v in c), delta, 0.0, (0.0, 0.0), by)
    e = c / d
    if by == "closed_form":
        area, mom = _lens_closed(d, delta)
        first = mom * e
    elif by == "quadrature":
        area = _polar(d, delta, lambda t, lo, hi: 0.5 * (hi * hi - lo * lo))
        # moments about the center along the axis and across it
        m_par = _polar(d, delta, lambda t, lo, hi: math.cos(t) * (hi**3 - lo**3) / 3.0)
        m_perp = _polar(d, delta, lambda t, lo, hi: math.sin(t) * (hi**3 - lo**3) / 3.0)
        perp = np.array([-e[1], e[0]])
        first = c * area + m_par * e + m_perp * perp
    else:
        raise InvalidConfig(f"unknown method {by!r}")
    return TruncatedBall(tuple(float(v) for v in c), delta, float(area),
                         (float(first[0]), float(first[1])), by)


def retained_moment(x, delta):
    """``int_{B_delta(x) cap Omega} (y - x) dy``; the full-ball moment vanishes."""
    lens = lens_geometry(x, delta)
    return -(np.asarray(lens.lens_first_moment) - np.asarray(x, dtype=float) * lens.lens_area)


def n_delta_direction(x, delta):
    """Normalized first moment of the truncated ball about ``x``."""
    m = retained_moment(x, delta)
    norm = float(np.hypot(*m))
    if norm < 1e-13:
        raise DegenerateDirection(f"first moment {norm:.3g} vanishes at x={tuple(x)}")
    return m / norm


def _layer_epsilon(x, delta):
    c, d = _check_center(x, delta)
    eps = d - 1.0
    if eps >= delta:
        raise OutsideLayer(f"dist(x, unit circle) = {eps} >= delta = {delta}")
    return c, d, eps


def cap_distance_denominator(x, delta, tol=1e-13):
    """``int_{B_delta(x) cap Omega}`` of the distance along ``n_delta`` to the far cap.

    In coordinates rotated so ``x = (1 + eps, 0)``, the integrand is
    ``1 + eps + sqrt(delta^2 - y2^2) - y1``; the ``y1`` integral is exact and
    the ``y2`` integral adaptive.
    """
    _, _, eps = _layer_epsilon(x, delta)
    x1 = 1.0 + eps

    def g(t):
        t = np.asarray(t, dtype=float)
        s = np.sqrt(np.maximum(delta * delta - t * t, 0.0))
        inner = np.where(np.abs(t) < 1.0, np.sqrt(np.maximum(1.0 - t * t, 0.0)) - x1, -np.inf)
        lo = np.maximum(-s, inner)
        return 0.5 * np.maximum(s - lo, 0.0) ** 2

    breaks = []
    # |t| where the hole boundary crosses the ball boundary
    a = (x1 * x1 - delta * delta + 1.0) / (2.0 * x1)
    if a < 1.0:
        tc = math.sqrt(1.0 - a * a)
        breaks = [-tc, tc]
    return adaptive_gauss(g, -delta, delta, tol=tol * delta**3, rtol=1e-15, breakpoints=breaks)


@dataclass(frozen=True)
class Row2D:
    """Layer row ``a u(x) - int_Omega u(y) (16/delta^4 - b_hat chi_I(y)) dy``.

    ``I`` is the whole truncated ball ``B_delta(x) cap Omega``.
    """

    x: tuple
    delta: float
    epsilon: float
    n_delta: tuple
    a_coeff: float
    moment: float
    denominator: float
    b_hat: float
    retained_area: float

    def apply(self, u):
        """Row applied to ``u(y1, y2)`` by polar quadrature over the truncated ball."""
        k = kernel_constant(self.delta)
        integral = _retained_integral(self.x, self.delta, u)
        return self.a_coeff * float(u(*self.x)) - (k - self.b_hat) * integral

    def comparison_row_sum(self):
        """``a - int |16/delta^4 - b_hat chi_I|``."""
        k = kernel_constant(self.delta)
        return self.a_coeff - abs(k - self.b_hat) * self.retained_area


def _retained_integral(x, delta, u):
    """``int_{B_delta(x) cap Omega} u`` with the lens spans cut out of each ray."""
    c, d = _check_center(x, delta)
    e = c / d
    perp = np.array([-e[1], e[0]])
    rot = np.column_stack([e, perp])

    def pieces(theta):
        span = _ray_span(d, delta, theta)
        if span is None:
            return [(0.0, delta)]
        out = []
        if span[0] > 0.0:
            out.append((0.0, span[0]))
        if span[1] < delta:
            out.append((span[1], delta))
        return out

    def g(theta):
        theta = np.atleast_1d(theta)
        vals = np.zeros(theta.shape)
        for k, t in enumerate(theta):
            direction = rot @ np.array([math.cos(t), math.sin(t)])
            for lo, hi in pieces(t):
                r = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
                y = c[:, None] + direction[:, None] * r[None, :]
                vals[k] += 0.5 * (hi - lo) * np.sum(_GL_W * r * u(y[0], y[1]))
        return vals

    return adaptive_gauss(g, 0.0, 2.0 * math.pi, tol=1e-12, rtol=1e-13,
                          breakpoints=_angle_breaks(d, delta))


def assemble_row_2d(x, delta):
    c, d, eps = _layer_epsilon(x, delta)
    k = kernel_constant(delta)
    n = n_delta_direction(c, delta)
    lens = lens_geometry(c, delta)
    area = math.pi * delta**2 - lens.lens_area
    moment = k * float(np.dot(retained_moment(c, delta), n))
    den = cap_distance_denominator(c, delta)
    return Row2D(tuple(float(v) for v in c), delta, float(eps), tuple(float(v) for v in n),
                 k * area, moment, float(den), moment / float(den), area)


def paren_integral(delta, epsilon, by="closed_form"):
    """``int_{B cap Omega}(y1 - 1 - eps) + int_{B \\ Omega}(y1 - 1)`` at ``x = (1 + eps, 0)``.

    The closed form is ``eps * |lens|``; ``by="quadrature"`` integrates both
    pieces directly along rays from ``x``.  For ``eps >= delta`` the lens is
    empty and the value is 0.
    """
    if not epsilon > 0.0:
        raise InvalidConfig(f"need epsilon > 0, got epsilon={epsilon}")
    d = 1.0 + epsilon
    if by == "closed_form":
        return epsilon * lens_geometry((d, 0.0), delta).lens_area

    def g(theta):
        theta = np.atleast_1d(theta)
        out = np.zeros(theta.shape)
        for k, t in enumerate(theta):
            ct = math.cos(t)
            span = _ray_span(d, delta, t)
            if span is None:
                out[k] = ct * delta**3 / 3.0
                continue
            lo, hi = span
            # retained rays carry y1 - 1 - eps = rho cos t, the lens y1 - 1 = rho cos t + eps
            out[k] = ct * (lo**3 + delta**3 - hi**3) / 3.0
            out[k] += ct * (hi**3 - lo**3) / 3.0 + epsilon * 0.5 * (hi * hi - lo * lo)
        return out

    return adaptive_gauss(g, 0.0, 2.0 * math.pi, tol=QUAD_TOL * delta**3, rtol=1e-15,
                          breakpoints=_angle_breaks(d, delta))


def morris_truncation_2d(delta, epsilon, du1=1.0, by="closed_form"):
    paren = paren_integral(delta, epsilon, by)
    return {"delta": delta, "epsilon": epsilon, "paren_integral": paren,
            "morris_T_estimate": kernel_constant(delta) * du1 * paren}


@dataclass
class Case2DTable:
    rows: list
    paren_order: float
    T_order: float


def case_study(delta_list=(0.1, 0.05, 0.025, 0.0125), eps_ratio=1.0 / 3.0, du1=1.0):
    """Parenthesized integral and Morris truncation at ``x = (1 + eps, 0)``, ``eps = eps_ratio delta``."""
    from .study import fit_rate

    rows = []
    for k, d in enumerate(delta_list):
        eps = eps_ratio * d
        rec = morris_truncation_2d(d, eps, du1)
        rec["lens_area"] = lens_geometry((1.0 + eps, 0.0), d).lens_area
        rec["paren_ratio"] = rows[-1]["paren_integral"] / rec["paren_integral"] if k else None
        rows.append(rec)
    deltas = [r["delta"] for r in rows]
    paren_order = fit_rate(deltas, [r["paren_integral"] for r in rows]) if len(rows) > 1 else None
    t_order = fit_rate(deltas, [abs(r["morris_T_estimate"]) for r in rows]) if len(rows) > 1 else None
    return Case2DTable(rows, paren_order, t_order)


CASE2D_COLUMNS = ("delta", "epsilon", "lens_area", "paren_integral", "paren_ratio",
                  "morris_T_estimate")


def write_case2d_csv(table, path, config=None):
    from .study import header_line

    with open(path, "w", newline="") as fh:
        fh.write(header_line(config))
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CASE2D_COLUMNS)
        for r in table.rows:
            out.writerow(["" if r[c] is None else repr(float(r[c])) for c in CASE2D_COLUMNS])
