"""Continuum 1D operators on (0, 1) for the four Dirichlet boundary treatments.

Every operator here is evaluated pointwise by adaptive quadrature and serves
as the oracle for the discrete assembly in :mod:`nldirichlet.discrete1d`.

Writing ``g`` for the boundary value on the near side and ``B = B_delta(x)``,
the treatments differ only in how the collar outside ``(0, 1)`` is filled:

* ``nonlocal_gradient``: ``u(x) + G u(x) (y - x)`` with the averaged slope
  ``G``; the operator becomes ``int_{B cap O} (u(x)-u(y)) w + b(x) int_{B cap O} (u-g)``.
* ``constant_extension``: the collar holds ``g``.
* ``morris``: the line through ``(p(x), g)`` and ``(x, u(x))`` is mirrored into the collar.
* ``zhang_shi``: no collar; a mollified equation with a one-sided normal
  derivative estimate on a ``2 delta`` layer.
"""
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidConfig, LayerOverlap, OutOfDomain
from .kernel import ScaledKernel
from .quadrature import adaptive_gauss

METHODS = ("nonlocal_gradient", "constant_extension", "morris", "zhang_shi")
QUAD_TOL = 1e-11


def zs_bump(s):
    """Smooth bump ``exp(s / (s - 1))`` on ``[0, 1)``, zero beyond."""
    s = np.asarray(s, dtype=float)
    inside = (s >= 0.0) & (s < 1.0)
    t = np.where(inside, s, 0.0)
    return np.where(inside, np.exp(t / np.where(inside, t - 1.0, -1.0)), 0.0)


@dataclass(frozen=True)
class ZSKernelSet:
    """Mollifier family for the Zhang-Shi formulation at horizon ``delta``.

    Profiles act on the squared, rescaled distance ``r^2 / (4 delta^2)`` so the
    support radius is ``2 delta``.
    """

    W: Callable = field(compare=False, repr=False)
    Wbar: Callable = field(compare=False, repr=False)
    Wbarbar: Callable = field(compare=False, repr=False)
    C_delta: float
    delta: float

    def _arg(self, r):
        return np.asarray(r, dtype=float) ** 2 / (4.0 * self.delta**2)

    def w(self, r):
        return self.C_delta * self.W(self._arg(r))

    def wbar(self, r):
        return self.C_delta * self.Wbar(self._arg(r))

    def wbarbar(self, r):
        return self.C_delta * self.Wbarbar(self._arg(r))

    def calibration_residual(self):
        """``int_R (C W(z^2/4d^2) / d^2) z^2 dz - 2`` by independent quadrature in ``z``."""
        d = self.delta
        m = adaptive_gauss(lambda z: self.w(z) * z * z / d**2, 0.0, 2.0 * d, tol=1e-14)
        return 2.0 * m - 2.0


def _tabulate(profile, n=2048):
    r = np.linspace(0.0, 1.0, n)
    wbar = np.array([adaptive_gauss(profile, ri, 1.0, tol=1e-15) for ri in r])
    wbb = np.array([adaptive_gauss(lambda z, a=ri: (z - a) * profile(z), ri, 1.0, tol=1e-15)
                    for ri in r])
    wbar[-1] = 0.0
    wbb[-1] = 0.0
    sb, sbb = CubicSpline(r, wbar), CubicSpline(r, wbb)

    def clip(spline):
        def f(x):
            x = np.asarray(x, dtype=float)
            return np.where(x < 1.0, spline(np.clip(x, 0.0, 1.0)), 0.0)
        return f

    return clip(sb), clip(sbb)


_ZS_CACHE = {}


def build_zs_kernels(delta, profile=zs_bump):
    """Tabulate ``Wbar``, ``Wbarbar`` and calibrate ``C_delta`` for horizon ``delta``."""
    if not 0.0 < delta < 0.25:
        raise LayerOverlap(f"Zhang-Shi needs 2*delta < 1/2, got delta={delta}")
    key = profile
    if key not in _ZS_CACHE:
        wbar, wbb = _tabulate(profile)
        m2 = adaptive_gauss(lambda v: profile(v * v) * v * v, 0.0, 1.0, tol=1e-15)
        _ZS_CACHE[key] = (wbar, wbb, m2)
    wbar, wbb, m2 = _ZS_CACHE[key]
    # second moment of C W(z^2/4d^2)/d^2 equals 16 d C m2
    C = 1.0 / (8.0 * delta * m2)
    return ZSKernelSet(profile, wbar, wbb, C, delta)


@dataclass(frozen=True)
class OperatorSpec:
    """A boundary treatment bound to a scaled kernel and Dirichlet data ``(left, right)``."""

    kernel: ScaledKernel
    method: str = "nonlocal_gradient"
    boundary_data: tuple = (0.0, 0.0)
    zs: Optional[ZSKernelSet] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidConfig(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.kernel.delta >= 0.5:
            raise LayerOverlap(f"delta={self.kernel.delta} >= 1/2")
        object.__setattr__(self, "boundary_data", tuple(float(v) for v in self.boundary_data))
        if self.method == "zhang_shi" and self.zs is None:
            object.__setattr__(self, "zs", build_zs_kernels(self.kernel.delta))

    @property
    def delta(self):
        return self.kernel.delta

    def with_data(self, left, right):
        return replace(self, boundary_data=(left, right))


def _check(x):
    if not 0.0 < x < 1.0:
        raise OutOfDomain(f"x={x} is not in (0, 1)")


def _layer(spec, x, width=None):
    """Return ``(side, dist, g)`` for layer points, ``None`` in the bulk."""
    w = spec.delta if width is None else width
    if x < w:
        return "left", x, spec.boundary_data[0]
    if x > 1.0 - w:
        return "right", 1.0 - x, spec.boundary_data[1]
    return None


def _support(spec, x):
    d = spec.delta
    return max(0.0, x - d), min(1.0, x + d)


def _breaks(spec, x):
    d = spec.delta
    pts = [x, x - d, x + d]
    for b in spec.kernel.breakpoints():
        pts += [x - b, x + b]
    return pts


def _integrate(spec, x, g, lo=None, hi=None):
    a, b = _support(spec, x)
    a = a if lo is None else lo
    b = b if hi is None else hi
    return adaptive_gauss(g, a, b, tol=QUAD_TOL, breakpoints=_breaks(spec, x))


def a_delta(spec, x, closed_form=True):
    """``int_O w_delta(x, y) dy``."""
    _check(x)
    k, d = spec.kernel, spec.delta
    return k.moment(0, 0.0, min(x, d), closed_form) + k.moment(0, 0.0, min(1.0 - x, d), closed_form)


def outside_mass(spec, x, closed_form=True):
    """``int_{B \\ O} w_delta(x, y) dy``."""
    _check(x)
    lay = _layer(spec, x)
    if lay is None:
        return 0.0
    return spec.kernel.moment(0, lay[1], spec.delta, closed_form)


def outside_moment(spec, x, closed_form=True):
    """``int_{B \\ O} |x - y| w_delta(x, y) dy``."""
    _check(x)
    lay = _layer(spec, x)
    if lay is None:
        return 0.0
    return spec.kernel.moment(1, lay[1], spec.delta, closed_form)


def b_delta(spec, x, closed_form=True):
    """Extrapolation coefficient ``b_delta``; zero on ``[delta, 1 - delta]``."""
    _check(x)
    lay = _layer(spec, x)
    if lay is None:
        return 0.0
    dist = lay[1]
    return 2.0 / (dist + spec.delta) ** 2 * spec.kernel.moment(1, dist, spec.delta, closed_form)


def signed_kernel(spec, x, y, closed_form=True):
    _check(x)
    y = np.asarray(y, dtype=float)
    r = np.abs(y - x)
    chi = (r < spec.delta).astype(float)
    return spec.kernel.eval(r) - b_delta(spec, x, closed_form) * chi


def w_tilde(spec, x, y, closed_form=True):
    """``|w_delta(x, y) - b_delta(x) chi(|y - x| < delta)|``."""
    y = np.asarray(y, dtype=float)
    if np.any((y <= 0.0) | (y >= 1.0)):
        raise OutOfDomain("y must lie in (0, 1)")
    return np.abs(signed_kernel(spec, x, y, closed_form))


def w_tilde_sym(spec, x, y):
    """Arithmetic symmetrization ``(w~(x, y) + w~(y, x)) / 2``."""
    return 0.5 * (w_tilde(spec, x, y) + w_tilde(spec, y, x))


def nonlocal_gradient(spec, u, x):
    """Averaged one-sided slope (``rho = 1``) used to fill the collar."""
    _check(x)
    lay = _layer(spec, x)
    if lay is None:
        return 0.0
    side, dist, g = lay
    denom = 0.5 * (dist + spec.delta) ** 2
    lo, hi = _support(spec, x)
    if side == "left":
        num = adaptive_gauss(lambda y: u(y) - g, lo, hi, tol=QUAD_TOL, breakpoints=[x])
    else:
        num = adaptive_gauss(lambda y: g - u(y), lo, hi, tol=QUAD_TOL, breakpoints=[x])
    return num / denom


def morris_weight(spec, x):
    """``1 + int_{B \\ O} |(p - y)(x - p)| / |x - p|^2 w_delta dy``; 1 in the bulk."""
    _check(x)
    lay = _layer(spec, x)
    if lay is None:
        return 1.0
    return 1.0 + morris_coefficient(spec, x)


def morris_coefficient(spec, x, closed_form=True):
    lay = _layer(spec, x)
    if lay is None:
        return 0.0
    dist = lay[1]
    k, d = spec.kernel, spec.delta
    return (k.moment(1, dist, d, closed_form) - dist * k.moment(0, dist, d, closed_form)) / dist


def _bulk(spec, u, x):
    ux = float(u(x))
    w = spec.kernel
    return _integrate(spec, x, lambda y: (ux - u(y)) * w.eval(y - x))


def apply_operator(spec, u, x, f=None):
    """Value of the chosen nonlocal operator applied to ``u`` at ``x``.

    For ``zhang_shi`` this is the left-hand side of the mollified equation;
    the source enters the normal-derivative estimate only when ``f`` is given.
    """
    _check(x)
    if spec.method == "zhang_shi":
        return _zs_lhs(spec, u, x, f)
    bulk = _bulk(spec, u, x)
    lay = _layer(spec, x)
    if lay is None:
        return bulk
    _, dist, g = lay
    if spec.method == "nonlocal_gradient":
        b = b_delta(spec, x)
        return bulk + b * _integrate(spec, x, lambda y: u(y) - g, lo=None, hi=None)
    coeff = outside_mass(spec, x)
    if spec.method == "morris":
        coeff += morris_coefficient(spec, x)
    return bulk + coeff * (float(u(x)) - g)


def apply_comparison(spec, u, x):
    """``a_delta(x) u(x) - int_O u(y) w~(x, y) dy``."""
    _check(x)
    ux = float(u(x))
    w = spec.kernel
    b = b_delta(spec, x)

    def integrand(y):
        r = np.abs(y - x)
        wy = w.eval(r)
        return ux * wy - u(y) * np.abs(wy - b * (r < spec.delta))

    return _integrate(spec, x, integrand)


def _zs_support(spec, x):
    d2 = 2.0 * spec.delta
    return max(0.0, x - d2), min(1.0, x + d2)


def zs_normal_derivative(spec, u, side, f=None):
    """One-sided outward normal derivative estimate at ``0`` or ``1``."""
    zs, d = spec.zs, spec.delta
    g = spec.boundary_data[0 if side == "left" else 1]
    if side == "left":
        lo, hi = 0.0, 2.0 * d

        def dist(y):
            return y
    else:
        lo, hi = 1.0 - 2.0 * d, 1.0

        def dist(y):
            return 1.0 - y

    def integrand(y):
        val = (u(y) - g) * zs.wbar(dist(y))
        if f is not None:
            val = val + d * d * f(y) * zs.wbarbar(dist(y))
        return val

    total = adaptive_gauss(integrand, lo, hi, tol=QUAD_TOL)
    return -total / (2.0 * d * d * float(zs.wbarbar(0.0)))


def _zs_lhs(spec, u, x, f):
    zs, d = spec.zs, spec.delta
    ux = float(u(x))
    lo, hi = _zs_support(spec, x)
    bulk = adaptive_gauss(lambda y: (ux - u(y)) * zs.w(y - x) / d**2, lo, hi, tol=QUAD_TOL,
                          breakpoints=[x])
    lay = _layer(spec, x, width=2.0 * d)
    if lay is None:
        return bulk
    side, dist, _ = lay
    return bulk - 2.0 * zs_normal_derivative(spec, u, side, f) * float(zs.wbar(dist))


def zhang_shi_rhs(spec, f, x):
    """Mollified source ``int_O f Wbar + f(p) |x - p| Wbar(|x - p|)``."""
    _check(x)
    zs = spec.zs
    lo, hi = _zs_support(spec, x)
    val = adaptive_gauss(lambda y: f(y) * zs.wbar(y - x), lo, hi, tol=QUAD_TOL, breakpoints=[x])
    lay = _layer(spec, x, width=2.0 * spec.delta)
    if lay is not None:
        side, dist, _ = lay
        p = 0.0 if side == "left" else 1.0
        val += float(f(p)) * dist * float(zs.wbar(dist))
    return val


def truncation_error(spec, phi, lap_phi, x):
    """Residual of ``phi`` in the nonlocal equation with data ``-lap_phi``.

    Computed as ``N phi(x) + lap_phi(x)``; for ``zhang_shi`` the mollified
    right-hand side replaces ``-lap_phi(x)``.
    """
    _check(x)
    if spec.method == "zhang_shi":

        def f(y):
            return -np.asarray(lap_phi(y), dtype=float)

        return apply_operator(spec, phi, x, f=f) - zhang_shi_rhs(spec, f, x)
    return apply_operator(spec, phi, x) + float(lap_phi(x))


@dataclass(frozen=True)
class Lift:
    phi: Callable
    f_hat: Callable
    data_spec: OperatorSpec


def lift_inhomogeneous(spec, f, data):
    """Split inhomogeneous Dirichlet data off with the linear interpolant ``phi``.

    ``f_hat = f - N^{(a,b)} phi`` where ``N^{(a,b)}`` is the operator carrying the
    data; solving the homogeneous problem with ``f_hat`` and adding ``phi``
    solves ``N^{(a,b)} u = f``.  ``data_spec`` is that data-carrying operator,
    the direct alternative.
    """
    if spec.method == "zhang_shi":
        raise InvalidConfig("lifting is not defined for the mollified zhang_shi equation")
    a, b = (float(v) for v in data)

    def phi(y):
        return a + (b - a) * np.asarray(y, dtype=float)

    data_spec = spec.with_data(a, b)
    homogeneous = spec.with_data(0.0, 0.0)

    if a == 0.0 and b == 0.0:
        return Lift(phi, f, homogeneous)

    def f_hat(x):
        return float(f(x)) - apply_operator(data_spec, phi, x)

    return Lift(phi, f_hat, data_spec)


@dataclass
class AssumptionReport:
    A1: bool
    A2: bool
    A2s: bool
    A3: bool
    margins: dict

    @property
    def all_hold(self):
        return self.A1 and self.A2 and self.A2s and self.A3


def chebyshev_points(n, lo=0.0, hi=1.0):
    k = np.arange(n)
    return lo + (hi - lo) * 0.5 * (1.0 - np.cos(np.pi * (k + 0.5) / n))


def _row_abs_mass(spec, x):
    """``int_O w~(x, y) dy`` via the distance variable."""
    lay = _layer(spec, x)
    w, d = spec.kernel, spec.delta
    if lay is None:
        return a_delta(spec, x)
    dist = lay[1]
    b = b_delta(spec, x)

    def g(t):
        return np.abs(w.eval(t) - b)

    brk = w.breakpoints()
    return (2.0 * adaptive_gauss(g, 0.0, dist, tol=QUAD_TOL, breakpoints=brk)
            + adaptive_gauss(g, dist, d, tol=QUAD_TOL, breakpoints=brk))


def _column_abs_mass(spec, x):
    """``int_O w~(y, x) dy``; ``b`` varies with ``y`` here."""
    w, d = spec.kernel, spec.delta
    lo, hi = _support(spec, x)

    def g(ys):
        out = np.empty_like(ys)
        for i, y in enumerate(ys):
            b = b_delta(spec, y) if 0.0 < y < 1.0 else 0.0
            r = abs(x - y)
            out[i] = abs(float(w.eval(r)) - b * (r < d))
        return out

    pts = [x, d, 1.0 - d] + [x + s for s in w.breakpoints()] + [x - s for s in w.breakpoints()]
    return adaptive_gauss(g, lo, hi, tol=1e-9, rtol=1e-10, breakpoints=pts)


def _sign_measures(spec, x, n=4001):
    lo, hi = _support(spec, x)
    y = np.linspace(lo, hi, n)[1:-1]
    s = signed_kernel(spec, x, y)
    dy = (hi - lo) / (n - 1)
    return np.count_nonzero(s >= 0.0) * dy, np.count_nonzero(s <= 0.0) * dy


def check_assumptions(spec, n_samples=200):
    """Sample (A1), (A2), (A2s), (A3) and report the worst margins."""
    if n_samples < 100:
        raise InvalidConfig("n_samples must be at least 100")
    d = spec.delta
    a1 = spec.kernel.base.sample_checks()
    xs = chebyshev_points(n_samples)
    a2 = np.array([a_delta(spec, x) - _row_abs_mass(spec, x) for x in xs])
    scale = np.array([a_delta(spec, x) for x in xs])
    a2s = np.array([np.subtract(*_sign_measures(spec, x)) for x in xs])
    half = n_samples // 2
    x3 = np.concatenate([chebyshev_points(half, 0.0, 2.0 * d),
                         chebyshev_points(n_samples - half, 1.0 - 2.0 * d, 1.0)])
    a3 = np.array([a_delta(spec, x) - _column_abs_mass(spec, x) for x in x3])
    scale3 = np.array([a_delta(spec, x) for x in x3])
    rel2, rel3 = a2 / scale, a3 / scale3
    # a2s compares measures on a sampling grid of ~delta/2000 spacing
    a2s_tol = 4.0 * d / 2000.0
    margins = {
        "A1": a1,
        "A2": {"min_margin": float(a2.min()), "x": float(xs[a2.argmin()])},
        "A2s": {"min_margin": float(a2s.min()), "x": float(xs[a2s.argmin()])},
        "A3": {"min_margin": float(a3.min()), "x": float(x3[a3.argmin()])},
    }
    return AssumptionReport(
        A1=all(a1.values()),
        A2=bool(rel2.min() >= -1e-9),
        A2s=bool(a2s.min() >= -a2s_tol),
        A3=bool(rel3.min() >= -1e-7),
        margins=margins,
    )
