"""Radial kernel profiles on [0, 1], their horizon scalings and moments."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import EmptySupport, InvalidConfig, LayerOverlap, NegativeProfile, ZeroMoment
from .quadrature import adaptive_gauss

MOMENT_TOL = 1e-12
_SAMPLES = 1001


@dataclass(frozen=True)
class KernelProfile:
    """A radial profile ``w`` supported on ``[0, 1]``.

    ``func`` is the raw vectorized map on the closed interval; calling the
    profile applies the open support ``s < 1``, while :meth:`closed` keeps
    the left limit at ``s = 1`` (what a trapezoid rule needs at support
    endpoints).
    """

    func: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    second_moment: float
    is_builtin: str = "custom"
    singular_at_zero: bool = False
    breakpoints: tuple = ()
    name: str = "custom"

    def __post_init__(self):
        if self.singular_at_zero:
            raise InvalidConfig("kernels singular at zero are not supported")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        inside = (s >= 0.0) & (s < 1.0)
        return np.where(inside, self.func(np.clip(s, 0.0, 1.0)), 0.0)

    def closed(self, s):
        s = np.asarray(s, dtype=float)
        inside = (s >= 0.0) & (s <= 1.0)
        return np.where(inside, self.func(np.clip(s, 0.0, 1.0)), 0.0)

    def moment(self, k, lo=0.0, hi=1.0, closed_form=True):
        """One-sided moment ``int_lo^hi s**k w(s) ds`` with ``[lo, hi]`` clipped to ``[0, 1]``."""
        lo = min(max(lo, 0.0), 1.0)
        hi = min(max(hi, 0.0), 1.0)
        if hi <= lo:
            return 0.0
        if closed_form and self.is_builtin == "constant":
            c = self.func(np.array(0.0)).item()
            return c * (hi ** (k + 1) - lo ** (k + 1)) / (k + 1)
        if closed_form and self.is_builtin == "linear":
            c = self.func(np.array(0.0)).item()

            def prim(s):
                return s ** (k + 1) / (k + 1) - s ** (k + 2) / (k + 2)

            return c * (prim(hi) - prim(lo))
        return adaptive_gauss(
            lambda s: s**k * self.func(s), lo, hi, tol=MOMENT_TOL, breakpoints=self.breakpoints
        )

    def sample_checks(self, n=_SAMPLES):
        """Sampled (A1)-type checks: nonnegative, positive on (0,1), nonincreasing."""
        s = np.linspace(0.0, 1.0, n)[1:-1]
        v = self.func(s)
        return {
            "nonnegative": bool(np.all(v >= 0.0)),
            "positive": bool(np.all(v > 0.0)),
            "nonincreasing": bool(np.all(np.diff(v) <= 1e-12 * max(1.0, np.abs(v).max()))),
            "normalized": bool(abs(self.second_moment - 2.0) <= 1e-10),
        }


def _second_moment(func, breakpoints=()):
    return 2.0 * adaptive_gauss(lambda s: s * s * func(s), 0.0, 1.0, tol=MOMENT_TOL,
                                breakpoints=breakpoints)


def builtin_constant():
    """``w(s) = 3`` on ``[0, 1]``."""
    return KernelProfile(lambda s: np.full_like(np.asarray(s, dtype=float), 3.0), 2.0,
                         is_builtin="constant", name="constant")


def builtin_linear():
    """``w(s) = 12 (1 - s)`` on ``[0, 1]``."""
    return KernelProfile(lambda s: 12.0 * (1.0 - np.asarray(s, dtype=float)), 2.0,
                         is_builtin="linear", name="linear")


def normalize(profile):
    """Rescale a profile so that ``int_R w(|z|) z^2 dz = 2``.

    Accepts either a :class:`KernelProfile` or a bare callable on ``[0, 1]``.
    """
    if isinstance(profile, KernelProfile):
        func, breaks, name = profile.func, profile.breakpoints, profile.name
        kind = profile.is_builtin
    else:
        func, breaks, name, kind = profile, (), "custom", "custom"
    s = np.unique(np.concatenate([np.linspace(0.0, 1.0, _SAMPLES), np.asarray(breaks, float)]))
    if np.any(np.asarray(func(s), dtype=float) < 0.0):
        raise NegativeProfile(f"profile {name!r} takes negative values")
    moment = _second_moment(func, breaks)
    if moment <= 1e-14:
        raise ZeroMoment(f"profile {name!r} has second moment {moment:.3g}")
    if isinstance(profile, KernelProfile) and abs(moment - 2.0) <= MOMENT_TOL:
        return profile
    scale = 2.0 / moment
    scaled = KernelProfile(lambda t, f=func, c=scale: c * np.asarray(f(t), dtype=float),
                           _second_moment(lambda t, f=func, c=scale: c * f(t), breaks),
                           is_builtin=kind,
                           breakpoints=tuple(breaks), name=name)
    return scaled


def load_table(path):
    """Read a ``.kern`` table (columns ``s value``), interpolate linearly and normalize."""
    path = Path(path)
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidConfig(f"cannot read kernel table {path}: {exc}") from exc
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise InvalidConfig(f"{path}: expected two columns 's value'")
    s, v = data[:, 0], data[:, 1]
    if np.any(np.diff(s) <= 0) or s[0] < 0.0 or s[-1] > 1.0:
        raise InvalidConfig(f"{path}: s grid must be strictly increasing inside [0, 1]")
    if np.any(v < 0.0):
        raise NegativeProfile(f"{path}: negative kernel values")

    def func(t, s=s, v=v):
        return np.interp(t, s, v, left=v[0], right=0.0)

    raw = KernelProfile(func, _second_moment(func, tuple(s[1:-1])), breakpoints=tuple(s[1:-1]),
                        name=path.stem)
    return normalize(raw)


def kernel_from_name(name):
    """Resolve ``constant``, ``linear`` or a path to a ``.kern`` table."""
    if name == "constant":
        return builtin_constant()
    if name == "linear":
        return builtin_linear()
    return load_table(name)


@dataclass(frozen=True)
class ScaledKernel:
    """``w_delta(r) = w(r / delta) / delta^3`` in one dimension."""

    base: KernelProfile
    delta: float

    def __post_init__(self):
        if not 0.0 < self.delta:
            raise InvalidConfig(f"horizon must be positive, got {self.delta}")
        if self.delta >= 0.5:
            raise LayerOverlap(f"delta={self.delta} leaves overlapping boundary layers")

    def eval(self, r):
        return self.base(np.abs(np.asarray(r, dtype=float)) / self.delta) / self.delta**3

    def closed(self, r):
        return self.base.closed(np.abs(np.asarray(r, dtype=float)) / self.delta) / self.delta**3

    def moment(self, k, lo, hi, closed_form=True):
        """``int_lo^hi t^k w_delta(t) dt`` for distances ``0 <= lo <= hi``."""
        d = self.delta
        return d ** (k - 2) * self.base.moment(k, lo / d, hi / d, closed_form=closed_form)

    def breakpoints(self):
        return tuple(b * self.delta for b in self.base.breakpoints)


@dataclass(frozen=True)
class LowerBoundKernel:
    """Radial lower bound ``rho`` for the symmetrized comparison kernel (unnormalized)."""

    func: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    sigma: float
    second_moment: float
    source: str

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.where((s >= 0.0) & (s <= 1.0), self.func(np.clip(s, 0.0, 1.0)), 0.0)

    def scaled(self, r, delta):
        return self(np.abs(np.asarray(r, dtype=float)) / delta) / delta**3


def lower_bound_profile(k: KernelProfile):
    """Build ``rho`` with ``rho_delta <= sym(w~_delta)`` and ``rho_delta <= w_delta / 2``."""
    if k.is_builtin == "constant":
        def rho(s):
            s = np.asarray(s, dtype=float)
            return 1.5 * s / (s + 1.0)

        sigma = 1.0
    else:
        level = 2.0 * k.moment(1)

        def rho(s, f=k.func, c=level):
            return 0.5 * np.maximum(np.asarray(f(s), dtype=float) - c, 0.0)

        s = np.linspace(0.0, 1.0, 10001)
        positive = rho(s) > 0.0
        if not positive.any():
            raise EmptySupport(f"kernel {k.name!r}: max(w - {level:.6g}, 0) vanishes identically")
        last = np.nonzero(positive)[0].max()
        if last == s.size - 1:
            sigma = 1.0
        else:
            lo, hi = s[last], s[last + 1]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if rho(mid) > 0.0 else (lo, mid)
            sigma = 0.5 * (lo + hi)
    breaks = tuple(b for b in (*k.breakpoints, sigma) if 0.0 < b < 1.0)
    m2 = 2.0 * adaptive_gauss(lambda s: s * s * rho(s), 0.0, 1.0, tol=MOMENT_TOL, breakpoints=breaks)
    return LowerBoundKernel(rho, sigma, m2, k.name)
