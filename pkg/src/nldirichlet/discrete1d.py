"""Collocation on a uniform grid of (0, 1): banded assembly, solves, certificates."""
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .bc1d import OperatorSpec
from .errors import GridMismatch, InvalidConfig, LayerOverlap, MethodMismatch, SingularMatrix

DENSE_LIMIT = 1024


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid with ``h = 1 / n_cells`` and horizon ``delta = m h``.

    Unknowns live at the interior nodes ``x_i = i h``, ``i = 1..n_cells-1``.
    """

    n_cells: int
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise GridMismatch(f"need at least two cells per horizon, got m={self.m}")
        if 2 * self.m >= self.n_cells:
            raise LayerOverlap(f"2*delta = {2 * self.m}/{self.n_cells} >= 1")

    @property
    def h(self):
        return 1.0 / self.n_cells

    @property
    def delta(self):
        return self.m / self.n_cells

    @property
    def nodes(self):
        return np.arange(1, self.n_cells) * self.h

    @property
    def size(self):
        return self.n_cells - 1

    @classmethod
    def for_delta(cls, delta, n_cells):
        m = delta * n_cells
        if abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise GridMismatch(f"delta={delta} is not a multiple of h=1/{n_cells}")
        return cls(n_cells, int(round(m)))

    @classmethod
    def from_rule(cls, delta, rule="coupled", m=8):
        """``coupled``: ``h = delta / m``; ``resolved``: ``h ~ delta**1.5 / 2`` with integral ``delta/h``."""
        if rule == "coupled":
            mm = m
        elif rule == "resolved":
            mm = max(2, math.ceil(2.0 / math.sqrt(delta) - 1e-9))
        else:
            raise InvalidConfig(f"unknown grid rule {rule!r}")
        n = mm / delta
        if abs(n - round(n)) > 1e-9 * n:
            raise GridMismatch(f"1/delta * m = {n} is not an integer for delta={delta}")
        return cls(int(round(n)), mm)


@dataclass(frozen=True)
class BandSystem:
    """Banded collocation matrix in LAPACK general-band layout.

    ``ab[upper_bw + i - j, j] = A[i, j]``.  ``data_rhs`` carries the terms
    produced by nonzero Dirichlet data; :func:`load_vector` adds them.
    """

    ab: np.ndarray = field(repr=False)
    lower_bw: int
    upper_bw: int
    grid: Grid1D
    method: str
    kind: str = "operator"
    spec: OperatorSpec = field(default=None, repr=False, compare=False)
    data_rhs: np.ndarray = field(default=None, repr=False)

    @property
    def dimension(self):
        return self.ab.shape[1]

    def to_dense(self):
        n, ku = self.dimension, self.upper_bw
        a = np.zeros((n, n))
        for r in range(self.ab.shape[0]):
            off = ku - r
            idx = np.arange(max(0, off), min(n, n + off))
            a[idx - off, idx] = self.ab[r, idx]
        return a

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        n, ku = self.dimension, self.upper_bw
        out = np.zeros(n)
        for r in range(self.ab.shape[0]):
            off = ku - r
            idx = np.arange(max(0, off), min(n, n + off))
            out[idx - off] += self.ab[r, idx] * v[idx]
        return out

    def row_sums(self):
        return self.matvec(np.ones(self.dimension))


def _from_triplets(rows, cols, vals, n, bw):
    ab = np.zeros((2 * bw + 1, n))
    np.add.at(ab, (bw + rows - cols, cols), vals)
    return ab


def _fold_endpoints(rows, cols, vals, n_cells):
    """Replace node values at ``y = 0`` and ``y = 1`` by linear extrapolation."""
    keep = (cols != 0) & (cols != n_cells)
    out_r, out_c, out_v = [rows[keep]], [cols[keep]], [vals[keep]]
    for end, first, second in ((0, 1, 2), (n_cells, n_cells - 1, n_cells - 2)):
        hit = cols == end
        out_r += [rows[hit], rows[hit]]
        out_c += [np.full(hit.sum(), first), np.full(hit.sum(), second)]
        out_v += [2.0 * vals[hit], -vals[hit]]
    return np.concatenate(out_r), np.concatenate(out_c), np.concatenate(out_v)


def _stencil(grid, reach):
    """Row/column node indices and trapezoid weights over ``[x_i - reach h, x_i + reach h] cap [0, 1]``."""
    n, h = grid.n_cells, grid.h
    i = np.arange(1, n)[:, None]
    k = np.arange(-reach, reach + 1)[None, :]
    j = i + k
    valid = (j >= 0) & (j <= n)
    lo = np.maximum(i - reach, 0)
    hi = np.minimum(i + reach, n)
    c = np.where((j == lo) | (j == hi), 0.5 * h, h) * valid
    return i, j, k, c, valid


def _kernel_table(spec, grid, moment_correction):
    m, h = grid.m, grid.h
    t = np.abs(np.arange(-m, m + 1)) * h
    w = spec.kernel.closed(t)
    c = np.full(2 * m + 1, h)
    c[[0, -1]] = 0.5 * h
    scale = 1.0
    if moment_correction:
        scale = 2.0 / np.sum(c * w * t * t)
    w = w * scale
    return w, float(np.sum(c * w))


def _layer_geometry(grid, i):
    """Side (+1 left, -1 right, 0 bulk) and distance to the near boundary, per row."""
    x = i * grid.h
    side = np.where(i < grid.m, 1, np.where(i > grid.n_cells - grid.m, -1, 0))
    dist = np.where(side == 1, x, 1.0 - x)
    return side, dist


def assemble(spec, grid, moment_correction=False, comparison=False):
    """Assemble the collocation matrix of ``spec`` on ``grid``.

    Row ``i`` applies composite trapezoid over ``[x_i - delta, x_i + delta] cap [0, 1]``
    to the piecewise-linear reconstruction of the node values (end cells
    extrapolated linearly).  Layer coefficients ``b``, outside mass and the
    Morris coefficient come from discrete kernel moments, so linear data is
    reproduced exactly.  ``moment_correction`` rescales the discrete kernel to
    a second moment of exactly 2; ``comparison`` assembles the comparison
    operator directly (``nonlocal_gradient`` only).
    """
    if not isinstance(spec, OperatorSpec):
        raise InvalidConfig("assemble expects an OperatorSpec")
    if abs(grid.delta - spec.delta) > 1e-12:
        raise GridMismatch(f"grid horizon {grid.delta} differs from operator horizon {spec.delta}")
    if comparison and spec.method != "nonlocal_gradient":
        raise MethodMismatch("comparison operator is defined for nonlocal_gradient only")
    if spec.method == "zhang_shi":
        return _assemble_zs(spec, grid, moment_correction)
    m, h, n = grid.m, grid.h, grid.n_cells
    wtab, s0_full = _kernel_table(spec, grid, moment_correction)
    i, j, k, c, valid = _stencil(grid, m)
    w = wtab[k + m] * np.ones_like(c)
    cw = c * w
    a = cw.sum(axis=1)
    side, dist = _layer_geometry(grid, i[:, 0])
    # first moment over B cap O, oriented away from the near boundary
    m1 = (cw * (j - i) * h).sum(axis=1) * side
    g = np.where(side == 1, spec.boundary_data[0], np.where(side == -1, spec.boundary_data[1], 0.0))
    layer = side != 0

    coef = -cw
    diag = a.copy()
    data = np.zeros(n - 1)
    if spec.method == "nonlocal_gradient":
        b = np.where(layer, 2.0 * m1 / (dist + grid.delta) ** 2, 0.0)
        if comparison:
            coef = -c * np.abs(w - b[:, None])
        else:
            coef = coef + b[:, None] * c
        data = b * g * (dist + grid.delta)
    else:
        outside = np.where(layer, s0_full - a, 0.0)
        extra = outside
        if spec.method == "morris":
            extra = outside + np.where(layer, m1 / dist - outside, 0.0)
        diag = diag + extra
        data = extra * g

    nodes = np.arange(1, n)
    rows = np.concatenate([np.broadcast_to(i, c.shape)[valid], nodes])
    cols = np.concatenate([j[valid], nodes])
    vals = np.concatenate([coef[valid], diag])
    rows, cols, vals = _fold_endpoints(rows, cols, vals, n)
    ab = _from_triplets(rows - 1, cols - 1, vals, n - 1, m)
    return BandSystem(ab, m, m, grid, spec.method, "comparison" if comparison else "operator",
                      spec, data)


def _zs_tables(spec, grid):
    zs, d, h = spec.zs, spec.delta, grid.h
    m2 = 2 * grid.m
    t = np.arange(0, m2 + 1) * h
    cg = np.full(m2 + 1, h)
    cg[[0, -1]] = 0.5 * h
    return zs, d, t, cg


def _assemble_zs(spec, grid, moment_correction):
    zs, d, t, cg = _zs_tables(spec, grid)
    n, h, m2 = grid.n_cells, grid.h, 2 * grid.m
    i, j, k, c, valid = _stencil(grid, m2)
    w = zs.w(np.abs(k) * h) / d**2 * np.ones_like(c)
    if moment_correction:
        full = np.full(2 * m2 + 1, h)
        full[[0, -1]] = 0.5 * h
        kk = np.arange(-m2, m2 + 1) * h
        w = w * 2.0 / np.sum(full * zs.w(np.abs(kk)) / d**2 * kk * kk)
    cw = c * w
    rows = [np.broadcast_to(i, c.shape)[valid]]
    cols = [j[valid]]
    vals = [-cw[valid]]
    diag = cw.sum(axis=1)
    data = np.zeros(n - 1)
    gnorm = d * d * float(zs.wbarbar(0.0))
    gw = cg * zs.wbar(t)
    x = np.arange(1, n) * h
    for side, g in ((1, spec.boundary_data[0]), (-1, spec.boundary_data[1])):
        dist = x if side == 1 else 1.0 - x
        lay = np.nonzero(dist < 2.0 * d - 1e-12)[0]
        for r in lay:
            factor = float(zs.wbar(dist[r])) / gnorm
            nodes = np.arange(0, m2 + 1) if side == 1 else n - np.arange(0, m2 + 1)
            rows.append(np.full(m2 + 1, r + 1))
            cols.append(nodes)
            vals.append(factor * gw)
            data[r] += factor * gw.sum() * g
    rows.append(np.arange(1, n))
    cols.append(np.arange(1, n))
    vals.append(diag)
    rr, cc, vv = _fold_endpoints(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n)
    ab = _from_triplets(rr - 1, cc - 1, vv, n - 1, m2)
    return BandSystem(ab, m2, m2, grid, "zhang_shi", "operator", spec, data)


def load_vector(sys, f):
    """Right-hand side for source ``f`` including Dirichlet data terms."""
    grid = sys.grid
    x = grid.nodes
    if sys.method != "zhang_shi":
        return np.asarray(f(x), dtype=float) + sys.data_rhs
    spec = sys.spec
    zs, d, t, cg = _zs_tables(spec, grid)
    n, h, m2 = grid.n_cells, grid.h, 2 * grid.m
    i, j, k, c, valid = _stencil(grid, m2)
    y = np.clip(j, 0, n) * h
    fy = np.asarray(f(y.ravel()), dtype=float).reshape(y.shape)
    rhs = (c * fy * zs.wbar(np.abs(k) * h)).sum(axis=1)
    gnorm = float(zs.wbarbar(0.0))
    for side, p in ((1, 0.0), (-1, 1.0)):
        dist = x if side == 1 else 1.0 - x
        lay = dist < 2.0 * d - 1e-12
        wb = zs.wbar(dist)
        fp = float(np.asarray(f(np.array([p]))).ravel()[0])
        yy = t if side == 1 else 1.0 - t
        corr = np.sum(cg * np.asarray(f(yy), dtype=float) * zs.wbarbar(t)) / gnorm
        rhs = rhs + np.where(lay, fp * dist * wb - wb * corr, 0.0)
    return rhs + sys.data_rhs


def comparison_matrix(sys):
    """Ostrowski companion: ``|diag|`` on the diagonal, ``-|a_ij|`` elsewhere."""
    if sys.method != "nonlocal_gradient":
        raise MethodMismatch(f"comparison matrix requested for method {sys.method!r}")
    ab = -np.abs(sys.ab)
    ab[sys.upper_bw] = np.abs(sys.ab[sys.upper_bw])
    return replace(sys, ab=ab, kind="comparison")


def positive_offdiagonals(sys):
    """``(row, col)`` pairs of strictly positive off-diagonal entries."""
    a = sys.to_dense()
    np.fill_diagonal(a, 0.0)
    return [tuple(int(v) for v in ij) for ij in np.argwhere(a > 0.0)]


def _lu(a):
    # singular factors are reported through SingularMatrix, not a warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        return sla.lu_factor(a, check_finite=False)


def _norm_inf(sys):
    return np.abs(sys.ab).sum(axis=0).max()


def solve(sys, rhs, full_output=False):
    """Solve ``A u = rhs`` by LU with partial pivoting.

    Dense LAPACK ``getrf`` up to 1024 unknowns, general-band ``gbtrf`` beyond.
    """
    rhs = np.asarray(rhs, dtype=float)
    n, kl, ku = sys.dimension, sys.lower_bw, sys.upper_bw
    anorm = _norm_inf(sys)
    if n <= DENSE_LIMIT:
        lu, piv = _lu(sys.to_dense())
        pivots = np.abs(np.diag(lu))
        if pivots.min() < 1e-14 * anorm:
            raise SingularMatrix(f"pivot {pivots.min():.3g} below 1e-14 * ||A||")
        u = sla.lu_solve((lu, piv), rhs, check_finite=False)
    else:
        work = np.zeros((2 * kl + ku + 1, n))
        work[kl:] = sys.ab
        lub, piv, info = lapack.dgbtrf(work, kl, ku)
        if info > 0:
            raise SingularMatrix(f"zero pivot at row {info}")
        pivots = np.abs(lub[kl + ku])
        if pivots.min() < 1e-14 * anorm:
            raise SingularMatrix(f"pivot {pivots.min():.3g} below 1e-14 * ||A||")
        u, info = lapack.dgbtrs(lub, kl, ku, rhs, piv)
    residual = np.abs(sys.matvec(u) - rhs).max()
    if not full_output:
        return u
    scale = max(np.abs(rhs).max(), np.finfo(float).tiny)
    return u, {"residual": residual, "relative_residual": residual / scale,
               "ok": residual <= 1e-10 * scale}


@dataclass
class PositivityReport:
    is_inverse_nonneg: bool
    min_entry: float
    max_entry: float


def certify_inverse_positivity(sys):
    """Dense-inverse check that the comparison matrix has a nonnegative inverse."""
    if sys.dimension > 2048:
        raise InvalidConfig("dense certification limited to 2048 unknowns")
    if sys.kind != "comparison":
        sys = comparison_matrix(sys)
    a = sys.to_dense()
    lu, piv = _lu(a)
    if np.abs(np.diag(lu)).min() < 1e-14 * _norm_inf(sys):
        raise SingularMatrix("comparison matrix is singular")
    inv = sla.lu_solve((lu, piv), np.eye(sys.dimension), check_finite=False)
    lo, hi = float(inv.min()), float(np.abs(inv).max())
    return PositivityReport(lo >= -1e-11 * hi, lo, hi)


@dataclass
class StabilityRow:
    delta: float
    n_cells: int
    sigma_min: float
    lambda_min_sym: float
    sigma_max: float = 1.0


@dataclass
class StabilityTable:
    rows: list
    uniform: bool
    positive: bool


def stability_constants(sys, comparison_sys=None):
    """Smallest singular value of ``A``, smallest eigenvalue of ``sym(P)``, largest singular value.

    With uniform weights ``h`` the discrete ``L^2`` norm is ``sqrt(h)`` times the
    Euclidean one on both sides, so the weighting cancels in these quantities.
    """
    a = sys.to_dense()
    sv = sla.svdvals(a, check_finite=False)
    p = (comparison_sys if comparison_sys is not None else comparison_matrix(sys)).to_dense()
    lam = float(np.linalg.eigvalsh(0.5 * (p + p.T)).min())
    return float(sv.min()), lam, float(sv.max())


def summarize_stability(rows, spread=0.25):
    """Uniform when each constant's minimum over delta is within ``spread`` of its maximum."""
    sig = np.array([r.sigma_min for r in rows])
    lam = np.array([r.lambda_min_sym for r in rows])
    top = np.array([r.sigma_max for r in rows])
    uniform = bool(sig.min() >= (1 - spread) * sig.max() and lam.min() >= (1 - spread) * lam.max())
    positive = bool(np.all(sig > 1e-12 * top) and np.all(lam > 1e-12 * top))
    return StabilityTable(rows, uniform, positive)


def stability_survey(kernel_profile, delta_list, grid_rule="coupled", m=8, moment_correction=True):
    """Uniform-in-delta stability constants for the nonlocal-gradient operator."""
    from .kernel import ScaledKernel

    rows = []
    for d in delta_list:
        grid = Grid1D.from_rule(d, grid_rule, m)
        if grid.size > 2048:
            raise InvalidConfig(f"delta={d}: {grid.size} unknowns exceed the dense limit")
        spec = OperatorSpec(ScaledKernel(kernel_profile, grid.delta))
        sys = assemble(spec, grid, moment_correction)
        rows.append(StabilityRow(d, grid.n_cells, *stability_constants(sys)))
    return summarize_stability(rows)


def reconstruct(grid, values):
    """Piecewise-linear function through ``values`` at the interior nodes.

    The end cells continue the neighbouring segment, matching the
    extrapolation used by :func:`assemble`.
    """
    v = np.asarray(values, dtype=float)
    n = grid.n_cells
    full = np.empty(n + 1)
    full[1:n] = v
    full[0] = 2.0 * v[0] - v[1]
    full[n] = 2.0 * v[-1] - v[-2]
    xs = np.arange(n + 1) * grid.h

    def u(y):
        return np.interp(y, xs, full)

    return u


def write_matrix_market(sys, path):
    """MatrixMarket coordinate dump of the assembled matrix."""
    from pathlib import Path

    import scipy.sparse as sp
    from scipy.io import mmwrite

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mmwrite(str(path), sp.coo_matrix(sys.to_dense()), comment=f"method={sys.method} kind={sys.kind}")
    # mmwrite can return without writing when the target is unusable
    if not path.exists() and not path.with_suffix(path.suffix + ".mtx").exists():
        raise OSError(f"matrix dump to {path} failed")
