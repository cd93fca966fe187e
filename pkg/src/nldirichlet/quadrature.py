"""Adaptive Gauss-Legendre quadrature used as the continuum oracle."""
import heapq

import numpy as np

from .errors import QuadratureFailure

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(10)
MAX_PANELS = 200_000


def _panel(f, lo, hi):
    mid = 0.5 * (hi - lo)
    y = f(lo + mid * (_NODES + 1.0))
    return mid * np.dot(_WEIGHTS, y)


def _refined(f, p, q, whole, depth):
    m = 0.5 * (p + q)
    left, right = _panel(f, p, m), _panel(f, m, q)
    both = left + right
    err = abs(both - whole)
    # heap keyed on the largest error first
    return (-err, p, q, both, left, right, depth)


def adaptive_gauss(f, a, b, tol=1e-11, rtol=1e-13, max_depth=40, breakpoints=()):
    """Integrate a vectorized callable ``f`` over ``[a, b]``.

    Panels are split at ``breakpoints`` first, so piecewise-smooth
    integrands with known kinks converge immediately.  Afterwards the panel
    with the largest error estimate (10-point rule on the halves against the
    rule on the whole) is bisected until the summed estimate drops below
    ``max(tol, rtol * int |f|)``.
    """
    a = float(a)
    b = float(b)
    if b == a:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    cuts = sorted({a, b, *(float(p) for p in breakpoints if a < p < b)})
    heap = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            heap.append(_refined(f, lo, hi, _panel(f, lo, hi), 0))
    heapq.heapify(heap)
    err = -sum(item[0] for item in heap)
    value = sum(item[3] for item in heap)
    scale = sum(abs(item[4]) + abs(item[5]) for item in heap)
    while err > max(tol, rtol * scale):
        neg, p, q, both, left, right, depth = heapq.heappop(heap)
        if depth >= max_depth or len(heap) > MAX_PANELS:
            raise QuadratureFailure(
                f"no convergence on [{p:.3g}, {q:.3g}] after {depth} bisections "
                f"(error estimate {err:.3g})"
            )
        m = 0.5 * (p + q)
        kids = (_refined(f, p, m, left, depth + 1), _refined(f, m, q, right, depth + 1))
        for kid in kids:
            heapq.heappush(heap, kid)
        err += neg - kids[0][0] - kids[1][0]
        value += kids[0][3] + kids[1][3] - both
        scale += sum(abs(k[4]) + abs(k[5]) for k in kids) - abs(left) - abs(right)
        if err <= max(tol, rtol * scale):
            # drop accumulated rounding in the running sums before the final test
            err = -sum(item[0] for item in heap)
            value = sum(item[3] for item in heap)
    return sign * value
