from dataclasses import replace

import numpy as np
import pytest
import scipy.io
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_spec
from nldirichlet.bc1d import a_delta, apply_operator
from nldirichlet.discrete1d import (DENSE_LIMIT, BandSystem, Grid1D, StabilityRow, assemble,
                                    certify_inverse_positivity, comparison_matrix, load_vector,
                                    positive_offdiagonals, reconstruct, solve,
                                    stability_constants, stability_survey, summarize_stability,
                                    write_matrix_market)
from nldirichlet.errors import (GridMismatch, InvalidConfig, LayerOverlap, MethodMismatch,
                                SingularMatrix)
from nldirichlet.kernel import builtin_constant

OPERATOR_METHODS = ["nonlocal_gradient", "constant_extension", "morris"]


def system(profile, n_cells, m, method="nonlocal_gradient", data=(0.0, 0.0), **kw):
    grid = Grid1D(n_cells, m)
    return assemble(make_spec(profile, grid.delta, method, data), grid, **kw)


class TestGrid:
    def test_basic(self):
        g = Grid1D(40, 4)
        assert g.h == 1 / 40
        assert g.delta == pytest.approx(0.1)
        assert g.size == 39
        assert g.nodes[0] == pytest.approx(0.025) and g.nodes[-1] == pytest.approx(0.975)

    def test_rules(self):
        assert Grid1D.from_rule(0.1, "coupled", 8) == Grid1D(80, 8)
        r = Grid1D.from_rule(0.025, "resolved")
        assert r.delta == pytest.approx(0.025)
        assert r.h <= 0.025**1.5
        with pytest.raises(InvalidConfig):
            Grid1D.from_rule(0.1, "random")

    def test_errors(self):
        with pytest.raises(GridMismatch):
            Grid1D(40, 1)
        with pytest.raises(LayerOverlap):
            Grid1D(10, 5)
        with pytest.raises(GridMismatch):
            Grid1D.for_delta(0.1, 45)
        assert Grid1D.for_delta(0.1, 50) == Grid1D(50, 5)

    def test_spec_grid_mismatch(self, constant):
        with pytest.raises(GridMismatch):
            assemble(make_spec(constant, 0.1), Grid1D(40, 3))


class TestAssembly:
    @pytest.mark.parametrize("method", OPERATOR_METHODS)
    def test_seven_by_seven_oracle(self, constant, method):
        grid = Grid1D(8, 2)
        spec = make_spec(constant, grid.delta, method)
        a = assemble(spec, grid).to_dense()
        assert a.shape == (7, 7)
        ref = np.empty((7, 7))
        for j in range(7):
            u = reconstruct(grid, np.eye(7)[j])
            ref[:, j] = [apply_operator(spec, u, x) for x in grid.nodes]
        assert np.abs(a - ref).max() <= 1e-12 * np.abs(ref).max()

    def test_interior_rows(self, builtin):
        sys = system(builtin, 80, 8)
        a = sys.to_dense()
        interior = slice(8, 71)
        assert np.abs(sys.row_sums()[interior]).max() <= 1e-12 * a.max()
        spec = make_spec(builtin, 0.1)
        # trapezoid of a_delta is exact for both built-ins; the self term cancels
        expected = a_delta(spec, 0.5) - sys.grid.h * spec.kernel.eval(0.0)
        assert np.allclose(np.diag(a)[interior], expected, rtol=1e-12)

    @pytest.mark.parametrize("method", ["nonlocal_gradient", "morris"])
    def test_linear_exactness(self, builtin, method):
        sys = system(builtin, 80, 8, method, data=(0.0, 1.0))
        x = sys.grid.nodes
        resid = sys.matvec(x) - load_vector(sys, lambda y: 0 * y)
        assert np.abs(resid).max() <= 1e-9

    def test_bandwidth(self, constant):
        for method in OPERATOR_METHODS:
            sys = system(constant, 80, 8, method)
            assert sys.lower_bw <= 9 and sys.upper_bw <= 9
        zs = system(constant, 80, 4, "zhang_shi")
        assert zs.lower_bw == 8

    def test_translation_invariance(self, builtin):
        a = system(builtin, 100, 10).to_dense()
        rows = [a[i, i - 10:i + 11] for i in range(10, 89)]
        assert all(np.array_equal(rows[0], r) for r in rows[1:])

    def test_mirror_symmetry(self, constant):
        a = system(constant, 80, 8).to_dense()
        assert np.allclose(a, a[::-1, ::-1], rtol=0, atol=1e-10 * a.max())

    @pytest.mark.parametrize("profile,method", [
        ("constant", "nonlocal_gradient"), ("linear", "nonlocal_gradient"),
        ("constant", "constant_extension"), ("constant", "morris"),
        ("linear", "morris")])
    def test_rows_match_oracle_second_order(self, profile, method):
        from nldirichlet.kernel import kernel_from_name

        k = kernel_from_name(profile)
        u = lambda y: np.sin(np.pi * y) * np.exp(y)
        probes = np.array([0.0125, 0.025, 0.05, 0.0875, 0.3, 0.95])
        errs = []
        # n = 80 is still pre-asymptotic for the probes near the far wall
        ns = [160, 320, 640, 1280]
        for n in ns:
            grid = Grid1D.for_delta(0.1, n)
            spec = make_spec(k, 0.1, method)
            sys = assemble(spec, grid)
            av = sys.matvec(u(grid.nodes))
            idx = np.rint(probes * n).astype(int) - 1
            ref = np.array([apply_operator(spec, u, x) for x in grid.nodes[idx]])
            errs.append(np.abs(av[idx] - ref).max())
        slope = np.polyfit(np.log(1.0 / np.array(ns)), np.log(errs), 1)[0]
        assert slope >= 1.8
        assert np.log2(errs[-2] / errs[-1]) >= 1.9


class TestComparison:
    @pytest.mark.parametrize("delta,n", [(0.1, 80), (0.05, 200)])
    def test_matches_direct_assembly(self, builtin, delta, n):
        grid = Grid1D.for_delta(delta, n)
        spec = make_spec(builtin, delta)
        direct = assemble(spec, grid, comparison=True).to_dense()
        via = comparison_matrix(assemble(spec, grid)).to_dense()
        assert np.abs(direct - via).max() <= 1e-12 * np.abs(direct).max()

    def test_idempotent(self, linear):
        p = comparison_matrix(system(linear, 80, 8))
        assert np.array_equal(comparison_matrix(p).ab, p.ab)

    def test_constant_interior_unchanged(self, constant):
        sys = system(constant, 80, 8)
        a, p = sys.to_dense(), comparison_matrix(sys).to_dense()
        assert np.array_equal(a[8:71], p[8:71])
        assert positive_offdiagonals(sys) == []

    def test_linear_sign_flips(self, linear):
        sys = system(linear, 80, 8)
        flips = positive_offdiagonals(sys)
        assert flips
        rows = {r for r, _ in flips}
        assert all(r < 8 or r > 70 for r in rows)
        assert positive_offdiagonals(comparison_matrix(sys)) == []

    def test_method_mismatch(self, constant):
        with pytest.raises(MethodMismatch):
            comparison_matrix(system(constant, 80, 8, "morris"))
        with pytest.raises(MethodMismatch):
            system(constant, 80, 8, "morris", comparison=True)


class TestSolve:
    @pytest.mark.parametrize("n,m", [(80, 8), (1200, 12)])
    def test_round_trip(self, linear, rng, n, m):
        sys = system(linear, n, m)
        assert (sys.dimension > DENSE_LIMIT) == (n == 1200)
        v = rng.standard_normal(sys.dimension)
        u, info = solve(sys, sys.matvec(v), full_output=True)
        assert np.abs(u - v).max() <= 1e-9
        assert info["ok"]

    def test_banded_matches_dense(self, constant, rng):
        sys = system(constant, 1100, 110)
        rhs = rng.standard_normal(sys.dimension)
        from scipy.linalg import solve as dense_solve

        assert np.allclose(solve(sys, rhs), dense_solve(sys.to_dense(), rhs), atol=1e-10)

    def test_zero_rhs(self, constant):
        sys = system(constant, 80, 8)
        assert np.array_equal(solve(sys, np.zeros(sys.dimension)), np.zeros(sys.dimension))

    @pytest.mark.parametrize("method", ["nonlocal_gradient", "morris"])
    def test_quadratic_second_order(self, constant, method):
        errs = []
        for d in (0.1, 0.05):
            grid = Grid1D.from_rule(d, "resolved")
            sys = assemble(make_spec(constant, d, method), grid, moment_correction=True)
            u = solve(sys, load_vector(sys, lambda y: 2 + 0 * y))
            x = grid.nodes
            errs.append(np.abs(u - x * (1 - x)).max())
        assert errs[0] <= 0.1**2
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.25)

    def test_singular(self, constant):
        sys = system(constant, 80, 8)
        ab = sys.ab.copy()
        ab[:, 5] = 0.0
        with pytest.raises(SingularMatrix):
            solve(replace(sys, ab=ab), np.ones(sys.dimension))
        big = system(constant, 1100, 110)
        ab = big.ab.copy()
        ab[:, 500] = 0.0
        with pytest.raises(SingularMatrix):
            solve(replace(big, ab=ab), np.ones(big.dimension))


class TestPositivity:
    @pytest.mark.parametrize("name", ["constant", "linear"])
    def test_certify(self, name):
        from nldirichlet.kernel import kernel_from_name

        rep = certify_inverse_positivity(system(kernel_from_name(name), 200, 20))
        assert rep.is_inverse_nonneg
        assert rep.min_entry >= -1e-11 * rep.max_entry

    def test_corrupted_row(self, constant):
        p = comparison_matrix(system(constant, 200, 20))
        ab = p.ab.copy()
        # strong positive coupling of row 100 to its neighbour breaks the M-matrix structure
        ab[p.upper_bw - 1, 101] = 5.0 * ab[p.upper_bw, 100]
        rep = certify_inverse_positivity(replace(p, ab=ab))
        assert not rep.is_inverse_nonneg

    def test_size_limit(self, constant):
        with pytest.raises(InvalidConfig):
            certify_inverse_positivity(system(constant, 2100, 210))

    @pytest.mark.parametrize("name", ["constant", "linear"])
    def test_comparison_principle(self, name, rng):
        from nldirichlet.kernel import kernel_from_name

        p = comparison_matrix(system(kernel_from_name(name), 200, 20))
        for _ in range(100):
            g = rng.uniform(0, 1, p.dimension) * (rng.uniform(size=p.dimension) < 0.5)
            assert solve(p, g).min() >= -1e-10

    @pytest.mark.parametrize("name", ["constant", "linear"])
    def test_domination(self, name, rng):
        from nldirichlet.kernel import kernel_from_name

        sys = system(kernel_from_name(name), 400, 40)
        p = comparison_matrix(sys)
        assert np.array_equal(np.abs(sys.ab), np.abs(p.ab))
        for _ in range(50):
            f = rng.standard_normal(sys.dimension)
            lhs = np.abs(solve(sys, f)).max()
            rhs = np.abs(solve(p, np.abs(f))).max()
            assert lhs <= 2.0 * rhs


class TestStability:
    def test_uniform_survey(self, constant):
        table = stability_survey(constant, [0.1, 0.05, 0.025], grid_rule="resolved")
        assert table.uniform and table.positive
        assert all(r.sigma_min > 0 and r.lambda_min_sym > 0 for r in table.rows)
        assert table.rows[0].lambda_min_sym > 0

    def test_dense_svd_oracle(self, constant):
        sys = system(constant, 80, 8)
        smin, lam, smax = stability_constants(sys)
        sv = np.linalg.svd(sys.to_dense(), compute_uv=False)
        assert smin == pytest.approx(sv.min(), rel=1e-10)
        assert smax == pytest.approx(sv.max(), rel=1e-10)

    def test_zero_row_control(self, constant):
        sys = system(constant, 80, 8)
        a = sys.to_dense()
        a[40] = 0.0
        ab = np.zeros_like(sys.ab)
        for r in range(ab.shape[0]):
            off = sys.upper_bw - r
            idx = np.arange(max(0, off), min(sys.dimension, sys.dimension + off))
            ab[r, idx] = a[idx - off, idx]
        bad = replace(sys, ab=ab)
        smin, lam, smax = stability_constants(bad)
        assert smin < 1e-10 * smax
        good = StabilityRow(0.1, 80, *stability_constants(sys))
        table = summarize_stability([good, StabilityRow(0.05, 160, smin, lam, smax)])
        assert not table.positive
        assert not table.uniform


class TestReconstruct:
    @given(st.floats(-2, 2), st.floats(-2, 2))
    @settings(max_examples=25, deadline=None)
    def test_linear_reproduced(self, a, b):
        grid = Grid1D(40, 4)
        u = reconstruct(grid, a + b * grid.nodes)
        y = np.linspace(0, 1, 33)
        assert np.allclose(u(y), a + b * y, atol=1e-12)


def test_matrix_market_dump(constant, tmp_path):
    sys = system(constant, 40, 4)
    path = tmp_path / "sub" / "a.mtx"
    write_matrix_market(sys, path)
    back = scipy.io.mmread(str(path)).toarray()
    assert np.allclose(back, sys.to_dense(), rtol=1e-15)


def test_band_system_is_frozen(constant):
    sys = system(constant, 40, 4)
    assert isinstance(sys, BandSystem)
    with pytest.raises(Exception):
        sys.method = "morris"


def test_builtin_default_is_raw_trapezoid():
    # raw and corrected assemblies differ only by the kernel scale
    k = builtin_constant()
    raw = system(k, 80, 8).to_dense()
    fix = system(k, 80, 8, moment_correction=True).to_dense()
    ratio = fix[40, 40] / raw[40, 40]
    assert ratio != 1.0
    assert np.allclose(fix[8:71], ratio * raw[8:71])
