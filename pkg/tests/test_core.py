"""Grid, kernel, convolution and measure behavior."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from volterra.core import (
    ConstantOne,
    GammaKernel,
    Grid,
    SignedMeasure,
    apply_step_moments,
    convolve,
    convolve_measure,
    cross_power_moment,
    kernel_eval,
    kernel_laplace,
    kernel_step_moments,
    power_step_moments,
)


class TestGrid:
    def test_basic_layout(self):
        g = Grid(t_max=2.0, n=4)
        assert g.dt == 0.5
        assert_allclose(g.nodes, [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_from_nodes_roundtrip(self):
        g = Grid(t_max=3.0, n=7)
        g2 = Grid.from_nodes(g.nodes)
        assert g2.same_as(g)

    def test_from_nodes_rejects_nonuniform(self):
        with pytest.raises(ValueError, match="uniform"):
            Grid.from_nodes([0.0, 1.0, 3.0])

    def test_from_nodes_rejects_offset_start(self):
        with pytest.raises(ValueError, match="starting at 0"):
            Grid.from_nodes([1.0, 2.0, 3.0])

    @pytest.mark.parametrize("t_max,n", [(0.0, 4), (-1.0, 4), (1.0, 0)])
    def test_invalid_parameters(self, t_max, n):
        with pytest.raises(ValueError):
            Grid(t_max=t_max, n=n)

    def test_require_same(self):
        a = Grid(1.0, 10)
        b = Grid(1.0, 20)
        with pytest.raises(ValueError, match="different grid"):
            a.require_same(b)

    @given(n=st.integers(1, 400), t_max=st.floats(1e-3, 1e3))
    @settings(max_examples=30, deadline=None)
    def test_from_nodes_roundtrip_property(self, n, t_max):
        g = Grid(t_max=t_max, n=n)
        assert Grid.from_nodes(g.nodes).same_as(g)


class TestGammaKernel:
    def test_pointwise_formula(self):
        k = GammaKernel(b=2.0, alpha=0.8, rho=0.5)
        t = 1.7
        expected = 2.0 * math.exp(-0.5 * t) * t ** (-0.2) / gamma_fn(0.8)
        assert_allclose(k(t), expected, rtol=1e-14)
        assert_allclose(kernel_eval(k, t), expected, rtol=1e-14)

    def test_alpha_one_is_exponential(self):
        k = GammaKernel(b=1.0, alpha=1.0, rho=2.0)
        t = np.linspace(0.0, 3.0, 7)
        assert_allclose(k(t), np.exp(-2.0 * t), rtol=1e-14)

    @pytest.mark.parametrize(
        "b,alpha,rho",
        [(1.0, 0.5, 0.0), (1.0, 1.6, 0.0), (0.0, 0.8, 0.0), (-1.0, 0.8, 0.0), (1.0, 0.8, -0.1)],
    )
    def test_invalid_parameters(self, b, alpha, rho):
        with pytest.raises(ValueError):
            GammaKernel(b=b, alpha=alpha, rho=rho)

    def test_singular_kernel_rejects_origin(self):
        k = GammaKernel(1.0, 0.7)
        with pytest.raises(ValueError, match="singular"):
            k(0.0)
        # continuous at 0 once alpha >= 1
        assert GammaKernel(3.0, 1.0)(0.0) == 3.0

    def test_laplace_transform(self):
        k = GammaKernel(b=1.5, alpha=0.9, rho=0.3)
        s = 2.0
        assert_allclose(k.laplace(s), 1.5 * (s + 0.3) ** -0.9, rtol=1e-14)
        assert_allclose(kernel_laplace(k, np.array([1.0, 2.0])), 1.5 * (np.array([1.0, 2.0]) + 0.3) ** -0.9)
        with pytest.raises(ValueError, match="s > 0"):
            k.laplace(0.0)

    def test_laplace_matches_quadrature(self):
        k = GammaKernel(b=1.0, alpha=0.75, rho=1.2)
        val, err = quad(k, 0.0, 80.0, weight="cos", wvar=0.0, limit=400)
        assert_allclose(k.laplace(1e-9), val, rtol=1e-7)

    def test_hurst_offset(self):
        assert_allclose(GammaKernel(1.0, 0.9).hurst, 0.4, rtol=1e-15)

    def test_antiderivative_against_quadrature(self):
        k = GammaKernel(b=2.0, alpha=0.6, rho=1.5)
        for t in (0.3, 2.0, 10.0):
            ref, _ = quad(k, 0.0, t, points=[0.0], limit=200)
            assert_allclose(k.antiderivative(t), ref, rtol=1e-9)
        assert k.antiderivative(0.0) == 0.0

    @given(
        alpha=st.floats(0.55, 1.5),
        rho=st.floats(0.0, 3.0),
        t=st.floats(0.01, 50.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_antiderivative_monotone(self, alpha, rho, t):
        k = GammaKernel(1.0, alpha, rho)
        assert 0.0 < k.antiderivative(t) <= k.antiderivative(2.0 * t) + 1e-15


class TestConstantOne:
    def test_behaviors(self):
        k = ConstantOne()
        assert k(3.7) == 1.0
        assert_allclose(k(np.zeros(4)), np.ones(4))
        assert_allclose(k.laplace(4.0), 0.25)
        assert k.antiderivative(2.5) == 2.5
        with pytest.raises(ValueError):
            k.laplace(-1.0)


class TestStepMoments:
    def test_m0_telescopes_to_antiderivative(self):
        k = GammaKernel(b=1.3, alpha=0.7, rho=0.8)
        grid = Grid(4.0, 57)
        m0, _ = kernel_step_moments(k, grid)
        assert_allclose(np.cumsum(m0), k.antiderivative(grid.nodes[1:]), rtol=1e-12)

    @pytest.mark.parametrize("rho", [0.0, 1.1])
    def test_moments_match_quadrature(self, rho):
        k = GammaKernel(b=1.0, alpha=0.65, rho=rho)
        grid = Grid(2.0, 8)
        m0, m1 = kernel_step_moments(k, grid)
        t = grid.nodes
        for j in (0, 3, 7):
            r0, _ = quad(k, t[j], t[j + 1], points=[0.0] if j == 0 else None)
            r1, _ = quad(
                lambda s: k(s) * (s - t[j]) / grid.dt,
                t[j],
                t[j + 1],
                points=[0.0] if j == 0 else None,
            )
            assert_allclose(m0[j], r0, rtol=1e-9)
            assert_allclose(m1[j], r1, rtol=1e-9)

    def test_product_integration_exact_on_linear(self):
        # piecewise-linear samples of an affine function: product integration
        # must reproduce the closed-form convolution to rounding error
        k = GammaKernel(b=2.0, alpha=0.75, rho=0.0)
        grid = Grid(3.0, 11)
        t = grid.nodes
        g = 0.4 + 1.7 * t
        a = k.alpha
        exact = 2.0 * (0.4 * t**a / gamma_fn(a + 1.0) + 1.7 * t ** (a + 1.0) / gamma_fn(a + 2.0))
        assert_allclose(convolve(k, g, grid), exact, rtol=1e-13, atol=1e-15)

    def test_power_step_moments_match_untilted_kernel(self):
        grid = Grid(1.5, 9)
        m0p, m1p = power_step_moments(0.8, grid)
        m0k, m1k = kernel_step_moments(GammaKernel(1.0, 0.8, 0.0), grid)
        assert_allclose(m0p, m0k, rtol=1e-13)
        assert_allclose(m1p, m1k, rtol=1e-13)
        with pytest.raises(ValueError):
            power_step_moments(1.7, grid)

    def test_apply_rejects_bad_length(self):
        grid = Grid(1.0, 5)
        m0, m1 = kernel_step_moments(GammaKernel(1.0, 0.9), grid)
        with pytest.raises(ValueError, match="sample count"):
            apply_step_moments(m0, m1, np.ones(4))


class TestConvolve:
    def test_kernel_by_ones_is_antiderivative(self):
        k = GammaKernel(b=1.0, alpha=0.6, rho=2.0)
        grid = Grid(5.0, 64)
        out = convolve(k, np.ones(grid.n + 1), grid)
        assert_allclose(out, k.antiderivative(grid.nodes), rtol=1e-12)

    def test_two_kernels_semigroup(self):
        # matching tilt rates compose into a single gamma kernel
        f = GammaKernel(b=1.2, alpha=0.7, rho=0.9)
        g = GammaKernel(b=0.5, alpha=0.8, rho=0.9)
        grid = Grid(2.0, 16)
        t = grid.nodes
        expected = np.zeros_like(t)
        expected[1:] = (
            1.2 * 0.5 * np.exp(-0.9 * t[1:]) * t[1:] ** 0.5 / gamma_fn(1.5)
        )
        assert_allclose(convolve(f, g, grid), expected, rtol=1e-13)

    def test_two_kernels_distinct_tilts(self):
        f = GammaKernel(b=1.0, alpha=0.7, rho=0.0)
        g = GammaKernel(b=1.0, alpha=0.9, rho=1.3)
        grid = Grid(1.5, 6)
        out = convolve(f, g, grid)
        for idx in (2, 6):
            tk = grid.nodes[idx]
            ref, _ = quad(lambda s: f(s) * g(tk - s), 0.0, tk, points=[0.0, tk], limit=200)
            assert_allclose(out[idx], ref, rtol=1e-9)

    def test_constant_by_kernel(self):
        k = GammaKernel(1.0, 0.8, 0.5)
        grid = Grid(2.0, 10)
        assert_allclose(convolve(ConstantOne(), k, grid), k.antiderivative(grid.nodes))
        assert_allclose(convolve(ConstantOne(), ConstantOne(), grid), grid.nodes)

    def test_sampled_by_sampled_trapezoid(self):
        # (e^t * e^t)(t) = t e^t; trapezoid error is O(dt^2)
        grid = Grid(1.0, 400)
        t = grid.nodes
        out = convolve(np.exp(t), np.exp(t), grid)
        assert_allclose(out, t * np.exp(t), atol=4e-6)

    def test_sampled_rejects_nonfinite(self):
        grid = Grid(1.0, 4)
        bad = np.array([np.inf, 1.0, 1.0, 1.0, 1.0])
        with pytest.raises(ValueError, match="finite"):
            convolve(bad, np.ones(5), grid)

    def test_sample_count_mismatch(self):
        grid = Grid(1.0, 4)
        with pytest.raises(ValueError, match="sample count"):
            convolve(GammaKernel(1.0, 0.9), np.ones(3), grid)

    @given(
        alpha=st.floats(0.55, 1.45),
        rho=st.floats(0.0, 2.0),
        c0=st.floats(-2.0, 2.0),
        c1=st.floats(-2.0, 2.0),
    )
    @settings(max_examples=25, deadline=None)
    def test_linearity_property(self, alpha, rho, c0, c1):
        k = GammaKernel(1.0, alpha, rho)
        grid = Grid(2.0, 24)
        t = grid.nodes
        g1, g2 = np.sin(t), np.cos(2.0 * t)
        lhs = convolve(k, c0 * g1 + c1 * g2, grid)
        rhs = c0 * convolve(k, g1, grid) + c1 * convolve(k, g2, grid)
        assert_allclose(lhs, rhs, atol=1e-12)


class TestSignedMeasure:
    def test_atoms_sorted_and_mass(self):
        mu = SignedMeasure(locations=[2.0, 0.5], weights=[-1.0, 3.0])
        assert_allclose(mu.locations, [0.5, 2.0])
        assert_allclose(mu.weights, [3.0, -1.0])
        assert_allclose(mu.total_mass(), 2.0)
        assert_allclose(mu.total_mass(t_max=1.0), 3.0)
        assert_allclose(mu.total_variation(), 4.0)

    def test_point_mass(self):
        mu = SignedMeasure.point_mass(-2.5)
        assert mu.locations[0] == 0.0
        assert mu.total_mass() == -2.5
        assert mu.is_nonpositive()

    def test_density_needs_grid(self):
        mu = SignedMeasure(density=lambda t: np.exp(-t))
        with pytest.raises(ValueError, match="grid"):
            mu.total_mass()
        grid = Grid(40.0, 4000)
        assert_allclose(mu.total_mass(grid=grid), 1.0, atol=1e-4)
        assert_allclose(mu.total_variation(grid=grid), 1.0, atol=1e-4)

    def test_mismatched_atom_arrays(self):
        with pytest.raises(ValueError, match="equal length"):
            SignedMeasure(locations=[0.0, 1.0], weights=[1.0])

    def test_negative_locations_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            SignedMeasure(locations=[-1.0], weights=[1.0])

    def test_is_nonpositive_with_density(self):
        neg = SignedMeasure(density=lambda t: -np.ones_like(t))
        pos = SignedMeasure(density=lambda t: np.sin(t))
        assert neg.is_nonpositive()
        assert not pos.is_nonpositive()
        assert not SignedMeasure.point_mass(0.1).is_nonpositive()


class TestConvolveMeasure:
    def test_atom_at_origin_recovers_kernel(self):
        k = GammaKernel(1.0, 0.8, 0.4)
        grid = Grid(2.0, 8)
        mu = SignedMeasure.point_mass(2.0)
        out = convolve_measure(k, mu, grid)
        assert out[0] == 0.0
        assert_allclose(out[1:], 2.0 * k(grid.nodes[1:]), rtol=1e-13)

    def test_open_interval_excludes_atom_at_node(self):
        # an atom exactly at t_k acts only strictly after t_k
        k = GammaKernel(1.0, 1.0, 0.0)
        grid = Grid(2.0, 4)
        mu = SignedMeasure.point_mass(1.0, location=1.0)
        out = convolve_measure(k, mu, grid)
        assert out[2] == 0.0  # node t = 1.0
        assert out[3] > 0.0

    def test_atoms_beyond_horizon_warn(self):
        k = GammaKernel(1.0, 1.0)
        grid = Grid(1.0, 4)
        mu = SignedMeasure(locations=[0.0, 5.0], weights=[1.0, 1.0])
        with pytest.warns(UserWarning, match="ignored"):
            convolve_measure(k, mu, grid)

    def test_density_part_matches_convolve(self):
        k = GammaKernel(1.0, 0.7, 0.2)
        grid = Grid(1.0, 32)
        dens = lambda t: np.cos(t)
        mu = SignedMeasure(density=dens)
        direct = convolve(k, dens(grid.nodes), grid)
        assert_allclose(convolve_measure(k, mu, grid), direct, rtol=1e-13)

    def test_complex_weights_propagate(self):
        k = GammaKernel(1.0, 0.9)
        grid = Grid(1.0, 4)
        mu = SignedMeasure(locations=[0.0], weights=[1.0 + 2.0j])
        out = convolve_measure(k, mu, grid)
        assert np.iscomplexobj(out)
        assert_allclose(out[1:], (1.0 + 2.0j) * k(grid.nodes[1:]))


def test_cross_power_moment_matches_quadrature():
    t = np.array([0.5, 1.0, 4.0])
    delta = 0.25
    got = cross_power_moment(0.7, 0.9, t, delta)
    for i, ti in enumerate(t):
        ref, _ = quad(
            lambda u: (ti - u) ** -0.3 * u ** -0.1, 0.0, delta, points=[0.0], limit=200
        )
        assert_allclose(got[i], ref, rtol=1e-9)
