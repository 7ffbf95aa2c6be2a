import math

import numpy as np
import pytest

from cutofflab.dirichlet import (
    solve_dirichlet,
    uniform_first_derivative,
    uniform_second_derivative,
)


def _order(errors):
    return math.log2(errors[0] / errors[1])


class TestDirichlet:
    def test_exponential_solution(self):
        # y'' - y = 0, y(0)=1, y(1)=e^-1 -> y = e^-x
        x = np.linspace(0, 1, 401)
        sol = solve_dirichlet(x, 0.0, 1.0, 0.0, 1.0, math.exp(-1))
        assert np.max(np.abs(sol.values - np.exp(-x))) < 1e-6
        assert sol.m_matrix

    def test_second_order_convergence_with_drift(self):
        # y = sin(x) solves y'' + 2 y' - y = -2 sin x + 2 cos x
        errs = []
        for n in (101, 201):
            x = np.linspace(0, 2, n)
            sol = solve_dirichlet(x, 2.0, 1.0, -2 * np.sin(x) + 2 * np.cos(x), 0.0, math.sin(2))
            errs.append(np.max(np.abs(sol.values - np.sin(x))))
        assert _order(errs) == pytest.approx(2.0, abs=0.1)

    def test_robin_end(self):
        # y = e^-x has y' = -y at the right end
        x = np.linspace(0, 3, 1201)
        sol = solve_dirichlet(x, 0.0, 1.0, 0.0, 1.0, robin=-1.0)
        assert np.max(np.abs(sol.values - np.exp(-x))) < 1e-5

    def test_sign_pattern_flag(self):
        x = np.linspace(0, 1, 11)
        assert not solve_dirichlet(x, 100.0, 0.0, 0.0, 1.0).m_matrix

    def test_bad_nodes(self):
        with pytest.raises(ValueError):
            solve_dirichlet(np.array([0.0, 1.0]), 0, 0, 0, 1.0)


class TestUniformStencils:
    @pytest.mark.parametrize("fn", [uniform_first_derivative, uniform_second_derivative])
    def test_fourth_order_interior(self, fn):
        errs = []
        for n in (81, 161):
            x, dx = np.linspace(0, 2, n, retstep=True)
            exact = np.cos(x) if fn is uniform_first_derivative else -np.sin(x)
            errs.append(np.max(np.abs(fn(np.sin(x), dx) - exact)[2:-2]))
        assert _order(errs) == pytest.approx(4.0, abs=0.15)

    def test_exact_on_quadratics(self):
        x, dx = np.linspace(-1, 1, 21, retstep=True)
        y = 3 * x**2 - x + 2
        assert np.allclose(uniform_first_derivative(y, dx), 6 * x - 1, atol=1e-11)
        assert np.allclose(uniform_second_derivative(y, dx), 6.0, atol=1e-9)
