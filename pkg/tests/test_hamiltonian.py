import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as nps
from scipy.linalg import expm

from hamiltonian.core import (CotangentPoint, eval_hamiltonian, hamiltonian_rhs, rhs_and_jacobian_batch, rhs_batch,
                              rhs_jacobian_batch)
from hamiltonian.flow import energy_direct, energy_invariant, flow, flow_jacobian, path_to_csv
from model.builtins import build_builtin
from model.loader import load_system
from utils.errors import AccuracyError, DivergedFlowError, NonFiniteInputError

phase = nps.arrays(np.float64, (6,), elements=st.floats(-2, 2))


class TestHamiltonian:

    def test_ou_value(self):
        system = build_builtin('ou1d', {'beta': 0.5, 'gamma': 1.0})
        assert eval_hamiltonian(system, CotangentPoint(x=[1.0], p=[2.0])) == pytest.approx(3.0)

    @pytest.mark.parametrize('name', ['ou1d', 'langevin', 'flatmetric', 'heisenberg'])
    def test_zero_covector(self, name):
        system = build_builtin(name)
        point = CotangentPoint(x=np.linspace(0.3, 1.1, system.d), p=np.zeros(system.d))
        assert eval_hamiltonian(system, point) == 0.0
        np.testing.assert_array_equal(hamiltonian_rhs(system, point)[system.d:], 0.0)

    def test_heisenberg_value(self, heisenberg):
        point = CotangentPoint(x=[0, 0, 0], p=[1, 0, math.pi])
        assert eval_hamiltonian(heisenberg, point) == pytest.approx(0.5)

    def test_langevin_equations(self, langevin):
        rhs = hamiltonian_rhs(langevin, CotangentPoint(x=[0.4, -0.7], p=[1.5, 2.5]))
        np.testing.assert_allclose(rhs, [-0.7, 2.5, 0.0, -1.5])

    def test_heisenberg_vertical_covector_is_conserved(self, heisenberg):
        rhs = hamiltonian_rhs(heisenberg, CotangentPoint(x=[0.3, -1.2, 0.5], p=[0.7, 0.1, 2.0]))
        assert rhs[5] == 0.0

    def test_non_finite_point(self):
        with pytest.raises(NonFiniteInputError):
            CotangentPoint(x=[np.inf], p=[0.0])

    @given(z=phase)
    @settings(max_examples=40, deadline=None)
    def test_rhs_jacobian_matches_finite_differences(self, z):
        system = load_system({
            'dims': {'d': 3, 'm': 2, 'l': 1},
            'fields': [
                [{'component': 0, 'exponents': [0, 1, 1], 'coefficient': 0.5}],
                [{'component': 0, 'exponents': [0, 0, 0], 'coefficient': 1.0},
                 {'component': 2, 'exponents': [2, 0, 0], 'coefficient': 1.0}],
                [{'component': 1, 'exponents': [0, 0, 0], 'coefficient': 1.0},
                 {'component': 2, 'exponents': [1, 1, 0], 'coefficient': -0.5}],
            ],
        })
        h = 1e-6
        numeric = np.stack([(rhs_batch(system, z + h * e) - rhs_batch(system, z - h * e)) / (2 * h)
                            for e in np.eye(6)], axis=1)
        np.testing.assert_allclose(rhs_jacobian_batch(system, z), numeric, atol=1e-6)

    @given(Z=nps.arrays(np.float64, (5, 6), elements=st.floats(-2, 2)))
    @settings(max_examples=20, deadline=None)
    def test_fused_rhs_and_jacobian_match_the_separate_ones(self, Z):
        system = build_builtin('heisenberg')
        rhs, jacobian = rhs_and_jacobian_batch(system, Z)
        assert rhs.shape == (5, 6) and jacobian.shape == (5, 6, 6)
        np.testing.assert_allclose(rhs, rhs_batch(system, Z), atol=1e-14)
        for z, jac in zip(Z, jacobian):
            np.testing.assert_allclose(jac, rhs_jacobian_batch(system, z), atol=1e-14)


class TestFlow:

    def test_langevin_backward(self, langevin):
        path = flow(langevin, CotangentPoint(x=[1.0, 1.5], p=[3.0, 0.0]), 1.0, 'backward', 512)
        np.testing.assert_allclose(path.x[0], [0.0, 0.0], atol=1e-10)
        np.testing.assert_allclose(path.p[0], [3.0, 3.0], atol=1e-10)
        np.testing.assert_allclose(path.x[-1], [1.0, 1.5])

    def test_zero_covector_without_drift_stays_put(self):
        system = build_builtin('flatmetric', {'theta': 0.5})
        path = flow(system, CotangentPoint(x=[0.2, -0.4], p=[0.0, 0.0]), 2.0)
        np.testing.assert_array_equal(path.x, np.broadcast_to([0.2, -0.4], path.x.shape))

    def test_heisenberg_half_circle(self, heisenberg):
        path = flow(heisenberg, CotangentPoint(x=[0, 0, 0], p=[1, 0, math.pi]), 1.0)
        np.testing.assert_allclose(path.x[-1, :2], [0.0, 2.0 / math.pi], atol=1e-8)
        assert np.max(np.abs(path.p[:, 2] - math.pi)) < 1e-12

    @given(z=phase)
    @settings(max_examples=20, deadline=None)
    def test_forward_then_backward_returns(self, z):
        system = build_builtin('heisenberg')
        start = CotangentPoint.from_array(z)
        ahead = flow(system, start, 1.0, steps=128, check_conservation=False)
        back = flow(system, ahead.terminal, 1.0, 'backward', steps=128, check_conservation=False)
        np.testing.assert_allclose(back.initial.as_array(), z, atol=1e-6)

    def test_grid_and_steps(self, langevin):
        path = flow(langevin, CotangentPoint(x=[0, 0], p=[3, 3]), 2.0, steps=63)
        assert path.steps == 64
        assert path.grid[-1] == pytest.approx(2.0)
        assert path.hdot.shape == (65, 1)

    def test_divergence(self):
        system = load_system({'dims': {'d': 1, 'm': 1, 'l': 1},
                              'fields': [[{'exponents': [3], 'coefficient': 1.0}], [{'exponents': [0], 'coefficient': 1.0}]],
                              'start': {'x0': [0.0]}})
        with pytest.raises(DivergedFlowError):
            flow(system, CotangentPoint(x=[5.0], p=[0.0]), 1.0, check_conservation=False)

    def test_coarse_grid_trips_conservation(self, heisenberg):
        with pytest.raises(AccuracyError):
            flow(heisenberg, CotangentPoint(x=[0, 0, 0], p=[1, 0, 40.0]), 1.0, steps=16)

    def test_unknown_direction(self, langevin):
        with pytest.raises(ValueError):
            flow(langevin, CotangentPoint(x=[0, 0], p=[1, 1]), 1.0, direction='sideways')

    def test_path_csv(self, langevin, tmp_path):
        path = flow(langevin, CotangentPoint(x=[0, 0], p=[3, 3]), 1.0, steps=32)
        target = tmp_path / 'path.csv'
        path_to_csv(path, str(target))
        lines = target.read_text().splitlines()
        assert lines[0] == 't,x1,x2,p1,p2,hdot1'
        assert len(lines) == 34


class TestFlowJacobian:

    def test_ou_costate_sensitivity(self):
        beta, gamma, T = 0.5, 1.0, 1.0
        system = build_builtin('ou1d', {'beta': beta, 'gamma': gamma})
        jac = flow_jacobian(system, CotangentPoint(x=[2.0], p=[0.7]), T, 'backward', seed_block='p')
        expected = -gamma ** 2 * math.exp(-beta * T) * (math.exp(2 * beta * T) - 1) / (2 * beta)
        assert jac[0, 0] == pytest.approx(expected, rel=1e-9)

    def test_linear_drift_gives_matrix_exponential(self, langevin):
        T = 1.3
        jac = flow_jacobian(langevin, CotangentPoint(x=[0.5, -0.2], p=[0.0, 0.0]), T, seed_block='x')
        np.testing.assert_allclose(jac[:2], expm(T * np.array([[0.0, 1.0], [0.0, 0.0]])), atol=1e-12)
        np.testing.assert_allclose(jac[2:], 0.0, atol=1e-14)

    def test_short_horizon_is_identity(self, heisenberg):
        jac = flow_jacobian(heisenberg, CotangentPoint(x=[0.1, 0.2, 0.3], p=[1, -1, 2]), 1e-8, seed_block='all')
        np.testing.assert_allclose(jac, np.eye(6), atol=1e-6)

    def test_seed_matrix_shape_is_checked(self, langevin):
        with pytest.raises(ValueError):
            flow_jacobian(langevin, CotangentPoint(x=[0, 0], p=[1, 1]), 1.0, seed_block=np.eye(3))


class TestEnergy:

    def test_langevin_minimizer(self, langevin):
        path = flow(langevin, CotangentPoint(x=[0, 0], p=[3, 3]), 1.0)
        assert energy_direct(path) == pytest.approx(1.5, abs=1e-10)
        assert energy_invariant(path) == pytest.approx(1.5, abs=1e-10)

    def test_zero_control(self, langevin):
        path = flow(langevin, CotangentPoint(x=[0.3, 0.1], p=[0, 0]), 1.0)
        assert energy_direct(path) == 0.0
        assert energy_invariant(path) == pytest.approx(0.0, abs=1e-14)

    @given(p0=st.floats(-2, 2), q0=st.floats(-2, 2), r=st.floats(-6, 6))
    @settings(max_examples=25, deadline=None)
    def test_heisenberg_arc(self, p0, q0, r):
        system = build_builtin('heisenberg')
        path = flow(system, CotangentPoint(x=[0, 0, 0], p=[p0, q0, r]), 1.0)
        expected = 0.5 * (p0 ** 2 + q0 ** 2)
        assert energy_direct(path) == pytest.approx(expected, abs=1e-9 * (1 + expected))
        assert energy_invariant(path) == pytest.approx(expected, abs=1e-9 * (1 + expected))

    def test_drift_changes_the_invariant_formula(self):
        system = build_builtin('ou1d', {'beta': 0.5, 'gamma': 1.0})
        path = flow(system, CotangentPoint(x=[0.0], p=[1.2]), 1.0)
        assert abs(energy_direct(path) - energy_invariant(path)) <= 1e-8 * (1 + energy_direct(path))
        assert abs(energy_direct(path) - path.T * path.hamiltonian_value) > 1e-3


class TestAccuracy:

    def test_jacobian_matches_finite_differences(self, heisenberg):
        start = CotangentPoint(x=[0.0, 0.0, 0.0], p=[0.8, -0.3, 2.5])
        jac = flow_jacobian(heisenberg, start, 1.0, seed_block='p')
        h = 1e-6
        columns = []
        for e in np.eye(3):
            plus = flow(heisenberg, CotangentPoint(x=start.x, p=start.p + h * e), 1.0).terminal.as_array()
            minus = flow(heisenberg, CotangentPoint(x=start.x, p=start.p - h * e), 1.0).terminal.as_array()
            columns.append((plus - minus) / (2 * h))
        np.testing.assert_allclose(jac, np.stack(columns, axis=1), rtol=1e-4, atol=1e-7)

    def test_fourth_order_convergence(self):
        system = build_builtin('ou1d', {'beta': 1.5, 'gamma': 1.0})
        start = CotangentPoint(x=[0.0], p=[1.0])
        # y_T = sinh(beta T) / beta for p0 = 1
        beta, T = 1.5, 2.0
        exact = (math.exp(beta * T) - math.exp(-beta * T)) / (2 * beta)
        errors = [abs(flow(system, start, T, steps=n, check_conservation=False).x[-1, 0] - exact) for n in (16, 32)]
        assert 12.0 < errors[0] / errors[1] < 20.0
