import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from bvp.models import MinimizerSet, MultistartConfig, TargetSpec
from bvp.multistart import enumerate_minimizers
from bvp.shooting import backward_shoot_residual, solve_bvp
from config.settings import TOL_FOCAL, UNDECIDED_BAND
from model.builtins import build_builtin
from nondegeneracy.focality import hadamard_ratio, nonfocality_matrix
from nondegeneracy.hessian_oracle import hessian_oracle, interval_controls
from nondegeneracy.hormander import hormander_rank
from nondegeneracy.malliavin import (check_invertibility, ellipticity_witness, malliavin_covariance)
from nondegeneracy.report import (CONTINUUM, FOCAL, ND_HOLDS, SINGULAR_MALLIAVIN, UNDECIDED, assemble_nd_report,
                                  focal_status)
from utils.errors import AsymmetricMatrixError, BracketDepthError

MULTISTART_200 = MultistartConfig(n_sobol=100, n_normal=100)
X_CRITICAL = math.sqrt(16 / math.pi)


def solve(system, a, multistart=None):
    return enumerate_minimizers(system, TargetSpec.create(system, a, 1.0), multistart)


@pytest.fixture(scope='module')
def case_iii1():
    system = build_builtin('heisenberg', {'projection': 'xz'})
    return solve(system, [1.0, 2.0], MULTISTART_200)


def flatmetric_minimizer(theta):
    system = build_builtin('flatmetric', {'theta': theta})
    minimizer_set = solve(system, [1.0], MultistartConfig(n_sobol=16, n_normal=16))
    return system, minimizer_set


class TestMalliavin:

    def test_ou_variance(self, ou):
        minimizer = solve(ou, [2.0]).minimizers[0]
        C = malliavin_covariance(ou, minimizer)
        assert C[0, 0] == pytest.approx(math.e - 1, rel=1e-8)

    def test_langevin_covariance(self, langevin):
        minimizer = solve(langevin, [1.0]).minimizers[0]
        np.testing.assert_allclose(malliavin_covariance(langevin, minimizer), [[1 / 3, 1 / 2], [1 / 2, 1]],
                                   atol=1e-9)

    def test_flatmetric_identity(self):
        system, minimizer_set = flatmetric_minimizer(0.0)
        np.testing.assert_allclose(malliavin_covariance(system, minimizer_set.minimizers[0]), np.eye(2), atol=1e-10)

    def test_heisenberg_zero_control_is_singular(self, heisenberg):
        minimizer = solve(heisenberg, [0.0, 0.0, 0.0]).minimizers[0]
        C = malliavin_covariance(heisenberg, minimizer)
        np.testing.assert_allclose(C, np.diag([1.0, 1.0, 0.0]), atol=1e-12)
        invertible, smallest = check_invertibility(C)
        assert not invertible
        assert smallest < 1e-12

    def test_heisenberg_curved_minimizer_is_invertible(self, heisenberg_xz, case_iii1):
        for minimizer in case_iii1.minimizers:
            invertible, smallest = check_invertibility(malliavin_covariance(heisenberg_xz, minimizer))
            assert invertible
            assert smallest > 1e-3

    @pytest.mark.parametrize('name, params, a', [
        ('ou1d', {'beta': 0.5}, [2.0]),
        ('langevin', {}, [1.0]),
        ('flatmetric', {'theta': 0.75}, [1.0]),
        ('heisenberg', {}, [1.0, 0.5, 0.2]),
        ('heisenberg', {}, [0.0, 0.0, 0.0]),
    ])
    def test_covariance_is_positive_semidefinite(self, name, params, a):
        system = build_builtin(name, params)
        for minimizer in solve(system, a).minimizers:
            C = malliavin_covariance(system, minimizer)
            np.testing.assert_allclose(C, C.T, atol=1e-12)
            assert np.linalg.eigvalsh(C).min() >= -1e-10 * max(1.0, np.abs(C).max())

    def test_invertibility_uses_relative_scale(self):
        assert check_invertibility(np.diag([1.0, 1e-6]))[0]
        assert not check_invertibility(np.diag([1.0, 1e-9]))[0]
        assert not check_invertibility(np.diag([1.0, 1e-6]), scale=1e3)[0]

    def test_asymmetric_matrix(self):
        with pytest.raises(AsymmetricMatrixError):
            check_invertibility(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_ellipticity_witness(self, langevin):
        system, minimizer_set = flatmetric_minimizer(0.5)
        assert ellipticity_witness(system, minimizer_set.minimizers[0].path) == 0.0
        # One noise channel cannot span the plane
        assert ellipticity_witness(langevin, solve(langevin, [1.0]).minimizers[0].path) is None


class TestHormander:

    def test_langevin_needs_the_drift(self, langevin):
        assert hormander_rank(langevin, [0.0, 0.0], 3)[0] == 1
        assert hormander_rank(langevin, [0.0, 0.0], 2, include_drift=True)[0] == 2

    def test_heisenberg_bracket(self, heisenberg):
        assert hormander_rank(heisenberg, [0.0, 0.0, 0.0], 1)[0] == 2
        assert hormander_rank(heisenberg, [0.0, 0.0, 0.0], 2)[0] == 3

    def test_flatmetric_elliptic(self):
        assert hormander_rank(build_builtin('flatmetric', {'theta': 1.0}), [0.0, 0.0], 1)[0] == 2

    @pytest.mark.parametrize('include_drift', [False, True])
    @pytest.mark.parametrize('name, params, x', [
        ('ou1d', {'beta': 0.5}, [0.7]),
        ('langevin', {}, [0.3, -0.2]),
        ('flatmetric', {'theta': 0.5}, [0.0, 1.0]),
        ('heisenberg', {}, [0.5, -1.0, 2.0]),
    ])
    def test_rank_grows_with_depth(self, name, params, x, include_drift):
        system = build_builtin(name, params)
        ranks = [hormander_rank(system, x, depth, include_drift=include_drift)[0] for depth in range(1, 5)]
        assert ranks == sorted(ranks)
        assert ranks[-1] <= system.d

    @pytest.mark.parametrize('depth', [0, 5])
    def test_depth_range(self, heisenberg, depth):
        with pytest.raises(BracketDepthError):
            hormander_rank(heisenberg, [0.0, 0.0, 0.0], depth)


class TestFocality:

    def test_langevin_determinant(self, langevin):
        M, det = nonfocality_matrix(langevin, solve(langevin, [1.0]).minimizers[0])
        assert abs(det) == pytest.approx(1 / 3, abs=1e-6)
        assert M.shape == (2, 2)

    def test_heisenberg_xz_determinant(self, heisenberg_xz, case_iii1):
        for minimizer in case_iii1.minimizers:
            _, det = nonfocality_matrix(heisenberg_xz, minimizer)
            assert abs(det) == pytest.approx((16 / math.pi - 1) / 4, abs=1e-4)

    def test_heisenberg_i2_determinant(self, heisenberg):
        minimizer_set = solve(heisenberg, [1.0, 0.0, (math.pi / 2 - 1) / 4], MULTISTART_200)
        _, det = nonfocality_matrix(heisenberg, minimizer_set.minimizers[0])
        # Rotation rate r = pi/2 of the arc reaching (1, 0, z)
        r = math.pi / 2
        expected = (r / 2 * math.cos(r / 2) - math.sin(r / 2)) / (r ** 2 * math.sin(r / 2))
        assert det == pytest.approx(expected, abs=1e-5)
        assert det < 0

    def test_matrix_matches_backward_finite_differences(self, langevin, case_iii1):
        h = 1e-6
        cases = [(langevin, solve(langevin, [1.0])), (build_builtin('heisenberg', {'projection': 'xz'}), case_iii1)]
        for system, minimizer_set in cases:
            d, l = system.d, system.l
            for minimizer in minimizer_set.minimizers:
                M, _ = nonfocality_matrix(system, minimizer)
                base = np.concatenate([minimizer.z_T, minimizer.q_T])
                steps = minimizer.path.steps

                def x_start(v):
                    return backward_shoot_residual(system, minimizer_set.target, v[:d - l], v[d - l:], steps)[0]

                numeric = np.stack([(x_start(base + h * e) - x_start(base - h * e)) / (2 * h) for e in np.eye(d)],
                                   axis=1)
                np.testing.assert_allclose(M, numeric, rtol=1e-5, atol=1e-6)

    def test_flatmetric_theta_one_is_focal(self):
        system, minimizer_set = flatmetric_minimizer(1.0)
        M, _ = nonfocality_matrix(system, minimizer_set.minimizers[0])
        assert hadamard_ratio(M) < 1e-6

    def test_hadamard_ratio_bounds(self):
        assert hadamard_ratio(np.eye(3)) == pytest.approx(1.0)
        assert hadamard_ratio(np.zeros((2, 2))) == 0.0
        assert hadamard_ratio(np.array([[1.0, 1.0], [1.0, 1.0]])) == pytest.approx(0.0)

    @pytest.mark.parametrize('ratio, expected', [(1e-7, FOCAL), (5e-6, UNDECIDED), (1e-5, ND_HOLDS), (0.5, ND_HOLDS)])
    def test_focal_status_bands(self, ratio, expected):
        assert focal_status(ratio) == expected

    def test_undecided_band_is_one_sided(self):
        assert focal_status(TOL_FOCAL) == UNDECIDED
        assert focal_status(np.nextafter(TOL_FOCAL, 0.0)) == FOCAL
        assert focal_status(np.nextafter(UNDECIDED_BAND * TOL_FOCAL, 0.0)) == UNDECIDED
        assert focal_status(UNDECIDED_BAND * TOL_FOCAL) == ND_HOLDS
        assert focal_status(5e-4, tol_focal=1e-4) == UNDECIDED


class TestHessianOracle:

    @pytest.mark.parametrize('theta', [0.0, 0.25, 0.5, 0.75])
    def test_flatmetric_positive(self, theta):
        system, minimizer_set = flatmetric_minimizer(theta)
        result = hessian_oracle(system, minimizer_set.minimizers[0])
        assert result.min_eig > 0.1
        assert result.min_eig == pytest.approx(1 - theta, abs=1e-3)
        assert result.constraint_rank == 1

    def test_flatmetric_null_direction(self):
        system, minimizer_set = flatmetric_minimizer(1.0)
        result = hessian_oracle(system, minimizer_set.minimizers[0])
        assert abs(result.min_eig) < 1e-3
        # A null variation k(t) = (0, t) has constant rate (0, 1)
        expected = np.tile([0.0, 1.0], (result.direction.shape[0], 1))
        cosine = np.sum(result.direction * expected) / (np.linalg.norm(result.direction) * np.linalg.norm(expected))
        assert cosine > 0.99

    def test_langevin_positive(self, langevin):
        assert hessian_oracle(langevin, solve(langevin, [1.0]).minimizers[0]).min_eig > 0.1

    def test_interval_controls_average_the_path(self, langevin):
        minimizer = solve(langevin, [1.0]).minimizers[0]
        controls = interval_controls(minimizer, 16)
        assert controls.shape == (16, 1)
        # hdot(t) = 3 - 3t for the minimizer reaching y = 1
        midpoints = (np.arange(16) + 0.5) / 16
        np.testing.assert_allclose(controls[:, 0], 3 - 3 * midpoints, atol=1e-8)

    def test_grid_floor(self, langevin):
        with pytest.raises(ValueError):
            hessian_oracle(langevin, solve(langevin, [1.0]).minimizers[0], grid_size=8)


class TestVerdict:

    @pytest.mark.parametrize('theta, expected', [(0.0, ND_HOLDS), (0.5, ND_HOLDS), (0.75, ND_HOLDS), (1.0, FOCAL)])
    def test_flatmetric_sweep(self, theta, expected):
        system, minimizer_set = flatmetric_minimizer(theta)
        report = assemble_nd_report(system, minimizer_set)
        assert report.verdict == expected
        assert report.certified == (expected == ND_HOLDS)

    def test_heisenberg_origin(self, heisenberg):
        report = assemble_nd_report(heisenberg, solve(heisenberg, [0.0, 0.0, 0.0]))
        assert report.verdict == SINGULAR_MALLIAVIN

    def test_heisenberg_continuum(self, heisenberg):
        report = assemble_nd_report(heisenberg, solve(heisenberg, [0.0, 0.0, 0.5]))
        assert report.verdict == CONTINUUM
        assert report.continuum_flag

    def test_heisenberg_xz_pair(self, heisenberg_xz, case_iii1):
        report = assemble_nd_report(heisenberg_xz, case_iii1)
        assert report.verdict == ND_HOLDS
        assert report.minimizer_count == 2
        assert len(report.to_dict()['records']) == 2

    @pytest.mark.parametrize('x', [0.5, 1.0, 1.5])
    def test_heisenberg_xz_below_the_focal_boundary(self, heisenberg_xz, x):
        assert x < X_CRITICAL
        report = assemble_nd_report(heisenberg_xz, solve(heisenberg_xz, [x, 2.0], MULTISTART_200))
        assert report.verdict == ND_HOLDS

    def test_hessian_in_report(self):
        system, minimizer_set = flatmetric_minimizer(0.5)
        record = assemble_nd_report(system, minimizer_set, hessian=True).records[0]
        assert record.hessian_min_eig == pytest.approx(0.5, abs=1e-3)


class TestEquivalence:
    """Non-focality and second-variation positivity agree"""

    @settings(max_examples=10, deadline=None)
    @given(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]))
    def test_flatmetric_tests_agree(self, theta):
        system, minimizer_set = flatmetric_minimizer(theta)
        minimizer = minimizer_set.minimizers[0]
        M, _ = nonfocality_matrix(system, minimizer)
        nonfocal = focal_status(hadamard_ratio(M)) == ND_HOLDS
        positive = hessian_oracle(system, minimizer).min_eig > 1e-3
        assert nonfocal == positive

    @pytest.mark.parametrize('name, params, a', [
        ('ou1d', {'beta': 0.5}, [2.0]),
        ('langevin', {}, [1.0]),
        ('heisenberg', {'projection': 'xz'}, [1.0, 2.0]),
        ('heisenberg', {}, [1.0, 0.0, (math.pi / 2 - 1) / 4]),
    ])
    def test_builtin_cases_agree(self, name, params, a):
        system = build_builtin(name, params)
        for minimizer in solve(system, a, MULTISTART_200).minimizers:
            M, _ = nonfocality_matrix(system, minimizer)
            nonfocal = focal_status(hadamard_ratio(M)) == ND_HOLDS
            positive = hessian_oracle(system, minimizer).min_eig > 1e-3
            assert nonfocal == positive


def half_circle_covectors(x, z):
    """Initial covectors (x, z, y order) of the two half circles over the chord from 0 to (x, +-y)"""
    diameter = math.sqrt(8 * z / math.pi)
    speed = math.pi * diameter / 2
    y = math.sqrt(max(diameter ** 2 - x ** 2, 0.0))
    covectors = []
    for end in (complex(x, y), complex(x, -y)):
        angle = cmath.phase(end) - math.pi / 2
        covectors.append([speed * math.cos(angle), math.pi, speed * math.sin(angle)])
    return covectors


def flat_arc_covector(x, z):
    """Initial covector of the arc ending on the x axis at (x, 0, z), rotating by r < pi"""
    r = brentq(lambda s: (s - math.sin(s)) / (8 * math.sin(s / 2) ** 2) - z / x ** 2, 1e-6, math.pi)
    speed = x * r / (2 * math.sin(r / 2))
    return [speed * math.cos(r / 2), r, -speed * math.sin(r / 2)]


class TestFocalBoundary:
    """Targets (x, z = 2) across |x| = sqrt(8 z / pi) for the xz projection"""

    Z = 2.0

    @pytest.mark.parametrize('x', [2.0, 2.2])
    def test_two_minimizers_below(self, heisenberg_xz, x):
        assert x < X_CRITICAL
        multistart = MultistartConfig(extra_guesses=half_circle_covectors(x, self.Z))
        minimizer_set = solve(heisenberg_xz, [x, self.Z], multistart)
        assert len(minimizer_set.minimizers) == 2
        for minimizer in minimizer_set.minimizers:
            assert minimizer.energy == pytest.approx(math.pi * self.Z, abs=1e-6)
        y_ends = sorted(m.z_T[0] for m in minimizer_set.minimizers)
        assert y_ends[1] == pytest.approx(math.sqrt(8 * self.Z / math.pi - x ** 2), abs=1e-6)
        assert y_ends[0] == pytest.approx(-y_ends[1], abs=1e-6)
        assert assemble_nd_report(heisenberg_xz, minimizer_set).verdict == ND_HOLDS

    def test_focal_on_the_boundary(self, heisenberg_xz):
        target = TargetSpec.create(heisenberg_xz, [X_CRITICAL, self.Z], 1.0)
        # The two half circles coincide here
        covector = half_circle_covectors(X_CRITICAL, self.Z)[0]
        solutions = solve_bvp(heisenberg_xz, target, [covector], 512)
        assert len(solutions) == 1
        assert solutions[0].energy == pytest.approx(math.pi * self.Z, abs=1e-6)
        assert abs(solutions[0].z_T[0]) < 1e-6
        minimizer_set = MinimizerSet(target=target, solutions=solutions, minimizers=solutions,
                                     continuum_flag=False, multistart_stats={'starts': 1})
        assert assemble_nd_report(heisenberg_xz, minimizer_set).verdict in (FOCAL, UNDECIDED)

    @pytest.mark.parametrize('x', [2.3, 2.6])
    def test_single_non_focal_arc_above(self, heisenberg_xz, x):
        assert x > X_CRITICAL
        covector = flat_arc_covector(x, self.Z)
        minimizer_set = solve(heisenberg_xz, [x, self.Z], MultistartConfig(extra_guesses=[covector]))
        assert len(minimizer_set.minimizers) == 1
        minimizer = minimizer_set.minimizers[0]
        assert minimizer.energy == pytest.approx(0.5 * (covector[0] ** 2 + covector[2] ** 2), abs=1e-6)
        assert abs(minimizer.z_T[0]) < 1e-6
        M, _ = nonfocality_matrix(heisenberg_xz, minimizer)
        assert focal_status(hadamard_ratio(M)) == ND_HOLDS
        assert assemble_nd_report(heisenberg_xz, minimizer_set).verdict == ND_HOLDS
