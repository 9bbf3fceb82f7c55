# Copyright (c) 2026 The lattice-kam Authors. All rights reserved
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#        http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import mock
import numpy as np
from numpy.testing import assert_allclose

from lattice_kam_sdk import DomainError, InvariantError, ZeroDivisorError
from lattice_kam_sdk.blockmat import BlockMatrix, is_normal_form
from lattice_kam_sdk.homo import (
    DivisorAudit,
    NormalFormCorrection,
    NormalFormHam,
    measure_exclusion,
    residual,
    solve_homological,
    solve_linear,
    solve_quadratic,
    solve_scalar,
)
from lattice_kam_sdk.jets import Jet
from lattice_kam_sdk.modes import model_from_dict
from lattice_kam_sdk.series import FourierSeries, MonomialSeries, get_lattice
from lattice_kam_sdk.tests import (
    LatticeKamTestBase,
    kg_pair_dict,
    kg_rho,
)


class NormalFormHamTests(LatticeKamTestBase):

    def setUp(self):
        super(NormalFormHamTests, self).setUp()
        self.clustering = self.normal_set(self.kg_model, 2)
        self.h = NormalFormHam.initial(self.kg_model, self.clustering, kg_rho)

    def test_initial(self):
        assert_allclose(self.h.omega, [math.sqrt(4.5)])
        assert_allclose(self.h.eigenvalues(),
                        [math.sqrt(3.0)] * 2 + [math.sqrt(7.0)] * 5)
        self.assertTrue(is_normal_form(self.h.A))

    def test_as_jet(self):
        jet = self.h.as_jet(get_lattice(1, 2))
        assert_allclose(jet.r.mean(), self.h.omega)
        assert_allclose(jet.zetazeta.mean(), self.h.A.data)

    def test_updated_and_drift(self):
        B = BlockMatrix.identity(self.clustering) * 1e-3
        moved = self.h.updated(NormalFormCorrection(0.5, np.array([2e-3]),
                                                    B))
        omega_drift, a_drift = moved.drift(self.h, 0.0)
        self.assertAlmostEqual(omega_drift, 2e-3)
        self.assertAlmostEqual(a_drift, 1e-3 * math.sqrt(10.0))
        moved.check_closeness(self.h, 1.0, 0.0)
        with self.assertRaisesRegex(InvariantError, 'drifted'):
            moved.check_closeness(self.h, 1e-3, 0.0)


class DivisorAuditTests(LatticeKamTestBase):

    def test_record(self):
        audit = DivisorAudit(0.1)
        audit.record('omega', [[0.5]], [1], [None])
        audit.record('omega', [[0.3]], [2], [None])
        audit.record('single', [[0.2, 0.05]], [1], [[1, 0]], [[2, 0], [2, 1]])
        records = audit.to_dict()
        self.assertEqual(records['omega']['min_divisor'], 0.3)
        self.assertEqual(records['omega']['k'], [2])
        self.assertFalse(records['omega']['excluded'])
        self.assertEqual(records['single']['b'], [2, 1])
        self.assertTrue(audit.excluded)
        self.assertEqual(audit.excluded_families(), ['single'])
        self.assertIsNone(records['sum']['min_divisor'])

    def test_merge(self):
        first = DivisorAudit(0.1)
        first.record('sum', [[0.4]], [1], [[1, 0]], [[1, 1]])
        second = DivisorAudit(0.1)
        second.record('sum', [[0.05]], [-1], [[2, 0]], [[2, 1]])
        first.merge(second)
        self.assertEqual(first.to_dict()['sum']['k'], [-1])
        self.assertTrue(first.excluded)


class SolveScalarTests(LatticeKamTestBase):

    def test_residual(self):
        lattice = get_lattice(2, 4)
        omega = np.array([1.0, math.sqrt(2.0)])
        psi = self.random_series(lattice)
        psi.coeffs[lattice.zero] = 0.0
        phi, tail, audit = solve_scalar(psi, omega, 1e-3, 3)
        derivative = phi.derivative(0) * omega[0] + \
            phi.derivative(1) * omega[1]
        gap = derivative - psi - tail
        self.assertLessEqual(np.abs(gap.coeffs).max(), 1e-14)
        self.assertEqual(np.abs(tail.coeffs[lattice.l1 <= 3]).max(), 0.0)
        self.assertGreater(audit.to_dict()['omega']['min_divisor'], 0.0)

    def test_nonzero_mean(self):
        lattice = get_lattice(1, 2)
        with self.assertRaisesRegex(DomainError, 'zero-mean'):
            solve_scalar(FourierSeries.constant(lattice, 1.0), [1.0], 0.1, 2)

    def test_exact_zero_divisor(self):
        lattice = get_lattice(1, 2)
        with self.assertRaises(ZeroDivisorError):
            solve_scalar(FourierSeries(lattice), np.array([0.0]), 0.1, 2)


class SolveComponentTests(LatticeKamTestBase):

    def setUp(self):
        super(SolveComponentTests, self).setUp()
        self.clustering = self.normal_set(self.kg_model, 2)
        self.h = NormalFormHam.initial(self.kg_model, self.clustering, kg_rho)
        self.lattice = get_lattice(1, 4)
        self.outside = self.lattice.l1 > 2

    def check_truncation(self, S, tail, F):
        self.assertEqual(np.abs(S.coeffs[self.outside]).max(), 0.0)
        self.assertEqual(np.abs(tail.coeffs[~self.outside]).max(), 0.0)
        assert_allclose(tail.coeffs[self.outside], F.coeffs[self.outside])
        self.assertTrue(S.is_real())

    def test_solve_linear(self):
        F = self.random_series(self.lattice, (self.clustering.dimension,))
        S, tail, audit = solve_linear(F, self.h, 1e-4, 2)
        self.check_truncation(S, tail, F)
        self.assertGreater(audit.to_dict()['single']['min_divisor'], 0.0)
        self.assertFalse(audit.excluded)
        double, _, _ = solve_linear(F * 2.0, self.h, 1e-4, 2)
        assert_allclose(double.coeffs, 2.0 * S.coeffs, atol=1e-13)

    def test_solve_quadratic(self):
        dimension = self.clustering.dimension
        F = self.random_series(self.lattice, (dimension, dimension),
                               symmetric=True)
        S, B, tail, audit = solve_quadratic(F, self.h, 1e-4, 2)
        self.check_truncation(S, tail, F)
        self.assertTrue(is_normal_form(B))
        records = audit.to_dict()
        for family in ('sum', 'difference', 'zero_mode'):
            self.assertGreater(records[family]['min_divisor'], 0.0)
        self.assertFalse(audit.excluded)
        double, double_B, _, _ = solve_quadratic(F * 2.0, self.h, 1e-4, 2)
        assert_allclose(double.coeffs, 2.0 * S.coeffs, atol=1e-13)
        assert_allclose(double_B.data, 2.0 * B.data, atol=1e-13)

    def test_solve_quadratic_sparse_storage(self):
        dimension = self.clustering.dimension
        F = self.random_series(self.lattice, (dimension, dimension),
                               symmetric=True)
        form = MonomialSeries.from_matrices(
            self.lattice, np.arange(len(self.lattice)), F.coeffs)
        S, B, tail, _ = solve_quadratic(F, self.h, 1e-4, 2)
        sparse_S, sparse_B, sparse_tail, _ = solve_quadratic(
            form, self.h, 1e-4, 2)
        self.assertIsInstance(sparse_S, MonomialSeries)
        assert_allclose(sparse_B.data, B.data, atol=1e-13)
        for index in range(len(self.lattice)):
            assert_allclose(sparse_S.matrix_row(index), S.coeffs[index],
                            atol=1e-12)
            assert_allclose(sparse_tail.matrix_row(index),
                            tail.coeffs[index], atol=1e-13)
        self.assertTrue(sparse_S.is_real())


class SolveHomologicalTests(LatticeKamTestBase):

    def check_solution(self, model, rho, n, k_max, n_cut):
        clustering = self.normal_set(model, 2)
        h = NormalFormHam.initial(model, clustering, rho)
        f = self.random_jet(clustering, n=n, k_max=k_max)
        solution = solve_homological(f, h, 1e-4, n_cut)
        gap = residual(solution, f, h)
        self.assertLessEqual(gap.max_coefficient(),
                             1e-10 * max(1.0, f.max_coefficient()))
        self.assertTrue(solution.S.is_real())
        self.assertTrue(solution.R.is_real())
        self.assertTrue(is_normal_form(solution.hhat.B))
        self.assertAlmostEqual(solution.hhat.c, f.theta.mean().real)
        return solution

    def test_residual_single_angle(self):
        self.check_solution(self.kg_model, kg_rho, 1, 3, 3)

    def test_residual_two_angles(self):
        self.check_solution(model_from_dict(kg_pair_dict), [1.2, 1.7], 2, 2,
                            1)

    def test_tail_goes_to_remainder(self):
        solution = self.check_solution(self.kg_model, kg_rho, 1, 3, 1)
        lattice = solution.R.lattice
        coeffs = solution.R.zetazeta.coeffs
        self.assertEqual(np.abs(coeffs[lattice.l1 <= 1]).max(), 0.0)
        self.assertGreater(np.abs(coeffs[lattice.l1 > 1]).max(), 0.0)

    def test_normal_form_perturbation(self):
        clustering = self.normal_set(self.kg_model, 2)
        h = NormalFormHam.initial(self.kg_model, clustering, kg_rho)
        lattice = get_lattice(1, 2)
        diagonal = np.diag(np.linspace(0.1, 0.2, clustering.dimension // 2)
                           .repeat(2))
        f = Jet.from_components(
            clustering, lattice,
            theta=FourierSeries.constant(lattice, 0.25),
            zetazeta=FourierSeries.constant(lattice, diagonal))
        solution = solve_homological(f, h, 1e-3, 2)
        self.assertLess(solution.S.max_coefficient(), 1e-15)
        assert_allclose(solution.hhat.B.data, diagonal, atol=1e-15)
        self.assertEqual(solution.hhat.c, 0.25)

    def test_excluded(self):
        clustering = self.normal_set(self.kg_model, 2)
        h = NormalFormHam.initial(self.kg_model, clustering, kg_rho,
                                  delta0=40.0)
        f = self.random_jet(clustering, k_max=2)
        fake_log = mock.Mock()
        solution = solve_homological(f, h, 10.0, 2, logger=fake_log)
        self.assertTrue(solution.audit.excluded)
        self.assertTrue(solution.report['excluded'])
        self.assertTrue(fake_log.warning.called)

    def test_kappa_above_half_delta0(self):
        clustering = self.normal_set(self.kg_model, 2)
        h = NormalFormHam.initial(self.kg_model, clustering, kg_rho)
        f = self.random_jet(clustering, k_max=2)
        with self.assertRaisesRegex(DomainError, 'delta0 / 2'):
            solve_homological(f, h, 0.6 * h.delta0, 2)
        solve_homological(f, h, 0.5 * h.delta0, 2)

    def test_far_from_origin(self):
        clustering = self.normal_set(self.kg_model, 2)
        h = NormalFormHam.initial(self.kg_model, clustering, kg_rho)
        f = self.random_jet(clustering, k_max=2)
        shifted = h.updated(NormalFormCorrection(
            0.0, np.array([2.0 * h.delta0]), BlockMatrix(clustering)))
        self.assertIs(shifted.origin, h)
        with self.assertRaisesRegex(DomainError, 'delta0-close'):
            solve_homological(f, shifted, 1e-4, 2)
        bent = h.updated(NormalFormCorrection(
            0.0, np.zeros(1), BlockMatrix.identity(clustering) * h.delta0))
        with self.assertRaisesRegex(DomainError, 'delta0-close'):
            solve_homological(f, bent, 1e-4, 2)
        near = h.updated(NormalFormCorrection(
            0.0, np.array([0.5 * h.delta0]), BlockMatrix(clustering)))
        self.assertEqual(near.delta0, h.delta0)
        solve_homological(f, near, 1e-4, 2)


class MeasureExclusionTests(LatticeKamTestBase):

    def test_one_dimensional_oscillator(self):
        model = self.qho_model
        clustering = self.normal_set(model, 3)
        report = measure_exclusion(model, clustering, [0.1, 0.05], 1,
                                   samples=4096, seed=0)
        tolerance = 2.0 / math.sqrt(4096)
        self.assertAlmostEqual(report.fractions[0], 0.4, delta=tolerance)
        self.assertAlmostEqual(report.fractions[1], 0.2, delta=tolerance)
        self.assertEqual(report.family_fractions['zero_mode'], [0.0, 0.0])

    def test_family_path_matches(self):
        model = self.qho_model
        clustering = self.normal_set(model, 3)
        direct = measure_exclusion(model, clustering, 0.1, 1, samples=64,
                                   seed=4)
        family = measure_exclusion(
            model, clustering, 0.1, 1, samples=64, seed=4,
            h_family=lambda rho: NormalFormHam.initial(model, clustering,
                                                       rho))
        self.assertEqual(direct.fractions, family.fractions)

    def test_bad_arguments(self):
        clustering = self.normal_set(self.qho_model, 3)
        with self.assertRaises(DomainError):
            measure_exclusion(self.qho_model, clustering, 0.1, 0)
