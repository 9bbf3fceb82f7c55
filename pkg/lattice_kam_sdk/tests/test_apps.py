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

from lattice_kam_sdk import DomainError
from lattice_kam_sdk.apps import (
    KGProblem,
    QHOProblem,
    hermite,
    hessian_table,
    kg_build,
    kg_hessian,
    plane_quadrature,
    qho_basis,
    qho_build,
    qho_kernel,
    sph_harmonic,
    sphere_quadrature,
)
from lattice_kam_sdk.jets import jet_of
from lattice_kam_sdk.tests import LatticeKamTestBase


class SphereTests(LatticeKamTestBase):

    def sphere_points(self, count=20):
        return np.stack([np.arccos(2.0 * self.rng.random(count) - 1.0),
                         2.0 * np.pi * self.rng.random(count)], axis=-1)

    def test_constant_harmonic(self):
        values = sph_harmonic(0, 0, self.sphere_points())
        assert_allclose(values, 1.0 / math.sqrt(4.0 * math.pi))

    def test_addition_theorem(self):
        points = self.sphere_points(100)
        for j in range(11):
            total = sum(sph_harmonic(j, l, points) ** 2
                        for l in range(-j, j + 1))
            assert_allclose(total, (2 * j + 1) / (4.0 * math.pi), rtol=0,
                            atol=1e-10)

    def test_orthonormal_under_quadrature(self):
        points, weights = sphere_quadrature(3)
        labels = [(j, l) for j in range(4) for l in range(-j, j + 1)]
        values = np.stack([sph_harmonic(j, l, points) for j, l in labels],
                          axis=-1)
        gram = np.einsum('x,xa,xb->ab', weights, values, values)
        assert_allclose(gram, np.eye(len(labels)), atol=1e-12)

    def test_bad_order(self):
        with self.assertRaisesRegex(DomainError, 'No spherical harmonic'):
            sph_harmonic(1, 2, self.sphere_points())


class PlaneTests(LatticeKamTestBase):

    def test_hermite_orthonormal(self):
        y, w = np.polynomial.hermite.hermgauss(20)
        indices = [1, 3, 5, 7]
        values = np.stack([hermite(i, y) for i in indices], axis=-1)
        gram = np.einsum('x,xa,xb->ab', w * np.exp(y ** 2), values, values)
        assert_allclose(gram, np.eye(len(indices)), atol=1e-12)

    def test_hermite_domain(self):
        with self.assertRaisesRegex(DomainError, 'odd'):
            hermite(2, 0.0)
        with self.assertRaisesRegex(DomainError, 'beyond'):
            hermite(1, [0.0, 40.0])

    def test_quartic_quadrature(self):
        points, weights = plane_quadrature(4)
        total = np.sum(weights * qho_basis(1, 1, points) ** 4)
        self.assertAlmostEqual(total, 1.0 / (2.0 * math.pi), places=12)

    def test_kernel_at_origin(self):
        origin = np.zeros(2)
        self.assertAlmostEqual(qho_kernel(1, origin), 1.0 / math.pi)
        self.assertAlmostEqual(qho_kernel((1, 1), origin), 1.0 / math.pi)

    def test_bad_mode(self):
        with self.assertRaises(DomainError):
            qho_basis(2, 3, np.zeros(2))


class KGBuildTests(LatticeKamTestBase):

    def test_problem_checks(self):
        with self.assertRaisesRegex(DomainError, 'KG_S2'):
            KGProblem(self.qho_model)
        with self.assertRaisesRegex(DomainError, 'Unknown nonlinearity'):
            KGProblem(self.kg_model, 'cubic')

    def test_derivatives(self):
        values = [d(2.0) for d in KGProblem(self.kg_model,
                                            'u3').derivatives(2)]
        assert_allclose(values, [4.0, 8.0, 12.0])
        self.assertAlmostEqual(
            KGProblem(self.kg_model, 'sin').derivatives(2)[2](0.0), 1.0)

    def test_zero_nonlinearity(self):
        _, f = kg_build(KGProblem(self.kg_model, 'zero'), 2, d_max=2,
                        k_max=2)
        self.assertEqual(len(f.terms), 0)

    def test_quadratic_nonlinearity(self):
        fake_log = mock.Mock()
        h0, f = kg_build(KGProblem(self.kg_model, 'u'), 2, d_max=2, k_max=2,
                         logger=fake_log)
        self.assertTrue(fake_log.info.called)
        jet = jet_of(f)
        clustering = f.clustering
        inverse = [1.0 / h0.model.normal_eigenvalue(a.j)
                   for a in clustering.modes]
        hessian = jet.zetazeta.mean().real
        assert_allclose(hessian[0::2, 0::2], np.diag(inverse), atol=1e-12)
        assert_allclose(hessian[1::2, :], 0.0, atol=1e-12)
        # G(u) = u^2 / 2 of the tangential field averages to I / (4 lambda)
        quarter = 0.25 / math.sqrt(3.0)
        self.assertAlmostEqual(jet.theta.mean().real, quarter, places=12)
        assert_allclose(jet.r.mean().real, [quarter], atol=1e-12)
        self.assertLess(np.abs(jet.zeta.coeffs).max(), 1e-12)

        table = hessian_table(f, clustering, 0.0)
        self.assertAlmostEqual(table[(1, 1)], math.sqrt(2.0 / 3.0),
                               places=10)
        self.assertAlmostEqual(table[(2, 2)], math.sqrt(5.0 / 7.0),
                               places=10)
        self.assertAlmostEqual(table[(1, 2)], 0.0, places=10)

    def test_hessian_matches_direct_quadrature(self):
        problem = KGProblem(self.kg_model, 'u3')
        _, f = kg_build(problem, 2, d_max=2, k_max=4)
        theta = np.array([0.3])
        expected = kg_hessian(problem, f.clustering, theta)
        value = jet_of(f).zetazeta.evaluate(theta).real
        assert_allclose(value, expected, atol=1e-10)


class QHOBuildTests(LatticeKamTestBase):

    def test_problem_checks(self):
        with self.assertRaisesRegex(DomainError, 'QHO_R2'):
            QHOProblem(self.kg_model)
        with self.assertRaisesRegex(DomainError, 'Unknown nonlinearity'):
            QHOProblem(self.qho_model, 'cubic')
        with self.assertRaises(DomainError):
            QHOProblem(self.qho_model, beta=-1.0)

    def test_zero_nonlinearity(self):
        _, f = qho_build(QHOProblem(self.qho_model, 'zero'), 2)
        self.assertEqual(len(f.terms), 0)

    def test_focusing_is_minus_defocusing(self):
        _, plus = qho_build(QHOProblem(self.qho_model, 'nls+'), 2, d_max=4,
                            k_max=2)
        _, minus = qho_build(QHOProblem(self.qho_model, 'nls-'), 2,
                             d_max=4, k_max=2)
        self.assertLessEqual((plus + minus).max_coefficient(), 1e-14)
        self.assertTrue(plus.is_real())
        # 1/4 int |Phi_11|^4 at unit action
        self.assertAlmostEqual(plus.term((0,), 0).mean().real,
                               1.0 / (8.0 * math.pi), places=12)
        for _ in range(5):
            zeta = 0.5 * self.rng.standard_normal(plus.dimension)
            theta = 2.0 * np.pi * self.rng.random(1)
            self.assertGreaterEqual(
                plus.evaluate(np.zeros(1), theta, zeta).real, -1e-12)

    def test_hartree_structure(self):
        problem = QHOProblem(self.qho_model, 'hartree')
        _, f = qho_build(problem, 2, d_max=4, k_max=2, check=False)
        self.assertIn(((0,), 4), f.terms)
        self.assertIn(((1,), 2), f.terms)
        self.assertTrue(f.is_real())
        self.assertEqual(problem.config['hartree_width'], 1.0)
