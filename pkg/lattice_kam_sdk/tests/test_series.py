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

import numpy as np
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from lattice_kam_sdk import ClusteringMismatch, DomainError
from lattice_kam_sdk.series import (
    FourierSeries,
    FrequencyLattice,
    MonomialSeries,
    TailBudget,
    decode,
    encode,
    get_lattice,
    multiply,
    repeat_factorials,
)
from lattice_kam_sdk.tests import LatticeKamTestBase


def _cosine(lattice):
    return FourierSeries.from_function(lattice, lambda theta: np.cos(
        theta[0]))


class FourierSeriesTests(LatticeKamTestBase):

    def test_lattice(self):
        lattice = FrequencyLattice(1, 2)
        self.assertEqual(len(lattice), 5)
        self.assertEqual(lattice.vectors[lattice.zero].tolist(), [0])
        self.assertEqual(lattice.vectors[lattice.negation[0]].tolist(), [2])
        self.assertEqual(len(get_lattice(2, 2)), 13)
        self.assertIs(get_lattice(2, 2), get_lattice(2, 2))
        with self.assertRaises(DomainError):
            FrequencyLattice(0, 2)

    def test_from_function(self):
        lattice = get_lattice(1, 3)
        series = _cosine(lattice)
        assert_allclose(series.coeffs[lattice.index[(1,)]], 0.5, atol=1e-15)
        assert_allclose(series.coeffs[lattice.index[(-1,)]], 0.5, atol=1e-15)
        self.assertAlmostEqual(series.evaluate([0.3]).real, math.cos(0.3))
        self.assertTrue(series.is_real())

    def test_undersampled(self):
        lattice = get_lattice(1, 3)
        with self.assertRaisesRegex(DomainError, 'cannot resolve'):
            FourierSeries.from_samples(lattice, np.zeros(5))
        with self.assertRaises(ClusteringMismatch):
            FourierSeries(lattice, np.zeros(3))

    def test_derivative(self):
        lattice = get_lattice(1, 2)
        series = FourierSeries(lattice)
        series.coeffs[lattice.index[(1,)]] = 1.0
        derivative = series.derivative(0)
        self.assertEqual(derivative.coeffs[lattice.index[(1,)]], 1.0j)

    def test_majorant(self):
        lattice = get_lattice(2, 2)
        series = FourierSeries(lattice)
        series.coeffs[lattice.index[(1, -1)]] = 1e-3
        self.assertAlmostEqual(series.majorant(0.5), 1e-3 * math.exp(1.0))

    def test_truncate(self):
        lattice = get_lattice(1, 3)
        series = self.random_series(lattice)
        kept, tail = series.truncate(1)
        self.assertEqual(np.abs(kept.coeffs[lattice.l1 > 1]).max(), 0.0)
        self.assertEqual(np.abs(tail.coeffs[lattice.l1 <= 1]).max(), 0.0)
        assert_allclose((kept + tail).coeffs, series.coeffs)

    def test_regrid_budget(self):
        lattice = get_lattice(1, 3)
        series = FourierSeries(lattice)
        series.coeffs[lattice.index[(3,)]] = 2.0
        series.coeffs[lattice.index[(0,)]] = 1.0
        budget = TailBudget(sigma=0.0)
        small = series.regrid(get_lattice(1, 2), budget)
        self.assertEqual(small.mean(), 1.0)
        self.assertAlmostEqual(budget.total, 2.0)
        self.assertEqual(list(budget.entries), ['fourier'])
        self.assertEqual(series.regrid(lattice).coeffs.tolist(),
                         series.coeffs.tolist())

    def test_multiply(self):
        lattice = get_lattice(1, 1)
        cosine = _cosine(lattice)
        product = multiply(cosine, cosine)
        full = product.lattice
        self.assertEqual(full.k_max, 2)
        assert_allclose(product.coeffs[full.index[(0,)]], 0.5, atol=1e-15)
        assert_allclose(product.coeffs[full.index[(2,)]], 0.25, atol=1e-15)
        budget = TailBudget()
        truncated = multiply(cosine, cosine, lattice, budget)
        self.assertEqual(truncated.lattice, lattice)
        self.assertAlmostEqual(budget.total, 0.5)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_majorant_submultiplicative(self, seed):
        rng = np.random.default_rng(seed)
        lattice = get_lattice(2, 2)
        left = FourierSeries(lattice, rng.standard_normal(len(lattice)))
        right = FourierSeries(lattice, rng.standard_normal(len(lattice)))
        sigma = 0.3
        self.assertLessEqual(
            multiply(left, right).majorant(sigma),
            left.majorant(sigma) * right.majorant(sigma) * (1.0 + 1e-12))

    def test_symmetrize(self):
        lattice = get_lattice(2, 2)
        series = FourierSeries(
            lattice, self.rng.standard_normal(len(lattice)) +
            1.0j * self.rng.standard_normal(len(lattice)))
        self.assertFalse(series.is_real())
        real = series.symmetrize()
        self.assertTrue(real.is_real())
        theta = [0.4, 1.1]
        self.assertAlmostEqual(real.evaluate(theta),
                               series.evaluate(theta).real)

    def test_tail_budget(self):
        budget = TailBudget(sigma=1.0)
        budget.add('degree', 1.0)
        other = TailBudget()
        other.add('degree', 0.5)
        other.add('fourier', 0.25)
        budget.merge(other)
        self.assertEqual(budget.total, 1.75)
        self.assertEqual(budget.config['entries'],
                         {'degree': 1.5, 'fourier': 0.25})


    def test_chop_allowance(self):
        budget = TailBudget(sigma=0.5, mu=0.1, allowance=1.0)
        self.assertTrue(budget.chop(0.75))
        self.assertFalse(budget.chop(0.5))
        self.assertTrue(budget.chop(0.25))
        self.assertEqual(budget.entries['chop'], 1.0)
        self.assertFalse(TailBudget().chop(1e-300))
        self.assertEqual(budget.config['allowance'], 1.0)


class LatticeLocateTests(LatticeKamTestBase):

    def test_locate(self):
        lattice = get_lattice(2, 2)
        vectors = np.array([[0, 0], [1, -1], [2, 1], [-3, 0], [0, -2]])
        rows = lattice.locate(vectors)
        self.assertEqual(rows[0], lattice.zero)
        self.assertEqual(rows[1], lattice.index[(1, -1)])
        self.assertEqual(rows[2:4].tolist(), [-1, -1])
        self.assertEqual(rows[4], lattice.index[(0, -2)])

    def test_codes(self):
        tuples = np.array([[0, 0, 3], [1, 2, 2], [3, 3, 3]])
        assert_allclose(decode(encode(tuples, 4), 4, 3), tuples)
        assert_allclose(repeat_factorials(tuples), [2.0, 2.0, 6.0])


class MonomialSeriesTests(LatticeKamTestBase):

    def setUp(self):
        super(MonomialSeriesTests, self).setUp()
        self.lattice = get_lattice(1, 2)
        self.dimension = 4

    def dense(self, order):
        return self.random_series(self.lattice, (self.dimension,) * order)

    def dense_value(self, series, theta, zeta):
        values = series.evaluate(theta)
        for _ in range(series.coeffs.ndim - 1):
            values = values.dot(zeta)
        return values

    def test_from_dense_matches_dense_form(self):
        theta = [0.8]
        zeta = self.rng.standard_normal(self.dimension)
        for order in [2, 3, 4]:
            dense = self.dense(order)
            series = MonomialSeries.from_dense(self.lattice, dense.coeffs)
            self.assertEqual(series.value_shape, (self.dimension,) * order)
            self.assertAlmostEqual(series.evaluate(theta, zeta),
                                   self.dense_value(dense, theta, zeta))
            again = series.to_dense()
            self.assertAlmostEqual(self.dense_value(again, theta, zeta),
                                   self.dense_value(dense, theta, zeta))

    def test_sorted_storage(self):
        tensor = np.zeros((self.dimension,) * 2)
        tensor[0, 1] = 1.0
        tensor[1, 0] = 2.0
        tensor[2, 2] = 5.0
        series = MonomialSeries.from_dense(
            self.lattice, FourierSeries.constant(self.lattice, tensor).coeffs)
        self.assertEqual(series.nnz, 2)
        codes, values = series.row_entries(self.lattice.zero)
        self.assertEqual(series.tuples(codes).tolist(), [[0, 1], [2, 2]])
        assert_allclose(values, [3.0, 5.0])
        assert_allclose(series.matrix_row(self.lattice.zero)[:3, :3],
                        [[0.0, 3.0, 0.0], [3.0, 0.0, 0.0],
                         [0.0, 0.0, 10.0]])
        assert_allclose(series.second_derivative([0.3]),
                        series.matrix_row(self.lattice.zero))

    def test_from_matrices(self):
        data = self.rng.standard_normal((2, self.dimension, self.dimension))
        matrices = data + np.swapaxes(data, 1, 2)
        rows = [self.lattice.index[(1,)], self.lattice.index[(-1,)]]
        series = MonomialSeries.from_matrices(self.lattice, rows, matrices)
        assert_allclose(series.matrix_row(rows[0]), matrices[0])
        assert_allclose(series.matrix_row(rows[1]), matrices[1])
        zeta = self.rng.standard_normal(self.dimension)
        expected = 0.5 * zeta.dot(matrices[0]).dot(zeta) * np.exp(0.4j) + \
            0.5 * zeta.dot(matrices[1]).dot(zeta) * np.exp(-0.4j)
        self.assertAlmostEqual(series.evaluate([0.4], zeta), expected)
        with self.assertRaises(DomainError):
            MonomialSeries.from_dense(
                self.lattice, self.dense(3).coeffs).matrix_row(0)

    def test_derivative(self):
        series = MonomialSeries.from_dense(self.lattice, self.dense(3).coeffs)
        zeta = self.rng.standard_normal(self.dimension)
        step = 1e-6
        numeric = (series.evaluate([0.5 + step], zeta) -
                   series.evaluate([0.5 - step], zeta)) / (2.0 * step)
        self.assertAlmostEqual(series.derivative(0).evaluate([0.5], zeta),
                               numeric, places=7)

    def test_masses(self):
        tensor = np.zeros((self.dimension,) * 3)
        tensor[0, 0, 1] = 2.0
        coeffs = np.zeros((len(self.lattice),) + tensor.shape)
        coeffs[self.lattice.index[(2,)]] = tensor
        series = MonomialSeries.from_dense(self.lattice, coeffs)
        weights = np.arange(1.0, self.dimension + 1)
        self.assertAlmostEqual(series.mass(0.5), 2.0 * math.exp(1.0))
        self.assertAlmostEqual(series.mass(0.0, weights), 2.0 * 2.0)
        self.assertEqual(series.max_coefficient(), 2.0)

    def test_regrid_and_prune_charge_budget(self):
        coeffs = np.zeros((len(self.lattice),) + (self.dimension,) * 2)
        coeffs[self.lattice.index[(2,)], 0, 0] = 3.0
        coeffs[self.lattice.index[(0,)], 1, 1] = 1e-9
        coeffs[self.lattice.index[(1,)], 2, 3] = 1.0
        series = MonomialSeries.from_dense(self.lattice, coeffs)
        budget = TailBudget(sigma=0.0)
        small = series.regrid(get_lattice(1, 1), budget)
        self.assertEqual(small.nnz, 2)
        self.assertAlmostEqual(budget.entries['fourier'], 3.0)
        pruned = small.prune(1e-6, budget)
        self.assertEqual(pruned.nnz, 1)
        self.assertAlmostEqual(budget.entries['chop'], 1e-9)
        kept, tail = series.truncate(1)
        self.assertEqual((kept + tail).nnz, series.nnz)
        self.assertEqual(tail.nnz, 1)

    def test_symmetrize_and_arithmetic(self):
        shape = (len(self.lattice),) + (self.dimension,) * 2
        coeffs = self.rng.standard_normal(shape) + \
            1.0j * self.rng.standard_normal(shape)
        series = MonomialSeries.from_dense(self.lattice, coeffs)
        self.assertFalse(series.is_real())
        real = series.symmetrize()
        self.assertTrue(real.is_real())
        zeta = self.rng.standard_normal(self.dimension)
        self.assertAlmostEqual(real.evaluate([1.3], zeta),
                               series.evaluate([1.3], zeta).real)
        self.assertEqual((2.0 * real - real - real).max_coefficient(), 0.0)
        with self.assertRaises(ClusteringMismatch):
            real + MonomialSeries(self.lattice, self.dimension, 3)
        with self.assertRaises(DomainError):
            MonomialSeries(self.lattice, self.dimension, 0)
