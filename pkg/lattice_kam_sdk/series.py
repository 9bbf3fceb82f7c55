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

import itertools
import math
from collections import OrderedDict
from functools import lru_cache

import numpy as np
from scipy import sparse

from lattice_kam_sdk import (
    ClusteringMismatch,
    DomainError,
)
from lattice_kam_sdk.modes import integer_ball


class FrequencyLattice(object):
    """Integer vectors k with |k|_1 <= k_max in lexicographic order."""

    def __init__(self, n, k_max):
        if n < 1 or k_max < 0:
            raise DomainError('Lattice needs n >= 1 and K_max >= 0.')
        self.n = int(n)
        self.k_max = int(k_max)
        self.vectors = integer_ball(self.n, self.k_max)
        self.index = dict((tuple(k), i) for i, k in enumerate(self.vectors))
        self.l1 = np.abs(self.vectors).sum(axis=1)
        self.zero = self.index[(0,) * self.n]
        self.negation = np.array([self.index[tuple(-k)]
                                  for k in self.vectors], dtype=int)
        side = 2 * self.k_max + 1
        self._table = np.full(side ** self.n, -1, dtype=int)
        self._table[self._flat(self.vectors)] = np.arange(len(self.vectors))

    def __len__(self):
        return len(self.vectors)

    def __eq__(self, other):
        return isinstance(other, FrequencyLattice) and \
            (self.n, self.k_max) == (other.n, other.k_max)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash((self.n, self.k_max))

    def _flat(self, vectors):
        side = 2 * self.k_max + 1
        shifted = np.clip(vectors + self.k_max, 0, side - 1)
        return np.ravel_multi_index(tuple(shifted.T), (side,) * self.n)

    def weights(self, sigma):
        return np.exp(sigma * self.l1)

    def positions(self, size):
        return tuple((self.vectors % size).T)

    def locate(self, vectors):
        """Row of every integer vector, -1 outside the lattice."""
        vectors = np.asarray(vectors, dtype=int).reshape(-1, self.n)
        inside = np.all(np.abs(vectors) <= self.k_max, axis=1)
        return np.where(inside, self._table[self._flat(vectors)], -1)


@lru_cache(maxsize=64)
def get_lattice(n, k_max):
    return FrequencyLattice(n, k_max)


def _along_k(vector, ndim):
    return np.asarray(vector).reshape((-1,) + (1,) * (ndim - 1))


class TailBudget(object):
    """Majorant mass dropped by Fourier or degree truncation.

    Bracket outputs above the jet degree whose majorant at (sigma, mu)
    fits in what is left of allowance may be dropped whole; they are
    charged to 'chop'.
    """

    def __init__(self, sigma=0.0, mu=1.0, allowance=0.0):
        self.sigma = float(sigma)
        self.mu = float(mu)
        self.allowance = float(allowance)
        self.entries = OrderedDict()

    def add(self, source, amount):
        self.entries[source] = self.entries.get(source, 0.0) + float(amount)

    def add_coefficients(self, source, coeffs, l1):
        norms = np.abs(coeffs.reshape(len(l1), -1)).sum(axis=1)
        self.add(source, np.sum(norms * np.exp(self.sigma * l1)))

    def chop(self, bound):
        if bound > self.allowance - self.entries.get('chop', 0.0):
            return False
        self.add('chop', bound)
        return True

    def merge(self, other):
        for source, amount in other.entries.items():
            self.add(source, amount)

    @property
    def total(self):
        return float(sum(self.entries.values()))

    @property
    def config(self):
        return OrderedDict([('sigma', self.sigma), ('mu', self.mu),
                            ('allowance', self.allowance),
                            ('total', self.total),
                            ('entries', OrderedDict(self.entries))])


class FourierSeries(object):
    """Trigonometric polynomial sum_k c(k) e^{i<k, theta>}.

    Coefficients are stored as a complex array of shape
    (len(lattice),) + value_shape.
    """

    def __init__(self, lattice, coeffs=None, value_shape=()):
        self.lattice = lattice
        if coeffs is None:
            coeffs = np.zeros((len(lattice),) + tuple(value_shape),
                              dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape[0] != len(lattice):
            raise ClusteringMismatch(
                'Got {0} coefficients for a lattice of {1} vectors.'.format(
                    coeffs.shape[0], len(lattice)))
        self.coeffs = coeffs

    @property
    def value_shape(self):
        return self.coeffs.shape[1:]

    @property
    def n(self):
        return self.lattice.n

    @classmethod
    def constant(cls, lattice, value):
        value = np.asarray(value, dtype=complex)
        series = cls(lattice, value_shape=value.shape)
        series.coeffs[lattice.zero] = value
        return series

    @classmethod
    def from_samples(cls, lattice, samples):
        """Coefficients from values on a uniform grid of size M per axis.

        Exact for trigonometric polynomials with |k|_inf <= (M - 1) / 2.
        """
        size = samples.shape[0]
        if size < 2 * lattice.k_max + 1:
            raise DomainError(
                'Grid of {0} points cannot resolve K={1}.'.format(
                    size, lattice.k_max))
        axes = tuple(range(lattice.n))
        spectrum = np.fft.fftn(samples, axes=axes) / float(size ** lattice.n)
        return cls(lattice, spectrum[lattice.positions(size)])

    @classmethod
    def from_function(cls, lattice, func, size=None):
        """Sample func(theta) on the grid and keep the lattice modes."""
        size = size or 2 * lattice.k_max + 1
        nodes = 2.0 * np.pi * np.arange(size) / size
        values = [np.asarray(func(np.array(theta)))
                  for theta in itertools.product(nodes, repeat=lattice.n)]
        samples = np.array(values).reshape(
            (size,) * lattice.n + values[0].shape)
        return cls.from_samples(lattice, samples)

    def samples(self, size):
        grid = np.zeros((size,) * self.n + self.value_shape, dtype=complex)
        grid[self.lattice.positions(size)] = self.coeffs
        axes = tuple(range(self.n))
        return np.fft.ifftn(grid, axes=axes) * float(size ** self.n)

    def evaluate(self, theta):
        phases = np.exp(1.0j * self.lattice.vectors.dot(
            np.asarray(theta, dtype=complex)))
        return np.tensordot(phases, self.coeffs, axes=(0, 0))

    def mean(self):
        return self.coeffs[self.lattice.zero]

    def derivative(self, i):
        factor = _along_k(1.0j * self.lattice.vectors[:, i],
                          self.coeffs.ndim)
        return FourierSeries(self.lattice, self.coeffs * factor)

    def majorant(self, sigma, value_norm=None):
        """N_sigma = sum_k |c(k)| e^{sigma |k|_1}."""
        if value_norm is None:
            norms = np.linalg.norm(self.coeffs.reshape(len(self.lattice), -1),
                                   axis=1)
        else:
            norms = np.array([value_norm(c) for c in self.coeffs])
        return float(np.sum(norms * self.lattice.weights(sigma)))

    def mass(self, sigma, weights=None):
        """sum_k e^{sigma |k|_1} sum |c(k)|, entries scaled by weights."""
        amount = np.abs(self.coeffs)
        if weights is not None and amount.ndim > 1:
            amount = amount * weights
        amount = amount.reshape(len(self.lattice), -1).sum(axis=1)
        return float(np.sum(amount * self.lattice.weights(sigma)))

    def max_coefficient(self):
        return float(np.abs(self.coeffs).max(initial=0.0))

    def truncate(self, radius):
        """Split into (|k|_1 <= radius, |k|_1 > radius)."""
        mask = _along_k(self.lattice.l1 <= radius, self.coeffs.ndim)
        return (FourierSeries(self.lattice, self.coeffs * mask),
                FourierSeries(self.lattice, self.coeffs * ~mask))

    def regrid(self, lattice, budget=None, source='fourier'):
        if lattice == self.lattice:
            return self.copy()
        if lattice.n != self.n:
            raise ClusteringMismatch('Lattices of different dimension.')
        target = FourierSeries(lattice, value_shape=self.value_shape)
        rows = lattice.locate(self.lattice.vectors)
        kept = rows >= 0
        target.coeffs[rows[kept]] = self.coeffs[kept]
        if budget is not None and not np.all(kept):
            budget.add_coefficients(source, self.coeffs[~kept],
                                    self.lattice.l1[~kept])
        return target

    def symmetrize(self):
        """Real part in the sense 1/2 (f(theta) + conj f(conj theta))."""
        return FourierSeries(
            self.lattice,
            0.5 * (self.coeffs + np.conj(self.coeffs[self.lattice.negation])))

    def is_real(self, tol=1e-12):
        deviation = self.coeffs - np.conj(self.coeffs[self.lattice.negation])
        return bool(np.abs(deviation).max(initial=0.0) <= tol)

    def copy(self):
        return FourierSeries(self.lattice, self.coeffs.copy())

    def _check(self, other):
        if self.lattice != other.lattice:
            raise ClusteringMismatch('Series live on different lattices.')

    def __add__(self, other):
        self._check(other)
        return FourierSeries(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return FourierSeries(self.lattice, self.coeffs - other.coeffs)

    def __neg__(self):
        return FourierSeries(self.lattice, -self.coeffs)

    def __mul__(self, scale):
        return FourierSeries(self.lattice, scale * self.coeffs)

    __rmul__ = __mul__


def convolve(left, right, combine, lattice=None, budget=None,
             source='fourier'):
    """Series of combine(left(theta), right(theta)), computed exactly on a
    grid fine enough for the full product and truncated to lattice.
    """
    if left.n != right.n:
        raise ClusteringMismatch('Series of different dimension.')
    full = get_lattice(left.n, left.lattice.k_max + right.lattice.k_max)
    size = 2 * full.k_max + 1
    product = FourierSeries.from_samples(
        full, combine(left.samples(size), right.samples(size)))
    if lattice is None:
        return product
    return product.regrid(lattice, budget, source)


def multiply(left, right, lattice=None, budget=None):
    return convolve(left, right, lambda a, b: a * b, lattice, budget)


def encode(tuples, dimension):
    """Base-dimension code of every index tuple (a row of tuples)."""
    tuples = np.asarray(tuples, dtype=np.int64)
    codes = np.zeros(tuples.shape[0], dtype=np.int64)
    for j in range(tuples.shape[1]):
        codes = codes * dimension + tuples[:, j]
    return codes


def decode(codes, dimension, order):
    codes = np.array(codes, dtype=np.int64).ravel()
    tuples = np.empty((codes.size, order), dtype=np.int64)
    for j in range(order - 1, -1, -1):
        tuples[:, j] = codes % dimension
        codes = codes // dimension
    return tuples


def repeat_factorials(tuples):
    """prod over distinct indices of (multiplicity)! for sorted tuples."""
    factor = np.ones(len(tuples))
    run = np.ones(len(tuples))
    for j in range(1, tuples.shape[1]):
        same = tuples[:, j] == tuples[:, j - 1]
        run = np.where(same, run + 1.0, 1.0)
        factor = factor * np.where(same, run, 1.0)
    return factor


def merge_codes(left, left_order, right, right_order, dimension):
    """Codes of the sorted union of two sorted index tuples."""
    merged = np.concatenate([decode(left, dimension, left_order),
                             decode(right, dimension, right_order)], axis=1)
    merged.sort(axis=1)
    return encode(merged, dimension)


class MonomialSeries(object):
    """Fourier series of an order-m form

        sum_k e^{i<k, theta>} sum_{a_1 <= ... <= a_m} c_k(a)
        zeta_{a_1} ... zeta_{a_m}

    stored as a CSR matrix with a row per lattice vector and a column per
    sorted index tuple, coded in base dimension. Only nonzero
    coefficients are held.
    """

    def __init__(self, lattice, dimension, order, matrix=None):
        if order < 1:
            raise DomainError('Monomial series need order >= 1.')
        self.lattice = lattice
        self.dimension = int(dimension)
        self.order = int(order)
        shape = (len(lattice), self.dimension ** self.order)
        if matrix is None:
            matrix = sparse.csr_matrix(shape, dtype=complex)
        else:
            matrix = sparse.csr_matrix(matrix, dtype=complex)
        if matrix.shape != shape:
            raise ClusteringMismatch(
                'Monomial matrix of shape {0}, expected {1}.'.format(
                    matrix.shape, shape))
        self.matrix = matrix

    @property
    def value_shape(self):
        return (self.dimension,) * self.order

    @property
    def n(self):
        return self.lattice.n

    @property
    def nnz(self):
        return int(self.matrix.nnz)

    @classmethod
    def from_entries(cls, lattice, dimension, order, rows, codes, values):
        shape = (len(lattice), int(dimension) ** int(order))
        matrix = sparse.coo_matrix(
            (np.asarray(values, dtype=complex),
             (np.asarray(rows, dtype=np.int64),
              np.asarray(codes, dtype=np.int64))), shape=shape).tocsr()
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        return cls(lattice, dimension, order, matrix)

    @classmethod
    def from_dense(cls, lattice, coeffs):
        """Sorted-monomial form of dense order-m tensors T, the form being
        sum T_{a_1 ... a_m} zeta_{a_1} ... zeta_{a_m}.
        """
        coeffs = np.asarray(coeffs, dtype=complex)
        order = coeffs.ndim - 1
        dimension = coeffs.shape[1]
        flat = coeffs.reshape(len(lattice), -1)
        support = np.flatnonzero(np.any(flat != 0, axis=1))
        block = coeffs[support]
        total = np.zeros_like(block)
        for perm in itertools.permutations(range(order)):
            total += np.transpose(block, (0,) + tuple(1 + p for p in perm))
        index = np.nonzero(total)
        tuples = np.stack(index[1:], axis=1) if order else \
            np.zeros((len(index[0]), 0), dtype=int)
        keep = np.all(np.diff(tuples, axis=1) >= 0, axis=1)
        tuples = tuples[keep]
        values = total[index][keep] / repeat_factorials(tuples)
        return cls.from_entries(lattice, dimension, order,
                                support[index[0][keep]],
                                encode(tuples, dimension), values)

    @classmethod
    def from_matrices(cls, lattice, rows, matrices):
        """Order-2 series with 1/2 <M_k zeta, zeta> on the given rows."""
        matrices = np.asarray(matrices, dtype=complex)
        dimension = matrices.shape[-1]
        upper = np.triu(matrices)
        diagonal = np.arange(dimension)
        upper[:, diagonal, diagonal] *= 0.5
        index = np.nonzero(upper)
        codes = index[1].astype(np.int64) * dimension + index[2]
        return cls.from_entries(lattice, dimension, 2,
                                np.asarray(rows)[index[0]], codes,
                                upper[index])

    def entries(self):
        """(rows, codes, values) of the stored coefficients."""
        coo = self.matrix.tocoo()
        return (coo.row.astype(np.int64), coo.col.astype(np.int64),
                coo.data)

    def row_entries(self, i):
        start, stop = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return (self.matrix.indices[start:stop].astype(np.int64),
                self.matrix.data[start:stop])

    def tuples(self, codes):
        return decode(codes, self.dimension, self.order)

    def support(self):
        """Rows holding a nonzero coefficient."""
        return np.flatnonzero(np.diff(self.matrix.indptr))

    def to_dense(self):
        """Dense symmetric tensors as a FourierSeries."""
        coeffs = np.zeros((len(self.lattice),) + self.value_shape,
                          dtype=complex)
        rows, codes, values = self.entries()
        tuples = self.tuples(codes)
        values = values * repeat_factorials(tuples) / \
            math.factorial(self.order)
        for perm in itertools.permutations(range(self.order)):
            coeffs[(rows,) + tuple(tuples[:, p] for p in perm)] = values
        return FourierSeries(self.lattice, coeffs)

    def matrix_row(self, i):
        """Symmetric M of row i of an order-2 form 1/2 <M zeta, zeta>."""
        if self.order != 2:
            raise DomainError('matrix_row needs an order-2 form.')
        codes, values = self.row_entries(i)
        upper = np.zeros((self.dimension, self.dimension), dtype=complex)
        upper[codes // self.dimension, codes % self.dimension] = values
        return upper + upper.T

    def second_derivative(self, theta):
        """Matrix of second zeta-derivatives of an order-2 form at theta."""
        if self.order != 2:
            raise DomainError('second_derivative needs an order-2 form.')
        phases = np.exp(1.0j * self.lattice.vectors.dot(
            np.asarray(theta, dtype=complex)))
        upper = np.asarray(self.matrix.T.dot(phases)).reshape(
            self.dimension, self.dimension)
        return upper + upper.T

    def evaluate(self, theta, zeta):
        phases = np.exp(1.0j * self.lattice.vectors.dot(
            np.asarray(theta, dtype=complex)))
        rows, codes, values = self.entries()
        zeta = np.asarray(zeta, dtype=complex)
        products = np.prod(zeta[self.tuples(codes)], axis=1)
        return complex(np.sum(values * phases[rows] * products))

    def _scaled(self, factors):
        matrix = sparse.csr_matrix(sparse.diags(factors).dot(self.matrix))
        matrix.eliminate_zeros()
        return MonomialSeries(self.lattice, self.dimension, self.order,
                              matrix)

    def derivative(self, i):
        return self._scaled(1.0j * self.lattice.vectors[:, i])

    def row_masses(self, weights=None):
        """sum over each row of |c|, entries scaled by prod weights."""
        rows, codes, values = self.entries()
        amount = np.abs(values)
        if weights is not None:
            amount = amount * np.prod(weights[self.tuples(codes)], axis=1)
        return np.bincount(rows, amount, minlength=len(self.lattice))

    def mass(self, sigma, weights=None):
        return float(np.sum(self.row_masses(weights) *
                            self.lattice.weights(sigma)))

    def max_coefficient(self):
        return float(np.abs(self.matrix.data).max(initial=0.0))

    def truncate(self, radius):
        inside = (self.lattice.l1 <= radius).astype(float)
        return self._scaled(inside), self._scaled(1.0 - inside)

    def regrid(self, lattice, budget=None, source='fourier'):
        if lattice == self.lattice:
            return self.copy()
        if lattice.n != self.n:
            raise ClusteringMismatch('Lattices of different dimension.')
        rows, codes, values = self.entries()
        target = lattice.locate(self.lattice.vectors)[rows]
        kept = target >= 0
        if budget is not None and not np.all(kept):
            budget.add(source, np.sum(
                np.abs(values[~kept]) *
                np.exp(budget.sigma * self.lattice.l1[rows[~kept]])))
        return MonomialSeries.from_entries(
            lattice, self.dimension, self.order, target[kept], codes[kept],
            values[kept])

    def prune(self, threshold, budget=None, source='chop'):
        """Drop coefficients with |c| <= threshold."""
        rows, codes, values = self.entries()
        small = np.abs(values) <= threshold
        if budget is not None and np.any(small):
            budget.add(source, np.sum(
                np.abs(values[small]) *
                np.exp(budget.sigma * self.lattice.l1[rows[small]])))
        return MonomialSeries.from_entries(
            self.lattice, self.dimension, self.order, rows[~small],
            codes[~small], values[~small])

    def symmetrize(self):
        mirrored = self.matrix[self.lattice.negation].conj()
        return MonomialSeries(self.lattice, self.dimension, self.order,
                              0.5 * (self.matrix + mirrored))

    def is_real(self, tol=1e-12):
        deviation = self.matrix - self.matrix[self.lattice.negation].conj()
        return bool(np.abs(deviation.data).max(initial=0.0) <= tol)

    def copy(self):
        return MonomialSeries(self.lattice, self.dimension, self.order,
                              self.matrix.copy())

    def _check(self, other):
        if not isinstance(other, MonomialSeries) or \
                self.lattice != other.lattice or \
                (self.dimension, self.order) != (other.dimension,
                                                 other.order):
            raise ClusteringMismatch('Monomial series do not match.')

    def __add__(self, other):
        self._check(other)
        return MonomialSeries(self.lattice, self.dimension, self.order,
                              self.matrix + other.matrix)

    def __sub__(self, other):
        self._check(other)
        return MonomialSeries(self.lattice, self.dimension, self.order,
                              self.matrix - other.matrix)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scale):
        return MonomialSeries(self.lattice, self.dimension, self.order,
                              self.matrix * scale)

    __rmul__ = __mul__
