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

from collections import OrderedDict

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from lattice_kam_sdk import (
    ClusteringMismatch,
    DomainError,
    InvariantError,
)
from lattice_kam_sdk.blockmat import (
    ModeVector,
    block_table_norm,
    coordinate_levels,
    norm_beta_plus_vector,
    norm_beta_vector,
    norm_s,
)
from lattice_kam_sdk.series import (
    FourierSeries,
    MonomialSeries,
    get_lattice,
    encode,
    merge_codes,
)

D_MAX = 4
K_MAX = 12
JET_DEGREE = 2
PARTS = ['theta', 'r', 'zeta', 'zetazeta']
_LETTERS = 'abcdefghijklmnopqrstuvwxyz'
NOISE = 1e-14
CHUNK = 2 ** 22


def weighted_degree(key):
    alpha, m = key
    return 2 * sum(alpha) + m


class PolyHamiltonian(object):
    """Polynomial in (r, zeta) with Fourier coefficients in theta.

    terms maps (alpha, m) to the theta-series of r^alpha times an order-m
    form in the real zeta coordinates: a FourierSeries of scalars or
    vectors for m <= 1 and a MonomialSeries of sorted monomials for
    m >= 2. Weighted degree 2|alpha| + m is capped at d_max.
    """

    def __init__(self, clustering, lattice, d_max=D_MAX, terms=None):
        self.clustering = clustering
        self.lattice = lattice
        self.d_max = int(d_max)
        self.terms = OrderedDict()
        for key, series in (terms or {}).items():
            self.set_term(key, series)

    @property
    def n(self):
        return self.lattice.n

    @property
    def dimension(self):
        return self.clustering.dimension

    def _key(self, key):
        alpha, m = key
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.n or min(alpha + (m,)) < 0:
            raise DomainError('Bad monomial key {0}.'.format(key))
        return alpha, int(m)

    def set_term(self, key, series):
        """Store series under key; dense order-m tensors T stand for the
        form sum T[a_1, ..., a_m] zeta_{a_1} ... zeta_{a_m}.
        """
        key = self._key(key)
        if weighted_degree(key) > self.d_max:
            raise DomainError('Term {0} exceeds degree {1}.'.format(
                key, self.d_max))
        if series.value_shape != (self.dimension,) * key[1]:
            raise ClusteringMismatch(
                'Term {0} has value shape {1}.'.format(
                    key, series.value_shape))
        if key[1] >= 2 and isinstance(series, FourierSeries):
            series = MonomialSeries.from_dense(series.lattice, series.coeffs)
        elif key[1] < 2 and isinstance(series, MonomialSeries):
            series = series.to_dense()
        if series.lattice != self.lattice:
            series = series.regrid(self.lattice)
        self.terms[key] = series

    def term(self, alpha, m):
        key = self._key((alpha, m))
        if key in self.terms:
            return self.terms[key]
        if key[1] >= 2:
            return MonomialSeries(self.lattice, self.dimension, key[1])
        return FourierSeries(self.lattice,
                             value_shape=(self.dimension,) * key[1])

    def keys(self):
        return sorted(self.terms, key=lambda k: (weighted_degree(k), k))

    def copy(self):
        return self._new(OrderedDict((k, s.copy())
                                     for k, s in self.terms.items()))

    def _new(self, terms, lattice=None, d_max=None):
        return PolyHamiltonian(self.clustering, lattice or self.lattice,
                               self.d_max if d_max is None else d_max, terms)

    def _aligned(self, other):
        if self.clustering != other.clustering or self.n != other.n:
            raise ClusteringMismatch('Hamiltonians on different spaces.')
        lattice = self.lattice if \
            self.lattice.k_max >= other.lattice.k_max else other.lattice
        return lattice, max(self.d_max, other.d_max)

    def _combine(self, other, sign):
        lattice, d_max = self._aligned(other)
        terms = OrderedDict()
        for key, series in self.terms.items():
            terms[key] = series.regrid(lattice)
        for key, series in other.terms.items():
            series = sign * series.regrid(lattice)
            terms[key] = terms[key] + series if key in terms else series
        return PolyHamiltonian(self.clustering, lattice, d_max, terms)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scale):
        return self._new(OrderedDict((k, scale * s)
                                     for k, s in self.terms.items()))

    __rmul__ = __mul__

    def regrid(self, lattice, budget=None):
        return self._new(OrderedDict(
            (k, s.regrid(lattice, budget)) for k, s in self.terms.items()),
            lattice=lattice)

    def symmetrize(self):
        return self._new(OrderedDict((k, s.symmetrize())
                                     for k, s in self.terms.items()))

    def is_real(self, tol=1e-12):
        return all(s.is_real(tol) for s in self.terms.values())

    def without_jet(self):
        return self._new(OrderedDict(
            (k, s.copy()) for k, s in self.terms.items()
            if weighted_degree(k) > JET_DEGREE))

    def max_coefficient(self):
        return max([s.max_coefficient() for s in self.terms.values()] or
                   [0.0])

    def allclose(self, other, atol=1e-12):
        return (self - other).max_coefficient() <= atol

    def evaluate(self, r, theta, zeta):
        """Complex value at a point; real for real points of a real h."""
        r = np.asarray(r, dtype=complex)
        zeta = np.asarray(zeta, dtype=complex)
        total = 0.0j
        for (alpha, m), series in self.terms.items():
            if isinstance(series, MonomialSeries):
                value = series.evaluate(theta, zeta)
            else:
                value = series.evaluate(theta)
                if m:
                    value = value.dot(zeta)
            total += value * np.prod(r ** np.array(alpha))
        return complex(total)


class Jet(PolyHamiltonian):
    """h_theta + <h_r, r> + <h_zeta, zeta> + 1/2 <h_zetazeta zeta, zeta>."""

    def __init__(self, clustering, lattice, terms=None):
        super(Jet, self).__init__(clustering, lattice, JET_DEGREE, terms)

    def _new(self, terms, lattice=None, d_max=None):
        return Jet(self.clustering, lattice or self.lattice, terms)

    @classmethod
    def zero(cls, clustering, lattice):
        return cls(clustering, lattice)

    @classmethod
    def from_components(cls, clustering, lattice, theta=None, r=None,
                        zeta=None, zetazeta=None):
        """Jet from its parts; zetazeta is the matrix M of
        1/2 <M zeta, zeta>, or the MonomialSeries of that form.
        """
        jet = cls(clustering, lattice)
        zero = (0,) * lattice.n
        if theta is not None:
            jet.set_term((zero, 0), theta)
        if r is not None:
            for i in range(lattice.n):
                alpha = tuple(int(i == j) for j in range(lattice.n))
                jet.set_term((alpha, 0),
                             FourierSeries(r.lattice, r.coeffs[:, i]))
        if zeta is not None:
            jet.set_term((zero, 1), zeta)
        if isinstance(zetazeta, MonomialSeries):
            jet.set_term((zero, 2), zetazeta)
        elif zetazeta is not None:
            coeffs = 0.25 * (zetazeta.coeffs +
                             np.swapaxes(zetazeta.coeffs, 1, 2))
            jet.set_term((zero, 2), FourierSeries(zetazeta.lattice, coeffs))
        return jet

    @property
    def theta(self):
        return self.term((0,) * self.n, 0)

    @property
    def r(self):
        coeffs = np.zeros((len(self.lattice), self.n), dtype=complex)
        for i in range(self.n):
            alpha = tuple(int(i == j) for j in range(self.n))
            coeffs[:, i] = self.term(alpha, 0).coeffs
        return FourierSeries(self.lattice, coeffs)

    @property
    def zeta(self):
        return self.term((0,) * self.n, 1)

    @property
    def quadratic_form(self):
        return self.term((0,) * self.n, 2)

    @property
    def zetazeta(self):
        """Dense matrices M of the quadratic part 1/2 <M zeta, zeta>."""
        return 2.0 * self.quadratic_form.to_dense()

    def component(self, part):
        if part not in PARTS:
            raise DomainError('Unknown jet part {0}.'.format(part))
        return getattr(self, part)


def jet_of(h):
    """Taylor jet of h at r = 0, zeta = 0."""
    return Jet(h.clustering, h.lattice, OrderedDict(
        (k, s.copy()) for k, s in h.terms.items()
        if weighted_degree(k) <= JET_DEGREE))


def _einsum_outer(m1, m2):
    left = _LETTERS[:m1]
    right = _LETTERS[m1:m1 + m2]
    return '...{0},...{1}->...{0}{1}'.format(left, right)


def _einsum_symplectic(m1, m2):
    rest1 = _LETTERS[2:m1 + 1]
    rest2 = _LETTERS[m1 + 1:m1 + m2]
    return '...a{0},ba,...b{1}->...{0}{1}'.format(rest1, rest2)


def _is_jet(key):
    return weighted_degree(key) <= JET_DEGREE


def _shifted(a1, a2, unit=None):
    alpha = np.add(a1, a2)
    if unit is not None:
        alpha = alpha - unit
    return tuple(int(a) for a in alpha)


def _dropped_mass(budget, kvectors, values):
    l1 = np.abs(kvectors).sum(axis=1)
    return float(np.sum(np.abs(values) * np.exp(budget.sigma * l1)))


class _Accumulator(object):
    """Bracket coefficients gathered as entries on the output lattice.

    Orders m <= 1 are summed into dense arrays, higher orders are
    collected as (row, code, value) chunks and flushed to CSR.
    """

    def __init__(self, clustering, lattice, d_max, budget):
        self.clustering = clustering
        self.lattice = lattice
        self.d_max = d_max
        self.budget = budget
        self.dense = OrderedDict()
        self.pending = OrderedDict()
        self.sparse = OrderedDict()

    def add(self, key, kvectors, codes, values):
        if weighted_degree(key) > self.d_max:
            if self.budget is not None:
                self.budget.add('degree', _dropped_mass(self.budget,
                                                        kvectors, values))
            return
        rows = self.lattice.locate(kvectors)
        outside = rows < 0
        if np.any(outside):
            if self.budget is not None:
                self.budget.add('fourier', _dropped_mass(
                    self.budget, kvectors[outside], values[outside]))
            rows, codes, values = \
                rows[~outside], codes[~outside], values[~outside]
        m = key[1]
        if m < 2:
            if key not in self.dense:
                self.dense[key] = np.zeros(
                    (len(self.lattice),) + (self.clustering.dimension,) * m,
                    dtype=complex)
            np.add.at(self.dense[key], (rows,) if m == 0 else (rows, codes),
                      values)
            return
        chunks = self.pending.setdefault(key, [])
        chunks.append((rows, codes, values))
        if sum(len(chunk[0]) for chunk in chunks) > CHUNK:
            self._flush(key)

    def _flush(self, key):
        chunks = self.pending.pop(key, [])
        if not chunks:
            return
        rows, codes, values = (np.concatenate(part) for part in zip(*chunks))
        series = MonomialSeries.from_entries(
            self.lattice, self.clustering.dimension, key[1], rows, codes,
            values)
        if key in self.sparse:
            series = self.sparse[key] + series
        self.sparse[key] = series

    def finish(self):
        for key in list(self.pending):
            self._flush(key)
        result = PolyHamiltonian(self.clustering, self.lattice, self.d_max)
        for key, coeffs in self.dense.items():
            result.set_term(key, FourierSeries(self.lattice, coeffs))
        for key, series in self.sparse.items():
            result.set_term(key, series)
        return result


def _grid_bracket(f_terms, g_terms, symplectic, full, wanted):
    """Bracket of dense term dicts sampled on one grid, for the
    (m1, m2) pairs accepted by wanted. Exact up to |k|_1 <= K of full.
    """
    n = full.n
    size = 2 * full.k_max + 1
    cache = {}

    def values(side, terms, key, axis=None):
        token = (side, key, axis)
        if token not in cache:
            series = terms[key]
            if axis is not None:
                series = series.derivative(axis)
            cache[token] = series.samples(size)
        return cache[token]

    grids = OrderedDict()

    def accumulate(key, weight, pattern, operands):
        value = weight * np.einsum(pattern, *operands)
        if key in grids:
            grids[key] += value
        else:
            grids[key] = value

    for (a1, m1) in f_terms:
        for (a2, m2) in g_terms:
            if not wanted(m1, m2):
                continue
            k1, k2 = (a1, m1), (a2, m2)
            for i in range(n):
                unit = np.eye(n, dtype=int)[i]
                key = (_shifted(a1, a2, unit), m1 + m2)
                if a1[i] > 0:
                    accumulate(key, a1[i], _einsum_outer(m1, m2),
                               (values(0, f_terms, k1),
                                values(1, g_terms, k2, i)))
                if a2[i] > 0:
                    accumulate(key, -a2[i], _einsum_outer(m1, m2),
                               (values(0, f_terms, k1, i),
                                values(1, g_terms, k2)))
            if m1 > 0 and m2 > 0:
                accumulate((_shifted(a1, a2), m1 + m2 - 2), m1 * m2,
                           _einsum_symplectic(m1, m2),
                           (values(0, f_terms, k1), symplectic,
                            values(1, g_terms, k2)))
    return OrderedDict((key, FourierSeries.from_samples(full, grid).coeffs)
                       for key, grid in grids.items())


def _deposit(result, full, outputs, index, budget):
    """Move dense grid outputs on the coordinates index into result."""
    dimension = result.clustering.dimension
    for key, coeffs in outputs.items():
        m = key[1]
        if m == 0:
            rows = np.flatnonzero(coeffs)
            result.add(key, full.vectors[rows], np.zeros(len(rows), int),
                       coeffs[rows])
        elif m == 1:
            rows, a = np.nonzero(coeffs)
            result.add(key, full.vectors[rows], index[a], coeffs[rows, a])
        else:
            diagonal = np.arange(coeffs.shape[1])
            folded = coeffs + np.swapaxes(coeffs, 1, 2)
            folded[:, diagonal, diagonal] = coeffs[:, diagonal, diagonal]
            folded = folded * np.triu(np.ones(coeffs.shape[1:], dtype=bool))
            noise = np.abs(folded) <= NOISE * np.abs(folded).max(initial=0.0)
            if budget is not None and np.any(noise & (folded != 0)):
                rows = np.nonzero(noise)[0]
                budget.add('roundoff', _dropped_mass(
                    budget, full.vectors[rows], folded[noise]))
            rows, a, b = np.nonzero(np.where(noise, 0.0, folded))
            result.add(key, full.vectors[rows],
                       index[a] * dimension + index[b], folded[rows, a, b])


def _components(clustering, forms):
    """Connected coordinate sets of the zeta-zeta couplings of forms."""
    dimension = clustering.dimension
    pairs = np.arange(0, dimension, 2)
    heads, tails = [pairs], [pairs + 1]
    for form in forms:
        _, codes, values = form.entries()
        strong = np.abs(values) > NOISE * form.max_coefficient()
        heads.append(codes[strong] // dimension)
        tails.append(codes[strong] % dimension)
    heads, tails = np.concatenate(heads), np.concatenate(tails)
    graph = sparse.coo_matrix((np.ones(len(heads)), (heads, tails)),
                              shape=(dimension, dimension))
    return connected_components(graph, directed=False)[1]


def _split_form(form, labels, budget):
    """Dense order-2 tensors of form on every component of labels.

    Couplings across components are dropped and charged to 'chop'.
    """
    dimension = form.dimension
    rows, codes, values = form.entries()
    a, b = codes // dimension, codes % dimension
    across = labels[a] != labels[b]
    if budget is not None and np.any(across):
        budget.add('chop', _dropped_mass(
            budget, form.lattice.vectors[rows[across]], values[across]))
    local = np.zeros(dimension, dtype=int)
    blocks = {}
    for label in np.unique(labels):
        index = np.flatnonzero(labels == label)
        local[index] = np.arange(len(index))
        inside = ~across & (labels[a] == label)
        if not np.any(inside):
            continue
        la, lb = local[a[inside]], local[b[inside]]
        row, value = rows[inside], values[inside]
        tensor = np.zeros((len(form.lattice), len(index), len(index)),
                          dtype=complex)
        split = la != lb
        np.add.at(tensor, (row, la, lb), np.where(split, 0.5 * value, value))
        np.add.at(tensor, (row[split], lb[split], la[split]),
                  0.5 * value[split])
        blocks[label] = FourierSeries(form.lattice, tensor)
    return blocks


def _jet_bracket(f_terms, g_terms, clustering, full, result, budget):
    """Bracket of two jets on grids: once for the parts of order <= 1 and
    once per coupled coordinate set for the parts with a zeta-zeta form.
    """
    symplectic = clustering.symplectic()
    every = np.arange(clustering.dimension)
    low = [OrderedDict((k, s) for k, s in terms.items() if k[1] < 2)
           for terms in (f_terms, g_terms)]
    outputs = _grid_bracket(low[0], low[1], symplectic, full,
                            lambda m1, m2: True)
    _deposit(result, full, outputs, every, budget)
    forms = [OrderedDict((k, s) for k, s in terms.items() if k[1] == 2)
             for terms in (f_terms, g_terms)]
    if not forms[0] and not forms[1]:
        return
    labels = _components(clustering, [s for terms in forms
                                      for s in terms.values()])
    blocks = [OrderedDict((k, _split_form(s, labels, budget))
                          for k, s in terms.items()) for terms in forms]
    for label in np.unique(labels):
        if not any(label in split for side in blocks
                   for split in side.values()):
            continue
        index = np.flatnonzero(labels == label)
        local = []
        for side, terms in enumerate(low):
            restricted = OrderedDict()
            for key, series in terms.items():
                restricted[key] = series if key[1] == 0 else \
                    FourierSeries(series.lattice, series.coeffs[:, index])
            for key, split in blocks[side].items():
                if label in split:
                    restricted[key] = split[label]
            local.append(restricted)
        outputs = _grid_bracket(local[0], local[1],
                                symplectic[np.ix_(index, index)], full,
                                lambda m1, m2: m1 == 2 or m2 == 2)
        _deposit(result, full, outputs, index, budget)


def _table(series, order, axis=None):
    """(frequencies, codes, values) of the nonzero coefficients."""
    if axis is not None:
        series = series.derivative(axis)
    if isinstance(series, MonomialSeries):
        rows, codes, values = series.entries()
    elif order == 0:
        rows = np.flatnonzero(series.coeffs)
        codes = np.zeros(len(rows), dtype=np.int64)
        values = series.coeffs[rows]
    else:
        rows, codes = np.nonzero(series.coeffs)
        values = series.coeffs[rows, codes]
    return series.lattice.vectors[rows], codes.astype(np.int64), values


def _gradients(series, order, dimension):
    """Blocks (frequencies, rest codes, operator) whose operator rows are
    the zeta-gradients of the monomials of series, one block per row of
    a MonomialSeries and a single block for a vector series.
    """
    if order == 1:
        rows = np.flatnonzero(np.any(series.coeffs != 0, axis=1))
        if len(rows):
            yield (series.lattice.vectors[rows],
                   np.zeros(len(rows), dtype=np.int64),
                   sparse.csr_matrix(series.coeffs[rows]))
        return
    for row in series.support():
        codes, values = series.row_entries(row)
        tuples = series.tuples(codes)
        rests, columns, weights = [], [], []
        for j in range(order):
            first = np.ones(len(codes), dtype=bool) if j == 0 else \
                tuples[:, j] != tuples[:, j - 1]
            counts = np.sum(tuples == tuples[:, [j]], axis=1)
            rests.append(encode(np.delete(tuples[first], j, axis=1),
                                dimension))
            columns.append(tuples[first, j])
            weights.append(values[first] * counts[first])
        unique, local = np.unique(np.concatenate(rests), return_inverse=True)
        operator = sparse.csr_matrix(
            (np.concatenate(weights), (local, np.concatenate(columns))),
            shape=(len(unique), dimension))
        yield (np.repeat(series.lattice.vectors[row][None], len(unique), 0),
               unique, operator)


def _outer(result, key, weight, left, m1, right, m2, dimension):
    kv1, c1, v1 = left
    kv2, c2, v2 = right
    if not len(v1) or not len(v2):
        return
    step = max(1, CHUNK // len(v2))
    for start in range(0, len(v1), step):
        i = np.repeat(np.arange(start, min(start + step, len(v1))), len(v2))
        j = np.tile(np.arange(len(v2)), len(i) // len(v2))
        result.add(key, kv1[i] + kv2[j],
                   merge_codes(c1[i], m1, c2[j], m2, dimension),
                   weight * v1[i] * v2[j])


def _contract(result, key, left, m1, right, m2, transposed, dimension):
    for kv1, r1, op1 in left:
        turned = op1.dot(transposed)
        for kv2, r2, op2 in right:
            product = turned.dot(op2.T).tocoo()
            i, j = product.row, product.col
            result.add(key, kv1[i] + kv2[j],
                       merge_codes(r1[i], m1 - 1, r2[j], m2 - 1, dimension),
                       product.data)


def _direct_bracket(f, g, result, budget, skip_jets):
    """Bracket computed on the stored coefficients, pair by pair.

    Pieces above d_max are charged to 'degree'; pieces above the jet
    degree whose majorant the budget may still absorb are chopped.
    """
    n = f.n
    dimension = f.clustering.dimension
    transposed = sparse.csr_matrix(f.clustering.symplectic().T)
    sigma = budget.sigma if budget is not None else 0.0
    tables, gradients = {}, {}

    def table(side, key, series, axis=None):
        token = (side, key, axis)
        if token not in tables:
            tables[token] = _table(series, key[1], axis)
        return tables[token]

    def gradient(side, key, series):
        token = (side, key)
        if token not in gradients:
            gradients[token] = list(_gradients(series, key[1], dimension))
        return gradients[token]

    def mass(series, axis=None):
        if axis is not None:
            series = series.derivative(axis)
        return series.mass(sigma)

    def admit(key, bound):
        if weighted_degree(key) > result.d_max:
            if budget is not None:
                budget.add('degree', bound)
            return False
        if budget is not None and not _is_jet(key):
            return not budget.chop(bound * budget.mu ** weighted_degree(key))
        return True

    for (a1, m1), s1 in f.terms.items():
        for (a2, m2), s2 in g.terms.items():
            k1, k2 = (a1, m1), (a2, m2)
            if skip_jets and _is_jet(k1) and _is_jet(k2):
                continue
            for i in range(n):
                unit = np.eye(n, dtype=int)[i]
                key = (_shifted(a1, a2, unit), m1 + m2)
                if a1[i] > 0 and admit(
                        key, a1[i] * mass(s1) * mass(s2, i)):
                    _outer(result, key, a1[i], table(0, k1, s1), m1,
                           table(1, k2, s2, i), m2, dimension)
                if a2[i] > 0 and admit(
                        key, a2[i] * mass(s1, i) * mass(s2)):
                    _outer(result, key, -a2[i], table(0, k1, s1, i), m1,
                           table(1, k2, s2), m2, dimension)
            if m1 > 0 and m2 > 0:
                key = (_shifted(a1, a2), m1 + m2 - 2)
                if admit(key, m1 * m2 * mass(s1) * mass(s2)):
                    _contract(result, key, gradient(0, k1, s1), m1,
                              gradient(1, k2, s2), m2, transposed,
                              dimension)


def poisson(f, g, lattice=None, d_max=None, budget=None):
    """{f, g} = grad_r f . grad_theta g - grad_theta f . grad_r g
    + <J grad_zeta f, grad_zeta g>.

    Products are exact up to |k|_1 <= K_f + K_g; lattice truncates the
    result and the dropped mass goes to budget, as does the mass of terms
    above d_max. Jet against jet runs on Fourier grids split by coupled
    coordinate sets; every other pair runs on the stored monomials.
    """
    if f.clustering != g.clustering or f.n != g.n:
        raise ClusteringMismatch('Bracket of Hamiltonians on different '
                                 'spaces.')
    d_max = max(f.d_max, g.d_max) if d_max is None else d_max
    full = get_lattice(f.n, f.lattice.k_max + g.lattice.k_max)
    result = _Accumulator(f.clustering, lattice or full, d_max, budget)
    jets = [OrderedDict((k, s) for k, s in h.terms.items() if _is_jet(k))
            for h in (f, g)]
    both = bool(jets[0]) and bool(jets[1])
    if both:
        _jet_bracket(jets[0], jets[1], f.clustering, full, result, budget)
    _direct_bracket(f, g, result, budget, both)
    return result.finish()


def poisson_jet(f, g, lattice=None, budget=None):
    return jet_of(poisson(f, g, lattice=lattice, budget=budget))


def _form_block_norms(form, clustering):
    """HS norms of the level blocks of M, per row, for the quadratic form
    1/2 <M zeta, zeta> held as sorted monomials.
    """
    levels = coordinate_levels(clustering)
    count = len(clustering.weights)
    dimension = form.dimension
    rows, codes, values = form.entries()
    a, b = codes // dimension, codes % dimension
    squares = np.abs(values) ** 2
    squares = np.where(a == b, 4.0 * squares, squares)
    table = np.zeros((len(form.lattice), count, count))
    np.add.at(table, (rows, levels[a], levels[b]), squares)
    split = a != b
    np.add.at(table, (rows[split], levels[b[split]], levels[a[split]]),
              squares[split])
    return np.sqrt(table)


def jet_norm(f, sigma, mu, s, beta, plus=False):
    """Majorant norm [f]^{s,beta}_{sigma,mu} of the jet of f.

    Max of N(f_theta), mu^2 N(|f_r|), mu N(||f_zeta||_s),
    mu N(|f_zeta|_beta) and mu^2 N(|f_zetazeta|_beta); the plus variant
    adds mu N(|f_zeta|_beta+) + mu^2 N(|f_zetazeta|_beta+).
    """
    if not (0 < mu <= 1) or sigma <= 0:
        raise DomainError('jet_norm needs 0 < sigma and 0 < mu <= 1.')
    jet = f if isinstance(f, Jet) else jet_of(f)
    clustering = jet.clustering
    zeta = jet.zeta
    blocks = _form_block_norms(jet.quadratic_form, clustering)
    weights = jet.lattice.weights(sigma)

    def vector(norm, *args):
        return zeta.majorant(
            sigma, lambda c: norm(ModeVector(clustering, c), *args))

    def matrix(plus_variant):
        return float(np.sum(weights * block_table_norm(
            clustering, blocks, beta, plus=plus_variant)))

    value = max(jet.theta.majorant(sigma),
                mu ** 2 * jet.r.majorant(sigma),
                mu * vector(norm_s, s),
                mu * vector(norm_beta_vector, beta),
                mu ** 2 * matrix(False))
    if plus:
        value += mu * vector(norm_beta_plus_vector, beta) + \
            mu ** 2 * matrix(True)
    return float(value)


def poly_norm(h, sigma, mu, s):
    """Bound of sup |h| over |Im theta| < sigma, |r| < mu^2,
    ||zeta||_s < mu.
    """
    weights = h.clustering.coordinate_weights ** (-float(s))
    total = 0.0
    for key, series in h.terms.items():
        mass = series.mass(sigma, weights if key[1] else None)
        total += mu ** weighted_degree(key) * mass
    return total


def hamiltonian_norm(h, sigma, mu, s, beta):
    """Size of h: the jet norm of its jet and the majorant of the rest."""
    return max(jet_norm(jet_of(h), sigma, mu, s, beta),
               poly_norm(h.without_jet(), sigma, mu, s))


def split_remainder(h, sigma, mu, mu_prime):
    """Jet of h and the measured size of h - h^T at the smaller radius.

    :return: (Jet, report) where report holds the remainder norm at
        mu_prime, the norm of h at mu, their ratio and the bound
        2 (mu_prime / mu)^3.
    """
    if not 0 < mu_prime < mu:
        raise DomainError('split_remainder needs 0 < mu_prime < mu.')
    jet = jet_of(h)
    remainder = poly_norm(h.without_jet(), sigma, mu_prime, 0.0)
    whole = poly_norm(h, sigma, mu, 0.0)
    bound = 2.0 * (mu_prime / mu) ** 3
    report = OrderedDict([
        ('remainder', remainder),
        ('norm', whole),
        ('ratio', remainder / whole if whole else 0.0),
        ('bound', bound),
    ])
    if report['ratio'] > bound * (1.0 + 1e-12):
        raise InvariantError(
            'Remainder ratio {0} exceeds {1}.'.format(report['ratio'], bound))
    return jet, report


def _pair(value):
    return [float(np.real(value)), float(np.imag(value))]


def _encode(array):
    if np.ndim(array) == 0:
        return _pair(array)
    return [_encode(item) for item in array]


def _decode(data):
    data = np.asarray(data, dtype=float)
    return data[..., 0] + 1.0j * data[..., 1]


def jet_to_dict(jet):
    """JSON fixture: nonzero coefficients per frequency and part."""
    terms = []
    for part in PARTS:
        series = jet.component(part)
        for i, k in enumerate(jet.lattice.vectors):
            value = series.coeffs[i]
            if np.any(value != 0):
                terms.append(OrderedDict([
                    ('k', [int(c) for c in k]),
                    ('part', part),
                    ('data', _encode(value)),
                ]))
    return OrderedDict([('n', jet.n), ('K_max', jet.lattice.k_max),
                        ('dimension', jet.dimension), ('terms', terms)])


def jet_from_dict(data, clustering):
    lattice = get_lattice(int(data['n']), int(data['K_max']))
    if int(data.get('dimension', clustering.dimension)) != \
            clustering.dimension:
        raise ClusteringMismatch('Fixture dimension does not match.')
    dimension = clustering.dimension
    shapes = {'theta': (), 'r': (lattice.n,), 'zeta': (dimension,),
              'zetazeta': (dimension, dimension)}
    parts = dict((part, FourierSeries(lattice, value_shape=shapes[part]))
                 for part in PARTS)
    for term in data.get('terms', []):
        part = term['part']
        if part not in parts:
            raise DomainError('Unknown jet part {0}.'.format(part))
        index = lattice.index[tuple(term['k'])]
        parts[part].coeffs[index] = _decode(term['data'])
    return Jet.from_components(clustering, lattice, **parts)
