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

import struct
from collections import OrderedDict

import numpy as np

from lattice_kam_sdk import (
    ClusteringMismatch,
    DomainError,
    EigenError,
)

JACOBI_TOL = 1e-14
JACOBI_SWEEPS = 100
HERMITIAN_TOL = 1e-12
REAL_PQ = 'real_pq'
COMPLEX_XIETA = 'complex_xieta'
DUMP_MAGIC = b'LKBM'
FLAG_SYMMETRIC = 1
FLAG_SCALAR = 2
FLAG_COMPLEX = 4

_UNIT = np.array([[1.0, 1.0], [-1.0j, 1.0j]]) / np.sqrt(2.0)


def change_of_variables(clustering):
    """Direct product of the per-mode U_a; zeta = U (xi, eta)."""
    return np.kron(np.eye(clustering.size), _UNIT)


class ModeVector(object):
    """Per-mode pairs (p_a, q_a) or (xi_a, eta_a) over a clustering."""

    def __init__(self, clustering, data=None, representation=REAL_PQ):
        self.clustering = clustering
        self.representation = representation
        dtype = float if representation == REAL_PQ else complex
        if data is None:
            data = np.zeros(clustering.dimension, dtype=dtype)
        data = np.asarray(data)
        if data.shape != (clustering.dimension,):
            raise ClusteringMismatch(
                'Vector of shape {0} on a {1}-dimensional mode set.'.format(
                    data.shape, clustering.dimension))
        self.data = data

    @classmethod
    def on_mode(cls, clustering, a, pair):
        vector = cls(clustering, np.zeros(clustering.dimension,
                                          dtype=np.asarray(pair).dtype))
        i = clustering.index[a]
        vector.data[2 * i:2 * i + 2] = pair
        return vector

    def block(self, w):
        return self.data[self.clustering.real_slice(w)]

    def mode(self, a):
        i = self.clustering.index[a]
        return self.data[2 * i:2 * i + 2]

    def level_norms(self):
        return np.array([np.linalg.norm(self.block(w))
                         for w in self.clustering.weights])

    def is_real_subspace(self, tol=1e-12):
        if self.representation == REAL_PQ:
            return bool(np.all(np.isreal(self.data)))
        return bool(np.allclose(self.data[1::2], np.conj(self.data[0::2]),
                                atol=tol))

    def __add__(self, other):
        _check_same(self, other)
        return ModeVector(self.clustering, self.data + other.data,
                          self.representation)

    def __sub__(self, other):
        _check_same(self, other)
        return ModeVector(self.clustering, self.data - other.data,
                          self.representation)

    def __mul__(self, scale):
        return ModeVector(self.clustering, scale * self.data,
                          self.representation)

    __rmul__ = __mul__


def level_weights(clustering):
    return np.array([max(w, 1) for w in clustering.weights], dtype=float)


def coordinate_levels(clustering):
    """Level position of every real coordinate."""
    levels = np.empty(clustering.dimension, dtype=int)
    for i, w in enumerate(clustering.weights):
        levels[clustering.real_slice(w)] = i
    return levels


def norm_s(vector, s):
    """||zeta||_s with ||zeta||_s^2 = sum_a |zeta_a|^2 w_a^{2s}."""
    cells = np.abs(vector.data.reshape(-1, 2)) ** 2
    weights = vector.clustering.mode_weights ** (2.0 * s)
    return float(np.sqrt(np.sum(cells.sum(axis=1) * weights)))


def norm_beta_vector(vector, beta):
    """|zeta|_beta = sup_a w_a^beta |zeta_[a]|."""
    if not vector.clustering.size:
        return 0.0
    weights = level_weights(vector.clustering)
    return float(np.max(weights ** beta * vector.level_norms()))


def norm_beta_plus_vector(vector, beta):
    return norm_beta_vector(vector, beta + 1.0)


class BlockMatrix(object):
    """Matrix over a clustering, stored dense and read by level blocks.

    Real matrices act on the (p, q) coordinates and have size 2d; scalar
    matrices (Q = A_1 + i A_2) are complex of size d.
    """

    def __init__(self, clustering, data=None, scalar=False, symmetric=True):
        self.clustering = clustering
        self.scalar = scalar
        self.symmetric = symmetric
        size = clustering.size if scalar else clustering.dimension
        if data is None:
            data = np.zeros((size, size), dtype=complex if scalar else float)
        data = np.asarray(data)
        if data.shape != (size, size):
            raise ClusteringMismatch(
                'Matrix of shape {0} on a mode set of size {1}.'.format(
                    data.shape, size))
        self.data = data

    @classmethod
    def identity(cls, clustering, scalar=False):
        size = clustering.size if scalar else clustering.dimension
        return cls(clustering, np.eye(size, dtype=complex if scalar
                                      else float), scalar=scalar)

    @classmethod
    def from_blocks(cls, clustering, blocks, scalar=False, symmetric=True):
        matrix = cls(clustering, scalar=scalar, symmetric=symmetric)
        if blocks and any(np.iscomplexobj(b) for b in blocks.values()):
            matrix.data = matrix.data.astype(complex)
        for (wa, wb), value in blocks.items():
            matrix.block(wa, wb)[...] = value
            if symmetric and wa != wb:
                matrix.block(wb, wa)[...] = np.transpose(value)
        return matrix

    def _slice(self, w):
        if self.scalar:
            return self.clustering.mode_slices[w]
        return self.clustering.real_slice(w)

    def block(self, wa, wb):
        return self.data[self._slice(wa), self._slice(wb)]

    def block_norms(self):
        """HS norm of every level block, as an array indexed by levels."""
        starts = [self._slice(w).start for w in self.clustering.weights]
        if not starts:
            return np.zeros((0, 0))
        squares = np.abs(self.data) ** 2
        squares = np.add.reduceat(squares, starts, axis=0)
        return np.sqrt(np.add.reduceat(squares, starts, axis=1))

    def is_symmetric(self, tol=1e-12):
        return bool(np.allclose(self.data, self.data.T, atol=tol))

    def copy(self):
        return BlockMatrix(self.clustering, self.data.copy(), self.scalar,
                           self.symmetric)

    @property
    def T(self):
        return BlockMatrix(self.clustering, self.data.T.copy(), self.scalar,
                           self.symmetric)

    def __add__(self, other):
        _check_same(self, other)
        return BlockMatrix(self.clustering, self.data + other.data,
                           self.scalar, self.symmetric and other.symmetric)

    def __sub__(self, other):
        _check_same(self, other)
        return BlockMatrix(self.clustering, self.data - other.data,
                           self.scalar, self.symmetric and other.symmetric)

    def __neg__(self):
        return BlockMatrix(self.clustering, -self.data, self.scalar,
                           self.symmetric)

    def __mul__(self, scale):
        return BlockMatrix(self.clustering, scale * self.data, self.scalar,
                           self.symmetric)

    __rmul__ = __mul__


def _check_same(left, right):
    if left.clustering != right.clustering:
        raise ClusteringMismatch('Operands live on different mode sets.')
    if getattr(left, 'scalar', None) != getattr(right, 'scalar', None):
        raise ClusteringMismatch('Cannot combine real and scalar matrices.')


def block_table_norm(clustering, norms, beta, plus=False):
    """|.|_beta, or |.|_beta+ with plus, from level-block HS norms.

    norms may carry leading axes; the sup runs over the last two.
    """
    if beta < 0:
        raise DomainError('beta must be nonnegative, got {0}.'.format(beta))
    norms = np.asarray(norms)
    if not clustering.size:
        return np.zeros(norms.shape[:-2])
    levels = level_weights(clustering)
    weights = levels ** beta
    scale = np.outer(weights, weights)
    if plus:
        scale = scale * (1.0 + np.abs(levels[:, None] - levels[None, :]))
    return np.max(scale * norms, axis=(-2, -1))


def norm_beta(matrix, beta):
    """|A|_beta = sup_{a,b} w_a^beta w_b^beta ||A_[a]^[b]||_HS."""
    return float(block_table_norm(matrix.clustering, matrix.block_norms(),
                                  beta))


def norm_beta_plus(matrix, beta):
    """|A|_beta+ adds the factor (1 + |w_a - w_b|) to norm_beta."""
    return float(block_table_norm(matrix.clustering, matrix.block_norms(),
                                  beta, plus=True))


def mul(left, right):
    """Blockwise product, summed over intermediate levels in ascending
    order.
    """
    _check_same(left, right)
    dtype = np.result_type(left.data, right.data)
    product = BlockMatrix(left.clustering, scalar=left.scalar,
                          symmetric=False)
    product.data = np.zeros_like(left.data, dtype=dtype)
    for wk in left.clustering.weights:
        columns = left._slice(wk)
        product.data += left.data[:, columns].dot(right.data[columns, :])
    return product


def apply(matrix, vector):
    if matrix.clustering != vector.clustering:
        raise ClusteringMismatch('Matrix and vector mode sets differ.')
    if matrix.scalar:
        raise ClusteringMismatch('apply expects a real (p, q) matrix.')
    return ModeVector(vector.clustering, matrix.data.dot(vector.data),
                      vector.representation)


def outer(left, right):
    if left.clustering != right.clustering:
        raise ClusteringMismatch('Outer product of different mode sets.')
    return BlockMatrix(left.clustering, np.outer(left.data, right.data),
                       symmetric=False)


def nf_project(matrix):
    """Orthogonal projection onto the normal form class.

    Off-diagonal level blocks are dropped and each 2x2 cell of a diagonal
    block is replaced by its Frobenius projection x I + y J.
    """
    projected = BlockMatrix(matrix.clustering, symmetric=True)
    for w in matrix.clustering.weights:
        size = matrix.clustering.cardinality(w)
        cells = matrix.block(w, w).real.reshape(size, 2, size, 2)
        x = 0.5 * (cells[:, 0, :, 0] + cells[:, 1, :, 1])
        y = 0.5 * (cells[:, 1, :, 0] - cells[:, 0, :, 1])
        out = np.empty_like(cells)
        out[:, 0, :, 0] = x
        out[:, 1, :, 1] = x
        out[:, 1, :, 0] = y
        out[:, 0, :, 1] = -y
        projected.block(w, w)[...] = out.reshape(2 * size, 2 * size)
    return projected


def is_normal_form(matrix, tol=1e-12):
    scale = max(np.linalg.norm(matrix.data), 1.0)
    if np.iscomplexobj(matrix.data) and \
            np.abs(matrix.data.imag).max(initial=0.0) > tol * scale:
        return False
    deviation = np.linalg.norm(matrix.data - nf_project(matrix).data)
    return bool(deviation <= tol * scale and matrix.is_symmetric(tol * scale))


def to_complex(matrix):
    """M = U^T A U in the interleaved (xi_a, eta_a) coordinates."""
    if matrix.scalar:
        raise DomainError('to_complex expects a real (p, q) matrix.')
    unitary = change_of_variables(matrix.clustering)
    return BlockMatrix(matrix.clustering,
                       unitary.T.dot(matrix.data).dot(unitary),
                       symmetric=matrix.symmetric)


def xi_eta_part(complex_matrix):
    """Scalar matrix Q with q(zeta) = <xi, Q eta>."""
    return BlockMatrix(complex_matrix.clustering,
                       complex_matrix.data[0::2, 1::2].copy(),
                       scalar=True, symmetric=False)


def from_complex(complex_matrix):
    """Inverse of to_complex; a scalar Q is read as the xi-eta part."""
    clustering = complex_matrix.clustering
    if complex_matrix.scalar:
        data = np.zeros((clustering.dimension, clustering.dimension),
                        dtype=complex)
        data[0::2, 1::2] = complex_matrix.data
        data[1::2, 0::2] = complex_matrix.data.T
    else:
        data = complex_matrix.data
    unitary = change_of_variables(clustering)
    real = np.conj(unitary).dot(data).dot(unitary.conj().T)
    return BlockMatrix(clustering, real.real.copy(), symmetric=True)


def vector_to_complex(vector):
    unitary = change_of_variables(vector.clustering)
    return ModeVector(vector.clustering, unitary.conj().T.dot(vector.data),
                      COMPLEX_XIETA)


def vector_from_complex(vector):
    unitary = change_of_variables(vector.clustering)
    return ModeVector(vector.clustering, unitary.dot(vector.data).real,
                      REAL_PQ)


def hermitian_eig(matrix, tol=JACOBI_TOL, max_sweeps=JACOBI_SWEEPS):
    """Cyclic complex Jacobi eigensolver for a small Hermitian block.

    :param matrix: Square complex array (or scalar BlockMatrix).
    :return: (eigenvalues ascending, unitary eigenvectors as columns).
    """
    h = np.array(getattr(matrix, 'data', matrix), dtype=complex)
    size = h.shape[0]
    scale = np.linalg.norm(h)
    if np.linalg.norm(h - h.conj().T) > HERMITIAN_TOL * scale:
        raise EigenError('Block is not Hermitian within {0}.'.format(
            HERMITIAN_TOL))
    h = 0.5 * (h + h.conj().T)
    vectors = np.eye(size, dtype=complex)
    for sweep in range(max_sweeps + 1):
        off = np.linalg.norm(h - np.diag(np.diag(h)))
        if off <= tol * scale:
            break
        if sweep == max_sweeps:
            raise EigenError(
                'Jacobi sweeps did not converge after {0} sweeps.'.format(
                    max_sweeps))
        for p in range(size - 1):
            for q in range(p + 1, size):
                modulus = abs(h[p, q])
                if modulus == 0.0:
                    continue
                phase = np.exp(-1.0j * np.angle(h[p, q]))
                tau = (h[q, q].real - h[p, p].real) / (2.0 * modulus)
                t = (1.0 if tau >= 0 else -1.0) / \
                    (abs(tau) + np.sqrt(1.0 + tau * tau))
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = t * cs
                rotation = np.array([[cs, sn],
                                     [-sn * phase, cs * phase]])
                pair = [p, q]
                h[:, pair] = h[:, pair].dot(rotation)
                h[pair, :] = rotation.conj().T.dot(h[pair, :])
                vectors[:, pair] = vectors[:, pair].dot(rotation)
                h[p, q] = h[q, p] = 0.0
    values = np.diag(h).real
    order = np.argsort(values, kind='stable')
    values = values[order]
    vectors = vectors[:, order]
    for column in range(size):
        entries = vectors[:, column]
        lead = np.flatnonzero(np.abs(entries) > 1e-12)
        if len(lead):
            pivot = entries[lead[0]]
            vectors[:, column] = entries * np.conj(pivot) / abs(pivot)
    return values, vectors


def hamiltonian_spectrum(matrix):
    """Eigenvalues of the complexified normal form; J A has spectrum
    {+-i lambda}.
    """
    values = []
    scalar = xi_eta_part(to_complex(matrix))
    for w in matrix.clustering.weights:
        block = scalar.block(w, w)
        values.extend(hermitian_eig(block)[0])
    return np.array(values)


def truncated_constants(clustering, beta, s):
    """Finite-sum constants of the block calculus inequalities.

    Keys 'i' to 'viii' follow the order: AB in M_beta, AB in M_beta+,
    A zeta from Y_s, A zeta from L_beta+, A zeta from Y_s (s >= 1), the
    two beta+ images, and the outer product.
    """
    k = level_weights(clustering)
    a = k[:, None]
    kernel = 1.0 / (1.0 + np.abs(a - k[None, :]))
    constants = OrderedDict()
    constants['i'] = float(np.max(kernel.dot(k ** (-2.0 * beta))))
    pair = np.einsum('ak,bk,k->ab', kernel, kernel, k ** (-2.0 * beta))
    constants['ii'] = float(np.max((1.0 + np.abs(a - k[None, :])) * pair))
    constants['iii'] = float(np.max(kernel.dot(k ** (-beta))))
    constants['iv'] = float(np.sum(k ** (-1.0 - 2.0 * beta)))
    constants['v'] = float(np.sum(k ** (-s - beta)))
    constants['vi'] = float(np.max(k * kernel.dot(k ** (-s - beta))))
    constants['vii'] = float(np.max(k * kernel.dot(k ** (-1.0 - 2.0 * beta))))
    constants['viii'] = 1.0
    return constants


def dump(matrix, stream, beta=0.0):
    """Binary fixture: header then (a-level, b-level, block) records."""
    is_complex = np.iscomplexobj(matrix.data)
    flags = (FLAG_SYMMETRIC if matrix.symmetric else 0) | \
        (FLAG_SCALAR if matrix.scalar else 0) | \
        (FLAG_COMPLEX if is_complex else 0)
    weights = matrix.clustering.weights
    stream.write(DUMP_MAGIC)
    stream.write(struct.pack('<qdqq', matrix.clustering.w_max, beta, flags,
                             len(weights) ** 2))
    for wa in weights:
        for wb in weights:
            block = np.ascontiguousarray(matrix.block(wa, wb))
            stream.write(struct.pack('<qq', wa, wb))
            if is_complex:
                stream.write(block.astype('<c16').view('<f8').tobytes())
            else:
                stream.write(block.astype('<f8').tobytes())


def load(stream, clustering):
    """Read a dump back; returns (BlockMatrix, beta)."""
    if stream.read(4) != DUMP_MAGIC:
        raise DomainError('Not a block matrix dump.')
    w_max, beta, flags, count = struct.unpack('<qdqq', stream.read(32))
    if w_max != clustering.w_max:
        raise ClusteringMismatch(
            'Dump was written for W_max={0}, got {1}.'.format(
                w_max, clustering.w_max))
    scalar = bool(flags & FLAG_SCALAR)
    is_complex = bool(flags & FLAG_COMPLEX)
    matrix = BlockMatrix(clustering, scalar=scalar,
                         symmetric=bool(flags & FLAG_SYMMETRIC))
    if is_complex:
        matrix.data = matrix.data.astype(complex)
    for _ in range(count):
        wa, wb = struct.unpack('<qq', stream.read(16))
        target = matrix.block(wa, wb)
        width = 16 if is_complex else 8
        raw = stream.read(target.size * width)
        values = np.frombuffer(raw, dtype='<f8')
        if is_complex:
            values = values.view('<c16')
        target[...] = values.reshape(target.shape)
    return matrix, beta
