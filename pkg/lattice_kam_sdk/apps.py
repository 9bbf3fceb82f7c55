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
import logging
import math
import string
from collections import OrderedDict

import numpy as np
import sympy
from scipy.special import binom, gammaln, lpmv

from lattice_kam_sdk import DomainError, QuadratureError
from lattice_kam_sdk.homo import NormalFormHam
from lattice_kam_sdk.jets import (
    D_MAX,
    K_MAX,
    NOISE,
    PolyHamiltonian,
    jet_of,
    weighted_degree,
)
from lattice_kam_sdk.modes import (
    KG_S2,
    QHO_R2,
    ModeIndex,
    normal_clustering,
)
from lattice_kam_sdk.series import (
    FourierSeries,
    MonomialSeries,
    encode,
    get_lattice,
    repeat_factorials,
)

X_GUARD = 36.0
QUADRATURE_TOL = 1e-8
QUADRATURE_REFINEMENTS = 2
HARTREE_WIDTH = 1.0
ASSEMBLY_CHOP = 1e-12

_u = sympy.Symbol('u')
KG_NONLINEARITIES = OrderedDict([
    ('zero', sympy.Integer(0)),
    ('u', _u ** 2 / 2),
    ('u2', _u ** 3 / 3),
    ('u3', _u ** 4 / 4),
    ('sin', 1 - sympy.cos(_u)),
])
QHO_NONLINEARITIES = ['zero', 'nls+', 'nls-', 'hartree']


def sph_harmonic(j, l, point):
    """Real orthonormal spherical harmonic of degree j and order l.

    :param point: array (..., 2) of (polar, azimuth) angles.
    """
    if j < 0 or abs(l) > j:
        raise DomainError('No spherical harmonic of degree {0}, order '
                          '{1}.'.format(j, l))
    point = np.asarray(point, dtype=float)
    polar, azimuth = point[..., 0], point[..., 1]
    order = abs(l)
    norm = math.sqrt((2 * j + 1) / (4.0 * math.pi) *
                     math.exp(gammaln(j - order + 1) -
                              gammaln(j + order + 1)))
    legendre = lpmv(order, j, np.cos(polar))
    if l == 0:
        return norm * legendre
    if l > 0:
        return math.sqrt(2.0) * norm * legendre * np.cos(order * azimuth)
    return math.sqrt(2.0) * norm * legendre * np.sin(order * azimuth)


def sphere_quadrature(degree, refinement=0):
    """Gauss-Legendre in cos(polar) times a uniform azimuthal grid.

    :return: (points (N, 2), weights (N,)).
    """
    scale = 2 ** refinement
    nodes, weights = np.polynomial.legendre.leggauss(scale * (2 * degree + 4))
    count = scale * (4 * degree + 4)
    azimuth = 2.0 * np.pi * np.arange(count) / count
    polar = np.arccos(nodes)
    grid = np.stack(np.meshgrid(polar, azimuth, indexing='ij'), axis=-1)
    return (grid.reshape(-1, 2),
            np.repeat(weights, count) * (2.0 * np.pi / count))


def hermite(i, x):
    """L2-normalised Hermite function phi_i, odd index i = 2 n + 1 for the
    function of degree n.
    """
    if i < 1 or i % 2 == 0:
        raise DomainError('Hermite index {0} is not a positive odd '
                          'integer.'.format(i))
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > X_GUARD):
        raise DomainError('Hermite argument beyond |x| <= {0}.'.format(
            X_GUARD))
    previous = np.zeros_like(x)
    current = np.pi ** -0.25 * np.exp(-0.5 * x ** 2)
    for n in range((i - 1) // 2):
        previous, current = current, (
            math.sqrt(2.0 / (n + 1)) * x * current -
            math.sqrt(n / (n + 1.0)) * previous)
    return current


def qho_basis(j, l, x):
    """Phi_{j,l}(x) = phi_{2l-1}(x_1) phi_{2j-2l+1}(x_2)."""
    if not 1 <= l <= j:
        raise DomainError('No oscillator mode ({0}, {1}).'.format(j, l))
    x = np.asarray(x, dtype=float)
    return hermite(2 * l - 1, x[..., 0]) * hermite(2 * j - 2 * l + 1,
                                                   x[..., 1])


def qho_kernel(a, x):
    """K_[a](x, x) = sum over the level of a of Phi_c(x)^2."""
    j = a if isinstance(a, int) else ModeIndex(*a).j
    return sum(qho_basis(j, l, x) ** 2 for l in range(1, j + 1))


def plane_quadrature(nodes, refinement=0):
    """Gauss-Hermite product rule, exact for exp(-2|x|^2) times
    polynomials of degree < 2 nodes per axis.
    """
    y, w = np.polynomial.hermite.hermgauss(nodes * 2 ** refinement)
    x = y / math.sqrt(2.0)
    weights = w * np.exp(y ** 2) / math.sqrt(2.0)
    grid = np.stack(np.meshgrid(x, x, indexing='ij'), axis=-1)
    return grid.reshape(-1, 2), np.outer(weights, weights).ravel()


class KGProblem(object):
    """Klein-Gordon on the sphere with nonlinearity g = G'."""

    def __init__(self, model, nonlinearity='u3'):
        if model.kind != KG_S2:
            raise DomainError('KGProblem needs a {0} model.'.format(KG_S2))
        if nonlinearity not in KG_NONLINEARITIES:
            raise DomainError('Unknown nonlinearity {0}; choose from '
                              '{1}.'.format(nonlinearity,
                                            list(KG_NONLINEARITIES)))
        self.model = model
        self.nonlinearity = nonlinearity
        self.primitive = KG_NONLINEARITIES[nonlinearity]

    def derivatives(self, order):
        """G, G', ..., G^(order) as numpy callables."""
        return [sympy.lambdify(_u, sympy.diff(self.primitive, _u, k),
                               'numpy') for k in range(order + 1)]

    @property
    def degree(self):
        return max([a.j for a in self.model.admissible.modes] or [0])

    @property
    def config(self):
        return {'nonlinearity': self.nonlinearity}


class QHOProblem(object):
    """Planar oscillator with a |u|^2 nonlinearity, regularised by
    T^{-beta}.
    """

    def __init__(self, model, nonlinearity='nls+', beta=0.0,
                 hartree_width=HARTREE_WIDTH):
        if model.kind != QHO_R2:
            raise DomainError('QHOProblem needs a {0} model.'.format(QHO_R2))
        if nonlinearity not in QHO_NONLINEARITIES:
            raise DomainError('Unknown nonlinearity {0}; choose from '
                              '{1}.'.format(nonlinearity,
                                            QHO_NONLINEARITIES))
        if beta < 0 or hartree_width <= 0:
            raise DomainError('Need beta >= 0 and a positive Hartree '
                              'width.')
        self.model = model
        self.nonlinearity = nonlinearity
        self.beta = float(beta)
        self.hartree_width = float(hartree_width)

    def interaction(self, points, weights):
        """Q with f = 1/4 rho^T Q rho; a vector stands for a diagonal."""
        if self.nonlinearity == 'nls+':
            return weights
        if self.nonlinearity == 'nls-':
            return -weights
        width = self.hartree_width
        gap = points[:, None, :] - points[None, :, :]
        kernel = np.exp(-0.5 * np.sum(gap ** 2, axis=-1) / width ** 2) / \
            (2.0 * np.pi * width ** 2)
        return weights[:, None] * kernel * weights[None, :]

    @property
    def config(self):
        return {'nonlinearity': self.nonlinearity, 'beta': self.beta,
                'hartree_width': self.hartree_width}


def _theta_grid(n, size):
    nodes = 2.0 * np.pi * np.arange(size) / size
    grid = np.meshgrid(*([nodes] * n), indexing='ij')
    return np.stack([g.ravel() for g in grid], axis=-1)


def _theta_size(k_max, d_max, refinement):
    return (2 * (k_max + d_max) + 5) * 2 ** refinement


def _multi_indices(n, order):
    return [alpha for alpha in itertools.product(range(order + 1), repeat=n)
            if sum(alpha) <= order]


def _rpoly_mul(left, right, order):
    out = OrderedDict()
    for a, x in left.items():
        for b, y in right.items():
            c = tuple(i + j for i, j in zip(a, b))
            if sum(c) <= order:
                out[c] = out[c] + x * y if c in out else x * y
    return out


def _amplitude(model, phases, basis, order, complex_phase, scale):
    """r-Taylor coefficients of the tangential part of the field,
    sum_i sqrt(I_i + r_i) phase_i(theta) basis_i(x) scale_i.
    """
    n = model.n
    zero = (0,) * n
    field = OrderedDict([(zero, 0.0)])
    for i, action in enumerate(model.admissible.actions):
        carrier = np.outer(phases[:, i], basis[:, i]) * scale[i]
        for k in range(order + 1):
            alpha = tuple(k if m == i else 0 for m in range(n))
            term = binom(0.5, k) * action ** (0.5 - k) * carrier
            field[alpha] = field[alpha] + term if alpha in field else term
    if not complex_phase:
        field = OrderedDict((a, np.real(v)) for a, v in field.items())
    return field


def _contract(coefficient, weights, factors):
    letters = string.ascii_lowercase[:len(factors)]
    subscripts = 'tx,x' + ''.join(',x' + c for c in letters) + \
        '->t' + letters
    return np.einsum(subscripts, coefficient, weights, *factors,
                     optimize=True)


def _scatter(samples, slots, dimension, order):
    full = np.zeros(samples.shape[:1] + (dimension,) * order,
                    dtype=samples.dtype)
    index = (slice(None),) + np.ix_(*([slots] * order)) if order else \
        (slice(None),)
    full[index] = samples
    return full


def _to_series(lattice, samples, size):
    shape = (size,) * lattice.n + samples.shape[1:]
    return FourierSeries.from_samples(lattice,
                                      samples.reshape(shape)).symmetrize()


def _sorted_products(normal, order):
    """Sorted mode tuples of one order and the products of their basis
    functions at the quadrature points.
    """
    tuples = np.array(list(itertools.combinations_with_replacement(
        range(normal.shape[1]), order)), dtype=np.int64).reshape(-1, order)
    products = np.ones((normal.shape[0], len(tuples)))
    for j in range(order):
        products = products * normal[:, tuples[:, j]]
    return tuples, products


def _project(lattice, samples, size, weights, normal, order, slots,
             dimension):
    """Sorted-monomial series of int c(theta, x) prod Psi_a(x) p_a dx.

    Every sorted tuple splits once into a lower and an upper half, so a
    frequency row costs one product of the half tables.
    """
    shape = (size,) * lattice.n + samples.shape[1:]
    spectrum = FourierSeries.from_samples(
        lattice, samples.reshape(shape)).coeffs * weights
    sizes = np.abs(spectrum).max(axis=1)
    rows = np.flatnonzero(sizes > NOISE * sizes.max(initial=0.0))
    lower, upper = _sorted_products(normal, order // 2)
    higher, outer = _sorted_products(normal, order - order // 2)
    if order // 2:
        i, j = np.nonzero(lower[:, -1][:, None] <= higher[:, 0][None, :])
    else:
        i, j = np.zeros(len(higher), dtype=int), np.arange(len(higher))
    tuples = np.concatenate([lower[i], higher[j]], axis=1)
    codes = encode(slots[tuples], dimension)
    factor = repeat_factorials(tuples)
    found = []
    for row in rows:
        block = upper.T.dot(spectrum[row].real[:, None] * outer) + \
            1.0j * upper.T.dot(spectrum[row].imag[:, None] * outer)
        found.append(block[i, j] / factor)
    values = np.concatenate(found) if found else np.zeros(0, dtype=complex)
    keep = np.abs(values) > ASSEMBLY_CHOP * np.abs(values).max(initial=0.0)
    series = MonomialSeries.from_entries(
        lattice, dimension, order, np.repeat(rows, len(codes))[keep],
        np.tile(codes, len(rows))[keep], values[keep])
    return series.symmetrize()


def _assemble_kg(problem, clustering, lattice, d_max, refinement):
    model = problem.model
    n = model.n
    degree = max(clustering.w_max, problem.degree)
    points, weights = sphere_quadrature(degree, refinement)
    size = _theta_size(lattice.k_max, d_max, refinement)
    theta = _theta_grid(n, size)
    tangential = np.stack(
        [sph_harmonic(a.j, a.l, points) for a in model.admissible.modes],
        axis=-1)
    scale = [model.normal_eigenvalue(a.j) ** -0.5
             for a in model.admissible.modes]
    order = d_max // 2
    field = _amplitude(model, np.cos(theta), tangential, order, False,
                       scale)
    base = field.pop((0,) * n)
    normal = np.stack(
        [sph_harmonic(a.j, a.l, points) / math.sqrt(
            model.normal_eigenvalue(a.j)) for a in clustering.modes],
        axis=-1)
    slots = 2 * np.arange(clustering.size)
    derivatives = [np.broadcast_to(func(base), base.shape)
                   for func in problem.derivatives(d_max)]

    powers = [OrderedDict([((0,) * n, np.ones_like(base))])]
    for _ in range(order):
        powers.append(_rpoly_mul(powers[-1], field, order))

    f = PolyHamiltonian(clustering, lattice, d_max)
    for m in range(d_max + 1):
        for alpha in _multi_indices(n, (d_max - m) // 2):
            coefficient = np.zeros_like(base)
            for k in range(sum(alpha) + 1):
                if alpha in powers[k]:
                    coefficient = coefficient + derivatives[m + k] * \
                        powers[k][alpha] / math.factorial(k)
            if not np.any(coefficient):
                continue
            if m >= 2:
                f.set_term((alpha, m), _project(
                    lattice, coefficient, size, weights, normal, m, slots,
                    clustering.dimension))
                continue
            samples = _contract(coefficient, weights, [normal] * m)
            samples = _scatter(samples, slots, clustering.dimension, m)
            f.set_term((alpha, m), _to_series(lattice, samples, size))
    return f


def _density(field, base, psi, order):
    """r-Taylor pieces of rho = |u|^2 split by degree in zeta."""
    n = len(next(iter(base)))
    amplitude = OrderedDict(base)
    for alpha, value in field.items():
        amplitude[alpha] = value
    conjugate = OrderedDict((a, np.conj(v)) for a, v in amplitude.items())
    rho = OrderedDict()
    for alpha, value in _rpoly_mul(amplitude, conjugate, order).items():
        rho[(alpha, 0)] = np.real(value)
    for alpha, value in conjugate.items():
        rho[(alpha, 1)] = 2.0 * np.real(value[:, :, None] *
                                        psi[None, :, :])
    rho[((0,) * n, 2)] = np.real(np.conj(psi)[:, :, None] *
                                 psi[:, None, :])[None]
    return rho


def _quartic(left, interaction, right):
    """sum_xy left[t, x, ...] Q[x, y] right[t, y, ...] as a tensor product
    in the trailing axes; a leading axis of length one is shared.
    """
    if interaction.ndim == 1:
        moved = right * interaction.reshape((1, -1) + (1,) * (right.ndim - 2))
    else:
        moved = np.einsum('xy,ty...->tx...', interaction, right)
    count = max(left.shape[0], moved.shape[0])
    left = np.broadcast_to(left, (count,) + left.shape[1:])
    moved = np.broadcast_to(moved, (count,) + moved.shape[1:])
    lhs = string.ascii_lowercase[:left.ndim - 2]
    rhs = string.ascii_lowercase[left.ndim - 2:left.ndim + moved.ndim - 4]
    return np.einsum('tx{0},tx{1}->t{0}{1}'.format(lhs, rhs), left, moved,
                     optimize=True)


def _assemble_qho(problem, clustering, lattice, d_max, refinement):
    model = problem.model
    n = model.n
    points, weights = plane_quadrature(2 * clustering.w_max + 4, refinement)
    size = _theta_size(lattice.k_max, d_max, refinement)
    theta = _theta_grid(n, size)
    beta = problem.beta
    tangential = np.stack(
        [qho_basis(a.j, a.l, points) for a in model.admissible.modes],
        axis=-1)
    scale = [max(a.j, 1) ** -beta for a in model.admissible.modes]
    order = d_max // 2
    field = _amplitude(model, np.exp(1.0j * theta), tangential, order, True,
                       scale)
    base = OrderedDict([((0,) * n, field.pop((0,) * n))])
    psi = np.zeros((len(points), clustering.dimension), dtype=complex)
    for i, a in enumerate(clustering.modes):
        carrier = qho_basis(a.j, a.l, points) * max(a.j, 1) ** -beta / \
            math.sqrt(2.0)
        psi[:, 2 * i] = carrier
        psi[:, 2 * i + 1] = 1.0j * carrier
    rho = _density(field, base, psi, order)
    interaction = problem.interaction(points, weights)

    f = PolyHamiltonian(clustering, lattice, d_max)
    collected = OrderedDict()
    for (a1, m1), left in rho.items():
        for (a2, m2), right in rho.items():
            alpha = tuple(i + j for i, j in zip(a1, a2))
            key = (alpha, m1 + m2)
            if weighted_degree(key) > d_max:
                continue
            piece = 0.25 * _quartic(left, interaction, right)
            collected[key] = collected[key] + piece if key in collected \
                else piece
    for (alpha, m), samples in collected.items():
        if not np.any(samples):
            continue
        samples = np.broadcast_to(samples, (size ** n,) + samples.shape[1:])
        f.set_term((alpha, m), _to_series(lattice, samples, size))
    return f


def _converged(assemble, check, logger):
    previous = assemble(0)
    if not check:
        return previous
    for level in range(1, QUADRATURE_REFINEMENTS + 1):
        current = assemble(level)
        gap = (current - previous).max_coefficient()
        scale = max(1.0, current.max_coefficient())
        logger.debug('Quadrature refinement {0}: gap {1:.3e}.'.format(
            level, gap))
        if gap <= QUADRATURE_TOL * scale:
            return previous
        previous = current
    raise QuadratureError(
        'Quadrature did not settle after {0} refinements, last gap '
        '{1}.'.format(QUADRATURE_REFINEMENTS, gap))


def _initial(model, w_max, rho):
    clustering = normal_clustering(model, w_max)
    if rho is None:
        low, high = model.box
        rho = 0.5 * (low + high)
    return clustering, NormalFormHam.initial(model, clustering, rho)


def kg_build(problem, w_max, d_max=D_MAX, k_max=K_MAX, rho=None, check=True,
             logger=None):
    """(h_0, f) for Klein-Gordon with f = int_S2 G(u(r, theta, zeta)).

    u = sum_A sqrt(I + r) cos(theta) Psi / sqrt(lambda)
      + sum_L p Psi / sqrt(lambda).
    """
    logger = logger or logging.getLogger(__name__)
    clustering, h0 = _initial(problem.model, w_max, rho)
    lattice = get_lattice(problem.model.n, k_max)
    f = _converged(lambda level: _assemble_kg(problem, clustering, lattice,
                                              d_max, level), check, logger)
    logger.info('Assembled KG perturbation {0} on {1} modes: {2} '
                'terms.'.format(problem.nonlinearity, clustering.size,
                                len(f.terms)))
    return h0, f


def qho_build(problem, w_max, d_max=D_MAX, k_max=K_MAX, rho=None,
              check=True, logger=None):
    """(h_0, f) for the oscillator with f = 1/4 rho^T Q rho, rho = |u|^2 and
    u = sum w^{-beta} xi Phi.
    """
    logger = logger or logging.getLogger(__name__)
    clustering, h0 = _initial(problem.model, w_max, rho)
    lattice = get_lattice(problem.model.n, k_max)
    if problem.nonlinearity == 'zero':
        f = PolyHamiltonian(clustering, lattice, d_max)
    else:
        f = _converged(lambda level: _assemble_qho(
            problem, clustering, lattice, d_max, level), check, logger)
    logger.info('Assembled QHO perturbation {0} (beta={1}) on {2} modes: '
                '{3} terms.'.format(problem.nonlinearity, problem.beta,
                                    clustering.size, len(f.terms)))
    return h0, f


def kg_hessian(problem, clustering, theta, refinement=1):
    """Hessian of f in zeta at r = 0, zeta = 0 by direct quadrature,
    int G''(u_1(theta, x)) Psi_a Psi_b / sqrt(lambda_a lambda_b) on the
    p coordinates.
    """
    model = problem.model
    degree = max(clustering.w_max, problem.degree)
    points, weights = sphere_quadrature(degree, refinement)
    field = sum(math.sqrt(action / model.normal_eigenvalue(a.j)) *
                math.cos(angle) * sph_harmonic(a.j, a.l, points)
                for a, action, angle in zip(model.admissible.modes,
                                            model.admissible.actions, theta))
    second = np.broadcast_to(problem.derivatives(2)[2](field + 0.0 * weights),
                             weights.shape)
    normal = np.stack(
        [sph_harmonic(a.j, a.l, points) / math.sqrt(
            model.normal_eigenvalue(a.j)) for a in clustering.modes],
        axis=-1)
    block = np.einsum('x,xa,xb->ab', second * weights, normal, normal)
    hessian = np.zeros((clustering.dimension,) * 2)
    hessian[0::2, 0::2] = block
    return hessian


def hessian_table(f, clustering, beta, sigma=0.0):
    """w_a^beta w_b^beta ||M_[a]^[b]||_HS for the Fourier majorant M of
    the Hessian of f in zeta.
    """
    form = jet_of(f).quadratic_form
    rows, codes, values = form.entries()
    a, b = codes // form.dimension, codes % form.dimension
    amount = form.lattice.weights(sigma)[rows] * np.abs(values)
    split = a != b
    majorant = np.zeros((form.dimension, form.dimension))
    np.add.at(majorant, (a, b), np.where(split, amount, 2.0 * amount))
    np.add.at(majorant, (b[split], a[split]), amount[split])
    table = OrderedDict()
    for wa in clustering.weights:
        for wb in clustering.weights:
            block = majorant[clustering.real_slice(wa),
                             clustering.real_slice(wb)]
            table[(wa, wb)] = float(max(wa, 1) ** beta * max(wb, 1) ** beta *
                                    np.linalg.norm(block))
    return table
