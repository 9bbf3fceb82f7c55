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

import logging
import math
from collections import OrderedDict
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from lattice_kam_sdk import (
    DomainError,
    InvariantError,
    SeriesError,
    SmallnessError,
)
from lattice_kam_sdk.blockmat import ModeVector, norm_s
from lattice_kam_sdk.jets import (
    Jet,
    hamiltonian_norm,
    jet_norm,
    jet_of,
    poisson,
    poly_norm,
)
from lattice_kam_sdk.options import NormOptions
from lattice_kam_sdk.series import FourierSeries

RK_STEPS = 64
LIE_TERMS = 40
LIE_TOL = 1e-16
DEFECT_STEP = 1e-6
SERIES_NODES = 8
SERIES_DEPTH = 6
SERIES_TOL = 1e-15
SERIES_TERMS = 200
ESTIMATE_SLACK = 1e-12


def theta_gradient(series):
    """Series of grad_theta with the derivative index first."""
    vectors = series.lattice.vectors
    coeffs = np.stack([series.coeffs * (1.0j * vectors[:, i]).reshape(
        (-1,) + (1,) * (series.coeffs.ndim - 1))
        for i in range(series.n)], axis=1)
    return FourierSeries(series.lattice, coeffs)


def _rk4(rhs, state, duration, steps):
    dt = float(duration) / steps
    for _ in range(steps):
        k1 = rhs(state)
        k2 = rhs([x + 0.5 * dt * d for x, d in zip(state, k1)])
        k3 = rhs([x + 0.5 * dt * d for x, d in zip(state, k2)])
        k4 = rhs([x + dt * d for x, d in zip(state, k3)])
        state = [x + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
                 for x, a, b, c, d in zip(state, k1, k2, k3, k4)]
    return state


def series_tail(x, depth):
    """Bound of sum_{k > depth} x^k / k!."""
    return x ** (depth + 1) / math.factorial(depth + 1) / \
        (1.0 - x / (depth + 2))


@lru_cache(maxsize=8)
def panel_rate(depth=SERIES_DEPTH, tol=SERIES_TOL):
    """Largest b h for which the series tail after depth nested integrals
    stays below tol.
    """
    return brentq(lambda x: series_tail(x, depth) - tol, 1e-12, 1.0)


@lru_cache(maxsize=8)
def collocation(count=SERIES_NODES):
    """Gauss-Legendre nodes on [0, 1], the matrix integrating the node
    interpolant from 0 to every node, and the weights over [0, 1].
    """
    nodes, weights = np.polynomial.legendre.leggauss(count)
    nodes = 0.5 * (nodes + 1.0)
    powers = np.arange(count)
    vandermonde = nodes[:, None] ** powers[None, :]
    primitive = nodes[:, None] ** (powers + 1)[None, :] / (powers + 1)
    integrate = np.linalg.solve(vandermonde.T, primitive.T).T
    return nodes, integrate, 0.5 * weights


def _iterate(start, matrices, forcing, depth, integrate, weights, step):
    """Time-ordered series of X' = M X + g on one panel.

    :return: (X at the nodes, X at the panel end).
    """
    current = np.broadcast_to(start, (len(matrices),) + start.shape)
    at_nodes = current.copy()
    end = start.copy()
    for level in range(depth):
        integrand = np.einsum('iab,ibc->iac', matrices, current)
        if level == 0:
            integrand = integrand + forcing
        current = step * np.einsum('ij,jac->iac', integrate, integrand)
        end = end + step * np.einsum('j,jac->ac', weights, integrand)
        at_nodes = at_nodes + current
    return at_nodes, end


class FlowMap(object):
    """Time-t flow of a jet Hamiltonian f,

        r' = -grad_theta f, theta' = f_r, zeta' = J (f_zeta + f_zetazeta zeta)

    in the form (r, theta, zeta) -> (L + S r, K, T + U zeta), with
    L = L0 + L1 zeta + <L2 zeta, zeta>.

    K follows the angle equation by RK4. Along it the zeta equation and
    the r equation are linear, and U, T, S and L are summed as their
    time-ordered series of nested integrals on panels short enough for
    the tail after SERIES_DEPTH levels to stay below SERIES_TOL.
    """

    def __init__(self, jet, t=1.0, rk_steps=RK_STEPS):
        self.jet = jet
        self.t = float(t)
        self.rk_steps = int(rk_steps)
        self.clustering = jet.clustering
        self.n = jet.n
        self.symplectic = jet.clustering.symplectic()
        self._fr = jet.r
        self._fzeta = jet.zeta
        self._form = jet.quadratic_form
        self._form_gradient = [self._form.derivative(i)
                               for i in range(self.n)]
        self._grad_theta = theta_gradient(jet.theta)
        self._grad_r = theta_gradient(self._fr)
        self._grad_zeta = theta_gradient(self._fzeta)
        self.bound, self.speed = self._bounds()
        self.terms = 0

    @property
    def is_identity(self):
        return self.jet.max_coefficient() == 0.0 or self.t == 0.0

    def _bounds(self):
        """Sup of the zeta and r system matrices over real angles, and the
        angular speed of their theta-dependence.
        """
        form = self._form
        dimension = form.dimension
        rows, codes, values = form.entries()
        a, b = codes // dimension, codes % dimension
        amount = np.abs(values)
        sums = np.zeros((len(form.lattice), dimension))
        np.add.at(sums, (rows, a), np.where(a == b, 2.0 * amount, amount))
        split = a != b
        np.add.at(sums, (rows[split], b[split]), amount[split])
        zeta_bound = float(sums.max(axis=1, initial=0.0).sum())
        lattice = self._fr.lattice
        norms = np.linalg.norm(self._fr.coeffs, axis=1)
        r_bound = float(np.sum(lattice.l1 * norms))
        speed = float(np.sum(norms)) * self.jet.lattice.k_max
        return max(zeta_bound, r_bound), speed

    def plan(self):
        """(panels, nested levels per panel) for the series."""
        duration = abs(self.t)
        rate = panel_rate()
        panels = max(1, int(math.ceil(duration * max(self.bound / rate,
                                                      self.speed))))
        x = self.bound * duration / panels
        depth = next(k for k in range(1, SERIES_DEPTH + 1)
                     if k == SERIES_DEPTH or series_tail(x, k) < SERIES_TOL)
        if panels * depth > SERIES_TERMS:
            raise SeriesError(
                'Flow series needs {0} terms on {1} panels, more than '
                '{2}.'.format(panels * depth, panels, SERIES_TERMS))
        return panels, depth

    def _advance(self, theta, duration):
        steps = max(1, int(math.ceil(self.rk_steps * abs(duration) /
                                     abs(self.t))))
        return _rk4(lambda state: [np.real(self._fr.evaluate(state[0]))],
                    [theta], duration, steps)[0]

    def _angles(self, theta, times, step):
        angles = []
        elapsed = 0.0
        for time in times:
            theta = self._advance(theta, time - elapsed)
            elapsed = time
            angles.append(theta)
        return np.array(angles), self._advance(theta, step - elapsed)

    def _zeta_panel(self, angles, unitary, shift, depth, step):
        nodes, integrate, weights = collocation()
        jay = self.symplectic
        dimension = self.clustering.dimension
        matrices = np.array([jay.dot(np.real(
            self._form.second_derivative(theta))) for theta in angles])
        forcing = np.zeros((len(angles), dimension, dimension + 1))
        forcing[:, :, -1] = np.real(np.array(
            [self._fzeta.evaluate(theta) for theta in angles])).dot(jay.T)
        start = np.concatenate([unitary, shift[:, None]], axis=1)
        at_nodes, end = _iterate(start, matrices, forcing, depth, integrate,
                                 weights, step)
        return (at_nodes[:, :, :-1], at_nodes[:, :, -1], end[:, :-1],
                end[:, -1])

    def _r_panel(self, angles, unitaries, shifts, start, depth, step):
        nodes, integrate, weights = collocation()
        n = self.n
        forcing = []
        matrices = []
        for theta, unitary, shift in zip(angles, unitaries, shifts):
            coupling = np.real(self._grad_r.evaluate(theta))
            d_theta = np.real(self._grad_theta.evaluate(theta))
            d_zeta = np.real(self._grad_zeta.evaluate(theta))
            d_zetazeta = np.array([np.real(form.second_derivative(theta))
                                   for form in self._form_gradient])
            moved = np.einsum('iab,b->ia', d_zetazeta, shift)
            alpha0 = d_theta + d_zeta.dot(shift) + 0.5 * moved.dot(shift)
            alpha1 = (d_zeta + moved).dot(unitary)
            alpha2 = 0.5 * np.einsum('ca,icd,db->iab', unitary, d_zetazeta,
                                     unitary, optimize=True)
            matrices.append(-coupling)
            forcing.append(-np.concatenate(
                [np.zeros((n, n)), alpha0[:, None], alpha1,
                 alpha2.reshape(n, -1)], axis=1))
        return _iterate(start, np.array(matrices), np.array(forcing), depth,
                        integrate, weights, step)[1]

    def components(self, theta):
        """Flow components at the angle theta.

        :return: OrderedDict with K, U, T, S, L0, L1, L2.
        """
        dimension = self.clustering.dimension
        n = self.n
        theta = np.array(theta, dtype=float)
        unitary = np.eye(dimension)
        shift = np.zeros(dimension)
        actions = np.concatenate(
            [np.eye(n), np.zeros((n, 1 + dimension + dimension ** 2))],
            axis=1)
        self.terms = 0
        if not self.is_identity:
            panels, depth = self.plan()
            step = self.t / panels
            nodes = collocation()[0]
            for _ in range(panels):
                angles, theta = self._angles(theta, nodes * step, step)
                unitaries, shifts, unitary_end, shift_end = \
                    self._zeta_panel(angles, unitary, shift, depth, step)
                actions = self._r_panel(angles, unitaries, shifts, actions,
                                        depth, step)
                unitary, shift = unitary_end, shift_end
            self.terms = panels * depth
        return OrderedDict([
            ('K', theta), ('U', unitary), ('T', shift),
            ('S', actions[:, :n]), ('L0', actions[:, n]),
            ('L1', actions[:, n + 1:n + 1 + dimension]),
            ('L2', actions[:, n + 1 + dimension:].reshape(
                n, dimension, dimension))])

    def transport(self, r, theta, zeta):
        parts = self.components(theta)
        zeta = np.asarray(zeta)
        r_new = parts['L0'] + parts['L1'].dot(zeta) + \
            np.einsum('iab,a,b->i', parts['L2'], zeta, zeta) + \
            parts['S'].dot(r)
        return (r_new, parts['K'], parts['T'] + parts['U'].dot(zeta))

    def expand(self, lattice):
        """Fourier series of K - theta, T, U, S and L0 on lattice."""
        expanded = OrderedDict()
        for name in ['K', 'T', 'U', 'S', 'L0']:
            def sample(theta, name=name):
                value = self.components(theta)[name]
                return value - theta if name == 'K' else value
            expanded[name] = FourierSeries.from_function(lattice, sample)
        return expanded

    def jacobian(self, theta, step=DEFECT_STEP):
        """Derivative of the map at (r, zeta) = (0, 0) in (r, theta, zeta)
        coordinates; theta-derivatives by central differences.
        """
        n = self.n
        dimension = self.clustering.dimension
        base = self.components(theta)
        size = 2 * n + dimension
        jac = np.zeros((size, size))
        jac[:n, :n] = base['S']
        jac[:n, 2 * n:] = base['L1']
        jac[2 * n:, 2 * n:] = base['U']
        for i in range(n):
            forward = np.array(theta, dtype=float)
            backward = np.array(theta, dtype=float)
            forward[i] += step
            backward[i] -= step
            up = self.components(forward)
            down = self.components(backward)
            jac[:n, n + i] = (up['L0'] - down['L0']) / (2.0 * step)
            jac[n:2 * n, n + i] = (up['K'] - down['K']) / (2.0 * step)
            jac[2 * n:, n + i] = (up['T'] - down['T']) / (2.0 * step)
        return jac

    def check_estimates(self, theta, sigma=None, mu=None, eta=None,
                        norm=NormOptions(), bound=2.0):
        """Components at theta after checking the operator bounds on S
        and U and, with the domain (sigma, mu), the size bounds
        |K - theta| <= mu^-2 m, ||T||_s <= 2 mu^-1 m and, with eta,
        |L0| <= 4 eta^-1 m, where m = |t| [f]^{s,beta}_{sigma,mu}.
        """
        parts = self.components(theta)
        weights = self.clustering.coordinate_weights ** float(norm.s)
        unitary = parts['U']
        operators = OrderedDict([
            ('S', parts['S']),
            ('U', weights[:, None] * unitary / weights[None, :]),
            ('U^T', weights[:, None] * unitary.T / weights[None, :])])
        for name, matrix in operators.items():
            value = np.linalg.norm(matrix, 2)
            if value > bound:
                raise InvariantError(
                    'Operator norm of {0} is {1} > {2}.'.format(
                        name, value, bound))
        if sigma is None or mu is None:
            return parts
        size = abs(self.t) * jet_norm(self.jet, sigma, mu, norm.s, norm.beta)
        checks = [
            ('K - theta', np.max(np.abs(parts['K'] - np.asarray(theta)),
                                 initial=0.0), size / mu ** 2),
            ('T', norm_s(ModeVector(self.clustering, parts['T']), norm.s),
             2.0 * size / mu)]
        if eta is not None:
            checks.append(('L0', np.max(np.abs(parts['L0']), initial=0.0),
                           4.0 * size / eta))
        for name, value, limit in checks:
            if value > limit * (1.0 + ESTIMATE_SLACK) + ESTIMATE_SLACK:
                raise InvariantError(
                    'Size of {0} is {1} > {2}.'.format(name, value, limit))
        return parts


def symplectic_form(n, clustering):
    """Omega = [[0, I, 0], [-I, 0, 0], [0, 0, -J]] on (r, theta, zeta)."""
    dimension = clustering.dimension
    size = 2 * n + dimension
    omega = np.zeros((size, size))
    omega[:n, n:2 * n] = np.eye(n)
    omega[n:2 * n, :n] = -np.eye(n)
    omega[2 * n:, 2 * n:] = -clustering.symplectic()
    return omega


def symplecticity_defect(flow, theta, step=DEFECT_STEP):
    jac = flow.jacobian(theta, step)
    omega = symplectic_form(flow.n, flow.clustering)
    return float(np.linalg.norm(jac.T.dot(omega).dot(jac) - omega))


def build_flow(jet, t=1.0, eta=None, nu=None, sigma=1.0, mu=1.0,
               norm=NormOptions(), rk_steps=RK_STEPS, logger=None):
    """Flow map of the jet for time t after the smallness check
    [jet]^{s,beta+}_{sigma,mu} <= nu^2 eta / 2.

    Margins left as None skip the check.
    """
    logger = logger or logging.getLogger(__name__)
    jet = jet if isinstance(jet, Jet) else jet_of(jet)
    if eta is not None or nu is not None:
        if eta is None or nu is None or eta <= 0 or nu <= 0:
            raise SmallnessError(
                'Flow margins must be positive: eta={0}, nu={1}.'.format(
                    eta, nu))
        size = abs(t) * jet_norm(jet, sigma, mu, norm.s, norm.beta,
                                 plus=True)
        limit = 0.5 * nu ** 2 * eta
        logger.debug('Flow generator size {0} against {1}.'.format(
            size, limit))
        if size > limit:
            raise SmallnessError(
                'Generator size {0} exceeds nu^2 eta / 2 = {1}.'.format(
                    size, limit))
    flow = FlowMap(jet, t, rk_steps)
    if eta is not None:
        flow.check_estimates(np.zeros(jet.n), sigma, mu, eta, norm)
    return flow


def transport(flow, x, domain=None):
    """Apply the flow to x = (r, theta, zeta).

    :param domain: Optional (mu, s, clustering weights) bound; the image
        must satisfy |r| < mu^2 and ||zeta||_s < mu.
    """
    r, theta, zeta = x
    image = flow.transport(np.asarray(r, dtype=float),
                           np.asarray(theta, dtype=float),
                           np.asarray(zeta, dtype=float))
    if domain is not None:
        mu, s = domain
        weights = flow.clustering.coordinate_weights ** s
        if np.max(np.abs(image[0]), initial=0.0) >= mu ** 2 or \
                np.linalg.norm(weights * image[2]) >= mu:
            raise DomainError('Transported point leaves the domain.')
    return image


def lie_series(h, generator, lie_terms=LIE_TERMS, tol=LIE_TOL, sigma=1.0,
               mu=1.0, s=0.0, lattice=None, budget=None):
    """Terms ad^m h / m!, m = 0, 1, ..., with ad h = {generator, h}.

    Terms are added until the majorant of the last one drops below
    tol times the majorant of h.
    """
    lattice = lattice or h.lattice
    term = h.regrid(lattice, budget)
    terms = [term]
    scale = poly_norm(h, sigma, mu, s)
    if generator.max_coefficient() == 0.0 or scale == 0.0:
        return terms
    last = scale
    for m in range(1, lie_terms + 1):
        term = poisson(generator, term, lattice=lattice, d_max=h.d_max,
                       budget=budget) * (1.0 / m)
        terms.append(term)
        last = poly_norm(term, sigma, mu, s)
        if last <= tol * scale:
            return terms
    raise SeriesError(
        'Lie series term {0} after {1} terms exceeds {2}.'.format(
            last, lie_terms, tol * scale))


def _check_margins(generator, sigma, mu, margins, s, beta):
    sigma_prime, mu_prime = margins
    if not (0 < sigma_prime < sigma and 0 < mu_prime < mu):
        raise DomainError(
            'Pullback needs 0 < sigma\' < sigma and 0 < mu\' < mu, got '
            '({0}, {1}) inside ({2}, {3}).'.format(sigma_prime, mu_prime,
                                                   sigma, mu))
    size = jet_norm(generator, sigma, mu, s, beta, plus=True)
    limit = 0.5 * (mu - mu_prime) ** 2 * (sigma - sigma_prime)
    if size > limit:
        raise SmallnessError(
            'Generator size {0} exceeds (mu - mu\')^2 (sigma - sigma\') / 2 '
            '= {1}.'.format(size, limit))
    return size, limit


def pullback(h, generator, lie_terms=LIE_TERMS, tol=LIE_TOL, sigma=1.0,
             mu=1.0, s=0.0, lattice=None, budget=None, report=None,
             margins=None, beta=NormOptions().beta, check_smallness=True):
    """h composed with the time-one flow of generator, as the Lie series
    sum_m ad^m h / m! with ad h = {generator, h}.

    With margins = (sigma', mu') the result lives on the smaller domain:
    the generator must satisfy [generator]^{s,beta+}_{sigma,mu} <=
    (mu - mu')^2 (sigma - sigma') / 2, and the size of the result at
    (sigma', mu') may exceed that of h at (sigma, mu) by at most
    4 mu / (mu - mu'). Series convergence is then measured at
    (sigma', mu').

    :param report: Optional dict receiving the term count, the size of
        the last term and, with margins, the measured growth constant.
    """
    lattice = lattice or h.lattice
    inner = (sigma, mu)
    if margins is not None:
        inner = tuple(margins)
        if check_smallness:
            size, limit = _check_margins(generator, sigma, mu, inner, s,
                                         beta)
    terms = lie_series(h, generator, lie_terms, tol, inner[0], inner[1], s,
                       lattice, budget)
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    last = poly_norm(terms[-1], inner[0], inner[1], s) \
        if len(terms) > 1 else 0.0
    if isinstance(h, Jet):
        total = jet_of(total)
    entry = {'terms': len(terms) - 1, 'last_term': last}
    if margins is not None:
        before = hamiltonian_norm(h, sigma, mu, s, beta)
        after = hamiltonian_norm(total, inner[0], inner[1], s, beta)
        growth = after / before if before else 0.0
        bound = 4.0 * mu / (mu - inner[1])
        if growth > bound:
            raise InvariantError(
                'Pullback grew the norm by {0} > 4 mu / (mu - mu\') = '
                '{1}.'.format(growth, bound))
        entry.update({'growth': growth, 'growth_bound': bound})
        if check_smallness:
            entry.update({'generator': size, 'generator_limit': limit})
    if report is not None:
        report.update(entry)
    return total
