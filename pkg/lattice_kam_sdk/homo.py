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
from collections import OrderedDict, namedtuple

import numpy as np

from lattice_kam_sdk import (
    DomainError,
    InvariantError,
    ZeroDivisorError,
)
from lattice_kam_sdk.blockmat import (
    BlockMatrix,
    ModeVector,
    change_of_variables,
    hermitian_eig,
    is_normal_form,
    nf_project,
    norm_beta,
    norm_s,
    to_complex,
    xi_eta_part,
)
from lattice_kam_sdk.jets import (
    NOISE,
    Jet,
    jet_of,
    poisson,
)
from lattice_kam_sdk.modes import (
    DEFAULT_SAMPLES,
    ExclusionReport,
    _family_minima,
    integer_ball,
    sample_rho,
)
from lattice_kam_sdk.series import (
    FourierSeries,
    MonomialSeries,
    get_lattice,
)

AUDIT_FAMILIES = ['omega', 'single', 'sum', 'difference', 'zero_mode']
MEAN_TOL = 1e-13

NormalFormCorrection = namedtuple('NormalFormCorrection', ['c', 'chi', 'B'])


class NormalFormHam(object):
    """h = <omega, r> + 1/2 <zeta, A zeta> at one parameter value.

    Every h remembers the h_0 it started from and the radius delta0 of the
    neighbourhood of h_0 in which the homological equation is solved.
    """

    def __init__(self, model, clustering, omega, A, rho=None, origin=None,
                 delta0=None):
        self.model = model
        self.clustering = clustering
        self.omega = np.asarray(omega, dtype=float)
        self.A = A
        self.rho = None if rho is None else np.asarray(rho, dtype=float)
        self._origin = origin
        self.delta0 = model.delta_zero if delta0 is None else float(delta0)
        self._spectrum = None

    @classmethod
    def initial(cls, model, clustering, rho, delta0=None):
        """h_0 with omega_0(rho) and A_0 = diag(lambda_a I_2)."""
        diagonal = np.repeat([model.normal_eigenvalue(a.j)
                              for a in clustering.modes], 2)
        return cls(model, clustering, model.frequencies(rho),
                   BlockMatrix(clustering, np.diag(diagonal)), rho,
                   delta0=delta0)

    @property
    def origin(self):
        return self if self._origin is None else self._origin

    def updated(self, correction):
        """h + hhat without the constant: omega + chi and A + B."""
        return NormalFormHam(self.model, self.clustering,
                             self.omega + np.real(correction.chi),
                             self.A + correction.B, self.rho, self.origin,
                             self.delta0)

    def spectrum(self):
        """Per level (eigenvalues, eigenvectors) of the Hermitian Q_[a]."""
        if self._spectrum is None:
            scalar = xi_eta_part(to_complex(self.A))
            self._spectrum = OrderedDict(
                (w, hermitian_eig(scalar.block(w, w)))
                for w in self.clustering.weights)
        return self._spectrum

    def eigenvalues(self):
        return np.concatenate([values for values, _ in
                               self.spectrum().values()] or [np.zeros(0)])

    def as_jet(self, lattice):
        return Jet.from_components(
            self.clustering, lattice,
            r=FourierSeries.constant(lattice, self.omega),
            zetazeta=FourierSeries.constant(lattice, self.A.data))

    def drift(self, other, beta):
        """(|omega - omega'|, |A - A'|_beta)."""
        return (float(np.max(np.abs(self.omega - other.omega),
                             initial=0.0)),
                norm_beta(self.A - other.A, beta))

    def check_closeness(self, initial, delta0, beta):
        omega_drift, a_drift = self.drift(initial, beta)
        if omega_drift > delta0 or a_drift > delta0 / 4.0:
            raise InvariantError(
                'Normal form drifted: |omega - omega0|={0}, '
                '|A - A0|_beta={1}, delta0={2}.'.format(
                    omega_drift, a_drift, delta0))


class DivisorAudit(object):
    """Smallest normalised divisor per family with its witness."""

    def __init__(self, kappa):
        self.kappa = float(kappa)
        self.records = OrderedDict(
            (family, OrderedDict([('min_divisor', np.inf), ('k', None),
                                  ('a', None), ('b', None),
                                  ('excluded', False)]))
            for family in AUDIT_FAMILIES)

    def record(self, family, values, k, a_labels, b_labels=None):
        """Register normalised divisors values[i, j] for witnesses
        (k, a_labels[i], b_labels[j]).
        """
        values = np.atleast_2d(np.abs(values))
        if not values.size:
            return
        i, j = np.unravel_index(np.argmin(values), values.shape)
        value = float(values[i, j])
        witness = (list(k), a_labels[i],
                   None if b_labels is None else b_labels[j])
        entry = self.records[family]
        current = (entry['k'], entry['a'], entry['b'])
        if value < entry['min_divisor'] or (
                value == entry['min_divisor'] and
                repr(witness) < repr(current)):
            entry['min_divisor'] = value
            entry['k'], entry['a'], entry['b'] = witness
        if value < self.kappa:
            entry['excluded'] = True

    @property
    def excluded(self):
        return any(entry['excluded'] for entry in self.records.values())

    def excluded_families(self):
        return [family for family, entry in self.records.items()
                if entry['excluded']]

    def merge(self, other):
        for family, entry in other.records.items():
            if entry['k'] is None and not entry['excluded']:
                continue
            values = np.array([[entry['min_divisor']]])
            self.record(family, values, entry['k'], [entry['a']],
                        [entry['b']])
            self.records[family]['excluded'] |= entry['excluded']
        return self

    def to_dict(self):
        out = OrderedDict()
        for family, entry in self.records.items():
            value = entry['min_divisor']
            out[family] = OrderedDict([
                ('min_divisor', None if np.isinf(value) else value),
                ('k', entry['k']), ('a', entry['a']), ('b', entry['b']),
                ('excluded', entry['excluded'])])
        return out


class HomoSolution(object):

    def __init__(self, S, hhat, R, audit, report=None):
        self.S = S
        self.hhat = hhat
        self.R = R
        self.audit = audit
        self.report = report or OrderedDict()

    def hhat_jet(self, lattice):
        return Jet.from_components(
            self.S.clustering, lattice,
            theta=FourierSeries.constant(lattice, self.hhat.c),
            r=FourierSeries.constant(lattice, self.hhat.chi),
            zetazeta=FourierSeries.constant(lattice, self.hhat.B.data))


def _check_divisor(value, k):
    if np.any(value == 0.0):
        raise ZeroDivisorError('Exact zero divisor at k={0}.'.format(
            list(k)))


def solve_scalar(psi, omega, kappa, n_cut, audit=None):
    """Solve <grad phi, omega> = psi + R with R the tail of -psi.

    :param psi: Zero-mean FourierSeries (scalar or vector valued).
    :return: (phi, R, audit).
    """
    audit = audit or DivisorAudit(kappa)
    scale = max(np.abs(psi.coeffs).max(initial=0.0), 1.0)
    if np.abs(psi.mean()).max(initial=0.0) > MEAN_TOL * scale:
        raise DomainError('solve_scalar needs a zero-mean right-hand side.')
    lattice = psi.lattice
    kept, tail = psi.truncate(n_cut)
    phi = FourierSeries(lattice, value_shape=psi.value_shape)
    frequencies = lattice.vectors.dot(omega)
    for i, k in enumerate(lattice.vectors):
        if i == lattice.zero or lattice.l1[i] > n_cut:
            continue
        divisor = frequencies[i]
        _check_divisor(divisor, k)
        audit.record('omega', [[divisor]], k, [None])
        phi.coeffs[i] = -1.0j * kept.coeffs[i] / divisor
    return phi, -tail, audit


def _level_indices(clustering):
    """Positions of the xi and eta coordinates of every level."""
    indices = OrderedDict()
    for w in clustering.weights:
        span = clustering.real_slice(w)
        xi = np.arange(span.start, span.stop, 2)
        indices[w] = (xi, xi + 1)
    return indices


def _labels(w, values):
    return [[int(w), i] for i in range(len(values))]


def solve_linear(F, h, kappa, n_cut, audit=None):
    """Solve i<k, omega> S(k) - A J S(k) = -F(k) for |k|_1 <= N.

    :param F: FourierSeries of zeta-vectors, the f_zeta component.
    :return: (S_zeta, R_zeta, audit) with R_zeta = tail(F).
    """
    audit = audit or DivisorAudit(kappa)
    clustering = h.clustering
    lattice = F.lattice
    unitary = change_of_variables(clustering)
    levels = _level_indices(clustering)
    spectrum = h.spectrum()
    kept, tail = F.truncate(n_cut)
    solution = FourierSeries(lattice, value_shape=F.value_shape)
    frequencies = lattice.vectors.dot(h.omega)
    for index, k in enumerate(lattice.vectors):
        if lattice.l1[index] > n_cut:
            continue
        phi = -unitary.conj().T.dot(kept.coeffs[index])
        s = np.zeros_like(phi)
        kw = frequencies[index]
        for w, (xi, eta) in levels.items():
            values, vectors = spectrum[w]
            minus = kw - values
            plus = kw + values
            _check_divisor(minus, k)
            _check_divisor(plus, k)
            labels = _labels(w, values)
            audit.record('single', minus[:, None] / max(w, 1), k, labels)
            audit.record('single', plus[:, None] / max(w, 1), k, labels)
            s[xi] = np.conj(vectors).dot(
                vectors.T.dot(phi[xi]) / (1.0j * minus))
            s[eta] = vectors.dot(
                vectors.conj().T.dot(phi[eta]) / (1.0j * plus))
        solution.coeffs[index] = unitary.dot(s)
    return solution.symmetrize(), tail, audit


def normal_form_part(matrix):
    """B: the normal form projection of the diagonal level blocks."""
    real = BlockMatrix(matrix.clustering, np.real(matrix.data))
    return nf_project(real)


def solve_quadratic(F, h, kappa, n_cut, audit=None):
    """Solve i<k, omega> S + S J A - A J S = -F + B delta_k0.

    :param F: FourierSeries of symmetric zeta-matrices, the f_zetazeta
        component, or the MonomialSeries of the form 1/2 <F zeta, zeta>;
        S and R come back in the same storage.
    :return: (S_zetazeta, B, R_zetazeta, audit); B is on normal form and
        absorbs the k = 0 same-level xi-eta blocks, R is the tail of F.
    """
    audit = audit or DivisorAudit(kappa)
    clustering = h.clustering
    lattice = F.lattice
    unitary = change_of_variables(clustering)
    levels = _level_indices(clustering)
    spectrum = h.spectrum()
    kept, tail = F.truncate(n_cut)
    monomial = isinstance(F, MonomialSeries)
    matrix_at = kept.matrix_row if monomial else lambda i: kept.coeffs[i]
    B = normal_form_part(BlockMatrix(clustering, matrix_at(lattice.zero)))
    rows, matrices = [], []
    frequencies = lattice.vectors.dot(h.omega)
    for index, k in enumerate(lattice.vectors):
        if lattice.l1[index] > n_cut:
            continue
        zero = index == lattice.zero
        target = -matrix_at(index)
        if zero:
            target = target + B.data
        phi = unitary.T.dot(target).dot(unitary)
        s = np.zeros_like(phi)
        kw = frequencies[index]
        for wa, (xi_a, eta_a) in levels.items():
            values_a, vectors_a = spectrum[wa]
            labels_a = _labels(wa, values_a)
            for wb, (xi_b, eta_b) in levels.items():
                values_b, vectors_b = spectrum[wb]
                labels_b = _labels(wb, values_b)
                total = values_a[:, None] + values_b[None, :]
                difference = values_a[:, None] - values_b[None, :]

                divisor = kw + total
                _check_divisor(divisor, k)
                audit.record('sum', divisor / (wa + wb), k, labels_a,
                             labels_b)
                block = phi[np.ix_(xi_a, xi_b)]
                t = vectors_a.conj().T.dot(block).dot(np.conj(vectors_b)) / \
                    (1.0j * divisor)
                s[np.ix_(xi_a, xi_b)] = vectors_a.dot(t).dot(vectors_b.T)

                divisor = kw - total
                _check_divisor(divisor, k)
                audit.record('sum', divisor / (wa + wb), k, labels_a,
                             labels_b)
                block = phi[np.ix_(eta_a, eta_b)]
                t = vectors_a.T.dot(block).dot(vectors_b) / (1.0j * divisor)
                s[np.ix_(eta_a, eta_b)] = np.conj(vectors_a).dot(t).dot(
                    vectors_b.conj().T)

                if zero and wa == wb:
                    continue
                divisor = kw + difference
                _check_divisor(divisor, k)
                if zero:
                    audit.record('zero_mode', divisor / abs(wa - wb), k,
                                 labels_a, labels_b)
                else:
                    audit.record('difference',
                                 divisor / (1.0 + abs(wa - wb)), k,
                                 labels_a, labels_b)
                block = phi[np.ix_(xi_a, eta_b)]
                t = vectors_a.conj().T.dot(block).dot(vectors_b) / \
                    (1.0j * divisor)
                s[np.ix_(xi_a, eta_b)] = vectors_a.dot(t).dot(
                    vectors_b.conj().T)
        s[1::2, 0::2] = s[0::2, 1::2].T
        rows.append(index)
        matrices.append(np.conj(unitary).dot(s).dot(unitary.conj().T))
    matrices = np.array(matrices).reshape((len(rows),) + F.value_shape)
    if monomial:
        solution = MonomialSeries.from_matrices(lattice, rows, matrices)
        solution = solution.prune(NOISE * solution.max_coefficient())
    else:
        solution = FourierSeries(lattice, value_shape=F.value_shape)
        solution.coeffs[rows] = matrices
    return solution.symmetrize(), B, tail, audit


def _vector_gain(S, F, clustering, s):
    numerator = S.majorant(0.0, lambda c: norm_s(ModeVector(clustering, c),
                                                s + 1.0))
    denominator = F.majorant(0.0, lambda c: norm_s(ModeVector(clustering, c),
                                                   s))
    return numerator / denominator if denominator else 0.0


def _check_preconditions(h, kappa, beta):
    if kappa > 0.5 * h.delta0:
        raise DomainError('kappa={0} exceeds delta0 / 2 = {1}.'.format(
            kappa, 0.5 * h.delta0))
    omega_drift, a_drift = h.drift(h.origin, beta)
    if omega_drift > h.delta0 or a_drift > 0.25 * h.delta0:
        raise DomainError(
            'h is not delta0-close to h0: |omega - omega0|={0}, '
            '|A - A0|_beta={1}, delta0={2}.'.format(omega_drift, a_drift,
                                                    h.delta0))


def solve_homological(f, h, kappa, n_cut, s=2.0, logger=None, beta=0.25):
    """Solve {h, S} + f^T = hhat + R.

    hhat = c + <chi, r> + 1/2 <B zeta, zeta> with c and chi the means of
    f_theta and f_r, and B the normal form part of the k = 0 Hessian.
    h must lie within h.delta0 of its origin h_0 (delta0 / 4 for A in
    the beta norm) and kappa must not exceed delta0 / 2.

    :return: HomoSolution.
    """
    logger = logger or logging.getLogger(__name__)
    _check_preconditions(h, kappa, beta)
    jet = f if isinstance(f, Jet) else jet_of(f)
    clustering = h.clustering
    lattice = jet.lattice
    audit = DivisorAudit(kappa)

    f_theta = jet.theta
    f_r = jet.r
    c = complex(f_theta.mean())
    chi = np.array(f_r.mean())
    psi_theta = -(f_theta - FourierSeries.constant(lattice, c))
    psi_r = -(f_r - FourierSeries.constant(lattice, chi))
    s_theta, r_theta, _ = solve_scalar(psi_theta, h.omega, kappa, n_cut,
                                       audit)
    s_r, r_r, _ = solve_scalar(psi_r, h.omega, kappa, n_cut, audit)
    s_zeta, r_zeta, _ = solve_linear(jet.zeta, h, kappa, n_cut, audit)
    s_zetazeta, B, r_zetazeta, _ = solve_quadratic(
        jet.quadratic_form, h, kappa, n_cut, audit)

    S = Jet.from_components(clustering, lattice,
                            theta=s_theta.symmetrize(), r=s_r.symmetrize(),
                            zeta=s_zeta, zetazeta=s_zetazeta)
    R = Jet.from_components(clustering, lattice, theta=r_theta, r=r_r,
                            zeta=r_zeta, zetazeta=r_zetazeta)
    hhat = NormalFormCorrection(c.real, np.real(chi), B)
    if not is_normal_form(hhat.B):
        raise InvariantError('Normal form correction B is not on normal '
                             'form.')
    gain = _vector_gain(s_zeta, jet.zeta, clustering, s)
    if not audit.excluded and gain > (1.0 + 1e-9) / kappa:
        raise InvariantError('Linear gain {0} exceeds 1/kappa={1}.'.format(
            gain, 1.0 / kappa))
    report = OrderedDict([('c', hhat.c), ('chi', hhat.chi.tolist()),
                          ('B_norm', norm_beta(hhat.B, 0.0)),
                          ('linear_gain', gain),
                          ('excluded', audit.excluded)])
    if audit.excluded:
        logger.warning('Divisors below kappa={0} in families {1}.'.format(
            kappa, audit.excluded_families()))
    logger.debug('Homological solution: {0}'.format(dict(report)))
    return HomoSolution(S, hhat, R, audit, report)


def residual(solution, f, h):
    """{h, S} + f^T - hhat - R as a jet."""
    jet = f if isinstance(f, Jet) else jet_of(f)
    lattice = jet.lattice
    bracket = poisson(h.as_jet(get_lattice(lattice.n, 0)), solution.S,
                      lattice=lattice)
    return jet_of(bracket + jet - solution.hhat_jet(lattice) - solution.R)


def measure_exclusion(model, clustering, kappa, n_cut,
                      samples=DEFAULT_SAMPLES, seed=0, h_family=None,
                      logger=None):
    """Monte-Carlo fraction of parameters flagged by the divisor audit.

    :param h_family: rho -> NormalFormHam; h_0(rho) when None.
    :return: ExclusionReport over the families of AUDIT_FAMILIES.
    """
    logger = logger or logging.getLogger(__name__)
    kappas = list(np.atleast_1d(kappa))
    if n_cut < 1 or samples < 1 or any(k < 0 for k in kappas):
        raise DomainError('Need N >= 1, M >= 1 and kappa >= 0.')
    rhos = sample_rho(model, samples, seed)
    ks = integer_ball(model.n, n_cut, exclude_zero=True)
    minima = OrderedDict((family, np.full(samples, np.inf))
                         for family in AUDIT_FAMILIES)

    def spectral_data(h):
        weights, values = [], []
        for w, (eigenvalues, _) in h.spectrum().items():
            weights.extend([max(w, 1)] * len(eigenvalues))
            values.extend(eigenvalues)
        return np.array(weights, dtype=float), np.array(values)

    def zero_mode(weights, values):
        spread = np.abs(weights[:, None] - weights[None, :])
        mask = spread > 0
        if not np.any(mask):
            return np.inf
        return float(np.min(np.abs(values[:, None] - values[None, :])[mask] /
                            spread[mask]))

    if h_family is None:
        omegas = np.array([model.frequencies(rho) for rho in rhos])
        h0 = NormalFormHam.initial(model, clustering, rhos[0])
        weights, values = spectral_data(h0)
        found = _family_minima(omegas, ks, weights, values)
        for family, value in found.items():
            minima[family] = value
        minima['zero_mode'][:] = zero_mode(weights, values)
    else:
        for i, rho in enumerate(rhos):
            h = h_family(rho)
            weights, values = spectral_data(h)
            found = _family_minima(h.omega[None, :], ks, weights, values)
            for family, value in found.items():
                minima[family][i] = value[0]
            minima['zero_mode'][i] = zero_mode(weights, values)
    logger.debug('Measured divisors at {0} parameters.'.format(samples))
    return ExclusionReport(kappas, n_cut, samples, seed, minima)
