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
from collections import OrderedDict, namedtuple

import numpy as np

from lattice_kam_sdk import DomainError

KG_S2 = 'KG_S2'
QHO_R2 = 'QHO_R2'
MODEL_KINDS = [KG_S2, QHO_R2]
FD_STEP = 1e-5
DEFAULT_SAMPLES = 4096
DIVISOR_FAMILIES = ['omega', 'single', 'sum', 'difference']
BOX_TOLERANCE = 1e-12

ModeIndex = namedtuple('ModeIndex', ['j', 'l'])


def integer_ball(n, radius, exclude_zero=False):
    """All k in Z^n with |k|_1 <= radius, in lexicographic order.

    :param n: Dimension.
    :param radius: l1 radius.
    :param exclude_zero: Drop k = 0.
    :return: Integer array of shape (count, n).
    """
    span = range(-radius, radius + 1)
    ball = [k for k in itertools.product(span, repeat=n)
            if sum(abs(c) for c in k) <= radius]
    if exclude_zero:
        ball = [k for k in ball if any(k)]
    return np.array(ball, dtype=int).reshape(len(ball), n)


class AdmissibleSet(object):

    def __init__(self, modes, actions=None):
        self.modes = [ModeIndex(*a) for a in modes]
        levels = [a.j for a in self.modes]
        if len(set(levels)) != len(levels):
            raise DomainError(
                'Admissible modes need pairwise distinct j: {0}'.format(
                    levels))
        if actions is None:
            actions = [1.0] * len(self.modes)
        if len(actions) != len(self.modes):
            raise DomainError(
                'Got {0} actions for {1} admissible modes.'.format(
                    len(actions), len(self.modes)))
        for action in actions:
            if not 1.0 <= float(action) <= 2.0:
                raise DomainError(
                    'Action {0} is outside [1, 2].'.format(action))
        self.actions = np.array(actions, dtype=float)

    @property
    def n(self):
        return len(self.modes)

    def __contains__(self, a):
        return ModeIndex(*a) in self.modes

    def position(self, a):
        return self.modes.index(ModeIndex(*a))

    @property
    def config(self):
        return {
            'admissible': [[a.j, a.l] for a in self.modes],
            'actions': [float(x) for x in self.actions],
        }


class SpectralModel(object):
    """Spectral data of one of the two lattice applications.

    KG_S2 is the Klein-Gordon equation on the sphere with mass m and
    parameter coupling delta; QHO_R2 is the planar harmonic oscillator.
    """

    def __init__(self, kind, admissible, m=1.0, delta=1.0,
                 gamma=1.0, c0=0.5):
        if kind not in MODEL_KINDS:
            raise DomainError('Unknown model kind {0}.'.format(kind))
        self.kind = kind
        self.admissible = admissible
        self.m = float(m)
        self.delta = float(delta)
        self.gamma = float(gamma)
        self.c0 = float(c0)
        if self.m < 0:
            raise DomainError('Mass {0} is negative.'.format(self.m))
        if kind == KG_S2 and self.delta <= 0:
            raise DomainError('Coupling {0} is not positive.'.format(
                self.delta))
        for a in admissible.modes:
            if not self.is_mode(a):
                raise DomainError(
                    'Admissible mode {0} is not a {1} mode.'.format(
                        a, kind))

    @property
    def n(self):
        return self.admissible.n

    @property
    def p(self):
        return self.admissible.n

    @property
    def cluster_constant(self):
        """(C, d) with card[a] <= C w_a^d."""
        if self.kind == KG_S2:
            return 3.0, 1.0
        return 1.0, 1.0

    @property
    def box(self):
        if self.kind == KG_S2:
            return np.ones(self.n), 2.0 * np.ones(self.n)
        return np.zeros(self.n), np.ones(self.n)

    def cardinality(self, j):
        if self.kind == KG_S2:
            return 2 * j + 1
        return j

    def orders(self, j):
        if self.kind == KG_S2:
            return range(-j, j + 1)
        return range(1, j + 1)

    def is_mode(self, a):
        a = ModeIndex(*a)
        if self.kind == KG_S2:
            return a.j >= 0 and -a.j <= a.l <= a.j
        return a.j >= 1 and 1 <= a.l <= a.j

    def normal_eigenvalue(self, j):
        if self.kind == KG_S2:
            return float(np.sqrt(j * (j + 1) + self.m))
        return float(j)

    def t_eigenvalue(self, j):
        """Eigenvalue of -Laplace + |x|^2 on the level; QHO only."""
        if self.kind != QHO_R2:
            raise DomainError('t_eigenvalue is defined for QHO_R2 only.')
        return 2.0 * j

    def check_rho(self, rho):
        rho = np.asarray(rho, dtype=float)
        low, high = self.box
        if rho.shape != (self.n,):
            raise DomainError('Parameter {0} has not {1} entries.'.format(
                rho, self.n))
        if np.any(rho < low - BOX_TOLERANCE) or \
                np.any(rho > high + BOX_TOLERANCE):
            raise DomainError('Parameter {0} is outside the box.'.format(
                rho.tolist()))
        return rho

    def frequencies(self, rho):
        """Tangential frequencies omega_0(rho)."""
        rho = self.check_rho(rho)
        levels = np.array([a.j for a in self.admissible.modes], dtype=float)
        if self.kind == KG_S2:
            return np.sqrt(levels * (levels + 1) + self.m + self.delta * rho)
        return levels + rho

    @property
    def delta_star(self):
        if self.kind == QHO_R2:
            return 0.5
        top = max([a.j for a in self.admissible.modes] or [1])
        return self.delta / (4.0 * max(top, 1))

    @property
    def delta_zero(self):
        if self.kind == KG_S2 and self.m > 0:
            return self.delta_star ** 3
        return self.delta_star

    @property
    def epsilon_threshold(self):
        """Largest admissible perturbation size, delta_0 ** 4."""
        return self.delta_zero ** 4

    @property
    def config(self):
        config = {'kind': self.kind, 'n': self.n}
        if self.kind == KG_S2:
            config.update({'m': self.m, 'delta': self.delta})
        config.update(self.admissible.config)
        return config


class Clustering(object):
    """Mode set partitioned into levels of equal weight.

    Real coordinates are ordered mode by mode as (p_a, q_a); the level of
    weight w occupies the contiguous range real_slice(w).
    """

    def __init__(self, levels, w_max):
        self.w_max = int(w_max)
        self.levels = OrderedDict()
        for w in sorted(levels):
            modes = sorted(ModeIndex(*a) for a in levels[w])
            if modes:
                self.levels[w] = modes
        self.modes = [a for modes in self.levels.values() for a in modes]
        self.index = dict((a, i) for i, a in enumerate(self.modes))
        self.mode_slices = OrderedDict()
        start = 0
        for w, modes in self.levels.items():
            self.mode_slices[w] = slice(start, start + len(modes))
            start += len(modes)

    def __eq__(self, other):
        return isinstance(other, Clustering) and self.modes == other.modes

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(tuple(self.modes))

    @property
    def size(self):
        return len(self.modes)

    @property
    def dimension(self):
        return 2 * len(self.modes)

    @property
    def weights(self):
        return list(self.levels.keys())

    def cardinality(self, w):
        return len(self.levels.get(w, []))

    def real_slice(self, w):
        modes = self.mode_slices[w]
        return slice(2 * modes.start, 2 * modes.stop)

    @property
    def mode_weights(self):
        return np.array([max(a.j, 1) for a in self.modes], dtype=float)

    @property
    def coordinate_weights(self):
        return np.repeat(self.mode_weights, 2)

    def without(self, modes):
        removed = set(ModeIndex(*a) for a in modes)
        levels = OrderedDict(
            (w, [a for a in level if a not in removed])
            for w, level in self.levels.items())
        return Clustering(levels, self.w_max)

    def symplectic(self):
        """Block diagonal J with [[0, -1], [1, 0]] on every (p_a, q_a)."""
        cell = np.array([[0.0, -1.0], [1.0, 0.0]])
        return np.kron(np.eye(self.size), cell)

    def cardinality_bound_holds(self, constant, exponent):
        return all(len(modes) <= constant * max(w, 1) ** exponent
                   for w, modes in self.levels.items())

    @property
    def config(self):
        return {
            'w_max': self.w_max,
            'levels': dict((str(w), [[a.j, a.l] for a in modes])
                           for w, modes in self.levels.items()),
        }


def model_from_dict(data):
    """Build a SpectralModel from the model description mapping.

    :param data: {"kind", "m", "delta", "n", "admissible", "actions"}.
    :return: SpectralModel.
    """
    admissible = AdmissibleSet(data.get('admissible') or [],
                               data.get('actions'))
    if 'n' in data and int(data['n']) != admissible.n:
        raise DomainError(
            'Model declares n={0} but lists {1} admissible modes.'.format(
                data['n'], admissible.n))
    return SpectralModel(data.get('kind'),
                         admissible,
                         m=data.get('m', 1.0),
                         delta=data.get('delta', 1.0))


def enumerate_modes(model, w_max):
    """Every mode with 1 <= w <= w_max, levels sorted by (j, l)."""
    if w_max < 1:
        raise DomainError('W_max must be at least 1, got {0}.'.format(w_max))
    levels = OrderedDict()
    for j in range(1, w_max + 1):
        levels[j] = [ModeIndex(j, l) for l in model.orders(j)]
    return Clustering(levels, w_max)


def normal_clustering(model, w_max):
    """The truncated normal set L = E minus the tangential modes."""
    return enumerate_modes(model, w_max).without(model.admissible.modes)


def eigenvalue(model, a, rho=None, tangential=False):
    a = ModeIndex(*a)
    if tangential:
        if a not in model.admissible:
            raise DomainError('Mode {0} is not tangential.'.format(a))
        return float(model.frequencies(rho)[model.admissible.position(a)])
    return model.normal_eigenvalue(a.j)


def frequency_jacobian(model, rho, step=FD_STEP):
    """Finite difference Jacobian d omega_0 / d rho.

    Central differences, one-sided where a step would leave the box.
    """
    rho = model.check_rho(rho)
    low, high = model.box
    jacobian = np.zeros((model.n, model.n))
    for i in range(model.n):
        forward = rho.copy()
        backward = rho.copy()
        forward[i] = min(rho[i] + step, high[i])
        backward[i] = max(rho[i] - step, low[i])
        jacobian[:, i] = (model.frequencies(forward) -
                          model.frequencies(backward)) / \
            (forward[i] - backward[i])
    return jacobian


def eigenvalue_gradient(model, a, rho, step=FD_STEP):
    a = ModeIndex(*a)
    if a not in model.admissible:
        return np.zeros(model.n)
    return frequency_jacobian(model, rho, step)[model.admissible.position(a)]


def check_A1(model, w_max):
    """Growth and separation of the normal spectrum up to w_max.

    :return: OrderedDict with the minimal ratios lambda_a / w_a^gamma and
        |lambda_a - lambda_b| / |w_a - w_b| and the pass flag.
    """
    if w_max < 2:
        raise DomainError('check_A1 needs W_max >= 2, got {0}.'.format(
            w_max))
    weights = np.arange(1, w_max + 1, dtype=float)
    lam = np.array([model.normal_eigenvalue(j)
                    for j in range(1, w_max + 1)])
    growth = lam / weights ** model.gamma
    upper = np.triu_indices(len(weights), 1)
    gaps = np.abs(lam[:, None] - lam[None, :])[upper] / \
        np.abs(weights[:, None] - weights[None, :])[upper]
    report = OrderedDict()
    report['kind'] = model.kind
    report['w_max'] = int(w_max)
    report['c0'] = model.c0
    report['min_growth'] = float(growth.min())
    report['min_gap'] = float(gaps.min())
    report['passed'] = bool(report['min_growth'] >= model.c0 and
                            report['min_gap'] >= model.c0)
    if model.kind == KG_S2:
        # |lambda_a - lambda_b - (w_a - w_b)| w_a / (m + 1), w_a <= w_b
        drift = np.abs((lam[:, None] - lam[None, :]) -
                       (weights[:, None] - weights[None, :]))
        ratio = drift * weights[:, None] / (model.m + 1.0)
        report['near_integer_ratio'] = float(ratio[upper].max())
        report['near_integer_passed'] = bool(
            report['near_integer_ratio'] <= 1.0)
    return report


def _family_minima(omegas, ks, weights, lam):
    """Per-sample minimal normalised divisor of each family.

    :param omegas: (M, n) frequency samples.
    :param ks: (K, n) nonzero integer vectors.
    :param weights: (L,) level weights.
    :param lam: (L,) level eigenvalues.
    :return: dict family -> (M,) array.
    """
    samples = omegas.shape[0]
    minima = dict((family, np.full(samples, np.inf))
                  for family in DIVISOR_FAMILIES)
    w_sum = weights[:, None] + weights[None, :]
    w_diff = 1.0 + np.abs(weights[:, None] - weights[None, :])
    l_sum = lam[:, None] + lam[None, :]
    l_diff = lam[:, None] - lam[None, :]
    for k in ks:
        kw = omegas.dot(k)
        minima['omega'] = np.minimum(minima['omega'], np.abs(kw))
        if not len(weights):
            continue
        single = np.abs(kw[:, None] + lam[None, :]) / weights[None, :]
        minima['single'] = np.minimum(minima['single'], single.min(axis=1))
        total = np.abs(kw[:, None, None] + l_sum[None]) / w_sum[None]
        minima['sum'] = np.minimum(
            minima['sum'], total.reshape(samples, -1).min(axis=1))
        diff = np.abs(kw[:, None, None] + l_diff[None]) / w_diff[None]
        minima['difference'] = np.minimum(
            minima['difference'], diff.reshape(samples, -1).min(axis=1))
    return minima


class ExclusionReport(object):
    """Monte-Carlo estimate of the excluded part of the parameter box."""

    def __init__(self, kappas, n_max, samples, seed, minima):
        self.kappas = [float(k) for k in kappas]
        self.n_max = int(n_max)
        self.samples = int(samples)
        self.seed = seed
        self.minima = minima
        self.families = list(minima)
        self.family_fractions = OrderedDict()
        excluded_any = []
        for kappa in self.kappas:
            flags = np.zeros(self.samples, dtype=bool)
            for family in self.families:
                flagged = minima[family] < kappa
                self.family_fractions.setdefault(family, []).append(
                    float(flagged.mean()))
                flags |= flagged
            excluded_any.append(float(flags.mean()))
        self.fractions = excluded_any

    @property
    def fraction(self):
        return self.fractions[0]

    def slope(self, family=None):
        """Least squares slope of log(fraction) against log(kappa)."""
        fractions = self.fractions if family is None else \
            self.family_fractions[family]
        points = [(np.log(k), np.log(f))
                  for k, f in zip(self.kappas, fractions) if k > 0 and f > 0]
        if len(points) < 2:
            return None
        x, y = np.array(points).T
        return float(np.polyfit(x, y, 1)[0])

    @property
    def config(self):
        return OrderedDict([
            ('kappas', self.kappas),
            ('n_max', self.n_max),
            ('samples', self.samples),
            ('seed', self.seed),
            ('fractions', self.fractions),
            ('family_fractions', self.family_fractions),
            ('slope', self.slope()),
            ('family_slopes', OrderedDict(
                (family, self.slope(family))
                for family in self.families)),
        ])


def sample_rho(model, samples, seed):
    """Uniform samples of the parameter box, reproducible for a seed."""
    rng = np.random.default_rng(seed)
    low, high = model.box
    return low + (high - low) * rng.random((samples, model.n))


def sample_melnikov(model, kappa, n_max, samples=DEFAULT_SAMPLES, seed=0,
                    w_max=None, frequency_map=None, logger=None):
    """Fraction of sampled parameters violating a Melnikov condition.

    :param model: SpectralModel.
    :param kappa: Threshold or list of thresholds.
    :param n_max: Fourier cut-off N, 0 < |k|_1 <= N.
    :param samples: Sample count M.
    :param seed: Seed of the generator.
    :param w_max: Truncation weight of the normal set.
    :param frequency_map: rho -> omega(rho); the model's omega_0 if None.
    :param logger: Logger.
    :return: ExclusionReport.
    """
    logger = logger or logging.getLogger(__name__)
    kappas = list(np.atleast_1d(kappa))
    if n_max < 1 or samples < 1 or any(k < 0 for k in kappas):
        raise DomainError('Need N >= 1, M >= 1 and kappa >= 0.')
    if w_max is None:
        raise DomainError('sample_melnikov needs the truncation weight '
                          'W_max of the normal set.')
    frequency_map = frequency_map or model.frequencies
    clustering = normal_clustering(model, w_max)
    weights = np.array([max(w, 1) for w in clustering.weights], dtype=float)
    lam = np.array([model.normal_eigenvalue(w) for w in clustering.weights])
    rhos = sample_rho(model, samples, seed)
    omegas = np.array([frequency_map(rho) for rho in rhos])
    ks = integer_ball(model.n, n_max, exclude_zero=True)
    logger.debug('Sampling {0} parameters over {1} frequency vectors '
                 'and {2} levels.'.format(samples, len(ks), len(weights)))
    minima = _family_minima(omegas, ks, weights, lam)
    return ExclusionReport(kappas, n_max, samples, seed, minima)


def check_A2(model, n_max, w_max, delta0=None, grid=3, step=FD_STEP):
    """Transversality audit of the four divisor families.

    For each 0 < |k|_1 <= N a family passes when its normalised divisor
    stays above delta0 on a parameter grid, or when the derivative of
    <k, omega> along z = grad / |grad| at the box centre stays above
    delta0 on the grid.

    :return: OrderedDict family -> {'passed', 'k', 'value'}.
    """
    delta0 = model.delta_zero if delta0 is None else delta0
    low, high = model.box
    axes = [np.linspace(lo, hi, grid) for lo, hi in zip(low, high)]
    points = np.array(list(itertools.product(*axes))).reshape(-1, model.n)
    centre = 0.5 * (low + high)
    omegas = np.array([model.frequencies(rho) for rho in points])
    jacobians = [frequency_jacobian(model, rho, step) for rho in points]
    centre_jacobian = frequency_jacobian(model, centre, step)
    clustering = normal_clustering(model, w_max)
    weights = np.array([max(w, 1) for w in clustering.weights], dtype=float)
    lam = np.array([model.normal_eigenvalue(w) for w in clustering.weights])
    report = OrderedDict(
        (family, OrderedDict([('passed', True), ('k', None),
                              ('value', None)]))
        for family in DIVISOR_FAMILIES)
    for k in integer_ball(model.n, n_max, exclude_zero=True):
        gradient = centre_jacobian.T.dot(k)
        norm = np.linalg.norm(gradient)
        if norm > 0:
            z = gradient / norm
            slope = min(jac.T.dot(k).dot(z) for jac in jacobians)
            if slope >= delta0:
                continue
        minima = _family_minima(omegas, k[None, :], weights, lam)
        for family in DIVISOR_FAMILIES:
            value = float(minima[family].min())
            if value < delta0 and report[family]['passed']:
                report[family] = OrderedDict([
                    ('passed', False), ('k', k.tolist()),
                    ('value', value)])
    return report
