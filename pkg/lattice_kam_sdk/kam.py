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
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from lattice_kam_sdk import (
    DomainError,
    ExcludedError,
    InvariantError,
    LatticeKamError,
    SmallnessError,
    TailBudgetError,
)
from lattice_kam_sdk.blockmat import (
    hamiltonian_spectrum,
    is_normal_form,
)
from lattice_kam_sdk.flows import FlowMap, lie_series, pullback
from lattice_kam_sdk.homo import NormalFormHam, solve_homological
from lattice_kam_sdk.jets import (
    K_MAX,
    PolyHamiltonian,
    hamiltonian_norm,
    jet_norm,
    jet_of,
    poisson,
)
from lattice_kam_sdk.options import NormOptions, StepOptions
from lattice_kam_sdk.series import TailBudget

C_STAR = 3.0 / math.pi ** 2
RESIDUAL_POINTS = 32
RESIDUAL_SEED = 2
POINT_SCALE = 0.1

CONVERGED = 'converged'
EXCLUDED = 'excluded'
BUDGET = 'budget'
MAXITER = 'maxiter'
SMALLNESS = 'smallness'


class Schedule(object):
    """Parameter ladder of the iteration.

    sigma_j = sigma_{j-1} - C* sigma_0 / j^2 decreases to sigma_0 / 2,
    mu_j = eps_{j-1}^{2/5} mu_0, N_j = ln(1/eps_j) / (sigma_j - sigma_{j+1}).
    """

    def __init__(self, epsilon, sigma0=1.0, mu0=1.0, k_max=K_MAX):
        if not 0 < epsilon < 1:
            raise DomainError('Schedule needs 0 < eps < 1, got {0}.'.format(
                epsilon))
        self.epsilon = float(epsilon)
        self.sigma0 = float(sigma0)
        self.mu0 = float(mu0)
        self.k_max = int(k_max)
        self.delta0 = self.epsilon ** 0.25
        self.kappa0 = self.epsilon ** (1.0 / 3.0)

    def sigma(self, j):
        return self.sigma0 * (1.0 - C_STAR * sum(1.0 / i ** 2
                                                 for i in range(1, j + 1)))

    def mu(self, j, previous_epsilon):
        if j == 0:
            return self.mu0
        return previous_epsilon ** 0.4 * self.mu0

    def n_cut(self, j, epsilon):
        """Fourier cut-off of step j -> j + 1, capped at K_max."""
        gap = self.sigma(j) - self.sigma(j + 1)
        value = int(math.ceil(math.log(1.0 / epsilon) / gap))
        return max(1, min(value, self.k_max))

    @staticmethod
    def kappa_literal(epsilon):
        return epsilon ** (1.0 / 64.0)

    def kappa(self, epsilon):
        return min(self.kappa_literal(epsilon), self.kappa0,
                   0.5 * self.delta0)

    @property
    def config(self):
        return OrderedDict([('epsilon', self.epsilon),
                            ('sigma0', self.sigma0), ('mu0', self.mu0),
                            ('delta0', self.delta0),
                            ('kappa0', self.kappa0), ('k_max', self.k_max)])


def predicted_epsilon(previous, current, schedule, j, n, constant=1.0):
    """Recursive prediction of eps_{j+1} from eps_{j-1} and eps_j."""
    if j < 1:
        raise DomainError('predicted_epsilon needs j >= 1.')
    if current == 0:
        return 0.0
    ratio = current / previous if previous else 0.0
    sigma0 = schedule.sigma0
    return constant * (
        0.5 * current * (j + 1) ** (2 * n) * sigma0 ** (-n) +
        ratio ** 1.2 +
        (j + 1) ** (2 * (n + 1)) * sigma0 ** (-n - 1) *
        schedule.mu0 ** (-2) * current ** (0.2 - 1.0 / 32.0)) * current


def epsilon_bound(epsilon, j):
    """eps_0^{(7/6)^j}."""
    return epsilon ** ((7.0 / 6.0) ** j)


def measure_epsilon(f, sigma, mu, norm):
    """Size of f under the norm options."""
    return hamiltonian_norm(f, sigma, mu, norm.s, norm.beta)


class KamState(object):

    def __init__(self, j, h, f, epsilon, mu, h0, delta0, energy=0.0,
                 log=None, previous_epsilon=None):
        self.j = j
        self.h = h
        self.f = f
        self.epsilon = epsilon
        self.mu = mu
        self.h0 = h0
        self.delta0 = delta0
        self.energy = energy
        self.log = log or []
        self.previous_epsilon = previous_epsilon


def _sample_points(state, mu, count, seed):
    rng = np.random.default_rng(seed)
    clustering = state.h.clustering
    weights = clustering.coordinate_weights
    points = []
    for _ in range(count):
        r = POINT_SCALE * mu ** 2 * (2.0 * rng.random(state.h.omega.size) -
                                     1.0)
        theta = 2.0 * np.pi * rng.random(state.h.omega.size)
        zeta = rng.standard_normal(clustering.dimension) / weights
        size = np.linalg.norm(zeta)
        if size:
            zeta *= POINT_SCALE * mu / size
        points.append((r, theta, zeta))
    return points


def _total_energy(h, f, point, energy=0.0):
    r, theta, zeta = point
    return float(h.omega.dot(r) + 0.5 * zeta.dot(h.A.data).dot(zeta) +
                 f.evaluate(r, theta, zeta).real + energy)


def conjugacy_residual(state, new_state, flow, points):
    """max |(h_j + f_j) o Phi - (h_{j+1} + f_{j+1} + c)| and the largest
    displacement of Phi over the points.
    """
    residual = 0.0
    displacement = 0.0
    for point in points:
        image = flow.transport(*point)
        before = _total_energy(state.h, state.f, image, state.energy)
        after = _total_energy(new_state.h, new_state.f, point,
                              new_state.energy)
        residual = max(residual, abs(before - after))
        displacement = max(displacement, max(
            np.max(np.abs(image[0] - point[0])),
            np.max(np.abs(image[1] - point[1])),
            np.linalg.norm(image[2] - point[2])))
    return residual, displacement


def kam_step(state, schedule, options=StepOptions(), norm=NormOptions(),
             logger=None):
    """One step (h + f) o Phi = h+ + f+.

    f+ = R + (f - f^T) o Phi + int_0^1 {(1 - t)(hhat + R) + t f^T, S} o
    Phi^t dt, with Phi^t the flow of -S.
    """
    logger = logger or logging.getLogger(__name__)
    j = state.j
    sigma = schedule.sigma(j)
    sigma_next = schedule.sigma(j + 1)
    mu = state.mu
    mu_next = schedule.mu(j + 1, state.epsilon)
    f = state.f
    lattice = f.lattice
    jet = jet_of(f)
    entry = OrderedDict([('j', j), ('epsilon', state.epsilon),
                         ('sigma', sigma), ('mu', mu)])
    if jet.max_coefficient() == 0.0:
        entry['skipped'] = True
        return KamState(j + 1, state.h, f, state.epsilon, mu_next,
                        state.h0, state.delta0, state.energy,
                        state.log + [entry], state.epsilon)

    n_cut = schedule.n_cut(j, state.epsilon)
    kappa = schedule.kappa(state.epsilon)
    solution = solve_homological(jet, state.h, kappa, n_cut, norm.s,
                                 logger, norm.beta)
    entry.update([('n_cut', n_cut), ('kappa', kappa),
                  ('audit', solution.audit.to_dict())])
    if solution.audit.excluded:
        raise ExcludedError(
            'Parameter excluded at step {0} by {1}.'.format(
                j, solution.audit.excluded_families()), solution.audit)

    size = jet_norm(solution.S, sigma_next, mu, norm.s, norm.beta,
                    plus=True)
    limit = mu ** 2 * (sigma - sigma_next) / 16.0
    entry['generator'] = size
    if options.check_smallness and size > limit:
        raise SmallnessError(
            'Generator size {0} exceeds mu^2 (sigma - sigma\') / 16 = '
            '{1} at step {2}.'.format(size, limit, j))

    generator = -solution.S
    budget = TailBudget(sigma_next, mu_next,
                        allowance=0.5 * options.tail_tol * state.epsilon)
    lie = dict(lattice=lattice, budget=budget, lie_terms=options.lie_terms,
               tol=options.lie_tol, sigma=sigma, mu=mu, s=norm.s)
    correction = solution.hhat_jet(lattice) + solution.R
    first = poisson(correction, solution.S, lattice=lattice, budget=budget)
    second = poisson(jet, solution.S, lattice=lattice, budget=budget)
    pulled = {}
    f_next = solution.R + pullback(
        f.without_jet(), generator, report=pulled,
        margins=(sigma_next, mu_next), beta=norm.beta,
        check_smallness=options.check_smallness, **lie)
    entry['pullback_growth'] = pulled.get('growth')
    lie.update(sigma=sigma_next, mu=mu_next)
    nodes, weights = np.polynomial.legendre.leggauss(
        options.quadrature_nodes)
    times = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    # the flow of -tS scales the m-th Lie term by t^m
    for terms, shift, factor in [
            (lie_series(first, generator, **lie), 0, 1.0 - times),
            (lie_series(second, generator, **lie), 1, np.ones_like(times))]:
        for m, term in enumerate(terms):
            coefficient = float(np.sum(weights * factor *
                                       times ** (m + shift)))
            f_next = f_next + term * coefficient
    f_next = PolyHamiltonian(f.clustering, lattice, f.d_max,
                             f_next.symmetrize().terms)
    entry['tail_budget'] = budget.config
    if budget.total > options.tail_tol * state.epsilon:
        raise TailBudgetError(
            'Tail budget {0} exceeds {1} at step {2}.'.format(
                budget.total, options.tail_tol * state.epsilon, j))

    h_next = state.h.updated(solution.hhat)
    if not is_normal_form(h_next.A):
        raise InvariantError('A left the normal form at step {0}.'.format(j))
    h_next.check_closeness(state.h0, state.delta0, norm.beta)
    epsilon_next = measure_epsilon(f_next, sigma_next, mu_next, norm)
    new_state = KamState(j + 1, h_next, f_next, epsilon_next, mu_next,
                         state.h0, state.delta0,
                         state.energy + solution.hhat.c, None, state.epsilon)

    flow = FlowMap(generator, 1.0, options.rk_steps)
    points = _sample_points(state, mu_next, RESIDUAL_POINTS, RESIDUAL_SEED)
    residual, displacement = conjugacy_residual(state, new_state, flow,
                                                points)
    previous = state.previous_epsilon or state.epsilon
    predicted = predicted_epsilon(previous, state.epsilon, schedule,
                                  max(j, 1), f.n)
    omega_drift, a_drift = h_next.drift(state.h0, norm.beta)
    entry.update([('epsilon_next', epsilon_next), ('predicted', predicted),
                  ('within_prediction', epsilon_next <= 10.0 * predicted),
                  ('residual', residual), ('displacement', displacement),
                  ('flow_terms', flow.terms),
                  ('omega_drift', omega_drift), ('A_drift', a_drift)])
    new_state.log = state.log + [entry]
    logger.info('Step {0}: eps {1:.3e} -> {2:.3e}, N={3}, kappa={4:.3e}, '
                'residual {5:.3e}.'.format(j, state.epsilon, epsilon_next,
                                           n_cut, kappa, residual))
    return new_state


class ConvergenceReport(object):

    def __init__(self, status, state, schedule, rho, thresholds):
        self.status = status
        self.state = state
        self.schedule = schedule
        self.rho = [float(x) for x in rho]
        self.thresholds = thresholds
        steps = [entry for entry in state.log if 'epsilon_next' in entry]
        self.eps = [schedule.epsilon] + [e['epsilon_next'] for e in steps]
        self.omega_drift = [e['omega_drift'] for e in steps]
        self.A_drift = [e['A_drift'] for e in steps]
        self.phi_disp = [e['displacement'] for e in steps]
        self.residuals = [e['residual'] for e in steps]
        self.exponents = [
            math.log(b) / math.log(a) if 0 < a < 1 and b > 0 else None
            for a, b in zip(self.eps, self.eps[1:])]
        spectrum = hamiltonian_spectrum(state.h.A)
        hamiltonian = state.h.clustering.symplectic().dot(state.h.A.data)
        self.eigenvalues = [float(x) for x in spectrum]
        self.imaginary_spectrum = bool(np.allclose(
            np.linalg.eigvals(hamiltonian).real, 0.0, atol=1e-10))

    @property
    def steps(self):
        return len(self.eps) - 1

    def to_dict(self):
        audits = [e['audit'] for e in self.state.log if 'audit' in e]
        return OrderedDict([
            ('status', self.status),
            ('rho', self.rho),
            ('steps', self.steps),
            ('eps', self.eps),
            ('omega_drift', self.omega_drift),
            ('A_drift', self.A_drift),
            ('phi_disp', self.phi_disp),
            ('residuals', self.residuals),
            ('exponents', self.exponents),
            ('energy', self.state.energy),
            ('omega', self.state.h.omega.tolist()),
            ('eigenvalues', self.eigenvalues),
            ('imaginary_spectrum', self.imaginary_spectrum),
            ('thresholds', self.thresholds),
            ('schedule', self.schedule.config),
            ('last_audit', audits[-1] if audits else None),
        ])


def run(model, clustering, f, rho, epsilon, j_max=4, tol=1e-14,
        options=StepOptions(), norm=NormOptions(), logger=None):
    """Iterate kam_step at one parameter value.

    f is rescaled so that its measured size at (sigma_0, mu_0) is epsilon.
    Failures end the run with a status instead of raising.
    """
    logger = logger or logging.getLogger(__name__)
    schedule = Schedule(epsilon, options.sigma0, options.mu0,
                        f.lattice.k_max)
    h0 = NormalFormHam.initial(model, clustering, rho, schedule.delta0)
    size = measure_epsilon(f, options.sigma0, options.mu0, norm)
    f = f * (epsilon / size) if size else f
    thresholds = OrderedDict([
        ('epsilon', epsilon),
        ('model_threshold', model.epsilon_threshold),
        ('delta0_fourth', model.delta_zero ** 4),
        ('satisfied', epsilon <= min(model.epsilon_threshold,
                                     model.delta_zero ** 4)),
    ])
    if not thresholds['satisfied']:
        logger.warning('eps={0} is above the smallness threshold {1}.'.format(
            epsilon, thresholds['model_threshold']))
    state = KamState(0, h0, f, epsilon if size else 0.0, options.mu0, h0,
                     schedule.delta0)
    status = MAXITER
    while True:
        if state.epsilon < tol:
            status = CONVERGED
            break
        if state.j >= j_max:
            break
        try:
            state = kam_step(state, schedule, options, norm, logger)
        except ExcludedError as error:
            logger.warning(str(error))
            status = EXCLUDED
            break
        except TailBudgetError as error:
            logger.warning(str(error))
            status = BUDGET
            break
        except (SmallnessError, InvariantError) as error:
            logger.warning(str(error))
            status = SMALLNESS
            break
    logger.info('Run at rho={0} ended with status {1} after {2} '
                'steps.'.format(list(rho), status, state.j))
    return ConvergenceReport(status, state, schedule, rho, thresholds)


def _run_one(arguments):
    model, clustering, f, rho, epsilon, j_max, tol, options, norm = arguments
    try:
        report = run(model, clustering, f, rho, epsilon, j_max, tol,
                     options, norm)
    except LatticeKamError as error:
        return OrderedDict([('rho', [float(x) for x in rho]),
                            ('status', 'error'), ('message', str(error))])
    return report.to_dict()


def run_batch(model, clustering, f, rhos, epsilon, j_max=4, tol=1e-14,
              options=StepOptions(), norm=NormOptions(), workers=1,
              logger=None):
    """run over a parameter grid; outcomes merged in sorted rho order."""
    logger = logger or logging.getLogger(__name__)
    jobs = [(model, clustering, f, np.asarray(rho, dtype=float), epsilon,
             j_max, tol, options, norm) for rho in rhos]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(job) for job in jobs]
    outcomes.sort(key=lambda outcome: outcome['rho'])
    counts = OrderedDict()
    for outcome in outcomes:
        counts[outcome['status']] = counts.get(outcome['status'], 0) + 1
    accepted = sum(1 for outcome in outcomes
                   if outcome['status'] in (CONVERGED, MAXITER))
    logger.info('Batch of {0} parameters: {1}.'.format(len(outcomes),
                                                        dict(counts)))
    return OrderedDict([
        ('count', len(outcomes)),
        ('accepted', accepted),
        ('excluded', counts.get(EXCLUDED, 0)),
        ('accepted_fraction', accepted / float(len(outcomes))
         if outcomes else 0.0),
        ('statuses', counts),
        ('runs', outcomes),
    ])
