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

from lattice_kam_sdk.apps import (
    KGProblem,
    QHOProblem,
    hessian_table,
    kg_build,
    qho_build,
)
from lattice_kam_sdk.homo import (
    NormalFormHam,
    measure_exclusion,
    residual,
    solve_homological,
)
from lattice_kam_sdk.jets import jet_norm, jet_of, jet_to_dict
from lattice_kam_sdk.kam import Schedule, measure_epsilon, run, run_batch
from lattice_kam_sdk.modes import (
    KG_S2,
    check_A1,
    check_A2,
    enumerate_modes,
    normal_clustering,
    sample_melnikov,
    sample_rho,
)

from lattice_kam import scenario_command
from lattice_kam.constants import (
    ACCEPTED_STATUSES,
    APP_REPORT,
    BATCH_CSV,
    BATCH_REPORT,
    EPS_CSV,
    EXCLUSION,
    EXCLUSION_CSV,
    EXIT_EXCLUDED,
    EXIT_FAILED,
    EXIT_OK,
    F_FIXTURE,
    H0_FIXTURE,
    HESSIAN_CSV,
    HOMO_REPORT,
    HYPOTHESES,
    KAM_REPORT,
    SUMMARY,
)
from lattice_kam.utils import write_csv, write_json, write_text


def scenario_rhos(scenario):
    """The --rho points, or one seeded sample of the parameter box."""
    if scenario.config['rho']:
        return [list(rho) for rho in scenario.config['rho']]
    return [sample_rho(scenario.model, 1, scenario.seed)[0].tolist()]


def build_problem(scenario, rho):
    """(h_0, f) of the application named by the model kind."""
    config = scenario.config
    w_max, k_max, d_max = (config['W_max'], config['K_max'],
                           config['D_max'])
    if scenario.model.kind == KG_S2:
        problem = KGProblem(scenario.model, config['nonlinearity'])
        h0, f = kg_build(problem, w_max, d_max, k_max, rho,
                         logger=scenario.logger)
    else:
        problem = QHOProblem(scenario.model, config['nonlinearity'],
                             config['beta'], config['hartree_width'])
        h0, f = qho_build(problem, w_max, d_max, k_max, rho,
                          logger=scenario.logger)
    return problem, h0, f


def _exclusion_rows(report):
    return [[kappa, report.fractions[i]] +
            [report.family_fractions[family][i]
             for family in report.families]
            for i, kappa in enumerate(report.kappas)]


@scenario_command
def cmd_check_hypotheses(scenario):
    config = scenario.config
    model = scenario.model
    w_max = config['W_max']
    scenario.logger.debug('Checking hypotheses for {0}.'.format(
        model.config))

    a1 = check_A1(model, w_max)
    a2 = check_A2(model, config['N'], w_max)
    constant, exponent = model.cluster_constant
    clusters = enumerate_modes(model, w_max).cardinality_bound_holds(
        constant, exponent)
    exclusion = sample_melnikov(model, config['kappas'], config['N'],
                                config['samples'], scenario.seed, w_max,
                                logger=scenario.logger)
    checks = OrderedDict([('A1', a1['passed']), ('clusters', clusters)])
    if 'near_integer_passed' in a1:
        checks['near_integer'] = a1['near_integer_passed']
    passed = all(checks.values())
    thresholds = OrderedDict([
        ('delta_star', model.delta_star),
        ('delta_zero', model.delta_zero),
        ('epsilon_threshold', model.epsilon_threshold),
        ('eps', config['eps']),
        ('eps_below_threshold', config['eps'] <= model.epsilon_threshold),
    ])
    report = OrderedDict([
        ('model', model.config),
        ('A1', a1),
        ('A2', a2),
        ('cluster_bound', OrderedDict([('C', constant), ('d', exponent),
                                       ('passed', clusters)])),
        ('thresholds', thresholds),
        ('exclusion', exclusion.config),
        ('checks', checks),
        ('passed', passed),
    ])
    write_json(scenario.path(HYPOTHESES), report)
    write_csv(scenario.path(EXCLUSION_CSV),
              ['kappa', 'fraction'] + exclusion.families,
              _exclusion_rows(exclusion))
    lines = ['{0}: {1}'.format(name, 'pass' if ok else 'FAIL')
             for name, ok in checks.items()]
    lines += ['A2 {0}: {1}'.format(family, 'pass' if entry['passed']
                                   else 'not shown')
              for family, entry in a2.items()]
    lines.append('eps={0} threshold={1}'.format(
        config['eps'], model.epsilon_threshold))
    write_text(scenario.path(SUMMARY), lines)
    scenario.logger.info('Hypotheses {0}.'.format(
        'hold' if passed else 'fail'))
    return EXIT_OK if passed else EXIT_FAILED


@scenario_command
def cmd_kam_run(scenario):
    config = scenario.config
    rhos = scenario_rhos(scenario)
    _, h0, f = build_problem(scenario, rhos[0])
    arguments = dict(j_max=config['J_max'], tol=config['tol'],
                     options=scenario.step_options, norm=scenario.norm)

    if len(rhos) > 1:
        batch = run_batch(scenario.model, h0.clustering, f, rhos,
                          config['eps'], workers=config['workers'],
                          logger=scenario.logger, **arguments)
        write_json(scenario.path(BATCH_REPORT), batch)
        write_csv(scenario.path(BATCH_CSV),
                  ['rho_{0}'.format(i) for i in range(len(rhos[0]))] +
                  ['accepted', 'steps', 'eps_final'],
                  [outcome['rho'] + [
                      outcome['status'] in ACCEPTED_STATUSES,
                      outcome.get('steps', 0),
                      (outcome.get('eps') or [config['eps']])[-1]]
                   for outcome in batch['runs']])
        write_text(scenario.path(SUMMARY), [
            'runs: {0}'.format(batch['count']),
            'accepted: {0}'.format(batch['accepted']),
            'excluded: {0}'.format(batch['excluded'])])
        return EXIT_OK

    report = run(scenario.model, h0.clustering, f, rhos[0], config['eps'],
                 logger=scenario.logger, **arguments).to_dict()
    write_json(scenario.path(KAM_REPORT), report)
    rows = []
    for j, eps in enumerate(report['eps']):
        previous = j - 1
        rows.append([j, eps] + [
            report[key][previous] if j else 0.0
            for key in ('omega_drift', 'A_drift', 'phi_disp')])
    write_csv(scenario.path(EPS_CSV),
              ['j', 'eps', 'omega_drift', 'A_drift', 'phi_disp'], rows)
    write_text(scenario.path(SUMMARY), [
        'status: {0}'.format(report['status']),
        'steps: {0}'.format(report['steps']),
        'eps: {0}'.format(' '.join('{0:.3e}'.format(e)
                                   for e in report['eps']))])
    scenario.logger.info('kam_run status {0}.'.format(report['status']))
    if report['status'] == 'excluded':
        return EXIT_EXCLUDED
    if report['status'] in ACCEPTED_STATUSES:
        return EXIT_OK
    return EXIT_FAILED


@scenario_command
def cmd_solve_homo(scenario):
    config = scenario.config
    rho = scenario_rhos(scenario)[0]
    _, h0, f = build_problem(scenario, rho)
    norm = scenario.norm
    sigma0, mu0 = config['sigma0'], config['mu0']
    size = measure_epsilon(f, sigma0, mu0, norm)
    if size:
        f = f * (config['eps'] / size)
    schedule = Schedule(config['eps'], sigma0, mu0, config['K_max'])
    kappa = config['kappa'] or schedule.kappa(config['eps'])
    h0 = NormalFormHam.initial(scenario.model, h0.clustering, rho,
                               schedule.delta0)
    scenario.logger.debug('Solving at rho={0}, kappa={1}, N={2}.'.format(
        rho, kappa, config['N']))

    solution = solve_homological(jet_of(f), h0, kappa, config['N'],
                                 norm.s, scenario.logger, norm.beta)
    error = residual(solution, f, h0).max_coefficient()
    excluded = solution.audit.excluded
    report = OrderedDict([
        ('status', 'excluded' if excluded else 'solved'),
        ('rho', rho),
        ('kappa', kappa),
        ('N', config['N']),
        ('f_size', config['eps'] if size else 0.0),
        ('residual', error),
        ('S_norm', jet_norm(solution.S, 0.5 * sigma0, mu0, norm.s,
                            norm.beta, plus=True)),
        ('R_norm', jet_norm(solution.R, 0.5 * sigma0, mu0, norm.s,
                            norm.beta)),
        ('solution', solution.report),
        ('audit', solution.audit.to_dict()),
    ])
    write_json(scenario.path(HOMO_REPORT), report)
    write_text(scenario.path(SUMMARY), [
        'status: {0}'.format(report['status']),
        'residual: {0:.3e}'.format(error)])
    return EXIT_EXCLUDED if excluded else EXIT_OK


@scenario_command
def cmd_app_demo(scenario):
    config = scenario.config
    rho = scenario_rhos(scenario)[0]
    problem, h0, f = build_problem(scenario, rho)
    clustering = h0.clustering
    table = hessian_table(f, clustering, config['norm_beta'])
    values = [value for value in table.values() if value > 0]
    spread = max(values) / min(values) if values else None

    write_csv(scenario.path(HESSIAN_CSV), ['w_a', 'w_b', 'weighted_hs'],
              [[wa, wb, value] for (wa, wb), value in table.items()])
    write_json(scenario.path(H0_FIXTURE), jet_to_dict(h0.as_jet(f.lattice)))
    write_json(scenario.path(F_FIXTURE), jet_to_dict(jet_of(f)))
    report = OrderedDict([
        ('problem', problem.config),
        ('modes', clustering.size),
        ('terms', ['{0}:{1}'.format(list(alpha), m)
                   for alpha, m in f.keys()]),
        ('real', f.is_real()),
        ('eigenvalues', [scenario.model.normal_eigenvalue(w)
                         for w in clustering.weights]),
        ('hessian_beta', config['norm_beta']),
        ('hessian_spread', spread),
        ('hessian_table', OrderedDict(
            ('{0},{1}'.format(wa, wb), value)
            for (wa, wb), value in table.items())),
    ])
    if scenario.model.kind != KG_S2:
        report['t_eigenvalues'] = [scenario.model.t_eigenvalue(w)
                                   for w in clustering.weights]
    write_json(scenario.path(APP_REPORT), report)
    write_text(scenario.path(SUMMARY), [
        'terms: {0}'.format(len(report['terms'])),
        'hessian spread: {0}'.format(spread)])
    return EXIT_OK


@scenario_command
def cmd_measure_exclusion(scenario):
    config = scenario.config
    clustering = normal_clustering(scenario.model, config['W_max'])
    report = measure_exclusion(scenario.model, clustering, config['kappas'],
                               config['N'], config['samples'],
                               scenario.seed, logger=scenario.logger)
    write_json(scenario.path(EXCLUSION), report.config)
    write_csv(scenario.path(EXCLUSION_CSV),
              ['kappa', 'fraction'] + report.families,
              _exclusion_rows(report))
    write_text(scenario.path(SUMMARY), [
        'kappa {0}: {1}'.format(k, f)
        for k, f in zip(report.kappas, report.fractions)])
    return EXIT_OK
