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

from os import path

import numpy as np

from lattice_kam_sdk import DomainError

from lattice_kam import tasks
from lattice_kam.constants import (
    APP_REPORT,
    BATCH_CSV,
    BATCH_REPORT,
    EPS_CSV,
    EXCLUSION,
    EXCLUSION_CSV,
    EXIT_EXCLUDED,
    EXIT_OK,
    F_FIXTURE,
    H0_FIXTURE,
    HESSIAN_CSV,
    HOMO_REPORT,
    HYPOTHESES,
    KAM_REPORT,
    MANIFEST,
    SUMMARY,
)
from lattice_kam.tests import (
    KG_SCENARIO,
    NEAR_RESONANT_RHO,
    QHO_SCENARIO,
    RunnerTestBase,
)


class MeasureExclusionTests(RunnerTestBase):

    def test_measure_exclusion(self):
        code, out = tasks.cmd_measure_exclusion(model_data=QHO_SCENARIO,
                                                out=self.out())
        self.assertEqual(code, EXIT_OK)
        report = self.read_json(out, EXCLUSION)
        self.assertEqual(report['kappas'], [0.1, 0.05])
        self.assertEqual(report['samples'], 64)
        table = np.loadtxt(path.join(out, EXCLUSION_CSV), delimiter=',',
                           skiprows=1)
        self.assertEqual(table.shape[0], 2)
        self.assertEqual(list(table[:, 1]), report['fractions'])
        self.assertTrue(path.isfile(path.join(out, SUMMARY)))

    def test_manifest_is_deterministic(self):
        manifests = []
        for name in ('first', 'second'):
            _, out = tasks.cmd_measure_exclusion(model_data=QHO_SCENARIO,
                                                 out=self.out(name))
            manifests.append(self.read_json(out, MANIFEST))
        first, second = manifests
        self.assertEqual(first['config_hash'], second['config_hash'])
        self.assertEqual(first['files'], second['files'])
        self.assertEqual(first['seed'], 0)
        self.assertEqual(sorted(first['files']),
                         sorted([EXCLUSION, EXCLUSION_CSV, SUMMARY]))

    def test_seed_changes_hash(self):
        _, out = tasks.cmd_measure_exclusion(model_data=QHO_SCENARIO,
                                             out=self.out('first'))
        _, other = tasks.cmd_measure_exclusion(model_data=QHO_SCENARIO,
                                               overrides={'seed': 3},
                                               out=self.out('second'))
        self.assertNotEqual(self.read_json(out, MANIFEST)['config_hash'],
                            self.read_json(other, MANIFEST)['config_hash'])


class CheckHypothesesTests(RunnerTestBase):

    def test_oscillator_passes(self):
        code, out = tasks.cmd_check_hypotheses(model_data=QHO_SCENARIO,
                                               out=self.out())
        self.assertEqual(code, EXIT_OK)
        report = self.read_json(out, HYPOTHESES)
        self.assertTrue(report['passed'])
        self.assertTrue(report['A1']['passed'])
        self.assertTrue(report['cluster_bound']['passed'])
        self.assertEqual(report['exclusion']['samples'], 64)
        with open(path.join(out, SUMMARY)) as infile:
            self.assertIn('A1: pass', infile.read())


class KamRunTests(RunnerTestBase):

    def test_no_steps(self):
        code, out = tasks.cmd_kam_run(model_data=KG_SCENARIO,
                                      overrides={'rho': '1.5'},
                                      out=self.out())
        self.assertEqual(code, EXIT_OK)
        report = self.read_json(out, KAM_REPORT)
        self.assertEqual(report['status'], 'maxiter')
        self.assertEqual(report['rho'], [1.5])
        table = np.loadtxt(path.join(out, EPS_CSV), delimiter=',',
                           skiprows=1, ndmin=2)
        self.assertEqual(table.shape, (1, 5))

    def test_zero_nonlinearity_converges(self):
        code, out = tasks.cmd_kam_run(
            model_data=dict(KG_SCENARIO, nonlinearity='zero'),
            overrides={'rho': '1.5'}, out=self.out())
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(self.read_json(out, KAM_REPORT)['status'],
                         'converged')

    def test_excluded_parameter(self):
        code, out = tasks.cmd_kam_run(
            model_data=dict(KG_SCENARIO, J_max=1),
            overrides={'rho': str(NEAR_RESONANT_RHO)}, out=self.out())
        self.assertEqual(code, EXIT_EXCLUDED)
        self.assertEqual(self.read_json(out, KAM_REPORT)['status'],
                         'excluded')

    def test_grid(self):
        code, out = tasks.cmd_kam_run(model_data=KG_SCENARIO,
                                      overrides={'rho': '1.5;1.2'},
                                      out=self.out())
        self.assertEqual(code, EXIT_OK)
        batch = self.read_json(out, BATCH_REPORT)
        self.assertEqual(batch['count'], 2)
        self.assertEqual(batch['accepted'], 2)
        self.assertEqual([run['rho'] for run in batch['runs']],
                         [[1.2], [1.5]])
        table = np.loadtxt(path.join(out, BATCH_CSV), delimiter=',',
                           skiprows=1, ndmin=2)
        self.assertEqual(table.shape, (2, 4))

    def test_sampled_parameter(self):
        _, out = tasks.cmd_kam_run(model_data=KG_SCENARIO, out=self.out())
        rho = self.read_json(out, KAM_REPORT)['rho']
        self.assertEqual(len(rho), 1)
        self.assertTrue(1.0 <= rho[0] <= 2.0)


class SolveHomoTests(RunnerTestBase):

    def test_solve(self):
        code, out = tasks.cmd_solve_homo(model_data=KG_SCENARIO,
                                         overrides={'rho': '1.5'},
                                         out=self.out())
        self.assertEqual(code, EXIT_OK)
        report = self.read_json(out, HOMO_REPORT)
        self.assertEqual(report['status'], 'solved')
        self.assertAlmostEqual(report['kappa'], 0.01)
        self.assertLess(report['residual'], 1e-15)
        self.assertEqual(report['f_size'], 1e-6)

    def test_near_resonance_excludes(self):
        code, out = tasks.cmd_solve_homo(
            model_data=KG_SCENARIO,
            overrides={'rho': str(NEAR_RESONANT_RHO)}, out=self.out())
        self.assertEqual(code, EXIT_EXCLUDED)
        report = self.read_json(out, HOMO_REPORT)
        self.assertEqual(report['status'], 'excluded')
        self.assertTrue(report['audit']['sum']['excluded'])

    def test_kappa_above_half_delta0(self):
        with self.assertRaisesRegex(DomainError, 'delta0 / 2'):
            tasks.cmd_solve_homo(model_data=KG_SCENARIO,
                                 overrides={'rho': '1.5', 'kappa': 10.0},
                                 out=self.out())


class AppDemoTests(RunnerTestBase):

    def test_oscillator(self):
        code, out = tasks.cmd_app_demo(
            model_data=dict(QHO_SCENARIO, W_max=2), out=self.out())
        self.assertEqual(code, EXIT_OK)
        report = self.read_json(out, APP_REPORT)
        self.assertTrue(report['real'])
        self.assertEqual(report['modes'], 2)
        self.assertEqual(report['t_eigenvalues'], [2.0, 4.0])
        self.assertIn('[0]:4', report['terms'])
        for name in (HESSIAN_CSV, H0_FIXTURE, F_FIXTURE):
            self.assertTrue(path.isfile(path.join(out, name)))

    def test_klein_gordon(self):
        code, out = tasks.cmd_app_demo(model_data=KG_SCENARIO,
                                       overrides={'rho': '1.5'},
                                       out=self.out())
        self.assertEqual(code, EXIT_OK)
        report = self.read_json(out, APP_REPORT)
        self.assertNotIn('t_eigenvalues', report)
        self.assertEqual(report['modes'], 7)
        self.assertEqual(len(report['hessian_table']), 4)
