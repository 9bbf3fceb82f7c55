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

import shutil
from os import path

from mock import Mock

from lattice_kam import ConfigError, scenario_command
from lattice_kam.constants import MANIFEST
from lattice_kam.tests import KG_SCENARIO, RunnerTestBase


class TestDecorator(RunnerTestBase):

    def setUp(self):
        super(TestDecorator, self).setUp()
        self.calls = []

        def cmd_echo(scenario, value=None):
            self.calls.append((scenario, value))
            with open(scenario.path('echo.txt'), 'w') as outfile:
                outfile.write('echo\n')
            return 0

        def cmd_broken(scenario):
            self.calls.append(scenario.out)
            raise RuntimeError('broken')

        self.echo = scenario_command(cmd_echo)
        self.broken = scenario_command(cmd_broken)

    def test_scenario_command(self):
        fake_log = Mock()
        code, out = self.echo(model_data=KG_SCENARIO, out=self.out(),
                               logger=fake_log, value=5)
        self.assertEqual(code, 0)
        self.assertEqual(out, self.out())
        scenario, value = self.calls[0]
        self.assertEqual(scenario.command, 'echo')
        self.assertEqual(value, 5)
        self.assertEqual(scenario.model.kind, 'KG_S2')
        self.assertTrue(fake_log.debug.called)
        manifest = self.read_json(out, MANIFEST)
        self.assertEqual(manifest['command'], 'echo')
        self.assertEqual(list(manifest['files']), ['echo.txt'])
        self.assertEqual(manifest['config']['W_max'], 2)

    def test_model_path(self):
        model_path = self.write_model(KG_SCENARIO)
        code, out = self.echo(model_path=model_path, out=self.out(),
                               overrides={'K_max': 3})
        self.assertEqual(code, 0)
        scenario, _ = self.calls[0]
        self.assertEqual(scenario.model_path, model_path)
        self.assertEqual(scenario.config['K_max'], 3)

    def test_temporary_workspace(self):
        code, out = self.echo(model_data=KG_SCENARIO)
        self.assertEqual(code, 0)
        self.assertFalse(path.isdir(out))
        code, kept = self.echo(model_data=KG_SCENARIO, keep=True)
        self.assertTrue(path.isfile(path.join(kept, MANIFEST)))
        self.addCleanup(shutil.rmtree, kept, True)

    def test_failure_cleans_workspace(self):
        with self.assertRaisesRegex(RuntimeError, 'broken'):
            self.broken(model_data=KG_SCENARIO)
        self.assertFalse(path.isdir(self.calls[0]))

    def test_bad_config_never_runs(self):
        with self.assertRaises(ConfigError):
            self.echo(model_data=dict(KG_SCENARIO, W_max=1))
        self.assertEqual(self.calls, [])
