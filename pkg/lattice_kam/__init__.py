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

from lattice_kam.constants import LOGGER_NAME
from lattice_kam.utils import (
    ConfigError,
    Scenario,
    create_workspace,
    delete_workspace,
    load_model_file,
    merge_config,
    numpy_errors,
    validate_config,
    write_manifest,
)

__all__ = ['ConfigError', 'scenario_command']


def scenario_command(func):

    def wrapper(model_path=None,
                model_data=None,
                overrides=None,
                out=None,
                keep=False,
                logger=None,
                **kwargs):
        """Prepare the Scenario to send to a cmd_* operation.

        :param model_path: Path to the YAML or JSON model description.
        :param model_data: A model mapping used instead of model_path.
        :param overrides: Command line values, they win over the file.
        :param out: Output directory. A temporary workspace when None.
        :param keep: Keep the temporary workspace after the command.
        :param logger: Logger, the runner logger when None.
        :param kwargs: Passed on to the operation.
        :return: (exit code, output directory)
        """

        logger = logger or logging.getLogger(LOGGER_NAME)
        if model_data is None:
            model_data = load_model_file(model_path)
        config = merge_config(model_data, overrides)
        model = validate_config(config)
        workspace = create_workspace(out)
        try:
            scenario = Scenario(func.__name__.replace('cmd_', '', 1),
                                config, model, workspace, logger,
                                model_path)
            logger.debug('Scenario config: {0}'.format(dict(config)))
            with numpy_errors(logger):
                code = func(scenario, **kwargs)
            write_manifest(scenario)
            return code, workspace
        finally:
            if out is None and not keep:
                delete_workspace(workspace)

    return wrapper
