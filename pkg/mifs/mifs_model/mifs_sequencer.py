"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

The sequencer's job is to sequence the actions needed to process a scenario in its mode:
validate it, run the weak curve pipeline over its depths, or render an existing report.
"""

import os
from logging import getLogger
from pathlib import Path

from mifs.mifs_model.exceptions import ScenarioError
from mifs.mifs_model.mifs_config import MifsConfig
from mifs.mifs_model.mifs_mode import MifsMode
from mifs.mifs_model.report_writer import read_report, render_report, write_report
from mifs.mifs_model.run_actions import (
    RunReport,
    check_python_version,
    run_scenario,
    summary_table,
    validate_scenario,
)
from mifs.version_information import MIN_PYTHON_MAJOR, MIN_PYTHON_MINOR

logger = getLogger(__name__)

SEED_VARIABLE = 'MIFS_SEED'


class MifsSequencer:
    """A Sequencer instance to control the processing of one scenario or report"""

    def __init__(
        self,
        output_path: str | Path,
        mode: MifsMode,
        scenario_file: str | Path | None = None,
        report_file: str | Path | None = None,
        svg_dir: str | Path | None = None,
        silent: bool = False,
        depths: list[int] | None = None,
        eta: float | None = None,
        eps: float | None = None,
        eps0: float | None = None,
        jobs: int | None = None,
    ):
        """
        Create a new Sequencer
        :param output_path: existing folder for the log, the report and figures
        :param mode: what to do
        :param scenario_file: the JSON scenario (validate and run)
        :param report_file: a report written by a run (render)
        :param svg_dir: target of rendered files, the output folder by default
        :param silent: no console feedback
        :param depths, eta, eps, eps0: overrides of the scenario's pipeline settings
        :param jobs: worker count for the depth sweep, all cores by default
        """
        self.output_path = Path(output_path)
        if not self.output_path.is_dir():
            logger.error('Output directory does not exist: %s', self.output_path)
            raise FileNotFoundError(f'Invalid output directory: {self.output_path}')
        self.mode = mode
        self.scenario_file = Path(scenario_file) if scenario_file is not None else None
        self.report_file = Path(report_file) if report_file is not None else None
        self.svg_dir = Path(svg_dir) if svg_dir is not None else self.output_path
        self.silent = silent
        self.overrides = {'depths': depths, 'eta': eta, 'eps': eps, 'eps0': eps0}
        if jobs is not None and jobs < 1:
            raise ScenarioError(f'jobs must be at least 1, got {jobs}')
        self.jobs = jobs or os.cpu_count() or 1
        self.config: MifsConfig | None = None

    def start(self) -> RunReport:
        """Start the processing"""
        if not check_python_version(MIN_PYTHON_MAJOR, MIN_PYTHON_MINOR):
            logger.error('Failed pre-run checks...  See log file for details')
            raise RuntimeError('python version is too old')

        match self.mode:
            case MifsMode.RENDER:
                return self._render()
            case MifsMode.VALIDATE | MifsMode.RUN:
                pass
            case _:
                raise NotImplementedError(f'mode {self.mode} is not handled')

        if self.scenario_file is None:
            logger.error('Mode %s needs a scenario file', self.mode.name)
            raise FileNotFoundError('no scenario file provided')
        self.config = self._load_config()
        if not self.silent:
            print(repr(self.config))

        report = RunReport(self.mode, header=self.config.header())
        match self.mode:
            case MifsMode.VALIDATE:
                validate_scenario(self.config, report)
            case MifsMode.RUN:
                run_scenario(self.config, report, jobs=self.jobs)
        report.artifacts.append(write_report(report.to_dict(), self.output_path))
        if report.passed:
            logger.info('%s of scenario %s passed', self.mode.name, self.config.name)
        else:
            logger.error('Stage %s failed', report.failed_stage)
        if not self.silent:
            print(summary_table(report))
        return report

    def _load_config(self) -> MifsConfig:
        """
        the scenario with its overrides applied
        :raises ScenarioError: anything unusable in the scenario file or the overrides
        """
        try:
            self.config = MifsConfig.build_config(
                scenario_file=self.scenario_file,
                output_path=self.output_path,
                silent=self.silent,
                scenario_mode=self.mode,
            )
            self._apply_overrides()
        except ScenarioError:
            raise
        except (ValueError, KeyError, TypeError, AttributeError) as e:
            logger.error('Unusable scenario %s: %s', self.scenario_file, e)
            raise ScenarioError(f'{self.scenario_file}: {e}') from e
        return self.config

    def _apply_overrides(self):
        """command line overrides, then the seed from the environment"""
        changes = dict(self.overrides)
        if changes['depths'] is not None:
            changes['depths'] = tuple(changes['depths'])
        seed = os.environ.get(SEED_VARIABLE)
        if seed is not None:
            try:
                changes['seed'] = int(seed)
            except ValueError:
                logger.error('%s must be an integer, got %r', SEED_VARIABLE, seed)
                raise ScenarioError(f'{SEED_VARIABLE} must be an integer, got {seed!r}')
        # the settings object re-validates every change
        self.config.settings = self.config.settings.with_overrides(**changes)

    def _render(self) -> RunReport:
        if self.report_file is None:
            logger.error('Render needs a report file')
            raise FileNotFoundError('no report file provided')
        try:
            data = read_report(self.report_file)
            report = RunReport(MifsMode.RENDER, header=data.get('header', {}))
            report.artifacts = render_report(data, self.svg_dir)
        except (ValueError, KeyError, TypeError, AttributeError) as e:
            logger.error('Unreadable report %s: %s', self.report_file, e)
            raise ScenarioError(f'{self.report_file}: {e}') from e
        if not self.silent:
            print(f'{len(report.artifacts)} files written to {self.svg_dir}')
        return report
