"""
Tests for the run actions: pre-run checks, scenario validation and the run report

Created on:  10/19/26
"""

import json

import numpy as np
import pytest

from mifs.mifs_model.exceptions import ScenarioError
from mifs.mifs_model.mifs_config import MifsConfig
from mifs.mifs_model.mifs_mode import MifsMode
from mifs.mifs_model.mifs_sequencer import MifsSequencer
from mifs.mifs_model.run_actions import (
    RunReport,
    check_python_version,
    round_trip_residuals,
    run_scenario,
    summary_table,
    validate_scenario,
)
from tests.conftest import SCENARIO_PATH


def test_python_version():
    assert check_python_version(3, 0)
    assert not check_python_version(99, 0)


def test_run_report_keeps_the_first_failure():
    report = RunReport(MifsMode.RUN)
    assert report.record('ifs', {'passed': True})
    assert not report.record('orbit', {'passed': False})
    assert not report.record('homoclinic', {'passed': False})
    assert report.failed_stage == 'orbit'
    assert not report.passed
    data = report.to_dict()
    assert data['failedStage'] == 'orbit'
    assert data['mode'] == 'run'
    table = summary_table(report)
    assert 'orbit' in table and 'FAIL' in table


def test_round_trip_of_the_toy(toy_ifs):
    residuals = round_trip_residuals(toy_ifs, 1000, seed=3)
    assert len(residuals) == 2
    assert max(residuals) < 1e-12


@pytest.fixture()
def period_two(tmp_path) -> MifsConfig:
    return MifsConfig.build_config(SCENARIO_PATH / 'period_two.json', tmp_path, silent=True)


def test_validate_period_two(period_two):
    report = RunReport(MifsMode.VALIDATE)
    assert validate_scenario(period_two, report), report.stages
    orbit = report.stages['orbit']
    assert orbit['period'] == 2
    assert orbit['point'] == pytest.approx([0.0, 0.0], abs=1e-10)
    assert np.sort(np.abs(orbit['eigen'])) == pytest.approx([0.36, 0.49])
    assert report.stages['homoclinic']['checks']['orbitFree']['passed']


def test_homoclinic_of_the_wrong_orbit(tmp_path):
    data = json.loads((SCENARIO_PATH / 'toy.json').read_text())
    # the fixed point of f2 is (0.8 / 0.95, 0) and Q does not return to it
    data['orbitWord'] = [1]
    path = tmp_path / 'wrong_orbit.json'
    path.write_text(json.dumps(data))
    config = MifsConfig.build_config(path, tmp_path, silent=True)
    report = RunReport(MifsMode.VALIDATE)
    assert not validate_scenario(config, report)
    assert report.failed_stage == 'homoclinic'
    assert report.stages['orbit']['point'] == pytest.approx([0.8 / 0.95, 0.0], abs=1e-9)
    assert not report.stages['homoclinic']['checks']['reachesOrbit']['passed']


def test_sequencer_applies_overrides(tmp_path):
    sequencer = MifsSequencer(
        tmp_path,
        MifsMode.VALIDATE,
        scenario_file=SCENARIO_PATH / 'toy.json',
        silent=True,
        depths=[40, 45],
        eta=0.1,
        jobs=1,
    )
    report = sequencer.start()
    assert report.passed
    assert sequencer.config.settings.depths == (40, 45)
    assert sequencer.config.settings.eta == 0.1
    assert report.header['settings']['depths'] == (40, 45)
    assert report.artifacts[0].is_file()


def test_sequencer_rejects_bad_input(tmp_path):
    with pytest.raises(FileNotFoundError):
        MifsSequencer(tmp_path / 'nowhere', MifsMode.RUN)
    with pytest.raises(ScenarioError):
        MifsSequencer(tmp_path, MifsMode.RUN, jobs=0)
    with pytest.raises(FileNotFoundError):
        MifsSequencer(tmp_path, MifsMode.RUN).start()


unusable_cases = [
    {'name': 'truncated_json', 'text': '{"schema": "mifs/1", '},
    {'name': 'wrong_schema', 'text': '{"schema": "mifs/0"}'},
    {'name': 'branch_without_map', 'text': None},
]


@pytest.mark.parametrize('case', unusable_cases, ids=lambda p: p['name'])
def test_sequencer_names_unusable_scenarios(tmp_path, case):
    text = case['text']
    if text is None:
        data = json.loads((SCENARIO_PATH / 'toy.json').read_text())
        del data['branches'][0]['map']
        text = json.dumps(data)
    path = tmp_path / 'scenario.json'
    path.write_text(text)
    with pytest.raises(ScenarioError):
        MifsSequencer(tmp_path, MifsMode.VALIDATE, scenario_file=path, silent=True).start()


def test_run_needs_the_prepared_block(tmp_path):
    data = json.loads((SCENARIO_PATH / 'toy.json').read_text())
    del data['preparedParams']
    path = tmp_path / 'scenario.json'
    path.write_text(json.dumps(data))
    config = MifsConfig.build_config(path, tmp_path, silent=True)
    with pytest.raises(ScenarioError, match='preparedParams'):
        run_scenario(config, RunReport(MifsMode.RUN), jobs=1)
