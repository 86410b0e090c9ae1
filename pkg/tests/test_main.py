"""
Tests of the command line front end: argument parsing, exit codes and the files each command writes

Created on:  10/19/26
"""

import csv
import json

import pytest

import main
from mifs.mifs_model import mifs_sequencer
from mifs.mifs_model.exceptions import (
    ConstraintViolation,
    DomainError,
    NumericFailure,
    ScenarioError,
)
from mifs.mifs_model.report_writer import REPORT_NAME
from tests.conftest import SCENARIO_PATH

TOY = SCENARIO_PATH / 'toy.json'


def test_parse_args(tmp_path):
    # no command
    with pytest.raises(SystemExit) as e:
        main.parse_args(f'--out {tmp_path}'.split())
    assert e.value.code == main.EXIT_INPUT

    # bad output path
    with pytest.raises(FileNotFoundError):
        main.parse_args(f'--out big_bird validate {TOY}'.split())

    options = main.parse_args(f'--out {tmp_path} -s -d run {TOY} --depths 40,44 --jobs 2'.split())
    assert options.output_path == tmp_path
    assert options.silent and options.debug
    assert options.command == 'run'
    assert options.depths == [40, 44]
    assert options.jobs == 2


depth_cases = [
    {'name': 'zero', 'text': '0'},
    {'name': 'negative', 'text': '40,-1'},
    {'name': 'words', 'text': 'deep'},
]


@pytest.mark.parametrize('case', depth_cases, ids=lambda p: p['name'])
def test_bad_depths_are_rejected(tmp_path, case):
    assert main.run_cli(['--out', str(tmp_path), 'run', str(TOY), '--depths', case['text']]) == 2


def test_version(capsys):
    assert main.run_cli(['--version']) == 0
    assert 'mifs Version' in capsys.readouterr().out


def test_missing_output_folder():
    assert main.run_cli(['--out', 'big_bird', 'validate', str(TOY)]) == 2


def test_commands_take_parsed_options(tmp_path):
    options = main.parse_args(['--out', str(tmp_path), '-s', 'validate', str(TOY)])
    assert main.cmd_validate(options) == main.EXIT_OK
    options = main.parse_args(['--out', str(tmp_path), '-s', 'render', str(tmp_path / REPORT_NAME)])
    assert main.cmd_render(options) == main.EXIT_OK
    assert list(tmp_path.glob('*.svg')) == []


# ------------------------------------------------------------------------------- validate


def test_validate_toy(tmp_path):
    assert main.run_cli(['--out', str(tmp_path), '-s', 'validate', str(TOY)]) == 0
    report = json.loads((tmp_path / REPORT_NAME).read_text())
    assert report['passed']
    assert report['mode'] == 'validate'
    assert set(report['stages']) == {'ifs', 'orbit', 'homoclinic'}
    assert report['stages']['ifs']['roundTrip']['max'] < 1e-9
    assert report['stages']['ifs']['samples'] == 1000
    assert report['header']['schema'] == 'mifs/1'
    assert report['header']['tolerances']['separationGap'] == 1e-3


bundled = ['toy', 'toy_canonical', 'toy_obstructed', 'two_disc', 'period_two']


@pytest.mark.parametrize('name', bundled)
def test_bundled_scenarios_validate(tmp_path, name):
    path = SCENARIO_PATH / f'{name}.json'
    assert main.run_cli(['--out', str(tmp_path), '-s', 'validate', str(path)]) == 0


def test_validation_is_deterministic(tmp_path):
    first, second = tmp_path / 'a', tmp_path / 'b'
    first.mkdir()
    second.mkdir()
    for out in (first, second):
        assert main.run_cli(['--out', str(out), '-s', 'validate', str(TOY)]) == 0
    assert (first / REPORT_NAME).read_bytes() == (second / REPORT_NAME).read_bytes()


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv('MIFS_SEED', '11')
    assert main.run_cli(['--out', str(tmp_path), '-s', 'validate', str(TOY)]) == 0
    report = json.loads((tmp_path / REPORT_NAME).read_text())
    assert report['header']['settings']['seed'] == 11

    monkeypatch.setenv('MIFS_SEED', 'eleven')
    assert main.run_cli(['--out', str(tmp_path), '-s', 'validate', str(TOY)]) == 2


def test_malformed_json(tmp_path):
    bad = tmp_path / 'bad.json'
    bad.write_text('{"schema": "mifs/1", ')
    assert main.run_cli(['--out', str(tmp_path), '-s', 'validate', str(bad)]) == 2


def test_overlapping_images_are_named(tmp_path, capsys):
    data = json.loads(TOY.read_text())
    # f2(D) now sits inside f1(D)
    data['branches'][1]['map'][0]['offset'] = [0.2, 0.0]
    data['homoclinic']['point'] = [0.2, 0.0]
    path = tmp_path / 'overlap.json'
    path.write_text(json.dumps(data))
    assert main.run_cli(['--out', str(tmp_path), '-s', 'validate', str(path)]) == 2
    assert 'stage: ifs' in capsys.readouterr().err
    report = json.loads((tmp_path / REPORT_NAME).read_text())
    assert report['failedStage'] == 'ifs'
    assert any('branches 0 and 1' in f for f in report['stages']['ifs']['failures'])


# ------------------------------------------------------------------------------------ run


def test_run_needs_a_flexible_path(tmp_path):
    two_disc = SCENARIO_PATH / 'two_disc.json'
    assert main.run_cli(['--out', str(tmp_path), '-s', 'run', str(two_disc), '--jobs', '1']) == 2


def test_run_needs_prepared_params(tmp_path, capsys):
    data = json.loads(TOY.read_text())
    del data['preparedParams']
    path = tmp_path / 'unprepared.json'
    path.write_text(json.dumps(data))
    assert main.run_cli(['--out', str(tmp_path), '-s', 'run', str(path), '--jobs', '1']) == 2
    assert 'preparedParams' in capsys.readouterr().err
    # validation does not need it
    assert main.run_cli(['--out', str(tmp_path), '-s', 'validate', str(path)]) == 0


failure_cases = [
    {
        'name': 'geometric condition',
        'error': ConstraintViolation('curves leave the declared graph bounds'),
        'code': main.EXIT_VERIFICATION,
    },
    {
        'name': 'point leaves a domain',
        'error': DomainError('point outside the disc'),
        'code': main.EXIT_VERIFICATION,
    },
    {
        'name': 'numeric breakdown',
        'error': NumericFailure('bisection did not converge'),
        'code': main.EXIT_NUMERIC,
    },
    {
        'name': 'unusable scenario',
        'error': ScenarioError('the scenario needs a flexiblePath block to run'),
        'code': main.EXIT_INPUT,
    },
]


@pytest.mark.parametrize('case', failure_cases, ids=lambda p: p['name'])
def test_run_failures_map_to_exit_codes(tmp_path, monkeypatch, case):
    def failing_run(*args, **kwargs):
        raise case['error']

    monkeypatch.setattr(mifs_sequencer, 'run_scenario', failing_run)
    code = main.run_cli(['--out', str(tmp_path), '-s', 'run', str(TOY), '--jobs', '1'])
    assert code == case['code']


def test_jobs_below_one_is_input(tmp_path):
    assert main.run_cli(['--out', str(tmp_path), '-s', 'run', str(TOY), '--jobs', '0']) == 2


@pytest.fixture(scope='module')
def toy_run(tmp_path_factory):
    out = tmp_path_factory.mktemp('toy_run')
    code = main.run_cli(
        ['--out', str(out), '-s', 'run', str(TOY), '--depths', '43,48', '--jobs', '1']
    )
    return code, out


def test_run_toy(toy_run):
    code, out = toy_run
    # the implied eta at depth 48 is still above the scenario eta of 0.05
    assert code == main.EXIT_VERIFICATION
    report = json.loads((out / REPORT_NAME).read_text())
    assert not report['passed']
    assert report['failedStage'] == 'pipeline'
    checks = report['stages']['pipeline']['checks']
    assert not checks['weakness']['passed']
    assert report['header']['settings']['eta'] == 0.05
    assert checks['weakness']['value'] > 0.05
    for stage in ('flexible', 'saddleNode', 'prepared', 'presolution', 'curves'):
        assert checks[stage]['passed'], stage
    assert [d['depth'] for d in report['depths']] == [43, 48]
    assert report['header']['settings']['depths'] == [43, 48]
    # the cost does not depend on the depth
    assert len({d['K'] for d in report['depths']}) == 1
    for block in report['depths']:
        assert 'Lambda0' in block['geometry']['polylines']
        assert {'wss', 'gamma'} <= {c['curveId'] for c in block['geometry']['curves']}


def test_render_toy_run(toy_run, tmp_path):
    _, out = toy_run
    svg_dir = tmp_path / 'figures'
    assert main.run_cli(
        ['--out', str(tmp_path), '-s', 'render', str(out / REPORT_NAME), '--svg', str(svg_dir)]
    ) == 0
    names = sorted(p.name for p in svg_dir.iterdir())
    assert names == ['depth_43.svg', 'depth_43_curves.csv', 'depth_48.svg', 'depth_48_curves.csv']
    with open(svg_dir / 'depth_48_curves.csv', newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['curveId', 't', 'x', 'y', 'tx', 'ty']
    assert len(rows) > 1
    assert (svg_dir / 'depth_43.svg').read_text().lstrip().startswith('<?xml')


# --------------------------------------------------------------------------------- render


def test_render_empty_report(tmp_path):
    empty = tmp_path / 'empty.json'
    empty.write_text('{}')
    svg_dir = tmp_path / 'svg'
    assert main.run_cli(['--out', str(tmp_path), 'render', str(empty), '--svg', str(svg_dir)]) == 0
    assert list(svg_dir.iterdir()) == []


def test_render_bad_path(tmp_path):
    missing = tmp_path / 'nothing.json'
    assert main.run_cli(['--out', str(tmp_path), '-s', 'render', str(missing)]) == 2
