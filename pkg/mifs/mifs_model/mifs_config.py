"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

The configuration of one scenario: the IFS, its orbit and homoclinic point, the flexible path,
the prepared parameters, the pipeline settings and the tolerances in force.
"""

import json
import tomllib
from logging import getLogger
from pathlib import Path
from sys import stderr as SE
from typing import Any

import numpy as np

from mifs.extensions.presolution.settings import PipelineSettings
from mifs.extensions.retarded.prepared import PreparedParams
from mifs.mifs_model.cocycles import FlexiblePath, path_from_dict
from mifs.mifs_model.markov_ifs import HomoclinicPoint, MarkovIfs, PeriodicOrbit
from mifs.mifs_model.mifs_mode import MifsMode
from mifs.version_information import SCHEMA_TAG

logger = getLogger(__name__)

DEFAULT_TOLERANCES = Path(__file__).parent / 'default_tolerances.toml'

# used when the TOML file cannot be read
BUILTIN_TOLERANCES: dict[str, float | int] = {
    'integrationSteps': 64,
    'roundTrip': 1e-9,
    'finiteDifferenceStep': 1e-5,
    'separationGap': 1e-3,
    'cyclicWordBound': 8,
    'flexibleSamples': 201,
    's5Tolerance': 1e-7,
    's5Samples': 512,
    'curveSamples': 4096,
    'graphDerivativeSamples': 10000,
    'etaGuard': 0.2,
    'fixedPointTolerance': 1e-12,
    'roundTripSamples': 1000,
    'homoclinicTolerance': 1e-8,
}


def load_tolerances(path: Path = DEFAULT_TOLERANCES) -> dict[str, float | int]:
    """the tolerance defaults, from the TOML file when it is readable"""
    try:
        with open(path, 'rb') as f:
            data = tomllib.load(f)
    except (FileNotFoundError, tomllib.TOMLDecodeError) as e:
        logger.warning('Could not read tolerances from %s (%s), using built-in defaults', path, e)
        return dict(BUILTIN_TOLERANCES)
    tolerances = dict(BUILTIN_TOLERANCES)
    for key, value in data.items():
        if key not in BUILTIN_TOLERANCES:
            logger.warning('Unknown tolerance %s in %s ignored', key, path)
            continue
        tolerances[key] = value
    return tolerances


def _is_point(p: Any) -> bool:
    match p:
        case [int() | float(), int() | float()]:
            return True
        case _:
            return False


class MifsConfig:
    """
    The overall configuration for a mifs scenario
    """

    def __init__(
        self,
        name: str,
        discs: list[dict],
        branches: list[dict],
        orbit_word: list[int],
        homoclinic: dict,
        output_path: Path,
        scenario_mode: MifsMode | str = MifsMode.RUN,
        flexible_path: dict | None = None,
        prepared_params: dict | None = None,
        pipeline: dict | None = None,
        tolerances: dict | None = None,
        scenario_file: Path | None = None,
        silent: bool = False,
    ):
        self.name = name
        match scenario_mode:
            case MifsMode():
                self.scenario_mode = scenario_mode
            case str():
                try:
                    self.scenario_mode = MifsMode[scenario_mode.upper()]
                except KeyError:
                    raise AttributeError(
                        f'The mode selection received by MifsConfig: '
                        f'{scenario_mode} is invalid.\nPossible choices are '
                        f'{list(MifsMode.__members__.keys())} (case '
                        f'insensitive).'
                    )
            case _:
                raise AttributeError(
                    f'The mode selection received by MifsConfig: '
                    f'{scenario_mode} is invalid.\nPossible choices are '
                    f'{list(MifsMode.__members__.keys())} (case '
                    f'insensitive).'
                )
        self.scenario_file = scenario_file
        self.output_path = output_path
        self.silent = silent

        # tolerances: defaults overlaid by the scenario
        self.tolerances = load_tolerances()
        for key, value in (tolerances or {}).items():
            if key not in self.tolerances:
                logger.error('Unknown tolerance in scenario: %s', key)
                raise ValueError(
                    f'Unknown tolerance {key}.  Known: {sorted(self.tolerances)}'
                )
            self.tolerances[key] = value
        self.tolerance_overrides = sorted(tolerances or {})

        # screen the index references before anything is built
        n_discs, n_branches = len(discs), len(branches)
        for j, b in enumerate(branches):
            if not (0 <= b['dom'] < n_discs and 0 <= b['target'] < n_discs):
                logger.error('Branch %d refers to a disc out of range', j)
                raise ValueError(f'branch {j} refers to a disc outside 0 .. {n_discs - 1}')
        for letter in list(orbit_word) + list(homoclinic['word']):
            if not 0 <= letter < n_branches:
                logger.error('Letter %d is not a branch index', letter)
                raise ValueError(f'letter {letter} is outside 0 .. {n_branches - 1}')

        self.ifs = MarkovIfs.from_dict({'discs': discs, 'branches': branches})
        self.orbit_word = tuple(orbit_word)
        self.homoclinic_point = np.asarray(homoclinic['point'], dtype=float)
        self.homoclinic_word = tuple(homoclinic['word'])

        self.flexible_data = flexible_path
        self.flexible_path: FlexiblePath | None = None
        if flexible_path is not None:
            self.flexible_path = path_from_dict(
                flexible_path, samples=int(self.tolerances['flexibleSamples'])
            )

        self.prepared_data = prepared_params
        self.prepared_params: PreparedParams | None = None
        if prepared_params is not None:
            self.prepared_params = PreparedParams.from_dict(prepared_params)

        self.settings = PipelineSettings.from_dict(pipeline)

        if self.scenario_mode == MifsMode.RUN:
            blocks = (('flexiblePath', self.flexible_path), ('preparedParams', self.prepared_params))
            for key, value in blocks:
                if value is None:
                    msg = f'Scenario has no {key} block; only validation is possible'
                    logger.warning(msg)
                    if not self.silent:
                        SE.write('Warning: ' + msg + '\n')

    # --------------------------------------------------------------- derived objects

    def periodic_orbit(self) -> PeriodicOrbit | None:
        """the periodic orbit of the orbit word, None when no fixed point is found"""
        return self.ifs.find_periodic(self.orbit_word)

    def homoclinic(self, orbit: PeriodicOrbit) -> HomoclinicPoint:
        return HomoclinicPoint(
            self.homoclinic_point, orbit, self.homoclinic_word, len(self.homoclinic_word)
        )

    def header(self) -> dict[str, Any]:
        """the tolerance ledger written at the top of every report"""
        return {
            'schema': SCHEMA_TAG,
            'scenario': self.name,
            'tolerances': dict(sorted(self.tolerances.items())),
            'toleranceOverrides': list(self.tolerance_overrides),
            'settings': self.settings.to_dict(),
        }

    # ------------------------------------------------------------------- building

    @staticmethod
    def validate_schema(data: dict):
        """
        Validate the decoded scenario against the expected structure
        :return: None
        """
        # dev note:  structural patterns give thin feedback, so each section is matched on its
        #            own and the failing one is named
        match data:
            case {'schema': str() as tag} if tag != SCHEMA_TAG:
                raise ValueError(f'Unsupported scenario schema {tag!r}, expected {SCHEMA_TAG!r}')
            case {'schema': str()}:
                pass
            case _:
                raise ValueError(f'Scenario has no "schema" field (expected {SCHEMA_TAG!r})')

        required = {
            'name': str,
            'discs': list,
            'branches': list,
            'orbitWord': list,
            'homoclinic': dict,
        }
        for section, kind in required.items():
            if not isinstance(data.get(section), kind):
                raise ValueError(
                    f'Scenario section {section!r} is missing or not a {kind.__name__}'
                )

        for i, disc in enumerate(data['discs']):
            match disc:
                case {'center': center, 'radius': int() | float() as r} if (
                    _is_point(center) and r > 0
                ):
                    pass
                case _:
                    raise ValueError(f'Scenario section "discs" entry {i} is malformed: {disc}')
        for j, branch in enumerate(data['branches']):
            match branch:
                case {'dom': int(), 'target': int(), 'map': list()}:
                    pass
                case _:
                    raise ValueError(f'Scenario section "branches" entry {j} is malformed')
        match data['orbitWord']:
            case [int(), *rest] if all(isinstance(x, int) for x in rest):
                pass
            case _:
                raise ValueError('Scenario section "orbitWord" must be a non-empty list of ints')
        match data['homoclinic']:
            case {'point': point, 'word': [int(), *rest]} if _is_point(point) and all(
                isinstance(x, int) for x in rest
            ):
                pass
            case _:
                raise ValueError('Scenario section "homoclinic" needs a point and a word')

        match data.get('flexiblePath'):
            case None:
                pass
            case {
                'canonical': {'n': int(), 'lambda1': int() | float(), 'epsilon': int() | float()}
            }:
                pass
            case {'t': list(), 'matrices': list(), 'epsilon': int() | float()}:
                pass
            case _:
                raise ValueError('Scenario section "flexiblePath" is malformed')

        for section in ('preparedParams', 'pipeline', 'tolerances'):
            match data.get(section):
                case None | dict():
                    pass
                case _:
                    raise ValueError(f'Scenario section {section!r} must be an object')

    @staticmethod
    def build_config(
        scenario_file: Path,
        output_path: Path,
        silent: bool = False,
        scenario_mode: MifsMode | str = MifsMode.RUN,
    ) -> 'MifsConfig':
        """
        build a MifsConfig from a scenario file
        :param scenario_file: the JSON scenario
        :param output_path: the folder for reports and the log
        :param silent: suppress console warnings
        :param scenario_mode: the mode the scenario is processed in
        :return: a MifsConfig instance
        """
        scenario_file = Path(scenario_file)
        if not scenario_file.is_file():
            logger.error('Scenario file %s does not exist', scenario_file)
            raise FileNotFoundError(f'Invalid scenario file: {scenario_file}')
        with open(scenario_file, encoding='utf-8') as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                logger.error('Scenario file %s is not valid JSON: %s', scenario_file, e)
                raise ValueError(f'Scenario file is not valid JSON: {e}') from e
        try:
            MifsConfig.validate_schema(data=data)
        except ValueError as e:
            logger.error('Scenario %s failed schema validation: %s', scenario_file, e)
            raise
        mc = MifsConfig(
            name=data['name'],
            discs=data['discs'],
            branches=data['branches'],
            orbit_word=data['orbitWord'],
            homoclinic=data['homoclinic'],
            output_path=output_path,
            scenario_mode=scenario_mode,
            flexible_path=data.get('flexiblePath'),
            prepared_params=data.get('preparedParams'),
            pipeline=data.get('pipeline'),
            tolerances=data.get('tolerances'),
            scenario_file=scenario_file,
            silent=silent,
        )
        logger.info('Scenario Name:  %s', mc.name)
        logger.info('Scenario file:  %s', mc.scenario_file)
        logger.info('Mode:  %s', mc.scenario_mode.name)
        logger.info('Discs: %d, branches: %d', len(mc.ifs.discs), len(mc.ifs.branches))
        return mc

    def __repr__(self):
        width = 25
        spacer = '\n' + '-' * width + '\n'
        msg = spacer

        msg += '{:>{}s}: {}\n'.format('Scenario', width, self.name)
        msg += '{:>{}s}: {}\n'.format('Scenario mode', width, self.scenario_mode.name)
        msg += '{:>{}s}: {}\n'.format('Scenario file', width, self.scenario_file)
        msg += '{:>{}s}: {}\n'.format('Path for outputs and log', width, self.output_path)

        msg += spacer
        msg += '{:>{}s}: {}\n'.format('Discs', width, len(self.ifs.discs))
        msg += '{:>{}s}: {}\n'.format('Branches', width, len(self.ifs.branches))
        msg += '{:>{}s}: {}\n'.format('Orbit word', width, list(self.orbit_word))
        msg += '{:>{}s}: {}\n'.format('Homoclinic word', width, list(self.homoclinic_word))
        msg += '{:>{}s}: {}\n'.format('Flexible path', width, self.flexible_path is not None)
        msg += '{:>{}s}: {}\n'.format('Prepared parameters', width, self.prepared_data is not None)

        msg += spacer
        s = self.settings
        msg += '{:>{}s}: {}\n'.format('Depths', width, list(s.depths))
        msg += '{:>{}s}: {}\n'.format('eps / eps0', width, f'{s.eps} / {s.eps0}')
        msg += '{:>{}s}: {}\n'.format('eta', width, s.eta)
        msg += '{:>{}s}: {}\n'.format('Seed', width, s.seed)

        msg += spacer
        for key, value in sorted(self.tolerances.items()):
            msg += '{:>{}s}: {}\n'.format(key, width, value)
        return msg
