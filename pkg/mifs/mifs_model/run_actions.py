"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

A collection of actions the sequencer strings together: pre-run checks, scenario validation, the
weak curve run and report assembly.
"""

from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from sys import version_info
from time import time
from typing import Any

import numpy as np
from tabulate import tabulate

from mifs.extensions.presolution.pipeline import PipelineReport, build_weak_curves_end_to_end
from mifs.extensions.regions.scalings import RepellerAttractor, build_repeller_attractor
from mifs.mifs_model.exceptions import ScenarioError
from mifs.mifs_model.markov_ifs import MarkovIfs, RoundDisc
from mifs.mifs_model.mifs_config import MifsConfig
from mifs.mifs_model.mifs_mode import MifsMode
from mifs.mifs_model.report_writer import depth_geometry

logger = getLogger(__name__)


@dataclass
class RunReport:
    mode: MifsMode
    header: dict[str, Any] = field(default_factory=dict)
    # stage name -> serialised stage result, each with a 'passed' flag
    stages: dict[str, dict[str, Any]] = field(default_factory=dict)
    failed_stage: str | None = None
    depths: list[dict[str, Any]] = field(default_factory=list)
    artifacts: list[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failed_stage is None

    def record(self, stage: str, result: dict[str, Any]) -> bool:
        """store a stage; the first failing stage is remembered"""
        self.stages[stage] = result
        ok = bool(result.get('passed'))
        if not ok and self.failed_stage is None:
            self.failed_stage = stage
        return ok

    def to_dict(self) -> dict[str, Any]:
        return {
            'header': self.header,
            'mode': self.mode.name.lower(),
            'passed': self.passed,
            'failedStage': self.failed_stage,
            'stages': self.stages,
            'depths': self.depths,
        }


def check_python_version(min_major, min_minor) -> bool:
    if tuple(version_info[:2]) < (min_major, min_minor):
        logger.error(
            'mifs is being run with python %d.%d.  Expecting version %d.%d or later.  ',
            version_info.major,
            version_info.minor,
            min_major,
            min_minor,
        )
        return False
    return True


def _disc_samples(disc: RoundDisc, count: int, rng: np.random.Generator) -> np.ndarray:
    """count points uniformly distributed in the open disc"""
    r = disc.radius * np.sqrt(rng.uniform(0.0, 1.0, count)) * (1 - 1e-9)
    a = rng.uniform(0.0, 2 * np.pi, count)
    return disc.center + np.column_stack((r * np.cos(a), r * np.sin(a)))


def round_trip_residuals(ifs: MarkovIfs, count: int, seed: int) -> list[float]:
    """largest |f^-1(f(p)) - p| per branch over count random points of its domain"""
    rng = np.random.default_rng(seed)
    residuals = []
    for branch in ifs.branches:
        pts = _disc_samples(ifs.discs[branch.dom], count, rng)
        back = branch.map.apply_inverse(branch.map.apply(pts))
        residuals.append(float(np.max(np.linalg.norm(back - pts, axis=1))))
    return residuals


def validate_scenario(config: MifsConfig, report: RunReport) -> bool:
    """IFS soundness, the periodic orbit and the homoclinic certificate"""
    tol = config.tolerances
    ifs = config.ifs

    validation = ifs.validate(gap=tol['separationGap'])
    residuals = round_trip_residuals(ifs, int(tol['roundTripSamples']), config.settings.seed)
    worst = max(residuals, default=0.0)
    ok = report.record(
        'ifs',
        {
            'passed': validation.valid and worst < tol['roundTrip'],
            'failures': list(validation.failures),
            'containment': [{'branch': j, 'margin': m} for j, m in validation.containment],
            'separations': [
                {'branches': [j, k], 'gap': g} for j, k, g in validation.separations
            ],
            'roundTrip': {'max': worst, 'perBranch': residuals, 'tolerance': tol['roundTrip']},
            'samples': int(tol['roundTripSamples']),
        },
    )
    if not ok:
        return False

    orbit = config.periodic_orbit()
    if orbit is None:
        logger.error('No periodic point found for the orbit word %s', list(config.orbit_word))
        report.record('orbit', {'passed': False, 'word': list(config.orbit_word)})
        return False
    report.record('orbit', {'passed': True, **orbit.to_dict()})

    hp = config.homoclinic(orbit)
    homoclinic = ifs.verify_homoclinic(hp, tolerance=tol['homoclinicTolerance'])
    return report.record(
        'homoclinic',
        {
            'passed': homoclinic.passed,
            'tolerance': tol['homoclinicTolerance'],
            'checks': {k: {'passed': ok, 'value': v} for k, (ok, v) in homoclinic.checks.items()},
        },
    )


def _repeller_stage(pipeline: PipelineReport, eta: float) -> RepellerAttractor | None:
    deepest = pipeline.depths[-1] if pipeline.depths else None
    if deepest is None or deepest.curves is None:
        return None
    return build_repeller_attractor(deepest.presolution.ifs, deepest.curves, eta)


def run_scenario(config: MifsConfig, report: RunReport, jobs: int = 1) -> PipelineReport | None:
    """
    the full pipeline after validation; stages land in the report
    :raises ScenarioError: the scenario lacks the flexiblePath or preparedParams block
    """
    if not validate_scenario(config, report):
        return None
    if config.flexible_path is None:
        logger.error('Scenario %s has no flexiblePath; cannot run the pipeline', config.name)
        raise ScenarioError('the scenario needs a flexiblePath block to run')
    if config.prepared_params is None:
        logger.error('Scenario %s has no preparedParams; cannot run the pipeline', config.name)
        raise ScenarioError('the scenario needs a preparedParams block to run')

    orbit = config.periodic_orbit()
    hp = config.homoclinic(orbit)
    settings = config.settings
    start = time()
    pipeline = build_weak_curves_end_to_end(
        config.ifs,
        orbit,
        hp,
        config.flexible_path,
        config.prepared_params,
        settings,
        jobs=jobs,
        silent=config.silent,
    )
    logger.info('Pipeline finished in %0.2f seconds', time() - start)
    pipeline_dict = pipeline.to_dict()
    depths = pipeline_dict.pop('depths')
    pipeline_dict['passed'] = pipeline.passed
    pipeline_dict['firstFailure'] = pipeline.first_failure
    report.record('pipeline', pipeline_dict)

    regions = None
    if settings.repeller_eta is not None and pipeline.passed:
        start = time()
        try:
            regions = _repeller_stage(pipeline, settings.repeller_eta)
        except ValueError as e:
            logger.error('Repeller / attractor synthesis failed: %s', e)
            report.record('repellerAttractor', {'passed': False, 'errors': {'build': str(e)}})
        else:
            if regions is not None:
                report.record('repellerAttractor', regions.to_dict())
        logger.info('Repeller / attractor stage took %0.2f seconds', time() - start)

    for result, block in zip(pipeline.depths, depths):
        with_regions = regions if result is pipeline.depths[-1] else None
        block['geometry'] = depth_geometry(result, with_regions)
        report.depths.append(block)
    return pipeline


def summary_table(report: RunReport) -> str:
    """console summary of the stages and depths"""
    rows = [
        (name, 'PASS' if stage.get('passed') else 'FAIL') for name, stage in report.stages.items()
    ]
    text = tabulate(rows, headers=('stage', 'result'))
    if report.depths:
        depth_rows = [
            (d['depth'], d['K'], d.get('impliedEta', ''), 'PASS' if d['passed'] else 'FAIL')
            for d in report.depths
        ]
        text += '\n\n' + tabulate(depth_rows, headers=('depth', 'K', 'implied eta', 'result'))
    return text
