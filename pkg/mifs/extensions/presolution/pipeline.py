"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

The weak curve pipeline from a scenario IFS to weak invariant curves.

Stages, each recorded as a check of the report:

    flexible      the flexible path of q is valid
    saddleNode    the scenario IFS carries a saddle-node member within eps / eps0 whose derivative
                  cocycle at q is the path at t = 1
    prepared      the prepared family synthesised from preparedParams satisfies P0 - P3
    presolution   every depth builds a pre-solution that passes S1 - S5 and is admissible
    curves        every depth yields a univalent invariant family
    size          the largest sampled C1 (C0) change stays below eps (eps0)
    weakness      implied eta decreases with depth and ends below eta
    dwell         every conclusive dwell distribution meets its bound
"""

from dataclasses import dataclass, field
from logging import getLogger
from typing import Any

import numpy as np

from mifs.extensions.presolution.depth_sweep import DepthResult, sweep_depths
from mifs.extensions.presolution.settings import PipelineSettings
from mifs.extensions.retarded.prepared import PreparedParams, build_prepared
from mifs.extensions.retarded.retarded import SaddleNodeMemberReport, build_saddle_node_family
from mifs.mifs_model.cocycles import FlexiblePath, derivative_cocycle, validate_flexible
from mifs.mifs_model.exceptions import ConstraintViolation, ScenarioError
from mifs.mifs_model.markov_ifs import HomoclinicPoint, MarkovIfs, PeriodicOrbit

logger = getLogger(__name__)

EIGEN_MATCH = 1e-8


@dataclass
class PipelineReport:
    settings: PipelineSettings
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)
    saddle_node: SaddleNodeMemberReport | None = None
    depths: list[DepthResult] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(ok for ok, _ in self.checks.values()) and not self.errors

    @property
    def failed(self) -> list[str]:
        return [name for name, (ok, _) in self.checks.items() if not ok] + list(self.errors)

    @property
    def first_failure(self) -> str | None:
        failed = self.failed
        return failed[0] if failed else None

    def implied_etas(self) -> list[float]:
        return [r.strength.implied_eta if r.strength else np.nan for r in self.depths]

    def to_dict(self) -> dict[str, Any]:
        return {
            'passed': self.passed,
            'settings': self.settings.to_dict(),
            'checks': {k: {'passed': ok, 'value': v} for k, (ok, v) in self.checks.items()},
            'saddleNode': self.saddle_node.to_dict() if self.saddle_node else None,
            'depths': [r.to_dict() for r in self.depths],
            'errors': dict(self.errors),
        }


def certify_saddle_node(
    ifs: MarkovIfs,
    orbit: PeriodicOrbit,
    homoclinic: HomoclinicPoint,
    path: FlexiblePath,
    settings: PipelineSettings,
) -> tuple[SaddleNodeMemberReport, float]:
    """
    the saddle-node member of the scenario IFS and the mismatch between the eigenvalues of its
    derivative cocycle at q and those of the path at t = 1
    """
    family = build_saddle_node_family(
        ifs, orbit, path, (settings.member,), settings.support_radius
    )
    report = family.certify(settings.member, homoclinic, grid=settings.grid)
    member = family.member(settings.member)
    moved = member.find_periodic(orbit.word)
    got = np.sort(np.abs(np.linalg.eigvals(derivative_cocycle(member, moved).product())))
    want = np.sort(np.abs(np.linalg.eigvals(path.at(1.0).product())))
    return report, float(np.max(np.abs(got - want)))


def weakness_check(etas: list[float], eta: float) -> tuple[bool, float]:
    """implied eta strictly decreasing over the depths and below eta at the deepest"""
    decreasing = all(b < a for a, b in zip(etas, etas[1:]))
    last = float(etas[-1]) if len(etas) else np.nan
    return bool(decreasing and last < eta), last


def build_weak_curves_end_to_end(
    ifs: MarkovIfs,
    orbit: PeriodicOrbit,
    homoclinic: HomoclinicPoint,
    path: FlexiblePath,
    params: PreparedParams | None,
    settings: PipelineSettings | None = None,
    jobs: int = 1,
    silent: bool = True,
) -> PipelineReport:
    """
    run every stage; a failing stage is recorded and the stages after it are skipped
    :param params: the prepared family of the scenario, built at every depth
    :raises ScenarioError: no prepared family is given
    """
    if params is None:
        logger.error("the weak curve pipeline needs the scenario's prepared parameters")
        raise ScenarioError('the scenario declares no preparedParams block')
    settings = settings or PipelineSettings()
    report = PipelineReport(settings)

    flex = validate_flexible(path)
    misses = sum(1 for ok, _ in flex.checks.values() if not ok)
    report.checks['flexible'] = (flex.passed, float(misses))
    if not flex.passed:
        return _stop(report, 'flexible')

    try:
        sn, mismatch = certify_saddle_node(ifs, orbit, homoclinic, path, settings)
    except ValueError as e:
        report.errors['saddleNode'] = str(e)
        return _stop(report, 'saddleNode')
    report.saddle_node = sn
    report.checks['saddleNode'] = (sn.passed, sn.first_return_defect)
    report.checks['cocycleAtOne'] = (mismatch < EIGEN_MATCH, mismatch)

    try:
        build_prepared(params)
    except ConstraintViolation as e:
        report.errors['prepared'] = str(e)
        return _stop(report, 'prepared')
    report.checks['prepared'] = (True, 0.0)

    report.depths = sweep_depths(params, settings, jobs=jobs, silent=silent)
    bad = [
        r.depth
        for r in report.depths
        if not (r.presolution.report.passed and r.presolution.report.admissible)
    ]
    report.checks['presolution'] = (not bad, float(len(bad)))
    bad = [r.depth for r in report.depths if r.curves is None or not r.curves.passed]
    report.checks['curves'] = (not bad, float(len(bad)))

    c1 = max([sn.c1] + [r.presolution.report.sizes.get('c1', 0.0) for r in report.depths])
    c0 = max([sn.c0] + [r.presolution.report.sizes.get('c0', 0.0) for r in report.depths])
    report.checks['c1WithinEps'] = (c1 <= settings.eps, c1)
    report.checks['c0WithinEps0'] = (c0 <= settings.eps0, c0)

    report.checks['weakness'] = weakness_check(report.implied_etas(), settings.eta)

    dwell = [r.dwell for r in report.depths if r.dwell is not None and r.dwell.conclusive]
    worst = min((d.worst for d in dwell), default=0)
    report.checks['dwell'] = (bool(dwell) and all(d.passed for d in dwell), float(worst))

    for r in report.depths:
        for msg in r.errors:
            logger.warning('depth %d: %s', r.depth, msg)
    logger.info(
        'weak curve pipeline over depths %s: %s',
        list(settings.depths),
        'PASS' if report.passed else f'FAIL ({", ".join(report.failed)})',
    )
    return report


def _stop(report: PipelineReport, stage: str) -> PipelineReport:
    logger.error('weak curve pipeline stopped at stage %s', stage)
    return report
