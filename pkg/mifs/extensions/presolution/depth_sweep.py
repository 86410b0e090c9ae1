"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Independent depth builds of the weak curve pipeline, optionally in parallel.

Each depth is one call of evaluate_depth: pre-solution, invariant curves, normal strength and
dwell.  The worker function lives at module level so joblib can ship it to other processes, and
workers log through a queue that a listener in the parent drains into the root handlers.
"""

import logging
import multiprocessing
import sys
from dataclasses import dataclass, field
from logging.handlers import QueueHandler, QueueListener
from typing import Any

from joblib import Parallel, delayed

from mifs.extensions.presolution.invariant_curves import (
    DwellReport,
    InvariantCurveFamily,
    NormalStrengthReport,
    dwell_distribution,
    extract_invariant_curves,
    normal_strength,
)
from mifs.extensions.presolution.presolution import PreSolution, build_presolution
from mifs.extensions.presolution.settings import PipelineSettings
from mifs.extensions.retarded.prepared import PreparedParams, build_prepared
from mifs.mifs_model.exceptions import UnivalenceViolation
from mifs.mifs_model.markov_ifs import RoundDisc

logger = logging.getLogger(__name__)


@dataclass
class DepthResult:
    depth: int
    presolution: PreSolution = field(repr=False)
    curves: InvariantCurveFamily | None = field(default=None, repr=False)
    strength: NormalStrengthReport | None = None
    dwell: DwellReport | None = None
    errors: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            not self.errors
            and self.presolution.report.passed
            and self.presolution.report.admissible
            and self.curves is not None
            and self.curves.passed
        )

    def to_dict(self) -> dict[str, Any]:
        report = self.presolution.report
        out = {
            'depth': self.depth,
            'passed': self.passed,
            'K': self.presolution.cost,
            'member': self.presolution.member,
            'presolution': report.to_dict(),
            'c1Size': report.sizes.get('c1', 0.0),
            'c0Size': report.sizes.get('c0', 0.0),
            'errors': list(self.errors),
        }
        for name, (ok, value) in report.checks.items():
            out[name] = {'passed': ok, 'value': value}
        if self.curves is not None:
            out['curves'] = self.curves.to_dict()
        if self.strength is not None:
            out['normalStrength'] = self.strength.to_dict()
            out['impliedEta'] = self.strength.implied_eta
        if self.dwell is not None:
            out['dwell'] = self.dwell.to_dict()
            out['dwellMin'] = self.dwell.worst
        return out


def configure_worker_logger(log_queue, log_level):
    """route the records of a worker process through the queue"""
    worker_logger = logging.getLogger('mifs depth worker')
    if not worker_logger.hasHandlers():
        worker_logger.addHandler(QueueHandler(log_queue))
    root_logger = logging.root
    if not root_logger.hasHandlers():
        root_logger.addHandler(QueueHandler(log_queue))
    worker_logger.setLevel(log_level)
    root_logger.setLevel(logging.WARNING)
    return worker_logger


def evaluate_depth(
    params: dict[str, Any], depth: int, settings: PipelineSettings, log_queue=None, log_level=None
) -> DepthResult:
    """
    build and measure the pre-solution of one depth; the prepared family is rebuilt from its
    parameters so the call is self-contained
    """
    log = configure_worker_logger(log_queue, log_level) if log_queue is not None else logger
    log.info('starting depth %d', depth)
    family = build_prepared(PreparedParams.from_dict(params))
    pre = build_presolution(
        family, depth, eta=settings.eta, n0=settings.n0, per_domain=settings.per_domain
    )
    result = DepthResult(depth, pre)
    if not pre.report.passed:
        result.errors.append(f'pre-solution fails {pre.report.failed}')
        return result
    try:
        result.curves = extract_invariant_curves(pre.ifs, pre.wells, depth, pre.curve)
    except UnivalenceViolation as e:
        result.errors.append(str(e))
        return result
    result.strength = normal_strength(result.curves, depth)
    # returns inside a window no longer than the depth land at least L deep
    if depth >= settings.dwell_length:
        orbit = pre.ifs.find_periodic(pre.wells.orbit.word)
        region = RoundDisc(orbit.point, settings.dwell_radius)
        result.dwell = dwell_distribution(
            result.curves,
            orbit,
            settings.dwell_length,
            region,
            samples=settings.dwell_samples,
            seed=settings.seed,
        )
    log.info('depth %d finished: %s', depth, 'PASS' if result.passed else 'FAIL')
    return result


def sweep_depths(
    params: PreparedParams, settings: PipelineSettings, jobs: int = 1, silent: bool = True
) -> list[DepthResult]:
    """evaluate every depth of the settings, in order of depth"""
    depths = sorted(settings.depths)
    data = params.to_dict()
    if jobs == 1 or len(depths) == 1:
        return [evaluate_depth(data, d, settings) for d in depths]

    m = multiprocessing.Manager()
    log_queue = m.Queue()
    log_listener = QueueListener(log_queue, *logging.root.handlers)
    log_level = logger.getEffectiveLevel()
    log_listener.start()
    if not silent:
        msg = f'Starting {len(depths)} depth builds on {jobs} cores.\n'
        sys.stdout.write(msg)
        sys.stdout.write('=' * (len(msg) - 1) + '\n')
        sys.stdout.flush()
    try:
        results = Parallel(n_jobs=jobs)(
            delayed(evaluate_depth)(data, d, settings, log_queue, log_level) for d in depths
        )
    finally:
        log_listener.stop()
    return list(results)
