"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Normal scalings around an invariant curve family and the repeller / attractor construction.

A normal scaling in a refined disc is the time-1 map of a field that vanishes on the family arc
and, away from the end caps, is the linear field log(1 + kappa) d n in the normal coordinate d.
It is composed after every branch whose image holds the disc, so the arc stays invariant and its
normal derivative is multiplied by 1 + kappa.

The two-stage construction first scales by 1 + 2 eta, which makes a weak family normally
repelling and leaves a thin tube R around it relatively repelling, then by 1 - 3 eta inside R so
the family becomes normally attracting and a thinner tube A is an attracting region for the
restricted IFS.
"""

from dataclasses import dataclass, field, replace
from logging import getLogger
from typing import Any, Sequence

import numpy as np

from mifs.extensions.presolution.invariant_curves import InvariantCurveFamily, dwell_intervals
from mifs.extensions.regions.regions import (
    AttractingReport,
    ContractionReport,
    PieceRegion,
    Region,
    RegionReport,
    TubePiece,
    check_attracting,
    check_relatively_repelling,
    family_disc,
    lift_from_refinement,
    region_from_curves,
    uniform_contraction,
)
from mifs.mifs_model.curves import CurveSample, nearest_segment_distances
from mifs.mifs_model.exceptions import (
    ConstraintViolation,
    InfeasibleEpsilon,
    NumericFailure,
    SupportCollision,
)
from mifs.mifs_model.markov_ifs import MarkovIfs, PeriodicOrbit, Word
from mifs.mifs_model.planar_maps import MapChain, NormalScalingFlow

logger = getLogger(__name__)

CURVE_FIXED_TOLERANCE = 1e-10
NORMAL_DERIVATIVE_TOLERANCE = 1e-6
IDENTITY_TOLERANCE = 1e-12
C1_SLACK = 1.05
# end caps and trims in units of the support width
END_CAP_WIDTHS = 4.0
TRIM_WIDTHS = 2.0
MAX_ETA = 0.2
STAGE_BUDGET = 6.0
MAX_K1 = 6
REGION_GRID = 12
END_OUTLINE = 16


@dataclass
class ScalingReport:
    kappa: float
    support_width: float
    flows: int = 0
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    @property
    def failed(self) -> list[str]:
        return [name for name, (ok, _) in self.checks.items() if not ok]

    @property
    def c1(self) -> float:
        return self.checks.get('c1WithinKappa', (True, 0.0))[1]

    def to_dict(self) -> dict[str, Any]:
        return {
            'kappa': self.kappa,
            'supportWidth': self.support_width,
            'flows': self.flows,
            'passed': self.passed,
            'checks': {k: {'passed': ok, 'value': v} for k, (ok, v) in self.checks.items()},
        }


@dataclass(frozen=True, eq=False)
class NormalScaling:
    ifs: MarkovIfs = field(repr=False)
    kappa: float
    flows: dict[Word, tuple[NormalScalingFlow, ...]] = field(repr=False)
    report: ScalingReport


# ---------------------------------------------------------------------------- geometry


def curve_arcs(
    curve: CurveSample,
    trim: float,
    protect: np.ndarray | None = None,
    protect_radius: float = 0.0,
) -> list[CurveSample]:
    """the curve less trim of arc length at each end, split around protected points"""
    s = curve.arc_length()
    if len(s) < 2:
        return []
    keep = (s >= trim) & (s <= s[-1] - trim)
    if protect is not None and len(protect):
        for p in np.asarray(protect, dtype=float).reshape(-1, 2):
            keep &= np.linalg.norm(curve.points - p, axis=1) > protect_radius
    arcs = []
    for k, (a, b) in enumerate(dwell_intervals(keep)):
        if b > a:
            idx = np.arange(a, b + 1)
            arcs.append(
                CurveSample(curve.points[idx], curve.tangents[idx], f'{curve.curve_id}.{k}')
            )
    return arcs


def tube_outline(curve: CurveSample, width: float) -> np.ndarray:
    """both offsets of the curve and circles around its ends"""
    normal = np.stack([-curve.tangents[:, 1], curve.tangents[:, 0]], axis=1)
    ang = np.linspace(0.0, 2 * np.pi, END_OUTLINE, endpoint=False)
    circle = width * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return np.concatenate(
        [
            curve.points + width * normal,
            curve.points - width * normal,
            curve.points[0] + circle,
            curve.points[-1] + circle,
        ]
    )


def sample_pitch(family: InvariantCurveFamily) -> float:
    """the median spacing of the family samples"""
    steps = [np.diff(c.arc_length()) for c in family.curves.values() if len(c) > 1]
    if not steps:
        raise ValueError('the curve family has no arc with two samples')
    return float(np.median(np.concatenate(steps)))


def _distance_to_identity(chain: MapChain, pts: np.ndarray) -> tuple[float, float]:
    """sampled (C0, derivative) distance of chain to the identity"""
    if len(pts) == 0:
        return 0.0, 0.0
    c0 = float(np.max(np.linalg.norm(chain.apply(pts) - pts, axis=1)))
    dj = chain.jacobian(pts) - np.eye(2)
    return c0, float(np.max(np.linalg.norm(dj, ord=2, axis=(1, 2))))


# ----------------------------------------------------------------------------- scaling


def build_normal_scalings(
    ifs: MarkovIfs,
    family: InvariantCurveFamily,
    kappa: float,
    support_width: float,
    end_cap: float | None = None,
    protect: Sequence[np.ndarray] = (),
    protect_radius: float | None = None,
    grid: int = REGION_GRID,
) -> NormalScaling:
    """
    compose a normal scaling by 1 + kappa around every family arc onto the branches that map
    into its disc
    :param protect: points whose protect_radius neighbourhood the scalings leave untouched
    :raises SupportCollision: a scaling tube leaves the interior of its disc
    """
    if kappa <= -1:
        raise ValueError(f'kappa must exceed -1, got {kappa}')
    if support_width <= 0:
        raise ValueError('support width must be positive')
    report = ScalingReport(kappa, support_width)
    if kappa == 0:
        return NormalScaling(ifs, 0.0, {}, report)
    end_cap = end_cap if end_cap is not None else END_CAP_WIDTHS * support_width
    radius = protect_radius if protect_radius is not None else support_width
    protect = np.asarray(protect, dtype=float).reshape(-1, 2)

    flows: dict[Word, tuple[NormalScalingFlow, ...]] = {}
    per_branch: dict[int, list[NormalScalingFlow]] = {}
    for word, curve in family.curves.items():
        arcs = curve_arcs(curve, TRIM_WIDTHS * support_width, protect, radius)
        if not arcs:
            logger.warning('arc %s is too short for a scaling of width %.4g', word, support_width)
            continue
        disc = family_disc(ifs, word, curve)
        for arc in arcs:
            if not np.all(disc.contains(tube_outline(arc, support_width))):
                logger.error(
                    'scaling tube of width %.4g around %s leaves its disc', support_width, word
                )
                raise SupportCollision(
                    f'scaling tube of width {support_width:.4g} around {word} leaves its disc'
                )
        made = tuple(NormalScalingFlow(arc, kappa, support_width, end_cap) for arc in arcs)
        flows[word] = made
        if word:
            letters = [word[-1]]
        else:
            target = ifs.disc_index_of(curve.points[len(curve) // 2])
            letters = [j for j, b in enumerate(ifs.branches) if b.target == target]
        for j in letters:
            per_branch.setdefault(j, []).extend(made)

    branches = tuple(
        replace(b, map=b.map.then(MapChain(tuple(per_branch[j])))) if j in per_branch else b
        for j, b in enumerate(ifs.branches)
    )
    scaled = MarkovIfs(ifs.discs, branches)
    report.flows = sum(len(f) for f in flows.values())

    fixed, normal_err, c0, c1 = 0.0, 0.0, 0.0, 0.0
    for word, made in flows.items():
        chain = MapChain(made)
        pts = family.curves[word].points
        fixed = max(fixed, float(np.max(np.linalg.norm(chain.apply(pts) - pts, axis=1))))
        for flow in made:
            arc = flow.curve
            s = arc.arc_length()
            full = (s >= end_cap) & (s <= s[-1] - end_cap)
            if full.any():
                n = np.stack([-arc.tangents[full, 1], arc.tangents[full, 0]], axis=1)
                jac = flow.jacobian(arc.points[full])
                got = np.einsum('ni,nij,nj->n', n, jac, n)
                normal_err = max(normal_err, float(np.max(np.abs(got - (1 + kappa)))))
            a, b = _distance_to_identity(chain, TubePiece(arc, support_width).sample(grid))
            c0, c1 = max(c0, a), max(c1, b)
    report.checks['curveFixed'] = (fixed < CURVE_FIXED_TOLERANCE, fixed)
    report.checks['normalDerivative'] = (normal_err < NORMAL_DERIVATIVE_TOLERANCE, normal_err)
    report.checks['c1WithinKappa'] = (c1 <= C1_SLACK * abs(kappa), c1)
    report.checks['c0WithinWidth'] = (c0 <= support_width, c0)
    logger.info(
        'normal scaling by %.4g with %d flows of width %.4g: %s',
        1 + kappa,
        report.flows,
        support_width,
        'PASS' if report.passed else f'FAIL ({", ".join(report.failed)})',
    )
    return NormalScaling(scaled, kappa, flows, report)


# --------------------------------------------------------------------- repeller / attractor


@dataclass
class RepellerAttractor:
    ifs: MarkovIfs = field(repr=False)
    eta: float
    widths: dict[str, float]
    repelling: Region | None = field(default=None, repr=False)
    attracting: PieceRegion | None = field(default=None, repr=False)
    stages: list[ScalingReport] = field(default_factory=list)
    repelling_report: RegionReport | None = None
    attracting_report: AttractingReport | None = None
    contraction: ContractionReport | None = None
    # the construction rebuilt to be the identity near the protected orbits
    protected_ifs: MarkovIfs | None = field(default=None, repr=False)
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values()) and not self.errors

    @property
    def failed(self) -> list[str]:
        return [name for name, (ok, _) in self.checks.items() if not ok] + list(self.errors)

    def to_dict(self) -> dict[str, Any]:
        out = {
            'eta': self.eta,
            'passed': self.passed,
            'widths': dict(self.widths),
            'stages': [s.to_dict() for s in self.stages],
            'checks': {k: {'passed': ok, 'value': v} for k, (ok, v) in self.checks.items()},
            'errors': dict(self.errors),
        }
        if self.repelling_report is not None:
            out['repelling'] = self.repelling_report.to_dict()
        if self.attracting_report is not None:
            out['attracting'] = self.attracting_report.to_dict()
        if self.contraction is not None:
            out['contraction'] = self.contraction.to_dict()
        return out


def orbits_near_family(
    ifs: MarkovIfs, family: InvariantCurveFamily, radius: float, max_length: int = 1
) -> list[PeriodicOrbit]:
    """periodic orbits of the base IFS with a point within radius of the family"""
    near = []
    for orbit in ifs.find_all_periodic(max_length):
        gap = min(
            float(nearest_segment_distances(orbit.point, c.points)[0])
            for c in family.curves.values()
        )
        if gap < radius:
            near.append(orbit)
    return near


def _two_stages(
    ifs: MarkovIfs,
    family: InvariantCurveFamily,
    eta: float,
    widths: dict[str, float],
    protect: np.ndarray | None = None,
    grid: int = REGION_GRID,
) -> tuple[NormalScaling, NormalScaling]:
    guard = protect if protect is not None else ()
    stage1 = build_normal_scalings(ifs, family, 2 * eta, widths['stage1'], protect=guard, grid=grid)
    stage2 = build_normal_scalings(
        stage1.ifs,
        family,
        -3 * eta,
        widths['stage2'],
        protect=guard,
        grid=grid,
    )
    return stage1, stage2


def identity_near_orbits(
    original: MarkovIfs, protected: MarkovIfs, orbits: Sequence[PeriodicOrbit], radius: float
) -> dict[str, tuple[bool, float]]:
    """the orbits and their first-return Jacobians survive the protected construction"""
    moved_by, certified = 0.0, True
    for orbit in orbits:
        moved = protected.find_periodic(orbit.word)
        if moved is None:
            return {'identityNearQ': (False, np.inf), 'largeStable': (False, np.inf)}
        before = original.word_chain(orbit.word).jacobian(orbit.point)
        after = protected.word_chain(orbit.word).jacobian(moved.point)
        moved_by = max(
            moved_by,
            float(np.linalg.norm(moved.point - orbit.point)),
            float(np.max(np.abs(after - before))),
        )
        cert = protected.large_stable_certificate(
            moved, grid=REGION_GRID, iterations=100, shrink_radius=radius / 2
        )
        certified &= cert.passed
    return {
        'identityNearQ': (moved_by < IDENTITY_TOLERANCE, moved_by),
        'largeStable': (certified, float(len(orbits))),
    }


def build_repeller_attractor(
    ifs: MarkovIfs,
    family: InvariantCurveFamily,
    eta: float,
    tube_width: float | None = None,
    protect: Sequence[np.ndarray] | None = None,
    max_k1: int = MAX_K1,
    grid: int = REGION_GRID,
) -> RepellerAttractor:
    """
    the two-stage scaling of a weak family with its relatively repelling tube R, attracting tube
    A and the contraction of the IFS restricted to A; failures are collected in the result
    :param tube_width: half width of R, three sample pitches by default
    :param protect: points kept fixed by the protected rebuild, by default the fixed points
        of the base IFS near the family
    :raises InfeasibleEpsilon: eta is not in (0, 0.2]
    """
    if not 0 < eta <= MAX_ETA:
        logger.error('repeller / attractor needs 0 < eta <= %.2g, got %.4g', MAX_ETA, eta)
        raise InfeasibleEpsilon(f'eta must lie in (0, {MAX_ETA}], got {eta}')
    w_r = tube_width if tube_width is not None else 3 * sample_pitch(family)
    widths = {'repelling': w_r, 'stage1': 4 * w_r, 'stage2': w_r, 'attracting': w_r / 4}
    result = RepellerAttractor(ifs, eta, widths)
    level = family.level

    try:
        stage1, stage2 = _two_stages(ifs, family, eta, widths, grid=grid)
    except SupportCollision as e:
        result.errors['scaling'] = str(e)
        logger.error('repeller / attractor construction stopped: %s', e)
        return result
    result.ifs = stage2.ifs
    result.stages = [stage1.report, stage2.report]
    for k, stage in enumerate(result.stages, start=1):
        result.checks[f'stage{k}'] = (stage.passed, float(len(stage.failed)))
        result.checks[f'budgetStage{k}'] = (stage.c1 <= STAGE_BUDGET * eta, stage.c1)

    refined_r = region_from_curves(family.curves, widths['repelling'])
    result.repelling_report = check_relatively_repelling(result.ifs, refined_r, grid, level)
    result.checks['repelling'] = (
        result.repelling_report.passed,
        result.repelling_report.margin,
    )
    result.repelling = refined_r
    if result.repelling_report.passed:
        try:
            result.repelling = lift_from_refinement(result.ifs, refined_r, level, grid)
        except (ConstraintViolation, NumericFailure) as e:
            result.errors['lift'] = str(e)

    result.attracting = region_from_curves(family.curves, widths['attracting'])
    result.attracting_report = check_attracting(
        result.ifs, result.attracting, refined_r, grid, level
    )
    result.checks['attracting'] = (
        result.attracting_report.passed,
        float(len(result.attracting_report.failed)),
    )
    result.contraction = uniform_contraction(
        result.ifs, result.attracting, result.attracting_report.edges, max_k1, grid
    )
    result.checks['contraction'] = (
        result.contraction.passed,
        float(result.contraction.k1 if result.contraction.passed else np.inf),
    )

    if protect is None:
        orbits = orbits_near_family(ifs, family, w_r)
        points = np.array([o.point for o in orbits]).reshape(-1, 2)
    else:
        orbits = []
        points = np.asarray(protect, dtype=float).reshape(-1, 2)
    if len(points):
        try:
            _, protected = _two_stages(ifs, family, eta, widths, points, grid)
        except SupportCollision as e:
            result.errors['protected'] = str(e)
        else:
            result.protected_ifs = protected.ifs
            if orbits:
                result.checks.update(
                    identity_near_orbits(ifs, protected.ifs, orbits, widths['stage2'])
                )
    logger.info(
        'repeller / attractor for eta %.4g: %s',
        eta,
        'PASS' if result.passed else f'FAIL ({", ".join(result.failed)})',
    )
    return result
