"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Pre-solutions of a prescribed depth and their certification.

The eta-small factors phi_1 .. phi_c that take gamma_1,m onto gamma_0 inside Xi_1 are conjugated
into the homothetic annuli, psi = prod_i H^i phi_i H^-i, and psi is composed in front of the
periodic branch of member n0 of a prepared family.  With n0 > c + 1 the periodic branch is a
homothety on every annulus the ladder touches, so for x in Xi_1 and k > c

    G^k(x) = F^k(phi_c o ... o phi_1(x))

and the strong stable curve of G crosses Xi_1 along gamma_1,m.  check_presolution tests the five
pre-solution conditions on a sampled global strong stable curve:

    s1  q stays a hyperbolic periodic point with a dominated splitting and Q stays homoclinic
    s2  W^ss(q) misses the obstructions Delta_0 .. Delta_pi-1
    s3  W^ss(q) meets every Xi_i in one arc and misses Theta_i
    s4  W^ss(q) meets every T_i (i < depth) in one arc and misses S_i
    s5  W^ss(q) inside T_depth is the pushed-forward strong stable manifold
"""

from dataclasses import dataclass, field
from logging import getLogger
from typing import Any

import numpy as np

from mifs.extensions.fragmentation.fragmentation import (
    FRAGMENT_STEPS,
    CostCertificate,
    select_resolution,
)
from mifs.extensions.fragmentation.zigzag import (
    GAMMA_BOUNDS,
    GammaCurve,
    build_gamma_family,
    gamma_cost,
    xi_chart,
)
from mifs.extensions.presolution.strong_stable import (
    DEFAULT_PER_DOMAIN,
    StrongStableCurve,
    global_strong_stable,
)
from mifs.extensions.retarded.prepared import PERIODIC_LETTER, PreparedFamily
from mifs.extensions.wells.wells import WellSystem, compute_well_system, periodic_letters
from mifs.mifs_model.curves import count_runs, nearest_segment_distances
from mifs.mifs_model.exceptions import CostExceedsHomothety, NoGap, NumericFailure
from mifs.mifs_model.markov_ifs import Branch, HomoclinicPoint, MarkovIfs, RoundDisc
from mifs.mifs_model.planar_maps import BumpFlow, MapChain, c1_distance, identity_chain
from mifs.mifs_model.vector_fields import LadderField

logger = getLogger(__name__)

DEFAULT_ETA = 0.05
EPS2 = 0.05
S5_TOLERANCE = 1e-7
S5_SAMPLES = 512
PUSHED_SAMPLES = 2048
TELESCOPE_TOLERANCE = 1e-9
TELESCOPE_GRID = 16
# the ladder is checked to leave this share of lam^(c+1) around q untouched
IDENTITY_SHARE = 0.9
WELL_DEPTH = 4
C1_GRID = 10


@dataclass
class PreSolutionReport:
    depth: int
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)
    admissibility: dict[str, tuple[bool, float]] = field(default_factory=dict)
    admissible_support: list[int] = field(default_factory=list)
    # sampled C1 and C0 distance of the perturbed branch from the unperturbed one
    sizes: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """all five pre-solution conditions"""
        names = ('s1', 's2', 's3', 's4', 's5')
        return all(n in self.checks and self.checks[n][0] for n in names)

    @property
    def admissible(self) -> bool:
        return all(ok for ok, _ in self.admissibility.values())

    @property
    def failed(self) -> list[str]:
        every = {**self.checks, **self.admissibility}
        return [name for name, (ok, _) in every.items() if not ok]

    def to_dict(self) -> dict[str, Any]:
        return {
            'depth': self.depth,
            'passed': self.passed,
            'checks': {k: {'passed': ok, 'value': v} for k, (ok, v) in self.checks.items()},
            'admissible': self.admissible,
            'admissibility': {
                k: {'passed': ok, 'value': v} for k, (ok, v) in self.admissibility.items()
            },
            'admissibleSupport': list(self.admissible_support),
            'sizes': dict(self.sizes),
        }


@dataclass(frozen=True, eq=False)
class PreSolution:
    ifs: MarkovIfs = field(repr=False)
    base: MarkovIfs = field(repr=False)
    member: int
    depth: int
    wells: WellSystem = field(repr=False)
    gamma: GammaCurve = field(repr=False)
    certificate: CostCertificate = field(repr=False)
    ladder: LadderField | None = field(repr=False)
    curve: StrongStableCurve = field(repr=False)
    report: PreSolutionReport

    @property
    def cost(self) -> int:
        return self.certificate.count

    @property
    def homoclinic(self) -> HomoclinicPoint:
        """Q as a homoclinic point of the perturbed orbit"""
        orbit = self.ifs.find_periodic(self.wells.orbit.word)
        hp = self.wells.homoclinic
        return HomoclinicPoint(hp.point, orbit, hp.word, hp.transit_steps)

    def to_dict(self) -> dict[str, Any]:
        return {
            'member': self.member,
            'depth': self.depth,
            'K': self.cost,
            'certificate': self.certificate.to_dict(),
            'report': self.report.to_dict(),
        }


def ladder_perturbation(
    ifs: MarkovIfs,
    certificate: CostCertificate,
    lam: float,
    center: np.ndarray,
    letter: int = PERIODIC_LETTER,
    steps: int = FRAGMENT_STEPS,
) -> tuple[MarkovIfs, LadderField | None]:
    """
    compose psi = prod_i H^i phi_i H^-i (i = 1 .. c) in front of the branch of letter
    :return: the perturbed IFS and its ladder field; ifs itself when the certificate is empty
    """
    if certificate.count == 0:
        return ifs, None
    rungs = []
    for f in certificate.factors:
        flows = f.chain.primitives
        if len(flows) != 1 or not isinstance(flows[0], BumpFlow):
            raise ValueError(f'factor {f.label} is not a single bump flow')
        rungs.append(flows[0].field)
    ladder = LadderField(tuple(rungs), lam, np.asarray(center, dtype=float), first=1)
    branches = list(ifs.branches)
    old = branches[letter]
    branches[letter] = Branch(
        old.dom, old.target, MapChain((BumpFlow(ladder, steps),) + old.map.primitives), old.label
    )
    return MarkovIfs(ifs.discs, tuple(branches)), ladder


def build_presolution(
    family: PreparedFamily,
    m: int,
    eta: float = DEFAULT_ETA,
    n0: int | None = None,
    eps2: float = EPS2,
    steps: int = FRAGMENT_STEPS,
    per_domain: int = DEFAULT_PER_DOMAIN,
) -> PreSolution:
    """
    a pre-solution of depth m built on member n0 of a prepared family
    :param n0: defaults to c + 2, the least member whose homothetic part holds the whole ladder
    :raises CostExceedsHomothety: n0 <= c + 1
    :raises DepthInfeasible: gamma_1,m does not fit the declared bounds
    """
    chart = xi_chart(family)
    c = select_resolution(GAMMA_BOUNDS, eta, chart.radius).count
    n0 = c + 2 if n0 is None else n0
    if n0 <= c + 1:
        logger.error('member %d cannot hold %d conjugated factors', n0, c)
        raise CostExceedsHomothety(f'n0 = {n0} must exceed c + 1 = {c + 1}')
    base = family.member(n0)
    hp = family.homoclinic(base)
    ws = compute_well_system(base, hp.of_orbit, hp, WELL_DEPTH)
    gamma = build_gamma_family(family, ws, 1, m)
    cert = gamma_cost(gamma, eta)
    if cert.count != c:
        logger.warning('gamma_1,%d costs %d factors, the bounds promise %d', m, cert.count, c)
    ifs, ladder = ladder_perturbation(base, cert, family.lam, hp.of_orbit.point, steps=steps)
    curve = _curve_for(ifs, ws, m, per_domain)
    report = check_presolution(ifs, ws, m, curve=curve)
    _check_admissible(
        report, ifs, base, ws, cert, ladder, family.params.xi_disc, family.lam, eps2, steps
    )
    logger.info(
        'pre-solution of depth %d on member %d with %d factors: %s%s',
        m,
        n0,
        cert.count,
        'PASS' if report.passed else 'FAIL',
        '' if report.admissible else ' (not admissible)',
    )
    return PreSolution(ifs, base, n0, m, ws, gamma, cert, ladder, curve, report)


def _check_admissible(
    report: PreSolutionReport,
    ifs: MarkovIfs,
    base: MarkovIfs,
    ws: WellSystem,
    cert: CostCertificate,
    ladder: LadderField | None,
    xi_disc: RoundDisc,
    lam: float,
    eps2: float,
    steps: int,
):
    orbit = ws.orbit
    xi = ws.xi(1)
    c = cert.count
    # telescoping on Xi_1
    pts = xi_disc.sample(TELESCOPE_GRID)
    pts = pts[xi.contains(pts)]
    k = c + 1
    lhs = ifs.word_chain(orbit.word * k).apply(pts)
    rhs = base.word_chain(orbit.word * k).apply(cert.apply(pts))
    err = float(np.max(np.linalg.norm(lhs - rhs, axis=1))) if len(pts) else 0.0
    report.admissibility['telescoping'] = (err <= TELESCOPE_TOLERANCE, err)
    # factor supports inside Xi_1
    outside = 0
    for f in cert.factors:
        d = f.support_disc
        if np.linalg.norm(d.center - xi_disc.center) + d.radius > xi_disc.radius:
            outside += 1
    report.admissibility['supportInXi'] = (outside == 0, float(outside))
    report.admissible_support = list(range(1, c + 1))
    # the return map near q is unchanged
    near = RoundDisc(orbit.point, IDENTITY_SHARE * lam ** (c + 1)).sample(24)
    diff = ifs.word_chain(orbit.word).apply(near) - base.word_chain(orbit.word).apply(near)
    worst = float(np.max(np.abs(diff))) if len(near) else 0.0
    report.admissibility['identityNearQ'] = (worst == 0.0, worst)
    # sampled C1 size of psi, level by level
    size = shift = 0.0
    if ladder is not None:
        psi = BumpFlow(ladder, steps)
        for i in range(1, c + 1):
            scale = lam**i
            centre = orbit.point + scale * (xi_disc.center - orbit.point)
            est = c1_distance(psi, identity_chain(), centre, scale * xi_disc.radius, C1_GRID)
            size, shift = max(size, est.total), max(shift, est.c0)
    report.admissibility['c1WithinEps2'] = (size <= eps2, size)
    report.sizes = {'c1': size, 'c0': shift}


def _curve_for(
    ifs: MarkovIfs, ws: WellSystem, depth: int, per_domain: int = DEFAULT_PER_DOMAIN
) -> StrongStableCurve:
    orbit = ifs.find_periodic(ws.orbit.word)
    if orbit is None:
        logger.error('the orbit %s does not survive the perturbation', ws.orbit.word)
        raise NumericFailure(f'no periodic point for {ws.orbit.word}')
    home = ifs.discs[orbit.discs[0]]
    radius = home.radius if isinstance(home, RoundDisc) else 1.0
    rate = abs(np.linalg.eigvals(ifs.word_chain(orbit.word).jacobian(orbit.point))).min()
    width = 0.5 * radius * rate**depth
    return global_strong_stable(ifs, orbit, width, per_domain=per_domain)


def check_presolution(
    ifs: MarkovIfs,
    ws: WellSystem,
    depth: int,
    curve: StrongStableCurve | None = None,
    tolerance: float = S5_TOLERANCE,
    samples: int = S5_SAMPLES,
) -> PreSolutionReport:
    """
    sampled check of the five pre-solution conditions of ifs at depth, against the wells ws of the
    unperturbed system
    """
    report = PreSolutionReport(depth)
    orbit = ifs.find_periodic(ws.orbit.word)
    real = orbit is not None and not any(isinstance(e, complex) for e in orbit.eigen)
    if curve is None and real:
        try:
            curve = _curve_for(ifs, ws, depth)
        except (NoGap, NumericFailure) as e:
            logger.warning('no strong stable curve at depth %d: %s', depth, e)
            curve = None
    if curve is None or not real:
        for name in ('s1', 's2', 's3', 's4', 's5'):
            report.checks[name] = (False, np.inf)
        return report

    pts = curve.curve.points
    hp = ws.homoclinic
    moved = HomoclinicPoint(hp.point, orbit, hp.word, hp.transit_steps)
    hom = ifs.verify_homoclinic(moved, wss=curve.curve)
    ok = ifs.is_separated(orbit) and hom.passed
    report.checks['s1'] = (ok, hom.checks['onStrongStable'][1])

    hits = 0
    for disc in ws.base_obstructions:
        if disc is not None:
            hits += int(np.count_nonzero(disc.contains(pts)))
    report.checks['s2'] = (hits == 0, float(hits))

    idx = ws.indices
    n = len(pts)

    def on_curve(region, within: np.ndarray) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        if len(within):
            mask[within] = region.contains(pts[within])
        return mask

    in_first = np.flatnonzero(ws.xi(1).contains(pts))
    worst, hits = 0, 0
    for i in range(1, idx.t + 1):
        worst = max(worst, count_runs(on_curve(ws.xi(i), in_first)))
        if i < idx.t:
            for comp in ws.theta(i):
                hits += int(np.count_nonzero(on_curve(comp, in_first)))
    report.checks['s3'] = (worst <= 1 and hits == 0, float(max(worst - 1, 0) + hits))

    in_last = np.flatnonzero(ws.xi(idx.t).contains(pts))
    worst, hits = 0, 0
    for i in range(depth):
        worst = max(worst, count_runs(on_curve(ws.periodic(i), in_last)))
        for comp in ws.periodic_hole(i):
            hits += int(np.count_nonzero(on_curve(comp, in_last)))
    report.checks['s4'] = (worst <= 1 and hits == 0, float(max(worst - 1, 0) + hits))

    report.checks['s5'] = _coincidence(ifs, ws, curve, depth, in_last, tolerance, samples)
    if not report.passed:
        logger.info('depth %d pre-solution check fails %s', depth, report.failed)
    return report


def _coincidence(
    ifs: MarkovIfs,
    ws: WellSystem,
    curve: StrongStableCurve,
    depth: int,
    candidates: np.ndarray,
    tolerance: float,
    samples: int,
) -> tuple[bool, float]:
    """W^ss(q) inside T_depth against W^ss(q) pushed forward along the word of T_depth"""
    pts = curve.curve.points
    t_l = ws.periodic(depth)
    mask = np.zeros(len(pts), dtype=bool)
    if len(candidates):
        mask[candidates] = t_l.contains(pts[candidates])
    hit = np.flatnonzero(mask)
    if len(hit) == 0 or count_runs(mask) != 1:
        return False, np.inf
    lo = curve.params[max(hit[0] - 1, 0)]
    hi = curve.params[min(hit[-1] + 1, len(pts) - 1)]
    _, fine = curve.refine(lo, hi, samples)
    ref = fine[t_l.contains(fine)]
    if len(ref) < 2:
        return False, np.inf

    orbit = ws.orbit
    prefix = periodic_letters(orbit, 0, (ws.indices.q1_position - depth) % orbit.period)
    pick = np.unique(np.linspace(0, len(pts) - 1, PUSHED_SAMPLES).round().astype(int))
    pushed = ifs.word_chain(prefix + t_l.word).apply(pts[pick])
    pushed = pushed[np.all(np.isfinite(pushed), axis=1)]
    if len(pushed) < 2:
        return False, np.inf
    # pushed points beyond the ends of the sampled arc have nothing to be compared with
    chord = ref[-1] - ref[0]
    along = (pushed - ref[0]) @ chord / float(chord @ chord)
    inner = pushed[(along >= 0.0) & (along <= 1.0)]
    d_ref = float(np.max(nearest_segment_distances(ref, pushed)))
    d_pushed = float(np.max(nearest_segment_distances(inner, ref))) if len(inner) else 0.0
    off = max(d_ref, d_pushed)
    return off < tolerance, off
