"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Invariant curve families of a pre-solution and what is measured on them.

The backward images of W^ss(q) sort themselves into the discs of a refinement by their backward
itineraries: a sample x lies in F_w(D) for the word w of its last letters.  For a pre-solution of
depth l the refinement has order l + t + a, so the inverse branch out of T_l is the one matched
by the coincidence condition and every refined disc is mapped back into the family.  The family
is univalent when every refined disc holds one arc, and every arc should carry a point of the
orbit of q or of the homoclinic orbit of Q.

The normal strength of a curve under k inverse steps is the norm of the map induced on the
quotient T D / T Gamma, |det M| / |M v| for the Jacobian M of the inverse chain and the unit
tangent v.  Dwell counts the backward iterates that stay in a neighbourhood W of q.
"""

from dataclasses import dataclass, field
from logging import getLogger
from typing import Any

import numpy as np

from mifs.extensions.presolution.strong_stable import StrongStableCurve
from mifs.extensions.wells.wells import WellIndices, WellSystem, periodic_letters
from mifs.mifs_model.curves import CurveSample, count_runs, nearest_segment_distances
from mifs.mifs_model.exceptions import UnivalenceViolation
from mifs.mifs_model.markov_ifs import MarkovIfs, PeriodicOrbit, RoundDisc, Word

logger = getLogger(__name__)

INVARIANCE_TOLERANCE = 1e-8
DWELL_SAMPLES = 200
DWELL_LIMIT = 500


@dataclass(frozen=True, eq=False)
class InvariantCurveFamily:
    ifs: MarkovIfs = field(repr=False)
    depth: int
    level: int
    curves: dict[Word, CurveSample] = field(repr=False)
    anchors: dict[Word, list[str]] = field(default_factory=dict)
    invariance_residual: float = 0.0
    indices: WellIndices | None = None

    @property
    def anchorless(self) -> list[Word]:
        return [w for w in self.curves if not self.anchors.get(w)]

    @property
    def samples(self) -> int:
        return sum(len(c) for c in self.curves.values())

    @property
    def passed(self) -> bool:
        return self.invariance_residual < INVARIANCE_TOLERANCE and not self.anchorless

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """every sample of the family with its unit tangent"""
        if not self.curves:
            return np.zeros((0, 2)), np.zeros((0, 2))
        pts = np.concatenate([c.points for c in self.curves.values()])
        tan = np.concatenate([c.tangents for c in self.curves.values()])
        return pts, tan

    def to_dict(self) -> dict[str, Any]:
        return {
            'depth': self.depth,
            'level': self.level,
            'discs': [
                {'word': list(w), 'samples': len(c), 'anchors': self.anchors.get(w, [])}
                for w, c in self.curves.items()
            ],
            'invarianceResidual': self.invariance_residual,
            'anchorless': len(self.anchorless),
            'passed': self.passed,
        }


def backward_itineraries(
    ifs: MarkovIfs, pts: np.ndarray, steps: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    walk every point back steps times
    :return: (mask of points whose walk is defined, letters (n, steps) with the last applied
        letter first, end points)
    """
    current = np.array(pts, dtype=float, copy=True)
    letters = np.full((len(current), steps), -1, dtype=int)
    alive = np.ones(len(current), dtype=bool)
    for step in range(steps):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break
        lab, pre = ifs.inverse_step_many(current[idx])
        good = lab >= 0
        alive[idx[~good]] = False
        letters[idx[good], step] = lab[good]
        current[idx[good]] = pre[good]
    return alive, letters, current


def _disc_name(w: Word) -> str:
    return '.'.join(str(j) for j in w)


def _anchor_points(ifs: MarkovIfs, ws: WellSystem, level: int) -> dict[str, np.ndarray]:
    """the periodic orbit, Q with its forward periodic iterates and its backward transit"""
    orbit = ifs.find_periodic(ws.orbit.word) or ws.orbit
    out = {f'q{k}': p for k, p in enumerate(orbit.orbit_points)}
    hp = ws.homoclinic
    q_disc = ifs.disc_index_of(hp.point)
    start = next((k for k, d in enumerate(orbit.discs) if d == q_disc), 0)
    letters = periodic_letters(orbit, start, level + 1)
    p = np.asarray(hp.point, dtype=float)
    out['Q0'] = p
    for k, letter in enumerate(letters, start=1):
        p = ifs.branches[letter].map.apply(p)
        out[f'Q{k}'] = p
    current = np.asarray(hp.point, dtype=float)[None, :]
    for k, letter in enumerate(reversed(hp.word), start=1):
        ok, current = ifs.pull_back(current, (letter,))
        if not ok[0]:
            break
        out[f'Q-{k}'] = current[0]
    return out


def extract_invariant_curves(
    ifs: MarkovIfs,
    ws: WellSystem,
    depth: int,
    curve: StrongStableCurve | CurveSample,
) -> InvariantCurveFamily:
    """
    the univalent family of backward images of W^ss(q) for a pre-solution of depth l, kept in
    the refinement of order l + t + a where T_l is one of the refined discs
    :raises UnivalenceViolation: a refined disc holds more than one arc of the curve
    """
    if depth < 0:
        raise ValueError('depth must be non-negative')
    level = depth + ws.indices.t + ws.indices.a
    sample = curve.curve if isinstance(curve, StrongStableCurve) else curve
    pts = sample.points
    alive, letters, _ = backward_itineraries(ifs, pts, level)
    words = [tuple(int(j) for j in row[::-1]) for row in letters]
    groups: dict[Word, list[int]] = {}
    for i in np.flatnonzero(alive):
        groups.setdefault(words[i], []).append(int(i))

    curves = {}
    for w, members in groups.items():
        mask = np.zeros(len(pts), dtype=bool)
        mask[members] = True
        runs = count_runs(mask)
        if runs > 1:
            logger.error('refined disc %s holds %d arcs of the curve', _disc_name(w), runs)
            raise UnivalenceViolation(f'refined disc {_disc_name(w)} holds {runs} curve arcs')
        curves[w] = sample.subset(mask, curve_id=f'Gamma{level}[{_disc_name(w)}]')

    anchors: dict[Word, list[str]] = {}
    named = _anchor_points(ifs, ws, level)
    names = list(named)
    ok, a_letters, _ = backward_itineraries(ifs, np.stack([named[n] for n in names]), level)
    for name, good, row in zip(names, ok, a_letters):
        w = tuple(int(j) for j in row[::-1])
        if good and w in curves:
            anchors.setdefault(w, []).append(name)

    # one inverse step keeps the family on itself
    kept = np.flatnonzero(alive)
    lab, pre = ifs.inverse_step_many(pts[kept])
    pre = pre[lab >= 0]
    residual = float(np.max(nearest_segment_distances(pre, pts))) if len(pre) else 0.0

    family = InvariantCurveFamily(ifs, depth, level, curves, anchors, residual, ws.indices)
    logger.info(
        'invariant curves at level %d: %d discs, %d samples, residual %.3g, %d without anchor',
        level,
        len(curves),
        family.samples,
        residual,
        len(family.anchorless),
    )
    return family


# ------------------------------------------------------------------------------ weakness


@dataclass(frozen=True)
class NormalStrengthReport:
    k1: int
    min_normal: float
    max_normal: float
    min_tangential: float
    samples: int

    @property
    def implied_eta(self) -> float:
        """least eta with ((1 - eta)^k1, (1 - eta)^-k1) holding every normal quotient"""
        if self.samples == 0:
            return np.nan
        lo = 1.0 - self.min_normal ** (1.0 / self.k1)
        hi = 1.0 - self.max_normal ** (-1.0 / self.k1)
        return float(max(lo, hi, 0.0))

    @property
    def contracting(self) -> bool:
        """the inverse chain expands the tangent direction at every sample"""
        return self.samples > 0 and self.min_tangential > 1.0

    def is_weak(self, eta: float) -> bool:
        bound = (1.0 - eta) ** self.k1
        return self.samples > 0 and bound < self.min_normal <= self.max_normal < 1.0 / bound

    def to_dict(self) -> dict[str, Any]:
        return {
            'k1': self.k1,
            'minNormal': self.min_normal,
            'maxNormal': self.max_normal,
            'minTangential': self.min_tangential,
            'impliedEta': self.implied_eta,
            'samples': self.samples,
        }


def normal_strength(
    family: InvariantCurveFamily, k1: int, domain_steps: int = 0
) -> NormalStrengthReport:
    """
    normal quotients of the k1-step inverse chain at the family samples
    :param domain_steps: further inverse steps a sample must admit to be counted
    """
    if k1 < 1:
        raise ValueError('k1 must be positive')
    ifs = family.ifs
    pts, tan = family.points()
    jac = np.broadcast_to(np.eye(2), (len(pts), 2, 2)).copy()
    alive = np.ones(len(pts), dtype=bool)
    current = pts.copy()
    for step_no in range(k1 + domain_steps):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break
        lab, pre = ifs.inverse_step_many(current[idx])
        alive[idx[lab < 0]] = False
        for letter in np.unique(lab[lab >= 0]):
            sel = lab == letter
            where = idx[sel]
            if step_no < k1:
                step = np.linalg.inv(ifs.branches[letter].map.jacobian(pre[sel]))
                jac[where] = step @ jac[where]
            current[where] = pre[sel]
    if not alive.any():
        logger.warning('no curve sample has %d inverse steps', k1)
        return NormalStrengthReport(k1, np.nan, np.nan, np.nan, 0)
    jac, tan = jac[alive], tan[alive]
    mv = np.linalg.norm(np.einsum('nij,nj->ni', jac, tan), axis=1)
    normal = np.abs(np.linalg.det(jac)) / mv
    report = NormalStrengthReport(
        k1, float(normal.min()), float(normal.max()), float(mv.min()), int(alive.sum())
    )
    logger.info(
        'normal strength over %d steps: [%.6g, %.6g], implied eta %.4g',
        k1,
        report.min_normal,
        report.max_normal,
        report.implied_eta,
    )
    return report


# --------------------------------------------------------------------------------- dwell


def least_dwell_iterate(
    ifs: MarkovIfs, orbit: PeriodicOrbit, region: RoundDisc, limit: int = DWELL_LIMIT
) -> int:
    """
    the least l with F_q^l of the home disc inside region, found by pushing the boundary and a
    grid of the disc forward
    """
    home = ifs.discs[orbit.discs[0]]
    pts = np.concatenate([home.boundary(), home.sample(24)])
    chain = ifs.word_chain(orbit.word)
    for ell in range(limit + 1):
        if np.all(region.contains(pts)):
            return ell
        pts = chain.apply(pts)
    raise ValueError(f'the home disc does not enter the region within {limit} returns')


def dwell_intervals(visits: np.ndarray) -> list[tuple[int, int]]:
    """maximal runs of True as closed index intervals"""
    v = np.concatenate([[False], np.asarray(visits, dtype=bool), [False]]).astype(int)
    edges = np.flatnonzero(np.diff(v))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


@dataclass(frozen=True)
class DwellReport:
    length: int
    l0: int
    a: int
    t: int
    samples: int
    worst: int
    failures: int
    interval_counts: dict[int, int]
    horizon: int = 0

    @property
    def least_length(self) -> int:
        return self.l0 + self.a + self.t + 1

    @property
    def bound(self) -> int:
        """least visit count a sample must reach, L - l0 - a - t"""
        return self.length - self.l0 - self.a - self.t

    @property
    def ratio(self) -> float:
        return self.bound / self.length

    @property
    def conclusive(self) -> bool:
        return self.length >= self.least_length

    @property
    def passed(self) -> bool:
        return self.conclusive and self.samples > 0 and self.failures == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            'L': self.length,
            'l0': self.l0,
            'L0': self.least_length,
            'r': self.ratio,
            'bound': self.bound,
            'horizon': self.horizon,
            'conclusive': self.conclusive,
            'samples': self.samples,
            'dwellMin': self.worst,
            'failures': self.failures,
            'intervalCounts': {str(k): v for k, v in sorted(self.interval_counts.items())},
            'passed': self.passed,
        }


def dwell_distribution(
    family: InvariantCurveFamily,
    orbit: PeriodicOrbit,
    length: int,
    region: RoundDisc,
    samples: int = DWELL_SAMPLES,
    seed: int = 0,
) -> DwellReport:
    """
    backward visits to region over length steps for sampled curve points; a sample passes when
    its longest visit interval, or its two longest together, reach L - l0 - a - t

    Samples are drawn from the points whose backward orbit is defined over the window and the
    depth of the family after it, so a return to the periodic disc inside the window is seen
    for at least depth steps.
    """
    if family.level < length:
        raise ValueError(f'the family is refined to {family.level} < L = {length}')
    ifs = family.ifs
    l0 = least_dwell_iterate(ifs, orbit, region)
    a = family.indices.a if family.indices else 0
    t = family.indices.t if family.indices else 0
    horizon = length + family.depth + a + t
    pts, _ = family.points()
    lasting, _, _ = backward_itineraries(ifs, pts, horizon)
    candidates = np.flatnonzero(lasting)
    if len(candidates) < len(pts):
        logger.debug(
            '%d of %d curve points have a backward orbit over %d steps',
            len(candidates),
            len(pts),
            horizon,
        )
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(candidates, size=min(samples, len(candidates)), replace=False))
    current = pts[pick].copy()
    visits = np.zeros((len(pick), length), dtype=bool)
    for step in range(length if len(pick) else 0):
        visits[:, step] = region.contains(current)
        _, current = ifs.inverse_step_many(current)

    bound = length - l0 - a - t
    worst, failures = length, 0
    counts: dict[int, int] = {}
    for row in visits:
        runs = sorted((hi - lo + 1 for lo, hi in dwell_intervals(row)), reverse=True)
        counts[min(len(runs), 3)] = counts.get(min(len(runs), 3), 0) + 1
        best = sum(runs[:2])
        worst = min(worst, best)
        if best < bound:
            failures += 1
    report = DwellReport(length, l0, a, t, len(pick), worst, failures, counts, horizon)
    if not report.conclusive:
        logger.warning(
            'L = %d is below L0 = %d, the dwell bound is not claimed', length, report.least_length
        )
    if report.samples == 0:
        logger.warning('no curve point has a backward orbit over %d steps', horizon)
    logger.info(
        'dwell over %d steps: %d samples, least dwell %d, bound %d, %d failures',
        length,
        report.samples,
        worst,
        bound,
        failures,
    )
    return report
