"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Strata, obstructions and the two wells of a periodic orbit q and a homoclinic point Q, all kept
implicit in the first fundamental domain of D_q: every set is a base disc pushed forward along a
word, and membership is decided by pulling points back along that word.

Orbit positions are the indices into orbit.word: the letter at position k sends q_k to q_k+1 and
its domain disc is orbit.discs[k].  With the transit word h from Q1 to Q2 and
tail = the periodic letters from Q2's disc back into D_q,

    Xi_n     = F(D_{F^-n(Q2)})      word h[t-n:t] + tail                   n = 1 .. t
    T_n      = F(D_{F_q^-n(Q1)})    word periodic(k1 - n, n) + h[:t] + tail  n >= 0
    Lambda_i = F_q^i(D_{F^-i(q)})   word periodic(-i, i)

and Theta_n, S_n, Delta_i,* are the one-letter extensions of those words that are not the next
set of their own sequence.
"""

from dataclasses import dataclass, field
from logging import getLogger
from typing import Any, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from mifs.mifs_model.exceptions import ObstructionConflict
from mifs.mifs_model.markov_ifs import (
    HomoclinicPoint,
    ImageDisc,
    MarkovIfs,
    PeriodicOrbit,
    RoundDisc,
    Word,
)
from mifs.mifs_model.planar_maps import as_points

logger = getLogger(__name__)

ORBIT_TOLERANCE = 1e-8
# enclosing discs are grown by this relative amount to cover the shrunken boundary samples
ENCLOSING_PAD = 1e-8
DEFAULT_PROBE_COUNT = 500
HULL_SAMPLES = 256
SELF_SIMILAR_DEPTH = 6


@dataclass(frozen=True, eq=False)
class WordDisc:
    """F_w(B) for a round disc B that lies in the domain disc of the first letter of w"""

    base: RoundDisc
    word: Word
    owner: MarkovIfs = field(repr=False)

    def contains(self, p) -> np.ndarray:
        pts, _ = as_points(p)
        ok, pre = self.owner.pull_back(pts, self.word)
        ok[ok] = self.base.contains(pre[ok])
        return ok

    def boundary(self, count: int = HULL_SAMPLES, shrink: float = 1e-9) -> np.ndarray:
        return self.owner.word_chain(self.word).apply(self.base.boundary(count, shrink))

    def sample(self, grid: int, shrink: float = 1e-9) -> np.ndarray:
        return self.owner.word_chain(self.word).apply(self.base.sample(grid, shrink))

    def representative(self) -> np.ndarray:
        return self.owner.word_chain(self.word).apply(self.base.center)

    def to_dict(self) -> dict[str, Any]:
        return {'base': self.base.to_dict(), 'word': list(self.word)}


@dataclass(frozen=True, eq=False)
class WellIndices:
    q1: np.ndarray
    q1_position: int
    transit: Word
    t: int
    q2: np.ndarray
    q2_position: int
    a: int
    d: int

    def as_tuple(self) -> tuple[np.ndarray, int, np.ndarray, int, int]:
        """(Q1, t, Q2, a, d)"""
        return self.q1, self.t, self.q2, self.a, self.d

    def to_dict(self) -> dict[str, Any]:
        return {
            'Q1': self.q1.tolist(),
            'q1Position': self.q1_position,
            'transit': list(self.transit),
            't': self.t,
            'Q2': self.q2.tolist(),
            'q2Position': self.q2_position,
            'a': self.a,
            'd': self.d,
        }


def periodic_letters(orbit: PeriodicOrbit, start: int, count: int) -> Word:
    """the count letters of the periodic word read from orbit position start"""
    p = orbit.period
    return tuple(orbit.word[(start + j) % p] for j in range(count))


def _on_orbit(orbit: PeriodicOrbit, p: np.ndarray) -> int | None:
    dist = np.linalg.norm(orbit.orbit_points - p, axis=1)
    k = int(np.argmin(dist))
    return k if dist[k] < ORBIT_TOLERANCE else None


def _orbit_position_of_disc(ifs: MarkovIfs, orbit: PeriodicOrbit, p: np.ndarray) -> int | None:
    for k, d in enumerate(orbit.discs):
        if ifs.discs[d].contains(p)[0]:
            return k
    return None


def compute_indices(
    ifs: MarkovIfs, orbit: PeriodicOrbit, homoclinic: HomoclinicPoint | None
) -> WellIndices:
    """Q1, t, Q2, a and d by walking the inverse orbit of Q and the forward orbit of Q1"""
    if homoclinic is None:
        logger.error('well indices requested without a homoclinic point')
        raise ValueError('indices undefined: the scenario has no homoclinic point')
    report = ifs.verify_homoclinic(homoclinic)
    if not report.passed:
        failed = [name for name, (ok, _) in report.checks.items() if not ok]
        logger.error('homoclinic point fails %s, well indices undefined', failed)
        raise ValueError(f'indices undefined: homoclinic point fails {failed}')

    # backwards from Q until the first point of orb(q)
    word = tuple(homoclinic.word)
    current = np.asarray(homoclinic.point, dtype=float)[None, :]
    q1_position = _on_orbit(orbit, current[0])
    steps = 0
    for letter in reversed(word):
        if q1_position is not None:
            break
        ok, current = ifs.pull_back(current, (letter,))
        if not ok[0]:
            raise ValueError(f'the inverse orbit of Q leaves the image of branch {letter}')
        steps += 1
        q1_position = _on_orbit(orbit, current[0])
    if q1_position is None or steps == 0:
        raise ValueError('the inverse orbit of Q does not reach orb(q) along its word')
    transit = word[len(word) - steps :]
    q1 = np.asarray(orbit.orbit_points[q1_position], dtype=float)

    # forwards from Q1 until the first periodic disc
    q2, q2_position, t = None, None, 0
    for t in range(1, len(transit) + 1):
        q2 = ifs.word_chain(transit[:t]).apply(q1)
        q2_position = _orbit_position_of_disc(ifs, orbit, q2)
        if q2_position is not None:
            break
    if q2_position is None:
        raise ValueError('the forward orbit of Q1 never returns to a periodic disc')

    home = orbit.discs[0]
    p = orbit.period
    a = next(i for i in range(p) if orbit.discs[(q2_position + i) % p] == home)
    d = next(i for i in range(p) if orbit.discs[i] == orbit.discs[q1_position])
    logger.info(
        'well indices: Q1 at orbit position %d, t = %d, Q2 in disc of position %d, a = %d, d = %d',
        q1_position,
        t,
        q2_position,
        a,
        d,
    )
    return WellIndices(q1, q1_position, transit, t, np.asarray(q2), q2_position, a, d)


def _hull_points(points: np.ndarray) -> np.ndarray:
    try:
        return points[ConvexHull(points).vertices]
    except QhullError:
        return points


def _circumcircle(a, b, c) -> tuple[np.ndarray, float] | None:
    ax, ay = a
    bx, by = b
    cx, cy = c
    det = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(det) < 1e-18:
        return None
    sa, sb, sc = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    ux = (sa * (by - cy) + sb * (cy - ay) + sc * (ay - by)) / det
    uy = (sa * (cx - bx) + sb * (ax - cx) + sc * (bx - ax)) / det
    center = np.array([ux, uy])
    return center, float(np.linalg.norm(center - a))


def enclosing_disc(points: np.ndarray) -> RoundDisc:
    """the smallest round disc holding every point, by the incremental Welzl construction"""
    pts = _hull_points(np.asarray(points, dtype=float))

    def outside(p, center, radius):
        return np.linalg.norm(p - center) > radius * (1 + 1e-12) + 1e-15

    center, radius = pts[0].copy(), 0.0
    for i in range(1, len(pts)):
        if not outside(pts[i], center, radius):
            continue
        center, radius = pts[i].copy(), 0.0
        for j in range(i):
            if not outside(pts[j], center, radius):
                continue
            center = 0.5 * (pts[i] + pts[j])
            radius = float(0.5 * np.linalg.norm(pts[i] - pts[j]))
            for k in range(j):
                if not outside(pts[k], center, radius):
                    continue
                circle = _circumcircle(pts[i], pts[j], pts[k])
                if circle is not None:
                    center, radius = circle
    if radius <= 0:
        raise ValueError('cannot enclose a single point in a disc')
    return RoundDisc(center, radius * (1 + ENCLOSING_PAD))


@dataclass(frozen=True, eq=False)
class WellSystem:
    ifs: MarkovIfs = field(repr=False)
    orbit: PeriodicOrbit
    homoclinic: HomoclinicPoint
    indices: WellIndices
    depth: int
    i_xi: int
    # Delta_0 .. Delta_pi-1; None where the annulus holds no image disc other than Xi_1
    base_obstructions: tuple[RoundDisc | None, ...]
    transition_well: tuple[ImageDisc, ...]
    transition_holes: tuple[tuple[ImageDisc, ...], ...]
    periodic_well: tuple[ImageDisc, ...]
    periodic_holes: tuple[tuple[ImageDisc, ...], ...]

    @property
    def home(self) -> RoundDisc | ImageDisc:
        return self.ifs.discs[self.orbit.discs[0]]

    @property
    def approach(self) -> Word:
        """letters from T_n's base down to D_q after the periodic prefix: h[:t] + tail"""
        idx = self.indices
        return idx.transit[: idx.t] + periodic_letters(self.orbit, idx.q2_position, idx.a)

    # ----------------------------------------------------------- lazy sets

    def image_disc(self, i: int) -> ImageDisc:
        """Lambda-bar_i"""
        if i < 0:
            raise IndexError('image discs start at 0')
        p = self.orbit.period
        return ImageDisc(self.orbit.discs[-i % p], periodic_letters(self.orbit, -i, i), self.ifs)

    def stratum(self, i: int, count: int = HULL_SAMPLES) -> np.ndarray:
        """Lambda_i as a sampled closed polyline"""
        return self.image_disc(i).boundary(count)

    def obstruction(self, i: int) -> WordDisc | None:
        p = self.orbit.period
        base = self.base_obstructions[i % p]
        if base is None:
            return None
        return WordDisc(base, tuple(self.orbit.word) * (i // p), self.ifs)

    def xi(self, n: int) -> ImageDisc:
        idx = self.indices
        if not 1 <= n <= idx.t:
            raise IndexError(f'Xi_n is defined for n = 1 .. {idx.t}')
        return self.transition_well[n - 1]

    def theta(self, n: int) -> tuple[ImageDisc, ...]:
        if not 1 <= n < self.indices.t:
            raise IndexError(f'Theta_n is defined for n = 1 .. {self.indices.t - 1}')
        return self.transition_holes[n - 1]

    def periodic(self, n: int) -> ImageDisc:
        """T_n, computed on demand beyond the stored depth"""
        if n < 0:
            raise IndexError('T_n starts at n = 0')
        if n < len(self.periodic_well):
            return self.periodic_well[n]
        return _periodic_disc(self.ifs, self.orbit, self.indices, n)

    def periodic_hole(self, n: int) -> tuple[ImageDisc, ...]:
        """S_n"""
        if n < 0:
            raise IndexError('S_n starts at n = 0')
        if n < len(self.periodic_holes):
            return self.periodic_holes[n]
        nxt = periodic_letters(self.orbit, self.indices.q1_position - n - 1, 1)[0]
        return _holes(self.ifs, self.periodic(n), nxt)

    def self_similar_disc(self, j: int) -> ImageDisc:
        """F_q^a o F_Q^t o F_q^d (Lambda-bar_j), which equals T_d+j"""
        lam = self.image_disc(j)
        word = lam.word + periodic_letters(self.orbit, 0, self.indices.d) + self.approach
        return ImageDisc(lam.base_disc_index, word, self.ifs)

    # -------------------------------------------------------------- export

    def boundary_polylines(self, count: int = HULL_SAMPLES) -> dict[str, np.ndarray]:
        """every stored set as a closed polyline, keyed by a short name"""
        lines: dict[str, np.ndarray] = {}
        for i in range(self.depth + 1):
            lines[f'Lambda{i}'] = self.stratum(i, count)
        for i, base in enumerate(self.base_obstructions):
            if base is not None:
                lines[f'Delta{i}'] = base.boundary(count)
        for n, disc in enumerate(self.transition_well, start=1):
            lines[f'Xi{n}'] = disc.boundary(count)
        for n, holes in enumerate(self.transition_holes, start=1):
            for c, disc in enumerate(holes):
                lines[f'Theta{n}.{c}'] = disc.boundary(count)
        for n, disc in enumerate(self.periodic_well):
            lines[f'T{n}'] = disc.boundary(count)
        for n, holes in enumerate(self.periodic_holes):
            for c, disc in enumerate(holes):
                lines[f'S{n}.{c}'] = disc.boundary(count)
        return lines

    def to_dict(self) -> dict[str, Any]:
        return {
            'indices': self.indices.to_dict(),
            'iXi': self.i_xi,
            'depth': self.depth,
            'obstructions': [b and b.to_dict() for b in self.base_obstructions],
            'transitionWell': [d.to_dict() for d in self.transition_well],
            'transitionHoles': [[d.to_dict() for d in h] for h in self.transition_holes],
            'periodicWell': [d.to_dict() for d in self.periodic_well],
            'periodicHoles': [[d.to_dict() for d in h] for h in self.periodic_holes],
        }


def _holes(ifs: MarkovIfs, disc: ImageDisc, skip: int) -> tuple[ImageDisc, ...]:
    """the one-letter extensions of disc's word other than the letter skip"""
    return tuple(
        ImageDisc(b.dom, (j,) + disc.word, ifs)
        for j, b in enumerate(ifs.branches)
        if b.target == disc.base_disc_index and j != skip
    )


def _periodic_disc(
    ifs: MarkovIfs, orbit: PeriodicOrbit, idx: WellIndices, n: int
) -> ImageDisc:
    start = idx.q1_position - n
    tail = periodic_letters(orbit, idx.q2_position, idx.a)
    word = periodic_letters(orbit, start, n) + idx.transit[: idx.t] + tail
    return ImageDisc(orbit.discs[start % orbit.period], word, ifs)


def _intersects(region, disc: RoundDisc, grid: int = 24) -> bool:
    probe = np.vstack([region.boundary(HULL_SAMPLES), region.sample(grid)])
    return bool(disc.contains(probe).any() or region.contains(disc.center)[0])


def _build_obstruction(
    ifs: MarkovIfs, orbit: PeriodicOrbit, i: int, xi1: ImageDisc, i_xi: int
) -> RoundDisc | None:
    p = orbit.period
    into = periodic_letters(orbit, -i - 1, 1)[0]
    stratum_disc = ImageDisc(orbit.discs[-i % p], periodic_letters(orbit, -i, i), ifs)
    parts = [
        c
        for c in _holes(ifs, stratum_disc, into)
        if not (c.word == xi1.word and c.base_disc_index == xi1.base_disc_index)
    ]
    if not parts:
        return None
    delta = enclosing_disc(np.vstack([c.boundary(HULL_SAMPLES) for c in parts]))
    if i == i_xi and _intersects(xi1, delta):
        logger.error(
            'the smallest disc around the %d-th image discs (centre %s, radius %.6g) meets Xi_1',
            i,
            delta.center.tolist(),
            delta.radius,
        )
        raise ObstructionConflict(f'no obstruction disc for annulus {i} avoids Xi_1')
    inner = ImageDisc(orbit.discs[-(i + 1) % p], periodic_letters(orbit, -i - 1, i + 1), ifs)
    edge = delta.boundary(HULL_SAMPLES)
    if not stratum_disc.contains(edge).all() or _intersects(inner, delta):
        logger.warning('obstruction %d leaves the annulus of Lambda_%d and Lambda_%d', i, i, i + 1)
    return delta


def compute_well_system(
    ifs: MarkovIfs, orbit: PeriodicOrbit, homoclinic: HomoclinicPoint | None, depth: int
) -> WellSystem:
    if depth < 0:
        raise ValueError('well depth must be non-negative')
    idx = compute_indices(ifs, orbit, homoclinic)
    tail = periodic_letters(orbit, idx.q2_position, idx.a)
    h = idx.transit

    xis = tuple(
        ImageDisc(ifs.branches[h[idx.t - n]].dom, h[idx.t - n : idx.t] + tail, ifs)
        for n in range(1, idx.t + 1)
    )
    thetas = tuple(_holes(ifs, xis[n - 1], h[idx.t - n - 1]) for n in range(1, idx.t))
    ts = tuple(_periodic_disc(ifs, orbit, idx, n) for n in range(depth + 1))
    ss = tuple(
        _holes(ifs, ts[n], periodic_letters(orbit, idx.q1_position - n - 1, 1)[0])
        for n in range(depth)
    )

    # Xi_1 lies in the annulus of the image disc its word ends with
    i_xi = idx.a
    obstructions = tuple(
        _build_obstruction(ifs, orbit, i, xis[0], i_xi) for i in range(orbit.period)
    )
    ws = WellSystem(
        ifs=ifs,
        orbit=orbit,
        homoclinic=homoclinic,
        indices=idx,
        depth=depth,
        i_xi=i_xi,
        base_obstructions=obstructions,
        transition_well=xis,
        transition_holes=thetas,
        periodic_well=ts,
        periodic_holes=ss,
    )
    logger.info(
        'well system to depth %d: %d transition discs, %d obstructions',
        depth,
        len(xis),
        sum(b is not None for b in obstructions),
    )
    return ws


def membership(ws: WellSystem, selector: str, p) -> bool:
    """
    p in one well set, selected as '<name>:<index>' with name one of
    Xi, Theta, T, S, Lambda (the image disc) or Delta
    """
    name, _, index = selector.partition(':')
    n = int(index)
    pt = np.asarray(p, dtype=float).reshape(1, 2)
    if not ws.home.contains(pt)[0]:
        return False
    match name:
        case 'Xi':
            parts = (ws.xi(n),)
        case 'Theta':
            parts = ws.theta(n)
        case 'T':
            parts = (ws.periodic(n),)
        case 'S':
            parts = ws.periodic_hole(n)
        case 'Lambda':
            parts = (ws.image_disc(n),)
        case 'Delta':
            delta = ws.obstruction(n)
            parts = () if delta is None else (delta,)
        case _:
            raise ValueError(f'unknown well set {name!r}')
    return any(bool(part.contains(pt)[0]) for part in parts)


# ------------------------------------------------------------------ checks


@dataclass
class WellReport:
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        return {name: {'ok': ok, 'value': value} for name, (ok, value) in self.checks.items()}


def _probe(region, count: int) -> np.ndarray:
    grid = max(4, int(np.sqrt(count)))
    return np.vstack([region.boundary(count // 2), region.sample(grid)])


def _misses(inner, outer, count: int, avoid: Sequence = ()) -> int:
    pts = _probe(inner, count)
    bad = ~outer.contains(pts)
    for region in avoid:
        bad |= region.contains(pts)
    return int(bad.sum())


def check_well_system(ws: WellSystem, samples: int = DEFAULT_PROBE_COUNT) -> WellReport:
    """the nesting, hole, obstruction and self-similarity identities on sampled points"""
    report = WellReport()
    t = ws.indices.t

    bad = sum(_misses(ws.xi(n + 1), ws.xi(n), samples) for n in range(1, t))
    report.checks['nestedXi'] = (bad == 0, float(bad))
    bad = sum(_misses(ws.periodic(n + 1), ws.periodic(n), samples) for n in range(ws.depth))
    report.checks['nestedT'] = (bad == 0, float(bad))

    t0, xi_t = ws.periodic(0), ws.xi(t)
    same = t0.word == xi_t.word and t0.base_disc_index == xi_t.base_disc_index
    report.checks['T0IsXiT'] = (same, float(not same))

    bad = sum(
        _misses(c, ws.xi(n), samples, avoid=(ws.xi(n + 1),))
        for n in range(1, t)
        for c in ws.theta(n)
    )
    report.checks['thetaInside'] = (bad == 0, float(bad))
    bad = sum(
        _misses(c, ws.periodic(n), samples, avoid=(ws.periodic(n + 1),))
        for n in range(ws.depth)
        for c in ws.periodic_hole(n)
    )
    report.checks['sInside'] = (bad == 0, float(bad))

    delta = ws.obstruction(ws.i_xi)
    hits = 0 if delta is None else int(delta.contains(_probe(ws.xi(1), samples)).sum())
    report.checks['deltaAvoidsXi1'] = (hits == 0, float(hits))

    d = ws.indices.d
    mismatch = 0
    home = ws.home.sample(24)
    for j in range(min(SELF_SIMILAR_DEPTH, max(ws.depth - d, 0)) + 1):
        lhs, rhs = ws.periodic(d + j), ws.self_similar_disc(j)
        pts = np.vstack([_probe(lhs, samples), _probe(rhs, samples), home])
        mismatch += int((lhs.contains(pts) != rhs.contains(pts)).sum())
    report.checks['selfSimilar'] = (mismatch == 0, float(mismatch))

    logger.info('well system checks: %s', 'PASS' if report.passed else 'FAIL')
    return report
