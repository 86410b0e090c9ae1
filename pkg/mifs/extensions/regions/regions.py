"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Relatively repelling regions of a Markov IFS.

A compact R in the union of discs is relatively repelling when F^-1(R & F(D)) lies in the
interior of R, taken in the topology of the disc union: the boundary circles of the discs are not
boundary points of R.  Regions here are either explicit unions of pieces (discs, annuli, tubes
around curves) or implicit ones built from another region by the inverse map.

Checks can be run in the n-refinement without building it: its discs are F^n(D), so a point is
in its domain when n inverse steps are defined, and its inverse map is F^-1 on F^(n+1)(D).
Interior margins are measured by rings of probe points that ignore probes outside the domain.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from logging import getLogger
from typing import Any, ClassVar, Sequence

import numpy as np

from mifs.mifs_model.curves import CurveSample, nearest_segment_distances
from mifs.mifs_model.exceptions import ConstraintViolation, NumericFailure
from mifs.mifs_model.markov_ifs import ImageDisc, MarkovIfs, RoundDisc
from mifs.mifs_model.planar_maps import as_points

logger = getLogger(__name__)

DEFAULT_GRID = 64
PROBES = 32
PROBE_ROUNDS = 22
# concentric probe rings at these shares of the tested radius
RING_SHARES = (0.25, 0.5, 1.0)


# ------------------------------------------------------------------------------ domains


def domain_alive(ifs: MarkovIfs, pts: np.ndarray, steps: int) -> np.ndarray:
    """points of F^steps(D): inside a disc with steps inverse steps defined"""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    alive = np.zeros(len(pts), dtype=bool)
    for d in ifs.discs:
        alive |= d.contains(pts)
    current = pts.copy()
    for _ in range(steps):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break
        lab, pre = ifs.inverse_step_many(current[idx])
        alive[idx[lab < 0]] = False
        current[idx[lab >= 0]] = pre[lab >= 0]
    return alive


def domain_bounds(ifs: MarkovIfs) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = np.full(2, np.inf), np.full(2, -np.inf)
    for d in ifs.discs:
        if isinstance(d, RoundDisc):
            lo = np.minimum(lo, d.center - d.radius)
            hi = np.maximum(hi, d.center + d.radius)
        else:
            b = d.boundary()
            lo, hi = np.minimum(lo, b.min(axis=0)), np.maximum(hi, b.max(axis=0))
    return lo, hi


def lattice(lo: np.ndarray, hi: np.ndarray, grid: int) -> np.ndarray:
    xx, yy = np.meshgrid(np.linspace(lo[0], hi[0], grid), np.linspace(lo[1], hi[1], grid))
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


# ------------------------------------------------------------------------------- pieces


@dataclass(frozen=True, eq=False)
class DiscPiece:
    center: np.ndarray
    radius: float
    disc_index: int = 0
    kind: ClassVar[str] = 'disc'

    def __post_init__(self):
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float).reshape(2))
        if self.radius <= 0:
            raise ValueError('disc piece radius must be positive')

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.radius, self.center + self.radius

    def sample(self, grid: int) -> np.ndarray:
        pts = lattice(*self.bounds(), grid)
        return pts[self.contains(pts)]

    def outline(self, count: int = 256) -> list[np.ndarray]:
        return [RoundDisc(self.center, self.radius).boundary(count, shrink=0.0)]

    def to_dict(self) -> dict[str, Any]:
        return {
            'kind': self.kind,
            'center': self.center.tolist(),
            'radius': self.radius,
            'disc': self.disc_index,
        }


@dataclass(frozen=True, eq=False)
class AnnulusPiece:
    center: np.ndarray
    inner: float
    outer: float
    disc_index: int = 0
    kind: ClassVar[str] = 'annulus'

    def __post_init__(self):
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float).reshape(2))
        if not 0 <= self.inner < self.outer:
            raise ValueError('annulus needs 0 <= inner < outer')

    def contains(self, pts: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(pts - self.center, axis=1)
        return (r >= self.inner) & (r <= self.outer)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.outer, self.center + self.outer

    def sample(self, grid: int) -> np.ndarray:
        pts = lattice(*self.bounds(), grid)
        return pts[self.contains(pts)]

    def outline(self, count: int = 256) -> list[np.ndarray]:
        out = [RoundDisc(self.center, self.outer).boundary(count, shrink=0.0)]
        if self.inner > 0:
            out.append(RoundDisc(self.center, self.inner).boundary(count, shrink=0.0))
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            'kind': self.kind,
            'center': self.center.tolist(),
            'inner': self.inner,
            'outer': self.outer,
            'disc': self.disc_index,
        }


@dataclass(frozen=True, eq=False)
class TubePiece:
    """the closed half_width neighbourhood of a sampled curve"""

    curve: CurveSample
    half_width: float
    disc_index: int = 0
    kind: ClassVar[str] = 'tube'

    def __post_init__(self):
        if len(self.curve) < 2:
            raise ValueError('a tube needs a curve with at least 2 samples')
        if self.half_width <= 0:
            raise ValueError('tube half width must be positive')

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return nearest_segment_distances(pts, self.curve.points) <= self.half_width

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        pts = self.curve.points
        return pts.min(axis=0) - self.half_width, pts.max(axis=0) + self.half_width

    def _frame(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        t = np.linspace(0.0, 1.0, count)
        centre = self.curve.evaluate(t)
        tan = CurveSample(centre).tangents
        return centre, np.stack([-tan[:, 1], tan[:, 0]], axis=1)

    def sample(self, grid: int, shrink: float = 1e-9) -> np.ndarray:
        centre, normal = self._frame(4 * grid)
        reach = self.half_width * (1 - shrink)
        across = np.linspace(-reach, reach, max(3, grid // 4 + 1))
        pts = centre[:, None, :] + across[None, :, None] * normal[:, None, :]
        return pts.reshape(-1, 2)

    def outline(self, count: int = 256) -> list[np.ndarray]:
        centre, normal = self._frame(count)
        return [centre + self.half_width * normal, centre - self.half_width * normal]

    def to_dict(self) -> dict[str, Any]:
        return {
            'kind': self.kind,
            'curve': self.curve.to_dict(),
            'halfWidth': self.half_width,
            'disc': self.disc_index,
        }


Piece = DiscPiece | AnnulusPiece | TubePiece


def piece_from_dict(data: dict[str, Any]) -> Piece:
    match data:
        case {'kind': 'disc', 'center': c, 'radius': r}:
            return DiscPiece(np.asarray(c), r, data.get('disc', 0))
        case {'kind': 'annulus', 'center': c, 'inner': a, 'outer': b}:
            return AnnulusPiece(np.asarray(c), a, b, data.get('disc', 0))
        case {'kind': 'tube', 'curve': curve, 'halfWidth': w}:
            return TubePiece(CurveSample.from_dict(curve), w, data.get('disc', 0))
        case _:
            raise ValueError(f'unknown region piece {data.get("kind")!r}')


# ------------------------------------------------------------------------------ regions


class Region(ABC):
    """a compact subset of the disc union with decidable membership"""

    kind: ClassVar[str] = ''

    @abstractmethod
    def contains(self, p) -> np.ndarray: ...

    @abstractmethod
    def bounds(self) -> tuple[np.ndarray, np.ndarray] | None:
        """a bounding box, None for an empty region"""

    def sample(self, grid: int = DEFAULT_GRID) -> np.ndarray:
        box = self.bounds()
        if box is None:
            return np.zeros((0, 2))
        pts = lattice(*box, grid)
        return pts[self.contains(pts)]

    @abstractmethod
    def to_dict(self) -> dict[str, Any]: ...


@dataclass(frozen=True, eq=False)
class PieceRegion(Region):
    pieces: tuple[Piece, ...] = ()
    kind: ClassVar[str] = 'pieces'

    def __post_init__(self):
        object.__setattr__(self, 'pieces', tuple(self.pieces))

    @property
    def is_empty(self) -> bool:
        return not self.pieces

    def contains(self, p) -> np.ndarray:
        pts, _ = as_points(p)
        out = np.zeros(len(pts), dtype=bool)
        for piece in self.pieces:
            out |= piece.contains(pts)
        return out

    def component_of(self, p) -> np.ndarray:
        """index of the first piece holding each point, -1 outside"""
        pts, _ = as_points(p)
        out = np.full(len(pts), -1, dtype=int)
        for k, piece in reversed(list(enumerate(self.pieces))):
            out[piece.contains(pts)] = k
        return out

    def bounds(self):
        if not self.pieces:
            return None
        boxes = [piece.bounds() for piece in self.pieces]
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)

    def sample(self, grid: int = DEFAULT_GRID) -> np.ndarray:
        if not self.pieces:
            return np.zeros((0, 2))
        return np.concatenate([piece.sample(grid) for piece in self.pieces])

    def to_dict(self) -> dict[str, Any]:
        return {'kind': self.kind, 'pieces': [piece.to_dict() for piece in self.pieces]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'PieceRegion':
        return cls(tuple(piece_from_dict(p) for p in data.get('pieces', [])))


@dataclass(frozen=True, eq=False)
class PreimageRegion(Region):
    """R_n = F^-n(R & F^n(D))"""

    ifs: MarkovIfs = field(repr=False)
    base: Region
    steps: int
    kind: ClassVar[str] = 'preimage'

    def contains(self, p) -> np.ndarray:
        pts, _ = as_points(p)
        hit = np.zeros(len(pts), dtype=bool)
        for w in self.ifs.admissible_words(self.steps):
            start = self.ifs.discs[self.ifs.branches[w[0]].dom]
            inside = np.flatnonzero(start.contains(pts))
            if len(inside):
                image = self.ifs.word_chain(w).apply(pts[inside])
                hit[inside[self.base.contains(image)]] = True
        return hit

    def bounds(self):
        return domain_bounds(self.ifs)

    def sample(self, grid: int = DEFAULT_GRID) -> np.ndarray:
        pts = self.base.sample(grid)
        alive = domain_alive(self.ifs, pts, 0)
        current = pts[alive]
        for _ in range(self.steps):
            lab, pre = self.ifs.inverse_step_many(current)
            current = pre[lab >= 0]
        return current

    def to_dict(self) -> dict[str, Any]:
        return {'kind': self.kind, 'steps': self.steps, 'base': self.base.to_dict()}


@dataclass(frozen=True, eq=False)
class LiftedRegion(Region):
    """R & closure(D - F^n(D)) for a region R of the n-refinement"""

    ifs: MarkovIfs = field(repr=False)
    refined: Region
    steps: int
    kind: ClassVar[str] = 'lifted'

    def contains(self, p) -> np.ndarray:
        pts, _ = as_points(p)
        inside = domain_alive(self.ifs, pts, 0)
        outside_image = inside & ~domain_alive(self.ifs, pts, self.steps)
        return inside & (self.refined.contains(pts) | outside_image)

    def bounds(self):
        return domain_bounds(self.ifs)

    def sample(self, grid: int = DEFAULT_GRID) -> np.ndarray:
        pts = lattice(*self.bounds(), grid)
        return np.concatenate([pts[self.contains(pts)], self.refined.sample(grid)])

    def to_dict(self) -> dict[str, Any]:
        return {'kind': self.kind, 'steps': self.steps, 'refined': self.refined.to_dict()}


# ------------------------------------------------------------------------------ margins


def relative_margin(
    ifs: MarkovIfs,
    region: Region,
    pts: np.ndarray,
    level: int = 0,
    probes: int = PROBES,
    rounds: int = PROBE_ROUNDS,
) -> np.ndarray:
    """
    the radius of the largest probed ball around each point that stays on its side of the region
    boundary, ignoring probes outside the domain of the level-refinement; positive inside the
    region, negative outside, infinite when no boundary point of the domain is met
    """
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros(0)
    inside = region.contains(pts)
    lo_box, hi_box = domain_bounds(ifs)
    reach = float(np.linalg.norm(hi_box - lo_box))
    ang = np.linspace(0.0, 2 * np.pi, probes, endpoint=False)
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)

    def clear(radius: np.ndarray) -> np.ndarray:
        ok = np.ones(len(pts), dtype=bool)
        for share in RING_SHARES:
            probe = pts[:, None, :] + (share * radius)[:, None, None] * ring[None, :, :]
            probe = probe.reshape(-1, 2)
            member = region.contains(probe).reshape(len(pts), probes)
            dom = domain_alive(ifs, probe, level).reshape(len(pts), probes)
            ok &= np.all((member == inside[:, None]) | ~dom, axis=1)
        return ok

    unbounded = clear(np.full(len(pts), reach))
    lo, hi = np.zeros(len(pts)), np.full(len(pts), reach)
    for _ in range(rounds):
        mid = 0.5 * (lo + hi)
        ok = clear(mid)
        lo, hi = np.where(ok, mid, lo), np.where(ok, hi, mid)
    margin = np.where(unbounded, np.inf, lo)
    return np.where(inside, margin, -margin)


# ------------------------------------------------------------------------------- checks


@dataclass
class RegionReport:
    level: int = 0
    samples: int = 0
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    @property
    def failed(self) -> list[str]:
        return [name for name, (ok, _) in self.checks.items() if not ok]

    @property
    def margin(self) -> float:
        return self.checks.get('inverseInside', (True, np.inf))[1]

    def to_dict(self) -> dict[str, Any]:
        return {
            'level': self.level,
            'samples': self.samples,
            'passed': self.passed,
            'checks': {k: {'passed': ok, 'value': v} for k, (ok, v) in self.checks.items()},
        }


def check_relatively_repelling(
    ifs: MarkovIfs, region: Region, grid: int = DEFAULT_GRID, level: int = 0
) -> RegionReport:
    """
    sampled check of F^-1(R & F(D)) in the interior of R, in the level-refinement of ifs
    :return: the report; its margin is the least interior margin of the preimages
    """
    report = RegionReport(level)
    pts = region.sample(grid)
    pts = pts[domain_alive(ifs, pts, level + 1)] if len(pts) else pts
    if len(pts) == 0:
        report.checks['inverseInside'] = (True, np.inf)
        logger.info('region misses F(D) at level %d, relatively repelling by default', level)
        return report
    _, pre = ifs.inverse_step_many(pts)
    margin = relative_margin(ifs, region, pre, level)
    worst = float(np.min(margin))
    report.samples = len(pre)
    report.checks['inverseInside'] = (worst > 0, worst)
    logger.info(
        'relatively repelling check at level %d: %s over %d preimages, least margin %.4g',
        level,
        'PASS' if worst > 0 else 'FAIL',
        len(pre),
        worst,
    )
    return report


def repelling_iterate(
    ifs: MarkovIfs, region: Region, n: int, grid: int = DEFAULT_GRID
) -> Region:
    """
    R_n = F^-n(R & F^n(D)), itself relatively repelling
    :raises ConstraintViolation: R is not relatively repelling
    :raises NumericFailure: the sampled check of R_n fails
    """
    if n < 0:
        raise ValueError('iterate order must be non-negative')
    if n == 0:
        return region
    base = check_relatively_repelling(ifs, region, grid)
    if not base.passed:
        logger.error('region is not relatively repelling, margin %.4g', base.margin)
        raise ConstraintViolation(f'region is not relatively repelling (margin {base.margin:.4g})')
    iterate = PreimageRegion(ifs, region, n)
    report = check_relatively_repelling(ifs, iterate, grid)
    if not report.passed:
        logger.error('iterate %d of a relatively repelling region fails its check', n)
        raise NumericFailure(f'R_{n} fails the relatively repelling check')
    return iterate


def lift_from_refinement(
    ifs: MarkovIfs, refined: Region, n: int, grid: int = DEFAULT_GRID
) -> Region:
    """
    R & closure(D - F^n(D)) for a relatively repelling region R of the n-refinement
    :raises ConstraintViolation: R is not relatively repelling in the n-refinement
    :raises NumericFailure: the sampled check of the lifted region fails
    """
    if n < 0:
        raise ValueError('refinement order must be non-negative')
    if n == 0:
        return refined
    base = check_relatively_repelling(ifs, refined, grid, level=n)
    if not base.passed:
        logger.error('region is not relatively repelling in the %d-refinement', n)
        raise ConstraintViolation(f'region is not relatively repelling at level {n}')
    lifted = LiftedRegion(ifs, refined, n)
    report = check_relatively_repelling(ifs, lifted, grid)
    if not report.passed:
        logger.error('lift of a relatively repelling region fails its check')
        raise NumericFailure('the lifted region fails the relatively repelling check')
    return lifted


# --------------------------------------------------------------------------- attracting


@dataclass
class AttractingReport:
    level: int = 0
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)
    # (component, letter) -> component of the image, for images inside A
    edges: dict[tuple[int, int], int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    @property
    def failed(self) -> list[str]:
        return [name for name, (ok, _) in self.checks.items() if not ok]

    def to_dict(self) -> dict[str, Any]:
        return {
            'level': self.level,
            'passed': self.passed,
            'checks': {k: {'passed': ok, 'value': v} for k, (ok, v) in self.checks.items()},
            'edges': [[c, j, t] for (c, j), t in sorted(self.edges.items())],
        }


def check_attracting(
    ifs: MarkovIfs,
    attracting: PieceRegion,
    repelling: Region,
    grid: int = DEFAULT_GRID,
    level: int = 0,
) -> AttractingReport:
    """
    every branch image of every component of A either lies in the interior of A or misses R,
    and A lies in the interior of R
    """
    report = AttractingReport(level)
    inside_r = np.inf
    for k, piece in enumerate(attracting.pieces):
        pts = piece.sample(grid)
        pts = pts[domain_alive(ifs, pts, level)]
        if len(pts) == 0:
            continue
        inside_r = min(inside_r, float(np.min(relative_margin(ifs, repelling, pts, level))))
        for j, branch in enumerate(ifs.branches):
            dom = ifs.discs[branch.dom].contains(pts)
            if not dom.any():
                continue
            image = branch.map.apply(pts[dom])
            margin = float(np.min(relative_margin(ifs, attracting, image, level)))
            into = margin > 0
            misses = not repelling.contains(image).any()
            report.checks[f'image[{k},{j}]'] = (into or misses, margin)
            if into:
                comps = attracting.component_of(image)
                report.edges[(k, j)] = int(np.bincount(comps[comps >= 0]).argmax())
    report.checks['insideRepelling'] = (inside_r > 0, inside_r)
    logger.info(
        'attracting region check at level %d: %s, %d branch images inside A',
        level,
        'PASS' if report.passed else f'FAIL ({", ".join(report.failed)})',
        len(report.edges),
    )
    return report


@dataclass(frozen=True)
class ContractionReport:
    k1: int | None
    norm: float
    words: int

    @property
    def passed(self) -> bool:
        return self.k1 is not None

    def to_dict(self) -> dict[str, Any]:
        return {'k1': self.k1, 'norm': self.norm, 'words': self.words, 'passed': self.passed}


def uniform_contraction(
    ifs: MarkovIfs,
    attracting: PieceRegion,
    edges: dict[tuple[int, int], int],
    max_length: int,
    grid: int = DEFAULT_GRID // 2,
) -> ContractionReport:
    """
    the least k1 <= max_length with ||DF_w|| < 1 at the samples of A for every word of length
    k1 along the branches that map A into itself
    """
    samples = [piece.sample(grid) for piece in attracting.pieces]
    norm, count = np.inf, 0
    for k in range(1, max_length + 1):
        norm, count = 0.0, 0
        paths = [((c,), ()) for c in range(len(samples))]
        for _ in range(k):
            paths = [
                (comps + (edges[(comps[-1], j)],), word + (j,))
                for comps, word in paths
                for j in range(len(ifs.branches))
                if (comps[-1], j) in edges
            ]
        for comps, word in paths:
            pts = samples[comps[0]]
            if len(pts) == 0:
                continue
            jac = ifs.word_chain(word).jacobian(pts)
            norm = max(norm, float(np.max(np.linalg.norm(jac, ord=2, axis=(1, 2)))))
            count += 1
        if count and norm < 1.0:
            logger.info('restricted IFS contracts after %d steps, norm %.4g', k, norm)
            return ContractionReport(k, norm, count)
    logger.warning('no contraction of the restricted IFS within %d steps', max_length)
    return ContractionReport(None, norm, count)


def region_from_curves(
    curves: dict[Any, CurveSample], half_width: float, disc_indices: Sequence[int] | None = None
) -> PieceRegion:
    """tubes of one half width around curves"""
    pieces = []
    for k, curve in enumerate(curves.values()):
        index = disc_indices[k] if disc_indices is not None else 0
        pieces.append(TubePiece(curve, half_width, index))
    return PieceRegion(tuple(pieces))


def family_disc(ifs: MarkovIfs, word: tuple[int, ...], curve: CurveSample) -> RoundDisc | ImageDisc:
    """the refined disc F_w(D) that carries a family curve"""
    if len(word) == 0:
        index = ifs.disc_index_of(curve.points[len(curve) // 2])
        if index is None:
            raise ValueError('family curve lies outside every disc')
        return ifs.discs[index]
    return ImageDisc(ifs.branches[word[0]].dom, tuple(word), ifs)
