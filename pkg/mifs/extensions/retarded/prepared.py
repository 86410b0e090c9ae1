"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Prepared families: synthesised directly from PreparedParams and checked against the conditions
P0 - P3.  Only period one (pi(q) = 1) is synthesised: the single disc D_q = B(1) carries

    letter 0   the periodic branch, member n of a retarded family with a blended saddle-node core
    letter 1   the transition branch onto Xi_1 (rotation by -45 degrees, then scale, then shift),
               so the diagonal of D_q lands on the x-axis chord of Xi_1
    letter 2+  one obstruction branch per declared Delta disc

beta_k is the axis-aligned rectangle that holds the level tau + k images of the Delta discs.
"""

from dataclasses import dataclass, field, replace
from logging import getLogger
from typing import Any

import numpy as np

from mifs.extensions.retarded.retarded import RetardedFamily, build_retarded
from mifs.mifs_model.exceptions import ConstraintViolation
from mifs.mifs_model.markov_ifs import (
    Branch,
    HomoclinicPoint,
    MarkovIfs,
    PeriodicOrbit,
    RoundDisc,
)
from mifs.mifs_model.planar_maps import Affine, BlendedSaddleNode, CubicSaddleNode, MapChain

logger = getLogger(__name__)

PERIODIC_LETTER = 0
TRANSITION_LETTER = 1

DEFAULT_LAMBDA = 0.9
DEFAULT_LAMBDA_STAR = 0.97
# level-zero beta rectangle: x in [BETA_X_LO, lambda*], |y| <= BETA_HALF_HEIGHT
BETA_X_LO = 0.912
BETA_HALF_HEIGHT = 0.07
DEFAULT_BETA_COUNT = 8

HOMOTHETIC_TOLERANCE = 1e-10
ROUNDNESS_TOLERANCE = 1e-8
AXIS_TOLERANCE = 1e-8


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class AxisRect:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f'degenerate rectangle {self}')

    def margin(self, pts: np.ndarray) -> float:
        """smallest distance from the points to the rectangle's edges, negative if any is outside"""
        inside = np.minimum(
            np.minimum(pts[:, 0] - self.x0, self.x1 - pts[:, 0]),
            np.minimum(pts[:, 1] - self.y0, self.y1 - pts[:, 1]),
        )
        return float(inside.min())

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return (
            (pts[:, 0] >= self.x0)
            & (pts[:, 0] <= self.x1)
            & (pts[:, 1] >= self.y0)
            & (pts[:, 1] <= self.y1)
        )

    def corners(self) -> np.ndarray:
        return np.array(
            [[self.x0, self.y0], [self.x1, self.y0], [self.x1, self.y1], [self.x0, self.y1]]
        )

    def scaled(self, factor: float) -> 'AxisRect':
        return AxisRect(factor * self.x0, factor * self.x1, factor * self.y0, factor * self.y1)

    def distance_to_origin(self) -> float:
        return float(np.hypot(np.clip(0.0, self.x0, self.x1), np.clip(0.0, self.y0, self.y1)))

    def gap(self, other: 'AxisRect') -> float:
        """positive separation of two rectangles along some axis, negative when they overlap"""
        return max(
            other.x0 - self.x1, self.x0 - other.x1, other.y0 - self.y1, self.y0 - other.y1
        )

    def diagonal_gap(self) -> float:
        """distance to the line {x = y}, negative when the rectangle meets it"""
        below = (self.x0 - self.y1) / np.sqrt(2)
        above = (self.y0 - self.x1) / np.sqrt(2)
        return float(max(below, above))

    def to_list(self) -> list[float]:
        return [self.x0, self.x1, self.y0, self.y1]


def beta_levels(lam: float, tau: int, lambda_star: float, count: int) -> tuple[AxisRect, ...]:
    """beta_k = lam^(tau + k) [BETA_X_LO, lambda*] x [-BETA_HALF_HEIGHT, BETA_HALF_HEIGHT]"""
    base = AxisRect(BETA_X_LO, lambda_star, -BETA_HALF_HEIGHT, BETA_HALF_HEIGHT)
    return tuple(base.scaled(lam ** (tau + k)) for k in range(count))


def _disc(data: dict[str, Any]) -> RoundDisc:
    return RoundDisc(np.asarray(data['center']), data['radius'])


@dataclass(frozen=True, eq=False)
class PreparedParams:
    lam: float = DEFAULT_LAMBDA
    lambdas: tuple[float, ...] = (1.0, DEFAULT_LAMBDA)
    lambda_stars: tuple[float, ...] = (DEFAULT_LAMBDA_STAR,)
    tau: int = 1
    tau_prime: int = 1
    beta_rects: tuple[AxisRect, ...] = ()
    xi_disc: RoundDisc = field(default_factory=lambda: RoundDisc(np.array([0.94, 0.0]), 0.025))
    delta_discs: tuple[RoundDisc, ...] = field(
        default_factory=lambda: (RoundDisc(np.array([0.93, 0.055]), 0.012),)
    )
    core_c: float = 0.1
    core_inner: float = 0.45
    core_outer: float = 0.81

    def __post_init__(self):
        object.__setattr__(self, 'lambdas', tuple(self.lambdas))
        object.__setattr__(self, 'lambda_stars', tuple(self.lambda_stars))
        object.__setattr__(self, 'delta_discs', tuple(self.delta_discs))
        if not self.beta_rects:
            rects = beta_levels(self.lam, self.tau, self.lambda_stars[0], DEFAULT_BETA_COUNT)
            object.__setattr__(self, 'beta_rects', rects)
        object.__setattr__(self, 'beta_rects', tuple(self.beta_rects))
        if len(self.lambdas) != 2:
            logger.error('prepared synthesis handles period one only, got lambdas %s', self.lambdas)
            raise ValueError('prepared families are synthesised for pi(q) = 1 only')
        if self.lambdas[0] != 1.0 or abs(self.lambdas[-1] - self.lam) > 1e-15:
            raise ValueError('lambdas must run from 1 down to lambda')
        if np.any(np.diff(self.lambdas) >= 0):
            raise ValueError('lambdas must be strictly decreasing')
        for i, star in enumerate(self.lambda_stars):
            if not self.lambdas[i + 1] < star < self.lambdas[i]:
                raise ValueError(f'lambda*_{i} = {star} is outside ({self.lambdas[i + 1]}, 1)')
        if self.tau < 0 or self.tau_prime < self.tau:
            raise ValueError('need 0 <= tau <= tau_prime')
        if self.core_outer >= self.lam:
            raise ValueError('the core must be homothetic near the circle of radius lambda')

    @property
    def period(self) -> int:
        return len(self.lambdas) - 1

    @property
    def x_lo(self) -> float:
        """left edge of the level-zero beta rectangle"""
        return self.beta_rects[0].x0 / self.lam**self.tau

    def to_dict(self) -> dict[str, Any]:
        return {
            'lambda': self.lam,
            'lambdas': list(self.lambdas),
            'lambdaStars': list(self.lambda_stars),
            'tau': self.tau,
            'tauPrime': self.tau_prime,
            'betaRects': [r.to_list() for r in self.beta_rects],
            'xiDisc': self.xi_disc.to_dict(),
            'deltaDiscs': [d.to_dict() for d in self.delta_discs],
            'core': {'c': self.core_c, 'inner': self.core_inner, 'outer': self.core_outer},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'PreparedParams':
        defaults = cls()
        lam = data.get('lambda', defaults.lam)
        core = data.get('core', {})
        return cls(
            lam=lam,
            lambdas=tuple(data.get('lambdas', (1.0, lam))),
            lambda_stars=tuple(data.get('lambdaStars', defaults.lambda_stars)),
            tau=data.get('tau', defaults.tau),
            tau_prime=data.get('tauPrime', defaults.tau_prime),
            beta_rects=tuple(AxisRect(*r) for r in data.get('betaRects', [])),
            xi_disc=_disc(data['xiDisc']) if 'xiDisc' in data else defaults.xi_disc,
            delta_discs=tuple(_disc(d) for d in data['deltaDiscs'])
            if 'deltaDiscs' in data
            else defaults.delta_discs,
            core_c=core.get('c', defaults.core_c),
            core_inner=core.get('inner', defaults.core_inner),
            core_outer=core.get('outer', defaults.core_outer),
        )


@dataclass(frozen=True, eq=False)
class PreparedFamily:
    params: PreparedParams
    retarded: RetardedFamily
    disc: RoundDisc
    transition: MapChain
    obstructions: tuple[MapChain, ...]

    @property
    def lam(self) -> float:
        return self.params.lam

    @property
    def verification_member(self) -> int:
        """smallest member whose homothetic region holds every beta level"""
        return self.params.tau + len(self.params.beta_rects) + 1

    def member(self, n: int) -> MarkovIfs:
        branches = [
            Branch(0, 0, MapChain((self.retarded.member(n),)), label=PERIODIC_LETTER),
            Branch(0, 0, self.transition, label=TRANSITION_LETTER),
        ]
        for j, chain in enumerate(self.obstructions):
            branches.append(Branch(0, 0, chain, label=TRANSITION_LETTER + 1 + j))
        return MarkovIfs((self.disc,), tuple(branches))

    def orbit(self, ifs: MarkovIfs) -> PeriodicOrbit:
        orbit = ifs.find_periodic((PERIODIC_LETTER,))
        if orbit is None:
            raise ValueError('prepared member has lost its fixed point')
        return orbit

    def homoclinic(self, ifs: MarkovIfs) -> HomoclinicPoint:
        """Q = f_Xi(q), the centre of Xi_1, reached from q in one transition step"""
        orbit = self.orbit(ifs)
        point = self.transition.apply(orbit.point)
        return HomoclinicPoint(point, orbit, (TRANSITION_LETTER,), 1)


@dataclass
class PreparednessReport:
    member: int
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    @property
    def failed(self) -> list[str]:
        return [name for name, (ok, _) in self.checks.items() if not ok]

    def to_dict(self) -> dict[str, Any]:
        return {
            'member': self.member,
            'passed': self.passed,
            'checks': {k: {'passed': ok, 'margin': m} for k, (ok, m) in self.checks.items()},
        }


def build_prepared(params: PreparedParams, k: CubicSaddleNode | None = None) -> PreparedFamily:
    """synthesise the family and insist on P0 - P3"""
    k = k if k is not None else CubicSaddleNode(params.core_c)
    core = BlendedSaddleNode(params.lam, k, params.core_inner, params.core_outer)
    xi = params.xi_disc
    family = PreparedFamily(
        params=params,
        retarded=build_retarded(core, params.lam, 1.0, 1),
        disc=RoundDisc(np.zeros(2), 1.0),
        transition=MapChain((Affine(xi.radius * rotation_matrix(-np.pi / 4), xi.center),)),
        obstructions=tuple(
            MapChain((Affine(d.radius * np.eye(2), d.center),)) for d in params.delta_discs
        ),
    )
    report = verify_prepared(family)
    if not report.passed:
        logger.error('prepared family fails %s', report.failed)
        raise ConstraintViolation(f'prepared conditions failed: {", ".join(report.failed)}')
    logger.info('prepared family built: %d beta levels, P0-P3 PASS', len(params.beta_rects))
    return family


def _pushed(ifs: MarkovIfs, pts: np.ndarray, steps: int) -> np.ndarray:
    return ifs.word_chain((PERIODIC_LETTER,) * steps).apply(pts) if steps else pts


def verify_prepared(family: PreparedFamily, member: int | None = None) -> PreparednessReport:
    params = family.params
    n = family.verification_member if member is None else member
    ifs = family.member(n)
    report = PreparednessReport(n)
    lam, star = params.lam, params.lambda_stars[0]
    edge = family.disc.boundary()

    # P0: D_q = B(1), q = 0 fixed, a valid Markov IFS
    validation = ifs.validate()
    orbit = ifs.find_periodic((PERIODIC_LETTER,))
    round_disc = np.allclose(family.disc.center, 0.0) and family.disc.radius == 1.0
    fixed = orbit is not None and float(np.linalg.norm(orbit.point)) < 1e-12
    margin = min((s for _, _, s in validation.separations), default=1.0)
    report.checks['P0'] = (round_disc and fixed and validation.valid, margin)

    # P1: homothetic region
    ring_r = np.linspace(lam**n, 1.0 - 1e-9, 64)
    ang = np.linspace(0, 2 * np.pi, 96, endpoint=False)
    rr, aa = np.meshgrid(ring_r, ang)
    annulus = np.stack([(rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel()], axis=1)
    f = ifs.branches[PERIODIC_LETTER].map
    err = float(np.max(np.linalg.norm(f.apply(annulus) - lam * annulus, axis=1)))
    report.checks['P1'] = (err < HOMOTHETIC_TOLERANCE, HOMOTHETIC_TOLERANCE - err)

    # P2-1: round strata at the beta levels
    worst = 0.0
    for i in range(len(params.beta_rects)):
        radii = np.linalg.norm(_pushed(ifs, edge, params.tau + i), axis=1)
        worst = max(worst, float(np.var(radii)))
    report.checks['P2-1'] = (worst < ROUNDNESS_TOLERANCE, ROUNDNESS_TOLERANCE - worst)

    # P2-2: level tau + k images of the Delta discs inside beta_k
    worst = np.inf
    for k, rect in enumerate(params.beta_rects):
        for chain in family.obstructions:
            worst = min(worst, rect.margin(_pushed(ifs, chain.apply(edge), params.tau + k)))
    report.checks['P2-2'] = (worst >= 0, float(worst))

    # P2-3: beta rectangles in their fundamental annuli, off the diagonal, pairwise disjoint
    worst = np.inf
    for k, rect in enumerate(params.beta_rects):
        level = params.tau + k
        far = float(np.linalg.norm(rect.corners(), axis=1).max())
        worst = min(worst, rect.distance_to_origin() - lam ** (level + 1), lam**level - far)
        worst = min(worst, rect.diagonal_gap())
        for other in params.beta_rects[k + 1 :]:
            worst = min(worst, rect.gap(other))
    report.checks['P2-3'] = (worst > 0, float(worst))

    # P2-4: the Xi image at the declared level tau' lands in a beta rectangle
    k = params.tau_prime - params.tau
    if 0 <= k < len(params.beta_rects):
        xi_edge = family.transition.apply(edge)
        m = params.beta_rects[k].margin(_pushed(ifs, xi_edge, params.tau_prime))
        report.checks['P2-4'] = (m >= 0, m)
    else:
        report.checks['P2-4'] = (False, -1.0)

    # P3-1: the strong stable manifold is the x-axis on the annuli A'_i
    if orbit is not None:
        wss = ifs.strong_stable_local(orbit, star)
        x = np.abs(wss.points[:, 0])
        sel = np.zeros(len(x), dtype=bool)
        for i in range(params.tau + len(params.beta_rects)):
            sel |= (x >= lam ** (i + 1)) & (x <= star * lam**i)
        dev = float(np.max(np.abs(wss.points[sel, 1]))) if sel.any() else np.inf
        report.checks['P3-1'] = (dev < AXIS_TOLERANCE, AXIS_TOLERANCE - dev)
    else:
        report.checks['P3-1'] = (False, -np.inf)

    # P3-2: Delta discs off the x-axis and off the diagonal
    worst = np.inf
    for d in params.delta_discs:
        cx, cy = d.center
        worst = min(worst, abs(cy) - d.radius, abs(cx - cy) / np.sqrt(2) - d.radius)
    report.checks['P3-2'] = (worst > 0, float(worst))

    # P3-3: Xi_1 centred on the x-axis inside A'_0, diagonal chord onto its x-axis chord
    xi = params.xi_disc
    reach = float(np.linalg.norm(xi.center))
    chord = np.linspace(-1.0, 1.0, 65)[:, None] * np.array([1.0, 1.0]) / np.sqrt(2)
    tilt = float(np.max(np.abs(family.transition.apply(chord)[:, 1])))
    worst = min(
        AXIS_TOLERANCE - abs(float(xi.center[1])),
        reach - xi.radius - lam,
        star - reach - xi.radius,
        AXIS_TOLERANCE - tilt,
    )
    report.checks['P3-3'] = (worst > 0, float(worst))

    logger.info(
        'prepared conditions on member %d: %s',
        n,
        ', '.join(f'{k}={"PASS" if ok else "FAIL"}' for k, (ok, _) in report.checks.items()),
    )
    return report


def default_prepared(beta_count: int = DEFAULT_BETA_COUNT) -> PreparedFamily:
    """the bundled prepared family: lambda 0.9, Xi_1 = B((0.94, 0), 0.025), one Delta disc"""
    params = PreparedParams()
    if beta_count != len(params.beta_rects):
        rects = beta_levels(params.lam, params.tau, params.lambda_stars[0], beta_count)
        params = replace(params, beta_rects=rects)
    return build_prepared(params)
