"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Retarded families and the saddle-node families built from a flexible periodic orbit.

A retarded family is indexed by m >= m0.  Member m is the homothety H_lam on the annulus
B(R) \\ B(lam^m R), the common outer dynamics outside B(R), and the core rescaled into B(lam^m R):
    member(m) = H^(m - m0) o core o H^-(m - m0)     on B(lam^m R)
so the homothetic region grows with m while the core dynamics shrinks toward the origin.
"""

from dataclasses import dataclass, field
from logging import getLogger
from typing import Any, ClassVar, Sequence

import numpy as np

from mifs.mifs_model.cocycles import FlexiblePath, realize_deformation, validate_flexible
from mifs.mifs_model.exceptions import GluingMismatch
from mifs.mifs_model.markov_ifs import (
    Branch,
    HomoclinicPoint,
    MarkovIfs,
    PeriodicOrbit,
    RoundDisc,
    Word,
)
from mifs.mifs_model.planar_maps import (
    EXTRA_PRIMITIVE_DECODERS,
    Affine,
    BlendedSaddleNode,
    CubicSaddleNode,
    Homothety,
    MapChain,
    Primitive,
    c1_distance,
)

logger = getLogger(__name__)

# width (relative to the core radius) of the ring where the core must equal H_lam
GLUING_BAND = 0.05
GLUING_TOLERANCE = 1e-12

# saddle-node chart: the base is made homothetic on B(q, support * exp(-HOMOTHETIC_SPAN)) and the
# core blends the saddle node into H_lam over log(CORE_OUTER / core inner) = CORE_SPAN
HOMOTHETIC_SPAN = 6.0
CORE_OUTER = 0.9
CORE_SPAN = 8.0
DEFAULT_SADDLE_C = 0.1


def _polar_samples(radius: float, rings: int = 24, spokes: int = 48) -> np.ndarray:
    """points on concentric rings strictly inside B(radius), origin excluded"""
    r = radius * np.arange(1, rings + 1) / (rings + 1)
    ang = np.linspace(0.0, 2 * np.pi, spokes, endpoint=False)
    rr, aa = np.meshgrid(r, ang)
    return np.stack([(rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel()], axis=1)


@dataclass(frozen=True, eq=False)
class RetardedFamily:
    core: MapChain
    lam: float
    radius: float
    m0: int
    outer_part: MapChain | None = None

    def __post_init__(self):
        if isinstance(self.core, Primitive):
            object.__setattr__(self, 'core', MapChain((self.core,)))
        if not 0 < self.lam < 1:
            raise ValueError(f'lambda must lie in (0, 1), got {self.lam}')
        if self.radius <= 0 or self.m0 < 0:
            raise ValueError('need a positive radius and m0 >= 0')
        origin = self.core.apply(np.zeros(2))
        if np.linalg.norm(origin) > GLUING_TOLERANCE * self.radius:
            logger.error('retarded core moves the origin to %s', origin)
            raise ValueError('the core must fix the origin')
        self._check_gluing()

    @property
    def core_radius(self) -> float:
        return self.lam**self.m0 * self.radius

    def _check_gluing(self):
        rc = self.core_radius
        radii = rc * np.linspace(1 - GLUING_BAND, 1 - 1e-9, 8)
        ang = np.linspace(0.0, 2 * np.pi, 128, endpoint=False)
        rr, aa = np.meshgrid(radii, ang)
        ring = np.stack([(rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel()], axis=1)
        err = float(np.max(np.linalg.norm(self.core.apply(ring) - self.lam * ring, axis=1)))
        if err > GLUING_TOLERANCE * rc:
            logger.error(
                'core differs from H_lam by %.3g near |p| = %.6g; members would not glue', err, rc
            )
            raise GluingMismatch(
                f'core is not the homothety {self.lam} near its outer boundary (error {err:.3g})'
            )

    def member(self, m: int) -> 'RetardedMember':
        return RetardedMember(self, m)

    def conjugation_defect(self, m: int) -> float:
        """sup |member(m+1)(p) - H o member(m) o H^-1 (p)| over samples of B(lam^(m+1) R)"""
        pts = _polar_samples(self.lam ** (m + 1) * self.radius)
        lhs = self.member(m + 1).apply(pts)
        rhs = self.lam * self.member(m).apply(pts / self.lam)
        return float(np.max(np.linalg.norm(lhs - rhs, axis=1)))

    def fixed_point_margin(self, m: int) -> float:
        """min |member(p) - p| over samples of B(R) away from the origin (> 0: origin is alone)"""
        pts = np.concatenate(
            [_polar_samples(self.radius), _polar_samples(self.lam**m * self.radius)]
        )
        return float(np.min(np.linalg.norm(self.member(m).apply(pts) - pts, axis=1)))

    def to_dict(self) -> dict[str, Any]:
        return {
            'core': self.core.to_dict(),
            'lambda': self.lam,
            'radius': self.radius,
            'm0': self.m0,
            'outerPart': None if self.outer_part is None else self.outer_part.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'RetardedFamily':
        outer = data.get('outerPart')
        return cls(
            MapChain.from_dict(data['core']),
            data['lambda'],
            data['radius'],
            data['m0'],
            None if outer is None else MapChain.from_dict(outer),
        )


@dataclass(frozen=True, eq=False)
class RetardedMember(Primitive):
    family: RetardedFamily
    m: int
    kind: ClassVar[str] = 'retarded_member'

    def __post_init__(self):
        if self.m < self.family.m0:
            raise ValueError(f'member index {self.m} is below m0 = {self.family.m0}')

    @property
    def scale(self) -> float:
        return self.family.lam ** (self.m - self.family.m0)

    @property
    def core_radius(self) -> float:
        """radius of B(lam^m R), where the rescaled core acts"""
        return self.family.lam**self.m * self.family.radius

    def _apply(self, pts):
        fam = self.family
        r = np.linalg.norm(pts, axis=1)
        out = fam.lam * pts
        inner = r < self.core_radius
        if inner.any():
            out[inner] = self.scale * fam.core.apply(pts[inner] / self.scale)
        outer = r >= fam.radius
        if fam.outer_part is not None and outer.any():
            out[outer] = fam.outer_part.apply(pts[outer])
        return out

    def _apply_inverse(self, pts):
        fam = self.family
        r = np.linalg.norm(pts, axis=1)
        out = pts / fam.lam
        inner = r < fam.lam * self.core_radius
        if inner.any():
            out[inner] = self.scale * fam.core.apply_inverse(pts[inner] / self.scale)
        outer = r >= fam.lam * fam.radius
        if fam.outer_part is not None and outer.any():
            out[outer] = fam.outer_part.apply_inverse(pts[outer])
        return out

    def _jacobian(self, pts):
        fam = self.family
        r = np.linalg.norm(pts, axis=1)
        out = np.broadcast_to(fam.lam * np.eye(2), (len(pts), 2, 2)).copy()
        inner = r < self.core_radius
        if inner.any():
            out[inner] = fam.core.jacobian(pts[inner] / self.scale)
        outer = r >= fam.radius
        if fam.outer_part is not None and outer.any():
            out[outer] = fam.outer_part.jacobian(pts[outer])
        return out

    def to_dict(self):
        return {'kind': self.kind, 'family': self.family.to_dict(), 'm': self.m}


def _member_from_dict(data: dict[str, Any]) -> RetardedMember:
    return RetardedMember(RetardedFamily.from_dict(data['family']), data['m'])


EXTRA_PRIMITIVE_DECODERS[RetardedMember.kind] = _member_from_dict


def build_retarded(
    core: MapChain | Primitive,
    lam: float,
    radius: float,
    m0: int,
    outer_part: MapChain | None = None,
) -> RetardedFamily:
    family = RetardedFamily(core, lam, radius, m0, outer_part)
    logger.info(
        'retarded family: lambda=%s, R=%s, m0=%d, core of %d primitive(s)',
        lam,
        radius,
        m0,
        len(family.core),
    )
    return family


# --------------------------------------------------------------------------- saddle-node families


@dataclass
class SaddleNodeMemberReport:
    m: int
    eigen: tuple
    first_return_defect: float
    c1: float
    c0: float
    epsilon: float
    homoclinic: dict[str, tuple[bool, float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        unit = max(abs(complex(e)) for e in self.eigen)
        return (
            abs(unit - 1.0) < 1e-8
            and self.first_return_defect < 1e-9
            and self.c1 <= self.epsilon
            and all(ok for ok, _ in self.homoclinic.values())
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            'm': self.m,
            'passed': self.passed,
            'eigen': [complex(e).real for e in self.eigen],
            'firstReturnDefect': self.first_return_defect,
            'c1': self.c1,
            'c0': self.c0,
            'epsilon': self.epsilon,
            'homoclinic': {
                k: {'passed': ok, 'margin': v} for k, (ok, v) in self.homoclinic.items()
            },
        }


@dataclass(frozen=True, eq=False)
class SaddleNodeFamily:
    """
    Perturbations F_m of an IFS whose first-return map at the orbit point q reads, in the chart
    u -> q + chart_radius * frame @ u, as member m of a saddle-node retarded family.
    """

    source: MarkovIfs
    base: MarkovIfs  # source realised at t = -1: first return is H_lam near q
    orbit_word: Word
    point: np.ndarray
    frame: np.ndarray
    chart_radius: float
    support_radius: float
    retarded: RetardedFamily
    m_range: tuple[int, ...]
    epsilon: float

    @property
    def lam(self) -> float:
        return self.retarded.lam

    def chart(self) -> Affine:
        return Affine(self.chart_radius * self.frame, self.point)

    def chart_inverse(self) -> Affine:
        inv = np.linalg.inv(self.chart_radius * self.frame)
        return Affine(inv, -inv @ self.point)

    def correction(self, m: int) -> MapChain:
        """psi_m: identity outside B(q, chart_radius * lam^m), first return o psi_m = member m"""
        return MapChain(
            (
                self.chart_inverse(),
                self.retarded.member(m),
                Homothety(1.0 / self.lam, np.zeros(2)),
                self.chart(),
            )
        )

    def member(self, m: int) -> MarkovIfs:
        letter = self.orbit_word[0]
        branches = list(self.base.branches)
        old = branches[letter]
        chain = MapChain(self.correction(m).primitives + old.map.primitives)
        branches[letter] = Branch(old.dom, old.target, chain, old.label)
        return MarkovIfs(self.base.discs, tuple(branches))

    def homothetic_annulus(self, m: int) -> tuple[float, float]:
        """inner and outer radius (about q) of the region where the first return is H_lam"""
        return self.chart_radius * self.lam**m * self.retarded.radius, self.chart_radius

    def first_return_defect(self, m: int) -> float:
        """sup over chart samples of |chart^-1 o F_m^pi o chart - member(m)|"""
        ifs = self.member(m)
        u = _polar_samples(0.95)
        p = self.chart().apply(u)
        back = self.chart_inverse().apply(ifs.word_chain(self.orbit_word).apply(p))
        return float(np.max(np.linalg.norm(back - self.retarded.member(m).apply(u), axis=1)))

    def certify(
        self, m: int, homoclinic: HomoclinicPoint | None = None, grid: int = 32
    ) -> SaddleNodeMemberReport:
        ifs = self.member(m)
        orbit = ifs.find_periodic(self.orbit_word)
        if orbit is None:
            logger.error('member %d lost its periodic orbit %s', m, self.orbit_word)
            raise ValueError(f'member {m} has no periodic point with word {self.orbit_word}')
        c1 = c0 = 0.0
        core_radius = self.homothetic_annulus(m)[0]
        start = self.source.find_periodic(self.orbit_word)
        for letter, p in zip(self.orbit_word, start.orbit_points):
            new, old = ifs.branches[letter].map, self.source.branches[letter].map
            for radius in (self.support_radius, core_radius):
                d = c1_distance(new, old, p, radius, grid)
                c1, c0 = max(c1, d.total), max(c0, d.c0)
        report = SaddleNodeMemberReport(
            m, orbit.eigen, self.first_return_defect(m), c1, c0, self.epsilon
        )
        if homoclinic is not None:
            moved = HomoclinicPoint(
                homoclinic.point, orbit, homoclinic.word, homoclinic.transit_steps
            )
            report.homoclinic = ifs.verify_homoclinic(moved).checks
        logger.info(
            'saddle-node member %d: %s (eigen %s, C1 %.4g, C0 %.3g)',
            m,
            'PASS' if report.passed else 'FAIL',
            orbit.eigen,
            c1,
            c0,
        )
        return report


def build_saddle_node_family(
    ifs: MarkovIfs,
    orbit: PeriodicOrbit,
    path: FlexiblePath,
    m_range: Sequence[int],
    support_radius: float,
    obstructions: Sequence[RoundDisc] = (),
    saddle_c: float = DEFAULT_SADDLE_C,
) -> SaddleNodeFamily:
    """
    Realise the path at t = -1 (first return H_lam near q), then put the saddle-node core
    (lam x, y - c y^3) in the eigenframe of the t = 1 product, rescaled by lam^m for member m.
    """
    flex = validate_flexible(path)
    if not flex.passed:
        failed = [k for k, (ok, _) in flex.checks.items() if not ok]
        logger.error('flexible path fails %s', failed)
        raise ValueError(f'flexible path fails {failed}')
    if not ifs.is_separated(orbit):
        raise ValueError('saddle-node families need a separated orbit')
    cert = ifs.large_stable_certificate(orbit)
    if not cert.passed:
        logger.error('orbit %s has no large stable certificate', orbit.word)
        raise ValueError(f'orbit {orbit.word} fails the large stable certificate')
    if any(m < 0 for m in m_range):
        raise ValueError('member indices must be non-negative')

    lam = float(path.at(-1.0).product()[0, 0])
    vals, vecs = np.linalg.eig(path.at(1.0).product())
    if np.any(np.abs(vals.imag) > 1e-12):
        raise ValueError('the t = 1 product must have real eigenvalues')
    order = np.argsort(np.abs(vals.real))
    strong, central = vals.real[order]
    if abs(strong - lam) > 1e-8 or abs(central - 1.0) > 1e-8:
        logger.error('t = 1 eigenvalues (%s, %s) do not match (lambda=%s, 1)', strong, central, lam)
        raise ValueError(f'the t = 1 product must have eigenvalues ({lam}, 1)')
    frame = vecs.real[:, order]
    frame = frame / np.linalg.norm(frame, axis=0)

    chart_radius = support_radius * np.exp(-HOMOTHETIC_SPAN)
    base = realize_deformation(
        ifs, orbit, path, -1.0, support_radius, obstructions, inner_radius=chart_radius
    )
    probe = RoundDisc(orbit.point, chart_radius).sample(16)
    ret = base.word_chain(orbit.word).apply(probe)
    err = float(np.max(np.linalg.norm(ret - (orbit.point + lam * (probe - orbit.point)), axis=1)))
    if err > 1e-9 * chart_radius:
        logger.error('first return is not homothetic near %s (error %.3g)', orbit.point, err)
        raise GluingMismatch('first-return map is not a homothety on the chart disc')

    core = BlendedSaddleNode(
        lam, CubicSaddleNode(saddle_c), CORE_OUTER * np.exp(-CORE_SPAN), CORE_OUTER, radial='log'
    )
    family = SaddleNodeFamily(
        source=ifs,
        base=base,
        orbit_word=orbit.word,
        point=np.asarray(orbit.point, dtype=float),
        frame=frame,
        chart_radius=chart_radius,
        support_radius=support_radius,
        retarded=build_retarded(core, lam, 1.0, 0),
        m_range=tuple(m_range),
        epsilon=path.epsilon,
    )
    logger.info(
        'saddle-node family on %s: lambda=%s, chart radius %.4g, members %s',
        orbit.word,
        lam,
        chart_radius,
        family.m_range,
    )
    return family
