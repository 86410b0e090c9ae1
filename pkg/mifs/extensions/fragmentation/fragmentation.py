"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Fragmentation of graph deformations into eta-small diffeomorphisms.

A deformation of the graph of f0 into the graph of f1 (in some round chart) is cut into N layers.
Layer i moves the level s_i = f0 + (i/N)(f1 - f0) to s_i+1 by the flow of a GraphLayerField,
optionally split further along x by a partition of unity with n pieces.  Every piece is the
time-1 map of a compactly supported field; its support diameter and C1 distance to the identity
are bounded a priori:

    support:  'band'    the box (support of f1 - f0) x (-BAND_OUTER, BAND_OUTER)
              'follow'  width 3.8/n and height 3.8/n (1 + slope) around the current level
    C1:       ||D phi - I|| <= exp(M / N) - 1 by Gronwall, with M a bound for N ||DX||

The layer count N is the smallest one pushing both bounds under ETA_SAFETY * eta, so the count
K = N * (pieces per layer) only depends on the declared bounds of the family being deformed.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from logging import getLogger
from math import ceil, floor
from typing import Any

import numpy as np

from mifs.extensions.retarded.prepared import rotation_matrix
from mifs.mifs_model.bumps import SMOOTH_STEP_MAX_SLOPE, THETA_DELTA0
from mifs.mifs_model.curves import CurveSample, GraphProfile, HermiteProfile, ZeroProfile
from mifs.mifs_model.exceptions import ConstraintViolation, NotGraphRepresentable
from mifs.mifs_model.markov_ifs import RoundDisc
from mifs.mifs_model.planar_maps import BumpFlow, MapChain, c1_distance, identity_chain
from mifs.mifs_model.vector_fields import ConjugatedField, GraphLayerField, partition_weight

logger = getLogger(__name__)

ETA_SAFETY = 0.95
FRAGMENT_STEPS = 4
DERIVATIVE_SAMPLES = 10_000
COMPOSITION_SAMPLES = 2001

# reach and slope of the layer cutoff theta
THETA_REACH = 2.0 - THETA_DELTA0
THETA_SLOPE = SMOOTH_STEP_MAX_SLOPE / (1.0 - THETA_DELTA0)

BAND_INNER = 0.08
BAND_OUTER = 0.6
BAND_SLOPE = SMOOTH_STEP_MAX_SLOPE / (BAND_OUTER - BAND_INNER)

# coordinate frames tried by eta_cost, as rotations of the container chart
FRAME_ANGLES = (0.0, np.pi / 4, -np.pi / 4, np.pi / 2)
MAX_GRAPH_SLOPE = 4.0
# relative slack between measured curve bounds and the bounds a caller declares
BOUNDS_SLACK = 1e-3
# a chart-level curve point closer than this to the graph of the target counts as arrived
COINCIDENCE = 1e-12


@lru_cache(maxsize=1)
def partition_slope() -> float:
    """sup |d/du| of the unit-spacing partition of unity, measured once on a fine grid"""
    u = np.linspace(-2.5, 2.5, 20_001)
    _, der = partition_weight(u, 0, 1)
    return float(np.max(np.abs(der))) * 1.01


@dataclass(frozen=True, eq=False)
class Chart:
    """the round chart p = center + radius * R(angle) u of a container disc"""

    center: np.ndarray
    radius: float
    angle: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float).reshape(2))
        if self.radius <= 0:
            raise ValueError('chart radius must be positive')

    @classmethod
    def unit(cls) -> 'Chart':
        return cls(np.zeros(2), 1.0, 0.0)

    @classmethod
    def of_disc(cls, disc: RoundDisc, angle: float = 0.0) -> 'Chart':
        return cls(disc.center, disc.radius, angle)

    @property
    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.angle)

    @property
    def matrix(self) -> np.ndarray:
        return self.radius * self.rotation

    @property
    def is_identity(self) -> bool:
        return self.radius == 1.0 and self.angle == 0.0 and not self.center.any()

    def to_chart(self, pts) -> np.ndarray:
        return (np.asarray(pts, dtype=float) - self.center) @ self.rotation / self.radius

    def from_chart(self, uv) -> np.ndarray:
        return self.center + self.radius * np.asarray(uv, dtype=float) @ self.rotation.T

    def to_dict(self) -> dict[str, Any]:
        return {'center': self.center.tolist(), 'radius': self.radius, 'angle': self.angle}


@dataclass(frozen=True)
class GraphBounds:
    """the numbers the layer count is computed from; all in chart units"""

    difference_slope: float
    difference_amplitude: float
    level_slope: float
    level_amplitude: float
    support: tuple[float, float]

    @classmethod
    def measure(cls, f_from: GraphProfile, f_to: GraphProfile) -> 'GraphBounds':
        xs = np.unique(
            np.concatenate(
                [
                    np.linspace(-1.0, 1.0, DERIVATIVE_SAMPLES),
                    f_from.sample_abscissae(1001),
                    f_to.sample_abscissae(1001),
                ]
            )
        )
        v0, v1 = f_from.value(xs), f_to.value(xs)
        d0, d1 = f_from.derivative(xs), f_to.derivative(xs)
        moving = (np.abs(v1 - v0) > COINCIDENCE) | (np.abs(d1 - d0) > COINCIDENCE)
        if moving.any():
            # one grid step of slack on either side of the sampled support of f1 - f0
            k = np.flatnonzero(moving)
            spans = [p.support() for p in (f_from, f_to) if p.support()[0] < p.support()[1]]
            support = (
                max(float(xs[max(k[0] - 1, 0)]), min(s[0] for s in spans)),
                min(float(xs[min(k[-1] + 1, len(xs) - 1)]), max(s[1] for s in spans)),
            )
        else:
            support = (0.0, 0.0)
        return cls(
            difference_slope=float(np.max(np.abs(d1 - d0))),
            difference_amplitude=float(np.max(np.abs(v1 - v0))),
            level_slope=float(max(np.max(np.abs(d0)), np.max(np.abs(d1)))),
            level_amplitude=float(max(np.max(np.abs(v0)), np.max(np.abs(v1)))),
            support=support,
        )

    def covers(self, other: 'GraphBounds', slack: float = BOUNDS_SLACK) -> bool:
        grow = 1.0 + slack
        return (
            other.difference_slope <= self.difference_slope * grow + 1e-12
            and other.difference_amplitude <= self.difference_amplitude * grow + 1e-12
            and other.level_slope <= self.level_slope * grow + 1e-12
            and other.level_amplitude <= self.level_amplitude * grow + 1e-12
            and other.support[0] >= self.support[0] - 1e-12
            and other.support[1] <= self.support[1] + 1e-12
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            'differenceSlope': self.difference_slope,
            'differenceAmplitude': self.difference_amplitude,
            'levelSlope': self.level_slope,
            'levelAmplitude': self.level_amplitude,
            'support': list(self.support),
        }


@dataclass(frozen=True)
class Resolution:
    """how a deformation is cut: localisation, x-partition n (0 for none), layers N, pieces"""

    localization: str
    partition: int
    sharpness: float
    layers: int
    pieces: tuple[int, ...]
    derivative_bound: float
    c1_bound: float
    diameter: float

    @property
    def count(self) -> int:
        return self.layers * max(1, len(self.pieces))

    def to_dict(self) -> dict[str, Any]:
        return {
            'localization': self.localization,
            'partition': self.partition,
            'sharpness': self.sharpness,
            'layers': self.layers,
            'pieces': len(self.pieces),
            'derivativeBound': self.derivative_bound,
            'c1Bound': self.c1_bound,
            'supportDiameter': self.diameter,
            'K': self.count,
        }


def _active_pieces(n: int, support: tuple[float, float]) -> tuple[int, ...]:
    """every j whose partition window (j -/+ THETA_REACH) / n meets the support"""
    lo, hi = support
    first = floor(n * lo - THETA_REACH) + 1
    last = ceil(n * hi + THETA_REACH) - 1
    return tuple(range(first, last + 1))


def select_resolution(
    bounds: GraphBounds, eta: float, chart_radius: float = 1.0, localization: str | None = None
) -> Resolution:
    """
    the cheapest cut of a deformation with the given bounds into pieces of size eta
    :param bounds: chart-unit bounds of the two profiles
    :param eta: ambient bound for the support diameter and the C1 distance of every piece
    :param chart_radius: ambient size of one chart unit
    :param localization: force 'band' or 'follow'; by default band is used whenever it fits
    """
    if eta <= 0:
        raise ValueError('eta must be positive')
    reach = ETA_SAFETY * eta / chart_radius
    amp, slope = bounds.difference_amplitude, bounds.difference_slope
    lo, hi = bounds.support
    if amp == 0.0:
        return Resolution(localization or 'band', 0, 1.0, 0, (), 0.0, 0.0, 0.0)

    band_fits = bounds.level_amplitude <= BAND_INNER and 2 * BAND_OUTER < reach
    if localization == 'band' and not band_fits:
        logger.error('band localisation does not fit: amplitude %.3g, reach %.3g', amp, reach)
        raise ValueError('band localisation needs small levels and a chart wider than the band')
    mode = localization or ('band' if band_fits else 'follow')
    if mode not in ('band', 'follow'):
        raise ValueError(f'unknown localisation {mode}')

    dp = partition_slope()
    if mode == 'band':
        sharpness = 1.0
        width = hi - lo
        if np.hypot(width, 2 * BAND_OUTER) <= reach:
            n = 0
        else:
            n = max(1, ceil(2 * THETA_REACH / np.sqrt(reach**2 - (2 * BAND_OUTER) ** 2)))
        piece_width = width if n == 0 else min(width, 2 * THETA_REACH / n)
        diameter = float(np.hypot(piece_width, 2 * BAND_OUTER))
        row_x = slope + amp * n * dp
        row_y = amp * BAND_SLOPE
    else:
        grow = np.sqrt(1.0 + (1.0 + bounds.level_slope) ** 2)
        n = max(1, ceil(2 * THETA_REACH * grow / reach))
        sharpness = float(n)
        diameter = float(2 * THETA_REACH * grow / n)
        row_x = slope + amp * sharpness * THETA_SLOPE * bounds.level_slope + amp * n * dp
        row_y = amp * sharpness * THETA_SLOPE
    m_bound = float(np.hypot(row_x, row_y))

    limit = ETA_SAFETY * eta
    layers = max(
        1,
        ceil(m_bound / np.log1p(limit)),
        ceil(chart_radius * amp / limit),
    )
    if mode == 'follow':
        # one layer must stay inside the plateau of the cutoff around the current level
        layers = max(layers, ceil(2 * amp * sharpness))
    c1 = float(max(np.expm1(m_bound / layers), chart_radius * amp / layers))
    pieces = _active_pieces(n, bounds.support) if n else ()
    return Resolution(
        mode, n, sharpness, layers, pieces, m_bound, c1, float(diameter * chart_radius)
    )


@dataclass(frozen=True, eq=False)
class SmallDiffeo:
    """one factor of a fragmentation: a flow chain, its support disc and its C1 bound"""

    chain: MapChain
    support_disc: RoundDisc
    c1_bound: float
    label: str = ''

    def apply(self, p) -> np.ndarray:
        return self.chain.apply(p)

    def certify(self, grid: int = 16) -> tuple[bool, float, float]:
        """
        sampled check of the declared bounds
        :return: (fixes the ring just outside the support disc, measured C1 distance, bound)
        """
        ring = RoundDisc(self.support_disc.center, self.support_disc.radius * 1.02).boundary(64)
        still = float(np.max(np.linalg.norm(self.chain.apply(ring) - ring, axis=1)))
        measured = c1_distance(
            self.chain, identity_chain(), self.support_disc.center, self.support_disc.radius, grid
        )
        return still == 0.0, measured.total, self.c1_bound

    def to_dict(self) -> dict[str, Any]:
        return {
            'label': self.label,
            'supportDisc': self.support_disc.to_dict(),
            'c1Bound': self.c1_bound,
            'chain': self.chain.to_dict(),
        }


@dataclass
class FactorReport:
    checked: int = 0
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            'checked': self.checked,
            'passed': self.passed,
            'checks': {k: {'passed': ok, 'value': v} for k, (ok, v) in self.checks.items()},
        }


@dataclass(frozen=True, eq=False)
class CostCertificate:
    factors: tuple[SmallDiffeo, ...]
    eta: float
    composition_error: float
    resolution: Resolution
    chart: Chart
    bounds: GraphBounds

    @property
    def count(self) -> int:
        return len(self.factors)

    def compose(self) -> MapChain:
        chain = identity_chain()
        for f in self.factors:
            chain = chain.then(f.chain)
        return chain

    def apply(self, p) -> np.ndarray:
        pts = np.asarray(p, dtype=float)
        for f in self.factors:
            pts = f.chain.apply(pts)
        return pts

    def check_factors(self, stride: int = 1, grid: int = 16) -> FactorReport:
        """every stride-th factor against its own declared support and C1 bound"""
        report = FactorReport()
        worst_c1 = -np.inf
        worst_diam = 0.0
        still = True
        for f in self.factors[::stride]:
            fixed, measured, bound = f.certify(grid)
            still &= fixed
            worst_c1 = max(worst_c1, measured - bound)
            worst_diam = max(worst_diam, 2 * f.support_disc.radius)
            report.checked += 1
        report.checks['fixesOutsideSupport'] = (bool(still), 0.0)
        report.checks['c1WithinBound'] = (worst_c1 <= 0.0, float(worst_c1))
        report.checks['supportWithinEta'] = (worst_diam <= self.eta, worst_diam)
        report.checks['c1BoundWithinEta'] = (
            self.resolution.c1_bound <= self.eta,
            self.resolution.c1_bound,
        )
        return report

    def to_dict(self, include_factors: bool = False) -> dict[str, Any]:
        out = {
            'eta': self.eta,
            'K': self.count,
            'compositionError': self.composition_error,
            'resolution': self.resolution.to_dict(),
            'chart': self.chart.to_dict(),
            'bounds': self.bounds.to_dict(),
        }
        if include_factors:
            out['factors'] = [f.to_dict() for f in self.factors]
        return out


def _piece_box(
    res: Resolution,
    f_from: GraphProfile,
    f_to: GraphProfile,
    layer: int,
    piece: int | None,
    bounds: GraphBounds,
) -> tuple[float, float, float, float]:
    """chart box holding the support of one piece"""
    x0, x1 = bounds.support
    if piece is not None:
        x0 = max(x0, (piece - THETA_REACH) / res.partition)
        x1 = min(x1, (piece + THETA_REACH) / res.partition)
    if res.localization == 'band':
        return x0, x1, -BAND_OUTER, BAND_OUTER
    xs = np.linspace(x0, x1, 65)
    frac = layer / res.layers
    level = f_from.value(xs) + frac * (f_to.value(xs) - f_from.value(xs))
    pad = THETA_REACH / res.sharpness + bounds.level_slope * (x1 - x0) / 64
    return x0, x1, float(level.min() - pad), float(level.max() + pad)


def deform_graph(
    f_from: GraphProfile,
    f_to: GraphProfile,
    chart: Chart,
    eta: float,
    bounds: GraphBounds | None = None,
    localization: str | None = None,
    integration_steps: int = FRAGMENT_STEPS,
) -> CostCertificate:
    """
    cut the deformation of graph(f_from) into graph(f_to) into eta-small factors
    :param bounds: declared bounds; the measured ones must fit inside them and the cut is made
        from the declared ones, so families with common bounds get a common count
    """
    measured = GraphBounds.measure(f_from, f_to)
    if bounds is None:
        bounds = measured
    elif not bounds.covers(measured):
        logger.error('measured graph bounds %s exceed the declared %s', measured, bounds)
        raise ValueError('curves exceed the declared graph bounds')
    res = select_resolution(bounds, eta, chart.radius, localization)

    factors = []
    for i in range(res.layers):
        for j in res.pieces or (None,):
            layer = GraphLayerField(
                f_from,
                f_to,
                res.layers,
                i,
                res.localization,
                BAND_INNER,
                BAND_OUTER,
                res.sharpness,
                (j, res.partition) if j is not None else None,
            )
            vf = layer if chart.is_identity else ConjugatedField(layer, chart.matrix, chart.center)
            x0, x1, y0, y1 = _piece_box(res, f_from, f_to, i, j, bounds)
            disc = RoundDisc(
                chart.from_chart([(x0 + x1) / 2, (y0 + y1) / 2]),
                chart.radius * 0.5 * float(np.hypot(x1 - x0, y1 - y0)),
            )
            label = f'layer{i}' if j is None else f'layer{i}.piece{j}'
            factors.append(
                SmallDiffeo(MapChain((BumpFlow(vf, integration_steps),)), disc, res.c1_bound, label)
            )

    xs = np.union1d(
        f_from.sample_abscissae(COMPOSITION_SAMPLES), f_to.sample_abscissae(COMPOSITION_SAMPLES)
    )
    xs = xs[np.abs(xs) < 1.0]
    start = chart.from_chart(np.stack([xs, f_from.value(xs)], axis=1))
    goal = chart.from_chart(np.stack([xs, f_to.value(xs)], axis=1))
    pts = start
    for f in factors:
        pts = f.chain.apply(pts)
    error = float(np.max(np.linalg.norm(pts - goal, axis=1))) if len(xs) else 0.0
    logger.info(
        'graph deformation cut into K = %d factors (%s, n = %d, N = %d), composition error %.3g',
        len(factors),
        res.localization,
        res.partition,
        res.layers,
        error,
    )
    return CostCertificate(tuple(factors), eta, error, res, chart, bounds)


@dataclass(frozen=True, eq=False)
class GraphCurve:
    """graph of profile over [-1, 1], flat on |x| >= 1 - delta, with |f'| < alpha"""

    profile: GraphProfile
    alpha: float
    delta: float

    def __post_init__(self):
        if self.alpha <= 0 or not 0 < self.delta < 1:
            raise ValueError('need alpha > 0 and 0 < delta < 1')
        x = np.linspace(-1.0, 1.0, DERIVATIVE_SAMPLES)
        f, df = self.profile.value(x), self.profile.derivative(x)
        edge = np.abs(x) >= 1 - self.delta
        if np.any(np.abs(f[edge]) > COINCIDENCE):
            logger.error('graph profile is not flat within delta = %s of the ends', self.delta)
            raise ValueError('graph profile must vanish near the ends of [-1, 1]')
        if np.max(np.abs(df)) >= self.alpha:
            raise ValueError(f'|f\'| reaches {np.max(np.abs(df)):.6g} >= alpha = {self.alpha}')
        if np.any(x**2 + f**2 > 1.0 + 1e-12):
            raise ValueError('graph leaves the unit disc')

    def curve(self, count: int = 1001) -> CurveSample:
        xs = self.profile.sample_abscissae(count)
        pts = np.stack([xs, self.profile.value(xs)], axis=1)
        tan = np.stack([np.ones_like(xs), self.profile.derivative(xs)], axis=1)
        return CurveSample(pts, tan, 'graph')


def fragment_graph(
    g: GraphCurve, eta: float, integration_steps: int = FRAGMENT_STEPS
) -> CostCertificate:
    """
    the x-axis chord of the unit disc into graph(g) by eta-small factors, each a follow-layer
    piece of the partition of unity at resolution n, so K <= n^3 (n + 5)
    :raises ConstraintViolation: the factor count exceeds n^3 (n + 5)
    """
    measured = GraphBounds.measure(ZeroProfile(), g.profile)
    declared = GraphBounds(
        difference_slope=g.alpha,
        difference_amplitude=measured.difference_amplitude,
        level_slope=g.alpha,
        level_amplitude=measured.level_amplitude,
        support=g.profile.support() if measured.difference_amplitude > 0 else (0.0, 0.0),
    )
    cert = deform_graph(
        ZeroProfile(), g.profile, Chart.unit(), eta, declared, 'follow', integration_steps
    )
    n = cert.resolution.partition
    limit = n**3 * (n + 5)
    if n and cert.count > limit:
        logger.error('fragment count %d exceeds n^3 (n + 5) = %d', cert.count, limit)
        raise ConstraintViolation(f'fragment count {cert.count} exceeds n^3 (n + 5) = {limit}')
    return cert


def graph_in_chart(curve: CurveSample, chart: Chart) -> HermiteProfile | None:
    """the curve as a Hermite graph profile over the chart's x axis, None if it is not a graph"""
    uv = chart.to_chart(curve.points)
    tan = curve.tangents @ chart.rotation
    inside = np.linalg.norm(uv, axis=1) <= 1.0 + 1e-9
    uv, tan = uv[inside], tan[inside]
    if len(uv) < 2:
        return None
    dx = np.diff(uv[:, 0])
    if np.all(dx < 0):
        uv, tan = uv[::-1], -tan[::-1]
    elif not np.all(dx > 0):
        return None
    if np.any(tan[:, 0] <= 0):
        return None
    slopes = tan[:, 1] / tan[:, 0]
    if np.max(np.abs(slopes)) > MAX_GRAPH_SLOPE:
        return None
    return HermiteProfile(uv[:, 0], uv[:, 1], slopes)


def eta_cost(
    source: CurveSample,
    target: CurveSample,
    container: RoundDisc,
    eta: float,
    bounds: GraphBounds | None = None,
    integration_steps: int = FRAGMENT_STEPS,
) -> CostCertificate:
    """
    eta-small factors supported in the container, composing to a map that takes source to target
    :raises NotGraphRepresentable: neither curve pair is a graph in any admitted frame
    """
    for angle in FRAME_ANGLES:
        chart = Chart.of_disc(container, angle)
        f_from = graph_in_chart(source, chart)
        f_to = graph_in_chart(target, chart)
        if f_from is not None and f_to is not None:
            logger.debug(
                'curves %s -> %s are graphs at frame angle %.4g',
                source.curve_id,
                target.curve_id,
                angle,
            )
            return deform_graph(f_from, f_to, chart, eta, bounds, None, integration_steps)
    logger.error(
        'curves %s and %s are not graphs in any admitted frame', source.curve_id, target.curve_id
    )
    raise NotGraphRepresentable(
        f'{source.curve_id} -> {target.curve_id} is not a graph deformation in any frame'
    )
