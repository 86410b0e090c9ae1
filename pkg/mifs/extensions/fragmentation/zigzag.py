"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Curves threaded through the annuli of a prepared family.

alpha_m runs out of q along the x-axis, leaves it at the drop abscissa x* between the stratum
Lambda_m and the level m - 1 objects, climbs vertically, runs horizontally at height rise * x*
above every object and joins the diagonal {x = y}.  The negative side is the point reflection.
In the frame rotated by 45 degrees the curve is the graph of a filleted polyline with slopes in
{-1, 0, 1}, so one set of graph bounds serves every depth.

zeta_i has the same shape with its drop between beta_i and beta_i-1 and ends on Lambda_tau.
Where the vertical run cannot reach the diagonal inside Lambda-bar_tau the curve follows the
circle through its drop point instead; those curves are not graphs.

gamma_n,m = F_Xi(alpha_m) lies in Xi_1, and gamma_0 is the chord of Xi_1 along W^ss(Q).
"""

from dataclasses import dataclass, field
from logging import getLogger
from typing import Any

import numpy as np

from mifs.extensions.fragmentation.fragmentation import (
    Chart,
    CostCertificate,
    GraphBounds,
    deform_graph,
)
from mifs.extensions.retarded.prepared import PreparedFamily, PreparedParams
from mifs.extensions.wells.wells import WellSystem, periodic_letters
from mifs.mifs_model.curves import (
    CurveSample,
    GraphProfile,
    RampedPolylineProfile,
    ZeroProfile,
    count_runs,
    segment_distances,
)
from mifs.mifs_model.exceptions import DepthInfeasible, GeometryInfeasible

logger = getLogger(__name__)

SQRT2 = np.sqrt(2.0)
DIAGONAL_ANGLE = np.pi / 4

ALPHA_RISE = 1.5
ZETA_RISE = 1.0
# half width of the upper fillets, relative to the drop abscissa
CORNER_SHARE = 0.1
CURVE_SAMPLES = 4096
# zeta curves must be back on the diagonal this far (relatively) inside Lambda_tau
BOUNDARY_MARGIN = 0.02
# largest turning angle of the fillets on an exceptional zeta
MAX_TURN = 0.1
FILLET_SAMPLES = 64

# declared graph bounds of every gamma_n,m against gamma_0, in the chart of Xi_1
GAMMA_BOUNDS = GraphBounds(
    difference_slope=1.0,
    difference_amplitude=0.075,
    level_slope=1.0,
    level_amplitude=0.075,
    support=(-0.25, 0.25),
)
WSS_TOLERANCE = 1e-8
# gamma coincides with gamma_0 on this outer share of the chart
FLAT_SHARE = 0.1


def drop_abscissa(params: PreparedParams, m: int) -> float:
    """midpoint of the corridor between Lambda_m and the level m - 1 objects"""
    return 0.5 * (params.lam + params.x_lo) * params.lam ** (m - 1)


def zigzag_profile(x_star: float, rise: float, bottom: float) -> RampedPolylineProfile:
    """
    the diagonal-frame graph of the zig-zag through (x*, 0) and (x*, rise x*)
    :param bottom: fillet half width at the corner leaving the x-axis
    """
    if rise < 1.0:
        raise ValueError('a rise below 1 turns back and is not a graph')
    corner = CORNER_SHARE * x_star
    a1 = x_star / SQRT2
    if rise == 1.0:
        positive = [(a1, 2.0, bottom), (SQRT2 * x_star, -1.0, corner)]
    else:
        positive = [
            (a1, 2.0, bottom),
            ((1.0 + rise) * x_star / SQRT2, -2.0, corner),
            (SQRT2 * rise * x_star, 1.0, corner),
        ]
    negative = [(-b, -ds, w) for b, ds, w in reversed(positive)]
    rows = negative + positive
    for (b0, _, w0), (b1, _, w1) in zip(rows, rows[1:]):
        if b0 + w0 >= b1 - w1:
            raise ValueError(f'fillets at {b0:.6g} and {b1:.6g} overlap')
    breaks, changes, widths = zip(*rows)
    return RampedPolylineProfile(tuple(breaks), tuple(changes), tuple(widths))


def diagonal_chart() -> Chart:
    """the unit chart of D_q rotated so its x axis is the diagonal"""
    return Chart(np.zeros(2), 1.0, DIAGONAL_ANGLE)


def profile_curve(
    profile: GraphProfile, chart: Chart, x_max: float, count: int, curve_id: str
) -> CurveSample:
    """the graph over [-x_max, x_max] pushed out of the chart"""
    xs = np.union1d(profile.sample_abscissae(count), [-x_max, x_max])
    xs = xs[np.abs(xs) <= x_max]
    uv = np.stack([xs, profile.value(xs)], axis=1)
    tan = np.stack([np.ones_like(xs), profile.derivative(xs)], axis=1)
    return CurveSample(chart.from_chart(uv), tan @ chart.rotation.T, curve_id)


def alpha_profile(params: PreparedParams, m: int, rise: float = ALPHA_RISE) -> GraphProfile:
    x_star = drop_abscissa(params, m)
    # the first fillet stays in the outer half of the corridor beyond Lambda_m
    bottom = (x_star - params.lam**m) / (2 * SQRT2)
    return zigzag_profile(x_star, rise, bottom)


def least_feasible_depth(
    params: PreparedParams, bounds: GraphBounds = GAMMA_BOUNDS, limit: int = 500
) -> int:
    """the smallest m whose alpha_m fits the declared gamma bounds"""
    for m in range(1, limit):
        try:
            prof = alpha_profile(params, m)
        except ValueError:
            continue
        lo, hi = prof.support()
        height = float(np.max(np.abs(prof.value(np.asarray(prof.breaks)))))
        if lo >= bounds.support[0] and hi <= bounds.support[1]:
            if height <= bounds.level_amplitude:
                return m
    logger.error('no depth below %d fits the gamma bounds %s', limit, bounds)
    raise DepthInfeasible(f'no feasible gamma depth below {limit}')


# ---------------------------------------------------------------------------- zeta curves


@dataclass(frozen=True, eq=False)
class ZetaCurve:
    index: int
    drop: float
    curve: CurveSample
    profile: GraphProfile | None = None

    @property
    def is_graph(self) -> bool:
        return self.profile is not None

    def to_dict(self) -> dict[str, Any]:
        return {
            'index': self.index,
            'drop': self.drop,
            'isGraph': self.is_graph,
            'curve': self.curve.to_dict(),
        }


def _zeta_drop(params: PreparedParams, i: int) -> tuple[float, float]:
    """(drop abscissa, abscissa the curve must stay on the x-axis up to)"""
    rects = params.beta_rects
    if i >= len(rects):
        raise GeometryInfeasible(f'zeta_{i} needs beta_{i}, only {len(rects)} are declared')
    outer = params.lam**params.tau
    x_star = drop_abscissa(params, params.tau + i)
    left = params.lam ** (params.tau + i)
    if x_star >= outer * (1 - BOUNDARY_MARGIN):
        x_star = 0.5 * (rects[i].x1 + outer)
        left = rects[i].x1
    beyond = float(np.hypot(rects[i].x1, max(abs(rects[i].y0), abs(rects[i].y1))))
    if not (left < x_star and beyond < x_star):
        logger.error('no room between beta_%d and the drop of zeta_%d', i, i)
        raise GeometryInfeasible(f'zeta_{i} cannot leave the axis beyond beta_{i}')
    if i > 0 and x_star >= rects[i - 1].x0:
        raise GeometryInfeasible(f'zeta_{i} cannot drop before beta_{i - 1}')
    return x_star, left


def _bezier(a, k, c, count: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, count)[:, None]
    return (1 - t) ** 2 * a + 2 * t * (1 - t) * k + t**2 * c


def _turning_half(x_star: float, left: float, outer: float, count: int) -> np.ndarray:
    """
    positive half of an exceptional zeta: axis, fillet, the circle of radius x* up to the
    diagonal, fillet, diagonal out to radius outer
    """
    tan_turn = min(0.5 * (x_star - left) / x_star, np.tan(MAX_TURN))
    turn = np.arctan(tan_turn)
    leg = x_star * tan_turn
    knee = x_star / np.cos(turn)
    reach = knee + leg
    if reach >= outer:
        raise GeometryInfeasible(f'the circle of radius {x_star:.6g} is too close to Lambda_tau')
    unit = np.array([1.0, 1.0]) / SQRT2
    axis = np.stack([np.linspace(0.0, knee - leg, count // 4), np.zeros(count // 4)], axis=1)
    low = _bezier(
        np.array([knee - leg, 0.0]),
        np.array([knee, 0.0]),
        x_star * np.array([np.cos(turn), np.sin(turn)]),
        FILLET_SAMPLES,
    )
    ang = np.linspace(turn, DIAGONAL_ANGLE - turn, count // 4)
    arc = x_star * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    high = _bezier(arc[-1], knee * unit, reach * unit, FILLET_SAMPLES)
    diag = np.linspace(reach, outer, count // 8)[:, None] * unit
    return np.vstack([axis, low[1:], arc[1:], high[1:], diag[1:]])


def build_zeta_curves(
    family: PreparedFamily, count: int, samples: int = CURVE_SAMPLES
) -> list[ZetaCurve]:
    """
    zeta_0 .. zeta_count-1 in Lambda-bar_tau, each from one end of the diagonal chord of
    Lambda_tau to the other; zeta_i crosses beta_k along the x-axis for k >= i and misses it
    for k < i
    """
    params = family.params
    for k, rect in enumerate(params.beta_rects):
        if rect.diagonal_gap() <= 0:
            raise GeometryInfeasible(f'beta_{k} meets the diagonal')
    outer = params.lam**params.tau
    chart = diagonal_chart()
    curves = []
    for i in range(count):
        x_star, left = _zeta_drop(params, i)
        profile = None
        try:
            candidate = zigzag_profile(x_star, ZETA_RISE, (x_star - left) / (2 * SQRT2))
            if candidate.support()[1] <= outer * (1 - BOUNDARY_MARGIN):
                profile = candidate
        except ValueError:
            pass
        if profile is not None:
            curve = profile_curve(profile, chart, outer, samples, f'zeta{i}')
        else:
            half = _turning_half(x_star, left, outer, samples)
            curve = CurveSample(np.vstack([-half[::-1], half[1:]]), curve_id=f'zeta{i}')
        curves.append(ZetaCurve(i, x_star, curve, profile))
    exceptional = [z.index for z in curves if not z.is_graph]
    logger.info('built %d zeta curves, not graphs: %s', count, exceptional)
    return curves


def zeta_slope_bound(curves: list[ZetaCurve]) -> float:
    """the diagonal-frame derivative bound shared by every graph zeta"""
    slopes = [
        float(np.max(np.abs(z.profile.derivative(z.profile.sample_abscissae(2001)))))
        for z in curves
        if z.profile is not None
    ]
    return max(slopes, default=0.0)


# --------------------------------------------------------------------------- gamma curves


@dataclass
class GammaReport:
    n: int
    m: int
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    @property
    def failed(self) -> list[str]:
        return [name for name, (ok, _) in self.checks.items() if not ok]

    def to_dict(self) -> dict[str, Any]:
        return {
            'n': self.n,
            'm': self.m,
            'passed': self.passed,
            'checks': {k: {'passed': ok, 'value': v} for k, (ok, v) in self.checks.items()},
        }


@dataclass(frozen=True, eq=False)
class GammaCurve:
    n: int
    m: int
    profile: GraphProfile
    chart: Chart
    curve: CurveSample
    report: GammaReport

    def to_dict(self) -> dict[str, Any]:
        return {
            'n': self.n,
            'm': self.m,
            'profile': self.profile.to_dict(),
            'chart': self.chart.to_dict(),
            'report': self.report.to_dict(),
        }


def xi_chart(family: PreparedFamily) -> Chart:
    """chart of Xi_1 = F_Xi(D_q) in which F_Xi carries the diagonal frame of D_q"""
    return Chart.of_disc(family.params.xi_disc)


def gamma_zero(family: PreparedFamily, samples: int = CURVE_SAMPLES) -> CurveSample:
    return profile_curve(ZeroProfile(), xi_chart(family), 1.0, samples, 'gamma0')


def check_gamma(ws: WellSystem, gamma: CurveSample, chart: Chart, n: int, m: int) -> GammaReport:
    """sampled membership tests of gamma_n,m against the wells"""
    report = GammaReport(n, m)
    # the end points lie on the boundary of Xi_1
    pts = gamma.points[1:-1]
    idx = ws.indices
    ifs = ws.ifs

    uv = chart.to_chart(pts)
    flat = np.linalg.norm(uv, axis=1) >= 1 - FLAT_SHARE
    worst_flat = float(np.max(np.abs(uv[flat, 1]))) if flat.any() else 0.0
    report.checks['matchesGamma0NearBoundary'] = (worst_flat <= 1e-12, worst_flat)

    outside = int(np.count_nonzero(~ws.xi(1).contains(pts)))
    report.checks['insideXi1'] = (outside == 0, float(outside))

    t_m = ws.periodic(m)
    in_t = t_m.contains(pts)
    home = ifs.discs[ws.orbit.discs[0]]
    wss = ifs.strong_stable_local(ws.orbit, home.radius * (1 - 1e-9))
    # W^ss at F^-m(Q1) is the image of W^ss(q) along the periodic letters up to that position
    prefix = periodic_letters(ws.orbit, 0, (idx.q1_position - m) % ws.orbit.period)
    pushed = ifs.word_chain(prefix + t_m.word).apply(wss.points)
    if in_t.any():
        off = float(np.max(segment_distances(pts[in_t], pushed)))
    else:
        off = np.inf
    report.checks['onStrongStableInT'] = (off <= WSS_TOLERANCE, off)

    hits = 0
    for i in range(1, idx.t):
        for comp in ws.theta(i):
            hits += int(np.count_nonzero(comp.contains(pts)))
    report.checks['avoidsTheta'] = (hits == 0, float(hits))

    hits = 0
    for i in range(m):
        for comp in ws.periodic_hole(i):
            hits += int(np.count_nonzero(comp.contains(pts)))
    report.checks['avoidsS'] = (hits == 0, float(hits))

    worst = max(count_runs(ws.xi(i).contains(pts)) for i in range(1, idx.t + 1))
    report.checks['connectedXi'] = (worst <= 1, float(worst))
    worst = max(count_runs(ws.periodic(i).contains(pts)) for i in range(m + 1))
    report.checks['connectedT'] = (worst <= 1, float(worst))
    return report


def build_gamma_family(
    family: PreparedFamily, ws: WellSystem, n: int, m: int, samples: int = CURVE_SAMPLES
) -> GammaCurve:
    """
    gamma_n,m in Xi_1 for member n of the family, checked against the wells ws of that member
    :raises DepthInfeasible: m is below the least feasible depth for n
    """
    if n < 1:
        raise ValueError('gamma_n,m is defined for members n >= 1')
    params = family.params
    floor_m = least_feasible_depth(params) + (n - 1) * ws.orbit.period
    if m < floor_m:
        logger.error('gamma_%d,%d is below the least feasible depth %d', n, m, floor_m)
        raise DepthInfeasible(f'gamma_{n},{m} needs m >= {floor_m}')
    profile = alpha_profile(params, m)
    chart = xi_chart(family)
    curve = profile_curve(profile, chart, 1.0, samples, f'gamma{n}.{m}')
    report = check_gamma(ws, curve, chart, n, m)
    if not report.passed:
        logger.warning('gamma_%d,%d fails %s', n, m, report.failed)
    return GammaCurve(n, m, profile, chart, curve, report)


def gamma_cost(gamma: GammaCurve, eta: float) -> CostCertificate:
    """eta-small factors inside Xi_1 taking gamma_n,m onto gamma_0, counted from GAMMA_BOUNDS"""
    return deform_graph(gamma.profile, ZeroProfile(), gamma.chart, eta, GAMMA_BOUNDS)
