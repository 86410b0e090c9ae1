"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

The global strong stable curve of a periodic orbit inside its home disc.

The local piece W^ss_loc is a graph over the strong eigendirection with parameter u.  A point of
parameter s with |s| > h is F_q^-k of the local point with parameter s * rate^k, so the whole
curve is sampled by pulling the local graph back along the periodic word.  Parameters are placed
on a geometric grid with N samples per fundamental domain, so the grid is closed under s -> s /
rate up to the ends and the samples of consecutive domains are images of each other.
"""

from dataclasses import dataclass, field
from logging import getLogger
from typing import Any

import numpy as np
from scipy.interpolate import CubicSpline

from mifs.mifs_model.curves import CurveSample
from mifs.mifs_model.exceptions import NoGap
from mifs.mifs_model.markov_ifs import MarkovIfs, PeriodicOrbit, RoundDisc

logger = getLogger(__name__)

DEFAULT_PER_DOMAIN = 1024
DEFAULT_LOCAL_SAMPLES = 2001
# fundamental domains sampled inside the local piece
INNER_DOMAINS = 8


def strong_rate(ifs: MarkovIfs, orbit: PeriodicOrbit) -> float:
    """the signed strong stable eigenvalue of the return map at q"""
    vals = np.linalg.eigvals(ifs.word_chain(orbit.word).jacobian(orbit.point))
    if np.any(np.abs(vals.imag) > 0):
        raise NoGap('complex eigenvalues have no strong stable direction')
    vals = vals.real[np.argsort(np.abs(vals.real))]
    if abs(abs(vals[0]) - abs(vals[1])) < 1e-8:
        raise NoGap(f'eigenvalues {vals[0]:.12g} and {vals[1]:.12g} are not separated')
    return float(vals[0])


@dataclass(frozen=True, eq=False)
class StrongStableCurve:
    ifs: MarkovIfs = field(repr=False)
    orbit: PeriodicOrbit
    rate: float
    half_width: float
    local: CurveSample
    params: np.ndarray
    curve: CurveSample

    def __len__(self):
        return len(self.params)

    def at(self, s) -> tuple[np.ndarray, np.ndarray]:
        """
        points of parameter s
        :return: (mask of parameters whose point stays in the home disc, points, nan elsewhere)
        """
        s = np.atleast_1d(np.asarray(s, dtype=float))
        shrink = -np.log(abs(self.rate))
        h = self.half_width
        with np.errstate(divide='ignore'):
            k = np.ceil((np.log(np.abs(s)) - np.log(h)) / shrink)
        k = np.where(np.isfinite(k), np.maximum(k, 0), 0).astype(int)
        u = s * self.rate**k
        # rounding at the domain ends
        over = np.abs(u) > h
        k[over] += 1
        u[over] *= self.rate
        spline = CubicSpline(_local_params(self), self.local.points, axis=0)
        base = spline(u)
        ok = np.zeros(len(s), dtype=bool)
        pts = np.full((len(s), 2), np.nan)
        for depth in np.unique(k):
            sel = np.flatnonzero(k == depth)
            good, pre = self.ifs.pull_back(base[sel], tuple(self.orbit.word) * int(depth))
            ok[sel[good]] = True
            pts[sel[good]] = pre[good]
        return ok, pts

    def refine(self, lo: float, hi: float, count: int) -> tuple[np.ndarray, np.ndarray]:
        """count evenly spaced parameters of [lo, hi] and their points, invalid ones dropped"""
        s = np.linspace(lo, hi, count)
        ok, pts = self.at(s)
        return s[ok], pts[ok]

    def to_dict(self) -> dict[str, Any]:
        return {
            'word': list(self.orbit.word),
            'rate': self.rate,
            'halfWidth': self.half_width,
            'samples': len(self.params),
        }


def _local_params(curve: StrongStableCurve) -> np.ndarray:
    return np.linspace(-curve.half_width, curve.half_width, len(curve.local))


def global_strong_stable(
    ifs: MarkovIfs,
    orbit: PeriodicOrbit,
    half_width: float,
    per_domain: int = DEFAULT_PER_DOMAIN,
    local_samples: int = DEFAULT_LOCAL_SAMPLES,
) -> StrongStableCurve:
    """
    W^ss(q) inside the home disc, sampled on the geometric parameter grid
    :param half_width: half width h of the local graph, small enough for the graph transform
    :raises NoGap: the return map has no dominated splitting at q
    """
    if half_width <= 0 or per_domain < 1:
        raise ValueError('half width and samples per domain must be positive')
    rate = strong_rate(ifs, orbit)
    local = ifs.strong_stable_local(orbit, half_width, samples=local_samples)
    home = ifs.discs[orbit.discs[0]]
    radius = home.radius if isinstance(home, RoundDisc) else 1.0
    shrink = -np.log(abs(rate))
    outer = int(np.ceil(np.log(2 * radius / half_width) / shrink)) + 1
    j = np.arange(-INNER_DOMAINS * per_domain, outer * per_domain + 1)
    mags = half_width * abs(rate) ** (-j / per_domain)
    params = np.concatenate([-mags[::-1], [0.0], mags])
    stub = StrongStableCurve(ifs, orbit, rate, half_width, local, params, local)
    ok, pts = stub.at(params)
    params, pts = params[ok], pts[ok]
    curve = CurveSample(pts, curve_id=f'Wss{list(orbit.word)}')
    logger.info(
        'strong stable curve of %s: %d samples over %d fundamental domains, rate %.6g',
        orbit.word,
        len(params),
        outer + INNER_DOMAINS,
        rate,
    )
    return StrongStableCurve(ifs, orbit, rate, half_width, local, params, curve)
