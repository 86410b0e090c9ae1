"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Sampled curves and graph profiles.

A CurveSample is a polyline with unit tangents, the common currency between the manifold
computations, the fragmentation code and the report writer.  A GraphProfile is a C1 scalar
function on [-1, 1] used to describe curves that are graphs in some chart.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from logging import getLogger
from typing import Any, ClassVar

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.spatial import cKDTree

from mifs.mifs_model.bumps import compact_bump

logger = getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CurveSample:
    """an ordered polyline with unit tangents"""

    points: np.ndarray
    tangents: np.ndarray = field(default=None)
    curve_id: str = ''

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, 'points', pts)
        if self.tangents is None:
            object.__setattr__(self, 'tangents', polyline_tangents(pts))
        else:
            tan = np.asarray(self.tangents, dtype=float).reshape(-1, 2)
            if tan.shape != pts.shape:
                raise ValueError('tangent array must match the point array')
            norms = np.linalg.norm(tan, axis=1, keepdims=True)
            object.__setattr__(self, 'tangents', tan / np.where(norms > 0, norms, 1.0))

    def __len__(self):
        return len(self.points)

    @property
    def is_empty(self) -> bool:
        return len(self.points) == 0

    def arc_length(self) -> np.ndarray:
        """cumulative arc length, starting at 0"""
        if len(self.points) == 0:
            return np.zeros(0)
        steps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(steps)])

    def parameters(self) -> np.ndarray:
        """arc length normalised to [0, 1]"""
        s = self.arc_length()
        if len(s) < 2 or s[-1] == 0:
            return np.zeros(len(s))
        return s / s[-1]

    def evaluate(self, t) -> np.ndarray:
        """piecewise-cubic evaluation at normalised arc-length parameters"""
        s = self.arc_length()
        if len(s) < 2:
            raise ValueError('cannot evaluate a curve with fewer than 2 samples')
        total = s[-1]
        x = s / total
        # tangents are unit in arc length; d/dt = total * d/ds
        spline = CubicHermiteSpline(x, self.points, self.tangents * total, axis=0)
        return spline(np.clip(np.asarray(t, dtype=float), 0.0, 1.0))

    def subset(self, mask: np.ndarray, curve_id: str | None = None) -> 'CurveSample':
        return CurveSample(
            self.points[mask],
            self.tangents[mask],
            curve_id if curve_id is not None else self.curve_id,
        )

    def mapped(self, primitive_like, curve_id: str | None = None) -> 'CurveSample':
        """push the curve through anything with apply / jacobian"""
        pts = primitive_like.apply(self.points)
        jac = primitive_like.jacobian(self.points)
        tan = np.einsum('nij,nj->ni', jac, self.tangents)
        return CurveSample(pts, tan, curve_id if curve_id is not None else self.curve_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            'curveId': self.curve_id,
            'points': self.points.tolist(),
            'tangents': self.tangents.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'CurveSample':
        return cls(
            np.asarray(data['points'], dtype=float),
            np.asarray(data['tangents'], dtype=float) if 'tangents' in data else None,
            data.get('curveId', ''),
        )


def polyline_tangents(points: np.ndarray) -> np.ndarray:
    """unit tangents by central differences (one-sided at the ends)"""
    if len(points) < 2:
        return np.tile([1.0, 0.0], (len(points), 1))
    d = np.gradient(points, axis=0)
    norms = np.linalg.norm(d, axis=1, keepdims=True)
    return d / np.where(norms > 0, norms, 1.0)


def segment_distances(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """distance of every point to the polyline (point-to-segment, vectorised over segments)"""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(polyline) == 1:
        return np.linalg.norm(points - polyline[0], axis=1)
    a = polyline[:-1]
    ab = polyline[1:] - a
    ab2 = np.einsum('ij,ij->i', ab, ab)
    ab2 = np.where(ab2 > 0, ab2, 1.0)
    best = np.full(len(points), np.inf)
    # chunk over points to bound memory
    for start in range(0, len(points), 512):
        p = points[start : start + 512, None, :]
        u = np.clip(np.einsum('pij,ij->pi', p - a, ab) / ab2, 0.0, 1.0)
        proj = a + u[..., None] * ab
        d = np.linalg.norm(p - proj, axis=2).min(axis=1)
        best[start : start + 512] = d
    return best


def nearest_segment_distances(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """
    distance of every point to a dense polyline, measured on the two segments at the nearest
    vertex only; exact once the polyline is sampled finer than the distances of interest
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(polyline) < 2:
        return segment_distances(points, polyline)
    _, nearest = cKDTree(polyline).query(points)
    best = np.full(len(points), np.inf)
    for shift in (-1, 0):
        start = np.clip(nearest + shift, 0, len(polyline) - 2)
        a, b = polyline[start], polyline[start + 1]
        ab = b - a
        ab2 = np.einsum('ij,ij->i', ab, ab)
        u = np.einsum('ij,ij->i', points - a, ab) / np.where(ab2 > 0, ab2, 1.0)
        proj = a + np.clip(u, 0.0, 1.0)[:, None] * ab
        best = np.minimum(best, np.linalg.norm(points - proj, axis=1))
    return best


def count_runs(mask: np.ndarray) -> int:
    """number of maximal runs of True"""
    mask = np.asarray(mask, dtype=bool)
    if len(mask) == 0:
        return 0
    return int(mask[0]) + int(np.count_nonzero(np.diff(mask.astype(int)) == 1))


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """symmetric Hausdorff distance between two polylines"""
    if len(a) == 0 or len(b) == 0:
        return np.inf if len(a) != len(b) else 0.0
    return float(max(segment_distances(a, b).max(), segment_distances(b, a).max()))


class GraphProfile(ABC):
    """a C1 function on [-1, 1] with an exact derivative"""

    kind: ClassVar[str] = ''

    @abstractmethod
    def value(self, x) -> np.ndarray: ...

    @abstractmethod
    def derivative(self, x) -> np.ndarray: ...

    @abstractmethod
    def support(self) -> tuple[float, float]:
        """an interval outside of which the profile vanishes"""

    @abstractmethod
    def to_dict(self) -> dict[str, Any]: ...

    def feature_points(self) -> list[tuple[float, float]]:
        """(location, half width) of features that need dense sampling"""
        return []

    def sample_abscissae(self, count: int) -> np.ndarray:
        """uniform samples on [-1, 1] refined around every declared feature"""
        xs = [np.linspace(-1.0, 1.0, count)]
        for loc, half in self.feature_points():
            xs.append(np.linspace(loc - 3 * half, loc + 3 * half, 65))
        x = np.unique(np.concatenate(xs))
        return x[(x >= -1.0) & (x <= 1.0)]


@dataclass(frozen=True)
class ZeroProfile(GraphProfile):
    kind: ClassVar[str] = 'zero'

    def value(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def derivative(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def support(self):
        return 0.0, 0.0

    def to_dict(self):
        return {'kind': self.kind}


@dataclass(frozen=True)
class BumpProfile(GraphProfile):
    """amplitude * exp(1 - 1/(1 - s^2)), s = (x - center) / half_width"""

    amplitude: float
    center: float = 0.0
    half_width: float = 0.9
    kind: ClassVar[str] = 'bump'

    def _s(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.half_width

    def value(self, x):
        return self.amplitude * compact_bump(self._s(x))[0]

    def derivative(self, x):
        return self.amplitude * compact_bump(self._s(x))[1] / self.half_width

    def support(self):
        return self.center - self.half_width, self.center + self.half_width

    def to_dict(self):
        return {
            'kind': self.kind,
            'amplitude': self.amplitude,
            'center': self.center,
            'halfWidth': self.half_width,
        }


def _ramp_integral(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Q(u) = integral of the linear ramp clip((u+1)/2, 0, 1) from -1, and the ramp itself"""
    ramp = np.clip((u + 1.0) / 2.0, 0.0, 1.0)
    q = np.where(u <= -1.0, 0.0, np.where(u >= 1.0, u, (u + 1.0) ** 2 / 4.0))
    return q, ramp


@dataclass(frozen=True)
class RampedPolylineProfile(GraphProfile):
    """
    A polyline graph whose corners are replaced by quadratic fillets.

    The slope starts at 0 at x = -1 and changes by slope_changes[j] across the window
    breaks[j] +/- half_widths[j].  The profile is exactly C1 and |f'| never exceeds the largest
    polyline slope.
    """

    breaks: tuple[float, ...]
    slope_changes: tuple[float, ...]
    half_widths: tuple[float, ...]
    kind: ClassVar[str] = 'ramped_polyline'

    def __post_init__(self):
        if not len(self.breaks) == len(self.slope_changes) == len(self.half_widths):
            raise ValueError('breaks, slope changes and half widths must have equal length')
        if any(w <= 0 for w in self.half_widths):
            raise ValueError('fillet half widths must be positive')
        b = np.asarray(self.breaks)
        if np.any(np.diff(b) <= 0):
            raise ValueError('breaks must be strictly increasing')

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for b, ds, w in zip(self.breaks, self.slope_changes, self.half_widths):
            q, _ = _ramp_integral((x - b) / w)
            out = out + ds * w * q
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for b, ds, w in zip(self.breaks, self.slope_changes, self.half_widths):
            _, r = _ramp_integral((x - b) / w)
            out = out + ds * r
        return out

    def support(self):
        if not self.breaks:
            return 0.0, 0.0
        return self.breaks[0] - self.half_widths[0], self.breaks[-1] + self.half_widths[-1]

    def feature_points(self):
        return list(zip(self.breaks, self.half_widths))

    def sample_abscissae(self, count: int) -> np.ndarray:
        xs = [np.linspace(-1.0, 1.0, count)]
        for j, (b, w) in enumerate(zip(self.breaks, self.half_widths)):
            xs.append(np.linspace(b - 3 * w, b + 3 * w, 65))
            if j + 1 < len(self.breaks):
                # straight runs between neighbouring fillets get their own samples
                xs.append(np.linspace(b, self.breaks[j + 1], 33))
        x = np.unique(np.concatenate(xs))
        return x[(x >= -1.0) & (x <= 1.0)]

    def to_dict(self):
        return {
            'kind': self.kind,
            'breaks': list(self.breaks),
            'slopeChanges': list(self.slope_changes),
            'halfWidths': list(self.half_widths),
        }


@dataclass(frozen=True, eq=False)
class HermiteProfile(GraphProfile):
    """piecewise-cubic profile through samples with prescribed slopes, zero outside them"""

    xs: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    kind: ClassVar[str] = 'hermite'

    def __post_init__(self):
        for name in ('xs', 'values', 'slopes'):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(np.diff(self.xs) <= 0):
            raise ValueError('hermite abscissae must be strictly increasing')
        object.__setattr__(self, '_cached', CubicHermiteSpline(self.xs, self.values, self.slopes))

    def _spline(self):
        return self._cached

    def value(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.xs[0]) & (x <= self.xs[-1])
        return np.where(inside, self._spline()(np.clip(x, self.xs[0], self.xs[-1])), 0.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.xs[0]) & (x <= self.xs[-1])
        return np.where(inside, self._spline()(np.clip(x, self.xs[0], self.xs[-1]), 1), 0.0)

    def support(self):
        return float(self.xs[0]), float(self.xs[-1])

    def to_dict(self):
        return {
            'kind': self.kind,
            'xs': self.xs.tolist(),
            'values': self.values.tolist(),
            'slopes': self.slopes.tolist(),
        }


PROFILE_KINDS: dict[str, type[GraphProfile]] = {
    ZeroProfile.kind: ZeroProfile,
    BumpProfile.kind: BumpProfile,
    RampedPolylineProfile.kind: RampedPolylineProfile,
    HermiteProfile.kind: HermiteProfile,
}


def profile_from_dict(data: dict[str, Any]) -> GraphProfile:
    match data:
        case {'kind': 'zero'}:
            return ZeroProfile()
        case {'kind': 'bump', 'amplitude': amp}:
            return BumpProfile(amp, data.get('center', 0.0), data.get('halfWidth', 0.9))
        case {'kind': 'ramped_polyline', 'breaks': b, 'slopeChanges': s, 'halfWidths': w}:
            return RampedPolylineProfile(tuple(b), tuple(s), tuple(w))
        case {'kind': 'hermite', 'xs': xs, 'values': v, 'slopes': s}:
            return HermiteProfile(np.asarray(xs), np.asarray(v), np.asarray(s))
        case _:
            logger.error('Unknown graph profile descriptor: %s', data)
            raise ValueError(f'Unknown graph profile descriptor: {data}')
