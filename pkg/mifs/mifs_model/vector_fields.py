"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Compactly supported planar vector fields.  A flow primitive holds one of these descriptors and
integrates it; every descriptor supplies its value, its exact (or finite-difference) derivative,
a conservative support test and a JSON form.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from logging import getLogger
from typing import Any, ClassVar

import numpy as np
from scipy.spatial import cKDTree

from mifs.mifs_model.bumps import THETA_DELTA0, compact_bump, plateau, smooth_step, theta
from mifs.mifs_model.curves import CurveSample, GraphProfile, profile_from_dict

logger = getLogger(__name__)


class VectorField(ABC):
    kind: ClassVar[str] = ''

    @abstractmethod
    def value(self, pts: np.ndarray) -> np.ndarray:
        """(N, 2) field values"""

    @abstractmethod
    def derivative(self, pts: np.ndarray) -> np.ndarray:
        """(N, 2, 2) derivative matrices"""

    @abstractmethod
    def support_mask(self, pts: np.ndarray) -> np.ndarray:
        """True wherever the field may be non-zero (a superset of the support)"""

    @abstractmethod
    def to_dict(self) -> dict[str, Any]: ...

    def scaled(self, factor: float) -> 'VectorField':
        return ScaledField(self, factor)


@dataclass(frozen=True)
class ZeroField(VectorField):
    kind: ClassVar[str] = 'zero'

    def value(self, pts):
        return np.zeros_like(pts)

    def derivative(self, pts):
        return np.zeros((len(pts), 2, 2))

    def support_mask(self, pts):
        return np.zeros(len(pts), dtype=bool)

    def to_dict(self):
        return {'kind': self.kind}


@dataclass(frozen=True, eq=False)
class TranslationBumpField(VectorField):
    """rho(|p - c| / r) * v with the normalised compact bump rho"""

    center: np.ndarray
    radius: float
    vector: np.ndarray
    kind: ClassVar[str] = 'translation_bump'

    def __post_init__(self):
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float))
        object.__setattr__(self, 'vector', np.asarray(self.vector, dtype=float))
        if self.radius <= 0:
            raise ValueError('bump radius must be positive')

    def value(self, pts):
        s = np.linalg.norm(pts - self.center, axis=1) / self.radius
        rho, _ = compact_bump(s)
        return rho[:, None] * self.vector

    def derivative(self, pts):
        diff = pts - self.center
        s = np.linalg.norm(diff, axis=1) / self.radius
        rho, _ = compact_bump(s)
        w = np.where(s < 1, 1 - s**2, 1.0)
        # grad rho = rho * (-2 / w^2) * diff / r^2, regular at the centre
        grad = (rho * -2.0 / w**2)[:, None] * diff / self.radius**2
        return np.einsum('i,nj->nij', self.vector, grad)

    def support_mask(self, pts):
        return np.linalg.norm(pts - self.center, axis=1) < self.radius

    def to_dict(self):
        return {
            'kind': self.kind,
            'center': self.center.tolist(),
            'radius': self.radius,
            'vector': self.vector.tolist(),
        }


@dataclass(frozen=True)
class ScaledField(VectorField):
    field: VectorField
    factor: float
    kind: ClassVar[str] = 'scaled'

    def value(self, pts):
        return self.factor * self.field.value(pts)

    def derivative(self, pts):
        return self.factor * self.field.derivative(pts)

    def support_mask(self, pts):
        return self.field.support_mask(pts)

    def scaled(self, factor):
        return ScaledField(self.field, self.factor * factor)

    def to_dict(self):
        return {'kind': self.kind, 'field': self.field.to_dict(), 'factor': self.factor}


@dataclass(frozen=True)
class SumField(VectorField):
    """sum of fields, evaluated only where each summand may be non-zero"""

    fields: tuple[VectorField, ...]
    kind: ClassVar[str] = 'sum'

    def value(self, pts):
        out = np.zeros_like(pts)
        for f in self.fields:
            m = f.support_mask(pts)
            if m.any():
                out[m] += f.value(pts[m])
        return out

    def derivative(self, pts):
        out = np.zeros((len(pts), 2, 2))
        for f in self.fields:
            m = f.support_mask(pts)
            if m.any():
                out[m] += f.derivative(pts[m])
        return out

    def support_mask(self, pts):
        mask = np.zeros(len(pts), dtype=bool)
        for f in self.fields:
            mask |= f.support_mask(pts)
        return mask

    def to_dict(self):
        return {'kind': self.kind, 'fields': [f.to_dict() for f in self.fields]}


@dataclass(frozen=True, eq=False)
class ConjugatedField(VectorField):
    """
    Push-forward of a chart field under the affine chart u -> A u + b.
    The flow of the result is C o flow o C^-1.
    """

    field: VectorField
    matrix: np.ndarray
    offset: np.ndarray
    kind: ClassVar[str] = 'conjugated'

    def __post_init__(self):
        object.__setattr__(self, 'matrix', np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, 'offset', np.asarray(self.offset, dtype=float))
        object.__setattr__(self, '_inverse', np.linalg.inv(self.matrix))

    def _to_chart(self, pts):
        return (pts - self.offset) @ self._inverse.T

    def value(self, pts):
        return self.field.value(self._to_chart(pts)) @ self.matrix.T

    def derivative(self, pts):
        d = self.field.derivative(self._to_chart(pts))
        return self.matrix @ d @ self._inverse

    def support_mask(self, pts):
        return self.field.support_mask(self._to_chart(pts))

    def to_dict(self):
        return {
            'kind': self.kind,
            'field': self.field.to_dict(),
            'matrix': self.matrix.tolist(),
            'offset': self.offset.tolist(),
        }


def partition_weight(x, j: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """
    theta(n x - j) / sum_k theta(n x - k), the j-th member of the partition of unity on the
    line subordinate to the intervals ((j - 2 + d0) / n, (j + 2 - d0) / n)
    :return: (value, d/dx)
    """
    x = np.asarray(x, dtype=float)
    base = np.floor(n * x)
    total = np.zeros_like(x)
    dtotal = np.zeros_like(x)
    for off in range(-2, 4):
        k = base + off
        v, dv = theta(n * x - k)
        total += v
        dtotal += n * dv
    own, down = theta(n * x - j)
    down = n * down
    return own / total, (down * total - own * dtotal) / total**2


@dataclass(frozen=True)
class GraphLayerField(VectorField):
    """
    One layer of the graph deformation from profile_from to profile_to.

    The field is Delta(x) * L(x, y) * P(x) d/dy with Delta = (f1 - f0) / layer_count.  The
    localisation L is either a fixed band plateau in y ('band') or theta(n (y - s_i(x))) around
    the current level s_i = f0 + (i / N)(f1 - f0) ('follow').  P is an optional partition
    weight in x.  Wherever L == 1 along the whole trajectory the time-1 map is exactly
    y -> y + P(x) Delta(x).
    """

    profile_from: GraphProfile
    profile_to: GraphProfile
    layer_count: int
    layer_index: int = 0
    localization: str = 'band'
    band_inner: float = 0.08
    band_outer: float = 0.6
    sharpness: float = 1.0
    partition: tuple[int, int] | None = None
    kind: ClassVar[str] = 'graph_layer'

    def __post_init__(self):
        if self.layer_count < 1:
            raise ValueError('layer_count must be positive')
        if self.localization not in ('band', 'follow'):
            raise ValueError(f'unknown layer localisation {self.localization}')

    def _delta(self, x):
        d = (self.profile_to.value(x) - self.profile_from.value(x)) / self.layer_count
        dd = (self.profile_to.derivative(x) - self.profile_from.derivative(x)) / self.layer_count
        return d, dd

    def _localisation(self, x, y):
        """(L, dL/dx, dL/dy)"""
        if self.localization == 'band':
            val, der = plateau(y, self.band_inner, self.band_outer)
            return val, np.zeros_like(val), der
        frac = self.layer_index / self.layer_count
        f0, f1 = self.profile_from, self.profile_to
        s = f0.value(x) + frac * (f1.value(x) - f0.value(x))
        ds = f0.derivative(x) + frac * (f1.derivative(x) - f0.derivative(x))
        val, der = theta(self.sharpness * (y - s))
        return val, -self.sharpness * der * ds, self.sharpness * der

    def _partition(self, x):
        if self.partition is None:
            return np.ones_like(x), np.zeros_like(x)
        j, n = self.partition
        return partition_weight(x, j, n)

    def value(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        d, _ = self._delta(x)
        loc, _, _ = self._localisation(x, y)
        p, _ = self._partition(x)
        out = np.zeros_like(pts)
        out[:, 1] = d * loc * p
        return out

    def derivative(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        d, dd = self._delta(x)
        loc, loc_x, loc_y = self._localisation(x, y)
        p, dp = self._partition(x)
        out = np.zeros((len(pts), 2, 2))
        out[:, 1, 0] = dd * loc * p + d * loc_x * p + d * loc * dp
        out[:, 1, 1] = d * loc_y * p
        return out

    def support_mask(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        lo = min(self.profile_from.support()[0], self.profile_to.support()[0])
        hi = max(self.profile_from.support()[1], self.profile_to.support()[1])
        mask = (x > lo) & (x < hi)
        if self.partition is not None:
            j, n = self.partition
            mask &= np.abs(n * x - j) < 2.0 - THETA_DELTA0
        if self.localization == 'band':
            mask &= np.abs(y) < self.band_outer
        else:
            frac = self.layer_index / self.layer_count
            s = self.profile_from.value(x) + frac * (
                self.profile_to.value(x) - self.profile_from.value(x)
            )
            mask &= np.abs(self.sharpness * (y - s)) < 2.0 - THETA_DELTA0
        return mask

    def to_dict(self):
        out = {
            'kind': self.kind,
            'profileFrom': self.profile_from.to_dict(),
            'profileTo': self.profile_to.to_dict(),
            'layerCount': self.layer_count,
            'layerIndex': self.layer_index,
            'localization': self.localization,
        }
        if self.localization == 'band':
            out |= {'bandInner': self.band_inner, 'bandOuter': self.band_outer}
        else:
            out['sharpness'] = self.sharpness
        if self.partition is not None:
            out['partition'] = list(self.partition)
        return out


def _wendland(s):
    """s (1 - s^2)^3 on |s| < 1 and its derivative"""
    inside = np.abs(s) < 1
    w = np.where(inside, 1 - s**2, 0.0)
    return s * w**3, np.where(inside, w**2 * (1 - 7 * s**2), 0.0)


@dataclass(frozen=True, eq=False)
class NormalScalingField(VectorField):
    """
    log(1 + kappa) * w * H(d / w) * cap(sigma) * n near a curve, where d is the signed normal
    distance, n the unit normal at the nearest point and sigma the arc length of that point.
    The time-1 flow fixes the curve and scales its normal direction by exactly 1 + kappa away
    from the end caps.
    """

    curve: CurveSample
    kappa: float
    support_radius: float
    end_cap_radius: float
    kind: ClassVar[str] = 'normal_scaling'
    _tree: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.curve) < 2:
            raise ValueError('normal scaling needs a curve with at least 2 samples')
        if self.support_radius <= 0 or self.end_cap_radius <= 0:
            raise ValueError('support and end cap radii must be positive')
        if self.kappa <= -1:
            raise ValueError('kappa must exceed -1')
        object.__setattr__(self, '_tree', cKDTree(self.curve.points))
        object.__setattr__(self, '_arc', self.curve.arc_length())

    def _project(self, pts):
        """signed normal distance, unit normal and arc position of the nearest curve point"""
        poly = self.curve.points
        _, idx = self._tree.query(pts)
        best_d = np.full(len(pts), np.inf)
        sign_d = np.zeros(len(pts))
        normal = np.zeros_like(pts)
        sigma = np.zeros(len(pts))
        for shift in (-1, 0):
            k = np.clip(idx + shift, 0, len(poly) - 2)
            a, b = poly[k], poly[k + 1]
            ab = b - a
            length = np.linalg.norm(ab, axis=1)
            t = ab / np.where(length > 0, length, 1.0)[:, None]
            u = np.clip(np.einsum('ij,ij->i', pts - a, t), 0.0, length)
            foot = a + u[:, None] * t
            dist = np.linalg.norm(pts - foot, axis=1)
            n = np.stack([-t[:, 1], t[:, 0]], axis=1)
            better = dist < best_d
            best_d = np.where(better, dist, best_d)
            sign_d = np.where(better, np.einsum('ij,ij->i', pts - foot, n), sign_d)
            normal = np.where(better[:, None], n, normal)
            sigma = np.where(better, self._arc[k] + u, sigma)
        return sign_d, normal, sigma

    def value(self, pts):
        d, n, sigma = self._project(pts)
        w = self.support_radius
        h, _ = _wendland(d / w)
        end = np.minimum(sigma, self._arc[-1] - sigma)
        cap, _ = smooth_step(end / self.end_cap_radius)
        return (np.log1p(self.kappa) * w * h * cap)[:, None] * n

    def derivative(self, pts):
        step = 1e-5 * self.support_radius
        out = np.zeros((len(pts), 2, 2))
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = step
            out[:, :, axis] = (self.value(pts + e) - self.value(pts - e)) / (2 * step)
        return out

    def support_mask(self, pts):
        dist, _ = self._tree.query(pts)
        spacing = np.max(np.diff(self._arc)) if len(self._arc) > 1 else 0.0
        return dist < self.support_radius + spacing

    def to_dict(self):
        return {
            'kind': self.kind,
            'curve': self.curve.to_dict(),
            'kappa': self.kappa,
            'supportRadius': self.support_radius,
            'endCapRadius': self.end_cap_radius,
        }


@dataclass(frozen=True, eq=False)
class LadderField(VectorField):
    """
    Sum of the conjugates H^k X_k H^-k, k = first, first + 1, ..., under the homothety H of ratio
    lam about center.  Rung X_k must be supported in the annulus lam < |p - center| <= 1, so
    the conjugates have disjoint supports and a point is dispatched to its rung by its radius.
    """

    rungs: tuple[VectorField, ...]
    lam: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    first: int = 1
    kind: ClassVar[str] = 'ladder'

    def __post_init__(self):
        object.__setattr__(self, 'rungs', tuple(self.rungs))
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float))
        if not 0 < self.lam < 1:
            raise ValueError('ladder ratio must lie in (0, 1)')

    def _dispatch(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """(rung index or -1, the point pulled back into the base annulus)"""
        rel = pts - self.center
        r = np.linalg.norm(rel, axis=1)
        with np.errstate(divide='ignore'):
            level = np.floor(np.log(np.where(r > 0, r, np.inf)) / np.log(self.lam))
        idx = np.where(np.isfinite(level), level - self.first, -1).astype(int)
        idx[(idx < 0) | (idx >= len(self.rungs))] = -1
        scale = self.lam ** np.where(idx >= 0, idx + self.first, 0)
        return idx, self.center + rel / scale[:, None]

    def value(self, pts):
        idx, base = self._dispatch(pts)
        out = np.zeros_like(pts)
        for k in np.unique(idx[idx >= 0]):
            m = idx == k
            out[m] = self.lam ** (k + self.first) * self.rungs[k].value(base[m])
        return out

    def derivative(self, pts):
        idx, base = self._dispatch(pts)
        out = np.zeros((len(pts), 2, 2))
        for k in np.unique(idx[idx >= 0]):
            m = idx == k
            out[m] = self.rungs[k].derivative(base[m])
        return out

    def support_mask(self, pts):
        idx, base = self._dispatch(pts)
        mask = np.zeros(len(pts), dtype=bool)
        for k in np.unique(idx[idx >= 0]):
            m = idx == k
            mask[m] = self.rungs[k].support_mask(base[m])
        return mask

    def to_dict(self):
        return {
            'kind': self.kind,
            'rungs': [f.to_dict() for f in self.rungs],
            'lam': self.lam,
            'center': self.center.tolist(),
            'first': self.first,
        }


def field_from_dict(data: dict[str, Any]) -> VectorField:
    match data:
        case {'kind': 'zero'}:
            return ZeroField()
        case {'kind': 'translation_bump', 'center': c, 'radius': r, 'vector': v}:
            return TranslationBumpField(np.asarray(c), r, np.asarray(v))
        case {'kind': 'scaled', 'field': f, 'factor': k}:
            return ScaledField(field_from_dict(f), k)
        case {'kind': 'sum', 'fields': fs}:
            return SumField(tuple(field_from_dict(f) for f in fs))
        case {'kind': 'conjugated', 'field': f, 'matrix': m, 'offset': b}:
            return ConjugatedField(field_from_dict(f), np.asarray(m), np.asarray(b))
        case {'kind': 'graph_layer', 'profileFrom': p0, 'profileTo': p1, 'layerCount': n}:
            part = data.get('partition')
            return GraphLayerField(
                profile_from_dict(p0),
                profile_from_dict(p1),
                n,
                data.get('layerIndex', 0),
                data.get('localization', 'band'),
                data.get('bandInner', 0.08),
                data.get('bandOuter', 0.6),
                data.get('sharpness', 1.0),
                tuple(part) if part is not None else None,
            )
        case {'kind': 'normal_scaling', 'curve': c, 'kappa': k}:
            return NormalScalingField(
                CurveSample.from_dict(c), k, data['supportRadius'], data['endCapRadius']
            )
        case {'kind': 'ladder', 'rungs': rs, 'lam': lam}:
            return LadderField(
                tuple(field_from_dict(r) for r in rs),
                lam,
                np.asarray(data.get('center', [0.0, 0.0])),
                data.get('first', 1),
            )
        case _:
            logger.error('Unknown vector field descriptor: %s', data)
            raise ValueError(f'Unknown vector field descriptor: {data}')
