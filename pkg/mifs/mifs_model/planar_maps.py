"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Planar map primitives and chains.

Every primitive acts on an (N, 2) array of points (a single (2,) point is accepted too) and
returns Jacobians as an (N, 2, 2) array.  Primitives are frozen dataclasses with a JSON form
keyed on their 'kind'; a MapChain is applied left to right.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from logging import getLogger
from typing import Any, ClassVar, Sequence

import numpy as np

from mifs.mifs_model.bumps import log_radius_step, plateau
from mifs.mifs_model.curves import CurveSample
from mifs.mifs_model.exceptions import DomainError, NumericFailure
from mifs.mifs_model.vector_fields import (
    NormalScalingField,
    VectorField,
    ZeroField,
    field_from_dict,
)

logger = getLogger(__name__)

DEFAULT_INTEGRATION_STEPS = 64
BISECTION_ROUNDS = 64
NEWTON_ROUNDS = 8


def as_points(p) -> tuple[np.ndarray, bool]:
    """coerce to an (N, 2) float array, reporting whether a single point was given"""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 1:
        if arr.shape != (2,):
            raise ValueError(f'a point must have 2 coordinates, got shape {arr.shape}')
        return arr[None, :], True
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f'points must have shape (N, 2), got {arr.shape}')
    return arr, False


def _single(arr: np.ndarray, single: bool) -> np.ndarray:
    return arr[0] if single else arr


class Primitive(ABC):
    """a planar diffeomorphism onto its image with an exact inverse and derivative"""

    kind: ClassVar[str] = ''

    def apply(self, p) -> np.ndarray:
        pts, single = as_points(p)
        return _single(self._apply(pts), single)

    def apply_inverse(self, p) -> np.ndarray:
        pts, single = as_points(p)
        return _single(self._apply_inverse(pts), single)

    def jacobian(self, p) -> np.ndarray:
        pts, single = as_points(p)
        return _single(self._jacobian(pts), single)

    @abstractmethod
    def _apply(self, pts: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _apply_inverse(self, pts: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _jacobian(self, pts: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def to_dict(self) -> dict[str, Any]: ...


@dataclass(frozen=True, eq=False)
class Affine(Primitive):
    """p -> M p + b"""

    matrix: np.ndarray
    offset: np.ndarray
    kind: ClassVar[str] = 'affine'

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).reshape(2, 2)
        b = np.asarray(self.offset, dtype=float).reshape(2)
        if abs(np.linalg.det(m)) < 1e-300:
            raise ValueError('affine primitive needs an invertible matrix')
        object.__setattr__(self, 'matrix', m)
        object.__setattr__(self, 'offset', b)

    def _apply(self, pts):
        return pts @ self.matrix.T + self.offset

    def _apply_inverse(self, pts):
        return np.linalg.solve(self.matrix, (pts - self.offset).T).T

    def _jacobian(self, pts):
        return np.broadcast_to(self.matrix, (len(pts), 2, 2)).copy()

    def to_dict(self):
        return {'kind': self.kind, 'matrix': self.matrix.tolist(), 'offset': self.offset.tolist()}


@dataclass(frozen=True, eq=False)
class Homothety(Primitive):
    """p -> c + factor (p - c)"""

    factor: float
    center: np.ndarray

    kind: ClassVar[str] = 'homothety'

    def __post_init__(self):
        if self.factor == 0:
            raise ValueError('homothety factor must be non-zero')
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float).reshape(2))

    def _apply(self, pts):
        return self.center + self.factor * (pts - self.center)

    def _apply_inverse(self, pts):
        return self.center + (pts - self.center) / self.factor

    def _jacobian(self, pts):
        return np.broadcast_to(self.factor * np.eye(2), (len(pts), 2, 2)).copy()

    def to_dict(self):
        return {'kind': self.kind, 'factor': self.factor, 'center': self.center.tolist()}


def _bisect_increasing(func, target, lo, hi, rounds: int = BISECTION_ROUNDS):
    """vectorised bisection for an increasing func on [lo, hi]"""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(rounds):
        mid = 0.5 * (lo + hi)
        above = func(mid) > target
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


def newton_polish(func, derivative, target, y, rounds: int = NEWTON_ROUNDS):
    """Newton steps on func(y) = target, each kept only where it lowers the residual"""
    y = np.array(y, dtype=float)
    resid = func(y) - target
    for _ in range(rounds):
        slope = derivative(y)
        usable = np.abs(slope) > 0
        trial = np.where(usable, y - resid / np.where(usable, slope, 1.0), y)
        trial_resid = func(trial) - target
        better = np.abs(trial_resid) < np.abs(resid)
        if not better.any():
            break
        y = np.where(better, trial, y)
        resid = np.where(better, trial_resid, resid)
    return y


@dataclass(frozen=True)
class CubicSaddleNode:
    """k(y) = y - c y^3, the one-dimensional saddle-node germ"""

    c: float = 1.0
    kind: ClassVar[str] = 'cubic'

    def __post_init__(self):
        if self.c < 0:
            raise ValueError('cubic coefficient must be non-negative')

    def value(self, y):
        return y - self.c * y**3

    def derivative(self, y):
        return 1 - 3 * self.c * y**2

    def monotone_radius(self) -> float:
        return np.inf if self.c == 0 else 1 / np.sqrt(3 * self.c)

    def to_dict(self):
        return {'kind': self.kind, 'c': self.c}


@dataclass(frozen=True)
class DiagonalSaddleNode(Primitive):
    """(x, y) -> (lambda0 x, k(y)) with k(0) = 0, k'(0) = 1"""

    lambda0: float
    k: CubicSaddleNode
    eps0: float
    kind: ClassVar[str] = 'diagonal_saddle_node'

    def __post_init__(self):
        if not 0 < self.lambda0 < 1:
            raise ValueError('lambda0 must lie in (0, 1)')
        if not 0 < self.eps0 < self.k.monotone_radius():
            raise ValueError('eps0 must be positive and inside the monotone range of k')
        inside = [abs(self.k.value(s * self.eps0)) < self.eps0 for s in (1.0, -1.0)]
        if not all(inside):
            raise ValueError('k must map [-eps0, eps0] strictly into itself')

    def _check_domain(self, pts):
        """k is only invertible on its monotone range"""
        r = self.k.monotone_radius()
        if np.any(np.abs(pts[:, 1]) >= r):
            logger.error('saddle-node normal form applied outside |y| < %.4g', r)
            raise DomainError(f'point outside the monotone range |y| < {r:.4g} of the normal form')

    def _apply(self, pts):
        self._check_domain(pts)
        return np.stack([self.lambda0 * pts[:, 0], self.k.value(pts[:, 1])], axis=1)

    def _apply_inverse(self, pts):
        r = self.k.monotone_radius()
        r = min(r, 1e6)
        top = self.k.value(r)
        if np.any(np.abs(pts[:, 1]) > top):
            logger.error('saddle-node inverse requested outside the image of its monotone range')
            raise DomainError('point outside the image of the saddle-node normal form')
        y = _bisect_increasing(self.k.value, pts[:, 1], -r, r)
        y = newton_polish(self.k.value, self.k.derivative, pts[:, 1], y)
        return np.stack([pts[:, 0] / self.lambda0, y], axis=1)

    def _jacobian(self, pts):
        self._check_domain(pts)
        out = np.zeros((len(pts), 2, 2))
        out[:, 0, 0] = self.lambda0
        out[:, 1, 1] = self.k.derivative(pts[:, 1])
        return out

    def to_dict(self):
        return {
            'kind': self.kind,
            'lambda0': self.lambda0,
            'k': self.k.to_dict(),
            'eps0': self.eps0,
        }


@dataclass(frozen=True)
class BlendedSaddleNode(Primitive):
    """
    (x, y) -> (lam x, lam y + chi(|p|) (k(y) - lam y))

    The saddle-node normal form near the origin, glued to the homothety of ratio lam outside the
    radius 'outer'.  The x-contraction is exactly lam everywhere.
    With radial='log' the cutoff chi is smooth in log |p| instead of |p|.
    """

    lam: float
    k: CubicSaddleNode
    inner: float
    outer: float
    radial: str = 'plateau'
    kind: ClassVar[str] = 'blended_saddle_node'

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValueError('lam must lie in (0, 1)')
        if not 0 < self.inner < self.outer <= self.k.monotone_radius():
            raise ValueError('need 0 < inner < outer inside the monotone range of k')
        if self.radial not in ('plateau', 'log'):
            raise ValueError(f'unknown radial cutoff {self.radial!r}')
        # the second component must stay increasing in y for the inverse to exist
        grid = np.linspace(-self.outer, self.outer, 81)
        xx, yy = np.meshgrid(grid, grid)
        pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
        slope = self._jacobian(pts)[:, 1, 1].min()
        if slope <= 0:
            raise ValueError(f'blended saddle node folds (min dg/dy = {slope:.3g})')

    def _chi(self, pts):
        r = np.linalg.norm(pts, axis=1)
        if self.radial == 'log':
            return r, *log_radius_step(r, self.inner, self.outer)
        return r, *plateau(r, self.inner, self.outer)

    def _second(self, x, y):
        pts = np.stack([x, y], axis=1)
        _, chi, _ = self._chi(pts)
        return self.lam * y + chi * (self.k.value(y) - self.lam * y)

    def _apply(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([self.lam * x, self._second(x, y)], axis=1)

    def _apply_inverse(self, pts):
        x = pts[:, 0] / self.lam
        target = pts[:, 1]
        bound = np.maximum(self.outer, np.abs(target) / self.lam) * 1.001
        y = _bisect_increasing(lambda v: self._second(x, v), target, -bound, bound)
        y = newton_polish(
            lambda v: self._second(x, v),
            lambda v: self._jacobian(np.stack([x, v], axis=1))[:, 1, 1],
            target,
            y,
        )
        return np.stack([x, y], axis=1)

    def _jacobian(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        r, chi, dchi = self._chi(pts)
        safe = np.where(r > 0, r, 1.0)
        gap = self.k.value(y) - self.lam * y
        out = np.zeros((len(pts), 2, 2))
        out[:, 0, 0] = self.lam
        out[:, 1, 0] = dchi * x / safe * gap
        out[:, 1, 1] = self.lam + chi * (self.k.derivative(y) - self.lam) + dchi * y / safe * gap
        return out

    def to_dict(self):
        return {
            'kind': self.kind,
            'lam': self.lam,
            'k': self.k.to_dict(),
            'inner': self.inner,
            'outer': self.outer,
            'radial': self.radial,
        }


def integrate_flow(
    field: VectorField, pts: np.ndarray, steps: int, with_jacobian: bool = True
) -> tuple[np.ndarray, np.ndarray | None]:
    """
    classical RK4 for the time-1 map of field, integrating the variational equation alongside
    :return: (end points, Jacobians of the time-1 map or None)
    """
    out = pts.copy()
    jac = np.broadcast_to(np.eye(2), (len(pts), 2, 2)).copy() if with_jacobian else None
    moving = field.support_mask(pts)
    if not moving.any():
        return out, jac
    y = pts[moving].copy()
    j = np.broadcast_to(np.eye(2), (len(y), 2, 2)).copy()
    h = 1.0 / steps
    for _ in range(steps):
        k1 = field.value(y)
        y2 = y + 0.5 * h * k1
        k2 = field.value(y2)
        y3 = y + 0.5 * h * k2
        k3 = field.value(y3)
        y4 = y + h * k3
        k4 = field.value(y4)
        if with_jacobian:
            a1 = field.derivative(y) @ j
            a2 = field.derivative(y2) @ (j + 0.5 * h * a1)
            a3 = field.derivative(y3) @ (j + 0.5 * h * a2)
            a4 = field.derivative(y4) @ (j + h * a3)
            j = j + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(y)):
        logger.error('flow integration produced non-finite values')
        raise NumericFailure('flow integration produced non-finite values')
    out[moving] = y
    if with_jacobian:
        jac[moving] = j
    return out, jac


@dataclass(frozen=True)
class BumpFlow(Primitive):
    """the time-1 map of a compactly supported vector field"""

    field: VectorField
    integration_steps: int = DEFAULT_INTEGRATION_STEPS
    kind: ClassVar[str] = 'bump_flow'

    def __post_init__(self):
        if self.integration_steps < 1:
            raise ValueError('integration_steps must be positive')

    def _apply(self, pts):
        return integrate_flow(self.field, pts, self.integration_steps, with_jacobian=False)[0]

    def _apply_inverse(self, pts):
        back = self.field.scaled(-1.0)
        return integrate_flow(back, pts, self.integration_steps, with_jacobian=False)[0]

    def _jacobian(self, pts):
        return integrate_flow(self.field, pts, self.integration_steps)[1]

    def apply_with_jacobian(self, p) -> tuple[np.ndarray, np.ndarray]:
        pts, single = as_points(p)
        end, jac = integrate_flow(self.field, pts, self.integration_steps)
        return _single(end, single), _single(jac, single)

    def to_dict(self):
        return {
            'kind': self.kind,
            'vectorField': self.field.to_dict(),
            'integrationSteps': self.integration_steps,
        }


@dataclass(frozen=True)
class NormalScalingFlow(Primitive):
    """
    Fixes a curve pointwise and scales its normal bundle by 1 + kappa, supported in the
    support_radius tube around the curve.  The C1 distance to the identity is about |kappa|.
    """

    curve: CurveSample
    kappa: float
    support_radius: float
    end_cap_radius: float
    integration_steps: int = DEFAULT_INTEGRATION_STEPS
    kind: ClassVar[str] = 'normal_scaling_flow'

    def __post_init__(self):
        object.__setattr__(
            self,
            '_flow',
            BumpFlow(
                NormalScalingField(
                    self.curve, self.kappa, self.support_radius, self.end_cap_radius
                ),
                self.integration_steps,
            ),
        )

    def _apply(self, pts):
        return self._flow._apply(pts)

    def _apply_inverse(self, pts):
        return self._flow._apply_inverse(pts)

    def _jacobian(self, pts):
        return self._flow._jacobian(pts)

    def to_dict(self):
        return {
            'kind': self.kind,
            'curve': self.curve.to_dict(),
            'kappa': self.kappa,
            'supportRadius': self.support_radius,
            'endCapRadius': self.end_cap_radius,
            'integrationSteps': self.integration_steps,
        }


@dataclass(frozen=True, eq=False)
class LogBlend(Primitive):
    """
    p -> c + L(r) (p - c) with L(r) = beta(r) B + (1 - beta(r)) A, r = |p - c|, where beta is
    1 inside r_in and 0 outside r_out and is smooth in log r.  Agrees with the linear map A
    (about c) outside r_out and with B inside r_in.
    """

    center: np.ndarray
    outer_matrix: np.ndarray
    inner_matrix: np.ndarray
    r_in: float
    r_out: float
    kind: ClassVar[str] = 'log_blend'

    def __post_init__(self):
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float).reshape(2))
        object.__setattr__(self, 'outer_matrix', np.asarray(self.outer_matrix, dtype=float))
        object.__setattr__(self, 'inner_matrix', np.asarray(self.inner_matrix, dtype=float))
        if not 0 < self.r_in < self.r_out:
            raise ValueError('need 0 < r_in < r_out')

    def _linear(self, q):
        r = np.linalg.norm(q, axis=1)
        beta, dbeta = log_radius_step(r, self.r_in, self.r_out)
        diff = self.inner_matrix - self.outer_matrix
        mats = self.outer_matrix + beta[:, None, None] * diff
        return r, mats, dbeta, diff

    def _apply(self, pts):
        q = pts - self.center
        _, mats, _, _ = self._linear(q)
        return self.center + np.einsum('nij,nj->ni', mats, q)

    def _apply_inverse(self, pts):
        # L(r) q = target is solved by damped Newton from the outer linear guess
        target = pts - self.center
        q = np.linalg.solve(self.outer_matrix, target.T).T
        for _ in range(60):
            _, mats, _, _ = self._linear(q)
            resid = np.einsum('nij,nj->ni', mats, q) - target
            if np.max(np.abs(resid) / (1.0 + np.abs(target)), initial=0.0) < 1e-14:
                break
            step = np.linalg.solve(self._jacobian(q + self.center), resid[..., None])[..., 0]
            q = q - step
        else:
            logger.error('log-blend inverse did not converge')
            raise NumericFailure('log-blend inverse did not converge')
        return self.center + q

    def _jacobian(self, pts):
        q = pts - self.center
        r, mats, dbeta, diff = self._linear(q)
        safe = np.where(r > 0, r, 1.0)
        radial = (dbeta / safe)[:, None] * q
        return mats + np.einsum('ij,nj,nk->nik', diff, q, radial)

    def to_dict(self):
        return {
            'kind': self.kind,
            'center': self.center.tolist(),
            'outerMatrix': self.outer_matrix.tolist(),
            'innerMatrix': self.inner_matrix.tolist(),
            'rIn': self.r_in,
            'rOut': self.r_out,
        }


@dataclass(frozen=True)
class MapChain:
    """a composition p -> f_k(...f_2(f_1(p))) of primitives, applied left to right"""

    primitives: tuple[Primitive, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'primitives', tuple(self.primitives))

    def __len__(self):
        return len(self.primitives)

    def then(self, other: 'MapChain | Primitive') -> 'MapChain':
        """self followed by other"""
        tail = other.primitives if isinstance(other, MapChain) else (other,)
        return MapChain(self.primitives + tail)

    def apply(self, p) -> np.ndarray:
        pts, single = as_points(p)
        for prim in self.primitives:
            pts = prim._apply(pts)
        return _single(pts, single)

    def apply_inverse(self, p) -> np.ndarray:
        pts, single = as_points(p)
        for prim in reversed(self.primitives):
            pts = prim._apply_inverse(pts)
        return _single(pts, single)

    def jacobian(self, p) -> np.ndarray:
        pts, single = as_points(p)
        jac = np.broadcast_to(np.eye(2), (len(pts), 2, 2)).copy()
        for prim in self.primitives:
            jac = prim._jacobian(pts) @ jac
            pts = prim._apply(pts)
        return _single(jac, single)

    def to_dict(self) -> list[dict[str, Any]]:
        return [p.to_dict() for p in self.primitives]

    @classmethod
    def from_dict(cls, data: Sequence[dict[str, Any]]) -> 'MapChain':
        return cls(tuple(primitive_from_dict(d) for d in data))


@dataclass(frozen=True)
class DistanceEstimate:
    total: float
    c0: float
    derivative: float
    samples: int


def c1_distance(
    a: 'MapChain | Primitive',
    b: 'MapChain | Primitive',
    center: Sequence[float],
    radius: float,
    grid: int = 64,
) -> DistanceEstimate:
    """
    sampled C1 distance on a disc: the max over grid samples of
    max(|a(p) - b(p)|, ||Da(p) - Db(p)||_op)
    """
    c = np.asarray(center, dtype=float)
    axis = np.linspace(-radius, radius, grid)
    xx, yy = np.meshgrid(axis, axis)
    offsets = np.stack([xx.ravel(), yy.ravel()], axis=1)
    pts = c + offsets[np.linalg.norm(offsets, axis=1) <= radius]
    c0 = float(np.max(np.linalg.norm(a.apply(pts) - b.apply(pts), axis=1)))
    dj = a.jacobian(pts) - b.jacobian(pts)
    d1 = float(np.max(np.linalg.norm(dj, ord=2, axis=(1, 2))))
    return DistanceEstimate(max(c0, d1), c0, d1, len(pts))


def identity_chain() -> MapChain:
    return MapChain(())


def primitive_from_dict(data: dict[str, Any]) -> Primitive:
    """rebuild a primitive from its JSON form"""
    match data:
        case {'kind': 'affine', 'matrix': m, 'offset': b}:
            return Affine(np.asarray(m), np.asarray(b))
        case {'kind': 'homothety', 'factor': f, 'center': c}:
            return Homothety(f, np.asarray(c))
        case {'kind': 'diagonal_saddle_node', 'lambda0': l0, 'k': k, 'eps0': e}:
            return DiagonalSaddleNode(l0, CubicSaddleNode(k.get('c', 1.0)), e)
        case {'kind': 'blended_saddle_node', 'lam': lam, 'k': k, 'inner': i, 'outer': o}:
            return BlendedSaddleNode(
                lam, CubicSaddleNode(k.get('c', 1.0)), i, o, data.get('radial', 'plateau')
            )
        case {'kind': 'bump_flow', 'vectorField': f}:
            steps = data.get('integrationSteps', DEFAULT_INTEGRATION_STEPS)
            return BumpFlow(field_from_dict(f), steps)
        case {'kind': 'normal_scaling_flow', 'curve': c, 'kappa': k}:
            return NormalScalingFlow(
                CurveSample.from_dict(c),
                k,
                data['supportRadius'],
                data['endCapRadius'],
                data.get('integrationSteps', DEFAULT_INTEGRATION_STEPS),
            )
        case {'kind': 'log_blend', 'center': c, 'outerMatrix': a, 'innerMatrix': b}:
            return LogBlend(np.asarray(c), np.asarray(a), np.asarray(b), data['rIn'], data['rOut'])
        case {'kind': kind} if kind in EXTRA_PRIMITIVE_DECODERS:
            return EXTRA_PRIMITIVE_DECODERS[kind](data)
        case _:
            logger.error('Unknown primitive descriptor: %s', data)
            raise ValueError(f'Unknown primitive descriptor: {data}')


# decoders registered by extensions that define their own primitive kinds
EXTRA_PRIMITIVE_DECODERS: dict[str, Any] = {}


def zero_flow() -> BumpFlow:
    return BumpFlow(ZeroField())
