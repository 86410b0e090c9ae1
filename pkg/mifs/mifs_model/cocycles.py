"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Flexible 2x2 cocycles.

A FlexiblePath is a finite t-grid on [-1, 1] with one cocycle per grid point, linearly
interpolated between grid points.  The path is flexible when every matrix moves less than epsilon
along it, the t = -1 product is a contracting homothety, the products for -1 < t < 1 have two
distinct eigenvalues in (0, 1) and the t = 1 product has a unit eigenvalue.
"""

from dataclasses import dataclass, field
from logging import getLogger
from math import ceil
from typing import Any, Sequence

import numpy as np

from mifs.mifs_model.exceptions import InfeasibleEpsilon, SupportTooSmall
from mifs.mifs_model.markov_ifs import Branch, MarkovIfs, PeriodicOrbit, RoundDisc
from mifs.mifs_model.planar_maps import LogBlend, MapChain

logger = getLogger(__name__)

DEFAULT_T_SAMPLES = 201
# span of the log-radius cutoff: the blend's inner disc is r_out * exp(-LOG_BLEND_SPAN)
LOG_BLEND_SPAN = 20.0
EIGEN_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class Cocycle:
    matrices: np.ndarray

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=float).reshape(-1, 2, 2)
        if np.any(np.abs(np.linalg.det(mats)) < 1e-300):
            raise ValueError('cocycle matrices must be invertible')
        object.__setattr__(self, 'matrices', mats)

    def __len__(self):
        return len(self.matrices)

    def product(self) -> np.ndarray:
        """A_{n-1} ... A_0"""
        out = np.eye(2)
        for m in self.matrices:
            out = m @ out
        return out


@dataclass(frozen=True, eq=False)
class FlexiblePath:
    ts: np.ndarray
    matrices: np.ndarray  # shape (T, n, 2, 2)
    epsilon: float

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        mats = np.asarray(self.matrices, dtype=float)
        if mats.ndim != 4 or mats.shape[0] != len(ts) or mats.shape[2:] != (2, 2):
            raise ValueError('path matrices must have shape (len(ts), n, 2, 2)')
        if np.any(np.diff(ts) <= 0):
            raise ValueError('path t-grid must be strictly increasing')
        for anchor in (-1.0, 0.0, 1.0):
            if not np.any(np.abs(ts - anchor) < 1e-12):
                raise ValueError(f'path t-grid must contain {anchor}')
        object.__setattr__(self, 'ts', ts)
        object.__setattr__(self, 'matrices', mats)

    @property
    def period(self) -> int:
        return self.matrices.shape[1]

    def at(self, t: float) -> Cocycle:
        if not -1.0 <= t <= 1.0:
            raise ValueError(f't must lie in [-1, 1], got {t}')
        k = int(np.clip(np.searchsorted(self.ts, t) - 1, 0, len(self.ts) - 2))
        t0, t1 = self.ts[k], self.ts[k + 1]
        w = (t - t0) / (t1 - t0)
        return Cocycle((1 - w) * self.matrices[k] + w * self.matrices[k + 1])

    def to_dict(self) -> dict[str, Any]:
        return {'t': self.ts.tolist(), 'matrices': self.matrices.tolist(), 'epsilon': self.epsilon}

    @classmethod
    def from_knots(
        cls,
        knots_t: Sequence[float],
        knots: Sequence[Sequence[Sequence[Sequence[float]]]],
        epsilon: float,
        samples: int = DEFAULT_T_SAMPLES,
    ) -> 'FlexiblePath':
        """linear interpolation of cocycles given at knots onto a uniform grid of samples"""
        kt = np.asarray(knots_t, dtype=float)
        km = np.asarray(knots, dtype=float)
        ts = np.unique(np.concatenate([np.linspace(-1.0, 1.0, samples), kt]))
        flat = km.reshape(len(kt), -1)
        mats = np.stack([np.interp(ts, kt, flat[:, c]) for c in range(flat.shape[1])], axis=1)
        return cls(ts, mats.reshape(len(ts), *km.shape[1:]), epsilon)


@dataclass
class FlexibilityReport:
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)
    grid: int = 0

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            'passed': self.passed,
            'grid': self.grid,
            'checks': {k: {'passed': ok, 'margin': m} for k, (ok, m) in self.checks.items()},
        }


def _products(path: FlexiblePath) -> np.ndarray:
    out = np.broadcast_to(np.eye(2), (len(path.ts), 2, 2)).copy()
    for i in range(path.period):
        out = path.matrices[:, i] @ out
    return out


def validate_flexible(path: FlexiblePath, base: Cocycle | None = None) -> FlexibilityReport:
    report = FlexibilityReport(grid=len(path.ts))
    # (1) diameter of every index
    diam = 0.0
    for i in range(path.period):
        m = path.matrices[:, i]
        diffs = m[:, None] - m[None, :]
        diam = max(diam, float(np.max(np.linalg.norm(diffs, ord=2, axis=(2, 3)))))
    report.checks['diameter'] = (diam < path.epsilon, path.epsilon - diam)

    zero = int(np.argmin(np.abs(path.ts)))
    if base is not None:
        err = float(np.max(np.abs(path.matrices[zero] - base.matrices)))
        report.checks['baseAtZero'] = (err < 1e-12, -err)
    else:
        report.checks['baseAtZero'] = (True, 0.0)

    prods = _products(path)
    eig = np.linalg.eigvals(prods)
    # (3) interior products: two distinct eigenvalues in (0, 1)
    interior = (path.ts > -1.0 + 1e-12) & (path.ts < 1.0 - 1e-12)
    ev = eig[interior]
    real = np.all(np.abs(ev.imag) < 1e-14, axis=1)
    vals = np.sort(ev.real, axis=1)
    margin3 = 0.0
    if len(vals):
        margin3 = float(np.min([vals[:, 0], 1.0 - vals[:, 1], vals[:, 1] - vals[:, 0]]))
    ok3 = bool(np.all(real)) and margin3 > 1e-12
    report.checks['interiorEigenvalues'] = (ok3, margin3 if np.all(real) else -1.0)
    # (4) the t = -1 product is mu Id with 0 < mu < 1
    first = prods[0]
    mu = first[0, 0]
    off = max(abs(first[0, 1]), abs(first[1, 0]), abs(first[1, 1] - mu))
    ok4 = off < EIGEN_TOLERANCE and 0 < mu < 1
    margin4 = min(mu, 1 - mu) if off < EIGEN_TOLERANCE else -off
    report.checks['homothetyAtMinusOne'] = (ok4, margin4)
    # (5) the smaller eigenvalue stays below 1 along the whole path
    lam_min = np.min(np.abs(eig), axis=1)
    report.checks['contractingMin'] = (bool(np.max(lam_min) < 1), float(1 - np.max(lam_min)))
    # (6) unit eigenvalue at t = 1
    gap6 = float(np.min(np.abs(eig[-1] - 1.0)))
    report.checks['unitEigenvalueAtOne'] = (gap6 < EIGEN_TOLERANCE, -gap6)
    if not report.passed:
        failed = [k for k, (ok, _) in report.checks.items() if not ok]
        logger.info('flexible path failed: %s', ', '.join(failed))
    return report


def canonical_flexible_path(
    n: int, lambda1: float, epsilon: float, samples: int = DEFAULT_T_SAMPLES
) -> FlexiblePath:
    """
    diagonal path diag(a, b(t)) at every index, a = lambda1^(1/n), b running linearly from a at
    t = -1 to 1 at t = 1; every matrix moves by exactly 1 - a
    """
    if n < 1 or not 0 < lambda1 < 1:
        raise ValueError('need n >= 1 and 0 < lambda1 < 1')
    a = lambda1 ** (1.0 / n)
    if 1 - a >= epsilon:
        logger.error('period %d cannot carry lambda1=%s with epsilon=%s', n, lambda1, epsilon)
        raise InfeasibleEpsilon(
            f'period {n} needs per-matrix change {1 - a:.4g} >= epsilon {epsilon}'
        )
    ts = np.linspace(-1.0, 1.0, samples)
    b = a + (1 - a) * (ts + 1) / 2
    mats = np.zeros((samples, n, 2, 2))
    mats[:, :, 0, 0] = a
    mats[:, :, 1, 1] = b[:, None]
    return FlexiblePath(ts, mats, epsilon)


def derivative_cocycle(ifs: MarkovIfs, orbit: PeriodicOrbit) -> Cocycle:
    mats = [
        ifs.branches[letter].map.jacobian(p)
        for letter, p in zip(orbit.word, orbit.orbit_points)
    ]
    return Cocycle(np.array(mats))


def locate_on_path(path: FlexiblePath, cocycle: Cocycle, tolerance: float = 1e-8) -> float | None:
    """a grid t with path(t) equal to the cocycle, or None"""
    if len(cocycle) != path.period:
        return None
    err = np.max(np.abs(path.matrices - cocycle.matrices[None]), axis=(1, 2, 3))
    hits = np.flatnonzero(err < tolerance)
    return float(path.ts[hits[0]]) if len(hits) else None


def realize_deformation(
    ifs: MarkovIfs,
    orbit: PeriodicOrbit,
    path: FlexiblePath,
    t_end: float,
    support_radius: float,
    obstructions: Sequence[RoundDisc] = (),
    inner_radius: float | None = None,
) -> MarkovIfs:
    """
    Perturb the branches along the orbit so that the derivative cocycle becomes path(t_end).

    Each orbit branch f is replaced by f o phi, where phi fixes the orbit point, equals the
    identity outside B(p, support_radius) and is linear on B(p, inner_radius) (by default
    support_radius * exp(-LOG_BLEND_SPAN)).  Moving toward t = 1 the change is split into stages
    that each move the matrices by less than epsilon / 4.
    """
    if not ifs.is_separated(orbit):
        raise ValueError('realize_deformation needs a separated orbit')
    current = derivative_cocycle(ifs, orbit)
    t0 = locate_on_path(path, current)
    if t0 is None:
        logger.error('derivative cocycle of orbit %s is not on the flexible path', orbit.word)
        raise ValueError('derivative cocycle along the orbit is not a sample of the path')
    for p in orbit.orbit_points:
        for obs in obstructions:
            if np.linalg.norm(p - obs.center) < support_radius + obs.radius:
                logger.error('support radius %s meets an obstruction at %s', support_radius, obs)
                raise SupportTooSmall(
                    f'support B({p.tolist()}, {support_radius}) meets a registered obstruction'
                )
    if abs(t_end - t0) < 1e-15:
        return ifs
    target = path.at(t_end)
    step = path.epsilon / 4
    jump = max(
        float(np.linalg.norm(b - a, ord=2)) for a, b in zip(current.matrices, target.matrices)
    )
    stages = max(1, ceil(jump / step)) if t_end > t0 else 1
    ts = np.linspace(t0, t_end, stages + 1)
    r_in = support_radius * np.exp(-LOG_BLEND_SPAN) if inner_radius is None else inner_radius
    if not 0 < r_in < support_radius:
        raise ValueError(f'inner radius {r_in} must lie in (0, {support_radius})')
    branches = list(ifs.branches)
    for i, (letter, p) in enumerate(zip(orbit.word, orbit.orbit_points)):
        a_inv = np.linalg.inv(current.matrices[i])
        # inner matrices M_k = A^-1 A_{t_k}; stage k carries M_{k-1}^-1 M_k
        ms = [a_inv @ path.at(t).matrices[i] for t in ts]
        ms[-1] = a_inv @ target.matrices[i]
        blends = [
            LogBlend(p, np.eye(2), np.linalg.inv(ms[k - 1]) @ ms[k], r_in, support_radius)
            for k in range(stages, 0, -1)
        ]
        old = branches[letter]
        branches[letter] = Branch(
            old.dom, old.target, MapChain(tuple(blends) + old.map.primitives), old.label
        )
    logger.info(
        'realised deformation t=%.4g -> %.4g along %s in %d stage(s)', t0, t_end, orbit.word, stages
    )
    return MarkovIfs(ifs.discs, tuple(branches))


def path_from_dict(data: dict[str, Any], samples: int = DEFAULT_T_SAMPLES) -> FlexiblePath:
    match data:
        case {'canonical': {'n': n, 'lambda1': lam, 'epsilon': eps}}:
            return canonical_flexible_path(n, lam, eps, samples)
        case {'t': ts, 'matrices': mats, 'epsilon': eps}:
            return FlexiblePath.from_knots(ts, mats, eps, samples)
        case _:
            logger.error('Unrecognised flexible path block: %s', data)
            raise ValueError(f'Unrecognised flexible path block: {data}')
