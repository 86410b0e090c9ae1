"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

The Markov IFS: discs, branches, admissible words, the inverse map, refinements, periodic
orbits, homoclinic points and the numerical certificates built on them.

Branch indices (the letters of a word) are 0-based.  A word w = (j1, ..., jn) is evaluated as
F_w = f_jn o ... o f_j1, so a word's MapChain is the concatenation of its branch chains.
"""

from dataclasses import dataclass, field
from itertools import product
from logging import getLogger
from typing import Any, Sequence

import networkx as nx
import numpy as np
from scipy.interpolate import CubicSpline

from mifs.mifs_model.curves import CurveSample, segment_distances
from mifs.mifs_model.exceptions import DomainError, NoGap, NotInImage
from mifs.mifs_model.planar_maps import MapChain, as_points

logger = getLogger(__name__)

Word = tuple[int, ...]

# points sampled on a disc boundary when validating containment and separation
BOUNDARY_SAMPLES = 512
DEFAULT_SEPARATION_GAP = 1e-3
DEFAULT_CYCLE_BOUND = 8


@dataclass(frozen=True, eq=False)
class RoundDisc:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float).reshape(2))
        if self.radius <= 0:
            raise ValueError(f'disc radius must be positive, got {self.radius}')

    def contains(self, p) -> np.ndarray:
        pts, _ = as_points(p)
        return np.linalg.norm(pts - self.center, axis=1) < self.radius

    def boundary(self, count: int = BOUNDARY_SAMPLES, shrink: float = 1e-9) -> np.ndarray:
        ang = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
        r = self.radius * (1 - shrink)
        return self.center + r * np.stack([np.cos(ang), np.sin(ang)], axis=1)

    def sample(self, grid: int, shrink: float = 1e-9) -> np.ndarray:
        """the grid x grid lattice over the bounding square, restricted to the disc"""
        axis = np.linspace(-self.radius, self.radius, grid) * (1 - shrink)
        xx, yy = np.meshgrid(axis, axis)
        off = np.stack([xx.ravel(), yy.ravel()], axis=1)
        return self.center + off[np.linalg.norm(off, axis=1) < self.radius * (1 - shrink)]

    def representative(self) -> np.ndarray:
        return self.center

    def to_dict(self) -> dict[str, Any]:
        return {'center': self.center.tolist(), 'radius': self.radius}


@dataclass(frozen=True, eq=False)
class ImageDisc:
    """F_w(D) for a base disc D and an admissible word w, kept implicit"""

    base_disc_index: int
    word: Word
    owner: 'MarkovIfs' = field(repr=False)

    @property
    def base(self) -> RoundDisc:
        return self.owner.discs[self.base_disc_index]

    def contains(self, p) -> np.ndarray:
        pts, _ = as_points(p)
        return self.owner.pull_back_member(pts, self.word, self.base_disc_index)

    def boundary(self, count: int = BOUNDARY_SAMPLES, shrink: float = 1e-9) -> np.ndarray:
        return self.owner.word_chain(self.word).apply(self.base.boundary(count, shrink))

    def sample(self, grid: int, shrink: float = 1e-9) -> np.ndarray:
        return self.owner.word_chain(self.word).apply(self.base.sample(grid, shrink))

    def representative(self) -> np.ndarray:
        return self.owner.word_chain(self.word).apply(self.base.center)

    def to_dict(self) -> dict[str, Any]:
        return {'baseDiscIndex': self.base_disc_index, 'word': list(self.word)}


Disc = RoundDisc | ImageDisc


@dataclass(frozen=True)
class Branch:
    dom: int
    target: int
    map: MapChain
    # the base-IFS letter this branch restricts (refinements keep the original map)
    label: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {'dom': self.dom, 'target': self.target, 'map': self.map.to_dict()}


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    point: np.ndarray
    word: Word
    period: int
    eigen: tuple
    orbit_points: np.ndarray
    discs: tuple[int, ...]
    non_contraction: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            'point': np.asarray(self.point).tolist(),
            'word': list(self.word),
            'period': self.period,
            'eigen': [complex(e).real if np.isreal(e) else [e.real, e.imag] for e in self.eigen],
            'nonContraction': self.non_contraction,
        }


@dataclass(frozen=True, eq=False)
class HomoclinicPoint:
    point: np.ndarray
    of_orbit: PeriodicOrbit
    word: Word
    transit_steps: int


@dataclass
class ValidationReport:
    containment: list[tuple[int, float]] = field(default_factory=list)
    separations: list[tuple[int, int, float]] = field(default_factory=list)
    disc_separations: list[tuple[int, int, float]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.failures


@dataclass(frozen=True)
class StableCertificate:
    """numerical evidence that the whole disc lies in the stable set of the orbit"""

    passed: bool
    iterations: int
    grid: int
    shrink_radius: float
    max_final_distance: float
    lipschitz: float

    def to_dict(self) -> dict[str, Any]:
        return {
            'passed': self.passed,
            'iterations': self.iterations,
            'grid': self.grid,
            'shrinkRadius': self.shrink_radius,
            'maxFinalDistance': self.max_final_distance,
            'lipschitz': self.lipschitz,
        }


@dataclass
class HomoclinicReport:
    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())


def primitive_root(word: Sequence[int]) -> Word:
    """the shortest u with word = u^k"""
    w = tuple(word)
    n = len(w)
    for d in range(1, n + 1):
        if n % d == 0 and w[:d] * (n // d) == w:
            return w[:d]
    return w


def _is_lyndon(word: Word) -> bool:
    """strictly smaller than each proper rotation, i.e. a primitive minimal cyclic representative"""
    return all(word < word[i:] + word[:i] for i in range(1, len(word)))


@dataclass(frozen=True)
class MarkovIfs:
    discs: tuple[Disc, ...]
    branches: tuple[Branch, ...]

    def __post_init__(self):
        object.__setattr__(self, 'discs', tuple(self.discs))
        object.__setattr__(self, 'branches', tuple(self.branches))
        for j, b in enumerate(self.branches):
            if not (0 <= b.dom < len(self.discs) and 0 <= b.target < len(self.discs)):
                logger.error('Branch %d refers to a missing disc', j)
                raise ValueError(f'branch {j} refers to a missing disc')

    # ------------------------------------------------------------------ words

    def _check_letters(self, w: Sequence[int]):
        for letter in w:
            if not 0 <= letter < len(self.branches):
                raise IndexError(f'letter {letter} is not a branch index')

    def is_admissible(self, w: Sequence[int]) -> bool:
        self._check_letters(w)
        return all(
            self.branches[a].target == self.branches[b].dom for a, b in zip(w, w[1:])
        )

    def is_cyclic(self, w: Sequence[int]) -> bool:
        return (
            len(w) > 0
            and self.is_admissible(w)
            and self.branches[w[-1]].target == self.branches[w[0]].dom
        )

    def word_chain(self, w: Sequence[int]) -> MapChain:
        self._check_letters(w)
        chain = MapChain(())
        for letter in w:
            chain = chain.then(self.branches[letter].map)
        return chain

    def evaluate_word(self, w: Sequence[int], p) -> np.ndarray:
        if not self.is_admissible(w):
            raise DomainError(f'word {tuple(w)} is not admissible')
        if len(w) == 0:
            return np.asarray(p, dtype=float)
        dom = self.discs[self.branches[w[0]].dom]
        if not np.all(dom.contains(p)):
            logger.error('evaluate_word called with a point outside the first domain disc')
            raise DomainError('point outside the first domain disc of the word')
        return self.word_chain(w).apply(p)

    def _branch_preimage(self, letter: int, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """preimages under one branch and a mask of points that really lie in its image"""
        branch = self.branches[letter]
        try:
            pre = branch.map.apply_inverse(pts)
        except DomainError:
            pre = np.full_like(pts, np.nan)
            for i, p in enumerate(pts):
                try:
                    pre[i] = branch.map.apply_inverse(p)
                except DomainError:
                    continue
        ok = np.all(np.isfinite(pre), axis=1)
        ok[ok] = self.discs[branch.dom].contains(pre[ok])
        return pre, ok

    def pull_back(self, pts: np.ndarray, w: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """
        F_w^-1 on the points of F_w(D_w) along the reversed word
        :return: (mask of points in the image, preimages, valid where the mask is set)
        """
        current = np.array(pts, dtype=float, copy=True)
        ok = np.ones(len(current), dtype=bool)
        for letter in reversed(w):
            if not ok.any():
                break
            pre, good = self._branch_preimage(letter, current[ok])
            idx = np.flatnonzero(ok)
            ok[idx[~good]] = False
            current[idx[good]] = pre[good]
        return ok, current

    def pull_back_member(self, pts: np.ndarray, w: Word, base_disc_index: int) -> np.ndarray:
        """membership in F_w(D_base) by pulling back along the reversed word"""
        ok, _ = self.pull_back(pts, w)
        if len(w) == 0:
            ok &= self.discs[base_disc_index].contains(pts)
        return ok

    def inverse_step_many(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(branch label or -1, preimage) for every point"""
        labels = np.full(len(pts), -1, dtype=int)
        pre_all = np.full_like(pts, np.nan)
        for j, branch in enumerate(self.branches):
            todo = (labels < 0) & self.discs[branch.target].contains(pts)
            if not todo.any():
                continue
            pre, ok = self._branch_preimage(j, pts[todo])
            idx = np.flatnonzero(todo)[ok]
            labels[idx] = j
            pre_all[idx] = pre[ok]
        return labels, pre_all

    def inverse_step(self, p) -> tuple[int, np.ndarray]:
        pts, _ = as_points(p)
        labels, pre = self.inverse_step_many(pts)
        if labels[0] < 0:
            raise NotInImage(f'point {pts[0].tolist()} is outside every branch image')
        return int(labels[0]), pre[0]

    def disc_index_of(self, p) -> int | None:
        for i, d in enumerate(self.discs):
            if d.contains(p)[0]:
                return i
        return None

    # ------------------------------------------------------------ validation

    def validate(self, gap: float = DEFAULT_SEPARATION_GAP) -> ValidationReport:
        report = ValidationReport()
        for i, j in ((i, j) for i in range(len(self.discs)) for j in range(i + 1, len(self.discs))):
            a, b = self.discs[i], self.discs[j]
            if isinstance(a, RoundDisc) and isinstance(b, RoundDisc):
                sep = float(np.linalg.norm(a.center - b.center) - a.radius - b.radius)
                report.disc_separations.append((i, j, sep))
                if sep <= 0:
                    report.failures.append(f'discs {i} and {j} overlap')
        boundaries = {}
        for j, branch in enumerate(self.branches):
            edge = self.discs[branch.dom].boundary()
            image = branch.map.apply(edge)
            boundaries[j] = image
            target = self.discs[branch.target]
            if isinstance(target, RoundDisc):
                margin = float(target.radius - np.linalg.norm(image - target.center, axis=1).max())
            else:
                margin = 0.0 if np.all(target.contains(image)) else -1.0
            report.containment.append((j, margin))
            if margin < 0 or (margin == 0 and isinstance(target, RoundDisc)):
                report.failures.append(f'image of branch {j} is not inside its target disc')
        count = len(self.branches)
        for j, k in ((j, k) for j in range(count) for k in range(j + 1, count)):
            if self.branches[j].target != self.branches[k].target:
                continue
            sep = float(segment_distances(boundaries[j], boundaries[k]).min())
            _, inside_k = self._branch_preimage(k, boundaries[j])
            _, inside_j = self._branch_preimage(j, boundaries[k])
            if inside_k.any() or inside_j.any():
                sep = -sep
            report.separations.append((j, k, sep))
            if sep < gap:
                report.failures.append(
                    f'images of branches {j} and {k} are not separated (gap {sep:.3g} < {gap})'
                )
        if report.failures:
            logger.warning('IFS validation failed: %s', '; '.join(report.failures))
        return report

    # ------------------------------------------------------------ refinement

    def admissible_words(self, n: int) -> list[Word]:
        if n == 0:
            return [()]
        words = [(j,) for j in range(len(self.branches))]
        for _ in range(n - 1):
            words = [
                w + (j,)
                for w in words
                for j in range(len(self.branches))
                if self.branches[w[-1]].target == self.branches[j].dom
            ]
        return words

    def refine(self, n: int) -> 'MarkovIfs':
        """the n-refinement: discs F_w(D_w) for admissible |w| = n, branches f_i restricted"""
        if n < 0:
            raise ValueError('refinement order must be non-negative')
        if n == 0:
            return self
        if not all(isinstance(d, RoundDisc) for d in self.discs):
            raise ValueError('only a base IFS (round discs) can be refined')
        words = self.admissible_words(n)
        index = {w: i for i, w in enumerate(words)}
        discs = [ImageDisc(self.branches[w[0]].dom, w, self) for w in words]
        branches = []
        for w in words:
            for j, b in enumerate(self.branches):
                if self.branches[w[-1]].target != b.dom:
                    continue
                branches.append(Branch(index[w], index[w[1:] + (j,)], b.map, label=j))
        logger.info(
            'refinement of order %d has %d discs, %d branches', n, len(discs), len(branches)
        )
        return MarkovIfs(tuple(discs), tuple(branches))

    # -------------------------------------------------------------- periodic

    def _lipschitz(self, chain: MapChain, pts: np.ndarray) -> float:
        """max difference quotient over sampled pairs"""
        img = chain.apply(pts)
        d_in = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        d_out = np.linalg.norm(img[:, None, :] - img[None, :, :], axis=2)
        off = d_in > 0
        return float(np.max(d_out[off] / d_in[off])) if off.any() else 0.0

    def find_periodic(
        self, w: Sequence[int], max_iterations: int = 5000, grid: int = 16
    ) -> PeriodicOrbit | None:
        w = tuple(w)
        if not self.is_cyclic(w):
            raise ValueError(f'word {w} is not admissible and cyclically closed')
        disc = self.discs[self.branches[w[0]].dom]
        chain = self.word_chain(w)
        samples = disc.sample(grid)
        lip = self._lipschitz(chain, samples) if len(samples) > 1 else 0.0
        non_contraction = lip >= 1.0
        x = np.asarray(disc.representative(), dtype=float)
        if not non_contraction:
            for _ in range(max_iterations):
                nxt = chain.apply(x)
                if not disc.contains(nxt)[0]:
                    logger.info('fixed point iteration for %s left its disc', w)
                    return None
                done = np.linalg.norm(nxt - x) < 1e-12
                x = nxt
                if done:
                    break
        # Newton polish (or the whole solve for a non-contraction)
        for _ in range(50):
            jac = chain.jacobian(x)
            sys_mat = jac - np.eye(2)
            if abs(np.linalg.det(sys_mat)) < 1e-8:
                break
            step = np.linalg.solve(sys_mat, chain.apply(x) - x)
            x = x - step
            if np.linalg.norm(step) < 1e-15:
                break
        if not disc.contains(x)[0] or np.linalg.norm(chain.apply(x) - x) > 1e-10:
            return None
        root = primitive_root(w)
        eig = np.linalg.eigvals(self.word_chain(root).jacobian(x))
        if np.all(np.abs(eig.imag) < 1e-14):
            eigen = tuple(sorted(float(e) for e in eig.real))
        else:
            eigen = tuple(complex(e) for e in eig)
        pts = [x]
        for letter in root[:-1]:
            pts.append(self.branches[letter].map.apply(pts[-1]))
        return PeriodicOrbit(
            point=x,
            word=root,
            period=len(root),
            eigen=eigen,
            orbit_points=np.array(pts),
            discs=tuple(self.branches[letter].dom for letter in root),
            non_contraction=non_contraction,
        )

    def branch_graph(self) -> nx.DiGraph:
        """letters as nodes, j -> k whenever jk is admissible"""
        g = nx.DiGraph()
        g.add_nodes_from(range(len(self.branches)))
        for j, k in product(range(len(self.branches)), repeat=2):
            if self.branches[j].target == self.branches[k].dom:
                g.add_edge(j, k)
        return g

    def cyclic_words(self, max_length: int = DEFAULT_CYCLE_BOUND) -> list[Word]:
        """primitive admissible cyclic words up to rotation, by walking the branch graph"""
        g = self.branch_graph()
        found: list[Word] = []

        def walk(path: list[int]):
            if g.has_edge(path[-1], path[0]) and _is_lyndon(tuple(path)):
                found.append(tuple(path))
            if len(path) == max_length:
                return
            for nxt in g.successors(path[-1]):
                # a Lyndon word starts with its smallest letter
                if nxt >= path[0]:
                    walk(path + [nxt])

        for start in g.nodes:
            walk([start])
        return sorted(found, key=lambda w: (len(w), w))

    def find_all_periodic(self, max_length: int = DEFAULT_CYCLE_BOUND) -> list[PeriodicOrbit]:
        orbits = []
        for w in self.cyclic_words(max_length):
            orbit = self.find_periodic(w)
            if orbit is not None:
                orbits.append(orbit)
        return orbits

    def is_separated(self, orbit: PeriodicOrbit) -> bool:
        return len(set(orbit.discs)) == len(orbit.discs)

    def large_stable_certificate(
        self,
        orbit: PeriodicOrbit,
        grid: int = 32,
        iterations: int = 200,
        shrink_radius: float = 0.1,
    ) -> StableCertificate:
        chain = self.word_chain(orbit.word)
        disc = self.discs[orbit.discs[0]]
        pts = disc.sample(grid)
        for _ in range(iterations):
            pts = chain.apply(pts)
            if not np.all(np.isfinite(pts)):
                break
        dist = np.linalg.norm(pts - orbit.point, axis=1)
        worst = float(np.max(dist)) if np.all(np.isfinite(dist)) else np.inf
        local = RoundDisc(orbit.point, shrink_radius).sample(12)
        lip = self._lipschitz(chain, local)
        passed = worst < shrink_radius and lip < 1.0
        logger.info(
            'large stable certificate for %s: %s (max distance %.3g, lipschitz %.6f)',
            orbit.word,
            'PASS' if passed else 'FAIL',
            worst,
            lip,
        )
        return StableCertificate(passed, iterations, grid, shrink_radius, worst, lip)

    def strong_stable_local(
        self, orbit: PeriodicOrbit, half_width: float, samples: int = 401, max_rounds: int = 2000
    ) -> CurveSample:
        """W^ss_loc as a graph over the strong eigendirection, by the inverse graph transform"""
        if any(isinstance(e, complex) for e in orbit.eigen):
            raise NoGap('complex eigenvalues have no strong stable direction')
        chain = self.word_chain(orbit.word)
        jac = chain.jacobian(orbit.point)
        vals, vecs = np.linalg.eig(jac)
        order = np.argsort(np.abs(vals.real))
        lam1, lam2 = vals.real[order]
        if abs(lam1 - lam2) < 1e-8:
            raise NoGap(f'eigenvalues {lam1:.12g} and {lam2:.12g} are not separated')
        e1, e2 = vecs.real[:, order[0]], vecs.real[:, order[1]]
        frame = np.stack([e1, e2], axis=1)
        frame_inv = np.linalg.inv(frame)
        u = np.linspace(-half_width, half_width, samples)
        h = np.zeros_like(u)
        reach = min(1.2 * abs(lam1), 1.0) * half_width
        s = np.linspace(-reach, reach, 2 * samples + 1)
        for _ in range(max_rounds):
            hs = CubicSpline(u, h)(s)
            pts = orbit.point + s[:, None] * e1 + hs[:, None] * e2
            pre = chain.apply_inverse(pts)
            coords = (pre - orbit.point) @ frame_inv.T
            order_u = np.argsort(coords[:, 0])
            fit = CubicSpline(coords[order_u, 0], coords[order_u, 1])
            # the orbit point is fixed, so the graph passes through it
            new_h = fit(u) - fit(0.0)
            change = float(np.max(np.abs(new_h - h)))
            h = new_h
            if change < 1e-10:
                break
        else:
            logger.warning('graph transform stopped at the round limit, last change %.3g', change)
        pts = orbit.point + u[:, None] * e1 + h[:, None] * e2
        return CurveSample(pts, curve_id=f'Wss{list(orbit.word)}')

    def verify_homoclinic(
        self, hp: HomoclinicPoint, tolerance: float = 1e-8, wss: CurveSample | None = None
    ) -> HomoclinicReport:
        """
        :param wss: a strong stable curve already computed for the orbit; by default the graph
            transform is run over the whole home disc
        """
        report = HomoclinicReport()
        orbit = hp.of_orbit
        q = np.asarray(hp.point, dtype=float)
        # (a) on the local strong stable manifold
        disc = self.discs[orbit.discs[0]]
        width = disc.radius if isinstance(disc, RoundDisc) else 1.0
        try:
            if wss is None:
                wss = self.strong_stable_local(orbit, width)
            d_a = float(segment_distances(q[None, :], wss.points)[0])
        except NoGap:
            d_a = np.inf
        report.checks['onStrongStable'] = (d_a < tolerance, d_a)
        # (b) not in the image of the periodic branch into its disc
        home = self.disc_index_of(q)
        in_image = False
        for letter in orbit.word:
            if self.branches[letter].target == home:
                _, ok = self._branch_preimage(letter, q[None, :])
                in_image |= bool(ok[0])
        report.checks['offPeriodicImage'] = (not in_image, float(in_image))
        # (c) and (d): walk the inverse orbit along the word
        current = q[None, :]
        free = True
        reached = True
        for step, letter in enumerate(reversed(hp.word)):
            pre, ok = self._branch_preimage(letter, current)
            if not ok[0]:
                reached = False
                break
            current = pre
            if step < len(hp.word) - 1:
                for d in set(orbit.discs):
                    if self.discs[d].contains(current)[0]:
                        free = False
        gap = (
            float(np.min(np.linalg.norm(orbit.orbit_points - current[0], axis=1)))
            if reached
            else np.inf
        )
        report.checks['reachesOrbit'] = (gap < tolerance, gap)
        report.checks['orbitFree'] = (free, float(not free))
        return report

    # ------------------------------------------------------------------ JSON

    def to_dict(self) -> dict[str, Any]:
        return {
            'discs': [d.to_dict() for d in self.discs],
            'branches': [b.to_dict() for b in self.branches],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'MarkovIfs':
        discs = [RoundDisc(np.asarray(d['center']), d['radius']) for d in data.get('discs', [])]
        branches = [
            Branch(b['dom'], b['target'], MapChain.from_dict(b['map']), label=j)
            for j, b in enumerate(data.get('branches', []))
        ]
        return cls(tuple(discs), tuple(branches))
