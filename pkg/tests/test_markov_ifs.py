"""
Tests for the Markov IFS structure: validation, words, inverse, refinement, periodic orbits,
certificates and homoclinic points

Created on:  10/19/26
"""

import json

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from mifs.mifs_model.exceptions import NoGap, NotInImage
from mifs.mifs_model.markov_ifs import (
    Branch,
    HomoclinicPoint,
    MarkovIfs,
    RoundDisc,
    primitive_root,
)
from mifs.mifs_model.planar_maps import (
    Affine,
    BumpFlow,
    CubicSaddleNode,
    DiagonalSaddleNode,
    Homothety,
    MapChain,
)
from mifs.mifs_model.vector_fields import TranslationBumpField
from tests.conftest import SCENARIO_PATH

ORIGIN = np.zeros(2)
UNIT = RoundDisc(ORIGIN, 1.0)


def one_branch(*prims) -> MarkovIfs:
    return MarkovIfs((UNIT,), (Branch(0, 0, MapChain(prims)),))


def test_validate_single_homothety():
    report = one_branch(Homothety(0.5, ORIGIN)).validate()
    assert report.valid
    assert report.containment[0][1] == pytest.approx(0.5, abs=1e-8)


def test_validate_overlap_names_pair():
    ifs = MarkovIfs(
        (UNIT,),
        (
            Branch(0, 0, MapChain((Homothety(0.5, ORIGIN),))),
            Branch(0, 0, MapChain((Affine(0.3 * np.eye(2), np.array([0.2, 0.0])),))),
        ),
    )
    report = ifs.validate()
    assert not report.valid
    assert any('0 and 1' in f for f in report.failures)


def test_validate_empty_ifs():
    assert MarkovIfs((UNIT,), ()).validate().valid


def test_toy_is_valid(toy_ifs):
    report = toy_ifs.validate()
    assert report.valid
    assert report.separations[0][2] > 1e-3


def test_admissibility():
    a = RoundDisc(ORIGIN, 1.0)
    b = RoundDisc(np.array([3.0, 0.0]), 1.0)
    to_b = MapChain((Affine(0.5 * np.eye(2), np.array([3.0, 0.0])),))
    to_a = MapChain((Affine(0.5 * np.eye(2), np.array([-3.0, 0.0])),))
    ifs = MarkovIfs((a, b), (Branch(0, 1, to_b), Branch(1, 0, to_a), Branch(0, 0, to_b)))
    assert ifs.is_admissible([2])
    assert ifs.is_admissible([0, 1])
    assert not ifs.is_admissible([0, 0])
    with pytest.raises(IndexError):
        ifs.is_admissible([7])


def test_evaluate_word(toy_ifs):
    p = np.array([0.3, -0.4])
    assert toy_ifs.evaluate_word([], p) == pytest.approx(p)
    direct = toy_ifs.branches[1].map.apply(toy_ifs.branches[0].map.apply(p))
    assert toy_ifs.evaluate_word([0, 1], p) == pytest.approx(direct)
    halving = one_branch(Homothety(0.5, ORIGIN))
    assert halving.evaluate_word([0, 0], p) == pytest.approx(0.25 * p)


def test_inverse_step(toy_ifs, rng):
    q = np.array([0.1, 0.2])
    label, pre = toy_ifs.inverse_step(toy_ifs.branches[1].map.apply(q))
    assert label == 1
    assert pre == pytest.approx(q)
    with pytest.raises(NotInImage):
        toy_ifs.inverse_step(np.array([0.0, 0.9]))
    base = UNIT.sample(40)
    pick = rng.choice(len(base), size=500)
    letters = rng.integers(0, 2, size=500)
    images = np.array(
        [toy_ifs.branches[j].map.apply(base[k]) for j, k in zip(letters, pick)]
    )
    labels, pres = toy_ifs.inverse_step_many(images)
    assert np.all(labels == letters)
    back = np.array([toy_ifs.branches[j].map.apply(p) for j, p in zip(labels, pres)])
    assert np.max(np.abs(back - images)) < 1e-9


def test_refinement(toy_ifs):
    assert toy_ifs.refine(0) is toy_ifs
    single = one_branch(Homothety(0.5, ORIGIN)).refine(3)
    assert len(single.discs) == 1
    assert single.discs[0].contains(np.array([0.124, 0.0]))[0]
    assert not single.discs[0].contains(np.array([0.126, 0.0]))[0]
    refined = toy_ifs.refine(2)
    assert len(refined.discs) == len(toy_ifs.admissible_words(2)) == 4


def scenario_ifs(name: str) -> MarkovIfs:
    return MarkovIfs.from_dict(json.loads((SCENARIO_PATH / f'{name}.json').read_text()))


refinement_cases = [
    {'name': f'{scenario}_n{n}', 'scenario': scenario, 'n': n}
    for scenario in ('toy', 'toy_canonical', 'toy_obstructed', 'two_disc', 'period_two')
    for n in (1, 2, 3)
]


@pytest.mark.parametrize('case', refinement_cases, ids=lambda p: p['name'])
def test_refinement_keeps_periodic_points(case):
    ifs = scenario_ifs(case['scenario'])
    base = ifs.find_all_periodic(3)
    refined = ifs.refine(case['n']).find_all_periodic(3)
    assert base
    assert len(refined) == len(base)
    assert sorted(o.period for o in refined) == sorted(o.period for o in base)
    for orbit in refined:
        same_period = [o for o in base if o.period == orbit.period]
        gaps = [np.min(np.linalg.norm(o.orbit_points - orbit.point, axis=1)) for o in same_period]
        assert min(gaps) < 1e-9


def test_find_periodic_examples(toy_ifs):
    orbit = one_branch(Homothety(0.5, ORIGIN)).find_periodic([0])
    assert orbit.point == pytest.approx(ORIGIN)
    assert orbit.eigen == pytest.approx((0.5, 0.5))
    sn = one_branch(DiagonalSaddleNode(0.5, CubicSaddleNode(0.25), 0.5)).find_periodic([0])
    assert sn.point == pytest.approx(ORIGIN)
    assert sn.eigen == pytest.approx((0.5, 1.0))
    toy = toy_ifs.find_periodic([0])
    assert toy.point == pytest.approx(ORIGIN, abs=1e-12)
    assert toy.eigen == pytest.approx((0.5, 0.6))
    assert toy_ifs.is_separated(toy)


def test_power_words_reduce_to_primitive_root(toy_ifs):
    assert primitive_root((0, 1, 0, 1)) == (0, 1)
    orbit = toy_ifs.find_periodic([0, 0])
    assert orbit.word == (0,)
    assert orbit.period == 1


def test_cyclic_words_have_no_rotations(toy_ifs):
    words = toy_ifs.cyclic_words(4)
    assert (0,) in words and (1,) in words and (0, 1) in words
    assert (1, 0) not in words
    assert (0, 0) not in words


def test_large_stable_certificate():
    contraction = one_branch(Homothety(0.5, ORIGIN))
    orbit = contraction.find_periodic([0])
    cert = contraction.large_stable_certificate(orbit, grid=16, iterations=20, shrink_radius=0.1)
    assert cert.passed
    assert cert.iterations == 20
    saddle = one_branch(Affine(np.diag([0.5, 1.5]), ORIGIN))
    s_orbit = saddle.find_periodic([0])
    assert s_orbit is not None and s_orbit.non_contraction
    assert not saddle.large_stable_certificate(s_orbit, grid=16, iterations=20).passed
    sn = one_branch(DiagonalSaddleNode(0.5, CubicSaddleNode(0.25), 0.5))
    sn_orbit = sn.find_periodic([0])
    cert = sn.large_stable_certificate(sn_orbit, grid=16, iterations=400, shrink_radius=0.1)
    assert cert.passed


def test_strong_stable_local(toy_ifs):
    orbit = toy_ifs.find_periodic([0])
    wss = toy_ifs.strong_stable_local(orbit, 0.9)
    assert np.max(np.abs(wss.points[:, 1])) < 1e-12
    sn = one_branch(DiagonalSaddleNode(0.5, CubicSaddleNode(0.25), 0.5))
    curve = sn.strong_stable_local(sn.find_periodic([0]), 0.9)
    assert np.max(np.abs(curve.points[:, 1])) < 1e-15
    with pytest.raises(NoGap):
        homothety = one_branch(Homothety(0.5, ORIGIN))
        homothety.strong_stable_local(homothety.find_periodic([0]), 0.5)


def test_strong_stable_of_perturbed_map_is_invariant():
    bump = BumpFlow(TranslationBumpField(np.array([0.3, 0.0]), 0.25, np.array([0.0, 0.01])))
    ifs = one_branch(Affine(np.diag([0.5, 0.6]), ORIGIN), bump)
    orbit = ifs.find_periodic([0])
    wss = ifs.strong_stable_local(orbit, 0.8, samples=801)
    assert np.max(np.abs(wss.points[:, 1])) > 1e-4
    inner = wss.points[np.abs(wss.points[:, 0] - orbit.point[0]) < 0.3]
    image = ifs.branches[0].map.apply(inner)
    # the image stays on the curve
    curve = wss.points[np.argsort(wss.points[:, 0])]
    on_curve = CubicSpline(curve[:, 0], curve[:, 1])(image[:, 0])
    assert np.max(np.abs(on_curve - image[:, 1])) < 1e-8


def test_homoclinic_toy(toy_ifs):
    orbit = toy_ifs.find_periodic([0])
    good = HomoclinicPoint(np.array([0.8, 0.0]), orbit, (1,), 1)
    report = toy_ifs.verify_homoclinic(good)
    assert report.passed, report.checks
    off = HomoclinicPoint(np.array([0.8, 0.01]), orbit, (1,), 1)
    assert not toy_ifs.verify_homoclinic(off).checks['onStrongStable'][0]
    inside = HomoclinicPoint(np.array([0.3, 0.0]), orbit, (1,), 1)
    assert not toy_ifs.verify_homoclinic(inside).checks['offPeriodicImage'][0]
