"""
Tests for strata, obstructions and wells

Created on:  10/19/26
"""

import numpy as np
import pytest

from mifs.extensions.retarded.prepared import default_prepared
from mifs.extensions.wells.wells import (
    check_well_system,
    compute_indices,
    compute_well_system,
    enclosing_disc,
    membership,
)
from mifs.mifs_model.exceptions import ObstructionConflict
from mifs.mifs_model.markov_ifs import Branch, HomoclinicPoint, MarkovIfs, RoundDisc
from mifs.mifs_model.planar_maps import Affine, BumpFlow, MapChain
from mifs.mifs_model.vector_fields import TranslationBumpField
from tests.conftest import build_toy_ifs


def affine_chain(scale: float, shift, matrix=None) -> MapChain:
    mat = scale * np.eye(2) if matrix is None else np.asarray(matrix, dtype=float)
    return MapChain((Affine(mat, np.asarray(shift, dtype=float)),))


def toy_homoclinic(ifs: MarkovIfs) -> HomoclinicPoint:
    orbit = ifs.find_periodic([0])
    return HomoclinicPoint(np.array([0.8, 0.0]), orbit, (1,), 1)


def transit_ifs() -> MarkovIfs:
    """
    q = 0 in D0 = B(1) and a homoclinic orbit through three transition discs:
    q -> (3, 0) -> (3, 3) -> (0, 3) -> Q = (0.8, 0)
    letter 5 is a second branch into D3, so the transition well has a hole
    """
    discs = (
        RoundDisc(np.zeros(2), 1.0),
        RoundDisc(np.array([3.0, 0.0]), 0.5),
        RoundDisc(np.array([3.0, 3.0]), 0.5),
        RoundDisc(np.array([0.0, 3.0]), 0.5),
    )
    branches = (
        Branch(0, 0, affine_chain(0, [0, 0], np.diag([0.5, 0.6])), label=0),
        Branch(0, 1, affine_chain(0.1, [3.0, 0.0]), label=1),
        Branch(1, 2, affine_chain(0.5, [1.5, 3.0]), label=2),
        Branch(2, 3, affine_chain(0.5, [-1.5, 1.5]), label=3),
        Branch(3, 0, affine_chain(0.05, [0.8, -0.15]), label=4),
        Branch(2, 3, affine_chain(0.1, [-0.3, 3.05]), label=5),
    )
    return MarkovIfs(discs, branches)


def transit_homoclinic(ifs: MarkovIfs) -> HomoclinicPoint:
    orbit = ifs.find_periodic([0])
    return HomoclinicPoint(np.array([0.8, 0.0]), orbit, (1, 2, 3, 4), 4)


def test_transit_ifs_geometry():
    ifs = transit_ifs()
    assert ifs.validate().valid
    q = np.zeros(2)
    assert ifs.word_chain((1, 2, 3, 4)).apply(q) == pytest.approx([0.8, 0.0], abs=1e-15)
    assert ifs.verify_homoclinic(transit_homoclinic(ifs)).passed


params = [
    {'name': 'toy', 'build': build_toy_ifs, 'homoclinic': toy_homoclinic, 't': 1},
    {'name': 'three_transit_discs', 'build': transit_ifs, 'homoclinic': transit_homoclinic, 't': 4},
]


@pytest.mark.parametrize('case', params, ids=lambda p: p['name'])
def test_indices(case):
    ifs = case['build']()
    hp = case['homoclinic'](ifs)
    idx = compute_indices(ifs, hp.of_orbit, hp)
    q1, t, q2, a, d = idx.as_tuple()
    assert q1 == pytest.approx([0.0, 0.0])
    assert t == case['t']
    assert q2 == pytest.approx([0.8, 0.0])
    assert (a, d) == (0, 0)


def test_indices_need_a_homoclinic_point():
    ifs = build_toy_ifs()
    with pytest.raises(ValueError, match='indices undefined'):
        compute_well_system(ifs, ifs.find_periodic([0]), None, 4)


def test_indices_reject_a_point_off_the_strong_stable_manifold():
    ifs = build_toy_ifs()
    orbit = ifs.find_periodic([0])
    bad = HomoclinicPoint(np.array([0.8, 0.1]), orbit, (1,), 1)
    with pytest.raises(ValueError, match='indices undefined'):
        compute_indices(ifs, orbit, bad)


@pytest.fixture()
def toy_wells():
    ifs = build_toy_ifs()
    hp = toy_homoclinic(ifs)
    return compute_well_system(ifs, hp.of_orbit, hp, 10)


def test_toy_well_words(toy_wells):
    assert toy_wells.xi(1).word == (1,)
    assert toy_wells.periodic(0).word == (1,)
    assert toy_wells.periodic(3).word == (0, 0, 0, 1)
    assert [c.word for c in toy_wells.periodic_hole(2)] == [(1, 0, 0, 1)]
    # the only image disc of the first annulus besides the periodic one is Xi_1 itself
    assert toy_wells.base_obstructions == (None,)
    assert toy_wells.obstruction(3) is None
    assert toy_wells.i_xi == 0


def test_toy_well_invariants(toy_wells):
    report = check_well_system(toy_wells)
    assert report.passed, report.to_dict()
    assert set(report.checks) == {
        'nestedXi',
        'nestedT',
        'T0IsXiT',
        'thetaInside',
        'sInside',
        'deltaAvoidsXi1',
        'selfSimilar',
    }


def test_transit_well_invariants():
    ifs = transit_ifs()
    hp = transit_homoclinic(ifs)
    ws = compute_well_system(ifs, hp.of_orbit, hp, 6)
    assert [ws.xi(n).word for n in (1, 2, 3, 4)] == [(4,), (3, 4), (2, 3, 4), (1, 2, 3, 4)]
    assert [c.word for c in ws.theta(1)] == [(5, 4)]
    assert ws.theta(2) == () and ws.theta(3) == ()
    report = check_well_system(ws)
    assert report.passed, report.to_dict()


def test_self_similar_discs_match(toy_wells):
    for j in range(7):
        lhs = toy_wells.periodic(toy_wells.indices.d + j)
        rhs = toy_wells.self_similar_disc(j)
        assert lhs.word == rhs.word


def test_lazy_depth_matches_stored(toy_wells):
    assert toy_wells.periodic(14).word == (0,) * 14 + (1,)
    assert [c.word for c in toy_wells.periodic_hole(12)] == [(1,) + (0,) * 12 + (1,)]


def test_membership(toy_wells, rng):
    assert membership(toy_wells, 'Xi:1', [0.8, 0.0])
    assert not membership(toy_wells, 'Xi:1', [1.5, 0.0])
    assert not membership(toy_wells, 'T:0', [1.5, 0.0])
    for n in range(11):
        assert not membership(toy_wells, f'T:{n}', [0.0, 0.0])
    pts = rng.uniform([0.74, -0.06], [0.86, 0.06], size=(200, 2))
    for n in (0, 1, 4):
        direct = toy_wells.periodic(n).contains(pts)
        assert [membership(toy_wells, f'T:{n}', p) for p in pts] == direct.tolist()
    with pytest.raises(ValueError):
        membership(toy_wells, 'Omega:1', [0.8, 0.0])


def test_prepared_obstruction():
    family = default_prepared()
    ifs = family.member(family.verification_member)
    hp = family.homoclinic(ifs)
    ws = compute_well_system(ifs, hp.of_orbit, hp, 4)
    delta = ws.base_obstructions[0]
    declared = family.params.delta_discs[0]
    assert delta.center == pytest.approx(declared.center, abs=1e-6)
    assert delta.radius == pytest.approx(declared.radius, rel=1e-4)
    assert check_well_system(ws).passed
    # Delta_1 = F_q(Delta_0)
    assert membership(ws, 'Delta:1', ifs.branches[0].map.apply(declared.center))
    assert not membership(ws, 'Delta:1', declared.center)


def test_obstruction_conflict():
    toy = build_toy_ifs()
    above = Branch(0, 0, affine_chain(0.03, [0.8, 0.1]), label=2)
    below = Branch(0, 0, affine_chain(0.03, [0.8, -0.1]), label=3)
    ifs = MarkovIfs(toy.discs, toy.branches + (above, below))
    hp = toy_homoclinic(ifs)
    with pytest.raises(ObstructionConflict):
        compute_well_system(ifs, hp.of_orbit, hp, 2)


def test_wells_unchanged_by_admissible_perturbation(toy_wells):
    # supported inside F_q(Xi_1) = f1(f2(D)) and away from the x-axis
    bump = BumpFlow(TranslationBumpField(np.array([0.4, 0.015]), 0.008, np.array([0.004, 0.0])))
    toy = toy_wells.ifs
    perturbed = MarkovIfs(
        toy.discs,
        tuple(Branch(b.dom, b.target, b.map.then(bump), label=b.label) for b in toy.branches),
    )
    hp = toy_homoclinic(perturbed)
    after = compute_well_system(perturbed, hp.of_orbit, hp, 4)
    sample_pts = np.vstack(
        [
            RoundDisc(np.zeros(2), 1.0).sample(40),
            toy_wells.periodic(2).sample(20),
            toy_wells.periodic(3).boundary(),
        ]
    )
    for n in range(4):
        before_t = toy_wells.periodic(n).contains(sample_pts)
        assert (after.periodic(n).contains(sample_pts) == before_t).all()
        for c_before, c_after in zip(toy_wells.periodic_hole(n), after.periodic_hole(n)):
            assert (c_before.contains(sample_pts) == c_after.contains(sample_pts)).all()
    assert (after.xi(1).contains(sample_pts) == toy_wells.xi(1).contains(sample_pts)).all()


def test_enclosing_disc():
    ang = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    ring = np.array([1.0, -2.0]) + 0.3 * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    disc = enclosing_disc(np.vstack([ring, [[1.0, -2.0], [1.1, -1.95]]]))
    assert disc.center == pytest.approx([1.0, -2.0], abs=1e-12)
    assert disc.radius == pytest.approx(0.3, rel=1e-7)
    # two points: the disc on their segment
    pair = enclosing_disc(np.array([[0.0, 0.0], [2.0, 0.0]]))
    assert pair.center == pytest.approx([1.0, 0.0])
    assert pair.radius == pytest.approx(1.0, rel=1e-7)


def test_well_export(toy_wells):
    lines = toy_wells.boundary_polylines(64)
    assert {'Lambda0', 'Xi1', 'T0', 'S0.0'} <= set(lines)
    assert all(v.shape == (64, 2) for v in lines.values())
    data = toy_wells.to_dict()
    assert data['indices']['t'] == 1
    assert data['obstructions'] == [None]
