"""
Tests for retarded, saddle-node and prepared families

Created on:  10/19/26
"""

import numpy as np
import pytest

from mifs.extensions.retarded.prepared import (
    PreparedParams,
    build_prepared,
    default_prepared,
    verify_prepared,
)
from mifs.extensions.retarded.retarded import build_retarded, build_saddle_node_family
from mifs.mifs_model.cocycles import FlexiblePath
from mifs.mifs_model.exceptions import ConstraintViolation, GluingMismatch
from mifs.mifs_model.markov_ifs import HomoclinicPoint, RoundDisc
from mifs.mifs_model.planar_maps import (
    Affine,
    BlendedSaddleNode,
    CubicSaddleNode,
    Homothety,
    MapChain,
    primitive_from_dict,
)
from tests.conftest import TOY_PATH

ORIGIN = np.zeros(2)


def saddle_core(outer: float = 0.81) -> BlendedSaddleNode:
    return BlendedSaddleNode(0.9, CubicSaddleNode(0.1), 0.45, outer)


def prepared_like_family():
    return build_retarded(saddle_core(), 0.9, 1.0, 1)


def test_homothety_core_is_global_homothety(rng):
    family = build_retarded(Homothety(0.5, ORIGIN), 0.5, 1.0, 0)
    pts = rng.uniform(-0.7, 0.7, size=(300, 2))
    for m in (0, 3, 7):
        assert family.member(m).apply(pts) == pytest.approx(0.5 * pts, abs=1e-15)


def test_homothetic_region_maps_circles_to_circles():
    family = prepared_like_family()
    m = 4
    ang = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    circle = 0.9 ** (m - 1) * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    radii = np.linalg.norm(family.member(m).apply(circle), axis=1)
    assert radii == pytest.approx(np.full(200, 0.9**m), abs=1e-14)


@pytest.mark.parametrize('m', [1, 2, 5, 9])
def test_conjugation_identity(m):
    assert prepared_like_family().conjugation_defect(m) < 1e-10


def test_origin_is_the_only_fixed_point():
    family = prepared_like_family()
    for m in (1, 4):
        assert family.member(m).apply(ORIGIN) == pytest.approx(ORIGIN, abs=1e-15)
        assert family.fixed_point_margin(m) > 0


def test_gluing_mismatch():
    with pytest.raises(GluingMismatch):
        build_retarded(Affine(np.diag([0.5, 0.6]), ORIGIN), 0.5, 1.0, 0)
    # the saddle-node blend still moves points just inside the core radius 0.9
    with pytest.raises(GluingMismatch):
        build_retarded(saddle_core(outer=0.89), 0.9, 1.0, 1)


def test_member_below_m0_rejected():
    with pytest.raises(ValueError):
        prepared_like_family().member(0)


def test_member_inverse_and_jacobian(rng):
    member = prepared_like_family().member(3)
    pts = rng.uniform(-0.7, 0.7, size=(400, 2))
    back = member.apply_inverse(member.apply(pts))
    assert np.max(np.linalg.norm(back - pts, axis=1)) < 1e-9
    h = 1e-6
    jac = member.jacobian(pts)
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        fd = (member.apply(pts + e) - member.apply(pts - e)) / (2 * h)
        assert np.max(np.abs(jac[:, :, axis] - fd)) < 1e-5


def test_member_descriptor_rebuilds():
    member = prepared_like_family().member(5)
    rebuilt = primitive_from_dict(member.to_dict())
    pts = np.array([[0.01, 0.02], [0.3, -0.2], [0.5, 0.5]])
    assert rebuilt.apply(pts) == pytest.approx(member.apply(pts), abs=1e-15)


# ------------------------------------------------------------------------- saddle-node families


@pytest.fixture()
def saddle_family(toy_ifs, toy_path):
    orbit = toy_ifs.find_periodic([0])
    return build_saddle_node_family(toy_ifs, orbit, toy_path, (0, 3, 6), 0.3)


@pytest.mark.parametrize('m', [0, 3, 6])
def test_saddle_node_members_certify(saddle_family, toy_ifs, m):
    orbit = toy_ifs.find_periodic([0])
    homoclinic = HomoclinicPoint(np.array([0.8, 0.0]), orbit, (1,), 1)
    report = saddle_family.certify(m, homoclinic)
    assert report.passed, report.to_dict()
    assert report.eigen == pytest.approx((0.5, 1.0), abs=1e-10)
    assert report.c1 <= TOY_PATH['epsilon']
    assert report.c0 < 1e-2
    assert report.homoclinic['onStrongStable'][0]


def test_saddle_node_homothetic_annulus(saddle_family):
    inner3, outer3 = saddle_family.homothetic_annulus(3)
    inner6, outer6 = saddle_family.homothetic_annulus(6)
    assert outer3 == outer6 == saddle_family.chart_radius
    assert inner6 / inner3 == pytest.approx(0.5**3)
    # the first return really is H_lam on the annulus of member 6
    ifs = saddle_family.member(6)
    ang = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    ring = 0.5 * (inner6 + outer6) * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    assert ifs.word_chain((0,)).apply(ring) == pytest.approx(0.5 * ring, abs=1e-15)


def test_saddle_node_members_agree_away_from_the_orbit(saddle_family):
    far = np.array([[0.5, 0.5], [-0.6, 0.1], [0.2, -0.7]])
    base = saddle_family.base.branches[0].map.apply(far)
    for m in saddle_family.m_range:
        moved = saddle_family.member(m).branches[0].map.apply(far)
        assert moved == pytest.approx(base, abs=1e-14)
    assert saddle_family.member(3).branches[1] is saddle_family.base.branches[1]


def test_saddle_node_needs_flexible_path(toy_ifs):
    tight = FlexiblePath.from_knots(TOY_PATH['t'], TOY_PATH['matrices'], 0.3)
    with pytest.raises(ValueError):
        build_saddle_node_family(toy_ifs, toy_ifs.find_periodic([0]), tight, (3,), 0.3)


# ----------------------------------------------------------------------------- prepared families


@pytest.fixture(scope='module')
def prepared():
    return default_prepared()


def test_default_prepared_passes(prepared):
    report = verify_prepared(prepared)
    assert report.passed, report.to_dict()
    assert set(report.checks) == {
        'P0', 'P1', 'P2-1', 'P2-2', 'P2-3', 'P2-4', 'P3-1', 'P3-2', 'P3-3'
    }


def test_prepared_homoclinic(prepared):
    ifs = prepared.member(prepared.verification_member)
    hp = prepared.homoclinic(ifs)
    assert hp.point == pytest.approx([0.94, 0.0])
    report = ifs.verify_homoclinic(hp)
    assert report.passed, report.checks


def test_shallow_member_is_not_round():
    report = verify_prepared(default_prepared(), member=2)
    assert 'P2-1' in report.failed


params = [
    {'name': 'xi_off_axis', 'xi': ((0.94, 0.01), 0.025), 'delta': None, 'fails': 'P3-3'},
    {'name': 'delta_on_diagonal', 'xi': None, 'delta': ((0.67, 0.65), 0.02), 'fails': 'P3-2'},
]


@pytest.mark.parametrize('case', params, ids=lambda p: p['name'])
def test_prepared_violations(case):
    kwargs = {}
    if case['xi']:
        kwargs['xi_disc'] = RoundDisc(np.array(case['xi'][0]), case['xi'][1])
    if case['delta']:
        kwargs['delta_discs'] = (RoundDisc(np.array(case['delta'][0]), case['delta'][1]),)
    with pytest.raises(ConstraintViolation, match=case['fails']):
        build_prepared(PreparedParams(**kwargs))


def test_prepared_params_from_json_block(prepared):
    rebuilt = build_prepared(PreparedParams.from_dict(prepared.params.to_dict()))
    assert verify_prepared(rebuilt).passed
    assert rebuilt.params.x_lo == pytest.approx(0.912)


def test_prepared_members_are_retarded(prepared):
    family = prepared.retarded
    assert isinstance(prepared.member(4).branches[0].map, MapChain)
    assert family.conjugation_defect(4) < 1e-10
