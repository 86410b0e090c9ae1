"""
Tests for flexible cocycles and their realisation along a periodic orbit

Created on:  10/19/26
"""

import numpy as np
import pytest

from mifs.mifs_model.cocycles import (
    FlexiblePath,
    canonical_flexible_path,
    derivative_cocycle,
    path_from_dict,
    realize_deformation,
    validate_flexible,
)
from mifs.mifs_model.exceptions import InfeasibleEpsilon, SupportTooSmall
from mifs.mifs_model.markov_ifs import RoundDisc
from mifs.mifs_model.planar_maps import MapChain, c1_distance
from tests.conftest import TOY_PATH


def diagonal_path(epsilon: float) -> FlexiblePath:
    ts = np.linspace(-1, 1, 201)
    mats = np.zeros((201, 1, 2, 2))
    mats[:, 0, 0, 0] = 0.5
    mats[:, 0, 1, 1] = 0.75 + 0.25 * ts
    return FlexiblePath(ts, mats, epsilon)


def test_diagonal_path_conditions():
    report = validate_flexible(diagonal_path(0.51))
    assert report.passed
    assert report.checks['diameter'][1] == pytest.approx(0.01)
    assert report.grid == 201
    # diameter is exactly 0.5, so 0.5 itself is not enough
    assert not validate_flexible(diagonal_path(0.5)).checks['diameter'][0]


def test_constant_homothety_has_no_unit_eigenvalue():
    mats = np.broadcast_to(0.5 * np.eye(2), (201, 1, 2, 2))
    report = validate_flexible(FlexiblePath(np.linspace(-1, 1, 201), mats, 0.1))
    assert not report.checks['unitEigenvalueAtOne'][0]


def test_complex_eigenvalues_fail_interior_check():
    ts = np.linspace(-1, 1, 201)
    mats = np.zeros((201, 1, 2, 2))
    for k, t in enumerate(ts):
        # a rotation sneaks in around t = 0
        angle = 0.3 * np.exp(-50 * t**2)
        c, s = np.cos(angle), np.sin(angle)
        mats[k, 0] = np.array([[c, -s], [s, c]]) @ np.diag([0.5, 0.75 + 0.25 * t])
    report = validate_flexible(FlexiblePath(ts, mats, 1.0))
    assert not report.checks['interiorEigenvalues'][0]


def test_flexibility_is_rotation_invariant():
    path = diagonal_path(0.6)
    c, s = np.cos(0.7), np.sin(0.7)
    rot = np.array([[c, -s], [s, c]])
    turned = FlexiblePath(path.ts, rot @ path.matrices @ rot.T, path.epsilon)
    plain, conj = validate_flexible(path), validate_flexible(turned)
    assert plain.passed and conj.passed
    assert conj.checks['diameter'][1] == pytest.approx(plain.checks['diameter'][1])


params = [
    {'name': 'period_4', 'n': 4, 'lam': 0.5, 'eps': 0.3},
    {'name': 'period_20', 'n': 20, 'lam': 0.5, 'eps': 0.05},
]


@pytest.mark.parametrize('case', params, ids=lambda p: p['name'])
def test_canonical_path_passes(case):
    path = canonical_flexible_path(case['n'], case['lam'], case['eps'])
    report = validate_flexible(path)
    assert report.passed, report.checks
    a = case['lam'] ** (1 / case['n'])
    product = path.at(0.0).product()
    assert product[0, 0] == pytest.approx(case['lam'])
    assert product[1, 1] == pytest.approx(((1 + a) / 2) ** case['n'])


def test_canonical_path_infeasible():
    with pytest.raises(InfeasibleEpsilon):
        canonical_flexible_path(1, 0.5, 0.1)


def test_realize_identity_when_nothing_moves(toy_ifs):
    orbit = toy_ifs.find_periodic([0])
    path = path_from_dict(TOY_PATH)
    assert realize_deformation(toy_ifs, orbit, path, 0.0, 0.3) is toy_ifs


def test_realize_to_unit_eigenvalue(toy_ifs):
    orbit = toy_ifs.find_periodic([0])
    path = path_from_dict(TOY_PATH)
    moved = realize_deformation(toy_ifs, orbit, path, 1.0, 0.3)
    new_orbit = moved.find_periodic([0])
    assert new_orbit.point == pytest.approx(orbit.point, abs=1e-12)
    assert new_orbit.eigen == pytest.approx((0.5, 1.0), abs=1e-8)
    # the other branch is untouched
    assert moved.branches[1] is toy_ifs.branches[1]
    size = c1_distance(moved.branches[0].map, toy_ifs.branches[0].map, np.zeros(2), 0.35, 48)
    assert size.total <= path.epsilon * 1.1


def test_realize_round_trip(toy_ifs):
    orbit = toy_ifs.find_periodic([0])
    path = path_from_dict(TOY_PATH)
    there = realize_deformation(toy_ifs, orbit, path, 1.0, 0.3)
    back = realize_deformation(there, there.find_periodic([0]), path, 0.0, 0.3)
    start = derivative_cocycle(toy_ifs, orbit).matrices
    end = derivative_cocycle(back, back.find_periodic([0])).matrices
    assert np.max(np.abs(end - start)) < 1e-7


def test_realize_respects_obstructions(toy_ifs):
    orbit = toy_ifs.find_periodic([0])
    path = path_from_dict(TOY_PATH)
    blocker = RoundDisc(np.array([0.35, 0.0]), 0.1)
    with pytest.raises(SupportTooSmall):
        realize_deformation(toy_ifs, orbit, path, 1.0, 0.3, obstructions=[blocker])


def test_realize_keeps_chain_type(toy_ifs):
    orbit = toy_ifs.find_periodic([0])
    moved = realize_deformation(toy_ifs, orbit, path_from_dict(TOY_PATH), 0.5, 0.3)
    assert isinstance(moved.branches[0].map, MapChain)
    assert len(moved.branches[0].map) > len(toy_ifs.branches[0].map)
