"""
Tests for the planar map primitives and chains

Created on:  10/19/26
"""

import numpy as np
import pytest

from mifs.mifs_model.curves import CurveSample
from mifs.mifs_model.exceptions import DomainError
from mifs.mifs_model.planar_maps import (
    Affine,
    BlendedSaddleNode,
    BumpFlow,
    CubicSaddleNode,
    DiagonalSaddleNode,
    Homothety,
    LogBlend,
    MapChain,
    NormalScalingFlow,
    c1_distance,
    identity_chain,
    newton_polish,
    primitive_from_dict,
    zero_flow,
)
from mifs.mifs_model.vector_fields import TranslationBumpField

ORIGIN = np.zeros(2)


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def small_bump() -> BumpFlow:
    return BumpFlow(TranslationBumpField(np.array([0.2, 0.1]), 0.5, np.array([0.02, 0.01])))


def mixed_chain() -> MapChain:
    return MapChain(
        (
            Affine(rotation(0.3) * 0.9, np.array([0.05, -0.02])),
            BlendedSaddleNode(0.9, CubicSaddleNode(0.1), 0.45, 0.81),
            small_bump(),
        )
    )


def finite_difference(chain, pts, h=1e-5):
    out = np.zeros((len(pts), 2, 2))
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        out[:, :, axis] = (chain.apply(pts + e) - chain.apply(pts - e)) / (2 * h)
    return out


def test_homothety_apply_and_inverse():
    h = MapChain((Homothety(0.5, ORIGIN),))
    assert h.apply(np.array([1.0, 0.0])) == pytest.approx([0.5, 0.0])
    assert h.apply_inverse(np.array([0.5, 0.0])) == pytest.approx([1.0, 0.0])
    assert h.jacobian(np.array([0.3, 0.2])) == pytest.approx(0.5 * np.eye(2))


def test_zero_flow_is_identity(rng):
    pts = rng.uniform(-2, 2, size=(50, 2))
    assert np.array_equal(MapChain((zero_flow(),)).apply(pts), pts)


def test_saddle_node_normal_form():
    sn = DiagonalSaddleNode(0.5, CubicSaddleNode(1.0), 0.5)
    assert sn.apply(np.array([1.0, 0.1])) == pytest.approx([0.5, 0.099])
    assert sn.apply_inverse(np.array([0.5, 0.099])) == pytest.approx([1.0, 0.1], abs=1e-12)
    with pytest.raises(DomainError):
        sn.apply_inverse(np.array([0.0, 0.9]))


def test_saddle_node_rejects_bad_eps0():
    with pytest.raises(ValueError):
        DiagonalSaddleNode(0.5, CubicSaddleNode(1.0), 0.9)


domain_cases = [
    {'name': 'apply', 'call': lambda sn: sn.apply(np.array([0.0, 0.6]))},
    {'name': 'jacobian', 'call': lambda sn: sn.jacobian(np.array([0.0, -0.6]))},
    # the homothety pushes y = 0.3 out to 0.6 before the normal form sees it
    {
        'name': 'chain_intermediate',
        'call': lambda sn: MapChain((Homothety(2.0, ORIGIN), sn)).apply(np.array([0.0, 0.3])),
    },
]


@pytest.mark.parametrize('case', domain_cases, ids=lambda p: p['name'])
def test_saddle_node_outside_its_monotone_range(case):
    # k(y) = y - y^3 is monotone for |y| < 1 / sqrt(3)
    sn = DiagonalSaddleNode(0.5, CubicSaddleNode(1.0), 0.5)
    with pytest.raises(DomainError):
        case['call'](sn)


def test_newton_polish_after_a_coarse_bracket():
    k = CubicSaddleNode(1.0)
    target = k.value(np.array([0.1, -0.3, 0.0]))
    y = newton_polish(k.value, k.derivative, target, np.array([0.09, -0.28, 0.0]))
    assert y == pytest.approx([0.1, -0.3, 0.0], abs=1e-14)
    assert np.max(np.abs(k.value(y) - target)) < 1e-15


def test_saddle_node_inverses_round_trip(rng):
    pts = rng.uniform(-0.5, 0.5, size=(200, 2))
    sn = DiagonalSaddleNode(0.5, CubicSaddleNode(1.0), 0.5)
    assert sn.apply_inverse(sn.apply(pts)) == pytest.approx(pts, abs=1e-14)
    blended = BlendedSaddleNode(0.9, CubicSaddleNode(0.1), 0.45, 0.81)
    assert blended.apply_inverse(blended.apply(pts)) == pytest.approx(pts, abs=1e-13)


def test_affine_inverse():
    rot = Affine(rotation(np.pi / 2), np.array([1.0, 0.0]))
    assert rot.apply_inverse(np.array([1.0, 1.0])) == pytest.approx([1.0, 0.0])
    assert rot.jacobian(np.array([5.0, -3.0])) == pytest.approx(rotation(np.pi / 2))


def test_round_trip(rng):
    chain = mixed_chain()
    pts = rng.uniform(-0.7, 0.7, size=(1000, 2))
    back = chain.apply_inverse(chain.apply(pts))
    assert np.max(np.linalg.norm(back - pts, axis=1)) < 1e-9


def test_jacobian_matches_finite_differences(rng):
    chain = mixed_chain()
    pts = rng.uniform(-0.7, 0.7, size=(200, 2))
    jac = chain.jacobian(pts)
    fd = finite_difference(chain, pts)
    scale = np.maximum(1.0, np.linalg.norm(jac, ord=2, axis=(1, 2)))
    err = np.linalg.norm(jac - fd, ord=2, axis=(1, 2)) / scale
    assert np.max(err) < 1e-5


def test_flow_moves_nothing_outside_support(rng):
    flow = small_bump()
    pts = rng.uniform(-3, 3, size=(500, 2))
    outside = np.linalg.norm(pts - np.array([0.2, 0.1]), axis=1) >= 0.5
    moved = flow.apply(pts[outside])
    assert np.array_equal(moved, pts[outside])


def test_blended_saddle_node_keeps_axis_and_glues():
    core = BlendedSaddleNode(0.9, CubicSaddleNode(0.1), 0.45, 0.81)
    axis = np.stack([np.linspace(-1, 1, 41), np.zeros(41)], axis=1)
    assert core.apply(axis) == pytest.approx(0.9 * axis, abs=1e-15)
    ring = 0.85 * np.stack([np.cos(np.linspace(0, 6, 30)), np.sin(np.linspace(0, 6, 30))], axis=1)
    assert core.apply(ring) == pytest.approx(0.9 * ring, abs=1e-15)
    # normal form near the origin
    assert core.apply(np.array([0.1, 0.2])) == pytest.approx([0.09, 0.2 - 0.1 * 0.008])


def test_c1_distance_basics():
    h = MapChain((Homothety(0.5, ORIGIN),))
    assert c1_distance(h, h, ORIGIN, 1.0, 16).total == 0.0
    other = MapChain((Homothety(0.6, ORIGIN),))
    d = c1_distance(h, other, ORIGIN, 1.0, 16)
    assert d.derivative == pytest.approx(0.1)
    assert d.c0 <= 0.1 + 1e-12


def test_normal_scaling_flow_is_close_to_identity():
    line = np.stack([np.linspace(-1, 1, 401), np.zeros(401)], axis=1)
    flow = NormalScalingFlow(CurveSample(line), 0.1, 0.1, 0.5)
    d = c1_distance(MapChain((flow,)), identity_chain(), ORIGIN, 0.3, 32)
    assert d.total <= 0.1 * 1.05
    # the curve is fixed and its normal direction scaled by 1 + kappa
    assert flow.apply(np.array([0.1, 0.0])) == pytest.approx([0.1, 0.0], abs=1e-15)
    assert flow.jacobian(np.array([0.0, 0.0])) == pytest.approx(np.diag([1.0, 1.1]), abs=1e-6)


def test_conjugation_by_homothety_preserves_derivative_distance():
    flow = BumpFlow(TranslationBumpField(ORIGIN, 0.5, np.array([0.05, 0.0])))
    conj = MapChain((Homothety(2.0, ORIGIN), flow, Homothety(0.5, ORIGIN)))
    plain = c1_distance(MapChain((flow,)), identity_chain(), ORIGIN, 0.5, 48)
    small = c1_distance(conj, identity_chain(), ORIGIN, 0.25, 48)
    assert small.derivative == pytest.approx(plain.derivative, rel=0.02)
    assert small.total == pytest.approx(plain.total, rel=0.02)


def test_log_blend():
    inner = np.array([[1.0, 0.0], [0.0, 1.5]])
    blend = LogBlend(np.array([0.1, 0.2]), np.eye(2), inner, 0.01, 0.5)
    assert blend.jacobian(np.array([0.1, 0.2])) == pytest.approx(inner)
    far = np.array([[0.9, 0.2], [0.1, -0.5]])
    assert blend.apply(far) == pytest.approx(far)
    pts = np.array([[0.12, 0.21], [0.3, 0.1], [0.1, 0.45]])
    assert blend.apply_inverse(blend.apply(pts)) == pytest.approx(pts, abs=1e-12)


params = [
    {'name': 'affine', 'prim': Affine(rotation(0.4), np.array([0.1, 0.2]))},
    {'name': 'homothety', 'prim': Homothety(0.7, np.array([0.1, -0.1]))},
    {'name': 'saddle_node', 'prim': DiagonalSaddleNode(0.5, CubicSaddleNode(1.0), 0.5)},
    {'name': 'blended', 'prim': BlendedSaddleNode(0.9, CubicSaddleNode(0.1), 0.45, 0.81)},
    {'name': 'bump_flow', 'prim': small_bump()},
    {'name': 'log_blend', 'prim': LogBlend(ORIGIN, np.eye(2), np.diag([1.0, 2.0]), 0.05, 0.6)},
]


@pytest.mark.parametrize('case', params, ids=lambda p: p['name'])
def test_descriptor_rebuilds_same_map(case):
    prim = case['prim']
    rebuilt = primitive_from_dict(prim.to_dict())
    pts = np.array([[0.1, 0.2], [-0.3, 0.05], [0.25, -0.15]])
    assert rebuilt.apply(pts) == pytest.approx(prim.apply(pts), abs=1e-14)


def test_unknown_descriptor():
    with pytest.raises(ValueError):
        primitive_from_dict({'kind': 'warp_drive'})
