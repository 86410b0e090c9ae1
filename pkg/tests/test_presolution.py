"""
Tests for pre-solutions, invariant curve families and the weak curve pipeline

Created on:  10/19/26
"""

import logging

import numpy as np
import pytest

from mifs.extensions.fragmentation.fragmentation import GraphCurve, fragment_graph
from mifs.extensions.presolution.depth_sweep import evaluate_depth
from mifs.extensions.presolution.invariant_curves import (
    InvariantCurveFamily,
    dwell_distribution,
    dwell_intervals,
    extract_invariant_curves,
    normal_strength,
)
from mifs.extensions.presolution.pipeline import build_weak_curves_end_to_end, weakness_check
from mifs.extensions.presolution.presolution import (
    build_presolution,
    check_presolution,
    ladder_perturbation,
)
from mifs.extensions.presolution.settings import PipelineSettings
from mifs.extensions.presolution.strong_stable import global_strong_stable, strong_rate
from mifs.extensions.retarded.prepared import default_prepared
from mifs.extensions.wells.wells import WellIndices, compute_well_system
from mifs.mifs_model.cocycles import path_from_dict
from mifs.mifs_model.curves import CurveSample, ZeroProfile
from mifs.mifs_model.exceptions import (
    CostExceedsHomothety,
    DepthInfeasible,
    NoGap,
    ScenarioError,
    UnivalenceViolation,
)
from mifs.mifs_model.markov_ifs import Branch, HomoclinicPoint, MarkovIfs, RoundDisc
from mifs.mifs_model.planar_maps import Affine, MapChain
from tests.conftest import TOY_PATH, build_toy_ifs

# least feasible depth of the prepared family and the cost of its gamma curves at eta = 0.05
SHALLOW = 22
COST = 23


@pytest.fixture(scope='module')
def family():
    return default_prepared()


@pytest.fixture(scope='module')
def shallow(family):
    return build_presolution(family, SHALLOW)


@pytest.fixture(scope='module')
def shallow_curves(shallow):
    return extract_invariant_curves(shallow.ifs, shallow.wells, SHALLOW, shallow.curve)


def single_branch_ifs(matrix) -> MarkovIfs:
    disc = RoundDisc(np.zeros(2), 1.0)
    chain = MapChain((Affine(np.asarray(matrix, dtype=float), np.zeros(2)),))
    return MarkovIfs((disc,), (Branch(0, 0, chain, label=0),))


def axis_family(ifs: MarkovIfs) -> InvariantCurveFamily:
    x = np.linspace(-1e-4, 1e-4, 41)
    sample = CurveSample(np.stack([x, np.zeros_like(x)], axis=1), curve_id='axis')
    return InvariantCurveFamily(ifs, 1, 1, {(0,): sample}, {(0,): ['q0']})


# ------------------------------------------------------------------------ strong stable


def test_strong_stable_curve_of_the_prepared_member(family):
    ifs = family.member(COST + 2)
    orbit = family.orbit(ifs)
    assert strong_rate(ifs, orbit) == pytest.approx(family.lam, rel=1e-9)
    curve = global_strong_stable(ifs, orbit, 0.5 * family.lam**SHALLOW, per_domain=64)
    pts = curve.curve.points
    # the x-axis is invariant and contracted exactly by lambda
    assert np.max(np.abs(pts[:, 1])) < 1e-12
    assert np.abs(pts[:, 0]) == pytest.approx(np.abs(curve.params), rel=1e-9, abs=1e-15)
    assert np.all(np.linalg.norm(pts, axis=1) < 1.0)


def test_strong_stable_curve_parameters_outside_the_disc(family):
    ifs = family.member(COST + 2)
    curve = global_strong_stable(ifs, family.orbit(ifs), 0.01, per_domain=16)
    ok, pts = curve.at([0.5, -0.95, 1.5])
    assert ok.tolist() == [True, True, False]
    assert np.isnan(pts[2]).all()


def test_no_strong_direction_for_a_homothety():
    ifs = single_branch_ifs(0.5 * np.eye(2))
    with pytest.raises(NoGap):
        global_strong_stable(ifs, ifs.find_periodic([0]), 0.1)


# ------------------------------------------------------------------------- pre-solution


def test_shallow_presolution_passes(shallow):
    report = shallow.report
    assert report.passed, report.failed
    assert report.admissible, report.failed
    assert shallow.cost == COST
    assert shallow.member == COST + 2
    assert report.admissibility['telescoping'][1] <= 1e-9
    assert report.admissible_support == list(range(1, COST + 1))
    assert report.sizes['c1'] <= 0.05


def test_presolution_report_serializes(shallow):
    data = shallow.to_dict()
    assert data['K'] == COST
    assert data['report']['passed']
    assert set(data['report']['checks']) == {'s1', 's2', 's3', 's4', 's5'}


def test_unperturbed_member_fails_coincidence(shallow):
    report = check_presolution(shallow.base, shallow.wells, SHALLOW)
    ok, distance = report.checks['s5']
    assert not ok
    assert distance > 1e-7


def test_empty_certificate_leaves_the_ifs_alone(family):
    ifs = family.member(6)
    cert = fragment_graph(GraphCurve(ZeroProfile(), 0.5, 0.1), 0.1)
    out, ladder = ladder_perturbation(ifs, cert, family.lam, np.zeros(2))
    assert out is ifs
    assert ladder is None


def test_member_too_small_for_the_ladder(family):
    with pytest.raises(CostExceedsHomothety):
        build_presolution(family, SHALLOW, n0=COST + 1)


def test_depth_below_the_feasible_range(family):
    with pytest.raises(DepthInfeasible):
        build_presolution(family, SHALLOW - 1)


# ----------------------------------------------------------------------- invariant curves


def test_shallow_invariant_family(shallow_curves):
    fam = shallow_curves
    assert fam.level == SHALLOW + 1
    assert len(fam.curves) == SHALLOW + 2
    assert fam.invariance_residual < 1e-8
    assert not fam.anchorless
    assert fam.passed
    home = (0,) * fam.level
    assert 'q0' in fam.anchors[home]
    assert 'Q0' in fam.anchors[(0,) * SHALLOW + (1,)]


def test_invariant_family_serializes(shallow_curves):
    data = shallow_curves.to_dict()
    assert data['level'] == SHALLOW + 1
    assert data['anchorless'] == 0
    assert sum(d['samples'] for d in data['discs']) == shallow_curves.samples


def test_a_disc_holding_two_arcs_is_rejected():
    ifs = build_toy_ifs()
    orbit = ifs.find_periodic([0])
    hp = HomoclinicPoint(np.array([0.8, 0.0]), orbit, (1,), 1)
    ws = compute_well_system(ifs, orbit, hp, 2)
    # in f2(D), out of every image, back in f2(D)
    pts = np.array([[0.84, 0.0], [0.82, 0.0], [0.6, 0.0], [0.8, 0.01], [0.79, 0.0]])
    with pytest.raises(UnivalenceViolation):
        extract_invariant_curves(ifs, ws, 0, CurveSample(pts))


# ---------------------------------------------------------------------- normal strength


def test_normal_strength_of_a_neutral_direction():
    fam = axis_family(single_branch_ifs(np.diag([0.5, 1.0])))
    report = normal_strength(fam, 5)
    assert report.min_normal == pytest.approx(1.0)
    assert report.max_normal == pytest.approx(1.0)
    assert report.implied_eta == pytest.approx(0.0, abs=1e-12)
    assert report.contracting
    assert report.is_weak(0.01)


def test_normal_strength_of_a_homothety():
    lam = 0.9
    fam = axis_family(single_branch_ifs(lam * np.eye(2)))
    report = normal_strength(fam, 4)
    assert report.min_normal == pytest.approx(lam**-4)
    assert report.implied_eta == pytest.approx(1 - lam)
    assert not report.is_weak(0.05)
    assert report.is_weak(0.2)


def test_normal_strength_needs_a_step():
    fam = axis_family(single_branch_ifs(np.diag([0.5, 1.0])))
    with pytest.raises(ValueError):
        normal_strength(fam, 0)


# --------------------------------------------------------------------------------- dwell

dwell_cases = [
    {'name': 'empty', 'visits': [False, False], 'intervals': []},
    {'name': 'full', 'visits': [True] * 4, 'intervals': [(0, 3)]},
    {
        'name': 'two_runs',
        'visits': [True, True, False, False, True],
        'intervals': [(0, 1), (4, 4)],
    },
]


@pytest.mark.parametrize('case', dwell_cases, ids=lambda p: p['name'])
def test_dwell_intervals(case):
    assert dwell_intervals(np.array(case['visits'])) == case['intervals']


def test_dwell_in_the_whole_home_disc(shallow, shallow_curves):
    orbit = shallow.ifs.find_periodic((0,))
    report = dwell_distribution(shallow_curves, orbit, 20, RoundDisc(orbit.point, 1.0), 50)
    assert report.l0 == 0
    assert report.horizon == 20 + SHALLOW + report.a + report.t
    assert report.bound == 20 - report.a - report.t
    assert report.conclusive
    assert report.samples > 0
    assert report.passed
    assert report.worst == 20
    assert report.interval_counts == {1: report.samples}


def test_short_dwell_is_inconclusive(shallow, shallow_curves):
    orbit = shallow.ifs.find_periodic((0,))
    report = dwell_distribution(shallow_curves, orbit, 12, RoundDisc(orbit.point, 0.2), 50)
    assert report.l0 == 16
    assert report.least_length == 16 + report.a + report.t + 1
    assert report.bound < 0
    assert not report.conclusive
    assert not report.passed
    assert not report.to_dict()['conclusive']


def test_dwell_longer_than_the_refinement(shallow, shallow_curves):
    orbit = shallow.ifs.find_periodic((0,))
    with pytest.raises(ValueError):
        dwell_distribution(shallow_curves, orbit, SHALLOW + 2, RoundDisc(orbit.point, 0.2))


def returning_ifs() -> MarkovIfs:
    """D = B(1), f0 = p / 2 fixing the origin, f1 = p / 8 + (0.75, 0)"""
    disc = RoundDisc(np.zeros(2), 1.0)
    home = MapChain((Affine(0.5 * np.eye(2), np.zeros(2)),))
    transit = MapChain((Affine(0.125 * np.eye(2), np.array([0.75, 0.0])),))
    return MarkovIfs((disc,), (Branch(0, 0, home, label=0), Branch(0, 0, transit, label=1)))


def returning_point(depths: list[int], offset: float = 0.75) -> np.ndarray:
    """a point of f1(D) whose backward orbit reaches f1(D) again after each depth in turn"""
    p = 0.0
    for k in reversed(depths):
        p = (offset + p / 8) * 2.0**-k
    return np.array([0.75 + p / 8, 0.0])


def returning_family(points: list[np.ndarray]) -> InvariantCurveFamily:
    ifs = returning_ifs()
    pts = np.array(points)
    sample = CurveSample(pts, tangents=np.tile([1.0, 0.0], (len(pts), 1)))
    indices = WellIndices(
        q1=np.array([0.75, 0.0]),
        q1_position=0,
        transit=(1,),
        t=1,
        q2=np.zeros(2),
        q2_position=0,
        a=0,
        d=0,
    )
    return InvariantCurveFamily(ifs, 20, 20, {(1,): sample}, {}, 0.0, indices)


# W = B(0, 0.2) takes l0 = 3 returns, so L = 20 needs 20 - 3 - 0 - 1 = 16 steps inside it
return_cases = [
    {'name': 'deep_return', 'depths': [24], 'worst': 19, 'passed': True, 'counts': {1: 1}},
    {'name': 'shallow_then_home', 'depths': [4], 'worst': 17, 'passed': True, 'counts': {2: 1}},
    {
        'name': 'two_shallow_returns',
        'depths': [4, 4],
        'worst': 12,
        'passed': False,
        'counts': {3: 1},
    },
]


@pytest.mark.parametrize('case', return_cases, ids=lambda p: p['name'])
def test_dwell_bound_counts_the_two_longest_visits(case):
    family = returning_family([returning_point(case['depths'])])
    orbit = family.ifs.find_periodic((0,))
    report = dwell_distribution(family, orbit, 20, RoundDisc(np.zeros(2), 0.2))
    assert report.l0 == 3
    assert report.bound == 16
    assert report.least_length == 5
    assert report.horizon == 41
    assert report.samples == 1
    assert report.worst == case['worst']
    assert report.passed == case['passed']
    assert report.failures == (0 if case['passed'] else 1)
    assert report.interval_counts == case['counts']


def test_dwell_skips_points_without_a_long_backward_orbit():
    # 0.9 * 2^-4 doubles out of every branch image on the fifth step back
    dying = returning_point([4], offset=0.9)
    orbit = returning_ifs().find_periodic((0,))
    region = RoundDisc(np.zeros(2), 0.2)

    report = dwell_distribution(returning_family([dying]), orbit, 20, region)
    assert report.samples == 0
    assert not report.passed

    report = dwell_distribution(returning_family([dying, returning_point([24])]), orbit, 20, region)
    assert report.samples == 1
    assert report.worst == 19
    assert report.passed


# ----------------------------------------------------------------------------- settings


def test_settings_from_scenario_keys(caplog):
    data = {'eps': 0.6, 'depths': [40, 44], 'dwellLength': 30, 'colour': 'red'}
    with caplog.at_level(logging.WARNING):
        settings = PipelineSettings.from_dict(data)
    assert settings.eps == 0.6
    assert settings.depths == (40, 44)
    assert settings.dwell_length == 30
    assert settings.extras == {'colour': 'red'}
    assert 'colour' in caplog.text
    assert settings.to_dict()['dwellLength'] == 30
    assert 'weaknessTarget' not in settings.to_dict()


def test_settings_overrides_skip_none():
    settings = PipelineSettings().with_overrides(seed=7, eps=None)
    assert settings.seed == 7
    assert settings.eps == PipelineSettings().eps


bad_settings = [
    {'name': 'no_depths', 'kwargs': {'depths': ()}},
    {'name': 'zero_depth', 'kwargs': {'depths': (0, 40)}},
    {'name': 'negative_eta', 'kwargs': {'eta': -0.1}},
    {'name': 'empty_dwell', 'kwargs': {'dwell_length': 0}},
]


@pytest.mark.parametrize('case', bad_settings, ids=lambda p: p['name'])
def test_settings_validation(case):
    with pytest.raises(ValueError):
        PipelineSettings(**case['kwargs'])


# ----------------------------------------------------------------------------- pipeline


@pytest.fixture(scope='module')
def weak_report():
    ifs = build_toy_ifs()
    orbit = ifs.find_periodic([0])
    hp = HomoclinicPoint(np.array([0.8, 0.0]), orbit, (1,), 1)
    # moving the weak eigenvalue from 0.6 to 1 is a C1 change near 0.4, above the default eps
    settings = PipelineSettings(eps=0.6)
    params = default_prepared().params
    return build_weak_curves_end_to_end(
        ifs, orbit, hp, path_from_dict(TOY_PATH), params, settings
    )


def test_pipeline_builds_every_depth(weak_report):
    assert [r.depth for r in weak_report.depths] == [38, 43, 48]
    assert not weak_report.errors
    for name in ('flexible', 'saddleNode', 'cocycleAtOne', 'prepared', 'presolution', 'curves'):
        assert weak_report.checks[name][0], name
    assert weak_report.checks['c0WithinEps0'][0]


def test_perturbation_sizes(weak_report):
    ok, c1 = weak_report.checks['c1WithinEps']
    assert ok
    assert PipelineSettings().eps < 0.3 < c1 <= 0.6
    ok, c0 = weak_report.checks['c0WithinEps0']
    assert c0 <= PipelineSettings().eps0


def test_implied_eta_decreases_with_depth(weak_report):
    etas = weak_report.implied_etas()
    assert etas[0] > etas[1] > etas[2]
    # depth 48 is not yet deep enough to bring the implied eta below eta = 0.05
    ok, last = weak_report.checks['weakness']
    assert last == pytest.approx(etas[-1])
    assert last > weak_report.settings.eta
    assert not ok
    assert not weak_report.passed
    assert 'weakness' in weak_report.failed


weakness_cases = [
    {'name': 'above_eta', 'etas': [0.25, 0.2, 0.1647], 'eta': 0.05, 'passed': False},
    {'name': 'below_eta', 'etas': [0.2, 0.1, 0.04], 'eta': 0.05, 'passed': True},
    {'name': 'not_decreasing', 'etas': [0.04, 0.03, 0.035], 'eta': 0.05, 'passed': False},
    {'name': 'single_depth', 'etas': [0.01], 'eta': 0.05, 'passed': True},
    {'name': 'no_depths', 'etas': [], 'eta': 0.05, 'passed': False},
]


@pytest.mark.parametrize('case', weakness_cases, ids=lambda p: p['name'])
def test_weakness_compares_with_eta(case):
    ok, _ = weakness_check(case['etas'], case['eta'])
    assert ok == case['passed']


def test_pipeline_needs_prepared_params():
    ifs = build_toy_ifs()
    orbit = ifs.find_periodic([0])
    hp = HomoclinicPoint(np.array([0.8, 0.0]), orbit, (1,), 1)
    with pytest.raises(ScenarioError):
        build_weak_curves_end_to_end(ifs, orbit, hp, path_from_dict(TOY_PATH), None)


def test_dwell_is_claimed_only_past_the_least_length(weak_report):
    shallowest, *deeper = weak_report.depths
    assert shallowest.dwell is None
    for r in deeper:
        d = r.dwell
        assert d.conclusive
        assert d.l0 == 16
        assert d.bound == 40 - 16 - d.a - d.t
        assert d.horizon == 40 + r.depth + d.a + d.t
        assert 0 < d.samples <= 200
        assert d.worst >= d.bound
        assert d.passed
    assert weak_report.checks['dwell'][0]


def test_depth_result_serializes(weak_report):
    data = weak_report.to_dict()
    first = data['depths'][0]
    assert first['K'] == COST
    assert first['s5']['passed']
    assert 'impliedEta' in first
    assert not data['checks']['weakness']['passed']
    assert data['depths'][-1]['dwell']['bound'] == weak_report.depths[-1].dwell.bound


def test_single_depth_worker_reports_failure():
    params = default_prepared().params.to_dict()
    with pytest.raises(DepthInfeasible):
        evaluate_depth(params, SHALLOW - 1, PipelineSettings())
