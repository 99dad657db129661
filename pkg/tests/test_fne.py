import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from tbmanifold.charts import Chart
from tbmanifold.errors import EmptyEstimate, PathologicalThreshold, UnsupportedDimension
from tbmanifold.fne import (
    AmbientDensityNeighborhood, LatentDensityNeighborhood, ManifoldEstimate, _finish,
    estimate_m1, estimate_m2, estimate_m3, fit_latent_densities, frame_latents, membership,
    sample_estimate, sampling_box,
)
from tbmanifold.gmm import GmmModel
from tbmanifold.moppca import AssignmentRelation, TangentBundle, extract_tangent_bundle, fit_moppca
from tbmanifold.rng import make_rng
from tbmanifold.synth import ManifoldSpec, generate_dataset

XY = Chart(np.zeros(3), np.eye(3)[:2])


def manual_bundle(charts, X, labels):
    labels = np.asarray(labels)
    resp = np.eye(len(charts))[labels]
    return TangentBundle(charts, AssignmentRelation(labels, resp))


def square_bundle(offset=0.0):
    chart = Chart(np.array([offset, 0, 0.0]), np.eye(3)[:2])
    X = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0.0]]) + [offset, 0, 0]
    return chart, X


@pytest.fixture(scope="module")
def spiral_fit():
    spec = ManifoldSpec.preset("spiral")
    X = generate_dataset(spec, 1500, 1)
    model = fit_moppca(X, 27, 1, seed=2)
    return X, extract_tangent_bundle(model, X)


@pytest.fixture(scope="module")
def scurve_fit():
    spec = ManifoldSpec.preset("scurve")
    X = generate_dataset(spec, 900, 1)
    model = fit_moppca(X, 16, 2, seed=2)
    return X, extract_tangent_bundle(model, X)


def test_m1_unit_square_samples_inside():
    chart, X = square_bundle()
    est = estimate_m1(manual_bundle([chart], X, [0, 0, 0, 0]), X)
    S = est.sample(10_000, 0).points
    Y = chart.forward(S)
    assert np.all((Y >= -1e-9) & (Y <= 1 + 1e-9))
    assert np.all(np.abs(S[:, 2]) < 1e-12)


def test_unit_square_sample_mean():
    chart, X = square_bundle()
    est = estimate_m1(manual_bundle([chart], X, [0] * 4), X)
    Y = chart.forward(est.sample(100_000, 3).points)
    assert np.all(np.abs(Y.mean(axis=0) - 0.5) < 0.01)


def test_equal_area_weights():
    c0, X0 = square_bundle(0.0)
    c1, X1 = square_bundle(5.0)
    X = np.vstack([X0, X1])
    est = estimate_m1(manual_bundle([c0, c1], X, [0] * 4 + [1] * 4), X)
    np.testing.assert_allclose(est.weights, [0.5, 0.5])


def test_small_frames_dropped_and_empty_estimate():
    c0, X0 = square_bundle(0.0)
    c1 = Chart(np.array([5.0, 0, 0]), np.eye(3)[:2])
    X = np.vstack([X0, [[5.0, 0, 0], [6.0, 0, 0]]])
    est = estimate_m1(manual_bundle([c0, c1], X, [0] * 4 + [1, 1]), X)
    assert len(est) == 1 and est.neighborhoods[0].frame == 0
    with pytest.raises(EmptyEstimate):
        estimate_m1(manual_bundle([c0, c1], X[:2], [1, 1]), X[:2])


def test_m1_unsupported_dimension():
    chart = Chart(np.zeros(4), np.eye(4)[:3])
    X = np.random.default_rng(0).normal(size=(10, 4))
    with pytest.raises(UnsupportedDimension):
        estimate_m1(manual_bundle([chart], X, [0] * 10), X)


def test_m1_hull_containment(scurve_fit):
    X, bundle = scurve_fit
    est = estimate_m1(bundle, X)
    for nb in est.neighborhoods:
        Y = nb.chart.forward(X.points[bundle.assignment.members(nb.frame)])
        assert nb.contains(Y, 1e-9).all()


def _line_chart():
    return Chart(np.zeros(2), np.array([[1.0, 0.0]]))


def test_m2_vacuous_threshold_accepts_box():
    g = GmmModel([1.0], [[0.0]], [[[1.0]]])
    nb = LatentDensityNeighborhood(_line_chart(), g, -np.inf, [-3.0], [3.0])
    assert nb.probe(make_rng(0)) == 1.0
    assert nb.volume == pytest.approx(6.0)


def test_m2_normal_level_set():
    g = GmmModel([1.0], [[0.0]], [[[1.0]]])
    thr = stats.norm.logpdf(1.0)
    nb = LatentDensityNeighborhood(_line_chart(), g, thr, [-3.0], [3.0])
    nb.probe(make_rng(1), size=100_000)
    assert nb.volume == pytest.approx(2.0, rel=0.02)
    est = _finish("m2", [nb])
    Y = nb.chart.forward(est.sample(100_000, 2).points)[:, 0]
    assert Y.min() == pytest.approx(-1.0, rel=0.02)
    assert Y.max() == pytest.approx(1.0, rel=0.02)
    # uniform on the interval: variance 1/3
    assert Y.var() == pytest.approx(1 / 3, rel=0.02)


def test_m3_spherical_disk_radius():
    s2, r0 = 0.5, 1.3
    amb = GmmModel([1.0], [np.zeros(3)], [s2 * np.eye(3)])
    thr = stats.multivariate_normal(np.zeros(3), s2 * np.eye(3)).logpdf([r0, 0, 0])
    nb = AmbientDensityNeighborhood(XY, amb, thr, [-2.0, -2.0], [2.0, 2.0])
    nb.probe(make_rng(0), size=100_000)
    assert nb.volume == pytest.approx(np.pi * r0 ** 2, rel=0.02)
    Y = XY.forward(_finish("m3", [nb], amb).sample(100_000, 1).points)
    r = np.hypot(Y[:, 0], Y[:, 1])
    assert r.max() == pytest.approx(r0, rel=0.02)
    # uniform on a disk: E[r^2] = r0^2 / 2
    assert np.mean(r ** 2) == pytest.approx(r0 ** 2 / 2, rel=0.02)
    # anchor is inside when its density exceeds the threshold
    assert nb.contains(np.zeros((1, 2)))[0]


def test_threshold_above_max_is_empty(spiral_fit):
    X, bundle = spiral_fit
    with pytest.raises(EmptyEstimate):
        estimate_m2(bundle, X, 1, 1e6, seed=0)
    with pytest.raises(EmptyEstimate):
        estimate_m3(bundle, X, None, 1e6, seed=0)


def test_pathological_threshold():
    g = GmmModel([1.0], [[0.0]], [[[1.0]]])
    nb = LatentDensityNeighborhood(_line_chart(), g, stats.norm.logpdf(1e-6), [-3.0], [3.0])
    nb.acceptance, nb.volume = 1.0, 1.0  # pretend the probe succeeded
    with pytest.raises(PathologicalThreshold):
        nb.draw(make_rng(0), 10)


@pytest.mark.parametrize("method", ["m2", "m3"])
def test_threshold_monotone(spiral_fit, method):
    X, bundle = spiral_fit
    fits = fit_latent_densities(bundle, X, 2, seed=0)
    amb = bundle.model.to_gmm()
    thresholds = [-5.0, 0.0, 1.0, 2.0, 3.0]
    masks = []
    for t in thresholds:
        if method == "m2":
            est = estimate_m2(bundle, X, 2, t, 0, fits=fits)
        else:
            est = estimate_m3(bundle, X, amb, t, 0)
        by_frame = {nb.frame: nb for nb in est.neighborhoods}
        row = []
        for i, chart in enumerate(bundle.frames):
            Y = np.random.default_rng(i).uniform(-0.5, 0.5, (500, 1))
            row.append(by_frame[i].contains(Y) if i in by_frame else np.zeros(500, bool))
        masks.append(np.concatenate(row))
    for lo, hi in zip(masks, masks[1:]):
        assert not np.any(hi & ~lo)


@pytest.mark.parametrize("method", ["m1", "m2", "m3"])
def test_samples_are_members_and_on_planes(spiral_fit, method):
    X, bundle = spiral_fit
    est = {"m1": lambda: estimate_m1(bundle, X),
           "m2": lambda: estimate_m2(bundle, X, 2, 0.5, 1),
           "m3": lambda: estimate_m3(bundle, X, None, 1.0, 1)}[method]()
    S, labels = est.sample(5000, 7, return_labels=True)
    assert membership(est, S, 1e-8).all()
    for j, nb in enumerate(est.neighborhoods):
        sel = labels == j
        if sel.any():
            assert nb.chart.reconstruction_error(S.points[sel]).max() < 1e-10
    again = est.sample(5000, 7)
    assert np.array_equal(again.points, S.points)


def test_membership_examples_and_union(spiral_fit):
    X, bundle = spiral_fit
    est = estimate_m1(bundle, X)
    for nb in est.neighborhoods:
        if nb.contains(np.zeros((1, 1)))[0]:
            assert membership(est, nb.chart.anchor)
    far = X.points + np.array([0.0, 10.0])
    assert not membership(est, far, 1e-3).any()
    # union semantics against a direct any-over-neighborhoods oracle
    Q = np.vstack([est.sample(500, 1).points, X.points[:300],
                   np.random.default_rng(0).uniform(-0.6, 0.6, (300, 2))])
    oracle = np.zeros(len(Q), bool)
    for nb in est.neighborhoods:
        close = nb.chart.reconstruction_error(Q) <= 1e-8
        oracle |= close & nb.contains(nb.chart.forward(Q))
    np.testing.assert_array_equal(membership(est, Q, 1e-8), oracle)


@pytest.mark.parametrize("method", ["m1", "m2", "m3"])
def test_json_round_trip(scurve_fit, tmp_path, method):
    X, bundle = scurve_fit
    est = {"m1": lambda: estimate_m1(bundle, X),
           "m2": lambda: estimate_m2(bundle, X, 2, -1.0, 1),
           "m3": lambda: estimate_m3(bundle, X, None, -3.0, 1)}[method]()
    est.save(tmp_path / "e.json")
    back = ManifoldEstimate.load(tmp_path / "e.json")
    assert back.method == method
    np.testing.assert_array_equal(back.weights, est.weights)
    np.testing.assert_array_equal(back.sample(2000, 5).points, est.sample(2000, 5).points)


def test_sampling_box_margin():
    Y = np.array([[0.0, 0.0], [2.0, 1.0]])
    lo, hi = sampling_box(Y, 0.25)
    np.testing.assert_allclose(lo, [-0.5, -0.25])
    np.testing.assert_allclose(hi, [2.5, 1.25])


def test_m2_weights_follow_volume(scurve_fit):
    X, bundle = scurve_fit
    est = estimate_m2(bundle, X, 1, -2.0, 3)
    vol = np.array([nb.acceptance * nb.box_volume for nb in est.neighborhoods])
    np.testing.assert_allclose(est.weights, vol / vol.sum())
    assert abs(est.weights.sum() - 1) < 1e-12 and np.all(est.weights >= 0)
