import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import principal_angle
from tbmanifold.errors import DegenerateFrame, DimensionError, NumericFailure, SizeError
from tbmanifold.gmm import EmConfig, fit_gmm, run_em
from tbmanifold.moppca import (
    MoppcaModel, PpcaComponent, extract_tangent_bundle, fit_moppca, responsibilities,
)
from tbmanifold.synth import ManifoldSpec, generate_dataset

PRESETS = ["spiral", "sine", "scurve", "swissroll"]
SLACK = 1e-8


def _plane(rng, n=500):
    X = np.c_[rng.uniform(-1, 1, (n, 2)), np.zeros(n)]
    return X + rng.normal(0, 1e-3, X.shape)


def test_plane_basis(rng):
    X = _plane(rng)
    model = fit_moppca(X, 1, 2, seed=0)
    bundle = extract_tangent_bundle(model, X)
    # exact PCA oracle
    evals, evecs = np.linalg.eigh(np.cov(X.T))
    assert principal_angle(bundle.frames[0].basis, evecs[:, -2:].T) < 1e-8
    assert principal_angle(bundle.frames[0].basis, np.eye(3)[:2]) < 0.01
    se = X.std(axis=0, ddof=1) / np.sqrt(len(X))
    assert np.all(np.abs(bundle.frames[0].anchor - X.mean(axis=0)) <= 3 * se + 1e-15)


def test_single_ppca_sigma2(rng):
    X = rng.normal(size=(800, 4)) * [3.0, 2.0, 0.3, 0.2]
    model = fit_moppca(X, 1, 2, seed=0)
    evals = np.sort(np.linalg.eigvalsh(np.cov(X.T, bias=True)))
    oracle = evals[:2].mean()
    assert abs(model.components[0].sigma2 - oracle) <= 0.1 * oracle
    # the implied covariance reproduces the sample covariance on the top-2 span
    C = model.components[0].covariance
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(C))[-2:], evals[-2:], rtol=1e-8)


def test_two_parallel_segments(rng):
    a = np.c_[rng.uniform(-3, 3, 300), rng.normal(0, 0.05, 300)]
    b = np.c_[rng.uniform(-3, 3, 300), 10 + rng.normal(0, 0.05, 300)]
    X = np.vstack([a, b])
    model = fit_moppca(X, 2, 1, seed=4)
    bundle = extract_tangent_bundle(model, X)
    # oracle split: k-means with the known cluster labels
    for cluster in (a, b):
        i = int(np.argmin([np.linalg.norm(f.anchor - cluster.mean(axis=0)) for f in bundle.frames]))
        se = cluster.std(axis=0, ddof=1) / np.sqrt(len(cluster))
        assert np.all(np.abs(bundle.frames[i].anchor - cluster.mean(axis=0)) <= 3 * se)
        evecs = np.linalg.eigh(np.cov(cluster.T))[1]
        assert principal_angle(bundle.frames[i].basis, evecs[:, -1]) < 0.05
        assert principal_angle(bundle.frames[i].basis, [1.0, 0.0]) < 0.05


def test_errors(rng):
    with pytest.raises(SizeError):
        fit_moppca(rng.normal(size=(10, 3)), 4, 1)
    with pytest.raises(DimensionError):
        fit_moppca(rng.normal(size=(100, 3)), 1, 3)
    model = fit_moppca(rng.normal(size=(100, 3)), 2, 1, seed=0)
    with pytest.raises(DimensionError):
        responsibilities(model, np.zeros((2, 2)))


def test_non_finite_likelihood_carries_iteration():
    class Broken:
        weights = np.ones(1)

        def component_log_prob(self, X):
            return np.full((len(X), 1), np.nan)

    X = np.zeros((5, 2))
    with pytest.raises(NumericFailure) as info:
        run_em(X, np.ones((5, 1)), lambda *a: Broken(), EmConfig())
    assert info.value.iteration == 0


def _manual_model():
    comps = [PpcaComponent(0.5, np.array([-3.0, 0.0]), np.array([[1.0], [0.0]]), 0.1),
             PpcaComponent(0.5, np.array([3.0, 0.0]), np.array([[1.0], [0.0]]), 0.1)]
    return MoppcaModel(comps, 1, 2)


def test_responsibility_examples():
    m = _manual_model()
    r = responsibilities(m, np.array([[0.0, 0.7], [-3.0, 0.0]]))
    np.testing.assert_allclose(r[0], [0.5, 0.5], atol=1e-9)
    assert r[1, 0] > 0.99
    single = MoppcaModel(m.components[:1], 1, 2)
    single.components[0].pi = 1.0
    assert np.all(responsibilities(single, np.random.default_rng(0).normal(size=(20, 2))) == 1.0)


def test_tie_break_lowest_index():
    bundle = extract_tangent_bundle(_manual_model(), np.array([[0.0, 0.0]]))
    assert bundle.assignment.hard_assignment[0] == 0


def test_degenerate_frame_named():
    comps = [PpcaComponent(0.5, np.zeros(2), np.zeros((2, 1)), 0.1),
             PpcaComponent(0.5, np.array([50.0, 0]), np.array([[1.0], [0.0]]), 0.1)]
    model = MoppcaModel(comps, 1, 2)
    with pytest.raises(DegenerateFrame) as info:
        extract_tangent_bundle(model, np.zeros((3, 2)))
    assert info.value.component == 0
    # with fewer than d+1 owned points the frame is kept with a fallback basis
    for X in (np.array([[50.0, 0.0]]), np.array([[0.0, 0.0], [50.0, 0.0]])):
        bundle = extract_tangent_bundle(model, X)
        assert bundle.k == 2
        assert np.max(np.abs(bundle.frames[0].basis @ bundle.frames[0].basis.T - 1)) < 1e-10


def test_permutation_symmetry(rng):
    X = generate_dataset(ManifoldSpec.preset("scurve"), 600, 2).points
    model = fit_moppca(X, 6, 2, seed=1)
    perm = rng.permutation(6)
    permuted = MoppcaModel([model.components[i] for i in perm], 2, 3)
    a = extract_tangent_bundle(model, X)
    b = extract_tangent_bundle(permuted, X)
    for j, i in enumerate(perm):
        assert np.array_equal(a.frames[i].anchor, b.frames[j].anchor)
        assert principal_angle(a.frames[i].basis, b.frames[j].basis) < 1e-12


def test_json_round_trip(tmp_path):
    X = generate_dataset(ManifoldSpec.preset("spiral"), 300, 0)
    model = fit_moppca(X, 5, 1, seed=0)
    model.save(tmp_path / "m.json")
    data = json.loads((tmp_path / "m.json").read_text())
    assert {"d", "D", "components", "log_likelihood"} <= set(data)
    assert {"pi", "mu", "W", "sigma2"} <= set(data["components"][0])
    back = MoppcaModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.log_density(X.points), model.log_density(X.points))


def test_seed_determinism():
    X = generate_dataset(ManifoldSpec.preset("sine"), 400, 3)
    a, b = fit_moppca(X, 7, 1, seed=5), fit_moppca(X, 7, 1, seed=5)
    for ca, cb in zip(a.components, b.components):
        assert np.array_equal(ca.W, cb.W) and np.array_equal(ca.mu, cb.mu)
        assert ca.sigma2 == cb.sigma2 and ca.pi == cb.pi


def _random_fit_data(seed):
    r = np.random.default_rng(seed)
    spec = ManifoldSpec.preset(PRESETS[seed % 4])
    return r, spec, generate_dataset(spec, int(r.integers(100, 600)), seed).points


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_moppca_em_monotone(seed):
    r, spec, X = _random_fit_data(seed)
    model = fit_moppca(X, int(r.integers(1, 8)), spec.d, seed=seed)
    ll = np.array(model.trace.log_likelihoods)
    assert np.all(np.diff(ll) >= -SLACK)
    assert model.iterations_used == len(ll) <= 500
    assert abs(model.weights.sum() - 1) < 1e-10
    assert all(c.sigma2 >= 1e-8 for c in model.components)
    resp = responsibilities(model, X)
    assert np.all(np.abs(resp.sum(axis=1) - 1) < 1e-10)
    bundle = extract_tangent_bundle(model, X)
    assert np.array_equal(bundle.assignment.hard_assignment, np.argmax(resp, axis=1))
    for f, c in zip(bundle.frames, model.components):
        assert np.max(np.abs(f.basis @ f.basis.T - np.eye(spec.d))) < 1e-10
        evecs = np.linalg.eigh(c.covariance)[1][:, ::-1][:, :spec.d]
        assert principal_angle(f.basis, evecs.T) < 1e-6


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_gmm_em_monotone(seed):
    r, _, X = _random_fit_data(seed)
    g = fit_gmm(X, int(r.integers(1, 6)), seed=seed)
    ll = np.array(g.trace.log_likelihoods)
    assert np.all(np.diff(ll) >= -SLACK)
    assert abs(g.weights.sum() - 1) < 1e-10
    for c in g.covariances:
        assert np.linalg.eigvalsh(c).min() > 0
