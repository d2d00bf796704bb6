import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neurovox import dimred
from neurovox.dimred import kpca_fit, kpca_transform, pca_explained_variance


def brute_force_kpca(X, k, degree=3, coef0=1.0):
    """Dense eigendecomposition of the explicitly centred kernel."""
    n, d = X.shape
    gamma = 1.0 / d
    K = (gamma * X @ X.T + coef0) ** degree
    one = np.full((n, n), 1.0 / n)
    Kc = K - one @ K - K @ one + one @ K @ one
    vals, vecs = np.linalg.eig(Kc)
    vals, vecs = vals.real, vecs.real
    order = np.argsort(vals)[::-1][:k]
    vals, vecs = vals[order], vecs[:, order]
    vecs /= np.linalg.norm(vecs, axis=0)
    return Kc @ vecs / np.sqrt(vals), (K, vals, vecs, gamma)


def brute_force_transform(X, Y, K, vals, vecs, gamma, degree=3, coef0=1.0):
    n = X.shape[0]
    Kt = (gamma * Y @ X.T + coef0) ** degree
    one_n = np.full((n, n), 1.0 / n)
    one_m = np.full((Y.shape[0], n), 1.0 / n)
    Kt_c = Kt - one_m @ K - Kt @ one_n + one_m @ K @ one_n
    return Kt_c @ vecs / np.sqrt(vals)


def _match_up_to_sign(a, b, tol):
    for j in range(a.shape[1]):
        s = np.sign(a[:, j] @ b[:, j]) or 1.0
        assert np.max(np.abs(a[:, j] - s * b[:, j])) < tol


def test_kpca_matches_brute_force():
    X = np.random.default_rng(0).standard_normal((10, 4))
    model = kpca_fit(X, 3)
    oracle, (K, vals, vecs, gamma) = brute_force_kpca(X, 3)
    _match_up_to_sign(kpca_transform(model, X), oracle, 1e-8)
    assert np.allclose(model.eigenvalues, vals, rtol=1e-10)
    Y = np.random.default_rng(1).standard_normal((6, 4))
    _match_up_to_sign(kpca_transform(model, Y),
                      brute_force_transform(X, Y, K, vals, vecs, gamma), 1e-8)


@given(seed=st.integers(0, 10_000), n=st.integers(5, 20), d=st.integers(2, 6))
def test_kpca_brute_force_property(seed, n, d):
    X = np.random.default_rng(seed).standard_normal((n, d))
    k = min(3, n - 2)
    model = kpca_fit(X, k)
    oracle, (_, vals, _, _) = brute_force_kpca(X, model.output_dim)
    # skip near-degenerate spectra where eigenvectors are not unique
    gaps = np.abs(np.diff(np.append(vals, 0.0)))
    if gaps.min() < 1e-6 * vals[0]:
        return
    _match_up_to_sign(kpca_transform(model, X), oracle, 1e-8)


def test_degree_one_equals_linear_pca():
    X = np.random.default_rng(2).standard_normal((15, 5)) @ np.diag([3, 2, 1, 0.5, 0.2])
    model = kpca_fit(X, 3, degree=1)
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    # kernel gamma=1/d scales coordinates by sqrt(gamma)
    pca = Xc @ vt[:3].T * np.sqrt(1.0 / X.shape[1])
    _match_up_to_sign(kpca_transform(model, X), pca, 1e-8)


def test_two_points_symmetric():
    X = np.array([[0.0, 1.0, 2.0], [1.0, -1.0, 0.5]])
    z = kpca_transform(kpca_fit(X, 1), X)
    assert np.isclose(z[0, 0], -z[1, 0], atol=1e-12)


def test_transform_consistency_and_duplicates():
    X = np.random.default_rng(3).standard_normal((12, 4))
    model = kpca_fit(X, 4)
    Z = kpca_transform(model, X)
    assert np.allclose(kpca_transform(model, X[[5, 5]]), Z[[5, 5]], atol=1e-10)


def test_eigenvalues_sorted_and_projection_variance_ordered():
    X = np.random.default_rng(4).standard_normal((40, 6))
    model = kpca_fit(X, 5)
    assert np.all(np.diff(model.eigenvalues) <= 0)
    assert np.all(model.eigenvalues > dimred.EIG_TOL)
    var = kpca_transform(model, X).var(axis=0)
    assert np.all(np.diff(var) <= 1e-9)


def test_null_components_dropped():
    X = np.array([[1.0, 2.0], [3.0, 4.0], [1.0, 2.0], [3.0, 4.0]])
    model = kpca_fit(X, 3)
    assert model.output_dim == 1


def test_sign_canonical_and_reproducible():
    X = np.random.default_rng(5).standard_normal((20, 3))
    a, b = kpca_fit(X, 4), kpca_fit(X.copy(), 4)
    assert a.alphas.tobytes() == b.alphas.tobytes()
    for j in range(a.output_dim):
        col = a.alphas[:, j]
        assert col[np.argmax(np.abs(col))] > 0


def test_kpca_errors():
    X = np.random.default_rng(6).standard_normal((5, 3))
    with pytest.raises(ValueError):
        kpca_fit(X, 6)
    with pytest.raises(ValueError):
        kpca_fit(X, 0)
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        kpca_fit(bad, 2)
    with pytest.raises(ValueError):
        kpca_fit(np.zeros((30, 2)) + np.arange(30)[:, None], 2, frame_cap=20)
    with pytest.raises(ValueError):
        kpca_transform(kpca_fit(X, 2), np.zeros((2, 4)))


def test_subsample_rows_seeded():
    X = np.arange(100.0)[:, None]
    a = dimred.subsample_rows(X, 10, seed=3)
    b = dimred.subsample_rows(X, 10, seed=3)
    assert np.array_equal(a, b) and a.shape == (10, 1)
    assert np.all(np.diff(a[:, 0]) > 0)
    assert dimred.subsample_rows(X, 200, seed=3) is X


def test_explained_variance_plane():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((50, 2)) @ rng.standard_normal((2, 5))
    curve = pca_explained_variance(X)
    assert np.isclose(curve[1], 1.0)
    assert np.all(np.diff(curve) >= -1e-15)
    assert np.all((curve >= 0) & (curve <= 1))


def test_explained_variance_isotropic():
    X = np.random.default_rng(8).standard_normal((20_000, 10))
    curve = pca_explained_variance(X)
    assert np.allclose(curve, np.arange(1, 11) / 10, atol=0.05)


def test_explained_variance_errors():
    with pytest.raises(dimred.DegenerateDataError):
        pca_explained_variance(np.ones((10, 3)))
    with pytest.raises(ValueError):
        pca_explained_variance(np.ones((1, 3)))


def test_explained_variance_csv():
    text = dimred.explained_variance_csv([0.5, 1.0])
    assert text == "component_index,cumulative_fraction\n1,0.5\n2,1.0\n"
