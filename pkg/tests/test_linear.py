import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from housefeat.errors import DomainError, ParameterError
from housefeat.models import LinearModel, fit_model, load_model, ols_fit, ridge_fit, save_model


def _rss(m, X, y):
    return float(((y - m.predict(X)) ** 2).sum())


def test_exact_line():
    x = np.arange(10.0)
    m = ols_fit(x[:, None], 3 + 2 * x)
    assert abs(m.intercept - 3) < 1e-12 and abs(m.coef[0] - 2) < 1e-12
    assert _rss(m, x[:, None], 3 + 2 * x) < 1e-20


def test_duplicated_column_splits_weight(rng):
    x = rng.normal(size=30)
    X = np.column_stack([x, x])
    y = 1 + 4 * x
    m = ols_fit(X, y)
    # pseudo-inverse oracle on the centered design
    Xc = X - X.mean(0)
    ref = np.linalg.pinv(Xc) @ (y - y.mean())
    assert np.allclose(m.coef, ref, atol=1e-10) and np.allclose(m.coef, [2, 2], atol=1e-10)


def test_zero_rows():
    with pytest.raises(DomainError):
        ols_fit(np.zeros((0, 2)), np.zeros(0))


def test_ridge_zero_penalty_is_ols(rng):
    X = rng.normal(size=(40, 4))
    y = X @ [1, -2, 0.5, 3] + rng.normal(size=40)
    assert np.allclose(ridge_fit(X, y, 0.0).coef, ols_fit(X, y).coef, atol=1e-8)


def test_ridge_huge_penalty_predicts_mean(rng):
    X = rng.normal(size=(40, 3))
    y = X @ [1, 2, 3] + 5
    m = ridge_fit(X, y, 1e14)
    assert np.abs(m.coef).max() < 1e-9
    assert np.allclose(m.predict(X), y.mean(), atol=1e-8)


def test_ridge_closed_form_on_collinear_design(rng):
    x = rng.normal(size=25)
    X = np.column_stack([x, 2 * x + 1, rng.normal(size=25)])
    y = 3 * x + rng.normal(size=25)
    m = ridge_fit(X, y, 1.0)
    mu, sd = X.mean(0), X.std(0)
    Z = (X - mu) / sd
    w = np.linalg.inv(Z.T @ Z + np.eye(3)) @ Z.T @ (y - y.mean())
    assert np.allclose(m.coef, w / sd, atol=1e-8)
    assert abs(m.intercept - (y.mean() - mu @ (w / sd))) < 1e-8


def test_negative_penalty():
    with pytest.raises(ParameterError):
        ridge_fit(np.zeros((3, 1)), np.zeros(3), -1)


@given(st.integers(0, 100_000), st.integers(5, 40), st.integers(1, 6), st.floats(1e-3, 1e3))
def test_ols_rss_not_above_ridge(seed, n, p, alpha):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n + p, p))
    y = rng.normal(size=n + p)
    assert _rss(ols_fit(X, y), X, y) <= _rss(ridge_fit(X, y, alpha), X, y) * (1 + 1e-12) + 1e-12


def test_missing_cells_imputed_with_training_mean():
    X = np.array([[1.0], [np.nan], [3.0], [5.0]])
    y = np.array([1.0, 2.0, 3.0, 5.0])
    m = ols_fit(X, y)
    assert m.impute.tolist() == [3.0]
    assert m.predict([[np.nan]])[0] == m.predict([[3.0]])[0]


def test_coef_count_and_save_load(tmp_path, rng):
    X = rng.normal(size=(12, 3))
    m = fit_model("ridge", X, rng.normal(size=12), ["a", "b", "c"], ridge_alpha=2.0)
    assert m.coef.size == len(m.feature_names) == 3
    save_model(m, tmp_path / "m.json", {"target": "price"})
    back = load_model(tmp_path / "m.json")
    assert isinstance(back, LinearModel) and back.alpha == 2.0
    assert np.array_equal(back.coef, m.coef) and back.metadata["target"] == "price"


def test_unknown_model_spec():
    with pytest.raises(ParameterError):
        fit_model("svm", np.zeros((3, 1)), np.zeros(3), ["a"])
