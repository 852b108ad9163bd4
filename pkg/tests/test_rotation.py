import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellefa.efa.extraction import extract_factors
from cellefa.efa.model import FactorModel
from cellefa.efa.rotation import promax, rotate, varimax, varimax_criterion
from cellefa.errors import SingularTransformWarning


def simple_structure(n=12, k=2, seed=0):
    rng = np.random.default_rng(seed)
    a = np.zeros((n, k))
    for i in range(n):
        a[i, i % k] = rng.uniform(0.4, 0.9)
    return a


def rot2(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def match_columns(x, ref):
    """Permute and re-sign the columns of ``x`` to line up with ``ref``."""
    out = np.empty_like(x)
    used = set()
    for j in range(ref.shape[1]):
        scores = [abs(x[:, i] @ ref[:, j]) if i not in used else -1 for i in range(x.shape[1])]
        i = int(np.argmax(scores))
        used.add(i)
        out[:, j] = x[:, i] * np.sign(x[:, i] @ ref[:, j])
    return out


def test_criterion_value():
    a = np.array([[1.0, 0.0], [0.0, 1.0]])
    # per column: sum l^4 = 1, (sum l^2)^2 / n = 0.5
    assert varimax_criterion(a) == 1.0


def test_simple_structure_is_fixed_point():
    a = simple_structure()
    res = varimax(a)
    assert np.abs(match_columns(res.loadings, a) - a).max() <= 1e-12


@pytest.mark.parametrize("theta", [math.pi / 4, 0.3, -0.6])
def test_known_rotation_inverted(theta):
    a = simple_structure(seed=1)
    res = varimax(a @ rot2(theta))
    assert np.abs(match_columns(res.loadings, a) - a).max() <= 1e-6


def test_one_factor_passthrough():
    a = np.arange(1.0, 5.0)[:, None] / 10
    res = varimax(a)
    assert np.array_equal(res.loadings, a) and res.rotation.tolist() == [[1.0]]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_varimax_contract(seed, k):
    a = np.random.default_rng(seed).uniform(-1, 1, size=(20, k))
    res = varimax(a)
    assert all(b >= a_ for a_, b in zip(res.criterion, res.criterion[1:]))
    assert np.abs(res.rotation.T @ res.rotation - np.eye(k)).max() <= 1e-10
    assert np.abs(np.sum(a**2, axis=1) - np.sum(res.loadings**2, axis=1)).max() <= 1e-10
    assert np.abs(a @ res.rotation - res.loadings).max() == 0.0


def test_unnormalized_varimax_maximizes_raw_criterion():
    a = np.random.default_rng(5).uniform(-1, 1, size=(15, 3))
    res = varimax(a, normalize=False)
    assert varimax_criterion(res.loadings) >= varimax_criterion(a)
    for theta in np.linspace(-0.2, 0.2, 9):
        q = np.eye(3)
        q[:2, :2] = rot2(theta)
        assert varimax_criterion(res.loadings @ q) <= varimax_criterion(res.loadings) + 1e-12


def test_promax_on_simple_structure():
    a = simple_structure(n=30, k=3, seed=2)
    res = promax(a)
    off = res.phi[~np.eye(3, dtype=bool)]
    assert np.abs(off).max() <= 0.05
    assert np.abs(res.pattern - a).max() <= 0.05
    assert np.array_equal(np.diag(res.phi), np.ones(3))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_promax_contract(seed):
    a = np.random.default_rng(seed).uniform(-1, 1, size=(25, 3))
    vm = varimax(a).loadings
    res = promax(vm, kappa=4)
    assert np.array_equal(np.diag(res.phi), np.ones(3))
    assert np.array_equal(res.phi, res.phi.T)
    assert np.abs(res.phi).max() <= 1.0
    # the oblique pattern and phi reproduce the varimax common variance
    assert np.abs(res.pattern @ res.phi @ res.pattern.T - vm @ vm.T).max() <= 1e-10


def test_promax_correlated_factors():
    pattern = simple_structure(n=40, k=2, seed=3)
    phi = np.array([[1.0, 0.5], [0.5, 1.0]])
    r = pattern @ phi @ pattern.T
    np.fill_diagonal(r, 1.0)
    model = rotate(extract_factors(r, 2), "promax")
    assert abs(model.phi[0, 1]) == pytest.approx(0.5, abs=0.1)


def test_promax_singular_falls_back():
    a = np.column_stack([np.linspace(0.1, 0.9, 10), np.linspace(0.1, 0.9, 10)])
    with pytest.warns(SingularTransformWarning):
        res = promax(a)
    assert res.singular and np.array_equal(res.phi, np.eye(2)) and np.array_equal(res.pattern, a)


def test_promax_kappa_validation():
    with pytest.raises(ValueError):
        promax(simple_structure(), kappa=0)


def _model(pattern):
    h2 = np.sum(pattern**2, axis=1)
    return FactorModel(pattern, np.eye(pattern.shape[1]), 1 - h2, h2, np.sum(pattern**2, axis=0))


@pytest.mark.parametrize("method, tag", [("none", "none"), ("varimax", "varimax"), ("promax", "promax")])
def test_rotate_tags(method, tag):
    m = rotate(_model(simple_structure(seed=4) @ rot2(0.4)), method)
    assert m.rotation == tag
    assert np.allclose(np.sum((m.pattern @ m.phi) * m.pattern, axis=1), m.communalities, atol=1e-10)


def test_rotate_unknown_method():
    with pytest.raises(ValueError):
        rotate(_model(simple_structure()), "oblimin")
