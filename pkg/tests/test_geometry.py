import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bicx.errors import PreconditionError
from bicx.geometry import (
    GramState,
    combo_coefficients,
    eigendecompose,
    ell_index,
    gram_update,
    min_eig,
    project_complement,
    rank_one_tail_gain_check,
)

E1, E2 = np.eye(2)


def test_gram_update_outer_products():
    g = gram_update(GramState.zeros(2), E1)
    np.testing.assert_array_equal(g.m, np.diag([1.0, 0.0]))
    g = gram_update(GramState(m=np.eye(2)), E1)
    np.testing.assert_array_equal(g.m, np.diag([2.0, 1.0]))


def test_gram_update_rejects_non_unit():
    with pytest.raises(PreconditionError):
        gram_update(GramState.zeros(2), np.array([1.0, 1.0]))


def test_chain_of_directions_has_tiny_min_eigenvalue():
    phi = 1 / math.sqrt(5)
    seq = [(1, 0, 0, 0), (2 * phi, -phi, 0, 0), (0, 2 * phi, -phi, 0), (0, 0, 2 * phi, -phi)]
    g = GramState.zeros(4)
    for a in seq:
        g = gram_update(g, np.array(a, dtype=float))
    assert min_eig(g.m) < 0.02


def test_eigendecompose_examples():
    g = eigendecompose(GramState(m=np.diag([3.0, 1.0])))
    np.testing.assert_allclose(g.eigvals, [3, 1])
    np.testing.assert_allclose(np.abs(g.eigvecs), np.eye(2))
    g = eigendecompose(GramState(m=np.array([[2.0, 1.0], [1.0, 2.0]])))
    np.testing.assert_allclose(g.eigvals, [3, 1], atol=1e-14)
    g = eigendecompose(GramState.zeros(3))
    np.testing.assert_array_equal(g.eigvals, 0)
    np.testing.assert_allclose(g.eigvecs.T @ g.eigvecs, np.eye(3), atol=1e-14)


def test_eigendecompose_sign_convention():
    g = eigendecompose(GramState(m=np.array([[2.0, -1.0], [-1.0, 2.0]])))
    for col in g.eigvecs.T:
        first = col[np.abs(col) > 1e-12][0]
        assert first > 0


def test_eigendecompose_rejects_asymmetric():
    with pytest.raises(PreconditionError):
        eigendecompose(GramState(m=np.array([[1.0, 0.5], [0.0, 1.0]])))


def test_ell_index_counts_large_eigenvalues():
    assert ell_index(np.array([3.0, 1.0, 0.2]), 1.0) == 2
    assert ell_index(np.array([0.5]), 1.0) == 0


def test_project_complement_examples():
    np.testing.assert_array_equal(project_complement([1, 1], E1[:, None]), [0, 1])
    np.testing.assert_array_equal(project_complement([1, 0], E1[:, None]), [0, 0])
    np.testing.assert_array_equal(project_complement([3, 4, 0], np.eye(3)[2][:, None]), [3, 4, 0])
    np.testing.assert_array_equal(project_complement([0, 0], E1[:, None]), [0, 0])


def test_combo_coefficients_examples():
    g = eigendecompose(GramState.from_vectors([E1]))
    c = combo_coefficients(E1, [E1], g, 1, 1.0)
    np.testing.assert_allclose(c, [1.0])
    g = eigendecompose(GramState.from_vectors([E1, E1]))
    c = combo_coefficients(E1, [E1, E1], g, 1, 1.0)
    np.testing.assert_allclose(c, [0.5, 0.5])


def test_combo_coefficients_preconditions():
    g = eigendecompose(GramState.from_vectors([E1]))
    with pytest.raises(PreconditionError):
        combo_coefficients(E2, [E1], g, 1, 1.0)
    with pytest.raises(PreconditionError):
        combo_coefficients(E1, [E1], g, 1, 2.0)


def test_tail_gain_examples():
    rep = rank_one_tail_gain_check(np.zeros((0, 2)), E1, 0.5)
    assert rep.holds and rep.ell == 0
    assert rep.lhs == pytest.approx(1.0) and rep.rhs == pytest.approx(0.25)

    v = np.repeat(E1[None], 10, axis=0)
    rep = rank_one_tail_gain_check(v, E2, 0.9, threshold=5.0)
    assert rep.holds and rep.ell == 1
    assert rep.lhs - (rep.rhs - 0.45) == pytest.approx(1.0, abs=1e-12)


def test_tail_gain_preconditions():
    with pytest.raises(PreconditionError):
        rank_one_tail_gain_check(np.zeros((0, 2)), np.array([1.0, 1.0]), 0.5)
    with pytest.raises(PreconditionError):
        rank_one_tail_gain_check([E1], 0.1 * E2, 0.5)


# ------------------------------------------------------------------ properties

unit_rows = st.integers(1, 6).flatmap(
    lambda d: st.tuples(
        st.just(d),
        arrays(np.float64, st.tuples(st.integers(1, 12), st.just(d)),
               elements=st.floats(-1, 1, allow_nan=False)),
    )
)


def _units(v):
    n = np.linalg.norm(v, axis=1)
    v = v[n > 1e-3]
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@settings(max_examples=60, deadline=None)
@given(unit_rows)
def test_eigendecompose_reconstructs_and_orders(data):
    d, v = data
    v = _units(v)
    g = eigendecompose(GramState(m=v.T @ v))
    np.testing.assert_allclose(g.eigvecs @ np.diag(g.eigvals) @ g.eigvecs.T, v.T @ v, atol=1e-10)
    assert np.all(np.diff(g.eigvals) <= 1e-12)
    assert g.eigvals.sum() == pytest.approx(len(v), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(unit_rows, st.floats(0.05, 1.0))
def test_combo_reconstructs_and_is_bounded(data, eps):
    d, v = data
    v = _units(v)
    if len(v) == 0:
        return
    g = eigendecompose(GramState(m=v.T @ v))
    ell = ell_index(g.eigvals, eps)
    if ell == 0:
        return
    u = g.eigvecs[:, :ell] @ np.ones(ell)
    u /= np.linalg.norm(u)
    c = combo_coefficients(u, v, g, ell, eps)
    np.testing.assert_allclose(c @ v, u, atol=1e-9)
    assert c @ c <= 1 / eps + 1e-9


@settings(max_examples=60, deadline=None)
@given(unit_rows, arrays(np.float64, 6, elements=st.floats(-1, 1, allow_nan=False)))
def test_projection_is_idempotent_and_orthogonal(data, raw):
    d, v = data
    v = _units(v)
    u = raw[:d]
    g = eigendecompose(GramState(m=v.T @ v if len(v) else np.zeros((d, d))))
    basis = g.eigvecs[:, : ell_index(g.eigvals, 0.5)]
    p = project_complement(u, basis)
    np.testing.assert_allclose(project_complement(p, basis), p, atol=1e-12)
    np.testing.assert_allclose(basis.T @ p, 0, atol=1e-12)
