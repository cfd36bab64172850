import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eigenshift.eigsolve import (
    NotPositiveDefiniteError,
    PencilError,
    SymmetricPencil,
    count_in_interval,
    solve_pencil,
)

from oracles import pencil_eigs


def random_spd(rng, n, shift=0.5):
    factor = rng.normal(size=(n, n))
    return factor @ factor.T + shift * np.eye(n)


def test_diagonal_pencil():
    theta, vecs = solve_pencil(SymmetricPencil(np.diag([3.0, 1.0]), np.eye(2)))
    assert np.allclose(theta, [1.0, 3.0])
    assert np.allclose(np.abs(vecs), np.eye(2)[:, ::-1])


def test_identity_pencil():
    a = random_spd(np.random.default_rng(3), 5)
    theta, _ = solve_pencil(SymmetricPencil(a, a))
    assert np.allclose(theta, 1.0)


def test_offdiagonal_closed_form():
    theta, _ = solve_pencil(SymmetricPencil(np.array([[0.0, 1.0], [1.0, 0.0]]), np.eye(2)))
    assert np.allclose(theta, [-1.0, 1.0])


def test_b_orthonormality_and_signs():
    rng = np.random.default_rng(7)
    a = random_spd(rng, 6)
    b = random_spd(rng, 6)
    theta, vecs = solve_pencil(SymmetricPencil(a, b))
    assert np.allclose(vecs.T @ b @ vecs, np.eye(6), atol=1e-10)
    for j in range(6):
        k = int(np.argmax(np.abs(vecs[:, j])))
        assert vecs[k, j] > 0


def test_residuals_certified():
    rng = np.random.default_rng(11)
    a = random_spd(rng, 8)
    b = random_spd(rng, 8)
    theta, vecs = solve_pencil(SymmetricPencil(a, b))
    resid = a @ vecs - b @ vecs * theta
    allowed = 1e-9 * (np.linalg.norm(a) + np.abs(theta) * np.linalg.norm(b))
    assert np.all(np.linalg.norm(resid, axis=0) <= allowed * np.maximum(1, np.linalg.norm(vecs, axis=0)))


def test_not_positive_definite_carries_smallest_eig():
    b = np.diag([1.0, -2.0])
    with pytest.raises(NotPositiveDefiniteError) as err:
        SymmetricPencil(np.eye(2), b)
    assert err.value.smallest_eig == pytest.approx(-2.0)


def test_asymmetry_warns():
    a = np.array([[1.0, 2.0], [2.0 + 1e-6, 1.0]])
    with pytest.warns(UserWarning):
        SymmetricPencil(a, np.eye(2))


def test_partial_matches_full():
    rng = np.random.default_rng(13)
    a = random_spd(rng, 12)
    b = random_spd(rng, 12)
    full, fvecs = solve_pencil(SymmetricPencil(a, b))
    part, pvecs = solve_pencil(SymmetricPencil(a, b), n_lowest=4)
    assert part.shape == (4,)
    assert np.allclose(part, full[:4], rtol=1e-10)
    assert np.allclose(np.abs(pvecs), np.abs(fvecs[:, :4]), atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_spectrum_invariant_under_congruence(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    a = random_spd(rng, n)
    b = random_spd(rng, n)
    theta, _ = solve_pencil(SymmetricPencil(a, b))
    q = rng.normal(size=(n, n)) + n * np.eye(n)
    theta_t, _ = solve_pencil(SymmetricPencil(q.T @ a @ q, q.T @ b @ q))
    assert np.allclose(theta, theta_t, rtol=1e-9, atol=1e-9)


def test_trace_identity_on_random_pencils():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(2, 21))
        a = random_spd(rng, n)
        b = random_spd(rng, n)
        theta, _ = solve_pencil(SymmetricPencil(a, b))
        trace = np.trace(np.linalg.inv(b) @ a)
        assert theta.sum() == pytest.approx(trace, rel=1e-8)


def test_matches_independent_oracle():
    rng = np.random.default_rng(19)
    for _ in range(10):
        n = int(rng.integers(2, 12))
        a = random_spd(rng, n)
        b = random_spd(rng, n)
        theta, _ = solve_pencil(SymmetricPencil(a, b))
        assert np.allclose(theta, pencil_eigs(a, b), rtol=1e-8, atol=1e-10)


def test_count_in_interval():
    vals = np.array([1.0, 2.0, 3.0])
    assert count_in_interval(vals, 1.5, 3.5) == 2
    assert count_in_interval(vals, 10.0, 11.0) == 0
    assert count_in_interval(np.array([0.5, 0.5]), 0.4, 0.6) == 2
    with pytest.raises(ValueError):
        count_in_interval(vals, 2.0, 2.0)


def test_n_lowest_validation():
    p = SymmetricPencil(np.eye(3), np.eye(3))
    with pytest.raises(PencilError):
        solve_pencil(p, n_lowest=0)
    with pytest.raises(PencilError):
        solve_pencil(p, n_lowest=4)
