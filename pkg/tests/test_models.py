import threading

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from semiflow import (
    DomainError,
    GeneratorModel,
    ModelError,
    SemigroupEvaluator,
    build_model,
    evolve,
    op_norm,
)
from semiflow.models import diagonal_rapid_spectrum, parse_complex

from conftest import random_stable


# --- build_model


def test_explicit_scalar(scalar):
    assert scalar.dimension == 1
    assert scalar.eigenvalues == pytest.approx([-1.0])


def test_ctmc_spectrum_and_stationary_vector(ctmc2):
    # oracle: the eigendecomposition of the transpose gives the stationary row
    assert np.sort(ctmc2.eigenvalues.real) == pytest.approx([-2.0, 0.0], abs=1e-14)
    w, V = np.linalg.eig(ctmc2.Z.T.real)
    pi = V[:, np.argmin(np.abs(w))].real
    assert pi / pi.sum() == pytest.approx([0.5, 0.5])


def test_diagonal_rapid_entries():
    m = build_model({"type": "diagonal-rapid", "c": 0.5, "K": 3})
    expected = [1j * k - abs(k) ** -0.5 for k in (-3, -2, -1, 1, 2, 3)]
    assert np.diag(m.Z) == pytest.approx(expected)
    assert m.kind == "diagonal-rapid"
    assert m.is_diagonal


@pytest.mark.parametrize("spec, match", [
    ([[1.0, 2.0]], "square"),
    ({"type": "ctmc", "rates": [[-1.0, 0.5], [1.0, -1.0]]}, "row sums"),
    ({"type": "ctmc", "rates": [[1.0, -1.0], [1.0, -1.0]]}, "nonnegative"),
    ({"type": "diagonal-rapid", "c": 1.5, "K": 3}, r"\(0, 1\)"),
    ({"type": "diagonal-rapid", "c": 0.5}, "missing field"),
    ({"type": "bogus"}, "unknown model type"),
])
def test_build_model_errors(spec, match):
    with pytest.raises(ModelError, match=match):
        build_model(spec)


def test_ctmc_row_sum_tolerance():
    eps = 1e-13
    build_model({"type": "ctmc", "rates": [[-1.0, 1.0 + eps], [1.0, -1.0]]})


def test_jordan_and_random_stable():
    j = build_model({"type": "jordan", "eigenvalue": [-0.5, 1.0], "size": 3})
    assert np.allclose(j.Z, (-0.5 + 1j) * np.eye(3) + np.eye(3, k=1))
    r = random_stable(10, seed=4, abscissa=-0.3)
    assert r.spectral_abscissa == pytest.approx(-0.3)
    assert np.array_equal(r.Z, random_stable(10, seed=4, abscissa=-0.3).Z)


def test_parse_complex_forms():
    assert parse_complex([1, -2]) == 1 - 2j
    assert parse_complex("1 - 2j") == 1 - 2j
    assert parse_complex(3) == 3
    with pytest.raises(ModelError):
        parse_complex([1, 2, 3])


def test_model_is_immutable(scalar):
    with pytest.raises(ValueError):
        scalar.Z[0, 0] = 5.0
    with pytest.raises(Exception):
        scalar.kind = "ctmc"


def test_eigendata_cache_is_race_safe():
    m = random_stable(30, seed=1)
    out = []
    threads = [threading.Thread(target=lambda: out.append(m.eigenvalues.copy())) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(np.array_equal(o, out[0]) for o in out)


# --- evolve


def test_evolve_scalar(scalar):
    assert evolve(scalar, 1.0)[0, 0] == pytest.approx(np.exp(-1.0), rel=1e-15)


def test_evolve_identity_at_zero():
    m = random_stable(6, seed=0)
    T0 = evolve(m, 0.0)
    assert np.array_equal(T0, np.eye(6))


def test_evolve_nilpotent():
    m = build_model([[0.0, 1.0], [0.0, 0.0]])
    assert evolve(m, 2.0) == pytest.approx(np.array([[1.0, 2.0], [0.0, 1.0]]))
    assert SemigroupEvaluator(m).method == "scaling-and-squaring"


def test_evolve_negative_time(scalar):
    with pytest.raises(DomainError):
        evolve(scalar, -1.0)


@pytest.mark.parametrize("method", ["eigendecomposition", "scaling-and-squaring"])
def test_evolve_matches_expm(method):
    m = random_stable(8, seed=3)
    T = SemigroupEvaluator(m, method)(2.5)
    assert np.abs(T - scipy.linalg.expm(2.5 * m.Z)).max() < 1e-12


@given(s=st.floats(0, 10), t=st.floats(0, 10), seed=st.integers(0, 50))
def test_semigroup_law(s, t, seed):
    m = random_stable(5, seed)
    err = np.linalg.norm(evolve(m, s + t) - evolve(m, s) @ evolve(m, t), 2)
    assert err <= 1e-10


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_ctmc_semigroup_is_stochastic(t):
    rng = np.random.default_rng(5)
    Q = rng.uniform(0, 1, (5, 5))
    np.fill_diagonal(Q, 0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    m = build_model({"type": "ctmc", "rates": Q.tolist()})
    T = evolve(m, t)
    assert T.min() >= -1e-12
    assert T.sum(axis=1) == pytest.approx(np.ones(5), abs=1e-12)


# --- norms


def test_op_norm_examples(scalar):
    assert op_norm(scalar, [[3.0]], "B", "A") == pytest.approx(3 / np.sqrt(2))
    m = random_stable(4, seed=2)
    I = np.eye(4)
    assert op_norm(m, I, "B", "B") == pytest.approx(1.0)
    assert op_norm(m, I, "A", "A") == pytest.approx(1.0)
    assert op_norm(m, I, "B", "A") <= 1.0 + 1e-14
    for src in "AB":
        for dst in "AB":
            assert op_norm(m, np.zeros((4, 4)), src, dst) == 0.0


def test_op_norm_shape_and_tag_errors(scalar):
    with pytest.raises(ValueError, match="dimension"):
        op_norm(scalar, np.eye(2))
    with pytest.raises(ValueError, match="tags"):
        op_norm(scalar, np.eye(1), "C", "A")


def test_strong_factor_squares_to_gram():
    m = random_stable(6, seed=8)
    S = m.norms.strong_factor
    G = np.eye(6) + m.Z.conj().T @ m.Z
    assert np.abs(S.conj().T @ S - G).max() < 1e-12
    assert np.abs(S @ m.norms.strong_factor_inv - np.eye(6)).max() < 1e-12


@given(seed=st.integers(0, 10_000))
def test_norm_inequalities(seed):
    rng = np.random.default_rng(seed)
    m = random_stable(5, seed % 7)
    mu = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    nu = rng.standard_normal(5)
    T = rng.standard_normal((5, 5))
    nb = m.norms.norm_B
    assert m.norms.norm_A(mu) <= nb(mu) + 1e-12
    assert nb(mu + nu) <= nb(mu) + nb(nu) + 1e-12
    assert nb(2.5j * mu) == pytest.approx(2.5 * nb(mu))
    ba = op_norm(m, T, "B", "A")
    assert np.linalg.norm(T @ mu) <= ba * nb(mu) * (1 + 1e-12)
    assert ba <= op_norm(m, T, "B", "B") * (1 + 1e-12)
    assert ba <= op_norm(m, T, "A", "A") * (1 + 1e-12)


def test_op_norm_attained_by_singular_vector():
    rng = np.random.default_rng(0)
    m = random_stable(6, seed=9)
    T = rng.standard_normal((6, 6))
    Sinv = m.norms.strong_factor_inv
    _, _, Vh = np.linalg.svd(T @ Sinv)
    mu = Sinv @ Vh[0].conj()
    ratio = np.linalg.norm(T @ mu) / m.norms.norm_B(mu)
    assert ratio == pytest.approx(op_norm(m, T, "B", "A"), abs=1e-10)


def test_diagonal_fast_path_matches_dense():
    m = build_model({"type": "diagonal-rapid", "c": 0.5, "K": 4})
    D = np.diag(np.arange(1, 9) * (1 + 0.5j))
    dense = GeneratorModel(m.Z + 0 * np.eye(8))
    for src in "AB":
        for dst in "AB":
            S = dense.norms.strong_factor
            M = D
            if dst == "B":
                M = S @ M
            if src == "B":
                M = M @ np.linalg.inv(S)
            assert op_norm(m, D, src, dst) == pytest.approx(np.linalg.norm(M, 2))


def test_diagonal_rapid_spectrum_helper():
    w = diagonal_rapid_spectrum(0.25, 2)
    assert w == pytest.approx([-2j - 2 ** -0.25, -1j - 1, 1j - 1, 2j - 2 ** -0.25])
