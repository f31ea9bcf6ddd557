import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semiflow import (
    DomainError,
    ExtensionPoleError,
    FrequencyGuardWarning,
    PoleError,
    SeriesDivergenceError,
    build_model,
    generator_identity_residual,
    graded_norm,
    neumann_extension,
    pres_extension,
    resolvent_direct,
    resolvent_identity_residual,
    resolvent_laplace,
)

from conftest import random_stable


# --- direct


def test_direct_scalar(scalar):
    ev = resolvent_direct(scalar, 2.0)
    assert ev.matrix[0, 0] == pytest.approx(1 / 3)
    assert ev.method == "direct"
    assert ev.residual < 1e-14


def test_direct_diagonal(diag2):
    R = resolvent_direct(diag2, 1.0).matrix
    assert R == pytest.approx(np.diag([1 / 1.1, 1 / 3]))


def test_direct_pole_carries_eigenvalue(scalar):
    with pytest.raises(PoleError) as info:
        resolvent_direct(scalar, -1.0)
    assert info.value.eigenvalue == pytest.approx(-1.0)


def test_direct_residual_bound():
    m = random_stable(30, seed=2)
    ev = resolvent_direct(m, 0.3 + 2j)
    assert ev.residual <= 1e-10


# --- laplace


def test_laplace_scalar(scalar):
    ev = resolvent_laplace(scalar, 2.0, t_max=20.0, step=0.01)
    assert ev.matrix[0, 0] == pytest.approx(1 / 3, abs=1e-8)
    assert ev.residual < 1e-8
    assert ev.method == "laplace"


def test_laplace_rejects_left_half_plane(scalar):
    with pytest.raises(DomainError):
        resolvent_laplace(scalar, -0.5, 10.0, 0.01)


def test_laplace_error_split():
    m = random_stable(8, seed=5)
    ev = resolvent_laplace(m, 5.0, t_max=10.0, step=0.01)
    assert ev.tail_bound < 1e-20
    assert ev.residual <= ev.tail_bound + 10 * ev.quadrature_error + 1e-12


def test_laplace_fourth_order():
    m = random_stable(6, seed=7)
    z = 1.0 + 0.5j
    coarse = resolvent_laplace(m, z, 40.0, 0.02)
    fine = resolvent_laplace(m, z, 40.0, 0.01)
    assert coarse.quadrature_error / fine.quadrature_error >= 8.0


def test_laplace_non_diagonalizable():
    m = build_model({"type": "jordan", "eigenvalue": -0.5, "size": 3})
    ev = resolvent_laplace(m, 1.0, t_max=40.0, step=0.005)
    assert ev.residual <= 1e-8


# --- resolvent identity


def test_identity_scalar(scalar):
    # (2 - 3) * (1/4) * (1/3) = 1/4 - 1/3
    assert resolvent_identity_residual(scalar, 2.0, 3.0) < 1e-15


def test_identity_equal_points(diag2):
    assert resolvent_identity_residual(diag2, 1 + 1j, 1 + 1j) == 0.0


@given(seed=st.integers(0, 200), re=st.floats(0.05, 3), im=st.floats(-20, 20),
       re2=st.floats(0.05, 3), im2=st.floats(-20, 20))
def test_identity_random(seed, re, im, re2, im2):
    m = random_stable(20, seed)
    assert resolvent_identity_residual(m, complex(re, im), complex(re2, im2)) <= 1e-10


# --- pres extension


def test_pres_scalar_value(scalar):
    ev = pres_extension(scalar, 1.0, -1.0)
    assert ev.z == 0
    assert ev.matrix[0, 0] == pytest.approx(1.0)
    assert ev.residual < 1e-14


def test_pres_pole(scalar):
    # z + 1/eta = -1 at eta = -1/2
    with pytest.raises(ExtensionPoleError):
        pres_extension(scalar, 1.0, -0.5)


def test_pres_random():
    m = random_stable(10, seed=3)
    ev = pres_extension(m, 1 + 3j, 2j)
    assert ev.residual <= 1e-8


@given(seed=st.integers(0, 100), x=st.floats(-0.09, -0.001), y=st.floats(-5, 5))
def test_pres_left_half_plane(seed, x, y):
    # targets with -lambda < Re < 0 lie right of every eigenvalue here
    m = random_stable(6, seed, abscissa=-0.1)
    z = 1.0 + 1j * y
    eta = 1.0 / (complex(x, y) - z)
    ev = pres_extension(m, z, eta)
    assert ev.z.real < 0
    assert ev.residual <= 1e-8


def test_pres_domain(scalar):
    with pytest.raises(DomainError):
        pres_extension(scalar, -1.0, 1.0)
    with pytest.raises(DomainError):
        pres_extension(scalar, 1.0, 0.0)


# --- neumann extension


def test_neumann_scalar():
    m = build_model([[-2.0]])
    ev = neumann_extension(m, 1.0, 1.0, 10.0)
    assert ev.matrix[0, 0] == pytest.approx(1 / (1 + 10j), abs=1e-12)
    assert ev.residual < 1e-11
    assert ev.truncation_index > 0


def test_neumann_guard_and_divergence():
    m = build_model([[-0.5]])
    with pytest.warns(FrequencyGuardWarning):
        with pytest.raises(SeriesDivergenceError):
            neumann_extension(m, 1.0, 1.0, 0.1, beta=1.0)


def test_neumann_random_dim10():
    m = random_stable(10, seed=11, abscissa=-1.6)
    ev = neumann_extension(m, 1.0, 1.0, 20.0, tail_tol=1e-12)
    assert ev.residual <= 1e-8


@pytest.mark.parametrize("tol", [1e-6, 1e-9, 1e-12])
def test_neumann_truncation_is_honest(tol):
    m = random_stable(8, seed=4, abscissa=-1.5)
    ev = neumann_extension(m, 1.0, 1.0, 15.0, tail_tol=tol)
    # exact infinite sum from the closed form (I - K)^{-1}
    R = resolvent_direct(m, 1 + 15j).matrix
    exact = np.linalg.inv(np.eye(8) - 2.0 * R)
    assert np.linalg.norm(exact - ev.series, 2) <= 10 * tol


# --- generator identities


def test_generator_identity_scalar(scalar):
    assert generator_identity_residual(scalar, 2.0, 1) < 1e-15


def test_generator_identity_nilpotent():
    m = build_model([[0.0, 1.0], [0.0, 0.0]])
    assert resolvent_direct(m, 1.0).matrix == pytest.approx(np.array([[1, 1], [0, 1]]))
    assert generator_identity_residual(m, 1.0, 3) == 0.0


def test_generator_identity_iterated():
    m = random_stable(7, seed=6)
    z = 0.7 - 1.3j
    assert generator_identity_residual(m, z, 1) <= 1e-10
    assert generator_identity_residual(m, z, 2) <= 1e-10
    # iterate n=1: R = 1/z + R Z / z = 1/z + Z/z^2 + R Z^2 / z^2
    R = resolvent_direct(m, z).matrix
    once = np.eye(7) / z + R @ m.Z / z
    twice = np.eye(7) / z + m.Z / z ** 2 + R @ m.Z @ m.Z / z ** 2
    assert np.abs(once - twice).max() < 1e-12


def test_generator_identity_zero(scalar):
    with pytest.raises(DomainError):
        generator_identity_residual(scalar, 0.0)


# --- graded norm


def test_graded_norm_examples(scalar):
    mu = np.array([1.0])
    assert graded_norm(scalar, mu, 0).value == pytest.approx(np.sqrt(2))
    assert graded_norm(scalar, mu, 2).value == pytest.approx(3 * np.sqrt(2))
    assert graded_norm(scalar, np.zeros(1), 5).value == 0.0


@given(seed=st.integers(0, 1000), q=st.integers(1, 6))
def test_graded_norm_monotone(seed, q):
    rng = np.random.default_rng(seed)
    m = random_stable(4, seed % 5)
    mu = rng.standard_normal(4)
    assert graded_norm(m, mu, q).value >= graded_norm(m, mu, q - 1).value
