"""Resolvent evaluation and the identities it satisfies.

Every routine returns plain ndarrays wrapped in :class:`ResolventEvaluation`
so that the method used and its defect against direct inversion travel with
the value.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from ._quadrature import simpson_nodes
from ._validation import check_nonneg_int, check_positive, check_vector
from .exceptions import (
    DomainError,
    ExtensionPoleError,
    FrequencyGuardWarning,
    PoleError,
    SeriesDivergenceError,
)
from .models import evolve

__all__ = [
    "ResolventEvaluation",
    "GradedNorm",
    "resolvent_direct",
    "resolvent_laplace",
    "resolvent_identity_residual",
    "pres_extension",
    "neumann_extension",
    "generator_identity_residual",
    "graded_norm",
]

POLE_GUARD = 1e-12


@dataclass
class ResolventEvaluation:
    """A resolvent value ``R(z)`` and how it was obtained.

    ``residual`` is the Frobenius defect ``|(z I - Z) R - I|`` for the direct
    method and the relative Frobenius distance to the direct inverse for the
    other methods (``None`` when ``z`` is a pole).
    """

    z: complex
    matrix: np.ndarray
    method: str
    residual: Optional[float] = None
    truncation_index: Optional[int] = None
    tail_bound: Optional[float] = None
    quadrature_error: Optional[float] = None
    series: Optional[np.ndarray] = None


@dataclass
class GradedNorm:
    q: int
    value: float


def _pole_distance(model, z):
    lam = model.eigenvalues
    k = int(np.argmin(np.abs(lam - z)))
    return float(abs(lam[k] - z)), complex(lam[k])


def _guard(model):
    return POLE_GUARD * max(1.0, model.norm)


def _inverse(model, z):
    n = model.dimension
    if model.is_diagonal:
        return np.diag(1.0 / (z - np.diag(model.Z)))
    return np.linalg.solve(z * np.eye(n) - model.Z, np.eye(n, dtype=complex))


def _relative_defect(X, R):
    return float(np.linalg.norm(X - R) / max(1.0, np.linalg.norm(R)))


def resolvent_direct(model, z):
    """``R(z) = (z I - Z)^{-1}``; raises :class:`PoleError` within the guard radius of the spectrum."""
    z = complex(z)
    dist, lam = _pole_distance(model, z)
    if dist <= _guard(model):
        raise PoleError(f"z={z} is an eigenvalue of the generator (nearest {lam})", lam)
    R = _inverse(model, z)
    n = model.dimension
    if model.is_diagonal:
        res = float(np.linalg.norm((z - np.diag(model.Z)) * np.diag(R) - 1.0))
    else:
        res = float(np.linalg.norm((z * np.eye(n) - model.Z) @ R - np.eye(n)))
    return ResolventEvaluation(z, R, "direct", res)


def _try_direct(model, z):
    try:
        return resolvent_direct(model, z).matrix
    except PoleError:
        return None


def resolvent_laplace(model, z, t_max, step, C1=None):
    """Laplace transform ``int_0^t_max e^{-zt} T_t dt`` by composite Simpson.

    The returned ``tail_bound`` is ``C1 e^{-Re(z) t_max} / Re(z)`` (the
    neglected part of the integral) and ``quadrature_error`` a Richardson
    estimate ``|S_h - S_2h| / 15`` of the Simpson error. ``C1`` defaults to
    the largest ``|T_t|_2`` seen on a coarse sample of ``[0, t_max]``.
    """
    z = complex(z)
    if z.real <= 0:
        raise DomainError(f"the Laplace integral converges only for Re(z) > 0, got z={z}")
    t_max = check_positive(t_max, "t_max")
    step = check_positive(step, "step")
    # interval count divisible by 4 so every other node carries a Simpson rule at 2h
    n_int = 4 * max(1, int(np.ceil(t_max / (4 * step) - 1e-9)))
    h = t_max / n_int
    t, w = simpson_nodes(0.0, t_max, h * (1 + 1e-12))
    assert t.size == n_int + 1
    w2 = np.full(n_int // 2 + 1, 2.0)
    w2[1::2] = 4.0
    w2[0] = w2[-1] = 1.0
    w2 *= 2 * h / 3.0

    if model.diagonalizable:
        lam = model.eigenvalues
        V = model.eigenvectors
        Vinv = model.eigenvectors_inv
        acc = np.zeros(lam.size, dtype=complex)
        acc2 = np.zeros(lam.size, dtype=complex)
        batch = max(1, 2 ** 22 // lam.size)
        for s in range(0, t.size, batch):
            tt = t[s:s + batch, None]
            f = np.exp((lam[None, :] - z) * tt)
            acc += (w[s:s + batch, None] * f).sum(axis=0)
            idx = np.arange(s, min(s + batch, t.size))
            even = idx % 2 == 0
            acc2 += (w2[idx[even] // 2, None] * f[even]).sum(axis=0)
        S = (V * acc) @ Vinv
        S2 = (V * acc2) @ Vinv
    else:
        n = model.dimension
        Th = scipy.linalg.expm(h * (model.Z - z * np.eye(n)))
        F = np.eye(n, dtype=complex)
        S = np.zeros((n, n), dtype=complex)
        S2 = np.zeros((n, n), dtype=complex)
        for k in range(n_int + 1):
            S += w[k] * F
            if k % 2 == 0:
                S2 += w2[k // 2] * F
            F = F @ Th
    if C1 is None:
        C1 = max(np.linalg.norm(evolve(model, s), 2) for s in np.linspace(0.0, t_max, 65))
    tail = C1 * np.exp(-z.real * t_max) / z.real
    quad = float(np.linalg.norm(S - S2) / 15.0)
    R = _try_direct(model, z)
    residual = None if R is None else _relative_defect(S, R)
    return ResolventEvaluation(z, S, "laplace", residual, truncation_index=n_int,
                               tail_bound=float(tail), quadrature_error=quad)


def resolvent_identity_residual(model, z, zeta):
    """``|(z - zeta) R(zeta) R(z) - R(zeta) + R(z)|_{B->B}``."""
    Rz = resolvent_direct(model, z).matrix
    Rzeta = resolvent_direct(model, zeta).matrix
    D = (complex(z) - complex(zeta)) * (Rzeta @ Rz) - Rzeta + Rz
    return model.norms.op_norm(D, "B", "B")


def pres_extension(model, z, eta):
    """Continue the resolvent to ``w = z + 1/eta`` from its value at ``Re(z) > 0``.

    Uses ``R(z + 1/eta) = eta R(z) (eta I + R(z))^{-1}``, which follows from
    the resolvent equation with ``z - zeta = -1/eta``. The extension is
    meromorphic in ``eta``; its poles are exactly the ``eta`` with
    ``z + 1/eta`` in the spectrum.
    """
    z = complex(z)
    eta = complex(eta)
    if z.real <= 0:
        raise DomainError(f"the base point must satisfy Re(z) > 0, got z={z}")
    if eta == 0:
        raise DomainError("eta must be nonzero")
    target = z + 1.0 / eta
    dist, lam = _pole_distance(model, target)
    if dist <= _guard(model):
        raise ExtensionPoleError(f"z + 1/eta = {target} is a pole of the extension", lam)
    Rz = resolvent_direct(model, z).matrix
    M = eta * np.eye(model.dimension) + Rz
    if np.linalg.cond(M) > 1e12:
        raise ExtensionPoleError(f"eta I + R(z) is numerically singular at eta={eta}", lam)
    X = eta * np.linalg.solve(M, Rz)
    R = _try_direct(model, target)
    residual = None if R is None else _relative_defect(X, R)
    return ResolventEvaluation(target, X, "pres-extension", residual)


def neumann_extension(model, alpha, ell, b, tail_tol=1e-12, beta=None, max_terms=100_000):
    """Shifted resolvent ``R(-ell + ib) = R(alpha+ib) sum_n (alpha+ell)^n R(alpha+ib)^n``.

    Terms are accumulated until the next term, inflated by the geometric
    factor ``1/(1 - rho)`` with ``rho`` the spectral radius of
    ``(alpha+ell) R(alpha+ib)``, drops below ``tail_tol``. The partial sum of
    the series (without the leading resolvent factor) is kept on ``series``.
    """
    alpha = check_positive(alpha, "alpha")
    ell = check_positive(ell, "ell")
    b = float(b)
    if beta is not None and abs(b) < beta:
        warnings.warn(f"|b|={abs(b)} is below the frequency guard beta={beta}",
                      FrequencyGuardWarning, stacklevel=2)
    base = complex(alpha, b)
    Ra = resolvent_direct(model, base).matrix
    dist, _ = _pole_distance(model, base)
    rho = (alpha + ell) / dist
    if rho >= 1.0:
        raise SeriesDivergenceError(
            f"Neumann series diverges at b={b}: (alpha+ell) * spectral radius of R(alpha+ib) = {rho:.6g} >= 1")
    K = (alpha + ell) * Ra
    n = model.dimension
    S = np.eye(n, dtype=complex)
    term = S.copy()
    tail = np.inf
    index = 0
    while index < max_terms:
        nxt = term @ K
        nrm = np.linalg.norm(nxt, 2)
        tail = nrm / (1.0 - rho)
        if tail < tail_tol:
            break
        S += nxt
        term = nxt
        index += 1
    else:
        raise SeriesDivergenceError(
            f"Neumann series did not reach tail {tail_tol} within {max_terms} terms")
    X = Ra @ S
    target = complex(-ell, b)
    R = _try_direct(model, target)
    residual = None if R is None else _relative_defect(X, R)
    return ResolventEvaluation(target, X, "neumann", residual, truncation_index=index,
                               tail_bound=float(tail), series=S)


def generator_identity_residual(model, z, n=1):
    """``|R(z) - z^{-n} R(z) Z^n - sum_{j<n} z^{-(j+1)} Z^j|_{B->B}``."""
    z = complex(z)
    n = check_nonneg_int(n, "n", minimum=1)
    if z == 0:
        raise DomainError("the generator identities require z != 0")
    R = resolvent_direct(model, z).matrix
    Z = model.Z
    dim = model.dimension
    D = R - (R @ np.linalg.matrix_power(Z, n)) / z ** n
    P = np.eye(dim, dtype=complex)
    for j in range(n):
        D -= P / z ** (j + 1)
        P = P @ Z
    return model.norms.op_norm(D, "B", "B")


def graded_norm(model, mu, q):
    """``|mu|_{Z^q} = sum_{n=0}^{q} |Z^n mu|_B``."""
    q = check_nonneg_int(q, "q")
    v = check_vector(mu, model.dimension, "mu")
    total = 0.0
    for _ in range(q + 1):
        total += model.norms.norm_B(v)
        v = model.Z @ v
    return GradedNorm(q, total)
