"""Finite-dimensional semigroup models, the strong/weak norm pair and T_t = exp(tZ)."""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from ._validation import check_positive, check_square_matrix
from .exceptions import DomainError, ModelError

__all__ = [
    "GeneratorModel",
    "NormPair",
    "SemigroupEvaluator",
    "build_model",
    "evolve",
    "op_norm",
    "parse_complex",
]

KINDS = ("general", "ctmc", "jordan", "diagonal-rapid")

# eigendecomposition is trusted for exp(tZ) below this eigenvector condition number
EIG_COND_LIMIT = 1e6
CTMC_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GeneratorModel:
    """A generator matrix ``Z`` together with the metadata needed downstream.

    Instances are immutable; eigendata and the norm pair are computed lazily
    and cached. Racing first accesses compute identical values, so sharing a
    model between threads is safe.
    """

    Z: np.ndarray
    kind: str = "general"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        Z = check_square_matrix(self.Z, "generator").copy()
        Z.setflags(write=False)
        object.__setattr__(self, "Z", Z)
        if self.kind not in KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "ctmc":
            _check_ctmc(Z)

    @property
    def dimension(self):
        return self.Z.shape[0]

    @cached_property
    def is_diagonal(self):
        return not np.any(self.Z - np.diag(np.diag(self.Z)))

    @cached_property
    def is_real(self):
        return not np.any(self.Z.imag)

    @cached_property
    def norm(self):
        """Spectral norm of Z (used for relative guards)."""
        if self.is_diagonal:
            return float(np.max(np.abs(np.diag(self.Z))))
        return float(np.linalg.norm(self.Z, 2))

    @cached_property
    def _eig(self):
        if self.is_diagonal:
            w = np.diag(self.Z).copy()
            V = np.eye(self.dimension, dtype=complex)
            return w, V, V.copy(), 1.0
        w, V = np.linalg.eig(self.Z)
        cond = np.linalg.cond(V)
        if np.isfinite(cond) and cond < 1e14:
            Vinv = np.linalg.inv(V)
        else:
            Vinv = None
        return w, V, Vinv, float(cond)

    @property
    def eigenvalues(self):
        return self._eig[0]

    @property
    def eigenvectors(self):
        return self._eig[1]

    @property
    def eigenvector_condition(self):
        return self._eig[3]

    @property
    def diagonalizable(self):
        """True when the eigenbasis is well enough conditioned to be used directly."""
        return self._eig[2] is not None and self._eig[3] < EIG_COND_LIMIT

    @property
    def eigenvectors_inv(self):
        if self._eig[2] is None:
            raise np.linalg.LinAlgError("eigenvector matrix is numerically singular")
        return self._eig[2]

    @property
    def spectral_abscissa(self):
        return float(np.max(self.eigenvalues.real))

    @cached_property
    def norms(self):
        return NormPair(self)

    def __repr__(self):
        return f"GeneratorModel(kind={self.kind!r}, dimension={self.dimension})"


def _check_ctmc(Z):
    if np.any(Z.imag):
        raise ModelError("ctmc rate matrix must be real")
    Q = Z.real
    rows = Q.sum(axis=1)
    bad = np.flatnonzero(np.abs(rows) > CTMC_TOL * max(1.0, np.abs(Q).max()))
    if bad.size:
        raise ModelError(f"ctmc row sums must vanish; row {bad[0]} sums to {rows[bad[0]]:.3e}")
    off = Q - np.diag(np.diag(Q))
    if np.any(off < 0):
        raise ModelError("ctmc off-diagonal rates must be nonnegative")


class NormPair:
    """Strong norm ``|mu|_B = |S mu|_2`` with ``S^* S = I + Z^* Z`` and weak norm ``|mu|_A = |mu|_2``."""

    def __init__(self, model):
        self.model = model
        Z = model.Z
        if model.is_diagonal:
            s = np.sqrt(1.0 + np.abs(np.diag(Z)) ** 2)
            self._diag = s
            self.strong_factor = np.diag(s).astype(complex)
            self.strong_factor_inv = np.diag(1.0 / s).astype(complex)
        else:
            self._diag = None
            G = np.eye(Z.shape[0]) + Z.conj().T @ Z
            w, U = np.linalg.eigh(G)
            w = np.clip(w, 1.0, None)
            self.strong_factor = (U * np.sqrt(w)) @ U.conj().T
            self.strong_factor_inv = (U / np.sqrt(w)) @ U.conj().T

    def norm_B(self, mu):
        mu = np.asarray(mu, dtype=complex)
        return float(np.sqrt(np.linalg.norm(mu) ** 2 + np.linalg.norm(self.model.Z @ mu) ** 2))

    @staticmethod
    def norm_A(mu):
        return float(np.linalg.norm(np.asarray(mu, dtype=complex)))

    def op_norm(self, T, src="B", dst="A"):
        """Induced norm of ``T`` from the ``src`` norm to the ``dst`` norm."""
        T = np.asarray(T, dtype=complex)
        n = self.model.dimension
        if T.shape != (n, n):
            raise ValueError(f"operator shape {T.shape} does not match model dimension {n}")
        if src not in ("A", "B") or dst not in ("A", "B"):
            raise ValueError(f"norm tags must be 'A' or 'B', got {src!r}->{dst!r}")
        if self._diag is not None and not np.any(T - np.diag(np.diag(T))):
            d = np.abs(np.diag(T))
            if dst == "B":
                d = d * self._diag
            if src == "B":
                d = d / self._diag
            return float(d.max())
        M = T
        if dst == "B":
            M = self.strong_factor @ M
        if src == "B":
            M = M @ self.strong_factor_inv
        return float(np.linalg.norm(M, 2))


def op_norm(model, T, src="B", dst="A"):
    """Operator norm of ``T`` between the model's strong (``B``) and weak (``A``) norms.

    ``B->A`` is the top singular value of ``T S^{-1}``, ``B->B`` that of
    ``S T S^{-1}`` and ``A->A`` that of ``T``.
    """
    return model.norms.op_norm(T, src, dst)


class SemigroupEvaluator:
    """Evaluates ``T_t = exp(tZ)`` for one model.

    ``method`` is ``"eigendecomposition"``, ``"scaling-and-squaring"`` or
    ``"auto"`` (eigendecomposition when the eigenvector condition number is
    below ``EIG_COND_LIMIT``).
    """

    def __init__(self, model, method="auto"):
        if method not in ("auto", "eigendecomposition", "scaling-and-squaring"):
            raise ValueError(f"unknown evaluation method {method!r}")
        if method == "auto":
            method = "eigendecomposition" if model.diagonalizable else "scaling-and-squaring"
        self.model = model
        self.method = method

    def __call__(self, t):
        t = check_positive(t, "t", strict=False)
        model = self.model
        n = model.dimension
        if t == 0.0:
            return np.eye(n) if model.is_real else np.eye(n, dtype=complex)
        if model.is_diagonal:
            out = np.diag(np.exp(t * np.diag(model.Z)))
        elif self.method == "eigendecomposition":
            V, Vinv = model.eigenvectors, model.eigenvectors_inv
            out = (V * np.exp(t * model.eigenvalues)) @ Vinv
        else:
            out = scipy.linalg.expm(t * model.Z)
        if model.is_real:
            return out.real.copy()
        return out


def evolve(model, t, method="auto"):
    """Return ``T_t = exp(tZ)`` for ``t >= 0``; ``T_0`` is exactly the identity."""
    if isinstance(t, (int, float, np.floating, np.integer)) and t < 0:
        raise DomainError(f"the semigroup is defined for t >= 0 only, got t={t}")
    return SemigroupEvaluator(model, method)(t)


def parse_complex(value):
    """Parse a JSON-friendly complex number: a number, ``[re, im]`` or a string like ``"1-2j"``."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ModelError(f"complex pair must have two entries, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    return complex(value)


def _parse_matrix(rows, name):
    try:
        return np.array([[parse_complex(v) for v in row] for row in rows], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{name}: {exc}") from None


def diagonal_rapid_spectrum(c, K):
    """Eigenvalues ``i k - |k|^{-c}`` for ``k = -K..-1, 1..K``."""
    k = np.concatenate([np.arange(-K, 0), np.arange(1, K + 1)]).astype(float)
    return 1j * k - np.abs(k) ** (-c)


def build_model(spec):
    """Build a validated :class:`GeneratorModel` from a descriptor.

    ``spec`` is a GeneratorModel (returned unchanged), an array-like
    generator, or a dict with a ``type`` key:

    ``explicit``        ``matrix`` (entries as numbers, ``[re, im]`` or strings)
    ``ctmc``            ``rates``: rate matrix with zero row sums
    ``jordan``          ``eigenvalue``, ``size``
    ``diagonal-rapid``  ``c`` in (0, 1), ``K`` >= 1
    ``random-stable``   ``dimension``, ``abscissa``, ``seed``
    """
    if isinstance(spec, GeneratorModel):
        return spec
    if not isinstance(spec, dict):
        try:
            return GeneratorModel(spec)
        except ValueError as exc:
            raise ModelError(str(exc)) from None
    kind = spec.get("type")
    try:
        if kind == "explicit":
            return GeneratorModel(_parse_matrix(spec["matrix"], "matrix"), "general", {"type": kind})
        if kind == "ctmc":
            return GeneratorModel(_parse_matrix(spec["rates"], "rates"), "ctmc", {"type": kind})
        if kind == "jordan":
            lam = parse_complex(spec["eigenvalue"])
            m = int(spec["size"])
            if m < 1:
                raise ModelError("jordan block size must be >= 1")
            J = lam * np.eye(m, dtype=complex) + np.eye(m, k=1)
            return GeneratorModel(J, "jordan", {"type": kind, "eigenvalue": lam, "size": m})
        if kind == "diagonal-rapid":
            c = float(spec["c"])
            K = int(spec["K"])
            if not 0.0 < c < 1.0:
                raise ModelError(f"diagonal-rapid exponent c must lie in (0, 1), got {c}")
            if K < 1:
                raise ModelError("diagonal-rapid K must be >= 1")
            Z = np.diag(diagonal_rapid_spectrum(c, K))
            return GeneratorModel(Z, "diagonal-rapid", {"type": kind, "c": c, "K": K})
        if kind == "random-stable":
            n = int(spec["dimension"])
            abscissa = float(spec.get("abscissa", -0.1))
            seed = spec.get("seed")
            rng = np.random.default_rng(seed)
            A = rng.standard_normal((n, n)) / np.sqrt(n)
            A -= (np.linalg.eigvals(A).real.max() - abscissa) * np.eye(n)
            return GeneratorModel(A, "general", {"type": kind, "dimension": n,
                                                 "abscissa": abscissa, "seed": seed})
    except KeyError as exc:
        raise ModelError(f"model descriptor of type {kind!r} is missing field {exc}") from None
    except ModelError:
        raise
    except ValueError as exc:
        raise ModelError(str(exc)) from None
    raise ModelError(f"unknown model type {kind!r}")
