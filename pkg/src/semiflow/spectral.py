"""Poles, Riesz projectors, inverse Laplace transforms and the decomposition
``T_t = P_t + sum_j e^{t z_j} (Pi_j + nilpotent terms)``.

Line and curve integrals use the shifted generator identity

    R(z) = R(z) (Z - s)^n / (z - s)^n + sum_{j<n} (Z - s)^j / (z - s)^{j+1}

to trade the slowly decaying ``1/|b|`` tail of ``e^{zt} R(z)`` for an
``|b|^{-(n+1)}`` one. The shift ``s`` sits right of the path, so the
polynomial part integrates to zero (close the path to the left), and at
distance ``1 + 2|Z|`` from it, so ``|Z - s| / |z - s| <= 3/2`` along the
path and no cancellation is amplified. Shifting about the origin instead
loses ``(|Z| / |z|)^n`` digits where the path passes close to 0.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ._quadrature import ResolventKernel, circle_nodes, simpson_nodes
from ._validation import check_nonneg_int, check_positive, check_vector
from .exceptions import ContourError, DomainError, StripBoundaryError
from .models import evolve

__all__ = [
    "PoleReport",
    "ContourSpec",
    "SpectralDecomposition",
    "locate_poles",
    "riesz_projector",
    "eigenprojector",
    "pole_order",
    "bromwich_reconstruct",
    "contour_integral",
    "decompose",
    "curved_remainder",
    "suggest_shift",
]

CLUSTER_TOL = 1e-5
BOUNDARY_TOL = 1e-9
CONTOUR_MARGIN = 1e-6
NILPOTENT_TOL = 1e-10
# path segments with their own Simpson step
PANELS = 2000


@dataclass
class PoleReport:
    """Eigenvalues right of ``Re = -lambda`` (clustered) and assumption flags.

    ``violations`` lists poles with ``|Im| > beta``; such a model is outside
    the holomorphy region required by the exponential assumption.
    """

    poles: List[complex]
    multiplicities: List[int]
    violations: List[complex]
    lam: float
    beta: float

    @property
    def flagged(self):
        return bool(self.violations)


def _clusters(values, tol):
    """Group nearly equal eigenvalues; returns ``(centers, index lists)``."""
    order = sorted(range(len(values)), key=lambda k: (-values[k].real, values[k].imag))
    groups = []
    for k in order:
        for g in groups:
            if abs(values[k] - values[g[0]]) <= tol:
                g.append(k)
                break
        else:
            groups.append([k])
    centers = [complex(np.mean(values[g])) for g in groups]
    return centers, groups


def locate_poles(model, lam, beta, cluster_tol=CLUSTER_TOL):
    """Eigenvalues with ``Re > -lam``; those with ``|Im| > beta`` are reported as violations."""
    lam = check_positive(lam, "lambda")
    beta = check_positive(beta, "beta")
    w = model.eigenvalues
    if not np.all(np.isfinite(w)):
        raise np.linalg.LinAlgError("eigensolver returned non-finite eigenvalues")
    tol = cluster_tol * max(1.0, model.norm)
    near = w[np.abs(w.real + lam) <= BOUNDARY_TOL * max(1.0, lam)]
    if near.size:
        raise StripBoundaryError(f"eigenvalue {complex(near[0])} lies on the strip boundary Re = -{lam}")
    inside = w[w.real > -lam]
    centers, groups = _clusters(inside, tol)
    viol = [c for c in centers if abs(c.imag) > beta]
    return PoleReport(centers, [len(g) for g in groups], viol, lam, beta)


def _cluster_indices(model, z_j, cluster_tol=CLUSTER_TOL):
    tol = cluster_tol * max(1.0, model.norm)
    return np.flatnonzero(np.abs(model.eigenvalues - z_j) <= tol)


def _separation(model, z_j, cluster_tol=CLUSTER_TOL):
    """Distance from ``z_j`` to the nearest eigenvalue outside its cluster."""
    w = model.eigenvalues
    mask = np.ones(w.size, bool)
    mask[_cluster_indices(model, z_j, cluster_tol)] = False
    if not mask.any():
        return np.inf
    return float(np.min(np.abs(w[mask] - z_j)))


def default_radius(model, z_j):
    sep = _separation(model, z_j)
    return 0.5 * sep if np.isfinite(sep) else 1.0


def riesz_projector(model, z_j, radius=None, nodes=64, mode="auto"):
    """Riesz projector ``(1/2 pi i) * integral of R(z) over a circle around z_j``.

    Trapezoid rule on the circle; the integrand is analytic and periodic so
    the error decays like ``(radius / separation)^nodes``.
    """
    z_j = complex(z_j)
    nodes = check_nonneg_int(nodes, "nodes", minimum=3)
    if radius is None:
        radius = default_radius(model, z_j)
    radius = check_positive(radius, "radius")
    sep = _separation(model, z_j)
    if sep <= radius + CONTOUR_MARGIN:
        raise ContourError(
            f"circle of radius {radius} around {z_j} reaches another eigenvalue at distance {sep:.6g}")
    own = model.eigenvalues[_cluster_indices(model, z_j)]
    if own.size and np.max(np.abs(own - z_j)) >= radius - CONTOUR_MARGIN:
        raise ContourError(f"circle of radius {radius} does not enclose the eigenvalues at {z_j}")
    z, w = circle_nodes(z_j, radius, nodes)
    if mode == "auto":
        mode = "diagonal" if model.is_diagonal else "dense"
    P = ResolventKernel(model, mode).weighted_sum(z, w)
    return P.real.copy() if model.is_real and abs(z_j.imag) == 0 else P


def eigenprojector(model, z_j, cluster_tol=CLUSTER_TOL):
    """Spectral projector from the eigenbasis (an oracle for diagonalizable models)."""
    idx = _cluster_indices(model, z_j, cluster_tol)
    V = model.eigenvectors
    Vinv = model.eigenvectors_inv
    return V[:, idx] @ Vinv[idx, :]


def pole_order(model, z_j, projector, tol=NILPOTENT_TOL):
    """Return ``(m, N)`` with ``N = (Z - z_j I) Pi`` and ``m`` the least power with ``|N^m| <= tol``."""
    n = model.dimension
    N = (model.Z - complex(z_j) * np.eye(n)) @ projector
    scale = max(1.0, model.norm)
    P = N.copy()
    m = 1
    while np.linalg.norm(P, 2) > tol * scale and m <= n:
        P = P @ N
        m += 1
    if m == 1:
        N = np.zeros_like(N)
    return m, N


@dataclass
class ContourSpec:
    """Integration path for inverse Laplace transforms.

    ``bromwich-line``: ``Re z = a`` with ``a > 0``. ``shifted-line``:
    ``Re z = -ell``. ``curved-rapid``: ``z(b) = ib - min(epsilon, |b|^{-C12})``.
    All paths are truncated to ``|b| <= b_cut`` and discretised by Simpson's
    rule with spacing at most ``step``. ``regularization`` is the power ``n``
    in the generator identity (0 integrates ``e^{zt} R(z)`` as is).
    """

    kind: str
    a: Optional[float] = None
    ell: Optional[float] = None
    epsilon: Optional[float] = None
    C12: Optional[float] = None
    beta: Optional[float] = None
    b_cut: Optional[float] = None
    step: float = 0.01
    nodes: int = 64
    regularization: int = 10

    def __post_init__(self):
        if self.kind == "bromwich-line":
            if self.a is None or self.a <= 0:
                raise DomainError(f"bromwich-line requires a > 0, got a={self.a}")
        elif self.kind == "shifted-line":
            if self.ell is None or self.ell <= 0:
                raise ContourError(f"shifted-line requires ell > 0, got ell={self.ell}")
        elif self.kind == "curved-rapid":
            if self.epsilon is None or self.epsilon <= 0:
                raise ContourError("curved-rapid requires epsilon > 0")
            if self.C12 is None or self.C12 <= 0:
                raise ContourError("curved-rapid requires C12 > 0")
            if self.ell is not None and self.epsilon >= self.ell:
                raise ContourError(f"epsilon must lie in (0, ell); got epsilon={self.epsilon}, ell={self.ell}")
        else:
            raise ContourError(f"unknown contour kind {self.kind!r}")
        if self.b_cut is not None:
            check_positive(self.b_cut, "b_cut")
        check_positive(self.step, "step")
        check_nonneg_int(self.regularization, "regularization")

    def offset(self, b):
        """Real part of the path at height ``b``."""
        b = np.asarray(b, dtype=float)
        if self.kind == "bromwich-line":
            return np.full(b.shape, float(self.a))
        if self.kind == "shifted-line":
            return np.full(b.shape, -float(self.ell))
        with np.errstate(divide="ignore"):
            curve = np.abs(b) ** (-self.C12)
        return -np.minimum(self.epsilon, curve)

    def slope(self, b, curved=None):
        """``d Re z / d b`` along the path.

        ``curved`` forces the branch, which matters at the kinks where the
        one-sided derivatives differ.
        """
        b = np.asarray(b, dtype=float)
        if self.kind != "curved-rapid":
            return np.zeros(b.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.C12 * np.abs(b) ** (-self.C12 - 1.0) * np.sign(b)
            if curved is None:
                curved = np.abs(b) ** (-self.C12) < self.epsilon
        return np.where(curved, d, 0.0)

    def kinks(self):
        if self.kind != "curved-rapid":
            return []
        bstar = self.epsilon ** (-1.0 / self.C12)
        return [-bstar, bstar]

    def right_of(self, z):
        """True where ``z`` lies strictly right of the path."""
        z = np.asarray(z, dtype=complex)
        return z.real > self.offset(z.imag)

    def clearance(self, z):
        """Horizontal distance from ``z`` to the path."""
        z = np.asarray(z, dtype=complex)
        return np.abs(z.real - self.offset(z.imag))


def _default_cut(model, t, contour):
    if contour.b_cut is not None:
        return float(contour.b_cut)
    cut = max(1e3, 10.0 / t)
    if contour.regularization:
        cut = max(cut, 40.0 * (model.norm + 1.0))
    return cut


def regularization_shift(model, contour):
    """Shift ``s`` of the generator identity: ``1 + 2|Z|`` right of the rightmost path point."""
    right = float(contour.a) if contour.kind == "bromwich-line" else 0.0
    return right + 1.0 + 2.0 * model.norm


def contour_integral(model, t, contour, mode="auto"):
    """``(1/2 pi i) * integral of e^{zt} R(z) dz`` along ``contour``, truncated at ``|b| <= b_cut``.

    Returns ``(matrix, info)`` where ``info`` records the cut, the step, the
    node count and the regularization power actually used.
    """
    t = check_positive(t, "t")
    w_eig = model.eigenvalues
    clear = contour.clearance(w_eig)
    if clear.size and clear.min() < CONTOUR_MARGIN:
        k = int(np.argmin(clear))
        raise ContourError(f"contour passes through the pole {complex(w_eig[k])}")
    n_reg = contour.regularization
    cut = _default_cut(model, t, contour)
    h_max = min(contour.step, math.pi / (8.0 * t))
    shift = regularization_shift(model, contour) if n_reg else 0.0
    kinks = [k for k in contour.kinks() if -cut < k < cut]
    width = max(1.0, 2.0 * cut / PANELS)
    breaks = np.union1d(np.linspace(-cut, cut, int(np.ceil(2.0 * cut / width)) + 1), kinks)
    zs, ws = [], []
    h_min = np.inf
    # panels are kept separate: the path derivative jumps at the kinks
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        # resolve the oscillation e^{ibt} and the poles close to this panel;
        # max(horizontal clearance, vertical gap) bounds the distance from below
        if clear.size:
            gap = np.maximum(lo - w_eig.imag, w_eig.imag - hi).clip(min=0.0)
            d = float(np.maximum(clear, gap).min())
        else:
            d = 1.0
        h = min(h_max, d / 12.0)
        h_min = min(h_min, h)
        b, wq = simpson_nodes(lo, hi, h)
        mid = 0.5 * (lo + hi)
        curved = contour.kind == "curved-rapid" and abs(mid) > contour.epsilon ** (-1.0 / contour.C12)
        z = contour.offset(b) + 1j * b
        dz = contour.slope(b, curved) + 1j
        wk = wq * np.exp(z * t) * dz / (2j * np.pi)
        if n_reg:
            wk = wk / (z - shift) ** n_reg
        zs.append(z)
        ws.append(wk)
    z, weights = np.concatenate(zs), np.concatenate(ws)
    # the polynomial part has its only pole at the shift, right of the path: it integrates to 0
    M = ResolventKernel(model, mode).weighted_sum(z, weights, power=n_reg, shift=shift)
    info = {"b_cut": cut, "step": h_min, "nodes": int(z.size), "regularization": n_reg, "shift": shift}
    return M, info


def bromwich_reconstruct(model, t, contour, mode="auto"):
    """Approximate ``T_t`` by the truncated Bromwich integral along ``Re z = a``.

    The raw integrand (``regularization=0``) has a ``1/|b|`` tail, so the
    error is ``O(1/b_cut)``.
    """
    if contour.kind != "bromwich-line":
        raise ContourError("bromwich_reconstruct needs a bromwich-line contour")
    if t <= 0:
        raise DomainError(f"Bromwich reconstruction needs t > 0, got t={t}")
    M, _ = contour_integral(model, t, contour, mode)
    return M.real.copy() if model.is_real else M


@dataclass
class SpectralDecomposition:
    """Poles, projectors and nilpotent parts of a generator, plus ``t -> P_t``.

    ``P_t = T_t - sum_j e^{t z_j} sum_{k<m_j} t^k N_j^k / k!`` with
    ``N_j^0 = Pi_j``.
    """

    model: object
    poles: List[complex]
    projectors: List[np.ndarray]
    pole_orders: List[int]
    nilpotent_parts: List[np.ndarray]
    contour: ContourSpec
    report: Optional[PoleReport] = None
    multiplicities: List[int] = field(default_factory=list)

    def pole_term(self, j, t):
        z = self.poles[j]
        out = self.projectors[j].astype(complex)
        Nk = self.projectors[j].astype(complex)
        for k in range(1, self.pole_orders[j]):
            Nk = Nk @ self.nilpotent_parts[j]
            out = out + Nk * (t ** k / math.factorial(k))
        return np.exp(t * z) * out

    def pole_sum(self, t):
        n = self.model.dimension
        acc = np.zeros((n, n), dtype=complex)
        for j in range(len(self.poles)):
            acc += self.pole_term(j, t)
        return acc

    @property
    def complementary_projector(self):
        n = self.model.dimension
        Q = np.eye(n, dtype=complex)
        for P in self.projectors:
            Q = Q - P
        return Q

    @property
    def printed_form_exact(self):
        """False when some pole carries a nilpotent part, i.e. ``e^{t z_j} Pi_j`` alone is not enough."""
        return all(m == 1 for m in self.pole_orders)

    def remainder(self, t):
        """``P_t`` by subtraction from ``T_t``."""
        return evolve(self.model, t) - self.pole_sum(t)

    def remainder_spectral(self, t):
        """``P_t = T_t Q`` with ``Q`` the complementary projector (no cancellation against pole terms)."""
        return evolve(self.model, t) @ self.complementary_projector

    def apply_remainder(self, t, mu):
        """``P_t mu`` evaluated without subtracting large pole contributions.

        In a well-conditioned eigenbasis only the non-pole eigenvalues are
        propagated, so tiny remainders keep full relative accuracy.
        """
        model = self.model
        mu = check_vector(mu, model.dimension, "mu")
        if model.diagonalizable:
            keep = np.ones(model.dimension, bool)
            for z in self.poles:
                keep[_cluster_indices(model, z)] = False
            V = model.eigenvectors[:, keep]
            c = model.eigenvectors_inv[keep, :] @ mu
            return V @ (np.exp(t * model.eigenvalues[keep]) * c)
        return evolve(model, t) @ (self.complementary_projector @ mu)

    def remainder_contour(self, t, mode="auto"):
        """``P_t`` from the contour integral, corrected for poles left of the path."""
        M, _ = contour_integral(self.model, t, self.contour, mode)
        for j, z in enumerate(self.poles):
            if not self.contour.right_of(z):
                M = M - self.pole_term(j, t)
        return M

    def reconstruct(self, t):
        return self.remainder_spectral(t) + self.pole_sum(t)

    def reconstruction_residual(self, t):
        return float(np.linalg.norm(self.reconstruct(t) - evolve(self.model, t), 2))

    def path_agreement(self, t, mode="auto"):
        return float(np.linalg.norm(self.remainder(t) - self.remainder_contour(t, mode), 2))


def _rapid_strip(report, beta):
    keep = [k for k, z in enumerate(report.poles) if abs(z.imag) <= beta]
    return [report.poles[k] for k in keep], [report.multiplicities[k] for k in keep]


def decompose(model, params, contour=None, nodes=None, mode="auto"):
    """Assemble the decomposition ``T_t = P_t + sum_j e^{t z_j}(Pi_j + ...)``.

    ``params`` supplies ``lam`` and ``beta`` (an :class:`AssumptionParams` or
    any object with those attributes). With a ``shifted-line`` contour the
    poles are all eigenvalues with ``Re > -lam`` and each must lie right of
    ``Re = -ell``. With a ``curved-rapid`` contour the poles are those with
    ``|Im| <= beta``; any other eigenvalue right of the curve breaks the
    rapid assumption and is rejected.
    """
    if contour is None:
        contour = ContourSpec("shifted-line", ell=params.ell)
    report = locate_poles(model, params.lam, params.beta)
    if contour.kind == "shifted-line":
        poles, mults = list(report.poles), list(report.multiplicities)
        bad = [z for z in poles if not contour.right_of(z)]
        if bad:
            raise ContourError(
                f"pole {bad[0]} lies left of Re = -{contour.ell}; choose ell > {-bad[0].real:.6g}")
    elif contour.kind == "curved-rapid":
        poles, mults = _rapid_strip(report, params.beta)
        w = model.eigenvalues
        tol = CLUSTER_TOL * max(1.0, model.norm)
        for lam_k in w[contour.right_of(w)]:
            if not any(abs(lam_k - z) <= tol for z in poles):
                raise ContourError(
                    f"eigenvalue {complex(lam_k)} lies right of the curved contour outside the pole strip")
    else:
        raise ContourError("decompose needs a shifted-line or curved-rapid contour")
    if nodes is None:
        nodes = contour.nodes
    projectors, orders, nilpotents = [], [], []
    for z in poles:
        P = riesz_projector(model, z, nodes=nodes, mode=mode)
        m, N = pole_order(model, z, P)
        projectors.append(P)
        orders.append(m)
        nilpotents.append(N)
    return SpectralDecomposition(model, poles, projectors, orders, nilpotents, contour,
                                 report, mults)


def curved_remainder(model, t, contour, decomposition=None, mode="auto"):
    """Remainder from the curved contour ``ib - min(epsilon, |b|^{-C12})``.

    Without a decomposition this is the bare contour integral, i.e. ``T_t``
    minus the contributions of eigenvalues right of the curve. With one, the
    contributions of its poles lying left of the curve are removed as well,
    giving that decomposition's ``P_t``.
    """
    if contour.kind != "curved-rapid":
        raise ContourError("curved_remainder needs a curved-rapid contour")
    M, _ = contour_integral(model, t, contour, mode)
    if decomposition is not None:
        for j, z in enumerate(decomposition.poles):
            if not contour.right_of(z):
                M = M - decomposition.pole_term(j, t)
    return M


def suggest_shift(model, lo, hi):
    """Pick ``(ell, lam)`` inside the widest gap of ``-Re(spectrum)`` within ``[lo, hi]``.

    Every eigenvalue with ``Re > -lam`` then lies right of ``Re = -ell``.
    """
    s = np.sort(-model.eigenvalues.real)
    pts = np.concatenate([[lo], s[(s > lo) & (s < hi)], [hi]])
    gaps = np.diff(pts)
    k = int(np.argmax(gaps))
    left, right = pts[k], pts[k + 1]
    mid = 0.5 * (left + right)
    return float(mid - 0.25 * gaps[k]), float(mid + 0.25 * gaps[k])
