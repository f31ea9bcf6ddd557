"""Assumption scans, the explicit constants ledger and the decay checks.

Universally quantified statements ("for all t >= 0", "for all |b| >= beta")
are checked on finite grids. Where a supremum is reported, stability under
grid extension is checked by comparing against the first half of the grid.
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy import integrate, special

from ._quadrature import simpson_nodes
from ._validation import check_grid, check_nonneg_int, check_positive, check_vector
from .exceptions import (
    DomainError,
    LedgerError,
    PoleError,
    RegularityError,
    UnboundedSemigroupWarning,
)
from .models import evolve
from .resolvent import graded_norm, resolvent_direct

__all__ = [
    "AssumptionParams",
    "ConstantsLedger",
    "DecayReport",
    "estimate_c1",
    "estimate_c2",
    "dolgopyat_scan",
    "rapid_scan",
    "oscillatory_bound_check",
    "compute_ledger",
    "exponential_decay_check",
    "rapid_decay_check",
    "laplace_tail_bound_check",
    "c13_bound_check",
    "shifted_resolvent_scan",
    "neumann_norm_scan",
    "exponential_scans",
    "required_q",
]

STABILITY_TOL = 0.01


@dataclass
class AssumptionParams:
    """Parameters of the assumptions plus the measured constants.

    ``lam`` is the strip width, ``alpha``/``beta``/``gamma`` the Dolgopyat
    parameters, ``ell`` the target decay rate, ``C1``/``C2``/``C_D`` the
    measured semigroup, weak-Lipschitz and Dolgopyat constants and
    ``C10``/``C11``/``C12``/``epsilon`` the rapid-case parameters.
    """

    lam: float
    alpha: float = 1.0
    beta: float = 2.0
    gamma: float = 0.5
    ell: Optional[float] = None
    C1: Optional[float] = None
    C2: Optional[float] = None
    C_D: Optional[float] = None
    C10: Optional[float] = None
    C11: Optional[float] = None
    C12: Optional[float] = None
    epsilon: Optional[float] = None

    def __post_init__(self):
        for name in ("lam", "alpha", "beta", "gamma"):
            check_positive(getattr(self, name), name)
        gmax = 1.0 / math.log(1.0 + self.lam / self.alpha)
        if not self.gamma < gmax:
            raise ValueError(f"gamma must lie in (0, 1/ln(1 + lambda/alpha)) = (0, {gmax:.6g}), got {self.gamma}")
        if self.ell is not None and not 0.0 < self.ell < self.lam:
            raise ValueError(f"ell must lie in (0, lambda) = (0, {self.lam}), got {self.ell}")
        if self.epsilon is not None:
            upper = self.ell if self.ell is not None else self.lam
            if not 0.0 < self.epsilon < upper:
                raise ValueError(f"epsilon must lie in (0, ell) = (0, {upper}), got {self.epsilon}")
        if self.C12 is not None:
            check_positive(self.C12, "C12")

    @property
    def gamma_max(self):
        return 1.0 / math.log(1.0 + self.lam / self.alpha)

    def updated(self, **kw):
        return replace(self, **kw)


def _require(params, *names):
    missing = [n for n in names if getattr(params, n) is None]
    if missing:
        raise ValueError(f"parameters {', '.join(missing)} must be set")


def _stable(values, b_abs):
    """Is the running maximum over the full grid within 1% of the one over its first half?"""
    half = b_abs <= 0.5 * b_abs.max()
    if not half.any():
        return True
    full, part = float(np.max(values)), float(np.max(values[half]))
    return np.isfinite(full) and full <= (1.0 + STABILITY_TOL) * part


def _resolvent_apply(model, z, v):
    if model.is_diagonal:
        return v / (z - np.diag(model.Z))
    return np.linalg.solve(z * np.eye(model.dimension) - model.Z, v)


def _resolvent_power_norm(model, z, k, src, dst):
    if model.is_diagonal:
        d = (1.0 / (z - np.diag(model.Z))) ** k
        return model.norms.op_norm(np.diag(d), src, dst)
    R = resolvent_direct(model, z).matrix
    return model.norms.op_norm(np.linalg.matrix_power(R, k), src, dst)


# ---------------------------------------------------------------- constants


@dataclass
class C1Estimate:
    value: float
    t_at_max: float
    bounded: bool
    norms: np.ndarray = field(repr=False, default=None)


def estimate_c1(model, t_grid):
    """``C1 = max_t |T_t|_{B->B}`` over ``t_grid``; warns if the norm is still growing at the end."""
    t = np.sort(check_grid(t_grid, "t_grid", positive=False))
    if np.any(t < 0):
        raise DomainError("t_grid must be nonnegative")
    norms = np.array([model.norms.op_norm(evolve(model, s), "B", "B") for s in t])
    k = int(np.argmax(norms))
    growing = norms.size > 1 and norms[-1] >= norms[k] * (1 - 1e-12) and norms[-1] > norms[-2] * (1 + 1e-12)
    bounded = not (growing or model.spectral_abscissa > 1e-12)
    if not bounded:
        warnings.warn(
            "semigroup norm still grows at the end of the scan; rescale by e^{-gamma t} T_t "
            "with gamma above the growth rate", UnboundedSemigroupWarning, stacklevel=2)
    return C1Estimate(float(norms[k]), float(t[k]), bounded, norms)


@dataclass
class C2Estimate:
    value: float
    t_at_max: float
    analytic_bound: float
    ratios: np.ndarray = field(repr=False, default=None)


def estimate_c2(model, t_grid):
    """``C2 = max_t |T_t - I|_{B->A} / t`` over the positive points of ``t_grid``.

    ``analytic_bound`` is ``sup_s |T_s|_{A->A}`` over ``[0, max t]``, which
    dominates the ratio since ``(T_t - I) mu = int_0^t T_s Z mu ds`` and
    ``|Z mu|_A <= |mu|_B``.
    """
    t = np.sort(check_grid(t_grid, "t_grid", positive=False))
    t = t[t > 0]
    if t.size == 0:
        raise DomainError("t_grid must contain positive times")
    n = model.dimension
    ratios = np.array([model.norms.op_norm(evolve(model, s) - np.eye(n), "B", "A") / s for s in t])
    k = int(np.argmax(ratios))
    s_grid = np.union1d(np.linspace(0.0, t.max(), 257), t)
    bound = max(model.norms.op_norm(evolve(model, s), "A", "A") for s in s_grid)
    return C2Estimate(float(ratios[k]), float(t[k]), float(bound), ratios)


@dataclass
class DolgopyatScan:
    C_D: float
    passed: bool
    worst_b: float
    b_grid: np.ndarray = field(repr=False, default=None)
    values: np.ndarray = field(repr=False, default=None)
    n_tilde: np.ndarray = field(repr=False, default=None)


def dolgopyat_scan(model, params, b_grid):
    """Scan ``|R(alpha+ib)^n|_{B->B} (alpha+lambda)^n`` with ``n = ceil(gamma ln|b|)``."""
    b = check_grid(b_grid, "b_grid", positive=False)
    if np.any(np.abs(b) < params.beta):
        raise DomainError(f"b_grid must satisfy |b| >= beta = {params.beta}")
    a, lam, g = params.alpha, params.lam, params.gamma
    ntil = np.maximum(0, np.ceil(g * np.log(np.abs(b)))).astype(int)
    vals = np.array([
        _resolvent_power_norm(model, complex(a, bb), int(k), "B", "B") * (a + lam) ** int(k)
        for bb, k in zip(b, ntil)])
    k = int(np.argmax(vals))
    passed = bool(np.all(np.isfinite(vals)) and _stable(vals, np.abs(b)))
    return DolgopyatScan(float(vals[k]), passed, float(b[k]), b, vals, ntil)


@dataclass
class RapidScan:
    C10: float
    C11_fit: float
    passed: bool
    violations: List[complex] = field(default_factory=list)
    b_grid: np.ndarray = field(repr=False, default=None)
    norms: np.ndarray = field(repr=False, default=None)


def rapid_region_violations(model, beta, C12):
    w = model.eigenvalues
    with np.errstate(divide="ignore"):
        inside = (np.abs(w.imag) >= beta) & (w.real >= -np.abs(w.imag) ** (-C12))
    return [complex(z) for z in w[inside]]


def _loglog_slope(x, y, tail_fraction, envelope_bins=None):
    """Least-squares slope of ``log y`` against ``log x`` over ``x >= tail_fraction * max x``.

    With ``envelope_bins`` the fit uses the maximum of ``y`` in each of that
    many log-spaced bins, i.e. the upper envelope of an oscillating profile.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ok = (y > 0) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size < 2:
        return -np.inf
    sel = x >= tail_fraction * x.max()
    if sel.sum() < 2:
        sel = np.argsort(x)[-2:]
    lx, ly = np.log(x[sel]), np.log(y[sel])
    if envelope_bins:
        edges = np.linspace(lx.min(), lx.max(), envelope_bins + 1)
        idx = np.clip(np.searchsorted(edges, lx, side="right") - 1, 0, envelope_bins - 1)
        px, py = [], []
        for k in range(envelope_bins):
            m = idx == k
            if m.any():
                j = np.flatnonzero(m)[np.argmax(ly[m])]
                px.append(lx[j])
                py.append(ly[j])
        if len(px) >= 2:
            lx, ly = np.array(px), np.array(py)
    return float(np.polyfit(lx, ly, 1)[0])


def rapid_scan(model, params, b_grid, tail_fraction=0.5, envelope_bins=8):
    """Scan ``|R(ib - |b|^{-C12})|_{B->B}`` and fit its power law ``C10 |b|^{C11}``.

    The exponent is fitted to the upper envelope (largest value in each of
    ``envelope_bins`` log-spaced bins) over ``|b| >= tail_fraction * max|b|``.
    Eigenvalues inside ``{|Im| >= beta, Re >= -|Im|^{-C12}}`` make the scan
    fail without evaluating the resolvent.
    """
    _require(params, "C12")
    b = check_grid(b_grid, "b_grid", positive=False)
    if np.any(np.abs(b) < params.beta):
        raise DomainError(f"b_grid must satisfy |b| >= beta = {params.beta}")
    viol = rapid_region_violations(model, params.beta, params.C12)
    if viol:
        return RapidScan(np.inf, np.nan, False, viol, b, None)
    z = 1j * b - np.abs(b) ** (-params.C12)
    norms = np.array([_resolvent_power_norm(model, zz, 1, "B", "B") for zz in z])
    babs = np.abs(b)
    c11 = _loglog_slope(babs, norms, tail_fraction, envelope_bins)
    c10 = float(np.max(norms / babs ** c11))
    return RapidScan(c10, c11, bool(np.all(np.isfinite(norms))), [], b, norms)


def constant_c5(alpha, beta):
    return (2.0 * math.pi / beta) / (1.0 - math.exp(-2.0 * math.pi * alpha / beta))


def constant_c4(C1, C2, alpha, beta):
    return 2.0 * math.pi * C1 * constant_c5(alpha, beta) * (alpha + C2)


@dataclass
class OscillatoryCheck:
    C4_measured: float
    C4_ledger: float
    passed: bool
    b_grid: np.ndarray = field(repr=False, default=None)
    scaled: np.ndarray = field(repr=False, default=None)


def oscillatory_bound_check(model, params, b_grid):
    """Compare ``max |b| |R(alpha+ib)|_{B->A}`` with ``C4 = 2 pi C1 C5 (alpha + C2)``."""
    _require(params, "C1", "C2")
    b = check_grid(b_grid, "b_grid", positive=False)
    if np.any(np.abs(b) < params.beta):
        raise DomainError(f"b_grid must satisfy |b| >= beta = {params.beta}")
    scaled = np.array([abs(bb) * _resolvent_power_norm(model, complex(params.alpha, bb), 1, "B", "A")
                       for bb in b])
    c4 = constant_c4(params.C1, params.C2, params.alpha, params.beta)
    measured = float(scaled.max())
    return OscillatoryCheck(measured, c4, measured <= c4, b, scaled)


# ----------------------------------------------------------------- ledger


@dataclass
class ConstantsLedger:
    C_john: float
    C3: float
    C_jim: float
    C5: float
    C4: float
    C_outer: float
    C_mid: Optional[float] = None
    C_june: Optional[float] = None
    C13: Optional[float] = None
    provenance: dict = field(default_factory=dict)

    def as_dict(self):
        keys = ("C_john", "C3", "C_jim", "C5", "C4", "C_outer", "C_mid", "C_june", "C13")
        return {k: getattr(self, k) for k in keys}


FORMULAS = {
    "C_john": "gamma * ln(1 + ell/alpha)",
    "C3": "C_D / (1 - ((alpha+ell)/(alpha+lambda))^(gamma ln beta))",
    "C_jim": "C1 * C3 * alpha / ell",
    "C5": "(2 pi / beta) / (1 - exp(-2 pi alpha / beta))",
    "C4": "2 pi * C1 * C5 * (alpha + C2)",
    "C_outer": "(1/2pi) * int_beta^inf b^-(2 - C_john) db = (1/2pi) beta^-(1-C_john) / (1 - C_john)",
    "C_mid": "(1/2pi) * int_-beta^beta |R(-ell+ib)|_{B->A} / |-ell+ib| db  (Simpson)",
    "C_june": "C_mid + 2 * C_outer * C4 * C_jim",
    "C13": "C10  (bound on |R(z) Z^n mu|_B / |z|^n, |z| >= |b|)",
}


def c_mid(model, params, step=None):
    """``(1/2 pi) int_{-beta}^{beta} |R(-ell+ib)|_{B->A} / |-ell+ib| db`` by Simpson's rule."""
    ell, beta = params.ell, params.beta
    dist = np.min(np.abs(model.eigenvalues.real + ell))
    if dist <= 1e-12:
        raise PoleError(f"the line Re z = -{ell} passes through a pole")
    h = step if step is not None else min(beta / 200.0, dist / 8.0)
    b, w = simpson_nodes(-beta, beta, h)
    vals = np.array([_resolvent_power_norm(model, complex(-ell, bb), 1, "B", "A") / abs(complex(-ell, bb))
                     for bb in b])
    return float(np.dot(w, vals) / (2.0 * math.pi))


def compute_ledger(params, model=None, mid_step=None):
    """Evaluate the constants exactly as the printed formulas define them.

    ``C_mid`` and ``C_june`` need the model (for the shifted resolvent) and
    stay ``None`` without it; ``C13`` is filled when ``C10`` is known.
    """
    _require(params, "ell", "C1", "C2", "C_D")
    a, lam, beta, g, ell = params.alpha, params.lam, params.beta, params.gamma, params.ell
    c_john = g * math.log(1.0 + ell / a)
    ratio = ((a + ell) / (a + lam)) ** (g * math.log(beta))
    if ratio >= 1.0:
        raise LedgerError(
            f"C3 is undefined: ((alpha+ell)/(alpha+lambda))^(gamma ln beta) = {ratio:.6g} >= 1 "
            f"(formula {FORMULAS['C3']}); this needs beta > 1")
    c3 = params.C_D / (1.0 - ratio)
    c_jim = params.C1 * c3 * a / ell
    c5 = constant_c5(a, beta)
    c4 = 2.0 * math.pi * params.C1 * c5 * (a + params.C2)
    if not 0.0 < c_john < 1.0:
        raise LedgerError(f"C_john = {c_john:.6g} must lie in (0, 1) for C_outer to be finite")
    c_outer = beta ** (-(1.0 - c_john)) / (1.0 - c_john) / (2.0 * math.pi)
    cm = cj = None
    if model is not None:
        cm = c_mid(model, params, mid_step)
        cj = cm + 2.0 * c_outer * c4 * c_jim
    c13 = params.C10 if params.C10 is not None else None
    return ConstantsLedger(c_john, c3, c_jim, c5, c4, c_outer, cm, cj, c13, dict(FORMULAS))


def shifted_resolvent_scan(model, params, ledger, b_grid):
    """``|R(-ell+ib)|_{B->A}`` against ``C4 C_jim |b|^{-(1 - C_john)}``; returns ``(values, bounds)``."""
    b = check_grid(b_grid, "b_grid", positive=False)
    vals = np.array([_resolvent_power_norm(model, complex(-params.ell, bb), 1, "B", "A") for bb in b])
    bounds = ledger.C4 * ledger.C_jim * np.abs(b) ** (-(1.0 - ledger.C_john))
    return vals, bounds


def neumann_norm_scan(model, params, ledger, b_grid):
    """``|sum_n (alpha+ell)^n R(alpha+ib)^n|_B`` (summed exactly) against ``C_jim |b|^{C_john}``.

    Heights where the series diverges (spectral radius of
    ``(alpha+ell) R(alpha+ib)`` at least 1) give ``nan``.
    """
    b = check_grid(b_grid, "b_grid", positive=False)
    n = model.dimension
    vals = []
    for bb in b:
        base = complex(params.alpha, bb)
        rho = (params.alpha + params.ell) / np.min(np.abs(model.eigenvalues - base))
        if rho >= 1.0:
            vals.append(np.nan)
            continue
        R = resolvent_direct(model, base).matrix
        S = np.linalg.inv(np.eye(n) - (params.alpha + params.ell) * R)
        vals.append(model.norms.op_norm(S, "B", "B"))
    return np.array(vals), ledger.C_jim * np.abs(b) ** ledger.C_john


# ----------------------------------------------------------------- decay


@dataclass
class DecayReport:
    """Remainder norms ``|P_t mu|_A`` against the decay bound.

    ``passed`` is the pointwise comparison. ``rate_ok`` records whether the
    fitted rate meets the target (slope <= -ell, or log-log slope <= -p).
    """

    t_grid: np.ndarray
    remainder_norms: np.ndarray
    bound_values: np.ndarray
    fitted_rate: float
    passed: bool
    rate_ok: bool
    constant: float
    degenerate: bool = False


def _linear_slope(t, y):
    ok = (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return -np.inf
    return float(np.polyfit(t[ok], np.log(y[ok]), 1)[0])


def exponential_decay_check(model, decomposition, mu, ell, t_grid, ledger):
    """``|P_t mu|_A <= C_june e^{-ell t} |Z mu|_B`` on ``t_grid``."""
    if ledger.C_june is None:
        raise ValueError("the ledger has no C_june; compute it with the model")
    mu = check_vector(mu, model.dimension, "mu")
    t = np.sort(check_grid(t_grid, "t_grid"))
    rem = np.array([np.linalg.norm(decomposition.apply_remainder(s, mu)) for s in t])
    zmu = model.norms.norm_B(model.Z @ mu)
    scale = max(1.0, model.norms.norm_B(mu))
    if zmu <= 1e-14 * scale:
        ok = bool(np.all(rem <= 1e-12 * scale))
        return DecayReport(t, rem, np.zeros_like(rem), -np.inf, ok, ok, ledger.C_june, True)
    bound = ledger.C_june * np.exp(-ell * t) * zmu
    rate = _linear_slope(t, rem)
    return DecayReport(t, rem, bound, rate, bool(np.all(rem <= bound)), rate <= -ell,
                       ledger.C_june)


def required_q(p, C11, C12):
    """Smallest integer ``q`` with ``q > C11 + p (C12 + 1)``."""
    return int(math.floor(C11 + p * (C12 + 1.0))) + 1


def rapid_decay_check(model, decomposition, mu, p, q, t_grid, C11, C12, tail_fraction=0.5):
    """``|P_t mu|_A <= C_p t^{-p} |mu|_{Z^q}`` with ``C_p`` fitted on the grid.

    ``q`` must satisfy ``q > C11 + p (C12 + 1)``. ``passed`` and ``rate_ok``
    both mean that the log-log slope over the tail of the grid is at most ``-p``.
    """
    p = check_nonneg_int(p, "p", minimum=1)
    q = check_nonneg_int(q, "q", minimum=1)
    if not q > C11 + p * (C12 + 1.0):
        raise RegularityError(
            f"q={q} is too small for p={p}: need q > C11 + p (C12 + 1) = {C11 + p * (C12 + 1.0):.6g}")
    mu = check_vector(mu, model.dimension, "mu")
    t = np.sort(check_grid(t_grid, "t_grid"))
    rem = np.array([np.linalg.norm(decomposition.apply_remainder(s, mu)) for s in t])
    g = graded_norm(model, mu, q).value
    cp = float(np.max(rem * t ** p / g)) if g > 0 else 0.0
    bound = cp * t ** (-p) * g
    slope = _loglog_slope(t, rem, tail_fraction)
    ok = slope <= -p
    return DecayReport(t, rem, bound, slope, ok, ok, cp)


@dataclass
class LaplaceTailCheck:
    integral: float
    oracle: float
    bound: float
    printed_bound: float
    passed: bool
    printed_passed: bool


def laplace_tail_bound_check(n, t, a):
    """``I(n) = int_0^a e^{-tx} x^n dx`` against ``n! t^{-(n+1)}`` and the weaker-looking ``n! t^{-n}``.

    Iterating ``I(n) <= (n/t) I(n-1)`` from ``I(0) <= 1/t`` gives the first
    bound; both are reported. ``oracle`` is the closed form via the
    regularized lower incomplete gamma function.
    """
    n = check_nonneg_int(n, "n")
    t = check_positive(t, "t")
    a = check_positive(a, "a")
    val, _ = integrate.quad(lambda x: math.exp(-t * x) * x ** n, 0.0, a, epsabs=0.0, epsrel=1e-13, limit=200)
    oracle = special.gammainc(n + 1, t * a) * math.factorial(n) / t ** (n + 1)
    chained = math.factorial(n) * t ** (-(n + 1))
    printed = math.factorial(n) * t ** (-n)
    return LaplaceTailCheck(val, float(oracle), chained, printed,
                            val <= chained * (1 + 1e-12), val <= printed * (1 + 1e-12))


@dataclass
class C13Report:
    """``measured`` uses ``R(z) mu`` itself, ``measured_remainder`` only ``R(z) Z^n mu / z^n``."""

    measured: float
    measured_remainder: float
    stable: bool
    stable_remainder: bool


def c13_bound_check(model, params, mu, n, b_grid):
    """Sup over ``b_grid`` of ``|R(ib - |b|^{-C12}) mu|_B |b|^{n - C11} / |mu|_{Z^n}``.

    The polynomial part ``sum_{j<n} Z^j mu / z^{j+1}`` of the generator
    identity decays only like ``1/|b|``, so the full quantity can grow when
    ``n > C11 + 1``; the remainder term alone is reported alongside.
    """
    _require(params, "C11", "C12")
    n = check_nonneg_int(n, "n")
    mu = check_vector(mu, model.dimension, "mu")
    b = check_grid(b_grid, "b_grid", positive=False)
    if np.any(np.abs(b) < params.beta):
        raise DomainError(f"b_grid must satisfy |b| >= beta = {params.beta}")
    g = graded_norm(model, mu, n).value
    Znmu = np.linalg.matrix_power(model.Z, n) @ mu if n else mu
    full, rem = [], []
    for bb in b:
        z = complex(-abs(bb) ** (-params.C12), bb)
        if min(abs(model.eigenvalues - z)) <= 1e-12:
            raise PoleError(f"pole on the curve at b={bb}")
        w = abs(bb) ** (n - params.C11) / g
        full.append(model.norms.norm_B(_resolvent_apply(model, z, mu)) * w)
        rem.append(model.norms.norm_B(_resolvent_apply(model, z, Znmu)) / abs(z) ** n * w)
    full, rem = np.array(full), np.array(rem)
    babs = np.abs(b)
    return C13Report(float(full.max()), float(rem.max()), bool(_stable(full, babs)), bool(_stable(rem, babs)))


# --------------------------------------------------------------- pipelines


@dataclass
class ExponentialScans:
    params: AssumptionParams
    c1: C1Estimate
    c2: C2Estimate
    dolgopyat: DolgopyatScan

    @property
    def passed(self):
        return self.c1.bounded and np.isfinite(self.c2.value) and self.dolgopyat.passed


def exponential_scans(model, params, t_grid, b_grid):
    """Measure C1, C2 and C_D; returns the scans and ``params`` updated with the measured constants."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnboundedSemigroupWarning)
        c1 = estimate_c1(model, t_grid)
    c2 = estimate_c2(model, t_grid)
    dol = dolgopyat_scan(model, params, b_grid)
    updated = params.updated(C1=c1.value, C2=c2.value, C_D=dol.C_D)
    return ExponentialScans(updated, c1, c2, dol)
