"""Quadrature rules and batched resolvent sums shared by the contour code."""

import numpy as np

# rough cap on complex entries materialised per batch
_BATCH_ENTRIES = 2 ** 22


def simpson_nodes(lo, hi, step):
    """Composite Simpson nodes and weights on ``[lo, hi]`` with spacing <= ``step``."""
    n = max(2, int(np.ceil((hi - lo) / step)))
    if n % 2:
        n += 1
    x = np.linspace(lo, hi, n + 1)
    h = (hi - lo) / n
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return x, w * (h / 3.0)


def composite_simpson_nodes(breakpoints, step):
    """Simpson rule on consecutive panels ``[breakpoints[i], breakpoints[i+1]]``.

    Panels share endpoints, whose weights are summed, so integrands with kinks
    at the breakpoints keep full order.
    """
    xs, ws = [], []
    for lo, hi in zip(breakpoints[:-1], breakpoints[1:]):
        if hi <= lo:
            continue
        x, w = simpson_nodes(lo, hi, step)
        if xs and np.isclose(xs[-1][-1], x[0]):
            ws[-1][-1] += w[0]
            x, w = x[1:], w[1:]
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def circle_nodes(center, radius, nodes):
    """Trapezoid nodes ``z_k`` and weights for ``(1/2 pi i) * contour integral`` over a circle."""
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    e = np.exp(1j * theta)
    z = center + radius * e
    # dz = i r e^{i theta} dtheta; (1/2 pi i) * i r e^{i theta} * (2 pi / N)
    w = radius * e / nodes
    return z, w


class ResolventKernel:
    """Evaluates weighted sums ``sum_k w_k R(z_k) Z^p`` for many nodes at once.

    ``mode`` selects how R(z) is applied: ``"diagonal"`` (diagonal Z),
    ``"eigen"`` (well-conditioned eigenbasis, R = V diag(1/(z-lam)) V^{-1})
    or ``"dense"`` (batched linear solves). ``"auto"`` picks the cheapest
    valid one.
    """

    def __init__(self, model, mode="auto"):
        if mode == "auto":
            if model.is_diagonal:
                mode = "diagonal"
            elif model.diagonalizable:
                mode = "eigen"
            else:
                mode = "dense"
        if mode == "eigen" and not model.diagonalizable:
            raise ValueError("eigen mode requires a well-conditioned eigenbasis")
        if mode not in ("diagonal", "eigen", "dense"):
            raise ValueError(f"unknown kernel mode {mode!r}")
        self.model = model
        self.mode = mode

    def weighted_sum(self, z, w, power=0, shift=0.0):
        """``sum_k w_k R(z_k) (Z - shift I)^power``."""
        z = np.asarray(z, dtype=complex).ravel()
        w = np.asarray(w, dtype=complex).ravel()
        model = self.model
        n = model.dimension
        if self.mode in ("diagonal", "eigen"):
            lam = model.eigenvalues
            lam_p = (lam - shift) ** power if power else np.ones_like(lam)
            acc = np.zeros(n, dtype=complex)
            batch = max(1, _BATCH_ENTRIES // n)
            for s in range(0, z.size, batch):
                zz = z[s:s + batch, None]
                acc += (w[s:s + batch, None] / (zz - lam[None, :])).sum(axis=0)
            acc *= lam_p
            if self.mode == "diagonal":
                return np.diag(acc)
            V, Vinv = model.eigenvectors, model.eigenvectors_inv
            return (V * acc) @ Vinv
        Z = model.Z
        eye = np.eye(n, dtype=complex)
        acc = np.zeros((n, n), dtype=complex)
        batch = max(1, _BATCH_ENTRIES // (n * n))
        for s in range(0, z.size, batch):
            zz = z[s:s + batch]
            M = zz[:, None, None] * eye - Z
            R = np.linalg.solve(M, np.broadcast_to(eye, M.shape))
            acc += np.tensordot(w[s:s + batch], R, axes=(0, 0))
        if power:
            acc = acc @ np.linalg.matrix_power(Z - shift * eye, power)
        return acc
