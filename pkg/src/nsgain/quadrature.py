"""
Product-integration rules for memory integrals over sampled histories.

Samples ``g(s_j)`` are joined piecewise linearly and the kernel is integrated
exactly against each linear piece. This is exact for piecewise-linear data
and removes the quadrature error where a singular kernel blows up.
"""

from __future__ import annotations

import numpy as np


def trapezoid_cumulative(t, g) -> np.ndarray:
    """``int_0^{t_n} g`` at every sample, trapezoid rule."""
    t = np.asarray(t, float)
    g = np.asarray(g, float)
    out = np.zeros_like(g)
    out[1:] = np.cumsum(0.5 * np.diff(t) * (g[1:] + g[:-1]))
    return out


def _exp_weights(rate: float, h: np.ndarray):
    """Weights ``(w0, w1)`` with ``int_0^h e^{-rate (h - tau)} g = w0 g(0) + w1 g(h)`` for linear g."""
    x = rate * h
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    one_minus_e = -np.expm1(-xs)
    # w1 / h = (x - (1 - e^{-x})) / x^2, w_total / h = (1 - e^{-x}) / x
    tot = np.where(small, 1 - x / 2 + x**2 / 6, one_minus_e / xs)
    w1 = np.where(small, 0.5 - x / 6 + x**2 / 24, (xs - one_minus_e) / xs**2)
    return h * (tot - w1), h * w1


def exp_kernel_cumulative(t, g, rate: float) -> np.ndarray:
    """``int_0^{t_n} exp(-rate (t_n - s)) g(s) ds`` at every sample."""
    t = np.asarray(t, float)
    g = np.asarray(g, float)
    out = np.zeros_like(g)
    if t.size < 2:
        return out
    h = np.diff(t)
    w0, w1 = _exp_weights(rate, h)
    decay = np.exp(-rate * h)
    for n in range(1, t.size):
        out[n] = decay[n - 1] * out[n - 1] + w0[n - 1] * g[n - 1] + w1[n - 1] * g[n]
    return out


def power_kernel_weights(t, n: int, exponent: float) -> np.ndarray:
    """Weights ``w_j`` with ``int_0^{t_n} (t_n - s)^{-exponent} g(s) ds = sum_j w_j g_j``.

    Exact for piecewise-linear ``g``; requires ``exponent < 1``.
    """
    if not exponent < 1:
        raise ValueError("kernel exponent must be < 1 for integrability")
    t = np.asarray(t, float)
    w = np.zeros(n + 1)
    if n == 0:
        return w
    tau = t[n] - t[: n + 1]  # decreasing to 0
    a = 1.0 - exponent
    ta, tb = tau[:-1], tau[1:]
    M0 = (ta**a - tb**a) / a
    M1 = (ta ** (a + 1) - tb ** (a + 1)) / (a + 1)
    d = ta - tb
    # on [tb, ta]: g = g_b + (g_a - g_b)(tau - tb)/d
    lin = (M1 - tb * M0) / d
    w[:-1] += lin
    w[1:] += M0 - lin
    return w


def power_kernel_cumulative(t, g, exponent: float) -> np.ndarray:
    """``int_0^{t_n} (t_n - s)^{-exponent} g(s) ds`` at every sample."""
    t = np.asarray(t, float)
    g = np.asarray(g, float)
    return np.array([power_kernel_weights(t, n, exponent) @ g[: n + 1] for n in range(t.size)])


def volterra_blowup_time(A: float, C: float, nu: float, T_max: float, n: int = 2000, exponent: float = 2.0 / 3.0, cap: float = 1e8):
    """Horizon of the comparison equation for the H^1 persistence bound.

    Solves ``Y(t) = A + (C/nu) int_0^t ((nu (t - s))^{-exponent} + 1) Y(s)^2 ds``
    by implicit product integration on a grid graded towards ``t = 0``
    (``t_k = T_max (k/n)^3``). Returns ``(horizon, t, Y)`` where the horizon is
    the last grid time at which a solution exists below ``cap * A``; it is
    ``inf`` when the solution survives to ``T_max``.
    """
    t = T_max * (np.arange(n + 1) / n) ** 3
    Y = np.full(n + 1, np.nan)
    Y[0] = A
    if C <= 0:
        Y[:] = A
        return float("inf"), t, Y
    scale = nu ** (-exponent)
    h = np.diff(t)
    for k in range(1, n + 1):
        w = scale * power_kernel_weights(t, k, exponent)
        w[:-1] += h[:k] / 2
        w[1:] += h[:k] / 2
        w *= C / nu
        R = A + w[:-1] @ (Y[:k] ** 2)
        c = w[-1]
        disc = 1.0 - 4.0 * c * R
        if disc < 0:
            return float(t[k - 1]), t[:k], Y[:k]
        Y[k] = 2.0 * R / (1.0 + np.sqrt(disc))
        if Y[k] > cap * max(A, 1e-300):
            return float(t[k - 1]), t[:k], Y[:k]
    return float("inf"), t, Y
