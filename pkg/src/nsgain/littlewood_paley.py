"""
Smooth dyadic shells on the torus.

The radial bump ``chi`` equals 1 on ``|xi| <= 1/2`` and 0 on ``|xi| >= 1`` with
the C-infinity transition ``g(2-2r) / (g(2-2r) + g(2r-1))``, ``g(x) = exp(-1/x)``.
With ``lambda_q = 2**q`` the shell multipliers are

    phi_{-1}(xi) = chi(xi),
    phi_q(xi)    = chi(xi / lambda_{q+1}) - chi(xi / lambda_q),   q >= 0,

so ``sum_{q=-1}^{Q} phi_q = chi(xi / 2^{Q+1})`` telescopes, and ``phi_q`` is
supported in ``2^{q-1} < |xi| < 2^{q+1}``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import DegenerateFieldError, FieldValidationError
from .spectral_core import GridSpec, SpectralField, energy_density


def lam(q: int) -> float:
    """Dyadic frequency lambda_q = 2^q (lambda_{-1} = 1/2)."""
    return 2.0 ** int(q)


def _g(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def bump(r) -> np.ndarray:
    """The radial cutoff chi evaluated at radii ``r``."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.zeros_like(r)
    out[r <= 0.5] = 1.0
    mid = (r > 0.5) & (r < 1.0)
    if np.any(mid):
        a = _g(2.0 - 2.0 * r[mid])
        b = _g(2.0 * r[mid] - 1.0)
        out[mid] = a / (a + b)
    return out[0] if scalar else out


def phi_radial(q: int, r) -> np.ndarray:
    """Shell multiplier phi_q as a function of the radius ``|xi|``."""
    if q < -1:
        raise ValueError(f"shell index must be >= -1, got {q}")
    r = np.asarray(r, dtype=float)
    if q == -1:
        return bump(r)
    return bump(r / lam(q + 1)) - bump(r / lam(q))


def phi_q(q: int, xi) -> np.ndarray:
    """Shell multiplier phi_q at wavenumber vector(s) ``xi`` (last axis of length 2)."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != 2:
        raise ValueError("xi must have a trailing axis of length 2")
    return phi_radial(q, np.hypot(xi[..., 0], xi[..., 1]))


def q_max(N: int) -> int:
    """Largest shell index needed to cover every mode of an ``N x N`` grid."""
    return int(math.ceil(math.log2(N)))


def shell_indices(N: int) -> list[int]:
    return list(range(-1, q_max(N) + 1))


@lru_cache(maxsize=32)
def _multipliers(N: int) -> np.ndarray:
    g = GridSpec(N)
    m = np.stack([phi_radial(q, g.kmag) for q in shell_indices(N)])
    m.flags.writeable = False
    return m


def shell_multipliers(grid: GridSpec) -> np.ndarray:
    """Array ``(n_shells, N, N)`` of phi_q(k) for ``q = -1 .. q_max(N)``."""
    return _multipliers(grid.N)


@lru_cache(maxsize=32)
def _energy_weights(N: int) -> np.ndarray:
    m = _multipliers(N)
    w = (m**2).reshape(m.shape[0], -1)
    w.flags.writeable = False
    return w


def shell_norms_coeffs(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """``||Delta_q u||_{L^2}`` for every shell, from raw coefficients."""
    e = energy_density(coeffs).ravel()
    return np.sqrt(_energy_weights(grid.N) @ e)


def shell_floor(grid: GridSpec, q: int) -> float:
    """Smallest nonzero ``|k|`` on the grid inside the support of phi_q (inf if empty)."""
    phi = phi_radial(q, grid.kmag)
    sel = (phi > 0) & (grid.kmag > 0)
    return float(grid.kmag[sel].min()) if np.any(sel) else float("inf")


def shell_floors(grid: GridSpec) -> np.ndarray:
    return np.array([shell_floor(grid, q) for q in shell_indices(grid.N)])


def lp_project(u: SpectralField, q: int) -> SpectralField:
    """Delta_q u: multiply each mode by phi_q(k)."""
    if q < -1:
        raise ValueError(f"shell index must be >= -1, got {q}")
    if q <= q_max(u.grid.N):
        mult = shell_multipliers(u.grid)[q + 1]
    else:
        mult = phi_radial(q, u.grid.kmag)
    return u.replace(u.coeffs * mult)


@dataclass(frozen=True)
class ShellDecomposition:
    """The pieces ``u_q = Delta_q u`` for ``q = -1 .. q_max``."""

    qs: tuple
    shells: tuple

    @property
    def lambdas(self) -> dict:
        return {q: lam(q) for q in self.qs}

    def __getitem__(self, q: int) -> SpectralField:
        return self.shells[self.qs.index(q)]

    def norms(self) -> np.ndarray:
        return np.array([np.sqrt(np.sum(energy_density(s.coeffs))) for s in self.shells])

    def reconstruct(self) -> SpectralField:
        c = np.sum([s.coeffs for s in self.shells], axis=0)
        return self.shells[0].replace(c)


def decompose(u: SpectralField) -> ShellDecomposition:
    qs = tuple(shell_indices(u.grid.N))
    return ShellDecomposition(qs, tuple(lp_project(u, q) for q in qs))


def lp_norm(u: SpectralField, s: float) -> float:
    """(sum_q lambda_q^{2s} ||u_q||_2^2)^{1/2}."""
    if s < 0 and np.any(u.coeffs[:, 0, 0] != 0):
        raise FieldValidationError("negative-order norm of a field with nonzero mean")
    norms = shell_norms_coeffs(u.grid, u.coeffs)
    weights = np.array([lam(q) ** (2 * s) for q in shell_indices(u.grid.N)])
    return float(np.sqrt(np.sum(weights * norms**2)))


def lp_envelope(s: float) -> tuple[float, float]:
    """Bounds on lp_norm / sobolev_norm valid for every field on the integer lattice."""
    return 2.0 ** (-(abs(s) + 1)), 2.0 ** (abs(s) + 1)


# ---------------------------------------------------------------------------
# Bernstein


def _oversampled(u: SpectralField, factor: int = 2) -> np.ndarray:
    N = u.grid.N
    M = factor * N
    c = np.zeros((2, M, M), complex)
    k = u.grid.wavenumbers
    keep = np.abs(k) < N // 2
    ix = (k[keep] % M)[:, None]
    iy = (k[keep] % M)[None, :]
    c[:, ix, iy] = u.coeffs[:, keep][:, :, keep]
    return sfft.ifft2(c, axes=(-2, -1)).real * M * M


def lp_space_norm(u: SpectralField, p: float, oversample: int = 2) -> float:
    """``||u||_{L^p}`` with the normalised measure, sampled on a refined grid."""
    mag = np.sqrt(np.sum(_oversampled(u, oversample) ** 2, axis=0))
    if np.isinf(p):
        return float(mag.max())
    return float(np.mean(mag**p) ** (1.0 / p))


def infer_shell(u: SpectralField) -> int:
    """Smallest q whose open support annulus contains every nonzero mode of ``u``."""
    nz = np.any(u.coeffs != 0, axis=0)
    if not np.any(nz):
        raise DegenerateFieldError("zero field has no shell")
    r = u.grid.kmag[nz]
    for q in shell_indices(u.grid.N) + [q_max(u.grid.N) + 1]:
        if np.all(phi_radial(q, r) > 0):
            return q
    raise FieldValidationError("field is not supported in a single dyadic shell")


def bernstein_ratio(u_q: SpectralField, p_from: float, p_to: float, q: int | None = None) -> float:
    """``||u_q||_{p_to} / (lambda_q^{2(1/p_from - 1/p_to)} ||u_q||_{p_from})`` in dimension 2."""
    if not (2 <= p_from <= p_to):
        raise ValueError("need 2 <= p_from <= p_to")
    if q is None:
        q = infer_shell(u_q)
    lo = lp_space_norm(u_q, p_from)
    if lo == 0:
        raise DegenerateFieldError("Bernstein ratio undefined for a zero field")
    inv_to = 0.0 if np.isinf(p_to) else 1.0 / p_to
    return lp_space_norm(u_q, p_to) / (lam(q) ** (2 * (1.0 / p_from - inv_to)) * lo)


def bernstein_sweep(grid: GridSpec, qs, n_fields: int, seed: int, p_from=2.0, p_to=np.inf) -> dict:
    """Max Bernstein ratio over random shell-localised fields, per shell index."""
    from .spectral_core import random_solenoidal

    out = {}
    for q in qs:
        worst = 0.0
        for j in range(n_fields):
            u = random_solenoidal(grid, slope=0.0, seed=seed, stream=1000 * (q + 2) + j, kmax=grid.N / 2 - 1)
            uq = lp_project(u, q)
            if not np.any(uq.coeffs):
                continue
            worst = max(worst, bernstein_ratio(uq, p_from, p_to, q=q))
        out[q] = worst
    return out


def write_shell_table(u: SpectralField, path) -> Path:
    """CSV rows ``q, lambda_q, ||u_q||_2``."""
    path = Path(path)
    norms = shell_norms_coeffs(u.grid, u.coeffs)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "lambda_q", "norm_l2"])
        for q, n in zip(shell_indices(u.grid.N), norms):
            w.writerow([q, repr(lam(q)), repr(float(n))])
    return path
