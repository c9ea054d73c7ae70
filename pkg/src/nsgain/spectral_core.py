"""
Fourier-space representation of periodic vector fields on the 2-torus.

Fields are stored as full complex coefficient arrays ``coeffs[c, ix, iy]`` with
``c`` the vector component and ``(ix, iy)`` FFT-ordered wavenumber indices, so
that

    u(x) = sum_k u_hat(k) exp(i k.x),      k in Z^2, |k_i| <= N/2,

on the torus of period 2*pi. With this normalisation Parseval reads
``mean(|u|^2) = sum_k |u_hat(k)|^2`` and all L^p norms below use the
normalised measure ``dx / (2 pi)^2``.

Sobolev norms are homogeneous and always exclude the zero mode:

    ||u||_{H^s} = ( sum_{k != 0} |k|^{2s} |u_hat(k)|^2 )^{1/2}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import (
    DealiasingError,
    DegenerateFieldError,
    FieldValidationError,
    HermitianError,
)

DEFAULT_DEALIAS = 2.0 / 3.0
_HERMITIAN_RTOL = 1e-10
_SOLENOIDAL_RTOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    """Truncation of T^2 to an ``N x N`` grid of wavenumbers plus viscosity.

    ``dealias_fraction`` is the radius fraction of the Nyquist wavenumber kept
    in quadratic products: modes with ``|k| < dealias_fraction * N / 2`` form
    the dealiased band. The default 2/3 makes products exact on the band.
    """

    N: int
    nu: float = 1.0
    dealias_fraction: float = DEFAULT_DEALIAS

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or isinstance(self.N, bool):
            raise ValueError(f"N must be an integer, got {self.N!r}")
        if self.N < 8 or self.N % 2:
            raise ValueError(f"N must be even and >= 8, got {self.N}")
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not (0.0 < self.dealias_fraction <= 1.0):
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}")

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return np.rint(np.fft.fftfreq(self.N) * self.N).astype(np.int64)

    @cached_property
    def kx(self) -> np.ndarray:
        return np.broadcast_to(self.wavenumbers[:, None], (self.N, self.N)).astype(float)

    @cached_property
    def ky(self) -> np.ndarray:
        return np.broadcast_to(self.wavenumbers[None, :], (self.N, self.N)).astype(float)

    @cached_property
    def k2(self) -> np.ndarray:
        return self.kx**2 + self.ky**2

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def inv_k2(self) -> np.ndarray:
        out = np.zeros_like(self.k2)
        nz = self.k2 > 0
        out[nz] = 1.0 / self.k2[nz]
        return out

    @cached_property
    def band_radius(self) -> float:
        return self.dealias_fraction * self.N / 2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return self.kmag < self.band_radius

    @cached_property
    def mirror(self) -> np.ndarray:
        """Index map ``i -> index of -k_i`` along one axis."""
        return (-np.arange(self.N)) % self.N

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        h = self.N // 2
        return (np.abs(self.kx) == h) | (np.abs(self.ky) == h)

    @property
    def dx(self) -> float:
        return 2 * np.pi / self.N

    @cached_property
    def _half(self):
        h = self.N // 2 + 1
        return {
            "kx": np.ascontiguousarray(self.kx[:, :h]),
            "ky": np.ascontiguousarray(self.ky[:, :h]),
            "mask": np.ascontiguousarray(self.dealias_mask[:, :h]),
        }

    def sobolev_weights(self, s: float) -> np.ndarray:
        """|k|^{2s} with the zero mode set to 0."""
        w = np.zeros_like(self.k2)
        nz = self.k2 > 0
        w[nz] = self.k2[nz] ** s
        return w

    def coordinates(self):
        x = np.arange(self.N) * self.dx
        return np.meshgrid(x, x, indexing="ij")


# ---------------------------------------------------------------------------
# coefficient-level helpers (no validation, used on hot paths)


def hermitian_partner(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """conj(u_hat(-k)) laid out at index k."""
    m = grid.mirror
    return np.conj(coeffs[..., m, :][..., :, m])


def full_from_half(grid: GridSpec, half: np.ndarray) -> np.ndarray:
    """Rebuild the full coefficient array from an rfft2-style half spectrum."""
    N = grid.N
    h = N // 2 + 1
    full = np.empty(half.shape[:-1] + (N,), dtype=complex)
    full[..., :h] = half
    cols = N - np.arange(h, N)
    full[..., h:] = np.conj(half[..., grid.mirror, :][..., cols])
    return full


def to_physical_real(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    h = grid.N // 2 + 1
    return sfft.irfft2(coeffs[..., :h], s=(grid.N, grid.N), axes=(-2, -1)) * grid.N**2


def from_physical_real(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    half = sfft.rfft2(values, axes=(-2, -1)) / grid.N**2
    return full_from_half(grid, half)


def energy_density(coeffs: np.ndarray) -> np.ndarray:
    """Per-wavenumber |u_hat(k)|^2 summed over components."""
    return np.sum(coeffs.real**2 + coeffs.imag**2, axis=0)


def norm_from_coeffs(grid: GridSpec, coeffs: np.ndarray, s: float) -> float:
    return float(np.sqrt(np.sum(grid.sobolev_weights(s) * energy_density(coeffs))))


def leray_coeffs(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    kdotu = grid.kx * coeffs[0] + grid.ky * coeffs[1]
    scale = kdotu * grid.inv_k2
    out = np.stack([coeffs[0] - grid.kx * scale, coeffs[1] - grid.ky * scale])
    # k and -k share an index on the Nyquist lines, so no symmetric projection exists there
    out[:, grid.nyquist_mask] = 0.0
    return out


def check_dealiasing(grid: GridSpec):
    if grid.N * grid.dealias_fraction < 4:
        raise DealiasingError(
            f"N={grid.N} with dealias_fraction={grid.dealias_fraction:.4g} keeps too few modes "
            "(need N * dealias_fraction >= 4)"
        )


def advect_real(grid: GridSpec, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Coefficients of the dealiased product (u.grad) w for real fields."""
    hp = grid._half
    m = hp["mask"]
    uh = u[:, :, : m.shape[1]] * m
    wh = w[:, :, : m.shape[1]] * m
    ikx, iky = 1j * hp["kx"], 1j * hp["ky"]
    stack = np.stack([uh[0], uh[1], ikx * wh[0], iky * wh[0], ikx * wh[1], iky * wh[1]])
    p = sfft.irfft2(stack, s=(grid.N, grid.N), axes=(-2, -1)) * grid.N**2
    g = np.stack([p[0] * p[2] + p[1] * p[3], p[0] * p[4] + p[1] * p[5]])
    gh = sfft.rfft2(g, axes=(-2, -1)) * (m / grid.N**2)
    return full_from_half(grid, gh)


def advect_complex(grid: GridSpec, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Complex-bilinear (u.grad) w for complexified fields (no Hermitian symmetry)."""
    m = grid.dealias_mask
    uh = u * m
    wh = w * m
    ikx, iky = 1j * grid.kx, 1j * grid.ky
    stack = np.stack([uh[0], uh[1], ikx * wh[0], iky * wh[0], ikx * wh[1], iky * wh[1]])
    p = sfft.ifft2(stack, axes=(-2, -1)) * grid.N**2
    g = np.stack([p[0] * p[2] + p[1] * p[3], p[0] * p[4] + p[1] * p[5]])
    return sfft.fft2(g, axes=(-2, -1)) * (m / grid.N**2)


def nonlinear_coeffs(grid: GridSpec, u: np.ndarray) -> np.ndarray:
    return leray_coeffs(grid, advect_real(grid, u, u))


def nonlinear_coeffs_complex(grid: GridSpec, u: np.ndarray) -> np.ndarray:
    return leray_coeffs(grid, advect_complex(grid, u, u))


def pairing_coeffs(a: np.ndarray, b: np.ndarray) -> float:
    """Real L^2 pairing sum_k a_hat(k) . conj(b_hat(k)) of two real fields."""
    return float(np.sum(a.real * b.real + a.imag * b.imag))


# ---------------------------------------------------------------------------
# field type


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable truncated Fourier representation of a real 2-vector field.

    Args:
        grid: the truncation and viscosity.
        coeffs: complex array of shape ``(2, N, N)`` in FFT order.
        mean_free: if True, the zero mode must vanish.
        solenoidal: if True, ``k . u_hat(k) = 0`` must hold (to round-off).
    """

    grid: GridSpec
    coeffs: np.ndarray
    mean_free: bool = True
    solenoidal: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex, copy=True)
        N = self.grid.N
        if c.shape != (2, N, N):
            raise FieldValidationError(f"coeffs must have shape (2, {N}, {N}), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise FieldValidationError("coeffs contain non-finite values")
        scale = float(np.max(np.abs(c))) if c.size else 0.0
        if scale > 0:
            asym = float(np.max(np.abs(c - hermitian_partner(self.grid, c))))
            if asym > _HERMITIAN_RTOL * scale:
                raise HermitianError(
                    f"coefficients are not Hermitian-symmetric (defect {asym:.3e} vs scale {scale:.3e})"
                )
            if self.mean_free and np.max(np.abs(c[:, 0, 0])) > _HERMITIAN_RTOL * scale:
                raise FieldValidationError("mean_free field has a nonzero k=0 coefficient")
            if self.solenoidal:
                div = np.abs(self.grid.kx * c[0] + self.grid.ky * c[1])
                if float(np.max(div)) > _SOLENOIDAL_RTOL * scale * max(1.0, N):
                    raise FieldValidationError("field flagged divergence-free has k.u_hat != 0")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # -- constructors -------------------------------------------------------

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField":
        return cls(grid, np.zeros((2, grid.N, grid.N), complex), mean_free=True, solenoidal=True)

    @classmethod
    def from_physical(cls, grid: GridSpec, values, mean_free: bool = True, solenoidal: bool = False):
        """Transform real samples of shape (2, N, N) on the uniform grid.

        With ``mean_free`` the spatial mean is removed.
        """
        values = np.asarray(values, dtype=float)
        if values.shape != (2, grid.N, grid.N):
            raise FieldValidationError(f"values must have shape (2, {grid.N}, {grid.N})")
        c = from_physical_real(grid, values)
        if mean_free:
            c[:, 0, 0] = 0.0
        return cls(grid, c, mean_free=mean_free, solenoidal=solenoidal)

    def replace(self, coeffs, solenoidal=None, mean_free=None) -> "SpectralField":
        return SpectralField(
            self.grid,
            coeffs,
            mean_free=self.mean_free if mean_free is None else mean_free,
            solenoidal=self.solenoidal if solenoidal is None else solenoidal,
        )

    # -- conversions ----------------------------------------------------------

    def to_physical(self) -> np.ndarray:
        return to_physical_real(self.grid, self.coeffs)

    def mode(self, k) -> np.ndarray:
        N = self.grid.N
        return self.coeffs[:, int(k[0]) % N, int(k[1]) % N]

    def is_solenoidal(self, rtol: float = _SOLENOIDAL_RTOL) -> bool:
        scale = float(np.max(np.abs(self.coeffs)))
        if scale == 0:
            return True
        div = np.abs(self.grid.kx * self.coeffs[0] + self.grid.ky * self.coeffs[1])
        return float(np.max(div)) <= rtol * scale * max(1.0, self.grid.N)

    # -- arithmetic -------------------------------------------------------------

    def _combine(self, other, coeffs):
        if self.grid != other.grid:
            raise FieldValidationError("fields live on different grids")
        return SpectralField(
            self.grid,
            coeffs,
            mean_free=self.mean_free and other.mean_free,
            solenoidal=self.solenoidal and other.solenoidal,
        )

    def __add__(self, other):
        return self._combine(other, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self._combine(other, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        scalar = float(scalar)
        return self.replace(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.replace(-self.coeffs)


# ---------------------------------------------------------------------------
# named fields


def single_mode(grid: GridSpec, k, amplitude: float = 1.0, polarization=None) -> SpectralField:
    """Real field built from the wavenumber pair +-k with ``||u||_{L^2} = |amplitude|``.

    The coefficient at ``k`` is ``amplitude / sqrt(2) * e`` (``e`` a unit
    vector, divergence-free direction by default) and its conjugate sits at
    ``-k``, so every Sobolev norm equals ``|amplitude| * |k|^s``.
    """
    kx, ky = int(k[0]), int(k[1])
    N = grid.N
    if (kx, ky) == (0, 0):
        raise FieldValidationError("single_mode needs k != 0")
    if max(abs(kx), abs(ky)) >= N // 2:
        raise FieldValidationError(f"k={k} is not strictly inside the grid (N={N})")
    if polarization is None:
        e = np.array([-ky, kx], dtype=complex) / np.hypot(kx, ky)
    else:
        e = np.asarray(polarization, dtype=complex)
        e = e / np.linalg.norm(e)
    c = np.zeros((2, N, N), complex)
    c[:, kx % N, ky % N] = amplitude / np.sqrt(2) * e
    c[:, (-kx) % N, (-ky) % N] = np.conj(amplitude / np.sqrt(2) * e)
    solenoidal = abs(kx * e[0] + ky * e[1]) < 1e-14
    return SpectralField(grid, c, mean_free=True, solenoidal=bool(solenoidal))


def taylor_green(grid: GridSpec, amplitude: float = 1.0) -> SpectralField:
    """``amplitude * (sin x cos y, -cos x sin y)``; a steady Euler flow with ``B(u,u) = 0``."""
    X, Y = grid.coordinates()
    u = amplitude * np.stack([np.sin(X) * np.cos(Y), -np.cos(X) * np.sin(Y)])
    c = from_physical_real(grid, u)
    c[np.abs(c) < 1e-15 * max(1.0, abs(amplitude))] = 0.0
    return SpectralField(grid, c, mean_free=True, solenoidal=True)


# ---------------------------------------------------------------------------
# deterministic random spectra


def _ring_layout(N: int):
    """Per-index ring number max(|kx|,|ky|) and an N-independent ordinal within the ring."""
    k = np.rint(np.fft.fftfreq(N) * N).astype(np.int64)
    KX, KY = np.meshgrid(k, k, indexing="ij")
    ring = np.maximum(np.abs(KX), np.abs(KY))
    return ring, _ordinal_in_full_ring(KX, KY, ring)


def _ordinal_in_full_ring(kx, ky, b):
    """Position of (kx, ky) among the 8b points of ring b sorted by (kx, ky)."""
    # points of ring b with kx' < kx: the column kx'=-b has 2b+1 points, interior
    # columns have 2 points each, the column kx'=b has 2b+1 points.
    out = np.zeros_like(kx)
    nz = b > 0
    kx, ky, b_ = kx[nz], ky[nz], b[nz]
    before = np.where(kx == -b_, 0, (2 * b_ + 1) + 2 * (kx + b_ - 1))
    within = np.where(
        (kx == -b_) | (kx == b_),
        ky + b_,
        np.where(ky == -b_, 0, 1),
    )
    out[nz] = before + within
    return out


def ring_normals(N: int, seed: int, stream: int = 0) -> np.ndarray:
    """Complex standard normals indexed by wavenumber, identical across resolutions.

    The value attached to a wavenumber depends only on ``(seed, stream, k)``,
    so fields synthesised at different ``N`` agree on their common modes.
    """
    ring, ordinal = _ring_layout(N)
    out = np.zeros((N, N), complex)
    for b in range(1, N // 2):
        rng = np.random.default_rng([int(seed), int(stream), b])
        draws = rng.standard_normal((2, 8 * b))
        sel = ring == b
        idx = ordinal[sel]
        out[sel] = draws[0, idx] + 1j * draws[1, idx]
    return out


def random_phases(grid: GridSpec, seed: int, stream: int = 0) -> np.ndarray:
    """Unit-modulus phases with ``phase(-k) = conj(phase(k))``."""
    z = ring_normals(grid.N, seed, stream)
    theta = np.angle(z)
    upper = (grid.ky > 0) | ((grid.ky == 0) & (grid.kx > 0))
    m = grid.mirror
    theta_mirror = theta[m, :][:, m]
    phase = np.where(upper, theta, -theta_mirror)
    out = np.exp(1j * phase)
    out[0, 0] = 0.0
    out[grid.nyquist_mask] = 0.0
    return out


def solenoidal_from_amplitude(grid: GridSpec, amplitude: np.ndarray, seed: int, stream: int = 0) -> SpectralField:
    """Divergence-free real field with ``|u_hat(k)| = amplitude[k]`` and random phases."""
    amplitude = np.asarray(amplitude, dtype=float)
    ph = random_phases(grid, seed, stream)
    kperp = np.stack([-grid.ky, grid.kx])
    unit = np.zeros_like(kperp)
    nz = grid.kmag > 0
    unit[:, nz] = kperp[:, nz] / grid.kmag[nz]
    c = 1j * amplitude * ph * unit
    return SpectralField(grid, c, mean_free=True, solenoidal=True)


def random_solenoidal(
    grid: GridSpec,
    slope: float,
    seed: int,
    amplitude: float = 1.0,
    kmin: float = 1.0,
    kmax: float | None = None,
    stream: int = 0,
) -> SpectralField:
    """Random-phase divergence-free field with ``|u_hat(k)| = amplitude |k|^{-slope}``.

    Modes outside ``kmin <= |k| <= kmax`` are zero; ``kmax`` defaults to the
    dealiased band.
    """
    k = grid.kmag
    sel = (k >= kmin) & (k > 0)
    sel &= grid.dealias_mask if kmax is None else (k <= kmax)
    amp = np.zeros_like(k)
    amp[sel] = amplitude * k[sel] ** (-float(slope))
    return solenoidal_from_amplitude(grid, amp, seed, stream)


# ---------------------------------------------------------------------------
# operations


def _require_hermitian(u):
    if not isinstance(u, SpectralField):
        raise TypeError(f"expected SpectralField, got {type(u).__name__}")


def sobolev_norm(u: SpectralField, s: float) -> float:
    """Homogeneous H^s norm; the k = 0 mode is excluded for every s."""
    _require_hermitian(u)
    s = float(s)
    if not np.isfinite(s):
        raise ValueError("Sobolev exponent must be finite")
    if s < 0 and np.any(u.coeffs[:, 0, 0] != 0):
        raise FieldValidationError("negative-order norm requested for a field with nonzero mean")
    return norm_from_coeffs(u.grid, u.coeffs, s)


def leray_project(u: SpectralField) -> SpectralField:
    """Per-mode orthogonal projection onto divergence-free fields.

    k = 0 is untouched; the Nyquist lines are zeroed.
    """
    _require_hermitian(u)
    return u.replace(leray_coeffs(u.grid, u.coeffs), solenoidal=True)


def stokes_power(u: SpectralField, a: float) -> SpectralField:
    """A^a u with A the Stokes operator, i.e. multiply mode k by |k|^{2a}."""
    _require_hermitian(u)
    if a < 0 and np.any(u.coeffs[:, 0, 0] != 0):
        raise FieldValidationError("negative Stokes power of a field with nonzero mean")
    if a == 0:
        return u
    return u.replace(u.coeffs * u.grid.sobolev_weights(a), mean_free=True)


def nonlinear_term(u: SpectralField) -> SpectralField:
    """B(u, u) = P_sigma (u.grad) u with 2/3-rule (or configured) dealiasing."""
    _require_hermitian(u)
    check_dealiasing(u.grid)
    c = nonlinear_coeffs(u.grid, u.coeffs)
    c[:, 0, 0] = 0.0
    return SpectralField(u.grid, c, mean_free=True, solenoidal=True)


def regrid(u: SpectralField, N: int) -> SpectralField:
    """Same field on an ``N x N`` grid: truncate or zero-pad, dropping Nyquist rows."""
    g = GridSpec(int(N), u.grid.nu, u.grid.dealias_fraction)
    keep = min(N, u.grid.N) // 2
    k = np.arange(-keep + 1, keep)
    src = k % u.grid.N
    dst = k % g.N
    c = np.zeros((2, g.N, g.N), complex)
    c[:, dst[:, None], dst[None, :]] = u.coeffs[:, src[:, None], src[None, :]]
    return SpectralField(g, c, mean_free=u.mean_free, solenoidal=u.solenoidal)


def l2_pairing(u: SpectralField, v: SpectralField) -> float:
    """(u, v)_{L^2} with the normalised measure."""
    return pairing_coeffs(u.coeffs, v.coeffs)


def interpolation_gap(u: SpectralField, s0: float, s1: float, s2: float, theta: float) -> float:
    """``||u||_{s1} / (||u||_{s0}^{1-theta} ||u||_{s2}^theta)`` for ``s1 = (1-theta) s0 + theta s2``.

    Hölder's inequality on the Fourier side bounds this by 1.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if not np.isclose(s1, (1 - theta) * s0 + theta * s2, rtol=0, atol=1e-12):
        raise ValueError("s1 must equal (1 - theta) s0 + theta s2")
    n0, n1, n2 = (sobolev_norm(u, s) for s in (s0, s1, s2))
    denom = n0 ** (1 - theta) * n2**theta
    if denom == 0:
        raise DegenerateFieldError("interpolation ratio undefined for a zero field")
    return n1 / denom


# ---------------------------------------------------------------------------
# spectral dumps

DUMP_COLUMNS = ("k_x", "k_y", "re_u1", "im_u1", "re_u2", "im_u2")


def _dump_rows(u: SpectralField):
    g = u.grid
    nz = np.any(u.coeffs != 0, axis=0)
    ix, iy = np.nonzero(nz)
    kx, ky = g.wavenumbers[ix], g.wavenumbers[iy]
    c = u.coeffs[:, ix, iy]
    return np.column_stack([kx, ky, c[0].real, c[0].imag, c[1].real, c[1].imag])


def write_spectral_csv(u: SpectralField, path, comments=()) -> Path:
    """Write nonzero modes as rows ``k_x, k_y, Re u1, Im u1, Re u2, Im u2``.

    The first line records the grid; ``comments`` become further ``#`` lines.
    """
    path = Path(path)
    rows = _dump_rows(u)
    with path.open("w", newline="") as fh:
        fh.write(f"# N={u.grid.N} nu={u.grid.nu!r} dealias_fraction={u.grid.dealias_fraction!r}\n")
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh)
        w.writerow(DUMP_COLUMNS)
        for r in rows:
            w.writerow([int(r[0]), int(r[1])] + [repr(float(x)) for x in r[2:]])
    return path


def _parse_header(line: str) -> GridSpec:
    parts = dict(p.split("=", 1) for p in line.lstrip("#").split())
    return GridSpec(int(parts["N"]), float(parts["nu"]), float(parts["dealias_fraction"]))


def _field_from_rows(grid: GridSpec, rows: np.ndarray) -> SpectralField:
    c = np.zeros((2, grid.N, grid.N), complex)
    if rows.size:
        rows = np.atleast_2d(rows)
        ix = rows[:, 0].astype(np.int64) % grid.N
        iy = rows[:, 1].astype(np.int64) % grid.N
        c[0, ix, iy] = rows[:, 2] + 1j * rows[:, 3]
        c[1, ix, iy] = rows[:, 4] + 1j * rows[:, 5]
    mean_free = not np.any(c[:, 0, 0])
    f = SpectralField(grid, c, mean_free=mean_free)
    return f.replace(f.coeffs, solenoidal=f.is_solenoidal())


def read_spectral_csv(path) -> SpectralField:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline()
        grid = _parse_header(header)
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        next(reader)
        rows = np.array([[float(x) for x in r] for r in reader if r], dtype=float)
    return _field_from_rows(grid, rows)


def write_spectral_binary(u: SpectralField, path) -> Path:
    """Flat little-endian float64 dump: header ``[N, nu, dealias, nrows]`` then rows."""
    path = Path(path)
    rows = _dump_rows(u)
    head = np.array([u.grid.N, u.grid.nu, u.grid.dealias_fraction, len(rows)], dtype="<f8")
    with path.open("wb") as fh:
        fh.write(head.tobytes())
        fh.write(np.ascontiguousarray(rows, dtype="<f8").tobytes())
    return path


def read_spectral_binary(path) -> SpectralField:
    data = np.fromfile(path, dtype="<f8")
    N, nu, frac, n = data[:4]
    grid = GridSpec(int(N), float(nu), float(frac))
    rows = data[4:].reshape(int(n), 6)
    return _field_from_rows(grid, rows)
