"""
Time integration: the heat equation (per-mode exact) and the projected
Navier-Stokes system ``u_t + B(u,u) + nu A u = f`` by integrating-factor
Runge-Kutta, on the real axis and along complex rays ``t = s exp(i theta)``.

Integrating-factor (Lawson) schemes treat the diagonal viscous term exactly
through ``E(h) = exp(-nu |k|^2 h)`` and step the nonlinearity explicitly. The
step ``h`` may be complex, which is all the complex-ray solver needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import BlowUpError, FieldValidationError, IntegratorFaultError
from .littlewood_paley import shell_indices, shell_norms_coeffs
from .report import VerificationReport
from .spectral_core import (
    GridSpec,
    SpectralField,
    energy_density,
    nonlinear_coeffs,
    nonlinear_coeffs_complex,
    norm_from_coeffs,
    regrid,
    to_physical_real,
)

SCHEME_ORDER = {"IF-RK2": 2, "IF-RK4": 4}
_BLOWUP_FACTOR = 1e12
_MAX_SUBSTEPS = 4096


@dataclass(frozen=True)
class StepperConfig:
    """Time-stepping parameters.

    Attributes:
        dt: nominal step; the last step is shortened to land on ``T_final``.
        scheme: ``"IF-RK2"`` or ``"IF-RK4"``.
        T_final: end time.
        record_every: keep a field snapshot every this many steps.
        cfl: Courant number; steps are subdivided when ``dt > cfl dx / max|u|``.
        energy_tol: allowed energy-inequality violation is
            ``energy_tol * dt * t * scale`` (see ``nse_solve``).
        check_energy: raise IntegratorFaultError on violations beyond tolerance.
    """

    dt: float
    scheme: str = "IF-RK4"
    T_final: float = 1.0
    record_every: int = 1
    cfl: float = 0.5
    energy_tol: float = 10.0
    check_energy: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEME_ORDER:
            raise ValueError(f"scheme must be one of {sorted(SCHEME_ORDER)}, got {self.scheme!r}")
        if not (np.isfinite(self.T_final) and self.T_final > 0):
            raise ValueError(f"T_final must be positive, got {self.T_final}")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")
        if not (0 < self.cfl <= 1):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")

    @property
    def order(self) -> int:
        return SCHEME_ORDER[self.scheme]

    def step_times(self) -> np.ndarray:
        """Recorded times ``0, dt, 2 dt, ..., T_final``."""
        n = max(1, math.ceil(self.T_final / self.dt - 1e-9))
        t = np.arange(n + 1) * self.dt
        t[-1] = self.T_final
        return t

    def substeps(self, grid: GridSpec, umax: float, h: float | None = None) -> int:
        """Number of equal sub-steps needed for a step of size ``h`` to meet the CFL rule."""
        h = self.dt if h is None else h
        if umax <= 0:
            return 1
        limit = self.cfl * grid.dx / umax
        return max(1, math.ceil(abs(h) / limit - 1e-12))


class _IFStepper:
    """Lawson RK2/RK4 on coefficient arrays; ``h`` may be complex.

    The time-independent force is absorbed exactly: the scheme advances the
    deviation ``w = u - u_s`` from the Stokes steady state
    ``u_s = f / (nu |k|^2)``, which obeys ``w' = L w - B(w + u_s)``. Only the
    nonlinear term is then treated explicitly, so stiff forced modes relax to
    the correct amplitude for any step size.
    """

    def __init__(self, grid: GridSpec, force: np.ndarray, scheme: str, complex_mode: bool = False):
        self.grid = grid
        self.L = -grid.nu * grid.k2
        self.f = np.asarray(force, dtype=complex)
        self.steady = self.f * (grid.inv_k2 / grid.nu)
        self.order = SCHEME_ORDER[scheme]
        self.complex_mode = complex_mode
        self._nl = nonlinear_coeffs_complex if complex_mode else nonlinear_coeffs
        self._key = None
        self._fac = None

    def nonlinear(self, u: np.ndarray) -> np.ndarray:
        out = -self._nl(self.grid, u)
        out[:, 0, 0] = 0.0
        return out

    def rhs(self, u: np.ndarray) -> np.ndarray:
        """Non-stiff part ``f - B(u)`` of the full right-hand side."""
        return self.f + self.nonlinear(u)

    def factors(self, h):
        if h != self._key:
            E = np.exp(self.L * h)
            E2 = np.exp(self.L * (h / 2))
            if not self.complex_mode:
                E, E2 = E.real, E2.real
            self._key, self._fac = h, (E, E2)
        return self._fac

    def max_speed(self, u: np.ndarray) -> float:
        if self.complex_mode:
            p = sfft.ifft2(u, axes=(-2, -1)) * self.grid.N**2
            return float(np.sqrt(np.max(np.abs(p[0]) ** 2 + np.abs(p[1]) ** 2)))
        p = to_physical_real(self.grid, u)
        return float(np.sqrt(np.max(p[0] ** 2 + p[1] ** 2)))

    def step(self, u: np.ndarray, h, k1: np.ndarray | None = None) -> np.ndarray:
        """Advance by ``h``; ``k1`` is ``rhs(u)`` if already known."""
        E, E2 = self.factors(h)
        us = self.steady
        w = u - us
        n1 = self.nonlinear(u) if k1 is None else k1 - self.f
        g = lambda v: self.nonlinear(v + us)
        if self.order == 2:
            n2 = g(E * (w + h * n1))
            return E * w + (h / 2) * (E * n1 + n2) + us
        n2 = g(E2 * (w + (h / 2) * n1))
        n3 = g(E2 * w + (h / 2) * n2)
        n4 = g(E * w + h * (E2 * n3))
        return E * w + (h / 6) * (E * n1 + 2 * E2 * (n2 + n3) + n4) + us


def _check_blowup(u: np.ndarray, t, limit: float):
    s = float(np.sqrt(np.sum(energy_density(u)))) if np.all(np.isfinite(u)) else float("nan")
    if not np.isfinite(s) or s > limit:
        raise BlowUpError(t)


def _advance(stepper: _IFStepper, cfg: StepperConfig, u: np.ndarray, h, t, limit: float):
    """One recorded step of (complex) size ``h``, sub-stepped for CFL.

    Returns the new coefficients, the RHS at the start of the step and the
    number of sub-steps taken.
    """
    umax = stepper.max_speed(u)
    n = cfg.substeps(stepper.grid, umax, abs(h))
    if n > _MAX_SUBSTEPS or not np.isfinite(umax):
        raise BlowUpError(t, f"CFL sub-stepping exceeded {_MAX_SUBSTEPS} at t={t!r}: velocity runaway")
    hs = h / n
    # runaway values are caught by _check_blowup
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = stepper.rhs(u)
        out = stepper.step(u, hs, k1)
        for _ in range(n - 1):
            out = stepper.step(out, hs)
    _check_blowup(out, t, limit)
    return out, k1, n


def _require_nse_inputs(u: SpectralField, f: SpectralField):
    if u.grid != f.grid:
        raise FieldValidationError("u and f live on different grids")
    for name, fld in (("u", u), ("f", f)):
        if np.any(fld.coeffs[:, 0, 0]):
            raise FieldValidationError(f"{name} must be mean-free")
        if not fld.is_solenoidal():
            raise FieldValidationError(f"{name} must be divergence-free")


# ---------------------------------------------------------------------------
# heat equation


def heat_coeffs(grid: GridSpec, u0: np.ndarray, f: np.ndarray, nu: float, t) -> np.ndarray:
    """Per-mode Duhamel solution at a real or complex time ``t``."""
    nk2 = nu * grid.k2
    decay = np.exp(-nk2 * t)
    gain = np.zeros_like(decay)
    nz = grid.k2 > 0
    gain[nz] = -np.expm1(-nk2[nz] * t) / nk2[nz]
    gain[~nz] = t
    return decay * u0 + gain * f


def heat_time_derivative(grid: GridSpec, u0: np.ndarray, f: np.ndarray, nu: float, t) -> np.ndarray:
    """Exact ``u_t = nu Delta u + f`` of the heat solution at (complex) time ``t``."""
    return -nu * grid.k2 * heat_coeffs(grid, u0, f, nu, t) + f


def _check_heat_force(f: SpectralField):
    if np.any(f.coeffs[:, 0, 0]):
        raise FieldValidationError("force has a nonzero k=0 mode; the mean-free heat problem has no steady state")


def heat_solve(u0: SpectralField, f: SpectralField, nu: float, t: float) -> SpectralField:
    """Exact heat solution ``u_t - nu Delta u = f`` at time ``t``."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if not nu > 0:
        raise ValueError("nu must be positive")
    if u0.grid != f.grid:
        raise FieldValidationError("u0 and f live on different grids")
    _check_heat_force(f)
    c = heat_coeffs(u0.grid, u0.coeffs, f.coeffs, nu, float(t))
    return u0.replace(c, solenoidal=u0.solenoidal and f.solenoidal, mean_free=u0.mean_free)


def heat_shell_bound(grid: GridSpec, u0: SpectralField, f: SpectralField, nu: float, t) -> tuple:
    """Shell-wise Duhamel bound on ``||u_q(t)||_2^2`` for shells ``q >= 0``.

    Each shell decays at least at rate ``nu m_q^2`` where ``m_q`` is the
    smallest grid ``|k|`` in the support of phi_q, giving

        ||u_q(t)||^2 <= ||u_q(0)||^2 e^{-nu m_q^2 t}
                        + ||f_q||^2 (1 - e^{-nu m_q^2 t}) / (nu^2 m_q^4).

    Returns ``(qs, lhs, rhs)`` with arrays of shape ``(len(t), len(qs))``.
    """
    from .littlewood_paley import shell_floors

    t = np.atleast_1d(np.asarray(t, dtype=float))
    qs_all = shell_indices(grid.N)
    floors = shell_floors(grid)
    live = np.isfinite(floors)
    qs = [q for q, ok in zip(qs_all, live) if ok]
    m = floors[live]
    u0n = shell_norms_coeffs(grid, u0.coeffs)[live] ** 2
    fn = shell_norms_coeffs(grid, f.coeffs)[live] ** 2
    lhs = np.empty((t.size, len(qs)))
    rhs = np.empty_like(lhs)
    for i, ti in enumerate(t):
        ut = heat_coeffs(grid, u0.coeffs, f.coeffs, nu, ti)
        lhs[i] = shell_norms_coeffs(grid, ut)[live] ** 2
        rate = nu * m**2
        rhs[i] = u0n * np.exp(-rate * ti) + fn * (-np.expm1(-rate * ti)) / (nu**2 * m**4)
    return qs, lhs, rhs


def heat_gain_check(u0: SpectralField, f: SpectralField, nu: float, alpha: float, t_grid) -> VerificationReport:
    """Two-derivative gain for the heat equation, checked shell by shell.

    At every time the LP-weighted quantity ``sum_q lambda_q^{2 alpha + 4}
    ||u_q(t)||^2`` is compared with the same weighting of the shell bounds.
    The supremum of the Sobolev norm ``||u(t)||_{H^{alpha+2}}`` and the
    per-shell margins go in ``extra``.
    """
    _check_heat_force(f)
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(t_grid < 0):
        raise ValueError("t_grid must be nonnegative")
    g = u0.grid
    qs, lhs_q, rhs_q = heat_shell_bound(g, u0, f, nu, t_grid)
    w = np.array([2.0 ** ((2 * alpha + 4) * q) for q in qs])
    lhs = lhs_q @ w
    rhs = rhs_q @ w
    sob = np.array([norm_from_coeffs(g, heat_coeffs(g, u0.coeffs, f.coeffs, nu, t), alpha + 2) for t in t_grid])
    shell_margin = (rhs_q - lhs_q).min(axis=0)
    return VerificationReport(
        inequality="heat_gain",
        times=t_grid,
        lhs=lhs,
        rhs=rhs,
        constants={"nu": float(nu), "alpha": float(alpha)},
        extra={
            "sup_sobolev_norm": float(sob.max()),
            "sobolev_norm": sob,
            "initial_norm": norm_from_coeffs(g, u0.coeffs, alpha + 2),
            "force_norm": norm_from_coeffs(g, f.coeffs, alpha),
            "shells": qs,
            "shell_min_margin": shell_margin,
            "all_shells_pass": bool(np.all(shell_margin >= 0)),
        },
    )


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Output of a real-time solve.

    ``diagnostics`` maps names to arrays over ``times`` (every step):
    ``l2, h1, h_alpha1, h_alpha2`` norms, ``dissipation`` (``nu int ||u||_{H^1}^2``),
    ``energy_rhs`` and ``energy_margin`` of the energy inequality.
    ``shell_norms`` has shape ``(len(times), n_shells)`` for ``shell_qs``.
    """

    grid: GridSpec
    alpha: float
    times: np.ndarray
    diagnostics: dict
    shell_qs: list
    shell_norms: np.ndarray
    snapshot_times: np.ndarray
    snapshots: list
    force_norms: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def nu(self) -> float:
        return self.grid.nu

    def index_of(self, t: float, atol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > atol * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not a recorded time")
        return i

    def snapshot(self, t: float) -> SpectralField:
        i = int(np.argmin(np.abs(self.snapshot_times - t)))
        if abs(self.snapshot_times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no snapshot stored at t={t}")
        return self.snapshots[i]

    @property
    def final(self) -> SpectralField:
        return self.snapshots[-1]

    def energy_violation_constant(self) -> float:
        """Largest observed ``-margin / (dt t scale)``; zero when the inequality holds everywhere."""
        return float(self.meta.get("energy_C", 0.0))

    DIAGNOSTIC_COLUMNS = ("t", "l2", "h1", "h_alpha1", "h_alpha2", "energy_margin")

    def diagnostic_rows(self):
        d = self.diagnostics
        for i, t in enumerate(self.times):
            yield [float(t)] + [float(d[c][i]) for c in self.DIAGNOSTIC_COLUMNS[1:]]


def _norms(grid: GridSpec, e: np.ndarray, alpha: float) -> dict:
    out = {}
    for name, s in (("l2", 0.0), ("h1", 1.0), ("h_alpha1", alpha + 1), ("h_alpha2", alpha + 2)):
        out[name] = float(np.sqrt(np.sum(grid.sobolev_weights(s) * e)))
    return out


def _force_norms(f: SpectralField, alpha: float) -> dict:
    g = f.grid
    return {
        "h_minus1": norm_from_coeffs(g, f.coeffs, -1.0),
        "h_alpha": norm_from_coeffs(g, f.coeffs, alpha),
        "l2": norm_from_coeffs(g, f.coeffs, 0.0),
    }


def _energy_scale(u0: SpectralField, f: SpectralField) -> float:
    g = u0.grid
    nu = g.nu
    return (
        nu * norm_from_coeffs(g, u0.coeffs, 1.0) ** 2
        + norm_from_coeffs(g, f.coeffs, -1.0) ** 2 / nu
        + norm_from_coeffs(g, u0.coeffs, 0.0) ** 2
    )


def nse_step(u: SpectralField, f: SpectralField, cfg: StepperConfig, t: float = 0.0) -> SpectralField:
    """Advance the projected Navier-Stokes system by one step of size ``cfg.dt``."""
    _require_nse_inputs(u, f)
    st = _IFStepper(u.grid, f.coeffs, cfg.scheme)
    scale = max(float(np.sqrt(np.sum(energy_density(u.coeffs)))), 1.0)
    out, _, _ = _advance(st, cfg, np.array(u.coeffs), cfg.dt, t + cfg.dt, _BLOWUP_FACTOR * scale)
    out[:, 0, 0] = 0.0
    return SpectralField(u.grid, out, mean_free=True, solenoidal=True)


def nse_solve(u0: SpectralField, f: SpectralField, cfg: StepperConfig, alpha: float = -1.0) -> Trajectory:
    """Integrate to ``cfg.T_final`` recording diagnostics at every step.

    The energy inequality

        ||u(t)||^2 + nu int_0^t ||u||_{H^1}^2 <= ||u0||^2 + t ||f||_{H^-1}^2 / nu

    is evaluated with trapezoid quadrature at every step. Its violation is
    tolerated up to ``cfg.energy_tol * dt * t * S`` with
    ``S = nu ||u0||_{H^1}^2 + ||f||_{H^-1}^2 / nu + ||u0||^2``; beyond that an
    IntegratorFaultError is raised (when ``cfg.check_energy``).
    """
    _require_nse_inputs(u0, f)
    g = u0.grid
    nu = g.nu
    st = _IFStepper(g, f.coeffs, cfg.scheme)
    times = cfg.step_times()
    fn = _force_norms(f, alpha)
    S = _energy_scale(u0, f)
    e0 = float(np.sum(energy_density(u0.coeffs)))
    limit = _BLOWUP_FACTOR * max(math.sqrt(e0), fn["l2"], 1.0)

    n = times.size
    diag = {k: np.empty(n) for k in ("l2", "h1", "h_alpha1", "h_alpha2", "dissipation", "energy_rhs", "energy_margin")}
    qs = shell_indices(g.N)
    shells = np.empty((n, len(qs)))
    snaps, snap_t = [], []
    u = np.array(u0.coeffs)
    worst_C = 0.0
    total_sub = 0

    def record(i, c):
        e = energy_density(c)
        for k, v in _norms(g, e, alpha).items():
            diag[k][i] = v
        shells[i] = shell_norms_coeffs(g, c)

    record(0, u)
    diag["dissipation"][0] = 0.0
    diag["energy_rhs"][0] = diag["l2"][0] ** 2
    diag["energy_margin"][0] = 0.0
    snaps.append(u0)
    snap_t.append(0.0)

    def build(n_used: int) -> Trajectory:
        return Trajectory(
            grid=g,
            alpha=float(alpha),
            times=times[:n_used],
            diagnostics={k: v[:n_used] for k, v in diag.items()},
            shell_qs=qs,
            shell_norms=shells[:n_used],
            snapshot_times=np.array(snap_t),
            snapshots=snaps,
            force_norms=fn,
            meta={
                "scheme": cfg.scheme,
                "dt": cfg.dt,
                "T_final": cfg.T_final,
                "substeps": int(total_sub),
                "energy_C": worst_C,
                "energy_scale": S,
                "initial_h1": norm_from_coeffs(g, u0.coeffs, 1.0),
                "initial_l2": math.sqrt(e0),
            },
        )

    i = 0
    try:
        for i in range(1, n):
            h = times[i] - times[i - 1]
            u, _, nsub = _advance(st, cfg, u, h, times[i], limit)
            u[:, 0, 0] = 0.0
            total_sub += nsub
            record(i, u)
            diag["dissipation"][i] = diag["dissipation"][i - 1] + nu * h * 0.5 * (diag["h1"][i] ** 2 + diag["h1"][i - 1] ** 2)
            diag["energy_rhs"][i] = diag["l2"][0] ** 2 + times[i] * fn["h_minus1"] ** 2 / nu
            margin = diag["energy_rhs"][i] - diag["l2"][i] ** 2 - diag["dissipation"][i]
            diag["energy_margin"][i] = margin
            if margin < 0 and S > 0:
                C = -margin / (cfg.dt * times[i] * S)
                worst_C = max(worst_C, C)
                if cfg.check_energy and C > cfg.energy_tol:
                    # keep the offending step in the partial record
                    i += 1
                    raise IntegratorFaultError(times[i - 1], margin, cfg.energy_tol * cfg.dt * times[i - 1] * S)
            if i % cfg.record_every == 0 or i == n - 1:
                snaps.append(SpectralField(g, u, mean_free=True, solenoidal=True))
                snap_t.append(times[i])
    except (BlowUpError, IntegratorFaultError) as err:
        err.partial = build(i)
        raise
    return build(n)


def heat_trajectory(u0: SpectralField, f: SpectralField, times, alpha: float = -1.0, record_every: int = 1) -> Trajectory:
    """Trajectory of the exact heat solution (viscosity from ``u0.grid``)."""
    _check_heat_force(f)
    g = u0.grid
    nu = g.nu
    times = np.asarray(times, dtype=float)
    n = times.size
    fn = _force_norms(f, alpha)
    diag = {k: np.empty(n) for k in ("l2", "h1", "h_alpha1", "h_alpha2", "dissipation", "energy_rhs", "energy_margin")}
    qs = shell_indices(g.N)
    shells = np.empty((n, len(qs)))
    snaps, snap_t = [], []
    for i, t in enumerate(times):
        c = heat_coeffs(g, u0.coeffs, f.coeffs, nu, t)
        for k, v in _norms(g, energy_density(c), alpha).items():
            diag[k][i] = v
        shells[i] = shell_norms_coeffs(g, c)
        if i == 0:
            diag["dissipation"][i] = 0.0
        else:
            h = t - times[i - 1]
            diag["dissipation"][i] = diag["dissipation"][i - 1] + nu * h * 0.5 * (diag["h1"][i] ** 2 + diag["h1"][i - 1] ** 2)
        diag["energy_rhs"][i] = diag["l2"][0] ** 2 + t * fn["h_minus1"] ** 2 / nu
        diag["energy_margin"][i] = diag["energy_rhs"][i] - diag["l2"][i] ** 2 - diag["dissipation"][i]
        if i % record_every == 0 or i == n - 1:
            snaps.append(u0.replace(c))
            snap_t.append(t)
    return Trajectory(g, float(alpha), times, diag, qs, shells, np.array(snap_t), snaps, fn, {"equation": "heat"})


# ---------------------------------------------------------------------------
# complex rays


@dataclass
class ComplexTrajectory:
    """Complexified Galerkin solution along ``t = s exp(i theta)``.

    ``diagnostics`` holds, at every ``s``: the complexified norms
    ``l2, h1, h_alpha1, h_alpha2`` (``sum |k|^{2a} |u_hat|^2`` on the complex
    coefficients) and ``dnorm_alpha1`` = exact ``d/ds ||u||_{H^{alpha+1}}^2``
    computed from the equation. ``blowup_s`` is the first ``s`` where the
    discrete system ran away (None if the ray completed).
    """

    grid: GridSpec
    theta: float
    alpha: float
    s: np.ndarray
    diagnostics: dict
    coeff_s: np.ndarray
    coeffs: list
    blowup_s: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.blowup_s is None

    def mirrored(self) -> list:
        """Coefficients mapped by ``u_hat(k) -> conj(u_hat(-k))``."""
        m = self.grid.mirror
        return [np.conj(c[:, m, :][:, :, m]) for c in self.coeffs]


def _galerkin_grid(u0: SpectralField, galerkin_modes: int | None) -> int:
    if galerkin_modes is None:
        return u0.grid.N
    M = math.isqrt(int(galerkin_modes))
    if M * M != int(galerkin_modes) or M % 2:
        raise ValueError("galerkin_modes must be N^2 for an even N")
    return M


def complex_ray_solve(
    u0: SpectralField,
    f: SpectralField,
    theta: float,
    s_max: float,
    galerkin_modes: int | None = None,
    dt: float = 1e-3,
    scheme: str = "IF-RK4",
    alpha: float = -0.5,
    record_every: int = 1,
    cfl: float = 0.5,
    norm_cap: float = 10.0,
) -> ComplexTrajectory:
    """Integrate the complexified Galerkin system along the ray of angle ``theta``.

    The field is restricted to ``galerkin_modes`` (= N^2, at most 32^2) modes
    before integration. The ray ends, with ``blowup_s`` recorded instead of
    an exception, once the L^2 norm exceeds ``norm_cap`` times
    ``max(||u0||, ||f||, 1)`` or the discrete system runs away. The cap marks
    the edge of the region where the norm stays bounded; beyond it the
    solution changes on the step scale and derivatives are not resolved.
    """
    if not abs(theta) < math.pi / 2:
        raise ValueError(f"|theta| must be < pi/2, got {theta}")
    if galerkin_modes is not None and galerkin_modes > 32 * 32:
        raise ValueError("galerkin_modes is capped at 32^2 for cost control")
    _require_nse_inputs(u0, f)
    M = _galerkin_grid(u0, galerkin_modes)
    if M != u0.grid.N:
        u0, f = regrid(u0, M), regrid(f, M)
    g = u0.grid
    cfg = StepperConfig(dt=dt, scheme=scheme, T_final=s_max, record_every=record_every, cfl=cfl, check_energy=False)
    omega = complex(math.cos(theta), math.sin(theta))
    if theta == 0:
        omega = 1.0 + 0.0j
    st = _IFStepper(g, f.coeffs, scheme, complex_mode=True)
    s_grid = cfg.step_times()
    n = s_grid.size
    w1 = g.sobolev_weights(alpha + 1)
    diag = {k: np.full(n, np.nan) for k in ("l2", "h1", "h_alpha1", "h_alpha2", "dnorm_alpha1")}
    u = np.array(u0.coeffs, dtype=complex)
    limit = norm_cap * max(math.sqrt(float(np.sum(energy_density(u)))), float(np.sqrt(np.sum(energy_density(f.coeffs)))), 1.0)
    coeffs, coeff_s = [u.copy()], [0.0]
    blowup = None

    def record(i, c, k1):
        e = energy_density(c)
        for k, v in _norms(g, e, alpha).items():
            diag[k][i] = v
        dudt = omega * (st.L * c + k1)
        diag["dnorm_alpha1"][i] = 2.0 * float(np.sum(w1 * (np.conj(c) * dudt).real))

    last = n
    for i in range(1, n):
        h = omega * (s_grid[i] - s_grid[i - 1])
        try:
            new, k1, _ = _advance(st, cfg, u, h, s_grid[i], limit)
        except BlowUpError:
            blowup = float(s_grid[i])
            last = i
            record(i - 1, u, st.rhs(u))
            break
        record(i - 1, u, k1)
        u = new
        u[:, 0, 0] = 0.0
        if i % record_every == 0 or i == n - 1:
            coeffs.append(u.copy())
            coeff_s.append(float(s_grid[i]))
    else:
        record(n - 1, u, st.rhs(u))
    s_out = s_grid[:last]
    diag = {k: v[:last] for k, v in diag.items()}
    return ComplexTrajectory(
        grid=g,
        theta=float(theta),
        alpha=float(alpha),
        s=s_out,
        diagnostics=diag,
        coeff_s=np.array(coeff_s),
        coeffs=coeffs,
        blowup_s=blowup,
        meta={"scheme": scheme, "dt": dt, "galerkin_N": g.N, "force_h_alpha": norm_from_coeffs(g, f.coeffs, alpha)},
    )


def complex_endpoint(u0: SpectralField, f: SpectralField, z: complex, ds: float, scheme: str = "IF-RK4", cfl: float = 0.5, norm_cap: float = 10.0) -> np.ndarray | None:
    """Complexified solution at the point ``z`` reached along the straight ray; None on blow-up."""
    r = abs(z)
    if r == 0:
        return np.array(u0.coeffs, dtype=complex)
    n = max(1, math.ceil(r / ds - 1e-9))
    theta = math.atan2(z.imag, z.real)
    ct = complex_ray_solve(u0, f, theta, r, dt=r / n, scheme=scheme, cfl=cfl, record_every=n, norm_cap=norm_cap)
    if not ct.completed:
        return None
    return ct.coeffs[-1]


def circle_points(center_t: float, r: float, M: int) -> np.ndarray:
    phi = 2 * np.pi * np.arange(M) / M
    return center_t + r * np.exp(1j * phi)


def heat_circle_samples(u0: SpectralField, f: SpectralField, nu: float, center_t: float, r: float, M: int = 32) -> np.ndarray:
    """Exact heat solution at ``M`` points of the circle ``|z - center_t| = r``."""
    g = u0.grid
    return np.stack([heat_coeffs(g, u0.coeffs, f.coeffs, nu, z) for z in circle_points(center_t, r, M)])


def nse_circle_samples(u0: SpectralField, f: SpectralField, center_t: float, r: float, M: int = 16, ds: float = 1e-3, scheme: str = "IF-RK4"):
    """Complexified NSE solution on the circle; entries are None where a ray blew up."""
    return [complex_endpoint(u0, f, z, ds, scheme) for z in circle_points(center_t, r, M)]


def contour_derivative(samples: np.ndarray, r: float) -> np.ndarray:
    """Trapezoid rule for ``(2 pi i)^{-1} \\oint u(z) / (z - t)^2 dz`` on a circle of radius ``r``."""
    samples = np.asarray(samples)
    M = samples.shape[0]
    phi = 2 * np.pi * np.arange(M) / M
    w = np.exp(-1j * phi) / (M * r)
    return np.tensordot(w, samples, axes=(0, 0))


def cauchy_derivative_bound(
    samples,
    center_t: float,
    r: float,
    grid: GridSpec,
    alpha: float = -0.5,
    reference_derivative: np.ndarray | None = None,
    fd_derivative: np.ndarray | None = None,
    domain_T: float | None = None,
) -> VerificationReport:
    """Cauchy estimate ``||u_t(t)||_{H^{alpha+1}} <= M_sup / r`` from circle samples.

    ``samples`` is a sequence of ``M >= 16`` coefficient arrays at
    ``center_t + r exp(2 pi i j / M)``; None entries mark rays that blew up.
    A circle that leaves the right half-plane (or ``[0, domain_T]`` in real
    part), or any missing sample, produces a failing report with the reason in
    ``extra["domain_error"]``.
    """
    samples = list(samples)
    M = len(samples)
    if M < 16:
        raise ValueError(f"need at least 16 circle samples, got {M}")
    if r <= 0:
        raise ValueError("radius must be positive")
    reason = None
    if center_t - r <= 0:
        reason = "circle crosses the imaginary axis"
    elif domain_T is not None and center_t + r > domain_T:
        reason = "circle extends past the computed horizon"
    elif any(s is None for s in samples):
        reason = "complex ray blew up before reaching the circle"
    extra = {"r": float(r), "M": M, "domain_error": reason}
    if reason is not None:
        return VerificationReport("cauchy_derivative", [center_t], [np.nan], [np.nan], {"alpha": alpha}, extra=extra)
    arr = np.stack(samples)
    w = grid.sobolev_weights(alpha + 1)
    norms = np.array([math.sqrt(float(np.sum(w * energy_density(s)))) for s in arr])
    M_sup = float(norms.max())
    ut = contour_derivative(arr, r)
    lhs = math.sqrt(float(np.sum(w * energy_density(ut))))
    scale = max(lhs, np.finfo(float).tiny)
    if reference_derivative is not None:
        extra["rel_error_reference"] = math.sqrt(float(np.sum(w * energy_density(ut - reference_derivative)))) / scale
    if fd_derivative is not None:
        extra["rel_error_fd"] = math.sqrt(float(np.sum(w * energy_density(ut - fd_derivative)))) / scale
    extra["M_sup"] = M_sup
    return VerificationReport("cauchy_derivative", [center_t], [lhs], [M_sup / r], {"alpha": alpha}, extra=extra)


def real_axis_fd_derivative(u0: SpectralField, f: SpectralField, t: float, h: float, dt: float, scheme: str = "IF-RK4") -> np.ndarray:
    """Central difference ``(u(t+h) - u(t-h)) / 2h`` from two real-axis solves."""
    plus = complex_endpoint(u0, f, complex(t + h), dt, scheme)
    minus = complex_endpoint(u0, f, complex(t - h), dt, scheme)
    if plus is None or minus is None:
        raise BlowUpError(t + h)
    return (plus - minus) / (2 * h)
