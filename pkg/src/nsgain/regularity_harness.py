"""
Singular forcing, resolution-sweep experiments and inequality-chain checks
evaluated along computed trajectories.

The inequalities carry unspecified constants ``C``. Each check can either
take ``C`` as given or report the smallest ``C >= 0`` that makes it hold
(``required_C``); fitting takes the maximum over a training family and the
same value is then checked on held-out runs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InconsistencyError, MissingInputError
from .evolution import ComplexTrajectory, StepperConfig, Trajectory, nse_solve
from .littlewood_paley import lam, shell_floor, shell_norms_coeffs
from .quadrature import exp_kernel_cumulative, power_kernel_cumulative, trapezoid_cumulative, volterra_blowup_time
from .report import VerificationReport
from .spectral_core import (
    GridSpec,
    SpectralField,
    norm_from_coeffs,
    random_solenoidal,
    single_mode,
    solenoidal_from_amplitude,
    taylor_green,
)

FIT_SLACK = 1e-9


def linear_tightness(lhs, linear, times=None, start=None) -> float:
    """``max_t lhs / linear``: how close the constant-free part of a bound comes to binding.

    Times equal to ``start``, where the bounds hold with equality by
    construction, are left out.
    """
    lhs = np.asarray(lhs, dtype=float)
    linear = np.broadcast_to(np.asarray(linear, dtype=float), lhs.shape)
    pos = linear > 0
    if times is not None and start is not None:
        pos = pos & (np.asarray(times, dtype=float) > start)
    if not np.any(pos):
        return float("nan")
    return float(np.max(lhs[pos] / linear[pos]))


def fit_constant(required) -> float:
    """Smallest admissible constant from per-time requirements (0 if none binds)."""
    r = np.asarray(required, dtype=float)
    r = r[~np.isnan(r)]
    if r.size == 0:
        return 0.0
    return max(0.0, float(r.max())) * (1.0 + FIT_SLACK)


# ---------------------------------------------------------------------------
# forcing and initial data

PROFILES = ("power_tail", "critical_log")


@dataclass(frozen=True)
class ForceSpec:
    """Random-phase divergence-free force with a prescribed spectral decay.

    ``power_tail``: ``|f_hat(k)| = amplitude |k|^{-sigma}``, ``sigma = alpha + 1 + delta``,
    so the H^alpha norm converges under refinement and H^{alpha + delta} does not.
    ``critical_log``: ``|f_hat(k)| = amplitude / log(e + |k|)``, in H^{-1} but in
    no H^{-1 + eps}.
    Modes fill the dealiased band ``|k| < dealias_fraction N / 2``; phases
    depend only on ``(seed, k)`` so different ``N`` share their common modes.
    """

    alpha: float = -1.0
    profile: str = "critical_log"
    delta: float = 0.25
    seed: int = 0
    N: int = 64
    amplitude: float = 1.0
    stream: int = 101

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if not -1.0 <= self.alpha <= 0.0:
            raise ValueError(f"alpha must lie in [-1, 0], got {self.alpha}")
        if self.profile == "power_tail" and not self.delta > 0:
            raise ValueError(
                f"power_tail needs sigma > alpha + 1 for a convergent H^alpha norm; "
                f"delta = {self.delta} gives sigma = {self.sigma}"
            )
        if self.profile == "critical_log" and self.alpha != -1.0:
            raise ValueError("critical_log lies in H^-1 only; its H^alpha norm diverges for alpha > -1")

    @property
    def sigma(self) -> float | None:
        return self.alpha + 1.0 + self.delta if self.profile == "power_tail" else None

    def amplitude_profile(self, k: np.ndarray) -> np.ndarray:
        if self.profile == "power_tail":
            return self.amplitude * k ** (-self.sigma)
        return self.amplitude / np.log(np.e + k)


def synthesize_force(spec: ForceSpec, nu: float = 1.0, dealias_fraction: float = 2.0 / 3.0) -> SpectralField:
    grid = GridSpec(int(spec.N), nu, dealias_fraction)
    k = grid.kmag
    sel = (k > 0) & grid.dealias_mask
    amp = np.zeros_like(k)
    if spec.amplitude != 0:
        amp[sel] = spec.amplitude_profile(k[sel])
    return solenoidal_from_amplitude(grid, amp, spec.seed, spec.stream)


def force_metadata(spec: ForceSpec, f: SpectralField, extra_exponents=()) -> dict:
    """Norms and truncation data that make resolution sweeps comparable."""
    g = f.grid
    live = np.any(f.coeffs != 0, axis=0)
    exps = sorted({-1.0, float(spec.alpha), *map(float, extra_exponents)})
    return {
        "spec": asdict(spec),
        "sigma": spec.sigma,
        "truncation_radius": g.band_radius,
        "max_mode": float(g.kmag[live].max()) if np.any(live) else 0.0,
        "n_modes": int(live.sum()),
        "norms": {repr(s): norm_from_coeffs(g, f.coeffs, s) for s in exps},
    }


INITIAL_KINDS = ("random", "taylor_green", "single_mode", "zero")


@dataclass(frozen=True)
class InitialSpec:
    """Initial velocity: random-phase ``|u_hat| = amplitude |k|^{-slope}`` or a named flow."""

    kind: str = "random"
    slope: float = 3.0
    amplitude: float = 1.0
    seed: int = 0
    kmax: float | None = None
    mode: tuple = (1, 0)
    stream: int = 202

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ValueError(f"initial kind must be one of {INITIAL_KINDS}, got {self.kind!r}")


def synthesize_initial(spec: InitialSpec, grid: GridSpec) -> SpectralField:
    if spec.kind == "zero" or spec.amplitude == 0:
        return SpectralField.zeros(grid)
    if spec.kind == "taylor_green":
        return taylor_green(grid, spec.amplitude)
    if spec.kind == "single_mode":
        return single_mode(grid, spec.mode, spec.amplitude)
    return random_solenoidal(grid, spec.slope, spec.seed, spec.amplitude, kmax=spec.kmax, stream=spec.stream)


# ---------------------------------------------------------------------------
# good times


def _force_norm(traj: Trajectory, f: SpectralField | None, s: float) -> float:
    if f is not None:
        return norm_from_coeffs(f.grid, f.coeffs, s)
    key = {-1.0: "h_minus1", 0.0: "l2"}.get(float(s))
    if key is None and float(s) == traj.alpha:
        key = "h_alpha"
    if key is None or key not in traj.force_norms:
        raise MissingInputError(f"trajectory lacks the force H^{s} norm; pass the force field")
    return traj.force_norms[key]


def good_time_bound(traj: Trajectory, eps: float, f: SpectralField | None = None) -> float:
    """``(2/eps)(||u0||^2 / nu + eps ||f||_{H^-1}^2 / nu^2)``, the squared H^1 level."""
    nu = traj.nu
    u0 = traj.diagnostics["l2"][0]
    fm1 = _force_norm(traj, f, -1.0)
    return (2.0 / eps) * (u0**2 / nu + eps * fm1**2 / nu**2)


def good_time_select(traj: Trajectory, t: float, eps: float, f: SpectralField | None = None) -> float:
    """A recorded time in ``[t - eps, t]`` where ``||u||_{H^1}^2`` is below the Chebyshev level.

    Among qualifying times the one with the smallest H^1 norm is returned.
    If no recorded time qualifies the stored diagnostics contradict the
    energy inequality and InconsistencyError is raised.
    """
    if not 0 < eps <= t:
        raise ValueError("need 0 < eps <= t")
    times = traj.times
    tol = 1e-12 * max(1.0, t)
    if times[0] > t - eps + tol or times[-1] < t - tol:
        raise MissingInputError(f"trajectory covers [{times[0]}, {times[-1]}], need [{t - eps}, {t}]")
    window = (times >= t - eps - tol) & (times <= t + tol)
    bound = good_time_bound(traj, eps, f)
    h1sq = traj.diagnostics["h1"] ** 2
    ok = window & (h1sq <= bound)
    if not np.any(ok):
        margins = traj.diagnostics["energy_margin"][window]
        raise InconsistencyError(
            f"no recorded time in [{t - eps}, {t}] has ||u||_H1^2 <= {bound:.6g}; "
            f"min energy margin in window {margins.min():.3e}"
        )
    idx = np.flatnonzero(ok)
    return float(times[idx[np.argmin(h1sq[idx])]])


# ---------------------------------------------------------------------------
# Gronwall chain


def _require_alpha(traj, alpha):
    if not np.isclose(traj.alpha, alpha):
        raise MissingInputError(
            f"trajectory recorded H^(alpha+1) for alpha={traj.alpha}; rerun the solve with alpha={alpha}"
        )


def _gronwall_parts(traj: Trajectory, f, alpha, t0, t_grid):
    _require_alpha(traj, alpha)
    nu = traj.nu
    times = traj.times
    i0 = traj.index_of(t0)
    if t_grid is None:
        idx = np.arange(i0, times.size)
    else:
        idx = np.array([traj.index_of(t) for t in np.atleast_1d(t_grid)])
        if np.any(idx < i0):
            raise ValueError("every checked time must be >= t0")
    fa = _force_norm(traj, f, alpha)
    h1sq = traj.diagnostics["h1"] ** 2
    I = trapezoid_cumulative(times[i0:], h1sq[i0:])
    I = I[idx - i0]
    lhs = traj.diagnostics["h_alpha1"][idx] ** 2
    pre = traj.diagnostics["h_alpha1"][i0] ** 2 + (2.0 / nu) * fa**2 * (times[idx] - times[i0])
    return times[idx], lhs, pre, I, nu


def gronwall_required_C(traj: Trajectory, alpha: float, t0: float, t_grid=None, f: SpectralField | None = None) -> np.ndarray:
    t, lhs, pre, I, nu = _gronwall_parts(traj, f, alpha, t0, t_grid)
    req = np.zeros_like(lhs)
    over = lhs > pre
    with np.errstate(divide="ignore"):
        req[over] = np.where(I[over] > 0, nu * np.log(lhs[over] / pre[over]) / np.where(I[over] > 0, I[over], 1), np.inf)
    return req


def fit_gronwall_constant(trajs, alpha: float, t0: float, f_list=None) -> float:
    f_list = f_list or [None] * len(trajs)
    return fit_constant(np.concatenate([gronwall_required_C(tr, alpha, t0, f=f) for tr, f in zip(trajs, f_list)]))


def gronwall_chain_check(traj: Trajectory, f: SpectralField | None, alpha: float, t0: float, t_grid=None, C: float | None = None, provenance=None) -> VerificationReport:
    """``||u(t)||^2_{H^{a+1}} <= (||u(t0)||^2_{H^{a+1}} + (2/nu)||f||^2_{H^a}(t - t0)) exp((C/nu) int ||u||_{H^1}^2)``."""
    t, lhs, pre, I, nu = _gronwall_parts(traj, f, alpha, t0, t_grid)
    req = gronwall_required_C(traj, alpha, t0, t_grid, f)
    if C is None:
        C = fit_constant(req)
    rhs = pre * np.exp(C * I / nu)
    return VerificationReport(
        "gronwall_chain",
        t,
        lhs,
        rhs,
        constants={"C": float(C), "required_C": float(np.max(req)) if req.size else 0.0, "alpha": float(alpha), "t0": float(t0)},
        provenance=provenance or {},
        extra={"prefactor": pre, "h1_integral": I, "linear_tightness": linear_tightness(lhs, pre, t, t0)},
    )


# ---------------------------------------------------------------------------
# the dyadic cutoff Q(s)


def hoelder_exponents(p: float) -> tuple[Fraction, Fraction]:
    """``(rho, r)`` from ``p = (rho - 2) / (2 rho)`` and ``1/r + 1/rho = 1/2``."""
    p = Fraction(p).limit_denominator(10**6)
    rho = Fraction(2) / (1 - 2 * p)
    r = 1 / (Fraction(1, 2) - 1 / rho)
    return rho, r


def kernel_exponent(p, gamma) -> Fraction:
    """Exponent ``(2p + gamma) / (2 - gamma)`` of the singular time kernel."""
    p = Fraction(p).limit_denominator(10**6)
    gamma = Fraction(gamma).limit_denominator(10**6)
    return (2 * p + gamma) / (2 - gamma)


def compute_Q0(gamma: float, q_floor: int = 2) -> int:
    """Smallest ``q >= q_floor`` with ``ln lambda_q <= lambda_q^gamma`` for every larger q.

    The floor 2 encodes the requirement ``Q0 > 1``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    # beyond q_hi, 2^{q gamma} exceeds q ln 2 for good
    q_hi = int(math.ceil(64.0 / gamma)) + 64
    good = [q * math.log(2.0) <= 2.0 ** (q * gamma) for q in range(q_hi + 1)]
    Q0 = q_hi
    while Q0 > 0 and good[Q0 - 1]:
        Q0 -= 1
    return max(Q0, q_floor)


@dataclass(frozen=True)
class QLambda:
    Q: int
    Lambda: float
    Q0: int
    defining_ok: bool
    derived_applicable: bool
    derived_ok: bool | None
    derived_lhs: float
    derived_rhs: float


def compute_Q_Lambda(s: float, t: float, p: float = 0.25, gamma: float = 0.5, nu: float = 1.0) -> QLambda:
    """``Q(s) = min{q >= Q0 : exp(nu lambda_q^2 (s - t)) <= lambda_q^{-2p-1}}`` and ``Lambda = lambda_Q``.

    The consequence ``Lambda^{2 - gamma} <= 8 (p + 1/2) / (nu (t - s))`` is
    only implied when ``Q > Q0`` (it uses the failure of the condition at
    ``Q - 1``); at ``Q = Q0`` it is reported but not applicable.
    """
    if not s < t:
        raise ValueError("need s < t")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if not 0 < gamma < 2:
        raise ValueError("gamma must lie in (0, 2)")
    dt = t - s
    Q0 = compute_Q0(gamma)

    def holds(q):
        lq = lam(q)
        return -nu * lq * lq * dt <= -(2 * p + 1) * math.log(lq)

    q = Q0
    while not holds(q):
        q += 1
    L = lam(q)
    d_lhs = L ** (2 - gamma)
    d_rhs = 8 * (p + 0.5) / (nu * dt)
    applicable = q > Q0
    return QLambda(q, L, Q0, holds(q), applicable, (d_lhs <= d_rhs) if applicable else None, d_lhs, d_rhs)


# ---------------------------------------------------------------------------
# shell Duhamel chain


def _shell_parts(traj: Trajectory, f: SpectralField, q: int, p: float, nu: float):
    if q not in traj.shell_qs:
        raise MissingInputError(f"trajectory has no shell diagnostics for q={q} (recorded {traj.shell_qs})")
    iq = traj.shell_qs.index(q)
    g = traj.grid
    m = shell_floor(g, q)
    t = traj.times
    lhs = traj.shell_norms[:, iq] ** 2
    if not np.isfinite(m):
        z = np.zeros_like(t)
        return t, lhs, z, z, m
    fq2 = shell_norms_coeffs(f.grid, f.coeffs)[iq] ** 2
    rate = nu * m * m
    e = np.exp(-rate * t)
    linear = e * lhs[0] + (2.0 / nu**2) * fq2 * (-np.expm1(-rate * t)) / m**4
    h1_4 = traj.diagnostics["h1"] ** 4
    tail = (lam(q) ** (2 * p - 2) / nu) * exp_kernel_cumulative(t, h1_4, rate)
    return t, lhs, linear, tail, m


def shell_required_C(traj, f, q, p=0.25, nu=None) -> np.ndarray:
    nu = traj.nu if nu is None else nu
    t, lhs, linear, tail, _ = _shell_parts(traj, f, q, p, nu)
    req = np.zeros_like(lhs)
    over = lhs > linear
    with np.errstate(divide="ignore", invalid="ignore"):
        req[over] = np.where(tail[over] > 0, (lhs[over] - linear[over]) / tail[over], np.inf)
    return req


def shell_duhamel_check(traj: Trajectory, f: SpectralField, q: int, p: float = 0.25, nu: float | None = None, C: float | None = None, provenance=None) -> VerificationReport:
    """Per-shell Duhamel bound with the nonlinear memory tail.

    ``||u_q(t)||^2 <= e^{-nu m_q^2 t}||u_q(0)||^2 + (2/nu^2) m_q^{-4}||f_q||^2 (1 - e^{-nu m_q^2 t})
    + (C/nu) int_0^t e^{-nu m_q^2 (t-s)} lambda_q^{2p-2} ||u(s)||_{H^1}^4 ds``
    with ``m_q`` the smallest grid ``|k|`` in the support of phi_q.
    """
    nu = traj.nu if nu is None else nu
    t, lhs, linear, tail, m = _shell_parts(traj, f, q, p, nu)
    req = shell_required_C(traj, f, q, p, nu)
    if C is None:
        C = fit_constant(req)
    return VerificationReport(
        "shell_duhamel",
        t,
        lhs,
        linear + C * tail,
        constants={"C": float(C), "required_C": float(req.max()), "q": int(q), "p": float(p), "shell_floor": float(m)},
        provenance=provenance or {},
        extra={"linear": linear, "tail": tail, "linear_tightness": linear_tightness(lhs, linear, t, 0.0)},
    )


def shell_duhamel_family(traj: Trajectory, f: SpectralField, qs, p: float = 0.25, C: float | None = None) -> dict:
    """Reports for every requested shell present in the trajectory, sharing one C."""
    present = [q for q in qs if q in traj.shell_qs]
    missing = [q for q in qs if q not in traj.shell_qs]
    if C is None:
        C = fit_constant(np.concatenate([shell_required_C(traj, f, q, p) for q in present])) if present else 0.0
    reports = {q: shell_duhamel_check(traj, f, q, p, C=C) for q in present}
    return {"C": C, "reports": reports, "missing": missing}


def fit_shell_constant(trajs, forces, qs, p: float = 0.25) -> float:
    req = [shell_required_C(tr, f, q, p) for tr, f in zip(trajs, forces) for q in qs if q in tr.shell_qs]
    return fit_constant(np.concatenate(req)) if req else 0.0


# ---------------------------------------------------------------------------
# H^1 persistence

KERNEL_EXPONENT = kernel_exponent(Fraction(1, 4), Fraction(1, 2))


def kernel_integral(t, g, nu: float, exponent: float = float(KERNEL_EXPONENT)) -> np.ndarray:
    """``int_0^{t_n} ((nu (t_n - s))^{-exponent} + 1) g(s) ds`` at every sample."""
    return nu ** (-exponent) * power_kernel_cumulative(t, g, exponent) + trapezoid_cumulative(t, g)


def _h1_parts(traj, f, nu):
    t = traj.times
    h1 = traj.diagnostics["h1"]
    base = h1[0] ** 2 + (2.0 / nu**2) * _force_norm(traj, f, -1.0) ** 2
    J = kernel_integral(t, h1**4, nu) / nu
    return t, h1**2, base, J


def h1_required_C(traj: Trajectory, f: SpectralField | None = None, nu: float | None = None) -> np.ndarray:
    nu = traj.nu if nu is None else nu
    t, lhs, base, J = _h1_parts(traj, f, nu)
    req = np.zeros_like(lhs)
    over = lhs > base
    with np.errstate(divide="ignore", invalid="ignore"):
        req[over] = np.where(J[over] > 0, (lhs[over] - base) / J[over], np.inf)
    return req


def fit_h1_constant(trajs, forces=None) -> float:
    forces = forces or [None] * len(trajs)
    return fit_constant(np.concatenate([h1_required_C(tr, f) for tr, f in zip(trajs, forces)]))


def h1_persistence_check(traj: Trajectory, f: SpectralField | None, nu: float | None = None, C: float | None = None, horizon_T: float | None = None, provenance=None) -> VerificationReport:
    """``||u(t)||_{H^1}^2 <= ||u0||_{H^1}^2 + (2/nu^2)||f||_{H^-1}^2 + (C/nu) int ((nu(t-s))^{-2/3} + 1)||u||_{H^1}^4``.

    ``extra["horizon"]`` is the time at which the comparison equation with
    the same constants stops having a solution (``inf`` if ``C = 0``).
    """
    nu = traj.nu if nu is None else nu
    t, lhs, base, J = _h1_parts(traj, f, nu)
    req = h1_required_C(traj, f, nu)
    if C is None:
        C = fit_constant(req)
    T_h = horizon_T if horizon_T is not None else 10.0 * float(t[-1])
    horizon, _, _ = volterra_blowup_time(base, C, nu, T_h, n=400)
    return VerificationReport(
        "h1_persistence",
        t,
        lhs,
        base + C * J,
        constants={"C": float(C), "required_C": float(req.max()), "kernel_exponent": str(KERNEL_EXPONENT)},
        provenance=provenance or {},
        extra={
            "base": base,
            "kernel_integral": J,
            "horizon": horizon,
            "horizon_search_T": T_h,
            "linear_tightness": linear_tightness(lhs, base, t, 0.0),
        },
    )


# ---------------------------------------------------------------------------
# Riccati inequality along complex rays


def riccati_required_C(ctraj: ComplexTrajectory, alpha: float, theta: float, nu: float, fd_tol: float = 1e-3) -> tuple:
    """Per-s required constant plus the LHS and forcing term.

    The derivative comes from the equation itself; a second-order finite
    difference of the recorded norm is the noise check. When the two
    disagree beyond ``fd_tol`` (relative to the LHS scale) the sampling is
    too coarse and InconsistencyError asks for a denser run.
    """
    if not np.isclose(ctraj.alpha, alpha):
        raise MissingInputError(f"complex trajectory recorded alpha={ctraj.alpha}, not {alpha}")
    if not np.isclose(ctraj.theta, theta):
        raise ValueError(f"trajectory was computed on theta={ctraj.theta}, not {theta}")
    d = ctraj.diagnostics
    s = ctraj.s
    c = nu * math.cos(theta)
    a1sq = d["h_alpha1"] ** 2
    lhs = d["dnorm_alpha1"] + c * d["h_alpha2"] ** 2
    scale = max(float(np.max(np.abs(d["dnorm_alpha1"]))), float(np.max(c * d["h_alpha2"] ** 2)), np.finfo(float).tiny)
    noise = 0.0
    if s.size >= 3:
        fd = np.gradient(a1sq, s)
        noise = float(np.max(np.abs(fd - d["dnorm_alpha1"])[1:-1])) / scale
        if noise > fd_tol:
            raise InconsistencyError(
                f"finite-difference derivative disagrees by {noise:.2e} (tolerance {fd_tol:.1e}); "
                "use denser s-sampling (smaller dt)"
            )
    fa = ctraj.meta["force_h_alpha"]
    forcing = (2.0 / c) * fa**2
    nl = c ** (-(2 * alpha + 3)) * d["h_alpha1"] ** (2 * alpha + 6)
    req = np.zeros_like(lhs)
    over = lhs > forcing
    with np.errstate(divide="ignore", invalid="ignore"):
        req[over] = np.where(nl[over] > 0, (lhs[over] - forcing) / nl[over], np.inf)
    return req, lhs, forcing, nl, noise


def riccati_check(ctraj: ComplexTrajectory, alpha: float, theta: float, nu: float, C: float | None = None, fd_tol: float = 1e-3, provenance=None) -> VerificationReport:
    """``d/ds||u||^2_{H^{a+1}} + nu cos(theta)||u||^2_{H^{a+2}} <= (2/(nu cos theta))||f||^2_{H^a} + C (nu cos theta)^{-(2a+3)}||u||^{2a+6}_{H^{a+1}}``."""
    req, lhs, forcing, nl, noise = riccati_required_C(ctraj, alpha, theta, nu, fd_tol)
    if C is None:
        C = fit_constant(req)
    return VerificationReport(
        "riccati",
        ctraj.s,
        lhs,
        forcing + C * nl,
        constants={"C": float(C), "required_C": float(req.max()), "theta": float(theta), "alpha": float(alpha)},
        provenance=provenance or {},
        extra={"fd_noise": noise, "blowup_s": ctraj.blowup_s},
    )


# ---------------------------------------------------------------------------
# derivative-gain experiment


@dataclass
class GainReport:
    alpha: float
    norm_exponent: float
    horizon: float
    resolutions: list
    sup_norms: dict
    force_norms: dict
    supercritical_exponent: float
    stable_tol: float = 0.10
    growth_min: float = 0.25
    meta: dict = field(default_factory=dict)

    def _rel(self, d):
        a, b = d[self.resolutions[-2]], d[self.resolutions[-1]]
        return (b - a) / a if a > 0 else float("inf") if b > 0 else 0.0

    @property
    def sup_change(self) -> float:
        return abs(self._rel(self.sup_norms))

    def force_growth(self, exponent: float) -> float:
        return self._rel({N: self.force_norms[N][repr(float(exponent))] for N in self.resolutions})

    @property
    def stable(self) -> bool:
        return self.sup_change < self.stable_tol

    @property
    def force_diverges(self) -> bool:
        return self.force_growth(self.supercritical_exponent) >= self.growth_min

    @property
    def gain_signal(self) -> bool:
        return self.stable and self.force_diverges

    def to_dict(self) -> dict:
        exps = sorted(next(iter(self.force_norms.values())).keys(), key=float)
        return {
            "alpha": self.alpha,
            "norm_exponent": self.norm_exponent,
            "horizon": self.horizon,
            "resolutions": self.resolutions,
            "sup_norms": {str(N): v for N, v in self.sup_norms.items()},
            "force_norms": {str(N): v for N, v in self.force_norms.items()},
            "sup_change": self.sup_change,
            "force_growth": {e: self.force_growth(float(e)) for e in exps},
            "supercritical_exponent": self.supercritical_exponent,
            "stable": self.stable,
            "force_diverges": self.force_diverges,
            "gain_signal": self.gain_signal,
            "meta": self.meta,
        }


LADDER_OFFSETS = (0.0, 0.05, 0.1, 0.25, 0.5, 1.0)


def force_ladder(alpha: float) -> list[float]:
    """Force exponents reported by the gain experiment: the target and above it."""
    return [alpha + d for d in LADDER_OFFSETS]


def derivative_gain_experiment(
    alpha: float,
    spec: ForceSpec,
    resolutions,
    T: float,
    nu: float = 1.0,
    dt: float | None = None,
    initial: InitialSpec | None = None,
    scheme: str = "IF-RK4",
) -> GainReport:
    """Sup norm of the solution two orders above the force, across resolutions.

    For ``alpha > -1`` the tracked norm is ``H^{alpha+2}`` on ``[0, T]``; for
    ``alpha = -1`` it is ``H^1`` on ``[0, T]`` (use a short horizon). The
    force's norms on ``force_ladder(alpha)`` are reported at each resolution;
    the divergence flag uses the exponent ``alpha + 1``.
    """
    if not -1.0 <= alpha < 0.0:
        raise ValueError("alpha must lie in [-1, 0)")
    resolutions = sorted(int(N) for N in resolutions)
    if len(resolutions) < 2:
        raise ValueError("need at least two resolutions")
    initial = initial or InitialSpec(slope=alpha + 4.0, amplitude=1.0, seed=spec.seed)
    dt = dt if dt is not None else min(T / 50.0, 0.01)
    ladder = force_ladder(alpha)
    sups, fnorms, meta = {}, {}, {}
    for N in resolutions:
        fs = ForceSpec(**{**asdict(spec), "N": N, "alpha": spec.alpha})
        f = synthesize_force(fs, nu)
        grid = f.grid
        u0 = synthesize_initial(initial, grid)
        traj = nse_solve(u0, f, StepperConfig(dt=dt, scheme=scheme, T_final=T, record_every=10**9), alpha=alpha)
        sups[N] = float(traj.diagnostics["h_alpha2"].max())
        fnorms[N] = {repr(float(s)): norm_from_coeffs(grid, f.coeffs, s) for s in ladder}
        meta[str(N)] = {"energy_C": traj.meta["energy_C"], "substeps": traj.meta["substeps"]}
    return GainReport(
        alpha=float(alpha),
        norm_exponent=alpha + 2.0,
        horizon=float(T),
        resolutions=resolutions,
        sup_norms=sups,
        force_norms=fnorms,
        supercritical_exponent=alpha + 1.0,
        meta={"nu": nu, "dt": dt, "scheme": scheme, "initial": asdict(initial), "force": asdict(spec), "runs": meta},
    )
