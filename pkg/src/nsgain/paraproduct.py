"""
Bony trisection of the trilinear form int (u.grad) w . v dx and an empirical
check of the negative-norm estimate for B(u, u).

Index classes over shell triples ``(p, q, r)`` of ``(u, w, v)``, assigned in
priority order so the three classes partition all triples exactly:

    I   : |p - q| <= 2  and  r <= min(p, q) + 1
    II  : |p - r| <= 2  and  q <  min(p, r) - 1
    III : every remaining triple (the high-high pattern |q - r| <= 2 with
          p well below, plus the ties the first two classes leave over).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFieldError, FieldValidationError
from .littlewood_paley import shell_indices, shell_multipliers
from .spectral_core import (
    GridSpec,
    SpectralField,
    advect_real,
    check_dealiasing,
    nonlinear_term,
    norm_from_coeffs,
    pairing_coeffs,
    random_solenoidal,
    sobolev_norm,
)


def _check_inputs(u: SpectralField, *others: SpectralField):
    for o in others:
        if o.grid != u.grid:
            raise FieldValidationError("fields live on different grids")
    check_dealiasing(u.grid)
    if not u.is_solenoidal():
        raise FieldValidationError("the advecting field u must be divergence-free")


def trilinear_form(u: SpectralField, w: SpectralField, v: SpectralField) -> float:
    """``int (u.grad) w . v`` (normalised measure), exact on the dealiased band.

    All three fields are restricted to the dealiased band before the product,
    which makes the quadrature exact for band-limited inputs.
    """
    _check_inputs(u, w, v)
    g = advect_real(u.grid, u.coeffs, w.coeffs)
    return pairing_coeffs(g, v.coeffs * u.grid.dealias_mask)


def triple_class(p: int, q: int, r: int) -> int:
    """Class label 1, 2 or 3 of the shell triple (p, q, r)."""
    if abs(p - q) <= 2 and r <= min(p, q) + 1:
        return 1
    if abs(p - r) <= 2 and q < min(p, r) - 1:
        return 2
    return 3


@dataclass(frozen=True)
class TrisectionResult:
    term_I: float
    term_II: float
    term_III: float
    total_direct: float
    qs: tuple = ()
    tensor: np.ndarray | None = field(default=None, repr=False)

    @property
    def total_split(self) -> float:
        return self.term_I + self.term_II + self.term_III

    @property
    def reconstruction_error(self) -> float:
        return abs(self.total_split - self.total_direct)


def bony_trisect(u: SpectralField, w: SpectralField, v: SpectralField) -> TrisectionResult:
    """Split the trilinear form over shell triples into the classes I, II, III."""
    _check_inputs(u, w, v)
    g = u.grid
    mult = shell_multipliers(g)
    qs = shell_indices(g.N)
    n = len(qs)
    vm = v.coeffs * g.dealias_mask
    u_sh = [u.coeffs * mult[i] for i in range(n)]
    w_sh = [w.coeffs * mult[i] for i in range(n)]
    v_sh = [vm * mult[i] for i in range(n)]
    live_u = [bool(np.any(c)) for c in u_sh]
    live_w = [bool(np.any(c)) for c in w_sh]
    live_v = [bool(np.any(c)) for c in v_sh]
    T = np.zeros((n, n, n))
    for i in range(n):
        if not live_u[i]:
            continue
        for j in range(n):
            if not live_w[j]:
                continue
            prod = advect_real(g, u_sh[i], w_sh[j])
            for k in range(n):
                if live_v[k]:
                    T[i, j, k] = pairing_coeffs(prod, v_sh[k])
    sums = {1: 0.0, 2: 0.0, 3: 0.0}
    for i, p in enumerate(qs):
        for j, q in enumerate(qs):
            for k, r in enumerate(qs):
                if T[i, j, k] != 0.0:
                    sums[triple_class(p, q, r)] += T[i, j, k]
    total = pairing_coeffs(advect_real(g, u.coeffs, w.coeffs), vm)
    return TrisectionResult(sums[1], sums[2], sums[3], total, tuple(qs), T)


def b_negative_norm(u: SpectralField, beta: float) -> float:
    """``||B(u,u)||_{H^{-beta}}`` evaluated directly."""
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    return sobolev_norm(nonlinear_term(u), -beta)


# ---------------------------------------------------------------------------
# ensemble estimate of the B(u,u) negative-norm constant

ENSEMBLE_SLOPES = (1.0, 2.0)
_DEGENERATE = 1e-200


@dataclass
class EstimateEnsembleReport:
    beta: float
    samples: int
    max_ratio: float
    mean_ratio: float
    per_resolution: dict

    @property
    def resolutions(self) -> list:
        return sorted(self.per_resolution)

    @property
    def growth(self) -> float:
        """max_ratio at the finest resolution over max_ratio at the coarsest."""
        rs = self.resolutions
        lo = self.per_resolution[rs[0]]["max_ratio"]
        hi = self.per_resolution[rs[-1]]["max_ratio"]
        return hi / lo if lo > 0 else float("inf")

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "samples": self.samples,
            "max_ratio": self.max_ratio,
            "mean_ratio": self.mean_ratio,
            "growth": self.growth,
            "resolutions": self.resolutions,
            "per_resolution": {
                str(N): {k: (list(map(float, v)) if isinstance(v, (list, np.ndarray)) else v) for k, v in d.items()}
                for N, d in self.per_resolution.items()
            },
        }

    def csv_rows(self):
        for N in self.resolutions:
            d = self.per_resolution[N]
            yield {"beta": self.beta, "N": N, "samples": d["samples"], "max_ratio": d["max_ratio"], "mean_ratio": d["mean_ratio"]}


def ensemble_field(grid: GridSpec, index: int, seed: int) -> SpectralField:
    """Member ``index`` of the random ensemble: slopes alternate over ENSEMBLE_SLOPES."""
    slope = ENSEMBLE_SLOPES[index % len(ENSEMBLE_SLOPES)]
    return random_solenoidal(grid, slope=slope, seed=seed, stream=index)


def lemma_ratios(grid: GridSpec, betas, ensemble_size: int, seed: int) -> dict:
    """Ratios ``||B||_{-beta} / (||u||_{1-beta} ||u||_1)`` for each beta over one ensemble."""
    betas = [float(b) for b in betas]
    out = {b: [] for b in betas}
    index = 0
    accepted = 0
    while accepted < ensemble_size:
        u = ensemble_field(grid, index, seed)
        index += 1
        h1 = norm_from_coeffs(grid, u.coeffs, 1.0)
        if h1 < _DEGENERATE:
            continue
        B = nonlinear_term(u)
        for b in betas:
            denom = norm_from_coeffs(grid, u.coeffs, 1.0 - b) * h1
            if denom < _DEGENERATE:
                break
        else:
            for b in betas:
                denom = norm_from_coeffs(grid, u.coeffs, 1.0 - b) * h1
                out[b].append(norm_from_coeffs(grid, B.coeffs, -b) / denom)
            accepted += 1
        if index > 10 * ensemble_size + 100:
            raise DegenerateFieldError("too many degenerate ensemble members")
    return {b: np.array(v) for b, v in out.items()}


def lemma_constant_sweep(betas, ensemble_size: int, resolutions, seed: int = 0, nu: float = 1.0) -> dict:
    """EstimateEnsembleReport per beta, sharing one ensemble per resolution."""
    betas = [float(b) for b in betas]
    per = {b: {} for b in betas}
    for N in resolutions:
        ratios = lemma_ratios(GridSpec(int(N), nu), betas, ensemble_size, seed)
        for b in betas:
            r = ratios[b]
            per[b][int(N)] = {
                "samples": int(r.size),
                "max_ratio": float(r.max()),
                "mean_ratio": float(r.mean()),
                "ratios": r,
            }
    out = {}
    for b in betas:
        allr = np.concatenate([d["ratios"] for d in per[b].values()])
        out[b] = EstimateEnsembleReport(b, int(allr.size), float(allr.max()), float(allr.mean()), per[b])
    return out


def lemma_constant_estimate(beta: float, ensemble_size: int, resolutions, seed: int = 0) -> EstimateEnsembleReport:
    """Ensemble statistics of the B(u,u) negative-norm ratio across resolutions."""
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    return lemma_constant_sweep([beta], ensemble_size, resolutions, seed)[float(beta)]


def duality_check(u: SpectralField, beta: float, n_test: int = 64, seed: int = 0) -> dict:
    """Compare ``||B(u,u)||_{-beta}`` with the best pairing over a test dictionary.

    The dictionary holds unit-H^beta divergence-free fields: the dual
    extremiser ``|k|^{-2 beta} B`` perturbed by noise of increasing size,
    followed by purely random fields. Pairings go through ``trilinear_form``.
    """
    g = u.grid
    B = nonlinear_term(u)
    direct = sobolev_norm(B, -beta)
    if direct == 0:
        raise DegenerateFieldError("B(u,u) vanishes; the dual norm is trivially 0")
    star = B.coeffs * g.sobolev_weights(-beta)
    star = star / norm_from_coeffs(g, star, beta)
    pairings = []
    n_perturbed = n_test // 2
    for j in range(n_test):
        noise = random_solenoidal(g, slope=1.0 + beta, seed=seed, stream=50_000 + j).coeffs
        noise = noise / norm_from_coeffs(g, noise, beta)
        if j < n_perturbed:
            eps = 0.02 * j
            c = star + eps * noise
        else:
            c = noise
        c = c / norm_from_coeffs(g, c, beta)
        v = SpectralField(g, c, mean_free=True, solenoidal=True)
        pairings.append(trilinear_form(u, u, v))
    pairings = np.array(pairings)
    return {"direct": direct, "sup": float(pairings.max()), "pairings": pairings}
