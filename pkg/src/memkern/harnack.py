"""Empirical verification of the structural regularity claims.

Nothing here proves anything: the routines measure the quantities the theory
bounds (mean-to-infimum ratios over paired cylinders, dyadic oscillation
decay, constancy after an attained maximum) on concrete solver output, so
that the bounded-constant claims can be certified at desk scale and
regressions in the calculus show up as blown-up ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import MeasureSpec, gamma_bar
from .geometry import Cylinder, build_cylinders, phi_bar
from .solver import (
    BoundaryCondition,
    CoefficientField,
    SolutionField,
    SpatialGrid,
    solve,
)

__all__ = [
    "HarnackError",
    "critical_exponent",
    "HarnackReport",
    "weak_harnack_ratio",
    "EnsembleReport",
    "harnack_ensemble",
    "random_fourier_profile",
    "OscillationProfile",
    "oscillation_profile",
    "strong_max_check",
]

_MIN_CYLINDER_CELLS = 8


class HarnackError(ValueError):
    pass


def critical_exponent(gamma_bar_value: float, n_dim: int) -> float:
    """Supremal admissible moment exponent ``(2+N*g)/(2+N*g-2*g)``."""
    if not (0.0 < gamma_bar_value < 1.0):
        raise HarnackError("gamma_bar must lie in (0,1)")
    if n_dim < 1 or int(n_dim) != n_dim:
        raise HarnackError("dimension must be a positive integer")
    g = gamma_bar_value
    return (2.0 + n_dim * g) / (2.0 + n_dim * g - 2.0 * g)


# ---------------------------------------------------------------------------
# cylinder sampling


def _cells_in_cylinder(field: SolutionField, cyl: Cylinder) -> np.ndarray:
    """Samples of u at cell centers strictly inside the cylinder."""
    grid = field.grid
    if grid.dim == 0:
        raise HarnackError("cylinder measurements need a spatial grid")
    times = field.times
    t_mask = (times > cyl.t_start) & (times < cyl.t_end)
    centers = grid.centers().reshape(-1, grid.dim)
    dist = np.linalg.norm(centers - np.asarray(cyl.center), axis=1)
    x_mask = dist < cyl.radius
    if not np.any(t_mask) or not np.any(x_mask):
        return np.empty((0,))
    block = field.values[t_mask].reshape(int(np.sum(t_mask)), -1)
    return block[:, x_mask].ravel()


@dataclass(frozen=True)
class HarnackReport:
    p: float
    mean_p: float
    inf_plus: float
    correction: float
    ratio: float | None
    status: str            # "ok" | "degenerate" | "unbounded"
    n_cells_minus: int
    n_cells_plus: int
    config: dict

    @property
    def finite(self) -> bool:
        return self.status == "ok"


def weak_harnack_ratio(field: SolutionField, spec: MeasureSpec, *,
                       t0: float, x0, r: float, delta: float, tau: float,
                       p: float,
                       min_cells: int = _MIN_CYLINDER_CELLS) -> HarnackReport:
    """Ratio of the early Lp mean to the late infimum over paired cylinders.

    The negative-forcing correction ``r^2 * sup f^-`` enters the denominator
    whenever the field carries forcing samples.  Nonnegativity of u on the
    working cylinder is a precondition; solver round-off slightly below zero
    is clipped.
    """
    gb = gamma_bar(spec)
    kappa = critical_exponent(gb, max(field.grid.dim, 1))
    if not (0.0 < p < kappa):
        raise HarnackError(f"p={p} outside (0, {kappa:.4f})")
    q_minus, q_plus = build_cylinders(spec, t0, x0, r, delta, tau)
    u_minus = _cells_in_cylinder(field, q_minus)
    u_plus = _cells_in_cylinder(field, q_plus)
    if u_minus.size < min_cells or u_plus.size < min_cells:
        raise HarnackError(
            f"discrete cylinders too small ({u_minus.size}, {u_plus.size}); "
            "refine the grid or enlarge the cylinder")
    scale = max(float(np.max(np.abs(field.values))), 1.0)
    if min(u_minus.min(), u_plus.min()) < -1e-9 * scale:
        raise HarnackError("field is negative on the working cylinder")
    u_minus = np.maximum(u_minus, 0.0)
    u_plus = np.maximum(u_plus, 0.0)

    # scaled power mean: exact for constant fields and overflow-safe in p
    peak = float(np.max(u_minus))
    if peak == 0.0:
        mean_p = 0.0
    else:
        mean_p = float(peak * np.mean((u_minus / peak) ** p) ** (1.0 / p))
    inf_plus = float(np.min(u_plus))
    correction = r**2 * field.f_negative_sup()
    denom = inf_plus + correction
    config = {"t0": t0, "x0": x0, "r": r, "delta": delta, "tau": tau, "p": p}
    tiny = 1e-14 * scale
    if denom <= tiny and mean_p <= tiny:
        status, ratio = "degenerate", None
    elif denom <= tiny:
        status, ratio = "unbounded", None
    else:
        status, ratio = "ok", mean_p / denom
    return HarnackReport(p=p, mean_p=mean_p, inf_plus=inf_plus,
                         correction=correction, ratio=ratio, status=status,
                         n_cells_minus=int(u_minus.size),
                         n_cells_plus=int(u_plus.size), config=config)


# ---------------------------------------------------------------------------
# random ensembles


def random_fourier_profile(rng: np.random.Generator, n_modes: int = 8,
                           decay: float = 1.5):
    """Clipped random Fourier profile on [0,1]: smooth, nonnegative, seeded.

    Returns a callable of the spatial coordinate so the same draw can be
    sampled on any grid resolution.
    """
    offsets = abs(rng.normal(loc=0.8, scale=0.3))
    amps = rng.normal(size=n_modes) / (np.arange(1, n_modes + 1) ** decay)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=n_modes)

    def profile(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        acc = np.full_like(x, offsets)
        for m in range(n_modes):
            acc = acc + amps[m] * np.sin(math.pi * (m + 1) * x + phases[m])
        return np.maximum(acc, 0.0)

    return profile


@dataclass(frozen=True)
class EnsembleReport:
    seed: int
    p: float
    n_cells: int
    ratios: tuple[float, ...]
    statuses: tuple[str, ...]
    max_ratio: float
    median_ratio: float

    @property
    def all_finite(self) -> bool:
        return all(s == "ok" for s in self.statuses)


def harnack_ensemble(spec: MeasureSpec, *, n_members: int, seed: int,
                     n_cells: int, n_steps: int, r: float, x0: float,
                     delta: float = 0.5, tau: float = 1.0, p: float = 1.0,
                     t0: float = 0.0, domain: tuple[float, float] = (0.0, 1.0),
                     ) -> EnsembleReport:
    """Weak-Harnack ratios over seeded random nonnegative initial data (1d).

    Each member draws a clipped Fourier profile once and evaluates it on the
    requested grid, so refining ``n_cells`` reruns the same continuum data.
    """
    height = 2.0 * tau * phi_bar(spec, r)
    bc = BoundaryCondition.dirichlet(0.0)
    grid = SpatialGrid(extents=(domain,), n_cells=(n_cells,),
                       boundary=((bc, bc),))
    coeffs = CoefficientField.constant([[1.0]])
    x = grid.axis_centers(0)
    ratios: list[float] = []
    statuses: list[str] = []
    for member in range(n_members):
        rng = np.random.default_rng(np.random.SeedSequence([seed, member]))
        profile = random_fourier_profile(rng)
        fld = solve(spec, grid, coeffs, profile(x), 0.0, t0 + height, n_steps)
        report = weak_harnack_ratio(fld, spec, t0=t0, x0=x0, r=r, delta=delta,
                                    tau=tau, p=p)
        statuses.append(report.status)
        ratios.append(report.ratio if report.ratio is not None else math.nan)
    arr = np.asarray(ratios)
    finite = arr[np.isfinite(arr)]
    return EnsembleReport(
        seed=seed, p=p, n_cells=n_cells, ratios=tuple(ratios),
        statuses=tuple(statuses),
        max_ratio=float(np.max(finite)) if finite.size else math.nan,
        median_ratio=float(np.median(finite)) if finite.size else math.nan,
    )


# ---------------------------------------------------------------------------
# oscillation decay


@dataclass(frozen=True)
class OscillationProfile:
    levels: tuple[int, ...]
    radii: tuple[float, ...]
    osc: tuple[float, ...]
    kappa: float | None
    fit_residual: float | None
    status: str  # "ok" | "flat"

    @property
    def flat(self) -> bool:
        return self.status == "flat"


def oscillation_profile(field: SolutionField, spec: MeasureSpec, *,
                        t1: float, x1, theta: float, levels, r: float
                        ) -> OscillationProfile:
    """Oscillation of u over nested dyadic cylinders anchored at (t1, x1).

    Level j uses the box (t1 - theta*Phi(2^(1-j) r), t1) x B(x1, 2^-j r)
    clipped to the field's own domain.  The decay exponent is the negative
    slope of log2(osc) against the level, fitted over levels whose
    oscillation clears the round-off floor; a field that is flat at every
    level reports status "flat" instead of an exponent.
    """
    levels = sorted(int(j) for j in levels)
    if len(levels) < 3:
        raise HarnackError("need at least 3 levels")
    grid = field.grid
    if grid.dim == 0:
        raise HarnackError("oscillation profiles need a spatial grid")
    times = field.times
    top_idx = int(math.floor(t1 / field.step + 1e-12))
    if top_idx < 1 or top_idx > field.n_steps:
        raise HarnackError("anchor time t1 outside the computed trajectory")
    centers = grid.centers().reshape(-1, grid.dim)
    x1c = np.asarray(_center(x1))
    dist = np.linalg.norm(centers - x1c, axis=1)
    radii, oscs, kept = [], [], []
    for j in levels:
        rho_r = 2.0 ** (-j) * r
        depth = theta * phi_bar(spec, rho_r)
        # only levels whose cylinder sits inside the computed domain count:
        # positive start time and the ball within the grid extents
        if t1 - depth <= 0.0:
            continue
        inside = all(lo <= c - rho_r and c + rho_r <= hi
                     for c, (lo, hi) in zip(x1c, grid.extents))
        if not inside:
            continue
        # slices in (t1 - depth, t1]; the anchor slice itself always counts,
        # since the level depths drop below the time step within a few levels
        t_mask = (times > t1 - depth) & (times <= t1 + 1e-12 * field.horizon)
        t_mask[top_idx] = True
        t_mask[0] = False
        x_mask = dist < rho_r
        if not np.any(x_mask):
            continue
        u = field.values[t_mask].reshape(int(np.sum(t_mask)), -1)[:, x_mask]
        if u.size < 2:
            continue
        kept.append(j)
        radii.append(rho_r)
        oscs.append(float(np.max(u) - np.min(u)))
    if len(kept) < 3:
        raise HarnackError("fewer than 3 usable levels inside the domain")
    osc_arr = np.asarray(oscs)
    floor = 10.0 * np.finfo(float).eps * max(float(np.max(np.abs(field.values))),
                                             1.0)
    usable = osc_arr > floor
    if not np.any(usable):
        return OscillationProfile(tuple(kept), tuple(radii), tuple(oscs),
                                  kappa=None, fit_residual=None, status="flat")
    if int(np.sum(usable)) < 3:
        raise HarnackError("fewer than 3 levels above the noise floor")
    j_arr = np.asarray(kept, dtype=float)[usable]
    y = np.log2(osc_arr[usable])
    slope, intercept = np.polyfit(j_arr, y, 1)
    fit = slope * j_arr + intercept
    resid = float(np.sqrt(np.mean((y - fit) ** 2)))
    return OscillationProfile(tuple(kept), tuple(radii), tuple(oscs),
                              kappa=float(-slope), fit_residual=resid,
                              status="ok")


def _center(x) -> tuple[float, ...]:
    if np.isscalar(x):
        return (float(x),)
    return tuple(float(c) for c in x)


# ---------------------------------------------------------------------------
# strong maximum principle


def strong_max_check(field: SolutionField, cyl: Cylinder,
                     tol: float = 1e-10) -> str:
    """Constancy-after-attained-maximum verdict on one cylinder.

    If the supremum over the cylinder reaches the global supremum (within
    tol), every earlier time slice must be flat; returns "consistent",
    "violated", or "not-applicable" when the hypothesis fails.
    """
    u_cyl = _cells_in_cylinder(field, cyl)
    if u_cyl.size == 0:
        raise HarnackError("cylinder contains no samples")
    global_sup = float(np.max(field.values))
    if float(np.max(u_cyl)) < global_sup - tol:
        return "not-applicable"
    times = field.times
    earlier = times < cyl.t_start
    earlier[0] = False  # the initial slice is data, not solution
    for idx in np.nonzero(earlier)[0]:
        sl = field.values[idx]
        if float(np.max(sl) - np.min(sl)) > tol:
            return "violated"
    return "consistent"
