"""Scaling function, kernel-adapted cylinders, and their certificates.

The anomalous space-time scaling of the calculus is carried by the function
Phi with k1(Phi(r)) = r^-2: a ball of radius r pairs with a time depth
Phi(r).  Cylinders here are plain boxes (time interval x ball) whose heights
are set by Phi, and the certificate routines measure the inequalities that
make the cylinder geometry usable at small radii.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .measure import (
    MeasureSpec,
    alpha_power_moment,
    gamma_bar,
    power_moment,
    require_valid,
    tail_mass,
)
from .kernels import l_eval

__all__ = [
    "GeometryError",
    "CylinderKind",
    "Cylinder",
    "phi",
    "phi_bar",
    "build_cylinders",
    "ScalingCertificate",
    "scaling_certificate",
    "PhiLambdaReport",
    "phi_lambda_check",
    "PhiLowerBoundReport",
    "phi_lower_bound_check",
]


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# the scaling function


def _phi_scalar(spec: MeasureSpec, r: float) -> float:
    if r <= 0.0:
        raise GeometryError("phi requires r > 0")
    target = r ** (-2.0)

    def f(log10_x: float) -> float:
        return power_moment(spec, 10.0 ** log10_x) - target

    lo, hi = -300.0, 300.0
    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo > 0.0 > f_hi):
        raise GeometryError(
            f"no bracket for phi({r}): k1 range does not cross {target}")
    # bisection on the exponent: k1 is strictly decreasing, so this is safe
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, abs(hi)):
            break
    x = 10.0 ** (0.5 * (lo + hi))
    # Newton polish; k1'(x) = -alpha_power_moment(x)/x
    for _ in range(3):
        k1_x = power_moment(spec, x)
        slope = -alpha_power_moment(spec, x) / x
        step = (k1_x - target) / slope
        x_new = x - step
        if x_new <= 0.0:
            break
        x = x_new
    resid = abs(power_moment(spec, x) * r**2 - 1.0)
    if resid > 1e-11:
        raise GeometryError(f"phi root polish failed at r={r}: residual {resid}")
    return x


def phi(spec: MeasureSpec, r):
    """Time height Phi(r): the unique solution of ``k1(Phi(r)) = r^-2``."""
    require_valid(spec)
    if isinstance(r, np.ndarray):
        return np.array([_phi_scalar(spec, float(ri)) for ri in r.ravel()]
                        ).reshape(r.shape)
    return _phi_scalar(spec, float(r))


def phi_bar(spec: MeasureSpec, r):
    """Doubled-radius height ``Phi(2r)``, the natural cylinder time scale."""
    return phi(spec, 2.0 * np.asarray(r)) if isinstance(r, np.ndarray) \
        else phi(spec, 2.0 * r)


# ---------------------------------------------------------------------------
# cylinders


class CylinderKind(str, enum.Enum):
    Q_MINUS = "q_minus"
    Q_PLUS = "q_plus"
    DYADIC = "dyadic"


@dataclass(frozen=True)
class Cylinder:
    t_start: float
    t_end: float
    center: tuple[float, ...]
    radius: float
    kind: CylinderKind

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise GeometryError("cylinder needs t_start < t_end")
        if self.radius <= 0.0:
            raise GeometryError("cylinder needs radius > 0")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def contains(self, t: float, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.center and x.size != len(self.center):
            raise GeometryError("point dimension mismatch")
        in_ball = (np.linalg.norm(x - np.asarray(self.center)) < self.radius
                   if self.center else True)
        return self.t_start < t < self.t_end and bool(in_ball)


def _as_center(x0) -> tuple[float, ...]:
    if np.isscalar(x0):
        return (float(x0),)
    return tuple(float(c) for c in x0)


def build_cylinders(spec: MeasureSpec, t0: float, x0, r: float, delta: float,
                    tau: float) -> tuple[Cylinder, Cylinder]:
    """Early mean box and late infimum box over the same shrunken ball.

    The pair is (t0, t0 + delta*tau*Phi(2r)) x B(x0, delta*r) and
    (t0 + (2-delta)*tau*Phi(2r), t0 + 2*tau*Phi(2r)) x B(x0, delta*r);
    disjoint, with the same total time span 2*tau*Phi(2r).
    """
    if not (0.0 < delta < 1.0):
        raise GeometryError("delta must lie in (0,1)")
    if tau <= 0.0 or r <= 0.0:
        raise GeometryError("tau and r must be positive")
    height = tau * phi(spec, 2.0 * r)
    center = _as_center(x0)
    q_minus = Cylinder(t0, t0 + delta * height, center, delta * r,
                       CylinderKind.Q_MINUS)
    q_plus = Cylinder(t0 + (2.0 - delta) * height, t0 + 2.0 * height, center,
                      delta * r, CylinderKind.Q_PLUS)
    return q_minus, q_plus


# ---------------------------------------------------------------------------
# certificates


def _log_lp_norm_p(spec: MeasureSpec, p: float, upper: float) -> float:
    """log of ``int_0^upper l(s)^p ds`` by dyadic Gauss-Legendre panels.

    The integrand blows up like s^(p*(gamma_bar-1)) at zero but stays
    integrable for admissible p; panels refine toward zero until the running
    total stabilizes.
    """
    nodes, weights = np.polynomial.legendre.leggauss(16)
    total = 0.0
    hi = upper
    for j in range(400):
        lo = hi * 0.5
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        s = mid + half * nodes
        vals = np.asarray(l_eval(spec, s)) ** p
        piece = half * float(np.dot(weights, vals))
        total += piece
        if j >= 20 and piece < 1e-10 * total:
            break
        hi = lo
    return math.log(total)


@dataclass(frozen=True)
class ScalingCertificate:
    """Measured constants of the Lp-norm scaling bound on dyadic radii.

    ``log_ratio`` holds log of ``||l||_{Lp(0,Phi(2r))}^p * Phi(2r)^(p-1) /
    r^(2p)`` per radius; ratios are exponentiated where representable.  The
    admissible radius is the largest grid point with Phi(2r) <= 1 whose ratio
    stays within a factor two of the small-radius plateau.
    """

    p: float
    r: np.ndarray
    phi_2r: np.ndarray
    log_lhs: np.ndarray
    log_rhs: np.ndarray
    log_ratio: np.ndarray
    ratio: np.ndarray
    c_emp: float
    r_admissible: float
    log_plateau: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("r,phi_2r,lhs,rhs,ratio\r\n")
            for i in range(self.r.size):
                lhs = math.exp(self.log_lhs[i]) if self.log_lhs[i] > -700 else 0.0
                rhs = math.exp(self.log_rhs[i]) if self.log_rhs[i] > -700 else 0.0
                row = (self.r[i], self.phi_2r[i], lhs, rhs, self.ratio[i])
                fh.write(",".join(repr(float(v)) for v in row) + "\r\n")


def scaling_certificate(spec: MeasureSpec, p: float,
                        r_grid) -> ScalingCertificate:
    """Measure the constant in the Lp scaling bound over a radius grid."""
    require_valid(spec)
    gb = gamma_bar(spec)
    if not (1.0 <= p < 1.0 / (1.0 - gb)):
        raise GeometryError(
            f"p={p} out of admissible range [1, {1.0 / (1.0 - gb):.6g})")
    r = np.sort(np.asarray(r_grid, dtype=float))
    if r.size == 0 or np.any(r <= 0.0):
        raise GeometryError("need a nonempty positive radius grid")
    phi2r = np.array([_phi_scalar(spec, 2.0 * ri) for ri in r])
    log_lhs = np.empty(r.size)
    for i, (ri, x) in enumerate(zip(r, phi2r)):
        log_lhs[i] = (_log_lp_norm_p(spec, p, x)
                      + (p - 1.0) * math.log(x))
    log_rhs = 2.0 * p * np.log(r)
    log_ratio = log_lhs - log_rhs
    with np.errstate(over="ignore"):
        ratio = np.exp(log_ratio)

    inside = phi2r <= 1.0
    if not np.any(inside):
        raise GeometryError("no grid radius satisfies Phi(2r) <= 1")
    # the plateau is the limiting small-radius value; the admissible radius is
    # the largest grid point below which every ratio stays within 2x of it
    log_plateau = float(log_ratio[inside][0])
    within = inside & (np.abs(log_ratio - log_plateau) <= math.log(2.0))
    r_adm = float(r[inside][0])
    for i in range(r.size):
        if not inside[i]:
            break
        if not within[i]:
            break
        r_adm = float(r[i])
    window = inside & (r <= r_adm)
    c_emp = float(np.exp(np.max(log_ratio[window])))
    return ScalingCertificate(p=p, r=r, phi_2r=phi2r, log_lhs=log_lhs,
                              log_rhs=log_rhs, log_ratio=log_ratio,
                              ratio=ratio, c_emp=c_emp, r_admissible=r_adm,
                              log_plateau=log_plateau)


@dataclass(frozen=True)
class PhiLambdaReport:
    worst_rel_slack: float
    violations: int

    @property
    def ok(self) -> bool:
        return self.violations == 0


def phi_lambda_check(spec: MeasureSpec, r_grid, lambda_grid) -> PhiLambdaReport:
    """Verify ``Phi(lambda*r) <= lambda^2 * Phi(r)`` over the grid product."""
    r = np.asarray(r_grid, dtype=float)
    lam = np.asarray(lambda_grid, dtype=float)
    if r.size == 0 or lam.size == 0:
        raise GeometryError("grids must be nonempty")
    if np.any((lam <= 0.0) | (lam > 1.0)):
        raise GeometryError("lambda grid must lie in (0,1]")
    worst = -np.inf
    violations = 0
    for ri in r:
        phi_r = _phi_scalar(spec, float(ri))
        for li in lam:
            lhs = _phi_scalar(spec, float(li * ri))
            rhs = li**2 * phi_r
            rel = (lhs - rhs) / rhs
            worst = max(worst, rel)
            if rel > 1e-12:
                violations += 1
    return PhiLambdaReport(worst_rel_slack=float(worst), violations=violations)


@dataclass(frozen=True)
class PhiLowerBoundReport:
    c_mu: float
    worst_rel_slack: float
    violations: int

    @property
    def ok(self) -> bool:
        return self.violations == 0


def phi_lower_bound_check(spec: MeasureSpec, r_grid) -> PhiLowerBoundReport:
    """Verify ``c_mu * r^(2/gamma_bar) <= Phi(r)`` for radii in (0,1)."""
    r = np.asarray(r_grid, dtype=float)
    if r.size == 0 or np.any((r <= 0.0) | (r >= 1.0)):
        raise GeometryError("radius grid must lie in (0,1)")
    gb = gamma_bar(spec)
    c_mu = min(tail_mass(spec, gb) ** (1.0 / gb), 1.0)
    worst = -np.inf
    violations = 0
    for ri in r:
        phi_r = _phi_scalar(spec, float(ri))
        bound = c_mu * float(ri) ** (2.0 / gb)
        rel = (bound - phi_r) / phi_r
        worst = max(worst, rel)
        if rel > 1e-12:
            violations += 1
    return PhiLowerBoundReport(c_mu=float(c_mu), worst_rel_slack=float(worst),
                               violations=violations)
