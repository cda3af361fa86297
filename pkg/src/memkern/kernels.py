"""Memory kernels of the calculus: k, k1, 1*k, H_theta, l, and r_theta.

The singular kernel k and its relatives have exact moment formulas.  The
convolution inverse l (k*l = 1) and the resolvent family r_theta only exist
through a real-axis inversion integral

    r_theta(t) = (1/pi) * int_0^inf exp(-p t) H_theta(p) dp,
    H_theta(p) = S / (S^2 + (theta + C)^2),
    S = int p^a sin(pi a) dmu,  C = int p^a cos(pi a) dmu,

which this module evaluates with composite Gauss-Legendre quadrature on
dyadic panels after substituting u = p t.  Panels extend right until the
exponential kills the integrand and left until the algebraic blow-up of
H near p = 0 (exponent = lowest support point of the measure) has decayed
below round-off, so the scheme is spectrally accurate for every admissible
measure; a measure whose support reaches too close to order one makes the
left tail undecidable in double precision and raises ``KernelQuadratureError``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .measure import (
    MeasureSpec,
    MeasureError,
    gamma_bar,
    power_moment,
    require_valid,
    sin_cos_moments,
)

__all__ = [
    "KernelQuadratureError",
    "KernelGridError",
    "KernelKind",
    "KernelGrid",
    "k_eval",
    "k1_eval",
    "one_star_k_eval",
    "iterated_k_integral",
    "h_laplace_eval",
    "l_eval",
    "r_theta_eval",
    "resolvent_running_integral",
    "resolvent_double_integral",
    "resolvent_triple_integral",
    "sample_kernel",
    "bound_certificates",
    "BoundCertificates",
]

_GL_NODES_PER_PANEL = 24
_MAX_LEFT_PANELS = 880
_SMALL_T_FLOOR = 1e-8  # fraction of the horizon below which samples are refused


class KernelQuadratureError(RuntimeError):
    """Tail truncation of the inversion integral failed to converge."""


class KernelGridError(ValueError):
    """A sampled kernel violated its structural invariants."""


# ---------------------------------------------------------------------------
# pointwise kernels with exact or spectral moment formulas


def _piecewise_gauss(spec: MeasureSpec, f_of_alpha, t_arr: np.ndarray) -> np.ndarray:
    """Gauss-Legendre moment of an entire integrand over the weight pieces.

    The integrands used here (powers of t times reciprocal-gamma factors) are
    entire in alpha, so fixed-order panels converge spectrally; panel count
    grows with |log t| to keep the exponential growth resolved.
    """
    out = np.zeros_like(t_arr)
    pieces = [(a, b, w) for a, b, w in spec.pieces() if w > 0.0]
    if not pieces:
        return out
    t_col = np.atleast_1d(t_arr)
    acc = np.zeros_like(t_col)
    max_log = float(np.max(np.abs(np.log(t_col)))) if t_col.size else 0.0
    n_sub = max(1, math.ceil(max_log / 25.0))
    nodes, weights = np.polynomial.legendre.leggauss(32)
    for a, b, w in pieces:
        edges = np.linspace(a, b, n_sub + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            alphas = mid + half * nodes
            vals = f_of_alpha(alphas[None, :], t_col[:, None])
            acc = acc + w * half * vals @ weights
    return out + acc.reshape(t_arr.shape)


def _as_time_array(t, positive: bool = True):
    t_arr = np.asarray(t, dtype=float)
    if positive and np.any(t_arr <= 0.0):
        raise MeasureError("kernel evaluation requires t > 0")
    return t_arr


def k_eval(spec: MeasureSpec, t):
    """Singular kernel ``k(t) = int t^-a / Gamma(1-a) dmu``."""
    t_arr = _as_time_array(t)
    out = np.zeros_like(t_arr)
    for a, q in spec.atoms:
        if q > 0.0:
            out = out + q * special.rgamma(1.0 - a) * t_arr ** (-a)
    out = out + _piecewise_gauss(
        spec, lambda al, tt: special.rgamma(1.0 - al) * tt ** (-al), t_arr
    )
    return out if isinstance(t, np.ndarray) else float(out)


def k1_eval(spec: MeasureSpec, t):
    """Plain power moment ``k1(t) = int t^-a dmu`` (exact closed form)."""
    return power_moment(spec, t)


def _iterated_integral(spec: MeasureSpec, t, depth: int):
    """d-fold running integral of k: ``int t^(d-a) / Gamma(d+1-a) dmu``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise MeasureError("running integrals require t >= 0")
    out = np.zeros_like(t_arr)
    pos = t_arr > 0.0
    if np.any(pos):
        tp = t_arr[pos]
        acc = np.zeros_like(tp)
        for a, q in spec.atoms:
            if q > 0.0:
                acc = acc + q * special.rgamma(depth + 1.0 - a) * tp ** (depth - a)
        acc = acc + _piecewise_gauss(
            spec,
            lambda al, tt: special.rgamma(depth + 1.0 - al) * tt ** (depth - al),
            tp,
        )
        out[pos] = acc
    return out if isinstance(t, np.ndarray) else float(out)


def one_star_k_eval(spec: MeasureSpec, t):
    """Running integral of k: ``(1*k)(t) = int t^(1-a) / Gamma(2-a) dmu``."""
    return _iterated_integral(spec, t, 1)


def iterated_k_integral(spec: MeasureSpec, t, depth: int = 2):
    """Repeated running integrals of k; depth=2 gives ``(1*1*k)(t)``."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return _iterated_integral(spec, t, depth)


def h_laplace_eval(spec: MeasureSpec, p, theta: float = 0.0):
    """Laplace-plane function ``(H_theta(p), S(p), C(p))``.

    Computed in a scaled form so that underflow of the oscillatory moments at
    extreme p cannot produce spurious infinities.
    """
    if theta < 0.0:
        raise ValueError("theta must be nonnegative")
    p_arr = np.asarray(p, dtype=float)
    s, c = sin_cos_moments(spec, p_arr)
    d = theta + c
    scale = np.maximum(np.abs(s), np.abs(d))
    with np.errstate(invalid="ignore", divide="ignore"):
        h = np.where(
            scale > 0.0,
            (s / np.where(scale > 0, scale, 1.0))
            / (scale * ((s / np.where(scale > 0, scale, 1.0)) ** 2
                        + (d / np.where(scale > 0, scale, 1.0)) ** 2)),
            0.0,
        )
    if isinstance(p, np.ndarray):
        return h, s, c
    return float(h), float(s), float(c)


# ---------------------------------------------------------------------------
# dyadic-panel quadrature for the inversion integral


@dataclass(frozen=True)
class _PanelScheme:
    u: np.ndarray          # flattened Gauss-Legendre nodes in u = p*t
    w: np.ndarray          # matching weights
    w_exp: np.ndarray      # weights premultiplied by exp(-u)
    w_one_minus: np.ndarray  # weights premultiplied by (1 - exp(-u)) / u
    w_double: np.ndarray   # weights premultiplied by (exp(-u) - 1 + u) / u^2
    w_triple: np.ndarray   # weights premultiplied by (u^2/2 - u + 1 - exp(-u)) / u^3


def _support_exponents(spec: MeasureSpec) -> tuple[float, float]:
    lo, hi = spec.support_bounds()
    return lo, hi


@lru_cache(maxsize=64)
def _panel_scheme(spec: MeasureSpec) -> _PanelScheme:
    """Dyadic Gauss–Legendre panels covering [2^-L, 2^R] in u = p*t.

    H(p) ~ p^-a_low as p -> 0, so leftward panel contributions fall off like
    2^(-j (1 - a_low)): L is sized to push the truncated mass below 1e-16
    relative.  The right tail must cover both the exponentially damped
    integrand of r_theta and the algebraic u^(-1-a_high) tail of its running
    integral, so R is sized from the top of the support.
    """
    a_low, a_high = _support_exponents(spec)
    # contributions decay like 2^(-j*left_rate); need 2^(-L*left_rate) <= 1e-16
    left_rate = 1.0 - a_low
    n_left = math.ceil(16.0 / (left_rate * math.log10(2.0)))
    if n_left > _MAX_LEFT_PANELS:
        raise KernelQuadratureError(
            f"tail truncation failed: support reaches {a_low:.4f}, "
            f"needs {n_left} left panels (cap {_MAX_LEFT_PANELS})"
        )
    n_right = max(8, math.ceil(16.0 / (a_high * math.log10(2.0))))
    n_right = min(n_right, 600)
    nodes, weights = np.polynomial.legendre.leggauss(_GL_NODES_PER_PANEL)
    edges = [0.0]
    lefts = [2.0 ** (-j) for j in range(n_left, 0, -1)]
    rights = [2.0 ** j for j in range(0, n_right + 1)]
    edges = np.array(lefts + rights)
    u_all, w_all = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        u_all.append(mid + half * nodes)
        w_all.append(half * weights)
    u = np.concatenate(u_all)
    w = np.concatenate(w_all)
    with np.errstate(over="ignore"):
        w_exp = w * np.exp(-u)
    w_one_minus = w * (-np.expm1(-u)) / u
    # (exp(-u) - 1 + u) / u^2 and (u^2/2 - u + 1 - exp(-u)) / u^3 with series
    # guards against cancellation at small u
    small = u < 1e-3
    g2 = np.where(small,
                  0.5 - u / 6.0 + u**2 / 24.0,
                  (np.expm1(-u) + u) / u**2)
    g3 = np.where(small,
                  1.0 / 6.0 - u / 24.0 + u**2 / 120.0,
                  (u**2 / 2.0 - u - np.expm1(-u)) / u**3)
    return _PanelScheme(u=u, w=w, w_exp=w_exp, w_one_minus=w_one_minus,
                        w_double=w * g2, w_triple=w * g3)


def _invert(spec: MeasureSpec, t: float, theta: float, depth: int) -> float:
    scheme = _panel_scheme(spec)
    p = scheme.u / t
    h, _, _ = h_laplace_eval(spec, p, theta)
    if depth == 0:
        return float(np.dot(scheme.w_exp, h) / (math.pi * t))
    if depth == 1:
        # (1 * r_theta)(t) = (1/pi) * int (1 - e^-u)/u * H_theta(u/t) du
        return float(np.dot(scheme.w_one_minus, h) / math.pi)
    if depth == 2:
        # (1*1*r_theta)(t) = (t/pi) * int (e^-u - 1 + u)/u^2 * H_theta(u/t) du
        return float(t * np.dot(scheme.w_double, h) / math.pi)
    # (1*1*1*r_theta)(t) = (t^2/pi) int (u^2/2 - u + 1 - e^-u)/u^3 H(u/t) du
    return float(t * t * np.dot(scheme.w_triple, h) / math.pi)


def _eval_over_times(spec: MeasureSpec, t, theta: float, depth: int):
    require_valid(spec)
    if theta < 0.0:
        raise ValueError("theta must be nonnegative")
    t_arr = _as_time_array(t)
    flat = np.atleast_1d(t_arr).astype(float)
    out = np.array([_invert(spec, float(ti), theta, depth) for ti in flat])
    if isinstance(t, np.ndarray):
        return out.reshape(t_arr.shape)
    return float(out[0])


def l_eval(spec: MeasureSpec, t):
    """Convolution inverse of k (the Sonine partner), by Laplace inversion."""
    return _eval_over_times(spec, t, 0.0, depth=0)


def r_theta_eval(spec: MeasureSpec, t, theta: float):
    """Resolvent kernel of l: solves r + theta*(r*l) = l; theta=0 gives l."""
    return _eval_over_times(spec, t, theta, depth=0)


def resolvent_running_integral(spec: MeasureSpec, t, theta: float = 0.0):
    """Running integral ``(1 * r_theta)(t)``; theta=0 gives ``(1*l)(t)``."""
    return _eval_over_times(spec, t, theta, depth=1)


def resolvent_double_integral(spec: MeasureSpec, t, theta: float = 0.0):
    """Twice-iterated integral ``(1 * 1 * r_theta)(t)``; theta=0 gives (1*1*l)."""
    return _eval_over_times(spec, t, theta, depth=2)


def resolvent_triple_integral(spec: MeasureSpec, t, theta: float = 0.0):
    """Thrice-iterated integral ``(1*1*1*r_theta)(t)``; theta=0 gives (1*1*1*l)."""
    return _eval_over_times(spec, t, theta, depth=3)


def resolvent_tables(spec: MeasureSpec, t: np.ndarray, theta: float = 0.0
                     ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise r_theta plus its three iterated integrals in one sweep.

    Sampling a kernel grid needs all four quantities at every node; the
    Laplace-plane function is by far the dominant cost, so this evaluates it
    once per time and contracts it against the four panel weight vectors.
    """
    require_valid(spec)
    if theta < 0.0:
        raise ValueError("theta must be nonnegative")
    t_arr = _as_time_array(np.asarray(t, dtype=float))
    scheme = _panel_scheme(spec)
    point = np.empty(t_arr.size)
    run1 = np.empty(t_arr.size)
    run2 = np.empty(t_arr.size)
    run3 = np.empty(t_arr.size)
    for i, ti in enumerate(t_arr.ravel()):
        h, _, _ = h_laplace_eval(spec, scheme.u / ti, theta)
        point[i] = np.dot(scheme.w_exp, h) / (math.pi * ti)
        run1[i] = np.dot(scheme.w_one_minus, h) / math.pi
        run2[i] = ti * np.dot(scheme.w_double, h) / math.pi
        run3[i] = ti * ti * np.dot(scheme.w_triple, h) / math.pi
    return point, run1, run2, run3


# ---------------------------------------------------------------------------
# sampled kernels


class KernelKind(str, enum.Enum):
    K_KERNEL = "k"
    K1 = "k1"
    ONE_STAR_K = "one_star_k"
    L_KERNEL = "l"
    R_THETA = "r_theta"


_NONDECREASING = {KernelKind.ONE_STAR_K}


@dataclass(frozen=True)
class KernelGrid:
    """Samples of one kernel at t_j = j*step, j = 1..N (t = 0 excluded)."""

    kind: KernelKind
    step: float
    values: np.ndarray
    theta: float | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if self.step <= 0.0:
            raise KernelGridError("step must be positive")
        if vals.ndim != 1 or vals.size < 2:
            raise KernelGridError("need a 1-d array with at least 2 samples")
        if not np.all(np.isfinite(vals)):
            raise KernelGridError("samples must be finite")
        if np.any(vals < 0.0):
            raise KernelGridError("samples must be nonnegative")
        tol = 1e-12 * max(1.0, float(np.max(np.abs(vals))))
        diffs = np.diff(vals)
        if self.kind in _NONDECREASING:
            if np.any(diffs < -tol):
                raise KernelGridError(f"{self.kind.value} samples must be nondecreasing")
        else:
            if np.any(diffs > tol):
                raise KernelGridError(f"{self.kind.value} samples must be nonincreasing")

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def horizon(self) -> float:
        return self.step * self.n

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(1, self.n + 1)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,value\r\n")
            for t, v in zip(self.times, self.values):
                fh.write(f"{t:.17g},{v:.17g}\r\n")


def sample_kernel(spec: MeasureSpec, kind: KernelKind, step: float, n: int,
                  theta: float = 0.0) -> KernelGrid:
    require_valid(spec)
    if step <= 0 or n < 2:
        raise KernelGridError("need step > 0 and n >= 2")
    if 1.0 < _SMALL_T_FLOOR * n:
        raise KernelGridError("grid too fine: first node below the small-t floor")
    t = step * np.arange(1, n + 1)
    kind = KernelKind(kind)
    if kind is KernelKind.K_KERNEL:
        vals = k_eval(spec, t)
    elif kind is KernelKind.K1:
        vals = k1_eval(spec, t)
    elif kind is KernelKind.ONE_STAR_K:
        vals = one_star_k_eval(spec, t)
    elif kind is KernelKind.L_KERNEL:
        vals = l_eval(spec, t)
    elif kind is KernelKind.R_THETA:
        vals = r_theta_eval(spec, t, theta)
    else:  # pragma: no cover - exhaustive
        raise KernelGridError(f"unknown kind {kind}")
    return KernelGrid(kind=kind, step=step, values=np.asarray(vals),
                      theta=theta if kind is KernelKind.R_THETA else None)


# ---------------------------------------------------------------------------
# pointwise bound certificates


@dataclass(frozen=True)
class BoundCertificates:
    """Empirical constants for the pointwise kernel estimates on one grid.

    ``upper_ratio`` is l(t) * int t^(1-a) dmu, which exact analysis bounds by
    one; any sample above 1 + 1e-12 is a hard violation.  ``holder_ratio``
    tracks l(t) / t^(gamma_bar - 1) for t < 1.  The resolvent chain ratios
    are the three inequality gaps evaluated with theta = c1 / r^2 on the
    window t < c_bar * Phi(r).
    """

    t: np.ndarray
    l_values: np.ndarray
    upper_ratio: np.ndarray
    holder_ratio: np.ndarray
    chain_t: np.ndarray
    chain_r_over_avg: np.ndarray
    chain_avg_over_l: np.ndarray
    chain_l_times_K: np.ndarray
    theta: float
    r: float
    hard_violations: int

    @property
    def ok(self) -> bool:
        return self.hard_violations == 0

    def summary(self) -> dict:
        def _rng(x):
            x = x[np.isfinite(x)]
            if x.size == 0:
                return {"min": None, "max": None}
            return {"min": float(np.min(x)), "max": float(np.max(x))}

        return {
            "hard_violations": self.hard_violations,
            "upper_ratio": _rng(self.upper_ratio),
            "holder_ratio": _rng(self.holder_ratio),
            "chain_r_over_avg": _rng(self.chain_r_over_avg),
            "chain_avg_over_l": _rng(self.chain_avg_over_l),
            "chain_l_times_K": _rng(self.chain_l_times_K),
            "theta": self.theta,
            "r": self.r,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,l,upper_ratio,holder_ratio\r\n")
            for row in zip(self.t, self.l_values, self.upper_ratio,
                           self.holder_ratio):
                fh.write(",".join(repr(float(v)) for v in row) + "\r\n")


def bound_certificates(spec: MeasureSpec, step: float, n: int, *,
                       c1: float = 1.0, c_bar: float = 1.0,
                       r: float = 0.5) -> BoundCertificates:
    """Measure the sharp upper bound on l and the resolvent comparison chain."""
    from .geometry import phi  # local import to avoid a cycle

    require_valid(spec)
    t = step * np.arange(1, n + 1)
    l_vals = np.asarray(l_eval(spec, t))
    denom = t * np.asarray(k1_eval(spec, t))  # int t^(1-a) dmu = t * k1(t)
    upper = l_vals * denom
    hard = int(np.sum(upper > 1.0 + 1e-12))

    gb = gamma_bar(spec)
    mask = t < 1.0
    holder = np.full_like(t, np.nan)
    holder[mask] = l_vals[mask] / t[mask] ** (gb - 1.0)

    theta = c1 / r**2
    window = t < c_bar * phi(spec, r)
    ct = t[window]
    if ct.size:
        r_vals = np.asarray(r_theta_eval(spec, ct, theta))
        avg = np.asarray(resolvent_running_integral(spec, ct, theta)) / ct
        big_k = np.asarray(one_star_k_eval(spec, ct))
        chain1 = r_vals / avg
        chain2 = avg / l_vals[window]
        chain3 = l_vals[window] * big_k
    else:
        r_vals = avg = big_k = chain1 = chain2 = chain3 = np.array([])
    return BoundCertificates(
        t=t, l_values=l_vals, upper_ratio=upper, holder_ratio=holder,
        chain_t=ct, chain_r_over_avg=chain1, chain_avg_over_l=chain2,
        chain_l_times_K=chain3, theta=theta, r=r, hard_violations=hard,
    )
