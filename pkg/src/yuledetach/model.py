"""Limiting in-link distribution of the generalized Yule model.

Pages arrive by a linear birth process with rate constant ``beta``; the
in-links of each page then follow an independent linear birth-death process
with birth rate ``lam`` and death rate ``mu`` started from one link. The
quantities here describe N, the in-link count of a page picked at random as
the observation time tends to infinity, whose age is Exp(beta).

The limit law depends on the rates only through b = beta / lam and
m = mu / lam, so every formula below is evaluated on those two ratios. This
makes the results invariant under a common rescaling of time.

Writing L and S for the larger and smaller of (lam, mu), s = beta / |lam - mu|
and w = S / L, the non-critical pmf takes the form

    P(N = n) = w^{k(n)} (beta / L) B(n, 1 + s) 2F1(s, n; n + 1 + s; w)

with k(n) = 0 in the supercritical case and k(n) = n - 1 in the subcritical
case. The hypergeometric factor is the Euler-transformed version of
2F1(n + 1, 1 + s; n + 1 + s; w) and converges much faster.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import AccuracyError, DomainError

__all__ = [
    "ModelParams",
    "Regime",
    "PmfTable",
    "regime",
    "birth_pmf",
    "bd_transient_pmf",
    "yule_simon_pmf",
    "yule_finite_time_pmf",
    "pmf_zero",
    "pmf",
    "pmf_series",
    "pmf_reparam",
    "pmf_quadrature",
    "tail_mass",
    "mean",
    "variance",
    "pgf",
    "tail_ratio",
    "tail_ratio_asymptotic",
    "tail_dominant",
    "cdf",
    "pmf_table",
]

CRITICAL_RTOL = 1e-12
# vectorised series budget before falling back to the scalar 2F1 routes
_VECTOR_TERMS = 20_000
_CHUNK = 2048


class Regime(str, enum.Enum):
    SUPERCRITICAL = "supercritical"
    CRITICAL = "critical"
    SUBCRITICAL = "subcritical"
    PURE_YULE = "pure_yule"


@dataclass(frozen=True)
class ModelParams:
    """Rates (beta, lam, mu) of the generalized Yule model."""

    beta: float
    lam: float
    mu: float = 0.0

    def __post_init__(self):
        for name in ("beta", "lam", "mu"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float, np.integer, np.floating)):
                raise DomainError(f"{name} must be a real number, got {v!r}")
            object.__setattr__(self, name, float(v))
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.beta <= 0:
            raise DomainError(f"beta must be > 0, got {self.beta}")
        if self.lam <= 0:
            raise DomainError(f"lambda must be > 0, got {self.lam}")
        if self.mu < 0:
            raise DomainError(f"mu must be >= 0, got {self.mu}")

    @classmethod
    def from_delta(cls, beta: float, delta: float, mu: float) -> "ModelParams":
        """Parameters given as (beta, delta = lam - mu, mu)."""
        return cls(beta, float(mu) + float(delta), mu)

    @classmethod
    def from_ratios(cls, beta_over_lambda: float, mu_over_lambda: float,
                    lam: float = 1.0) -> "ModelParams":
        return cls(beta_over_lambda * lam, lam, mu_over_lambda * lam)

    @property
    def delta(self) -> float:
        return self.lam - self.mu

    @property
    def regime(self) -> Regime:
        return regime(self)

    @property
    def ratios(self) -> tuple[float, float]:
        """(beta / lam, mu / lam), the identifiable part of the parameters."""
        return self.beta / self.lam, self.mu / self.lam

    def scaled(self, c: float) -> "ModelParams":
        return ModelParams(c * self.beta, c * self.lam, c * self.mu)


def regime(params: ModelParams) -> Regime:
    if params.mu == 0.0:
        return Regime.PURE_YULE
    if abs(params.lam - params.mu) <= CRITICAL_RTOL * params.lam:
        return Regime.CRITICAL
    return Regime.SUPERCRITICAL if params.lam > params.mu else Regime.SUBCRITICAL


def _check_n(n, minimum: int) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) and not (
            isinstance(n, float) and n.is_integer()):
        raise DomainError(f"n must be an integer, got {n!r}")
    n = int(n)
    if n < minimum:
        raise DomainError(f"n must be >= {minimum}, got {n}")
    return n


def _log_beta(x, a):
    """ln B(x, a) for large x without the cancellation of differenced lgamma."""
    return math.lgamma(a) - specfun.log_gamma_ratio(x, a)


def _check_rate(name: str, v: float, allow_zero: bool = False) -> float:
    v = float(v)
    if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise DomainError(f"{name} must be {'>= 0' if allow_zero else '> 0'}, got {v}")
    return v


# ---------------------------------------------------------------------------
# transient building blocks


def birth_pmf(n: int, t: float, lam: float) -> float:
    """P(Y_t = n) for a linear birth process started at one individual."""
    n = _check_n(n, 1)
    t = float(t)
    if not t >= 0:
        raise DomainError(f"t must be >= 0, got {t}")
    lam = _check_rate("lambda", lam)
    if n == 1:
        return math.exp(-lam * t)
    if t == 0:
        return 0.0
    return math.exp(-lam * t + (n - 1) * math.log(-math.expm1(-lam * t)))


def _bd_parts(t: float, lam: float, mu: float) -> tuple[float, float, float, float]:
    """(alpha, 1 - alpha, b, 1 - b) of the transient birth-death law.

    P(X_t = 0) = alpha and P(X_t = n) = (1 - alpha)(1 - b) b^(n-1) for n >= 1.
    """
    if mu == 0.0:
        f = math.exp(-lam * t)
        return 0.0, 1.0, -math.expm1(-lam * t), f
    delta = lam - mu
    if abs(delta) <= CRITICAL_RTOL * lam:
        x = lam * t
        a = x / (1.0 + x)
        return a, 1.0 / (1.0 + x), a, 1.0 / (1.0 + x)
    if delta > 0:
        f = math.exp(-delta * t)
        omf = -math.expm1(-delta * t)
        den = lam - mu * f
        return mu * omf / den, delta / den, lam * omf / den, f * delta / den
    e = math.exp(delta * t)
    ome = -math.expm1(delta * t)
    den = mu - lam * e
    return mu * ome / den, e * (-delta) / den, lam * ome / den, (-delta) / den


def bd_transient_pmf(n: int, t: float, lam: float, mu: float) -> float:
    """P(X_t = n) for a linear birth-death process with X_0 = 1."""
    n = _check_n(n, 0)
    t = float(t)
    if not t >= 0 or math.isinf(t):
        raise DomainError(f"t must be finite and >= 0, got {t}")
    lam = _check_rate("lambda", lam)
    mu = _check_rate("mu", mu, allow_zero=True)
    alpha, one_minus_alpha, b, one_minus_b = _bd_parts(t, lam, mu)
    if n == 0:
        return alpha
    if n == 1:
        return one_minus_alpha * one_minus_b
    if b == 0.0:
        return 0.0
    return one_minus_alpha * one_minus_b * math.exp((n - 1) * math.log(b))


def yule_simon_pmf(n, beta: float, lam: float):
    """Yule-Simon law rho B(n, 1 + rho) with rho = beta / lam (n >= 1).

    Accepts a scalar or an integer array for ``n``.
    """
    beta = _check_rate("beta", beta)
    lam = _check_rate("lambda", lam)
    rho = beta / lam
    if np.ndim(n) == 0:
        n = _check_n(n, 1)
        return math.exp(math.log(rho) + _log_beta(n, 1.0 + rho))
    arr = np.asarray(n)
    if arr.size and (not np.issubdtype(arr.dtype, np.integer) or arr.min() < 1):
        raise DomainError("n must contain integers >= 1")
    return np.exp(math.log(rho) + _log_beta(arr.astype(float), 1.0 + rho))


def yule_finite_time_pmf(n: int, t: float, beta: float, lam: float,
                         rel_tol: float = 1e-11) -> float:
    """P(N^Y_t = n): in-link count of a random page after time t, Yule model.

    The age of a random page is an Exp(beta) variable truncated to [0, t].
    """
    n = _check_n(n, 1)
    t = float(t)
    if not t > 0 or math.isinf(t):
        raise DomainError(f"t must be finite and > 0, got {t}")
    beta = _check_rate("beta", beta)
    lam = _check_rate("lambda", lam)

    def integrand(y):
        return math.exp(-(beta + lam) * y) * (-math.expm1(-lam * y)) ** (n - 1)

    res = specfun.quadrature_oracle(integrand, (0.0, t), rel_tol=rel_tol)
    return beta / (-math.expm1(-beta * t)) * res.value


# ---------------------------------------------------------------------------
# limit law


def _noncritical(params: ModelParams):
    """(s, w, b_over_L, log_w_or_None) for the non-critical closed forms."""
    b, m = params.ratios
    if m < 1.0:
        return b / (1.0 - m), m, b, None
    # subcritical: roles of lam and mu swap
    return b / (m - 1.0), 1.0 / m, b / m, -math.log(m)


def _f21(a, b, c, z):
    # relative accuracy only: the values are multiplied and logged, and can be tiny
    return specfun.gauss_2f1(a, b, c, z, atol=0.0)


def pmf_zero(params: ModelParams) -> float:
    """P(N = 0): probability that a random page has lost all its in-links."""
    reg = regime(params)
    if reg is Regime.PURE_YULE:
        return 0.0
    b, m = params.ratios
    if reg is Regime.CRITICAL:
        return specfun.hyp_u(1.0, 0.0, b).value
    s, w, _, _ = _noncritical(params)
    r = _f21(1.0, s, 2.0 + s, w).value / (1.0 + s)
    return w * r if reg is Regime.SUPERCRITICAL else r


def _f_kernel(s: float, n: np.ndarray, w: float) -> np.ndarray:
    """2F1(s, n; n + 1 + s; w) for an array of n >= 1."""
    out = np.empty(n.shape, dtype=float)
    for lo in range(0, n.size, _CHUNK):
        part = n[lo:lo + _CHUNK].astype(float)
        vals, _, ok = specfun.hyp2f1_series(s, part, part + 1.0 + s, w,
                                            rtol=1e-15, max_terms=_VECTOR_TERMS)
        for i in np.flatnonzero(~ok):
            vals[i] = _f21(s, part[i], part[i] + 1.0 + s, w).value
        out[lo:lo + _CHUNK] = vals
    return out


def _pmf_positive(n: np.ndarray, params: ModelParams) -> np.ndarray:
    reg = regime(params)
    b, _ = params.ratios
    nf = n.astype(float)
    if reg is Regime.PURE_YULE:
        return np.exp(math.log(b) + _log_beta(nf, 1.0 + b))
    if reg is Regime.CRITICAL:
        out = np.empty(n.shape)
        for i, k in enumerate(n):
            log_i, _ = specfun.log_hyp_u_scaled(float(k), 0.0, b)
            out[i] = b * math.exp(log_i)
        return out
    s, w, pref, log_w = _noncritical(params)
    log_p = math.log(pref) + _log_beta(nf, 1.0 + s) + np.log(_f_kernel(s, n, w))
    if log_w is not None:
        log_p = log_p + (nf - 1.0) * log_w
    return np.exp(log_p)


def pmf(n, params: ModelParams):
    """P(N = n) of the limiting in-link law. ``n`` may be an integer array."""
    if np.ndim(n) == 0:
        n = _check_n(n, 0)
        if n == 0:
            return pmf_zero(params)
        return float(_pmf_positive(np.array([n]), params)[0])
    arr = np.asarray(n)
    if arr.size == 0:
        return np.zeros(0)
    if not np.issubdtype(arr.dtype, np.integer) or arr.min() < 0:
        raise DomainError("n must contain integers >= 0")
    flat = arr.ravel()
    out = np.empty(flat.shape)
    zero = flat == 0
    if zero.any():
        out[zero] = pmf_zero(params)
    if (~zero).any():
        out[~zero] = _pmf_positive(flat[~zero], params)
    return out.reshape(arr.shape)


def pmf_series(n: int, params: ModelParams, rtol: float = 1e-13,
               max_terms: int = 1_000_000) -> float:
    """Supercritical pmf from its absolutely convergent power series in mu / lam.

    beta delta / (n lam^2) sum_r Gamma(n+1+r) Gamma(1+r+s) / (r! Gamma(n+1+s+r)) w^r
    with s = beta / delta and w = mu / lam, summed through the term ratio.
    """
    n = _check_n(n, 1)
    if regime(params) not in (Regime.SUPERCRITICAL, Regime.PURE_YULE):
        raise DomainError("pmf_series needs lam > mu")
    b, w = params.ratios
    s = b / (1.0 - w)
    log_first = _log_beta(n + 1.0, s) + math.log(s)
    term, total = 1.0, 1.0
    r = 0
    while True:
        ratio = (n + 1.0 + r) * (1.0 + s + r) / ((r + 1.0) * (n + 1.0 + s + r)) * w
        term *= ratio
        total += term
        r += 1
        if ratio < 1.0 and term * ratio / (1.0 - ratio) <= rtol * total:
            break
        if r >= max_terms:
            raise AccuracyError(f"pmf_series did not converge for n={n}",
                                partial=total)
    return b * (1.0 - w) / n * math.exp(log_first) * total


def pmf_reparam(n: int, beta: float, delta: float, mu: float) -> float:
    """Supercritical pmf written as Yule law with parameter delta times a correction.

    P(N = n) = P(N^Y = n; beta, delta) (delta / (mu + delta))^(1 - s)
               2F1(s, 1 + s; n + 1 + s; -mu / delta),   s = beta / delta
    """
    n = _check_n(n, 1)
    beta = _check_rate("beta", beta)
    delta = _check_rate("delta", delta)
    mu = _check_rate("mu", mu, allow_zero=True)
    return yule_simon_pmf(n, beta, delta) * tail_ratio(n, beta, delta, mu)


def pmf_quadrature(n: int, params: ModelParams, rel_tol: float = 1e-12) -> float:
    """P(N = n) by integrating the transient law against the Exp(beta) age.

    Non-critical cases integrate over x = exp(-|delta| t) in (0, 1]; the
    critical case integrates over t in [0, inf). Independent of the closed
    forms; intended as a verification route.
    """
    n = _check_n(n, 0)
    b, m = params.ratios
    lam, mu = 1.0, m
    reg = regime(params)
    if reg in (Regime.CRITICAL, Regime.PURE_YULE):
        def integrand(t):
            return b * math.exp(-b * t) * bd_transient_pmf(n, t, lam, mu if reg is Regime.CRITICAL else 0.0)
        scale = 1.0 / b
        pts = [scale, 10 * scale] + ([n / (1.0 + b), 3.0 * n] if n > 1 else [])
        return specfun.quadrature_oracle(integrand, (0.0, math.inf), rel_tol=rel_tol,
                                         points=pts).value
    d = abs(lam - mu)
    s = b / d

    def integrand(x):
        if x <= 0.0:
            return 0.0
        return s * x ** (s - 1.0) * bd_transient_pmf(n, -math.log(x) / d, lam, mu)

    pts = [min(0.5, k / max(n, 1)) for k in (0.01, 0.1, 1.0, 10.0)]
    return specfun.quadrature_oracle(integrand, (0.0, 1.0), rel_tol=rel_tol,
                                     points=sorted(set(pts))).value


def tail_mass(n_max: int, params: ModelParams) -> float:
    """P(N > n_max), in closed form for every regime."""
    n = _check_n(n_max, 0)
    reg = regime(params)
    b, m = params.ratios
    if reg is Regime.CRITICAL:
        log_i, _ = specfun.log_hyp_u_scaled(n + 1.0, 1.0, b)
        return b * math.exp(log_i)
    if reg is Regime.PURE_YULE:
        return math.exp(math.log(b) + _log_beta(n + 1.0, b))
    if reg is Regime.SUPERCRITICAL:
        d = 1.0 - m
        s = b / d
        log_k = (1.0 - s) * math.log(d)
        f = _f21(s, s, n + 1.0 + s, -m / d).value
        return math.exp(log_k + _log_beta(n + 1.0, s) + math.log(s)
                        + math.log(f)) if f > 0 else 0.0
    s, w, pref, log_w = _noncritical(params)
    f = _f21(n + 1.0, s + 1.0, n + s + 2.0, w).value
    return math.exp(n * log_w + math.log(pref) + _log_beta(n + 1.0, s + 1.0) + math.log(f))


# ---------------------------------------------------------------------------
# moments and generating function


def mean(params: ModelParams) -> float:
    """E N; ``math.inf`` when lam > mu and beta <= lam - mu."""
    b, m = params.ratios
    if regime(params) is Regime.CRITICAL:
        return 1.0
    d = 1.0 - m
    if d > 0 and b <= d:
        return math.inf
    return b / (b - d)


def variance(params: ModelParams) -> float:
    """Var N; ``math.inf`` when lam > mu and beta <= 2 (lam - mu)."""
    b, m = params.ratios
    if regime(params) is Regime.CRITICAL:
        return 2.0 / b
    d = 1.0 - m
    if d > 0 and b <= 2 * d:
        return math.inf
    first = b / (b - d)
    second = 2.0 * b / ((b - 2.0 * d) * d) - (1.0 + m) * b / ((b - d) * d)
    return second - first * first


def pgf(u: float, params: ModelParams) -> float:
    """G(u) = E u^N for u in [-1, 1]."""
    u = float(u)
    if not -1.0 <= u <= 1.0:
        raise DomainError(f"pgf is evaluated for u in [-1, 1], got {u}")
    if u == 1.0:
        return 1.0
    reg = regime(params)
    b, m = params.ratios
    if reg is Regime.PURE_YULE:
        return b * u / (1.0 + b) * _f21(1.0, 1.0, 2.0 + b, u).value
    if reg is Regime.CRITICAL:
        x = b / (1.0 - u)
        return 1.0 - b * specfun.hyp_u(1.0, 1.0, x).value
    if reg is Regime.SUPERCRITICAL:
        s = b / (1.0 - m)
        z1 = (u - m) / (m * (u - 1.0))
        z2 = (u - m) / (u - 1.0)
        return m * specfun.appell_f1(s, -1.0, 1.0, 1.0 + s, z1, z2).value
    s = b / (m - 1.0)
    z1 = m * (u - 1.0) / (u - m)
    z2 = (u - 1.0) / (u - m)
    return specfun.appell_f1(s, -1.0, 1.0, 1.0 + s, z1, z2).value


# ---------------------------------------------------------------------------
# tail behaviour relative to the Yule law with parameter delta


def _tail_args(beta, delta, mu):
    beta = _check_rate("beta", beta)
    delta = _check_rate("delta", delta)
    mu = _check_rate("mu", mu, allow_zero=True)
    s = beta / delta
    x = mu / delta
    return s, x, (1.0 - s) * -math.log1p(x)


def tail_ratio(n: int, beta: float, delta: float, mu: float) -> float:
    """Exact P(N = n) / P(N^Y = n) with the Yule law taken at (beta, delta)."""
    n = _check_n(n, 1)
    s, x, log_k = _tail_args(beta, delta, mu)
    if x == 0.0:
        return 1.0
    return math.exp(log_k) * _f21(s, 1.0 + s, n + 1.0 + s, -x).value


def tail_ratio_asymptotic(n: int, beta: float, delta: float, mu: float,
                          order: int = 2) -> float:
    """Large-n expansion of :func:`tail_ratio` to first or second order.

    K (1 - s (1 + s) (mu / delta) / (n + 1 + s)) with K = (delta / (mu + delta))^(1 - s).
    """
    n = _check_n(n, 1)
    if order not in (1, 2):
        raise DomainError(f"order must be 1 or 2, got {order}")
    s, x, log_k = _tail_args(beta, delta, mu)
    k = math.exp(log_k)
    if order == 1:
        return k
    return k * (1.0 - s * (1.0 + s) * x / (n + 1.0 + s))


def tail_dominant(n: int, beta: float, delta: float, mu: float) -> float:
    """Leading power-law term n^(-1-s) Gamma(1+s) s K of P(N = n)."""
    n = _check_n(n, 1)
    s, _, log_k = _tail_args(beta, delta, mu)
    return math.exp(-(1.0 + s) * math.log(n) + math.lgamma(1.0 + s) + math.log(s) + log_k)


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class PmfTable:
    """P(N = n) for n = 0..n_max together with the mass beyond n_max."""

    params: ModelParams
    probabilities: np.ndarray
    tail_mass_bound: float

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    @property
    def n_max(self) -> int:
        return len(self.probabilities) - 1

    @property
    def entries(self) -> dict[int, float]:
        return {i: float(v) for i, v in enumerate(self.probabilities)}

    @property
    def total(self) -> float:
        return math.fsum(self.probabilities) + self.tail_mass_bound

    def cdf(self, n: int, include_zero: bool = True) -> float:
        if not 0 <= n <= self.n_max:
            raise DomainError(f"n must be within [0, {self.n_max}]")
        head = math.fsum(self.probabilities[: n + 1])
        if include_zero:
            return head
        p0 = float(self.probabilities[0])
        return (head - p0) / (1.0 - p0)


def pmf_table(params: ModelParams, n_max: int | None = None,
              tail_tol: float = 1e-9, max_n: int = 1 << 16) -> PmfTable:
    """Tabulate the pmf up to ``n_max``.

    Without ``n_max`` the table grows geometrically from 128 until the
    remaining mass drops below ``tail_tol`` or ``max_n`` is reached; the
    remaining mass is always reported exactly.
    """
    if n_max is not None:
        n_max = _check_n(n_max, 0)
        return PmfTable(params, pmf(np.arange(n_max + 1), params), tail_mass(n_max, params))
    n = 128
    while True:
        t = tail_mass(n, params)
        if t < tail_tol or n >= max_n:
            break
        n = min(2 * n, max_n)
    return PmfTable(params, pmf(np.arange(n + 1), params), t)


def cdf(n: int, params: ModelParams, include_zero: bool = True) -> float:
    """P(N <= n), or P(N <= n | N >= 1) when ``include_zero`` is false."""
    n = _check_n(n, 0)
    upper = tail_mass(n, params)
    if include_zero:
        return 1.0 - upper
    p0 = pmf_zero(params)
    return (1.0 - p0 - upper) / (1.0 - p0)
