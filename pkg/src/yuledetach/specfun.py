"""Special functions used by the closed-form in-link distributions.

Everything here works on real arguments in double precision. Gamma-function
prefactors are handled in log space so that indices up to ~1e6 never
overflow. The public functions return :class:`EvalResult` so that callers can
see which route produced a value and how trustworthy it is.

Routes
------
``gauss_2f1``
    Maclaurin series for 0 <= z < 0.95, the 1 - z connection formulas
    (including the logarithmic integer cases) for 0.95 <= z < 1, the Pfaff
    transformation for z < 0, and the Euler integral as a last resort.
``hyp_u``
    Adaptive Gauss-Kronrod quadrature of the Laplace-type integral after the
    change of variable y = s / (1 - s). This is the only route: b = 0 is a
    degenerate case for the Kummer series but harmless for the integral.
``appell_f1``
    Gauss-Kronrod quadrature of the single-integral representation.
``quadrature_oracle``
    Thin wrapper around QUADPACK (``scipy.integrate.quad``). It is deliberately
    a different integrator from the in-house Gauss-Kronrod code so that it can
    serve as an independent check.
"""

from __future__ import annotations

import enum
import heapq
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy import integrate, optimize, special

from .errors import AccuracyError, DomainError, NumericOverflowError, PoleError

__all__ = [
    "EvalResult",
    "Method",
    "log_gamma",
    "log_gamma_ratio",
    "gauss_2f1",
    "hyp2f1_series",
    "hyp_u",
    "log_hyp_u_scaled",
    "appell_f1",
    "wright_2psi1",
    "quadrature_oracle",
    "gauss_kronrod",
]

EPS = np.finfo(float).eps
MAX_TERMS = 1_000_000
DEFAULT_RTOL = 1e-11
DEFAULT_ATOL = 1e-12
# argument above which 2F1 is moved toward z = 1 before summation
_NEAR_ONE = 0.95
_BLOCK = 256


class Method(str, enum.Enum):
    SERIES = "series"
    TRANSFORMATION = "transformation"
    QUADRATURE = "quadrature"


@dataclass(frozen=True)
class EvalResult:
    """A function value together with an absolute error estimate."""

    value: float
    abs_error_estimate: float
    method: Method

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise NumericOverflowError(f"non-finite value {self.value!r} ({self.method.value})")
        err = self.abs_error_estimate
        if not (math.isfinite(err) and err >= 0.0):
            raise NumericOverflowError(f"invalid error estimate {err!r}")

    def __float__(self):
        return self.value

    @property
    def rel_error_estimate(self) -> float:
        return self.abs_error_estimate / abs(self.value) if self.value else math.inf


def _is_nonpos_int(x: float) -> bool:
    return x <= 0 and x == math.floor(x)


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"log_gamma requires finite x > 0, got {x!r}")
    return math.lgamma(x)


# B_2k / (2k (2k - 1)), k = 1..8
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360, 1 / 156, -3617 / 122400)
_STIRLING_MIN = 16.0


def log_gamma_ratio(x, a):
    """ln(Gamma(x + a) / Gamma(x)) for x > 0, x + a > 0; scalar or array.

    Differencing lgamma loses about eps * ln Gamma(x) in absolute terms, which
    is 1e-9 relative at x = 1e6 for moderate a. Here the Stirling series is
    differenced analytically, with small arguments shifted up first.
    """
    x_arr, a_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(a, dtype=float))
    scalar = x_arr.ndim == 0
    x_arr, a_arr = np.atleast_1d(x_arr).astype(float), np.atleast_1d(a_arr).astype(float)
    if np.any(~(x_arr > 0)) or np.any(~(x_arr + a_arr > 0)) or not np.all(np.isfinite(a_arr)):
        raise DomainError("log_gamma_ratio needs x > 0 and x + a > 0")
    low = np.minimum(x_arr, x_arr + a_arr)
    shift = np.where(low < _STIRLING_MIN, np.ceil(_STIRLING_MIN - low), 0.0)
    correction = np.zeros_like(x_arr)
    for j in range(int(shift.max(initial=0.0))):
        active = j < shift
        correction[active] += np.log1p(a_arr[active] / (x_arr[active] + j))
    y = x_arr + shift
    ya = y + a_arr
    out = (y - 0.5) * np.log1p(a_arr / y) + a_arr * np.log(ya) - a_arr
    inv_y2, inv_ya2 = 1.0 / (y * y), 1.0 / (ya * ya)
    py, pya = 1.0 / y, 1.0 / ya
    for c in _STIRLING:
        out += c * (pya - py)
        py *= inv_y2
        pya *= inv_ya2
    out -= correction
    return float(out[0]) if scalar else out


def _lgamma_sign(x: float) -> tuple[float, float]:
    """(ln|Gamma(x)|, sign Gamma(x)); sign is 0 at the poles."""
    if _is_nonpos_int(x):
        return -math.inf, 0.0
    if x > 0:
        return math.lgamma(x), 1.0
    return math.lgamma(x), (1.0 if math.floor(x) % 2 == 0 else -1.0)


def _gamma_ratio(num: Sequence[float], den: Sequence[float]) -> tuple[float, float, float]:
    """Log-magnitude, sign and rounding scale of prod Gamma(num) / prod Gamma(den).

    A pole in the denominator makes the ratio zero (sign 0). A pole in the
    numerator is a caller bug and raises.
    """
    log_mag, sign, scale = 0.0, 1.0, 0.0
    for x in num:
        lg, sg = _lgamma_sign(x)
        if sg == 0:
            raise PoleError(f"Gamma pole at {x!r}")
        log_mag += lg
        sign *= sg
        scale += abs(lg)
    for x in den:
        lg, sg = _lgamma_sign(x)
        if sg == 0:
            return -math.inf, 0.0, 0.0
        log_mag -= lg
        sign *= sg
        scale += abs(lg)
    return log_mag, sign, scale


# ---------------------------------------------------------------------------
# Gauss-Kronrod 7/15 adaptive integration (used by hyp_u, appell_f1 and the
# Euler-integral fallback of gauss_2f1)

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss weights on the same 15 nodes (zero on Kronrod-only nodes)
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[7] = _WG[3]
_WG15[[13, 11, 9]] = _WG[:3]


def _gk15(f, a: float, b: float) -> tuple[float, float]:
    half = 0.5 * (b - a)
    center = 0.5 * (a + b)
    fx = np.asarray(f(center + half * _NODES), dtype=float)
    fx = np.where(np.isfinite(fx), fx, 0.0)
    resk = half * np.dot(_WK, fx)
    resg = half * np.dot(_WG15, fx)
    resabs = abs(half) * np.dot(_WK, np.abs(fx))
    mean = resk / (2 * half) if half else 0.0
    resasc = abs(half) * np.dot(_WK, np.abs(fx - mean))
    err = abs(resk - resg)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > np.finfo(float).tiny / (50 * EPS):
        err = max(50 * EPS * resabs, err)
    return float(resk), float(err)


def gauss_kronrod(f: Callable, a: float, b: float, points: Sequence[float] = (),
                  rtol: float = 1e-13, atol: float = 0.0,
                  max_intervals: int = 4000) -> tuple[float, float]:
    """Globally adaptive G7/K15 quadrature of a vectorised ``f`` on [a, b].

    Returns ``(value, abs_error)``. Raises :class:`AccuracyError` when the
    tolerance cannot be met within ``max_intervals`` subintervals.
    """
    edges = sorted({float(a), float(b), *(float(p) for p in points if a < p < b)})
    heap = []
    total = 0.0
    total_err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = _gk15(f, lo, hi)
        heapq.heappush(heap, (-err, lo, hi, val))
        total += val
        total_err += err
    while total_err > max(atol, rtol * abs(total)):
        if len(heap) >= max_intervals:
            raise AccuracyError(
                f"Gauss-Kronrod did not reach rtol={rtol:g} on [{a}, {b}]",
                partial=(total, total_err),
            )
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            # interval exhausted at machine resolution
            heapq.heappush(heap, (0.0, lo, hi, val))
            total_err += neg_err
            if all(e == 0.0 for e, *_ in heap):
                break
            continue
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        total += v1 + v2 - val
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
    # recompute from the pieces to shed accumulated update rounding
    total = math.fsum(v for *_, v in heap)
    total_err = math.fsum(-e for e, *_ in heap)
    return total, total_err


def _peak_points(logf: Callable, lo: float, hi: float) -> tuple[float, list[float]]:
    """Locate the maximum of a (mostly unimodal) log-integrand on [lo, hi].

    Returns the maximum log value and breakpoints bracketing the bulk of
    the mass so the adaptive integrator does not miss a narrow peak.
    """
    width = hi - lo
    frac = np.unique(np.concatenate([
        np.geomspace(1e-12, 0.5, 96),
        np.linspace(0.0, 1.0, 129),
        1.0 - np.geomspace(1e-12, 0.5, 96),
    ]))
    grid = lo + width * frac
    with np.errstate(all="ignore"):
        vals = np.asarray(logf(grid), dtype=float)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    i = int(np.argmax(vals))
    peak_val = float(vals[i])
    if peak_val == -math.inf:
        return -math.inf, []
    peak = float(grid[i])
    if 0 < i < len(grid) - 1:
        left, right = float(grid[i - 1]), float(grid[i + 1])

        def neg(x):
            with np.errstate(all="ignore"):
                v = float(np.asarray(logf(np.array([x])))[0])
            return -v if math.isfinite(v) else math.inf

        res = optimize.minimize_scalar(neg, bounds=(left, right), method="bounded",
                                       options={"xatol": 1e-14 * max(1.0, abs(peak)) + 1e-300})
        if res.success and -res.fun >= peak_val:
            peak, peak_val = float(res.x), float(-res.fun)
    # curvature based scale, falling back to grid spacing
    h = max(abs(peak) * 1e-6, width * 1e-9)
    xs = np.array([peak - h, peak, peak + h])
    with np.errstate(all="ignore"):
        lv = np.asarray(logf(np.clip(xs, lo, hi)), dtype=float)
    curv = (lv[0] - 2 * lv[1] + lv[2]) / h**2 if np.all(np.isfinite(lv)) else 0.0
    sigma = 1.0 / math.sqrt(-curv) if curv < 0 else width / 16
    if peak <= lo + h or peak >= hi - h:
        # endpoint maximum: the decay is set by the one-sided slope
        side = 1.0 if peak <= lo + h else -1.0
        step = width * 1e-12
        with np.errstate(all="ignore"):
            lv = np.asarray(logf(np.array([peak, peak + side * step])), dtype=float)
        slope = (lv[0] - lv[1]) / step
        if math.isfinite(slope) and slope > 0:
            sigma = min(sigma, 1.0 / slope)
    sigma = min(sigma, width)
    points = [peak]
    for k in (1.0, 4.0, 16.0, 64.0):
        points.extend((peak - k * sigma, peak + k * sigma))
    points = [p for p in points if lo < p < hi]
    return peak_val, points


def _log_integral(logf: Callable, lo: float, hi: float, rtol: float) -> tuple[float, float]:
    """ln of int_lo^hi exp(logf) with peak rescaling; returns (log value, rel err)."""
    m, points = _peak_points(logf, lo, hi)
    if m == -math.inf:
        return -math.inf, 0.0

    def f(x):
        with np.errstate(all="ignore"):
            v = np.exp(np.asarray(logf(x), dtype=float) - m)
        return np.where(np.isnan(v), 0.0, v)

    try:
        val, err = gauss_kronrod(f, lo, hi, points=points, rtol=rtol)
    except AccuracyError as exc:
        # callers may still use an inaccurate piece that is negligible overall
        val, err = exc.partial
        if val <= 0:
            raise
        return m + math.log(val), err / val
    if val <= 0:
        return -math.inf, 0.0
    return m + math.log(val), err / val


def _beta_log_integral(p: float, q: float, log_g: Callable, rtol: float) -> tuple[float, float]:
    """ln int_0^1 y^(p-1) (1-y)^(q-1) g(y) dy for positive g given as log g.

    Endpoint singularities (p < 1 or q < 1) are removed by y = v^(1/p) on the
    left half and 1 - y = w^(1/q) on the right half.
    """
    pieces = []
    if p < 1:
        def left(v):
            y = np.power(v, 1.0 / p)
            return -math.log(p) + (q - 1) * np.log1p(-y) + log_g(y)
        pieces.append((left, 0.0, 0.5**p))
    else:
        def left(y):
            return (p - 1) * np.log(y) + (q - 1) * np.log1p(-y) + log_g(y)
        pieces.append((left, 0.0, 0.5))
    if q < 1:
        def right(w):
            omy = np.power(w, 1.0 / q)
            return -math.log(q) + (p - 1) * np.log1p(-omy) + log_g(1.0 - omy)
        pieces.append((right, 0.0, 0.5**q))
    else:
        def right(y):
            return (p - 1) * np.log(y) + (q - 1) * np.log1p(-y) + log_g(y)
        pieces.append((right, 0.5, 1.0))
    logs, errs = [], []
    for fn, lo, hi in pieces:
        lv, rel = _log_integral(fn, lo, hi, rtol)
        logs.append(lv)
        errs.append(rel)
    top = max(logs)
    if top == -math.inf:
        return -math.inf, 0.0
    weights = [math.exp(lv - top) for lv in logs]
    s = sum(weights)
    rel = sum(w * e for w, e in zip(weights, errs)) / s
    if rel > max(rtol, 1e-13) * 16:
        raise AccuracyError(f"beta-type integral reached only rel {rel:.3g}",
                            partial=(top + math.log(s), rel))
    return top + math.log(s), rel


def _beta_integral(p: float, q: float, g: Callable, rtol: float,
                   points: Sequence[float] = ()) -> tuple[float, float]:
    """int_0^1 y^(p-1) (1-y)^(q-1) g(y) dy for a signed, moderate g.

    ``points`` are breakpoints in y (for sharp features of g).
    """
    total, total_err = 0.0, 0.0
    left_pts = [y for y in points if 0 < y < 0.5]
    right_pts = [y for y in points if 0.5 < y < 1]
    if p < 1:
        def left(v):
            y = np.power(v, 1.0 / p)
            return np.power(1.0 - y, q - 1) * g(y) / p
        val, err = gauss_kronrod(left, 0.0, 0.5**p, [y**p for y in left_pts], rtol=rtol)
    else:
        def left(y):
            return np.power(y, p - 1) * np.power(1.0 - y, q - 1) * g(y)
        val, err = gauss_kronrod(left, 0.0, 0.5, left_pts, rtol=rtol)
    total += val
    total_err += err
    if q < 1:
        def right(w):
            omy = np.power(w, 1.0 / q)
            return np.power(1.0 - omy, p - 1) * g(1.0 - omy) / q
        val, err = gauss_kronrod(right, 0.0, 0.5**q, [(1 - y) ** q for y in right_pts], rtol=rtol)
    else:
        def right(y):
            return np.power(y, p - 1) * np.power(1.0 - y, q - 1) * g(y)
        val, err = gauss_kronrod(right, 0.5, 1.0, right_pts, rtol=rtol)
    return total + val, total_err + err


# ---------------------------------------------------------------------------
# Gauss hypergeometric function


@njit(cache=True, nogil=True)
def _series_kernel(a, b, c, z, rtol, max_terms, val, err, ok):
    for i in range(a.shape[0]):
        ai, bi, ci, zi = a[i], b[i], c[i], z[i]
        total = 1.0
        abs_total = 1.0
        term = 1.0
        tail = 0.0
        comp = 0.0
        done = zi == 0.0
        k = 0
        while not done and k < max_terms:
            ratio = (ai + k) * (bi + k) / ((ci + k) * (k + 1.0)) * zi
            term *= ratio
            # Neumaier compensated summation
            t = total + term
            if abs(total) >= abs(term):
                comp += (total - t) + term
            else:
                comp += (term - t) + total
            total = t
            abs_total += abs(term)
            k += 1
            if term == 0.0:
                tail = 0.0
                done = True
                break
            r = max(abs(ratio), abs(zi))
            if r < 1.0:
                tail = abs(term) * r / (1.0 - r)
                if tail <= rtol * abs(total + comp):
                    done = True
            else:
                tail = math.inf
            if not math.isfinite(total):
                break
        total += comp
        val[i] = total
        err[i] = tail + EPS * (math.sqrt(k + 1.0) + 10.0) * abs_total
        ok[i] = done


def hyp2f1_series(a, b, c, z, rtol: float = 1e-14, max_terms: int = MAX_TERMS):
    """Maclaurin summation of 2F1(a, b; c; z), elementwise over broadcast arrays.

    Returns ``(values, abs_errors, converged)``; entries that did not
    converge within ``max_terms`` carry their partial sums and
    ``converged=False``. No transformation is applied, so this is only
    efficient for |z| well below 1.
    """
    arrs = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, z)))
    shape = arrs[0].shape
    a, b, c, z = (np.ascontiguousarray(x.ravel()) for x in arrs)
    val = np.empty(a.size)
    err = np.empty(a.size)
    ok = np.empty(a.size, dtype=np.bool_)
    _series_kernel(a, b, c, z, float(rtol), int(max_terms), val, err, ok)
    return val.reshape(shape), err.reshape(shape), ok.reshape(shape)


def _series_result(a, b, c, z, rtol, max_terms):
    val, err, ok = hyp2f1_series(a, b, c, z, rtol=min(rtol, 2e-16), max_terms=max_terms)
    return float(val), float(err), bool(ok)


def _digamma_block(x):
    return special.digamma(x)


def _one_minus_z(a: float, b: float, c: float, z: float):
    """2F1 via the connection formulas around z = 1; None if unsuitable."""
    m_real = c - a - b
    m_int = round(m_real)
    if abs(m_real - m_int) <= 64 * EPS * (abs(a) + abs(b) + abs(c) + 1.0):
        if m_int < 0:
            # Euler: F(a,b;c;z) = (1-z)^(c-a-b) F(c-a, c-b; c; z)
            inner = _one_minus_z_integer(c - a, c - b, -m_int, z)
            if inner is None:
                return None
            val, err = inner
            pref = math.exp(m_real * math.log1p(-z))
            return val * pref, err * pref + EPS * abs(val * pref)
        return _one_minus_z_integer(a, b, m_int, z)
    if abs(m_real - m_int) < 1e-3:
        # cancellation between the two terms would eat the accuracy
        return None
    w = 1.0 - z
    parts = []
    # first term: Gamma(c) Gamma(c-a-b) / (Gamma(c-a) Gamma(c-b)) F(a, b; a+b-c+1; 1-z)
    lg1, s1, sc1 = _gamma_ratio([c, m_real], [c - a, c - b])
    if s1 != 0:
        v, e, ok = _series_result(a, b, 1.0 - m_real, w, 1e-15, 5000)
        if not ok:
            return None
        parts.append((s1, lg1, v, e, sc1))
    lg2, s2, sc2 = _gamma_ratio([c, -m_real], [a, b])
    if s2 != 0:
        v, e, ok = _series_result(c - a, c - b, 1.0 + m_real, w, 1e-15, 5000)
        if not ok:
            return None
        parts.append((s2, lg2 + m_real * math.log(w), v, e, sc2 + abs(m_real * math.log(w))))
    total, err, mag = 0.0, 0.0, 0.0
    for sign, lg, v, e, sc in parts:
        if lg > 709:
            return None
        f = sign * math.exp(lg)
        total += f * v
        mag += abs(f * v)
        err += abs(f) * e + abs(f * v) * EPS * (sc + 4)
    return total, err + 4 * EPS * mag


def _one_minus_z_integer(a: float, b: float, m: int, z: float):
    """F(a, b; a+b+m; z) for integer m >= 0 (logarithmic case)."""
    with np.errstate(over="ignore", invalid="ignore"):
        out = _log_case(a, b, m, z)
    if out is None or not (math.isfinite(out[0]) and math.isfinite(out[1])):
        return None
    return out


def _log_case(a: float, b: float, m: int, z: float):
    if _is_nonpos_int(a) or _is_nonpos_int(b):
        return None
    w = 1.0 - z
    logw = math.log(w)
    c = a + b + m
    # finite part, only for m >= 1
    finite, finite_mag, finite_err = 0.0, 0.0, 0.0
    if m >= 1:
        lg, sg, sc = _gamma_ratio([c], [a + m, b + m])
        if sg == 0:
            return None
        coef = 1.0
        acc = 0.0
        acc_abs = 0.0
        for k in range(m):
            t = coef * math.factorial(m - k - 1)
            acc += t
            acc_abs += abs(t)
            coef *= (a + k) * (b + k) / (k + 1) * (-w)
        if lg > 709:
            return None
        pref = sg * math.exp(lg)
        finite = pref * acc
        finite_mag = abs(pref) * acc_abs
        finite_err = finite_mag * EPS * (sc + 4 + m)
    # logarithmic series
    lg, sg, sc = _gamma_ratio([c], [a, b])
    if sg == 0:
        return finite, finite_err
    if lg > 709:
        return None
    pref = sg * math.exp(lg)
    total, total_abs = 0.0, 0.0
    coef = 1.0 / math.factorial(m)
    k0 = 0
    offsets = np.arange(64, dtype=float)
    converged = False
    tail = math.inf
    while k0 < 4000:
        k = k0 + offsets
        ratio = (a + m + k) * (b + m + k) / ((k + 1) * (k + m + 1)) * w
        coefs = coef * np.concatenate([[1.0], np.cumprod(ratio[:-1])])
        if m == 0:
            bracket = (2 * _digamma_block(k + 1) - _digamma_block(a + k)
                       - _digamma_block(b + k) - logw)
        else:
            bracket = (logw - _digamma_block(k + 1) - _digamma_block(k + m + 1)
                       + _digamma_block(a + k + m) + _digamma_block(b + k + m))
        terms = coefs * bracket
        total += float(terms.sum())
        total_abs += float(np.abs(terms).sum())
        coef = float(coefs[-1] * ratio[-1])
        r = max(abs(float(ratio[-1])), w)
        if r < 1:
            # bracket grows at most logarithmically; factor 2 covers it
            tail = 2 * abs(coef * float(bracket[-1])) / (1 - r)
            if tail <= 1e-16 * abs(total):
                converged = True
                break
        k0 += 64
    if not converged:
        return None
    if m == 0:
        log_part = pref * total
        log_err = abs(pref) * (tail + EPS * (sc + 8) * total_abs)
    else:
        # -(z-1)^m Gamma(c) / (Gamma(a) Gamma(b)) * S, with (z-1)^m = (-w)^m
        factor = -((-w) ** m) * pref
        log_part = factor * total
        log_err = abs(factor) * (tail + EPS * (sc + 8) * total_abs)
    value = finite + log_part
    mag = finite_mag + abs(log_part)
    return value, finite_err + log_err + 4 * EPS * mag


def _euler_integral(a: float, b: float, c: float, z: float, rtol: float):
    """2F1 from the Euler integral (needs c > b > 0 after a possible swap)."""
    if not (c > b > 0):
        a, b = b, a
    if not (c > b > 0):
        return None
    lg, sg, sc = _gamma_ratio([c], [b, c - b])

    def log_g(y):
        return -a * np.log1p(-y * z)

    log_i, rel = _beta_log_integral(b, c - b, log_g, rtol=min(rtol, 1e-13))
    log_val = lg + log_i
    if log_val > 709 or log_val < -708:
        return None
    val = sg * math.exp(log_val)
    return val, abs(val) * (rel + EPS * (sc + abs(log_i) + 4))


def _accept(val: float, err: float, rtol: float, atol: float) -> bool:
    return math.isfinite(val) and err <= max(atol, rtol * abs(val))


def _f21_unit(a, b, c, z, rtol, atol, max_terms):
    """2F1 for 0 <= z < 1 trying routes in order of cost."""
    best = None
    routes = []
    if z >= _NEAR_ONE:
        routes.append(("transformation", lambda: _one_minus_z(a, b, c, z)))
    routes.append(("series", lambda: _series_result(a, b, c, z, rtol, max_terms)))
    routes.append(("quadrature", lambda: _euler_integral(a, b, c, z, rtol)))
    for name, fn in routes:
        try:
            out = fn()
        except (AccuracyError, PoleError, OverflowError, ValueError):
            out = None
        if out is None:
            continue
        val, err = out[0], out[1]
        if not math.isfinite(val):
            continue
        if best is None or err < best[1]:
            best = (val, err, Method(name))
        if _accept(val, err, rtol, atol):
            return EvalResult(val, err, Method(name))
    if best is not None and math.isfinite(best[1]):
        partial = EvalResult(*best)
    else:
        partial = None
    raise AccuracyError(f"2F1({a}, {b}; {c}; {z}) did not converge", partial=partial)


def gauss_2f1(a: float, b: float, c: float, z: float, *, rtol: float = DEFAULT_RTOL,
              atol: float = DEFAULT_ATOL, max_terms: int = MAX_TERMS) -> EvalResult:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z < 1.

    Raises :class:`PoleError` when c is a non-positive integer and
    :class:`DomainError` for z >= 1.
    """
    a, b, c, z = float(a), float(b), float(c), float(z)
    if not all(math.isfinite(v) for v in (a, b, c, z)):
        raise DomainError("2F1 arguments must be finite")
    if _is_nonpos_int(c):
        raise PoleError(f"2F1 has a pole at c = {c}")
    if z >= 1.0:
        raise DomainError(f"2F1 is only evaluated for z < 1, got z = {z}")
    if z == 0.0 or a == 0.0 or b == 0.0:
        return EvalResult(1.0, 0.0, Method.SERIES)
    if _is_nonpos_int(a) or _is_nonpos_int(b):
        # terminating polynomial
        degree = int(-max(a if _is_nonpos_int(a) else -math.inf,
                          b if _is_nonpos_int(b) else -math.inf))
        val, err, _ = _series_result(a, b, c, z, rtol, degree + 2)
        return EvalResult(val, err, Method.SERIES)
    if z > 0.0:
        return _f21_unit(a, b, c, z, rtol, atol, max_terms)
    # Pfaff: map z < 0 into (0, 1); try the variant with the larger c - a' - b' first
    w = z / (z - 1.0)
    variants = [(a, c - b), (b, c - a)]
    if b < a:
        variants.reverse()
    best = None
    for outer, other in variants:
        out = _pfaff_variant(outer, other, c, z, w, rtol, atol, max_terms)
        if out is None:
            continue
        if _accept(out.value, out.abs_error_estimate, rtol, atol):
            return out
        if best is None or out.abs_error_estimate < best.abs_error_estimate:
            best = out
    raise AccuracyError(f"2F1({a}, {b}; {c}; {z}) did not converge", partial=best)


def _pfaff_variant(outer, other, c, z, w, rtol, atol, max_terms):
    """(1 - z)^(-outer) 2F1(outer, other; c; w); None on overflow or no estimate."""
    log_pref = -outer * math.log1p(-z)
    if log_pref > 709:
        raise NumericOverflowError(f"2F1 prefactor overflows for z = {z}")
    pref = math.exp(log_pref)
    if other == 0.0:
        return EvalResult(pref, pref * 4 * EPS, Method.TRANSFORMATION)
    if _is_nonpos_int(outer) or _is_nonpos_int(other):
        degree = int(-min(v for v in (outer, other) if _is_nonpos_int(v)))
        val, err, _ = _series_result(outer, other, c, w, rtol, degree + 2)
        inner = EvalResult(val, err, Method.SERIES)
    else:
        try:
            inner = _f21_unit(outer, other, c, w, rtol, atol / pref if pref else atol, max_terms)
        except AccuracyError as exc:
            inner = exc.partial
            if inner is None:
                return None
    val = inner.value * pref
    err = inner.abs_error_estimate * pref + abs(val) * EPS * (abs(log_pref) + 2)
    return EvalResult(val, err, Method.TRANSFORMATION)


# ---------------------------------------------------------------------------
# Confluent hypergeometric U


def log_hyp_u_scaled(a: float, b: float, z: float, rtol: float = 1e-13) -> tuple[float, float]:
    """ln(Gamma(a) U(a, b, z)) and its absolute error, for a > 0, z > 0.

    With y = s / (1 - s) the Laplace integral becomes
    int_0^1 exp(-z s / (1 - s)) s^(a-1) (1 - s)^(-b) ds, which is evaluated
    with peak rescaling so that large ``a`` neither overflows nor underflows.
    """
    a, b, z = float(a), float(b), float(z)
    if not (a > 0 and z > 0) or not all(math.isfinite(v) for v in (a, b, z)):
        raise DomainError(f"hyp_u requires a > 0 and z > 0, got a={a}, z={z}")

    def log_g(s):
        return -z * s / (1.0 - s) - b * np.log1p(-s)

    log_i, rel = _beta_log_integral(a, 1.0, log_g, rtol=rtol)
    if log_i == -math.inf:
        raise NumericOverflowError("U integral underflowed entirely")
    return log_i, rel + EPS * (abs(log_i) + 4)


def hyp_u(a: float, b: float, z: float) -> EvalResult:
    """Confluent hypergeometric function U(a, b, z) for a > 0, z > 0."""
    try:
        log_i, abs_log_err = log_hyp_u_scaled(a, b, z)
    except AccuracyError as exc:
        log_i, rel = exc.partial
        log_val = log_i - math.lgamma(float(a))
        partial = None
        if -708.0 < log_val < 709.0:
            val = math.exp(log_val)
            partial = EvalResult(val, val * rel, Method.QUADRATURE)
        raise AccuracyError(f"U({a}, {b}, {z}) did not converge", partial=partial) from None
    log_val = log_i - math.lgamma(float(a))
    if not -708.0 < log_val < 709.0:
        raise NumericOverflowError(f"U({a}, {b}, {z}) is outside double range (log={log_val:.3g})")
    val = math.exp(log_val)
    err = val * (abs_log_err + EPS * (abs(math.lgamma(float(a))) + 2))
    return EvalResult(val, err, Method.QUADRATURE)


# ---------------------------------------------------------------------------
# Appell F1


def appell_f1(a: float, b1: float, b2: float, c: float, z1: float, z2: float,
              rtol: float = 1e-12) -> EvalResult:
    """Appell F1(a; b1, b2; c; z1, z2) from its single-integral representation.

    Requires c > a > 0. An argument z_i >= 1 is accepted only when b_i is a
    non-positive integer, i.e. when its factor (1 - y z_i)^(-b_i) is a
    polynomial in y and the integral stays regular.
    """
    a, b1, b2, c, z1, z2 = map(float, (a, b1, b2, c, z1, z2))
    if not all(math.isfinite(v) for v in (a, b1, b2, c, z1, z2)):
        raise DomainError("appell_f1 arguments must be finite")
    if not (c > a > 0):
        raise DomainError(f"appell_f1 requires c > a > 0, got a={a}, c={c}")
    for bi, zi in ((b1, z1), (b2, z2)):
        if zi >= 1 and not _is_nonpos_int(bi):
            raise DomainError(f"appell_f1 argument {zi} >= 1 with exponent {bi}")
    if (z1 == 0 or b1 == 0) and (z2 == 0 or b2 == 0):
        return EvalResult(1.0, 0.0, Method.QUADRATURE)

    def factor(y, bi, zi):
        if bi == 0 or zi == 0:
            return 1.0
        if _is_nonpos_int(bi):
            return np.power(1.0 - y * zi, int(-bi))
        return np.exp(-bi * np.log1p(-y * zi))

    def g(y):
        return factor(y, b1, z1) * factor(y, b2, z2)

    # sharp features at y ~ 1/|z| (large |z|) and y ~ 1 - (1 - z) for z near 1
    points = []
    for zi in (z1, z2):
        if abs(zi) > 4:
            points.extend(k / abs(zi) for k in (0.25, 1.0, 4.0, 16.0, 64.0))
        if 0.5 < zi < 1:
            points.extend(1 - k * (1 - zi) for k in (0.5, 1.0, 4.0, 16.0))
    lg, sg, sc = _gamma_ratio([c], [a, c - a])
    val, err = _beta_integral(a, c - a, g, rtol=rtol, points=points)
    pref = sg * math.exp(lg)
    value = pref * val
    return EvalResult(value, abs(pref) * err + abs(value) * EPS * (sc + 4), Method.QUADRATURE)


# ---------------------------------------------------------------------------
# Generalised Wright function 2Psi1


def wright_2psi1(params, z: float, rtol: float = 1e-14,
                 max_terms: int = MAX_TERMS) -> EvalResult:
    """Generalised Wright function 2Psi1[(a1, A1), (a2, A2); (b1, B1) | z].

    ``params`` is ``((a1, A1), (a2, A2), (b1, B1))``. The series
    sum_r Gamma(a1 + A1 r) Gamma(a2 + A2 r) / Gamma(b1 + B1 r) z^r / r! is
    summed in log space, so large Gamma arguments are harmless.
    """
    (a1, A1), (a2, A2), (b1, B1) = params
    a1, A1, a2, A2, b1, B1, z = map(float, (a1, A1, a2, A2, b1, B1, z))
    if min(A1, A2, B1) <= 0:
        raise DomainError("Wright function scale parameters must be positive")
    delta = B1 - A1 - A2
    rho = A1 ** (-A1) * A2 ** (-A2) * B1**B1
    if delta < -1 - 1e-15 or (abs(delta + 1) <= 1e-15 and abs(z) >= rho):
        raise DomainError(f"2Psi1 series diverges for these parameters at z={z}")
    if z == 0.0:
        lg, sg, sc = _gamma_ratio([a1, a2], [b1])
        val = sg * math.exp(lg)
        return EvalResult(val, abs(val) * EPS * (sc + 2), Method.SERIES)
    total, total_abs = 0.0, 0.0
    k0 = 0
    log_z = math.log(abs(z))
    zsign = -1.0 if z < 0 else 1.0
    tail = math.inf
    while k0 < max_terms:
        r = k0 + np.arange(_BLOCK, dtype=float)
        x1, x2, y1 = a1 + A1 * r, a2 + A2 * r, b1 + B1 * r
        if np.any((x1 <= 0) & (x1 == np.floor(x1))) or np.any((x2 <= 0) & (x2 == np.floor(x2))):
            raise DomainError("2Psi1 numerator Gamma hits a pole")
        logt = (special.gammaln(x1) + special.gammaln(x2) - special.gammaln(y1)
                - special.gammaln(r + 1) + r * log_z)
        sign = special.gammasgn(x1) * special.gammasgn(x2) * special.gammasgn(y1)
        sign = sign * np.where(r % 2 == 1, zsign, 1.0)
        terms = sign * np.exp(logt)
        total += float(terms.sum())
        total_abs += float(np.abs(terms).sum())
        ratio = math.exp(logt[-1] - logt[-2]) if np.isfinite(logt[-2]) else 0.0
        if ratio < 1:
            tail = abs(float(terms[-1])) * ratio / (1 - ratio)
            if tail <= rtol * abs(total):
                break
        k0 += _BLOCK
    else:
        raise AccuracyError("2Psi1 series did not converge",
                            partial=EvalResult(total, tail if math.isfinite(tail) else abs(total), Method.SERIES))
    n = k0 + _BLOCK
    err = tail + EPS * (math.sqrt(n) + 10) * total_abs
    return EvalResult(total, err, Method.SERIES)


# ---------------------------------------------------------------------------
# QUADPACK oracle


def quadrature_oracle(integrand: Callable[[float], float], domain: tuple[float, float],
                      rel_tol: float = 1e-10, abs_tol: float = 0.0,
                      points: Sequence[float] | None = None, limit: int = 1000,
                      endpoint_powers: tuple[float, float] | None = None) -> EvalResult:
    """Adaptive QUADPACK integration of a scalar function over ``domain``.

    A semi-infinite domain [lo, inf) is mapped onto [0, 1) with
    y = lo + s / (1 - s), dy = ds / (1 - s)^2, before integration.
    Breakpoints are given in the original variable.

    ``endpoint_powers=(p, q)`` integrates integrand(y) (y - lo)^p (hi - y)^q
    on a finite domain with the algebraic-weight rule, which handles
    endpoint singularities exactly.
    """
    lo, hi = map(float, domain)
    if not lo < hi:
        raise DomainError(f"empty integration domain {domain!r}")
    if math.isinf(lo):
        raise DomainError("lower limit must be finite")
    if endpoint_powers is not None:
        p, q = map(float, endpoint_powers)
        if math.isinf(hi) or not (p > -1 and q > -1):
            raise DomainError("endpoint_powers needs a finite domain and powers > -1")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            out = integrate.quad(integrand, lo, hi, weight="alg", wvar=(p, q), epsabs=abs_tol,
                                 epsrel=max(rel_tol, 5e-29), limit=limit, full_output=1)
        value, err = float(out[0]), abs(float(out[1]))
        if len(out) > 3:
            partial = EvalResult(value, err, Method.QUADRATURE) if math.isfinite(value) else None
            raise AccuracyError(f"quadrature did not converge: {out[3]}", partial=partial)
        return EvalResult(value, err, Method.QUADRATURE)
    if math.isinf(hi):
        def g(s):
            if s >= 1.0:
                return 0.0
            return integrand(lo + s / (1.0 - s)) / (1.0 - s) ** 2
        mapped = [(p - lo) / (1.0 + p - lo) for p in (points or ()) if p > lo]
        a, b = 0.0, 1.0
    else:
        g = integrand
        mapped = [p for p in (points or ()) if lo < p < hi]
        a, b = lo, hi
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(g, a, b, epsabs=abs_tol, epsrel=max(rel_tol, 5e-29),
                             limit=limit, points=mapped or None, full_output=1)
    value, err = float(out[0]), abs(float(out[1]))
    if len(out) > 3:
        partial = EvalResult(value, err, Method.QUADRATURE) if math.isfinite(value) else None
        raise AccuracyError(f"quadrature did not converge: {out[3]}", partial=partial)
    return EvalResult(value, err, Method.QUADRATURE)
