"""Fitting the model to in-link histograms.

Two estimators are provided:

* :func:`tail_regression` fits a straight line to the log empirical pmf
  against log n in the tail. The slope gives beta / delta, and the intercept
  then gives mu / delta through the dominant-term asymptotics.
* :func:`fit_mle` maximises the multinomial likelihood over the two
  identifiable ratios (beta / lam, mu / lam).

:func:`goodness_of_fit` gives a Pearson chi-square with adaptive bin
merging. :func:`synthetic_histogram` draws test data from the model.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, TextIO

import numpy as np
from scipy import optimize, stats

from . import model
from .errors import DomainError, FitError, InputFormatError
from .model import ModelParams

__all__ = [
    "DegreeHistogram",
    "FitMethod",
    "FitResult",
    "GofReport",
    "tail_regression",
    "fit_mle",
    "goodness_of_fit",
    "synthetic_histogram",
    "UNIDENTIFIABLE_BAND",
]

# |1 - beta/delta| below this leaves the intercept without information on mu
UNIDENTIFIABLE_BAND = 0.02
MU_OVER_DELTA_MAX = 1e6


@dataclass(frozen=True)
class DegreeHistogram:
    """Counts of pages by in-link number."""

    counts: Mapping[int, int]

    def __post_init__(self):
        clean = {}
        for n, c in dict(self.counts).items():
            if isinstance(n, bool) or isinstance(c, bool):
                raise DomainError("histogram keys and counts must be integers")
            if int(n) != n or int(c) != c:
                raise DomainError(f"non-integer histogram entry {n!r}: {c!r}")
            n, c = int(n), int(c)
            if n < 0 or c < 0:
                raise DomainError(f"negative histogram entry {n}: {c}")
            if c:
                clean[n] = clean.get(n, 0) + c
        if not clean:
            raise DomainError("histogram has no positive counts")
        object.__setattr__(self, "counts", dict(sorted(clean.items())))

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def support(self) -> np.ndarray:
        return np.fromiter(self.counts.keys(), dtype=np.int64, count=len(self.counts))

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([float(c) for c in self.counts.values()])

    def without_zero(self) -> "DegreeHistogram":
        return DegreeHistogram({n: c for n, c in self.counts.items() if n > 0})

    def empirical_pmf(self) -> dict[int, float]:
        total = self.total
        return {n: c / total for n, c in self.counts.items()}

    @classmethod
    def from_samples(cls, samples: Iterable[int]) -> "DegreeHistogram":
        values, counts = np.unique(np.asarray(list(samples), dtype=np.int64), return_counts=True)
        if values.size == 0:
            raise DomainError("cannot build a histogram from empty input")
        return cls({int(n): int(c) for n, c in zip(values, counts)})

    @classmethod
    def from_csv(cls, source: str | os.PathLike | TextIO) -> "DegreeHistogram":
        """Read an ``n,count`` CSV with a header row."""
        if isinstance(source, (str, os.PathLike)):
            try:
                with open(source, encoding="utf-8", newline="") as fh:
                    text = fh.read()
            except OSError as exc:
                raise InputFormatError(f"cannot read histogram file {os.fspath(source)!r}: "
                                       f"{exc.strerror or exc}") from None
            except UnicodeDecodeError:
                raise InputFormatError(f"histogram file {os.fspath(source)!r} is not UTF-8") from None
        else:
            text = source.read()
        rows = csv.reader(io.StringIO(text))
        header = next(rows, None)
        if header is None or [h.strip().lower() for h in header] != ["n", "count"]:
            raise InputFormatError(f"expected header 'n,count', got {','.join(header or [])!r}")
        counts: dict[int, int] = {}
        for lineno, row in enumerate(rows, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise InputFormatError(f"line {lineno}: expected 2 fields, got {len(row)}")
            try:
                n, c = int(row[0].strip()), int(row[1].strip())
            except ValueError:
                raise InputFormatError(f"line {lineno}: non-integer field in {','.join(row)!r}") from None
            if n < 0 or c < 0:
                raise InputFormatError(f"line {lineno}: negative value in {','.join(row)!r}")
            if n in counts:
                raise InputFormatError(f"line {lineno}: duplicate degree {n}")
            counts[n] = c
        try:
            return cls(counts)
        except DomainError as exc:
            raise InputFormatError(str(exc)) from None

    def to_csv(self, target: str | os.PathLike | TextIO) -> None:
        lines = "n,count\n" + "".join(f"{n},{c}\n" for n, c in self.counts.items())
        if isinstance(target, (str, os.PathLike)):
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(lines)
        else:
            target.write(lines)


class FitMethod(str, enum.Enum):
    TAIL_REGRESSION = "tail_regression"
    MLE = "mle"


@dataclass(frozen=True)
class FitResult:
    """Estimated ratios; statistics not produced by a method are ``None``.

    ``mu_over_delta`` is ``nan`` when the data carry no information on it
    (``mu_identifiable`` false). In the MLE the ratios over delta are only
    defined for a supercritical estimate and are ``nan`` otherwise.
    """

    beta_over_delta: float
    mu_over_delta: float
    representative_params: ModelParams
    objective: float
    method: FitMethod
    slope: float | None = None
    intercept: float | None = None
    slope_stderr: float | None = None
    intercept_stderr: float | None = None
    slope_pvalue: float | None = None
    intercept_pvalue: float | None = None
    mu_identifiable: bool = True
    beta_over_lambda: float | None = None
    mu_over_lambda: float | None = None
    beta_over_lambda_stderr: float | None = None
    mu_over_lambda_stderr: float | None = None
    n_points: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        p = self.representative_params
        out = {
            "method": self.method.value,
            "beta_over_delta": self.beta_over_delta,
            "mu_over_delta": self.mu_over_delta,
            "mu_identifiable": self.mu_identifiable,
            "beta_over_lambda": self.beta_over_lambda,
            "mu_over_lambda": self.mu_over_lambda,
            "beta_over_lambda_stderr": self.beta_over_lambda_stderr,
            "mu_over_lambda_stderr": self.mu_over_lambda_stderr,
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_stderr": self.slope_stderr,
            "intercept_stderr": self.intercept_stderr,
            "slope_pvalue": self.slope_pvalue,
            "intercept_pvalue": self.intercept_pvalue,
            "objective": self.objective,
            "n_points": self.n_points,
            "beta": p.beta,
            "lambda": p.lam,
            "mu": p.mu,
        }
        out.update(self.extra)
        return out


# ---------------------------------------------------------------------------
# tail regression


def _intercept_model(s: float, x: float) -> float:
    """Intercept of log P(N = n) ~ -(1 + s) log n + intercept."""
    return (1.0 - s) * -math.log1p(x) + math.lgamma(1.0 + s) + math.log(s)


def _solve_mu_over_delta(s: float, intercept: float) -> float:
    # the intercept is monotone in x, so its inverse is explicit
    log1p_x = (intercept - math.lgamma(1.0 + s) - math.log(s)) / (s - 1.0)
    if log1p_x > math.log1p(MU_OVER_DELTA_MAX):
        return math.inf
    return math.expm1(log1p_x)


def _ratio_params(s: float, x: float, lam: float) -> ModelParams:
    # lam = mu + delta fixes delta = lam / (1 + x)
    delta = lam / (1.0 + x)
    return ModelParams(s * delta, lam, x * delta)


def tail_regression(hist: DegreeHistogram, n_min: int, n_max: int | None = None,
                    lambda_scale: float = 1.0) -> FitResult:
    """Least squares of log(count / total) on log n over n_min <= n <= n_max.

    The pmf is normalised by the full histogram total, so the intercept
    keeps its meaning. Zero-count bins are skipped.
    """
    if int(n_min) < 1:
        raise DomainError("n_min must be >= 1")
    total = hist.total
    ns = np.array([n for n, c in hist.counts.items()
                   if n >= n_min and (n_max is None or n <= n_max) and c > 0], dtype=float)
    if ns.size < 3:
        raise FitError(f"need at least 3 populated degrees in the fit window, got {ns.size}")
    cs = np.array([hist.counts[int(n)] for n in ns], dtype=float)
    xs = np.log(ns)
    ys = np.log(cs) - math.log(total)
    reg = stats.linregress(xs, ys)
    slope, intercept = float(reg.slope), float(reg.intercept)
    dof = ns.size - 2
    resid = ys - (intercept + slope * xs)
    ssr = float(np.dot(resid, resid))
    intercept_se = float(reg.intercept_stderr)
    if intercept_se > 0:
        intercept_p = float(2 * stats.t.sf(abs(intercept / intercept_se), dof))
    else:
        intercept_p = 0.0 if intercept != 0 else 1.0
    slope_p = float(reg.pvalue) if math.isfinite(reg.pvalue) else (0.0 if slope else 1.0)
    common = dict(slope=slope, intercept=intercept, slope_stderr=float(reg.stderr),
                  intercept_stderr=intercept_se, slope_pvalue=slope_p,
                  intercept_pvalue=intercept_p, objective=ssr,
                  method=FitMethod.TAIL_REGRESSION, n_points=int(ns.size))
    if slope >= -1.0:
        raise FitError(f"tail slope {slope:.6g} >= -1 does not describe a supercritical tail")
    s = -slope - 1.0
    if abs(1.0 - s) < UNIDENTIFIABLE_BAND:
        rep = _ratio_params(s, 0.0, lambda_scale)
        return FitResult(beta_over_delta=s, mu_over_delta=math.nan, representative_params=rep,
                         mu_identifiable=False, beta_over_lambda=rep.beta / rep.lam,
                         mu_over_lambda=0.0, **common)
    x = _solve_mu_over_delta(s, intercept)
    if not 0.0 <= x <= MU_OVER_DELTA_MAX:
        best = FitResult(beta_over_delta=s, mu_over_delta=math.nan,
                         representative_params=_ratio_params(s, 0.0, lambda_scale),
                         mu_identifiable=False, **common)
        raise FitError(f"intercept {intercept:.6g} gives mu/delta = {x:.6g}, "
                       f"outside [0, {MU_OVER_DELTA_MAX:g}]", best=best)
    rep = _ratio_params(s, x, lambda_scale)
    return FitResult(beta_over_delta=s, mu_over_delta=x, representative_params=rep,
                     beta_over_lambda=rep.beta / rep.lam, mu_over_lambda=rep.mu / rep.lam,
                     **common)


# ---------------------------------------------------------------------------
# maximum likelihood


def _log_likelihood(b: float, m: float, ns: np.ndarray, cs: np.ndarray,
                    include_zero: bool) -> float:
    params = ModelParams(b, 1.0, m)
    p = model.pmf(ns, params)
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        return -math.inf
    ll = float(np.dot(cs, np.log(p)))
    if not include_zero:
        p0 = model.pmf_zero(params)
        if p0 >= 1.0:
            return -math.inf
        ll -= float(cs.sum()) * math.log1p(-p0)
    return ll


def _hessian(f, x: np.ndarray, steps: np.ndarray) -> np.ndarray:
    k = len(x)
    h = np.zeros((k, k))
    f0 = f(x)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = steps[i]
        h[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / steps[i] ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = steps[j]
            h[i, j] = h[j, i] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej)
                                 + f(x - ei - ej)) / (4 * steps[i] * steps[j])
    return h


def fit_mle(hist: DegreeHistogram, include_zero: bool = False,
            init: tuple[float, float] | None = None, lambda_scale: float = 1.0,
            mu_bounds: tuple[float, float] = (0.0, 0.995),
            beta_bounds: tuple[float, float] = (1e-4, 1e3),
            max_evaluations: int = 2000) -> FitResult:
    """Maximum likelihood over (beta / lam, mu / lam).

    With ``include_zero`` false the zero bin is dropped and the pmf is
    conditioned on N >= 1. ``init`` is an optional (beta/lam, mu/lam) start;
    otherwise a coarse grid picks one. The search runs on
    (log beta/lam, mu/lam) with bounded Nelder-Mead.
    """
    data = hist if include_zero else hist.without_zero() if any(
        n > 0 for n in hist.counts) else None
    if data is None or len(data.counts) < 2:
        raise FitError("MLE needs at least two distinct populated degrees")
    ns = data.support
    cs = data.frequencies
    lo_b, hi_b = (math.log(v) for v in beta_bounds)
    lo_m, hi_m = mu_bounds
    if not (0.0 <= lo_m < hi_m) or (lo_m <= 1.0 <= hi_m):
        raise DomainError("mu_bounds must lie on one side of 1 and start at >= 0")
    state = {"evals": 0, "best": (-math.inf, None)}

    def negll(z):
        lb, m = float(z[0]), float(z[1])
        if not (lo_b <= lb <= hi_b and lo_m <= m <= hi_m):
            return math.inf
        state["evals"] += 1
        try:
            ll = _log_likelihood(math.exp(lb), m, ns, cs, include_zero)
        except (ArithmeticError, ValueError):
            ll = -math.inf
        if ll > state["best"][0]:
            state["best"] = (ll, (lb, m))
        return -ll

    if init is not None:
        b0, m0 = init
        if not (b0 > 0 and lo_m <= m0 <= hi_m):
            raise DomainError(f"init {init!r} outside the search box")
        start = np.array([math.log(b0), m0])
    else:
        grid_b = np.linspace(max(lo_b, math.log(1e-3)), min(hi_b, math.log(30.0)), 9)
        grid_m = np.unique(np.clip(np.array([0.0, 0.3, 0.6, 0.8, 0.9, 0.95, 0.98]) *
                                   (hi_m - lo_m) / max(hi_m, 1e-12) + lo_m, lo_m, hi_m))
        if lo_m > 1.0:
            grid_m = np.linspace(lo_m, hi_m, 7)
        best = (math.inf, None)
        for lb in grid_b:
            for m in grid_m:
                v = negll((lb, m))
                if v < best[0]:
                    best = (v, (lb, m))
        if best[1] is None:
            raise FitError("likelihood is not finite anywhere on the start grid")
        start = np.array(best[1])
    res = optimize.minimize(negll, start, method="Nelder-Mead",
                            bounds=[(lo_b, hi_b), (lo_m, hi_m)],
                            # pmf round-off puts noise of order total * 1e-13 on the likelihood
                            options={"xatol": 1e-9, "fatol": 1e-10 * max(1.0, float(cs.sum())),
                                     "maxfev": max_evaluations,
                                     "initial_simplex": [start, start + [0.1, 0.0],
                                                         start + [0.0, 0.02 if start[1] + 0.02 <= hi_m else -0.02]]})
    ll_best, z_best = state["best"]
    if z_best is None or not math.isfinite(ll_best):
        raise FitError("likelihood could not be evaluated")
    b, m = math.exp(z_best[0]), z_best[1]
    rep = ModelParams(b * lambda_scale, lambda_scale, m * lambda_scale)
    d = 1.0 - m
    partial = FitResult(
        beta_over_delta=b / d if d > 0 else math.nan,
        mu_over_delta=m / d if d > 0 else math.nan,
        representative_params=rep, objective=ll_best, method=FitMethod.MLE,
        beta_over_lambda=b, mu_over_lambda=m, n_points=int(ns.size),
        mu_identifiable=True,
    )
    if not res.success and state["evals"] >= max_evaluations:
        raise FitError(f"Nelder-Mead stopped: {res.message}", best=partial)
    se_b = se_m = None
    try:
        def f(v):
            return _log_likelihood(v[0], v[1], ns, cs, include_zero)
        x0 = np.array([b, m])
        steps = np.array([1e-4 * b, 1e-4 * max(m, 1e-2)])
        if m - steps[1] < 0:
            steps[1] = 0.5 * m if m > 0 else 0.0
        if steps[1] > 0:
            cov = np.linalg.inv(-_hessian(f, x0, steps))
            if np.all(np.diag(cov) > 0):
                se_b, se_m = float(math.sqrt(cov[0, 0])), float(math.sqrt(cov[1, 1]))
    except (np.linalg.LinAlgError, ArithmeticError, ValueError):
        pass
    return FitResult(
        beta_over_delta=partial.beta_over_delta, mu_over_delta=partial.mu_over_delta,
        representative_params=rep, objective=ll_best, method=FitMethod.MLE,
        beta_over_lambda=b, mu_over_lambda=m, beta_over_lambda_stderr=se_b,
        mu_over_lambda_stderr=se_m, n_points=int(ns.size),
        extra={"evaluations": state["evals"], "include_zero": include_zero},
    )


# ---------------------------------------------------------------------------
# goodness of fit


@dataclass(frozen=True)
class GofReport:
    statistic: float
    dof: int
    p_value: float
    max_cdf_deviation: float
    bins: list[tuple[int, int | None, float, float]]

    def to_dict(self) -> dict:
        return {"chi_square": self.statistic, "dof": self.dof, "p_value": self.p_value,
                "max_cdf_deviation": self.max_cdf_deviation, "bins": len(self.bins)}


def goodness_of_fit(hist: DegreeHistogram, params: ModelParams, include_zero: bool = False,
                    min_expected: float = 5.0, fitted_parameters: int = 0) -> GofReport:
    """Pearson chi-square of ``hist`` against the model pmf.

    Consecutive degrees are merged until each bin expects at least
    ``min_expected`` pages. The last bin is open-ended and holds all the
    model mass beyond it. Bins are listed as (first n, last n or None,
    observed, expected).
    """
    data = hist if include_zero else hist.without_zero() if any(n > 0 for n in hist.counts) else None
    if data is None:
        raise DomainError("histogram has no pages with n >= 1")
    total = data.total
    start = 0 if include_zero else 1
    n_hi = max(data.counts)
    probs = model.pmf(np.arange(start, n_hi + 1), params)
    norm = 1.0
    if not include_zero:
        norm = 1.0 - model.pmf_zero(params)
    probs = probs / norm
    obs = np.zeros(n_hi + 1 - start)
    for n, c in data.counts.items():
        obs[n - start] = c
    expected = probs * total
    tail_expected = max(0.0, model.tail_mass(n_hi, params) / norm * total)
    bins = []
    lo = start
    acc_o = acc_e = 0.0
    for i, (o, e) in enumerate(zip(obs, expected)):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            bins.append([lo, start + i, acc_o, acc_e])
            lo = start + i + 1
            acc_o = acc_e = 0.0
    acc_e += tail_expected
    if bins and acc_e < min_expected:
        last = bins.pop()
        lo = last[0]
        acc_o += last[2]
        acc_e += last[3]
    bins.append([lo, None, acc_o, acc_e])
    o_arr = np.array([b[2] for b in bins])
    e_arr = np.array([b[3] for b in bins])
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(e_arr > 0, (o_arr - e_arr) ** 2 / e_arr, np.where(o_arr > 0, np.inf, 0.0))
    chi = float(terms.sum())
    dof = len(bins) - 1 - int(fitted_parameters)
    p_value = float(stats.chi2.sf(chi, dof)) if dof > 0 else math.nan
    emp_cdf = np.cumsum(obs) / total
    mod_cdf = np.cumsum(probs)
    dev = float(np.max(np.abs(emp_cdf - mod_cdf)))
    return GofReport(chi, dof, p_value, dev,
                     [(int(a), None if b is None else int(b), float(c), float(d)) for a, b, c, d in bins])


# ---------------------------------------------------------------------------
# synthetic data


def synthetic_histogram(params: ModelParams, total: int, seed: int = 0,
                        include_zero: bool = False, n_max: int | None = None) -> DegreeHistogram:
    """Multinomial draw of ``total`` pages from the model.

    Mass beyond the table is placed with the dominant power-law tail in the
    supercritical and pure Yule cases; elsewhere it is below 1e-9 and dropped.
    """
    total = int(total)
    if total < 1:
        raise DomainError("total must be >= 1")
    table = model.pmf_table(params, n_max=n_max)
    probs = np.array(table.probabilities, dtype=float)
    first = 0 if include_zero else 1
    probs = probs[first:]
    tail = table.tail_mass_bound
    weights = np.append(probs, tail)
    weights = np.clip(weights, 0.0, None)
    weights /= weights.sum()
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(total, weights)
    counts = {first + i: int(c) for i, c in enumerate(draws[:-1]) if c}
    k = int(draws[-1])
    reg = params.regime
    if k and reg in (model.Regime.SUPERCRITICAL, model.Regime.PURE_YULE):
        s = params.beta / params.delta
        edge = table.n_max + 0.5
        vals = np.floor(edge * rng.random(k) ** (-1.0 / s) + 0.5).astype(np.int64)
        vals = np.maximum(vals, table.n_max + 1)
        for v in vals:
            counts[int(v)] = counts.get(int(v), 0) + 1
    return DegreeHistogram(counts)
