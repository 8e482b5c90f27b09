"""Generalized-bootstrap driver: resample loops, variance and distribution
estimates, percentile intervals, studentized statistics, enumeration oracles."""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import weights as wmod
from .errors import (DegenerateRunError, EvaluationError, InsufficientSampleError,
                     NonConvergenceError, ParameterError, SingularSystemError)
from .solver import SolveOptions, solve_weighted

STATUS_CONVERGED = "converged"
STATUS_FALLBACK = "fallback"
MAX_FALLBACK_FRAC = 0.2


def worker_count():
    raw = os.environ.get("GEBS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def draw_rng(seed, *path):
    """Independent stream for one resample draw; deterministic in (seed, path)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=path))


@dataclass
class BootstrapSample:
    """B resampled estimates plus per-draw status."""

    beta_hat: np.ndarray
    betas: np.ndarray          # (B, p)
    statuses: list
    scheme: object             # WeightScheme, or None for baseline methods
    sigma2: float
    fallback_count: int
    weight_draws: np.ndarray = None   # (B, n) when retained

    @property
    def n_draws(self):
        return self.betas.shape[0]

    def deltas(self):
        return self.betas - self.beta_hat[None, :]


@dataclass
class VarianceEstimate:
    v_gbs: object              # scalar for p = 1, (p, p) matrix otherwise
    target: str
    mc_stderr: object
    degenerate: bool = False


@dataclass
class EmpiricalDistribution:
    """Equal-mass scalar distribution (sorted support)."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.sort(np.asarray(self.values, float))
        if vals.size == 0 or not np.all(np.isfinite(vals)):
            raise ParameterError("empirical distribution needs finite values")
        self.values = vals

    def cdf(self, x):
        return np.searchsorted(self.values, x, side="right") / len(self.values)

    def quantile(self, q):
        return np.quantile(self.values, q)


@dataclass
class StudentizedStats:
    gamma1_hat: float
    gamma2_hat: float
    g_hat: float
    g_hat_b: np.ndarray
    t_n: float
    t_nb: np.ndarray
    undefined: np.ndarray      # mask of draws with degenerate g_hat_b


def _solve_draw(model, data, w, beta_hat, options):
    try:
        sol = solve_weighted(model, data, w, options)
        return sol.beta, STATUS_CONVERGED
    except (NonConvergenceError, SingularSystemError, EvaluationError):
        return beta_hat.copy(), STATUS_FALLBACK


def run_bootstrap(model, data, beta_hat, scheme, n_boot, seed,
                  solve_fn=None, store_weights=True,
                  max_fallback_frac=MAX_FALLBACK_FRAC, options=None):
    """Draw ``n_boot`` weight vectors and solve the reweighted equations.

    Non-converged draws fall back to ``beta_hat`` and are counted; a run with
    more than ``max_fallback_frac`` fallbacks raises ``DegenerateRunError``
    carrying the (still inspectable) sample.

    ``solve_fn(model, data, w, beta_hat)`` may replace the default
    solve-from-beta_hat strategy (used by the multistart nonlinear experiment).
    """
    if n_boot < 1:
        raise ParameterError("need n_boot >= 1")
    beta_hat = np.atleast_1d(np.asarray(beta_hat, float))
    opts = options or SolveOptions()
    base_opts = SolveOptions(tol=opts.tol, max_iter=opts.max_iter,
                             max_halvings=opts.max_halvings, init=beta_hat)

    def one(b):
        w = wmod.sample(scheme, draw_rng(seed, b))
        if solve_fn is not None:
            try:
                beta, status = solve_fn(model, data, w, beta_hat), STATUS_CONVERGED
            except (NonConvergenceError, SingularSystemError, EvaluationError):
                beta, status = beta_hat.copy(), STATUS_FALLBACK
        else:
            beta, status = _solve_draw(model, data, w, beta_hat, base_opts)
        return np.atleast_1d(np.asarray(beta, float)), status, w

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(n_boot)))
    else:
        results = [one(b) for b in range(n_boot)]

    betas = np.stack([r[0] for r in results])
    statuses = [r[1] for r in results]
    weight_draws = np.stack([r[2] for r in results]) if store_weights else None
    fallback = statuses.count(STATUS_FALLBACK)
    sigma2 = wmod.theoretical_moments(scheme).sigma2
    sample = BootstrapSample(beta_hat, betas, statuses, scheme, sigma2,
                             fallback, weight_draws)
    if fallback > max_fallback_frac * n_boot:
        raise DegenerateRunError(
            f"{fallback}/{n_boot} resamples fell back to the full-data root",
            sample=sample)
    return sample


def variance_estimate(sample, scale=1.0):
    """Monte Carlo resampling variance, scaled by 1/sigma_n^2.

    Fallback draws contribute exactly zero by construction. ``scale``
    multiplies the estimate (pass n to target the sqrt(n)-scaled variance).
    """
    if sample.n_draws < 2:
        raise InsufficientSampleError("need at least 2 draws")
    if sample.sigma2 <= 0:
        p = len(sample.beta_hat)
        zero = 0.0 if p == 1 else np.zeros((p, p))
        return VarianceEstimate(zero, "degenerate scheme (sigma_n^2 = 0)",
                                zero, degenerate=True)
    deltas = sample.deltas()
    B = sample.n_draws
    factor = scale / sample.sigma2
    degenerate = sample.fallback_count == B
    if deltas.shape[1] == 1:
        sq = factor * deltas[:, 0] ** 2
        return VarianceEstimate(float(sq.mean()),
                                "variance of beta_hat (x scale)",
                                float(sq.std(ddof=1) / math.sqrt(B)),
                                degenerate=degenerate)
    outer = factor * deltas[:, :, None] * deltas[:, None, :]
    return VarianceEstimate(outer.mean(axis=0),
                            "covariance of beta_hat (x scale)",
                            outer.std(axis=0, ddof=1) / math.sqrt(B),
                            degenerate=degenerate)


def exact_variance_enumeration(model, data, beta_hat, scheme, scale=1.0,
                               options=None, max_atoms=10 ** 6):
    """Resampling variance as an exact expectation over the scheme's support."""
    beta_hat = np.atleast_1d(np.asarray(beta_hat, float))
    mom = wmod.theoretical_moments(scheme)
    p = len(beta_hat)
    if mom.sigma2 <= 0:
        zero = 0.0 if p == 1 else np.zeros((p, p))
        return VarianceEstimate(zero, "degenerate scheme (sigma_n^2 = 0)",
                                zero, degenerate=True)
    opts = options or SolveOptions()
    base_opts = SolveOptions(tol=opts.tol, max_iter=opts.max_iter,
                             max_halvings=opts.max_halvings, init=beta_hat)
    acc = 0.0 if p == 1 else np.zeros((p, p))
    for w, prob in wmod.enumerate_support(scheme, max_atoms=max_atoms):
        beta, status = _solve_draw(model, data, w, beta_hat, base_opts)
        if status == STATUS_FALLBACK:
            continue  # definitional fallback contributes zero
        d = beta - beta_hat
        acc = acc + prob * (d[0] ** 2 if p == 1 else np.outer(d, d))
    factor = scale / mom.sigma2
    zero = 0.0 if p == 1 else np.zeros((p, p))
    return VarianceEstimate(factor * acc, "exact enumeration variance", zero)


def empirical_distribution(model, data, sample, contrast=None):
    """Plug-in normalized bootstrap distribution of the resampled estimates.

    For p = 1 the scaling is sqrt(|sum_i phi_1ni(beta_hat)|) / sigma_n; for
    p > 1 a unit contrast vector projects through the plug-in studentizer.
    """
    beta_hat = sample.beta_hat
    p = len(beta_hat)
    if sample.sigma2 <= 0:
        raise ParameterError("degenerate scheme has no distribution estimate")
    J_total = np.sum(model.jacobian_all(data, beta_hat), axis=0)
    deltas = sample.deltas()
    if p == 1:
        s = math.sqrt(abs(float(J_total[0, 0])))
        vals = s / math.sqrt(sample.sigma2) * deltas[:, 0]
        return EmpiricalDistribution(vals)
    if contrast is None:
        raise ParameterError("p > 1 needs a contrast vector")
    c = np.asarray(contrast, float)
    if abs(np.linalg.norm(c) - 1.0) > 1e-8:
        raise ParameterError("contrast must have unit norm")
    scores = model.score_all(data, beta_hat)
    v = np.linalg.solve(J_total, c)
    s_hat2 = float(v @ (scores.T @ scores) @ v) / p ** 2
    vals = (deltas @ c) / (math.sqrt(s_hat2) * math.sqrt(sample.sigma2))
    return EmpiricalDistribution(vals)


def percentile_ci(draws, level, transform=None):
    """Equal-tail percentile interval using the (B+1) order-statistic rule."""
    if not 0 < level < 1:
        raise ParameterError("level must be in (0, 1)")
    vals = np.asarray(draws, float).ravel()
    if vals.size < 10:
        raise InsufficientSampleError(f"need >= 10 draws, got {vals.size}")
    if transform is not None:
        vals = np.asarray([transform(v) for v in vals], float)
    vals = np.sort(vals)
    B = vals.size
    alpha = 1.0 - level
    k_lo = max(1, math.ceil((B + 1) * alpha / 2.0))
    k_hi = min(B, math.floor((B + 1) * (1.0 - alpha / 2.0)))
    return float(vals[k_lo - 1]), float(vals[k_hi - 1])


def percentile_cis_batch(draw_matrix, level):
    """Equal-tail intervals column-by-column; vectorized order-statistic rule."""
    vals = np.sort(np.asarray(draw_matrix, float), axis=0)
    B = vals.shape[0]
    if B < 10:
        raise InsufficientSampleError(f"need >= 10 draws, got {B}")
    alpha = 1.0 - level
    k_lo = max(1, math.ceil((B + 1) * alpha / 2.0))
    k_hi = min(B, math.floor((B + 1) * (1.0 - alpha / 2.0)))
    return vals[k_lo - 1], vals[k_hi - 1]


def studentized_stats(model, data, beta_hat, sample, beta0=None):
    """Bias-corrected studentized pivot and its per-draw bootstrap analogs."""
    beta_hat = np.atleast_1d(np.asarray(beta_hat, float))
    if len(beta_hat) != 1:
        raise ParameterError("studentized statistics require p = 1")
    if sample.weight_draws is None:
        raise ParameterError("sample must retain weight draws")
    n = model.weight_count(data)
    scores = model.score_all(data, beta_hat)[:, 0]
    gamma1 = float(np.sum(model.jacobian_all(data, beta_hat)[:, 0, 0])) / n
    gamma2 = float(np.sum(model.hessian_all(data, beta_hat)[:, 0, 0, 0])) / n
    g_hat = math.sqrt(float(np.mean(scores ** 2)))
    sigma = math.sqrt(sample.sigma2)
    if sigma == 0:
        raise ParameterError("degenerate scheme: all standardized weights are zero")

    W = (sample.weight_draws - 1.0) / sigma
    g_hat_b = np.sqrt(np.mean(W ** 2 * scores[None, :] ** 2, axis=1))
    undefined = g_hat_b <= 0

    v_gbs = variance_estimate(sample).v_gbs
    t_n = math.nan
    if beta0 is not None:
        t_n = (gamma1 / g_hat * math.sqrt(n) * (beta_hat[0] - float(beta0))
               - 0.5 / math.sqrt(n) * gamma2 * v_gbs / (gamma1 ** 2 * g_hat))

    z = math.sqrt(n) / sigma * sample.deltas()[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_nb = (gamma1 * z / g_hat_b
                + 0.5 / math.sqrt(n) * sigma * gamma2 * z ** 2 / g_hat_b)
    t_nb[undefined] = np.nan
    return StudentizedStats(gamma1, gamma2, g_hat, g_hat_b, t_n, t_nb, undefined)


def ks_distance(a, b="normal"):
    """Sup distance between empirical CDFs, or against the standard normal."""
    if isinstance(a, EmpiricalDistribution):
        a = a.values
    a = np.sort(np.asarray(a, float))
    na = a.size
    if na == 0:
        raise ParameterError("first sample is empty")
    if isinstance(b, str):
        if b != "normal":
            raise ParameterError(f"unknown reference distribution {b!r}")
        cdf = norm.cdf(a)
        hi = np.arange(1, na + 1) / na - cdf
        lo = cdf - np.arange(0, na) / na
        return float(max(hi.max(), lo.max()))
    if isinstance(b, EmpiricalDistribution):
        b = b.values
    b = np.sort(np.asarray(b, float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / na
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))
