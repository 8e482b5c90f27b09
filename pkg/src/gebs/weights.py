"""Exchangeable bootstrap weight schemes.

Each scheme draws a nonnegative exchangeable weight vector with unit mean.
Exact mixed moments of the standardized weights are available in closed
form for every scheme, built from raw moments over distinct indices
(factorial-moment identities for count schemes, rising-factorial formulas
for Dirichlet, products for i.i.d. laws).
"""

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ParameterError, ParseError, ShapeError, UnsupportedSchemeError

MULTINOMIAL = "multinomial"
M_OUT_OF_N = "moon"
DELETE_D_JACKKNIFE = "jackknife"
DOWNWEIGHT_D_JACKKNIFE = "downweight"
DIRICHLET = "dirichlet"
IID_UNIFORM = "uniform"
IID_EXPONENTIAL = "exp"
CONSTANT = "constant"

FIXED_SUM_KINDS = (MULTINOMIAL, M_OUT_OF_N, DELETE_D_JACKKNIFE,
                   DOWNWEIGHT_D_JACKKNIFE, CONSTANT)

THIRD_ORDER_PATTERNS = ((3,), (2, 1), (1, 1, 1))
FOURTH_ORDER_PATTERNS = ((4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1))


@dataclass(frozen=True)
class WeightScheme:
    """A named exchangeable weight law of length ``n``."""

    kind: str
    n: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"weight-vector length must be >= 1, got {self.n}")
        p = self.params
        if self.kind in (DELETE_D_JACKKNIFE, DOWNWEIGHT_D_JACKKNIFE):
            d = p.get("d")
            if not isinstance(d, int) or not 1 <= d < self.n:
                raise ParameterError(f"need 1 <= d < n, got d={d}, n={self.n}")
        elif self.kind == M_OUT_OF_N:
            m = p.get("m")
            if not isinstance(m, int) or m < 1:
                raise ParameterError(f"m-out-of-n needs integer m >= 1, got {m}")
        elif self.kind == DIRICHLET:
            if not p.get("alpha", 0) > 0:
                raise ParameterError(f"Dirichlet alpha must be > 0, got {p.get('alpha')}")
        elif self.kind == IID_UNIFORM:
            lo, hi = p.get("lo"), p.get("hi")
            if lo is None or hi is None or hi <= lo or lo < 0:
                raise ParameterError(f"uniform needs 0 <= lo < hi, got lo={lo}, hi={hi}")
            if abs(lo + hi - 2.0) > 1e-12:
                raise ParameterError(
                    f"uniform weights must have mean 1 (lo + hi = 2), got lo={lo}, hi={hi}")
        elif self.kind == IID_EXPONENTIAL:
            if not p.get("rate", 0) > 0:
                raise ParameterError(f"exponential rate must be > 0, got {p.get('rate')}")
        elif self.kind not in (MULTINOMIAL, CONSTANT):
            raise ParameterError(f"unknown weight scheme kind {self.kind!r}")

    @property
    def fixed_sum(self):
        return self.kind in FIXED_SUM_KINDS

    def label(self):
        if self.params:
            args = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
            return f"{self.kind}({args})"
        return self.kind


def multinomial(n):
    return WeightScheme(MULTINOMIAL, n)


def m_out_of_n(n, m):
    return WeightScheme(M_OUT_OF_N, n, {"m": m})


def delete_d_jackknife(n, d):
    return WeightScheme(DELETE_D_JACKKNIFE, n, {"d": d})


def downweight_d_jackknife(n, d):
    return WeightScheme(DOWNWEIGHT_D_JACKKNIFE, n, {"d": d})


def dirichlet(n, alpha):
    return WeightScheme(DIRICHLET, n, {"alpha": float(alpha)})


def iid_uniform(n, lo, hi):
    return WeightScheme(IID_UNIFORM, n, {"lo": float(lo), "hi": float(hi)})


def iid_exponential(n, rate=1.0):
    return WeightScheme(IID_EXPONENTIAL, n, {"rate": float(rate)})


def constant(n):
    return WeightScheme(CONSTANT, n)


def parse_scheme(spec, n):
    """Build a scheme from a CLI specification string.

    Grammar: ``multinomial``, ``jackknife:d=2``, ``downweight:d=2``,
    ``dirichlet:alpha=1``, ``uniform:0.5,1.5``, ``exp:1``, ``moon:m=10``,
    ``constant``.
    """
    head, _, tail = spec.partition(":")
    head = head.strip().lower()
    try:
        if head == MULTINOMIAL:
            return multinomial(n)
        if head == CONSTANT:
            return constant(n)
        if head == DELETE_D_JACKKNIFE:
            return delete_d_jackknife(n, int(_kv(tail, "d")))
        if head == DOWNWEIGHT_D_JACKKNIFE:
            return downweight_d_jackknife(n, int(_kv(tail, "d")))
        if head == M_OUT_OF_N:
            return m_out_of_n(n, int(_kv(tail, "m")))
        if head == DIRICHLET:
            return dirichlet(n, float(_kv(tail, "alpha")))
        if head == IID_UNIFORM:
            lo, hi = (tail or "0.5,1.5").split(",")
            return iid_uniform(n, float(lo), float(hi))
        if head == IID_EXPONENTIAL:
            return iid_exponential(n, float(tail or "1"))
    except (ValueError, ParameterError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParseError(f"bad scheme specification {spec!r}: {exc}") from exc
    raise ParseError(f"unknown weight scheme {spec!r}")


def _kv(tail, key):
    k, _, v = tail.partition("=")
    if k.strip() != key or not v:
        raise ValueError(f"expected {key}=<value>, got {tail!r}")
    return v


# ---------------------------------------------------------------------------
# Sampling

def sample(scheme, rng):
    """Draw one weight vector from the scheme's law."""
    n = scheme.n
    kind = scheme.kind
    if kind == MULTINOMIAL:
        return rng.multinomial(n, np.full(n, 1.0 / n)).astype(float)
    if kind == M_OUT_OF_N:
        m = scheme.params["m"]
        return rng.multinomial(m, np.full(n, 1.0 / n)) * (n / m)
    if kind == DELETE_D_JACKKNIFE:
        d = scheme.params["d"]
        w = np.full(n, n / (n - d))
        w[rng.choice(n, size=d, replace=False)] = 0.0
        return w
    if kind == DOWNWEIGHT_D_JACKKNIFE:
        d = scheme.params["d"]
        w = np.full(n, (n + d) / n)
        w[rng.choice(n, size=d, replace=False)] = d / n
        return w
    if kind == DIRICHLET:
        alpha = scheme.params["alpha"]
        g = rng.gamma(alpha, size=n)
        return n * g / g.sum()
    if kind == IID_UNIFORM:
        return rng.uniform(scheme.params["lo"], scheme.params["hi"], size=n)
    if kind == IID_EXPONENTIAL:
        # normalized to mean 1; the rate only sets the underlying scale
        return rng.exponential(1.0 / scheme.params["rate"], size=n) * scheme.params["rate"]
    if kind == CONSTANT:
        return np.ones(n)
    raise ParameterError(f"unknown scheme kind {kind!r}")


def sample_many(scheme, n_draws, rng):
    return np.stack([sample(scheme, rng) for _ in range(n_draws)])


# ---------------------------------------------------------------------------
# Exact moment algebra

@lru_cache(maxsize=None)
def _stirling2(r, k):
    if k == r:
        return 1
    if k == 0 or k > r:
        return 0
    return k * _stirling2(r - 1, k) + _stirling2(r - 1, k - 1)


def _falling(x, k):
    out = 1.0
    for t in range(k):
        out *= x - t
    return out


def _rising(x, k):
    out = 1.0
    for t in range(k):
        out *= x + t
    return out


def _count_raw_moment(trials, cells, scale, pattern):
    # E[prod_j (scale * c_j)^{k_j}] for distinct multinomial cells with p = 1/cells
    total = 0.0
    ranges = [range(1, k + 1) for k in pattern]
    for ls in itertools.product(*ranges):
        coef = 1.0
        for k, l in zip(pattern, ls):
            coef *= _stirling2(k, l)
        L = sum(ls)
        total += coef * _falling(trials, L) * float(cells) ** (-L)
    return scale ** sum(pattern) * total


def raw_moment(scheme, pattern):
    """E[w_a^{k1} w_b^{k2} ...] over distinct indices a, b, ..."""
    pattern = tuple(int(k) for k in pattern if k > 0)
    if not pattern:
        return 1.0
    n = scheme.n
    m = len(pattern)
    if m > n:
        raise ParameterError(f"pattern uses {m} indices but n={n}")
    kind = scheme.kind
    if kind == MULTINOMIAL:
        return _count_raw_moment(n, n, 1.0, pattern)
    if kind == M_OUT_OF_N:
        mm = scheme.params["m"]
        return _count_raw_moment(mm, n, n / mm, pattern)
    if kind == DELETE_D_JACKKNIFE:
        d = scheme.params["d"]
        p_keep = 1.0
        for t in range(m):
            p_keep *= (n - d - t) / (n - t)
        return p_keep * (n / (n - d)) ** sum(pattern)
    if kind == DOWNWEIGHT_D_JACKKNIFE:
        d = scheme.params["d"]
        lo, hi = d / n, (n + d) / n
        total = 0.0
        for mask in itertools.product((False, True), repeat=m):
            s = sum(mask)
            if d - s < 0 or d - s > n - m:
                continue
            prob = math.comb(n - m, d - s) / math.comb(n, d)
            val = 1.0
            for k, down in zip(pattern, mask):
                val *= (lo if down else hi) ** k
            total += prob * val
        return total
    if kind == DIRICHLET:
        alpha = scheme.params["alpha"]
        tot = sum(pattern)
        num = 1.0
        for k in pattern:
            num *= _rising(alpha, k)
        return n ** tot * num / _rising(n * alpha, tot)
    if kind == IID_UNIFORM:
        lo, hi = scheme.params["lo"], scheme.params["hi"]
        out = 1.0
        for k in pattern:
            out *= (hi ** (k + 1) - lo ** (k + 1)) / ((hi - lo) * (k + 1))
        return out
    if kind == IID_EXPONENTIAL:
        out = 1.0
        for k in pattern:
            out *= math.factorial(k)
        return out
    if kind == CONSTANT:
        return 1.0
    raise ParameterError(f"unknown scheme kind {kind!r}")


def central_moment(scheme, pattern):
    """E[prod_j (w_j - 1)^{i_j}] over distinct indices."""
    pattern = tuple(int(k) for k in pattern if k > 0)
    total = 0.0
    ranges = [range(0, i + 1) for i in pattern]
    for ts in itertools.product(*ranges):
        coef = 1.0
        for i, t in zip(pattern, ts):
            coef *= math.comb(i, t) * (-1.0) ** (i - t)
        total += coef * raw_moment(scheme, tuple(t for t in ts if t > 0))
    return total


@dataclass
class WeightMoments:
    """Exact (or plug-in) moments of standardized weights W = (w - 1)/sigma."""

    sigma2: float
    c11: float
    c22: float
    c4: float
    third_order: dict
    fourth_order: dict

    def c(self, pattern):
        pattern = tuple(sorted((int(k) for k in pattern), reverse=True))
        if pattern == (1, 1):
            return self.c11
        if sum(pattern) == 3:
            return self.third_order[pattern]
        if sum(pattern) == 4:
            return self.fourth_order[pattern]
        raise KeyError(pattern)


def theoretical_moments(scheme):
    """Exact standardized mixed moments of the scheme."""
    sigma2 = central_moment(scheme, (2,))
    if sigma2 <= 0:
        zero3 = {p: 0.0 for p in THIRD_ORDER_PATTERNS}
        zero4 = {p: 0.0 for p in FOURTH_ORDER_PATTERNS}
        return WeightMoments(max(sigma2, 0.0), 0.0, 0.0, 0.0, zero3, zero4)
    sigma = math.sqrt(sigma2)

    def c(pattern):
        if len(pattern) > scheme.n:
            return math.nan
        return central_moment(scheme, pattern) / sigma ** sum(pattern)

    third = {p: c(p) for p in THIRD_ORDER_PATTERNS}
    fourth = {p: c(p) for p in FOURTH_ORDER_PATTERNS}
    return WeightMoments(sigma2, c((1, 1)), fourth[(2, 2)], fourth[(4,)], third, fourth)


def empirical_moments(draws, probs=None):
    """Plug-in moment estimates from weight draws, averaged over index tuples.

    ``draws`` is a (B, n) array (or list of equal-length vectors); ``probs``
    optionally weights the draws (used with :func:`enumerate_support`).
    Uses the scheme invariant E[w] = 1 for centering.
    """
    if not isinstance(draws, np.ndarray):
        lengths = {len(d) for d in draws}
        if len(lengths) > 1:
            raise ShapeError(f"draws have unequal lengths {sorted(lengths)}")
        draws = np.stack([np.asarray(d, float) for d in draws])
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 2:
        raise ShapeError(f"draws must be (B, n), got shape {draws.shape}")
    if draws.shape[0] < 2 and probs is None:
        raise ShapeError("need at least 2 draws")
    B, n = draws.shape
    if probs is None:
        probs = np.full(B, 1.0 / B)
    else:
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (B,):
            raise ShapeError("probs length must match number of draws")
        probs = probs / probs.sum()

    centered = draws - 1.0
    sigma2 = float(probs @ np.mean(centered ** 2, axis=1))
    if sigma2 <= 0:
        zero3 = {p: 0.0 for p in THIRD_ORDER_PATTERNS}
        zero4 = {p: 0.0 for p in FOURTH_ORDER_PATTERNS}
        return WeightMoments(0.0, 0.0, 0.0, 0.0, zero3, zero4)
    W = centered / math.sqrt(sigma2)

    p1 = W.sum(axis=1)
    p2 = (W ** 2).sum(axis=1)
    p3 = (W ** 3).sum(axis=1)
    p4 = (W ** 4).sum(axis=1)

    # sums over distinct index tuples, expressed in power sums
    distinct = {
        (1, 1): p1 ** 2 - p2,
        (3,): p3,
        (2, 1): p2 * p1 - p3,
        (1, 1, 1): p1 ** 3 - 3 * p1 * p2 + 2 * p3,
        (4,): p4,
        (3, 1): p3 * p1 - p4,
        (2, 2): p2 ** 2 - p4,
        (2, 1, 1): p2 * p1 ** 2 - p2 ** 2 - 2 * p3 * p1 + 2 * p4,
        (1, 1, 1, 1): p1 ** 4 - 6 * p1 ** 2 * p2 + 3 * p2 ** 2 + 8 * p1 * p3 - 6 * p4,
    }

    def avg(pattern):
        m = len(pattern)
        if m > n:
            return math.nan
        return float(probs @ distinct[pattern]) / _falling(n, m)

    third = {p: avg(p) for p in THIRD_ORDER_PATTERNS}
    fourth = {p: avg(p) for p in FOURTH_ORDER_PATTERNS}
    return WeightMoments(sigma2, avg((1, 1)), fourth[(2, 2)], fourth[(4,)], third, fourth)


# ---------------------------------------------------------------------------
# Exhaustive support

def support_size(scheme):
    n = scheme.n
    if scheme.kind == CONSTANT:
        return 1
    if scheme.kind == MULTINOMIAL:
        return math.comb(2 * n - 1, n - 1)
    if scheme.kind == M_OUT_OF_N:
        return math.comb(scheme.params["m"] + n - 1, n - 1)
    if scheme.kind in (DELETE_D_JACKKNIFE, DOWNWEIGHT_D_JACKKNIFE):
        return math.comb(n, scheme.params["d"])
    return None


def enumerate_support(scheme, max_atoms=10 ** 6):
    """All (weight vector, probability) atoms of a finite-support scheme."""
    size = support_size(scheme)
    if size is None:
        raise UnsupportedSchemeError(f"{scheme.label()} has infinite support")
    if size > max_atoms:
        raise UnsupportedSchemeError(
            f"{scheme.label()} support has {size} atoms, above cap {max_atoms}")
    n = scheme.n
    kind = scheme.kind
    atoms = []
    if kind == CONSTANT:
        atoms.append((np.ones(n), 1.0))
    elif kind in (MULTINOMIAL, M_OUT_OF_N):
        trials = n if kind == MULTINOMIAL else scheme.params["m"]
        scale = 1.0 if kind == MULTINOMIAL else n / scheme.params["m"]
        log_t_fact = math.lgamma(trials + 1)
        for counts in _compositions(trials, n):
            logp = log_t_fact - trials * math.log(n)
            for k in counts:
                logp -= math.lgamma(k + 1)
            atoms.append((np.array(counts, float) * scale, math.exp(logp)))
    else:
        d = scheme.params["d"]
        if kind == DELETE_D_JACKKNIFE:
            lo, hi = 0.0, n / (n - d)
        else:
            lo, hi = d / n, (n + d) / n
        prob = 1.0 / math.comb(n, d)
        for idx in itertools.combinations(range(n), d):
            w = np.full(n, hi)
            w[list(idx)] = lo
            atoms.append((w, prob))
    return atoms


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# ---------------------------------------------------------------------------
# Condition checking

SLOPE_TOL = 0.2

# exponent bounds for the third- and fourth-moment decay clauses; the
# sigma^{-1} factor in the third-moment clause is added per scheme
_THIRD_BOUND = {(3,): 0.0, (2, 1): -1.0, (1, 1, 1): -2.0}
_FOURTH_K = {(4,): 1, (3, 1): 2, (2, 2): 2, (2, 1, 1): 3, (1, 1, 1, 1): 4}


@dataclass
class ClauseVerdict:
    passed: bool
    evidence: dict

    def __bool__(self):
        return self.passed


@dataclass
class ConditionReport:
    """Per-condition verdicts with the per-n moment table behind them."""

    bw: ClauseVerdict
    cltw: ClauseVerdict
    vw_a: ClauseVerdict
    vw_b: ClauseVerdict
    table: list
    slopes: dict


def _fit_slope(ns, values):
    ns = np.asarray(ns, float)
    vals = np.abs(np.asarray(values, float))
    mask = np.isfinite(vals) & (vals > 0)
    if mask.sum() == 0:
        return None  # identically zero: decays trivially
    if mask.sum() < 2 or not mask.all():
        return math.inf if not np.isfinite(vals).all() else None
    return float(np.polyfit(np.log(ns), np.log(vals), 1)[0])


def _slope_ok(slope, bound):
    if slope is None:
        return True
    return slope <= bound + SLOPE_TOL


def check_conditions(scheme_factory, n_grid, p_rule=None, mc_draws=200, seed=0):
    """Certify the weight conditions over a grid of sample sizes.

    Asymptotic o(.)/O(.) clauses are decided by log-log regression of the
    moment magnitude on n, compared against the target exponent with a
    +-``SLOPE_TOL`` slope margin. The score-scale a_n^2 is taken proportional
    to n (the canonical regime for the models in this package).
    """
    n_grid = sorted(int(n) for n in n_grid)
    if len(n_grid) < 3:
        raise ParameterError("need at least 3 grid points")
    if p_rule is None:
        p_rule = lambda n: 1

    table = []
    for n in n_grid:
        scheme = scheme_factory(n)
        mom = theoretical_moments(scheme)
        row = {"n": n, "p": p_rule(n), "sigma2": mom.sigma2, "c11": mom.c11}
        for pat in THIRD_ORDER_PATTERNS:
            row[pat] = mom.third_order[pat]
        for pat in FOURTH_ORDER_PATTERNS:
            row[pat] = mom.fourth_order[pat]
        table.append(row)

    ns = [row["n"] for row in table]
    slopes = {key: _fit_slope(ns, [row[key] for row in table])
              for key in table[0] if key not in ("n", "p")}
    p_slope = _fit_slope(ns, [max(row["p"], 1) for row in table]) or 0.0
    sigma_slope = slopes["sigma2"] if slopes["sigma2"] is not None else -math.inf

    sigma_positive = all(row["sigma2"] > 0 for row in table)
    # (2.2): sigma^2 = o(min(a_n^2 / p, n)) with a_n^2 ~ n
    growth_bound = min(1.0 - p_slope, 1.0)
    bw_growth = sigma_positive and _slope_ok(
        sigma_slope if sigma_positive else None, growth_bound - 2 * SLOPE_TOL)
    bw_c11 = _slope_ok(slopes["c11"], -1.0)
    bw = ClauseVerdict(sigma_positive and bw_growth and bw_c11, {
        "mean_one": True,
        "sigma2_positive": sigma_positive,
        "sigma2_slope": sigma_slope if sigma_positive else None,
        "sigma2_growth_bound": growth_bound - 2 * SLOPE_TOL,
        "c11_slope": slopes["c11"],
    })

    c22_last = table[-1][(2, 2)]
    c22_first = table[0][(2, 2)]
    c22_ok = (math.isfinite(c22_last) and abs(c22_last - 1.0) < 0.1
              and abs(c22_last - 1.0) <= abs(c22_first - 1.0) + 0.05)
    c4_ok = all(math.isfinite(row[(4,)]) for row in table) and _slope_ok(slopes[(4,)], 0.0)
    cltw = ClauseVerdict(bool(bw) and c22_ok and c4_ok, {
        "c22_last": c22_last, "c22_first": c22_first, "c4_slope": slopes[(4,)],
    })

    # (2.5): enough weights bounded away from zero, checked by Monte Carlo
    k2, frac_cap = 0.1, 0.05
    rng = np.random.default_rng(seed)
    fail_fracs = []
    for n in n_grid:
        scheme = scheme_factory(n)
        m0 = math.ceil(n / 2)
        fails = 0
        for _ in range(mc_draws):
            fails += int(np.count_nonzero(sample(scheme, rng) > k2) < m0)
        fail_fracs.append(fails / mc_draws)
    w_ok = all(f <= frac_cap for f in fail_fracs)

    # (2.6): third-moment decay, bound n^{-k+1} sigma^{-1}
    third_details = {}
    third_ok = True
    for pat in THIRD_ORDER_PATTERNS:
        bound = _THIRD_BOUND[pat] - 0.5 * (sigma_slope if math.isfinite(sigma_slope) else 0.0)
        ok = _slope_ok(slopes[pat], bound)
        third_details[str(pat)] = {"slope": slopes[pat], "bound": bound, "passed": ok}
        third_ok = third_ok and ok

    def fourth_check(exponent_fn):
        details, ok = {}, True
        for pat, k in _FOURTH_K.items():
            bound = exponent_fn(k)
            this = _slope_ok(slopes[pat], bound)
            details[str(pat)] = {"slope": slopes[pat], "bound": bound, "passed": this}
            ok = ok and this
        return ok, details

    # (2.7)(a): sigma^2 in a compact subset of (0, inf)
    sigma_vals = [row["sigma2"] for row in table]
    sigma_compact = (sigma_positive and min(sigma_vals) > 1e-2
                     and max(sigma_vals) < 1e2
                     and abs(sigma_slope) <= SLOPE_TOL)
    fourth_a_ok, fourth_a = fourth_check(lambda k: min(-k + 2.0, 0.0))
    vw_a = ClauseVerdict(bool(bw) and w_ok and third_ok and sigma_compact and fourth_a_ok, {
        "w_fail_fracs": fail_fracs, "third": third_details,
        "sigma2_compact": sigma_compact, "fourth": fourth_a,
    })

    # (2.7)(b): sigma^2 -> 0
    sigma_vanishes = sigma_positive and sigma_slope <= -SLOPE_TOL
    fourth_b_ok, fourth_b = fourth_check(lambda k: -k + 2.0)
    vw_b = ClauseVerdict(bool(bw) and w_ok and third_ok and sigma_vanishes and fourth_b_ok, {
        "w_fail_fracs": fail_fracs, "third": third_details,
        "sigma2_vanishes": sigma_vanishes, "fourth": fourth_b,
    })

    return ConditionReport(bw, cltw, vw_a, vw_b, table, slopes)
