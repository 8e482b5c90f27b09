"""Estimating-equation models: per-observation scores, derivatives, simulators.

A model evaluates a vector score phi_i(beta) for each of its weight slots,
together with the analytic Jacobian (d phi / d beta, one p x p matrix per
slot, row a = gradient of component a) and the symmetric Hessians of each
score component. Everything is vectorized over slots.
"""

import csv
import importlib.resources
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, ParseError, ShapeError

LOGIT_CLAMP = 500.0  # exponent clamp; extreme resample weights can push |t| huge
ISO_SCALE = 1.632    # stoichiometric constant in the isomerization rate model


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-np.clip(t, -LOGIT_CLAMP, LOGIT_CLAMP)))


@dataclass
class Dataset:
    """Model-specific observation records plus provenance."""

    n: int
    meta: str = "synthetic"
    arrays: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.arrays[key]


class Model:
    """Base estimating-equation model."""

    p = 1

    def weight_count(self, data):
        return data.n

    def in_domain(self, data, beta):
        return bool(np.all(np.isfinite(beta)))

    def default_init(self, data):
        return np.zeros(self.p)

    def score_all(self, data, beta):
        raise NotImplementedError

    def jacobian_all(self, data, beta):
        raise NotImplementedError

    def hessian_all(self, data, beta):
        n = self.weight_count(data)
        return np.zeros((n, self.p, self.p, self.p))

    def score(self, i, data, beta):
        return self.score_all(data, np.atleast_1d(np.asarray(beta, float)))[i]

    def score_jacobian(self, i, data, beta):
        return self.jacobian_all(data, np.atleast_1d(np.asarray(beta, float)))[i]

    def score_hessians(self, i, data, beta):
        return self.hessian_all(data, np.atleast_1d(np.asarray(beta, float)))[i]

    def objective(self, data, weights, beta):
        """Weighted least-squares objective, where one exists."""
        return None


class MeanModel(Model):
    """Score z_i - beta; the root is the (weighted) sample mean."""

    p = 1

    def score_all(self, data, beta):
        return (data["z"] - beta[0])[:, None]

    def jacobian_all(self, data, beta):
        return np.full((data.n, 1, 1), -1.0)

    def default_init(self, data):
        return np.array([float(np.mean(data["z"]))])


class LinearModel(Model):
    """Least-squares normal equations: score x_i (y_i - x_i' beta)."""

    def __init__(self, p=1):
        self.p = p

    def score_all(self, data, beta):
        X, y = data["X"], data["y"]
        resid = y - X @ beta
        return X * resid[:, None]

    def jacobian_all(self, data, beta):
        X = data["X"]
        return -X[:, :, None] * X[:, None, :]

    def objective(self, data, weights, beta):
        resid = data["y"] - data["X"] @ beta
        return float(np.sum(weights * resid ** 2))


class Ar1Model(Model):
    """AR(1) least squares: score_t = X_{t-1} (X_t - beta X_{t-1})."""

    p = 1

    def score_all(self, data, beta):
        x = data["x"]
        lag, cur = x[:-1], x[1:]
        return (lag * (cur - beta[0] * lag))[:, None]

    def jacobian_all(self, data, beta):
        lag = data["x"][:-1]
        return (-lag ** 2)[:, None, None]

    def objective(self, data, weights, beta):
        x = data["x"]
        resid = x[1:] - beta[0] * x[:-1]
        return float(np.sum(weights * resid ** 2))


class LogisticGroupModel(Model):
    """Grouped binomial logistic scores: (1, X_i)' (Y_i - N_i p_i(beta))."""

    p = 2

    def _design(self, data):
        X = data["X"]
        return np.column_stack([np.ones_like(X), X])

    def score_all(self, data, beta):
        D = self._design(data)
        p = _sigmoid(D @ beta)
        return D * (data["Y"] - data["N"] * p)[:, None]

    def jacobian_all(self, data, beta):
        D = self._design(data)
        p = _sigmoid(D @ beta)
        v = data["N"] * p * (1.0 - p)
        return -v[:, None, None] * D[:, :, None] * D[:, None, :]

    def hessian_all(self, data, beta):
        D = self._design(data)
        p = _sigmoid(D @ beta)
        v = data["N"] * p * (1.0 - p) * (1.0 - 2.0 * p)
        return (-v[:, None, None, None]
                * D[:, :, None, None] * D[:, None, :, None] * D[:, None, None, :])


class LogisticIndividualModel(LogisticGroupModel):
    """Per-trial logistic scores: one weight slot per Bernoulli trial."""

    def weight_count(self, data):
        return len(data["y_ind"])

    def _design(self, data):
        X = data["x_ind"]
        return np.column_stack([np.ones_like(X), X])

    def score_all(self, data, beta):
        D = self._design(data)
        p = _sigmoid(D @ beta)
        return D * (data["y_ind"] - p)[:, None]

    def jacobian_all(self, data, beta):
        D = self._design(data)
        p = _sigmoid(D @ beta)
        v = p * (1.0 - p)
        return -v[:, None, None] * D[:, :, None] * D[:, None, :]

    def hessian_all(self, data, beta):
        D = self._design(data)
        p = _sigmoid(D @ beta)
        v = p * (1.0 - p) * (1.0 - 2.0 * p)
        return (-v[:, None, None, None]
                * D[:, :, None, None] * D[:, None, :, None] * D[:, None, None, :])


class IsomerizationModel(Model):
    """Four-parameter nonlinear rate model fitted by least squares.

    f(X, theta) = theta1 theta3 (P - I/1.632) / (1 + theta2 H + theta3 P + theta4 I),
    score_i = grad f(X_i, theta) (y_i - f(X_i, theta)).
    """

    p = 4

    def _parts(self, data, theta):
        H, P, I = data["H"], data["P"], data["I"]
        u = P - I / ISO_SCALE
        D = 1.0 + theta[1] * H + theta[2] * P + theta[3] * I
        A = theta[0] * theta[2] * u
        # derivative stacks indexed (slot, param)
        Aj = np.stack([theta[2] * u, np.zeros_like(u), theta[0] * u, np.zeros_like(u)], axis=1)
        Dj = np.stack([np.zeros_like(H), H, P, I], axis=1)
        return u, D, A, Aj, Dj

    def in_domain(self, data, beta):
        if not np.all(np.isfinite(beta)):
            return False
        _, D, *_ = self._parts(data, np.asarray(beta, float))
        return bool(np.all(np.abs(D) > 1e-12))

    def _check_domain(self, D):
        bad = np.nonzero(np.abs(D) <= 1e-12)[0]
        if bad.size:
            raise EvaluationError(f"rate denominator vanishes at row {bad[0]}",
                                  index=int(bad[0]))

    def f(self, data, theta):
        _, D, A, _, _ = self._parts(data, np.asarray(theta, float))
        self._check_domain(D)
        return A / D

    def f_grad(self, data, theta):
        _, D, A, Aj, Dj = self._parts(data, np.asarray(theta, float))
        self._check_domain(D)
        return Aj / D[:, None] - (A / D ** 2)[:, None] * Dj

    def _f_hess(self, data, theta):
        _, D, A, Aj, Dj = self._parts(data, theta)
        n = len(D)
        Ajk = np.zeros((n, 4, 4))
        u = data["P"] - data["I"] / ISO_SCALE
        Ajk[:, 0, 2] = u
        Ajk[:, 2, 0] = u
        cross = Aj[:, :, None] * Dj[:, None, :]
        H = (Ajk / D[:, None, None]
             - (cross + cross.transpose(0, 2, 1)) / (D ** 2)[:, None, None]
             + 2.0 * (A / D ** 3)[:, None, None] * Dj[:, :, None] * Dj[:, None, :])
        return H

    def _f_third(self, data, theta):
        _, D, A, Aj, Dj = self._parts(data, theta)
        n = len(D)
        u = data["P"] - data["I"] / ISO_SCALE
        Ajk = np.zeros((n, 4, 4))
        Ajk[:, 0, 2] = u
        Ajk[:, 2, 0] = u
        T = np.zeros((n, 4, 4, 4))
        T -= (Ajk[:, :, :, None] * Dj[:, None, None, :]
              + Ajk[:, :, None, :] * Dj[:, None, :, None]
              + Ajk[:, None, :, :] * Dj[:, :, None, None]) / (D ** 2)[:, None, None, None]
        T += 2.0 * (Aj[:, :, None, None] * Dj[:, None, :, None] * Dj[:, None, None, :]
                    + Aj[:, None, :, None] * Dj[:, :, None, None] * Dj[:, None, None, :]
                    + Aj[:, None, None, :] * Dj[:, :, None, None] * Dj[:, None, :, None]
                    ) / (D ** 3)[:, None, None, None]
        T -= 6.0 * (A / D ** 4)[:, None, None, None] \
            * Dj[:, :, None, None] * Dj[:, None, :, None] * Dj[:, None, None, :]
        return T

    def score_all(self, data, beta):
        theta = np.asarray(beta, float)
        resid = data["y"] - self.f(data, theta)
        return self.f_grad(data, theta) * resid[:, None]

    def jacobian_all(self, data, beta):
        theta = np.asarray(beta, float)
        resid = data["y"] - self.f(data, theta)
        g = self.f_grad(data, theta)
        return (self._f_hess(data, theta) * resid[:, None, None]
                - g[:, :, None] * g[:, None, :])

    def hessian_all(self, data, beta):
        theta = np.asarray(beta, float)
        resid = data["y"] - self.f(data, theta)
        g = self.f_grad(data, theta)
        h = self._f_hess(data, theta)
        return (self._f_third(data, theta) * resid[:, None, None, None]
                - h[:, :, :, None] * g[:, None, None, :]
                - h[:, :, None, :] * g[:, None, :, None]
                - g[:, :, None, None] * h[:, None, :, :])

    def objective(self, data, weights, beta):
        resid = data["y"] - self.f(data, np.asarray(beta, float))
        return float(np.sum(weights * resid ** 2))

    def default_init(self, data):
        return np.array([30.0, 0.1, 0.05, 0.2])


# ---------------------------------------------------------------------------
# Simulators

def simulate_ar1(phi, sigma1_sq, sigma2_sq, n, rng):
    """AR(1) series with X_0 = 0 and error variance alternating odd/even t."""
    if n < 2:
        raise ShapeError("need n >= 2")
    sd = np.where(np.arange(1, n + 1) % 2 == 1,
                  math.sqrt(sigma1_sq), math.sqrt(sigma2_sq))
    e = rng.standard_normal(n) * sd
    x = np.zeros(n + 1)
    for t in range(1, n + 1):
        x[t] = phi * x[t - 1] + e[t - 1]
    return Dataset(n=n, meta="ar1-sim", arrays={"x": x})


def simulate_glm(beta, N, X, rng):
    """Per-trial Bernoulli draws for grouped logistic data."""
    N = np.asarray(N, int)
    X = np.asarray(X, float)
    if len(N) != len(X) or len(N) < 2:
        raise ShapeError("N and X must be equal length >= 2")
    p = _sigmoid(beta[0] + beta[1] * X)
    y_ind = (rng.random(N.sum()) < np.repeat(p, N)).astype(float)
    group = np.repeat(np.arange(len(N)), N)
    Y = np.bincount(group, weights=y_ind, minlength=len(N))
    return Dataset(n=len(N), meta="glm-sim", arrays={
        "N": N, "X": X, "Y": Y,
        "x_ind": np.repeat(X, N), "y_ind": y_ind, "group": group,
    })


def simulate_linear(beta, n, rng, noise_sd=1.0, x_sd=1.0):
    beta = np.atleast_1d(np.asarray(beta, float))
    p = len(beta)
    X = rng.standard_normal((n, p)) * x_sd
    y = X @ beta + rng.standard_normal(n) * noise_sd
    return Dataset(n=n, meta="linear-sim", arrays={"X": X, "y": y})


# ---------------------------------------------------------------------------
# CSV loaders and bundled data

def _read_csv(path, columns):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in columns):
            raise ParseError(f"{path}: expected header with columns {columns}")
        for idx, rec in enumerate(reader):
            vals = []
            for c in columns:
                cell = rec.get(c)
                try:
                    vals.append(float(cell))
                except (TypeError, ValueError):
                    raise ParseError(f"{path}: non-numeric {c!r} at data row {idx}",
                                     row=idx) from None
            rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows)


def load_ar1_csv(path):
    x = _read_csv(path, ["x"])[:, 0]
    if len(x) < 3:
        raise ParseError(f"{path}: need at least 3 rows (X_0 plus 2 observations)")
    return Dataset(n=len(x) - 1, meta=str(path), arrays={"x": x})


def load_glm_csv(path):
    tab = _read_csv(path, ["N", "X", "Y"])
    N, X, Y = tab[:, 0], tab[:, 1], tab[:, 2]
    for idx, (ni, yi) in enumerate(zip(N, Y)):
        if not (ni == int(ni) and ni >= 1):
            raise ParseError(f"{path}: N must be a positive integer at data row {idx}", row=idx)
        if not 0 <= yi <= ni:
            raise ParseError(f"{path}: need 0 <= Y <= N at data row {idx}", row=idx)
    N = N.astype(int)
    # expand to per-trial records: Y_i successes then N_i - Y_i failures
    y_ind = np.concatenate([
        np.concatenate([np.ones(int(y)), np.zeros(int(n) - int(y))])
        for n, y in zip(N, Y)])
    group = np.repeat(np.arange(len(N)), N)
    return Dataset(n=len(N), meta=str(path), arrays={
        "N": N, "X": X, "Y": Y,
        "x_ind": np.repeat(X, N), "y_ind": y_ind, "group": group,
    })


def load_nls_csv(path):
    tab = _read_csv(path, ["H", "P", "I", "y"])
    return Dataset(n=tab.shape[0], meta=str(path), arrays={
        "H": tab[:, 0], "P": tab[:, 1], "I": tab[:, 2], "y": tab[:, 3],
    })


def bundled_path(name):
    return importlib.resources.files("gebs.data") / name


def load_isomerization():
    """24-run catalytic isomerization dataset shipped with the package."""
    return load_nls_csv(bundled_path("isomerization.csv"))


def load_fumigant():
    """Ten-group fumigant dose-response covariates shipped with the package."""
    return load_glm_csv(bundled_path("fumigant.csv"))
