"""Damped Newton solver for weighted estimating equations."""

from dataclasses import dataclass, field

import numpy as np

from .errors import (EmptyRootSetError, EvaluationError, NonConvergenceError,
                     ParameterError, ShapeError, SingularSystemError)

COND_LIMIT = 1e12


@dataclass
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 100
    max_halvings: int = 30
    init: np.ndarray = None

    def __post_init__(self):
        if self.tol <= 0:
            raise ParameterError("tol must be > 0")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be >= 1")


@dataclass
class Solution:
    beta: np.ndarray
    residual_norm: float
    iterations: int
    jacobian_at_root: np.ndarray
    converged: bool


@dataclass
class RootSet:
    roots: list
    objectives: list = field(default_factory=list)


def weighted_score(model, data, weights, beta):
    """Left-hand side of the weighted estimating equations."""
    weights = np.asarray(weights, float)
    if len(weights) != model.weight_count(data):
        raise ShapeError(f"weights length {len(weights)} != "
                         f"{model.weight_count(data)} score slots")
    return weights @ model.score_all(data, np.atleast_1d(np.asarray(beta, float)))


def weighted_jacobian(model, data, weights, beta):
    weights = np.asarray(weights, float)
    J = model.jacobian_all(data, np.atleast_1d(np.asarray(beta, float)))
    return np.tensordot(weights, J, axes=(0, 0))


def solve_weighted(model, data, weights, options=None):
    """Damped Newton iteration on the weighted score with analytic Jacobian."""
    opts = options or SolveOptions()
    weights = np.asarray(weights, float)
    beta = np.atleast_1d(np.asarray(
        opts.init if opts.init is not None else model.default_init(data), float)).copy()
    if not model.in_domain(data, beta):
        raise EvaluationError("initial point outside model domain")

    F = weighted_score(model, data, weights, beta)
    scale = 1.0 + float(np.max(np.abs(F)))
    tol = opts.tol * scale

    for it in range(opts.max_iter):
        res = float(np.max(np.abs(F)))
        if res <= tol:
            J = weighted_jacobian(model, data, weights, beta)
            return Solution(beta, res, it, J, True)
        J = weighted_jacobian(model, data, weights, beta)
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > COND_LIMIT:
            raise SingularSystemError(
                f"weighted Jacobian ill-conditioned at iteration {it}")
        step = np.linalg.solve(J, -F)

        # step-halving line search on ||F||^2
        base = float(F @ F)
        lam, accepted = 1.0, False
        for _ in range(opts.max_halvings + 1):
            trial = beta + lam * step
            if model.in_domain(data, trial):
                try:
                    F_trial = weighted_score(model, data, weights, trial)
                except EvaluationError:
                    F_trial = None
                if F_trial is not None and np.all(np.isfinite(F_trial)) \
                        and float(F_trial @ F_trial) < base:
                    beta, F, accepted = trial, F_trial, True
                    break
            lam *= 0.5
        if not accepted:
            raise NonConvergenceError(
                f"no descent after {opts.max_halvings} halvings",
                last_beta=beta, residual_norm=res)

    res = float(np.max(np.abs(F)))
    if res <= tol:
        J = weighted_jacobian(model, data, weights, beta)
        return Solution(beta, res, opts.max_iter, J, True)
    raise NonConvergenceError(f"no convergence in {opts.max_iter} iterations",
                              last_beta=beta, residual_norm=res)


def solve_multistart(model, data, weights, starts, options=None):
    """Run the solver from several starts; deduplicate the converged roots."""
    if len(starts) == 0:
        raise ParameterError("need at least one start")
    opts = options or SolveOptions()
    roots, objectives = [], []
    for start in starts:
        trial = SolveOptions(tol=opts.tol, max_iter=opts.max_iter,
                             max_halvings=opts.max_halvings,
                             init=np.asarray(start, float))
        try:
            sol = solve_weighted(model, data, weights, trial)
        except (NonConvergenceError, SingularSystemError, EvaluationError):
            continue
        radius = max(1e-6, 1e-6 * float(np.linalg.norm(sol.beta)))
        if any(np.linalg.norm(sol.beta - r.beta) <= radius for r in roots):
            continue
        roots.append(sol)
        objectives.append(model.objective(data, np.asarray(weights, float), sol.beta))
    if not roots:
        raise EmptyRootSetError("no start converged")
    return RootSet(roots, objectives)
