"""Damped-Newton minimizer for the strongly convex subproblems.

Each outer iteration minimizes F(x) = g(x) - <b, x> (optionally plus a
proximal term).  F inherits g's curvature, so a Cholesky-based Newton
method with a small Armijo safeguard converges in a handful of steps from
the warm start.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .exceptions import EvaluationOverflow, NumericalError

__all__ = ("InnerConfig", "SubproblemSpec", "spd_solve", "minimize_subproblem")

_ARMIJO_C1 = 1e-4
_MAX_HALVINGS = 60
_RESIDUAL_RTOL = 1e-10
_REFINEMENT_PASSES = 3


@dataclass
class InnerConfig:
    """Termination and damping controls for the Newton loop."""

    tol_grad: float = 1e-8
    max_iters: int = 200
    damping_floor: float = 1e-10

    def __post_init__(self):
        if self.tol_grad <= 0:
            raise ValueError(f"tol_grad must be positive, got {self.tol_grad}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.damping_floor <= 0:
            raise ValueError(f"damping_floor must be positive, got {self.damping_floor}")


@dataclass
class SubproblemSpec:
    """F(x) = g(x) - <linear_term, x> [+ (1/(2*proximal_c))||x - center||^2].

    ``eval_g`` maps x to (value, gradient, Hessian); ``value_g`` is an
    optional value-only fast path used for line-search trials.  ``modulus``
    records the strong-convexity constant of g (0 allowed: the Newton loop
    still works on strictly convex problems, without the modulus-based
    guarantees).
    """

    eval_g: Callable
    linear_term: np.ndarray
    modulus: float = 0.0
    value_g: Optional[Callable] = None
    proximal_center: Optional[np.ndarray] = None
    proximal_c: Optional[float] = None

    def __post_init__(self):
        self.linear_term = np.asarray(self.linear_term, dtype=float)
        if self.modulus < 0:
            raise ValueError(f"modulus must be nonnegative, got {self.modulus}")
        if (self.proximal_center is None) != (self.proximal_c is None):
            raise ValueError("proximal_center and proximal_c must be set together")
        if self.proximal_c is not None:
            if self.proximal_c <= 0:
                raise ValueError(f"proximal_c must be positive, got {self.proximal_c}")
            self.proximal_center = np.asarray(self.proximal_center, dtype=float)

    def objective(self, x):
        """Value, gradient and Hessian of F at x."""
        v, grad, hess = self.eval_g(x)
        x = np.asarray(x, dtype=float)
        v = float(v) - float(self.linear_term @ x)
        grad = np.asarray(grad, dtype=float) - self.linear_term
        hess = np.asarray(hess, dtype=float)
        if self.proximal_c is not None:
            dx = x - self.proximal_center
            w = 1.0 / self.proximal_c
            v += 0.5 * w * float(dx @ dx)
            grad = grad + w * dx
            hess = hess + w * np.eye(x.size)
        return v, grad, hess

    def value(self, x):
        """Value of F at x, via the fast path when available."""
        x = np.asarray(x, dtype=float)
        if self.value_g is not None:
            v = float(self.value_g(x))
        else:
            v = float(self.eval_g(x)[0])
        v -= float(self.linear_term @ x)
        if self.proximal_c is not None:
            dx = x - self.proximal_center
            v += 0.5 * float(dx @ dx) / self.proximal_c
        return v


def spd_solve(hess, rhs, damping_floor=1e-10):
    """Solve (hess + mu*I) d = rhs with the smallest workable damping mu.

    Tries mu = 0 first, then damping_floor * 4^j.  A solve is accepted once
    Cholesky succeeds and (after at most a few refinement passes) the
    relative residual is at or below 1e-10.  Returns ``(d, mu)``.

    Raises NumericalError for non-finite input or when the damping needed
    exceeds 1e6 times the Hessian's infinity norm.
    """
    hess = np.asarray(hess, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if not (np.all(np.isfinite(hess)) and np.all(np.isfinite(rhs))):
        raise NumericalError("non-finite Hessian or right-hand side")

    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), 0.0

    hess_scale = float(np.linalg.norm(hess, np.inf))
    mu_cap = 1e6 * max(hess_scale, 1.0)
    mu = 0.0
    while True:
        shifted = hess if mu == 0.0 else hess + mu * np.eye(hess.shape[0])
        try:
            factor = scipy.linalg.cho_factor(shifted, check_finite=False)
        except scipy.linalg.LinAlgError:
            factor = None
        if factor is not None:
            d = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
            for _ in range(_REFINEMENT_PASSES):
                resid = rhs - shifted @ d
                if np.linalg.norm(resid) <= _RESIDUAL_RTOL * rhs_norm:
                    break
                d = d + scipy.linalg.cho_solve(factor, resid, check_finite=False)
            if (np.all(np.isfinite(d))
                    and np.linalg.norm(rhs - shifted @ d) <= _RESIDUAL_RTOL * rhs_norm):
                return d, mu
        mu = damping_floor if mu == 0.0 else 4.0 * mu
        if mu > mu_cap:
            raise NumericalError(
                f"damping exceeded {mu_cap:.3g} without a reliable factorization"
            )


def minimize_subproblem(spec, x_init, config=None):
    """Minimize a strongly convex subproblem by damped Newton steps.

    Stops when ||grad F|| <= tol_grad * max(1, ||grad F(x_init)||): far
    from a solution the test is relative to the warm start's residual (an
    absolute 1e-8 is unreachable there, the gradient's own rounding floor
    is larger), near one it is the plain absolute tolerance.

    Returns ``(x, iterations)`` where ``iterations`` counts Newton steps
    taken; 0 when the warm start already meets the gradient tolerance.

    Raises NumericalError on non-finite derivatives at an accepted point,
    on exhausted damping, or when the iteration or line-search budget runs
    out before the tolerance is met.
    """
    if config is None:
        config = InnerConfig()
    x = np.asarray(x_init, dtype=float).copy()

    value, grad, hess = _evaluate(spec, x)
    tol = config.tol_grad * max(1.0, float(np.linalg.norm(grad)))
    for iteration in range(config.max_iters + 1):
        if np.linalg.norm(grad) <= tol:
            return x, iteration
        if iteration == config.max_iters:
            break
        direction, _ = spd_solve(hess, -grad, config.damping_floor)
        slope = float(grad @ direction)
        if slope >= 0.0:
            # descent failed despite damping: direction numerically useless
            raise NumericalError("Newton direction is not a descent direction")

        noise = 8.0 * np.finfo(float).eps * (1.0 + abs(value))
        if -slope <= noise:
            # Predicted decrease sits below the value's rounding floor, so
            # the Armijo test cannot discriminate.  Take the full step as
            # long as the value does not rise beyond that floor; the
            # gradient keeps contracting through the quadratic phase.
            trial = x + direction
            if np.array_equal(trial, x):
                raise NumericalError("inner step vanished below machine resolution")
            if _trial_value(spec, trial) > value + noise:
                raise NumericalError("inner step stalled at the value resolution floor")
            x = trial
            value, grad, hess = _evaluate(spec, x)
            continue

        step = 1.0
        x_new = None
        for _ in range(_MAX_HALVINGS):
            trial = x + step * direction
            trial_value = _trial_value(spec, trial)
            if trial_value <= value + _ARMIJO_C1 * step * slope:
                x_new = trial
                break
            step *= 0.5
        if x_new is None:
            raise NumericalError("inner line search exhausted its halvings")
        if np.array_equal(x_new, x):
            raise NumericalError("inner step vanished below machine resolution")
        x = x_new
        value, grad, hess = _evaluate(spec, x)

    raise NumericalError(
        f"inner solver did not reach its gradient tolerance {tol:g} "
        f"in {config.max_iters} iterations"
    )


def _evaluate(spec, x):
    try:
        value, grad, hess = spec.objective(x)
    except EvaluationOverflow as exc:
        raise NumericalError(f"objective overflow at an accepted point: {exc}") from exc
    if not (np.isfinite(value) and np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
        raise NumericalError("non-finite subproblem derivatives at an accepted point")
    return value, np.asarray(grad, dtype=float), np.asarray(hess, dtype=float)


def _trial_value(spec, x):
    # non-finite trial values are treated as +inf so the Armijo test rejects
    try:
        v = spec.value(x)
    except (EvaluationOverflow, FloatingPointError, OverflowError):
        return np.inf
    return v if np.isfinite(v) else np.inf
