"""Minimizers of J(x) = |Tx - y|^2 + W(x).

``solve_quadratic`` handles all-quadratic penalizers by matrix-free conjugate
gradients on the normal equations (T*T + sum_i a_i L_i*L_i) x = T*y.
``solve_general`` handles any convex differentiable W by gradient descent with
Armijo backtracking.  ``solve_dense_oracle`` is an independent dense direct
solve used only for verification, and ``limit_to_best_approximate`` tracks the
distance of the regularized minimizers to the pseudo-inverse solution as the
regularization weight shrinks to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import (DefinitenessError, DimensionError, SizeCapError,
                     StagnationError, WrongSolverError)
from .grid import GridFunction
from .operators import (DENSE_CAP, OperatorHandle, assemble_dense,
                        make_identity)
from . import penalizers as pen

MAX_HALVINGS = 60
ARMIJO_C = 1e-4


@dataclass(frozen=True)
class Problem:
    forward: OperatorHandle
    data: GridFunction
    penalizer: pen.Penalizer

    def __post_init__(self):
        if self.data.shape != self.forward.output_shape:
            raise DimensionError(self.forward.output_shape, self.data.shape,
                                 "problem data")
        if self.penalizer.input_shape != self.forward.input_shape:
            raise DimensionError(self.forward.input_shape,
                                 self.penalizer.input_shape,
                                 "problem penalizer")


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 2000
    gradient_tolerance: float = 1e-8
    cg_tolerance: float = 1e-10
    initial_guess: Optional[GridFunction] = None


@dataclass(frozen=True)
class SolveReport:
    minimizer: GridFunction
    iterations: int
    final_gradient_norm: float
    objective_trace: List[float]
    converged: bool


def objective(p: Problem, x: GridFunction) -> float:
    residual = p.forward.apply(x).values - p.data.values
    return float(residual @ residual) + pen.value(p.penalizer, x)


def _quadratic_terms_or_raise(p: Problem):
    terms = pen.quadratic_terms(p.penalizer)
    if terms is None:
        raise WrongSolverError(
            "penalizer is not all-quadratic; use solve_general")
    return terms


def solve_quadratic(p: Problem, opts: SolverOptions = SolverOptions()) -> SolveReport:
    """CG on the normal equations (T*T + sum a_i L_i*L_i) x = T*y."""
    terms = _quadratic_terms_or_raise(p)
    t = p.forward

    def normal_apply(v: np.ndarray) -> np.ndarray:
        xg = GridFunction(*t.input_shape, values=v)
        out = t.apply_adjoint(t.apply(xg)).values.copy()
        for weight, lop in terms:
            out += weight * lop.apply_adjoint(lop.apply(xg)).values
        return out

    b = t.apply_adjoint(p.data).values
    b_norm = np.linalg.norm(b)
    const = float(p.data.values @ p.data.values)
    n = b.size
    x = (np.zeros(n) if opts.initial_guess is None
         else opts.initial_guess.values.copy())
    if opts.initial_guess is not None and opts.initial_guess.shape != t.input_shape:
        raise DimensionError(t.input_shape, opts.initial_guess.shape,
                             "initial guess")

    if b_norm == 0.0 and not np.any(x):
        zero = GridFunction(*t.input_shape, values=x)
        return SolveReport(zero, 0, 0.0, [const], True)

    r = b - normal_apply(x)
    d = r.copy()
    rr = r @ r
    trace = [float(-x @ (b + r) + const)]
    tol = opts.cg_tolerance * max(b_norm, 1e-300)
    iterations = 0
    while np.sqrt(rr) > tol and iterations < opts.max_iterations:
        md = normal_apply(d)
        curvature = d @ md
        if curvature <= 0:
            raise DefinitenessError(
                "normal operator is not positive definite: Rayleigh quotient "
                f"{curvature / (d @ d):.3e}")
        step = rr / curvature
        x += step * d
        r -= step * md
        rr_new = r @ r
        d = r + (rr_new / rr) * d
        rr = rr_new
        iterations += 1
        trace.append(float(-x @ (b + r) + const))
    converged = np.sqrt(rr) <= tol
    return SolveReport(GridFunction(*t.input_shape, values=x), iterations,
                       2.0 * float(np.sqrt(rr)), trace, converged)


def solve_general(p: Problem, opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Gradient descent with Armijo backtracking on the full objective."""
    t = p.forward
    x = (GridFunction.zeros(*t.input_shape) if opts.initial_guess is None
         else opts.initial_guess)
    if x.shape != t.input_shape:
        raise DimensionError(t.input_shape, x.shape, "initial guess")

    def grad_j(xg: GridFunction) -> np.ndarray:
        residual = t.apply(xg).values - p.data.values
        out = 2.0 * t.apply_adjoint(
            GridFunction(*t.output_shape, values=residual)).values
        return out + pen.gradient(p.penalizer, xg).values

    fx = objective(p, x)
    trace = [fx]
    g = grad_j(x)
    gnorm = float(np.linalg.norm(g))
    step = 1.0
    iterations = 0
    while gnorm > opts.gradient_tolerance and iterations < opts.max_iterations:
        gg = gnorm * gnorm
        step = min(step * 2.0, 1e12)
        for _ in range(MAX_HALVINGS):
            candidate = GridFunction(*x.shape, values=x.values - step * g.ravel())
            f_new = objective(p, candidate)
            if f_new <= fx - ARMIJO_C * step * gg:
                break
            step *= 0.5
        else:
            raise StagnationError(
                f"line search stalled after {MAX_HALVINGS} halvings at "
                f"iteration {iterations} (|grad| = {gnorm:.3e}, J = {fx:.6e})")
        x, fx = candidate, f_new
        trace.append(fx)
        g = grad_j(x)
        gnorm = float(np.linalg.norm(g))
        iterations += 1
    return SolveReport(x, iterations, gnorm, trace,
                       gnorm <= opts.gradient_tolerance)


def solve_dense_oracle(p: Problem, cap: int = DENSE_CAP) -> GridFunction:
    """Independent direct solve of the dense normal equations."""
    terms = _quadratic_terms_or_raise(p)
    t_mat = assemble_dense(p.forward, cap=cap)
    m = t_mat.T @ t_mat
    for weight, lop in terms:
        l_mat = assemble_dense(lop, cap=cap)
        m = m + weight * (l_mat.T @ l_mat)
    rhs = t_mat.T @ p.data.values
    try:
        x = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError(f"dense normal matrix is singular: {exc}")
    return GridFunction(*p.forward.input_shape, values=x)


def limit_to_best_approximate(p: Problem, alphas,
                              opts: SolverOptions = SolverOptions(cg_tolerance=1e-13),
                              cap: int = DENSE_CAP):
    """Distances |x_alpha - x_dagger| along a decreasing alpha list.

    The problem's penalizer must be a single quadratic term with the identity
    operator; each alpha replaces its weight.  alpha = 0 is allowed as a
    sentinel and solves the plain least-squares normal equations (T injective
    required).  Returns a list of (alpha, distance, converged) tuples.
    """
    terms = _quadratic_terms_or_raise(p)
    if len(terms) != 1 or terms[0][1].kind != "identity":
        raise WrongSolverError(
            "alpha-limit study requires a single identity-operator term")
    t = p.forward
    n = t.input_shape[0] * t.input_shape[1] * t.input_shape[2]
    if n > cap:
        raise SizeCapError(n, cap)
    t_mat = assemble_dense(t, cap=cap)
    x_dagger = np.linalg.pinv(t_mat) @ p.data.values

    results = []
    for alpha in alphas:
        if alpha > 0:
            prob = Problem(t, p.data, pen.squared_norm(
                make_identity(*t.input_shape), weight=alpha))
        else:
            # least-squares sentinel: alpha = 0 normal equations
            prob = Problem(t, p.data, pen.squared_norm(
                make_identity(*t.input_shape), weight=1e-300))
        report = solve_quadratic(prob, opts)
        dist = float(np.linalg.norm(report.minimizer.values - x_dagger))
        results.append((float(alpha), dist, report.converged))
    return results
