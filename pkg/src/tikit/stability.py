"""Numerical stability laboratory for quadratic regularized problems.

Given a base problem with penalizer W(x) = sum_i a_i |L_i x|^2, this module
perturbs the data y, the weights a_i, and optionally the forward operator T
along a geometrically shrinking schedule, re-solves, and checks:

* convergence of the minimizers x_n to the unperturbed minimizer;
* the explicit perturbation bound
  |xbar - x_n| <= (max_i |a_i^n - a_i| / min_i a_i) |x_n|
                  + |T*| / (k * min(1, min_i a_i)) * |y - y_n|
  (valid when T is unperturbed), where k is the complementation constant,
  the largest k with |Tx|^2 + sum_i |L_i x|^2 >= k |x|^2;
* the closed-form error identity for single-term problems,
  xbar - x_n = (a_n - a) M^{-1} L*L x_n + M^{-1} T* (y - y_n),
  with M = a L*L + T*T;
* the operator bound |M_a^{-1}| <= 1 / (k * min(1, min_i a_i)).
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import DegeneracyWarning, ParameterError
from .grid import GridFunction, norm_l2
from .operators import (DENSE_CAP, OperatorHandle, add_dense_perturbation,
                        assemble_dense)
from . import penalizers as pen
from .solvers import Problem, SolverOptions, solve_quadratic

DEGENERACY_THRESHOLD = 1e-14


@dataclass(frozen=True)
class PerturbationSchedule:
    count: int
    data_deltas: List[GridFunction]
    weight_deltas: List[List[float]]
    operator_deltas: List[Optional[np.ndarray]]
    base_radius: float

    def __post_init__(self):
        for name, seq in (("data_deltas", self.data_deltas),
                          ("weight_deltas", self.weight_deltas),
                          ("operator_deltas", self.operator_deltas)):
            if seq and len(seq) != self.count:
                raise ParameterError(
                    f"{name} has {len(seq)} entries, expected {self.count}")


def geometric_schedule(problem: Problem, count: int, base_radius: float,
                       seed: int = 0, perturb_data: bool = True,
                       perturb_weights: bool = True,
                       perturb_operator: bool = False) -> PerturbationSchedule:
    """Random perturbations with magnitudes base_radius * 2^-n, n = 0..count-1."""
    rng = np.random.default_rng(np.random.Philox(seed))
    terms = pen.quadratic_terms(problem.penalizer)
    if terms is None:
        raise ParameterError("stability schedules require a quadratic penalizer")
    weights = [w for w, _ in terms]
    out_shape = problem.forward.output_shape
    m = out_shape[0] * out_shape[1] * out_shape[2]
    n_in = problem.forward.input_shape
    n = n_in[0] * n_in[1] * n_in[2]

    data_deltas, weight_deltas, operator_deltas = [], [], []
    for step in range(count):
        radius = base_radius * 2.0 ** (-step)
        if perturb_data:
            direction = rng.standard_normal(m)
            direction *= radius / np.linalg.norm(direction)
            data_deltas.append(GridFunction(*out_shape, values=direction))
        if perturb_weights:
            # signed deltas of magnitude radius, kept small enough that the
            # perturbed weights stay positive
            deltas = []
            for w in weights:
                mag = min(radius, 0.5 * w)
                deltas.append(float(rng.choice([-1.0, 1.0]) * mag))
            weight_deltas.append(deltas)
        if perturb_operator:
            e = rng.standard_normal((m, n))
            e *= radius / np.linalg.norm(e, 2)
            operator_deltas.append(e)
    return PerturbationSchedule(count, data_deltas, weight_deltas,
                                operator_deltas, base_radius)


@dataclass(frozen=True)
class StabilityReport:
    errors: List[float]
    bound_values: List[float]
    identity_residuals: List[float]
    k_estimate: float
    passed: bool


def estimate_complementation_constant(t: OperatorHandle, ls,
                                      cap: int = DENSE_CAP) -> float:
    """Smallest eigenvalue of the dense T^T T + sum_i L_i^T L_i."""
    t_mat = assemble_dense(t, cap=cap)
    m = t_mat.T @ t_mat
    for lop in ls:
        l_mat = assemble_dense(lop, cap=cap)
        m = m + l_mat.T @ l_mat
    k = float(np.linalg.eigvalsh(m)[0])
    if k <= DEGENERACY_THRESHOLD:
        warnings.warn(
            f"complementation constant {k:.3e} is numerically zero; "
            "stability bounds are inapplicable", DegeneracyWarning)
    return k


def operator_norm(t: OperatorHandle, cap: int = DENSE_CAP) -> float:
    """|T| = |T*| as sqrt of the largest eigenvalue of the dense T^T T."""
    t_mat = assemble_dense(t, cap=cap)
    return float(np.sqrt(np.linalg.eigvalsh(t_mat.T @ t_mat)[-1]))


def _inverse_apply(t, terms, rhs: np.ndarray, opts: SolverOptions) -> np.ndarray:
    """(T*T + sum a_i L_i*L_i)^{-1} rhs via plain CG."""
    def normal_apply(v):
        xg = GridFunction(*t.input_shape, values=v)
        out = t.apply_adjoint(t.apply(xg)).values.copy()
        for weight, lop in terms:
            out += weight * lop.apply_adjoint(lop.apply(xg)).values
        return out

    x = np.zeros_like(rhs)
    r = rhs.copy()
    d = r.copy()
    rr = r @ r
    tol = opts.cg_tolerance * max(np.linalg.norm(rhs), 1e-300)
    for _ in range(opts.max_iterations):
        if np.sqrt(rr) <= tol:
            break
        md = normal_apply(d)
        step = rr / (d @ md)
        x += step * d
        r -= step * md
        rr_new = r @ r
        d = r + (rr_new / rr) * d
        rr = rr_new
    return x


def check_identity_n3(t: OperatorHandle, lop: OperatorHandle, alpha: float,
                      alpha_n: float, y: GridFunction, y_n: GridFunction,
                      opts: SolverOptions = SolverOptions(cg_tolerance=1e-13)) -> float:
    """Normalized residual of the single-term closed-form error identity."""
    base = Problem(t, y, pen.squared_norm(lop, weight=alpha))
    perturbed = Problem(t, y_n, pen.squared_norm(lop, weight=alpha_n))
    xbar = solve_quadratic(base, opts).minimizer
    x_n = solve_quadratic(perturbed, opts).minimizer
    lhs = xbar.values - x_n.values

    terms = [(alpha, lop)]
    llx = lop.apply_adjoint(lop.apply(x_n)).values
    # exact first-term coefficient is (alpha_n - alpha); verified densely
    first = (alpha_n - alpha) * _inverse_apply(t, terms, llx, opts)
    dy = GridFunction(*y.shape, values=y.values - y_n.values)
    second = _inverse_apply(t, terms, t.apply_adjoint(dy).values, opts)
    rhs = first + second
    return float(np.linalg.norm(lhs - rhs) / (1.0 + norm_l2(xbar)))


def check_operator_bounds_q2_q3(t: OperatorHandle, ls, alphas,
                                cap: int = DENSE_CAP):
    """(measured norm of (T*T + sum a_i L_i*L_i)^{-1}, theoretical cap)."""
    if len(ls) != len(alphas):
        raise ParameterError("one weight per operator required")
    k = estimate_complementation_constant(t, ls, cap=cap)
    t_mat = assemble_dense(t, cap=cap)
    m = t_mat.T @ t_mat
    for alpha, lop in zip(alphas, ls):
        l_mat = assemble_dense(lop, cap=cap)
        m = m + alpha * (l_mat.T @ l_mat)
    measured = float(1.0 / np.linalg.eigvalsh(m)[0])
    cap_value = 1.0 / (k * min(1.0, min(alphas)))
    return measured, cap_value


def run_stability_experiment(problem: Problem, schedule: PerturbationSchedule,
                             opts: SolverOptions = SolverOptions(cg_tolerance=1e-13),
                             tolerance_factor: float = 0.01,
                             cap: int = DENSE_CAP) -> StabilityReport:
    terms = pen.quadratic_terms(problem.penalizer)
    if terms is None:
        raise ParameterError("stability experiments require a quadratic penalizer")
    weights = [w for w, _ in terms]
    ops = [op for _, op in terms]
    t = problem.forward
    k = estimate_complementation_constant(t, ops, cap=cap)
    t_norm = operator_norm(t, cap=cap)

    base_report = solve_quadratic(problem, opts)
    xbar = base_report.minimizer

    errors, bounds, residuals = [], [], []
    single_term = len(terms) == 1
    for n in range(schedule.count):
        y_n = problem.data
        if schedule.data_deltas:
            y_n = GridFunction(*y_n.shape,
                               values=y_n.values + schedule.data_deltas[n].values)
        weights_n = list(weights)
        if schedule.weight_deltas:
            weights_n = [w + d for w, d in zip(weights, schedule.weight_deltas[n])]
        t_n = t
        operator_perturbed = bool(schedule.operator_deltas) and \
            schedule.operator_deltas[n] is not None
        if operator_perturbed:
            t_n = add_dense_perturbation(t, schedule.operator_deltas[n], cap=cap)

        perturbed = Problem(t_n, y_n, pen.make_weighted_sum(
            [pen.PenaltyTerm(w, op, 2.0) for w, op in zip(weights_n, ops)]))
        x_n = solve_quadratic(perturbed, opts).minimizer
        err = float(np.linalg.norm(xbar.values - x_n.values))
        errors.append(err)

        if operator_perturbed:
            # the explicit bound assumes T_n = T; only convergence is checked
            bounds.append(math.inf)
            residuals.append(math.nan)
            continue
        alpha_gap = max(abs(wn - w) for wn, w in zip(weights_n, weights)) \
            if schedule.weight_deltas else 0.0
        dy = float(np.linalg.norm(y_n.values - problem.data.values))
        bound = (alpha_gap / min(weights)) * float(np.linalg.norm(x_n.values)) \
            + (t_norm / (k * min(1.0, min(weights)))) * dy
        bounds.append(bound)
        if single_term:
            residuals.append(check_identity_n3(
                t, ops[0], weights[0], weights_n[0], problem.data, y_n, opts))
        else:
            residuals.append(math.nan)

    finite_pairs = [(e, b) for e, b in zip(errors, bounds) if math.isfinite(b)]
    passed = errors[-1] <= errors[0] * tolerance_factor
    passed = passed and all(e <= b * (1.0 + 1e-8) for e, b in finite_pairs)
    passed = passed and all(r <= 1e-8 for r in residuals if not math.isnan(r))
    return StabilityReport(errors, bounds, residuals, k, passed)


def stability_csv(report: StabilityReport,
                  schedule: PerturbationSchedule) -> str:
    """CSV with columns n, delta_y, delta_alpha_max, error, q4_bound, n3_residual."""
    buf = io.StringIO()
    buf.write("n,delta_y,delta_alpha_max,error,q4_bound,n3_residual\n")
    for n in range(schedule.count):
        dy = norm_l2(schedule.data_deltas[n]) if schedule.data_deltas else 0.0
        da = max(abs(d) for d in schedule.weight_deltas[n]) \
            if schedule.weight_deltas else 0.0
        buf.write(f"{n},{dy!r},{da!r},{report.errors[n]!r},"
                  f"{report.bound_values[n]!r},{report.identity_residuals[n]!r}\n")
    return buf.getvalue()


def probe_uniqueness(problem: Problem, starts: int, seed: int = 0,
                     opts: SolverOptions = SolverOptions(
                         gradient_tolerance=1e-10, max_iterations=20000),
                     start_scale: float = 1.0) -> float:
    """Max pairwise distance between minimizers from random initial guesses."""
    from .solvers import solve_general
    rng = np.random.default_rng(np.random.Philox(seed))
    shape = problem.forward.input_shape
    n = shape[0] * shape[1] * shape[2]
    minimizers = []
    for _ in range(starts):
        x0 = GridFunction(*shape, values=start_scale * rng.standard_normal(n))
        minimizers.append(solve_general(problem, SolverOptions(
            max_iterations=opts.max_iterations,
            gradient_tolerance=opts.gradient_tolerance,
            cg_tolerance=opts.cg_tolerance,
            initial_guess=x0)).minimizer.values)
    spread = 0.0
    for i in range(len(minimizers)):
        for j in range(i + 1, len(minimizers)):
            spread = max(spread, float(np.linalg.norm(minimizers[i] - minimizers[j])))
    return spread
