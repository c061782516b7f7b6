"""L-curve selection of the regularization weight.

A sweep solves the problem for each alpha in a descending grid (warm-starting
from the previous minimizer), records (|Tx_a - y|, W(x_a)) with W the
unweighted penalty, and the corner picks the alpha of maximum discrete
(Menger) curvature on the log-log curve.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import NoCornerError, ParameterError, SweepError, TikitError
from .grid import GridFunction
from . import penalizers as pen
from .solvers import Problem, SolverOptions, solve_general, solve_quadratic

LOG_FLOOR = 1e-300
MIN_POINTS = 5


def default_alpha_grid(count: int = 25, decades: float = 6.0,
                       upper: float = 1.0) -> List[float]:
    """Descending log-spaced grid spanning `decades` below `upper`."""
    return list(np.logspace(np.log10(upper), np.log10(upper) - decades,
                            count))


@dataclass(frozen=True)
class LCurve:
    alphas: List[float]
    residual_norms: List[float]
    penalty_values: List[float]
    flags: List[bool]
    corner_index: Optional[int] = None

    def valid_points(self):
        return [i for i, bad in enumerate(self.flags) if not bad]


def sweep(forward, data: GridFunction, base_penalizer: pen.Penalizer, alphas,
          opts: SolverOptions = SolverOptions()) -> LCurve:
    """Solve per alpha and record the residual and penalty columns.

    `base_penalizer` is the unweighted W; the objective per grid point is
    |Tx - y|^2 + alpha * W(x).  Quadratic penalizers go through the CG path,
    anything else through gradient descent.
    """
    alphas = [float(a) for a in alphas]
    if len(alphas) < MIN_POINTS:
        raise ParameterError(f"need at least {MIN_POINTS} alphas, got {len(alphas)}")
    if any(a <= 0 for a in alphas):
        raise ParameterError("alphas must be strictly positive")
    # any input order is accepted; solves run from the largest alpha down
    order = np.argsort(alphas)[::-1]
    quadratic = pen.quadratic_terms(base_penalizer) is not None

    residuals = [math.nan] * len(alphas)
    penalties = [math.nan] * len(alphas)
    flags = [True] * len(alphas)
    warm: Optional[GridFunction] = None
    for idx in order:
        alpha = alphas[idx]
        problem = Problem(forward, data, pen.scale(base_penalizer, alpha))
        run_opts = SolverOptions(max_iterations=opts.max_iterations,
                                 gradient_tolerance=opts.gradient_tolerance,
                                 cg_tolerance=opts.cg_tolerance,
                                 initial_guess=warm)
        try:
            solver = solve_quadratic if quadratic else solve_general
            report = solver(problem, run_opts)
        except TikitError:
            continue
        warm = report.minimizer
        residual = float(np.linalg.norm(
            forward.apply(report.minimizer).values - data.values))
        penalty = pen.value(base_penalizer, report.minimizer)
        bad = False
        if residual <= 0.0:
            residual, bad = LOG_FLOOR, True
        if penalty <= 0.0:
            penalty, bad = LOG_FLOOR, True
        residuals[idx] = residual
        penalties[idx] = penalty
        flags[idx] = bad

    valid = [i for i in range(len(alphas)) if not math.isnan(residuals[i])]
    if len(valid) < MIN_POINTS:
        raise SweepError(
            f"only {len(valid)} alphas solved successfully; need {MIN_POINTS}")
    return LCurve(alphas, residuals, penalties, flags)


def _menger_curvature(p0, p1, p2) -> float:
    """Signed curvature of the circle through three points."""
    a = np.asarray(p1) - np.asarray(p0)
    b = np.asarray(p2) - np.asarray(p1)
    cross = a[0] * b[1] - a[1] * b[0]
    la = np.hypot(*a)
    lb = np.hypot(*b)
    lc = np.hypot(*(np.asarray(p2) - np.asarray(p0)))
    denom = la * lb * lc
    if denom == 0.0:
        return 0.0
    return float(2.0 * cross / denom)


def curvatures(curve: LCurve) -> List[float]:
    """Signed Menger curvature per point (0 at endpoints and flagged points).

    Points are traversed in order of increasing alpha, i.e. increasing
    residual; with that orientation an L-shaped corner has positive sign.
    """
    pts = sorted(curve.valid_points(), key=lambda i: curve.alphas[i])
    kappa = [0.0] * len(curve.alphas)
    logpts = {i: (math.log(curve.residual_norms[i]),
                  math.log(curve.penalty_values[i])) for i in pts}
    for a, b, c in zip(pts, pts[1:], pts[2:]):
        kappa[b] = _menger_curvature(logpts[a], logpts[b], logpts[c])
    return kappa


def corner(curve: LCurve):
    """(alpha_star, index) of the maximum-curvature convex corner."""
    if len(curve.valid_points()) < MIN_POINTS:
        raise ParameterError(
            f"corner detection needs {MIN_POINTS} unflagged points")
    kappa = curvatures(curve)
    if max(abs(k) for k in kappa) <= 1e-12:
        raise NoCornerError("log-log points are collinear; no corner exists")
    best = None
    for i, k in enumerate(kappa):
        if k <= 0.0:
            continue
        if best is None or k > kappa[best] or \
                (k == kappa[best] and curve.alphas[i] > curve.alphas[best]):
            best = i
    if best is None:
        raise NoCornerError("no convex corner found (all curvature concave)")
    return curve.alphas[best], best


def lcurve_csv(curve: LCurve) -> str:
    """CSV with columns alpha, residual, penalty, curvature, is_corner."""
    kappa = curvatures(curve)
    try:
        _, corner_idx = corner(curve)
    except TikitError:
        corner_idx = None
    buf = io.StringIO()
    buf.write("alpha,residual,penalty,curvature,is_corner\n")
    for i, alpha in enumerate(curve.alphas):
        buf.write(f"{alpha!r},{curve.residual_norms[i]!r},"
                  f"{curve.penalty_values[i]!r},{kappa[i]!r},"
                  f"{int(i == corner_idx)}\n")
    return buf.getvalue()
